"""Optional splitting of processes under progressive enlargement of filtrations."""

__version__ = "0.1.0"
