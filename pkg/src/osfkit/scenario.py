"""Scenario files: parsing, validation, canonical serialization and execution.

Scenarios are YAML (JSON is accepted too).  Exact quantities are written as
integers or rational strings such as ``"2/3"``; ``inf`` marks an infinite
time.  Validation errors point at the offending node's line and column.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import yaml

from . import __version__
from .checks import CATALOG, MONTE_CARLO_CHECKS, FiniteContext, run_checks
from .core import INF, Filtration, FiniteSpace, Partition, Process
from .enlargement import MarkedTime
from .models import (
    CoxSpec,
    DensityModel,
    MarkedDensityModel,
    build_cox,
    build_density_model,
    build_marked_density_model,
)
from .montecarlo.barlow import barlow_statistics
from .montecarlo.natural import (
    NaturalModelSpec,
    drift_orthogonality,
    euler_convergence,
    monotonicity_report,
    projection_condition_estimate,
    run_study,
)
from .montecarlo.paths import EnsembleConfig, simulate_paths
from .reports import FAIL, PASS, VACUOUS, CheckReport

KINDS = ("finite-model", "density-model", "cox-model", "barlow-demo", "natural-demo")
FORMATS = ("json", "csv")
FINITE_KINDS = ("finite-model", "density-model", "cox-model")

_TIME_CHECKS = tuple(name for name, c in CATALOG.items() if c.needs == "time" and name != "hypothesis-H")
ALLOWED = {
    "finite-model": _TIME_CHECKS + ("hypothesis-H", "osf-marked", "covering", "sh-measure"),
    "cox-model": _TIME_CHECKS + ("hypothesis-H", "covering", "sh-measure"),
    "density-model": _TIME_CHECKS + ("hypothesis-H", "osf-marked", "density-formula", "marked-density-formula"),
    "barlow-demo": ("barlow",),
    "natural-demo": ("natural-euler", "natural-projection", "natural-drift", "natural-monotone"),
}
DEFAULT_CHECKS = {
    "finite-model": ("osf-single", "osf-multi", "right-continuity", "f-tau", "graph-criterion", "pre-default-trace"),
    "cox-model": ("hypothesis-H", "osf-single"),
    "density-model": ("density-formula", "osf-single"),
    "barlow-demo": ("barlow",),
    "natural-demo": ("natural-euler", "natural-projection", "natural-drift", "natural-monotone"),
}


class ScenarioError(ValueError):
    """Invalid scenario; ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message, line=None, column=None):
        self.message, self.line, self.column = message, line, column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class EngineError(RuntimeError):
    """A check raised while executing a valid scenario."""


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    model: dict
    checks: tuple
    output: dict = field(default_factory=dict)
    seed: int = 0

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and to_canonical(self) == to_canonical(other)

    def __hash__(self):
        return hash(serialize(self))


# reading


class _Doc:
    """Parsed data plus the source position of every node, keyed by path."""

    def __init__(self, text: str):
        try:
            loader = yaml.SafeLoader(text)
            try:
                node = loader.get_single_node()
                self.data = loader.construct_document(node) if node is not None else None
            finally:
                loader.dispose()
        except yaml.MarkedYAMLError as exc:
            mark = exc.problem_mark or exc.context_mark
            raise ScenarioError(f"malformed YAML: {exc.problem or exc.context}",
                                mark.line + 1 if mark else None, mark.column + 1 if mark else None) from None
        self.marks: dict = {}
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.marks[path] = (node.start_mark.line + 1, node.start_mark.column + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.marks[path + (str(k.value), "<key>")] = (k.start_mark.line + 1, k.start_mark.column + 1)
                self._walk(v, path + (str(k.value),))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def error(self, path, message):
        path = tuple(path)
        while path and path not in self.marks:
            path = path[:-1]
        line, col = self.marks.get(path, (None, None))
        return ScenarioError(message, line, col)


def _rational(doc, path, v, what="value"):
    if isinstance(v, bool):
        raise doc.error(path, f"{what} must be a number, got a boolean")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise doc.error(path, f"{what} must be finite")
        return Fraction(str(v))
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            pass
    raise doc.error(path, f"{what} must be an integer or a rational string like \"2/3\", got {v!r}")


def _time(doc, path, v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", "never"):
        return INF
    if isinstance(v, float) and v == math.inf:
        return INF
    if isinstance(v, int) and not isinstance(v, bool) and v >= 0:
        return v
    raise doc.error(path, f"time must be a nonnegative integer or inf, got {v!r}")


def _req(doc, d, path, key, kind=None):
    if not isinstance(d, dict) or key not in d:
        raise doc.error(path, f"missing required field {key!r}")
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        raise doc.error(path + (key,), f"field {key!r} must be a {kind.__name__ if isinstance(kind, type) else 'list'}")
    return v


def _only(doc, d, path, allowed):
    for k in d:
        if k not in allowed:
            raise doc.error(path + (str(k), "<key>"), f"unknown field {k!r}; expected one of {sorted(allowed)}")


def _times_list(doc, path, values, n, what):
    if not isinstance(values, list) or len(values) != n:
        raise doc.error(path, f"{what} needs one entry per outcome ({n})")
    return tuple(_time(doc, path + (i,), v) for i, v in enumerate(values))


def _base(doc, m, path):
    outcomes = _req(doc, m, path, "outcomes", list)
    if not outcomes:
        raise doc.error(path + ("outcomes",), "at least one outcome is required")
    for i, o in enumerate(outcomes):
        if not isinstance(o, (str, int)) or isinstance(o, bool):
            raise doc.error(path + ("outcomes", i), "outcome labels must be strings or integers")
    if len(set(outcomes)) != len(outcomes):
        raise doc.error(path + ("outcomes",), "outcome labels must be distinct")
    n = len(outcomes)
    index = {o: i for i, o in enumerate(outcomes)}
    if "probs" in m:
        probs = m["probs"]
        if not isinstance(probs, list) or len(probs) != n:
            raise doc.error(path + ("probs",), f"probs needs one entry per outcome ({n})")
        probs = tuple(_rational(doc, path + ("probs", i), p, "probability") for i, p in enumerate(probs))
        if any(p <= 0 for p in probs):
            raise doc.error(path + ("probs",), "probabilities must be strictly positive")
        if sum(probs) != 1:
            raise doc.error(path + ("probs",), f"probabilities sum to {sum(probs)}, not 1")
    else:
        probs = (Fraction(1, n),) * n
    filt = _req(doc, m, path, "filtration", list)
    if not filt:
        raise doc.error(path + ("filtration",), "the filtration needs at least time 0")
    parts = []
    for t, blocks in enumerate(filt):
        p = path + ("filtration", t)
        if not isinstance(blocks, list):
            raise doc.error(p, "each time is a list of blocks")
        seen = []
        canon = []
        for b, block in enumerate(blocks):
            if not isinstance(block, list) or not block:
                raise doc.error(p + (b,), "each block is a nonempty list of outcomes")
            for j, o in enumerate(block):
                if o not in index:
                    raise doc.error(p + (b, j), f"unknown outcome {o!r}")
                seen.append(o)
            canon.append(block)
        if sorted(map(index.get, seen)) != list(range(n)):
            raise doc.error(p, f"blocks at time {t} must cover every outcome exactly once")
        parts.append(Partition.from_blocks([[index[o] for o in block] for block in canon], n))
    for t in range(1, len(parts)):
        if not parts[t].refines(parts[t - 1]):
            raise doc.error(path + ("filtration", t), f"time {t} does not refine time {t - 1}")
    base = {"outcomes": tuple(outcomes), "probs": probs,
            "filtration": tuple(tuple(tuple(outcomes[w] for w in blk) for blk in part.blocks) for part in parts)}
    return base, n, len(parts) - 1, index


def _check_grid(doc, path, times, T):
    for i, v in enumerate(times):
        if v != INF and v > T:
            raise doc.error(path + (i,), f"time {v} lies beyond the horizon {T}")


def _finite_payload(doc, m, path):
    _only(doc, m, path, {"outcomes", "probs", "filtration", "times", "marks", "alphabet", "stopping", "covering",
                         "sh_measure"})
    base, n, T, index = _base(doc, m, path)
    times_raw = _req(doc, m, path, "times", list)
    if not times_raw:
        raise doc.error(path + ("times",), "at least one random time is required")
    times = []
    for i, tv in enumerate(times_raw):
        tt = _times_list(doc, path + ("times", i), tv, n, "a random time")
        _check_grid(doc, path + ("times", i), tt, T)
        times.append(tt)
    out = dict(base, times=tuple(times))
    if "marks" in m:
        alphabet = _req(doc, m, path, "alphabet", list)
        marks = m["marks"]
        if not isinstance(marks, list) or len(marks) != len(times):
            raise doc.error(path + ("marks",), "marks need one list per random time")
        for i, mk in enumerate(marks):
            if not isinstance(mk, list) or len(mk) != n:
                raise doc.error(path + ("marks", i), f"marks need one entry per outcome ({n})")
            for j, x in enumerate(mk):
                if x not in alphabet:
                    raise doc.error(path + ("marks", i, j), f"mark {x!r} is not in the alphabet")
        out["marks"] = tuple(tuple(mk) for mk in marks)
        out["alphabet"] = tuple(alphabet)
    elif "alphabet" in m:
        raise doc.error(path + ("alphabet", "<key>"), "alphabet given without marks")
    if "stopping" in m:
        rs = []
        for i, r in enumerate(_req(doc, m, path, "stopping", list)):
            rr = _times_list(doc, path + ("stopping", i), r, n, "a stopping time")
            _check_grid(doc, path + ("stopping", i), rr, T)
            rs.append(rr)
        out["stopping"] = tuple(rs)
    if "covering" in m:
        fam = []
        for j, pair in enumerate(_req(doc, m, path, "covering", list)):
            if not isinstance(pair, list) or len(pair) != 2:
                raise doc.error(path + ("covering", j), "each covering interval is a pair [S, T]")
            fam.append(tuple(_times_list(doc, path + ("covering", j, k), pair[k], n, "an interval end")
                             for k in range(2)))
        out["covering"] = tuple(fam)
    if "sh_measure" in m:
        sh = _req(doc, m, path, "sh_measure", dict)
        p = path + ("sh_measure",)
        _only(doc, sh, p, {"density", "s", "t"})
        dens = _req(doc, sh, p, "density", list)
        if len(dens) != n:
            raise doc.error(p + ("density",), f"density needs one entry per outcome ({n})")
        out["sh_measure"] = {
            "density": tuple(_rational(doc, p + ("density", i), v, "density") for i, v in enumerate(dens)),
            "s": _times_list(doc, p + ("s",), _req(doc, sh, p, "s"), n, "S"),
            "t": _times_list(doc, p + ("t",), _req(doc, sh, p, "t"), n, "T"),
        }
    return out


def _weights(doc, path, raw, key_fn):
    """Mapping or list of pairs -> sorted tuple of (key, Fraction)."""
    if isinstance(raw, dict):
        items = [(key_fn(path + (str(k),), k), _rational(doc, path + (str(k),), v, "weight")) for k, v in raw.items()]
    elif isinstance(raw, list):
        items = []
        for i, pair in enumerate(raw):
            if not isinstance(pair, list) or len(pair) != 2:
                raise doc.error(path + (i,), "expected a [key, weight] pair")
            items.append((key_fn(path + (i, 0), pair[0]), _rational(doc, path + (i, 1), pair[1], "weight")))
    else:
        raise doc.error(path, "expected a mapping or a list of pairs")
    keys = [k for k, _ in items]
    if len(set(keys)) != len(keys):
        raise doc.error(path, "duplicate keys")
    return tuple(sorted(items, key=lambda kv: _sort_key(kv[0])))


def _sort_key(k):
    if isinstance(k, tuple):
        return tuple(_sort_key(x) for x in k)
    if k == INF:
        return (2, 0, "")
    if isinstance(k, (int, Fraction)):
        return (0, k, "")
    return (1, 0, str(k))


def _cox_payload(doc, m, path):
    _only(doc, m, path, {"outcomes", "probs", "filtration", "hazard", "threshold", "covering", "sh_measure"})
    base, n, T, _ = _base(doc, m, path)
    hz = _req(doc, m, path, "hazard", list)
    if len(hz) != T + 1:
        raise doc.error(path + ("hazard",), f"hazard needs one row per time ({T + 1})")
    rows = []
    for t, row in enumerate(hz):
        if not isinstance(row, list) or len(row) != n:
            raise doc.error(path + ("hazard", t), f"hazard rows need one entry per outcome ({n})")
        rows.append(tuple(_rational(doc, path + ("hazard", t, i), v, "hazard") for i, v in enumerate(row)))
    law = _weights(doc, path + ("threshold",), _req(doc, m, path, "threshold"),
                   lambda p, k: _rational(doc, p, k, "threshold value"))
    out = dict(base, hazard=tuple(rows), threshold=law)
    extra = {k: m[k] for k in ("covering", "sh_measure") if k in m}
    if extra:
        raise doc.error(path + (next(iter(extra)), "<key>"),
                        "covering and sh_measure need explicit product outcomes; use a finite-model scenario")
    return out


def _density_payload(doc, m, path):
    _only(doc, m, path, {"outcomes", "probs", "filtration", "mu", "nu", "gamma", "alphabet"})
    base, n, T, _ = _base(doc, m, path)
    marked = "nu" in m
    if marked == ("mu" in m):
        raise doc.error(path, "give exactly one of mu (plain density) or nu (marked density)")
    out = dict(base)
    if marked:
        alphabet = tuple(_req(doc, m, path, "alphabet", list))
        out["alphabet"] = alphabet

        def pair_key(p, k):
            if not isinstance(k, list) or len(k) != 2:
                raise doc.error(p, "nu keys are [mark, time] pairs")
            if k[0] not in alphabet:
                raise doc.error(p, f"mark {k[0]!r} is not in the alphabet")
            return (k[0], _time(doc, p, k[1]))

        out["nu"] = _weights(doc, path + ("nu",), m["nu"], pair_key)
    else:
        out["mu"] = _weights(doc, path + ("mu",), m["mu"], lambda p, k: _time(doc, p, k))
    gamma = []
    for i, entry in enumerate(_req(doc, m, path, "gamma", list)):
        p = path + ("gamma", i)
        if not isinstance(entry, dict):
            raise doc.error(p, "gamma entries are mappings with time, values (and mark)")
        _only(doc, entry, p, {"time", "mark", "values"} if marked else {"time", "values"})
        u = _time(doc, p + ("time",), _req(doc, entry, p, "time"))
        vals = _req(doc, entry, p, "values", list)
        if len(vals) != n:
            raise doc.error(p + ("values",), f"values need one entry per outcome ({n})")
        vals = tuple(_rational(doc, p + ("values", j), v, "density") for j, v in enumerate(vals))
        key = (_req(doc, entry, p, "mark"), u) if marked else u
        gamma.append((key, vals))
    keys = [k for k, _ in gamma]
    if len(set(keys)) != len(keys):
        raise doc.error(path + ("gamma",), "duplicate gamma entries")
    out["gamma"] = tuple(sorted(gamma, key=lambda kv: _sort_key(kv[0])))
    for k in keys:
        if k not in dict(out["nu" if marked else "mu"]):
            raise doc.error(path + ("gamma",), f"gamma charges {k!r}, which the reference law does not")
    return out


_BARLOW_FIELDS = {"paths": 100000, "dt": 0.001, "horizon": 2.0, "seed": None, "increments": "rademacher",
                  "guard_time": None, "tolerance": 0.02, "workers": 1}
_NATURAL_FIELDS = {"paths": 100000, "dt": 0.01, "horizon": 1.0, "seed": None, "euler_paths": 4000,
                   "euler_dts": [0.004, 0.002, 0.001], "workers": 1, "spec": {}}


def _demo_payload(doc, m, path, defaults):
    m = m or {}
    if not isinstance(m, dict):
        raise doc.error(path, "the demo payload is a mapping")
    _only(doc, m, path, set(defaults))
    out = {}
    for k, default in defaults.items():
        v = m.get(k, default)
        if k in ("paths", "euler_paths", "workers"):
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise doc.error(path + (k,), f"{k} must be a positive integer")
        elif k in ("dt", "horizon", "tolerance") or (k == "guard_time" and v is not None):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise doc.error(path + (k,), f"{k} must be a positive number")
            v = float(v)
        elif k == "seed" and v is not None:
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise doc.error(path + (k,), "seed must be a nonnegative integer")
        elif k == "increments" and v not in ("gaussian", "rademacher"):
            raise doc.error(path + (k,), "increments must be gaussian or rademacher")
        elif k == "euler_dts":
            if not isinstance(v, list) or len(v) < 2 or not all(isinstance(x, (int, float)) and x > 0 for x in v):
                raise doc.error(path + (k,), "euler_dts is a list of at least two positive step sizes")
            v = tuple(float(x) for x in v)
        elif k == "spec":
            if not isinstance(v, dict):
                raise doc.error(path + (k,), "spec is a mapping of model options")
            try:
                NaturalModelSpec(**v)
            except (TypeError, ValueError) as exc:
                raise doc.error(path + (k,), f"invalid model spec: {exc}") from None
            v = dict(sorted(v.items()))
        out[k] = v
    return out


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate scenario text; raises :class:`ScenarioError`."""
    doc = _Doc(text)
    d = doc.data
    if not isinstance(d, dict):
        raise doc.error((), "a scenario is a mapping with at least a kind and a model")
    _only(doc, d, (), {"kind", "model", "checks", "output", "seed"})
    kind = _req(doc, d, (), "kind")
    if kind not in KINDS:
        raise doc.error(("kind",), f"unknown kind {kind!r}; expected one of {list(KINDS)}")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise doc.error(("seed",), "seed must be a nonnegative 64-bit integer")
    raw_model = d.get("model")
    if kind in FINITE_KINDS and not isinstance(raw_model, dict):
        raise doc.error(("model",), f"kind {kind} needs a model mapping")
    if kind == "finite-model":
        model = _finite_payload(doc, raw_model, ("model",))
    elif kind == "cox-model":
        model = _cox_payload(doc, raw_model, ("model",))
    elif kind == "density-model":
        model = _density_payload(doc, raw_model, ("model",))
    elif kind == "barlow-demo":
        model = _demo_payload(doc, raw_model, ("model",), _BARLOW_FIELDS)
    else:
        model = _demo_payload(doc, raw_model, ("model",), _NATURAL_FIELDS)
    checks = d.get("checks", list(DEFAULT_CHECKS[kind]))
    if not isinstance(checks, list) or not checks:
        raise doc.error(("checks",), "checks is a nonempty list of check names")
    for i, name in enumerate(checks):
        if name not in CATALOG and name not in MONTE_CARLO_CHECKS:
            raise doc.error(("checks", i), f"unknown check {name!r}")
        if name not in ALLOWED[kind]:
            raise doc.error(("checks", i), f"check {name!r} does not apply to kind {kind}")
    if len(set(checks)) != len(checks):
        raise doc.error(("checks",), "each check may appear only once")
    _payload_consistency(doc, kind, model, checks)
    output = d.get("output", {}) or {}
    if not isinstance(output, dict):
        raise doc.error(("output",), "output is a mapping with path and format")
    _only(doc, output, ("output",), {"path", "format"})
    fmt = output.get("format", "json")
    if fmt not in FORMATS:
        raise doc.error(("output", "format"), f"format must be one of {list(FORMATS)}")
    out = {"format": fmt}
    if output.get("path") is not None:
        out["path"] = str(output["path"])
    cfg = ScenarioConfig(kind, model, tuple(checks), out, seed)
    if kind in FINITE_KINDS:
        try:
            finite_context(cfg)
        except (ValueError, TypeError) as exc:
            raise doc.error(("model",), f"model does not build: {exc}") from None
    return cfg


def _payload_consistency(doc, kind, model, checks):
    for i, name in enumerate(checks):
        need = CATALOG[name].needs if name in CATALOG else None
        if need == "marks" and kind == "finite-model" and "marks" not in model:
            raise doc.error(("checks", i), f"check {name!r} needs marks in the model")
        if need == "marks" and kind == "density-model" and "nu" not in model:
            raise doc.error(("checks", i), f"check {name!r} needs a marked density (nu)")
        if need in ("covering", "sh-measure") and need.replace("-", "_") not in model:
            raise doc.error(("checks", i), f"check {name!r} needs a {need.replace('-', '_')} entry in the model")
        if name == "density-formula" and "mu" not in model:
            raise doc.error(("checks", i), "density-formula needs a plain density (mu)")
        if name == "marked-density-formula" and "nu" not in model:
            raise doc.error(("checks", i), "marked-density-formula needs a marked density (nu)")


def load_scenario(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    return parse_scenario(text)


# canonical form


def _enc(v):
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, float) and v == math.inf:
        return "inf"
    if isinstance(v, tuple):
        return [_enc(x) for x in v]
    if isinstance(v, dict):
        return {k: _enc(x) for k, x in v.items()}
    return v


def to_canonical(cfg: ScenarioConfig) -> dict:
    """Plain-data form with a fixed key order; the inverse of :func:`parse_scenario` up to formatting."""
    m = cfg.model
    if cfg.kind in FINITE_KINDS:
        model = {k: _enc(m[k]) for k in ("outcomes", "probs", "filtration")}
        if cfg.kind == "finite-model":
            model["times"] = _enc(m["times"])
            for k in ("marks", "alphabet", "stopping", "covering", "sh_measure"):
                if k in m:
                    model[k] = _enc(m[k])
        elif cfg.kind == "cox-model":
            model["hazard"] = _enc(m["hazard"])
            model["threshold"] = [[_enc(k), _enc(v)] for k, v in m["threshold"]]
        else:
            if "nu" in m:
                model["alphabet"] = list(m["alphabet"])
                model["nu"] = [[[x, _enc(u)], _enc(w)] for (x, u), w in m["nu"]]
                model["gamma"] = [{"mark": k[0], "time": _enc(k[1]), "values": _enc(v)} for k, v in m["gamma"]]
            else:
                model["mu"] = [[_enc(u), _enc(w)] for u, w in m["mu"]]
                model["gamma"] = [{"time": _enc(k), "values": _enc(v)} for k, v in m["gamma"]]
    else:
        model = {k: _enc(v) for k, v in m.items()}
    return {"kind": cfg.kind, "seed": cfg.seed, "model": model, "checks": list(cfg.checks),
            "output": dict(sorted(cfg.output.items()))}


def serialize(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_canonical(cfg), sort_keys=False, default_flow_style=None, width=100)


# building and running


def _space(m):
    return FiniteSpace(tuple(m["outcomes"]), tuple(m["probs"]))


def _filtration(m):
    index = {o: i for i, o in enumerate(m["outcomes"])}
    n = len(index)
    return Filtration(Partition.from_blocks([[index[o] for o in blk] for blk in part], n) for part in m["filtration"])


def finite_context(cfg: ScenarioConfig) -> FiniteContext:
    """Model objects for a finite scenario (Cox and density models are assembled first)."""
    m = cfg.model
    space, f = _space(m), _filtration(m)
    if cfg.kind == "finite-model":
        mtaus = None
        if "marks" in m:
            mtaus = [MarkedTime(t, mk, m["alphabet"]) for t, mk in zip(m["times"], m["marks"])]
        extra = {}
        if "covering" in m:
            extra["covering"] = m["covering"]
        if "sh_measure" in m:
            extra["sh_measure"] = m["sh_measure"]
        return FiniteContext(space, f, list(m["times"]), mtaus, list(m.get("stopping", ())), extra)
    if cfg.kind == "cox-model":
        built = build_cox(CoxSpec(Process(m["hazard"]), dict(m["threshold"])), f, space)
        return FiniteContext(built.space, built.filtration, list(built.times))
    if "nu" in m:
        gamma = {((key,), w): v for key, vals in m["gamma"] for w, v in enumerate(vals)}
        mdm = MarkedDensityModel(space, f, dict(m["nu"]), gamma, tuple(m["alphabet"]), 1)
        built = build_marked_density_model(mdm)
        times = [mt.time for mt in built.times]
        return FiniteContext(built.space, built.filtration, times, list(built.times),
                             extra={"marked_density_model": mdm})
    gamma = {((key,), w): v for key, vals in m["gamma"] for w, v in enumerate(vals)}
    dm = DensityModel(space, f, dict(m["mu"]), gamma, 1)
    built = build_density_model(dm)
    return FiniteContext(built.space, built.filtration, list(built.times), extra={"density_model": dm})


def run_barlow_demo(params: dict, seed: int = 0) -> list[CheckReport]:
    cfg = EnsembleConfig(params["paths"], params["dt"], params["horizon"],
                         seed if params.get("seed") is None else params["seed"], params["increments"])
    e = simulate_paths(cfg, params.get("workers", 1))
    start = time.perf_counter()
    rep = barlow_statistics(e, params.get("guard_time"), tolerance=params.get("tolerance", 0.02))
    rep.estimates["seconds"] = time.perf_counter() - start
    return [rep]


def run_natural_demo(params: dict, seed: int = 0, checks=None) -> list[CheckReport]:
    checks = checks or DEFAULT_CHECKS["natural-demo"]
    seed = seed if params.get("seed") is None else params["seed"]
    spec = NaturalModelSpec(**params.get("spec", {}))
    out = []
    study = None
    e = simulate_paths(EnsembleConfig(params["paths"], params["dt"], params["horizon"], seed),
                       params.get("workers", 1))
    for name in checks:
        start = time.perf_counter()
        if name == "natural-euler":
            euler_spec = NaturalModelSpec(lam=spec.lam, n_kind="gbm", sigma=spec.sigma, f_kind="zero", u=spec.u,
                                          y_kind=spec.y_kind, eps=spec.eps)
            rep = euler_convergence(euler_spec, params["euler_paths"], tuple(params["euler_dts"]), 1.0, seed)
        else:
            if study is None:
                study = run_study(spec, e)
            if name == "natural-projection":
                rep = projection_condition_estimate(spec, e, study=study)
            elif name == "natural-drift":
                rep = drift_orthogonality(spec, e, study=study)
            else:
                rep = monotonicity_report(study)
        rep.estimates["seconds"] = time.perf_counter() - start
        out.append(rep)
    return out


def _ensure_witness(rep: CheckReport) -> CheckReport:
    if rep.verdict == FAIL and rep.witness is None:
        rep.witness = next((d for d in rep.details if d.get("verdict") == FAIL), {"check": rep.name})
    return rep


def execute(cfg: ScenarioConfig) -> list[CheckReport]:
    """Run the checks of a validated scenario in declaration order."""
    try:
        if cfg.kind in FINITE_KINDS:
            ctx = finite_context(cfg)
            reps = []
            for name in cfg.checks:
                try:
                    reps.extend(run_checks(ctx, [name]))
                except Exception as exc:
                    raise EngineError(f"check {name!r} on {cfg.kind} scenario: {type(exc).__name__}: {exc}") from exc
        elif cfg.kind == "barlow-demo":
            reps = run_barlow_demo(cfg.model, cfg.seed)
        else:
            reps = run_natural_demo(cfg.model, cfg.seed, cfg.checks)
    except EngineError:
        raise
    except Exception as exc:
        raise EngineError(f"{cfg.kind} scenario: {type(exc).__name__}: {exc}") from exc
    return [_ensure_witness(r) for r in reps]


def overall(reports) -> str:
    verdicts = {r.verdict for r in reports}
    if FAIL in verdicts:
        return FAIL
    return PASS if PASS in verdicts else VACUOUS


def build_report(reports, scenario: dict | None = None, seed: int | None = None) -> dict:
    return {
        "engine": {"name": "osfkit", "version": __version__},
        "seed": seed,
        "scenario": scenario,
        "verdict": overall(reports),
        "checks": [r.to_dict() for r in reports],
    }


def run_scenario(path) -> dict:
    """Load, validate and execute a scenario file; returns the report dictionary."""
    cfg = load_scenario(path)
    return build_report(execute(cfg), to_canonical(cfg), cfg.seed)
