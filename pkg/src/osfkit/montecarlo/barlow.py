"""Last zero before the first exit from (-1, 1).

With ``T`` the first grid time at which ``|B| >= 1`` and ``tau`` the last
grid time before ``T`` where ``B`` is zero or changes sign on the next step,
the sign of ``B`` is constant on ``(tau, T]`` by construction, so every
post-``tau`` observation predicts ``sign(B_T)`` perfectly, while anything
observed strictly before ``tau`` carries no information about it.
"""

from __future__ import annotations

import math

import numpy as np

from ..reports import FAIL, PASS, VACUOUS, CheckReport
from .paths import PathEnsemble

DEFAULT_DELTAS = (0, 1, 2, 5, 10, 50, 100)


def _path_stats(B: np.ndarray, exit_idx: np.ndarray, guard: int, deltas):
    n, L = B.shape
    s = np.sign(B)
    k = np.arange(L - 1)
    change = (s[:, :-1] != s[:, 1:]) | (s[:, :-1] == 0)
    change &= k[None, :] < exit_idx[:, None]
    tau = (L - 2) - np.argmax(change[:, ::-1], axis=1)
    rows = np.arange(n)
    final = s[rows, exit_idx]
    cols = np.arange(L)[None, :]
    after = (cols > tau[:, None]) & (cols <= exit_idx[:, None])
    constancy_breaks = np.any(after & (s != final[:, None]), axis=1)
    feat_idx = tau - guard
    feature = np.where(feat_idx >= 0, s[rows, np.maximum(feat_idx, 0)], 0.0)
    preds = np.stack([s[rows, np.minimum(tau + d, exit_idx)] for d in deltas], axis=1)
    return tau, final, constancy_breaks, feature, preds


def simulate_exits(e: PathEnsemble, guard: int, deltas=DEFAULT_DELTAS, max_blocks: int = 64, chunk: int = 2048):
    """Per-path exit index, last-zero index, final sign, guard-window feature and predictions.

    Paths that have not exited within the configured horizon are extended
    block by block (from their own substream) up to ``max_blocks`` blocks.
    """
    cfg = e.cfg
    base_blocks = max(1, -(-cfg.n_steps // cfg.block))
    n = e.n_paths
    out = {
        "exit": np.full(n, -1, dtype=np.int64),
        "tau": np.full(n, -1, dtype=np.int64),
        "final": np.zeros(n),
        "breaks": np.zeros(n, dtype=bool),
        "feature": np.zeros(n),
        "preds": np.zeros((n, len(deltas))),
    }
    extended = 0
    for start in range(0, n, chunk):
        pending = np.arange(start, min(start + chunk, n))
        blocks = base_blocks
        while pending.size and blocks <= max_blocks:
            steps = blocks * cfg.block
            B = e.paths(pending, steps)
            hit = np.abs(B) >= 1.0
            done = hit.any(axis=1)
            if blocks > base_blocks:
                extended += int(done.sum())
            if done.any():
                idx = pending[done]
                sub = B[done]
                exit_idx = np.argmax(hit[done], axis=1)
                tau, final, breaks, feature, preds = _path_stats(sub, exit_idx, guard, deltas)
                out["exit"][idx] = exit_idx
                out["tau"][idx] = tau
                out["final"][idx] = final
                out["breaks"][idx] = breaks
                out["feature"][idx] = feature
                out["preds"][idx] = preds
            pending = pending[~done]
            blocks *= 2
    out["extended"] = extended
    out["unreached"] = int(np.sum(out["exit"] < 0))
    return out


def _prop(x) -> tuple[float, float, int]:
    m = int(x.size)
    if m == 0:
        return float("nan"), float("nan"), 0
    p = float(np.mean(x))
    return p, math.sqrt(max(p * (1 - p), 1e-300) / m), m


def barlow_statistics(e: PathEnsemble, guard_time: float | None = None, deltas=DEFAULT_DELTAS,
                      tolerance: float = 0.02, max_blocks: int = 64) -> CheckReport:
    """Sign of the final excursion against information before and after the last zero.

    The conditional-at-tau estimate is ``P(sign(B_T) = +1 | sign(B_{tau-g}) = +1)``
    with ``g = guard_time`` (default one step): the sign of the path just
    before its last zero.  It should be 1/2.  On a +-1 walk zeros sit on
    the grid and the estimate is exactly unbiased; with Gaussian steps the
    missed crossings between grid points bias it low by roughly
    ``0.2 sqrt(dt / g)``.  The post-``tau`` predictor
    ``sign(B_{min(tau+d, T)})`` is scored for each step offset ``d``.
    """
    guard = 1 if guard_time is None else max(1, int(round(guard_time / e.dt)))
    r = simulate_exits(e, guard, deltas, max_blocks)
    ok = r["exit"] >= 0
    final = r["final"][ok]
    feature = r["feature"][ok]
    rep = CheckReport("barlow")
    p_plus, se_plus, m = _prop(final > 0)
    informed = feature != 0
    cond_plus, se_cond, m_plus = _prop(final[feature > 0] > 0)
    cond_minus, se_minus, m_minus = _prop(final[feature < 0] > 0)
    agree, se_agree, _ = _prop(final[informed] == feature[informed])
    accuracy = {int(d): float(np.mean(r["preds"][ok][:, k] == final)) if m else float("nan")
                for k, d in enumerate(deltas)}
    breaks = int(np.sum(r["breaks"][ok]))
    rep.estimates.update({
        "paths_used": m,
        "extended_paths": r["extended"],
        "unreached_paths": r["unreached"],
        "guard_steps": guard,
        "p_plus": p_plus, "p_plus_se": se_plus,
        "conditional_at_tau": cond_plus, "conditional_at_tau_se": se_cond, "conditional_at_tau_n": m_plus,
        "conditional_given_minus": cond_minus, "conditional_given_minus_se": se_minus,
        "feature_agreement": agree, "feature_agreement_se": se_agree,
        "post_tau_accuracy": accuracy,
        "sign_constancy_breaks": breaks,
        "mean_exit_time": float(np.mean(r["exit"][ok]) * e.dt) if m else float("nan"),
        "mean_last_zero": float(np.mean(r["tau"][ok]) * e.dt) if m else float("nan"),
    })
    dev = abs(cond_plus - 0.5)
    rep.add(PASS if dev <= 3 * se_cond else FAIL, item="conditional-at-tau within 3 standard errors",
            value=cond_plus, target=0.5, se=se_cond)
    if 3 * se_cond <= tolerance:
        rep.add(PASS if dev <= tolerance else FAIL, item="conditional-at-tau within tolerance",
                value=cond_plus, target=0.5, tolerance=tolerance)
    else:
        rep.add(VACUOUS, item="conditional-at-tau within tolerance", tolerance=tolerance,
                reason="too few paths to resolve the tolerance")
    rep.add(PASS if breaks == 0 else FAIL, item="sign constancy after tau", breaks=breaks)
    positive = [d for d in deltas if d > 0]
    rep.add(PASS if all(accuracy[int(d)] == 1.0 for d in positive) else FAIL,
            item="post-tau predictor", accuracy=accuracy)
    if e.cfg.kind == "gaussian":
        rep.notes.append("Gaussian steps: zeros between grid points are missed, estimate biased by about "
                         f"{0.2 * math.sqrt(1 / guard):.3f}")
    if r["unreached"]:
        rep.notes.append(f"{r['unreached']} paths never left (-1, 1) and were excluded")
    return rep.settle()
