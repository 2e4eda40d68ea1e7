"""Discrete excited (cookie) random walk used as a sanity mirror.

At its k-th visit to a site the walk steps right with probability p_k, and
with probability 1/2 once the k cookies there are used up.  The discrete
theory gives: recurrent iff delta in [-1, 1], positive speed iff
|delta| > 2, with delta = sum_i (2 p_i - 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from ._parallel import derive_stream, run_indexed
from .criteria import Verdict, classify
from .ensemble import EnsembleSummary, mean_se
from .excitation import make_profile
from .sde_sim import make_generator

__all__ = [
    "CookieEnvironment",
    "WalkResult",
    "delta_discrete",
    "environment_for_delta",
    "simulate_walk",
    "discrete_regime",
    "continuous_regime",
    "speed_ensemble",
    "speed_trend",
]


@dataclass(frozen=True)
class CookieEnvironment:
    probs: tuple = ()

    def __post_init__(self):
        probs = tuple(float(v) for v in self.probs)
        for i, v in enumerate(probs):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"cookie probability p_{i + 1} = {v} is outside [0, 1]")
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class WalkResult:
    final: int
    visits: np.ndarray  # visit count of sites origin, origin+1, ...
    origin: int
    trace: np.ndarray  # positions every ``stride`` steps
    stride: int


def delta_discrete(env: CookieEnvironment) -> float:
    return math.fsum(2.0 * p - 1.0 for p in env.probs)


def environment_for_delta(delta: float) -> CookieEnvironment:
    """Full-strength cookies (p = 1) topped up by one partial cookie."""
    sign = 1.0 if delta >= 0 else -1.0
    full = int(math.floor(abs(delta)))
    rest = abs(delta) - full
    probs = [1.0 if sign > 0 else 0.0] * full
    if rest > 0:
        probs.append(0.5 + sign * rest / 2.0)
    return CookieEnvironment(tuple(probs))


@nb.njit(cache=True, nogil=True)
def _walk(gen, probs, n_steps, stride):
    size = 2 * n_steps + 1
    visits = np.zeros(size, dtype=np.int64)
    n_rec = n_steps // stride + 1 if stride > 0 else 0
    trace = np.empty(n_rec, dtype=np.int64)
    if stride > 0:
        trace[0] = 0
    x = 0
    m = probs.size
    for k in range(n_steps):
        j = x + n_steps
        visits[j] += 1
        v = visits[j]
        p = probs[v - 1] if v <= m else 0.5
        x += 1 if gen.random() < p else -1
        if stride > 0 and (k + 1) % stride == 0:
            trace[(k + 1) // stride] = x
    return x, visits, trace


def simulate_walk(env: CookieEnvironment, n_steps: int, seed=0, stride: int = 0) -> WalkResult:
    """Nearest-neighbour cookie walk from 0; deterministic per seed."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    x, visits, trace = _walk(make_generator(seed), np.asarray(env.probs, dtype=float), int(n_steps), int(stride))
    nz = np.nonzero(visits)[0]
    lo, hi = (nz[0], nz[-1] + 1) if nz.size else (n_steps, n_steps)
    return WalkResult(int(x), visits[lo:hi].copy(), int(lo - n_steps), trace, int(stride))


def discrete_regime(delta: float) -> str:
    if abs(delta) <= 1:
        return "recurrent"
    if abs(delta) <= 2:
        return "transient_zero_speed"
    return "ballistic"


def continuous_regime(delta: float) -> str:
    rep = classify(make_profile("single_cookie", delta=delta), with_sigma=False)
    if rep.verdict is Verdict.RECURRENT:
        return "recurrent"
    if rep.verdict is Verdict.INDETERMINATE:
        return "indeterminate"
    return "ballistic" if rep.speed != 0 else "transient_zero_speed"


def speed_ensemble(env: CookieEnvironment, n_steps: int, n_walks: int, seed: int = 0,
                   jobs: int | None = None) -> EnsembleSummary:
    """Mean of X_n / n with its standard error and the fraction of walks ending right of 0."""
    finals = np.array(run_indexed(
        lambda i: simulate_walk(env, n_steps, derive_stream(seed, i)).final, n_walks, jobs), dtype=float)
    m, se = mean_se(finals / n_steps)
    d = delta_discrete(env)
    return EnsembleSummary(
        "erw_speed", f"erw(delta={d:g})", n_walks, "mean X_n/n", m, se, True, seed,
        config={"probs": list(env.probs), "n_steps": n_steps},
        details={"delta": d, "fraction_positive": float(np.mean(finals > 0)), "regime": discrete_regime(d),
                 "scaled_mean": float(np.mean(finals / math.sqrt(n_steps))),
                 "scaled_variance": float(np.var(finals / math.sqrt(n_steps), ddof=1))},
    )


def speed_trend(deltas: Sequence[float] = (0.5, 1.5, 2.5, 4.0), n_steps: int = 100_000, n_walks: int = 200,
                seed: int = 0, jobs: int | None = None, n_se: float = 3.0) -> dict:
    """Empirical speeds along increasing delta must be nondecreasing up to n_se standard errors."""
    rows = [speed_ensemble(environment_for_delta(d), n_steps, n_walks, seed + i, jobs)
            for i, d in enumerate(sorted(deltas))]
    ok = all(b.estimate >= a.estimate - n_se * math.hypot(a.se, b.se) for a, b in zip(rows, rows[1:]))
    return {"deltas": sorted(deltas), "speeds": [r.estimate for r in rows], "se": [r.se for r in rows],
            "fraction_positive": [r.details["fraction_positive"] for r in rows], "nondecreasing": ok,
            "regimes_match": {d: discrete_regime(d) == continuous_regime(d) for d in sorted(deltas)}}
