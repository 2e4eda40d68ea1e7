"""The Ray-Knight diffusion of local times read at a hitting time.

Z_x is the local time at level a - x when X first reaches a.  It solves

    dZ = 2 sqrt(Z) dbeta + 2 (1 - h(a - x, Z)) dx,   Z_0 = 0,

which is simulated here with the full-truncation Euler scheme

    Z_{k+1} = max(Z_k + 2 sqrt(Z_k^+) sqrt(dx) xi_k + 2 (1 - h(Z_k^+)) dx, 0).

For a homogeneous transient profile the law of Z_a converges to the
invariant density c exp(-H(z)).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np
from scipy import stats

from . import _profile_jit as _jit
from ._parallel import derive_stream, run_indexed
from .criteria import PreconditionError, Verdict, classify, pi_cdf
from .excitation import ExcitationProfile
from .sde_sim import make_generator

__all__ = [
    "ZPath",
    "simulate_z",
    "terminal_samples",
    "besq2_exact",
    "sample_invariant",
    "compare_invariant",
    "write_zpath_csv",
    "write_samples_csv",
]


@dataclass(frozen=True)
class ZPath:
    dx: float
    a: float
    x: np.ndarray
    z: np.ndarray
    seed: object = None
    profile: ExcitationProfile = field(default=None, repr=False)


def _n_steps(a: float, dx: float) -> int:
    if not (dx > 0 and a > 0):
        raise ValueError(f"need a > 0 and dx > 0, got a={a}, dx={dx}")
    n = int(round(a / dx))
    if abs(n * dx - a) > 1e-9 * max(a, 1.0):
        raise ValueError(f"a = {a} is not a multiple of dx = {dx}")
    return n


@nb.njit(cache=True, nogil=True)
def _z_kernel(gen, code, pp, a1, a2, trunc, homog, a, dx, n, keep):
    sq = math.sqrt(dx)
    out = np.empty(n + 1 if keep else 1)
    z = 0.0
    if keep:
        out[0] = 0.0
    for k in range(n):
        zp = z if z > 0.0 else 0.0
        site = 0.0 if homog else a - k * dx
        h = _jit.h_value(code, pp, a1, a2, trunc, site, zp)
        z = z + 2.0 * math.sqrt(zp) * sq * gen.standard_normal() + 2.0 * (1.0 - h) * dx
        if z < 0.0:
            z = 0.0
        if keep:
            out[k + 1] = z
    if not keep:
        out[0] = z
    return out


def simulate_z(p: ExcitationProfile, a: float, dx: float = 1e-3, seed=0) -> ZPath:
    """One path of Z on [0, a] (homogeneous profiles use h(z), others h(a - x, z))."""
    n = _n_steps(a, dx)
    code, pp, a1, a2, trunc = p.kernel_args()
    z = _z_kernel(make_generator(seed), code, pp, a1, a2, trunc, p.homogeneous, float(a), float(dx), n, True)
    assert z.min() >= 0.0
    z.setflags(write=False)
    return ZPath(dx, float(a), np.arange(n + 1) * dx, z, seed, p)


def terminal_samples(p: ExcitationProfile, a: float, n_paths: int, dx: float = 1e-3, seed: int = 0,
                     jobs: int | None = None) -> np.ndarray:
    """Z_a for ``n_paths`` paths; path i uses ``derive_stream(seed, i)``."""
    if n_paths == 0:
        return np.empty(0)
    n = _n_steps(a, dx)
    code, pp, a1, a2, trunc = p.kernel_args()

    def one(i):
        gen = make_generator(derive_stream(seed, i))
        return _z_kernel(gen, code, pp, a1, a2, trunc, p.homogeneous, float(a), float(dx), n, False)[0]

    return np.array(run_indexed(one, n_paths, jobs))


def besq2_exact(xs, n_paths: int, seed: int = 0) -> np.ndarray:
    """Exact BESQ(2) paths from 0 observed at increasing times ``xs``.

    Uses the noncentral chi-square transition
    Z_{x+u} | Z_x = z  ~  u * chi'^2_2(z / u).  Returns shape (n_paths, len(xs)).
    """
    xs = np.asarray(xs, dtype=float)
    if np.any(np.diff(xs) <= 0) or xs[0] <= 0:
        raise ValueError("xs must be positive and increasing")
    out = np.empty((n_paths, xs.size))
    for i in range(n_paths):
        gen = make_generator(derive_stream(seed, i))
        z, prev = 0.0, 0.0
        for j, x in enumerate(xs):
            u = x - prev
            z = u * (gen.chisquare(2) if z == 0.0 else gen.noncentral_chisquare(2, z / u))
            out[i, j] = z
            prev = x
    return out


def sample_invariant(p: ExcitationProfile, n: int, seed: int = 0, n_grid: int = 20000) -> np.ndarray:
    """Draws from the normalized invariant density by inverse-CDF interpolation."""
    grid = np.concatenate([[0.0], np.geomspace(1e-8, 1e6, n_grid)])
    cdf = pi_cdf(p, grid)
    cdf[-1] = 1.0
    cdf = np.maximum.accumulate(cdf)
    u = make_generator(derive_stream(seed, 0)).random(n)
    return np.interp(u, cdf, grid)


def compare_invariant(samples, p: ExcitationProfile) -> tuple[float, float, float]:
    """(KS statistic vs the invariant CDF, sample mean, mean of pi)."""
    rep = classify(p, with_sigma=False)
    if rep.verdict is not Verdict.TRANSIENT_RIGHT:
        raise PreconditionError(f"{p.profile_id} is {rep.verdict.value}; the invariant law is not finite")
    samples = np.asarray(samples, dtype=float)
    ks = stats.kstest(samples, lambda x: pi_cdf(p, x)).statistic if samples.size else math.nan
    return float(ks), float(np.mean(samples)), float(rep.pi_mean)


def write_zpath_csv(zp: ZPath, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "z"])
        for x, z in zip(zp.x, zp.z):
            w.writerow([f"{x:.17g}", f"{z:.17g}"])


def write_samples_csv(samples, path: str | Path, name: str = "z") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([name])
        for v in samples:
            w.writerow([f"{v:.17g}"])
