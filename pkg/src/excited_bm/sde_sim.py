"""Euler-Maruyama simulation of excited Brownian motion with binned local time.

The scheme is

    X_{k+1} = X_k + sqrt(dt) xi_k + phi(X_k, Lhat_k) dt,
    Lhat_k  = occupation(bin(X_k)) / dx,

with the occupation of ``bin(X_k)`` incremented by ``dt`` after the step.
Bins have width ``dx`` and are centred on the multiples of ``dx``, so level 0
sits in the middle of a bin.  The grid grows in both directions on demand.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba as nb
import numpy as np

from . import _profile_jit as _jit
from .excitation import ExcitationProfile

__all__ = [
    "SimConfig",
    "LocalTimeField",
    "PathSample",
    "ConfigError",
    "make_generator",
    "simulate_path",
    "drift_functional",
    "occupation_identity_residual",
    "hitting_time",
    "write_path_csv",
    "write_field_csv",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Discretization and stopping parameters of one path.

    ``stop_rule`` is ``("horizon",)``, ``("hit_level", a)`` or
    ``("hit_either", a, b)`` with ``a < x0 < b``.  ``regions`` lists the
    intervals ``[lo, hi)`` whose drift D^A is accumulated on-line,
    ``watch_levels`` the levels whose hitting times are recorded and
    ``sample_times`` the times at which X is stored.  ``reentry`` = (lo, hi)
    records the running maximum at the last visit to that interval.
    """

    dt: float = 1e-4
    bin_width: float | None = None
    t_max: float = 1.0
    x0: float = 0.0
    stop_rule: tuple = ("horizon",)
    record_stride: int = 0
    regions: tuple = ()
    watch_levels: tuple = ()
    sample_times: tuple = ()
    reentry: tuple | None = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.bin_width is None:
            object.__setattr__(self, "bin_width", 10.0 * math.sqrt(self.dt))
        object.__setattr__(self, "stop_rule", tuple(self.stop_rule))
        object.__setattr__(self, "regions", tuple(tuple(float(v) for v in r) for r in self.regions))
        object.__setattr__(self, "watch_levels", tuple(float(v) for v in self.watch_levels))
        object.__setattr__(self, "sample_times", tuple(float(v) for v in self.sample_times))
        if self.reentry is not None:
            object.__setattr__(self, "reentry", tuple(float(v) for v in self.reentry))
        self.validate()

    def validate(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_max > 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if not self.bin_width >= 4.0 * math.sqrt(self.dt) * (1 - 1e-12):
            raise ConfigError(f"bin_width {self.bin_width} is below 4*sqrt(dt) = {4 * math.sqrt(self.dt)}")
        if self.record_stride < 0:
            raise ConfigError("record_stride must be >= 0 (0 disables recording)")
        kind = self.stop_rule[0] if self.stop_rule else None
        if kind == "horizon":
            if len(self.stop_rule) != 1:
                raise ConfigError("stop rule 'horizon' takes no argument")
        elif kind == "hit_level":
            if len(self.stop_rule) != 2:
                raise ConfigError("stop rule 'hit_level' takes one level")
        elif kind == "hit_either":
            if len(self.stop_rule) != 3 or not self.stop_rule[1] < self.x0 < self.stop_rule[2]:
                raise ConfigError("stop rule 'hit_either' needs levels a < x0 < b")
        else:
            raise ConfigError(f"unknown stop rule {self.stop_rule!r}")
        for r in self.regions:
            if len(r) != 2 or not r[0] < r[1]:
                raise ConfigError(f"region {r} must be an interval (lo, hi) with lo < hi")
        if any(t < 0 or t > self.t_max for t in self.sample_times):
            raise ConfigError("sample_times must lie in [0, t_max]")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))

    def stop_levels(self) -> tuple[float, float]:
        kind = self.stop_rule[0]
        if kind == "hit_level":
            a = float(self.stop_rule[1])
            return (-math.inf, a) if a >= self.x0 else (a, math.inf)
        if kind == "hit_either":
            return float(self.stop_rule[1]), float(self.stop_rule[2])
        return -math.inf, math.inf

    def to_dict(self) -> dict:
        return {
            "dt": self.dt, "bin_width": self.bin_width, "t_max": self.t_max, "x0": self.x0,
            "stop_rule": list(self.stop_rule), "record_stride": self.record_stride,
            "regions": [list(r) for r in self.regions], "watch_levels": list(self.watch_levels),
            "sample_times": list(self.sample_times),
            "reentry": None if self.reentry is None else list(self.reentry),
        }


@dataclass(frozen=True)
class LocalTimeField:
    """Binned occupation times; bin i is centred at ``origin + i * bin_width``."""

    origin: float
    bin_width: float
    occupation: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return self.origin + self.bin_width * np.arange(self.occupation.size)

    @property
    def density(self) -> np.ndarray:
        return self.occupation / self.bin_width

    def total(self) -> float:
        return math.fsum(self.occupation)

    def local_time(self, x) -> np.ndarray | float:
        """Lhat(x) = occupation(bin(x)) / bin_width (zero off the grid)."""
        xs = np.asarray(x, dtype=float)
        idx = np.floor((xs - self.origin) / self.bin_width + 0.5).astype(np.int64)
        ok = (idx >= 0) & (idx < self.occupation.size)
        out = np.zeros(xs.shape)
        out[ok] = self.occupation[idx[ok]] / self.bin_width
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PathSample:
    times: np.ndarray
    positions: np.ndarray
    field: LocalTimeField
    drift_total: float
    region_drift: dict
    hits: dict
    running_min: float
    running_max: float
    x_final: float
    t_end: float
    stop_time: float
    stopped: bool
    samples: dict
    reentry_max: float
    seed: object
    config: SimConfig
    profile: ExcitationProfile = field(repr=False)


def make_generator(seed) -> np.random.Generator:
    """Generator from an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


@nb.njit(cache=True, nogil=True)
def _grow(occ, off, j):
    size = occ.size
    while j < 0 or j >= size:
        new = np.zeros(2 * size)
        if j < 0:
            new[size:] = occ
            off += size
            j += size
        else:
            new[:size] = occ
        occ = new
        size = occ.size
    return occ, off


@nb.njit(cache=True, nogil=True)
def _run(gen, code, pp, a1, a2, trunc, homog, dt, dx, x0, n_steps, stop_lo, stop_hi,
         reg_lo, reg_hi, up, down, stride, sample_steps, re_lo, re_hi, noise_sign):
    sq = math.sqrt(dt)
    size = 1024
    occ = np.zeros(size)
    off = size // 2 - int(math.floor(x0 / dx + 0.5))
    nreg = reg_lo.size
    dreg = np.zeros(nreg)
    up_t = np.full(up.size, np.inf)
    down_t = np.full(down.size, np.inf)
    iu = 0
    idn = 0
    n_rec = n_steps // stride + 1 if stride > 0 else 0
    rec = np.empty(n_rec)
    if stride > 0:
        rec[0] = x0
    samples = np.full(sample_steps.size, np.nan)
    isamp = 0
    while isamp < sample_steps.size and sample_steps[isamp] == 0:
        samples[isamp] = x0
        isamp += 1
    x = x0
    rmax = x0
    rmin = x0
    re_max = -np.inf
    d_total = 0.0
    stop_time = np.inf
    stopped = False
    jmin = size
    jmax = -1
    k = 0
    while k < n_steps:
        j = int(math.floor(x / dx + 0.5)) + off
        if j < 0 or j >= occ.size:
            old = off
            occ, off = _grow(occ, off, j)
            j += off - old
            jmin += off - old
            jmax += off - old
        xs = x if not homog else 0.0
        l = occ[j] / dx
        if l > trunc:
            phi = 0.0
        else:
            phi = pp[3] * _jit._phi_untruncated(code, pp, a1, a2, xs, l)
        x_new = x + noise_sign * sq * gen.standard_normal() + phi * dt
        occ[j] += dt
        if j < jmin:
            jmin = j
        if j > jmax:
            jmax = j
        inc = phi * dt
        d_total += inc
        for r in range(nreg):
            if reg_lo[r] <= x < reg_hi[r]:
                dreg[r] += inc
        if re_lo < x < re_hi:
            re_max = rmax
        # first crossings, linearly interpolated within the step
        while iu < up.size and x_new >= up[iu]:
            up_t[iu] = (k + (up[iu] - x) / (x_new - x)) * dt
            iu += 1
        while idn < down.size and x_new <= down[idn]:
            down_t[idn] = (k + (down[idn] - x) / (x_new - x)) * dt
            idn += 1
        if x_new > rmax:
            rmax = x_new
        if x_new < rmin:
            rmin = x_new
        k += 1
        if stride > 0 and k % stride == 0:
            rec[k // stride] = x_new
        while isamp < sample_steps.size and sample_steps[isamp] == k:
            samples[isamp] = x_new
            isamp += 1
        if x_new >= stop_hi:
            stop_time = (k - 1 + (stop_hi - x) / (x_new - x)) * dt
            stopped = True
            x = x_new
            break
        if x_new <= stop_lo:
            stop_time = (k - 1 + (stop_lo - x) / (x_new - x)) * dt
            stopped = True
            x = x_new
            break
        x = x_new
    if jmax < jmin:
        jmin = off
        jmax = off - 1
    n_kept = k // stride + 1 if stride > 0 else 0
    return (occ[jmin:jmax + 1].copy(), jmin - off, d_total, dreg, up_t, down_t, rmin, rmax, x, k,
            stop_time, stopped, rec[:n_kept].copy(), samples, re_max)


def simulate_path(p: ExcitationProfile, cfg: SimConfig, seed=0, *, negate_noise: bool = False) -> PathSample:
    """Simulate one path of dX = dB + phi(X, L^X) dt.

    ``seed`` is an int, a ``SeedSequence`` or a ``Generator``; identical
    (profile, config, seed) give bit-identical samples.  ``negate_noise``
    flips the sign of every Gaussian increment, which pairs a path of ``p``
    with the mirror path of the reflected profile.
    """
    if p.bound != p.bound or not math.isfinite(p.bound):
        raise ConfigError("profile must be bounded")
    gen = make_generator(seed)
    stop_lo, stop_hi = cfg.stop_levels()
    levels = set(cfg.watch_levels)
    levels.update(v for v in (stop_lo, stop_hi) if math.isfinite(v))
    up = np.array(sorted(v for v in levels if v > cfg.x0), dtype=float)
    down = np.array(sorted((v for v in levels if v < cfg.x0), reverse=True), dtype=float)
    regions = (((0.0, math.inf), (-math.inf, 0.0)) + cfg.regions)
    reg_lo = np.array([r[0] for r in regions], dtype=float)
    reg_hi = np.array([r[1] for r in regions], dtype=float)
    sample_steps = np.array(sorted(int(round(t / cfg.dt)) for t in cfg.sample_times), dtype=np.int64)
    re_lo, re_hi = cfg.reentry if cfg.reentry is not None else (math.inf, -math.inf)
    code, pp, a1, a2, trunc = p.kernel_args()
    out = _run(gen, code, pp, a1, a2, trunc, p.homogeneous, cfg.dt, cfg.bin_width, cfg.x0, cfg.n_steps,
               stop_lo, stop_hi, reg_lo, reg_hi, up, down, int(cfg.record_stride), sample_steps,
               re_lo, re_hi, -1.0 if negate_noise else 1.0)
    (occ, first, d_total, dreg, up_t, down_t, rmin, rmax, x_end, k, stop_time, stopped, rec, samples,
     re_max) = out
    occ.setflags(write=False)
    fld = LocalTimeField(first * cfg.bin_width, cfg.bin_width, occ)
    hits = {cfg.x0: 0.0}
    hits.update(zip(up.tolist(), up_t.tolist()))
    hits.update(zip(down.tolist(), down_t.tolist()))
    region_drift = {r: float(v) for r, v in zip(regions, dreg)}
    sample_map = {}
    for t in cfg.sample_times:
        i = int(np.searchsorted(sample_steps, int(round(t / cfg.dt))))
        sample_map[t] = float(samples[i])
    stride = int(cfg.record_stride)
    times = np.arange(rec.size) * (stride * cfg.dt) if stride > 0 else np.empty(0)
    return PathSample(
        times=times, positions=rec, field=fld, drift_total=float(d_total), region_drift=region_drift,
        hits=hits, running_min=float(rmin), running_max=float(rmax), x_final=float(x_end),
        t_end=k * cfg.dt, stop_time=float(stop_time), stopped=bool(stopped), samples=sample_map,
        reentry_max=float(re_max), seed=_seed_echo(seed), config=cfg, profile=p,
    )


def _seed_echo(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    if isinstance(seed, np.random.Generator):
        return "generator"
    return seed


def _region_key(region):
    if region in ("total", None):
        return "total"
    if region == "+":
        return (0.0, math.inf)
    if region == "-":
        return (-math.inf, 0.0)
    if isinstance(region, (int, np.integer)):
        return (float(region), float(region) + 1.0)
    lo, hi = region
    return (float(lo), float(hi))


def drift_functional(sample: PathSample, region="total") -> float:
    """Accumulated drift D_t^A = int_0^t phi(X_s, L_s) 1_A(X_s) ds.

    ``region`` is ``"total"``, ``"+"`` for [0, inf), ``"-"`` for (-inf, 0),
    an integer k for [k, k+1) or an interval (lo, hi); only intervals
    registered in the config (plus the two half-lines) are available.
    """
    key = _region_key(region)
    if key == "total":
        return sample.drift_total
    try:
        return sample.region_drift[key]
    except KeyError:
        raise KeyError(f"region {key} was not registered before simulation") from None


def occupation_identity_residual(sample: PathSample) -> float:
    """|D_t - sum_bins h(x_bin, Lhat_bin) dx|, the discrete occupation-formula gap."""
    p = sample.profile
    fld = sample.field
    code, pp, a1, a2, trunc = p.kernel_args()
    dens = fld.density
    if p.homogeneous:
        hs = _jit.h_array(code, pp, a1, a2, trunc, 0.0, np.ascontiguousarray(dens))
    else:
        hs = np.array([_jit.h_value(code, pp, a1, a2, trunc, c, l) for c, l in zip(fld.centers, dens)])
    return abs(sample.drift_total - math.fsum(hs * fld.bin_width))


def hitting_time(sample: PathSample, a: float) -> float:
    """First passage time at ``a`` (``inf`` when not reached by the horizon)."""
    a = float(a)
    if a == sample.config.x0:
        return 0.0
    try:
        return sample.hits[a]
    except KeyError:
        raise KeyError(f"level {a} was not registered as a watch or stop level") from None


def write_path_csv(sample: PathSample, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"])
        for t, x in zip(sample.times, sample.positions):
            w.writerow([f"{t:.17g}", f"{x:.17g}"])


def write_field_csv(sample: PathSample, path: str | Path) -> None:
    fld = sample.field
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", "occupation_density"])
        for c, d in zip(fld.centers, fld.density):
            w.writerow([f"{c:.17g}", f"{d:.17g}"])
