"""Excitation profiles: the drift coefficient phi(x, l) and its cumulative h.

``phi(x, l)`` is the drift felt at position ``x`` when the local time already
accumulated there is ``l``; ``h(x, l)`` is its integral over ``[0, l]``.

Built-in families (all have closed-form ``h``):

``single_cookie``       phi(l) = delta * 1{l <= 1}
``piecewise_cookies``   a finite stack of constant-height cookies; ``heights[i]``
                        acts on ``(bounds[i-1], bounds[i]]`` with ``bounds[-1]`` = 0
``exp_decay``           phi(l) = delta * rate * exp(-rate * l), total mass delta
``log_critical``        h(l) = (1 + alpha) * l / e on [0, e] and
                        h(l) = 1 + alpha / ln(l) beyond, so that h - 1 ~ alpha / ln l
``custom_table``        phi(0, .) piecewise linear through nodes (l_i, phi_i),
                        zero past the last node; h is the exact piecewise quadratic
``site_cookies``        non-homogeneous single cookie whose mass depends on the
                        site: ``masses[0]`` below ``edges[0]``, ``masses[i]`` on
                        ``[edges[i-1], edges[i])``, ``masses[-1]`` above
``truncated``           phi_n(x, l) = phi(x, l) * 1{l <= n}
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np

from . import _profile_jit as _jit

__all__ = [
    "ProfileError",
    "TailAsymptotics",
    "ExcitationProfile",
    "make_profile",
    "truncated",
    "reflected",
    "eval_phi",
    "eval_h",
    "delta_total",
    "load_table_csv",
    "KINDS",
]

KINDS = (
    "single_cookie",
    "piecewise_cookies",
    "exp_decay",
    "log_critical",
    "custom_table",
    "site_cookies",
    "truncated",
)


class ProfileError(ValueError):
    """Invalid profile parameters or an out-of-domain evaluation."""


@dataclass(frozen=True)
class TailAsymptotics:
    """Declared behaviour of h(l) as l -> infinity: h_inf + log_coeff / ln(l)."""

    h_inf: float
    log_coeff: float | None = None


def _frozen(a) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ExcitationProfile:
    kind: str
    params: Mapping[str, Any]
    homogeneous: bool
    bound: float
    tail: TailAsymptotics | None
    nonnegative: bool
    sign: float = 1.0
    inner: ExcitationProfile | None = None
    _code: int = field(default=0, repr=False)
    _p: np.ndarray = field(default=None, repr=False)
    _a1: np.ndarray = field(default=None, repr=False)
    _a2: np.ndarray = field(default=None, repr=False)
    _trunc: float = field(default=math.inf, repr=False)

    def kernel_args(self):
        """Flat representation consumed by the compiled kernels."""
        return self._code, self._p, self._a1, self._a2, self._trunc

    @property
    def profile_id(self) -> str:
        if self.kind == "truncated":
            body = f"truncated({self.inner.profile_id},n={self.params['n']:g})"
        else:
            parts = []
            for k, v in self.params.items():
                if isinstance(v, (tuple, list)):
                    v = "[" + ";".join(f"{e:g}" for e in v) + "]"
                elif isinstance(v, float):
                    v = f"{v:g}"
                parts.append(f"{k}={v}")
            body = f"{self.kind}({','.join(parts)})"
        return body if self.sign > 0 else f"mirror({body})"

    def __repr__(self) -> str:
        return f"ExcitationProfile<{self.profile_id}>"


def _finite(name: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ProfileError(f"parameter {name!r} must be a real number, got {value!r}") from None
    if not math.isfinite(v):
        raise ProfileError(f"parameter {name!r} must be finite, got {v}")
    return v


def _vector(name: str, values) -> tuple[float, ...]:
    if values is None:
        raise ProfileError(f"missing parameter {name!r}")
    out = tuple(_finite(f"{name}[{i}]", v) for i, v in enumerate(values))
    return out


def _build(kind, params, code, p, a1=(), a2=(), *, homogeneous=True, bound, tail, nonnegative, sign=1.0,
           trunc=math.inf, inner=None) -> ExcitationProfile:
    pp = np.zeros(4)
    pp[: len(p)] = p
    pp[3] = sign
    return ExcitationProfile(
        kind=kind,
        params=MappingProxyType(dict(params)),
        homogeneous=homogeneous,
        bound=float(bound),
        tail=tail,
        nonnegative=nonnegative,
        sign=sign,
        inner=inner,
        _code=code,
        _p=_frozen(pp),
        _a1=_frozen(np.asarray(a1, dtype=float)),
        _a2=_frozen(np.asarray(a2, dtype=float)),
        _trunc=float(trunc),
    )


def make_profile(kind: str, **params) -> ExcitationProfile:
    """Build a profile of the given family.

    Examples
    --------
    >>> make_profile("single_cookie", delta=3.0).tail
    TailAsymptotics(h_inf=3.0, log_coeff=0.0)
    """
    if kind == "single_cookie":
        delta = _finite("delta", params.get("delta", 0.0))
        return _build(kind, {"delta": delta}, _jit.SINGLE_COOKIE, [delta],
                      bound=abs(delta), tail=TailAsymptotics(delta, 0.0), nonnegative=delta >= 0)

    if kind == "piecewise_cookies":
        bounds = _vector("bounds", params.get("bounds"))
        heights = _vector("heights", params.get("heights"))
        if len(bounds) != len(heights) or not bounds:
            raise ProfileError("piecewise_cookies needs equally many bounds and heights (at least one)")
        prev = 0.0
        for i, b in enumerate(bounds):
            if b <= prev:
                raise ProfileError(f"cookie widths must be positive: bounds[{i}]={b} <= {prev}")
            prev = b
        widths = np.diff(np.concatenate([[0.0], bounds]))
        mass = float(np.dot(widths, heights))
        return _build(kind, {"bounds": bounds, "heights": heights}, _jit.PIECEWISE_COOKIES, [],
                      bounds, heights, bound=max(abs(h) for h in heights),
                      tail=TailAsymptotics(mass, 0.0), nonnegative=min(heights) >= 0)

    if kind == "exp_decay":
        delta = _finite("delta", params.get("delta", 1.0))
        rate = _finite("rate", params.get("rate", 1.0))
        if rate <= 0:
            raise ProfileError(f"exp_decay rate must be positive, got {rate}")
        return _build(kind, {"delta": delta, "rate": rate}, _jit.EXP_DECAY, [delta, rate],
                      bound=abs(delta) * rate, tail=TailAsymptotics(delta, 0.0), nonnegative=delta >= 0)

    if kind == "log_critical":
        alpha = _finite("alpha", params.get("alpha", 0.0))
        bound = max(abs(1.0 + alpha), abs(alpha)) / math.e
        return _build(kind, {"alpha": alpha}, _jit.LOG_CRITICAL, [alpha],
                      bound=bound, tail=TailAsymptotics(1.0, alpha),
                      nonnegative=(alpha <= 0 and 1.0 + alpha >= 0))

    if kind == "custom_table":
        ls = _vector("l", params.get("l"))
        phis = _vector("phi", params.get("phi"))
        _check_table(ls, phis)
        h_end = float(np.sum(0.5 * (np.asarray(phis[1:]) + phis[:-1]) * np.diff(ls)))
        declare = params.get("declare_tail", True)
        return _build(kind, {"l": ls, "phi": phis}, _jit.CUSTOM_TABLE, [], ls, phis,
                      bound=max(abs(v) for v in phis),
                      tail=TailAsymptotics(h_end, 0.0) if declare else None,
                      nonnegative=min(phis) >= 0)

    if kind == "site_cookies":
        edges = _vector("edges", params.get("edges", ()))
        masses = _vector("masses", params.get("masses"))
        if len(masses) != len(edges) + 1:
            raise ProfileError("site_cookies needs len(masses) == len(edges) + 1")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ProfileError("site_cookies edges must be strictly increasing")
        homogeneous = len(set(masses)) == 1
        return _build(kind, {"edges": edges, "masses": masses}, _jit.SITE_COOKIES, [], edges, masses,
                      homogeneous=homogeneous, bound=max(abs(m) for m in masses),
                      tail=TailAsymptotics(masses[0], 0.0) if homogeneous else None,
                      nonnegative=min(masses) >= 0)

    if kind == "truncated":
        inner = params.get("inner")
        if not isinstance(inner, ExcitationProfile):
            raise ProfileError("truncated needs an ExcitationProfile as 'inner'")
        return truncated(inner, params.get("n"))

    raise ProfileError(f"unknown profile kind {kind!r}; expected one of {KINDS}")


def _check_table(ls: Sequence[float], phis: Sequence[float]) -> None:
    if len(ls) != len(phis) or len(ls) < 2:
        raise ProfileError("custom_table needs at least two (l, phi) rows of equal length")
    if ls[0] != 0.0:
        raise ProfileError(f"custom_table l column must start at 0 (row 1 has l={ls[0]})")
    for i in range(1, len(ls)):
        if not ls[i] > ls[i - 1]:
            raise ProfileError(
                f"custom_table l column must be strictly increasing: row {i + 1} has l={ls[i]} "
                f"after l={ls[i - 1]}")


def truncated(p: ExcitationProfile, n) -> ExcitationProfile:
    """phi_n(x, l) = phi(x, l) * 1{l <= n}."""
    n = _finite("n", n)
    if n < 0:
        raise ProfileError(f"truncation level must be nonnegative, got {n}")
    code, pp, a1, a2, trunc = p.kernel_args()
    n_eff = min(n, trunc)
    tail = None
    if p.homogeneous:
        tail = TailAsymptotics(float(_jit.h_value(code, pp, a1, a2, n_eff, 0.0, n_eff)), 0.0)
    return ExcitationProfile(
        kind="truncated",
        params=MappingProxyType({"n": n}),
        homogeneous=p.homogeneous,
        bound=p.bound,
        tail=tail,
        nonnegative=p.nonnegative,
        sign=1.0,
        inner=p,
        _code=code,
        _p=pp,
        _a1=a1,
        _a2=a2,
        _trunc=n_eff,
    )


def reflected(p: ExcitationProfile) -> ExcitationProfile:
    """Mirror image: phi~(x, l) = -phi(-x, l)."""
    code, pp, a1, a2, trunc = p.kernel_args()
    q = pp.copy()
    q[3] = -pp[3]
    if code == _jit.SITE_COOKIES:
        a1 = -a1[::-1]
        a2 = a2[::-1]
    tail = None
    if p.tail is not None:
        lc = p.tail.log_coeff
        tail = TailAsymptotics(-p.tail.h_inf, None if lc is None else -lc)
    return ExcitationProfile(
        kind=p.kind,
        params=p.params,
        homogeneous=p.homogeneous,
        bound=p.bound,
        tail=tail,
        nonnegative=p.bound == 0.0,
        sign=-p.sign,
        inner=p.inner,
        _code=code,
        _p=_frozen(q),
        _a1=_frozen(a1),
        _a2=_frozen(a2),
        _trunc=trunc,
    )


def _check_l(l) -> None:
    if np.any(np.asarray(l) < 0):
        raise ProfileError(f"local time must be nonnegative, got {l}")


def eval_phi(p: ExcitationProfile, x: float, l):
    """Drift coefficient phi(x, l); ``l`` may be a scalar or an array."""
    _check_l(l)
    if np.ndim(l) == 0:
        return float(_jit.phi_value(*p.kernel_args(), float(x), float(l)))
    return _jit.phi_array(*p.kernel_args(), float(x), np.asarray(l, dtype=float).ravel()).reshape(np.shape(l))


def eval_h(p: ExcitationProfile, x: float, l):
    """Cumulative excitation h(x, l) = int_0^l phi(x, u) du (closed form)."""
    _check_l(l)
    if np.ndim(l) == 0:
        return float(_jit.h_value(*p.kernel_args(), float(x), float(l)))
    return _jit.h_array(*p.kernel_args(), float(x), np.asarray(l, dtype=float).ravel()).reshape(np.shape(l))


def delta_total(p: ExcitationProfile, x: float = 0.0) -> float:
    """Total excitation mass at site x, the limit of h(x, l) as l -> infinity.

    Every built-in family has a known limit. ``nan`` flags an undefined limit
    (a profile with neither finite support nor declared asymptotics).
    """
    code, pp, a1, a2, trunc = p.kernel_args()
    if math.isfinite(trunc):
        return float(_jit.h_value(code, pp, a1, a2, trunc, float(x), trunc))
    if code == _jit.SITE_COOKIES:
        return float(pp[3] * _jit._site_mass(a1, a2, float(x)))
    if code == _jit.LOG_CRITICAL:
        return float(pp[3])
    if code == _jit.EXP_DECAY:
        return float(pp[3] * pp[0])
    if code in (_jit.SINGLE_COOKIE, _jit.PIECEWISE_COOKIES, _jit.CUSTOM_TABLE):
        # finite support: h is constant past the last breakpoint
        return float(_jit.h_value(code, pp, a1, a2, trunc, float(x), 1.0 + float(np.max(a1, initial=1.0))))
    if p.tail is not None:
        return p.tail.h_inf
    return math.nan


def load_table_csv(path: str | Path, **extra) -> ExcitationProfile:
    """Read a two-column ``l,phi`` CSV (optional header) into a custom_table profile."""
    ls, phis, rows = [], [], []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                l_val, phi_val = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if row_no == 1:
                    continue  # header
                raise ProfileError(f"{path}: row {row_no} is not a pair of numbers: {row}") from None
            ls.append(l_val)
            phis.append(phi_val)
            rows.append(row_no)
    if ls and ls[0] != 0.0:
        raise ProfileError(f"{path}: row {rows[0]}: the l column must start at 0, got {ls[0]}")
    for i in range(1, len(ls)):
        if not ls[i] > ls[i - 1]:
            raise ProfileError(f"{path}: row {rows[i]}: l = {ls[i]} does not exceed the previous l = {ls[i - 1]}; "
                               "the l column must be strictly increasing")
    try:
        return make_profile("custom_table", l=ls, phi=phis, **extra)
    except ProfileError as exc:
        raise ProfileError(f"{path}: {exc}") from None
