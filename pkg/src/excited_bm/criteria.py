"""Recurrence, speed and CLT criteria for homogeneous excitation profiles.

Everything here is a deterministic function of the cumulative excitation h
through

    H(x) = int_0^x h(l) / l dl,

the criterion integrals C1+- = int_0^inf exp(-+H) dx and
C2+- = int_0^inf x exp(-+H) dx, the invariant density pi ~ exp(-H) of the
local-time diffusion, and the scale function s'(x) = exp(H(x)) / x, s(1) = 0.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Literal

import numpy as np
from scipy import integrate, special

from . import _profile_jit as _jit
from ._quad import Panels, geometric_edges
from .excitation import ExcitationProfile, ProfileError, eval_h, reflected

__all__ = [
    "UnsupportedProfileError",
    "InfiniteMeasureError",
    "PreconditionError",
    "Status",
    "Verdict",
    "CriterionValue",
    "SigmaResult",
    "ClassificationReport",
    "REPORT_COLUMNS",
    "big_h",
    "criterion_integral",
    "classify",
    "invariant_density",
    "pi_normalization",
    "pi_cdf",
    "scale_function",
    "sigma",
    "sigma_poisson",
    "sufficient_recurrence_nonhomogeneous",
]

DEFAULT_X_MAX = 1e6
DEFAULT_TOL = 1e-9
DEFAULT_BAND = 0.05


class UnsupportedProfileError(ProfileError):
    pass


class InfiniteMeasureError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class Status(str, Enum):
    FINITE = "finite"
    DIVERGENT = "divergent"
    INDETERMINATE = "indeterminate"


class Verdict(str, Enum):
    RECURRENT = "RECURRENT"
    TRANSIENT_RIGHT = "TRANSIENT_RIGHT"
    TRANSIENT_LEFT = "TRANSIENT_LEFT"
    INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class CriterionValue:
    status: Status
    value: float
    tail_exponent: float
    extrapolated_exponent: float = math.nan
    abs_error: float = math.nan
    tail_added: float = 0.0
    note: str = ""

    @property
    def finite(self) -> bool:
        return self.status is Status.FINITE


@dataclass(frozen=True)
class SigmaResult:
    status: str  # finite | infinite | indeterminate | not_applicable
    value: float
    i1: float = math.nan
    i2: float = math.nan
    abs_error: float = math.nan


@dataclass
class ClassificationReport:
    profile_id: str
    c1_plus: CriterionValue
    c1_minus: CriterionValue
    c2_plus: CriterionValue
    c2_minus: CriterionValue
    verdict: Verdict
    speed: float
    pi_norm_c: float | None
    pi_mean: float | None
    sigma: SigmaResult
    sigma_poisson: float | None = None
    quadrature_meta: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {"profile_id": self.profile_id}
        for name in ("c1_plus", "c1_minus", "c2_plus", "c2_minus"):
            cv: CriterionValue = getattr(self, name)
            rec[name] = cv.value
            rec[f"{name}_status"] = cv.status.value
        rec.update(
            verdict=self.verdict.value,
            speed=self.speed,
            pi_mean=self.pi_mean,
            sigma=self.sigma.value,
            sigma_status=self.sigma.status,
            x_max=self.quadrature_meta.get("x_max"),
            tol=self.quadrature_meta.get("tol"),
            pi_norm_c=self.pi_norm_c,
            sigma_poisson=self.sigma_poisson,
            mode=self.quadrature_meta.get("mode"),
            tail_exponents={k: asdict(getattr(self, k))["tail_exponent"]
                            for k in ("c1_plus", "c1_minus", "c2_plus", "c2_minus")},
        )
        return rec

    def csv_row(self) -> dict:
        rec = self.to_record()
        return {k: rec[k] for k in REPORT_COLUMNS}


REPORT_COLUMNS = (
    "profile_id", "c1_plus", "c1_plus_status", "c1_minus", "c1_minus_status",
    "c2_plus", "c2_plus_status", "c2_minus", "c2_minus_status", "verdict", "speed",
    "pi_mean", "sigma", "sigma_status", "x_max", "tol",
)


# ---------------------------------------------------------------------------
# H(x) in closed form

def _require_homogeneous(p: ExcitationProfile) -> None:
    if not p.homogeneous:
        raise UnsupportedProfileError(f"{p.profile_id} depends on x; only homogeneous profiles are supported")


def _poly_segments(code, pp, a1, a2):
    """h on [knots[i], knots[i+1]] equals A + B l + C l^2; constant past knots[-1]."""
    if code == _jit.SINGLE_COOKIE:
        return np.array([0.0, 1.0]), np.array([[0.0, pp[0], 0.0]])
    if code == _jit.SITE_COOKIES:
        return np.array([0.0, 1.0]), np.array([[0.0, a2[0], 0.0]])
    if code == _jit.PIECEWISE_COOKIES:
        knots = np.concatenate([[0.0], a1])
        coef, acc = [], 0.0
        for i in range(a1.size):
            c = a2[i]
            coef.append([acc - c * knots[i], c, 0.0])
            acc += c * (knots[i + 1] - knots[i])
        return knots, np.array(coef)
    if code == _jit.CUSTOM_TABLE:
        knots = np.asarray(a1)
        coef, acc = [], 0.0
        for i in range(knots.size - 1):
            lo, hi = knots[i], knots[i + 1]
            s = (a2[i + 1] - a2[i]) / (hi - lo)
            # acc + a2[i] u + s u^2 / 2, u = l - lo
            coef.append([acc - a2[i] * lo + 0.5 * s * lo * lo, a2[i] - s * lo, 0.5 * s])
            acc += 0.5 * (a2[i] + a2[i + 1]) * (hi - lo)
        return knots, np.array(coef)
    return None


def _segment_H(knots, coef, x):
    """int_0^x h(l)/l dl for h given by polynomial segments (x > 0 array)."""
    h_end = coef[-1, 0] + coef[-1, 1] * knots[-1] + coef[-1, 2] * knots[-1] ** 2

    def piece(i, lo, hi):
        A, B, C = coef[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            log_term = np.where(A == 0.0, 0.0, A * np.log(hi / np.where(lo > 0, lo, 1.0)))
        return log_term + B * (hi - lo) + 0.5 * C * (hi * hi - lo * lo)

    full = np.array([piece(i, knots[i], knots[i + 1]) for i in range(len(coef))], dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(full)])
    idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(coef))
    out = np.empty_like(x)
    inside = idx < len(coef)
    for i in np.unique(idx[inside]):
        m = inside & (idx == i)
        out[m] = cum[i] + piece(i, knots[i], x[m])
    beyond = ~inside
    out[beyond] = cum[-1] + h_end * np.log(x[beyond] / knots[-1])
    return out


def _ein(z):
    """Entire exponential integral Ein(z) = int_0^z (1 - e^-t)/t dt."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1.0
    zs = z[small]
    term = zs.copy()
    acc = zs.copy()
    for k in range(2, 40):
        term = -term * zs * (k - 1) / (k * k)
        acc = acc + term
    out[small] = acc
    zl = z[~small]
    out[~small] = special.exp1(zl) + np.log(zl) + np.euler_gamma
    return out


def _H_untruncated(code, pp, a1, a2, x):
    seg = _poly_segments(code, pp, a1, a2)
    if seg is not None:
        return _segment_H(*seg, x)
    if code == _jit.EXP_DECAY:
        return pp[0] * _ein(pp[1] * x)
    if code == _jit.LOG_CRITICAL:
        alpha = pp[0]
        out = (1.0 + alpha) * x / math.e
        big = x > math.e
        xb = x[big]
        out[big] = alpha + np.log(xb) + alpha * np.log(np.log(xb))
        return out
    raise UnsupportedProfileError(f"no closed form for profile code {code}")


def _H(p: ExcitationProfile, x) -> np.ndarray:
    code, pp, a1, a2, trunc = p.kernel_args()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    if math.isfinite(trunc):
        inner = _H_untruncated(code, pp, a1, a2, np.minimum(xp, trunc)) if trunc > 0 else np.zeros_like(xp)
        h_n = _jit._h_untruncated(code, pp, a1, a2, 0.0, trunc)
        with np.errstate(divide="ignore"):
            extra = np.where(xp > trunc, h_n * np.log(xp / max(trunc, 1e-300)), 0.0)
        vals = inner + extra
    else:
        vals = _H_untruncated(code, pp, a1, a2, xp)
    out[pos] = pp[3] * vals
    return out


def big_h(p: ExcitationProfile, x):
    """H(x) = int_0^x h(l)/l dl (x >= 0), scalar or array."""
    _require_homogeneous(p)
    if np.any(np.asarray(x) < 0):
        raise ProfileError("big_h needs x >= 0")
    out = _H(p, x)
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


def _breakpoints(p: ExcitationProfile) -> list[float]:
    code, pp, a1, a2, trunc = p.kernel_args()
    pts = []
    if code in (_jit.SINGLE_COOKIE, _jit.SITE_COOKIES):
        pts.append(1.0)
    elif code in (_jit.PIECEWISE_COOKIES, _jit.CUSTOM_TABLE):
        pts.extend(float(v) for v in a1 if v > 0)
    elif code == _jit.LOG_CRITICAL:
        pts.append(math.e)
    if math.isfinite(trunc) and trunc > 0:
        pts.append(trunc)
    return sorted(set(pts))


# ---------------------------------------------------------------------------
# criterion integrals

Side = Literal["plus", "minus"]


def _side_sign(side: str) -> float:
    if side == "plus":
        return 1.0
    if side == "minus":
        return -1.0
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def _log_integrand(p, s, moment, x):
    return moment * np.log(x) - s * _H(p, x)


def _panel_edges(x_max: float, breakpoints) -> list[float]:
    edges = [0.0, 2.0 ** -10]
    k = -10
    while 2.0 ** (k + 1) < x_max:
        k += 1
        edges.append(2.0 ** k)
    edges.append(x_max)
    edges.extend(b for b in breakpoints if 0 < b < x_max)
    return sorted(set(edges))


def _numeric_tail(p, s, moment, x_max, n_sub=8, n_pts=9):
    """Least-squares log-log slope over [x_max/4, x_max] and its extrapolation.

    Local slopes on sub-windows are regressed against 1/ln(x) so that a slowly
    converging exponent (log corrections) is extrapolated to x = infinity.
    """
    lx = np.linspace(math.log(x_max / 4), math.log(x_max), n_sub * (n_pts - 1) + 1)
    ly = _log_integrand(p, s, moment, np.exp(lx))
    slope = float(np.polyfit(lx, ly, 1)[0])
    mids, slopes = [], []
    for j in range(n_sub):
        sl = slice(j * (n_pts - 1), (j + 1) * (n_pts - 1) + 1)
        slopes.append(np.polyfit(lx[sl], ly[sl], 1)[0])
        mids.append(1.0 / lx[sl].mean())
    fit = np.polyfit(np.array(mids), np.array(slopes), 1)
    return slope, float(fit[1]), float(slopes[-1])


def criterion_integral(
    p: ExcitationProfile,
    side: Side = "plus",
    moment: int = 0,
    x_max: float = DEFAULT_X_MAX,
    tol: float = DEFAULT_TOL,
    *,
    mode: Literal["auto", "declared", "numeric"] = "auto",
    band: float = DEFAULT_BAND,
) -> CriterionValue:
    """int_0^inf x^moment exp(-+H(x)) dx with a convergence verdict.

    The integral is computed up to ``x_max`` on geometric panels and a tail
    estimate is added when it converges.  ``mode='declared'`` (the default
    when the profile declares its asymptotics) decides convergence
    analytically; ``mode='numeric'`` regresses the log-log tail slope and
    refuses to decide inside ``1 +- band``.
    """
    _require_homogeneous(p)
    if moment not in (0, 1):
        raise ValueError("moment must be 0 or 1")
    s = _side_sign(side)
    use_tail = mode == "declared" or (mode == "auto" and p.tail is not None)
    if mode == "declared" and p.tail is None:
        raise ValueError(f"{p.profile_id} declares no tail asymptotics")

    # quadrature on [0, x_max]
    pieces, errors, ok = [], [], True
    edges = _panel_edges(x_max, _breakpoints(p))
    with np.errstate(over="ignore"):
        f = lambda x: math.exp(moment * math.log(x) - s * _H(p, x)[0]) if x > 0 else (1.0 if moment == 0 else 0.0)
        for a, b in zip(edges[:-1], edges[1:]):
            try:
                val, err, info = integrate.quad(f, a, b, epsabs=0.0, epsrel=tol * 0.01, limit=200,
                                                full_output=True)[:3]
            except OverflowError:
                val, err = math.inf, math.inf
            if not math.isfinite(val):
                pieces.append(math.inf)
                errors.append(math.inf)
                continue
            pieces.append(val)
            errors.append(err)
    body = math.fsum(pieces)
    abs_err = math.fsum(errors)

    log_f_end = float(_log_integrand(p, s, moment, np.array([x_max]))[0])
    slope, extrap, local = _numeric_tail(p, s, moment, x_max)
    note = ""

    if use_tail:
        g = s * p.tail.h_inf
        q = None if p.tail.log_coeff is None else s * p.tail.log_coeff
        decay = g - moment  # integrand ~ x^-decay (ln x)^-q
        if decay > 1:
            status = Status.FINITE
        elif decay < 1:
            status = Status.DIVERGENT
        elif q is None:
            status, note = Status.INDETERMINATE, "exponent on the boundary and no log coefficient declared"
        else:
            status = Status.FINITE if q > 1 else Status.DIVERGENT
        tail_exponent = -decay
        tail_added = 0.0
        if status is Status.FINITE:
            f_end = math.exp(log_f_end)
            h_end = s * float(eval_h(p, 0.0, x_max))
            local_decay = h_end - moment
            if decay == 1:
                tail_added = f_end * x_max * math.log(x_max) / (q - 1.0)
            elif local_decay > 1:
                tail_added = f_end * x_max / (local_decay - 1.0)
            else:
                tail_added = f_end * x_max / (decay - 1.0)
    else:
        tail_exponent = slope
        if extrap <= -(1.0 + band):
            status = Status.FINITE
        elif extrap >= -(1.0 - band):
            status = Status.DIVERGENT
        else:
            status = Status.INDETERMINATE
            note = f"extrapolated tail exponent {extrap:.4f} within {band} of -1"
        tail_added = 0.0
        if status is Status.FINITE:
            tail_added = math.exp(log_f_end) * x_max / (-local - 1.0) if local < -1 else math.inf

    if status is Status.FINITE:
        value = body + tail_added
        if not math.isfinite(value) or abs_err > max(tol, 1e-14) * abs(value) * 10:
            return CriterionValue(Status.INDETERMINATE, value, tail_exponent, extrap, abs_err, tail_added,
                                  note or "quadrature did not reach the requested tolerance")
        return CriterionValue(status, value, tail_exponent, extrap, abs_err, tail_added, note)
    if status is Status.DIVERGENT:
        return CriterionValue(status, math.inf, tail_exponent, extrap, abs_err, 0.0, note)
    return CriterionValue(status, body, tail_exponent, extrap, abs_err, 0.0, note)


# ---------------------------------------------------------------------------
# invariant density, scale function, sigma

def invariant_density(p: ExcitationProfile, x, normalized: bool = False):
    """exp(-H(x)); multiplied by c = 1/C1+ when ``normalized``."""
    _require_homogeneous(p)
    dens = np.exp(-_H(p, x))
    if normalized:
        dens = dens * pi_normalization(p)
    return float(dens[0]) if np.ndim(x) == 0 else dens.reshape(np.shape(x))


def pi_normalization(p: ExcitationProfile, x_max: float = DEFAULT_X_MAX, tol: float = DEFAULT_TOL,
                     mode: str = "auto") -> float:
    """Normalizing constant c = 1 / C1+ of the invariant density."""
    c1 = criterion_integral(p, "plus", 0, x_max, tol, mode=mode)
    if c1.status is not Status.FINITE:
        raise InfiniteMeasureError(f"invariant measure of {p.profile_id} is not finite (C1+ {c1.status.value})")
    return 1.0 / c1.value


def pi_cdf(p: ExcitationProfile, xs, n_nodes: int = 20) -> np.ndarray:
    """CDF of the normalized invariant law at the points ``xs``."""
    c = pi_normalization(p)
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs, kind="stable")
    srt = np.clip(xs[order], 0.0, None)
    knots = np.concatenate([[0.0], srt])
    # split intervals at profile breakpoints so each piece is smooth
    knots = np.unique(np.concatenate([knots, [b for b in _breakpoints(p) if b < knots[-1]]]))
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    a, b = knots[:-1, None], knots[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * t
    vals = np.exp(-_H(p, nodes.ravel())).reshape(nodes.shape)
    pieces = 0.5 * (b[:, 0] - a[:, 0]) * (vals @ w)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    out_sorted = c * cum[np.searchsorted(knots, srt)]
    out = np.empty_like(out_sorted)
    out[order] = np.minimum(out_sorted, 1.0)
    return out


def scale_function(p: ExcitationProfile, x: float) -> tuple[float, float]:
    """(s(x), s'(x)) with s'(x) = exp(H(x))/x and s(1) = 0."""
    _require_homogeneous(p)
    if not x > 0:
        raise ProfileError(f"scale function needs x > 0, got {x}")
    ds = math.exp(float(_H(p, x)[0])) / x
    if x == 1.0:
        return 0.0, ds
    lo, hi = (x, 1.0) if x < 1 else (1.0, x)
    edges = geometric_edges(lo, hi, 2.0, _breakpoints(p))
    f = lambda u: math.exp(float(_H(p, u)[0])) / u
    total = math.fsum(integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
                      for a, b in zip(edges[:-1], edges[1:]))
    return (total if x > 1 else -total), ds


def _sigma_tail_status(p: ExcitationProfile, mode: str, band: float, x_max: float) -> str:
    if mode != "numeric" and p.tail is not None:
        h_inf = p.tail.h_inf
        if h_inf > 4:
            return "finite"
        if 0 < h_inf < 4:
            return "infinite"
        return "indeterminate"
    _, extrap, _ = _numeric_tail(p, 1.0, 0, x_max)
    h_est = -extrap
    if h_est >= 4 + band:
        return "finite"
    if 0 < h_est <= 4 - band:
        return "infinite"
    return "indeterminate"


def _sigma_integrals(p: ExcitationProfile, x_max: float, ratio: float, n: int, lo: float = 1e-14):
    """The two double integrals of the CLT constant, reduced to iterated 1-D form.

    I2 over [0,1]^2: |s| is decreasing there, so
        I2 = 2 int_0^1 |s(y)|/s'(y) * int_0^y dx/s'(x) dy.
    I1 over [1,inf)^2:
        I1 = int_1^inf (1/s'(y)) [int_1^y s/s' dx + s(y) int_y^inf dx/s'] dy.
    """
    bps = _breakpoints(p)
    # (0, 1]
    low = Panels(geometric_edges(lo, 1.0, ratio, bps), n)
    x = low.nodes
    H = _H(p, x.ravel()).reshape(x.shape)
    ds = np.exp(H) / x
    inv = x * np.exp(-H)
    s_low = -low.reverse_cumulative(ds)
    G = low.cumulative(inv, start=0.5 * lo * lo)
    i2 = 2.0 * low.integrate(np.abs(s_low) * inv * G)
    # [1, x_max]
    high = Panels(geometric_edges(1.0, x_max, ratio, bps), n)
    y = high.nodes
    H = _H(p, y.ravel()).reshape(y.shape)
    with np.errstate(over="ignore"):
        ds = np.exp(H) / y
    inv = y * np.exp(-H)
    s_high = high.cumulative(ds)
    A = high.cumulative(s_high * inv)
    h_end = float(eval_h(p, 0.0, x_max))
    inv_end = x_max * math.exp(-float(_H(p, x_max)[0]))
    B = high.reverse_cumulative(inv, end=inv_end * x_max / (h_end - 2.0))
    integrand = inv * (A + s_high * B)
    i1_body = high.integrate(integrand)
    f_end = float(integrand[-1, -1])
    i1 = i1_body + f_end * x_max / (h_end - 4.0)
    return i1, i2


def sigma(
    p: ExcitationProfile,
    tol: float = 1e-8,
    *,
    x_max: float = DEFAULT_X_MAX,
    mode: str = "auto",
    band: float = DEFAULT_BAND,
) -> SigmaResult:
    """CLT scale constant 4 sqrt(c) v^(3/2) (I1 + I2)^(1/2) of a ballistic profile.

    Requires a positive speed (C2+ finite).  Returns status ``infinite`` when
    the tail exponent h_inf lies in (0, 4) and ``indeterminate`` at h_inf = 4.
    """
    _require_homogeneous(p)
    c1 = criterion_integral(p, "plus", 0, x_max, mode=mode, band=band)
    c2 = criterion_integral(p, "plus", 1, x_max, mode=mode, band=band)
    if not (c1.finite and c2.finite):
        raise PreconditionError(f"{p.profile_id} has no positive speed (C2+ {c2.status.value})")
    status = _sigma_tail_status(p, mode, band, x_max)
    if status != "finite":
        return SigmaResult(status, math.inf if status == "infinite" else math.nan)
    c = 1.0 / c1.value
    v = c1.value / c2.value
    i1, i2 = _sigma_integrals(p, x_max, 2.0 ** 0.25, 16)
    i1b, i2b = _sigma_integrals(p, x_max, 2.0 ** 0.125, 24)
    err = abs(i1b + i2b - i1 - i2)
    if err > tol * abs(i1b + i2b) * 100:
        return SigmaResult("indeterminate", math.nan, i1b, i2b, err)
    value = 4.0 * math.sqrt(c) * v ** 1.5 * math.sqrt(i1b + i2b)
    return SigmaResult("finite", value, i1b, i2b, err)


def sigma_poisson(p: ExcitationProfile, *, x_max: float = DEFAULT_X_MAX, lo: float = 1e-14) -> float:
    """Asymptotic standard deviation of (X_t - v t)/sqrt(t) from the Poisson equation.

    For the local-time diffusion with normalized invariant density pi and
    mean m = 1/v, T_r = int_0^r Z has variance rate
        V = int_0^inf F(z)^2 / (z pi(z)) dz,  F(z) = int_0^z (u - m) pi(u) du,
    so that sigma = v^(3/2) sqrt(V).
    """
    _require_homogeneous(p)
    c1 = criterion_integral(p, "plus", 0, x_max)
    c2 = criterion_integral(p, "plus", 1, x_max)
    if not (c1.finite and c2.finite):
        raise PreconditionError(f"{p.profile_id} has no positive speed")
    if _sigma_tail_status(p, "auto", DEFAULT_BAND, x_max) != "finite":
        return math.inf
    c = 1.0 / c1.value
    m = c2.value / c1.value
    bps = _breakpoints(p) + [m]
    panels = Panels(geometric_edges(lo, x_max, 2.0 ** 0.125, bps), 24)
    z = panels.nodes
    pi = c * np.exp(-_H(p, z.ravel()).reshape(z.shape))
    g = (z - m) * pi
    # F from the left below m and from the right above m (F(inf) = 0) to avoid cancellation
    F_left = panels.cumulative(g)
    h_end = float(eval_h(p, 0.0, x_max))
    pi_end = c * math.exp(-float(_H(p, x_max)[0]))
    tail_g = pi_end * x_max * x_max / (h_end - 2.0)
    F_right = -panels.reverse_cumulative(g, end=tail_g)
    F = np.where(z < m, F_left, F_right)
    integrand = F * F / (z * pi)
    V = panels.integrate(integrand) + float(integrand[-1, -1]) * x_max / (h_end - 4.0)
    return float((c1.value / c2.value) ** 1.5 * math.sqrt(V))


# ---------------------------------------------------------------------------
# classification

def classify(
    p: ExcitationProfile,
    *,
    x_max: float = DEFAULT_X_MAX,
    tol: float = DEFAULT_TOL,
    mode: Literal["auto", "declared", "numeric"] = "auto",
    band: float = DEFAULT_BAND,
    with_sigma: bool = True,
) -> ClassificationReport:
    """Recurrence verdict, speed, invariant-law data and CLT constant of ``p``."""
    _require_homogeneous(p)
    kw = dict(x_max=x_max, tol=tol, mode=mode, band=band)
    c1p = criterion_integral(p, "plus", 0, **kw)
    c1m = criterion_integral(p, "minus", 0, **kw)
    c2p = criterion_integral(p, "plus", 1, **kw)
    c2m = criterion_integral(p, "minus", 1, **kw)
    if c1p.finite and c1m.finite:
        raise RuntimeError(f"{p.profile_id}: C1+ and C1- both finite; the two sides cannot both be transient")
    meta = {"x_max": x_max, "tol": tol, "mode": mode, "band": band}
    parts = (c1p, c1m, c2p, c2m)
    no_sigma = SigmaResult("not_applicable", math.nan)
    if any(cv.status is Status.INDETERMINATE for cv in parts):
        return ClassificationReport(p.profile_id, *parts, Verdict.INDETERMINATE, math.nan, None, None,
                                    no_sigma, None, meta)
    if c1p.finite:
        verdict = Verdict.TRANSIENT_RIGHT
    elif c1m.finite:
        verdict = Verdict.TRANSIENT_LEFT
    else:
        verdict = Verdict.RECURRENT

    speed, pi_c, pi_mean = 0.0, None, None
    sig, sig_p = no_sigma, None
    if verdict is not Verdict.RECURRENT:
        right = verdict is Verdict.TRANSIENT_RIGHT
        c1, c2 = (c1p, c2p) if right else (c1m, c2m)
        pi_c = 1.0 / c1.value
        pi_mean = c2.value / c1.value if c2.finite else math.inf
        if c2.finite:
            speed = c1.value / c2.value if right else -c1.value / c2.value
            assert abs(abs(speed) * pi_mean - 1.0) <= 1e-8
            if with_sigma:
                q = p if right else reflected(p)
                sig = sigma(q, x_max=x_max, mode=mode, band=band)
                if sig.status == "finite":
                    sig_p = sigma_poisson(q, x_max=x_max)
    return ClassificationReport(p.profile_id, *parts, verdict, speed, pi_c, pi_mean, sig, sig_p, meta)


# ---------------------------------------------------------------------------
# non-homogeneous sufficient condition

def sufficient_recurrence_nonhomogeneous(
    p: ExcitationProfile, z_max: float = 1000.0, n_grid: int = 20001, margin: float = 0.02
) -> str:
    """'RECURRENT_SUFFICIENT' when the running site-average of the total mass
    stays below 1 - margin somewhere on the upper half of [0, z_max]."""
    from .excitation import delta_total

    if not p.nonnegative:
        raise UnsupportedProfileError(f"{p.profile_id} takes negative values; the condition needs phi >= 0")
    xs = np.linspace(0.0, z_max, n_grid)
    masses = np.array([delta_total(p, x) for x in xs])
    cum = integrate.cumulative_trapezoid(masses, xs, initial=0.0)
    upper = xs >= z_max / 2
    running = cum[upper] / xs[upper]
    return "RECURRENT_SUFFICIENT" if running.min() < 1.0 - margin else "INCONCLUSIVE"
