"""Gauge pairs and the scalar machinery derived from them.

A *gauge* is a pair of smooth functions ``(h, tau)`` on an open interval
``I`` inside ``(0, inf)`` with ``tau' > 0`` on ``I`` and ``h'' > 0`` on
``tau(I)``.  Everything else in this package is built from such a pair:
the pointwise divergence kernel

    d(t, s) = h(tau(t)) - h(tau(s)) - (tau(t) - tau(s)) * h'(tau(s)),

the deformed exponential (the clipped inverse of ``ell = h' o tau``), the
derived functions ``(ell, m, gamma, chi, s, s_star)``, equivalence
transforms that leave the kernel invariant, and Legendre conjugation.

Built-in gauges carry closed-form derivatives and a closed-form deformed
exponential; custom gauges fall back to safeguarded root-finding and
adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError

__all__ = [
    "Interval",
    "ScalarFn",
    "GaugeTriple",
    "DerivedFunctions",
    "EquivalenceTransform",
    "builtin_gauge",
    "derived",
    "d_htau",
    "exp_htau",
    "apply_equivalence",
    "gauge_from_pair",
    "delta_pair",
    "legendre_conjugate",
    "conjugate_fn",
    "gauge_to_json",
    "gauge_from_json",
    "log_grid",
]

_EPS = float(np.finfo(float).eps)
_FD_STEP = _EPS ** (1.0 / 3.0)


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi); endpoints may be 0, -inf or +inf."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"empty interval ({self.lo}, {self.hi})")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def require(self, x, what: str = "argument"):
        if not np.all(self.contains(x)):
            raise DomainError(f"{what} outside the open interval ({self.lo}, {self.hi})")

    def finite_slice(self, pad: float = 1e-6) -> tuple[float, float]:
        """A finite closed slice safely inside the open interval."""
        lo = self.lo if math.isfinite(self.lo) else -1e8
        hi = self.hi if math.isfinite(self.hi) else 1e8
        span = hi - lo
        a = lo + pad * min(span, 1.0) if math.isfinite(self.lo) else lo
        if self.lo == 0.0:
            a = max(a, 1e-8)
        b = hi - pad * min(span, 1.0) if math.isfinite(self.hi) else hi
        return a, b


def log_grid(lo: float, hi: float, n: int = 64) -> np.ndarray:
    """Log-uniform grid on a compact subinterval (geometric when lo > 0)."""
    if lo > 0:
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _fd_d1(f: Callable) -> Callable:
    def d1(t):
        t = np.asarray(t, dtype=float)
        h = _FD_STEP * np.maximum(1.0, np.abs(t))
        return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)

    return d1


def _fd_d2(f: Callable) -> Callable:
    def d2(t):
        t = np.asarray(t, dtype=float)
        h = (_EPS ** 0.25) * np.maximum(1.0, np.abs(t))
        return (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (
            12 * h * h
        )

    return d2


@dataclass(frozen=True)
class ScalarFn:
    """A real function with first and second derivatives on an open domain.

    ``analytic`` is False when derivatives come from the finite-difference
    fallback, which is accurate only to about 1e-10 relative and should not
    feed tolerance-critical paths.
    """

    value: Callable
    d1: Callable
    d2: Callable
    domain: Interval
    analytic: bool = True

    @classmethod
    def from_value(cls, value: Callable, domain: Interval) -> "ScalarFn":
        """Wrap a plain callable, deriving d1/d2 by central differences."""
        return cls(value=value, d1=_fd_d1(value), d2=_fd_d2(value), domain=domain, analytic=False)

    def __call__(self, t):
        return self.value(t)


@dataclass(frozen=True)
class DerivedFunctions:
    """The six scalar functions a gauge generates.

    ell     = h' o tau                (monotone representation)
    m(t)    = ell'(t) tau'(t)         (metric density)
    gamma   = ell''(t) tau'(t)        (connection density)
    chi     = 1 / ell'                (escort reweighting)
    s       = -h o tau                (entropy density)
    s_star  = -tau * ell + h o tau    (dual entropy / potential density)
    """

    ell: ScalarFn
    m: ScalarFn
    gamma: ScalarFn
    chi: ScalarFn
    s: ScalarFn
    s_star: ScalarFn


@dataclass(frozen=True)
class EquivalenceTransform:
    """Kernel-preserving reparametrization (a1, a2, a3, lam) with lam > 0."""

    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("equivalence transform requires lam > 0")


@dataclass(frozen=True)
class GaugeTriple:
    """A gauge (h, tau) on I, with cached derived data.

    ``ell_range`` is the image of ``ell`` over I (used for clipping the
    deformed exponential); ``exp_fn`` is an optional closed-form inverse.
    """

    h: ScalarFn
    tau: ScalarFn
    I: Interval
    name: str
    ell_range: tuple[float, float]
    exp_fn: Optional[Callable] = None
    derived_fns: Optional[DerivedFunctions] = None
    descriptor: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        if self.I.lo < 0:
            raise DomainError("gauge interval must lie inside (0, inf)")
        a, b = self.I.finite_slice()
        probe = log_grid(a, b, 16)
        td1 = np.asarray(self.tau.d1(probe), dtype=float)
        if not np.all(td1 > 0):
            raise DomainError(f"tau' must be positive on I for gauge '{self.name}'")
        hd2 = np.asarray(self.h.d2(self.tau.value(probe)), dtype=float)
        if not np.all(hd2 > 0):
            raise DomainError(f"h'' must be positive on tau(I) for gauge '{self.name}'")


# ----------------------------------------------------------------------------
# q-logarithm helpers shared by the power / escort builtins
# ----------------------------------------------------------------------------


def _ln_q(r, q: float):
    r = np.asarray(r, dtype=float)
    if q == 1.0:
        return np.log(r)
    return (r ** (1.0 - q) - 1.0) / (1.0 - q)


def _h_q(r, q: float):
    # integral of ln_q from 1 to r
    r = np.asarray(r, dtype=float)
    if q == 1.0:
        return r * np.log(r) - r + 1.0
    if q == 2.0:
        return (r - 1.0) - np.log(r)
    return (r ** (2.0 - q) - 1.0) / ((1.0 - q) * (2.0 - q)) - (r - 1.0) / (1.0 - q)


def _ln_q_range(q: float, I: Interval) -> tuple[float, float]:
    def at(t, side):
        if t == 0.0:
            if q > 1.0:
                return -math.inf
            if q == 1.0:
                return -math.inf
            return -1.0 / (1.0 - q)
        if math.isinf(t):
            if q > 1.0:
                return 1.0 / (q - 1.0)
            return math.inf
        return float(_ln_q(t, q))

    return at(I.lo, "lo"), at(I.hi, "hi")


def _exp_q_factory(q: float, lo_ell: float, hi_ell: float) -> Callable:
    def exp_q(u):
        u = np.asarray(u, dtype=float)
        if q == 1.0:
            core = np.exp(u)
        else:
            base = 1.0 + (1.0 - q) * u
            with np.errstate(over="ignore"):
                pow_ = np.maximum(base, 1e-300) ** (1.0 / (1.0 - q))
            core = np.where(base > 0, pow_, np.inf if q > 1.0 else 0.0)
        out = np.where(u >= hi_ell, np.inf, np.where(u <= lo_ell, 0.0, core))
        return out if out.ndim else float(out)

    return exp_q


# ----------------------------------------------------------------------------
# Built-in gauges
# ----------------------------------------------------------------------------


def _sf(value, d1, d2, domain):
    return ScalarFn(value=value, d1=d1, d2=d2, domain=domain)


def _identity_fn(I: Interval) -> ScalarFn:
    return _sf(lambda t: np.asarray(t, dtype=float) + 0.0,
               lambda t: np.ones_like(np.asarray(t, dtype=float)),
               lambda t: np.zeros_like(np.asarray(t, dtype=float)), I)


def _power_fn(p: float, coeff: float, I: Interval) -> ScalarFn:
    # coeff * t**p
    def v(t):
        return coeff * np.asarray(t, dtype=float) ** p

    def d1(t):
        return coeff * p * np.asarray(t, dtype=float) ** (p - 1.0)

    def d2(t):
        return coeff * p * (p - 1.0) * np.asarray(t, dtype=float) ** (p - 2.0)

    return _sf(v, d1, d2, I)


def builtin_gauge(kind: str, q: float | None = None, lam: float | None = None,
                  interval: Interval | None = None) -> GaugeTriple:
    """Construct one of the built-in gauges on ``interval`` (default (0, inf)).

    kind:
        "kl"                h(r) = r log r,            tau = id
        "power"    (q)      h = integral of ln_q,      tau = id
        "escort"   (q)      h = power-escort partner,  tau(t) = t**q
        "scaled_log" (lam)  h(r) = (r log r - r)/lam,  tau(t) = t**lam

    All four have analytic derivatives and a closed-form deformed
    exponential clipped to the image of ``ell`` over the interval.
    """
    I = interval or Interval(0.0, math.inf)
    if I.lo < 0:
        raise DomainError("gauge interval must lie inside (0, inf)")
    J = Interval(*(sorted((_tau_image(kind, q, lam, I)))))

    if kind == "kl":
        h = _sf(lambda r: np.asarray(r, float) * np.log(r),
                lambda r: np.log(r) + 1.0,
                lambda r: 1.0 / np.asarray(r, float), J)
        tau = _identity_fn(I)
        ell = _sf(lambda t: np.log(t) + 1.0, lambda t: 1.0 / np.asarray(t, float),
                  lambda t: -np.asarray(t, float) ** -2.0, I)
        lo_e = -math.inf if I.lo == 0.0 else math.log(I.lo) + 1.0
        hi_e = math.inf if math.isinf(I.hi) else math.log(I.hi) + 1.0
        der = DerivedFunctions(
            ell=ell,
            m=_power_fn(-1.0, 1.0, I),
            gamma=_power_fn(-2.0, -1.0, I),
            chi=_identity_fn(I),
            s=_sf(lambda t: -np.asarray(t, float) * np.log(t),
                  lambda t: -(np.log(t) + 1.0),
                  lambda t: -1.0 / np.asarray(t, float), I),
            s_star=_power_fn(1.0, -1.0, I),
        )
        exp_fn = _shifted_exp_factory(1.0, 1.0, lo_e, hi_e)  # exp(u - 1)
        return GaugeTriple(h, tau, I, "kl", (lo_e, hi_e), exp_fn, der,
                           {"kind": "kl", "lo": I.lo, "hi": _json_hi(I.hi)})

    if kind == "power":
        if q is None or q <= 0:
            raise DomainError("power gauge requires q > 0")
        h = _sf(lambda r: _h_q(r, q), lambda r: _ln_q(r, q),
                lambda r: np.asarray(r, float) ** (-q), J)
        tau = _identity_fn(I)
        ell = _sf(lambda t: _ln_q(t, q), lambda t: np.asarray(t, float) ** (-q),
                  lambda t: -q * np.asarray(t, float) ** (-q - 1.0), I)
        lo_e, hi_e = _ln_q_range(q, I)
        der = DerivedFunctions(
            ell=ell,
            m=_power_fn(-q, 1.0, I),
            gamma=_power_fn(-q - 1.0, -q, I),
            chi=_power_fn(q, 1.0, I),
            s=_sf(lambda t: -_h_q(t, q), lambda t: -_ln_q(t, q),
                  lambda t: -np.asarray(t, float) ** (-q), I),
            s_star=_sf(lambda t: -np.asarray(t, float) * _ln_q(t, q) + _h_q(t, q),
                       lambda t: -np.asarray(t, float) ** (1.0 - q),
                       lambda t: -(1.0 - q) * np.asarray(t, float) ** (-q), I),
        )
        exp_fn = _exp_q_factory(q, lo_e, hi_e)
        return GaugeTriple(h, tau, I, f"power({q:g})", (lo_e, hi_e), exp_fn, der,
                           {"kind": "power", "q": q, "lo": I.lo, "hi": _json_hi(I.hi)})

    if kind == "escort":
        if q is None or q <= 0:
            raise DomainError("escort gauge requires q > 0")

        def f_val(r):
            r = np.asarray(r, dtype=float)
            return q * r * _ln_q(r ** (1.0 / q), q) - r

        def f_d1(r):
            r = np.asarray(r, dtype=float)
            return q * _ln_q(r ** (1.0 / q), q) + r ** (1.0 / q - 1.0) - 1.0

        def f_d2(r):
            r = np.asarray(r, dtype=float)
            return (1.0 / q) * r ** (1.0 / q - 2.0)

        h = _sf(f_val, f_d1, f_d2, J)
        tau = _power_fn(q, 1.0, I)
        ell = _sf(lambda t: _ln_q(t, q), lambda t: np.asarray(t, float) ** (-q),
                  lambda t: -q * np.asarray(t, float) ** (-q - 1.0), I)
        lo_e, hi_e = _ln_q_range(q, I)

        def s_val(t):
            t = np.asarray(t, dtype=float)
            return -q * t ** q * _ln_q(t, q) + t ** q

        def s_d1(t):
            t = np.asarray(t, dtype=float)
            return -q * q * t ** (q - 1.0) * _ln_q(t, q) - q + q * t ** (q - 1.0)

        def s_d2(t):
            t = np.asarray(t, dtype=float)
            return (-q * q * (q - 1.0) * t ** (q - 2.0) * _ln_q(t, q)
                    - q * q / t + q * (q - 1.0) * t ** (q - 2.0))

        def ss_val(t):
            t = np.asarray(t, dtype=float)
            return (q - 1.0) * t ** q * _ln_q(t, q) - t ** q

        der = DerivedFunctions(
            ell=ell,
            m=_power_fn(-1.0, q, I),
            gamma=_power_fn(-2.0, -q * q, I),
            chi=_power_fn(q, 1.0, I),
            s=_sf(s_val, s_d1, s_d2, I),
            s_star=_sf(ss_val,
                       lambda t: -np.ones_like(np.asarray(t, dtype=float)),
                       lambda t: np.zeros_like(np.asarray(t, dtype=float)), I),
        )
        exp_fn = _exp_q_factory(q, lo_e, hi_e)
        return GaugeTriple(h, tau, I, f"escort({q:g})", (lo_e, hi_e), exp_fn, der,
                           {"kind": "escort", "q": q, "lo": I.lo, "hi": _json_hi(I.hi)})

    if kind == "scaled_log":
        if lam is None or lam <= 0:
            raise DomainError("scaled_log gauge requires lam > 0")
        h = _sf(lambda r: (np.asarray(r, float) * np.log(r) - np.asarray(r, float)) / lam,
                lambda r: np.log(r) / lam,
                lambda r: 1.0 / (lam * np.asarray(r, float)), J)
        tau = _power_fn(lam, 1.0, I)
        ell = _sf(lambda t: np.log(t), lambda t: 1.0 / np.asarray(t, float),
                  lambda t: -np.asarray(t, float) ** -2.0, I)
        lo_e = -math.inf if I.lo == 0.0 else math.log(I.lo)
        hi_e = math.inf if math.isinf(I.hi) else math.log(I.hi)

        def s_val(t):
            t = np.asarray(t, dtype=float)
            return t ** lam / lam - t ** lam * np.log(t)

        def s_d1(t):
            t = np.asarray(t, dtype=float)
            return -lam * t ** (lam - 1.0) * np.log(t)

        def s_d2(t):
            t = np.asarray(t, dtype=float)
            return -lam * ((lam - 1.0) * t ** (lam - 2.0) * np.log(t) + t ** (lam - 2.0))

        der = DerivedFunctions(
            ell=ell,
            m=_power_fn(lam - 2.0, lam, I),
            gamma=_power_fn(lam - 3.0, -lam, I),
            chi=_identity_fn(I),
            s=_sf(s_val, s_d1, s_d2, I),
            s_star=_power_fn(lam, -1.0 / lam, I),
        )
        exp_fn = _shifted_exp_factory(1.0, 0.0, lo_e, hi_e)  # exp(u)
        return GaugeTriple(h, tau, I, f"scaled_log({lam:g})", (lo_e, hi_e), exp_fn, der,
                           {"kind": "scaled_log", "lam": lam, "lo": I.lo, "hi": _json_hi(I.hi)})

    raise DomainError(f"unknown gauge kind '{kind}'")


def _tau_image(kind, q, lam, I: Interval) -> tuple[float, float]:
    if kind in ("kl", "power"):
        return I.lo, I.hi
    p = q if kind == "escort" else lam
    if p is None or p <= 0:
        raise DomainError(f"{kind} gauge requires a positive exponent")
    lo = 0.0 if I.lo == 0.0 else I.lo ** p
    hi = math.inf if math.isinf(I.hi) else I.hi ** p
    return lo, hi


def _shifted_exp_factory(scale: float, shift: float, lo_ell: float, hi_ell: float) -> Callable:
    # inverse of ell(t) = log(t)/scale + shift, i.e. t = exp(scale*(u - shift))
    def f(u):
        u = np.asarray(u, dtype=float)
        core = np.exp(scale * (u - shift))
        out = np.where(u >= hi_ell, np.inf, np.where(u <= lo_ell, 0.0, core))
        return out if out.ndim else float(out)

    return f


def _json_hi(hi: float):
    return None if math.isinf(hi) else hi


# ----------------------------------------------------------------------------
# Derived functions for gauges without precomputed closed forms
# ----------------------------------------------------------------------------


def derived(g: GaugeTriple) -> DerivedFunctions:
    """The derived functions of a gauge (cached for builtins)."""
    if g.derived_fns is not None:
        return g.derived_fns

    h, tau, I = g.h, g.tau, g.I

    def ell_v(t):
        return h.d1(tau.value(t))

    def ell_d1(t):
        return h.d2(tau.value(t)) * tau.d1(t)

    ell = ScalarFn(ell_v, ell_d1, _fd_d1(ell_d1), I, analytic=False)

    def m_v(t):
        return ell_d1(t) * tau.d1(t)

    def gamma_v(t):
        return ell.d2(t) * tau.d1(t)

    def chi_v(t):
        return 1.0 / ell_d1(t)

    def s_v(t):
        return -h.value(tau.value(t))

    def s_d1(t):
        return -ell_v(t) * tau.d1(t)

    def ss_v(t):
        return -tau.value(t) * ell_v(t) + h.value(tau.value(t))

    def ss_d1(t):
        return -tau.value(t) * ell_d1(t)

    return DerivedFunctions(
        ell=ell,
        m=ScalarFn(m_v, _fd_d1(m_v), _fd_d2(m_v), I, analytic=False),
        gamma=ScalarFn(gamma_v, _fd_d1(gamma_v), _fd_d2(gamma_v), I, analytic=False),
        chi=ScalarFn(chi_v, _fd_d1(chi_v), _fd_d2(chi_v), I, analytic=False),
        s=ScalarFn(s_v, s_d1, _fd_d1(s_d1), I, analytic=False),
        s_star=ScalarFn(ss_v, ss_d1, _fd_d1(ss_d1), I, analytic=False),
    )


# ----------------------------------------------------------------------------
# Kernel, deformed exponential, conjugation
# ----------------------------------------------------------------------------


def d_htau(g: GaugeTriple, t, s):
    """Divergence kernel d(t, s) >= 0 with equality iff t == s."""
    g.I.require(t, "t")
    g.I.require(s, "s")
    tt = g.tau.value(t)
    ts = g.tau.value(s)
    val = g.h.value(tt) - g.h.value(ts) - (tt - ts) * g.h.d1(ts)
    val = np.asarray(val, dtype=float)
    scale = 1.0 + np.abs(g.h.value(tt)) + np.abs(g.h.value(ts))
    val = np.where((val < 0) & (val > -1e-12 * scale), 0.0, val)
    return val if val.ndim else float(val)


def _invert_monotone(f: Callable, target: float, domain: Interval,
                     increasing: bool = True) -> float:
    """Safeguarded root of f(t) = target for monotone f on an open interval."""
    lo, hi = domain.lo, domain.hi
    t0 = 1.0 if domain.contains(1.0) else sum(domain.finite_slice()) / 2.0

    def g(t):
        return f(t) - target if increasing else target - f(t)

    a = b = t0
    fa = fb = g(t0)
    step = max(1.0, abs(t0))
    for _ in range(200):
        if fa <= 0:
            break
        a = (lo + a) / 2.0 if math.isfinite(lo) else a - step
        step *= 2.0
        fa = g(a)
    else:
        raise DomainError("could not bracket the inverse from below")
    step = max(1.0, abs(t0))
    for _ in range(200):
        if fb >= 0:
            break
        b = (hi + b) / 2.0 if math.isfinite(hi) else b + step
        step *= 2.0
        fb = g(b)
    else:
        raise DomainError("could not bracket the inverse from above")
    if a == b:
        return a
    root = optimize.brentq(g, a, b, xtol=1e-13, rtol=4 * _EPS, maxiter=200)
    return float(root)


def exp_htau(g: GaugeTriple, u):
    """Deformed exponential: the inverse of ell, clipped to 0 / +inf outside."""
    if g.exp_fn is not None:
        return g.exp_fn(u)
    lo_e, hi_e = g.ell_range
    ell = derived(g).ell

    def one(ui: float) -> float:
        if ui >= hi_e:
            return math.inf
        if ui <= lo_e:
            return 0.0
        t = _invert_monotone(lambda x: float(ell.value(x)), ui, g.I)
        # one Newton polish with the analytic slope
        slope = float(ell.d1(t))
        if slope > 0 and math.isfinite(slope):
            t = t - (float(ell.value(t)) - ui) / slope
        return t

    arr = np.asarray(u, dtype=float)
    out = np.array([one(float(x)) for x in arr.ravel()]).reshape(arr.shape)
    return out if out.ndim else float(out)


def legendre_conjugate(g: GaugeTriple, r_star: float) -> float:
    """Value of the convex conjugate of h at r_star in h'(tau(I))."""
    lo_e, hi_e = g.ell_range
    if not (lo_e < r_star < hi_e):
        raise DomainError(f"r_star={r_star} outside the image of h' over tau(I)")
    t = exp_htau(g, r_star)
    r = float(g.tau.value(t))
    return r * r_star - float(g.h.value(r))


def conjugate_fn(f: ScalarFn) -> ScalarFn:
    """Legendre conjugate of a strictly convex ScalarFn, as a ScalarFn.

    The conjugate's domain is the image of f' over f.domain, probed
    numerically; the inverse of f' is computed by safeguarded
    root-finding, so this works for quadrature-backed functions too.
    """
    a, b = f.domain.finite_slice(pad=1e-9)
    probes_lo = np.geomspace(1e-12, max(a, 1e-12), 40) if f.domain.lo == 0.0 else [a]
    lo_img = min(float(f.d1(t)) for t in np.atleast_1d(probes_lo))
    if f.domain.lo == 0.0 and lo_img < -1e10:
        lo_img = -math.inf
    probes_hi = np.geomspace(max(b, 1.0), 1e12, 40) if math.isinf(f.domain.hi) else [b]
    hi_img = max(float(f.d1(t)) for t in np.atleast_1d(probes_hi))
    if math.isinf(f.domain.hi) and hi_img > 1e10:
        hi_img = math.inf
    dom = Interval(lo_img, hi_img)

    def xof(y: float) -> float:
        return _invert_monotone(lambda t: float(f.d1(t)), y, f.domain)

    def value(y):
        ys = np.asarray(y, dtype=float)

        def one(yy):
            x = xof(yy)
            return x * yy - float(f.value(x))

        out = np.array([one(float(v)) for v in ys.ravel()]).reshape(ys.shape)
        return out if out.ndim else float(out)

    def d1(y):
        ys = np.asarray(y, dtype=float)
        out = np.array([xof(float(v)) for v in ys.ravel()]).reshape(ys.shape)
        return out if out.ndim else float(out)

    def d2(y):
        ys = np.asarray(y, dtype=float)
        out = np.array([1.0 / float(f.d2(xof(float(v)))) for v in ys.ravel()]).reshape(ys.shape)
        return out if out.ndim else float(out)

    return ScalarFn(value, d1, d2, dom, analytic=False)


# ----------------------------------------------------------------------------
# Equivalence transforms
# ----------------------------------------------------------------------------


def apply_equivalence(g: GaugeTriple, tr: EquivalenceTransform) -> GaugeTriple:
    """Transformed gauge with identical divergence kernel.

    New pair: tau2 = lam*tau + a3 and h2(rho) = h((rho-a3)/lam)
    - a1*(rho-a3)/lam - a2, so that h(r) = h2(lam*r + a3) + a1*r + a2.
    """
    a1, a2, a3, lam = tr.a1, tr.a2, tr.a3, tr.lam
    der = derived(g)
    h1, tau1 = g.h, g.tau

    J2 = Interval(lam * h1.domain.lo + a3 if math.isfinite(h1.domain.lo) else -math.inf,
                  lam * h1.domain.hi + a3 if math.isfinite(h1.domain.hi) else math.inf)

    def back(rho):
        return (np.asarray(rho, dtype=float) - a3) / lam

    h2 = ScalarFn(
        value=lambda rho: h1.value(back(rho)) - a1 * back(rho) - a2,
        d1=lambda rho: (h1.d1(back(rho)) - a1) / lam,
        d2=lambda rho: h1.d2(back(rho)) / lam ** 2,
        domain=J2, analytic=h1.analytic)
    tau2 = ScalarFn(
        value=lambda t: lam * tau1.value(t) + a3,
        d1=lambda t: lam * tau1.d1(t),
        d2=lambda t: lam * tau1.d2(t),
        domain=g.I, analytic=tau1.analytic)

    ell1 = der.ell
    ell2 = ScalarFn(lambda t: (ell1.value(t) - a1) / lam,
                    lambda t: ell1.d1(t) / lam,
                    lambda t: ell1.d2(t) / lam, g.I, analytic=ell1.analytic)
    chi2 = ScalarFn(lambda t: lam * der.chi.value(t),
                    lambda t: lam * der.chi.d1(t),
                    lambda t: lam * der.chi.d2(t), g.I, analytic=der.chi.analytic)
    s2 = ScalarFn(lambda t: der.s.value(t) + a1 * tau1.value(t) + a2,
                  lambda t: der.s.d1(t) + a1 * tau1.d1(t),
                  lambda t: der.s.d2(t) + a1 * tau1.d2(t), g.I, analytic=der.s.analytic)
    ss2 = ScalarFn(lambda t: der.s_star.value(t) - (a3 / lam) * (ell1.value(t) - a1) - a2,
                   lambda t: der.s_star.d1(t) - (a3 / lam) * ell1.d1(t),
                   lambda t: der.s_star.d2(t) - (a3 / lam) * ell1.d2(t),
                   g.I, analytic=der.s_star.analytic)
    der2 = DerivedFunctions(ell=ell2, m=der.m, gamma=der.gamma, chi=chi2, s=s2, s_star=ss2)

    lo_e, hi_e = g.ell_range
    rng2 = ((lo_e - a1) / lam, (hi_e - a1) / lam)

    exp_fn2 = None
    if g.exp_fn is not None:
        base = g.exp_fn

        def exp_fn2(u):
            return base(lam * np.asarray(u, dtype=float) + a1)

    return GaugeTriple(h2, tau2, g.I, f"{g.name}~equiv", rng2, exp_fn2, der2, None)


# ----------------------------------------------------------------------------
# Construction from a (tau, ell) pair
# ----------------------------------------------------------------------------


def _vec(f: Callable) -> Callable:
    def wrapped(x):
        arr = np.asarray(x, dtype=float)
        out = np.array([f(float(v)) for v in arr.ravel()]).reshape(arr.shape)
        return out if out.ndim else float(out)

    return wrapped


def delta_pair(tau: ScalarFn, ell: ScalarFn, t: float, s: float) -> float:
    """Kernel of a (tau, ell) pair by adaptive quadrature of
    (ell(u) - ell(s)) * tau'(u) from s to t."""
    tau.domain.require([t, s], "kernel argument")
    ls = float(ell.value(s))
    val, _ = integrate.quad(lambda u: (float(ell.value(u)) - ls) * float(tau.d1(u)),
                            s, t, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def gauge_from_pair(tau: ScalarFn, ell: ScalarFn, a: float) -> GaugeTriple:
    """Recover a gauge from monotone (tau, ell) with base point a in I.

    h is defined on tau(I) by integrating ell * tau' up to tau^{-1}(r);
    values come from adaptive quadrature, derivatives are exact:
    h'(r) = ell(tau^{-1}(r)) and h''(r) = ell'(t)/tau'(t) at t = tau^{-1}(r).
    """
    I = tau.domain
    I.require(a, "base point a")
    lo_p, hi_p = I.finite_slice(pad=1e-4)
    probe = log_grid(lo_p, hi_p, 32)
    if not np.all(np.asarray(tau.d1(probe), dtype=float) > 0):
        raise DomainError("tau must be strictly increasing on I")
    if not np.all(np.asarray(ell.d1(probe), dtype=float) > 0):
        raise DomainError("ell must be strictly increasing on I")

    lo_t = 0.0 if I.lo == 0.0 else (tau.value(I.lo) if math.isfinite(I.lo) else -math.inf)
    if I.lo == 0.0:
        lo_t = float(tau.value(1e-13)) if math.isfinite(float(tau.value(1e-13))) else -math.inf
        lo_t = lo_t if abs(lo_t) < 1e10 else -math.inf
    hi_t = float(tau.value(I.hi)) if math.isfinite(I.hi) else math.inf
    Jt = Interval(lo_t - 1e-300 if math.isfinite(lo_t) else lo_t, hi_t)

    def tau_inv(r: float) -> float:
        return _invert_monotone(lambda t: float(tau.value(t)), r, I)

    def h_val(r: float) -> float:
        ub = tau_inv(r)
        val, _ = integrate.quad(lambda t: float(ell.value(t)) * float(tau.d1(t)),
                                a, ub, epsabs=1e-12, epsrel=1e-12, limit=200)
        return val

    def h_d1(r: float) -> float:
        return float(ell.value(tau_inv(r)))

    def h_d2(r: float) -> float:
        t = tau_inv(r)
        return float(ell.d1(t)) / float(tau.d1(t))

    h = ScalarFn(_vec(h_val), _vec(h_d1), _vec(h_d2), Jt, analytic=False)

    # image of ell over I, by probing toward the endpoints
    def limit(side: str) -> float:
        if side == "lo":
            ts = np.geomspace(max(I.lo, 1e-14) if I.lo > 0 else 1e-14, lo_p, 24) \
                if I.lo >= 0 else np.linspace(I.lo + 1e-9, lo_p, 24)
            vals = [float(ell.value(t)) for t in ts]
            v = min(vals)
            return -math.inf if v < -1e10 else v
        ts = np.geomspace(hi_p, 1e14, 24) if math.isinf(I.hi) else [I.hi - 1e-12 * max(1, abs(I.hi))]
        vals = [float(ell.value(t)) for t in np.atleast_1d(ts)]
        v = max(vals)
        return math.inf if v > 1e10 else v

    rng = (limit("lo"), limit("hi"))

    def s_v(t):
        return -h.value(tau.value(t))

    def s_d1(t):
        return -np.asarray(ell.value(t), dtype=float) * np.asarray(tau.d1(t), dtype=float)

    def ss_v(t):
        return -np.asarray(tau.value(t), dtype=float) * np.asarray(ell.value(t), dtype=float) \
            + np.asarray(h.value(tau.value(t)), dtype=float)

    def ss_d1(t):
        return -np.asarray(tau.value(t), dtype=float) * np.asarray(ell.d1(t), dtype=float)

    def m_v(t):
        return np.asarray(ell.d1(t), dtype=float) * np.asarray(tau.d1(t), dtype=float)

    def gamma_v(t):
        return np.asarray(ell.d2(t), dtype=float) * np.asarray(tau.d1(t), dtype=float)

    def chi_v(t):
        return 1.0 / np.asarray(ell.d1(t), dtype=float)

    der = DerivedFunctions(
        ell=ell,
        m=ScalarFn(m_v, _fd_d1(m_v), _fd_d2(m_v), I, analytic=False),
        gamma=ScalarFn(gamma_v, _fd_d1(gamma_v), _fd_d2(gamma_v), I, analytic=False),
        chi=ScalarFn(chi_v, _fd_d1(chi_v), _fd_d2(chi_v), I, analytic=False),
        s=ScalarFn(s_v, s_d1, _fd_d1(s_d1), I, analytic=False),
        s_star=ScalarFn(ss_v, ss_d1, _fd_d1(ss_d1), I, analytic=False),
    )
    return GaugeTriple(h, tau, I, f"pair(a={a:g})", rng, None, der, None)


# ----------------------------------------------------------------------------
# JSON descriptors
# ----------------------------------------------------------------------------


def gauge_to_json(g: GaugeTriple) -> dict:
    if g.descriptor is None:
        raise DomainError("only built-in gauges have a JSON descriptor")
    return dict(g.descriptor)


def gauge_from_json(obj: dict) -> GaugeTriple:
    """Build a gauge from {"kind": ..., "q"/"lam": ..., "lo": ..., "hi": ...}."""
    kind = obj.get("kind")
    lo = obj.get("lo", 0.0) or 0.0
    hi = obj.get("hi")
    interval = Interval(float(lo), math.inf if hi is None else float(hi))
    if kind == "kl":
        return builtin_gauge("kl", interval=interval)
    if kind == "power":
        return builtin_gauge("power", q=float(obj["q"]), interval=interval)
    if kind == "escort":
        return builtin_gauge("escort", q=float(obj["q"]), interval=interval)
    if kind == "scaled_log":
        return builtin_gauge("scaled_log", lam=float(obj.get("lam", obj.get("lambda", 1.0))),
                             interval=interval)
    raise DomainError(f"unknown gauge kind {kind!r}")
