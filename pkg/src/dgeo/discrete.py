"""Deformed exponential families on a finite weighted sample space.

A family is specified by positive weights mu(x), a gauge, an n-by-|X|
statistic matrix T, an offset c and a natural-parameter domain.  Members
have densities

    p_theta(x) = exp_g(<theta, T(x)> - c(x) - psi(theta)),

where exp_g is the gauge's deformed exponential and psi(theta) is the
unique normalizer making the weighted mass one.  The module computes
densities, divergences, entropies, the induced metric and connection in
theta coordinates, verifies the Hessian-potential and canonical-divergence
identities, projects external densities onto the family by moment
matching, and checks affine reparametrization invariance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import DomainError, InfeasibleError, NoSolutionError
from .gauge import GaugeTriple, derived, d_htau, exp_htau, gauge_from_json, gauge_to_json

__all__ = [
    "DiscreteBase",
    "DiscreteFamilySpec",
    "GeometryReport",
    "ProjectionResult",
    "EntropyMaxResult",
    "normalize",
    "density_vector",
    "divergence",
    "entropy",
    "psi_gradient",
    "psi_hessian",
    "metric",
    "connection_raw",
    "hessian_check",
    "canonical_divergence_check",
    "conformal_check",
    "pythagorean_project",
    "entropy_max_check",
    "affine_reparam_check",
    "spec_from_json",
    "spec_to_json",
]

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class DiscreteBase:
    """Finite sample space with positive weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be a non-empty 1-d array of positive finite reals")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class DiscreteFamilySpec:
    """Statistics T (n x |X|), offset c and gauge defining the family.

    The rows of T together with the all-ones row must be linearly
    independent (checked through singular values), which makes the
    representation minimal and theta identifiable.
    """

    base: DiscreteBase
    gauge: GaugeTriple
    T: np.ndarray
    c: np.ndarray
    theta_box: Optional[np.ndarray] = None

    def __post_init__(self):
        T = np.atleast_2d(np.asarray(self.T, dtype=float))
        c = np.asarray(self.c, dtype=float)
        m = self.base.size
        if T.shape[1] != m or c.shape != (m,):
            raise DomainError(f"T must be (n, {m}) and c length {m}")
        n = T.shape[0]
        if n > m - 1:
            raise DomainError("family dimension must satisfy n <= |X| - 1")
        stacked = np.vstack([T, np.ones(m)])
        sv = np.linalg.svd(stacked, compute_uv=False)
        if sv[-1] <= _RANK_TOL * sv[0]:
            raise DomainError("rows of T together with the ones row are linearly dependent")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "c", c)
        if self.theta_box is not None:
            box = np.asarray(self.theta_box, dtype=float)
            if box.shape != (n, 2):
                raise DomainError(f"theta_box must be ({n}, 2)")
            object.__setattr__(self, "theta_box", box)

    @property
    def dim(self) -> int:
        return self.T.shape[0]


def _theta_vec(spec: DiscreteFamilySpec, theta) -> np.ndarray:
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if th.shape != (spec.dim,):
        raise DomainError(f"theta must have length {spec.dim}")
    if spec.theta_box is not None:
        if np.any(th < spec.theta_box[:, 0]) or np.any(th > spec.theta_box[:, 1]):
            raise DomainError("theta outside theta_box")
    return th


def density_vector(spec: DiscreteFamilySpec, values, tol: float = 1e-10) -> np.ndarray:
    """Validate a candidate density: values in I and weighted mass one."""
    p = np.asarray(values, dtype=float)
    if p.shape != (spec.base.size,):
        raise DomainError(f"density must have length {spec.base.size}")
    spec.gauge.I.require(p, "density value")
    mass = float(spec.base.weights @ p)
    if abs(mass - 1.0) > tol:
        raise DomainError(f"density mass {mass} deviates from 1 beyond {tol}")
    return p


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def normalize(spec: DiscreteFamilySpec, theta) -> tuple[float, np.ndarray]:
    """The normalizer psi and density for a natural parameter.

    psi is the unique root of sum_x exp_g(<theta,T(x)> - c(x) - psi) mu(x) = 1,
    found by bracketing (the mass is strictly decreasing in psi) plus a
    Newton polish.  If the mass cannot reach one with every density value
    strictly inside I, the family has no member at this theta and an
    InfeasibleError is raised.
    """
    th = _theta_vec(spec, theta)
    g = spec.gauge
    w = spec.base.weights
    u = spec.T.T @ th - spec.c
    lo_e, hi_e = g.ell_range

    def mass(psi: float) -> float:
        vals = np.asarray(exp_htau(g, u - psi), dtype=float)
        if np.any(np.isinf(vals)):
            return 1e300
        return float(w @ vals)

    psi_min = (np.max(u) - hi_e) if math.isfinite(hi_e) else -math.inf
    psi_max = (np.min(u) - lo_e) if math.isfinite(lo_e) else math.inf

    span = max(1.0, float(np.ptp(u)))
    a = psi_min + span if math.isfinite(psi_min) else float(np.max(u))
    for j in range(80):
        if mass(a) > 1.0:
            break
        a = psi_min + (a - psi_min) / 2.0 if math.isfinite(psi_min) else a - span * 2 ** j
    else:
        raise InfeasibleError("mass stays below one for every admissible psi")
    b = psi_max - span if math.isfinite(psi_max) else float(np.max(u)) + span
    if b <= a:
        b = a + span
    for j in range(80):
        if mass(b) < 1.0:
            break
        b = psi_max - (psi_max - b) / 2.0 if math.isfinite(psi_max) else b + span * 2 ** j
    else:
        raise InfeasibleError("mass stays above one for every admissible psi")

    psi = optimize.brentq(lambda x: mass(x) - 1.0, a, b, xtol=1e-13, rtol=8.9e-16, maxiter=200)

    chi = derived(g).chi
    for _ in range(2):
        p = np.asarray(exp_htau(g, u - psi), dtype=float)
        if not np.all(np.isfinite(p)):
            break
        slope = -float(w @ chi.value(p))
        if slope == 0 or not math.isfinite(slope):
            break
        psi = psi - (float(w @ p) - 1.0) / slope

    p = np.asarray(exp_htau(g, u - psi), dtype=float)
    if not np.all(np.isfinite(p)) or np.any(p <= g.I.lo) or np.any(p >= g.I.hi):
        raise InfeasibleError("normalized density leaves the open interval I")
    if abs(float(w @ p) - 1.0) > 1e-12:
        raise InfeasibleError("normalizer did not converge to mass one")
    return float(psi), p


# ---------------------------------------------------------------------------
# divergence / entropy
# ---------------------------------------------------------------------------


def divergence(spec: DiscreteFamilySpec, p, p2) -> float:
    """Weighted sum of the divergence kernel between two densities."""
    p = density_vector(spec, p)
    p2 = density_vector(spec, p2)
    return float(spec.base.weights @ np.asarray(d_htau(spec.gauge, p, p2), dtype=float))


def entropy(spec: DiscreteFamilySpec, p) -> float:
    """Weighted trace-form entropy sum_x s(p(x)) mu(x) with s = -h o tau."""
    p = density_vector(spec, p)
    return float(spec.base.weights @ np.asarray(derived(spec.gauge).s.value(p), dtype=float))


# ---------------------------------------------------------------------------
# psi derivatives, metric, connection
# ---------------------------------------------------------------------------


def psi_gradient(spec: DiscreteFamilySpec, theta) -> np.ndarray:
    """Gradient of psi: escort-reweighted statistic means."""
    _, p = normalize(spec, theta)
    w = spec.base.weights
    chi = np.asarray(derived(spec.gauge).chi.value(p), dtype=float)
    return (spec.T @ (w * chi)) / float(w @ chi)


def psi_hessian(spec: DiscreteFamilySpec, theta) -> np.ndarray:
    _, p = normalize(spec, theta)
    d = derived(spec.gauge)
    w = spec.base.weights
    chi = np.asarray(d.chi.value(p), dtype=float)
    chi1 = np.asarray(d.chi.d1(p), dtype=float)
    grad = (spec.T @ (w * chi)) / float(w @ chi)
    resid = spec.T - grad[:, None]
    return (resid * (w * chi * chi1)) @ resid.T / float(w @ chi)


def metric(spec: DiscreteFamilySpec, theta) -> np.ndarray:
    """Metric in theta coordinates induced by the divergence."""
    _, p = normalize(spec, theta)
    d = derived(spec.gauge)
    w = spec.base.weights
    chi = np.asarray(d.chi.value(p), dtype=float)
    taup = np.asarray(spec.gauge.tau.d1(p), dtype=float)
    grad = (spec.T @ (w * chi)) / float(w @ chi)
    resid = spec.T - grad[:, None]
    return (resid * (w * taup * chi)) @ resid.T


def connection_raw(spec: DiscreteFamilySpec, theta) -> np.ndarray:
    """g(nabla_i partial_j, partial_k) = -hess(psi)_ij * d_k(tau-mass)."""
    _, p = normalize(spec, theta)
    d = derived(spec.gauge)
    w = spec.base.weights
    chi = np.asarray(d.chi.value(p), dtype=float)
    chi1 = np.asarray(d.chi.d1(p), dtype=float)
    taup = np.asarray(spec.gauge.tau.d1(p), dtype=float)
    grad = (spec.T @ (w * chi)) / float(w @ chi)
    resid = spec.T - grad[:, None]
    hess = (resid * (w * chi * chi1)) @ resid.T / float(w @ chi)
    d_itau = resid @ (w * taup * chi)
    return np.einsum("ij,k->ijk", -hess, d_itau)


# ---------------------------------------------------------------------------
# Hessian structure and canonical divergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometryReport:
    theta: np.ndarray
    g: np.ndarray
    christoffel_raw: np.ndarray
    potential: float
    hess_potential: Optional[np.ndarray]
    max_defect: float
    connection_max: float
    itau_spread: float
    status: str  # "ok" or "not_applicable"
    message: str = ""

    def to_json(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "g": self.g.tolist(),
            "christoffel_raw": self.christoffel_raw.tolist(),
            "potential": self.potential,
            "hess_potential": None if self.hess_potential is None
            else self.hess_potential.tolist(),
            "max_defect": self.max_defect,
            "connection_max": self.connection_max,
            "itau_spread": self.itau_spread,
            "status": self.status,
            "message": self.message,
        }


def _itau(spec: DiscreteFamilySpec, theta) -> float:
    _, p = normalize(spec, theta)
    return float(spec.base.weights @ np.asarray(spec.gauge.tau.value(p), dtype=float))


def _potential(spec: DiscreteFamilySpec, theta) -> float:
    psi, p = normalize(spec, theta)
    d = derived(spec.gauge)
    w = spec.base.weights
    s_star = np.asarray(d.s_star.value(p), dtype=float)
    tau = np.asarray(spec.gauge.tau.value(p), dtype=float)
    return float(-(w @ s_star) + psi * (w @ tau))


def _potential_gradient(spec: DiscreteFamilySpec, theta) -> np.ndarray:
    # valid when the tau-mass is constant on the family
    _, p = normalize(spec, theta)
    tau = np.asarray(spec.gauge.tau.value(p), dtype=float)
    return spec.T @ (spec.base.weights * tau)


def _itau_spread(spec: DiscreteFamilySpec, theta, step: float = 0.01) -> float:
    th = _theta_vec(spec, theta)
    vals = [_itau(spec, th)]
    for i in range(spec.dim):
        for sgn in (-1.0, 1.0):
            probe = th.copy()
            probe[i] += sgn * step * max(1.0, abs(th[i]))
            try:
                vals.append(_itau(spec, probe))
            except (InfeasibleError, DomainError):
                continue
    return float(np.max(vals) - np.min(vals))


def _fd_hessian(f, th: np.ndarray, base_step: float = 1e-4) -> np.ndarray:
    n = th.size
    steps = base_step * np.maximum(1.0, np.abs(th))

    def hess_at(hvec):
        H = np.empty((n, n))
        f0 = f(th)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = hvec[i]
            H[i, i] = (f(th + ei) - 2 * f0 + f(th - ei)) / hvec[i] ** 2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = hvec[j]
                H[i, j] = H[j, i] = (
                    f(th + ei + ej) - f(th + ei - ej) - f(th - ei + ej) + f(th - ei - ej)
                ) / (4 * hvec[i] * hvec[j])
        return H

    coarse = hess_at(steps)
    fine = hess_at(steps / 2.0)
    return (4.0 * fine - coarse) / 3.0


def hessian_check(spec: DiscreteFamilySpec, theta, fd_step: float = 1e-4) -> GeometryReport:
    """Compare the finite-difference Hessian of the potential with the metric.

    Applicable only when the tau-mass is constant across the family
    (automatic for tau = id); otherwise the report carries status
    "not_applicable" and no Hessian is attempted.
    """
    th = _theta_vec(spec, theta)
    G = metric(spec, th)
    gamma = connection_raw(spec, th)
    pot = _potential(spec, th)
    spread = _itau_spread(spec, th)
    if spread > 1e-8:
        return GeometryReport(th, G, gamma, pot, None, math.nan,
                              float(np.max(np.abs(gamma))), spread, "not_applicable",
                              "tau-mass varies across the family; the Hessian-potential "
                              "identity requires it constant")
    H = _fd_hessian(lambda t: _potential(spec, t), th, fd_step)
    defect = float(np.max(np.abs(H - G)))
    return GeometryReport(th, G, gamma, pot, H, defect,
                          float(np.max(np.abs(gamma))), spread, "ok")


def canonical_divergence_check(spec: DiscreteFamilySpec, theta, theta2) -> float:
    """|Phi(th') - Phi(th) + <th - th', grad Phi(th)> - D(p, p')|."""
    th, th2 = _theta_vec(spec, theta), _theta_vec(spec, theta2)
    spread = _itau_spread(spec, th)
    if spread > 1e-8:
        raise DomainError("canonical divergence check needs a constant tau-mass")
    _, p = normalize(spec, th)
    _, p2 = normalize(spec, th2)
    canon = _potential(spec, th2) - _potential(spec, th) \
        + float((th - th2) @ _potential_gradient(spec, th))
    return abs(canon - divergence(spec, p, p2))


@dataclass(frozen=True)
class ConformalCheck:
    defect: float
    grad_defect: float
    itau: float


def conformal_check(spec: DiscreteFamilySpec, theta, theta2) -> ConformalCheck:
    """Canonical divergence of the rescaled structure versus D/Itau.

    Needs tau/chi constant on I (true for the escort gauges).  Also
    reports how far grad(psi) is from the tau-escort mean.
    """
    d = derived(spec.gauge)
    lo, hi = spec.gauge.I.finite_slice()
    grid = np.geomspace(max(lo, 0.05), min(hi, 20.0), 64)
    ratio = np.asarray(spec.gauge.tau.value(grid), dtype=float) \
        / np.asarray(d.chi.value(grid), dtype=float)
    if float(np.max(ratio) - np.min(ratio)) > 1e-10:
        raise DomainError("conformal check needs tau/chi constant on I")
    th, th2 = _theta_vec(spec, theta), _theta_vec(spec, theta2)
    psi, p = normalize(spec, th)
    psi2, p2 = normalize(spec, th2)
    w = spec.base.weights
    tau_p = np.asarray(spec.gauge.tau.value(p), dtype=float)
    itau = float(w @ tau_p)
    grad = psi_gradient(spec, th)
    canon = psi2 - psi + float((th - th2) @ grad)
    defect = abs(canon - divergence(spec, p, p2) / itau)
    grad_escort = (spec.T @ (w * tau_p)) / itau
    return ConformalCheck(defect, float(np.max(np.abs(grad - grad_escort))), itau)


# ---------------------------------------------------------------------------
# projection by moment matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionResult:
    theta: np.ndarray
    p: np.ndarray
    moment_residual: float
    itau_residual: float
    iterations: int


def _tau_moments(spec: DiscreteFamilySpec, p: np.ndarray) -> np.ndarray:
    tau = np.asarray(spec.gauge.tau.value(p), dtype=float)
    return spec.T @ (spec.base.weights * tau)


def pythagorean_project(spec: DiscreteFamilySpec, rho, theta0=None,
                        tol: float = 1e-10, max_iter: int = 100,
                        restarts: int = 10, seed: int = 0) -> ProjectionResult:
    """Member of the family matching the tau-moments of rho.

    Solves I_{T tau}(p_theta) = I_{T tau}(rho) by damped Newton with the
    analytic Jacobian; the tau-mass mismatch is reported as a residual
    (it is an extra constraint only when tau != id).
    """
    rho = density_vector(spec, rho)
    target = _tau_moments(spec, rho)
    d = derived(spec.gauge)
    w = spec.base.weights
    scale = max(1.0, float(np.max(np.abs(target))))

    def F_and_J(th):
        _, p = normalize(spec, th)
        chi = np.asarray(d.chi.value(p), dtype=float)
        taup = np.asarray(spec.gauge.tau.d1(p), dtype=float)
        grad = (spec.T @ (w * chi)) / float(w @ chi)
        resid = spec.T - grad[:, None]
        F = _tau_moments(spec, p) - target
        J = (spec.T * (w * taup * chi)) @ resid.T
        return F, J, p

    rng = np.random.default_rng(seed)
    n = spec.dim
    starts = [np.zeros(n) if theta0 is None else _theta_vec(spec, theta0)]
    for _ in range(restarts):
        if spec.theta_box is not None:
            starts.append(rng.uniform(spec.theta_box[:, 0], spec.theta_box[:, 1]))
        else:
            starts.append(rng.normal(scale=1.0, size=n))

    best = None
    total_iter = 0
    for th0 in starts:
        th = np.asarray(th0, dtype=float).copy()
        try:
            F, J, p = F_and_J(th)
        except (InfeasibleError, DomainError):
            continue
        for it in range(max_iter):
            total_iter += 1
            norm = float(np.max(np.abs(F)))
            if best is None or norm < best[0]:
                best = (norm, th.copy(), p)
            if norm <= tol * scale:
                _, p = normalize(spec, th)
                itau_res = abs(float(w @ spec.gauge.tau.value(p))
                               - float(w @ spec.gauge.tau.value(rho)))
                return ProjectionResult(th, p, norm, itau_res, total_iter)
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                break
            alpha = 1.0
            while alpha >= 1e-8:
                try:
                    F_new, J_new, p_new = F_and_J(th + alpha * step)
                except (InfeasibleError, DomainError):
                    alpha *= 0.5
                    continue
                if np.max(np.abs(F_new)) < (1 - 1e-4 * alpha) * np.max(np.abs(F)):
                    th = th + alpha * step
                    F, J, p = F_new, J_new, p_new
                    break
                alpha *= 0.5
            else:
                break
    raise NoSolutionError(
        "moment matching did not converge; the constraints may be infeasible",
        best=None if best is None else {"theta": best[1], "residual": best[0]})


@dataclass(frozen=True)
class EntropyMaxResult:
    entropy_source: float
    entropy_projected: float
    maximized: bool
    projection: ProjectionResult


def entropy_max_check(spec: DiscreteFamilySpec, rho, tol: float = 1e-10) -> EntropyMaxResult:
    """Projected member has no smaller entropy when the offset c vanishes."""
    if np.any(spec.c != 0):
        raise DomainError("entropy maximality requires a vanishing offset c")
    proj = pythagorean_project(spec, rho)
    e_rho = entropy(spec, rho)
    e_star = entropy(spec, proj.p)
    return EntropyMaxResult(e_rho, e_star, e_star >= e_rho - tol, proj)


# ---------------------------------------------------------------------------
# affine reparametrization
# ---------------------------------------------------------------------------


def affine_reparam_check(spec: DiscreteFamilySpec, A, v1, v2, thetas=None,
                         seed: int = 0) -> float:
    """Max density gap between a representation and its affine transform.

    The transformed representation uses theta' = A theta + v1,
    T' = A^{-T}(T - v2 1^T) and c' = c + <A^{-1} v1, T - v2 1^T>, under
    which member densities are unchanged and psi' = psi - <theta, v2>.
    """
    A = np.asarray(A, dtype=float)
    n = spec.dim
    if A.shape != (n, n):
        raise DomainError(f"A must be ({n}, {n})")
    if abs(np.linalg.det(A)) < 1e-12:
        raise DomainError("A must be invertible")
    v1 = np.asarray(v1, dtype=float).reshape(n)
    v2 = np.asarray(v2, dtype=float).reshape(n)

    T2 = np.linalg.solve(A.T, spec.T - v2[:, None])
    c2 = spec.c + np.linalg.solve(A, v1) @ (spec.T - v2[:, None])
    spec2 = DiscreteFamilySpec(spec.base, spec.gauge, T2, c2)

    if thetas is None:
        rng = np.random.default_rng(seed)
        thetas = [np.zeros(n)] + [rng.normal(scale=0.5, size=n) for _ in range(4)]

    worst = 0.0
    for th in thetas:
        th = np.asarray(th, dtype=float)
        psi, p = normalize(spec, th)
        psi2, p2 = normalize(spec2, A @ th + v1)
        worst = max(worst, float(np.max(np.abs(p - p2))))
        worst = max(worst, abs(psi2 - (psi - float(th @ v2))))
    return worst


# ---------------------------------------------------------------------------
# JSON interface
# ---------------------------------------------------------------------------


def spec_from_json(obj) -> DiscreteFamilySpec:
    """Family spec from {"weights", "gauge", "T", "c", "theta_box"?}."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    try:
        weights = obj["weights"]
        gauge = gauge_from_json(obj["gauge"])
        T = obj["T"]
        c = obj["c"]
    except KeyError as exc:
        raise DomainError(f"family spec is missing field {exc}") from exc
    box = obj.get("theta_box")
    return DiscreteFamilySpec(DiscreteBase(np.asarray(weights, dtype=float)), gauge,
                              np.asarray(T, dtype=float), np.asarray(c, dtype=float),
                              None if box is None else np.asarray(box, dtype=float))


def spec_to_json(spec: DiscreteFamilySpec) -> dict:
    out = {
        "weights": spec.base.weights.tolist(),
        "gauge": gauge_to_json(spec.gauge),
        "T": spec.T.tolist(),
        "c": spec.c.tolist(),
    }
    if spec.theta_box is not None:
        out["theta_box"] = spec.theta_box.tolist()
    return out
