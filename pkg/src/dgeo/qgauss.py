"""q-Gaussian families on R^d and their consistent joint densities.

A q-Gaussian has density exp_q(-|x-v|^2_S - lambda_q(S)) with the
normalizer lambda_q(S) in closed form.  For each sample length k the
family carries a joint density rho_{q,k} on (R^d)^k built from the
constants (a_k, q_k, beta_k, nu_k); the joints are mutually consistent
(integrating out trailing coordinates recovers the shorter joint), which
defines dependent, identically distributed sequences.

Numerically every joint with q > 1 is an elliptical Student-t law on
R^{dk}: matching the quadratic form and the exponent gives degrees of
freedom nu = 2 a_k/(q-1) - dk = 2/(q-1) + 3d (independent of k) and a
per-coordinate scale that is also k-independent, which is how sampling,
moments and escort integrals are computed here.  For q = 1 everything
degenerates to i.i.d. Gaussians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DomainError, InfeasibleError, NoSolutionError

__all__ = [
    "QGaussianParams",
    "RepetitionLaw",
    "MLEResult",
    "MarginalCheckResult",
    "lambda_q",
    "density",
    "repetition",
    "joint_density",
    "joint_t_params",
    "embed_joint",
    "sample_joint",
    "escort_mass",
    "escort_mean",
    "escort_cov",
    "escort_moment",
    "central_second",
    "central_fourth",
    "coordinate_moments",
    "fi_pair_moments",
    "fij_pair_moments",
    "marginal_check",
    "mle",
    "natural_params",
    "natural_to_location_scale",
    "psi_natural",
    "full_statistics",
]


def _check_spd(S: np.ndarray, name: str = "S") -> np.ndarray:
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] != S.shape[1]:
        raise DomainError(f"{name} must be square")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12):
        raise DomainError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(S)) <= 0:
        raise DomainError(f"{name} must be positive definite")
    return S


@dataclass(frozen=True)
class QGaussianParams:
    """Parameters (q, d, v, S) of a q-Gaussian; q >= 1 and d(q-1) < 2."""

    q: float
    d: int
    v: np.ndarray
    S: np.ndarray
    variant: str = "full"  # full | identity | trace_d

    def __post_init__(self):
        if self.q < 1.0:
            raise DomainError("q must be at least 1")
        if self.d < 1:
            raise DomainError("d must be a positive integer")
        if self.d * (self.q - 1.0) >= 2.0:
            raise DomainError("need d(q-1) < 2")
        v = np.asarray(self.v, dtype=float).reshape(self.d)
        S = _check_spd(self.S)
        if S.shape != (self.d, self.d):
            raise DomainError(f"S must be ({self.d}, {self.d})")
        if self.variant == "identity" and not np.allclose(S, np.eye(self.d), atol=1e-12):
            raise DomainError("identity variant requires S = I")
        if self.variant == "trace_d" and abs(np.trace(S) - self.d) > 1e-10:
            raise DomainError("trace_d variant requires tr S = d")
        if self.variant not in ("full", "identity", "trace_d"):
            raise DomainError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "S", S)


def lambda_q(q: float, d: int, S) -> float:
    """Normalizer making exp_q(-|x-v|^2_S - lambda) integrate to one."""
    S = _check_spd(S)
    if S.shape != (d, d):
        raise DomainError(f"S must be ({d}, {d})")
    if q < 1.0 or d * (q - 1.0) >= 2.0:
        raise DomainError("need q >= 1 and d(q-1) < 2")
    sign, logdet = np.linalg.slogdet(S / math.pi)
    if q == 1.0:
        return -0.5 * logdet
    logz = 0.5 * (d * math.log(q - 1.0) + logdet) \
        + gammaln(1.0 / (q - 1.0)) - gammaln(1.0 / (q - 1.0) - d / 2.0)
    c = 2.0 / (2.0 + d * (1.0 - q))
    # lambda = -ln_q(exp(c*logz)) evaluated in log space
    return math.expm1((1.0 - q) * c * logz) / (q - 1.0)


def density(params: QGaussianParams, x) -> np.ndarray | float:
    """Pointwise density at x (shape (..., d)); strictly positive on R^d."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != params.d:
        raise DomainError(f"points must have trailing dimension {params.d}")
    dx = pts - params.v
    Q = np.einsum("...i,ij,...j->...", dx, params.S, dx)
    lam = lambda_q(params.q, params.d, params.S)
    out = _exp_q_pow(-Q - lam, params.q, 1.0)
    return float(out[0]) if squeeze else out


def _exp_q_pow(u, q: float, a: float):
    """exp_q(u)**a, stable for q -> 1 handled by the exact q = 1 branch."""
    u = np.asarray(u, dtype=float)
    if q == 1.0:
        return np.exp(a * u)
    base = 1.0 + (1.0 - q) * u
    with np.errstate(over="ignore"):
        out = np.where(base > 0, np.maximum(base, 1e-300) ** (a / (1.0 - q)), np.inf)
    return out


# ---------------------------------------------------------------------------
# repetition constants and joint densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RepetitionLaw:
    """Joint-density description for k dependent repetitions.

    nu_dof is the Student-t degrees of freedom of the joint on R^{dk};
    it equals 2/(q-1) + 3d for every k (math.inf when q = 1).
    """

    base: QGaussianParams
    k: int
    a_k: float
    q_k: float
    beta_k: float
    nu_k: float
    nu_dof: float


def _constants(q: float, d: int, k: int, S: np.ndarray) -> tuple[float, float, float, float]:
    a_k = 1.0 + (k + 3) * d * (q - 1.0) / 2.0
    q_k = 1.0 + (q - 1.0) / a_k
    if q == 1.0:
        sign, logdet = np.linalg.slogdet(S)
        return a_k, q_k, math.exp(-logdet / d), d * k / 2.0 * math.log(math.pi)
    a_0 = 1.0 + 3 * d * (q - 1.0) / 2.0
    q_0 = 1.0 + (q - 1.0) / a_0
    sign, logdet = np.linalg.slogdet((q - 1.0) * S / math.pi)
    log_beta = -logdet / d + (1.0 - q_k) * gammaln(1.0 / (q_k - 1.0))
    log_g = gammaln(1.0 / (q_k - 1.0)) / a_k - gammaln(1.0 / (q_0 - 1.0)) / a_0
    nu_k = math.expm1((1.0 - q) * log_g) / (q - 1.0)
    return a_k, q_k, math.exp(log_beta), nu_k


def repetition(params: QGaussianParams, k: int) -> RepetitionLaw:
    """Constants (a_k, q_k, beta_k, nu_k) and the t degrees of freedom."""
    if k < 1:
        raise DomainError("k must be a positive integer")
    q, d, S = params.q, params.d, params.S
    a_k, q_k, beta_k, nu_k = _constants(q, d, k, S)
    if q == 1.0:
        nu_dof = math.inf
    else:
        nu_dof = 2.0 * a_k / (q - 1.0) - d * k
        if nu_dof <= 2.0:
            raise DomainError("joint law lacks second moments; hypothesis d(q-1) < 2 violated")
    # det(beta_k(S) S) must not depend on S
    _, logdet_s = np.linalg.slogdet(beta_k * S)
    beta_i = _constants(q, d, k, np.eye(d))[2]
    if abs(logdet_s - d * math.log(beta_i)) > 1e-10 * max(1.0, abs(logdet_s)):
        raise DomainError("internal constant check failed: det(beta_k(S) S) depends on S")
    return RepetitionLaw(params, k, a_k, q_k, beta_k, nu_k, nu_dof)


def joint_density(law: RepetitionLaw, x) -> np.ndarray | float:
    """Joint density at x (shape (..., k, d)); a product of Gaussians at q = 1."""
    p = law.base
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 2
    pts = x.reshape((-1, law.k, p.d)) if squeeze else x
    if pts.shape[-2:] != (law.k, p.d):
        raise DomainError(f"points must have trailing shape ({law.k}, {p.d})")
    dx = pts - p.v
    Q = law.beta_k * np.einsum("...ki,ij,...kj->...", dx, p.S, dx)
    out = _exp_q_pow(-Q - law.nu_k, p.q, law.a_k)
    return float(out.reshape(-1)[0]) if squeeze else out


def embed_joint(law: RepetitionLaw) -> tuple[np.ndarray, np.ndarray, float]:
    """The joint as a single deformed Gaussian on R^{dk}.

    Returns (V, Sigma, lam) with rho = exp_{q_k}(-|x - V|^2_Sigma - lam),
    where Sigma = a_k beta_k (I_k (x) S) and lam = a_k nu_k, which equals
    the closed-form normalizer of the embedded family.
    """
    p = law.base
    V = np.tile(p.v, law.k)
    Sigma = law.a_k * law.beta_k * np.kron(np.eye(law.k), p.S)
    return V, Sigma, law.a_k * law.nu_k


def joint_t_params(law: RepetitionLaw) -> tuple[float, np.ndarray, np.ndarray]:
    """Student-t form (dof, location, scale) of the joint on R^{dk}.

    For q > 1 the scale per coordinate block is
    (1 + (q-1) nu_k) / ((q-1) beta_k nu_dof) * S^{-1}, the same for every
    k (that equality is the marginal-consistency property).  For q = 1
    the returned matrix is the Gaussian covariance and dof is inf.
    """
    p = law.base
    mu = np.tile(p.v, law.k)
    S_inv = np.linalg.inv(p.S)
    if p.q == 1.0:
        cov = np.kron(np.eye(law.k), S_inv / (2.0 * law.beta_k))
        return math.inf, mu, cov
    c = (1.0 + (p.q - 1.0) * law.nu_k) / ((p.q - 1.0) * law.beta_k * law.nu_dof)
    return law.nu_dof, mu, c * np.kron(np.eye(law.k), S_inv)


def sample_joint(law: RepetitionLaw, n: int, seed) -> np.ndarray:
    """Draw n exact samples of the joint, shape (n, k, d).

    Uses the location/scale t representation: x = mu + L z sqrt(nu/W)
    with z standard normal in R^{dk}, one chi-square(nu) mixing variable
    W per sample (the source of the dependence across repetitions), and
    L the per-block Cholesky factor of the scale; q = 1 falls back to
    plain Gaussian sampling.  The block structure keeps the cost at
    O(n k d^2) so long dependent paths stay cheap.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = law.base
    S_inv = np.linalg.inv(p.S)
    if p.q == 1.0:
        block = S_inv / (2.0 * law.beta_k)
        dof = math.inf
    else:
        block = (1.0 + (p.q - 1.0) * law.nu_k) / ((p.q - 1.0) * law.beta_k * law.nu_dof) * S_inv
        dof = law.nu_dof
    A = np.linalg.cholesky(block)
    z = rng.standard_normal((n, law.k, p.d))
    draws = z @ A.T
    if math.isfinite(dof):
        w = rng.chisquare(dof, size=n)
        draws *= np.sqrt(dof / w)[:, None, None]
    return p.v + draws


# ---------------------------------------------------------------------------
# escort integrals (the q_k-power reweighting)
# ---------------------------------------------------------------------------


def _escort_t(law: RepetitionLaw):
    """(mass, dof, scale) of the escort law rho^{q_k} / integral."""
    p = law.base
    V, Sigma, lam = embed_joint(law)
    D = V.size
    qp = law.q_k
    if p.q == 1.0:
        _, _, cov = joint_t_params(law)
        return 1.0, math.inf, cov
    s = qp / (qp - 1.0)
    if s - D / 2.0 <= 0:
        raise InfeasibleError("escort integral diverges")
    _, logdet = np.linalg.slogdet((qp - 1.0) * Sigma / math.pi)
    log_mass = (-s + D / 2.0) * math.log1p((qp - 1.0) * lam) - 0.5 * logdet \
        + gammaln(s - D / 2.0) - gammaln(s)
    nu_e = 2.0 * s - D
    scale_e = (1.0 + (qp - 1.0) * lam) / (nu_e * (qp - 1.0)) * np.linalg.inv(Sigma)
    return math.exp(log_mass), nu_e, scale_e


def escort_mass(law: RepetitionLaw) -> float:
    """Integral of rho^{q_k}; independent of v and of the scale of S."""
    return _escort_t(law)[0]


def escort_mean(law: RepetitionLaw) -> np.ndarray:
    return np.tile(law.base.v, law.k)


def escort_cov(law: RepetitionLaw) -> np.ndarray:
    """Covariance of the normalized escort law on R^{dk}."""
    mass, nu_e, scale_e = _escort_t(law)
    if math.isinf(nu_e):
        return scale_e
    if nu_e <= 2.0:
        raise InfeasibleError("escort law lacks second moments")
    return scale_e * nu_e / (nu_e - 2.0)


def escort_moment(law: RepetitionLaw, idx: Optional[tuple] = None) -> float:
    """Raw escort integral of 1, x_a or x_a x_b over R^{dk}.

    idx=None gives the escort mass, (a,) the first moment of flat
    coordinate a, and (a, b) the second moment; all unnormalized.
    """
    mass = escort_mass(law)
    if idx is None:
        return mass
    V = escort_mean(law)
    if len(idx) == 1:
        return mass * float(V[idx[0]])
    if len(idx) == 2:
        a, b = idx
        C = escort_cov(law)
        return mass * float(V[a] * V[b] + C[a, b])
    raise DomainError("idx must be None, (a,) or (a, b)")


# ---------------------------------------------------------------------------
# moments of the joint law
# ---------------------------------------------------------------------------


def _second_scale(law: RepetitionLaw) -> tuple[float, np.ndarray]:
    dof, _, scale = joint_t_params(law)
    return dof, scale


def central_second(law: RepetitionLaw, a: int, b: int) -> float:
    """E[Y_a Y_b] for the centered joint coordinates."""
    dof, scale = _second_scale(law)
    if math.isinf(dof):
        return float(scale[a, b])
    if dof <= 2:
        raise InfeasibleError("second moments diverge")
    return float(scale[a, b] * dof / (dof - 2.0))


def central_fourth(law: RepetitionLaw, a: int, b: int, c: int, d: int) -> float:
    """E[Y_a Y_b Y_c Y_d]; elliptical-t closed form (Isserlis at q = 1)."""
    dof, scale = _second_scale(law)
    pairs = (scale[a, b] * scale[c, d] + scale[a, c] * scale[b, d]
             + scale[a, d] * scale[b, c])
    if math.isinf(dof):
        return float(pairs)
    if dof <= 4:
        raise InfeasibleError("fourth moments diverge")
    return float(pairs * dof * dof / ((dof - 2.0) * (dof - 4.0)))


@dataclass(frozen=True)
class CoordinateMoments:
    mean: float
    var: float
    central4: float
    raw2: float
    raw4: float


def coordinate_moments(law: RepetitionLaw, i: int = 0) -> CoordinateMoments:
    """Moments of one coordinate of one repetition (any block, by symmetry)."""
    if not 0 <= i < law.base.d:
        raise DomainError("coordinate index out of range")
    v = float(law.base.v[i])
    var = central_second(law, i, i)
    c4 = central_fourth(law, i, i, i, i)
    return CoordinateMoments(mean=v, var=var, central4=c4,
                             raw2=v * v + var,
                             raw4=v ** 4 + 6 * v * v * var + c4)


def fi_pair_moments(law: RepetitionLaw, i: int = 0) -> tuple[float, float]:
    """(E[Y1^4], E[Y1^2 Y2^2]) for coordinate i across two repetitions."""
    if law.k < 2:
        raise DomainError("pair moments need k >= 2")
    a = i
    b = law.base.d + i
    return central_fourth(law, a, a, a, a), central_fourth(law, a, a, b, b)


def fij_pair_moments(law: RepetitionLaw, i: int = 0, j: int = 0) -> tuple[float, float]:
    """(E[Z1^2], E[Z1 Z2]) for Z = x_i x_j centered at its joint mean."""
    if law.k < 2:
        raise DomainError("pair moments need k >= 2")
    d = law.base.d
    vi, vj = float(law.base.v[i]), float(law.base.v[j])
    a, b = i, j
    a2, b2 = d + i, d + j
    W_ij = central_second(law, a, b)
    W_ii = central_second(law, a, a)
    W_jj = central_second(law, b, b)
    ez2 = (vi * vi * W_jj + vj * vj * W_ii + 2 * vi * vj * W_ij
           + central_fourth(law, a, b, a, b) - W_ij ** 2)
    ez12 = central_fourth(law, a, b, a2, b2) - W_ij ** 2
    return ez2, ez12


# ---------------------------------------------------------------------------
# marginal consistency by quadrature
# ---------------------------------------------------------------------------


def _tan_quad(f, center: float, epsabs: float = 1e-10) -> float:
    val, _ = integrate.quad(
        lambda u: f(center + math.tan(u)) / math.cos(u) ** 2,
        -math.pi / 2, math.pi / 2, epsabs=epsabs, epsrel=1e-10, limit=300)
    return val


@dataclass(frozen=True)
class MarginalCheckResult:
    points: np.ndarray
    defects: np.ndarray

    @property
    def max_defect(self) -> float:
        return float(np.max(self.defects))


def marginal_check(law_big: RepetitionLaw, law_small: RepetitionLaw,
                   xs=None, epsabs: float = 1e-10) -> MarginalCheckResult:
    """Integrate the longer joint over its trailing block and compare.

    Supported for d = 1 and k' = law_big.k - law_small.k in {1, 2}; the
    semi-infinite integrals use the tangent substitution centered at v.
    """
    pb, ps = law_big.base, law_small.base
    if (pb.q, pb.d) != (ps.q, ps.d) or not np.allclose(pb.v, ps.v) \
            or not np.allclose(pb.S, ps.S):
        raise DomainError("both laws must share (q, d, v, S)")
    if pb.d != 1:
        raise DomainError("marginal quadrature supports d = 1 only")
    kp = law_big.k - law_small.k
    if kp not in (1, 2):
        raise DomainError("supported trailing lengths k' are 1 and 2")
    k = law_small.k
    v0 = float(pb.v[0])
    if xs is None:
        width = math.sqrt(max(central_second(law_small, 0, 0), 1e-6))
        xs = v0 + width * np.linspace(-2.0, 2.0, 9)
    xs = np.asarray(xs, dtype=float).reshape(-1, k) if np.asarray(xs).ndim > 1 \
        else np.asarray(xs, dtype=float).reshape(-1, 1) * np.ones((1, k))

    defects = np.empty(xs.shape[0])
    for r, xrow in enumerate(xs):
        if kp == 1:
            def f1(y):
                pt = np.concatenate([xrow, [y]]).reshape(k + 1, 1)
                return joint_density(law_big, pt)

            val = _tan_quad(f1, v0, epsabs)
        else:
            def f2(y1, y2):
                pt = np.concatenate([xrow, [y1, y2]]).reshape(k + 2, 1)
                return joint_density(law_big, pt)

            val, _ = integrate.dblquad(
                lambda u1, u2: f2(v0 + math.tan(u1), v0 + math.tan(u2))
                / math.cos(u1) ** 2 / math.cos(u2) ** 2,
                -math.pi / 2, math.pi / 2, -math.pi / 2, math.pi / 2,
                epsabs=epsabs)
        target = joint_density(law_small, xrow.reshape(k, 1))
        defects[r] = abs(val - target)
    return MarginalCheckResult(xs, defects)


# ---------------------------------------------------------------------------
# natural coordinates of the deformed Gaussian family on R^D
# ---------------------------------------------------------------------------


def natural_params(V, Sigma) -> np.ndarray:
    """Natural coordinates of exp_q(-|x-V|^2_Sigma - psi): the linear part
    2 Sigma V followed by -(2 - delta_ab) Sigma_ab for a <= b."""
    V = np.asarray(V, dtype=float)
    Sigma = _check_spd(Sigma, "Sigma")
    D = V.size
    iu = np.triu_indices(D)
    lin = 2.0 * Sigma @ V
    quad = -(2.0 - (iu[0] == iu[1])) * Sigma[iu]
    return np.concatenate([lin, quad])


def natural_to_location_scale(theta, D: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert natural_params; raises if the scale part is not positive."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != D + D * (D + 1) // 2:
        raise DomainError("natural parameter has the wrong length")
    lin, quad = theta[:D], theta[D:]
    Sigma = np.zeros((D, D))
    iu = np.triu_indices(D)
    Sigma[iu] = -quad / (2.0 - (iu[0] == iu[1]))
    Sigma = Sigma + Sigma.T - np.diag(np.diag(Sigma))
    Sigma = _check_spd(Sigma, "scale part of theta")
    V = np.linalg.solve(Sigma, lin) / 2.0
    return V, Sigma


def psi_natural(qp: float, theta, D: int) -> float:
    """Normalizer |V|^2_Sigma + lambda_{qp}(Sigma) in natural coordinates."""
    V, Sigma = natural_to_location_scale(theta, D)
    return float(V @ Sigma @ V) + lambda_q(qp, D, Sigma)


def full_statistics(x_flat) -> np.ndarray:
    """Statistics dual to natural_params: x_a, then x_a x_b for a <= b."""
    x = np.asarray(x_flat, dtype=float).ravel()
    iu = np.triu_indices(x.size)
    return np.concatenate([x, x[iu[0]] * x[iu[1]]])


# ---------------------------------------------------------------------------
# maximum likelihood on the embedded family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MLEResult:
    v: np.ndarray
    S: np.ndarray
    defect: float
    iterations: int
    converged: bool


def _ascend_mean(x: np.ndarray, S: np.ndarray, tol: float = 1e-8,
                 max_iter: int = 500) -> tuple[np.ndarray, int]:
    # maximize -sum_m |x_m - v|^2_S by gradient ascent with backtracking
    k = x.shape[0]
    v = np.zeros(x.shape[1])

    def obj(vv):
        dx = x - vv
        return -float(np.einsum("mi,ij,mj->", dx, S, dx))

    lip = 2.0 * k * float(np.max(np.linalg.eigvalsh(S)))
    step0 = 1.0 / lip
    scale = max(1.0, float(np.max(np.abs(x))))
    for it in range(max_iter):
        grad = 2.0 * S @ (x - v).sum(axis=0)
        if np.max(np.abs(grad)) <= tol * scale:
            return v, it
        alpha, f0 = step0 * 4.0, obj(v)
        while alpha > 1e-12:
            if obj(v + alpha * grad) > f0 + 1e-4 * alpha * float(grad @ grad):
                v = v + alpha * grad
                break
            alpha *= 0.5
        else:
            break
    raise NoSolutionError("mean ascent did not converge", best={"v": v})


def _slice_tangents(q: float, d: int, k: int, v: np.ndarray, S: np.ndarray,
                    family: str, step: float = 1e-6) -> list[np.ndarray]:
    """Tangent directions of the fitted family inside the ambient
    per-block statistic space (linear parts then quadratic parts i <= j)."""

    def theta_of(vv, SS):
        a_k, _, beta_k, _ = _constants(q, d, k, SS)
        Sig = a_k * beta_k * SS
        lin = np.tile(2.0 * Sig @ vv, k)
        iu = np.triu_indices(d)
        quad = np.tile(-(2.0 - (iu[0] == iu[1])) * Sig[iu], k)
        return np.concatenate([lin, quad])

    tangents = []
    for l in range(d):
        e = np.zeros(d)
        e[l] = step
        tangents.append((theta_of(v + e, S) - theta_of(v - e, S)) / (2 * step))
    if family == "full" and d >= 2:
        # symmetric trace-free directions of S
        for a in range(d):
            for b in range(a, d):
                E = np.zeros((d, d))
                if a == b:
                    if a == d - 1:
                        continue
                    E[a, a], E[d - 1, d - 1] = 1.0, -1.0
                else:
                    E[a, b] = E[b, a] = 1.0
                tangents.append((theta_of(v, S + step * E) - theta_of(v, S - step * E))
                                / (2 * step))
    return tangents


def _stationarity_defect(law: RepetitionLaw, x: np.ndarray, family: str) -> float:
    """Tangent-projected residual of the escort-moment condition.

    At the maximizer the escort statistic integrals match the data
    statistics times the escort mass along every direction the family
    can move; the returned defect is the largest violation over a
    unit-norm tangent basis.
    """
    p = law.base
    d, k = p.d, law.k
    mass = escort_mass(law)
    V = escort_mean(law)
    C = escort_cov(law)
    iu = np.triu_indices(d)

    resid = []
    for m in range(k):
        sl = slice(m * d, (m + 1) * d)
        resid.append(mass * V[sl] - mass * x[m])
    for m in range(k):
        sl = slice(m * d, (m + 1) * d)
        Vm = V[sl]
        second = np.outer(Vm, Vm) + C[sl, sl]
        data = np.outer(x[m], x[m])
        resid.append(mass * second[iu] - mass * data[iu])
    r = np.concatenate(resid)

    defect = 0.0
    for u in _slice_tangents(p.q, d, k, p.v, p.S, family):
        nrm = float(np.linalg.norm(u))
        if nrm > 0:
            defect = max(defect, abs(float(u @ r)) / nrm)
    return defect


def mle(q: float, d: int, k: int, x, family: str = "identity_mean_only") -> MLEResult:
    """Maximum-likelihood fit of the joint law to data x in (R^d)^k.

    family "identity_mean_only" fits the center v with S = I_d; "full"
    also fits S up to the trace normalization tr S = d (the joints only
    see S up to scale).  The center is found by gradient ascent on the
    strictly concave objective; for "full" the scale is the closed-form
    stationary point S proportional to the inverse scatter matrix, which
    requires the scatter of the data around the fitted mean to be
    nonsingular.  The reported defect is the tangent-projected
    escort-moment residual, zero at a true maximizer.
    """
    x = np.asarray(x, dtype=float).reshape(k, d)
    if not np.all(np.isfinite(x)):
        raise DomainError("data must be finite")
    if family not in ("identity_mean_only", "full"):
        raise DomainError(f"unknown family {family!r}")

    if family == "identity_mean_only" or d == 1:
        S = np.eye(d)
        v, iters = _ascend_mean(x, S)
        fam = "identity_mean_only" if family == "identity_mean_only" else "full"
        params = QGaussianParams(q, d, v, S, "identity")
        law = repetition(params, k)
        defect = _stationarity_defect(law, x, fam)
        return MLEResult(v, S, defect, iters, True)

    v, iters = _ascend_mean(x, np.eye(d))
    centered = x - v
    M = centered.T @ centered
    if np.min(np.linalg.eigvalsh(M)) <= 1e-12 * max(1.0, float(np.max(np.abs(M)))):
        raise InfeasibleError("scatter matrix is singular; full-family fit undetermined")
    S = np.linalg.inv(M)
    S *= d / np.trace(S)
    params = QGaussianParams(q, d, v, S, "trace_d")
    law = repetition(params, k)
    defect = _stationarity_defect(law, x, "full")
    return MLEResult(v, S, defect, iters, True)
