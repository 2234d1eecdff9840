"""
Steady State Module
Gaussian steady state of the harmonic WFP equation: the quadratic exponent A,
the Lyapunov stationary covariance of the Langevin dynamics, their
reconciliation, Gaussian distances and steady-state sampling
"""

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from config import TOLERANCES, RNG_CONFIG
from counter_rng import standard_normals
from model_core import (ModelParams, Ensemble, DegenerateQ, NotStationary, SingularCovariance,
                        NotPSD, DimensionMismatch, Q12Convention, NoiseConvention,
                        FrictionConvention, q_coefficients, block_isotropic, split_phase_space,
                        effective_friction, noise_factor, build_diffusion_matrix, drift_block,
                        psd_sqrt)
from spectral_rates import hessian_matrix


class ExponentProvenance(str, Enum):
    CLOSED_FORM = 'CLOSED_FORM'
    LYAPUNOV = 'LYAPUNOV'


class Metric(str, Enum):
    KL = 'KL'
    L2 = 'L2'
    # Distance between means only; used when the target law is degenerate
    MEAN = 'MEAN'


@dataclass(frozen=True, eq=False)
class GaussianState:
    """
    Gaussian law on phase space.

    Args:
        mean: Length-2d mean, ordered x_1..x_d, p_1..p_d
        cov: Symmetric positive semidefinite 2d x 2d covariance
        block_form: (cxx, cxp, cpp) when cov is block isotropic
    """
    mean: np.ndarray
    cov: np.ndarray
    block_form: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"covariance shape {cov.shape} does not match mean length {mean.size}")
        scale = max(1.0, float(np.max(np.abs(cov))) if cov.size else 1.0)
        if np.max(np.abs(cov - cov.T), initial=0.0) > TOLERANCES['symmetry'] * scale:
            raise NotPSD("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if cov.size:
            lowest = float(np.linalg.eigvalsh(cov)[0])
            if lowest < -TOLERANCES['psd_clip'] * scale:
                raise NotPSD(f"covariance has negative eigenvalue {lowest:.6g}")
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'cov', cov)

    @classmethod
    def from_block(cls, cxx: float, cxp: float, cpp: float, d: int,
                   mean=None) -> 'GaussianState':
        mean = np.zeros(2 * d) if mean is None else mean
        return cls(mean=mean, cov=block_isotropic(cxx, cxp, cpp, d),
                   block_form=(float(cxx), float(cxp), float(cpp)))

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class ExponentForm:
    """Symmetric S with A(z) = z^T S z"""
    S: np.ndarray
    provenance: ExponentProvenance


@dataclass(frozen=True, eq=False)
class ReconciliationReport:
    """Comparison of exp(-A) against the Lyapunov stationary law"""
    sigma_a: np.ndarray
    sigma_l: np.ndarray
    ratio: np.ndarray
    scalar: float
    deviation_from_scalar: float
    entry_ratios: np.ndarray
    sigma_a_isotropic: bool
    sigma_l_isotropic: bool
    sigma_a_psd: bool

    def to_dict(self) -> dict:
        return {
            'sigma_a': self.sigma_a.tolist(),
            'sigma_l': self.sigma_l.tolist(),
            'ratio': self.ratio.tolist(),
            'scalar': self.scalar,
            'deviation_from_scalar': self.deviation_from_scalar,
            'entry_ratios': [[None if math.isnan(v) else v for v in row]
                             for row in self.entry_ratios.tolist()],
            'sigma_a_isotropic': self.sigma_a_isotropic,
            'sigma_l_isotropic': self.sigma_l_isotropic,
            'sigma_a_psd': self.sigma_a_psd,
        }


# ---------------------------------------------------------------------------
# Exponent A
# ---------------------------------------------------------------------------

def quadratic_form_A(params: ModelParams, z):
    """
    A(x, p) = (gamma/Q)(Q11 w0^2 |x|^2 + 2 Q12 w0 x.p + Q22 |p|^2)

    Args:
        params: Problem instance
        z: Phase-space vector of length 2d, or an (n, 2d) stack

    Returns:
        Scalar (or length-n array for a stack)
    """
    c = q_coefficients(params)
    x, p = split_phase_space(params, z)
    w0 = params.omega0
    xx = np.sum(x * x, axis=-1)
    xp = np.sum(x * p, axis=-1)
    pp = np.sum(p * p, axis=-1)
    value = (params.gamma / c.q) * (c.q11 * w0 ** 2 * xx + 2.0 * c.q12 * w0 * xp + c.q22 * pp)
    return float(value) if np.ndim(value) == 0 else value


def closed_form_exponent(params: ModelParams) -> ExponentForm:
    """S of the closed-form exponent A (same matrix as the rate Hessian)"""
    return ExponentForm(S=hessian_matrix(params), provenance=ExponentProvenance.CLOSED_FORM)


def lyapunov_exponent(params: ModelParams) -> ExponentForm:
    """S = Sigma_L^{-1} / 2, the exponent of the Lyapunov stationary law"""
    state = steady_covariance_lyapunov(params)
    try:
        S = 0.5 * linalg.inv(state.cov)
    except linalg.LinAlgError as err:
        raise SingularCovariance("Lyapunov covariance is singular") from err
    return ExponentForm(S=0.5 * (S + S.T), provenance=ExponentProvenance.LYAPUNOV)


# ---------------------------------------------------------------------------
# Lyapunov oracle
# ---------------------------------------------------------------------------

def lyapunov_block(params: ModelParams) -> Tuple[float, float, float]:
    """
    Closed-form (cxx, cxp, cpp) solving M S + S M^T + c D = 0 for one pair

    Uses the friction and noise conventions of params. With the defaults
    (gamma, 2D): cxp = -Dqq, cpp = (Dpp + w0^2 Dqq)/gamma,
    cxx = (cpp + gamma Dqq + 2 Dpq)/w0^2.
    """
    g = effective_friction(params)
    w2 = params.omega0 ** 2
    c = noise_factor(params)
    D = params.diffusion
    nqq, nqp, npp = c * D.Dqq, c * D.Dpq, c * D.Dpp

    cxp = -nqq / 2.0
    cpp = (npp + w2 * nqq) / (2.0 * g)
    cxx = (cpp + g * nqq / 2.0 + nqp) / w2
    return cxx, cxp, cpp


def steady_covariance_lyapunov(params: ModelParams) -> GaussianState:
    """
    Stationary law of the Langevin dynamics (mean 0)

    Raises:
        NotStationary: if the covariance is not positive semidefinite or is zero
    """
    cxx, cxp, cpp = lyapunov_block(params)
    block = np.array([[cxx, cxp], [cxp, cpp]])
    if not np.any(block):
        raise NotStationary("zero diffusion gives a zero stationary covariance")
    evals = np.linalg.eigvalsh(block)
    scale = max(1.0, float(np.max(np.abs(evals))))
    if evals[0] < -TOLERANCES['psd_clip'] * scale:
        raise NotStationary(
            f"stationary covariance has negative eigenvalue {evals[0]:.6g}")
    return GaussianState.from_block(cxx, cxp, cpp, params.d)


def lyapunov_residual(params: ModelParams, cov) -> float:
    """Max-norm of M S + S M^T + c D for a 2d x 2d covariance"""
    M = np.kron(drift_block(params), np.eye(params.d))
    cov = np.asarray(cov, dtype=float)
    residual = M @ cov + cov @ M.T + noise_factor(params) * build_diffusion_matrix(params)
    return float(np.max(np.abs(residual)))


# ---------------------------------------------------------------------------
# Reconciliation
# ---------------------------------------------------------------------------

def _is_isotropic(mat: np.ndarray, tol: float) -> bool:
    off = mat - np.diag(np.diag(mat))
    diag = np.diag(mat)
    return bool(np.max(np.abs(off)) <= tol and np.ptp(diag) <= tol)


def reconcile_steady_states(params: ModelParams) -> ReconciliationReport:
    """
    Compare Sigma_A = (2S)^{-1} of exp(-A) with the Lyapunov covariance Sigma_L

    Reports R = Sigma_A Sigma_L^{-1}, its best scalar multiple of the identity
    and the entrywise ratios. R = I is not expected in general.

    Raises:
        SingularCovariance: if either covariance cannot be formed or inverted
    """
    try:
        S = closed_form_exponent(params).S
        sigma_l = steady_covariance_lyapunov(params).cov
        sigma_a = linalg.inv(2.0 * S)
        ratio = sigma_a @ linalg.inv(sigma_l)
    except (DegenerateQ, NotStationary, linalg.LinAlgError) as err:
        raise SingularCovariance(f"cannot reconcile steady states: {err}") from err

    sigma_a = 0.5 * (sigma_a + sigma_a.T)
    scalar = float(np.trace(ratio)) / ratio.shape[0]
    deviation = float(np.max(np.abs(ratio - scalar * np.eye(ratio.shape[0]))))
    with np.errstate(divide='ignore', invalid='ignore'):
        entry_ratios = np.where(sigma_l != 0, sigma_a / np.where(sigma_l != 0, sigma_l, 1.0), np.nan)
    tol = TOLERANCES['closed_form_rel']
    return ReconciliationReport(
        sigma_a=sigma_a,
        sigma_l=sigma_l,
        ratio=ratio,
        scalar=scalar,
        deviation_from_scalar=deviation,
        entry_ratios=entry_ratios,
        sigma_a_isotropic=_is_isotropic(sigma_a, tol * max(1.0, np.max(np.abs(sigma_a)))),
        sigma_l_isotropic=_is_isotropic(sigma_l, tol * max(1.0, np.max(np.abs(sigma_l)))),
        sigma_a_psd=bool(np.linalg.eigvalsh(sigma_a)[0] >= -TOLERANCES['psd_clip']),
    )


def reconcile_across_conventions(params: ModelParams) -> List[dict]:
    """
    One reconciliation row per (Q12, noise, friction) convention triple

    Triples where either covariance is unavailable carry an 'error' tag.
    """
    rows = []
    for q12, noise, friction in itertools.product(Q12Convention, NoiseConvention,
                                                  FrictionConvention):
        variant = params.with_changes(q12_convention=q12, noise_convention=noise,
                                      friction_convention=friction)
        row = {'q12_convention': q12.value, 'noise_convention': noise.value,
               'friction_convention': friction.value}
        try:
            report = reconcile_steady_states(variant.with_changes(d=1))
        except SingularCovariance as err:
            row.update({'scalar': None, 'deviation_from_scalar': None, 'error': str(err)})
        else:
            row.update({'scalar': report.scalar,
                        'deviation_from_scalar': report.deviation_from_scalar,
                        'error': None})
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Sampling and empirical fits
# ---------------------------------------------------------------------------

def sample_steady(state: GaussianState, n: int, seed: int, workers: int = 1) -> Ensemble:
    """
    n independent draws from a Gaussian state

    Variates come from counter-keyed blocks, so the result depends only on
    (seed, n) and not on workers.

    Raises:
        NotPSD: if the covariance is not positive semidefinite
    """
    root = psd_sqrt(state.cov)
    normals = standard_normals(seed, RNG_CONFIG['domains']['steady_sample'], 0,
                               n, state.dim, workers=workers)
    particles = state.mean + normals @ root
    return Ensemble(particles=particles, time=0.0, seed=seed, step_index=0)


def block_averages(cov: np.ndarray, d: int) -> Tuple[float, float, float]:
    """(cxx, cxp, cpp): means of the diagonals of the three d x d blocks"""
    cov = np.asarray(cov, dtype=float)
    return (float(np.mean(np.diag(cov[:d, :d]))),
            float(np.mean(np.diag(cov[:d, d:]))),
            float(np.mean(np.diag(cov[d:, d:]))))


def fit_gaussian(particles: np.ndarray) -> GaussianState:
    """Gaussian with the empirical mean and (unbiased) covariance of an ensemble"""
    particles = np.asarray(particles, dtype=float)
    mean = particles.mean(axis=0)
    if particles.shape[0] < 2:
        cov = np.zeros((particles.shape[1], particles.shape[1]))
    else:
        cov = np.atleast_2d(np.cov(particles, rowvar=False))
    return GaussianState(mean=mean, cov=0.5 * (cov + cov.T))


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def _check_dims(g1: GaussianState, g2: GaussianState):
    if g1.dim != g2.dim:
        raise DimensionMismatch(f"dimensions differ: {g1.dim} vs {g2.dim}")


def _cholesky(cov: np.ndarray, label: str):
    try:
        return linalg.cho_factor(cov, lower=True)
    except linalg.LinAlgError as err:
        raise SingularCovariance(f"{label} covariance is singular") from err


def gaussian_kl(g1: GaussianState, g2: GaussianState) -> float:
    """
    Relative entropy KL(g1 || g2) between two Gaussians

    Raises:
        SingularCovariance: if either covariance is singular
    """
    _check_dims(g1, g2)
    k = g1.dim
    factor = _cholesky(g2.cov, 'reference')
    sign, logdet1 = np.linalg.slogdet(g1.cov)
    if sign <= 0:
        raise SingularCovariance("first covariance is singular")
    logdet2 = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))

    delta = g2.mean - g1.mean
    trace_term = float(np.trace(linalg.cho_solve(factor, g1.cov)))
    mahalanobis = float(delta @ linalg.cho_solve(factor, delta))
    kl = 0.5 * (trace_term - k + mahalanobis + logdet2 - logdet1)
    return max(0.0, kl)


def _log_overlap(m_a, m_b, cov_sum) -> float:
    """log of the integral of the product of two Gaussian densities, N(m_a; m_b, cov_sum)"""
    factor = _cholesky(cov_sum, 'summed')
    delta = m_a - m_b
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    quad = float(delta @ linalg.cho_solve(factor, delta))
    return -0.5 * (delta.size * math.log(2.0 * math.pi) + logdet + quad)


def gaussian_l2_distance(g1: GaussianState, g2: GaussianState) -> float:
    """
    L2 distance between two Gaussian densities

    Raises:
        SingularCovariance: if either covariance is singular
    """
    _check_dims(g1, g2)
    _cholesky(g1.cov, 'first')
    _cholesky(g2.cov, 'second')
    l11 = _log_overlap(g1.mean, g1.mean, 2.0 * g1.cov)
    l22 = _log_overlap(g2.mean, g2.mean, 2.0 * g2.cov)
    l12 = _log_overlap(g1.mean, g2.mean, g1.cov + g2.cov)
    squared = math.exp(l11) + math.exp(l22) - 2.0 * math.exp(l12)
    return math.sqrt(max(0.0, squared))


def state_distance(g1: GaussianState, g2: GaussianState, metric) -> float:
    """Distance of g1 from the reference g2 under a Metric"""
    metric = Metric(metric)
    if metric is Metric.KL:
        return gaussian_kl(g1, g2)
    if metric is Metric.L2:
        return gaussian_l2_distance(g1, g2)
    _check_dims(g1, g2)
    return float(np.linalg.norm(g1.mean - g2.mean))
