"""
Spectral Rates Module
Closed-form eigenvalues of the steady-state Hessian and the optimal decay
rate kappa for every parameter regime, plus a dense eigensolver to audit them
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from config import TOLERANCES
from model_core import (ModelParams, LabError, DegenerateQ, TrivialCase, ConstraintViolated,
                        NegativeRatio, DegenerateQ11, DegenerateDenominator, NotSymmetric,
                        NonPositiveInput, q_coefficients, block_isotropic,
                        build_diffusion_matrix, check_lindblad, psd_sqrt)


class CaseTag(str, Enum):
    GENERAL_D1 = 'GENERAL_D1'
    UNIT_FREQUENCY = 'UNIT_FREQUENCY'
    CALDEIRA_LEGGETT = 'CALDEIRA_LEGGETT'
    EQUAL_Q = 'EQUAL_Q'
    RESCALED_GENERAL = 'RESCALED_GENERAL'
    PERTURBATIVE = 'PERTURBATIVE'


@dataclass(frozen=True)
class SpectralResult:
    """
    Pair of Hessian eigenvalues produced by one closed-form case.

    lambda_plus always carries the + branch of the formula; kappa is the
    smaller of the two. spectrum_preserving tells whether both values are
    eigenvalues (multiplicity d) of hessian_matrix.
    """
    lambda_plus: float
    lambda_minus: float
    kappa: float
    case_tag: CaseTag
    spectrum_preserving: bool
    approximate: bool = False
    lindblad_margin: Optional[float] = None
    details: dict = field(default_factory=dict)

    def to_row(self) -> dict:
        row = {
            'case': self.case_tag.value,
            'lambda_plus': self.lambda_plus,
            'lambda_minus': self.lambda_minus,
            'kappa': self.kappa,
            'spectrum_preserving': self.spectrum_preserving,
            'approximate': self.approximate,
        }
        if self.lindblad_margin is not None:
            row['lindblad_warning_margin'] = self.lindblad_margin
        return row


@dataclass(frozen=True)
class MixingEstimate:
    kappa: float
    prefactor_C: float
    epsilon: float
    t_mix: float


def _result(plus: float, minus: float, tag: CaseTag, preserving: bool, **extra) -> SpectralResult:
    return SpectralResult(lambda_plus=float(plus), lambda_minus=float(minus),
                          kappa=float(min(plus, minus)), case_tag=tag,
                          spectrum_preserving=preserving, **extra)


def hessian_matrix(params: ModelParams) -> np.ndarray:
    """
    Hessian of the steady-state exponent A

    Args:
        params: Problem instance

    Returns:
        (gamma/Q) [[Q11 w0^2 I, Q12 w0 I], [Q12 w0 I, Q22 I]] as a dense 2d x 2d array

    Raises:
        DegenerateQ: if Q = 0
    """
    c = q_coefficients(params)
    w0 = params.omega0
    scale = params.gamma / c.q
    return block_isotropic(scale * c.q11 * w0 ** 2, scale * c.q12 * w0, scale * c.q22, params.d)


def eigenvalues_d1(params: ModelParams) -> SpectralResult:
    """
    Both eigenvalues of the 2x2 Hessian block for general frequency

    These are also the only eigenvalues of the full 2d x 2d Hessian, each
    with multiplicity d.
    """
    c = q_coefficients(params)
    w0, g = params.omega0, params.gamma

    centre = g * (c.q11 * w0 ** 2 + c.q22) / (2.0 * c.q)
    half_gap = g * (c.q11 * w0 ** 2 - c.q22) / (2.0 * c.q)
    radius = math.hypot(half_gap, g * w0 * c.q12 / c.q)
    return _result(centre + radius, centre - radius, CaseTag.GENERAL_D1, True)


def kappa_unit_frequency(params: ModelParams) -> SpectralResult:
    """
    Closed-form rate at omega0 = 1, written through sign(Q) and |Q|

    Raises:
        ConstraintViolated: if omega0 != 1
        DegenerateQ: if Q = 0
    """
    if params.omega0 != 1.0:
        raise ConstraintViolated(f"unit-frequency formula needs omega0 = 1, got {params.omega0}")
    c = q_coefficients(params)
    g = params.gamma
    D = params.diffusion

    shift = D.Dpq + g * D.Dqq
    # Q12 / (2 gamma) is Dqq under the DQQ convention and Dpq under DPQ
    cross = c.q12 / (2.0 * g)
    centre = math.copysign(1.0, c.q) * (c.q11 + 2.0 * g * shift)
    radius = 2.0 * g * math.hypot(shift, cross)
    scale = g / abs(c.q)
    return _result(scale * (centre + radius), scale * (centre - radius),
                   CaseTag.UNIT_FREQUENCY, True)


def kappa_caldeira_leggett(params: ModelParams) -> SpectralResult:
    """
    Rates for the Dqq = 0 regime, where the Hessian is block diagonal

    lambda_plus holds the position-block root gamma*w0^2*Dpp/Q, lambda_minus
    the momentum root gamma. The exact momentum eigenvalue of the Hessian is
    gamma/Dpp, so the pair is spectrum preserving only at Dpp = 1; the exact
    value is kept in details. The Lindblad condition always fails here and its
    margin is attached as a warning.

    Raises:
        ConstraintViolated: if Dqq != 0 or Q12 != 0
        TrivialCase: if Dpp = 0
        DegenerateQ: if Q = 0
    """
    D = params.diffusion
    if D.Dqq != 0:
        raise ConstraintViolated(f"Caldeira-Leggett regime needs Dqq = 0, got {D.Dqq}")
    if D.Dpp == 0:
        raise TrivialCase("Dpp = 0 leaves no diffusion at all")
    c = q_coefficients(params)
    if c.q12 != 0:
        raise ConstraintViolated(f"Caldeira-Leggett regime needs Q12 = 0, got {c.q12}")

    g, w0 = params.gamma, params.omega0
    lam_position = g * w0 ** 2 * D.Dpp / c.q
    # Q = Q11*Q22 bit for bit here, so the ratio is exactly 1
    lam_momentum = g * ((c.q11 * c.q22) / c.q)
    hessian_momentum = g * c.q22 / c.q

    return _result(lam_position, lam_momentum, CaseTag.CALDEIRA_LEGGETT,
                   preserving=(D.Dpp == 1.0),
                   lindblad_margin=check_lindblad(params).margin,
                   details={
                       'selector': D.Dpp + 4.0 * g * D.Dpq,
                       'position_limited': bool(D.Dpp + 4.0 * g * D.Dpq > w0 ** 2),
                       'hessian_lambda_momentum': hessian_momentum,
                   })


def kappa_equal_q(params: ModelParams) -> SpectralResult:
    """
    Rates when Dpq = -gamma*Dqq, so that Q22 = Q11

    lambda = (gamma/Q) [Q11 w0 +/- Q12] w0. The sum/difference coordinates
    diagonalize the Hessian only when its two diagonal blocks agree, i.e.
    at omega0 = 1.

    Raises:
        ConstraintViolated: if Dpq + gamma*Dqq is not zero
        DegenerateQ: if Q = 0
    """
    D = params.diffusion
    g, w0 = params.gamma, params.omega0
    offset = D.Dpq + g * D.Dqq
    if abs(offset) > TOLERANCES['equal_q'] * max(1.0, abs(D.Dpq)):
        raise ConstraintViolated(f"equal-Q regime needs Dpq = -gamma*Dqq (offset {offset:.3g})")
    c = q_coefficients(params)
    scale = g / c.q
    return _result(scale * (c.q11 * w0 + c.q12) * w0, scale * (c.q11 * w0 - c.q12) * w0,
                   CaseTag.EQUAL_Q, preserving=(w0 == 1.0))


def kappa_rescaled_general(params: ModelParams) -> SpectralResult:
    """
    Rates after rescaling p by sqrt(Q22/Q11)

    kappa+/- = (gamma/Q)(Q11 +/- Q12 sqrt(Q11/Q22)). The rescaling is not an
    orthogonal change of coordinates, so these are generally not eigenvalues
    of the Hessian; the dense value is reported next to them.

    Raises:
        NegativeRatio: if Q11/Q22 is negative or undefined
        DegenerateQ: if Q = 0
    """
    c = q_coefficients(params)
    if c.q22 == 0 or c.q11 * c.q22 < 0:
        raise NegativeRatio(f"Q11/Q22 must be non-negative, got Q11={c.q11}, Q22={c.q22}")
    scale = params.gamma / c.q
    tilt = c.q12 * math.sqrt(c.q11 / c.q22)
    dense = dense_spectrum_oracle(hessian_matrix(params.with_changes(d=1)))
    return _result(scale * (c.q11 + tilt), scale * (c.q11 - tilt),
                   CaseTag.RESCALED_GENERAL, False,
                   details={'dense_kappa': dense[0], 'dense_lambda_plus': dense[-1]})


def lemma2_eigenvalues(a: float, b: float) -> Tuple[float, float]:
    """
    Eigenvalues of T = [[0, a I], [a I, b I]]: b/2 +/- sqrt((b/2)^2 + a^2)

    Raises:
        TrivialCase: if a = b = 0
    """
    if a == 0 and b == 0:
        raise TrivialCase("a = b = 0 gives the zero matrix")
    half = b / 2.0
    radius = math.hypot(half, a)
    return half + radius, half - radius


def kappa_perturbative(params: ModelParams) -> SpectralResult:
    """
    First-order rates of the omega0 = 1 problem

    Always evaluated at unit frequency regardless of params.omega0. The
    numerator is gamma*Q11*(1 + mu) where mu runs over the lemma2_eigenvalues pair with
    a = r, b = 2[1 + (gamma - 1) r], r = Dqq/(Dpp + Dqq); both are returned in
    details. Flagged approximate: away from small Dqq the first-order
    expansion no longer tracks the exact Hessian spectrum.

    Raises:
        DegenerateQ11: if Dpp + Dqq = 0
        DegenerateDenominator: if the expansion's denominator vanishes
    """
    D = params.diffusion
    g = params.gamma
    q11 = D.Dpp + D.Dqq
    if q11 == 0:
        raise DegenerateQ11("Q11 = Dpp + Dqq vanishes")

    denominator = q11 ** 2 + 4.0 * g * (D.Dpq + g * D.Dqq) * q11 - (2.0 * g * D.Dqq) ** 2
    if denominator == 0:
        raise DegenerateDenominator("perturbative denominator vanishes")

    base = 2.0 * D.Dpp + (g + 1.0) * D.Dqq
    radius = math.hypot(D.Dpp + g * D.Dqq, D.Dqq)
    r = D.Dqq / q11
    a, b = r, 2.0 * (1.0 + (g - 1.0) * r)
    return _result(g * (base + radius) / denominator, g * (base - radius) / denominator,
                   CaseTag.PERTURBATIVE, False, approximate=True,
                   details={'r': r, 'lemma2_a': a, 'lemma2_b': b,
                            'lemma2_pair': lemma2_eigenvalues(a, b)})


def dense_spectrum_oracle(matrix) -> List[float]:
    """
    All eigenvalues of a dense symmetric matrix, ascending

    Raises:
        NotSymmetric: if the matrix is not square or not symmetric within tolerance
    """
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {mat.shape}")
    scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 1.0)
    asym = float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0
    if asym > TOLERANCES['symmetry'] * scale:
        raise NotSymmetric(f"matrix asymmetry {asym:.3g} exceeds tolerance")
    return [float(v) for v in linalg.eigvalsh(mat)]


def mixing_time(kappa: float, prefactor_C: float, epsilon: float) -> MixingEstimate:
    """
    Time for C exp(-kappa t) to drop below epsilon

    Raises:
        NonPositiveInput: if any input is not a positive finite number
    """
    for name, value in (('kappa', kappa), ('prefactor_C', prefactor_C), ('epsilon', epsilon)):
        if not (math.isfinite(value) and value > 0):
            raise NonPositiveInput(f"{name} must be > 0, got {value!r}")
    t_mix = max(0.0, math.log(prefactor_C / epsilon) / kappa)
    return MixingEstimate(kappa=kappa, prefactor_C=prefactor_C, epsilon=epsilon, t_mix=t_mix)


def sqrt_d_hessian(params: ModelParams) -> np.ndarray:
    """
    sqrt(D) H sqrt(D): the Hessian in diffusion-scaled coordinates

    Not similar to H in general; its spectrum is reported for comparison.
    """
    root = psd_sqrt(build_diffusion_matrix(params))
    return root @ hessian_matrix(params) @ root


CASE_FUNCTIONS = [
    (CaseTag.GENERAL_D1, eigenvalues_d1),
    (CaseTag.UNIT_FREQUENCY, kappa_unit_frequency),
    (CaseTag.CALDEIRA_LEGGETT, kappa_caldeira_leggett),
    (CaseTag.EQUAL_Q, kappa_equal_q),
    (CaseTag.RESCALED_GENERAL, kappa_rescaled_general),
    (CaseTag.PERTURBATIVE, kappa_perturbative),
]


def evaluate_all_cases(params: ModelParams) -> List[Tuple[CaseTag, Optional[SpectralResult], Optional[str]]]:
    """
    Run every closed-form case on one problem instance

    Returns:
        List of (case tag, result or None, skip reason or None); a case whose
        preconditions fail is skipped with the error class name as reason
    """
    outcomes = []
    for tag, fn in CASE_FUNCTIONS:
        try:
            outcomes.append((tag, fn(params), None))
        except LabError as err:
            outcomes.append((tag, None, type(err).__name__))
    return outcomes
