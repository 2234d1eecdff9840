"""
Model Core Module
Problem instance of the harmonic Wigner-Fokker-Planck equation, block diffusion
matrix, Lindblad condition and the Q-coefficient algebra of the steady state
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from config import MODEL_DEFAULTS, CONVENTION_DEFAULTS, TOLERANCES


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class LabError(Exception):
    """Base class for every error raised by the laboratory"""


class ParameterError(LabError, ValueError):
    """Invalid construction input (dimension, frequency, friction, diffusion)"""


class DegenerateQ(LabError):
    """Q = Q11*Q22 - Q12^2 vanishes; the steady-state exponent is undefined"""


class TrivialCase(LabError):
    """A closed-form case has nothing to act on (no diffusion, zero matrix)"""


class ConstraintViolated(LabError):
    """A case-specific precondition on the parameters does not hold"""


class NegativeRatio(LabError):
    """Q11/Q22 is negative, so its square root is not real"""


class DegenerateQ11(LabError):
    """Q11 vanishes in the perturbative case"""


class DegenerateDenominator(LabError):
    """A closed-form rate divides by zero"""


class NotSymmetric(LabError):
    """Matrix handed to the dense oracle is not square and symmetric"""


class NonPositiveInput(LabError):
    """kappa, prefactor or epsilon is not strictly positive"""


class NotStationary(LabError):
    """The stationary covariance is not positive semidefinite (or vanishes)"""


class SingularCovariance(LabError):
    """Covariance cannot be factored where an inverse is needed"""


class NotPSD(LabError):
    """Matrix is asymmetric or has a negative eigenvalue beyond tolerance"""


class DimensionMismatch(LabError):
    """Two states or a state and its data disagree in dimension"""


class InsufficientData(LabError):
    """Too few curve samples in the fit window"""


class NonPositiveDistance(LabError):
    """A distance in the fit window is zero or negative, so its log is undefined"""


# ---------------------------------------------------------------------------
# Conventions
# ---------------------------------------------------------------------------

class Q12Convention(str, Enum):
    DQQ = 'DQQ'
    DPQ = 'DPQ'


class NoiseConvention(str, Enum):
    TWO_D = 'TWO_D'
    ONE_D = 'ONE_D'


class FrictionConvention(str, Enum):
    GAMMA = 'GAMMA'
    TWO_GAMMA = 'TWO_GAMMA'


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionSpec:
    """
    The three scalars generating the 2d x 2d block diffusion matrix
    [[Dqq I, Dpq I], [Dpq I, Dpp I]]
    """
    Dqq: float
    Dpq: float
    Dpp: float

    @property
    def det(self) -> float:
        return self.Dqq * self.Dpp - self.Dpq ** 2

    def block(self) -> np.ndarray:
        """2x2 scalar block shared by every (x_j, p_j) pair"""
        return np.array([[self.Dqq, self.Dpq],
                         [self.Dpq, self.Dpp]], dtype=float)

    def is_zero(self) -> bool:
        return self.Dqq == 0 and self.Dpq == 0 and self.Dpp == 0


@dataclass(frozen=True)
class ModelParams:
    """
    Full problem instance. Validated eagerly on construction.

    Args:
        d: Number of (x, p) pairs; the state lives in R^{2d}
        omega0: Harmonic frequency
        gamma: Friction coefficient
        diffusion: Diffusion scalars
        q12_convention: Which cross coefficient enters Q12
        noise_convention: Langevin noise covariance 2D dt or D dt
        friction_convention: Friction drift gamma*p or 2*gamma*p
        require_psd: Reject indefinite diffusion matrices; switch off only to
            evaluate the closed-form rates in regimes outside the physical range
    """
    d: int
    omega0: float
    gamma: float
    diffusion: DiffusionSpec
    q12_convention: Q12Convention = Q12Convention.DQQ
    noise_convention: NoiseConvention = NoiseConvention.TWO_D
    friction_convention: FrictionConvention = FrictionConvention.GAMMA
    require_psd: bool = True

    def __post_init__(self):
        if isinstance(self.d, bool) or not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ParameterError(f"d must be a positive integer, got {self.d!r}")
        for name in ('omega0', 'gamma'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")

        D = self.diffusion
        if not all(math.isfinite(v) for v in (D.Dqq, D.Dpq, D.Dpp)):
            raise ParameterError("diffusion entries must be finite")
        if D.Dqq < 0 or D.Dpp < 0:
            raise ParameterError(
                f"diagonal diffusion entries must be >= 0, got Dqq={D.Dqq}, Dpp={D.Dpp}")
        scale = max(1.0, D.Dqq * D.Dpp)
        if self.require_psd and D.det < -TOLERANCES['psd_det'] * scale:
            raise ParameterError(
                f"diffusion matrix is not positive semidefinite: "
                f"Dqq*Dpp - Dpq^2 = {D.det:.6g}")

        # Accept plain strings for the convention switches
        object.__setattr__(self, 'd', int(self.d))
        object.__setattr__(self, 'q12_convention', Q12Convention(self.q12_convention))
        object.__setattr__(self, 'noise_convention', NoiseConvention(self.noise_convention))
        object.__setattr__(self, 'friction_convention',
                           FrictionConvention(self.friction_convention))

    @classmethod
    def from_dict(cls, model: dict, conventions: Optional[dict] = None) -> 'ModelParams':
        """
        Build parameters from flat config sections

        Args:
            model: Dict with d, omega0, gamma, Dqq, Dpq, Dpp (defaults from config)
            conventions: Dict with the three convention switches

        Returns:
            Validated ModelParams
        """
        m = {**MODEL_DEFAULTS, **(model or {})}
        c = {**CONVENTION_DEFAULTS, **(conventions or {})}
        try:
            conv = (Q12Convention(c['q12_convention']),
                    NoiseConvention(c['noise_convention']),
                    FrictionConvention(c['friction_convention']))
        except ValueError as err:
            raise ParameterError(str(err)) from err
        d = m['d']
        if isinstance(d, float) and d.is_integer():
            d = int(d)
        return cls(d=d,
                   omega0=float(m['omega0']),
                   gamma=float(m['gamma']),
                   diffusion=DiffusionSpec(float(m['Dqq']), float(m['Dpq']), float(m['Dpp'])),
                   q12_convention=conv[0],
                   noise_convention=conv[1],
                   friction_convention=conv[2],
                   require_psd=bool(m.get('require_psd', True)))

    def to_dict(self) -> dict:
        return {
            'd': self.d,
            'omega0': self.omega0,
            'gamma': self.gamma,
            'Dqq': self.diffusion.Dqq,
            'Dpq': self.diffusion.Dpq,
            'Dpp': self.diffusion.Dpp,
            'require_psd': self.require_psd,
        }

    def conventions_dict(self) -> dict:
        return {
            'q12_convention': self.q12_convention.value,
            'noise_convention': self.noise_convention.value,
            'friction_convention': self.friction_convention.value,
        }

    def with_changes(self, **changes) -> 'ModelParams':
        """
        Copy with some fields replaced. Diffusion scalars may be passed directly
        (Dqq=..., Dpq=..., Dpp=...).
        """
        diff_changes = {k: changes.pop(k) for k in ('Dqq', 'Dpq', 'Dpp') if k in changes}
        if diff_changes:
            changes['diffusion'] = replace(self.diffusion, **diff_changes)
        return replace(self, **changes)


@dataclass(frozen=True)
class QCoefficients:
    """Q11, Q12, Q22 and Q = Q11*Q22 - Q12^2 of the steady-state exponent A"""
    q11: float
    q12: float
    q22: float
    q: float


@dataclass(frozen=True)
class LindbladCheck:
    satisfied: bool
    margin: float


@dataclass(frozen=True, eq=False)
class Ensemble:
    """
    Particle cloud in phase space (row i = z_i = (x_i, p_i)).

    Args:
        particles: Array of shape (n, dim)
        time: Simulated time
        seed: Key of the counter-based noise streams
        step_index: Number of Euler steps taken
    """
    particles: np.ndarray
    time: float = 0.0
    seed: int = 0
    step_index: int = 0

    def __post_init__(self):
        arr = np.asarray(self.particles, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise DimensionMismatch(
                f"particles must be a non-empty (n, dim) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise LabError("ensemble contains non-finite entries")
        object.__setattr__(self, 'particles', arr)

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def block_isotropic(top_left: float, off: float, bottom_right: float, d: int) -> np.ndarray:
    """
    Expand a 2x2 scalar block into [[a I_d, b I_d], [b I_d, c I_d]]

    Args:
        top_left, off, bottom_right: Scalar block entries
        d: Number of pairs

    Returns:
        Dense 2d x 2d matrix (exactly symmetric)
    """
    block = np.array([[top_left, off], [off, bottom_right]], dtype=float)
    return np.kron(block, np.eye(d))


def build_diffusion_matrix(params: ModelParams) -> np.ndarray:
    """Dense 2d x 2d diffusion matrix [[Dqq I, Dpq I], [Dpq I, Dpp I]]"""
    D = params.diffusion
    return block_isotropic(D.Dqq, D.Dpq, D.Dpp, params.d)


def check_lindblad(params: ModelParams) -> LindbladCheck:
    """
    Lindblad condition det(D) >= (gamma/2)^2 on the diffusion scalars

    Returns:
        LindbladCheck with satisfied flag and signed margin det(D) - (gamma/2)^2
    """
    margin = params.diffusion.det - (params.gamma / 2.0) ** 2
    return LindbladCheck(satisfied=bool(margin >= 0), margin=margin)


def q_coefficients(params: ModelParams) -> QCoefficients:
    """
    Coefficients of the steady-state exponent
    A(x, p) = (gamma/Q) [Q11 w0^2 x^2 + 2 Q12 w0 x.p + Q22 p^2]

    Args:
        params: Problem instance

    Returns:
        QCoefficients

    Raises:
        DegenerateQ: if Q = 0
    """
    D = params.diffusion
    w0, g = params.omega0, params.gamma

    q11 = D.Dpp + w0 ** 2 * D.Dqq
    if params.q12_convention is Q12Convention.DQQ:
        q12 = 2.0 * w0 * g * D.Dqq
    else:
        q12 = 2.0 * w0 * g * D.Dpq
    q22 = q11 + 4.0 * g * (D.Dpq + g * D.Dqq)
    q = q11 * q22 - q12 ** 2

    if q == 0:
        raise DegenerateQ(
            f"Q = Q11*Q22 - Q12^2 vanishes (Q11={q11}, Q12={q12}, Q22={q22})")
    return QCoefficients(q11=q11, q12=q12, q22=q22, q=q)


def symplectic_matrix(d: int) -> np.ndarray:
    """J = [[0, I_d], [-I_d, 0]]"""
    return np.kron(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(d))


def split_phase_space(params: ModelParams, z) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split a phase-space vector (or a stack of them, one per row) into x and p

    Raises:
        DimensionMismatch: if the trailing axis is not 2d long
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2 * params.d:
        raise DimensionMismatch(
            f"expected phase-space length {2 * params.d}, got {z.shape[-1]}")
    return z[..., :params.d], z[..., params.d:]


def hamiltonian(params: ModelParams, z) -> float:
    """Energy H = (|p|^2 + w0^2 |x|^2) / 2"""
    x, p = split_phase_space(params, z)
    return 0.5 * (np.sum(p ** 2, axis=-1) + params.omega0 ** 2 * np.sum(x ** 2, axis=-1))


def classical_limit(params: ModelParams) -> ModelParams:
    """Same instance with the position diffusion switched off (Dqq = Dpq = 0)"""
    return params.with_changes(Dqq=0.0, Dpq=0.0)


def effective_friction(params: ModelParams) -> float:
    """Friction constant entering the drift under the selected convention"""
    if params.friction_convention is FrictionConvention.TWO_GAMMA:
        return 2.0 * params.gamma
    return params.gamma


def noise_factor(params: ModelParams) -> float:
    """Multiplier c of D in the Langevin noise covariance c*D*dt"""
    return 2.0 if params.noise_convention is NoiseConvention.TWO_D else 1.0


def drift_block(params: ModelParams, friction: Optional[float] = None) -> np.ndarray:
    """Scalar drift block [[0, 1], [-w0^2, -gamma_eff]] of one (x_j, p_j) pair"""
    g = effective_friction(params) if friction is None else friction
    return np.array([[0.0, 1.0], [-params.omega0 ** 2, -g]])


def params_summary(params: ModelParams) -> dict:
    """Flat dict of parameters and conventions for tables and summaries"""
    return {**params.to_dict(), **params.conventions_dict()}


def psd_sqrt(matrix, clip: float = TOLERANCES['psd_clip']) -> np.ndarray:
    """
    Symmetric square root of a positive semidefinite matrix

    Eigenvalues in [-clip, 0) are treated as 0.

    Raises:
        NotPSD: if an eigenvalue is below -clip (scaled by the matrix norm)
    """
    mat = np.asarray(matrix, dtype=float)
    mat = 0.5 * (mat + mat.T)
    evals, evecs = np.linalg.eigh(mat)
    scale = max(1.0, float(np.max(np.abs(evals))) if evals.size else 1.0)
    if evals.size and evals[0] < -clip * scale:
        raise NotPSD(f"matrix has negative eigenvalue {evals[0]:.6g}")
    evals = np.clip(evals, 0.0, None)
    return (evecs * np.sqrt(evals)) @ evecs.T
