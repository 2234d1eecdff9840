"""
Dynamics Module
Quantum Langevin particle ensembles, the exact Gaussian moment propagator,
decay-rate fitting and the classical SGD side of the analogy
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from config import (SIM_DEFAULTS, SGD_DEFAULTS, INITIAL_DEFAULTS, TOLERANCES, RNG_CONFIG,
                    REGIME_THRESHOLDS, REGIME_LABELS, FIT_MIN_SAMPLES, CURVE_COLUMNS)
from counter_rng import block_generator, block_slices, run_blocks
from model_core import (ModelParams, Ensemble, ParameterError, InsufficientData,
                        NonPositiveDistance, NotStationary, split_phase_space,
                        effective_friction, noise_factor, psd_sqrt)
from steady_state import (GaussianState, Metric, steady_covariance_lyapunov, sample_steady,
                          fit_gaussian, block_averages, state_distance)

__all__ = [
    'Ensemble', 'SimConfig', 'CurveSample', 'DecayCurve', 'DecayFit', 'SgdSpec', 'SgdAnalogy',
    'drift', 'euler_maruyama_step', 'simulate_decay', 'block_exponential',
    'exact_moment_propagation', 'hamiltonian_moment_propagation', 'exact_decay_curve',
    'initial_state', 'fit_decay_rate', 'auto_fit_window', 'noise_floor', 'sgd_sde_simulate',
    'sgd_stationary', 'sgd_analogy_map', 'regime_label', 'sgd_discrete_iterate',
    'sgd_discrete_stationary_variance',
]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Euler-Maruyama schedule and measurement settings"""
    dt: float = SIM_DEFAULTS['dt']
    t_final: float = SIM_DEFAULTS['t_final']
    n_particles: int = SIM_DEFAULTS['n_particles']
    seed: int = SIM_DEFAULTS['seed']
    record_every: int = SIM_DEFAULTS['record_every']
    metric: Metric = Metric(SIM_DEFAULTS['metric'])
    workers: int = SIM_DEFAULTS['workers']

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if not (math.isfinite(self.t_final) and self.t_final > 0):
            raise ParameterError(f"t_final must be > 0, got {self.t_final}")
        if self.dt > self.t_final:
            raise ParameterError(f"dt ({self.dt}) exceeds t_final ({self.t_final})")
        for name in ('n_particles', 'record_every', 'workers'):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        object.__setattr__(self, 'seed', int(self.seed))
        try:
            object.__setattr__(self, 'metric', Metric(self.metric))
        except ValueError as err:
            raise ParameterError(str(err)) from err

    @classmethod
    def from_dict(cls, sim: Optional[dict] = None) -> 'SimConfig':
        merged = {**SIM_DEFAULTS, **(sim or {})}
        return cls(dt=float(merged['dt']), t_final=float(merged['t_final']),
                   n_particles=merged['n_particles'], seed=merged['seed'],
                   record_every=merged['record_every'], metric=merged['metric'],
                   workers=merged['workers'])

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def to_dict(self) -> dict:
        return {'dt': self.dt, 't_final': self.t_final, 'n_particles': self.n_particles,
                'seed': self.seed, 'record_every': self.record_every,
                'metric': self.metric.value, 'workers': self.workers}


@dataclass(frozen=True)
class CurveSample:
    t: float
    distance: float
    mean_norm: float
    cxx: float
    cxp: float
    cpp: float


@dataclass(frozen=True, eq=False)
class DecayCurve:
    """Distance to the steady state sampled in time"""
    samples: List[CurveSample]
    metric: Metric
    params_snapshot: Optional[Union[ModelParams, 'SgdSpec']]

    def __post_init__(self):
        times = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterError("curve times must be strictly increasing")
        if not all(math.isfinite(s.distance) for s in self.samples):
            raise ParameterError("curve distances must be finite")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def distances(self) -> np.ndarray:
        return np.array([s.distance for s in self.samples])

    def to_frame(self) -> pd.DataFrame:
        rows = [{'t': s.t, 'metric': Metric(self.metric).value, 'distance': s.distance,
                 'mean_norm': s.mean_norm, 'cxx': s.cxx, 'cxp': s.cxp, 'cpp': s.cpp}
                for s in self.samples]
        return pd.DataFrame(rows, columns=CURVE_COLUMNS)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    stderr: float
    intercept: float
    n_samples: int
    window: Tuple[float, float]


@dataclass(frozen=True)
class SgdSpec:
    """
    Classical SGD on f(x) = hessian_scale * |x|^2 / 2 in d dimensions.

    s = 0 is accepted as the degenerate noiseless limit.
    """
    s: float = SGD_DEFAULTS['s']
    hessian_scale: float = SGD_DEFAULTS['hessian_scale']
    d: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s >= 0):
            raise ParameterError(f"learning rate s must be >= 0, got {self.s}")
        if not (math.isfinite(self.hessian_scale) and self.hessian_scale > 0):
            raise ParameterError(f"hessian_scale must be > 0, got {self.hessian_scale}")
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, 'd', int(self.d))

    @property
    def degenerate(self) -> bool:
        return self.s == 0

    def to_dict(self) -> dict:
        return {'s': self.s, 'hessian_scale': self.hessian_scale, 'd': self.d}


@dataclass(frozen=True)
class SgdAnalogy:
    """Classical counterpart of a quantum problem instance"""
    spec: SgdSpec
    objective: str
    friction_weight: float
    constant: float
    dominance: float
    regime: str
    degenerate: bool

    def to_dict(self) -> dict:
        return {**self.spec.to_dict(), 'objective': self.objective,
                'friction_weight': self.friction_weight, 'constant': self.constant,
                'dominance': self.dominance, 'regime': self.regime,
                'degenerate': self.degenerate}


# ---------------------------------------------------------------------------
# Langevin dynamics
# ---------------------------------------------------------------------------

def drift(params: ModelParams, z) -> np.ndarray:
    """
    Deterministic part (p, -w0^2 x - gamma_eff p) of the Langevin flow

    Args:
        params: Problem instance
        z: Phase-space vector of length 2d or an (n, 2d) stack

    Raises:
        DimensionMismatch: if the trailing axis is not 2d long
    """
    x, p = split_phase_space(params, z)
    g = effective_friction(params)
    return np.concatenate([p, -params.omega0 ** 2 * x - g * p], axis=-1)


def _noise_root(params: ModelParams) -> Optional[np.ndarray]:
    """kron(L, I_d) with L L^T = c D for one pair; None when D = 0"""
    if params.diffusion.is_zero():
        return None
    root = psd_sqrt(noise_factor(params) * params.diffusion.block())
    return np.kron(root, np.eye(params.d))


def euler_maruyama_step(params: ModelParams, ens: Ensemble, dt: float,
                        workers: int = 1,
                        noise_root: Optional[np.ndarray] = None) -> Ensemble:
    """
    One explicit Euler-Maruyama step of the whole ensemble

    Noise for each particle block is drawn from the stream keyed by
    (seed, step_index, block), so the result is independent of workers.

    Args:
        params: Problem instance
        ens: Current ensemble
        dt: Step size
        workers: Threads updating particle blocks
        noise_root: Precomputed kron(L, I_d) noise factor (recomputed when None)

    Returns:
        New ensemble with time and step_index advanced
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ParameterError(f"dt must be > 0, got {dt}")
    root = _noise_root(params) if noise_root is None else noise_root
    z = ens.particles
    out = np.empty_like(z)
    domain = RNG_CONFIG['domains']['langevin_noise']
    sqrt_dt = math.sqrt(dt)

    def update(item):
        block, rows = item
        chunk = z[rows]
        new = chunk + drift(params, chunk) * dt
        if root is not None:
            rng = block_generator(ens.seed, domain, ens.step_index, block)
            new += sqrt_dt * (rng.standard_normal(chunk.shape) @ root)
        out[rows] = new

    run_blocks(update, block_slices(ens.n), workers)
    return Ensemble(particles=out, time=ens.time + dt, seed=ens.seed,
                    step_index=ens.step_index + 1)


def _curve_sample(t: float, particles: np.ndarray, target: GaussianState,
                  metric: Metric, d: int) -> CurveSample:
    fitted = fit_gaussian(particles)
    return _state_sample(t, fitted, target, metric, d)


def _state_sample(t: float, state: GaussianState, target: GaussianState,
                  metric: Metric, d: int) -> CurveSample:
    distance = state_distance(state, target, metric)
    mean_norm = float(np.linalg.norm(state.mean - target.mean))
    if state.dim == 2 * d:
        cxx, cxp, cpp = block_averages(state.cov, d)
    else:
        # Position-only (SGD) runs have no momentum block
        cxx, cxp, cpp = float(np.mean(np.diag(state.cov))), float('nan'), float('nan')
    return CurveSample(t=float(t), distance=distance, mean_norm=mean_norm,
                       cxx=cxx, cxp=cxp, cpp=cpp)


def initial_state(params: ModelParams, mean_x: float = INITIAL_DEFAULTS['mean_x'],
                  mean_p: float = INITIAL_DEFAULTS['mean_p'],
                  cov: str = INITIAL_DEFAULTS['cov'],
                  cov_scale: float = INITIAL_DEFAULTS['cov_scale']) -> GaussianState:
    """
    Initial Gaussian with mean (mean_x 1_d, mean_p 1_d)

    Args:
        cov: 'steady' (Lyapunov covariance), 'zero' or 'identity', times cov_scale
    """
    d = params.d
    mean = np.concatenate([np.full(d, float(mean_x)), np.full(d, float(mean_p))])
    if cov == 'steady':
        base = steady_covariance_lyapunov(params).cov
    elif cov == 'zero':
        base = np.zeros((2 * d, 2 * d))
    elif cov == 'identity':
        base = np.eye(2 * d)
    else:
        raise ParameterError(f"unknown initial covariance '{cov}'")
    return GaussianState(mean=mean, cov=cov_scale * base)


def simulate_decay(params: ModelParams, cfg: SimConfig, initial: GaussianState,
                   return_ensemble: bool = False):
    """
    Run the particle ensemble and record its distance to the Lyapunov steady state

    Args:
        params: Problem instance
        cfg: Schedule, particle count, seed and metric
        initial: Law of the initial ensemble
        return_ensemble: Also return the final ensemble

    Returns:
        DecayCurve, or (DecayCurve, Ensemble) when return_ensemble is set
    """
    target = steady_covariance_lyapunov(params)
    ens = sample_steady(initial, cfg.n_particles, cfg.seed, workers=cfg.workers)
    root = _noise_root(params)

    samples = [_curve_sample(0.0, ens.particles, target, cfg.metric, params.d)]
    for step in range(1, cfg.n_steps + 1):
        ens = euler_maruyama_step(params, ens, cfg.dt, workers=cfg.workers,
                                  noise_root=root)
        if step % cfg.record_every == 0:
            samples.append(_curve_sample(step * cfg.dt, ens.particles, target,
                                         cfg.metric, params.d))

    curve = DecayCurve(samples=samples, metric=cfg.metric, params_snapshot=params)
    return (curve, ens) if return_ensemble else curve


# ---------------------------------------------------------------------------
# Exact moments
# ---------------------------------------------------------------------------

def block_exponential(omega: float, friction: float, t: float) -> np.ndarray:
    """
    exp(A t) for A = [[0, 1], [-omega^2, -friction]]

    exp(At) = exp(-g t/2) [C(t) I + S(t) (A + g/2 I)] with s^2 = g^2/4 - omega^2,
    C = cosh(st), S = sinh(st)/s (cos/sin when s^2 < 0). Near critical damping
    a series in s^2 t^2 replaces the quotient. friction = 0 gives the pure
    rotation of the undamped oscillator.
    """
    g = friction
    A = np.array([[0.0, 1.0], [-omega ** 2, -g]])
    s2 = g * g / 4.0 - omega ** 2
    if abs(g * g - 4.0 * omega ** 2) < TOLERANCES['critical_damping'] * max(g * g, 4.0 * omega ** 2):
        x = s2 * t * t
        c = 1.0 + x / 2.0 + x * x / 24.0
        s_t = t * (1.0 + x / 6.0 + x * x / 120.0)
    elif s2 > 0:
        s = math.sqrt(s2)
        c = math.cosh(s * t)
        s_t = math.sinh(s * t) / s
    else:
        s = math.sqrt(-s2)
        c = math.cos(s * t)
        s_t = math.sin(s * t) / s
    return math.exp(-g * t / 2.0) * (c * np.eye(2) + s_t * (A + (g / 2.0) * np.eye(2)))


def _check_times(times: Sequence[float]) -> List[float]:
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ParameterError("times must be ascending and >= 0")
    return times


def exact_moment_propagation(params: ModelParams, m0, cov0,
                             times: Sequence[float]) -> List[GaussianState]:
    """
    Exact mean and covariance of the linear Langevin dynamics

    m(t) = K m0 and S(t) = S_inf + K (S0 - S_inf) K^T with K = kron(exp(At), I_d);
    for D = 0 the covariance is K S0 K^T.

    Args:
        params: Problem instance
        m0: Initial mean (length 2d)
        cov0: Initial covariance (2d x 2d array or GaussianState)
        times: Ascending non-negative times

    Returns:
        One GaussianState per time
    """
    times = _check_times(times)
    m0 = np.asarray(m0, dtype=float).reshape(-1)
    cov0 = np.asarray(cov0.cov if isinstance(cov0, GaussianState) else cov0, dtype=float)
    split_phase_space(params, m0)

    sigma_inf = None
    if not params.diffusion.is_zero():
        sigma_inf = steady_covariance_lyapunov(params).cov
    g = effective_friction(params)
    eye = np.eye(params.d)

    states = []
    for t in times:
        K = np.kron(block_exponential(params.omega0, g, t), eye)
        if sigma_inf is None:
            cov = K @ cov0 @ K.T
        else:
            cov = sigma_inf + K @ (cov0 - sigma_inf) @ K.T
        states.append(GaussianState(mean=K @ m0, cov=0.5 * (cov + cov.T)))
    return states


def hamiltonian_moment_propagation(omega0: float, m0, cov0,
                                   times: Sequence[float]) -> List[GaussianState]:
    """Moments under the undamped, noiseless flow: a rotation in (x, w0 p) phase space"""
    times = _check_times(times)
    m0 = np.asarray(m0, dtype=float).reshape(-1)
    cov0 = np.asarray(cov0, dtype=float)
    eye = np.eye(m0.size // 2)
    states = []
    for t in times:
        K = np.kron(block_exponential(omega0, 0.0, t), eye)
        cov = K @ cov0 @ K.T
        states.append(GaussianState(mean=K @ m0, cov=0.5 * (cov + cov.T)))
    return states


def exact_decay_curve(params: ModelParams, initial: GaussianState, times: Sequence[float],
                      metric=Metric.KL) -> DecayCurve:
    """Decay curve of the exact moments against the Lyapunov steady state"""
    target = steady_covariance_lyapunov(params)
    metric = Metric(metric)
    states = exact_moment_propagation(params, initial.mean, initial.cov, times)
    samples = [_state_sample(t, st, target, metric, params.d) for t, st in zip(times, states)]
    return DecayCurve(samples=samples, metric=metric, params_snapshot=params)


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------

def fit_decay_rate(curve: Union[DecayCurve, Tuple[Sequence[float], Sequence[float]]],
                   window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """
    Least-squares slope of ln(distance) against t, negated

    Args:
        curve: DecayCurve or a (times, distances) pair
        window: Inclusive (t_lo, t_hi); whole curve when None

    Returns:
        DecayFit with rate and its standard error

    Raises:
        InsufficientData: fewer than FIT_MIN_SAMPLES samples in the window
        NonPositiveDistance: a distance in the window is <= 0
    """
    if isinstance(curve, DecayCurve):
        t, dist = curve.times, curve.distances
    else:
        t, dist = np.asarray(curve[0], dtype=float), np.asarray(curve[1], dtype=float)
    if window is None:
        window = (float(t[0]), float(t[-1])) if t.size else (0.0, 0.0)
    t_lo, t_hi = window
    mask = (t >= t_lo) & (t <= t_hi)
    if int(mask.sum()) < FIT_MIN_SAMPLES:
        raise InsufficientData(
            f"{int(mask.sum())} samples in window [{t_lo}, {t_hi}], need {FIT_MIN_SAMPLES}")
    t, dist = t[mask], dist[mask]
    if np.any(dist <= 0):
        raise NonPositiveDistance("log-linear fit needs strictly positive distances")

    result = stats.linregress(t, np.log(dist))
    return DecayFit(rate=float(-result.slope), stderr=float(result.stderr),
                    intercept=float(result.intercept), n_samples=int(t.size),
                    window=(float(t_lo), float(t_hi)))


def noise_floor(metric, n_particles: int, target: GaussianState) -> float:
    """
    Typical distance of an n-sample moment fit from its own true law

    KL: n_params / (2n) with n_params = k + k(k+1)/2 fitted moments in k
    dimensions; L2 and MEAN use the square root of that, scaled by the
    target density norm and the target spread respectively.
    """
    metric = Metric(metric)
    k = target.dim
    kl_floor = (k + k * (k + 1) / 2.0) / (2.0 * n_particles)
    if metric is Metric.KL:
        return kl_floor
    if metric is Metric.MEAN:
        return math.sqrt(float(np.trace(target.cov)) / n_particles)
    sign, logdet = np.linalg.slogdet(4.0 * math.pi * target.cov)
    density_norm = math.exp(-0.5 * logdet) if sign > 0 else 0.0
    return math.sqrt(kl_floor * density_norm)


def auto_fit_window(curve: DecayCurve, floor: float,
                    factor: float) -> Tuple[float, float]:
    """
    Window from the first sample to the last one of the leading run whose
    distance stays above factor * floor

    A curve that is already at the floor (e.g. started in the steady state)
    gets the whole time range, so the fit reports a flat slope.
    """
    times, dist = curve.times, curve.distances
    if len(times) == 0:
        raise InsufficientData("empty curve")
    threshold = factor * floor
    end = 0
    while end < len(dist) and dist[end] > threshold and dist[end] > 0:
        end += 1
    if end < FIT_MIN_SAMPLES:
        return float(times[0]), float(times[-1])
    return float(times[0]), float(times[end - 1])


# ---------------------------------------------------------------------------
# Classical SGD
# ---------------------------------------------------------------------------

def sgd_stationary(spec: SgdSpec) -> GaussianState:
    """Stationary law of dx = -w^2 x dt + sqrt(s) dW: N(0, s/(2 w^2) I_d)"""
    variance = spec.s / (2.0 * spec.hessian_scale)
    return GaussianState(mean=np.zeros(spec.d), cov=variance * np.eye(spec.d))


def sgd_sde_simulate(spec: SgdSpec, cfg: SimConfig, x0: float = SGD_DEFAULTS['x0'],
                     initial: Optional[GaussianState] = None) -> Tuple[DecayCurve, Ensemble]:
    """
    Euler-Maruyama on the SGD diffusion dx = -w^2 x dt + sqrt(s) dW

    Args:
        spec: Learning rate, curvature and dimension
        cfg: Schedule; a degenerate spec (s = 0) is measured with the MEAN metric
        x0: Initial mean offset on every coordinate when no initial law is given
        initial: Initial law; defaults to mean x0 1_d with the stationary covariance

    Returns:
        (DecayCurve against the stationary law, final Ensemble)
    """
    target = sgd_stationary(spec)
    if initial is None:
        initial = GaussianState(mean=np.full(spec.d, float(x0)), cov=target.cov)
    metric = Metric.MEAN if spec.degenerate else cfg.metric

    ens = sample_steady(initial, cfg.n_particles, cfg.seed, workers=cfg.workers)
    domain = RNG_CONFIG['domains']['sgd_noise']
    w2 = spec.hessian_scale
    noise = math.sqrt(spec.s * cfg.dt)
    samples = [_curve_sample(0.0, ens.particles, target, metric, spec.d)]

    for step in range(1, cfg.n_steps + 1):
        x = ens.particles
        out = np.empty_like(x)

        def update(item, x=x, out=out, step_index=ens.step_index):
            block, rows = item
            chunk = x[rows]
            new = chunk - w2 * chunk * cfg.dt
            if noise > 0:
                rng = block_generator(cfg.seed, domain, step_index, block)
                new += noise * rng.standard_normal(chunk.shape)
            out[rows] = new

        run_blocks(update, block_slices(ens.n), cfg.workers)
        ens = Ensemble(particles=out, time=ens.time + cfg.dt, seed=cfg.seed,
                       step_index=ens.step_index + 1)
        if step % cfg.record_every == 0:
            samples.append(_curve_sample(step * cfg.dt, out, target, metric, spec.d))

    curve = DecayCurve(samples=samples, metric=metric, params_snapshot=spec)
    return curve, ens


def regime_label(dominance: float) -> str:
    if dominance >= REGIME_THRESHOLDS['friction_dominated']:
        return REGIME_LABELS['friction']
    if dominance <= REGIME_THRESHOLDS['hamiltonian_dominated']:
        return REGIME_LABELS['hamiltonian']
    return REGIME_LABELS['intermediate']


def sgd_analogy_map(params: ModelParams) -> SgdAnalogy:
    """
    Classical SGD matched to a quantum instance

    Matching the momentum block of D to s I/2 gives s = 2 Dpp; the friction
    potential F(p) = gamma |p|^2 (integration constant 0) has curvature 2 gamma.
    Dominance gamma/w0 measures how far friction outweighs the Hamiltonian flow.
    """
    g = params.gamma
    s = 2.0 * params.diffusion.Dpp
    dominance = g / params.omega0
    spec = SgdSpec(s=s, hessian_scale=2.0 * g, d=params.d)
    return SgdAnalogy(spec=spec, objective=f"F(p) = {g:g} |p|^2", friction_weight=g,
                      constant=0.0, dominance=dominance, regime=regime_label(dominance),
                      degenerate=spec.degenerate)


def sgd_discrete_iterate(spec: SgdSpec, n_steps: int, n_particles: int, seed: int,
                         x0: float = SGD_DEFAULTS['x0'], workers: int = 1) -> np.ndarray:
    """
    Particles of x_{k+1} = x_k - s grad f(x_k) - s xi_k after n_steps iterations

    Returns:
        (n_particles, d) array
    """
    if n_steps < 0 or n_particles < 1:
        raise ParameterError("n_steps must be >= 0 and n_particles >= 1")
    x = np.full((n_particles, spec.d), float(x0))
    domain = RNG_CONFIG['domains']['sgd_discrete']
    contraction = 1.0 - spec.s * spec.hessian_scale

    for k in range(n_steps):
        out = np.empty_like(x)

        def update(item, x=x, out=out, k=k):
            block, rows = item
            rng = block_generator(seed, domain, k, block)
            xi = rng.standard_normal((rows.stop - rows.start, spec.d))
            out[rows] = contraction * x[rows] - spec.s * xi

        run_blocks(update, block_slices(n_particles), workers)
        x = out
    return x


def sgd_discrete_stationary_variance(spec: SgdSpec) -> float:
    """
    Stationary variance s / (w^2 (2 - s w^2)) of the discrete iteration

    Raises:
        NotStationary: unless 0 < s w^2 < 2
    """
    step = spec.s * spec.hessian_scale
    if not 0 < step < 2:
        raise NotStationary(f"discrete iteration has no stationary law for s*w^2 = {step}")
    return spec.s / (spec.hessian_scale * (2.0 - step))
