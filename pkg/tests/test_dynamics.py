import math

import numpy as np
import pytest
from scipy import linalg

from conftest import make_params
from model_core import (Ensemble, ParameterError, InsufficientData, NonPositiveDistance,
                        NotStationary, DimensionMismatch, build_diffusion_matrix, drift_block,
                        noise_factor)
from steady_state import GaussianState, Metric, steady_covariance_lyapunov, block_averages
from dynamics import (SimConfig, DecayCurve, CurveSample, SgdSpec, drift, euler_maruyama_step,
                      simulate_decay, block_exponential, exact_moment_propagation,
                      hamiltonian_moment_propagation, exact_decay_curve, initial_state,
                      fit_decay_rate, auto_fit_window, noise_floor, sgd_sde_simulate,
                      sgd_stationary, sgd_analogy_map, regime_label, sgd_discrete_iterate,
                      sgd_discrete_stationary_variance)


NOISELESS = dict(Dqq=0.0, Dpq=0.0, Dpp=0.0)


# ---------------------------------------------------------------------------
# Configuration types
# ---------------------------------------------------------------------------

def test_sim_config_defaults_and_steps():
    cfg = SimConfig.from_dict({'dt': 0.01, 't_final': 2.0, 'metric': 'L2'})
    assert cfg.n_steps == 200
    assert cfg.metric is Metric.L2
    assert SimConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("kwargs", [
    dict(dt=0.0),
    dict(dt=2.0, t_final=1.0),
    dict(n_particles=0),
    dict(record_every=1.5),
    dict(metric='HELLINGER'),
])
def test_sim_config_rejects_invalid(kwargs):
    with pytest.raises(ParameterError):
        SimConfig(**kwargs)


def test_sgd_spec_validation():
    assert SgdSpec(s=0.0).degenerate
    with pytest.raises(ParameterError):
        SgdSpec(s=-0.1)
    with pytest.raises(ParameterError):
        SgdSpec(hessian_scale=0.0)


def test_decay_curve_requires_increasing_times():
    sample = CurveSample(t=1.0, distance=0.5, mean_norm=0.0, cxx=1.0, cxp=0.0, cpp=1.0)
    with pytest.raises(ParameterError):
        DecayCurve(samples=[sample, sample], metric=Metric.KL, params_snapshot=None)


def test_decay_curve_frame_columns():
    samples = [CurveSample(t=float(t), distance=1.0 / (t + 1), mean_norm=0.0,
                           cxx=1.0, cxp=0.0, cpp=1.0) for t in range(3)]
    frame = DecayCurve(samples=samples, metric=Metric.KL, params_snapshot=None).to_frame()
    assert list(frame.columns) == ['t', 'metric', 'distance', 'mean_norm', 'cxx', 'cxp', 'cpp']
    assert frame['metric'].tolist() == ['KL'] * 3


# ---------------------------------------------------------------------------
# Drift and Euler-Maruyama
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("z, expected", [
    ([1.0, 0.0], [0.0, -1.0]),
    ([0.0, 1.0], [1.0, -1.0]),
    ([0.0, 0.0], [0.0, 0.0]),
])
def test_drift_examples(z, expected):
    np.testing.assert_array_equal(drift(make_params(), np.array(z)), expected)


def test_drift_friction_convention():
    params = make_params(gamma=0.5, friction_convention='TWO_GAMMA')
    np.testing.assert_array_equal(drift(params, np.array([0.0, 1.0])), [1.0, -1.0])


def test_drift_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        drift(make_params(d=2), np.zeros(3))


def test_single_noiseless_euler_step():
    ens = Ensemble(particles=np.array([[1.0, 0.0]]))
    out = euler_maruyama_step(make_params(**NOISELESS), ens, 0.01)
    np.testing.assert_allclose(out.particles, [[1.0, -0.01]], atol=1e-15)
    assert out.step_index == 1
    assert out.time == pytest.approx(0.01)


def test_euler_step_rejects_bad_dt():
    with pytest.raises(ParameterError):
        euler_maruyama_step(make_params(), Ensemble(particles=np.zeros((1, 2))), -0.1)


def test_euler_step_deterministic_across_workers(reference_params):
    params = reference_params.with_changes(d=2)
    start = Ensemble(particles=np.zeros((10000, 4)), seed=42)
    runs = []
    for workers in (1, 1, 4):
        ens = start
        for _ in range(3):
            ens = euler_maruyama_step(params, ens, 0.01, workers=workers)
        runs.append(ens.particles)
    np.testing.assert_array_equal(runs[0], runs[1])
    np.testing.assert_array_equal(runs[0], runs[2])


def test_euler_step_noise_covariance(reference_params):
    dt = 0.01
    ens = Ensemble(particles=np.zeros((50000, 2)), seed=9)
    out = euler_maruyama_step(reference_params, ens, dt)
    empirical = np.cov(out.particles, rowvar=False) / dt
    # 2D for the reference diffusion
    np.testing.assert_allclose(empirical, [[2.0, -2.0], [-2.0, 4.0]], atol=0.1)


def test_euler_order_against_exact_mean():
    params = make_params(gamma=0.5, **NOISELESS)
    exact = exact_moment_propagation(params, [1.0, 0.0], np.zeros((2, 2)), [1.0])[0].mean
    errors = []
    for dt in (4e-3, 2e-3, 1e-3):
        ens = Ensemble(particles=np.array([[1.0, 0.0]]))
        for _ in range(int(round(1.0 / dt))):
            ens = euler_maruyama_step(params, ens, dt)
        errors.append(np.linalg.norm(ens.particles[0] - exact))
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    assert all(0.8 <= order <= 1.2 for order in orders)


# ---------------------------------------------------------------------------
# Exact moments
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("omega, friction", [
    (1.0, 1.0),
    (1.0, 3.0),
    (1.0, 2.0),
    (2.0, 4.0 + 1e-11),
    (0.5, 0.0),
])
def test_block_exponential_matches_expm(omega, friction):
    A = np.array([[0.0, 1.0], [-omega ** 2, -friction]])
    for t in (0.0, 0.3, 1.7, 5.0):
        np.testing.assert_allclose(block_exponential(omega, friction, t), linalg.expm(A * t),
                                   rtol=1e-10, atol=1e-12)


def test_undamped_quarter_period_is_rotation():
    states = hamiltonian_moment_propagation(1.0, [1.0, 0.0], np.zeros((2, 2)), [math.pi / 2])
    np.testing.assert_allclose(states[0].mean, [0.0, -1.0], atol=1e-14)


def test_hamiltonian_energy_conservation():
    omega = 1.3
    times = np.linspace(0.0, 100.0, 201)
    states = hamiltonian_moment_propagation(omega, [1.0, 0.5], np.zeros((2, 2)), times)
    energy = [0.5 * (s.mean[1] ** 2 + omega ** 2 * s.mean[0] ** 2) for s in states]
    np.testing.assert_allclose(energy, energy[0], rtol=0, atol=1e-10)


def test_stationary_covariance_is_preserved(reference_params):
    sigma_inf = steady_covariance_lyapunov(reference_params).cov
    states = exact_moment_propagation(reference_params, np.zeros(2), sigma_inf,
                                      [0.0, 0.5, 3.0, 40.0])
    for state in states:
        np.testing.assert_allclose(state.cov, sigma_inf, atol=1e-10)


def test_zero_covariance_converges(reference_params):
    sigma_inf = steady_covariance_lyapunov(reference_params).cov
    t = 50.0 / reference_params.gamma
    state = exact_moment_propagation(reference_params, np.zeros(2), np.zeros((2, 2)), [t])[0]
    np.testing.assert_allclose(state.cov, sigma_inf, atol=1e-8)


def test_covariance_matches_rk4(reference_params):
    M = drift_block(reference_params)
    noise = noise_factor(reference_params) * build_diffusion_matrix(reference_params)

    def rhs(S):
        return M @ S + S @ M.T + noise

    h, T = 1e-3, 2.0
    S = np.zeros((2, 2))
    for _ in range(int(round(T / h))):
        k1 = rhs(S)
        k2 = rhs(S + 0.5 * h * k1)
        k3 = rhs(S + 0.5 * h * k2)
        k4 = rhs(S + h * k3)
        S = S + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    exact = exact_moment_propagation(reference_params, np.zeros(2), np.zeros((2, 2)), [T])[0]
    np.testing.assert_allclose(exact.cov, S, atol=1e-8)


def test_exact_propagation_is_block_isotropic(reference_params):
    params = reference_params.with_changes(d=3)
    m0 = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    state = exact_moment_propagation(params, m0, np.eye(6), [1.2])[0]
    single = exact_moment_propagation(reference_params, [1.0, 0.0], np.eye(2), [1.2])[0]
    np.testing.assert_allclose(state.mean[:3], single.mean[0], rtol=1e-14)
    np.testing.assert_allclose(np.diag(state.cov)[:3], single.cov[0, 0], rtol=1e-14)
    assert state.cov[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_exact_propagation_rejects_descending_times(reference_params):
    with pytest.raises(ParameterError):
        exact_moment_propagation(reference_params, np.zeros(2), np.eye(2), [1.0, 0.5])


def test_initial_state_options(reference_params):
    params = reference_params.with_changes(d=2)
    steady = initial_state(params, mean_x=5.0)
    np.testing.assert_array_equal(steady.mean, [5.0, 5.0, 0.0, 0.0])
    np.testing.assert_allclose(steady.cov, steady_covariance_lyapunov(params).cov)
    assert not np.any(initial_state(params, cov='zero').cov)
    np.testing.assert_array_equal(initial_state(params, cov='identity', cov_scale=2.0).cov,
                                  2.0 * np.eye(4))
    with pytest.raises(ParameterError):
        initial_state(params, cov='random')


def test_exact_kl_rates_identical_across_dimensions(classical_params):
    times = np.linspace(0.0, 20.0, 201)
    fits = {}
    for d in (1, 2, 8):
        params = classical_params.with_changes(d=d)
        curve = exact_decay_curve(params, initial_state(params, mean_x=5.0), times, Metric.KL)
        fits[d] = fit_decay_rate(curve)
    assert fits[1].rate > 0
    assert fits[1].stderr < 0.01 * fits[1].rate
    for d in (2, 8):
        assert fits[d].rate == pytest.approx(fits[1].rate, rel=1e-10)


def test_exact_l2_curve_decays(classical_params):
    times = np.linspace(0.0, 10.0, 101)
    curve = exact_decay_curve(classical_params, initial_state(classical_params, mean_x=2.0),
                              times, 'L2')
    assert curve.metric is Metric.L2
    assert curve.distances[-1] < 0.05 * curve.distances[0]


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------

def test_fit_exact_exponential():
    t = np.linspace(0.0, 2.0, 50)
    fit = fit_decay_rate((t, np.exp(-3.0 * t)))
    assert fit.rate == pytest.approx(3.0, abs=1e-10)
    assert fit.stderr < 1e-10
    assert fit.n_samples == 50


def test_fit_window_before_floor():
    t = np.linspace(0.0, 12.0, 121)
    dist = np.exp(-2.0 * t) + 1e-9
    fit = fit_decay_rate((t, dist), window=(0.0, 4.0))
    assert fit.rate == pytest.approx(2.0, rel=0.01)


def test_fit_constant_curve():
    t = np.linspace(0.0, 1.0, 10)
    fit = fit_decay_rate((t, np.full(10, 0.3)))
    assert fit.rate == pytest.approx(0.0, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)


def test_fit_errors():
    t = np.linspace(0.0, 1.0, 10)
    with pytest.raises(InsufficientData):
        fit_decay_rate((t, np.exp(-t)), window=(0.0, 0.3))
    dist = np.exp(-t)
    dist[4] = 0.0
    with pytest.raises(NonPositiveDistance):
        fit_decay_rate((t, dist))


def test_noise_floor_kl():
    target = GaussianState(mean=np.zeros(2), cov=np.eye(2))
    # two means plus three covariance entries
    assert noise_floor('KL', 1000, target) == pytest.approx(5.0 / 2000.0)
    assert noise_floor('MEAN', 100, target) == pytest.approx(math.sqrt(2.0 / 100))


def test_auto_window_falls_back_for_flat_curve():
    samples = [CurveSample(t=0.1 * i, distance=1e-4, mean_norm=0.0, cxx=1.0, cxp=0.0, cpp=1.0)
               for i in range(20)]
    curve = DecayCurve(samples=samples, metric=Metric.KL, params_snapshot=None)
    assert auto_fit_window(curve, floor=1e-4, factor=10.0) == (0.0, pytest.approx(1.9))


def test_auto_window_stops_at_floor():
    samples = [CurveSample(t=float(i), distance=math.exp(-i), mean_norm=0.0,
                           cxx=1.0, cxp=0.0, cpp=1.0) for i in range(20)]
    curve = DecayCurve(samples=samples, metric=Metric.KL, params_snapshot=None)
    # exp(-i) > 10 * 1e-5 for i <= 9
    assert auto_fit_window(curve, floor=1e-5, factor=10.0) == (0.0, 9.0)


# ---------------------------------------------------------------------------
# Classical SGD
# ---------------------------------------------------------------------------

def test_sgd_stationary_examples():
    assert sgd_stationary(SgdSpec(s=0.1)).cov[0, 0] == pytest.approx(0.05)
    np.testing.assert_allclose(sgd_stationary(SgdSpec(s=2.0, d=4)).cov, np.eye(4))
    assert not np.any(sgd_stationary(SgdSpec(s=0.0)).cov)


def test_sgd_noiseless_gradient_flow():
    cfg = SimConfig(dt=1e-3, t_final=5.0, n_particles=4, record_every=500)
    curve, ens = sgd_sde_simulate(SgdSpec(s=0.0), cfg, x0=1.0)
    assert curve.metric is Metric.MEAN
    np.testing.assert_allclose(ens.particles, math.exp(-5.0), atol=1e-3)
    assert curve.distances[0] == pytest.approx(1.0)


def test_curves_carry_their_inputs(classical_params):
    times = [0.0, 0.5, 1.0]
    curve = exact_decay_curve(classical_params, initial_state(classical_params), times)
    assert curve.params_snapshot is classical_params
    spec = SgdSpec(s=0.2)
    sgd_curve, _ = sgd_sde_simulate(spec, SimConfig(dt=0.01, t_final=0.05, n_particles=10,
                                                    record_every=1))
    assert sgd_curve.params_snapshot is spec


def test_sgd_simulation_deterministic_across_workers():
    spec = SgdSpec(s=0.5, d=2)
    results = [sgd_sde_simulate(spec, SimConfig(dt=0.01, t_final=0.1, n_particles=9000,
                                                record_every=5, seed=4, workers=w))[1]
               for w in (1, 3)]
    np.testing.assert_array_equal(results[0].particles, results[1].particles)


@pytest.mark.parametrize("kwargs, s, dominance", [
    (dict(Dpp=0.05), 0.1, 1.0),
    (dict(Dpp=0.5, gamma=10.0), 1.0, 10.0),
])
def test_analogy_map_examples(kwargs, s, dominance):
    analogy = sgd_analogy_map(make_params(**kwargs))
    assert analogy.spec.s == pytest.approx(s)
    assert analogy.dominance == pytest.approx(dominance)
    assert analogy.spec.hessian_scale == pytest.approx(2.0 * kwargs.get('gamma', 1.0))
    assert not analogy.degenerate


def test_analogy_map_objective_and_degenerate():
    analogy = sgd_analogy_map(make_params(Dpp=0.5, gamma=10.0))
    assert analogy.objective == "F(p) = 10 |p|^2"
    assert analogy.constant == 0.0
    assert analogy.regime == regime_label(10.0)
    assert sgd_analogy_map(make_params(**NOISELESS)).degenerate


@pytest.mark.parametrize("dominance, fragment", [
    (0.5, "Hamiltonian"),
    (3.0, "intermediate"),
    (10.0, "friction"),
])
def test_regime_labels(dominance, fragment):
    assert fragment in regime_label(dominance)


def test_discrete_iteration_variance():
    spec = SgdSpec(s=0.1)
    expected = sgd_discrete_stationary_variance(spec)
    assert expected == pytest.approx(0.1 / 1.9)
    x = sgd_discrete_iterate(spec, n_steps=300, n_particles=20000, seed=1, x0=0.0)
    assert x.shape == (20000, 1)
    assert np.var(x) == pytest.approx(expected, rel=0.05)


def test_discrete_iteration_deterministic_across_workers():
    spec = SgdSpec(s=0.2, d=2)
    a = sgd_discrete_iterate(spec, 5, 9000, seed=3, workers=1)
    b = sgd_discrete_iterate(spec, 5, 9000, seed=3, workers=4)
    np.testing.assert_array_equal(a, b)


def test_discrete_iteration_unstable_step():
    with pytest.raises(NotStationary):
        sgd_discrete_stationary_variance(SgdSpec(s=2.5))


# ---------------------------------------------------------------------------
# Monte-Carlo acceptance
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_simulation_deterministic_across_workers(reference_params):
    initial = initial_state(reference_params)
    curves = [simulate_decay(reference_params, SimConfig(dt=0.01, t_final=0.1, n_particles=10000,
                                                         record_every=2, seed=8, workers=w),
                             initial)
              for w in (1, 3)]
    np.testing.assert_array_equal(curves[0].distances, curves[1].distances)


@pytest.mark.slow
def test_stationary_start_stays_at_floor(classical_params):
    cfg = SimConfig(dt=1e-3, t_final=2.0, n_particles=20000, record_every=200, seed=2)
    target = steady_covariance_lyapunov(classical_params)
    curve = simulate_decay(classical_params, cfg, initial_state(classical_params, mean_x=0.0))
    assert np.all(curve.distances < 10.0 * noise_floor('KL', cfg.n_particles, target))
    fit = fit_decay_rate(curve)
    assert abs(fit.rate) < 3.0 * fit.stderr


@pytest.mark.slow
def test_stationary_start_keeps_lyapunov_covariance(reference_params):
    cfg = SimConfig(dt=1e-3, t_final=10.0, n_particles=100000, record_every=10000, seed=4)
    target = steady_covariance_lyapunov(reference_params)
    curve = simulate_decay(reference_params, cfg, initial_state(reference_params, mean_x=0.0))
    final = curve.samples[-1]
    assert final.t == pytest.approx(10.0)
    expected = block_averages(target.cov, 1)
    assert (final.cxx, final.cxp, final.cpp) == pytest.approx(expected, rel=0.03)


@pytest.mark.slow
def test_ensemble_moments_track_exact_oracle(reference_params):
    cfg = SimConfig(dt=1e-3, t_final=10.0, n_particles=100000, record_every=1000, seed=6)
    initial = initial_state(reference_params, mean_x=5.0, cov='identity')
    curve = simulate_decay(reference_params, cfg, initial)
    assert len(curve.samples) == 11
    exact = exact_moment_propagation(reference_params, initial.mean, initial.cov, curve.times)
    n = cfg.n_particles
    for sample, state in zip(curve.samples, exact):
        cxx, cxp, cpp = block_averages(state.cov, 1)
        se = np.array([cxx * math.sqrt(2.0 / n),
                       math.sqrt((cxx * cpp + cxp ** 2) / n),
                       cpp * math.sqrt(2.0 / n)])
        err = np.abs(np.array([sample.cxx, sample.cxp, sample.cpp]) - [cxx, cxp, cpp])
        assert np.all(err < 4.0 * se), (sample.t, err, se)
        assert sample.mean_norm == pytest.approx(np.linalg.norm(state.mean), abs=0.04)


@pytest.mark.slow
def test_monte_carlo_rates_dimension_independent(classical_params):
    cfg = SimConfig(dt=1e-3, t_final=5.0, n_particles=20000, record_every=100, seed=1)
    times = np.arange(0, 51) * 0.1
    exact = fit_decay_rate(exact_decay_curve(classical_params,
                                             initial_state(classical_params, mean_x=5.0),
                                             times))
    rates = {}
    for d in (1, 2, 8):
        params = classical_params.with_changes(d=d)
        curve = simulate_decay(params, cfg, initial_state(params, mean_x=5.0))
        rates[d] = fit_decay_rate(curve, window=(0.0, 5.0)).rate
    assert rates[2] == pytest.approx(rates[1], rel=0.02)
    assert rates[8] == pytest.approx(rates[1], rel=0.02)
    assert rates[1] == pytest.approx(exact.rate, rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("s, hessian_scale, d, variance", [
    (0.1, 1.0, 1, 0.05),
    (1.0, 2.0, 1, 0.25),
    (2.0, 1.0, 1, 1.0),
    (1.0, 1.0, 3, 0.5),
])
def test_sgd_stationary_variance_monte_carlo(s, hessian_scale, d, variance):
    cfg = SimConfig(dt=1e-3, t_final=20.0 / hessian_scale, n_particles=100000,
                    record_every=1000, seed=3)
    spec = SgdSpec(s=s, hessian_scale=hessian_scale, d=d)
    _, ens = sgd_sde_simulate(spec, cfg, x0=1.0)
    empirical = float(np.mean(np.var(ens.particles, axis=0)))
    assert empirical == pytest.approx(variance, rel=0.03)
    assert sgd_stationary(spec).cov[0, 0] == pytest.approx(variance)
