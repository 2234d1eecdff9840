import numpy as np
import pytest

import model_core
from conftest import make_params
from model_core import (ModelParams, DiffusionSpec, Ensemble, ParameterError, DegenerateQ,
                        DimensionMismatch, LabError, NotPSD, Q12Convention, build_diffusion_matrix,
                        check_lindblad, q_coefficients, symplectic_matrix, hamiltonian,
                        classical_limit, split_phase_space, drift_block, psd_sqrt,
                        params_summary)


def test_diffusion_matrix_is_block_isotropic():
    params = make_params(d=2, Dqq=1.0, Dpq=-0.5, Dpp=2.0)
    D = build_diffusion_matrix(params)
    expected = np.array([[1.0, 0.0, -0.5, 0.0],
                         [0.0, 1.0, 0.0, -0.5],
                         [-0.5, 0.0, 2.0, 0.0],
                         [0.0, -0.5, 0.0, 2.0]])
    np.testing.assert_array_equal(D, expected)
    np.testing.assert_array_equal(D, D.T)


@pytest.mark.parametrize("kwargs", [
    dict(d=0),
    dict(omega0=0.0),
    dict(gamma=-1.0),
    dict(gamma=float('nan')),
    dict(Dqq=-0.1),
    dict(Dqq=1.0, Dpq=2.0, Dpp=1.0),
])
def test_invalid_parameters_are_rejected(kwargs):
    with pytest.raises(ParameterError):
        make_params(**kwargs)


def test_parameter_error_is_value_error():
    with pytest.raises(ValueError):
        make_params(d=-3)


def test_from_dict_fills_defaults_and_accepts_string_conventions():
    params = ModelParams.from_dict({'gamma': 2.0}, {'q12_convention': 'DPQ'})
    assert params.gamma == 2.0
    assert params.diffusion == DiffusionSpec(0.0, 0.0, 1.0)
    assert params.q12_convention is Q12Convention.DPQ
    assert ModelParams.from_dict(params.to_dict(), params.conventions_dict()) == params


def test_unknown_convention_is_parameter_error():
    with pytest.raises(ParameterError):
        ModelParams.from_dict({}, {'noise_convention': 'THREE_D'})


def test_lindblad_margin_sign():
    assert check_lindblad(make_params(Dqq=1.0, Dpq=0.0, Dpp=1.0, gamma=1.0)).satisfied
    caldeira = check_lindblad(make_params(Dqq=0.0, Dpq=0.0, Dpp=1.0, gamma=1.0))
    assert not caldeira.satisfied
    assert caldeira.margin == pytest.approx(-0.25)


def test_lindblad_margin_value(reference_params):
    check = check_lindblad(reference_params)
    assert check.satisfied
    assert check.margin == pytest.approx(0.75, abs=1e-15)


@pytest.mark.parametrize("gamma", [1.0, 2.0, 0.5])
def test_lindblad_boundary_is_satisfied(gamma):
    check = check_lindblad(make_params(Dqq=gamma / 2, Dpq=0.0, Dpp=gamma / 2, gamma=gamma))
    assert check.margin == 0.0
    assert check.satisfied


def test_q12_vanishes_with_its_convention_coefficient():
    dqq_zero = make_params(Dqq=0.0, Dpq=0.3, Dpp=1.0, q12_convention='DQQ', require_psd=False)
    assert q_coefficients(dqq_zero).q12 == 0.0
    dpq_zero = make_params(Dqq=1.0, Dpq=0.0, Dpp=1.0, gamma=2.0, q12_convention='DPQ')
    assert q_coefficients(dpq_zero).q12 == 0.0
    # the other convention picks up the nonzero coefficient
    assert q_coefficients(dpq_zero.with_changes(q12_convention=Q12Convention.DQQ)).q12 == 4.0


def test_q_coefficients_reference(reference_params):
    c = q_coefficients(reference_params)
    assert (c.q11, c.q12, c.q22, c.q) == (3.0, 2.0, 3.0, 5.0)


def test_q_coefficients_dpq_convention():
    params = make_params(Dqq=1.0, Dpq=-1.0, Dpp=2.0, q12_convention='DPQ')
    assert q_coefficients(params).q12 == -2.0


def test_degenerate_q():
    # Dpp = Dqq = 0 leaves Q11 = Q22 = Q12 = 0
    with pytest.raises(DegenerateQ):
        q_coefficients(make_params(Dqq=0.0, Dpq=0.0, Dpp=0.0))


def test_degenerate_q_is_lab_error():
    assert issubclass(DegenerateQ, LabError)


def test_symplectic_matrix():
    J = symplectic_matrix(3)
    np.testing.assert_array_equal(J @ J, -np.eye(6))
    np.testing.assert_array_equal(J.T, -J)


def test_hamiltonian_and_split():
    params = make_params(d=2, omega0=2.0)
    z = np.array([1.0, 0.0, 0.0, 3.0])
    x, p = split_phase_space(params, z)
    np.testing.assert_array_equal(x, [1.0, 0.0])
    np.testing.assert_array_equal(p, [0.0, 3.0])
    assert hamiltonian(params, z) == pytest.approx(0.5 * (9.0 + 4.0))
    with pytest.raises(DimensionMismatch):
        split_phase_space(params, np.zeros(3))


def test_classical_limit_drops_position_diffusion(reference_params):
    limit = classical_limit(reference_params)
    assert limit.diffusion == DiffusionSpec(0.0, 0.0, 2.0)
    assert limit.gamma == reference_params.gamma


def test_drift_block_friction_convention():
    params = make_params(gamma=0.5, omega0=2.0, friction_convention='TWO_GAMMA')
    np.testing.assert_array_equal(drift_block(params), [[0.0, 1.0], [-4.0, -1.0]])


def test_psd_sqrt_squares_back():
    mat = np.array([[2.0, -1.0], [-1.0, 3.0]])
    root = psd_sqrt(mat)
    np.testing.assert_allclose(root @ root, mat, atol=1e-12)
    np.testing.assert_allclose(psd_sqrt(np.zeros((2, 2))), np.zeros((2, 2)))
    with pytest.raises(NotPSD):
        psd_sqrt(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_ensemble_validation():
    ens = Ensemble(particles=np.zeros((4, 2)))
    assert (ens.n, ens.dim) == (4, 2)
    with pytest.raises(DimensionMismatch):
        Ensemble(particles=np.zeros(3))
    with pytest.raises(LabError):
        Ensemble(particles=np.array([[np.inf, 0.0]]))


def test_params_summary_has_conventions(reference_params):
    summary = params_summary(reference_params)
    assert summary['q12_convention'] == 'DQQ'
    assert summary['Dpq'] == -1.0


def test_indefinite_diffusion_allowed_when_psd_not_required():
    params = make_params(Dqq=0.0, Dpq=0.25, Dpp=1.0, require_psd=False)
    assert params.diffusion.det == pytest.approx(-0.0625)
    assert ModelParams.from_dict(params.to_dict()) == params
    # Negative diagonal entries stay invalid either way
    with pytest.raises(ParameterError):
        make_params(Dqq=-1.0, require_psd=False)


def test_every_error_class_is_documented():
    errors = [obj for obj in vars(model_core).values()
              if isinstance(obj, type) and issubclass(obj, LabError)]
    assert len(errors) >= 15
    for cls in errors:
        assert cls.__doc__ and cls.__doc__.strip(), cls.__name__
