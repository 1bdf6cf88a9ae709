import numpy as np
import pytest
from scipy.linalg import expm

from ssmkit.exceptions import ConfigError
from ssmkit.model import build_first_order, make_shaw_pierre
from ssmkit.reduced import to_polar
from ssmkit.solver import compute_ssm
from ssmkit.spectral import decompose
from ssmkit.validation import integrate_full, invariance_error, is_stiff


@pytest.fixture(scope="module")
def linear_sp():
    return build_first_order(make_shaw_pierre(kappa=0.0))


@pytest.mark.parametrize("grid", [False, True])
def test_linear_flow_matches_matrix_exponential(linear_sp, grid):
    x0 = np.array([0.3, -0.1, 0.05, 0.2])
    t = np.linspace(0, 20, 41)
    if grid:
        tr = integrate_full(linear_sp, x0, 20.0, t_eval=t, method="DOP853")
        assert tr.sol is None
    else:
        tr = integrate_full(linear_sp, x0, 20.0, method="DOP853")
    x = tr(t)
    ref = np.array([expm(linear_sp.A * s) @ x0 for s in t])
    assert np.allclose(x, ref, atol=1e-8)


def test_grid_path_matches_solve_ivp(sp_inner):
    x0 = np.array([0.4, 0.2, 0.0, -0.1])
    t = np.linspace(0, 30, 200)
    a = integrate_full(sp_inner, x0, 30.0, t_eval=t, method="DOP853")(t)
    b = integrate_full(sp_inner, x0, 30.0, method="DOP853")(t)
    assert np.allclose(a, b, atol=1e-7)


def test_grid_trajectory_only_answers_stored_times(sp_inner):
    t = np.linspace(0, 1, 5)
    tr = integrate_full(sp_inner, np.zeros(4) + 0.1, 1.0, t_eval=t, method="DOP853")
    assert tr(t[2]).shape == (1, 4)
    with pytest.raises(ValueError):
        tr(0.3)


def test_bad_initial_state(sp_inner):
    with pytest.raises(ConfigError):
        integrate_full(sp_inner, [0.1, 0.2], 1.0)
    with pytest.raises(ConfigError):
        integrate_full(sp_inner, [np.nan, 0, 0, 0], 1.0)


def test_small_systems_are_not_stiff(sp_inner):
    assert not is_stiff(sp_inner)


def test_linear_limit_is_invariant(linear_sp):
    ssm = compute_ssm(decompose(linear_sp), 15)
    res = invariance_error(linear_sp, ssm, 0.35, 0.01, N=4)
    assert res.delta_inv < 1e-8
    pd = to_polar(ssm)
    assert pd.omega(np.linspace(0, 0.35, 5)) == pytest.approx(ssm.modal.lambda_E[0].imag)


def test_single_trajectory_mean_is_its_distance(sp_slow, sp_inner):
    res = invariance_error(sp_inner, sp_slow.truncate(5), 0.3, 0.05, N=1)
    assert res.per_trajectory.shape == (1,)
    assert res.delta_inv == pytest.approx(res.per_trajectory[0] / res.normalization)
    assert res.thetas[0] == 0.0


def test_jitter_changes_little(sp_slow, sp_inner):
    ssm = sp_slow.truncate(5)
    a = invariance_error(sp_inner, ssm, 0.3, 0.05, N=10)
    b = invariance_error(sp_inner, ssm, 0.3, 0.05, N=10, theta_seed=7)
    c = invariance_error(sp_inner, ssm, 0.3, 0.05, N=10, theta_seed=7)
    assert abs(a.delta_inv - b.delta_inv) < 0.1 * a.delta_inv
    assert b.delta_inv == c.delta_inv
    assert not np.array_equal(a.thetas, b.thetas)


def test_modal_coordinates_and_threads(sp_slow, sp_inner):
    ssm = sp_slow.truncate(5)
    a = invariance_error(sp_inner, ssm, 0.3, 0.05, N=4, coordinates="modal")
    b = invariance_error(sp_inner, ssm, 0.3, 0.05, N=4, coordinates="modal", workers=2)
    assert a.delta_inv == b.delta_inv and a.coordinates == "modal"


def test_invariance_error_arguments(sp_slow, sp_inner):
    with pytest.raises(ConfigError):
        invariance_error(sp_inner, sp_slow, 0.1, 0.2)
    with pytest.raises(ConfigError):
        invariance_error(sp_inner, sp_slow, 0.3, 0.1, N=0)
    with pytest.raises(ConfigError):
        invariance_error(sp_inner, sp_slow, 0.3, 0.1, coordinates="polar")


def test_error_decreases_with_order(sp_slow, sp_inner):
    errs = [invariance_error(sp_inner, sp_slow.truncate(k), 0.35, 0.01, N=6).delta_inv
            for k in (3, 9, 15)]
    assert errs[0] > errs[1] > errs[2]
