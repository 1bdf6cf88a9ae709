import numpy as np
import pytest

from ssmkit.exceptions import BlowUp, EventNotReached, RealMasterPairUnsupported
from ssmkit.model import build_first_order, make_shaw_pierre
from ssmkit.reduced import (
    PolarDynamics,
    amplitude,
    amplitude_diagnostics,
    anchor_scale,
    backbone,
    integrate_reduced,
    to_polar,
)
from ssmkit.solver import compute_ssm
from ssmkit.spectral import decompose


def test_polar_is_real_and_starts_linear(sp_slow):
    pd = to_polar(sp_slow)
    lam = sp_slow.modal.lambda_E[0]
    assert pd.rho_dot_coeffs[1] == lam.real
    assert pd.omega_coeffs[0] == lam.imag
    for (a, b) in pd.gammas:
        assert a == b + 1


def test_polar_truncate_matches_truncated_ssm(sp_slow):
    a = to_polar(sp_slow).truncate(7)
    b = to_polar(sp_slow.truncate(7))
    assert a.rho_dot_coeffs == b.rho_dot_coeffs
    assert a.omega_coeffs == b.omega_coeffs


@pytest.mark.parametrize(
    "fixture,expected", [("sp_slow", (0.66, 0.71)), ("sp_fast", (0.73, 0.66))]
)
def test_published_peak_displacements(request, fixture, expected):
    diag = amplitude_diagnostics(request.getfixturevalue(fixture), 0.35)
    assert np.allclose(diag["max_displacement"], expected, rtol=0.05)
    assert 0 < diag["amplitude"] <= np.linalg.norm(diag["max_displacement"])


def test_amplitude_small_rho_is_linear(sp_slow):
    # A(rho) ~ rho * mean_theta |2 Re(v e^{i theta})| for the master eigenvector
    v = sp_slow.modal.T[:2, 0]
    theta = 2 * np.pi * np.arange(512) / 512
    lin = np.mean(np.linalg.norm(2 * np.real(np.outer(np.exp(1j * theta), v)), axis=1))
    assert amplitude(sp_slow, 1e-5, 512) / 1e-5 == pytest.approx(lin, rel=1e-6)
    assert amplitude(sp_slow, 0.0) == 0.0
    with pytest.raises(ValueError):
        amplitude(sp_slow, -0.1)


def test_backbone_sampling(sp_slow):
    grid = np.linspace(0, 0.35, 8)
    bb = backbone(sp_slow, grid)
    assert np.array_equal(bb.rho, grid)
    assert bb.omega[0] == pytest.approx(sp_slow.modal.lambda_E[0].imag)
    assert np.all(np.diff(bb.amplitude) > 0)
    assert bb.rho_max == 0.35 and len(bb.samples) == 8
    single = backbone(sp_slow, [0.0])
    assert single.rho.size == 1
    with pytest.raises(ValueError):
        backbone(sp_slow, [0.2, 0.1])


def test_linear_reduced_dynamics_is_exact():
    lam = -0.05 + 1.3j
    pd = PolarDynamics({1: lam.real}, {0: lam.imag}, {})
    tr = integrate_reduced(pd, 0.3, 0.2, rho_eps=0.01)
    t_hit = np.log(0.3 / 0.01) / 0.05
    assert tr.t_end == pytest.approx(t_hit, rel=1e-6)
    t = np.linspace(0, tr.t_end, 50)
    rho, theta = tr(t)
    assert np.allclose(rho, 0.3 * np.exp(lam.real * t), rtol=1e-6)
    assert np.allclose(theta, 0.2 + lam.imag * t, rtol=1e-6)
    z = tr.z(t)
    assert np.allclose(z[:, 1], np.conj(z[:, 0]))


def test_fixed_horizon():
    pd = PolarDynamics({1: -0.1}, {0: 1.0}, {})
    tr = integrate_reduced(pd, 0.3, 0.0, t_end=5.0)
    assert tr.t_end == 5.0


def test_blow_up_detected():
    pd = PolarDynamics({1: -0.01, 3: 10.0}, {0: 1.0}, {})
    with pytest.raises(BlowUp):
        integrate_reduced(pd, 1.0, 0.0, t_end=50.0)


def test_event_not_reached():
    # stable limit cycle at rho = 0.5 keeps rho above rho_eps
    pd = PolarDynamics({1: 1.0, 3: -4.0}, {0: 1.0}, {})
    with pytest.raises(EventNotReached):
        integrate_reduced(pd, 0.3, 0.0, rho_eps=0.1)


def test_bad_arguments():
    pd = PolarDynamics({1: -0.1}, {0: 1.0}, {})
    with pytest.raises(ValueError):
        integrate_reduced(pd, 0.3, 0.0)
    with pytest.raises(ValueError):
        integrate_reduced(pd, 0.3, 0.0, rho_eps=0.5)
    with pytest.raises(ValueError):
        integrate_reduced(pd, 0.0, 0.0, t_end=1.0)


def test_real_master_pair_unsupported():
    fos = build_first_order(make_shaw_pierre(c=3.0))
    with pytest.warns(UserWarning):
        ssm = compute_ssm(decompose(fos), 5)
    with pytest.raises(RealMasterPairUnsupported):
        to_polar(ssm)


def test_anchor_scale_hits_target(sp_slow):
    s = anchor_scale(sp_slow.truncate(5), 1, 0.2, 0.3)
    ssm = compute_ssm(decompose(sp_slow.modal.fos, 1, master_scale=s), 5)
    diag = amplitude_diagnostics(ssm, 0.2, n_theta=256)
    assert diag["max_displacement"][1] == pytest.approx(0.3, rel=1e-9)
    with pytest.raises(ValueError):
        anchor_scale(sp_slow, 1, 0.0, 0.3)
