import numpy as np
import pytest

from conftest import BEAM_OMEGA, BEAM_RHO
from ssmkit.beam import BeamAssembly, BeamParams, assemble_beam, spectral_ratio_report
from ssmkit.exceptions import ConfigError
from ssmkit.model import MechanicalSystem, build_first_order, linear_force
from ssmkit.reduced import to_polar


def _slowest(asm):
    lam = np.linalg.eigvals(build_first_order(asm.sys).A)
    return lam[np.argmax(lam.real + 1e-9 * lam.imag)]


def _tip_deflection(asm, force=1.0):
    f = np.zeros(asm.n)
    f[asm.tip_w] = force
    return np.linalg.solve(asm.sys.K, f)[asm.tip_w]


def test_reference_dimensions(beam):
    assert beam.n == 16
    assert build_first_order(beam.sys).dim == 32
    p = beam.params
    assert beam.I0 == p.b * p.h and beam.I2 == p.b * p.h**3 / 12
    assert beam.m0 == p.rho_density * beam.I0


@pytest.mark.parametrize("m", range(1, 9))
def test_dof_count(m):
    asm = assemble_beam(m_elems=m)
    assert asm.n == 5 * m + 1
    assert len(set(asm.dof_map.values())) == asm.n


def test_matrices_symmetric_and_mass_definite(beam):
    M, C, K = beam.sys.M, beam.sys.C, beam.sys.K
    for mat in (M, C, K):
        assert np.array_equal(mat, mat.T)
    assert np.all(np.linalg.eigvalsh(M) > 0)
    assert np.all(np.linalg.eigvalsh(K) > 0)


def test_slowest_eigenvalue(beam):
    lam = _slowest(beam)
    assert lam.real == pytest.approx(-0.02286, rel=0.02)
    assert lam.imag == pytest.approx(11.03, rel=0.02)


def test_spectral_ratio(beam):
    assert 40 <= spectral_ratio_report(beam) <= 60
    r1 = spectral_ratio_report(assemble_beam(m_elems=1))
    assert np.isfinite(r1) and r1 > 0


def test_spectral_ratio_proportional_toy():
    alpha, beta = 0.1, 0.02
    M = np.eye(2)
    K = np.array([[2.5, -1.5], [-1.5, 2.5]])  # eigenvalues 1 and 4
    sys = MechanicalSystem(M, alpha * M + beta * K, K, linear_force(2))
    asm = BeamAssembly(sys, {}, BeamParams(), 1.0, 1.0, 1.0, 1.0)
    # Re lambda = -(alpha + beta omega^2) / 2
    assert spectral_ratio_report(asm) == pytest.approx((alpha + 4 * beta) / (alpha + beta))


def test_conservative_limit_has_no_damping():
    asm = assemble_beam(eta=0.0, mu=0.0)
    assert not np.any(asm.sys.C)


def test_external_damping_is_mass_proportional():
    asm = assemble_beam(eta=0.0, mu=0.0, lambda_ext=0.5)
    C, M = asm.sys.C, asm.sys.M
    k = np.sum(C * M) / np.sum(M * M)  # least-squares factor from the blocks
    assert np.linalg.norm(C - k * M) < 1e-10 * np.linalg.norm(C)
    assert k == pytest.approx(0.5 / (asm.params.rho_density * asm.I0))


def test_static_tip_deflection():
    asm = assemble_beam(m_elems=8)
    p = asm.params
    ref = p.L**3 / (3 * p.E * p.I2) + p.L / (p.G_shear * p.I0)
    assert _tip_deflection(asm) == pytest.approx(ref, rel=0.02)


def test_refinement_convergence():
    f6 = _slowest(assemble_beam(m_elems=6)).imag
    f8 = _slowest(assemble_beam(m_elems=8)).imag
    assert abs(f6 - f8) < 0.005 * f8


def test_force_vanishes_to_first_order(beam):
    fos = build_first_order(beam.sys)
    assert np.array_equal(fos.nonlinear(np.zeros(32)), np.zeros(32))
    assert min(fos.F.orders) >= 2
    # quadratic leading behaviour: shrinking the state tenfold shrinks F a hundredfold
    x = 1e-6 * np.linspace(-1, 1, 32)
    ratio = np.abs(fos.nonlinear(x)).max() / np.abs(fos.nonlinear(0.1 * x)).max()
    assert ratio == pytest.approx(100, rel=1e-3)
    # nonlinear terms only load unconstrained rows
    for term in beam.sys.nonlinearity.terms:
        assert 0 <= term.dof < beam.n


def test_parameter_checks():
    with pytest.raises(ConfigError):
        BeamParams(m_elems=0)
    with pytest.raises(ConfigError):
        BeamParams(E=-1.0)
    with pytest.raises(ConfigError):
        BeamParams(lambda_ext=-0.1)


def test_published_reduced_dynamics(beam_ssm):
    pd = to_polar(beam_ssm)
    for k, ref in BEAM_RHO.items():
        assert pd.rho_dot_coeffs[k] == pytest.approx(ref, rel=0.05)
    for k, ref in BEAM_OMEGA.items():
        assert pd.omega_coeffs[k] == pytest.approx(ref, rel=0.05)
