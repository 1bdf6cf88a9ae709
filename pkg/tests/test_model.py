import numpy as np
import pytest

from ssmkit.exceptions import AsymmetryError, ConfigError, DimensionMismatch, SingularMass
from ssmkit.model import (
    ForceTerm,
    MechanicalSystem,
    PolynomialForce,
    build_first_order,
    make_shaw_pierre,
    terms_from_records,
)


def test_shaw_pierre_inner_matrices():
    s = make_shaw_pierre()
    assert np.array_equal(s.K, [[2, -1], [-1, 2]])
    assert np.array_equal(s.C, [[0.06, -0.03], [-0.03, 0.06]])
    assert np.array_equal(s.M, np.eye(2))
    (term,) = s.nonlinearity.terms
    assert term.dof == 0 and term.coefficient == 0.5 and term.exponents == (3, 0, 0, 0)


def test_shaw_pierre_outer_defaults():
    s = make_shaw_pierre("outer")
    assert np.allclose(s.K, [[5.005, -4.005], [-4.005, 5.005]])
    assert np.allclose(s.C, [[0.8, -0.4], [-0.4, 0.8]])


def test_shaw_pierre_linear_limit():
    s = make_shaw_pierre(kappa=0.0)
    assert len(s.nonlinearity) == 0
    with pytest.raises(ConfigError):
        make_shaw_pierre(kappa=-1.0)
    with pytest.raises(ConfigError):
        make_shaw_pierre("sideways")


def test_force_term_degree():
    with pytest.raises(ConfigError):
        ForceTerm(0, 1.0, (1, 0))
    with pytest.raises(ConfigError):
        ForceTerm(0, 1.0, (3, -1))
    with pytest.raises(DimensionMismatch):
        PolynomialForce(2, (ForceTerm(0, 1.0, (2, 0)),))
    with pytest.raises(DimensionMismatch):
        PolynomialForce(1, (ForceTerm(1, 1.0, (2, 0)),))


def test_validation_errors():
    eye = np.eye(2)
    with pytest.raises(AsymmetryError):
        MechanicalSystem(eye, eye, [[2.0, -1.0], [-0.9, 2.0]]).validate()
    with pytest.raises(SingularMass):
        MechanicalSystem([[1.0, 1.0], [1.0, 1.0]], eye, eye).validate()
    with pytest.raises(DimensionMismatch):
        MechanicalSystem(eye, np.eye(3), eye)
    with pytest.raises(ConfigError):
        MechanicalSystem(eye, eye, [[np.nan, 0], [0, 1]])


def test_first_order_form():
    s = make_shaw_pierre()
    fos = build_first_order(s)
    assert fos.dim == 4
    assert np.array_equal(fos.A[:2, 2:], np.eye(2))
    assert np.array_equal(fos.A[2:, :2], -s.K)
    x = np.array([0.3, -0.2, 0.1, 0.4])
    # velocity rows are the accelerations of the second-order model
    assert np.allclose(fos.rhs(0, x)[2:], s.acceleration(x[:2], x[2:]))
    assert np.allclose(fos.nonlinear(x), [0, 0, -0.5 * 0.3**3, 0])


def test_rhs_paths_agree(beam_fos, rng):
    X = rng.normal(size=(3, beam_fos.dim))
    batch = beam_fos.rhs(0, X)
    for x, b in zip(X, batch):
        assert np.allclose(beam_fos.rhs(0, x), b, rtol=1e-13, atol=1e-13 * np.abs(b).max())


def test_jacobian_finite_difference(rng):
    fos = build_first_order(make_shaw_pierre())
    x = rng.normal(size=4)
    J = fos.jac(0, x)
    h = 1e-6
    fd = np.column_stack([(fos.rhs(0, x + h * e) - fos.rhs(0, x - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(J, fd, atol=1e-8)


def test_residual_of_model():
    s = make_shaw_pierre()
    y, yd = np.array([0.2, 0.1]), np.array([0.0, 0.3])
    ydd = s.acceleration(y, yd)
    assert np.allclose(s.residual(y, yd, ydd), 0, atol=1e-15)


def test_records_are_one_based():
    f = terms_from_records(2, [{"target_dof": 1, "coefficient": 0.5, "exponents": [3, 0, 0, 0]}])
    assert f.terms[0].dof == 0
    with pytest.raises(ConfigError):
        terms_from_records(2, [{"target_dof": 1, "coefficient": 0.5}])
    with pytest.raises(DimensionMismatch):
        terms_from_records(2, [{"target_dof": 3, "coefficient": 0.5, "exponents": [3, 0, 0, 0]}])
