import warnings

import numpy as np
import pytest

from conftest import TABLE_1A, TABLE_1B
from ssmkit.exceptions import ConfigError, DefectiveMatrix, UnstableSpectrum
from ssmkit.model import FirstOrderSystem, build_first_order, make_shaw_pierre
from ssmkit.poly import PolyMap
from ssmkit.spectral import (
    closeness,
    decompose,
    eigen_label,
    mode_pairs,
    resonance_scan,
    spectral_quotients,
)


def test_shaw_pierre_eigenvalues(sp_inner):
    ms = decompose(sp_inner)
    lam = ms.lambdas
    assert np.isclose(lam[0], -0.015 + np.sqrt(1 - 0.015**2) * 1j, atol=1e-14)
    assert lam[1] == np.conj(lam[0])
    assert np.isclose(lam[2], -0.045 + np.sqrt(3 - 0.045**2) * 1j, atol=1e-14)
    assert abs(lam[2].imag - 1.7315) < 5e-5


def test_normalized_modal_matrix(sp_inner):
    ms = decompose(sp_inner, 1)
    l1, l3 = ms.lambdas[0], ms.lambdas[2]
    assert np.allclose(ms.T[:, 0], [1, 1, l1, l1], atol=1e-13)
    assert np.allclose(ms.T[:, 2], [1, -1, l3, -l3], atol=1e-13)
    assert np.array_equal(ms.T[:, 1], np.conj(ms.T[:, 0]))
    assert np.allclose(ms.T @ ms.T_inv, np.eye(4), atol=1e-13)


def test_master_selection(sp_inner):
    fast = decompose(sp_inner, 2)
    assert np.isclose(fast.lambda_E[0].real, -0.045)
    assert fast.master == (2, 3)
    same = decompose(sp_inner, (2, 3))
    assert np.array_equal(same.lambdas, fast.lambdas)
    with pytest.raises(ConfigError):
        decompose(sp_inner, 3)
    with pytest.raises(ConfigError):
        decompose(sp_inner, "fastest")


def test_master_scale(sp_inner):
    a = decompose(sp_inner)
    b = decompose(sp_inner, master_scale=2.5)
    assert np.allclose(b.T[:, :2], 2.5 * a.T[:, :2])
    assert np.array_equal(b.T[:, 2:], a.T[:, 2:])
    with pytest.raises(ConfigError):
        decompose(sp_inner, master_scale=0)


def test_unstable_and_defective():
    F = PolyMap(2, 2)
    with pytest.raises(UnstableSpectrum):
        decompose(FirstOrderSystem(np.array([[0.0, 1.0], [-1.0, 0.0]]), F))
    with pytest.raises(DefectiveMatrix):
        decompose(FirstOrderSystem(np.array([[-1.0, 1.0], [0.0, -1.0]]), F))


def test_spectral_quotients(sp_inner, sp_outer):
    assert spectral_quotients(decompose(sp_inner, 1)) == {"sigma_out": 3, "sigma_in": 1}
    assert spectral_quotients(decompose(sp_inner, 2))["sigma_out"] == 0
    assert spectral_quotients(decompose(sp_outer))["sigma_out"] == 3


def test_closeness_exact_and_bounds():
    lam = (-1 + 2j, -1 - 2j)
    assert closeness(2, 1, lam, 2 * lam[0] + lam[1]) == 0
    assert 0 <= closeness(3, 0, lam, -5 + 1j) <= 1


def test_table_1a(sp_inner):
    rep = resonance_scan(decompose(sp_inner, 1), 0.05, 15)
    inner = {(e.a, e.b, e.index): e.I for e in rep.inner()}
    for k, ref in enumerate(TABLE_1A):
        a, b = k + 2, k + 1
        assert abs(inner[(a, b, 0)] - ref) < 1e-4
        assert abs(inner[(b, a, 1)] - ref) < 1e-4
    assert len(inner) == 2 * len(TABLE_1A)


def test_table_1b(sp_inner):
    rep = resonance_scan(decompose(sp_inner, 2), 0.05, 15)
    inner = {(e.a, e.b, e.index): e.I for e in rep.inner()}
    for k, ref in enumerate(TABLE_1B):
        assert abs(inner[(k + 2, k + 1, 0)] - ref) < 1e-4
        assert abs(inner[(k + 1, k + 2, 1)] - ref) < 1e-4


def test_table_3(sp_outer):
    ms = decompose(sp_outer)
    rep = resonance_scan(ms, 0.05, 15)
    outer = [
        (e.a, e.b, eigen_label(ms.lambdas, e.index), e.I) for e in rep.outer() if e.order == 3
    ]
    assert [o[:3] for o in outer] == [(3, 0, "lambda_2"), (0, 3, "conj(lambda_2)")]
    assert all(abs(o[3] - 0.000162) < 1e-4 for o in outer)
    assert not rep.inner()


def test_fast_pair_has_no_low_order_outer_entries(sp_inner):
    ms = decompose(sp_inner, 2)
    assert not resonance_scan(ms, 0.05, 8).outer()
    # from order 9 on the cosine measure dips below 0.05, but no exact
    # outer resonance is possible: real parts cannot match
    for e in resonance_scan(ms, 0.05, 15).outer():
        assert e.order >= 9
        combo = e.a * ms.lambda_E[0] + e.b * ms.lambda_E[1]
        assert abs(combo.real - e.lambda_l.real) > 0.3


def test_inner_slots_and_dicts(sp_inner):
    rep = resonance_scan(decompose(sp_inner), 0.05, 3)
    assert rep.inner_slots() == {(0, (2, 1)), (1, (1, 2))}
    d = rep.as_dicts()[0]
    assert d["index"] == 1 and d["order"] == 3


def test_large_delta_warns(sp_inner):
    with pytest.warns(UserWarning):
        resonance_scan(decompose(sp_inner), 0.2, 3)


def test_mode_pairs_and_labels():
    lam = np.array([-1 + 2j, -1 - 2j, -2.0, -3.0, -4 + 1j, -4 - 1j])
    assert mode_pairs(lam) == [(0, 1), (2, 3), (4, 5)]
    assert [eigen_label(lam, k) for k in range(6)] == [
        "lambda_1", "conj(lambda_1)", "lambda_2", "lambda_3", "lambda_4", "conj(lambda_4)",
    ]


def test_overdamped_master_is_real():
    sys_ = make_shaw_pierre(c=3.0, kappa=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ms = decompose(build_first_order(sys_))
    assert not ms.underdamped
    assert np.all(ms.lambda_E.imag == 0)
