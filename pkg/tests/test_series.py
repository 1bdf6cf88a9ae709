import numpy as np

from ssmkit._series import (
    SeriesComposer,
    compose_all,
    d_dz1,
    d_dz2,
    eval_blocks,
    hconv,
    jacobian_blocks,
)
from ssmkit.poly import PolyMap, multisets


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_hconv_is_polynomial_product(rng):
    p, q = crandn(rng, 3, 4), crandn(rng, 3, 3)
    z = crandn(rng, 5, 2)
    prod = eval_blocks({5: hconv(p, q)}, z)
    assert np.allclose(prod, eval_blocks({3: p}, z) * eval_blocks({2: q}, z))


def test_derivatives(rng):
    c = crandn(rng, 2, 5)
    z = crandn(rng, 1, 2)
    J = jacobian_blocks({4: c}, z)[0]
    h = 1e-6
    for k, op in enumerate((d_dz1, d_dz2)):
        dz = np.zeros((1, 2))
        dz[0, k] = h
        fd = (eval_blocks({4: c}, z + dz) - eval_blocks({4: c}, z - dz))[0] / (2 * h)
        assert np.allclose(J[:, k], fd, rtol=1e-7)
        assert np.allclose(eval_blocks({3: op(c)}, z)[0], J[:, k])


def test_composition_matches_evaluation(rng):
    d = 3
    G = PolyMap(d, d, {2: (multisets(d, 2), crandn(rng, d, 6)), 3: (multisets(d, 3), crandn(rng, d, 10))})
    W = {i: crandn(rng, d, i + 1) * 0.3**i for i in range(1, 4)}
    parts = compose_all(G, W, 9)
    z = 0.1 * crandn(rng, 4, 2)
    ref = G.eval(eval_blocks(W, z))
    got = eval_blocks(parts, z)
    assert np.allclose(got, ref, rtol=1e-12)


def test_composer_requires_sequential_orders(rng):
    G = PolyMap(2, 2, {2: (multisets(2, 2), crandn(rng, 2, 3))})
    comp = SeriesComposer(G)
    try:
        comp.push(2, np.zeros((2, 3)))
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-order push accepted")
