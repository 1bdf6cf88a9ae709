"""Fast arithmetic on polynomials in the two reduced coordinates.

A homogeneous polynomial of degree ``i`` in ``(z1, z2)`` is held as a
length ``i + 1`` coefficient vector whose entry ``j`` multiplies
``z1**(i - j) * z2**j`` (the descending key order used by PolyMap).  The
product of two such polynomials is the 1-D convolution of their vectors.
"""

from __future__ import annotations

import numpy as np

from .poly import PolyMap, exponents_to_indices


def hconv(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Batched product of homogeneous polynomials along the last axis."""
    r, s = p.shape[-1], q.shape[-1]
    if r > s:
        p, q, r, s = q, p, s, r
    shape = np.broadcast_shapes(p.shape[:-1], q.shape[:-1]) + (r + s - 1,)
    out = np.zeros(shape, dtype=np.result_type(p, q))
    for j in range(r):
        out[..., j : j + s] += p[..., j : j + 1] * q
    return out


def d_dz1(block: np.ndarray) -> np.ndarray:
    """Derivative in ``z1`` of a homogeneous block ``(..., i + 1)``."""
    i = block.shape[-1] - 1
    return block[..., :i] * np.arange(i, 0, -1)


def d_dz2(block: np.ndarray) -> np.ndarray:
    i = block.shape[-1] - 1
    return block[..., 1:] * np.arange(1, i + 1)


def monomials2(z: np.ndarray, i: int) -> np.ndarray:
    """Values of ``z1**(i-j) z2**j`` for ``j = 0..i`` at points ``z`` (N, 2)."""
    j = np.arange(i + 1)
    return z[:, :1] ** (i - j) * z[:, 1:2] ** j


def eval_blocks(blocks: dict[int, np.ndarray], z: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_i blocks[i] z^i`` at points ``z`` (N, 2)."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    rows = next(iter(blocks.values())).shape[0]
    out = np.zeros((z.shape[0], rows), dtype=complex)
    for i, c in blocks.items():
        out += monomials2(z, i) @ c.T
    return out


def jacobian_blocks(blocks: dict[int, np.ndarray], z: np.ndarray) -> np.ndarray:
    """Jacobians ``(N, rows, 2)`` of ``sum_i blocks[i] z^i``."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    rows = next(iter(blocks.values())).shape[0]
    out = np.zeros((z.shape[0], rows, 2), dtype=complex)
    for i, c in blocks.items():
        if i == 0:
            continue
        mon = monomials2(z, i - 1)
        out[:, :, 0] += mon @ d_dz1(c).T
        out[:, :, 1] += mon @ d_dz2(c).T
    return out


class SeriesComposer:
    """Order-by-order composition ``G(W(z))`` for a map ``W`` in two variables.

    The monomials of ``G`` are arranged in a prefix tree of their sorted
    variable-index tuples.  Node values (products of ``W`` components) are
    cached per degree, so extending the composition by one order only costs
    one convolution sweep per tree level.

    Usage: for ``i = 2, 3, ...`` call :meth:`compose` to get the degree-``i``
    part of ``G(W)`` (which only involves ``W`` orders below ``i``), then
    :meth:`push` the order-``i`` block of ``W``.  Order 1 must be pushed first.
    """

    def __init__(self, G: PolyMap):
        self.G = G
        self.n_vars = G.in_dim
        self.W: dict[int, np.ndarray] = {}
        # level L (>= 2): parent node index at level L-1 and appended variable
        self._parent: dict[int, np.ndarray] = {}
        self._var: dict[int, np.ndarray] = {}
        # per G order: node index at level m for each stored key
        self._key_node: dict[int, np.ndarray] = {}
        self._vals: dict[int, dict[int, np.ndarray]] = {}
        self._build_tree()

    def _build_tree(self):
        levels: dict[int, dict[tuple, int]] = {1: {(v,): v for v in range(self.n_vars)}}
        for order in self.G.orders:
            for row in self.G.indices(order):
                tup = tuple(int(x) for x in row)
                for L in range(2, order + 1):
                    levels.setdefault(L, {})
                    pre = tup[:L]
                    if pre not in levels[L]:
                        levels[L][pre] = len(levels[L])
        for L in sorted(levels):
            if L == 1:
                continue
            nodes = sorted(levels[L].items(), key=lambda kv: kv[1])
            self._parent[L] = np.array([levels[L - 1][pre[:-1]] for pre, _ in nodes], dtype=np.int64)
            self._var[L] = np.array([pre[-1] for pre, _ in nodes], dtype=np.int64)
            self._vals[L] = {}
        for order in self.G.orders:
            idx = self.G.indices(order)
            self._key_node[order] = np.array(
                [levels[order][tuple(int(x) for x in row)] for row in idx], dtype=np.int64
            )
        self.levels = sorted(self._parent)

    def push(self, i: int, block: np.ndarray):
        if i != len(self.W) + 1:
            raise ValueError(f"expected order {len(self.W) + 1}, got {i}")
        self.W[i] = np.asarray(block, dtype=complex)

    def _node_values(self, L: int, i: int) -> np.ndarray:
        if L == 1:
            return self.W[i]
        vals = self._vals[L]
        if i not in vals:
            parent, var = self._parent[L], self._var[L]
            out = np.zeros((parent.shape[0], i + 1), dtype=complex)
            for s in range(1, i - L + 2):
                if s not in self.W:
                    raise ValueError(f"order {s} of W is not available")
                pv = self._node_values(L - 1, i - s)[parent]
                out += hconv(pv, self.W[s][var])
            vals[i] = out
        return vals[i]

    def compose(self, i: int) -> np.ndarray:
        """Degree-``i`` part of ``G(W(z))``, shape ``(out_dim, i + 1)``."""
        out = np.zeros((self.G.out_dim, i + 1), dtype=complex)
        for m in self.G.orders:
            if m > i:
                continue
            if m == 1:
                out += self.G.block(1)[1] @ self.W[i]
                continue
            nodes = self._node_values(m, i)[self._key_node[m]]
            out += self.G.block(m)[1] @ nodes
        return out


def compose_all(G: PolyMap, W: dict[int, np.ndarray], max_degree: int) -> dict[int, np.ndarray]:
    """All homogeneous parts of ``G(W(z))`` up to ``max_degree``.

    Orders of ``W`` missing from the mapping are treated as zero.
    """
    comp = SeriesComposer(G)
    rows = next(iter(W.values())).shape[0]
    out = {}
    for i in range(1, max_degree + 1):
        if i > 1:
            out[i] = comp.compose(i)
        comp.push(i, W.get(i, np.zeros((rows, i + 1), dtype=complex)))
    return out


__all__ = [
    "hconv",
    "d_dz1",
    "d_dz2",
    "monomials2",
    "eval_blocks",
    "jacobian_blocks",
    "SeriesComposer",
    "compose_all",
    "exponents_to_indices",
]
