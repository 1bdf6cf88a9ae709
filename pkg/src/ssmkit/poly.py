"""Compressed multivariate polynomial maps.

A :class:`PolyMap` stores a vector-valued polynomial ``p: C^d -> C^e`` one
homogeneous order at a time.  Each order keeps a single coefficient column
per distinct monomial (multiset of variable indices) instead of the
``d**i`` redundant columns of a dense Kronecker coefficient matrix.  The
coefficient attached to a monomial is the sum of all dense Kronecker
coefficients belonging to it, which is the unique symmetric-sum
representative of the polynomial.

Keys are exponent tuples.  Within an order they are kept in descending
lexicographic order, so ``(2, 0), (1, 1), (0, 2)`` for two variables.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DimensionMismatch, SingularTransform

__all__ = [
    "PolyMap",
    "multiset_count",
    "multisets",
    "exponents_to_indices",
    "indices_to_exponents",
    "kron_compose",
    "apply_collapsed",
    "transform_linear",
    "lambda_tilde_diag",
    "dense_kron_matrix",
    "collapse_dense",
    "kron_power",
]

# coefficients below this modulus are not stored
ZERO_TOL = 1e-300


def multiset_count(d: int, i: int) -> int:
    """Number of distinct monomials of degree ``i`` in ``d`` variables.

    Equals ``binomial(i + d - 1, i)``.  Python integers do not overflow, but
    results that do not fit a signed 64-bit index are rejected since no
    array could be allocated for them.
    """
    if d < 1 or i < 1:
        raise ValueError("multiset_count needs d >= 1 and i >= 1")
    n = math.comb(i + d - 1, i)
    if n > np.iinfo(np.int64).max:
        raise OverflowError(f"S({d},{i}) = {n} exceeds the int64 range")
    return n


def multisets(d: int, i: int) -> np.ndarray:
    """All exponent tuples of total degree ``i`` over ``d`` variables.

    Returns an ``(S(d, i), d)`` integer array in descending lexicographic
    order.
    """
    idx = np.array(list(itertools.combinations_with_replacement(range(d), i)), dtype=np.int64)
    if idx.size == 0:
        return np.zeros((0, d), dtype=np.int64)
    return indices_to_exponents(idx, d)


def indices_to_exponents(idx: np.ndarray, d: int) -> np.ndarray:
    idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
    out = np.zeros((idx.shape[0], d), dtype=np.int64)
    rows = np.repeat(np.arange(idx.shape[0]), idx.shape[1])
    np.add.at(out, (rows, idx.ravel()), 1)
    return out


def exponents_to_indices(keys: np.ndarray) -> np.ndarray:
    """Sorted variable-index tuples, one row per exponent tuple."""
    keys = np.atleast_2d(np.asarray(keys, dtype=np.int64))
    if keys.shape[0] == 0:
        return np.zeros((0, 0), dtype=np.int64)
    degree = int(keys[0].sum())
    out = np.empty((keys.shape[0], degree), dtype=np.int64)
    for r, k in enumerate(keys):
        out[r] = np.repeat(np.arange(keys.shape[1]), k)
    return out


def _sort_desc(keys: np.ndarray) -> np.ndarray:
    # np.lexsort sorts by the last key first, so feed columns reversed
    return np.lexsort(keys.T[::-1])[::-1]


class PolyMap:
    """Vector-valued polynomial with compressed per-order coefficient blocks.

    Parameters
    ----------
    in_dim, out_dim : int
        Number of input variables ``d`` and output components ``e``.
    blocks : mapping int -> (keys, coeffs)
        ``keys`` is an ``(K, d)`` exponent array whose rows all have total
        degree equal to the order; ``coeffs`` is ``(e, K)`` complex.
        Duplicate keys are summed, keys are sorted and all-zero columns are
        dropped.
    """

    __slots__ = ("in_dim", "out_dim", "_blocks", "_indices")

    def __init__(self, in_dim: int, out_dim: int, blocks: Mapping | None = None):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self._blocks: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._indices: dict[int, np.ndarray] = {}
        for order, (keys, coeffs) in sorted((blocks or {}).items()):
            self._set_block(int(order), keys, coeffs)

    def _set_block(self, order, keys, coeffs):
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, self.in_dim)
        coeffs = np.asarray(coeffs, dtype=complex).reshape(self.out_dim, keys.shape[0])
        if keys.shape[0] == 0:
            return
        if order < 1:
            raise ValueError("polynomial orders start at 1")
        if np.any(keys < 0) or np.any(keys.sum(axis=1) != order):
            raise ValueError(f"block of order {order} holds keys of another degree")
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        if uniq.shape[0] != keys.shape[0]:
            summed = np.zeros((self.out_dim, uniq.shape[0]), dtype=complex)
            np.add.at(summed.T, inverse.ravel(), coeffs.T)
            keys, coeffs = uniq, summed
        keep = np.any(np.abs(coeffs) >= ZERO_TOL, axis=0)
        keys, coeffs = keys[keep], coeffs[:, keep]
        if keys.shape[0] == 0:
            return
        perm = _sort_desc(keys)
        self._blocks[order] = (keys[perm], coeffs[:, perm])
        self._indices[order] = exponents_to_indices(keys[perm])

    # ------------------------------------------------------------------ build
    @classmethod
    def from_terms(cls, in_dim, out_dim, terms: Iterable) -> "PolyMap":
        """Build from ``(row, exponents, coefficient)`` triples."""
        by_order: dict[int, tuple[list, list]] = {}
        for row, exps, c in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != in_dim:
                raise DimensionMismatch(f"exponent tuple {exps} is not over {in_dim} variables")
            if not 0 <= row < out_dim:
                raise DimensionMismatch(f"row {row} outside 0..{out_dim - 1}")
            col = np.zeros(out_dim, dtype=complex)
            col[row] = c
            ks, cs = by_order.setdefault(sum(exps), ([], []))
            ks.append(exps)
            cs.append(col)
        blocks = {
            i: (np.array(ks, dtype=np.int64), np.array(cs).T) for i, (ks, cs) in by_order.items()
        }
        return cls(in_dim, out_dim, blocks)

    @classmethod
    def from_full_blocks(cls, in_dim, out_dim, full: Mapping[int, np.ndarray]) -> "PolyMap":
        """Build from coefficient arrays covering every monomial of each order.

        ``full[i]`` has shape ``(e, S(d, i))`` with columns in the canonical
        descending key order of :func:`multisets`.
        """
        return cls(in_dim, out_dim, {i: (multisets(in_dim, i), c) for i, c in full.items()})

    # ---------------------------------------------------------------- access
    @property
    def orders(self) -> list[int]:
        return sorted(self._blocks)

    @property
    def max_order(self) -> int:
        return max(self._blocks, default=0)

    def block(self, order: int) -> tuple[np.ndarray, np.ndarray]:
        if order in self._blocks:
            return self._blocks[order]
        return np.zeros((0, self.in_dim), dtype=np.int64), np.zeros((self.out_dim, 0), dtype=complex)

    def indices(self, order: int) -> np.ndarray:
        return self._indices.get(order, np.zeros((0, order), dtype=np.int64))

    def full_block(self, order: int) -> np.ndarray:
        """Coefficients over every monomial of ``order`` (zeros where absent)."""
        keys, coeffs = self.block(order)
        out = np.zeros((self.out_dim, multiset_count(self.in_dim, order)), dtype=complex)
        if keys.shape[0]:
            all_keys = multisets(self.in_dim, order)
            lookup = {tuple(k): j for j, k in enumerate(all_keys)}
            cols = [lookup[tuple(k)] for k in keys]
            out[:, cols] = coeffs
        return out

    def coeff(self, row: int, key: Sequence[int]) -> complex:
        key = tuple(int(k) for k in key)
        keys, coeffs = self.block(sum(key))
        hit = np.flatnonzero(np.all(keys == np.array(key), axis=1))
        return complex(coeffs[row, hit[0]]) if hit.size else 0j

    def items(self):
        """Yield ``(order, key tuple, coefficient column)`` in canonical order."""
        for order in self.orders:
            keys, coeffs = self._blocks[order]
            for j, k in enumerate(keys):
                yield order, tuple(int(e) for e in k), coeffs[:, j]

    def nnz(self) -> int:
        return sum(k.shape[0] for k, _ in self._blocks.values())

    def is_empty(self) -> bool:
        return not self._blocks

    def truncate(self, max_order: int) -> "PolyMap":
        return PolyMap(
            self.in_dim, self.out_dim, {i: b for i, b in self._blocks.items() if i <= max_order}
        )

    def __repr__(self):
        return (
            f"PolyMap(in_dim={self.in_dim}, out_dim={self.out_dim}, "
            f"orders={self.orders}, nnz={self.nnz()})"
        )

    # ------------------------------------------------------------ arithmetic
    def __add__(self, other: "PolyMap") -> "PolyMap":
        if (self.in_dim, self.out_dim) != (other.in_dim, other.out_dim):
            raise DimensionMismatch("cannot add polynomial maps of different shapes")
        blocks = {}
        for i in set(self._blocks) | set(other._blocks):
            k1, c1 = self.block(i)
            k2, c2 = other.block(i)
            blocks[i] = (np.vstack([k1, k2]), np.hstack([c1, c2]))
        return PolyMap(self.in_dim, self.out_dim, blocks)

    def scale_rows(self, matrix: np.ndarray) -> "PolyMap":
        """Return ``matrix @ p`` as a new map."""
        matrix = np.asarray(matrix)
        return PolyMap(
            self.in_dim,
            matrix.shape[0],
            {i: (k, matrix @ c) for i, (k, c) in self._blocks.items()},
        )

    # ------------------------------------------------------------ evaluation
    def monomials(self, order: int, v: np.ndarray) -> np.ndarray:
        """Values of the stored monomials of ``order`` at points ``v`` (N, d)."""
        idx = self.indices(order)
        vals = np.ones((v.shape[0], idx.shape[0]), dtype=np.result_type(v, float))
        for col in idx.T:
            vals = vals * v[:, col]
        return vals

    def eval(self, v) -> np.ndarray:
        """Evaluate at one point ``(d,)`` or a batch ``(N, d)``."""
        v = np.asarray(v)
        single = v.ndim == 1
        pts = np.atleast_2d(v)
        if pts.shape[1] != self.in_dim:
            raise DimensionMismatch(f"expected points with {self.in_dim} coordinates")
        out = np.zeros((pts.shape[0], self.out_dim), dtype=complex)
        for order, (_, coeffs) in self._blocks.items():
            out += self.monomials(order, pts) @ coeffs.T
        return out[0] if single else out

    def eval_real(self, v) -> np.ndarray:
        """Evaluate a map with real coefficients at real points."""
        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        pts = np.atleast_2d(v)
        out = np.zeros((pts.shape[0], self.out_dim))
        for order, (_, coeffs) in self._blocks.items():
            out += self.monomials(order, pts) @ coeffs.real.T
        return out[0] if single else out

    def jacobian(self, v) -> np.ndarray:
        """Exact Jacobian ``(e, d)`` at a single point."""
        v = np.asarray(v)
        dtype = np.result_type(v, complex)
        jac = np.zeros((self.out_dim, self.in_dim), dtype=dtype)
        for order, (_, coeffs) in self._blocks.items():
            idx = self.indices(order)
            factors = v[idx]  # (K, order)
            dmon = np.zeros((idx.shape[0], self.in_dim), dtype=dtype)
            for k in range(order):
                others = np.prod(np.delete(factors, k, axis=1), axis=1)
                np.add.at(dmon, (np.arange(idx.shape[0]), idx[:, k]), others)
            jac += coeffs @ dmon
        return jac

    # -------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        """``{order: {"a,b,...": [[re, im] per row]}}`` with string keys."""
        out = {}
        for order in self.orders:
            keys, coeffs = self._blocks[order]
            out[str(order)] = {
                ",".join(str(int(e)) for e in k): [[float(c.real), float(c.imag)] for c in coeffs[:, j]]
                for j, k in enumerate(keys)
            }
        return out

    @classmethod
    def from_dict(cls, in_dim, out_dim, data: Mapping) -> "PolyMap":
        blocks = {}
        for order, entries in data.items():
            keys = [tuple(int(e) for e in k.split(",")) for k in entries]
            coeffs = np.array([[complex(re, im) for re, im in col] for col in entries.values()]).T
            blocks[int(order)] = (np.array(keys, dtype=np.int64), coeffs)
        return cls(in_dim, out_dim, blocks)


# ---------------------------------------------------------------------------
# Kronecker composition
# ---------------------------------------------------------------------------


def kron_compose(factors: Sequence[tuple[np.ndarray, np.ndarray]], total_order: int):
    """Collapsed block of the Kronecker product of homogeneous factors.

    Each factor is a ``(keys, coeffs)`` block over the same ``d`` input
    variables, with ``coeffs`` of shape ``(e_k, K_k)``.  The result is the
    order-``total_order`` block of ``p_1(z) (x) p_2(z) (x) ... (x) p_m(z)``:
    its rows follow the Kronecker ordering of the factor rows and its keys are
    exponent tuples of degree ``total_order``.
    """
    if not factors:
        raise DimensionMismatch("kron_compose needs at least one factor")
    d = np.asarray(factors[0][0]).reshape(-1, np.asarray(factors[0][0]).shape[-1]).shape[1]
    degrees = []
    for keys, coeffs in factors:
        keys = np.asarray(keys)
        if keys.shape[1] != d:
            raise DimensionMismatch("all factors must share the input dimension")
        if keys.shape[0] and np.any(keys.sum(axis=1) != keys[0].sum()):
            raise ValueError("factors must be homogeneous")
        degrees.append(int(keys[0].sum()) if keys.shape[0] else 0)
    if sum(degrees) != total_order:
        raise DimensionMismatch(f"factor orders {degrees} do not add up to {total_order}")

    acc_keys = np.zeros((1, d), dtype=np.int64)
    acc_coeffs = np.ones((1, 1), dtype=complex)
    for keys, coeffs in factors:
        keys = np.asarray(keys, dtype=np.int64)
        coeffs = np.asarray(coeffs, dtype=complex)
        pair_keys = (acc_keys[:, None, :] + keys[None, :, :]).reshape(-1, d)
        # rows follow kron(acc_rows, factor_rows); columns run over key pairs
        pair_coeffs = np.einsum("ak,bl->abkl", acc_coeffs, coeffs).reshape(
            acc_coeffs.shape[0] * coeffs.shape[0], -1
        )
        acc_keys, acc_coeffs = _merge_keys(pair_keys, pair_coeffs)
    return acc_keys, acc_coeffs


def _merge_keys(keys, coeffs):
    if keys.shape[0] == 0:
        return keys, coeffs
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    merged = np.zeros((coeffs.shape[0], uniq.shape[0]), dtype=complex)
    np.add.at(merged.T, inverse.ravel(), coeffs.T)
    perm = _sort_desc(uniq)
    return uniq[perm], merged[:, perm]


def apply_collapsed(coeff_block: tuple[np.ndarray, np.ndarray], composed, n_vars: int):
    """Apply a collapsed order-``m`` block of a map in ``n_vars`` variables to
    a composed block whose rows follow the Kronecker ordering of ``m``
    ``n_vars``-vectors (the output of :func:`kron_compose`)."""
    gkeys, gcoeffs = coeff_block
    ckeys, ccoeffs = composed
    idx = exponents_to_indices(gkeys)
    m = idx.shape[1]
    rows = np.zeros(idx.shape[0], dtype=np.int64)
    for k in range(m):
        rows = rows * n_vars + idx[:, k]
    return ckeys, gcoeffs @ ccoeffs[rows]


# ---------------------------------------------------------------------------
# linear change of variables
# ---------------------------------------------------------------------------

_CHUNK = 256


def _expand_linear_forms(forms: np.ndarray, idx: np.ndarray, perms) -> np.ndarray:
    """Collapsed coefficients of ``prod_k (forms[k] . q)`` at every key ``idx``.

    ``forms`` is ``(B, m, d)`` for a batch of B products; ``idx`` is the
    ``(S, m)`` sorted-index array of all degree-``m`` monomials.  The sum runs
    over all ``m!`` slot permutations and is divided by the multiplicity
    factor ``prod(mult!)`` so each distinct permutation counts once.
    """
    B, m, _ = forms.shape
    total = np.zeros((B, idx.shape[0]), dtype=complex)
    for perm in perms:
        term = np.ones((B, idx.shape[0]), dtype=complex)
        for slot, k in enumerate(perm):
            term = term * forms[:, slot, :][:, idx[:, k]]
        total += term
    return total


def _multiplicity_factor(idx: np.ndarray) -> np.ndarray:
    fac = np.ones(idx.shape[0])
    for r, row in enumerate(idx):
        _, counts = np.unique(row, return_counts=True)
        fac[r] = np.prod([math.factorial(c) for c in counts])
    return fac


def transform_linear(F: PolyMap, T, cond_limit: float = 1e12) -> PolyMap:
    """Return ``G`` with ``G(q) = T^{-1} F(T q)``, order by order.

    Parameters
    ----------
    F : PolyMap
        Square map (``in_dim == out_dim``).
    T : (d, d) array
        Invertible change of variables.

    Raises
    ------
    SingularTransform
        If ``cond(T)`` exceeds ``cond_limit``.
    """
    T = np.asarray(T, dtype=complex)
    d = F.in_dim
    if T.shape != (d, d) or F.out_dim != d:
        raise DimensionMismatch("transform_linear needs a square map and a matching square T")
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularTransform(f"transformation matrix is ill conditioned (cond = {cond:.3e})")
    if np.array_equal(T, np.eye(d)):
        return PolyMap.from_full_blocks(d, d, {i: F.full_block(i) for i in F.orders})
    T_inv = np.linalg.inv(T)
    blocks = {}
    for order in F.orders:
        keys, coeffs = F.block(order)
        src_idx = F.indices(order)
        all_keys = multisets(d, order)
        all_idx = exponents_to_indices(all_keys)
        perms = list(itertools.permutations(range(order)))
        out = np.zeros((d, all_keys.shape[0]), dtype=complex)
        left = T_inv @ coeffs
        for start in range(0, keys.shape[0], _CHUNK):
            sl = slice(start, start + _CHUNK)
            forms = T[src_idx[sl]]  # (B, m, d): row i_k of T for each slot
            expansion = _expand_linear_forms(forms, all_idx, perms)
            out += left[:, sl] @ expansion
        out /= _multiplicity_factor(all_idx)[None, :]
        blocks[order] = (all_keys, out)
    return PolyMap(d, d, blocks)


# ---------------------------------------------------------------------------
# eigenvalue structure and dense helpers
# ---------------------------------------------------------------------------


def lambda_tilde_diag(lam_e: Sequence[complex], i: int) -> list[tuple[tuple[int, int], complex]]:
    """Diagonal of the collapsed ``Lambda_tilde_{E,i}``.

    For each key ``(a, b)`` with ``a + b = i`` (descending order) returns
    ``a * lam_e[0] + b * lam_e[1]``.
    """
    if i < 1:
        raise ValueError("order must be at least 1")
    l1, l2 = lam_e
    return [((i - j, j), (i - j) * l1 + j * l2) for j in range(i + 1)]


def kron_power(z: np.ndarray, i: int) -> np.ndarray:
    out = np.asarray(z)
    for _ in range(i - 1):
        out = np.kron(out, z)
    return out


def dense_kron_matrix(p: PolyMap, order: int) -> np.ndarray:
    """Dense ``(e, d**order)`` Kronecker coefficient matrix of one order.

    Each collapsed coefficient is spread evenly over the dense columns of its
    monomial, giving the symmetric representative.
    """
    d = p.in_dim
    dense = np.zeros((p.out_dim,) + (d,) * order, dtype=complex)
    keys, coeffs = p.block(order)
    idx = exponents_to_indices(keys) if keys.shape[0] else np.zeros((0, order), dtype=np.int64)
    for j, row in enumerate(idx):
        perms = set(itertools.permutations(row))
        for perm in perms:
            dense[(slice(None),) + perm] += coeffs[:, j] / len(perms)
    return dense.reshape(p.out_dim, d**order)


def collapse_dense(dense: np.ndarray, d: int, order: int) -> PolyMap:
    """Collapse a dense Kronecker coefficient matrix onto multiset keys."""
    e = dense.shape[0]
    tensor = dense.reshape((e,) + (d,) * order)
    all_keys = multisets(d, order)
    idx = exponents_to_indices(all_keys)
    out = np.zeros((e, idx.shape[0]), dtype=complex)
    for j, row in enumerate(idx):
        for perm in set(itertools.permutations(row)):
            out[:, j] += tensor[(slice(None),) + perm]
    return PolyMap(d, e, {order: (all_keys, out)})
