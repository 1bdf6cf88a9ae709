"""Order-by-order computation of two-dimensional spectral submanifolds.

The embedding ``W`` and reduced dynamics ``R`` satisfy

    Lambda W(z) + G(W(z)) = DW(z) R(z)

with ``W_1 = [I; 0]`` and ``R_1 = Lambda_E``.  Collecting degree-``i``
terms, every coefficient of ``W_i`` obeys a scalar equation

    (lambda_l - a lambda_1 - b lambda_2) W_i[l, (a, b)] = R_i[l, (a, b)] + B_i[l, (a, b)]

so the Sylvester systems are solved by entry-wise division.  Internally a
degree-``i`` block of a map in ``(z1, z2)`` is a dense ``(rows, i + 1)``
array whose column ``j`` belongs to the key ``(i - j, j)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._series import SeriesComposer, d_dz1, d_dz2, eval_blocks, hconv, jacobian_blocks
from .exceptions import ConfigError, MissingLowerOrder, OuterResonanceBreakdown
from .poly import PolyMap
from .spectral import ModalSystem, ResonanceReport, eigen_label, resonance_scan, spectral_quotients

__all__ = [
    "SSMExpansion",
    "MemoryEstimate",
    "assemble_B",
    "solve_order",
    "compute_ssm",
    "memory_estimate",
    "compositions_count",
    "MAX_ORDER",
]

MAX_ORDER = 25
# |d| below this fraction of |lambda_l| counts as an exact resonance
EXACT_RES_RTOL = 1e-10


def _blocks_to_polymap(blocks: dict[int, np.ndarray], rows: int) -> PolyMap:
    out = {}
    for i, c in blocks.items():
        keys = np.column_stack([np.arange(i, -1, -1), np.arange(i + 1)])
        out[i] = (keys, c)
    return PolyMap(2, rows, out)


def _polymap_to_blocks(p: PolyMap, max_order: int | None = None) -> dict[int, np.ndarray]:
    out = {}
    top = p.max_order if max_order is None else max_order
    for i in range(1, top + 1):
        keys, coeffs = p.block(i)
        blk = np.zeros((p.out_dim, i + 1), dtype=complex)
        if keys.shape[0]:
            blk[:, keys[:, 1]] = coeffs
        out[i] = blk
    return out


@dataclass(eq=False)
class SSMExpansion:
    """Coefficients of ``W`` and ``R`` up to order ``n_w``.

    Attributes
    ----------
    order : int
        Expansion order ``n_w``.
    W_blocks, R_blocks : dict int -> ndarray
        Dense two-variable blocks; ``W_blocks[i]`` is ``(2n, i + 1)`` and
        ``R_blocks[i]`` is ``(2, i + 1)``.
    resonant_keys : dict int -> list of (row, (a, b))
        Slots moved into ``R`` at each order.
    modal : ModalSystem
    report : ResonanceReport
    delta : float
    """

    order: int
    W_blocks: dict[int, np.ndarray]
    R_blocks: dict[int, np.ndarray]
    resonant_keys: dict[int, list[tuple[int, tuple[int, int]]]]
    modal: ModalSystem
    report: ResonanceReport
    delta: float
    metadata: dict = field(default_factory=dict)

    @property
    def W(self) -> PolyMap:
        return _blocks_to_polymap(self.W_blocks, self.modal.dim)

    @property
    def R(self) -> PolyMap:
        return _blocks_to_polymap(self.R_blocks, 2)

    def truncate(self, order: int) -> "SSMExpansion":
        """Lower-order expansion sharing the same coefficients.

        Orders are solved sequentially, so the first ``order`` blocks of an
        expansion are exactly the expansion to ``order``.
        """
        if order > self.order:
            raise ValueError(f"cannot extend order {self.order} to {order} by truncation")
        keep = lambda d: {i: c for i, c in d.items() if i <= order}  # noqa: E731
        res = {i: v for i, v in self.resonant_keys.items() if i <= order}
        return SSMExpansion(
            order, keep(self.W_blocks), keep(self.R_blocks), res, self.modal, self.report,
            self.delta, dict(self.metadata, order=order),
        )

    # evaluation -------------------------------------------------------
    def eval_W(self, z) -> np.ndarray:
        """Modal coordinates ``q = W(z)`` at points ``z`` (N, 2) or (2,)."""
        z = np.asarray(z, dtype=complex)
        out = eval_blocks(self.W_blocks, np.atleast_2d(z))
        return out[0] if z.ndim == 1 else out

    def eval_R(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = eval_blocks(self.R_blocks, np.atleast_2d(z))
        return out[0] if z.ndim == 1 else out

    def jacobian_W(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = jacobian_blocks(self.W_blocks, np.atleast_2d(z))
        return out[0] if z.ndim == 1 else out

    def physical(self, z, check: bool = True) -> np.ndarray:
        """Physical state ``x = T W(z)``, real part, for conjugate inputs."""
        z = np.asarray(z, dtype=complex)
        q = eval_blocks(self.W_blocks, np.atleast_2d(z))
        x = q @ self.modal.T.T
        if check:
            from .exceptions import NonNegligibleImaginaryPart

            scale = np.abs(x).max()
            if scale > 0 and np.abs(x.imag).max() > 1e-8 * scale:
                raise NonNegligibleImaginaryPart(
                    f"physical state has imaginary part {np.abs(x.imag).max():.3e} "
                    f"(scale {scale:.3e})"
                )
        x = x.real
        return x[0] if z.ndim == 1 else x

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "delta": self.delta,
            "W": self.W.to_dict(),
            "R": self.R.to_dict(),
            "resonant_keys": {
                str(i): [[row + 1, f"{a},{b}"] for row, (a, b) in v]
                for i, v in sorted(self.resonant_keys.items())
            },
        }


def assemble_B(
    i: int,
    W: dict[int, np.ndarray],
    R: dict[int, np.ndarray],
    G: PolyMap | None = None,
    composer: SeriesComposer | None = None,
) -> np.ndarray:
    """Right-hand side ``B_i`` of the order-``i`` equations, ``(2n, i + 1)``.

    ``B_i = sum_{m=2}^{i-1} [DW_m R_{i+1-m}] - [G(W_{<i})]_i``.  Pass a
    ``composer`` that already holds ``W_1 .. W_{i-1}`` to reuse cached
    products across orders; otherwise one is built from ``G``.
    """
    for m in range(1, i):
        if m not in W or m not in R:
            raise MissingLowerOrder(f"order {m} of W or R is missing while assembling order {i}")
    if composer is None:
        if G is None:
            raise ValueError("assemble_B needs G or a composer")
        composer = SeriesComposer(G)
        for m in range(1, i):
            composer.push(m, W[m])
    rows = W[1].shape[0]
    B = np.zeros((rows, i + 1), dtype=complex)
    for m in range(2, i):
        Rk = R[i + 1 - m]
        if not np.any(Rk):
            continue
        B += hconv(d_dz1(W[m]), Rk[0:1]) + hconv(d_dz2(W[m]), Rk[1:2])
    B -= composer.compose(i)
    return B


def solve_order(
    i: int,
    B: np.ndarray,
    lambdas: np.ndarray,
    resonant: set[tuple[int, tuple[int, int]]] = frozenset(),
) -> tuple[np.ndarray, np.ndarray, list]:
    """Solve the order-``i`` cohomological equations entry by entry.

    Parameters
    ----------
    B : (2n, i + 1) complex
        Output of :func:`assemble_B`.
    lambdas : (2n,) complex
        Eigenvalues, master pair first.
    resonant : set of (row, (a, b))
        Near-inner resonant slots of the master rows.  Exactly resonant
        master-row slots are added automatically.

    Returns
    -------
    W_i : (2n, i + 1) complex
    R_i : (2, i + 1) complex
    slots : list of (row, (a, b))
        Slots moved into ``R_i``.

    Raises
    ------
    OuterResonanceBreakdown
        If a denominator on a non-master row vanishes while its source does not.
    """
    a = np.arange(i, -1, -1)
    b = i - a
    combo = a * lambdas[0] + b * lambdas[1]
    d = lambdas[:, None] - combo[None, :]
    exact = np.abs(d) < EXACT_RES_RTOL * np.abs(lambdas)[:, None]
    scale = max(np.abs(B).max(), 1.0)
    nonzero = np.abs(B) > 1e-14 * scale

    bad = exact[2:] & nonzero[2:]
    if np.any(bad):
        r, j = np.argwhere(bad)[0]
        raise OuterResonanceBreakdown(
            int(a[j]), int(b[j]), complex(lambdas[r + 2]), int(r + 2), i,
            eigen_label(lambdas, int(r + 2)),
        )

    Wi = np.zeros_like(B)
    Ri = np.zeros((2, i + 1), dtype=complex)
    flag = np.zeros((2, i + 1), dtype=bool)
    for row, (ka, kb) in resonant:
        if row < 2 and ka + kb == i:
            flag[row, kb] = True
    flag |= exact[:2]
    slots = [(int(r), (int(a[j]), int(b[j]))) for r, j in np.argwhere(flag)]
    Ri[flag] = -B[:2][flag]
    safe = ~np.vstack([flag, exact[2:]])
    Wi[safe] = B[safe] / d[safe]
    return Wi, Ri, slots


@dataclass(frozen=True)
class MemoryEstimate:
    n: int
    order: int
    bytes_per_order: tuple[float, ...]
    orders: tuple[int, ...]

    @property
    def total_bytes(self) -> float:
        return float(self.bytes_per_order[-1]) if self.bytes_per_order else 0.0

    @property
    def terabytes(self) -> float:
        return self.total_bytes / 1e12


def compositions_count(m: int, i: int) -> int:
    """Number of ordered ways to write ``i`` as a sum of ``m`` positive integers."""
    if m < 1 or i < m:
        return 0
    return math.comb(i - 1, m - 1)


def _memory_bytes(n: int, i: int, present: set[int]) -> int:
    dn = 2 * n
    total = 0
    for m in range(2, i):
        total += dn * 2**m + 2 ** (m + i) * m
        if m in present:
            total += dn ** (m + 1) + dn**m * 2**i * compositions_count(m, i)
    return 8 * total


def memory_estimate(n: int, i: int, present_G_orders=None) -> MemoryEstimate:
    """Dense-storage memory of the two costliest sums of the order-``i`` step.

    Counts 8 bytes per double for the ``W R`` sum and the ``G W`` sum.  Terms
    that involve ``G_m`` only enter for ``m`` in ``present_G_orders``
    (all orders when ``None``).  ``bytes_per_order`` lists the value for each
    order from 3 to ``i``; ``total_bytes`` is the value at ``i``.
    """
    if i < 3:
        raise ConfigError("memory estimate needs order >= 3")
    present = set(range(2, i)) if present_G_orders is None else {int(m) for m in present_G_orders}
    orders = tuple(range(3, i + 1))
    vals = tuple(float(_memory_bytes(n, k, present)) for k in orders)
    return MemoryEstimate(int(n), int(i), vals, orders)


def _collapsed_bytes(ms: ModalSystem, n_w: int) -> int:
    # W blocks plus cached composition nodes, 16 bytes per complex entry
    nodes = sum(ms.G.indices(m).shape[0] * (m - 1) for m in ms.G.orders)
    per_order = (ms.dim + nodes + 2) * np.arange(2, n_w + 2)
    return int(16 * per_order.sum() * max(1, len(ms.G.orders)))


def compute_ssm(
    ms: ModalSystem,
    n_w: int,
    delta: float = 0.05,
    report: ResonanceReport | None = None,
    memory_limit: float = 16e9,
) -> SSMExpansion:
    """Compute ``W`` and ``R`` of the SSM tangent to the master pair of ``ms``.

    Parameters
    ----------
    ms : ModalSystem
    n_w : int
        Expansion order, at most 25.
    delta : float
        Threshold on the closeness measure below which a master-row term is
        treated as resonant and kept in ``R``.
    report : ResonanceReport, optional
        Precomputed scan; computed from ``delta`` when omitted.

    Raises
    ------
    OuterResonanceBreakdown
        On an exact outer resonance with a non-vanishing source term.
    """
    n_w = int(n_w)
    if not 1 <= n_w <= MAX_ORDER:
        raise ConfigError(f"expansion order must lie in 1..{MAX_ORDER}, got {n_w}")
    need = _collapsed_bytes(ms, n_w)
    if need > memory_limit:
        raise ConfigError(f"order {n_w} needs about {need / 1e9:.1f} GB, above the limit")
    quot = spectral_quotients(ms)
    if n_w < quot["sigma_out"] + 1:
        warnings.warn(
            f"order {n_w} is below sigma_out + 1 = {quot['sigma_out'] + 1}; the expansion "
            "is not guaranteed to approximate the unique smoothest manifold",
            stacklevel=2,
        )
    if report is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = resonance_scan(ms, delta, max(n_w, 2))
    resonant = report.inner_slots()

    dim = ms.dim
    W = {1: np.zeros((dim, 2), dtype=complex)}
    W[1][0, 0] = 1.0
    W[1][1, 1] = 1.0
    R = {1: np.diag(ms.lambda_E).astype(complex)}
    composer = SeriesComposer(ms.G)
    composer.push(1, W[1])
    slots_by_order = {}
    for i in range(2, n_w + 1):
        B = assemble_B(i, W, R, composer=composer)
        W[i], R[i], slots = solve_order(i, B, ms.lambdas, resonant)
        composer.push(i, W[i])
        if slots:
            slots_by_order[i] = slots
    meta = {"order": n_w, "delta": float(delta), **quot}
    return SSMExpansion(n_w, W, R, slots_by_order, ms, report, float(delta), meta)
