"""Modal decomposition, spectral quotients and resonance detection."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import ConfigError, DefectiveMatrix, UnstableSpectrum
from .model import FirstOrderSystem
from .poly import PolyMap, transform_linear

__all__ = [
    "ModalSystem",
    "ResonanceEntry",
    "ResonanceReport",
    "decompose",
    "spectral_quotients",
    "resonance_scan",
    "closeness",
    "mode_pairs",
    "eigen_label",
]

DEFECT_COND = 1e10
TIE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class ModalSystem:
    """Diagonalized first-order system ``q' = Lambda q + G(q)`` with ``x = T q``.

    Attributes
    ----------
    lambdas : (2n,) complex
        Eigenvalues, master pair first, the rest by decreasing real part.
    T, T_inv : (2n, 2n) complex
        Modal matrix (eigenvector columns in the order of ``lambdas``) and its
        inverse.
    G : PolyMap
        Nonlinearity in modal coordinates.
    master : tuple of int
        Positions of the master pair in the decreasing-real-part ordering.
    """

    lambdas: np.ndarray
    T: np.ndarray
    T_inv: np.ndarray
    G: PolyMap
    master: tuple[int, int]
    fos: FirstOrderSystem | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.lambdas.shape[0]

    @property
    def n(self) -> int:
        return self.dim // 2

    @property
    def lambda_E(self) -> np.ndarray:
        return self.lambdas[:2]

    @property
    def lambda_C(self) -> np.ndarray:
        return self.lambdas[2:]

    @property
    def underdamped(self) -> bool:
        l1, l2 = self.lambda_E
        return l1.imag > 0 and abs(l2 - np.conj(l1)) <= 1e-12 * abs(l1)


def mode_pairs(lambdas: np.ndarray) -> list[tuple[int, int]]:
    """Group eigenvalue positions (sorted by decreasing real part) into pairs.

    Complex eigenvalues are paired with their conjugate; real eigenvalues are
    paired with the next real one.
    """
    used = set()
    pairs = []
    reals = []
    for k, lam in enumerate(lambdas):
        if k in used:
            continue
        if lam.imag > 0:
            partner = None
            for j in range(len(lambdas)):
                if j not in used and j != k and abs(lambdas[j] - np.conj(lam)) <= 1e-8 * abs(lam):
                    partner = j
                    break
            if partner is None:
                raise DefectiveMatrix(f"eigenvalue {lam} has no conjugate partner")
            used.update((k, partner))
            pairs.append((k, partner))
        elif lam.imag == 0:
            reals.append(k)
            used.add(k)
            if len(reals) == 2:
                pairs.append(tuple(reals))
                reals = []
    if reals:
        pairs.append((reals[0], reals[0]))
    return sorted(pairs, key=lambda p: (-lambdas[p[0]].real, p[0]))


def eigen_label(lambdas: np.ndarray, index: int) -> str:
    """Mode-pair name of ``lambdas[index]`` in a modal ordering.

    Pairs are numbered from 1 in order of appearance; a complex pair is
    ``lambda_k`` and ``conj(lambda_k)``, a real eigenvalue is ``lambda_k``
    by itself.
    """
    k = 0
    seen = set()
    for j, lam in enumerate(lambdas):
        if j in seen:
            continue
        k += 1
        partner = None
        if lam.imag != 0:
            for jj in range(j + 1, len(lambdas)):
                if jj not in seen and abs(lambdas[jj] - np.conj(lam)) <= 1e-8 * abs(lam):
                    partner = jj
                    break
        seen.add(j)
        if partner is not None:
            seen.add(partner)
        if index == j:
            return f"lambda_{k}" if lam.imag >= 0 else f"conj(lambda_{k})"
        if index == partner:
            return f"conj(lambda_{k})" if lam.imag > 0 else f"lambda_{k}"
    raise IndexError(index)


def _sorted_eig(A):
    lam, V = scipy.linalg.eig(A)
    # clean conjugate structure: snap tiny imaginary parts of real modes
    tiny = np.abs(lam.imag) <= 1e-12 * np.maximum(np.abs(lam), 1.0)
    lam = np.where(tiny, lam.real + 0j, lam)
    V[:, tiny] = V[:, tiny].real
    order = sorted(range(lam.size), key=lambda k: (-round(lam[k].real, 12), -lam[k].imag))
    return lam[order], V[:, order]


def _normalize(v: np.ndarray, n: int) -> np.ndarray:
    pos = np.abs(v[:n])
    top = pos.max()
    k = int(np.flatnonzero(pos >= top * (1 - TIE_RTOL))[0])
    return v / v[k]


def decompose(fos: FirstOrderSystem, master="slowest", master_scale: float = 1.0) -> ModalSystem:
    """Diagonalize ``A`` and move the master pair to the front.

    Parameters
    ----------
    fos : FirstOrderSystem
    master : "slowest", int or pair of int
        ``"slowest"`` picks the pair with the largest real part.  An integer
        ``k`` picks the ``k``-th pair (1-based) in the decreasing-real-part
        ordering.  A pair gives explicit positions in that ordering.
    master_scale : float
        Factor applied to both master eigenvectors after the default
        normalization (largest position entry equal to one).  Rescaling the
        master pair rescales the amplitude ``rho`` of the reduced dynamics.

    Raises
    ------
    UnstableSpectrum
        If any eigenvalue has a real part ``>= -1e-12 ||A||``.
    DefectiveMatrix
        If the normalized eigenvector matrix has condition number above 1e10.
    """
    A = fos.A
    n = A.shape[0] // 2
    normA = np.linalg.norm(A, 2)
    lam, V = _sorted_eig(A)
    if np.any(lam.real >= -1e-12 * normA):
        worst = lam[np.argmax(lam.real)]
        raise UnstableSpectrum(f"eigenvalue {worst:.6g} is not in the open left half plane")
    Vn = V / np.linalg.norm(V, axis=0)
    cond = np.linalg.cond(Vn)
    if not np.isfinite(cond) or cond > DEFECT_COND:
        raise DefectiveMatrix(f"eigenvector matrix is nearly singular (cond = {cond:.3e})")

    pairs = mode_pairs(lam)
    if isinstance(master, str):
        if master != "slowest":
            raise ConfigError(f"unknown master mode selector {master!r}")
        sel = pairs[0]
    elif np.ndim(master) == 0:
        k = int(master)
        if not 1 <= k <= len(pairs):
            raise ConfigError(f"master pair index {k} outside 1..{len(pairs)}")
        sel = pairs[k - 1]
    else:
        sel = tuple(int(j) for j in master)
        if len(sel) != 2 or not all(0 <= j < lam.size for j in sel) or sel[0] == sel[1]:
            raise ConfigError(f"invalid master positions {master!r}")
    rest = [k for k in range(lam.size) if k not in sel]
    order = list(sel) + rest

    lam = lam[order]
    cols = [_normalize(V[:, k], n) for k in order]
    # conjugate partners share one normalized vector
    for j in range(lam.size):
        if lam[j].imag < 0:
            for i in range(lam.size):
                if lam[i].imag > 0 and abs(lam[i] - np.conj(lam[j])) <= 1e-8 * abs(lam[j]):
                    lam[j] = np.conj(lam[i])
                    cols[j] = np.conj(cols[i])
                    break
    if not master_scale > 0:
        raise ConfigError("master_scale must be positive")
    cols[0] = cols[0] * master_scale
    cols[1] = cols[1] * master_scale
    T = np.column_stack(cols)
    T_inv = np.linalg.inv(T)
    G = transform_linear(fos.F, T)
    lam.setflags(write=False)
    return ModalSystem(lam, T, T_inv, G, tuple(sel), fos)


def spectral_quotients(ms: ModalSystem) -> dict[str, int]:
    """Integer parts of the decay-rate ratios ``sigma_out`` and ``sigma_in``.

    A relative slack of 1e-9 absorbs rounding in ratios that are integers in
    exact arithmetic.
    """
    re_e = ms.lambda_E.real
    ratio_in = re_e.min() / re_e.max()
    sigma_in = math.floor(ratio_in * (1 + 1e-9))
    if ms.lambda_C.size:
        ratio_out = ms.lambda_C.real.min() / re_e.max()
        sigma_out = math.floor(ratio_out * (1 + 1e-9))
    else:
        sigma_out = 0
    return {"sigma_out": int(sigma_out), "sigma_in": int(sigma_in)}


def closeness(a: int, b: int, lam_e, lam_l) -> float:
    """Cosine-type resonance measure in ``[0, 1]``.

    ``|<c, v>| / (||c|| ||v||)`` with ``c = (a, b, -1)`` and
    ``v = (lambda_j1, lambda_j2, lambda_l)``.
    """
    c = np.array([a, b, -1.0])
    v = np.array([lam_e[0], lam_e[1], lam_l], dtype=complex)
    return float(abs(c @ v) / (np.linalg.norm(c) * np.linalg.norm(v)))


@dataclass(frozen=True)
class ResonanceEntry:
    a: int
    b: int
    index: int
    lambda_l: complex
    kind: str
    I: float

    @property
    def order(self) -> int:
        return self.a + self.b

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "order": self.order,
            "index": self.index + 1,
            "lambda_l": [float(self.lambda_l.real), float(self.lambda_l.imag)],
            "kind": self.kind,
            "I": self.I,
        }


@dataclass(frozen=True)
class ResonanceReport:
    entries: tuple[ResonanceEntry, ...]
    delta: float
    max_order: int

    def inner(self):
        return [e for e in self.entries if e.kind == "inner"]

    def outer(self):
        return [e for e in self.entries if e.kind == "outer"]

    def inner_slots(self) -> set[tuple[int, tuple[int, int]]]:
        """``(row, (a, b))`` slots of ``R`` that near-inner resonances occupy."""
        return {(e.index, (e.a, e.b)) for e in self.entries if e.kind == "inner"}

    def as_dicts(self) -> list[dict]:
        return [e.as_dict() for e in self.entries]


def resonance_scan(ms: ModalSystem, delta: float = 0.05, max_order: int = 15) -> ResonanceReport:
    """List every ``(a, b, lambda_l)`` with closeness below ``delta``.

    Monomials of degree ``2..max_order`` are tested against all eigenvalues;
    hits on the master pair are inner resonances, the rest outer ones.
    """
    if not delta > 0:
        raise ConfigError("delta must be positive")
    if delta >= 0.1:
        warnings.warn(
            f"delta = {delta} is not small compared with the maximal closeness 1",
            stacklevel=2,
        )
    lam_e = ms.lambda_E
    c_norm_sq = None
    entries = []
    lam = ms.lambdas
    v_norm_e = abs(lam_e[0]) ** 2 + abs(lam_e[1]) ** 2
    for order in range(2, max_order + 1):
        a = np.arange(order, -1, -1)
        b = order - a
        c_norm_sq = a**2 + b**2 + 1.0
        combo = a * lam_e[0] + b * lam_e[1]
        for idx, lam_l in enumerate(lam):
            vals = np.abs(combo - lam_l) / np.sqrt(c_norm_sq * (v_norm_e + abs(lam_l) ** 2))
            for j in np.flatnonzero(vals < delta):
                entries.append(
                    ResonanceEntry(
                        int(a[j]),
                        int(b[j]),
                        idx,
                        complex(lam_l),
                        "inner" if idx < 2 else "outer",
                        float(vals[j]),
                    )
                )
    return ResonanceReport(tuple(entries), float(delta), int(max_order))
