"""Small-dimension Hermitian matrix arithmetic and Pauli-basis (de)composition.

Everything here works on 2x2 (one spin) or 4x4 (two spins) complex matrices.
The two-spin basis is ordered (up-up, up-down, down-up, down-down), i.e. the
row index of the outcome pair (x, y) is (1 - x)/2 + (1 - y), which is the
ordinary Kronecker-product ordering with sigma^z eigenvalue +1 first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-9
JACOBI_TOL = 1e-12

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class DimensionError(ValueError):
    """Raised when a matrix has the wrong shape for the requested operation."""


class NotHermitianError(ValueError):
    pass


class TraceError(ValueError):
    pass


class MixedStateError(ValueError):
    """The density matrix is not (close enough to) a projector."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Immutable dense Hermitian matrix of dimension 2 or 4.

    Raw input is symmetrized as (H + H^dagger)/2 when its asymmetry is at
    most ``HERMITICITY_TOL``; anything larger is rejected.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] not in (2, 4):
            raise DimensionError(f"expected a 2x2 or 4x4 matrix, got shape {arr.shape}")
        asym = np.max(np.abs(arr - arr.conj().T))
        if asym > HERMITICITY_TOL:
            raise NotHermitianError(f"matrix is not Hermitian (max asymmetry {asym:.3g})")
        object.__setattr__(self, "entries", _freeze(0.5 * (arr + arr.conj().T)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def __matmul__(self, other: HermitianMatrix) -> np.ndarray:
        # products of Hermitian matrices are generally not Hermitian
        return self.entries @ _entries(other)

    def __add__(self, other: HermitianMatrix) -> HermitianMatrix:
        return HermitianMatrix(self.entries + _entries(other))

    def __sub__(self, other: HermitianMatrix) -> HermitianMatrix:
        return HermitianMatrix(self.entries - _entries(other))

    def __mul__(self, scalar: float) -> HermitianMatrix:
        return HermitianMatrix(self.entries * float(scalar))

    __rmul__ = __mul__

    def allclose(self, other: HermitianMatrix | np.ndarray, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.entries, _entries(other), rtol=0.0, atol=atol))

    def frobenius_distance(self, other: HermitianMatrix | np.ndarray) -> float:
        return float(np.linalg.norm(self.entries - _entries(other)))


def _entries(m: HermitianMatrix | np.ndarray) -> np.ndarray:
    return m.entries if isinstance(m, HermitianMatrix) else np.asarray(m, dtype=complex)


@dataclass(frozen=True)
class PauliCoefficients2:
    """H = c0 * 1 + c . sigma."""

    c0: float
    c: tuple[float, float, float]

    def matrix(self) -> HermitianMatrix:
        return pauli_matrix_2(self.c0, self.c)


@dataclass(frozen=True)
class PauliCoefficients4:
    """H = c0 1 + c1.sigma_1 (x) 1 + 1 (x) c2.sigma_2 + sum_ab c12[a][b] sigma_1^a (x) sigma_2^b."""

    c0: float
    c1: tuple[float, float, float]
    c2: tuple[float, float, float]
    c12: tuple[tuple[float, float, float], ...]

    def matrix(self) -> HermitianMatrix:
        return pauli_matrix_4(self.c0, self.c1, self.c2, self.c12)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit vector with the first nonzero amplitude real and non-negative."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=complex).ravel()
        norm = np.linalg.norm(amp)
        if norm == 0.0:
            raise ValueError("zero vector has no state representation")
        amp = amp / norm
        nz = np.flatnonzero(np.abs(amp) > 1e-12)
        phase = amp[nz[0]] / abs(amp[nz[0]])
        object.__setattr__(self, "amplitudes", _freeze(amp / phase))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> HermitianMatrix:
        return HermitianMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


def dot_sigma(v: Sequence[float]) -> np.ndarray:
    """Return v . sigma as a plain 2x2 array."""
    return v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z


def pauli_matrix_2(c0: float, c: Sequence[float]) -> HermitianMatrix:
    return HermitianMatrix(c0 * IDENTITY2 + dot_sigma(c))


def pauli_matrix_4(c0, c1, c2, c12) -> HermitianMatrix:
    out = c0 * np.eye(4, dtype=complex)
    out = out + np.kron(dot_sigma(c1), IDENTITY2) + np.kron(IDENTITY2, dot_sigma(c2))
    c12 = np.asarray(c12, dtype=float)
    for a in range(3):
        for b in range(3):
            out = out + c12[a, b] * np.kron(SIGMA[a], SIGMA[b])
    return HermitianMatrix(out)


def _require_dim(h: HermitianMatrix, dim: int) -> None:
    if h.dim != dim:
        raise DimensionError(f"expected a {dim}x{dim} matrix, got {h.dim}x{h.dim}")


def pauli_decompose_2(h: HermitianMatrix) -> PauliCoefficients2:
    _require_dim(h, 2)
    m = h.entries
    c0 = float(np.trace(m).real) / 2
    c = tuple(float(np.trace(m @ s).real) / 2 for s in SIGMA)
    return PauliCoefficients2(c0, c)


def pauli_decompose_4(h: HermitianMatrix) -> PauliCoefficients4:
    _require_dim(h, 4)
    m = h.entries

    def inner(basis: np.ndarray) -> float:
        # (A, B) = Tr(A^dagger B) / 4; every basis element is Hermitian
        return float(np.trace(basis @ m).real) / 4

    c0 = inner(np.eye(4))
    c1 = tuple(inner(np.kron(s, IDENTITY2)) for s in SIGMA)
    c2 = tuple(inner(np.kron(IDENTITY2, s)) for s in SIGMA)
    c12 = tuple(tuple(inner(np.kron(sa, sb)) for sb in SIGMA) for sa in SIGMA)
    return PauliCoefficients4(c0, c1, c2, c12)


def kron(a: HermitianMatrix, b: HermitianMatrix) -> HermitianMatrix:
    _require_dim(a, 2)
    _require_dim(b, 2)
    return HermitianMatrix(np.kron(a.entries, b.entries))


def _check_unit_trace(rho: HermitianMatrix) -> None:
    tr = np.trace(rho.entries)
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceError(f"density matrix must have unit trace, got {tr.real:.12g}")


def expectation(rho: HermitianMatrix, a: HermitianMatrix | np.ndarray) -> float:
    """Tr(rho A).

    ``a`` may be a plain array so that products such as X Y (Hermitian only
    when X and Y commute) can be passed through without re-validation.
    """
    a_arr = _entries(a)
    if a_arr.shape != rho.entries.shape:
        raise DimensionError(f"dimension mismatch: {rho.entries.shape} vs {a_arr.shape}")
    _check_unit_trace(rho)
    value = np.trace(rho.entries @ a_arr)
    if abs(value.imag) > TRACE_TOL:
        raise ValueError(f"expectation value is not real (imaginary part {value.imag:.3g})")
    return float(value.real)


def purity(rho: HermitianMatrix) -> float:
    _check_unit_trace(rho)
    return float(np.trace(rho.entries @ rho.entries).real)


def eigh(h: HermitianMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors (as columns) of ``h``."""
    if h.dim == 2:
        return _eigh2(h)
    return _eigh_jacobi(h.entries)


def _eigh2(h: HermitianMatrix) -> tuple[np.ndarray, np.ndarray]:
    coef = pauli_decompose_2(h)
    c = np.array(coef.c)
    r = float(np.linalg.norm(c))
    vals = np.array([coef.c0 + r, coef.c0 - r])
    if r < 1e-300:
        return vals, np.eye(2, dtype=complex)
    # Bloch-sphere angles of the unit vector c/r
    theta = np.arccos(np.clip(c[2] / r, -1.0, 1.0))
    phi = np.arctan2(c[1], c[0])
    up = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    down = np.array([-np.exp(-1j * phi) * np.sin(theta / 2), np.cos(theta / 2)])
    return vals, np.column_stack([up, down])


def _eigh_jacobi(m: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 100):
    a = np.array(m, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(a), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a - np.diag(np.diag(a))) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = a[p, q]
                mag = abs(g)
                if mag < 1e-300:
                    continue
                # phase the (p, q) element real, then a real rotation zeroes it
                w = np.eye(n, dtype=complex)
                w[q, q] = np.conj(g / mag)
                tau = (a[q, q].real - a[p, p].real) / (2 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1 + tau * tau))
                c = 1 / np.sqrt(1 + t * t)
                s = t * c
                r = np.eye(n, dtype=complex)
                r[p, p] = r[q, q] = c
                r[p, q] = s
                r[q, p] = -s
                u = w @ r
                a = u.conj().T @ a @ u
                v = v @ u
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    vals = np.diag(a).real
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]


def eigvalsh(h: HermitianMatrix) -> np.ndarray:
    return eigh(h)[0]


def extract_state(rho: HermitianMatrix, tol: float = 1e-6) -> StateVector:
    """Return |psi> with rho = |psi><psi|, for a (numerically) pure rho."""
    p = purity(rho)
    if p < 1 - tol:
        raise MixedStateError(
            f"mixed state has no state-vector representation (purity {p:.6g} < {1 - tol:.6g})"
        )
    vals, vecs = eigh(rho)
    k = int(np.argmin(np.abs(vals - 1.0)))
    return StateVector(vecs[:, k])


def density_from_bloch(r: Sequence[float]) -> HermitianMatrix:
    """(1 + r . sigma) / 2."""
    return pauli_matrix_2(0.5, 0.5 * np.asarray(r, dtype=float))


def singlet_density() -> HermitianMatrix:
    """(1 - sigma_1 . sigma_2) / 4."""
    return pauli_matrix_4(0.25, (0, 0, 0), (0, 0, 0), -0.25 * np.eye(3))


def side_operator(a: Sequence[float], side: int) -> HermitianMatrix:
    """a . sigma acting on spin 1 (``side=1``) or spin 2 (``side=2``) of a pair."""
    op = HermitianMatrix(dot_sigma(a))
    ident = HermitianMatrix(IDENTITY2)
    if side == 1:
        return kron(op, ident)
    if side == 2:
        return kron(ident, op)
    raise ValueError(f"side must be 1 or 2, got {side}")
