"""Dense linear algebra kernels over real and complex scalars.

Everything here is a pure function: inputs are never mutated and outputs
are freshly allocated, so values can be shared freely between threads.
Matrices are plain 2-D numpy arrays in float64 (real field) or complex128
(complex field); numpy/LAPACK do the heavy lifting behind the contracts
below.
"""

from __future__ import annotations

import enum
import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve


class Field(enum.Enum):
    """Scalar field of a matrix: real (float64) or complex (complex128)."""

    REAL = "real"
    COMPLEX = "complex"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.complex128 if self is Field.COMPLEX else np.float64)

    @staticmethod
    def of(a: np.ndarray) -> "Field":
        return Field.COMPLEX if np.iscomplexobj(a) else Field.REAL


class SingularMatrixError(Exception):
    """The system matrix is singular to working precision."""


class RankDeficientError(Exception):
    """The matrix does not have full column rank to working precision."""


def as_matrix(a, field: Field | None = None) -> np.ndarray:
    """Coerce to a 2-D array of the requested (or inferred) field."""
    f = field if field is not None else Field.of(np.asarray(a))
    m = np.array(a, dtype=f.dtype, order="C")
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product C = A B."""
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects 2-D matrices")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    if np.iscomplexobj(a) != np.iscomplexobj(b):
        raise ValueError("matmul operands must share one scalar field")
    return a @ b


def conj_transpose(a: np.ndarray) -> np.ndarray:
    """Conjugate (Hermitian) transpose; plain transpose for real input."""
    return np.asarray(a).conj().T.copy()


def frobenius_norm(a: np.ndarray) -> float:
    """sqrt of the sum of squared magnitudes of all entries."""
    return float(np.linalg.norm(np.asarray(a)))


def solve_tolerance(n: int) -> float:
    """Residual tolerance for an n x n solve: 1e3 * machine eps * n."""
    return 1e3 * np.finfo(np.float64).eps * n


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B by LU with partial pivoting.

    Raises SingularMatrixError when a pivot is negligible relative to the
    largest one; A is never inverted explicitly.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} vs rhs {b.shape}")
    n = a.shape[0]
    dtype = np.result_type(a.dtype, b.dtype, np.float64)
    with warnings.catch_warnings():
        # singularity is detected from the pivots below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(a.astype(dtype, copy=False))
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= solve_tolerance(n) * max(pivots.max(), 1e-300):
        raise SingularMatrixError(f"pivot ratio {pivots.min():.3e}/{pivots.max():.3e}")
    return lu_solve((lu, piv), b.astype(dtype, copy=False))


def qr_decompose(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder QR with the R diagonal made strictly positive real.

    The sign (phase, in the complex case) of each R diagonal entry is
    absorbed into the corresponding Q column, which makes the
    factorization unique and reproducible.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError(f"expected n >= p, got shape {a.shape}")
    q, r = np.linalg.qr(a)
    d = np.diag(r).copy()
    mags = np.abs(d)
    if mags.min() <= solve_tolerance(a.shape[0]) * max(frobenius_norm(a), 1e-300):
        raise RankDeficientError(f"column rank deficient: |R_jj| down to {mags.min():.3e}")
    phase = d / mags
    q = q * phase[np.newaxis, :]
    r = r * np.conj(phase)[:, np.newaxis]
    return q, r


# SplitMix64 constants (Steele, Lea & Flood 2014).
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-based deterministic random stream (SplitMix64 core).

    Word i of stream `seed` is mix64(seed + (i+1)*gamma), a pure function
    of (seed, i), so the integer stream is identical on every platform.
    Gaussian variates are produced from it by Box-Muller.
    """

    def __init__(self, seed: int):
        self.seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self.counter = np.uint64(0)

    def _raw(self, count: int) -> np.ndarray:
        idx = np.arange(1, count + 1, dtype=np.uint64) + self.counter
        self.counter = self.counter + np.uint64(count)
        with np.errstate(over="ignore"):
            return _mix64(self.seed + idx * _GAMMA)

    def split(self) -> "Rng":
        """Derive an independent child stream; advances this stream by one."""
        return Rng(int(self._raw(1)[0] ^ _MIX2))

    def uniform(self, count: int) -> np.ndarray:
        """count doubles in [0, 1) with 53-bit resolution."""
        return (self._raw(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def standard_normal(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        # u1 in (0, 1] so the log is finite
        u1 = 1.0 - self.uniform(pairs)
        u2 = self.uniform(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([radius * np.cos(2.0 * np.pi * u2),
                            radius * np.sin(2.0 * np.pi * u2)])
        return z[:count]

    def integers(self, low: int, high: int, count: int) -> np.ndarray:
        """count ints uniform on [low, high); modulo bias is negligible at 64 bits."""
        span = np.uint64(high - low)
        return (self._raw(count) % span).astype(np.int64) + low


def gaussian_matrix(rng: Rng, n: int, p: int, field: Field = Field.REAL) -> np.ndarray:
    """n x p matrix of i.i.d. standard normal entries.

    Complex entries get independent N(0,1) real and imaginary parts.
    Advances rng deterministically.
    """
    if n < 1 or p < 1:
        raise ValueError(f"matrix dimensions must be positive, got {n}x{p}")
    if field is Field.COMPLEX:
        z = rng.standard_normal(2 * n * p)
        return (z[: n * p] + 1j * z[n * p :]).reshape(n, p)
    return rng.standard_normal(n * p).reshape(n, p)
