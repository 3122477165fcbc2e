"""Stiefel manifold primitives: tangent projection and Cayley retractions.

The manifold St(n, p) is the set of n x p matrices with orthonormal
columns, X^H X = I_p. A skew (skew-Hermitian) operator W generates the
retraction curve

    Y(alpha) = (I - alpha/2 W)^{-1} (I + alpha/2 W) X,

which stays on the manifold exactly, and is approximated here by the
fixed-point iteration Y^i = X + (alpha/2) W (X + Y^{i-1}), a contraction
whenever alpha ||W|| / 2 < 1.

Everything is column-orthonormal internally; row-orthonormal weights from
the problems layer go through a transpose adapter before arriving here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import Field, Rng, RankDeficientError, frobenius_norm, gaussian_matrix, \
    qr_decompose, solve_linear, solve_tolerance

DEFAULT_ORTHO_TOL = 1e-6


def orthonormality_error(x: np.ndarray) -> float:
    """|| X^H X - I ||_F, the drift diagnostic."""
    x = np.asarray(x)
    p = x.shape[1]
    return frobenius_norm(x.conj().T @ x - np.eye(p))


@dataclass(frozen=True)
class StiefelPoint:
    """A point on St(n, p): column-orthonormal to within ortho_tol.

    Construction validates the invariant; matrices that have drifted
    further than ortho_tol must go through reorthonormalize first.
    """

    mat: np.ndarray
    ortho_tol: float = DEFAULT_ORTHO_TOL

    def __post_init__(self):
        m = np.asarray(self.mat)
        if m.ndim != 2 or m.shape[0] < m.shape[1]:
            raise ValueError(f"expected n >= p, got shape {m.shape}")
        err = orthonormality_error(m)
        if not err <= self.ortho_tol:
            raise ValueError(
                f"matrix is off the manifold: ||X^H X - I|| = {err:.3e} > {self.ortho_tol:.1e}"
            )
        object.__setattr__(self, "mat", m)

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    @property
    def p(self) -> int:
        return self.mat.shape[1]

    @property
    def field(self) -> Field:
        return Field.of(self.mat)


@dataclass(frozen=True)
class SkewOperator:
    """An n x n operator with W^H = -W, generator of the Cayley curve."""

    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"skew operator must be square, got {m.shape}")
        res = frobenius_norm(m + m.conj().T)
        if not res <= 1e-10 * max(1.0, frobenius_norm(m)):
            raise ValueError(f"operator is not skew: ||W + W^H|| = {res:.3e}")
        object.__setattr__(self, "mat", m)

    @property
    def norm(self) -> float:
        return frobenius_norm(self.mat)


@dataclass(frozen=True)
class TangentVector:
    """A tangent direction at a point: Z^H X + X^H Z = 0."""

    at: StiefelPoint
    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat)
        if m.shape != self.at.mat.shape:
            raise ValueError(f"tangent shape {m.shape} does not match point {self.at.mat.shape}")
        x = self.at.mat
        res = frobenius_norm(m.conj().T @ x + x.conj().T @ m)
        if not res <= 1e-8 * max(1.0, frobenius_norm(m)):
            raise ValueError(f"vector is not tangent: residual {res:.3e}")
        object.__setattr__(self, "mat", m)


def _skew_raw(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    xh = x.conj().T
    what = z @ xh - 0.5 * (x @ (xh @ z @ xh))
    return what - what.conj().T


def build_skew(x: StiefelPoint, z: np.ndarray) -> SkewOperator:
    """W = What - What^H with What = Z X^H - (1/2) X (X^H Z X^H).

    The construction forces skewness, so the returned operator satisfies
    the SkewOperator invariant for any n x p input Z.
    """
    z = np.asarray(z)
    if z.shape != x.mat.shape:
        raise ValueError(f"expected Z of shape {x.mat.shape}, got {z.shape}")
    return SkewOperator(_skew_raw(x.mat, z))


def tangent_project(x: StiefelPoint, z: np.ndarray) -> TangentVector:
    """Project an ambient n x p matrix onto the tangent space at X.

    Returns W X for W = build_skew(X, Z); algebraically this equals
    Z - X (X^H Z + Z^H X) / 2 when X is orthonormal.
    """
    w = build_skew(x, z)
    return TangentVector(at=x, mat=w.mat @ x.mat)


def _cayley_closed_raw(x: np.ndarray, w: np.ndarray, alpha: float) -> np.ndarray:
    n = w.shape[0]
    eye = np.eye(n, dtype=w.dtype)
    b = (alpha / 2.0) * w
    return solve_linear(eye - b, x + b @ x)


def cayley_closed(x: StiefelPoint, w: SkewOperator, alpha: float) -> StiefelPoint:
    """Closed-form Cayley retraction Y(alpha) = (I - a/2 W)^{-1}(I + a/2 W) X.

    The curve preserves orthonormality exactly (the Cayley transform of a
    skew operator is orthogonal/unitary), so the output error stays at the
    solve tolerance. Y(0) is X itself, returned without arithmetic.
    """
    if w.mat.shape[0] != x.n:
        raise ValueError(f"skew operator {w.mat.shape} does not match point n={x.n}")
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    if alpha == 0.0:
        return x
    y = _cayley_closed_raw(x.mat, w.mat, alpha)
    return StiefelPoint(y, ortho_tol=max(x.ortho_tol, solve_tolerance(x.n)))


def _cayley_iter_raw(x: np.ndarray, w: np.ndarray, alpha: float, s: int,
                     y0: np.ndarray) -> np.ndarray:
    y = y0
    half = alpha / 2.0
    for _ in range(s):
        y = x + half * (w @ (x + y))
    return y


def cayley_iterative(x: StiefelPoint, w: SkewOperator, alpha: float, s: int,
                     y0: np.ndarray) -> np.ndarray:
    """s steps of the fixed-point iteration Y^i = X + (a/2) W (X + Y^{i-1}).

    Converges to cayley_closed(x, w, alpha) at rate alpha ||W|| / 2; the
    caller is responsible for keeping that product below 1 (adaptive_alpha
    does). Y0 is supplied explicitly: the momentum optimizers seed it with
    X + alpha M (or X - alpha M for the sign-flipped variant), which makes
    the iterate accurate to o(alpha^{2+s}).
    """
    y0 = np.asarray(y0)
    if y0.shape != x.mat.shape:
        raise ValueError(f"Y0 shape {y0.shape} does not match point {x.mat.shape}")
    if s < 0:
        raise ValueError("iteration count must be nonnegative")
    return _cayley_iter_raw(x.mat, w.mat, alpha, s, y0)


def adaptive_alpha(l: float, w: SkewOperator, q: float = 0.5, eps: float = 1e-8) -> float:
    """Contraction-safe step length: min(l, 2q / (||W||_F + eps)).

    Guarantees alpha ||W||_F / 2 <= q; with q < 1 the fixed-point
    iteration is a contraction. The Frobenius norm upper-bounds the
    spectral norm, so the guarantee is conservative.
    """
    if l <= 0:
        raise ValueError("learning rate must be positive")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return min(l, 2.0 * q / (w.norm + eps))


def random_point(rng: Rng, n: int, p: int, field: Field = Field.REAL,
                 ortho_tol: float = DEFAULT_ORTHO_TOL) -> StiefelPoint:
    """Uniform-ish random point: Q factor of a Gaussian matrix."""
    if n < p:
        raise ValueError(f"expected n >= p, got {n} < {p}")
    last = None
    for _ in range(3):
        try:
            q, _ = qr_decompose(gaussian_matrix(rng, n, p, field))
            return StiefelPoint(q, ortho_tol=ortho_tol)
        except RankDeficientError as exc:  # pragma: no cover - p(fail) ~ 0
            last = exc
    raise last  # pragma: no cover


def reorthonormalize(x: np.ndarray, ortho_tol: float = DEFAULT_ORTHO_TOL) -> StiefelPoint:
    """Repair a drifted matrix by replacing it with its QR orthonormal factor."""
    q, _ = qr_decompose(np.asarray(x))
    return StiefelPoint(q, ortho_tol=ortho_tol)


def retraction_check(x: StiefelPoint, w: SkewOperator,
                     h: float = 1e-5) -> tuple[float, float]:
    """Measure the two retraction conditions at (X, W).

    c0 = ||Y(0) - X||, which must vanish, and c1 = the finite-difference
    residual ||(Y(h) - X)/h - W X||, which must scale linearly in h
    (first-order agreement of the curve with its initial velocity W X).
    """
    c0 = frobenius_norm(cayley_closed(x, w, 0.0).mat - x.mat)
    yh = _cayley_closed_raw(x.mat, w.mat, h)
    c1 = frobenius_norm((yh - x.mat) / h - w.mat @ x.mat)
    return c0, c1


def spectral_norm_estimate(w: np.ndarray, rng: Rng, iters: int = 50) -> float:
    """Power-iteration estimate of ||W||_2 (used only by diagnostics)."""
    w = np.asarray(w)
    v = gaussian_matrix(rng, w.shape[1], 1, Field.of(w))
    v /= frobenius_norm(v)
    est = 0.0
    for _ in range(iters):
        u = w @ v
        nu = frobenius_norm(u)
        if nu == 0.0:
            return 0.0
        est = nu
        v = w.conj().T @ u
        v /= frobenius_norm(v)
    return est
