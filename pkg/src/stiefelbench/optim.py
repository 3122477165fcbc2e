"""Stochastic optimizers: Cayley SGD / Cayley ADAM on the Stiefel manifold,
plus the unconstrained heavy-ball and ADAM baselines and mixed-group stepping.

The Cayley steps follow their published pseudocode line by line, including
the sign conventions: the SGD variant folds the negative gradient into the
momentum and moves along +W, while the ADAM variant keeps a gradient-aligned
momentum and carries the minus sign through the retraction. Gradients are
always supplied by the caller; nothing here differentiates.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np

from .kernel import frobenius_norm
from .manifold import SkewOperator, StiefelPoint, adaptive_alpha, build_skew, cayley_iterative


class NonFiniteGradientError(Exception):
    """A gradient contained NaN or Inf; the optimizer state is unchanged."""


class InvalidStepError(Exception):
    """The step counter is out of range (ADAM bias correction needs k >= 1)."""


def _check_finite(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g)
    if not np.isfinite(g).all():
        raise NonFiniteGradientError("gradient has non-finite entries")
    return g


@dataclass(frozen=True)
class SgdHyper:
    l: float
    beta: float = 0.9
    q: float = 0.5
    eps: float = 1e-8
    s: int = 2


@dataclass(frozen=True)
class SgdState:
    m: np.ndarray
    k: int
    hyper: SgdHyper


def sgd_state(x: StiefelPoint, l: float, beta: float = 0.9, q: float = 0.5,
              eps: float = 1e-8, s: int = 2) -> SgdState:
    return SgdState(m=np.zeros_like(x.mat), k=1, hyper=SgdHyper(l, beta, q, eps, s))


def cayley_sgd_step(state: SgdState, x: StiefelPoint,
                    g: np.ndarray) -> tuple[StiefelPoint, SgdState]:
    """One Cayley SGD with momentum update.

    M <- beta M - G; W from the skew construction at (X, M); M <- W X
    (the tangent projection of the momentum); alpha from the contraction
    guard; then s fixed-point iterations seeded with Y0 = X + alpha M.
    """
    g = _check_finite(g)
    h = state.hyper
    m = h.beta * state.m - g
    w = build_skew(x, m)
    m = w.mat @ x.mat
    alpha = adaptive_alpha(h.l, w, h.q, h.eps)
    y0 = x.mat + alpha * m
    y = cayley_iterative(x, w, alpha, h.s, y0)
    return (StiefelPoint(y, ortho_tol=x.ortho_tol),
            SgdState(m=m, k=state.k + 1, hyper=h))


@dataclass(frozen=True)
class AdamHyper:
    l: float
    beta1: float = 0.9
    beta2: float = 0.99
    q: float = 0.5
    eps: float = 1e-8
    s: int = 2


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: float
    k: int
    hyper: AdamHyper


def adam_state(x: StiefelPoint, l: float, beta1: float = 0.9, beta2: float = 0.99,
               q: float = 0.5, eps: float = 1e-8, s: int = 2) -> AdamState:
    return AdamState(m=np.zeros_like(x.mat), v=1.0, k=1,
                     hyper=AdamHyper(l, beta1, beta2, q, eps, s))


def cayley_adam_step(state: AdamState, x: StiefelPoint,
                     g: np.ndarray) -> tuple[StiefelPoint, AdamState]:
    """One Cayley ADAM update with a single second-moment scalar per matrix.

    The bias-corrected ratio r = (1 - beta1^k) sqrt(vhat + eps) rescales the
    skew operator, and the projected momentum r W X carries the same scale
    back; note eps sits inside the square root here, unlike the unconstrained
    baseline. The step counter starts at 1: at k = 0 the ratio would vanish
    and the rescaling would divide by zero. The retraction iterates with an
    explicit minus: Y^i = X - (alpha/2) W (X + Y^{i-1}).
    """
    if state.k < 1:
        raise InvalidStepError(f"step counter must be >= 1, got {state.k}")
    g = _check_finite(g)
    h = state.hyper
    m = h.beta1 * state.m + (1.0 - h.beta1) * g
    v = float(h.beta2 * state.v + (1.0 - h.beta2) * frobenius_norm(g) ** 2)
    vhat = v / (1.0 - h.beta2 ** state.k)
    r = (1.0 - h.beta1 ** state.k) * np.sqrt(vhat + h.eps)
    w = SkewOperator(build_skew(x, m).mat / r)
    m = r * (w.mat @ x.mat)
    alpha = adaptive_alpha(h.l, w, h.q, h.eps)
    y = x.mat - alpha * m
    half = alpha / 2.0
    for _ in range(h.s):
        y = x.mat - half * (w.mat @ (x.mat + y))
    return (StiefelPoint(y, ortho_tol=x.ortho_tol),
            AdamState(m=m, v=v, k=state.k + 1, hyper=h))


def euclid_sgd_step(m: np.ndarray, x: np.ndarray, g: np.ndarray, l: float,
                    beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Unconstrained heavy ball: M' = beta M - G, X' = X + l M'."""
    g = _check_finite(g)
    m_new = beta * m - g
    return x + l * m_new, m_new


@dataclass(frozen=True)
class EuclidAdamState:
    m: np.ndarray
    v: np.ndarray
    k: int
    l: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def euclid_adam_state(x: np.ndarray, l: float, beta1: float = 0.9,
                      beta2: float = 0.999, eps: float = 1e-8) -> EuclidAdamState:
    return EuclidAdamState(m=np.zeros_like(x), v=np.zeros_like(np.real(x)), k=1,
                           l=l, beta1=beta1, beta2=beta2, eps=eps)


def euclid_adam_step(state: EuclidAdamState, x: np.ndarray,
                     g: np.ndarray) -> tuple[np.ndarray, EuclidAdamState]:
    """Standard elementwise ADAM with bias correction (eps outside the root)."""
    g = _check_finite(g)
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * np.abs(g) ** 2
    mhat = m / (1.0 - state.beta1 ** state.k)
    vhat = v / (1.0 - state.beta2 ** state.k)
    x_new = x - state.l * mhat / (np.sqrt(vhat) + state.eps)
    return x_new, dataclasses.replace(state, m=m, v=v, k=state.k + 1)


def lr_schedule(step: int, base_lr: float, milestones=(), factor: float = 0.2) -> float:
    """base_lr * factor^(number of milestones at or before step)."""
    ms = list(milestones)
    if ms != sorted(ms):
        raise ValueError("milestones must be sorted ascending")
    return base_lr * factor ** sum(1 for m in ms if m <= step)


class GroupKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    STIEFEL = "stiefel"


@dataclass
class ParamGroup:
    """A set of parameters stepped with one rule and one learning rate.

    Stiefel-kind entries hold StiefelPoint parameters updated by the Cayley
    optimizers; Euclidean entries hold plain arrays updated by the baselines.
    Weight decay is an additive l2 gradient term and only makes sense for
    Euclidean parameters (a Stiefel parameter has fixed norm), so Stiefel
    groups reject it.
    """

    kind: GroupKind
    algo: str  # "sgd" | "adam"
    lr: float
    params: list = field(default_factory=list)
    states: list = field(default_factory=list)
    beta: float = 0.9
    beta1: float = 0.9
    beta2: float | None = None
    q: float = 0.5
    eps: float = 1e-8
    s: int = 2
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.algo not in ("sgd", "adam"):
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.kind is GroupKind.STIEFEL and self.weight_decay != 0.0:
            raise ValueError("weight decay on a Stiefel parameter is meaningless")
        if self.beta2 is None:
            # manifold ADAM tracks a fast scalar moment; the elementwise
            # baseline uses the conventional slower default
            self.beta2 = 0.99 if self.kind is GroupKind.STIEFEL else 0.999
        if not self.states:
            self.states = [self._fresh_state(p) for p in self.params]

    def _fresh_state(self, p):
        if self.kind is GroupKind.STIEFEL:
            if self.algo == "sgd":
                return sgd_state(p, self.lr, self.beta, self.q, self.eps, self.s)
            return adam_state(p, self.lr, self.beta1, self.beta2, self.q, self.eps, self.s)
        if self.algo == "sgd":
            return np.zeros_like(p)
        return euclid_adam_state(p, self.lr, self.beta1, self.beta2, self.eps)


def group_step(groups: list[ParamGroup], grads: list[list[np.ndarray]]) -> list[ParamGroup]:
    """Step every parameter by its group's rule; mutates and returns groups.

    grads must align with groups and their params; the group's current lr is
    authoritative (schedules adjust group.lr between calls).
    """
    if len(grads) != len(groups):
        raise ValueError(f"expected {len(groups)} gradient lists, got {len(grads)}")
    for group, group_grads in zip(groups, grads):
        if len(group_grads) != len(group.params):
            raise ValueError("one gradient per parameter is required")
        for i, (p, st, g) in enumerate(zip(group.params, group.states, group_grads)):
            g = np.asarray(g)
            ref = p.mat if group.kind is GroupKind.STIEFEL else p
            if g.shape != ref.shape:
                raise ValueError(f"gradient shape {g.shape} does not match {ref.shape}")
            if group.kind is GroupKind.STIEFEL:
                st = _with_lr(st, group.lr)
                step = cayley_sgd_step if group.algo == "sgd" else cayley_adam_step
                p_new, st_new = step(st, p, g)
            else:
                if group.weight_decay:
                    g = g + group.weight_decay * p
                if group.algo == "sgd":
                    p_new, st_new = euclid_sgd_step(st, p, g, group.lr, group.beta)
                else:
                    st = dataclasses.replace(st, l=group.lr)
                    p_new, st_new = euclid_adam_step(st, p, g)
            group.params[i] = p_new
            group.states[i] = st_new
    return groups


def _with_lr(state, lr):
    if state.hyper.l == lr:
        return state
    return dataclasses.replace(state, hyper=dataclasses.replace(state.hyper, l=lr))
