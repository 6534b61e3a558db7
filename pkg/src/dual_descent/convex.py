"""Convex-calculus primitives: proximity operators, conjugates, conditioning moduli.

Extended-real values are plain Python floats; ``math.inf`` stands for
``+inf`` and saturates under addition with finite numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

INF = math.inf
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def soft_threshold(x, thresh):
    """Componentwise soft-thresholding, the prox of ``thresh * |.|``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


@dataclass(frozen=True)
class ConditioningModulus:
    """Growth modulus ``m`` of a function around its minimizer.

    Attributes
    ----------
    eval : callable
        ``t -> m(t)``, even, nonnegative, zero only at zero.
    eval_conj : callable
        ``t -> m*(t)``, may return ``inf``.
    p : float
        Well-conditioning exponent, ``m(t) >= (gamma/p)|t|^p`` for ``|t| < eps``.
    gamma : float
    eps : float
    """

    eval: Callable[[float], float]
    eval_conj: Callable[[float], float]
    p: float
    gamma: float
    eps: float

    def local_lower_bound(self, t: float) -> float:
        return self.gamma / self.p * abs(t) ** self.p


def prox_scalar_bruteforce(f, alpha, u, tol=1e-8):
    """Minimize ``alpha * f(x) + (x - u)**2 / 2`` over the reals by search.

    A coarse grid on ``[u - 10(1+alpha), u + 10(1+alpha)]`` locates the best
    finite sample, then golden-section search refines the bracket around it.
    Used as an oracle; it is slow and makes no use of closed forms.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    half = 10.0 * (1.0 + alpha)
    lo, hi = u - half, u + half

    def obj(x):
        fx = f(x)
        if not math.isfinite(fx):
            return INF
        return alpha * fx + 0.5 * (x - u) ** 2

    grid = np.linspace(lo, hi, 4001)
    vals = np.array([obj(g) for g in grid])
    if not np.isfinite(vals).any():
        raise ValueError("objective is not finite anywhere on the search interval")
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, grid.size - 1)]

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = obj(c), obj(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = obj(d)
    return 0.5 * (a + b)


def conj_value_via_grad(f_value, grad_f_conj, v):
    """Evaluate ``f*(v)`` from the Fenchel-Young equality at ``x = grad f*(v)``."""
    v = np.asarray(v, dtype=float)
    x = grad_f_conj(v)
    fx = f_value(x)
    if fx == INF:
        return INF
    return float(np.vdot(v, x)) - fx


def moreau_check(prox_f, prox_f_conj, x):
    """Residual ``||prox_f(x) + prox_{f*}(x) - x||`` of the Moreau decomposition."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(prox_f(x) + prox_f_conj(x) - x))


def grid_sup_conjugate(f, t, grid):
    """``sup_s t*s - f(s)`` over a finite grid; a resolution-limited oracle."""
    vals = np.array([f(s) for s in grid], dtype=float)
    finite = np.isfinite(vals)
    return float(np.max(t * grid[finite] - vals[finite]))


# closed-form moduli -------------------------------------------------------
# All moduli accept scalars or arrays and return floats for scalar input.

def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def power_modulus(p: float) -> ConditioningModulus:
    """``m(t) = |t|^p / p`` with conjugate ``|t|^q / q``, ``1 < p <= 2``."""
    q = p / (p - 1.0)
    return ConditioningModulus(
        eval=lambda t: _out(np.abs(t) ** p / p),
        eval_conj=lambda t: _out(np.abs(t) ** q / q),
        p=p,
        gamma=1.0,
        eps=INF,
    )


def abs_modulus(scale: float = 1.0) -> ConditioningModulus:
    """``m(t) = scale*|t|``; its conjugate is the indicator of ``[-scale, scale]``."""
    return ConditioningModulus(
        eval=lambda t: _out(scale * np.abs(t)),
        eval_conj=lambda t: _out(np.where(np.abs(t) <= scale, 0.0, INF)),
        p=1.0,
        gamma=scale,
        eps=INF,
    )


def huber(t, sigma):
    """Scalar Huber function ``t^2/(2 sigma)`` inside ``[-sigma, sigma]``, affine outside."""
    a = np.abs(t)
    return np.where(a <= sigma, a * a / (2.0 * sigma), a - sigma / 2.0)


def huber_modulus(sigma: float, weight: float = 1.0) -> ConditioningModulus:
    """``m = weight * h_sigma``.

    ``(w h_s)*(t) = indicator[-w, w](t) + s t^2 / (2 w)``.
    """
    w, s = weight, sigma

    def m_conj(t):
        t = np.asarray(t, dtype=float)
        return _out(np.where(np.abs(t) <= w, s * t * t / (2.0 * w), INF))

    return ConditioningModulus(
        eval=lambda t: _out(w * huber(t, s)),
        eval_conj=m_conj,
        p=2.0,
        gamma=w / s,
        eps=s,
    )


def kl_modulus(c: float) -> ConditioningModulus:
    """``m(t) = |t| - c log(1 + |t|/c)``, conjugate ``-c(|t| + log(1-|t|))`` on ``(-1, 1)``.

    ``m(t) = t^2/(2c) - |t|^3/(3c^2) + ...`` falls below ``t^2/(2c)``, so the
    quadratic lower bound is certified with ``gamma = 1/(2c)`` on ``|t| < c``.
    """

    def m(t):
        a = np.abs(t)
        return _out(a - c * np.log1p(a / c))

    def m_conj(t):
        a = np.abs(np.asarray(t, dtype=float))
        inside = a < 1.0
        safe = np.where(inside, a, 0.0)
        return _out(np.where(inside, -c * (safe + np.log1p(-safe)), INF))

    return ConditioningModulus(eval=m, eval_conj=m_conj, p=2.0, gamma=1.0 / (2.0 * c), eps=c)
