"""Strongly convex regularizers exposing ``R`` and ``grad R*``."""
from __future__ import annotations

import numpy as np

from .convex import conj_value_via_grad, soft_threshold
from .operators import DimensionError, _div, _grad


class Regularizer:
    """``sigma_r``-strongly convex ``R``; subclasses define ``value`` and ``grad_conj``."""

    sigma_r = 1.0
    kind = "abstract"

    def value(self, x):
        raise NotImplementedError

    def grad_conj(self, v):
        raise NotImplementedError

    def conj_value(self, v, x=None):
        """``R*(v)``. Pass ``x = grad_conj(v)`` if already known."""
        if x is None:
            return conj_value_via_grad(self.value, self.grad_conj, v)
        return float(np.vdot(v, x)) - self.value(x)


class SquaredNorm(Regularizer):
    """``R = ||.||^2 / 2``."""

    kind = "squared_norm"
    sigma_r = 1.0

    def value(self, x):
        return 0.5 * float(np.vdot(x, x))

    def grad_conj(self, v):
        return np.array(v, dtype=float)


class L1Analysis(Regularizer):
    """``R(x) = mu ||W x||_1 + (sigma/2) ||x||^2`` with ``W`` orthogonal.

    ``grad R*(v) = W^T soft(W v / sigma, mu / sigma)``.
    """

    kind = "haar_l1"

    def __init__(self, W, mu=1.0, sigma=1.0, seed=0):
        if mu <= 0 or sigma <= 0:
            raise ValueError("mu and sigma must be positive")
        rng = np.random.default_rng(seed)
        for _ in range(3):
            z = rng.standard_normal(W.shape_in)
            wz = W.apply(z)
            if abs(np.linalg.norm(wz) - np.linalg.norm(z)) > 1e-8 * np.linalg.norm(z) or \
                    np.linalg.norm(W.adjoint(wz) - z) > 1e-8 * np.linalg.norm(z):
                raise ValueError("dictionary is not orthogonal")
        self.W = W
        self.mu = float(mu)
        self.sigma_r = float(sigma)

    def value(self, x):
        return self.mu * float(np.sum(np.abs(self.W.apply(x)))) + 0.5 * self.sigma_r * float(np.vdot(x, x))

    def grad_conj(self, v):
        s = self.sigma_r
        return self.W.adjoint(soft_threshold(self.W.apply(v) / s, self.mu / s))


def tv_prox(z, weight, iters=50, tol=1e-6, p0=None, accelerated=True):
    """Prox of ``weight * ||grad .||_1`` (anisotropic TV) at ``z``.

    Projected gradient on the dual: ``x = z + div p`` with ``p`` in the box
    ``[-weight, weight]``, step ``1/8``, with Nesterov extrapolation unless
    ``accelerated`` is off. Stops after ``iters`` steps or when the relative
    projected-gradient step drops below ``tol``. Returns ``(x, p)``.
    """
    p = np.zeros((2,) + z.shape) if p0 is None else p0.copy()
    q, t = p, 1.0
    for _ in range(iters):
        p_new = np.clip(q + _grad(z + _div(q)) / 8.0, -weight, weight)
        # gradient-mapping residual: zero only at a fixed point of the projected step
        change = np.linalg.norm(p_new - q)
        if accelerated:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            q = p_new + ((t - 1.0) / t_new) * (p_new - p)
            t = t_new
        else:
            q = p_new
        scale = np.linalg.norm(p_new)
        p = p_new
        if tol > 0 and change <= tol * max(scale, 1e-300):
            break
    return z + _div(p), p


class TVQuad(Regularizer):
    """``R(x) = mu ||grad x||_1 + (sigma/2) ||x||^2``; ``grad R*`` solved by an inner loop."""

    kind = "tv"

    def __init__(self, mu=1.0, sigma=1.0, inner_iters=50, inner_tol=1e-6):
        if mu <= 0 or sigma <= 0:
            raise ValueError("mu and sigma must be positive")
        if inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")
        self.mu = float(mu)
        self.sigma_r = float(sigma)
        self.inner_iters = int(inner_iters)
        self.inner_tol = float(inner_tol)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise DimensionError("TV needs a 2-D image")
        return self.mu * float(np.sum(np.abs(_grad(x)))) + 0.5 * self.sigma_r * float(np.vdot(x, x))

    def grad_conj(self, v):
        v = np.asarray(v, dtype=float)
        x, _ = tv_prox(v / self.sigma_r, self.mu / self.sigma_r, self.inner_iters, self.inner_tol)
        return x


def squared_norm():
    return SquaredNorm()


def l1_analysis(W, mu=1.0, sigma=1.0):
    return L1Analysis(W, mu, sigma)


def tv_quad(mu=1.0, sigma=1.0, inner_iters=50, inner_tol=1e-6):
    return TVQuad(mu, sigma, inner_iters, inner_tol)
