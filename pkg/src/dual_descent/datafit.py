"""Data-fit terms ``D(.; y) = psi_y # phi_y``.

Each loss exposes what the dual iteration needs: the gradient of the
conjugate of its strongly convex part ``psi_y``, the scaled prox of its
nonsmooth part ``phi_y``, values, conjugate values and a conditioning
modulus for ``D(.; y)``. Components equal to the indicator of ``{0}`` are
modelled with ``sigma_psi = inf`` (for ``psi``) or the zero prox (for
``phi``).
"""
from __future__ import annotations

import numpy as np

from .convex import (
    INF,
    abs_modulus,
    huber,
    huber_modulus,
    kl_modulus,
    power_modulus,
    soft_threshold,
)

# slack on dual box constraints, absorbs rounding in the iterates
BOX_TOL = 1e-12
KL_FLOOR = 1e-300


class DataFit:
    """Base class. Subclasses fill in the closed forms.

    Attributes
    ----------
    y : ndarray
        The datum.
    sigma_psi : float
        Strong convexity constant of ``psi_y``, ``inf`` when ``psi_y`` is
        the indicator of ``{0}``.
    modulus : ConditioningModulus
        Growth modulus of ``D(.; y)``.
    kind : str
    """

    kind = "abstract"
    phi_is_zero = False  # phi_y is the indicator of {0}, prox is the zero map

    def __init__(self, y):
        self.y = np.array(y, dtype=float)

    def with_data(self, y):
        """Same loss with another datum."""
        raise NotImplementedError

    def grad_psi_conj(self, u):
        return np.zeros_like(u, dtype=float)

    def prox_phi(self, alpha, u):
        return np.zeros_like(u, dtype=float)

    def psi_conj(self, v):
        return 0.0

    def phi_conj(self, v):
        return 0.0

    def conj_value(self, v):
        """``D_y*(v) = psi_y*(v) + phi_y*(v)``, extended real."""
        v = np.asarray(v, dtype=float)
        a = self.psi_conj(v)
        if a == INF:
            return INF
        b = self.phi_conj(v)
        if b == INF:
            return INF
        return a + b

    def value(self, u):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(d={self.y.size})"


def datafit_conj_value(df, v):
    return df.conj_value(v)


def _box_ok(v, radius=1.0):
    return float(np.max(np.abs(v), initial=0.0)) <= radius * (1.0 + BOX_TOL) + BOX_TOL


class SquareLoss(DataFit):
    """``D(u; y) = ||u - y||^2 / 2``; ``psi_y = D``, ``phi_y`` the indicator of ``{0}``."""

    kind = "square"
    phi_is_zero = True
    sigma_psi = 1.0

    def __init__(self, y):
        super().__init__(y)
        self.modulus = power_modulus(2.0)

    def with_data(self, y):
        return SquareLoss(y)

    def grad_psi_conj(self, u):
        return u + self.y

    def psi_conj(self, v):
        return 0.5 * float(np.vdot(v, v)) + float(np.vdot(self.y, v))

    def value(self, u):
        r = np.asarray(u) - self.y
        return 0.5 * float(np.vdot(r, r))


class L1Loss(DataFit):
    """``D(u; y) = ||u - y||_1``, carried entirely by ``phi_y``."""

    kind = "l1"
    sigma_psi = INF

    def __init__(self, y):
        super().__init__(y)
        self.modulus = abs_modulus()

    def with_data(self, y):
        return L1Loss(y)

    def prox_phi(self, alpha, u):
        return self.y + soft_threshold(u - self.y, alpha)

    def phi_conj(self, v):
        if not _box_ok(v):
            return INF
        return float(np.vdot(self.y, v))

    def value(self, u):
        return float(np.sum(np.abs(np.asarray(u) - self.y)))


def kl_divergence(y, u):
    """``sum y log(y/u) - y + u``; ``inf`` outside the positive orthant."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        return INF
    return float(np.sum(y * np.log(y / u) - y + u))


class KLLoss(DataFit):
    """``D(u; y) = KL(y, u)``, carried by ``phi_y``; needs ``y > 0``.

    The modulus uses ``c = d * max(y)``.
    """

    kind = "kl"
    sigma_psi = INF

    def __init__(self, y):
        super().__init__(y)
        if np.any(self.y <= 0):
            raise ValueError("KL data must be strictly positive")
        self.c = self.y.size * float(self.y.max())
        self.modulus = kl_modulus(self.c)

    def with_data(self, y):
        return KLLoss(y)

    def prox_phi(self, alpha, u):
        s = u - alpha
        out = 0.5 * (s + np.sqrt(s * s + 4.0 * alpha * self.y))
        return np.maximum(out, KL_FLOOR)

    def phi_conj(self, v):
        # sup_x <v,x> - KL(y,x) = -sum y log(1 - v) for v < 1
        if np.any(v >= 1.0):
            return INF
        return float(-np.sum(self.y * np.log1p(-v)))

    def value(self, u):
        return kl_divergence(self.y, u)


class HuberLoss(DataFit):
    """``D(u; y) = sum_j h_sigma(u_j - y_j)`` with ``h_sigma(t) = t^2/(2 sigma)`` for ``|t| <= sigma``.

    Split as ``||.||_1 # (1/(2 sigma))||. - y||^2``: ``phi_y = ||.||_1``
    does not depend on ``y`` and ``psi_y`` is ``1/sigma``-strongly convex.
    """

    kind = "huber"

    def __init__(self, y, sigma):
        super().__init__(y)
        if sigma <= 0:
            raise ValueError("Huber sigma must be positive")
        self.sigma = float(sigma)
        self.sigma_psi = 1.0 / self.sigma
        self.modulus = huber_modulus(self.sigma)

    def with_data(self, y):
        return HuberLoss(y, self.sigma)

    def grad_psi_conj(self, u):
        return self.y + self.sigma * u

    def psi_conj(self, v):
        return 0.5 * self.sigma * float(np.vdot(v, v)) + float(np.vdot(self.y, v))

    def prox_phi(self, alpha, u):
        return soft_threshold(u, alpha)

    def phi_conj(self, v):
        return 0.0 if _box_ok(v) else INF

    def value(self, u):
        return float(np.sum(huber(np.asarray(u) - self.y, self.sigma)))


class L1L2Loss(DataFit):
    """``D(u; y) = a1 ||u - y||_1 + (a2/2) ||u - y||^2``, carried by ``psi_y``."""

    kind = "l1l2"
    phi_is_zero = True

    def __init__(self, y, a1, a2):
        super().__init__(y)
        if a1 <= 0 or a2 <= 0:
            raise ValueError("a1 and a2 must be positive")
        self.a1, self.a2 = float(a1), float(a2)
        self.sigma_psi = self.a2
        self.modulus = huber_modulus(self.a2 / self.a1, weight=self.a1)

    def with_data(self, y):
        return L1L2Loss(y, self.a1, self.a2)

    def grad_psi_conj(self, u):
        return self.y + soft_threshold(u / self.a2, self.a1 / self.a2)

    def psi_conj(self, v):
        excess = np.maximum(np.abs(v) - self.a1, 0.0)
        return float(np.vdot(self.y, v)) + float(np.sum(excess * excess)) / (2.0 * self.a2)

    def value(self, u):
        r = np.asarray(u) - self.y
        return self.a1 * float(np.sum(np.abs(r))) + 0.5 * self.a2 * float(np.vdot(r, r))


def square_loss(y):
    return SquareLoss(y)


def l1_loss(y):
    return L1Loss(y)


def kl_loss(y):
    return KLLoss(y)


def huber_loss(y, sigma):
    return HuberLoss(y, sigma)


def l1l2_loss(y, a1, a2):
    return L1L2Loss(y, a1, a2)


def make_loss(kind, y, **params):
    """Build a loss by name; used by the experiment harness."""
    if kind == "square":
        return SquareLoss(y)
    if kind == "l1":
        return L1Loss(y)
    if kind == "kl":
        return KLLoss(y)
    if kind == "huber":
        return HuberLoss(y, params.get("sigma", 1.0))
    if kind == "l1l2":
        return L1L2Loss(y, params.get("a1", 1.0), params.get("a2", 1.0))
    raise ValueError(f"unknown loss {kind!r}")


LOSS_KINDS = ("square", "l1", "kl", "huber", "l1l2")
