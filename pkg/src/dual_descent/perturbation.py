"""Noise models, (delta, theta) certificates and twin-run stability checks.

Random numbers come from numpy's PCG64 generator (``default_rng(seed)``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import ConfigurationError, Explicit, default_tau, trajectory

NOISE_KINDS = ("none", "gaussian", "salt_pepper", "poisson", "mixed")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    variance: float = 0.0
    intensity: float = 0.0
    peak: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if self.variance < 0:
            raise DomainError("variance must be >= 0")
        if not 0.0 <= self.intensity <= 1.0:
            raise DomainError("intensity must lie in [0, 1]")
        if self.peak <= 0:
            raise DomainError("peak must be positive")

    def scaled(self, s):
        """Same noise with amplitude scaled by ``s``: variance by ``s^2``, intensity by ``s``."""
        return NoiseSpec(self.kind, self.variance * s * s, min(self.intensity * s, 1.0), self.peak / (s * s) if s > 0 else self.peak, self.seed)


def _salt_pepper(y, intensity, rng):
    out = y.copy()
    flat = out.reshape(-1)
    k = int(np.rint(intensity * flat.size))
    pos = rng.permutation(flat.size)[:k]
    flat[pos] = rng.integers(0, 2, size=k).astype(float)
    return out


def apply_noise(y_clean, spec: NoiseSpec):
    """Corrupt ``y_clean`` according to ``spec``; deterministic in ``spec.seed``."""
    y = np.array(y_clean, dtype=float)
    rng = np.random.default_rng(spec.seed)
    if spec.kind in ("salt_pepper", "poisson", "mixed") and (y.min(initial=0.0) < 0 or y.max(initial=0.0) > 1):
        raise DomainError(f"{spec.kind} noise needs data in [0, 1]")
    if spec.kind == "none":
        return y
    if spec.kind == "gaussian":
        return y + np.sqrt(spec.variance) * rng.standard_normal(y.shape) if spec.variance > 0 else y
    if spec.kind == "salt_pepper":
        return _salt_pepper(y, spec.intensity, rng)
    if spec.kind == "poisson":
        return rng.poisson(spec.peak * y).astype(float) / spec.peak
    # mixed: gaussian then salt & pepper
    if spec.variance > 0:
        y = y + np.sqrt(spec.variance) * rng.standard_normal(y.shape)
    return _salt_pepper(y, spec.intensity, rng)


@dataclass(frozen=True)
class PerturbationCert:
    delta: float
    theta: float
    loss_kind: str


def measure_delta(loss_kind, y, y_hat):
    """Certificate ``(delta, theta)`` for the pair ``(y, y_hat)``.

    KL: ``delta = ||sqrt(y_hat) - sqrt(y)||``, ``theta = 1/2``; every other
    loss: ``delta = ||y - y_hat||``, ``theta = 0``.
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise DomainError("shape mismatch")
    if loss_kind == "kl":
        if np.any(y <= 0) or np.any(y_hat <= 0):
            raise DomainError("KL certificate needs strictly positive data")
        return PerturbationCert(float(np.linalg.norm(np.sqrt(y_hat) - np.sqrt(y))), 0.5, "kl")
    if loss_kind in ("square", "huber", "l1", "l1l2"):
        return PerturbationCert(float(np.linalg.norm(y - y_hat)), 0.0, loss_kind)
    raise DomainError(f"unknown loss {loss_kind!r}")


def stability_bound(delta, theta, normA, tau, lambdas):
    """``(delta/||A||)(n + tau^(theta-1) sum_{k<n} lambda_k^(-theta))`` for ``n = 1..len(lambdas)``."""
    lam = np.asarray(lambdas, dtype=float)
    n = np.arange(1, lam.size + 1)
    if theta == 0:
        s = n.astype(float)
    else:
        s = np.cumsum(lam ** (-theta))
    return delta / normA * (n + tau ** (theta - 1.0) * s)


@dataclass
class TwinResult:
    gaps: np.ndarray
    bounds: np.ndarray
    cert: PerturbationCert
    tau: float

    @property
    def holds(self):
        return bool(np.all(self.gaps <= self.bounds + 1e-12))


def stability_twin_run(A, R, D_clean, D_noisy, schedule, n_max, tau=None, u0=None):
    """Run clean and noisy trajectories in lockstep and compare with the stability bound.

    Both runs use the same ``tau`` (computed from the clean data-fit unless
    given), ``u0`` and schedule. Adaptive schedules are rejected because
    the two runs could emit different parameters.
    """
    if schedule.adaptive:
        raise ConfigurationError("twin runs need a non-adaptive schedule")
    if D_clean.kind != D_noisy.kind or D_clean.y.shape != D_noisy.y.shape:
        raise ConfigurationError("clean and noisy data-fits differ in kind or shape")
    if tau is None:
        tau = default_tau(A, R, D_clean, schedule.lambda0)
    cert = measure_delta(D_clean.kind, D_clean.y, D_noisy.y)
    gaps, lams = [], []
    a = trajectory(A, R, D_clean, schedule, n_max, tau, u0, record_dual=False)
    b = trajectory(A, R, D_noisy, schedule, n_max, tau, u0, record_dual=False)
    for (sa, la, _), (sb, lb, _) in zip(a, b):
        if la != lb:
            raise ConfigurationError("schedules diverged")
        gaps.append(float(np.linalg.norm(sa.x - sb.x)))
        lams.append(la)
    bounds = stability_bound(cert.delta, cert.theta, A.norm_upper, tau, lams)
    return TwinResult(np.array(gaps), bounds, cert, tau)


def frozen_schedule(lambdas):
    """Explicit schedule replaying a realized parameter sequence."""
    return Explicit(lambdas)
