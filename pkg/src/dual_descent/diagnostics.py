"""Numerical checks of the convergence estimates and a small-instance oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .convex import INF
from .regularizer import SquaredNorm
from .solver import dual_value

ORACLE_MAX_DIM = 64
TAIL_TOL = 1e-15


class OracleError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


class NumericalInconsistency(ArithmeticError):
    pass


@dataclass
class OracleSolution:
    x_dagger: np.ndarray
    u_dagger: np.ndarray | None
    method: str
    inf_d: float | None = None


def _dense(A):
    M = getattr(A, "matrix", None)
    if M is None:
        raise ValueError("oracle needs an operator with an explicit dense matrix")
    return M


def d_inf(u, A, R, y, x=None):
    """``d(u) = R*(-A^T u) + <y, u>``."""
    v = -A.adjoint(u)
    return R.conj_value(v, x) + float(np.vdot(y, u))


def oracle_solve(A, y, R, method="auto", max_iters=10**6, gtol=1e-12):
    """Minimum-``R`` solution of ``A x = y`` together with a dual solution.

    ``pinv`` (squared-norm ``R`` only) uses ``u = -(A A^T)^+ y`` and
    ``x = A^+ y``; ``highacc_dual`` minimizes ``d(u) = R*(-A^T u) + <y,u>`` by
    gradient descent with step ``sigma_R / ||A||^2``.
    """
    M = _dense(A)
    y = np.asarray(y, dtype=float)
    if max(M.shape) > ORACLE_MAX_DIM:
        raise ValueError(f"oracle is limited to dimension {ORACLE_MAX_DIM}")
    if method == "auto":
        method = "pinv" if isinstance(R, SquaredNorm) else "highacc_dual"
    if method == "pinv":
        if not isinstance(R, SquaredNorm):
            raise ValueError("pinv oracle needs the squared-norm regularizer")
        u = -np.linalg.pinv(M @ M.T) @ y
        x = np.linalg.pinv(M) @ y
    elif method == "highacc_dual":
        step = R.sigma_r / np.linalg.norm(M, 2) ** 2
        u = np.zeros(M.shape[0])
        x = R.grad_conj(-M.T @ u)
        for _ in range(max_iters):
            g = y - M @ x
            if np.linalg.norm(g) <= gtol:
                break
            u = u - step * g
            x = R.grad_conj(-M.T @ u)
        else:
            raise OracleError(f"dual ascent did not reach gradient norm {gtol}")
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    if np.linalg.norm(M @ x - y) > 1e-8:
        raise OracleError("datum is not attainable: A x = y fails")
    return OracleSolution(x, u, method, d_inf(u, A, R, y))


def tail_sum(eval_conj, r, lambdas, N, max_terms=10**9, chunk=1 << 16):
    """``sum_{n >= N} m*(r lambda_n) / lambda_n``.

    ``lambdas`` is an array or a callable ``n -> lambda_n`` (vectorized over
    integer arrays). The sum stops at the first term below ``1e-15`` or when
    the sequence ends; any infinite term is a precondition violation.
    ``eval_conj`` may be a :class:`ConditioningModulus`.
    """
    f = getattr(eval_conj, "eval_conj", eval_conj)
    if callable(lambdas):
        def block(i0, i1):
            return np.asarray(lambdas(np.arange(i0, i1)), dtype=float)
        end = N + max_terms
    else:
        arr = np.asarray(lambdas, dtype=float)

        def block(i0, i1):
            return arr[i0:i1]
        end = arr.size
    total = 0.0
    i = N
    while i < end:
        lam = block(i, min(i + chunk, end))
        if lam.size == 0:
            break
        mv = np.asarray(f(r * lam), dtype=float)
        # an underflowed lambda_n = 0 contributes m*(0)/0 -> 0 in the limit
        pos = lam > 0
        terms = np.zeros_like(lam)
        terms[pos] = mv[pos] / lam[pos]
        terms[~pos & ~np.isfinite(mv)] = np.inf
        if not np.all(np.isfinite(terms)):
            raise PreconditionError(f"m*(r lambda_n) is infinite from n = {i + int(np.argmin(np.isfinite(terms)))}")
        small = np.nonzero(terms < TAIL_TOL)[0]
        if small.size:
            total += float(np.sum(terms[: small[0]]))
            return total
        total += float(np.sum(terms))
        i += lam.size
        chunk = min(chunk * 2, 1 << 22)
    return total


def first_admissible(eval_conj, r, lambdas, slack=1e-9):
    """First ``N`` with ``r lambda_N`` inside the interior of ``dom m*`` (probed with a small outward margin)."""
    f = getattr(eval_conj, "eval_conj", eval_conj)
    for n, lam in enumerate(np.asarray(lambdas, dtype=float)):
        if math.isfinite(float(f(r * lam * (1.0 + slack)))):
            return n
    raise PreconditionError("no admissible index in the schedule")


def rate_constant(u_N, u_dagger, tau, sigma_r, modulus, lambdas, N):
    """``C = sqrt(||u_N - u^dagger||^2/(tau sigma_R) + (2/sigma_R) sum_{n>=N} m*(||u^dagger|| lambda_n)/lambda_n)``."""
    r = float(np.linalg.norm(u_dagger))
    head = float(np.linalg.norm(np.asarray(u_N) - u_dagger)) ** 2 / (tau * sigma_r)
    return math.sqrt(head + 2.0 / sigma_r * tail_sum(modulus, r, lambdas, N))


def primal_gap_bound(u, A, R, y, inf_d):
    """``sqrt(2 (d(u) - inf d) / sigma_R)``, an upper bound on ``||x - x^dagger||``."""
    if not math.isfinite(inf_d):
        raise ValueError("inf_d must be finite")
    gap = d_inf(u, A, R, y) - inf_d
    if gap < -1e-12:
        raise NumericalInconsistency(f"negative dual gap {gap}")
    return math.sqrt(2.0 * max(gap, 0.0) / R.sigma_r)


def energy_violations(duals, u0, lambdas, tau, A, R, D, probe):
    """Per-step ``lhs - rhs`` of the energy estimate (nonpositive when it holds).

    ``lhs = (||u_{n+1} - u||^2 - ||u_n - u||^2) / (2 tau)`` and
    ``rhs = d_n(u) - d_n(u_{n+1})`` at the probe ``u``.
    """
    out = []
    prev = np.asarray(u0, dtype=float)
    probe = np.asarray(probe, dtype=float)
    for u_next, lam in zip(duals, lambdas):
        lhs = (np.sum((u_next - probe) ** 2) - np.sum((prev - probe) ** 2)) / (2.0 * tau)
        d_probe = dual_value(probe, lam, A, R, D)
        d_next = dual_value(u_next, lam, A, R, D)
        if d_next == INF:
            out.append(INF)
        elif d_probe == INF:
            out.append(-INF)
        else:
            out.append(float(lhs - (d_probe - d_next)))
        prev = u_next
    return np.array(out)


def dissipativity_violations(dual_values):
    """Increases ``d_{n+1}(u_{n+2}) - d_n(u_{n+1})``; nonpositive when dissipative."""
    d = np.asarray(dual_values, dtype=float)
    return np.diff(d)
