"""Diagnostics suite behind ``dual-descent verify``: small problems with known solutions."""
from __future__ import annotations

import numpy as np

from .datafit import huber_loss, kl_loss, l1_loss, square_loss
from .diagnostics import (
    dissipativity_violations,
    energy_violations,
    first_admissible,
    oracle_solve,
    rate_constant,
)
from .operators import matrix_operator
from .perturbation import stability_twin_run
from .regularizer import squared_norm
from .solver import Polynomial, run

SLACK = 1e-9


def figure1_problem():
    """``A`` with columns ``(1,1)``, ``(1,0)``, datum ``(2,1)``; solution ``(1,1)``, dual solution ``(-1,0)``."""
    return matrix_operator([[1.0, 1.0], [1.0, 0.0]]), np.array([2.0, 1.0])


def rate_check(A, y, D, R, schedule, n_iters):
    """Returns ``(ok, C, N, trace)`` for the rate envelope ``||x_n - x^dagger|| <= C / sqrt(n - N)``."""
    orc = oracle_solve(A, y, R)
    trace = run(A, R, D, schedule, n_iters, keep_duals=True, x_dagger=orc.x_dagger)
    r = float(np.linalg.norm(orc.u_dagger))
    N = first_admissible(D.modulus, r, trace.lambdas)
    u_N = np.zeros(A.shape_out) if N == 0 else trace.duals[N - 1]
    C = rate_constant(u_N, orc.u_dagger, trace.tau, R.sigma_r, D.modulus, schedule.value, N)
    n = np.asarray(trace.n)
    dist = trace.column("dist_opt")
    mask = n > N
    ok = bool(np.all(dist[mask] <= C / np.sqrt(n[mask] - N)))
    return ok, C, N, trace


def run_suite(seed=0, n_iters=2000):
    A, y = figure1_problem()
    R = squared_norm()
    rows = []
    orc = oracle_solve(A, y, R)
    orc2 = oracle_solve(A, y, R, method="highacc_dual")
    diff = float(np.linalg.norm(orc.x_dagger - orc2.x_dagger))
    rows.append(("oracle pinv vs dual ascent", diff <= 1e-6, f"diff={diff:.2e}"))
    for D in (square_loss(y), huber_loss(y, 1.0), l1_loss(y)):
        sched = Polynomial(1.0, 2.0)
        ok, C, N, tr = rate_check(A, y, D, R, sched, n_iters)
        rows.append((f"rate envelope [{D.kind}]", ok, f"C={C:.4f} N={N}"))
        e = max(energy_violations(tr.duals, np.zeros(2), tr.lambdas, tr.tau, A, R, D, p).max()
                for p in (np.zeros(2), orc.u_dagger))
        rows.append((f"energy estimate [{D.kind}]", e <= SLACK, f"max violation={e:.2e}"))
        dv = dissipativity_violations(tr.dual).max()
        rows.append((f"dissipativity [{D.kind}]", dv <= SLACK, f"max increase={dv:.2e}"))
    rng = np.random.default_rng(seed)
    for make, kind in ((l1_loss, "l1"), (kl_loss, "kl")):
        y_noisy = y + 0.1 * np.abs(rng.standard_normal(2))
        tw = stability_twin_run(A, R, make(y), make(y_noisy), Polynomial(1.0, 1.0), n_iters)
        rows.append((f"stability bound [{kind}]", tw.holds, f"delta={tw.cert.delta:.3e} theta={tw.cert.theta}"))
    return rows
