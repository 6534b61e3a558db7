"""Diagonal dual descent: schedules, the three-line iteration, dual values and traces.

One step with parameter ``lambda_n`` and step ``tau``::

    x_n     = grad R*(-A^T u_n)
    w       = u_n + tau A x_n - tau grad psi_y*(lambda_n u_n)
    u_{n+1} = w - tau prox_{(tau lambda_n)^{-1} phi_y}(w / tau)

A trace row ``n`` (1-based) describes the ``n``-th step: the parameter it
used, the dual value ``d_{lambda}(u_n)`` of the new dual iterate and the
metrics of the new primal iterate ``x_n = grad R*(-A^T u_n)``.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .convex import INF
from .datafit import datafit_conj_value

CSV_HEADER = ("n", "lambda", "dual_value", "gtg", "dist_opt", "sure", "wall_ms")


class DivergenceError(RuntimeError):
    """Non-finite iterate; ``trace`` holds the rows recorded so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigurationError(ValueError):
    pass


# schedules ------------------------------------------------------------------

class _SequenceCursor:
    def __init__(self, values):
        self._it = iter(values)
        self._cur = next(self._it, None)

    def current(self):
        return self._cur

    def advance(self, d_prev=None, d_new=None):
        self._cur = next(self._it, None)


class Schedule:
    """Immutable description of a parameter sequence; ``cursor()`` starts a fresh pass."""

    kind = "abstract"
    adaptive = False

    @property
    def lambda0(self):
        raise NotImplementedError

    def cursor(self):
        raise NotImplementedError

    def as_dict(self):
        raise NotImplementedError


class VanillaExp(Schedule):
    """``lambda_t = lam_max (lam_min/lam_max)^((t-1)/(n_v-1))`` for ``t = 1..n_v``."""

    kind = "vanilla_exp"

    def __init__(self, lam_max, lam_min, n_v):
        if not (lam_max >= lam_min > 0):
            raise ConfigurationError("need lam_max >= lam_min > 0")
        if n_v < 1:
            raise ConfigurationError("n_v must be >= 1")
        self.lam_max, self.lam_min, self.n_v = float(lam_max), float(lam_min), int(n_v)

    @property
    def lambda0(self):
        return self.lam_max

    def values(self):
        if self.n_v == 1:
            return np.array([self.lam_max])
        t = np.arange(self.n_v) / (self.n_v - 1)
        vals = self.lam_max * (self.lam_min / self.lam_max) ** t
        vals[0], vals[-1] = self.lam_max, self.lam_min
        return vals

    def cursor(self):
        return _SequenceCursor(self.values().tolist())

    def as_dict(self):
        return {"kind": self.kind, "lam_max": self.lam_max, "lam_min": self.lam_min, "n_v": self.n_v}


class Polynomial(Schedule):
    """``lambda_n = lam0 / (n+1)^beta`` for ``n = 0, 1, ...`` (unbounded)."""

    kind = "polynomial"

    def __init__(self, lam0, beta):
        if lam0 <= 0 or beta < 0:
            raise ConfigurationError("need lam0 > 0 and beta >= 0")
        self.lam0, self.beta = float(lam0), float(beta)

    @property
    def lambda0(self):
        return self.lam0

    def value(self, n):
        return self.lam0 / (n + 1.0) ** self.beta

    def cursor(self):
        def gen():
            n = 0
            while True:
                yield self.value(n)
                n += 1

        return _SequenceCursor(gen())

    def as_dict(self):
        return {"kind": self.kind, "lam0": self.lam0, "beta": self.beta}


class Explicit(Schedule):
    """A given finite sequence. Zero entries are allowed (pure Landweber tests)."""

    kind = "explicit"

    def __init__(self, values):
        vals = np.asarray(values, dtype=float).ravel()
        if vals.size == 0 or np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ConfigurationError("explicit schedule needs finite nonnegative values")
        self.vals = vals

    @property
    def lambda0(self):
        return float(self.vals[0])

    def cursor(self):
        return _SequenceCursor(self.vals.tolist())

    def as_dict(self):
        return {"kind": self.kind, "length": int(self.vals.size)}


def warm_restart_fires(d_prev, d_new, eps):
    """Relative-change test ``|d_new - d_prev| / |d_new| < eps``.

    Infinite values defer the test. A zero change always fires; a zero
    denominator with a nonzero change never does.
    """
    if not (math.isfinite(d_prev) and math.isfinite(d_new)):
        return False
    num = abs(d_new - d_prev)
    if num == 0.0:
        return True
    den = abs(d_new)
    if den == 0.0:
        return False
    return num / den < eps


class _WarmCursor:
    def __init__(self, grid, eps):
        self.grid, self.eps, self.k = grid, eps, 0

    def current(self):
        return self.grid[self.k] if self.k < len(self.grid) else None

    def advance(self, d_prev=None, d_new=None):
        if d_prev is not None and warm_restart_fires(d_prev, d_new, self.eps):
            self.k += 1


class WarmRestart(Schedule):
    """Log-uniform grid ``lam_max .. lam_min`` of ``n_wr`` points.

    The parameter stays at a grid point until the relative change of
    ``d_lambda`` between consecutive dual iterates drops below ``eps_wr``;
    the dual iterate is carried over to the next grid point.
    """

    kind = "warm_restart"
    adaptive = True

    def __init__(self, lam_max, lam_min, n_wr, eps_wr):
        if eps_wr <= 0:
            raise ConfigurationError("eps_wr must be positive")
        self.grid = VanillaExp(lam_max, lam_min, n_wr).values().tolist()
        self.lam_max, self.lam_min, self.n_wr, self.eps_wr = float(lam_max), float(lam_min), int(n_wr), float(eps_wr)

    @property
    def lambda0(self):
        return self.grid[0]

    def cursor(self):
        return _WarmCursor(self.grid, self.eps_wr)

    def as_dict(self):
        return {"kind": self.kind, "lam_max": self.lam_max, "lam_min": self.lam_min,
                "n_wr": self.n_wr, "eps_wr": self.eps_wr}


def make_schedule(spec):
    """Schedule from a dict such as ``{"kind": "polynomial", "lam0": 1, "beta": 1}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "vanilla_exp":
            return VanillaExp(spec["lam_max"], spec["lam_min"], spec["n_v"])
        if kind == "polynomial":
            return Polynomial(spec["lam0"], spec.get("beta", 1.0))
        if kind == "warm_restart":
            return WarmRestart(spec["lam_max"], spec["lam_min"], spec["n_wr"], spec["eps_wr"])
        if kind == "explicit":
            return Explicit(spec["values"])
    except KeyError as exc:
        raise ConfigurationError(f"schedule {kind!r} is missing {exc}") from None
    raise ConfigurationError(f"unknown schedule kind {kind!r}")


# iteration ------------------------------------------------------------------

def step_constant(normA, sigma_r, lambda0, sigma_psi):
    """``L = ||A||^2 / sigma_R + lambda0 / sigma_psi`` with ``lambda0 / inf = 0``."""
    if normA < 0 or sigma_r <= 0 or lambda0 < 0:
        raise ValueError("need normA >= 0, sigma_r > 0, lambda0 >= 0")
    extra = 0.0 if sigma_psi == INF else lambda0 / sigma_psi
    return normA ** 2 / sigma_r + extra


def default_tau(A, R, D, lambda0):
    L = step_constant(A.norm_upper, R.sigma_r, lambda0, D.sigma_psi)
    if L <= 0:
        raise ConfigurationError("step constant is zero")
    return 1.0 / L


@dataclass
class SolverState:
    u: np.ndarray
    x: np.ndarray  # grad R*(-A^T u), kept in sync with u
    w: np.ndarray | None = None
    n: int = 0
    lambda_n: float = float("nan")
    tau: float = 1.0


def initial_state(A, R, tau, u0=None):
    u = np.zeros(A.shape_out) if u0 is None else np.array(u0, dtype=float)
    return SolverState(u=u, x=R.grad_conj(-A.adjoint(u)), tau=float(tau))


def iterate(state, A, R, D, lam):
    """Advance ``state`` by one step with parameter ``lam``; returns the new state.

    ``state.x`` must equal ``grad R*(-A^T state.u)``; the returned state
    carries the primal iterate of the new dual point.
    """
    tau, u = state.tau, state.u
    w = u + tau * A.apply(state.x) - tau * D.grad_psi_conj(lam * u)
    if D.phi_is_zero:
        u_new = w
    elif tau == 0.0:
        u_new = u.copy()
    else:
        if lam <= 0:
            raise ConfigurationError("lambda must be positive when phi_y is not trivial")
        u_new = w - tau * D.prox_phi(1.0 / (tau * lam), w / tau)
    x_new = R.grad_conj(-A.adjoint(u_new))
    return SolverState(u=u_new, x=x_new, w=w, n=state.n + 1, lambda_n=float(lam), tau=tau)


def dual_value(u, lam, A, R, D, x=None):
    """``d_lambda(u) = R*(-A^T u) + D_y*(lambda u)/lambda``, extended real.

    ``lam = 0`` gives the limit ``d(u) = R*(-A^T u) + <y, u>`` reached as the
    parameter vanishes. ``x = grad R*(-A^T u)`` may be passed to save one
    evaluation.
    """
    v = -A.adjoint(u)
    r = R.conj_value(v, x)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return r + float(np.vdot(D.y, u))
    dc = datafit_conj_value(D, lam * np.asarray(u))
    if dc == INF or r == INF:
        return INF
    return r + dc / lam


# traces ---------------------------------------------------------------------

@dataclass
class RunTrace:
    """Per-step records; optional columns are ``None`` where not computed."""

    n: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    dual: list = field(default_factory=list)
    gtg: list = field(default_factory=list)
    dist_opt: list = field(default_factory=list)
    sure: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    duals: list = field(default_factory=list)
    tau: float = float("nan")
    final_state: SolverState | None = None

    def __len__(self):
        return len(self.n)

    @property
    def lambdas(self):
        return np.asarray(self.lam)

    def column(self, name):
        return np.array([np.nan if v is None else v for v in getattr(self, name)], dtype=float)

    def to_csv(self, path=None):
        """Write (or return) the CSV with fixed 17-significant-digit floats."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        nrows = len(self.n)

        def fmt(col, i):
            if i >= len(col) or col[i] is None:
                return ""
            return format(float(col[i]), ".17g")

        for i in range(nrows):
            wr.writerow([str(self.n[i]), fmt(self.lam, i), fmt(self.dual, i), fmt(self.gtg, i),
                         fmt(self.dist_opt, i), fmt(self.sure, i), fmt(self.wall_ms, i)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="ascii", newline="") as fh:
                fh.write(text)
        return text


def trajectory(A, R, D, schedule, max_iters, tau=None, u0=None, record_dual=True):
    """Generator over ``(state, lam, dual)`` after each step.

    Adaptive schedules are fed the dual values they need; the dual value is
    always computed for them even if ``record_dual`` is off.
    """
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    if tau is None:
        tau = default_tau(A, R, D, schedule.lambda0)
    if tau <= 0:
        raise ConfigurationError("tau must be positive")
    state = initial_state(A, R, tau, u0)
    cur = schedule.cursor()
    adaptive = schedule.adaptive
    d_lam, d_at = None, None  # last dual value and the parameter it was computed with
    for _ in range(max_iters):
        lam = cur.current()
        if lam is None:
            return
        if adaptive and d_at != lam:
            d_lam = dual_value(state.u, lam, A, R, D, state.x)
        state = iterate(state, A, R, D, lam)
        # one reduction per array; overflow in the sum also signals divergence
        if not math.isfinite(float(np.sum(state.u)) + float(np.sum(state.x))):
            raise DivergenceError(f"non-finite iterate at step {state.n}")
        dual = dual_value(state.u, lam, A, R, D, state.x) if (record_dual or adaptive) else None
        if adaptive:
            cur.advance(d_lam, dual)
            d_lam, d_at = dual, lam
        else:
            cur.advance()
        yield state, lam, dual


def run(A, R, D, schedule, max_iters, tau=None, u0=None, callbacks=(), x_true=None,
        x_dagger=None, keep_iterates=False, keep_duals=False, record_dual=True, timing=False):
    """Run the iteration and record a :class:`RunTrace`.

    Parameters
    ----------
    callbacks : sequence of callables
        Each is called as ``cb(state, lam)`` after every step; return values
        are ignored.
    x_true, x_dagger : ndarray, optional
        Enable the ``gtg`` and ``dist_opt`` columns.
    timing : bool
        Record wall time per step. Off by default so traces are reproducible.
    """
    from .stopping import gtg  # local import, stopping depends on this module

    trace = RunTrace()
    if tau is None:
        tau = default_tau(A, R, D, schedule.lambda0)
    trace.tau = float(tau)
    t0 = time.perf_counter()
    try:
        for state, lam, dual in trajectory(A, R, D, schedule, max_iters, tau, u0, record_dual):
            trace.n.append(state.n)
            trace.lam.append(lam)
            trace.dual.append(dual)
            trace.gtg.append(None if x_true is None else gtg(state.x, x_true))
            trace.dist_opt.append(None if x_dagger is None else float(np.linalg.norm(state.x - x_dagger)))
            trace.sure.append(None)
            trace.wall_ms.append((time.perf_counter() - t0) * 1e3 if timing else None)
            if keep_iterates:
                trace.iterates.append(state.x)
            if keep_duals:
                trace.duals.append(state.u)
            for cb in callbacks:
                cb(state, lam)
            trace.final_state = state
    except DivergenceError as exc:
        exc.trace = trace
        raise
    return trace
