"""Early-stopping criteria: ground-truth gap, SURE with a min-slope heuristic, theoretical stopping time."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .solver import ConfigurationError, Explicit, trajectory


def gtg(x, x_true):
    """Ground-truth gap ``||x - x_true|| / d`` with ``d`` the number of entries."""
    x = np.asarray(x, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x.shape != x_true.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_true.shape}")
    return float(np.linalg.norm(x - x_true)) / x.size


def sure_epsilon(y_hat, xi):
    """Finite-difference step ``1e-4 (1 + ||y_hat||) / ||xi||``."""
    return 1e-4 * (1.0 + float(np.linalg.norm(y_hat))) / float(np.linalg.norm(xi))


def sure_curve(A, R, D, lambdas, sigma2, xi_seed=0, tau=None, u0=None, eps=None, return_derivs=False):
    """SURE along the trajectory defined by the realized parameters ``lambdas``.

    ``SURE(x_n) = ||A x_n - y_hat||^2 / d + (2 sigma2 / d) <A D_n, xi>`` where
    ``D_n = (x_n^eps - x_n) / eps`` and ``x_n^eps`` is the iterate of a twin run
    on ``y_hat + eps xi``. Both runs replay ``lambdas`` so adaptive schedules
    are reproduced exactly; ``tau`` must be the step of the original run.

    Returns
    -------
    curve : ndarray
        One value per step.
    derivs : list of ndarray
        Only when ``return_derivs`` is set; the directional derivatives ``D_n``.
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    y_hat = D.y
    rng = np.random.default_rng(xi_seed)
    xi = rng.standard_normal(y_hat.shape)
    if eps is None:
        eps = sure_epsilon(y_hat, xi)
    d = y_hat.size
    sched = Explicit(lambdas)
    D_eps = D.with_data(y_hat + eps * xi)
    main = trajectory(A, R, D, sched, len(sched.vals), tau, u0, record_dual=False)
    twin = trajectory(A, R, D_eps, sched, len(sched.vals), tau, u0, record_dual=False)
    curve, derivs = [], []
    for (s, _, _), (t, _, _) in zip(main, twin):
        Dn = (t.x - s.x) / eps
        r = A.apply(s.x) - y_hat
        val = float(np.vdot(r, r)) / d + 2.0 * sigma2 / d * float(np.vdot(A.apply(Dn), xi))
        curve.append(val)
        if return_derivs:
            derivs.append(Dn)
    curve = np.array(curve)
    return (curve, derivs) if return_derivs else curve


def smooth(curve, window):
    """Centered moving average over full windows.

    Returns ``(values, offset)``: ``values[j]`` averages
    ``curve[j : j + window]`` and is attributed to index ``j + offset`` with
    ``offset = window // 2``.
    """
    c = np.asarray(curve, dtype=float)
    cs = np.concatenate(([0.0], np.cumsum(c)))
    vals = (cs[window:] - cs[:-window]) / window
    return vals, window // 2


def select_by_min_slope(curve, window=10, rtol=1e-9):
    """Index (0-based) where the smoothed curve is flattest.

    The curve is smoothed by a centered moving average of width ``window``,
    slopes are central differences of the smoothed curve, and the first
    ``window`` indices are excluded as transient. Ties go to the latest
    index.
    """
    c = np.asarray(curve, dtype=float)
    if window < 1:
        raise ConfigurationError("window must be >= 1")
    if c.size < 2 * window or c.size < 3:
        raise ConfigurationError(f"curve of length {c.size} too short for window {window}")
    vals, off = smooth(c, window)
    slopes = np.abs(np.gradient(vals))
    idx = np.arange(vals.size) + off
    keep = idx >= window
    if not keep.any():
        raise ConfigurationError("no admissible index after the transient")
    slopes, idx = slopes[keep], idx[keep]
    best = slopes.min()
    cand = np.nonzero(slopes <= best + rtol * max(best, float(np.max(slopes))) )[0]
    return int(idx[cand[-1]])


def eta(t, alpha, T):
    return t ** alpha * (t - T) ** 1.5


@dataclass(frozen=True)
class TheoreticalStop:
    t: float
    s: float  # t - T, kept separately to avoid cancellation
    n: int
    C1: float
    alpha: float


def theoretical_stop(delta, beta, theta, a, b, T):
    """Solve ``t^alpha (t - T)^(3/2) = C1 / delta`` for ``t > T``.

    ``alpha = beta theta`` and ``C1 = b / (2 a (1 + alpha))``. Bisection runs on
    ``log(t - T)`` until the bracket is at machine precision; ``n = ceil(t)``.
    """
    if delta <= 0 or a <= 0 or b <= 0 or T < 0 or beta < 0 or theta < 0:
        raise ValueError("need delta, a, b > 0 and beta, theta, T >= 0")
    alpha = beta * theta
    C1 = b / (2.0 * a * (1.0 + alpha))
    target = math.log(C1 / delta)

    def f(ls):
        s = math.exp(ls)
        return alpha * math.log(T + s) + 1.5 * ls - target

    lo, hi = -1.0, 1.0
    while f(lo) > 0:
        lo *= 2.0
    while f(hi) < 0:
        hi *= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    s = math.exp(0.5 * (lo + hi))
    t = T + s
    return TheoreticalStop(t=t, s=s, n=int(math.ceil(t)), C1=C1, alpha=alpha)


@dataclass
class StopReport:
    chosen_n: int
    criterion: str
    curve: list = field(default_factory=list)
    smoothing_window: int | None = None
    value: float | None = None

    def to_dict(self, include_curve=False):
        out = asdict(self)
        if not include_curve:
            out.pop("curve")
        return out


def report_gtg(trace):
    """``n-bar``: the step with smallest ground-truth gap (earliest on ties)."""
    curve = trace.column("gtg")
    if np.all(np.isnan(curve)):
        raise ConfigurationError("trace has no ground-truth column")
    i = int(np.nanargmin(curve))
    return StopReport(chosen_n=int(trace.n[i]), criterion="gtg", curve=curve.tolist(), value=float(curve[i]))


def report_sure(trace, curve, window=10):
    """``n-hat``: min-slope choice on the SURE curve."""
    i = select_by_min_slope(curve, window)
    return StopReport(chosen_n=int(trace.n[i]), criterion="sure", curve=list(map(float, curve)),
                      smoothing_window=window, value=float(curve[i]))
