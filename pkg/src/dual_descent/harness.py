"""Experiment configuration, synthetic problems and the solve / semiconvergence / compare drivers.

A configuration is one flat JSON object. Keys and defaults are listed in
``DEFAULTS``; unknown keys are rejected.
"""
from __future__ import annotations

import json
import math
import os
import platform
from dataclasses import dataclass

import numpy as np

from . import __version__
from .datafit import LOSS_KINDS, make_loss
from .operators import gaussian_blur, haar_transform, identity, matrix_operator
from .perturbation import NoiseSpec, apply_noise, measure_delta
from .pgm import read_pgm, write_pgm
from .regularizer import l1_analysis, squared_norm, tv_quad
from .solver import ConfigurationError, Explicit, make_schedule, run, step_constant, trajectory
from .stopping import StopReport, report_gtg, report_sure, sure_curve

PROBLEMS = ("matrix", "blocks", "bumps", "checkerboard", "image")
REGULARIZERS = ("squared_norm", "haar_l1", "tv")

DEFAULTS = {
    "problem": "blocks",
    "size": 64,
    "image_path": None,
    "matrix": None,
    "x_true": None,
    "blur": True,
    "kernel_size": 9,
    "blur_variance": 10.0,
    "loss": "l1",
    "huber_sigma": 1.0,
    "l1l2_a1": 1.0,
    "l1l2_a2": 1.0,
    "kl_floor": 1e-3,
    "regularizer": "haar_l1",
    "reg_mu": 1.0,
    "reg_sigma": 1.0,
    "haar_levels": 3,
    "tv_inner_iters": 50,
    "tv_inner_tol": 1e-6,
    "schedule": {"kind": "vanilla_exp", "lam_max": 10.0, "lam_min": 0.01, "n_v": 1000},
    "noise": {"kind": "none"},
    "sure": None,
    "max_iters": 1000,
    "seed": 0,
    "checkpoints": 5,
    "label": None,
}


class ValidationError(ValueError):
    pass


# configuration ---------------------------------------------------------------

def load_config(source, overrides=None):
    """Merge a JSON file (or dict) over ``DEFAULTS`` and validate it."""
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {source}: {exc}") from None
    else:
        raw = dict(source or {})
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    cfg = dict(DEFAULTS)
    cfg.update(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg["problem"] not in PROBLEMS:
        raise ValidationError(f"problem must be one of {PROBLEMS}")
    if cfg["problem"] == "matrix" and cfg["matrix"] is None:
        raise ValidationError("matrix problem needs 'matrix'")
    if cfg["problem"] == "image":
        if not cfg["image_path"] or not os.path.exists(cfg["image_path"]):
            raise ValidationError(f"image file not found: {cfg['image_path']}")
    if cfg["loss"] not in LOSS_KINDS:
        raise ValidationError(f"loss must be one of {LOSS_KINDS}")
    if cfg["regularizer"] not in REGULARIZERS:
        raise ValidationError(f"regularizer must be one of {REGULARIZERS}")
    if int(cfg["max_iters"]) < 1:
        raise ValidationError("max_iters must be >= 1")
    if int(cfg["size"]) < 2:
        raise ValidationError("size must be >= 2")
    for key in ("reg_mu", "reg_sigma", "huber_sigma", "l1l2_a1", "l1l2_a2", "kl_floor", "blur_variance"):
        if not float(cfg[key]) > 0:
            raise ValidationError(f"{key} must be positive")
    try:
        make_schedule(cfg["schedule"])
        noise_spec(cfg)
    except (ValueError, TypeError) as exc:
        raise ValidationError(str(exc)) from None
    if cfg["sure"] is not None and not isinstance(cfg["sure"], dict):
        raise ValidationError("'sure' must be an object or null")


def noise_spec(cfg, scale=1.0):
    n = dict(cfg["noise"] or {"kind": "none"})
    spec = NoiseSpec(kind=n.get("kind", "none"), variance=float(n.get("variance", 0.0)),
                     intensity=float(n.get("intensity", 0.0)), peak=float(n.get("peak", 1.0)),
                     seed=int(cfg["seed"]))
    return spec.scaled(scale) if scale != 1.0 else spec


# problems ----------------------------------------------------------------------

def synthetic_image(kind, size=64, seed=0):
    """Seeded ground truth in [0, 1]: ``blocks``, ``bumps`` or ``checkerboard``."""
    rng = np.random.default_rng(seed)
    img = np.zeros((size, size))
    if kind == "blocks":
        img += 0.1
        for _ in range(6):
            r0, c0 = rng.integers(0, size - size // 4, size=2)
            h, w = rng.integers(size // 8, size // 2, size=2)
            img[r0 : r0 + h, c0 : c0 + w] = rng.uniform(0.2, 0.9)
    elif kind == "bumps":
        rr, cc = np.mgrid[0:size, 0:size]
        for _ in range(5):
            r0, c0 = rng.uniform(0, size, size=2)
            s = rng.uniform(size / 16, size / 6)
            img += rng.uniform(0.3, 1.0) * np.exp(-((rr - r0) ** 2 + (cc - c0) ** 2) / (2 * s * s))
        img = 0.9 * img / img.max() + 0.05
    elif kind == "checkerboard":
        sq = max(size // 8, 1)
        rr, cc = np.mgrid[0:size, 0:size]
        img = np.where(((rr // sq) + (cc // sq)) % 2 == 0, 0.8, 0.2)
    else:
        raise ValidationError(f"unknown synthetic image {kind!r}")
    return img


@dataclass
class Problem:
    A: object
    x_true: np.ndarray
    y_clean: np.ndarray
    is_image: bool


def build_problem(cfg):
    if cfg["problem"] == "matrix":
        A = matrix_operator(cfg["matrix"])
        if cfg["x_true"] is None:
            raise ValidationError("matrix problem needs 'x_true'")
        x = np.asarray(cfg["x_true"], dtype=float)
        if x.shape != A.shape_in:
            raise ValidationError("x_true does not match the matrix")
        return Problem(A, x, A.apply(x), False)
    if cfg["problem"] == "image":
        x = read_pgm(cfg["image_path"])
    else:
        x = synthetic_image(cfg["problem"], int(cfg["size"]), int(cfg["seed"]))
    if cfg["blur"]:
        A = gaussian_blur(x.shape[0], x.shape[1], int(cfg["kernel_size"]), float(cfg["blur_variance"]))
    else:
        A = identity(x.shape)
    return Problem(A, x, A.apply(x), True)


def build_regularizer(cfg, shape):
    kind = cfg["regularizer"]
    if kind == "squared_norm":
        return squared_norm()
    if kind == "haar_l1":
        return l1_analysis(haar_transform(shape, int(cfg["haar_levels"])), cfg["reg_mu"], cfg["reg_sigma"])
    return tv_quad(cfg["reg_mu"], cfg["reg_sigma"], int(cfg["tv_inner_iters"]), float(cfg["tv_inner_tol"]))


def loss_params(cfg):
    return {"sigma": cfg["huber_sigma"], "a1": cfg["l1l2_a1"], "a2": cfg["l1l2_a2"]}


def prepare_data(cfg, problem, noise_scale=1.0):
    """Noisy datum, clean datum (clamped for KL) and certificate."""
    y_clean = problem.y_clean
    y_hat = apply_noise(y_clean, noise_spec(cfg, noise_scale))
    if cfg["loss"] == "kl":
        floor = float(cfg["kl_floor"])
        y_clean = np.maximum(y_clean, floor)
        y_hat = np.maximum(y_hat, floor)
    return y_hat, y_clean, measure_delta(cfg["loss"], y_clean, y_hat)


# drivers -----------------------------------------------------------------------

def log_checkpoints(n_max, count):
    """``count`` log-spaced distinct step indices in ``1..n_max``."""
    if n_max < 1 or count < 1:
        return []
    pts = np.unique(np.rint(np.logspace(0, math.log10(n_max), count)).astype(int))
    return [int(p) for p in pts]


@dataclass
class SolveResult:
    cfg: dict
    trace: object
    problem: Problem
    y_hat: np.ndarray
    cert: object
    tau: float
    L: float
    gtg_report: StopReport
    sure_report: StopReport | None
    snapshots: dict
    interior: bool

    @property
    def n_bar(self):
        return self.gtg_report.chosen_n

    @property
    def n_hat(self):
        return None if self.sure_report is None else self.sure_report.chosen_n


def interior_minimum(n_bar, n_total, margin=0.05):
    """True when ``n_bar`` is outside the first and last ``margin`` fraction of the run."""
    k = max(1, int(math.ceil(margin * n_total)))
    return k < n_bar <= n_total - k


def solve(cfg, noise_scale=1.0, with_sure=None):
    """Run one configured experiment in memory (no files written)."""
    problem = build_problem(cfg)
    y_hat, _, cert = prepare_data(cfg, problem, noise_scale)
    A = problem.A
    D = make_loss(cfg["loss"], y_hat, **loss_params(cfg))
    R = build_regularizer(cfg, A.shape_in)
    schedule = make_schedule(cfg["schedule"])
    L = step_constant(A.norm_upper, R.sigma_r, schedule.lambda0, D.sigma_psi)
    tau = 1.0 / L
    max_iters = int(cfg["max_iters"])
    wanted = set(log_checkpoints(max_iters, int(cfg["checkpoints"])))
    snaps = {}
    best = {"gtg": math.inf, "n": 0, "x": None}

    def keep(state, lam):
        if state.n in wanted:
            snaps[state.n] = state.x
        err = float(np.linalg.norm(state.x - problem.x_true))
        if err < best["gtg"]:
            best.update(gtg=err, n=state.n, x=state.x)

    trace = run(A, R, D, schedule, max_iters, tau=tau, callbacks=[keep], x_true=problem.x_true,
                keep_iterates=not problem.is_image)
    final = trace.final_state
    snaps[final.n] = final.x
    gtg_rep = report_gtg(trace)
    snaps[gtg_rep.chosen_n] = best["x"]

    sure_rep = None
    sure_cfg = cfg["sure"]
    if with_sure is None:
        with_sure = sure_cfg is not None
    if with_sure:
        sure_cfg = dict(sure_cfg or {})
        sigma2 = sure_cfg.get("sigma2")
        if sigma2 is None:
            # realized noise level; only available for synthetic experiments
            sigma2 = float(np.mean((y_hat - problem.y_clean) ** 2))
        window = int(sure_cfg.get("window", 10))
        curve = sure_curve(A, R, D, trace.lambdas, float(sigma2), int(sure_cfg.get("xi_seed", cfg["seed"])), tau=tau)
        trace.sure = curve.tolist()
        sure_rep = report_sure(trace, curve, window)
        n_hat = sure_rep.chosen_n
        if n_hat not in snaps:
            for state, _, _ in trajectory(A, R, D, Explicit(trace.lambdas[:n_hat]), n_hat, tau, record_dual=False):
                pass
            snaps[n_hat] = state.x
    return SolveResult(cfg, trace, problem, y_hat, cert, tau, L, gtg_rep, sure_rep, snaps,
                       interior_minimum(gtg_rep.chosen_n, len(trace)))


def metadata(res):
    return {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": int(res.cfg["seed"]),
        "delta": res.cert.delta,
        "theta": res.cert.theta,
        "loss": res.cfg["loss"],
        "tau": res.tau,
        "L": res.L,
        "iterations": len(res.trace),
        "n_bar": res.n_bar,
        "gtg_at_n_bar": res.gtg_report.value,
        "n_hat": res.n_hat,
        "interior_minimum": res.interior,
        "config": res.cfg,
    }


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_artifacts(res, out):
    """Trace CSV, PGM checkpoints (images) or iterates CSV (vectors), stop report and metadata."""
    os.makedirs(out, exist_ok=True)
    res.trace.to_csv(os.path.join(out, "trace.csv"))
    if res.problem.is_image:
        write_pgm(os.path.join(out, "ground_truth.pgm"), res.problem.x_true)
        write_pgm(os.path.join(out, "data_clean.pgm"), res.problem.y_clean)
        write_pgm(os.path.join(out, "data_noisy.pgm"), res.y_hat)
        for n, x in sorted(res.snapshots.items()):
            write_pgm(os.path.join(out, f"iterate_{n:06d}.pgm"), x)
    else:
        with open(os.path.join(out, "iterates.csv"), "w", encoding="ascii") as fh:
            d = res.problem.x_true.size
            fh.write("n," + ",".join(f"x{i}" for i in range(d)) + "\n")
            for n, x in zip(res.trace.n, res.trace.iterates):
                fh.write(f"{n}," + ",".join(format(float(v), ".17g") for v in x) + "\n")
    report = {"gtg": res.gtg_report.to_dict()}
    if res.sure_report is not None:
        report["sure"] = res.sure_report.to_dict()
    _dump_json(os.path.join(out, "stop_report.json"), report)
    _dump_json(os.path.join(out, "metadata.json"), metadata(res))


def cli_solve(cfg, out=None):
    res = solve(cfg)
    if out:
        write_artifacts(res, out)
    return res


SWEEP_SCALES = (1.0, 0.5, 0.25)


def cli_semiconvergence(cfg, out=None, scales=SWEEP_SCALES):
    """GTG curves for noise scaled by each entry of ``scales``; returns one summary row per scale."""
    rows = []
    for s in scales:
        res = solve(cfg, noise_scale=s, with_sure=False)
        rows.append({"scale": s, "delta": res.cert.delta, "n_bar": res.n_bar, "gtg_min": res.gtg_report.value,
                     "iterations": len(res.trace), "interior": res.interior})
        if out:
            write_artifacts(res, os.path.join(out, f"scale_{s:g}"))
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "semiconvergence.csv"), "w", encoding="ascii") as fh:
            fh.write("scale,delta,n_bar,gtg_min,iterations,interior\n")
            for r in rows:
                fh.write(f"{r['scale']:g},{r['delta']:.17g},{r['n_bar']},{r['gtg_min']:.17g},"
                         f"{r['iterations']},{int(r['interior'])}\n")
    return rows


def n_bar_monotone(rows):
    """``n_bar`` nondecreasing along rows sorted by decreasing ``delta``."""
    ordered = sorted(rows, key=lambda r: -r["delta"])
    return all(a["n_bar"] <= b["n_bar"] for a, b in zip(ordered, ordered[1:]))


_SHARED_KEYS = ("problem", "size", "image_path", "matrix", "x_true", "blur", "kernel_size", "blur_variance",
                "noise", "seed", "loss", "kl_floor")


def cli_compare(cfg_a, cfg_b, out=None, labels=("vanilla", "warm")):
    """Iterations and GTG at ``n_bar`` / ``n_hat`` for two schedules on the same problem."""
    for k in _SHARED_KEYS:
        if cfg_a[k] != cfg_b[k]:
            raise ConfigurationError(f"configs differ in {k!r}; compare needs the same problem and noise")
    rows = []
    for cfg, default in zip((cfg_a, cfg_b), labels):
        res = solve(cfg, with_sure=True)
        n_hat = res.n_hat
        rows.append({
            "method": cfg["label"] or default,
            "iterations": len(res.trace),
            "n_bar": res.n_bar,
            "gtg_n_bar": res.gtg_report.value,
            "n_hat": n_hat,
            "gtg_n_hat": float(res.trace.gtg[n_hat - 1]),
        })
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "compare.csv"), "w", encoding="ascii") as fh:
            fh.write("method,iterations,n_bar,gtg_n_bar,n_hat,gtg_n_hat\n")
            for r in rows:
                fh.write(f"{r['method']},{r['iterations']},{r['n_bar']},{r['gtg_n_bar']:.17g},"
                         f"{r['n_hat']},{r['gtg_n_hat']:.17g}\n")
        with open(os.path.join(out, "compare.md"), "w", encoding="utf-8") as fh:
            fh.write(format_table(rows))
    return rows


def format_table(rows):
    lines = ["| method | iterations | n_bar | GTG(x_n_bar) | n_hat | GTG(x_n_hat) |",
             "|---|---|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r['method']} | {r['iterations']} | {r['n_bar']} | {r['gtg_n_bar']:.3e} | "
                     f"{r['n_hat']} | {r['gtg_n_hat']:.3e} |")
    return "\n".join(lines) + "\n"
