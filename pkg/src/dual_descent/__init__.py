"""Diagonal dual descent for iterative regularization of linear inverse problems."""

__version__ = "0.1.0"

from .convex import ConditioningModulus, prox_scalar_bruteforce, soft_threshold  # noqa: E402
from .datafit import huber_loss, kl_loss, l1_loss, l1l2_loss, make_loss, square_loss  # noqa: E402
from .operators import (  # noqa: E402
    DimensionError,
    LinearOperator,
    gaussian_blur,
    grad_2d,
    haar_transform,
    identity,
    matrix_operator,
    power_norm,
)
from .regularizer import l1_analysis, squared_norm, tv_quad  # noqa: E402
from .solver import (  # noqa: E402
    DivergenceError,
    Explicit,
    Polynomial,
    RunTrace,
    VanillaExp,
    WarmRestart,
    dual_value,
    iterate,
    run,
    step_constant,
)
