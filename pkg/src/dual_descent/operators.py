"""Linear operators on vectors and images.

Vectors and images are float64 numpy arrays; a plain vector is 1-D, an
image is 2-D and a gradient field is ``(2, rows, cols)``.
"""
from __future__ import annotations

import math

import numpy as np

SAFETY = 1.01


class DimensionError(ValueError):
    pass


class LinearOperator:
    """Forward/adjoint pair with a cached upper bound on the operator norm."""

    def __init__(self, apply, adjoint, shape_in, shape_out, name="op"):
        self._apply = apply
        self._adjoint = adjoint
        self.shape_in = tuple(shape_in)
        self.shape_out = tuple(shape_out)
        self.name = name
        self._norm_upper = None

    def __call__(self, x):
        return self.apply(x)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape_in:
            raise DimensionError(f"{self.name}: expected input shape {self.shape_in}, got {x.shape}")
        return self._apply(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != self.shape_out:
            raise DimensionError(f"{self.name}: expected adjoint input shape {self.shape_out}, got {y.shape}")
        return self._adjoint(y)

    @property
    def norm_upper(self):
        if self._norm_upper is None:
            power_norm(self)
        return self._norm_upper

    @norm_upper.setter
    def norm_upper(self, value):
        self._norm_upper = float(value)

    def __repr__(self):
        return f"LinearOperator({self.name}, {self.shape_in} -> {self.shape_out})"


def power_norm(op, iters=200, seed=0):
    """Estimate ``||op||`` by power iteration on ``op^T op``.

    Returns the raw estimate; ``op.norm_upper`` is set to ``1.01`` times it.
    The squared estimate ``||M v_{k+1}|| / ||M v_k||`` is nondecreasing in
    ``k`` for the positive semidefinite ``M = op^T op``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.shape_in)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        mv = op.adjoint(op.apply(v))
        nrm = np.linalg.norm(mv)
        if nrm == 0.0:
            est = 0.0
            break
        est = math.sqrt(nrm)
        v = mv / nrm
    op.norm_upper = SAFETY * est
    return est


def matrix_operator(M, name="matrix"):
    """Dense matrix acting on 1-D vectors; ``norm_upper`` from the exact spectral norm."""
    M = np.array(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError("matrix operator needs a 2-D array")
    op = LinearOperator(lambda x: M @ x, lambda y: M.T @ y, (M.shape[1],), (M.shape[0],), name=name)
    op.matrix = M
    op.norm_upper = SAFETY * np.linalg.norm(M, 2)
    return op


def identity(shape):
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    op = LinearOperator(lambda x: x.copy(), lambda y: y.copy(), shape, shape, name="identity")
    op.norm_upper = SAFETY
    return op


# Gaussian blur -------------------------------------------------------------

def gaussian_kernel(size=9, variance=10.0):
    """Sampled, normalized 2-D Gaussian kernel (entries sum to one)."""
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * variance))
    g /= g.sum()
    return np.outer(g, g)


def _reflect_blur_matrix(n, g):
    """1-D convolution with ``g`` under half-sample symmetric padding, as a dense ``n x n`` matrix."""
    k = g.size
    half = k // 2
    # padded index -> source index, matching np.pad(mode="symmetric")
    src = np.arange(-half, n + half)
    src = np.where(src < 0, -src - 1, src)
    src = np.where(src >= n, 2 * n - src - 1, src)
    B = np.zeros((n, n))
    flipped = g[::-1]
    for i in range(n):
        for j in range(k):
            B[i, src[i + j]] += flipped[j]
    return B


def gaussian_blur(rows, cols, kernel_size=9, variance=10.0):
    """2-D Gaussian blur with reflective boundary.

    The sampled Gaussian is separable, so the operator is ``B_r X B_c^T``
    with dense 1-D blur matrices; the adjoint is ``B_r^T Y B_c``.
    """
    if rows < kernel_size or cols < kernel_size:
        raise DimensionError(f"image {rows}x{cols} smaller than kernel {kernel_size}")
    r = np.arange(kernel_size) - (kernel_size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * variance))
    g /= g.sum()
    Br = _reflect_blur_matrix(rows, g)
    Bc = Br if cols == rows else _reflect_blur_matrix(cols, g)
    op = LinearOperator(
        lambda x: Br @ x @ Bc.T,
        lambda y: Br.T @ y @ Bc,
        (rows, cols),
        (rows, cols),
        name="gaussian_blur",
    )
    op.kernel = np.outer(g, g)
    return op


# Haar wavelets -------------------------------------------------------------

_S2 = math.sqrt(0.5)


def _haar_fwd_axis(x, axis, n):
    """One analysis level along ``axis`` on the leading ``n`` entries."""
    x = np.moveaxis(x, axis, 0)
    seg = x[:n]
    a = (seg[0::2] + seg[1::2]) * _S2
    d = (seg[0::2] - seg[1::2]) * _S2
    x[: n // 2] = a
    x[n // 2 : n] = d
    return np.moveaxis(x, 0, axis)


def _haar_inv_axis(x, axis, n):
    x = np.moveaxis(x, axis, 0)
    a = x[: n // 2].copy()
    d = x[n // 2 : n].copy()
    x[0:n:2] = (a + d) * _S2
    x[1:n:2] = (a - d) * _S2
    return np.moveaxis(x, 0, axis)


def haar_transform(shape, levels=3):
    """Orthogonal multilevel Haar transform (Mallat ordering); adjoint is the inverse.

    ``shape`` is ``(n,)`` for signals or ``(rows, cols)`` for images.
    """
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    for s in shape:
        if s % (2 ** levels):
            raise DimensionError(f"size {s} not divisible by 2**{levels}")

    def fwd(x):
        out = x.copy()
        sizes = list(shape)
        for _ in range(levels):
            block = out[tuple(slice(0, s) for s in sizes)]
            for ax, s in enumerate(sizes):
                block = _haar_fwd_axis(block, ax, s)
            sizes = [s // 2 for s in sizes]
        return out

    def inv(c):
        out = c.copy()
        all_sizes = [[s // 2 ** k for s in shape] for k in range(levels)]
        for sizes in reversed(all_sizes):
            block = out[tuple(slice(0, s) for s in sizes)]
            for ax in reversed(range(len(sizes))):
                block = _haar_inv_axis(block, ax, sizes[ax])
        return out

    op = LinearOperator(fwd, inv, shape, shape, name="haar")
    op.norm_upper = SAFETY
    op.levels = levels
    return op


# discrete gradient ---------------------------------------------------------

def _grad(x):
    g = np.zeros((2,) + x.shape)
    g[0, :-1, :] = x[1:, :] - x[:-1, :]
    g[1, :, :-1] = x[:, 1:] - x[:, :-1]
    return g


def _div(p):
    """Negative adjoint of the forward-difference gradient."""
    v, h = p[0], p[1]
    d = np.zeros(v.shape)
    d[:-1, :] += v[:-1, :]
    d[1:, :] -= v[:-1, :]
    d[:, :-1] += h[:, :-1]
    d[:, 1:] -= h[:, :-1]
    return d


def grad_2d(rows, cols):
    """Forward differences with Neumann boundary; channel 0 vertical, channel 1 horizontal.

    A ``1 x n`` image is accepted (the vertical channel is then identically
    zero), which gives the 1-D difference operator.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise DimensionError("gradient needs at least two pixels")
    op = LinearOperator(_grad, lambda p: -_div(p), (rows, cols), (2, rows, cols), name="grad_2d")
    op.norm_upper = math.sqrt(8.0)
    return op


def div_2d(p):
    return _div(np.asarray(p, dtype=float))
