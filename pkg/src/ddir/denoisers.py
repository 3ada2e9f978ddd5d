"""Image denoisers usable as regularisers.

All denoisers are stateless scikit-learn transformers: ``fit`` is a no-op
and ``transform`` maps a 2-D image to a denoised image of the same shape.
They are also callable, ``D(u)``.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .grid import RandomSource, as_image, norm

__all__ = [
    "Denoiser",
    "IdentityDenoiser",
    "MedianDenoiser",
    "TVProximalDenoiser",
    "AveragedDenoiser",
    "tv_prox",
    "total_variation",
    "estimate_q",
    "c_q",
]

log = logging.getLogger(__name__)


class Denoiser(TransformerMixin, BaseEstimator):
    """Base class. Subclasses implement ``_denoise(u)`` on a float64 image."""

    def fit(self, X=None, y=None):
        return self

    def __sklearn_is_fitted__(self):
        return True

    def transform(self, X):
        return self._denoise(as_image(X, "X"))

    def __call__(self, u):
        return self.transform(u)

    @property
    def q_hint(self):
        """Known upper bound on the contraction constant, or None."""
        return None

    def _denoise(self, u):
        raise NotImplementedError


class IdentityDenoiser(Denoiser):
    """``D(u) = u``. Every image is a fixed point; q = 1."""

    @property
    def q_hint(self):
        return 1.0

    def _denoise(self, u):
        return u.copy()


class MedianDenoiser(Denoiser):
    """Sliding ``window x window`` median with reflective boundary.

    Parameters
    ----------
    window : int
        Odd window side.
    q : float, optional
        Contraction constant to report; the median has no analytic one, so
        by default it is estimated empirically where needed.
    """

    def __init__(self, window=3, q=None):
        self.window = window
        self.q = q
        if window < 1 or window % 2 == 0:
            raise ValueError(f"window must be a positive odd integer, got {window}")

    @property
    def q_hint(self):
        return self.q

    def _denoise(self, u):
        return scipy.ndimage.median_filter(u, size=self.window, mode="reflect")


def _grad(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def _div(px, py):
    # negative adjoint of _grad
    d = np.zeros_like(px)
    d[:, 0] = px[:, 0]
    d[:, 1:-1] = px[:, 1:-1] - px[:, :-2]
    d[:, -1] = -px[:, -2]
    if px.shape[1] == 1:
        d[:, 0] = 0.0
    e = np.zeros_like(py)
    e[0, :] = py[0, :]
    e[1:-1, :] = py[1:-1, :] - py[:-2, :]
    e[-1, :] = -py[-2, :]
    if py.shape[0] == 1:
        e[0, :] = 0.0
    return d + e


def total_variation(u):
    """Isotropic TV with forward differences and Neumann boundary."""
    gx, gy = _grad(np.asarray(u, dtype=np.float64))
    return float(np.sqrt(gx * gx + gy * gy).sum())


def tv_objective(y, u, omega):
    return omega * total_variation(y) + 0.5 * norm(np.asarray(u) - np.asarray(y)) ** 2


def tv_prox(u, omega, step=0.248, max_iter=50, tol=1e-5):
    """``argmin_y omega * TV(y) + 0.5 * ||u - y||**2`` by Chambolle's dual iteration.

    Returns the primal point ``u - omega * div p`` and the number of dual
    iterations performed.
    """
    u = np.asarray(u, dtype=np.float64)
    if omega <= 0:
        return u.copy(), 0
    px = np.zeros_like(u)
    py = np.zeros_like(u)
    g = u / omega
    # preallocated work arrays; the last column of px and last row of py
    # stay zero because the matching gradient components are zero
    w = np.empty_like(u)
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    denom = np.empty_like(u)
    nx = np.empty_like(u)
    ny = np.empty_like(u)
    tmp = np.empty_like(u)
    it = 0
    for it in range(1, max_iter + 1):
        np.subtract(px, g, out=w)
        w[:, 1:] -= px[:, :-1]
        w += py
        w[1:, :] -= py[:-1, :]
        np.subtract(w[:, 1:], w[:, :-1], out=gx[:, :-1])
        np.subtract(w[1:, :], w[:-1, :], out=gy[:-1, :])
        np.multiply(gx, gx, out=denom)
        np.multiply(gy, gy, out=tmp)
        denom += tmp
        np.sqrt(denom, out=denom)
        denom *= step
        denom += 1.0
        np.multiply(gx, step, out=nx)
        nx += px
        nx /= denom
        np.multiply(gy, step, out=ny)
        ny += py
        ny /= denom
        np.subtract(nx, px, out=tmp)
        np.abs(tmp, out=tmp)
        change = tmp.max()
        np.subtract(ny, py, out=tmp)
        np.abs(tmp, out=tmp)
        change = max(change, tmp.max())
        px, nx = nx, px
        py, ny = ny, py
        if change < tol:
            break
    else:
        log.debug("TV dual iteration hit max_iter=%d (last change %.3g)", max_iter, change)
    return u - omega * _div(px, py), it


class TVProximalDenoiser(Denoiser):
    """Scaled TV proximal map ``prox_{omega TV}(u) / (1 + omega)``.

    Contractive with ``q = 1 / (1 + omega)``; the only fixed point is zero.

    Parameters
    ----------
    omega : float
        TV weight.
    dual_step : float
        Step of the dual fixed-point iteration. If the result fails the
        prox descent check, the iteration is rerun with the provably stable
        step 1/8.
    dual_iters : int
        Maximum number of dual iterations.
    dual_tol : float
        Stop when the largest dual-variable change drops below this.
    """

    def __init__(self, omega=0.2, dual_step=0.248, dual_iters=50, dual_tol=1e-5):
        self.omega = omega
        self.dual_step = dual_step
        self.dual_iters = dual_iters
        self.dual_tol = dual_tol
        if omega <= 0:
            raise ValueError("omega must be positive")

    @property
    def q_hint(self):
        return 1.0 / (1.0 + self.omega)

    def prox(self, u):
        """Unscaled proximal point."""
        u = as_image(u, "u")
        y, _ = tv_prox(u, self.omega, self.dual_step, self.dual_iters, self.dual_tol)
        if self.dual_step > 0.125 and tv_objective(y, u, self.omega) > tv_objective(u, u, self.omega):
            log.info("TV dual step %.3g oscillated; falling back to 1/8", self.dual_step)
            y, _ = tv_prox(u, self.omega, 0.125, self.dual_iters, self.dual_tol)
        return y

    def _denoise(self, u):
        return self.prox(u) / (1.0 + self.omega)


class AveragedDenoiser(Denoiser):
    """``D_h(u) = h * D(u) + (1 - h) * u``.

    Shares the fixed points of ``base`` and is ``1 - h (1 - q)`` Lipschitz
    when ``base`` is q-contractive.
    """

    def __init__(self, base, h=0.5):
        self.base = base
        self.h = h
        if not 0.0 < h < 1.0:
            raise ValueError(f"h must lie in (0, 1), got {h}")

    @property
    def q_hint(self):
        q = self.base.q_hint
        return None if q is None else self.lipschitz_bound(q)

    def lipschitz_bound(self, q):
        return 1.0 - self.h * (1.0 - q)

    def _denoise(self, u):
        return self.h * self.base.transform(u) + (1.0 - self.h) * u


def estimate_q(denoiser, num_pairs=100, rng=None, shape=(64, 64), intensity=255.0):
    """Largest observed ``||D(u) - D(v)|| / ||u - v||`` over random image pairs.

    Pixels are i.i.d. uniform on ``[0, intensity]``; identical pairs are
    redrawn. The default 8-bit range matters for denoisers that are not
    scale-invariant: on [0, 1] noise the TV prox flattens almost everything
    and the ratio says little about the contraction constant.
    """
    if num_pairs < 1:
        raise ValueError("num_pairs must be >= 1")
    rng = rng if rng is not None else RandomSource(0)
    best = 0.0
    for _ in range(num_pairs):
        while True:
            u = rng.uniform(shape, 0.0, intensity)
            v = rng.uniform(shape, 0.0, intensity)
            gap = norm(u - v)
            if gap > 0:
                break
        best = max(best, norm(denoiser(u) - denoiser(v)) / gap)
    return best


def c_q(q):
    """Coercivity constant ``(1 - q) / (1 + q)**2``; non-positive for q >= 1."""
    if q >= 1:
        log.warning("q = %.4g >= 1: denoiser is not contractive", q)
    return (1.0 - q) / (1.0 + q) ** 2
