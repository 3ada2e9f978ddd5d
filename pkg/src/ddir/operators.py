"""Forward models with derivative and adjoint actions.

Every model exposes the same three maps at a base point ``u``::

    apply(u)            -> G(u)
    derivative(u, q)    -> G'(u) q
    adjoint(u, r)       -> G'(u)* r

Linear models ignore the base point in ``derivative``/``adjoint``.
"""
from __future__ import annotations

import logging
import math
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.ndimage
import scipy.sparse

from .grid import RandomSource, as_image, norm

__all__ = [
    "ForwardModel",
    "LinearOperator",
    "GaussianBlur",
    "DenseOperator",
    "ParallelRadon",
    "PhaseRetrievalModel",
    "estimate_norm_bound",
    "wiener_deconvolve",
]

log = logging.getLogger(__name__)


class ForwardModel:
    """Base class for (possibly nonlinear) forward operators.

    ``zeta`` is the tangential-cone constant used only by the feasibility
    check; it is 0 for linear models.
    """

    is_linear = False
    zeta = 0.0

    def apply(self, u):
        raise NotImplementedError

    def derivative(self, u, q):
        raise NotImplementedError

    def adjoint(self, u, r):
        raise NotImplementedError

    def __call__(self, u):
        return self.apply(u)


class LinearOperator(ForwardModel):
    """Linear model; subclasses implement ``_forward`` and ``_transpose``."""

    is_linear = True
    zeta = 0.0

    def _forward(self, u):
        raise NotImplementedError

    def _transpose(self, r):
        raise NotImplementedError

    def apply(self, u):
        return self._forward(np.asarray(u, dtype=np.float64))

    def transpose(self, r):
        return self._transpose(np.asarray(r, dtype=np.float64))

    def derivative(self, u, q):
        return self.apply(q)

    def adjoint(self, u, r):
        return self.transpose(r)


def gaussian_kernel1d(sigma, radius=None):
    """Sampled, truncated Gaussian normalised to unit sum.

    ``sigma == 0`` gives the unit impulse.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.ones(1)
    if radius is None:
        radius = math.ceil(4.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


class GaussianBlur(LinearOperator):
    """Separable Gaussian convolution with half-sample reflective boundary.

    With a symmetric kernel and this boundary the operator is self-adjoint,
    and it is diagonalised by the type-II DCT, which :func:`wiener_deconvolve`
    relies on for an exact inverse.

    Parameters
    ----------
    sigma : float
        Standard deviation of the point spread function, in pixels. ``0``
        gives the identity.
    truncation_radius : int, optional
        Kernel half-width; defaults to ``ceil(4 * sigma)``.
    """

    def __init__(self, sigma=1.5, truncation_radius=None):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.sigma = float(sigma)
        if truncation_radius is None:
            truncation_radius = math.ceil(4.0 * sigma) if sigma > 0 else 0
        if truncation_radius < 0:
            raise ValueError("truncation_radius must be >= 0")
        self.truncation_radius = int(truncation_radius)
        self.kernel = gaussian_kernel1d(self.sigma, self.truncation_radius) if sigma > 0 else np.ones(1)

    def __repr__(self):
        return f"GaussianBlur(sigma={self.sigma}, truncation_radius={self.truncation_radius})"

    @property
    def kernel2d(self):
        return np.outer(self.kernel, self.kernel)

    def _forward(self, u):
        if u.ndim != 2:
            raise ValueError(f"expected a 2-D image, got shape {u.shape}")
        out = scipy.ndimage.correlate1d(u, self.kernel, axis=0, mode="reflect")
        return scipy.ndimage.correlate1d(out, self.kernel, axis=1, mode="reflect")

    # symmetric kernel, symmetric boundary
    _transpose = _forward

    def transfer_function(self, shape):
        """Eigenvalues of the operator in the orthonormal DCT-II basis."""
        return np.outer(self._transfer1d(shape[0]), self._transfer1d(shape[1]))

    def _transfer1d(self, n):
        r = self.truncation_radius
        if r >= n:
            raise ValueError("kernel wider than the image; DCT diagonalisation is not exact")
        m = np.arange(n)[:, None]
        k = np.arange(1, r + 1)[None, :]
        w = self.kernel[r + 1:]
        return self.kernel[r] + 2.0 * (np.cos(np.pi * m * k / n) * w).sum(axis=1)


class DenseOperator(LinearOperator):
    """Explicit matrix acting on row-major flattened images (small toys)."""

    def __init__(self, matrix, image_shape, data_shape=None):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.image_shape = tuple(image_shape)
        if self.matrix.shape[1] != math.prod(self.image_shape):
            raise ValueError("matrix columns do not match the image size")
        self.data_shape = tuple(data_shape) if data_shape is not None else (self.matrix.shape[0],)

    def _forward(self, u):
        if u.shape != self.image_shape:
            raise ValueError(f"shape mismatch: {u.shape} vs {self.image_shape}")
        return (self.matrix @ u.ravel()).reshape(self.data_shape)

    def _transpose(self, r):
        if r.shape != self.data_shape:
            raise ValueError(f"shape mismatch: {r.shape} vs {self.data_shape}")
        return (self.matrix.T @ r.ravel()).reshape(self.image_shape)


def uniform_angles(num_angles):
    """``num_angles`` degrees spaced uniformly over [1, 180], endpoints included."""
    if num_angles == 1:
        return np.array([1.0])
    return np.linspace(1.0, 180.0, num_angles)


class ParallelRadon(LinearOperator):
    """Ray-driven parallel-beam projector with a matched (transposed) backprojector.

    Each ray is sampled at unit steps and every sample is spread to its four
    neighbouring pixels with bilinear weights; the resulting sparse matrix is
    used verbatim for the forward map and transposed for the adjoint.

    Parameters
    ----------
    image_side : int
        Side length of the square image.
    num_angles : int
        Number of projection angles, uniform over [1°, 180°].
    angles : array_like, optional
        Explicit angles in degrees (overrides ``num_angles``).
    circle : bool
        When True the image is assumed supported on the inscribed disk and
        pixels outside it are ignored. The default covers the full square,
        which the ``ceil(sqrt(2) * side)`` detector already spans.
    """

    def __init__(self, image_side, num_angles=60, angles=None, circle=False):
        if image_side < 1:
            raise ValueError("image_side must be positive")
        self.image_side = int(image_side)
        self.angles = np.asarray(angles, dtype=np.float64) if angles is not None else uniform_angles(num_angles)
        self.num_angles = len(self.angles)
        self.detector_count = math.ceil(math.sqrt(2.0) * self.image_side)
        self.circle = bool(circle)

    def __repr__(self):
        return (f"ParallelRadon(image_side={self.image_side}, num_angles={self.num_angles}, "
                f"circle={self.circle})")

    @property
    def image_shape(self):
        return (self.image_side, self.image_side)

    @property
    def data_shape(self):
        return (self.num_angles, self.detector_count)

    @cached_property
    def matrix(self):
        n = self.image_side
        d = self.detector_count
        c = (n - 1) / 2.0
        t = np.arange(d) - (d - 1) / 2.0
        s = np.arange(d) - (d - 1) / 2.0
        rows, cols, vals = [], [], []
        for a, theta in enumerate(np.deg2rad(self.angles)):
            ct, st = math.cos(theta), math.sin(theta)
            # detector offset along (cos, sin); integration along (-sin, cos)
            x = c + t[:, None] * ct - s[None, :] * st
            y = c + t[:, None] * st + s[None, :] * ct
            det = np.broadcast_to(np.arange(d)[:, None], x.shape)
            x0 = np.floor(x)
            y0 = np.floor(y)
            fx = x - x0
            fy = y - y0
            x0 = x0.astype(np.int64)
            y0 = y0.astype(np.int64)
            for dy, dx, w in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                              (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
                yi = y0 + dy
                xi = x0 + dx
                ok = (yi >= 0) & (yi < n) & (xi >= 0) & (xi < n) & (w > 0)
                rows.append((a * d + det[ok]).astype(np.int32))
                cols.append((yi[ok] * n + xi[ok]).astype(np.int32))
                vals.append(w[ok])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        if self.circle:
            yy, xx = np.divmod(cols, n)
            keep = (yy - c) ** 2 + (xx - c) ** 2 <= (n / 2.0) ** 2
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        mat = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(self.num_angles * d, n * n))
        mat = mat.tocsr()
        mat.sum_duplicates()
        return mat

    @cached_property
    def _matrix_t(self):
        return self.matrix.T.tocsr()

    def _forward(self, u):
        if u.shape != self.image_shape:
            raise ValueError(f"shape mismatch: {u.shape} vs {self.image_shape}")
        return (self.matrix @ u.ravel()).reshape(self.data_shape)

    def _transpose(self, r):
        if r.shape != self.data_shape:
            raise ValueError(f"shape mismatch: {r.shape} vs {self.data_shape}")
        return (self._matrix_t @ r.ravel()).reshape(self.image_shape)


class PhaseRetrievalModel(ForwardModel):
    """Intensity-only tomography: ``G(u) = (R u)**2`` element-wise.

    ``zeta`` is not known for this model; it is a user setting consumed only
    by the feasibility diagnostic.
    """

    is_linear = False

    def __init__(self, radon, zeta=0.1):
        if not 0 <= zeta < 1:
            raise ValueError("zeta must lie in [0, 1)")
        self.radon = radon
        self.zeta = float(zeta)

    def __repr__(self):
        return f"PhaseRetrievalModel({self.radon!r}, zeta={self.zeta})"

    @property
    def image_shape(self):
        return self.radon.image_shape

    @property
    def data_shape(self):
        return self.radon.data_shape

    def apply(self, u):
        w = self.radon.apply(u)
        return w * w

    def derivative(self, u, q):
        return 2.0 * self.radon.apply(u) * self.radon.apply(q)

    def adjoint(self, u, r):
        return 2.0 * self.radon.transpose(self.radon.apply(u) * np.asarray(r, dtype=np.float64))


def estimate_norm_bound(model, u, iters=100, rng=None):
    """Power-iteration estimate of ``||G'(u)||`` through ``G'(u)* G'(u)``.

    The Rayleigh-type estimate ``||M q_k||`` is non-decreasing in ``iters``
    for the positive semidefinite ``M = G'(u)* G'(u)``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = rng if rng is not None else RandomSource(0)
    u = np.asarray(u, dtype=np.float64)
    q = rng.standard_normal(u.shape)
    while norm(q) == 0.0:
        q = rng.standard_normal(u.shape)
    q /= norm(q)
    lam = 0.0
    for _ in range(iters):
        mq = model.adjoint(u, model.derivative(u, q))
        lam = norm(mq)
        if lam == 0.0:
            return 0.0
        q = mq / lam
    return math.sqrt(lam)


def wiener_deconvolve(model, v, nsr=None):
    """Wiener filter for :class:`GaussianBlur` data.

    Works in the DCT-II basis that diagonalises the reflective-boundary blur:
    ``u_hat = H v_hat / (H**2 + nsr)``. With ``nsr == 0`` this is the exact
    inverse (when ``H`` has no zeros). ``nsr`` defaults to
    ``delta**2 / ||v||**2`` when ``v`` carries a noise level.
    """
    values = getattr(v, "values", v)
    values = as_image(values, "v")
    if nsr is None:
        delta = getattr(v, "noise_level", 0.0)
        nsr = delta ** 2 / norm(values) ** 2 if delta > 0 else 0.0
    if nsr < 0:
        raise ValueError("nsr must be >= 0")
    h = model.transfer_function(values.shape)
    spec = scipy.fft.dctn(values, type=2, norm="ortho")
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = h / (h * h + nsr)
    gain[~np.isfinite(gain)] = 0.0
    return scipy.fft.idctn(gain * spec, type=2, norm="ortho")
