"""Denoiser-driven iterative regularisation and the baselines it is compared to.

The noisy-data iteration is

    u_{k+1} = u_k - mu_k G'(u_k)* (G(u_k) - v) - lambda_k (u_k - D_{h_k}(u_k)),

with ``D_h = h D + (1 - h) I``, adaptive ``mu_k``/``lambda_k``, and the
discrepancy principle ``||G(u_k) - v|| <= tau * delta`` as stopping rule.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator, clone

from .denoisers import TVProximalDenoiser, c_q, estimate_q
from .grid import Measurement, RandomSource, as_image, norm
from .operators import estimate_norm_bound, wiener_deconvolve

__all__ = [
    "SolverConfig",
    "IterationTrace",
    "ReconstructionResult",
    "Feasibility",
    "DivergenceError",
    "harmonic_schedule",
    "compute_mu",
    "compute_lambda",
    "check_feasibility",
    "ddir_solve",
    "ddir_solve_exact",
    "pnp_fbs_solve",
    "denoiser_q",
    "DDIR",
    "PnPFBS",
    "WienerDeconvolution",
]

log = logging.getLogger(__name__)

DISCREPANCY = "discrepancy-satisfied"
MAX_ITERS = "max-iters-reached"
RELATIVE_CHANGE = "relative-change"
RESIDUAL_FLOOR = "residual-floor"

H_MAX = 1.0 - 1e-6


def harmonic_schedule(k):
    """``h_k = 1/(k+1)``, pulled just inside (0, 1) at k = 0."""
    return min(1.0 / (k + 1.0), H_MAX)


def constant_schedule(h):
    def schedule(k):
        return h
    schedule.__name__ = f"constant_{h}"
    return schedule


class DivergenceError(RuntimeError):
    """Iterates blew up; ``trace`` holds everything recorded before the abort."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    """Fixed parameters of the iteration.

    Defaults are the linear deblurring setup; :meth:`phase_ct` gives the
    phase-retrieval tomography setup. ``zeta=None`` takes the model's own
    tangential-cone constant.
    """

    gamma0: float = 0.1
    gamma1: float = 0.4
    gamma: float = 0.3
    nu0: float = 0.1
    nu1: float = 0.3
    tau: float = 2.0
    max_iters: int = 1000
    h_schedule: Callable[[int], float] = harmonic_schedule
    zeta: Optional[float] = None
    lambda_exponent: int = 2
    gap_rtol: float = 1e-14
    divergence_factor: float = 10.0
    residual_floor: Optional[float] = None

    def __post_init__(self):
        if not self.tau > 1:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if not 0 < self.gamma <= self.gamma1:
            raise ValueError("need 0 < gamma <= gamma1")
        if self.gamma0 <= 0 or self.nu0 < 0 or self.nu1 < 0:
            raise ValueError("gamma0 must be positive and nu0, nu1 non-negative")
        if self.lambda_exponent not in (1, 2):
            raise ValueError("lambda_exponent must be 1 or 2")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.zeta is not None and not 0 <= self.zeta < 1:
            raise ValueError("zeta must lie in [0, 1)")

    @classmethod
    def deblur(cls, **overrides):
        return cls(**overrides)

    @classmethod
    def phase_ct(cls, **overrides):
        # gamma is not published for this setup; 1.9 keeps C > 0 at zeta = 0.1
        params = dict(tau=1.5, gamma0=0.01, gamma1=2.0, gamma=1.9, nu0=0.05, nu1=0.1)
        params.update(overrides)
        return cls(**params)

    def h(self, k):
        return min(max(self.h_schedule(k), 1e-12), H_MAX)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class IterationTrace:
    """Per-iteration record. The row for the returned iterate has no step
    quantities (``mu``, ``lambda``, ``h``, ``gap`` are NaN)."""

    k: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    h: list = field(default_factory=list)
    gap: list = field(default_factory=list)
    error: list = field(default_factory=list)

    COLUMNS = ("k", "residual", "mu", "lambda", "h", "gap", "error")

    def append(self, k, residual, mu=math.nan, lam=math.nan, h=math.nan, gap=math.nan,
               error=math.nan):
        self.k.append(int(k))
        self.residual.append(float(residual))
        self.mu.append(float(mu))
        self.lam.append(float(lam))
        self.h.append(float(h))
        self.gap.append(float(gap))
        self.error.append(float(error))

    def __len__(self):
        return len(self.k)

    def column(self, name):
        attr = {"lambda": "lam"}.get(name, name)
        return np.asarray(getattr(self, attr), dtype=np.float64)

    def rows(self):
        return zip(self.k, self.residual, self.mu, self.lam, self.h, self.gap, self.error)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            for row in self.rows():
                writer.writerow([row[0]] + [repr(x) for x in row[1:]])

    @classmethod
    def from_csv(cls, path):
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != cls.COLUMNS:
                raise ValueError(f"unexpected trace header {header}")
            for row in reader:
                trace.append(int(row[0]), *(float(x) for x in row[1:]))
        return trace


@dataclass(frozen=True)
class Feasibility:
    """Positivity diagnostics for the monotonicity constants.

    ``C`` governs noisy data, ``C0`` exact data and ``H`` is the structural
    quantity that must stay below 1.
    """

    C: float
    ok: bool
    H: float
    C0: float
    c_q: float
    zeta: float

    @property
    def structural_ok(self):
        return self.H < 1.0


@dataclass
class ReconstructionResult:
    reconstruction: np.ndarray
    stopping_index: int
    termination_reason: str
    trace: IterationTrace
    feasibility: Optional[Feasibility] = None
    switch_index: Optional[int] = None
    noise_level: float = 0.0

    @property
    def discrepancy_satisfied(self):
        return self.termination_reason == DISCREPANCY


def _sq(a):
    a = np.asarray(a, dtype=np.float64).ravel()
    return float(np.dot(a, a))


def compute_mu(model, u, residual, cfg, grad=None):
    """Adaptive step ``min(gamma0 ||r||^2 / ||G'(u)* r||^2, gamma1)``.

    Returns ``gamma1`` when the gradient vanishes.
    """
    if grad is None:
        grad = model.adjoint(u, residual)
    gn2 = _sq(grad)
    if gn2 == 0.0:
        return cfg.gamma1
    return min(cfg.gamma0 * _sq(residual) / gn2, cfg.gamma1)


def compute_lambda(u, d_out, residual_norm, cfg):
    """Denoiser weight ``min(nu0 ||r||^2 / gap^e, nu1)``, zero at a fixed point."""
    gap = norm(np.asarray(u) - np.asarray(d_out))
    if gap <= cfg.gap_rtol * norm(u):
        return 0.0
    return min(cfg.nu0 * residual_norm ** 2 / gap ** cfg.lambda_exponent, cfg.nu1)


def check_feasibility(cfg, c_q_value, zeta=None):
    """Evaluate ``C = gamma - nu0 (nu1 - c_q) - gamma1 (gamma0 + zeta + (1 + zeta)/tau)``.

    ``ok`` requires ``C > 0`` and ``c_q <= nu1``.
    """
    if zeta is None:
        zeta = cfg.zeta if cfg.zeta is not None else 0.0
    denoiser_term = cfg.nu0 * (cfg.nu1 - c_q_value)
    H = cfg.gamma0 + zeta + (1.0 + zeta) / cfg.tau
    C = cfg.gamma - denoiser_term - cfg.gamma1 * H
    C0 = cfg.gamma - cfg.gamma1 * (cfg.gamma0 + zeta) - denoiser_term
    ok = C > 0 and c_q_value <= cfg.nu1
    return Feasibility(C=C, ok=bool(ok), H=H, C0=C0, c_q=c_q_value, zeta=zeta)


def denoiser_q(denoiser, shape, seed=0):
    """Contraction constant attached to ``denoiser``: its hint if it has one,
    otherwise a seeded empirical estimate at ``shape``."""
    q = denoiser.q_hint
    if q is None:
        q = estimate_q(denoiser, 100, RandomSource(seed), shape=shape)
    return q


def _model_zeta(model, cfg):
    return cfg.zeta if cfg.zeta is not None else getattr(model, "zeta", 0.0)


def _feasibility(model, denoiser, shape, cfg, q):
    if q is None:
        q = denoiser_q(denoiser, shape)
    return check_feasibility(cfg, c_q(q), _model_zeta(model, cfg))


def _data(v, name="v"):
    if isinstance(v, Measurement):
        return v.values, v.noise_level
    return np.asarray(v, dtype=np.float64), None


def ddir_solve(model, v_noisy, denoiser, u0, cfg=None, truth=None, noise_level=None, q=None,
               callback=None):
    """Run the noisy-data iteration until the discrepancy principle holds.

    Parameters
    ----------
    model : ForwardModel
    v_noisy : Measurement or array
        Noisy data. A plain array needs ``noise_level``.
    denoiser : Denoiser
        The base denoiser ``D``; averaging with ``h_k`` happens here.
    u0 : array
        Initial guess.
    cfg : SolverConfig
    truth : array, optional
        Ground truth; fills the ``error`` column of the trace.
    q : float, optional
        Contraction constant for the feasibility report.
    callback : callable, optional
        Called as ``callback(k, u)`` before each update.

    Returns
    -------
    ReconstructionResult
    """
    cfg = cfg if cfg is not None else SolverConfig()
    v, delta = _data(v_noisy)
    if noise_level is not None:
        delta = float(noise_level)
    if delta is None or not delta > 0:
        raise ValueError("noisy-data solver needs noise_level > 0; use ddir_solve_exact for exact data")
    u = as_image(u0, "u0").copy()
    truth = as_image(truth, "truth") if truth is not None else None
    feas = _feasibility(model, denoiser, u.shape, cfg, q)
    if not feas.ok:
        log.warning("parameters infeasible: C = %.4g, c_q = %.4g, nu1 = %.4g", feas.C, feas.c_q, cfg.nu1)
    threshold = cfg.tau * delta
    trace = IterationTrace()
    r0 = None
    for k in range(cfg.max_iters + 1):
        r = model.apply(u) - v
        rn = norm(r)
        err = norm(u - truth) if truth is not None else math.nan
        if not math.isfinite(rn) or not np.all(np.isfinite(u)):
            raise DivergenceError(f"non-finite iterate at k={k}", trace)
        if r0 is None:
            r0 = rn
        elif rn > cfg.divergence_factor * r0:
            trace.append(k, rn, error=err)
            raise DivergenceError(f"residual grew from {r0:.4g} to {rn:.4g} at k={k}", trace)
        if rn <= threshold:
            trace.append(k, rn, error=err)
            return ReconstructionResult(u, k, DISCREPANCY, trace, feas, noise_level=delta)
        if k == cfg.max_iters:
            trace.append(k, rn, error=err)
            return ReconstructionResult(u, k, MAX_ITERS, trace, feas, noise_level=delta)
        if callback is not None:
            callback(k, u)
        h = cfg.h(k)
        d_h = h * denoiser(u) + (1.0 - h) * u
        g = model.adjoint(u, r)
        mu = compute_mu(model, u, r, cfg, grad=g)
        lam = compute_lambda(u, d_h, rn, cfg)
        trace.append(k, rn, mu, lam, h, norm(u - d_h), err)
        u = u - mu * g - lam * (u - d_h)
    raise AssertionError("unreachable")


def ddir_solve_exact(model, v_exact, denoiser, u0, cfg=None, truth=None, q=None, lambda_exponent=None):
    """Exact-data iteration with the permanent switch to adaptive Landweber.

    Once ``||u_k - D_{h_k}(u_k)||`` vanishes the denoiser weight is set to
    zero for the rest of the run. Runs ``cfg.max_iters`` updates, or stops
    early when ``cfg.residual_floor`` is set and the residual drops to it.
    ``lambda_exponent`` overrides the config (1 uses the unsquared gap).
    """
    cfg = cfg if cfg is not None else SolverConfig()
    if lambda_exponent is not None:
        cfg = cfg.with_(lambda_exponent=lambda_exponent)
    v, delta = _data(v_exact)
    if delta not in (None, 0.0):
        raise ValueError("exact-data solver expects noise_level == 0")
    u = as_image(u0, "u0").copy()
    truth = as_image(truth, "truth") if truth is not None else None
    feas = _feasibility(model, denoiser, u.shape, cfg, q)
    trace = IterationTrace()
    switched = False
    switch_index = None
    for k in range(cfg.max_iters + 1):
        r = model.apply(u) - v
        rn = norm(r)
        err = norm(u - truth) if truth is not None else math.nan
        if not math.isfinite(rn) or not np.all(np.isfinite(u)):
            raise DivergenceError(f"non-finite iterate at k={k}", trace)
        if cfg.residual_floor is not None and rn <= cfg.residual_floor:
            trace.append(k, rn, error=err)
            return ReconstructionResult(u, k, RESIDUAL_FLOOR, trace, feas, switch_index)
        if k == cfg.max_iters:
            trace.append(k, rn, error=err)
            return ReconstructionResult(u, k, MAX_ITERS, trace, feas, switch_index)
        h = cfg.h(k)
        d_h = h * denoiser(u) + (1.0 - h) * u
        gap = norm(u - d_h)
        g = model.adjoint(u, r)
        mu = compute_mu(model, u, r, cfg, grad=g)
        if not switched and gap <= cfg.gap_rtol * norm(u):
            switched = True
            switch_index = k
        lam = 0.0 if switched else compute_lambda(u, d_h, rn, cfg)
        trace.append(k, rn, mu, lam, h, gap, err)
        u = u - mu * g - lam * (u - d_h)
    raise AssertionError("unreachable")


def pnp_fbs_solve(model, v_noisy, prox_denoiser=None, alpha=0.01, s=1.0, rel_tol=1e-6,
                  max_iters=1000, u0=None, truth=None, norm_bound=None):
    """Plug-and-play forward-backward splitting with a TV proximal step.

    ``u_{k+1} = prox_{alpha s TV}(u_k - s G*(G u_k - v))`` until the relative
    change ``||u_{k+1} - u_k|| / ||u_k||`` is at most ``rel_tol`` or
    ``max_iters`` updates have run. ``rel_tol = 0`` disables the test.
    """
    if not model.is_linear:
        raise ValueError("PnP-FBS needs a linear forward model")
    v, delta = _data(v_noisy)
    u = as_image(u0 if u0 is not None else v, "u0").copy()
    truth = as_image(truth, "truth") if truth is not None else None
    if norm_bound is None:
        norm_bound = estimate_norm_bound(model, u, iters=50)
    if norm_bound > 0 and not s < 2.0 / norm_bound ** 2:
        raise ValueError(f"step s={s} violates s < 2/||G||^2 = {2.0 / norm_bound ** 2:.4g}")
    base = prox_denoiser if prox_denoiser is not None else TVProximalDenoiser()
    prox = clone(base).set_params(omega=alpha * s)
    trace = IterationTrace()
    reason = MAX_ITERS
    k = 0
    for k in range(max_iters):
        r = model.apply(u) - v
        trace.append(k, norm(r), mu=s, error=norm(u - truth) if truth is not None else math.nan)
        u_next = prox.prox(u - s * model.transpose(r))
        change = norm(u_next - u) / max(norm(u), 1e-300)
        u = u_next
        if rel_tol > 0 and change <= rel_tol:
            reason = RELATIVE_CHANGE
            k += 1
            break
    else:
        k = max_iters
    trace.append(k, norm(model.apply(u) - v), error=norm(u - truth) if truth is not None else math.nan)
    return ReconstructionResult(u, k, reason, trace, noise_level=delta or 0.0)


class DDIR(BaseEstimator):
    """Scikit-learn style front end to :func:`ddir_solve`.

    ``fit(v)`` runs the reconstruction and stores ``reconstruction_``,
    ``stopping_index_``, ``termination_reason_``, ``trace_`` and
    ``feasibility_``. Exact data (noise level 0) dispatches to
    :func:`ddir_solve_exact`.

    Examples
    --------
    >>> est = DDIR(GaussianBlur(1.5), MedianDenoiser())          # doctest: +SKIP
    >>> est.fit(v_noisy, truth=phantom).reconstruction_          # doctest: +SKIP
    """

    def __init__(self, forward_model=None, denoiser=None, gamma0=0.1, gamma1=0.4, gamma=0.3,
                 nu0=0.1, nu1=0.3, tau=2.0, max_iters=1000, h_schedule=harmonic_schedule,
                 zeta=None, lambda_exponent=2, q=None):
        self.forward_model = forward_model
        self.denoiser = denoiser
        self.gamma0 = gamma0
        self.gamma1 = gamma1
        self.gamma = gamma
        self.nu0 = nu0
        self.nu1 = nu1
        self.tau = tau
        self.max_iters = max_iters
        self.h_schedule = h_schedule
        self.zeta = zeta
        self.lambda_exponent = lambda_exponent
        self.q = q

    @classmethod
    def from_config(cls, forward_model, denoiser, cfg, q=None):
        return cls(forward_model, denoiser, gamma0=cfg.gamma0, gamma1=cfg.gamma1, gamma=cfg.gamma,
                   nu0=cfg.nu0, nu1=cfg.nu1, tau=cfg.tau, max_iters=cfg.max_iters,
                   h_schedule=cfg.h_schedule, zeta=cfg.zeta, lambda_exponent=cfg.lambda_exponent, q=q)

    def config(self):
        return SolverConfig(gamma0=self.gamma0, gamma1=self.gamma1, gamma=self.gamma, nu0=self.nu0,
                            nu1=self.nu1, tau=self.tau, max_iters=self.max_iters,
                            h_schedule=self.h_schedule, zeta=self.zeta,
                            lambda_exponent=self.lambda_exponent)

    def fit(self, y, u0=None, truth=None, noise_level=None):
        if self.forward_model is None or self.denoiser is None:
            raise ValueError("forward_model and denoiser must be set")
        values, delta = _data(y)
        if noise_level is not None:
            delta = noise_level
        if delta is None:
            raise ValueError("noise level unknown: pass a Measurement or noise_level=")
        start = u0 if u0 is not None else values
        cfg = self.config()
        if delta > 0:
            res = ddir_solve(self.forward_model, values, self.denoiser, start, cfg, truth,
                             noise_level=delta, q=self.q)
        else:
            res = ddir_solve_exact(self.forward_model, values, self.denoiser, start, cfg, truth, q=self.q)
        self.result_ = res
        self.reconstruction_ = res.reconstruction
        self.stopping_index_ = res.stopping_index
        self.termination_reason_ = res.termination_reason
        self.trace_ = res.trace
        self.feasibility_ = res.feasibility
        return self

    def reconstruct(self, y, **fit_params):
        return self.fit(y, **fit_params).reconstruction_


class PnPFBS(BaseEstimator):
    """Scikit-learn style front end to :func:`pnp_fbs_solve`."""

    def __init__(self, forward_model=None, prox_denoiser=None, alpha=0.01, s=1.0, rel_tol=1e-6,
                 max_iters=1000):
        self.forward_model = forward_model
        self.prox_denoiser = prox_denoiser
        self.alpha = alpha
        self.s = s
        self.rel_tol = rel_tol
        self.max_iters = max_iters

    def fit(self, y, u0=None, truth=None):
        res = pnp_fbs_solve(self.forward_model, y, self.prox_denoiser, self.alpha, self.s,
                            self.rel_tol, self.max_iters, u0=u0, truth=truth)
        self.result_ = res
        self.reconstruction_ = res.reconstruction
        self.n_iter_ = res.stopping_index
        self.trace_ = res.trace
        return self


class WienerDeconvolution(BaseEstimator):
    """Wiener filter baseline for Gaussian blur; ``nsr=None`` uses
    ``delta**2 / ||v||**2``."""

    def __init__(self, forward_model=None, nsr=None):
        self.forward_model = forward_model
        self.nsr = nsr

    def fit(self, y):
        self.reconstruction_ = wiener_deconvolve(self.forward_model, y, self.nsr)
        return self
