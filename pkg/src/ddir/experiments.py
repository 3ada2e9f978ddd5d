"""Batch experiments: deblurring, phase-retrieval tomography, method comparison
and empirical contraction estimates.

Every (noise level x denoiser) cell draws its noise from its own
:class:`~ddir.grid.RandomSource` seeded from ``(seed, cell_index)``, so a
given config and seed always yields byte-identical output files.
"""
from __future__ import annotations

import configparser
import csv
import logging
import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .denoisers import (IdentityDenoiser, MedianDenoiser, TVProximalDenoiser, c_q,
                        estimate_q)
from .grid import RandomSource, add_noise, norm
from .io import load_image, save_csv, save_pgm
from .metrics import report
from .operators import GaussianBlur, ParallelRadon, PhaseRetrievalModel, wiener_deconvolve
from .phantoms import make_phantom
from .solver import (SolverConfig, ddir_solve, denoiser_q,
                     pnp_fbs_solve)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "make_denoiser",
    "run_deblur",
    "run_phase_ct",
    "run_compare",
    "run_estimate_q",
    "SUMMARY_FIELDS",
]

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ["problem", "cell", "method", "denoiser", "delta_rel", "k_dp",
                  "termination", "re", "psnr", "ssim", "C", "feasible"]

_PHANTOM_KINDS = ("shepp-logan", "binary-blobs", "flat", "impulse")
_DENOISERS = ("median", "tv-prox", "identity")


@dataclass
class ExperimentConfig:
    """All knobs of one experiment. ``None`` solver fields take the
    problem's published defaults (see :meth:`solver_config`)."""

    problem: str = "deblur"
    phantom: str = "shepp-logan"
    side: Optional[int] = None
    blob_fraction: float = 0.5
    sigma: float = 1.5
    num_angles: int = 60
    zeta: Optional[float] = None
    denoisers: tuple = ("median",)
    median_window: int = 3
    median_q: Optional[float] = None
    tv_omega: float = 0.2
    noise_levels: tuple = (0.005,)
    seed: int = 0
    u0: Optional[str] = None
    gamma0: Optional[float] = None
    gamma1: Optional[float] = None
    gamma: Optional[float] = None
    nu0: Optional[float] = None
    nu1: Optional[float] = None
    tau: Optional[float] = None
    max_iters: Optional[int] = None
    lambda_exponent: int = 2
    wiener_nsr: Optional[float] = None
    pnp_alpha: float = 0.01
    pnp_s: float = 1.0
    pnp_rel_tol: float = 1e-6
    pnp_max_iters: int = 1000
    small: bool = False

    def __post_init__(self):
        if self.problem not in ("deblur", "phase-ct"):
            raise ValueError(f"unknown problem {self.problem!r}")
        self.noise_levels = tuple(float(d) for d in self.noise_levels)
        self.denoisers = tuple(self.denoisers)
        if not self.noise_levels:
            raise ValueError("noise_levels must not be empty")
        if any(not d > 0 for d in self.noise_levels):
            raise ValueError("noise levels must be positive")
        if not self.denoisers:
            raise ValueError("denoisers must not be empty")
        for name in self.denoisers:
            if name not in _DENOISERS:
                raise ValueError(f"unknown denoiser {name!r}")
        if self.phantom not in _PHANTOM_KINDS and not os.path.isfile(self.phantom):
            raise ValueError(f"phantom must be one of {_PHANTOM_KINDS} or an image file")
        if self.u0 not in (None, "data", "constant", "zero", "truth"):
            raise ValueError(f"unknown u0 rule {self.u0!r}")

    @property
    def image_side(self):
        side = self.side or (256 if self.problem == "deblur" else 128)
        return side // 2 if self.small else side

    @property
    def initial_guess(self):
        if self.u0 is not None:
            return self.u0
        return "data" if self.problem == "deblur" else "constant"

    def solver_config(self):
        base = SolverConfig.deblur() if self.problem == "deblur" else SolverConfig.phase_ct()
        overrides = {name: getattr(self, name)
                     for name in ("gamma0", "gamma1", "gamma", "nu0", "nu1", "tau", "max_iters")
                     if getattr(self, name) is not None}
        overrides["lambda_exponent"] = self.lambda_exponent
        if self.zeta is not None:
            overrides["zeta"] = self.zeta
        return base.with_(**overrides)

    def with_(self, **changes):
        return replace(self, **changes)


def _parse_value(name, raw, kind):
    raw = raw.strip()
    if name in ("denoisers", "noise_levels"):
        # an empty list is kept so validation can reject it
        items = [s for s in raw.replace(",", " ").split() if s]
        return tuple(float(s) for s in items) if name == "noise_levels" else tuple(items)
    if raw.lower() in ("none", ""):
        return None
    if name == "small":
        return raw.lower() in ("1", "true", "yes", "on")
    if kind in ("int", "Optional[int]"):
        return int(raw)
    if kind in ("float", "Optional[float]"):
        return float(raw)
    return raw


def load_config(path=None, **overrides):
    """Read an INI file of ``key = value`` lines into an :class:`ExperimentConfig`.

    Section names are only for grouping; keys must be field names (dashes
    are accepted for underscores). Non-``None`` ``overrides`` win over the
    file.
    """
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        for section in parser.sections():
            for key, raw in parser.items(section):
                name = key.replace("-", "_")
                if name not in types:
                    raise ValueError(f"{path}: unknown key {key!r} in [{section}]")
                values[name] = _parse_value(name, raw, types[name])
    values.update({k: v for k, v in overrides.items() if v is not None})
    values = {k: v for k, v in values.items() if v is not None}
    return ExperimentConfig(**values)


def make_denoiser(name, cfg=None):
    cfg = cfg or ExperimentConfig()
    if name == "median":
        return MedianDenoiser(window=cfg.median_window, q=cfg.median_q)
    if name == "tv-prox":
        return TVProximalDenoiser(omega=cfg.tv_omega)
    if name == "identity":
        return IdentityDenoiser()
    raise ValueError(f"unknown denoiser {name!r}")


def _truth(cfg):
    side = cfg.image_side
    if cfg.phantom in _PHANTOM_KINDS:
        return make_phantom(cfg.phantom, side, seed=cfg.seed, blob_fraction=cfg.blob_fraction)
    img = load_image(cfg.phantom)
    if img.shape[0] != img.shape[1]:
        raise ValueError(f"phantom image must be square, got {img.shape}")
    return img


def _model(cfg, side):
    if cfg.problem == "deblur":
        return GaussianBlur(cfg.sigma)
    zeta = cfg.zeta if cfg.zeta is not None else 0.1
    return PhaseRetrievalModel(ParallelRadon(side, cfg.num_angles), zeta=zeta)


def _initial_guess(rule, model, v, truth):
    if rule == "data":
        if v.shape != truth.shape:
            raise ValueError("u0 = data needs data and image on the same grid")
        return v.copy()
    if rule == "zero":
        return np.zeros_like(truth)
    if rule == "truth":
        return truth.copy()
    # constant image scaled so that ||G(c 1)|| = ||v||; G is homogeneous of
    # degree 1 (blur) or 2 (phase retrieval)
    ones = np.ones_like(truth)
    g1 = norm(model.apply(ones))
    if g1 == 0.0:
        return np.zeros_like(truth)
    ratio = norm(v) / g1
    return (ratio if model.is_linear else math.sqrt(ratio)) * ones


def _cell_name(label, delta_rel):
    return f"{label}_d{delta_rel:g}"


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


class _Writer:
    """Collects summary rows and feasibility lines for one output directory."""

    def __init__(self, out):
        self.out = Path(out) if out is not None else None
        self.rows = []
        self.feasibility = []
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def cell(self, cell, result=None, reconstruction=None):
        if self.out is None:
            return
        if result is not None:
            result.trace.to_csv(self.out / f"trace_{cell}.csv")
        if reconstruction is not None:
            save_csv(reconstruction, self.out / f"rec_{cell}.csv")
            save_pgm(np.clip(reconstruction, 0.0, 1.0), self.out / f"rec_{cell}.pgm")

    def add_row(self, row):
        self.rows.append(row)

    def add_feasibility(self, cell, feas):
        self.feasibility.append(
            f"{cell}: C = {feas.C!r}  C0 = {feas.C0!r}  H = {feas.H!r}  "
            f"c_q = {feas.c_q!r}  zeta = {feas.zeta!r}  ok = {feas.ok}  "
            f"structural_ok = {feas.structural_ok}")

    def finish(self):
        if self.out is None:
            return self.rows
        with open(self.out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
            w.writeheader()
            for row in self.rows:
                w.writerow({k: _fmt(row.get(k, "")) for k in SUMMARY_FIELDS})
        if self.feasibility:
            (self.out / "feasibility.txt").write_text("\n".join(self.feasibility) + "\n",
                                                      encoding="utf-8")
        return self.rows


def _metric_row(truth, rec):
    m = report(truth, rec)
    return {"re": m.re, "psnr": m.psnr_db, "ssim": m.ssim}


def _run_ddir_cells(cfg, out):
    truth = _truth(cfg)
    model = _model(cfg, truth.shape[0])
    clean = model.apply(truth)
    scfg = cfg.solver_config()
    writer = _Writer(out)
    index = 0
    for delta_rel in cfg.noise_levels:
        for name in cfg.denoisers:
            rng = RandomSource.for_cell(cfg.seed, index)
            index += 1
            v = add_noise(clean, delta_rel, rng)
            denoiser = make_denoiser(name, cfg)
            q = denoiser_q(denoiser, truth.shape, seed=cfg.seed)
            u0 = _initial_guess(cfg.initial_guess, model, v.values, truth)
            result = ddir_solve(model, v, denoiser, u0, scfg, truth=truth, q=q)
            cell = _cell_name(name, delta_rel)
            log.info("%s: k_dp = %d (%s)", cell, result.stopping_index, result.termination_reason)
            writer.cell(cell, result, result.reconstruction)
            writer.add_feasibility(cell, result.feasibility)
            row = {"problem": cfg.problem, "cell": cell, "method": "ddir", "denoiser": name,
                   "delta_rel": delta_rel, "k_dp": result.stopping_index,
                   "termination": result.termination_reason,
                   "C": result.feasibility.C, "feasible": result.feasibility.ok}
            row.update(_metric_row(truth, result.reconstruction))
            writer.add_row(row)
    return writer.finish()


def run_deblur(cfg, out=None):
    """Gaussian-blur deblurring over ``noise_levels x denoisers``.

    Returns the summary rows; with ``out`` set, also writes summary.csv,
    feasibility.txt and per-cell traces and reconstructions.
    """
    if cfg.problem != "deblur":
        cfg = cfg.with_(problem="deblur")
    return _run_ddir_cells(cfg, out)


def run_phase_ct(cfg, out=None):
    """Phase-retrieval tomography ``|R u|^2`` over ``noise_levels x denoisers``."""
    if cfg.problem != "phase-ct":
        cfg = cfg.with_(problem="phase-ct")
    return _run_ddir_cells(cfg, out)


def run_compare(cfg, out=None):
    """Wiener, PnP-FBS and DDIR with the TV-prox denoiser on shared noisy data.

    One noise realisation per noise level; all three methods see it.
    """
    if cfg.problem != "deblur":
        raise ValueError("comparison is defined for deblurring only")
    truth = _truth(cfg)
    model = _model(cfg, truth.shape[0])
    clean = model.apply(truth)
    scfg = cfg.solver_config()
    writer = _Writer(out)
    for index, delta_rel in enumerate(cfg.noise_levels):
        v = add_noise(clean, delta_rel, RandomSource.for_cell(cfg.seed, index))
        base = {"problem": "deblur", "delta_rel": delta_rel}

        cell = _cell_name("wiener", delta_rel)
        rec = wiener_deconvolve(model, v, nsr=cfg.wiener_nsr)
        writer.cell(cell, reconstruction=rec)
        row = dict(base, cell=cell, method="wiener", denoiser="", k_dp="",
                   termination="closed-form", C="", feasible="")
        row.update(_metric_row(truth, rec))
        writer.add_row(row)

        tv = TVProximalDenoiser(omega=cfg.tv_omega)
        cell = _cell_name("pnp", delta_rel)
        res = pnp_fbs_solve(model, v, tv, alpha=cfg.pnp_alpha, s=cfg.pnp_s,
                            rel_tol=cfg.pnp_rel_tol, max_iters=cfg.pnp_max_iters, truth=truth)
        writer.cell(cell, res, res.reconstruction)
        row = dict(base, cell=cell, method="pnp-fbs", denoiser="tv-prox",
                   k_dp=res.stopping_index, termination=res.termination_reason, C="", feasible="")
        row.update(_metric_row(truth, res.reconstruction))
        writer.add_row(row)

        cell = _cell_name("ddir", delta_rel)
        res = ddir_solve(model, v, tv, v.values, scfg, truth=truth, q=tv.q_hint)
        writer.cell(cell, res, res.reconstruction)
        writer.add_feasibility(cell, res.feasibility)
        row = dict(base, cell=cell, method="ddir", denoiser="tv-prox",
                   k_dp=res.stopping_index, termination=res.termination_reason,
                   C=res.feasibility.C, feasible=res.feasibility.ok)
        row.update(_metric_row(truth, res.reconstruction))
        writer.add_row(row)
    return writer.finish()


@dataclass(frozen=True)
class QReport:
    denoiser: str
    q: float
    c_q: float
    pairs: int
    side: int

    @property
    def contractive(self):
        return self.q < 1.0

    def lines(self):
        return [f"denoiser = {self.denoiser}", f"pairs = {self.pairs}", f"side = {self.side}",
                f"q = {self.q:.6f}", f"c_q = {self.c_q:.6f}",
                f"contractive = {self.contractive}"]


def run_estimate_q(name="tv-prox", pairs=100, side=64, seed=0, cfg=None):
    """Empirical contraction constant of a named denoiser."""
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    denoiser = make_denoiser(name, cfg)
    q = estimate_q(denoiser, pairs, RandomSource(seed), shape=(side, side))
    return QReport(name, q, c_q(q), pairs, side)
