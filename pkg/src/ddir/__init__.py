"""Denoiser-driven iterative regularisation for imaging inverse problems."""
from .denoisers import (AveragedDenoiser, IdentityDenoiser, MedianDenoiser,
                        TVProximalDenoiser, c_q, estimate_q, tv_prox)
from .grid import Measurement, RandomSource, add_noise, inner, norm
from .metrics import psnr, relative_error, report, ssim
from .operators import (GaussianBlur, ParallelRadon, PhaseRetrievalModel,
                        estimate_norm_bound, wiener_deconvolve)
from .phantoms import binary_blobs, shepp_logan
from .solver import (DDIR, PnPFBS, SolverConfig, WienerDeconvolution, check_feasibility,
                     ddir_solve, ddir_solve_exact, pnp_fbs_solve)

__version__ = "0.1.0"

__all__ = [
    "AveragedDenoiser", "IdentityDenoiser", "MedianDenoiser", "TVProximalDenoiser",
    "c_q", "estimate_q", "tv_prox",
    "Measurement", "RandomSource", "add_noise", "inner", "norm",
    "psnr", "relative_error", "report", "ssim",
    "GaussianBlur", "ParallelRadon", "PhaseRetrievalModel", "estimate_norm_bound",
    "wiener_deconvolve",
    "binary_blobs", "shepp_logan",
    "DDIR", "PnPFBS", "SolverConfig", "WienerDeconvolution", "check_feasibility",
    "ddir_solve", "ddir_solve_exact", "pnp_fbs_solve",
]
