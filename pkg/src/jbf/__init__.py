"""Trainable joint bilateral filtering for volumetric images.

An exact, differentiable joint bilateral filter engine: forward
filtering over truncated windows, closed-form gradients with respect to
the kernel widths, the input, and the guide, a stacked multi-layer
pipeline, Adam training of the widths on paired volumes, image-quality
metrics, and a finite-difference gradient checker.
"""

from . import parallel  # noqa: F401  (must precede any numba import)

from .volume import (Volume, Roi, crop, load_volume, save_volume,
                     save_slice_pgm, make_phantom)
from .forward import (SIGMA_ORDER, FilterParams, Window, ForwardCache,
                      gauss_range, gauss_spatial, jbf_forward, jbf_filter)
from .backward import (GradientBundle, grad_sigma, grad_input, grad_guide,
                       backward)
from .pipeline import (GUIDE_MODES, PipelineState, PipelineTape, default_window,
                       gaussian_smooth, resolve_guide, pipeline_forward,
                       pipeline_backward, mse_loss, save_params, load_params)
from .optim import (AdamState, TrainConfig, adam_step, project_sigmas, train,
                    write_loss_csv)
from .metrics import (MetricsReport, rmse, psnr, ssim, wilcoxon_signed_rank,
                      compute_metrics, write_metrics_csv)
from .gradcheck import GradCheckReport, QuantityCheck, gradcheck, make_test_instance
from .parallel import set_threads, get_threads, max_threads

__version__ = "0.1.0"

__all__ = [
    "Volume", "Roi", "crop", "load_volume", "save_volume", "save_slice_pgm",
    "make_phantom",
    "SIGMA_ORDER", "FilterParams", "Window", "ForwardCache",
    "gauss_range", "gauss_spatial", "jbf_forward", "jbf_filter",
    "GradientBundle", "grad_sigma", "grad_input", "grad_guide", "backward",
    "GUIDE_MODES", "PipelineState", "PipelineTape", "default_window",
    "gaussian_smooth", "resolve_guide", "pipeline_forward", "pipeline_backward",
    "mse_loss", "save_params", "load_params",
    "AdamState", "TrainConfig", "adam_step", "project_sigmas", "train",
    "write_loss_csv",
    "MetricsReport", "rmse", "psnr", "ssim", "wilcoxon_signed_rank",
    "compute_metrics", "write_metrics_csv",
    "GradCheckReport", "QuantityCheck", "gradcheck", "make_test_instance",
    "set_threads", "get_threads", "max_threads",
    "__version__",
]
