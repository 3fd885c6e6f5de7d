"""Transitive illumination transfer for building image harmonization pairs.

A foreground is moved from its own illumination into a standard condition
and on into a reference image's condition, using polynomial color transforms
fitted on color-checker patches.
"""
from .color import (
    ColorTransform,
    FeatureSpec,
    LinearColor,
    PatchSet,
    apply_transform,
    expand_features,
    linear_to_srgb,
    read_reference_colors,
    srgb_to_linear,
)
from .compositing import composite, crop_excluding_checker
from .errors import *  # noqa: F401,F403
from .fitting import fit_pair, fit_residual, fit_transform, gradient_descent_fit
from .manifest import Config, ImageRecord, Manifest, PairRecord, load_manifest, save_manifest
from .metrics import fmse, mse, psnr
from .patches import CheckerAnnotation, quad_to_grid_homography, sample_patch_colors
from .pipeline import build_dataset, near_duplicate_scan, select_references, validate_output
from .transfer import ForegroundMask, transfer_region, transitive_transfer

__version__ = "0.1.0"
