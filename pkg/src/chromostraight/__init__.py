"""Chromosome straightening toolkit.

Geometric pipeline: segment a single-chromosome crop, thin it to a
medial axis, cut rotated patches along the axis, and restack them into
an upright image.  Companion utilities bend straight chromosomes for
synthetic training data, mask grid cells for inpainting-style training
bundles, and score straightening quality.
"""

from .imageio import histogram, load_image, save_image, smooth_histogram
from .manifest import RunConfig, SampleRecord, assign_folds, load_manifest, sample_seed, save_manifest
from .maskcond import (
    ConditionGrid,
    MaskSpec,
    PatchGrid,
    apply_mask,
    condition_image,
    condition_patch,
    inference_condition,
    render_condition,
    sample_mask,
    split_grid,
)
from .metrics import (
    ScoreReport,
    classification_metrics,
    density_profile,
    dp_score,
    l_score,
    ma_score,
    sobel_score,
)
from .segmentation import (
    SegmentationError,
    background_mean,
    binarize,
    fill_holes,
    largest_component,
    otsu_threshold,
    segment,
)
from .skeleton import (
    Branch,
    BranchPruneError,
    BranchReport,
    MedialAxis,
    SkeletonError,
    extend_axis,
    mask_axis,
    prune_branches,
    trace_axis,
    zhang_suen_thin,
)
from .straighten import PatchSequence, bilinear_sample, extract_patches, ma_straighten, rearrange_patches
from .synthbend import BendError, BendSpec, generate_bent, sample_bend_spec

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
