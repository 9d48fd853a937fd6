"""cellsynth: synthetic annotated datasets for cell instance segmentation.

Starting from a few labeled masks, extracts real blobs, synthesizes new
ones by contour interpolation, places them under a density prior with
spacing constraints, and emits labeled masks plus content images and
reference style tiles for a downstream style-transfer renderer.
"""

from .blobs import (
    Blob,
    BlobProvenance,
    Contour,
    RigidTransform,
    extract_blobs,
    get_contour_points,
    interpolate,
    interpolate_blobs,
    rasterize_and_close,
    register,
)
from .dataset_io import (
    BlobStats,
    DatasetManifest,
    ManifestEntry,
    blob_stats,
    flatten,
    load_annotated_pair,
    read_manifest,
    select_reference,
    tile_image,
    tiles_with_counts,
    write_manifest,
)
from .errors import (
    BlobGenerationError,
    CellSynthError,
    DegenerateBlobError,
    DimensionMismatchError,
    EmptyMaskError,
    FileFormatError,
    InsufficientInputError,
    RasterizationRejectedError,
)
from .pipeline import (
    GenConfig,
    StatsReport,
    compare_placement,
    run_pipeline,
    run_stats,
    substream,
)
from .placement import (
    PlacementLog,
    PlacementRecord,
    can_host,
    count_instances,
    greedy_placement,
    prior_adherence,
    random_weighted_placement,
    update_available,
)
from .priors import (
    PerlinParams,
    SpacingDist,
    fit_prior,
    fit_spacing,
    gradient_noise,
    perlin2d,
    sample_spacing,
)

__version__ = "0.1.0"
