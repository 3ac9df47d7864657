"""Shape histograms and back-projection for unorganized point clouds.

Encodes local surface geometry as a 2-D histogram of inter-normal angle
statistics, back-projects it onto test clouds as a per-point shape-similarity
likelihood, and applies it to binary surface classification and
high-curvature edge detection.
"""

from .cloud_io import (
    CURVED,
    EDGE,
    PLANAR,
    UNLABELED,
    PointCloud,
    load_cloud,
    load_labels,
    save_cloud,
    save_colored_ply,
    save_labels,
)
from .errors import NoModelFound, ParseError, SchemaError
from .evaluation import (
    MetricsReport,
    bench_inad,
    confusion,
    format_bench_table,
    format_metrics_table,
    loglog_slope,
    metrics,
)
from .histogram import (
    LikelihoodField,
    ShapeHistogram,
    back_project,
    bin_id,
    build_histogram,
    complement,
    deserialize,
    load_histogram,
    save_histogram,
    serialize,
)
from .inad import (
    InadField,
    InadPair,
    compute_inad_field,
    field_to_csv,
    inad_pair,
    inter_normal_angles,
    reject_outliers,
    reject_outliers_iterated,
)
from .normals import (
    NormalField,
    covariance,
    estimate_all_normals,
    smallest_eigenpair,
    smallest_eigenvector,
)
from .ransac import RansacConfig, extract_instances, ransac_fit
from .spatial import SpatialIndex, brute_force_radius, build_index, median_spacing
from .synth import gen_box_scene, gen_cylinder, gen_plane, gen_scene, load_scene_spec, merge_parts
from .tasks import (
    TaskConfig,
    classify_binary,
    classify_scene,
    detect_edges,
    pipeline_field,
    pipeline_histogram,
)

__version__ = "0.1.0"
