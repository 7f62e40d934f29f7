"""availcast: two-stage spatiotemporal availability prediction.

Stage 1 classifies which service is available at a location and time
after clustering historical traces into hotspot regions (K-means under
the Haversine metric, gap statistic for the cluster count). Stage 2
forecasts how long a service stays available by imaging its binary
presence series as Gramian Angular Field pairs and classifying them with
a dual-pathway residual convolutional network. All numerical machinery
(clustering, layers, backpropagation, optimisation) lives in this
package.
"""

from .geo import (
    EARTH_RADIUS_KM,
    ClusterModel,
    GapStatResult,
    GeoPoint,
    GeoValidationError,
    assign_cluster,
    assign_clusters,
    gap_statistic,
    haversine_km,
    kmeans_haversine,
    within_dispersion,
)
from .features import (
    EncodingConfig,
    FeatureVector,
    HolidayCalendar,
    TraceRecord,
    TrainingInstance,
    build_instances,
    build_vocabulary,
    encode_input,
    encode_instances,
    extract_features,
)
from .gaf import (
    GafImagePair,
    MultiStepLabel,
    PresenceSeries,
    augment,
    balance_classes,
    build_presence_series,
    decode_label,
    encode_window,
    gadf,
    gasf,
    make_label,
    paa,
    perturb_zero_series,
    rescale_to_unit,
    roll_windows,
    to_polar,
)
from .availability import (
    Stage1Config,
    Stage1Model,
    available_services,
    build_stage1_network,
    evaluate_stage1,
    predict_availability,
    train_stage1,
)
from .duration import (
    Stage2Config,
    Stage2Model,
    build_dual_model,
    build_pathway,
    evaluate_stage2,
    forecast,
    train_stage2,
)
from .containers import ModelContainer, load_model, save_model
from .ingest import DatasetSchema, filter_rare_services, ingest, split_records
from .cli import run_subcommand

__version__ = "0.1.0"
