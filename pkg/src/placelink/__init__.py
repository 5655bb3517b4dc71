"""placelink: match restaurant records to points of interest.

Pipeline: load place tables, block candidate pairs on shared geohash cells,
compute geo/string distance features, label pairs through the bootstrap
annotation workflow, train tree ensembles, and evaluate.
"""

__version__ = "0.1.0"

from .blocking import (  # noqa: F401
    BlockingConfig,
    CandidatePair,
    FeatureVector,
    block_pairs,
    downsample,
    featurize,
    featurize_pairs,
)
from .errors import ConfigError, LoadError, PlacelinkError, StateError  # noqa: F401
from .geo import GeoPoint, geohash_decode_bounds, geohash_encode, geohash_neighbors, haversine_m  # noqa: F401
from .records import Country, Kind, PlaceRecord, PlaceTable, load_places  # noqa: F401
from .text import jaro_distance, jaro_similarity, levenshtein_norm, levenshtein_raw, normalize_text  # noqa: F401
from .trees import (  # noqa: F401
    LabeledPair,
    LabelSource,
    ModelKind,
    Provenance,
    SplitSpec,
    TreeModel,
    predict,
    split_train_test,
    train_adaboost,
    train_decision_tree,
    train_gradient_boost,
    train_random_forest,
)
