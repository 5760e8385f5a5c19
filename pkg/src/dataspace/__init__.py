"""Model evaluation over the open sets of a metadata-induced finite topology."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    InconsistencyResult,
    NeighborhoodExtrema,
    RankedSlice,
    local_inconsistency,
    neighborhood_extrema,
    neighborhood_report,
    rank_open_sets,
    restriction_difference,
)
from .data import (  # noqa: E402
    AttributeValue,
    Dataset,
    EvaluationContext,
    Item,
    LabelSpace,
    PredictionEntry,
    PredictionTable,
    Schema,
    join_validate,
    parse_dataset,
    parse_predictions,
    serialize_dataset,
)
from .errors import DataspaceError  # noqa: E402
from .presheaf import Assignment, PresheafSpec, StatKind, compute_assignment, restrict, section_value  # noqa: E402
from .topology import (  # noqa: E402
    GenerationConfig,
    OpenSet,
    SetExpression,
    Subbasis,
    SubbasisSpec,
    Topology,
    build_subbasis,
    generate_topology,
    is_subset,
    neighborhoods_of,
)
