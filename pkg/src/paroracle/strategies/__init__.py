"""Per-strategy closed-form predictors and their configuration types."""

from .config import (
    Channel,
    Data,
    DataFilter,
    DataSpatial,
    Filter,
    LayerPure,
    Pipeline,
    Serial,
    Spatial,
    StrategyConfig,
    format_strategy,
    parse_strategy,
)
from .halo import block_extents, halo_elements, halo_grad_elements
from .partition import balanced_partition, partition_pipeline_balanced
from .predict import (
    PhaseLabel,
    Prediction,
    Reason,
    ReasonKind,
    Verdict,
    check_feasibility,
    comm_params,
    max_pe_limit,
    predict,
    predict_channel,
    predict_data,
    predict_data_filter,
    predict_data_spatial,
    predict_filter,
    predict_layer_pure,
    predict_pipeline,
    predict_serial,
    predict_spatial,
)

__all__ = [name for name in dir() if not name.startswith("_")]
