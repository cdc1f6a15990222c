"""Synthetic demand: stationary benchmark laws, the nonstationary seed generator and workspaces."""
from .archetypes import ARCHETYPES, FEATURES, SeedConfig, seed_config
from .generator import CovariateTable, DemandSeries, SeedDataset, gen_covariates, gen_demand, generate_seed
from .slicing import EVALUATION_DAYS, HISTORY_DAYS, MIN_SEPARATION, SLICE_DAYS, SlicingError, slice_starts
from .stationary import DISTRIBUTIONS, stationary_sampler
from .workspace import (
    DayRecords, EvaluationSealed, WorkspaceError, WorkspaceSlice, build_corpus, build_seed_workspaces,
    csv_to_workspaces, emit_workspace, load_workspace, slice_dataset,
)

__all__ = [
    "ARCHETYPES", "FEATURES", "SeedConfig", "seed_config", "CovariateTable", "DemandSeries", "SeedDataset",
    "gen_covariates", "gen_demand", "generate_seed", "EVALUATION_DAYS", "HISTORY_DAYS", "MIN_SEPARATION",
    "SLICE_DAYS", "SlicingError", "slice_starts", "DISTRIBUTIONS", "stationary_sampler", "DayRecords",
    "EvaluationSealed", "WorkspaceError", "WorkspaceSlice", "build_corpus", "build_seed_workspaces",
    "csv_to_workspaces", "emit_workspace", "load_workspace", "slice_dataset",
]
