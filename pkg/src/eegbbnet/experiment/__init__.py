"""Dataset IO, synthetic generation, splits and evaluation protocols."""

from .io import Dataset, load_dataset, pool_datasets, save_dataset
from .protocols import (
    FINETUNE_GRID,
    ExperimentReport,
    dataset_arrays,
    grid_summary_lines,
    history_lines,
    report_lines,
    run_cross_session,
    run_cross_task,
    run_electrode_subset,
    run_finetune_grid,
    run_intra_session,
    trial_operators,
    write_lines,
)
from .splits import SplitPlan, crr, stratified_kfold
from .synthetic import generate_synthetic

__all__ = [
    "Dataset",
    "ExperimentReport",
    "FINETUNE_GRID",
    "SplitPlan",
    "crr",
    "dataset_arrays",
    "generate_synthetic",
    "grid_summary_lines",
    "history_lines",
    "load_dataset",
    "pool_datasets",
    "report_lines",
    "run_cross_session",
    "run_cross_task",
    "run_electrode_subset",
    "run_finetune_grid",
    "run_intra_session",
    "save_dataset",
    "stratified_kfold",
    "trial_operators",
    "write_lines",
]
