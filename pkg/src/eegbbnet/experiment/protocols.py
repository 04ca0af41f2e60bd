"""Evaluation protocols: intra-session, cross-session, cross-task, subsets.

Each protocol trains models through :func:`eegbbnet.model.fit` and scores
them with the correct recognition rate.  Reports carry per-fold (or
per-repetition) rates plus their mean and standard deviation; wall-clock
time stays in memory only, so serialized reports are byte-reproducible.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import connectivity as conn
from ..errors import ParameterError
from ..graph import renormalize
from ..model import ModelConfig, fit, predict_in_batches
from ..montage import load_electrode_groups
from ..signal import instantaneous_phase
from .io import Dataset
from .splits import crr, stratified_kfold, train_validation_split

FINETUNE_GRID = tuple(round(0.05 * i, 2) for i in range(11))

_KEY_RDM = 101
_KEY_FINETUNE = 102

PER_TRIAL_MEASURES = ("COR", "PLV", "PLI", "RHO", "RDM")
SHARED_MEASURES = ("DIST", "IDN")


def _derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def trial_operators(dataset: Dataset, measure: str, seed: int = 0,
                    signed_degree: bool = False) -> np.ndarray:
    """Normalized propagation operators for every trial.

    Measured adjacencies (DIST/COR/PLV/PLI/RHO) are min-max rescaled to
    [-1, 1] before renormalization; the IDN and RDM ablations replace the
    adjacency directly (their entries are already in range).  Returns a
    (n_trials, n, n) float32 stack, or a single (n, n) matrix for the
    trial-independent measures (DIST, IDN).
    """
    measure = measure.upper()
    n = dataset.n_channels
    if measure == "DIST":
        adj = conn.normalize_adjacency(conn.euclidean_distance_matrix(dataset.layout))
        return renormalize(adj, signed_degree).matrix.astype(np.float32)
    if measure == "IDN":
        return renormalize(conn.identity_adjacency(n), signed_degree).matrix.astype(np.float32)
    if measure not in PER_TRIAL_MEASURES:
        raise ParameterError(f"unknown measure {measure!r}")
    ops = np.empty((len(dataset.trials), n, n), dtype=np.float32)
    for i, trial in enumerate(dataset.trials):
        if measure == "COR":
            adj = conn.normalize_adjacency(conn.pearson_matrix(trial))
        elif measure == "RDM":
            adj = conn.random_adjacency(n, _derived_seed(seed, _KEY_RDM, i))
        else:
            phase = instantaneous_phase(trial)
            if measure == "PLV":
                adj = conn.normalize_adjacency(conn.plv_matrix(phase))
            elif measure == "PLI":
                adj = conn.normalize_adjacency(conn.pli_matrix(phase))
            else:
                adj = conn.normalize_adjacency(conn.rho_matrix(phase))
        ops[i] = renormalize(adj, signed_degree).matrix
    return ops


def dataset_arrays(dataset: Dataset, config: ModelConfig):
    """(X, y, ops) for a whole dataset under the configured measure."""
    ops = trial_operators(dataset, config.measure, config.seed, config.signed_degree)
    x = dataset.data_array().astype(np.float32)
    y = dataset.labels()
    return x, y, ops


def _take(arrays, idx):
    x, y, ops = arrays
    return x[idx], y[idx], (ops if ops.ndim == 2 else ops[idx])


@dataclass
class ExperimentReport:
    """Recognition rates of one protocol run."""

    protocol: str
    measure: str
    fold_labels: list
    fold_crr: list[float]
    mean_crr: float
    sd_crr: float
    config_echo: dict
    wall_clock_seconds: float
    histories: list = field(default_factory=list)

    def rows(self):
        return [
            (self.protocol, self.measure, label, rate)
            for label, rate in zip(self.fold_labels, self.fold_crr)
        ]


def _make_report(protocol, measure, labels, rates, config_echo, started, histories):
    rates = [float(r) for r in rates]
    sd = float(np.std(rates, ddof=1)) if len(rates) > 1 else 0.0
    return ExperimentReport(
        protocol=protocol,
        measure=measure,
        fold_labels=list(labels),
        fold_crr=rates,
        mean_crr=float(np.mean(rates)),
        sd_crr=sd,
        config_echo=config_echo,
        wall_clock_seconds=time.perf_counter() - started,
        histories=histories,
    )


def _fold_worker(payload):
    """Fit one fold and score its test block (top-level for pickling)."""
    fold, train, validation, test, config = payload
    model = fit(train, validation, config)
    predictions = predict_in_batches(model, test)
    rate = crr(predictions, test[1])
    return fold, rate, model.history, model.best_epoch


def run_intra_session(dataset: Dataset, config: ModelConfig, k: int = 5,
                      n_jobs: int = 1, protocol: str = "intra-session") -> ExperimentReport:
    """k-fold cross-validation inside one session."""
    if len(dataset.sessions) != 1:
        raise ParameterError(f"intra-session protocol needs one session, got {dataset.sessions}")
    started = time.perf_counter()
    arrays = dataset_arrays(dataset, config)
    plans = stratified_kfold(dataset, k=k, seed=config.seed)
    payloads = [
        (
            plan.fold,
            _take(arrays, plan.train_indices()),
            _take(arrays, plan.validation_indices()),
            _take(arrays, plan.test_indices()),
            config,
        )
        for plan in plans
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_fold_worker, payloads))
    else:
        results = [_fold_worker(p) for p in payloads]
    results.sort(key=lambda r: r[0])
    labels = [fold for fold, _, _, _ in results]
    rates = [rate for _, rate, _, _ in results]
    histories = [history for _, _, history, _ in results]
    return _make_report(protocol, config.measure, labels, rates, asdict(config), started, histories)


def _validate_fraction(fraction: float) -> float:
    grid = np.array(FINETUNE_GRID)
    if not np.any(np.isclose(fraction, grid, atol=1e-9)):
        raise ParameterError(
            f"finetune fraction must be one of {FINETUNE_GRID}, got {fraction}"
        )
    return float(grid[np.argmin(np.abs(grid - fraction))])


def _check_transfer_pair(train_ds: Dataset, test_ds: Dataset):
    if train_ds.layout.names != test_ds.layout.names:
        raise ParameterError("train and test sets use different layouts")
    if train_ds.n_samples != test_ds.n_samples:
        raise ParameterError(
            f"trial lengths differ: {train_ds.n_samples} vs {test_ds.n_samples}"
        )
    if train_ds.n_subjects != test_ds.n_subjects:
        raise ParameterError(
            f"subject rosters differ: {train_ds.n_subjects} vs {test_ds.n_subjects} subjects"
        )


def _run_transfer(protocol: str, train_ds: Dataset, test_ds: Dataset,
                  finetune_fraction: float, config: ModelConfig, repeats: int) -> ExperimentReport:
    """Fit on the base set plus a per-subject fraction of the target set.

    The remaining target trials form the test set; ``repeats`` seeded
    repetitions of the fine-tuning selection give mean and SD.
    """
    fraction = _validate_fraction(finetune_fraction)
    _check_transfer_pair(train_ds, test_ds)
    started = time.perf_counter()
    base = dataset_arrays(train_ds, config)
    target = dataset_arrays(test_ds, config)
    rates = []
    histories = []
    for rep in range(repeats):
        rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(_KEY_FINETUNE, rep))
        )
        chosen = []
        held = []
        for subject in range(test_ds.n_subjects):
            idx = rng.permutation(test_ds.subject_trial_indices(subject))
            m = int(np.floor(fraction * len(idx)))
            chosen.append(idx[:m])
            held.append(np.sort(idx[m:]))
        chosen = np.concatenate(chosen).astype(np.intp)
        held = np.concatenate(held).astype(np.intp)
        pool_x = np.concatenate([base[0], target[0][chosen]])
        pool_y = np.concatenate([base[1], target[1][chosen]])
        if base[2].ndim == 2:
            pool_ops = base[2]
            held_ops = target[2]
        else:
            pool_ops = np.concatenate([base[2], target[2][chosen]])
            held_ops = target[2][held]
        train_idx, val_idx = _per_subject_split(pool_y, rng)
        train = (pool_x[train_idx], pool_y[train_idx],
                 pool_ops if pool_ops.ndim == 2 else pool_ops[train_idx])
        validation = (pool_x[val_idx], pool_y[val_idx],
                      pool_ops if pool_ops.ndim == 2 else pool_ops[val_idx])
        model = fit(train, validation, config)
        predictions = predict_in_batches(model, (target[0][held], target[1][held], held_ops))
        rates.append(crr(predictions, target[1][held]))
        histories.append(model.history)
    echo = asdict(config)
    echo["finetune_fraction"] = fraction
    echo["repeats"] = repeats
    echo["train_tasks"] = list(train_ds.tasks)
    echo["test_tasks"] = list(test_ds.tasks)
    echo["train_sessions"] = list(train_ds.sessions)
    echo["test_sessions"] = list(test_ds.sessions)
    return _make_report(protocol, config.measure, list(range(repeats)), rates, echo, started, histories)


def _per_subject_split(labels: np.ndarray, rng: np.random.Generator):
    """Shuffle each subject's pool and carve 12.5% off for validation."""
    train_parts = []
    val_parts = []
    for subject in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == subject))
        tr, va = train_validation_split(idx)
        if len(va) == 0 and len(tr) > 1:  # keep validation non-empty
            tr, va = tr[:-1], tr[-1:]
        train_parts.append(tr)
        val_parts.append(va)
    return np.concatenate(train_parts), np.concatenate(val_parts)


def run_cross_session(train_set: Dataset, test_set: Dataset, finetune_fraction: float,
                      config: ModelConfig, repeats: int = 5) -> ExperimentReport:
    """Train on one session (plus a fraction of the other), test on the rest."""
    return _run_transfer("cross-session", train_set, test_set, finetune_fraction, config, repeats)


def run_cross_task(train_task_set: Dataset, test_task_set: Dataset, finetune_fraction: float,
                   config: ModelConfig, repeats: int = 5) -> ExperimentReport:
    """Train on one task (plus a fraction of the other), test on the rest."""
    return _run_transfer("cross-task", train_task_set, test_task_set, finetune_fraction, config, repeats)


def run_finetune_grid(train_set: Dataset, test_set: Dataset, config: ModelConfig,
                      fractions=FINETUNE_GRID, repeats: int = 5,
                      protocol: str = "cross-session") -> list[ExperimentReport]:
    """One transfer report per fine-tuning fraction."""
    return [
        _run_transfer(protocol, train_set, test_set, fraction, config, repeats)
        for fraction in fractions
    ]


def run_electrode_subset(dataset: Dataset, subset, config: ModelConfig, k: int = 5,
                         n_jobs: int = 1, groups_path=None) -> ExperimentReport:
    """Intra-session protocol restricted to a named electrode group.

    ``subset`` is either a group name from the electrode-group table or an
    explicit list of channel names.
    """
    if isinstance(subset, str):
        groups = load_electrode_groups(groups_path)
        if subset not in groups:
            raise ParameterError(f"unknown electrode group {subset!r}; have {sorted(groups)}")
        names = groups[subset]
        label = subset
    else:
        names = list(subset)
        label = "custom"
    restricted = dataset.restrict_channels(names)
    sub_config = replace(config, n_channels=len(names))
    return run_intra_session(
        restricted, sub_config, k=k, n_jobs=n_jobs, protocol=f"subset-{label}"
    )


# -- report serialization ------------------------------------------------------

REPORT_HEADER = "protocol\tmeasure\tfold\tcrr"


def report_lines(reports) -> list[str]:
    """Fixed-schema table rows for one report or a list of reports."""
    if isinstance(reports, ExperimentReport):
        reports = [reports]
    lines = [REPORT_HEADER]
    for report in reports:
        for protocol, measure, label, rate in report.rows():
            lines.append(f"{protocol}\t{measure}\t{label}\t{rate!r}")
    return lines


def grid_summary_lines(reports: list[ExperimentReport]) -> list[str]:
    """One row per fine-tuning fraction; the fold column holds the percent."""
    lines = [REPORT_HEADER]
    for report in reports:
        percent = int(round(100 * report.config_echo["finetune_fraction"]))
        lines.append(f"{report.protocol}\t{report.measure}\t{percent}\t{report.mean_crr!r}")
    return lines


def write_lines(path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def history_lines(history) -> list[str]:
    lines = ["epoch\ttrain_loss\tval_loss"]
    for epoch, train_loss, val_loss in history:
        lines.append(f"{epoch}\t{train_loss!r}\t{val_loss!r}")
    return lines
