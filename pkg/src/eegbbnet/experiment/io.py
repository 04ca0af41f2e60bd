"""Dataset container: an in-memory Dataset plus its binary file format.

File layout (all little-endian):

    magic   b"EEGDS1"
    uint8   version (currently 1)
    uint32  n_channels, uint32 n_samples
    f64     sample_rate_hz
    uint32  n_subjects, uint32 n_trials
    uint8   task code, uint8 session code
    layout  per channel: uint16 name length + utf-8 name; then
            n_channels * 2 f64 coordinates
    trials  per trial: int32 subject id + n_channels*n_samples f32
            samples, row-major

A file holds one (task, session) combination; heterogeneous in-memory
datasets must be filtered before saving.  Samples are stored as 32-bit
floats; :func:`load_dataset` returns float64 arrays holding exactly those
values, so save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from ..connectivity import ElectrodeLayout
from ..errors import FormatError, ParameterError, ValidationError
from ..signal import SESSIONS, TASKS, Trial

MAGIC = b"EEGDS1"
VERSION = 1

TASK_CODES = {name: i for i, name in enumerate(TASKS)}
SESSION_CODES = {name: i for i, name in enumerate(SESSIONS)}


@dataclass
class Dataset:
    """A list of same-shape trials over one electrode layout."""

    trials: list[Trial]
    layout: ElectrodeLayout

    def __post_init__(self):
        if not self.trials:
            raise ValidationError("dataset needs at least one trial")
        n = self.layout.n_channels
        t = self.trials[0].n_samples
        for i, trial in enumerate(self.trials):
            if trial.n_channels != n:
                raise ValidationError(f"trial {i} has {trial.n_channels} channels, layout has {n}")
            if trial.n_samples != t:
                raise ValidationError(f"trial {i} has {trial.n_samples} samples, expected {t}")
        ids = sorted({trial.subject_id for trial in self.trials})
        if ids != list(range(len(ids))):
            raise ValidationError(f"subject ids must be contiguous from 0, got {ids}")

    @property
    def n_channels(self) -> int:
        return self.layout.n_channels

    @property
    def n_samples(self) -> int:
        return self.trials[0].n_samples

    @property
    def n_subjects(self) -> int:
        return max(trial.subject_id for trial in self.trials) + 1

    @property
    def sample_rate_hz(self) -> float:
        return self.trials[0].sample_rate_hz

    @property
    def tasks(self) -> tuple[str, ...]:
        return tuple(sorted({t.task for t in self.trials}))

    @property
    def sessions(self) -> tuple[str, ...]:
        return tuple(sorted({t.session for t in self.trials}))

    def subject_trial_indices(self, subject_id: int) -> np.ndarray:
        return np.array(
            [i for i, t in enumerate(self.trials) if t.subject_id == subject_id], dtype=np.intp
        )

    def filter(self, session: str | None = None, task: str | None = None) -> "Dataset":
        keep = [
            t
            for t in self.trials
            if (session is None or t.session == session) and (task is None or t.task == task)
        ]
        if not keep:
            raise ParameterError(f"no trials match session={session!r}, task={task!r}")
        return Dataset(trials=keep, layout=self.layout)

    def restrict_channels(self, names: list[str]) -> "Dataset":
        """Keep only the named channels (rows), preserving trial order."""
        idx = self.layout.indices_of(names)
        trials = [replace(t, data=t.data[idx]) for t in self.trials]
        return Dataset(trials=trials, layout=self.layout.subset(names))

    def data_array(self) -> np.ndarray:
        return np.stack([t.data for t in self.trials])

    def labels(self) -> np.ndarray:
        return np.array([t.subject_id for t in self.trials], dtype=np.int64)


def pool_datasets(first: Dataset, second: Dataset) -> Dataset:
    """Concatenate two datasets (e.g. different tasks) sharing layout and shape."""
    if first.layout.names != second.layout.names:
        raise ParameterError("datasets use different layouts")
    if first.n_samples != second.n_samples:
        raise ParameterError("datasets have different trial lengths")
    return Dataset(trials=first.trials + second.trials, layout=first.layout)


def save_dataset(dataset: Dataset, path) -> None:
    """Write the container file; the dataset must be task- and session-homogeneous."""
    tasks = dataset.tasks
    sessions = dataset.sessions
    if len(tasks) != 1 or len(sessions) != 1:
        raise ParameterError(
            f"container files hold one task/session; filter first (have {tasks}, {sessions})"
        )
    n, t = dataset.n_channels, dataset.n_samples
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(
            struct.pack(
                "<IIdII",
                n,
                t,
                dataset.sample_rate_hz,
                dataset.n_subjects,
                len(dataset.trials),
            )
        )
        fh.write(struct.pack("<BB", TASK_CODES[tasks[0]], SESSION_CODES[sessions[0]]))
        for name in dataset.layout.names:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
        fh.write(np.ascontiguousarray(dataset.layout.positions, dtype="<f8").tobytes())
        for trial in dataset.trials:
            fh.write(struct.pack("<i", trial.subject_id))
            fh.write(np.ascontiguousarray(trial.data, dtype="<f4").tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    offset = 0

    def take(count: int, what: str) -> bytes:
        nonlocal offset
        if offset + count > len(blob):
            raise FormatError(f"truncated file while reading {what}", offset=offset)
        chunk = blob[offset : offset + count]
        offset += count
        return chunk

    if take(len(MAGIC), "magic") != MAGIC:
        raise FormatError(f"bad magic, expected {MAGIC!r}", offset=0)
    (version,) = struct.unpack("<B", take(1, "version"))
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}", offset=offset - 1)
    n, t, rate, n_subjects, n_trials = struct.unpack("<IIdII", take(24, "header"))
    task_code, session_code = struct.unpack("<BB", take(2, "task/session"))
    try:
        task = TASKS[task_code]
        session = SESSIONS[session_code]
    except IndexError:
        raise FormatError(
            f"unknown task/session codes ({task_code}, {session_code})", offset=offset - 2
        ) from None
    names = []
    for i in range(n):
        (name_len,) = struct.unpack("<H", take(2, f"name length {i}"))
        names.append(take(name_len, f"channel name {i}").decode("utf-8"))
    coords = np.frombuffer(take(16 * n, "layout coordinates"), dtype="<f8").reshape(n, 2)
    layout = ElectrodeLayout(positions=coords.copy(), names=names)
    trials = []
    for i in range(n_trials):
        record_offset = offset
        (subject_id,) = struct.unpack("<i", take(4, f"subject id of trial {i}"))
        if not 0 <= subject_id < n_subjects:
            raise FormatError(
                f"trial {i}: subject id {subject_id} outside [0, {n_subjects})",
                offset=record_offset,
            )
        raw = np.frombuffer(take(4 * n * t, f"samples of trial {i}"), dtype="<f4")
        if not np.all(np.isfinite(raw)):
            bad = int(np.argmin(np.isfinite(raw)))
            raise FormatError(
                f"trial {i}: non-finite sample at element {bad}",
                offset=record_offset + 4 + 4 * bad,
            )
        trials.append(
            Trial(
                data=raw.reshape(n, t).astype(np.float64),
                subject_id=subject_id,
                session=session,
                task=task,
                sample_rate_hz=rate,
            )
        )
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes after last trial", offset=offset)
    return Dataset(trials=trials, layout=layout)
