"""Pairwise electrode-connectivity measures and adjacency assembly.

Five measures define the weighted graph over electrodes: physical
distance (DIST), linear correlation (COR) and three phase-synchronization
indices (PLV, PLI, RHO).  Two ablation matrices (IDN, RDM) stand in for
"no connectivity" and "random connectivity".

Every constructor returns an exactly symmetric matrix: values are
computed for the upper triangle and mirrored.  Entries depend only on the
two channels involved, so restricting a layout to a channel subset
commutes with computing the measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignalError, ParameterError, ValidationError
from .signal import PhaseSeries, Trial

MEASURES = ("DIST", "COR", "PLV", "PLI", "RHO", "IDN", "RDM")

TWO_PI = 2.0 * np.pi


@dataclass
class ElectrodeLayout:
    """Electrode names and normalized 2-D head-space positions."""

    positions: np.ndarray
    names: list[str]

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValidationError("positions must be an (n, 2) array")
        if not np.all(np.isfinite(self.positions)):
            raise ValidationError("positions contain non-finite values")
        if len(self.names) != len(self.positions):
            raise ValidationError("names and positions disagree in length")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("channel names must be unique")

    @property
    def n_channels(self) -> int:
        return len(self.names)

    def subset(self, names: list[str]) -> "ElectrodeLayout":
        idx = self.indices_of(names)
        return ElectrodeLayout(positions=self.positions[idx], names=list(names))

    def indices_of(self, names: list[str]) -> np.ndarray:
        lookup = {name: i for i, name in enumerate(self.names)}
        missing = [n for n in names if n not in lookup]
        if missing:
            raise ParameterError(f"unknown channel names: {missing}")
        return np.array([lookup[n] for n in names], dtype=np.intp)


@dataclass
class AdjacencyMatrix:
    """N x N symmetric edge-weight matrix tagged with its measure."""

    weights: np.ndarray
    measure: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.weights.shape[1]:
            raise ValidationError(f"adjacency must be square, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise ValidationError("adjacency contains non-finite values")
        if self.measure not in MEASURES:
            raise ParameterError(f"unknown measure {self.measure!r}")

    @property
    def n_channels(self) -> int:
        return self.weights.shape[0]


def _mirror_upper(weights: np.ndarray) -> np.ndarray:
    """Copy the strict upper triangle onto the lower one (exact symmetry)."""
    iu = np.triu_indices(weights.shape[0], k=1)
    weights[(iu[1], iu[0])] = weights[iu]
    return weights


def euclidean_distance_matrix(layout: ElectrodeLayout) -> AdjacencyMatrix:
    """Pairwise L2 distance between electrode positions.

    Depends only on the montage, so it is identical for every subject and
    trial.
    """
    diff = layout.positions[:, None, :] - layout.positions[None, :, :]
    weights = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(weights, 0.0)
    return AdjacencyMatrix(weights=_mirror_upper(weights), measure="DIST")


def pearson_matrix(trial: Trial) -> AdjacencyMatrix:
    """Pearson correlation coefficient between every channel pair.

    Raises
    ------
    DegenerateSignalError
        If a channel has zero variance (the coefficient is undefined).
    """
    data = trial.data
    centered = data - data.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("nt,nt->n", centered, centered))
    if np.any(norms == 0.0):
        dead = int(np.argmax(norms == 0.0))
        raise DegenerateSignalError(f"channel {dead} has zero variance")
    n = data.shape[0]
    iu = np.triu_indices(n, k=1)
    dots = np.einsum("pt,pt->p", centered[iu[0]], centered[iu[1]])
    weights = np.ones((n, n), dtype=np.float64)
    weights[iu] = dots / (norms[iu[0]] * norms[iu[1]])
    return AdjacencyMatrix(weights=_mirror_upper(weights), measure="COR")


def relative_phase(phase: PhaseSeries, k: int, l: int) -> np.ndarray:
    """Absolute phase difference |phi_k - phi_l| mod 2*pi for one pair."""
    n = phase.phase.shape[0]
    if k == l or not (0 <= k < n) or not (0 <= l < n):
        raise ParameterError(f"need two distinct channel indices in [0, {n}), got {k}, {l}")
    return np.mod(np.abs(phase.phase[k] - phase.phase[l]), TWO_PI)


def _abs_phase_diffs(phase: np.ndarray) -> tuple[np.ndarray, tuple]:
    """|phi_k - phi_l| mod 2*pi for every pair above the diagonal, stacked."""
    n = phase.shape[0]
    iu = np.triu_indices(n, k=1)
    dphi = np.mod(np.abs(phase[iu[0]] - phase[iu[1]]), TWO_PI)
    return dphi, iu


def _signed_phase_diffs(phase: np.ndarray) -> tuple[np.ndarray, tuple]:
    """phi_k - phi_l wrapped to (-pi, pi] for every pair above the diagonal."""
    n = phase.shape[0]
    iu = np.triu_indices(n, k=1)
    raw = phase[iu[0]] - phase[iu[1]]
    wrapped = np.pi - np.mod(np.pi - raw, TWO_PI)
    return wrapped, iu


def plv_matrix(phase: PhaseSeries) -> AdjacencyMatrix:
    """Phase-locking value: modulus of the mean unit phasor of the relative phase."""
    dphi, iu = _abs_phase_diffs(phase.phase)
    n = phase.phase.shape[0]
    values = np.abs(np.exp(1j * dphi).mean(axis=1))
    weights = np.ones((n, n), dtype=np.float64)
    weights[iu] = values
    return AdjacencyMatrix(weights=_mirror_upper(weights), measure="PLV")


def pli_matrix(phase: PhaseSeries, signed: bool = True) -> AdjacencyMatrix:
    """Phase-lag index: |mean of sign(relative phase)| with sign(0) = 0.

    With ``signed=True`` (default) the phase difference is wrapped to
    (-pi, pi] before taking the sign, so leads and lags can cancel; the
    absolute-difference variant (``signed=False``) is available for
    sensitivity checks but is degenerate (all signs >= 0).
    """
    if signed:
        delta, iu = _signed_phase_diffs(phase.phase)
    else:
        delta, iu = _abs_phase_diffs(phase.phase)
    n = phase.phase.shape[0]
    values = np.abs(np.sign(delta).mean(axis=1))
    weights = np.zeros((n, n), dtype=np.float64)
    weights[iu] = values
    return AdjacencyMatrix(weights=_mirror_upper(weights), measure="PLI")


def rho_matrix(phase: PhaseSeries, n_bins: int | None = None) -> AdjacencyMatrix:
    """Entropy-based synchronization index.

    The relative phase is histogrammed into ``n_bins`` equal-width bins
    over [0, 2*pi) (default: one bin per time sample) and compared against
    the maximal entropy ln(n_bins): 1 means perfect synchronization,
    0 means a uniform phase distribution.
    """
    phi = phase.phase
    t = phi.shape[1]
    if t < 2:
        raise ParameterError("rho needs at least 2 samples")
    bins = t if n_bins is None else int(n_bins)
    if bins < 2:
        raise ParameterError("rho needs at least 2 bins")
    dphi, iu = _abs_phase_diffs(phi)
    idx = np.minimum((dphi * (bins / TWO_PI)).astype(np.int64), bins - 1)
    n_pairs = dphi.shape[0]
    offsets = (np.arange(n_pairs, dtype=np.int64) * bins)[:, None]
    counts = np.bincount((idx + offsets).ravel(), minlength=n_pairs * bins)
    counts = counts.reshape(n_pairs, bins)
    p = counts / t
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    entropy = -plogp.sum(axis=1)
    values = 1.0 - entropy / np.log(bins)
    n = phi.shape[0]
    weights = np.ones((n, n), dtype=np.float64)
    weights[iu] = values
    return AdjacencyMatrix(weights=_mirror_upper(weights), measure="RHO")


def identity_adjacency(n: int) -> AdjacencyMatrix:
    """Identity matrix: no connectivity between electrodes."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    return AdjacencyMatrix(weights=np.eye(n), measure="IDN")


def random_adjacency(n: int, seed: int) -> AdjacencyMatrix:
    """Symmetric matrix of uniform values in [-1, 1] with unit diagonal.

    Reproducible from ``seed``; every call seeds its own generator.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, size=(n, n))
    np.fill_diagonal(weights, 1.0)
    return AdjacencyMatrix(weights=_mirror_upper(weights), measure="RDM")


def normalize_adjacency(adj: AdjacencyMatrix) -> AdjacencyMatrix:
    """Affine min-max rescaling of the whole matrix onto [-1, 1].

    The minimum entry maps to -1 and the maximum to +1; a constant matrix
    maps to all zeros.  Applied per matrix (per trial), preserving
    symmetry and the ordering of entries.
    """
    w = adj.weights
    lo = w.min()
    hi = w.max()
    if hi == lo:
        scaled = np.zeros_like(w)
    else:
        scaled = 2.0 * (w - lo) / (hi - lo) - 1.0
    return AdjacencyMatrix(weights=scaled, measure=adj.measure)


def measure_matrix(
    measure: str,
    trial: Trial | None = None,
    layout: ElectrodeLayout | None = None,
    phase: PhaseSeries | None = None,
    seed: int | None = None,
    n_channels: int | None = None,
) -> AdjacencyMatrix:
    """Dispatch a measure name to its constructor.

    Phase-based measures accept a precomputed ``phase`` to avoid repeating
    the analytic-signal transform; otherwise it is derived from ``trial``.
    """
    from .signal import instantaneous_phase

    measure = measure.upper()
    if measure == "DIST":
        if layout is None:
            raise ParameterError("DIST needs an electrode layout")
        return euclidean_distance_matrix(layout)
    if measure == "COR":
        if trial is None:
            raise ParameterError("COR needs a trial")
        return pearson_matrix(trial)
    if measure in ("PLV", "PLI", "RHO"):
        if phase is None:
            if trial is None:
                raise ParameterError(f"{measure} needs a trial or a phase series")
            phase = instantaneous_phase(trial)
        if measure == "PLV":
            return plv_matrix(phase)
        if measure == "PLI":
            return pli_matrix(phase)
        return rho_matrix(phase)
    if measure == "IDN":
        n = n_channels if n_channels is not None else trial.n_channels
        return identity_adjacency(n)
    if measure == "RDM":
        if seed is None:
            raise ParameterError("RDM needs a seed")
        n = n_channels if n_channels is not None else trial.n_channels
        return random_adjacency(n, seed)
    raise ParameterError(f"unknown measure {measure!r}")
