"""Deterministic EEG preprocessing.

Bandpass filtering, integer decimation and analytic-signal phase
extraction.  All functions are pure: they return new :class:`Trial` /
:class:`PhaseSeries` objects and never mutate their inputs, so distinct
trials can be processed concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

from .errors import DegenerateSignalError, ParameterError, ValidationError

SESSIONS = ("I", "II")
TASKS = ("MI", "ERP", "SSVEP", "SYNTH")


@dataclass
class Trial:
    """One EEG recording segment.

    Parameters
    ----------
    data : ndarray, shape (n_channels, n_samples)
        Channel-major sample matrix in microvolts.
    subject_id : int
        Integer identity label.
    session : str
        "I" or "II" (recording day).
    task : str
        "MI", "ERP", "SSVEP" or "SYNTH".
    sample_rate_hz : float
        Sampling rate of ``data``.
    """

    data: np.ndarray
    subject_id: int
    session: str
    task: str
    sample_rate_hz: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValidationError(f"trial data must be 2-D, got shape {self.data.shape}")
        n, t = self.data.shape
        if n < 2 or t < 2:
            raise ValidationError(f"trial needs >= 2 channels and >= 2 samples, got {n}x{t}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("trial contains non-finite samples")
        if self.session not in SESSIONS:
            raise ParameterError(f"unknown session {self.session!r}")
        if self.task not in TASKS:
            raise ParameterError(f"unknown task {self.task!r}")
        if not (self.sample_rate_hz > 0):
            raise ParameterError("sample_rate_hz must be positive")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class PhaseSeries:
    """Instantaneous phase per channel, radians in [0, 2*pi)."""

    phase: np.ndarray

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=np.float64)
        if self.phase.ndim != 2:
            raise ValidationError("phase must be 2-D (channels x time)")
        if not np.all(np.isfinite(self.phase)):
            raise ValidationError("phase contains non-finite values")


def design_bandpass(low_hz: float, high_hz: float, order: int, sample_rate_hz: float) -> np.ndarray:
    """Design a Butterworth bandpass as second-order sections.

    Corner frequencies are pre-warped through the bilinear transform by
    :func:`scipy.signal.butter`; the SOS factorization keeps the design
    stable at order 5 and above.
    """
    if not (0 < low_hz < high_hz < sample_rate_hz / 2):
        raise ParameterError(
            f"corner frequencies must satisfy 0 < low < high < fs/2, "
            f"got low={low_hz}, high={high_hz}, fs={sample_rate_hz}"
        )
    if order < 1:
        raise ParameterError("filter order must be >= 1")
    return scipy.signal.butter(
        order, [low_hz, high_hz], btype="bandpass", fs=sample_rate_hz, output="sos"
    )


def bandpass_filter(trial: Trial, low_hz: float, high_hz: float, order: int = 5) -> Trial:
    """Zero-phase Butterworth bandpass, applied per channel.

    The filter runs forward and backward (no group delay, which matters
    for the phase-synchronization measures downstream).  Each end of every
    channel is reflect-padded by ``3 * order`` samples before the
    forward-backward pass to suppress startup transients on short trials.
    """
    sos = design_bandpass(low_hz, high_hz, order, trial.sample_rate_hz)
    padlen = 3 * order
    if trial.n_samples <= padlen:
        raise ParameterError(
            f"trial too short for zero-phase filtering: {trial.n_samples} samples, "
            f"need > {padlen}"
        )
    filtered = scipy.signal.sosfiltfilt(sos, trial.data, axis=-1, padtype="even", padlen=padlen)
    return replace(trial, data=np.ascontiguousarray(filtered))


def downsample(trial: Trial, target_hz: float) -> Trial:
    """Integer decimation: keep every k-th sample starting at index 0.

    The trial must already be band-limited below ``target_hz / 2`` (the
    3-40 Hz bandpass guarantees that for a 250 Hz target); no extra
    anti-alias stage is applied.  The output has floor(T / k) samples.
    """
    ratio = trial.sample_rate_hz / target_hz
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9:
        raise ParameterError(
            f"sample rate {trial.sample_rate_hz} is not an integer multiple of {target_hz}"
        )
    t_out = trial.n_samples // k
    data = trial.data[:, : t_out * k : k].copy()
    return replace(trial, data=data, sample_rate_hz=float(target_hz))


def analytic_signal(data: np.ndarray) -> np.ndarray:
    """Discrete analytic signal via the frequency-domain method.

    Zeroes negative frequencies and doubles positive ones, keeping DC and
    (for even lengths) the Nyquist bin untouched.
    """
    return scipy.signal.hilbert(data, axis=-1)


def instantaneous_phase(trial: Trial) -> PhaseSeries:
    """Per-channel instantaneous phase of the analytic signal, in [0, 2*pi).

    Raises
    ------
    DegenerateSignalError
        If any channel is constant: the phase of a zero-bandwidth signal
        is undefined.
    """
    if trial.n_samples < 4:
        raise ParameterError("phase extraction needs at least 4 samples")
    variances = trial.data.var(axis=1)
    if np.any(variances == 0.0):
        dead = int(np.argmax(variances == 0.0))
        raise DegenerateSignalError(f"channel {dead} is constant; phase is undefined")
    phase = np.angle(analytic_signal(trial.data))
    return PhaseSeries(phase=np.mod(phase, 2.0 * np.pi))
