"""Synthetic multi-subject EEG at desk scale.

Identity is carried by *connectivity rather than amplitude*.  All
subjects share a bank of band-limited oscillator frequencies, each
present as two independent instances; a channel blends its frequency's
two instances by an angle drawn from a ladder shared across subjects,
and a subject is defined by the permutation assigning angles to
channels, by per-channel phase offsets and by a gentle fixed orthogonal
channel mixing.  Channels with nearby angles on the same frequency stay
phase-locked while distant angles decohere as the instances drift apart,
so the graded pairwise locking pattern identifies the subject while
per-channel spectra are identical across subjects by construction.
Trial-to-trial variation comes from random oscillator start phases,
frequency jitter, phase diffusion, in-band additive noise and
per-channel gain jitter; the gain jitter deliberately makes raw
amplitude an unreliable cue while leaving correlation and phase measures
untouched.

Session II re-draws nothing: it applies a perturbation of strength
``session_shift`` to the subject's mixing and couplings, so ``session_shift=0``
reproduces the session-I generating distribution exactly.

Everything is keyed off :class:`numpy.random.SeedSequence`, so a given
seed yields bit-identical datasets across runs and machines.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..montage import default_layout
from ..signal import SESSIONS, TASKS, Trial
from .io import Dataset

TWO_PI = 2.0 * np.pi

# spawn-key namespaces
_KEY_TASK = 1
_KEY_SUBJECT = 2
_KEY_SHIFT = 3
_KEY_TRIAL = 4


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _oscillator_bank(seed: int, task: str, n_oscillators: int) -> np.ndarray:
    """Well-separated oscillator frequencies in the 4-30 Hz band, per task.

    A geometric ladder keeps neighboring oscillators far enough apart
    that cross-frequency beats do not smear instantaneous phase; the
    task-specific jitter moves the whole ladder without collapsing it.
    """
    rng = _rng(seed, _KEY_TASK, TASKS.index(task))
    ladder = np.geomspace(5.0, 25.0, n_oscillators)
    return ladder * (1.0 + 0.08 * rng.uniform(-1.0, 1.0, size=n_oscillators))


def _subject_pattern(seed: int, subject: int, n_channels: int, n_oscillators: int):
    """Instance-mixing angles, phase offsets and rotations for one subject.

    Every channel is driven by the oscillator frequency ``channel % L``
    for every subject, blending that frequency's two independent
    instances as cos(a)*A + sin(a)*B.  The blend angles come from a
    ladder shared by all subjects; a subject merely permutes which
    channel gets which angle (plus per-channel phase offsets and a gentle
    orthogonal mixing).  Per-channel spectra are therefore identical
    across subjects while the *pairwise* phase-locking profile, graded by
    angle distance, identifies the subject: identity lives in
    connectivity.
    """
    rng = _rng(seed, _KEY_SUBJECT, subject)
    # angles cluster at the two poles: channels are near-pure instances,
    # which keeps locked pairs inside the narrow entropy-sensitive window
    pole = rng.integers(0, 2, size=n_channels)
    wobble = rng.uniform(0.0, 0.12, size=n_channels)
    alphas = np.where(pole == 0, wobble, 0.5 * np.pi - wobble)
    offsets = rng.uniform(0.0, TWO_PI, size=n_channels)
    k = n_channels
    rot_i = rng.integers(0, n_channels, size=k)
    rot_j = (rot_i + rng.integers(1, n_channels, size=k)) % n_channels
    rot_theta = rng.uniform(-0.03, 0.03, size=k)
    return alphas, offsets, (rot_i, rot_j, rot_theta)


def _session_two_pattern(seed, subject, alphas, offsets, rotations,
                         session_shift, n_channels):
    """Perturb a subject's pattern; a zero shift is an exact no-op."""
    rng = _rng(seed, _KEY_SHIFT, subject)
    alphas = alphas + session_shift * rng.normal(0.0, np.pi / 6.0, size=alphas.shape)
    offsets = offsets + session_shift * rng.normal(0.0, 0.5 * np.pi, size=offsets.shape)
    extra_i = rng.integers(0, n_channels, size=n_channels)
    extra_j = (extra_i + rng.integers(1, n_channels, size=n_channels)) % n_channels
    extra_theta = session_shift * rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size=n_channels)
    rot_i, rot_j, rot_theta = rotations
    rotations = (
        np.concatenate([rot_i, extra_i]),
        np.concatenate([rot_j, extra_j]),
        np.concatenate([rot_theta, extra_theta]),
    )
    return alphas, offsets, rotations


def _apply_rotations(signals: np.ndarray, rotations) -> np.ndarray:
    """In-place product of Givens rotations: an orthogonal channel mixing."""
    rot_i, rot_j, rot_theta = rotations
    cos_t = np.cos(rot_theta)
    sin_t = np.sin(rot_theta)
    for i, j, c, s in zip(rot_i, rot_j, cos_t, sin_t):
        row_i = signals[i].copy()
        signals[i] = c * row_i - s * signals[j]
        signals[j] = s * row_i + c * signals[j]
    return signals


def _bandlimited_noise(rng, shape, sample_rate_hz, low_hz=3.0, high_hz=40.0):
    """Unit-RMS gaussian noise confined to the EEG band.

    Trials emulate already-bandpassed recordings, so the noise floor must
    live in the same band as the oscillators.
    """
    white = rng.normal(size=shape)
    spectrum = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(shape[-1], d=1.0 / sample_rate_hz)
    spectrum[..., (freqs < low_hz) | (freqs > high_hz)] = 0.0
    noise = np.fft.irfft(spectrum, n=shape[-1], axis=-1)
    rms = np.sqrt((noise**2).mean(axis=-1, keepdims=True))
    return noise / rms


def _render_trial(rng, freqs, alphas, offsets, rotations, t_samples,
                  sample_rate_hz, snr_db, gain_jitter, phase_diffusion,
                  common_noise_fraction):
    # two independent instances per frequency; within-trial phases drift
    # apart across instances while channels blend them by their angle
    n_osc = 2 * freqs.shape[0]
    doubled = np.repeat(freqs, 2)
    jittered = doubled * (1.0 + 0.02 * rng.normal(size=n_osc))
    start = rng.uniform(0.0, TWO_PI, size=n_osc)
    ramp = np.arange(t_samples) / sample_rate_hz
    theta = TWO_PI * jittered[:, None] * ramp[None, :] + start[:, None]
    theta = theta + np.cumsum(rng.normal(0.0, phase_diffusion, size=theta.shape), axis=1)
    n_channels = alphas.shape[0]
    freq_of_channel = np.arange(n_channels) % freqs.shape[0]
    theta_a = theta[2 * freq_of_channel] + offsets[:, None]
    theta_b = theta[2 * freq_of_channel + 1] + offsets[:, None]
    signals = np.cos(alphas)[:, None] * np.cos(theta_a) + np.sin(alphas)[:, None] * np.cos(theta_b)
    signals = _apply_rotations(signals, rotations)
    rms = np.sqrt((signals**2).mean(axis=1, keepdims=True))
    noise_std = rms / (10.0 ** (snr_db / 20.0))
    # volume conduction and the shared reference make EEG noise spatially
    # correlated: split it into a common-mode part and private parts
    common = _bandlimited_noise(rng, (1, t_samples), sample_rate_hz)
    private = _bandlimited_noise(rng, signals.shape, sample_rate_hz)
    noise = (
        np.sqrt(common_noise_fraction) * common
        + np.sqrt(1.0 - common_noise_fraction) * private
    )
    signals = signals + noise_std * noise
    gains = np.exp(rng.normal(0.0, gain_jitter, size=(n_channels, 1)))
    signals = 20.0 * gains * signals
    # quantize so container round-trips are lossless
    return signals.astype(np.float32).astype(np.float64)


def generate_synthetic(
    m_subjects: int,
    trials_per_subject: int,
    n_channels: int,
    t_samples: int,
    session_shift: float = 0.0,
    seed: int = 0,
    *,
    task: str = "SYNTH",
    sessions: tuple[str, ...] = ("I", "II"),
    sample_rate_hz: float = 250.0,
    snr_db: float = 5.0,
    gain_jitter: float = 0.3,
    n_oscillators: int = 3,
    phase_diffusion: float = 0.03,
    common_noise_fraction: float = 0.5,
) -> Dataset:
    """Generate a deterministic multi-subject dataset.

    Returns one :class:`Dataset` holding ``trials_per_subject`` trials per
    subject for each requested session (session-major order).  Use
    ``Dataset.filter`` to pull out a single session for saving.
    """
    if m_subjects < 2:
        raise ParameterError("need at least 2 subjects")
    if n_channels < 4:
        raise ParameterError("need at least 4 channels")
    if t_samples < 200:
        raise ParameterError("need at least 200 samples per trial")
    if trials_per_subject < 1:
        raise ParameterError("need at least 1 trial per subject")
    if task not in TASKS:
        raise ParameterError(f"unknown task {task!r}")
    for session in sessions:
        if session not in SESSIONS:
            raise ParameterError(f"unknown session {session!r}")
    layout = default_layout(n_channels)
    freqs = _oscillator_bank(seed, task, n_oscillators)

    patterns = {}
    for j in range(m_subjects):
        base = _subject_pattern(seed, j, n_channels, n_oscillators)
        patterns[(j, "I")] = base
        patterns[(j, "II")] = _session_two_pattern(
            seed, j, *base, session_shift=session_shift, n_channels=n_channels
        )

    trials = []
    for session in sessions:
        session_index = SESSIONS.index(session)
        for j in range(m_subjects):
            alphas, offsets, rotations = patterns[(j, session)]
            for i in range(trials_per_subject):
                rng = _rng(seed, _KEY_TRIAL, j, session_index, i)
                data = _render_trial(
                    rng, freqs, alphas, offsets, rotations, t_samples,
                    sample_rate_hz, snr_db, gain_jitter, phase_diffusion,
                    common_noise_fraction,
                )
                trials.append(
                    Trial(
                        data=data,
                        subject_id=j,
                        session=session,
                        task=task,
                        sample_rate_hz=sample_rate_hz,
                    )
                )
    return Dataset(trials=trials, layout=layout)
