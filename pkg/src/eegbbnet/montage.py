"""Default electrode montage and named electrode groups.

Positions are 2-D projections in normalized head space (nose toward +y,
left ear toward -x), adequate for distance-based connectivity.  Group
membership lives in ``data/electrode_groups.txt`` so it can be edited
without touching code.
"""

from __future__ import annotations

from importlib import resources

from .errors import ParameterError

# name -> (x, y), 62 channels of a full research-amplifier cap.
CHANNEL_POSITIONS = {
    "Fp1": (-0.18, 0.90), "Fp2": (0.18, 0.90),
    "F7": (-0.74, 0.54), "F3": (-0.36, 0.56), "Fz": (0.0, 0.58),
    "F4": (0.36, 0.56), "F8": (0.74, 0.54),
    "FC5": (-0.60, 0.30), "FC1": (-0.19, 0.32), "FC2": (0.19, 0.32), "FC6": (0.60, 0.30),
    "T7": (-0.92, 0.0), "C3": (-0.38, 0.0), "Cz": (0.0, 0.0),
    "C4": (0.38, 0.0), "T8": (0.92, 0.0),
    "TP9": (-0.98, -0.30), "CP5": (-0.60, -0.30), "CP1": (-0.19, -0.32),
    "CP2": (0.19, -0.32), "CP6": (0.60, -0.30), "TP10": (0.98, -0.30),
    "P7": (-0.74, -0.54), "P3": (-0.36, -0.56), "Pz": (0.0, -0.58),
    "P4": (0.36, -0.56), "P8": (0.74, -0.54),
    "PO9": (-0.58, -0.80), "O1": (-0.18, -0.90), "Oz": (0.0, -0.92),
    "O2": (0.18, -0.90), "PO10": (0.58, -0.80),
    "FC3": (-0.40, 0.31), "FC4": (0.40, 0.31),
    "C5": (-0.57, 0.0), "C1": (-0.19, 0.0), "C2": (0.19, 0.0), "C6": (0.57, 0.0),
    "CP3": (-0.40, -0.31), "CPz": (0.0, -0.33), "CP4": (0.40, -0.31),
    "P1": (-0.18, -0.57), "P2": (0.18, -0.57),
    "POz": (0.0, -0.76),
    "FT9": (-0.90, 0.28), "FTT9h": (-0.84, 0.14), "TTP7h": (-0.78, -0.14),
    "TP7": (-0.78, -0.33), "TPP9h": (-0.86, -0.45),
    "FT10": (0.90, 0.28), "FTT10h": (0.84, 0.14), "TTP8h": (0.78, -0.14),
    "TP8": (0.78, -0.33), "TPP10h": (0.86, -0.45),
    "F9": (-0.90, 0.42), "F10": (0.90, 0.42),
    "AF7": (-0.50, 0.73), "AF3": (-0.25, 0.74), "AF4": (0.25, 0.74), "AF8": (0.50, 0.73),
    "PO3": (-0.29, -0.74), "PO4": (0.29, -0.74),
}

CHANNEL_NAMES = tuple(CHANNEL_POSITIONS)


def default_layout(n_channels: int = 62):
    """Layout of the first ``n_channels`` default cap channels."""
    from .connectivity import ElectrodeLayout

    if not 2 <= n_channels <= len(CHANNEL_NAMES):
        raise ParameterError(
            f"default layout supports 2..{len(CHANNEL_NAMES)} channels, got {n_channels}"
        )
    names = list(CHANNEL_NAMES[:n_channels])
    positions = [CHANNEL_POSITIONS[name] for name in names]
    return ElectrodeLayout(positions=positions, names=names)


def load_electrode_groups(path=None) -> dict[str, list[str]]:
    """Parse the electrode-group table.

    ``path`` overrides the packaged default file.  Returns a mapping of
    group name to channel-name list.
    """
    if path is None:
        text = resources.files("eegbbnet.data").joinpath("electrode_groups.txt").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    groups: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ParameterError(f"electrode group file line {lineno}: missing ':'")
        name, _, members = line.partition(":")
        name = name.strip()
        channels = members.split()
        if not name or not channels:
            raise ParameterError(f"electrode group file line {lineno}: empty group")
        groups[name] = channels
    return groups
