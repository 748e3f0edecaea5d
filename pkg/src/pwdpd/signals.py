"""Complex baseband signal container and its on-disk format.

An IqSignal on disk is a pair of files: ``<stem>.iq`` holding little-endian
interleaved float64 I/Q pairs, and a JSON sidecar ``<stem>.iq.json`` with
sample_rate, length and the generating seed (if any).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError


@dataclass
class IqSignal:
    """Complex baseband sample sequence with sample-rate metadata."""

    samples: np.ndarray
    sample_rate: float
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ConfigError("IqSignal requires a non-empty 1-D sample array")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigError("IqSignal samples must be finite")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power(self) -> float:
        """Mean sample power |x|^2."""
        return float(np.mean(np.abs(self.samples) ** 2))

    @property
    def rms(self) -> float:
        return float(np.sqrt(self.power))

    def scaled_to_rms(self, rms: float) -> "IqSignal":
        """Return a copy scaled to the requested RMS amplitude."""
        if self.rms == 0:
            raise ConfigError("cannot rescale an all-zero signal")
        return IqSignal(self.samples * (rms / self.rms), self.sample_rate, self.seed)

    def with_samples(self, samples: np.ndarray) -> "IqSignal":
        return IqSignal(samples, self.sample_rate, self.seed)


def write_iq(stem: str | Path, sig: IqSignal) -> tuple[Path, Path]:
    """Write signal to <stem>.iq (+ JSON sidecar); returns both paths."""
    stem = Path(stem)
    bin_path = stem.with_suffix(".iq")
    meta_path = Path(str(bin_path) + ".json")
    interleaved = np.empty(2 * len(sig), dtype="<f8")
    interleaved[0::2] = sig.samples.real
    interleaved[1::2] = sig.samples.imag
    interleaved.tofile(bin_path)
    meta = {
        "format": "iq-float64-le-interleaved",
        "sample_rate": sig.sample_rate,
        "length": len(sig),
        "seed": sig.seed,
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return bin_path, meta_path


def read_iq(stem: str | Path) -> IqSignal:
    """Read a signal written by write_iq; accepts the stem or the .iq path."""
    path = Path(stem)
    if path.suffix != ".iq":
        path = path.with_suffix(".iq")
    meta_path = Path(str(path) + ".json")
    if not path.exists() or not meta_path.exists():
        raise ConfigError(f"missing IQ file or sidecar for {path}")
    meta = json.loads(meta_path.read_text())
    raw = np.fromfile(path, dtype="<f8")
    if raw.size != 2 * int(meta["length"]):
        raise ConfigError(f"IQ payload length {raw.size // 2} does not match sidecar {meta['length']}")
    samples = raw[0::2] + 1j * raw[1::2]
    return IqSignal(samples, float(meta["sample_rate"]), meta.get("seed"))
