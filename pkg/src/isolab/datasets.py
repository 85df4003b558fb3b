"""Noisy sine-versus-square-wave sequences for the reservoir classification task."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .numerics import RngStream, Seed

CLASSES = ("sine", "square")


@dataclass(frozen=True)
class WaveSequence:
    input: np.ndarray  # 1 x T
    label: int  # index into CLASSES
    seed: Seed

    @property
    def class_name(self) -> str:
        return CLASSES[self.label]


@dataclass(frozen=True)
class WaveDataset:
    sequences: tuple[WaveSequence, ...]
    period: int
    repeats: int
    noise_sigma: float
    seed: Seed

    @property
    def length(self) -> int:
        return self.period * self.repeats


def clean_wave(label: int, period: int, repeats: int, offset: int = 0) -> np.ndarray:
    """Noise-free unit-amplitude waveform of length ``period * repeats``.

    The square wave is +1 on the first half of each period and -1 on the
    second, i.e. ``sign(sin)`` with the zero crossings at t = 0 and t = period/2
    assigned to the half-period they open.
    """
    t = np.arange(period * repeats) + offset
    if CLASSES[label] == "sine":
        return np.sin(2.0 * np.pi * (t % period) / period)
    return np.where(2 * (t % period) < period, 1.0, -1.0)


def gen_wave_dataset(period: int, repeats: int, n_per_class: int, noise_sigma: float,
                     rng: RngStream, offset: int = 0) -> WaveDataset:
    """Balanced dataset: ``n_per_class`` sine then ``n_per_class`` square sequences.

    Each sequence draws its noise from its own substream of ``rng.seed`` so
    sequences can be regenerated independently.
    """
    if period < 2:
        raise ValidationError("period must be at least 2")
    if repeats < 1 or n_per_class < 1:
        raise ValidationError("repeats and n_per_class must be positive")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be nonnegative")
    # One fresh draw from the parent stream seeds all per-sequence substreams.
    base = int(rng.gen.integers(0, 2**63))
    seqs = []
    for label in range(len(CLASSES)):
        wave = clean_wave(label, period, repeats, offset)
        for i in range(n_per_class):
            seed = Seed(base, label * n_per_class + i)
            noise = RngStream(seed).normal(wave.shape, var=noise_sigma ** 2)
            seqs.append(WaveSequence((wave + noise)[None, :], label, seed))
    return WaveDataset(tuple(seqs), period, repeats, noise_sigma, rng.seed)


def write_sequence(seq: WaveSequence, period: int, repeats: int, path) -> None:
    """One sequence per file: ``class,period,repeats,seed`` header then one sample per line.

    The seed field is written as ``value:stream``.
    """
    path = Path(path)
    lines = [f"{seq.class_name},{period},{repeats},{seq.seed.value}:{seq.seed.stream}"]
    lines += [repr(float(v)) for v in seq.input[0]]
    path.write_text("\n".join(lines) + "\n")


def read_sequence(path) -> tuple[WaveSequence, int, int]:
    text = Path(path).read_text().splitlines()
    name, period, repeats, seed = text[0].split(",")
    value, stream = seed.split(":")
    data = np.array([float(v) for v in text[1:] if v.strip()])
    if len(data) != int(period) * int(repeats):
        raise ValidationError(f"{path}: expected {int(period) * int(repeats)} samples, found {len(data)}")
    seq = WaveSequence(data[None, :], CLASSES.index(name), Seed(int(value), int(stream)))
    return seq, int(period), int(repeats)
