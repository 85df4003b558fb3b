"""Random weight-matrix generators (M1-M5) and scaling rules (R1-R5).

M1  columns uniform on the unit sphere of R^rows
M2  entries i.i.d. N(0, 1/rows)
M3  entries i.i.d. U[-1, 1]
M4  a random ``sparsity_fraction`` of the entries U[-1, 1], the rest zero
M5  a random ``sparsity_fraction`` of the entries N(0, 1/rows), the rest zero

R1  rho = 1
R2  rho = 2 / (a + b), with [a, b] the sampled near-isometry interval of W
R3  rho = 1 / spectral_radius(W)
R4  rho = 0.9 / spectral_radius(W)
R5  rho = 1 / largest_singular_value(W)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMatrixError, ShapeError, ValidationError
from .isometry import DEFAULT_SAMPLES, estimate_nii
from .numerics import RngStream, Seed, as_matrix, largest_singular_value, spectral_radius

GEN_TAGS = ("M1", "M2", "M3", "M4", "M5")
SCALE_TAGS = ("R1", "R2", "R3", "R4", "R5")

# Debug generator used by the isometry sweep; not part of the M1-M5 family.
IDENTITY_TAG = "I"

DEGENERATE_THRESHOLD = 1e-12


@dataclass(frozen=True)
class GenMethod:
    tag: str
    sparsity_fraction: float = 1.0

    def __post_init__(self):
        if self.tag not in GEN_TAGS + (IDENTITY_TAG,):
            raise ValidationError(f"unknown generation method {self.tag!r}")
        if self.tag in ("M4", "M5"):
            if not 0.0 < self.sparsity_fraction <= 1.0:
                raise ValidationError(
                    f"sparsity_fraction must lie in (0, 1], got {self.sparsity_fraction}")
        else:
            object.__setattr__(self, "sparsity_fraction", 1.0)


@dataclass(frozen=True)
class ScaleMethod:
    tag: str
    nii_samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.tag not in SCALE_TAGS:
            raise ValidationError(f"unknown scaling method {self.tag!r}")
        if self.nii_samples < 1:
            raise ValidationError("nii_samples must be positive")


@dataclass(frozen=True)
class WeightSpec:
    gen: GenMethod
    scale: ScaleMethod = field(default_factory=lambda: ScaleMethod("R1"))
    rows: int = 200
    cols: int = 200
    seed: Seed = field(default_factory=lambda: Seed(0))

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"rows and cols must be positive, got {self.rows}x{self.cols}")
        if self.scale.tag in ("R3", "R4") and self.rows != self.cols:
            raise ValidationError(
                f"{self.scale.tag} needs a square matrix (rows = cols), got {self.rows}x{self.cols}")
        if self.gen.tag == IDENTITY_TAG and self.rows != self.cols:
            raise ValidationError("the identity generator needs rows = cols")

    def to_dict(self) -> dict:
        return {
            "gen": self.gen.tag,
            "sparsity_fraction": self.gen.sparsity_fraction,
            "scale": self.scale.tag,
            "nii_samples": self.scale.nii_samples,
            "rows": self.rows,
            "cols": self.cols,
            "seed": self.seed.value,
            "stream": self.seed.stream,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSpec":
        return cls(
            gen=GenMethod(d["gen"], float(d.get("sparsity_fraction", 1.0))),
            scale=ScaleMethod(d.get("scale", "R1"), int(d.get("nii_samples", DEFAULT_SAMPLES))),
            rows=int(d["rows"]),
            cols=int(d["cols"]),
            seed=Seed(int(d.get("seed", 0)), int(d.get("stream", 0))),
        )


def nonzero_count(gen: GenMethod, rows: int, cols: int) -> int:
    return int(round(gen.sparsity_fraction * rows * cols))


def generate(spec: WeightSpec, rng: RngStream | None = None) -> np.ndarray:
    """Draw the unscaled matrix described by ``spec``.

    Uses ``rng`` if given, otherwise a fresh stream on ``spec.seed``.
    """
    rng = rng if rng is not None else RngStream(spec.seed)
    m, n, tag = spec.rows, spec.cols, spec.gen.tag
    if tag == "M1":
        return rng.sphere(m, n)
    if tag == "M2":
        return rng.normal((m, n), var=1.0 / m)
    if tag == "M3":
        return rng.uniform_pm1((m, n))
    if tag == IDENTITY_TAG:
        return np.eye(m)
    k = nonzero_count(spec.gen, m, n)
    w = np.zeros(m * n)
    pos = rng.sample_indices(m * n, k)
    w[pos] = rng.uniform_pm1(k) if tag == "M4" else rng.normal(k, var=1.0 / m)
    return w.reshape(m, n)


def scale_factor(method: ScaleMethod, w, rng: RngStream | None = None) -> float:
    """Scaling factor rho for ``w`` under rule ``method``.

    R2 measures the near-isometry interval of the unscaled ``w`` (rho = 1)
    and therefore needs ``rng``; the other rules are deterministic.
    """
    w = as_matrix(w, "w")
    tag = method.tag
    if tag == "R1":
        return 1.0
    if tag == "R2":
        if rng is None:
            raise ValidationError("R2 needs a random stream for the interval estimate")
        iv = estimate_nii(w, 1.0, method.nii_samples, rng)
        mid = iv.lower + iv.upper
        if mid / 2 < DEGENERATE_THRESHOLD:
            raise DegenerateMatrixError("near-isometry interval is numerically zero")
        return 2.0 / mid
    if tag in ("R3", "R4"):
        if w.shape[0] != w.shape[1]:
            raise ShapeError(f"{tag} needs a square matrix, got {w.shape}")
        r = spectral_radius(w)
        if r < DEGENERATE_THRESHOLD:
            raise DegenerateMatrixError(f"spectral radius {r:.3g} is numerically zero")
        return (1.0 if tag == "R3" else 0.9) / r
    s = largest_singular_value(w)
    if s < DEGENERATE_THRESHOLD:
        raise DegenerateMatrixError(f"largest singular value {s:.3g} is numerically zero")
    return 1.0 / s


def build(spec: WeightSpec, rng: RngStream | None = None) -> tuple[np.ndarray, float]:
    """Generate W and its scale factor from one stream; returns ``(W, rho)``."""
    rng = rng if rng is not None else RngStream(spec.seed)
    w = generate(spec, rng)
    return w, scale_factor(spec.scale, w, rng)
