"""Dense real grids, Euclidean geometry, seeded randomness and noise injection.

Images are plain 2-D ``float64`` numpy arrays, flattened row-major whenever a
vector view is needed. Measurements carry their noise level alongside the
data so the stopping rule never has to guess it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Measurement",
    "RandomSource",
    "inner",
    "norm",
    "add_noise",
    "as_image",
]


def as_image(u, name="image"):
    """Return ``u`` as a finite 2-D float64 array (copy only when needed)."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class Measurement:
    """Observed data ``v`` together with its noise level ``delta``.

    ``noise_level == 0`` marks exact data.
    """

    values: np.ndarray
    noise_level: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError("measurement values must be finite")
        if not self.noise_level >= 0:
            raise ValueError(f"noise_level must be >= 0, got {self.noise_level}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "noise_level", float(self.noise_level))

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_exact(self):
        return self.noise_level == 0.0


@dataclass
class RandomSource:
    """Seeded generator; identical seeds give identical draw sequences.

    Single-owner: do not share one instance between concurrent tasks, use
    :meth:`spawn` to derive independent child streams instead.
    """

    seed: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.generator = np.random.default_rng(np.random.SeedSequence(self.seed))

    @classmethod
    def for_cell(cls, base_seed, cell_index):
        """Stream for one experiment cell, independent of scheduling order."""
        entropy = np.random.SeedSequence([int(base_seed), int(cell_index)]).generate_state(2)
        return cls(int(entropy[0]) << 32 | int(entropy[1]))

    def standard_normal(self, shape):
        return self.generator.standard_normal(shape)

    def uniform(self, shape, low=0.0, high=1.0):
        return self.generator.uniform(low, high, size=shape)


def inner(a, b):
    """Euclidean inner product of two equally shaped arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def norm(a):
    """Euclidean (Frobenius) norm."""
    a = np.asarray(a, dtype=np.float64).ravel()
    return float(np.sqrt(np.dot(a, a)))


def add_noise(clean, delta_rel, rng):
    """Perturb ``clean`` by Gaussian noise of exact relative norm ``delta_rel``.

    A standard-normal array is drawn and normalised to unit Euclidean norm
    over the whole data array, then scaled by ``delta_rel * ||clean||``. The
    returned measurement's ``noise_level`` is that absolute norm.
    """
    values = clean.values if isinstance(clean, Measurement) else np.asarray(clean, dtype=np.float64)
    if delta_rel < 0:
        raise ValueError(f"delta_rel must be >= 0, got {delta_rel}")
    if delta_rel == 0:
        return Measurement(values, 0.0)
    scale = norm(values)
    if scale == 0.0:
        raise ValueError("cannot add relative noise to all-zero data")
    z = rng.standard_normal(values.shape)
    z /= norm(z)
    delta = delta_rel * scale
    return Measurement(values + delta * z, delta)
