"""Sparse sources, Gaussian sensing matrices and the linear measurement map."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class InvalidParameterError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class Dist(str, enum.Enum):
    """Distribution of the non-zero coefficients of a sparse source."""

    GAUSSIAN_UNIT = "gaussian_unit"
    UNIFORM_PM1 = "uniform_pm1"

    def second_moment(self) -> float:
        """E[X_s^2] for one non-zero coefficient."""
        return 1.0 if self is Dist.GAUSSIAN_UNIT else 1.0 / 3.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self is Dist.GAUSSIAN_UNIT:
            return rng.standard_normal(size)
        return rng.uniform(-1.0, 1.0, size)


def as_dist(dist) -> Dist:
    try:
        return Dist(dist)
    except ValueError:
        aliases = {"gaussian": Dist.GAUSSIAN_UNIT, "uniform": Dist.UNIFORM_PM1}
        if dist in aliases:
            return aliases[dist]
        raise InvalidParameterError(f"unknown coefficient distribution {dist!r}") from None


@dataclass(frozen=True)
class SparseSignal:
    """Exactly K-sparse vector of length M.

    ``support`` is kept in increasing order.
    """

    coefficients: np.ndarray
    support: tuple[int, ...]
    dist: Dist

    def __post_init__(self):
        x = np.asarray(self.coefficients, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "coefficients", x)
        if len(set(self.support)) != len(self.support):
            raise InvalidParameterError("support positions must be unique")
        if any(not 0 <= s < x.size for s in self.support):
            raise InvalidParameterError("support position out of range")
        if len(self.support) >= x.size:
            raise InvalidParameterError("support must be smaller than the signal length")
        off = np.ones(x.size, dtype=bool)
        off[list(self.support)] = False
        if np.any(x[off] != 0.0):
            raise InvalidParameterError("coefficients must vanish off the support")

    @property
    def m(self) -> int:
        return self.coefficients.size

    @property
    def k(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class SensingMatrix:
    """N x M measurement operator with unit-norm columns."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.entries, dtype=float)
        if a.ndim != 2:
            raise InvalidParameterError("sensing matrix must be two-dimensional")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @cached_property
    def transposed(self) -> np.ndarray:
        """C-contiguous copy of the transpose, used by the OMP kernel."""
        t = np.ascontiguousarray(self.entries.T)
        t.setflags(write=False)
        return t


def _check_counts(small: int, large: int, small_name: str, large_name: str):
    if small <= 0 or large <= 0:
        raise InvalidParameterError(f"{small_name} and {large_name} must be positive")
    if small >= large:
        raise InvalidParameterError(
            f"{small_name}={small} must be smaller than {large_name}={large}"
        )


def generate_sparse_signal(m: int, k: int, dist, rng: np.random.Generator) -> SparseSignal:
    """Draw an exactly k-sparse vector of length m.

    The support is uniform over all size-k subsets; the non-zero values are
    i.i.d. standard normal or uniform on [-1, 1].
    """
    _check_counts(k, m, "k", "m")
    dist = as_dist(dist)
    support = np.sort(rng.choice(m, size=k, replace=False))
    values = dist.sample(rng, k)
    # a continuous draw of exactly 0.0 would break the cardinality invariant
    values[values == 0.0] = np.finfo(float).tiny
    x = np.zeros(m)
    x[support] = values
    return SparseSignal(x, tuple(int(s) for s in support), dist)


def generate_sensing_matrix(n: int, m: int, rng: np.random.Generator) -> SensingMatrix:
    """Gaussian N(0, 1/n) matrix whose columns are then rescaled to unit norm."""
    _check_counts(n, m, "n", "m")
    phi = rng.normal(0.0, 1.0 / math.sqrt(n), size=(n, m))
    phi /= np.linalg.norm(phi, axis=0)
    return SensingMatrix(phi)


def measure(phi: SensingMatrix, x) -> np.ndarray:
    """Return ``y = phi @ x``."""
    values = x.coefficients if isinstance(x, SparseSignal) else np.asarray(x, dtype=float)
    if values.ndim != 1 or values.size != phi.n_cols:
        raise InvalidParameterError(
            f"signal length {values.size} does not match sensing matrix with {phi.n_cols} columns"
        )
    return phi.entries @ values


def n_measurements(alpha: float, m: int) -> int:
    """Number of measurements for measurement rate ``alpha``; halves round away from zero."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidParameterError(f"measurement rate must lie in (0, 1], got {alpha}")
    return int(math.floor(alpha * m + 0.5))


def expected_energy(k: int, dist) -> float:
    """E[||X||^2] of a k-sparse source with the given non-zero distribution."""
    return k * as_dist(dist).second_moment()


def trial_rng(master_seed: int, trial_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one Monte-Carlo trial.

    The stream depends only on ``(master_seed, stream, trial_index)``, so a
    trial draws the same data whatever order or thread it runs in.
    """
    seq = np.random.SeedSequence(master_seed, spawn_key=(stream, trial_index))
    return np.random.default_rng(seq)
