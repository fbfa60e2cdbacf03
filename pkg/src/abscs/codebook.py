"""Scalar codebooks and their offline Lloyd training."""

from __future__ import annotations

import enum
import hashlib
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (
    Dist,
    InvalidParameterError,
    as_dist,
    generate_sensing_matrix,
    generate_sparse_signal,
    measure,
)


class CodebookFormatError(ValueError):
    """Malformed codebook file."""


class TrainingSource(str, enum.Enum):
    MEASUREMENT_EMPIRICAL = "measurement_empirical"
    MEASUREMENT_GAUSSIAN = "measurement_gaussian"
    SIGNAL_DIRECT = "signal_direct"
    SIGNAL_SUPPORT = "signal_support"

    @property
    def is_measurement(self) -> bool:
        return self in (TrainingSource.MEASUREMENT_EMPIRICAL, TrainingSource.MEASUREMENT_GAUSSIAN)


@dataclass(frozen=True, eq=False)
class Codebook:
    """Sorted reproduction codepoints of one scalar quantizer.

    ``distortions`` holds the Lloyd training history when the codebook was
    trained in this process; it is not part of the file format and is
    ignored by equality.
    """

    codepoints: np.ndarray
    rate_bits: int
    mode: str = "manual"
    distortions: tuple[float, ...] = field(default=(), repr=False)
    degenerate: bool = False

    def __post_init__(self):
        c = np.array(self.codepoints, dtype=float).ravel()
        if self.rate_bits < 0:
            raise InvalidParameterError("rate_bits must be non-negative")
        if c.size != 2**self.rate_bits:
            raise InvalidParameterError(
                f"{c.size} codepoints given for a {self.rate_bits}-bit codebook"
            )
        if np.any(np.diff(c) <= 0):
            raise InvalidParameterError("codepoints must be strictly increasing")
        if not np.all(np.isfinite(c)):
            raise InvalidParameterError("codepoints must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "codepoints", c)

    def __len__(self):
        return self.codepoints.size

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return (
            self.rate_bits == other.rate_bits
            and self.mode == other.mode
            and np.array_equal(self.codepoints, other.codepoints)
        )

    def __hash__(self):
        return hash((self.rate_bits, self.mode, self.codepoints.tobytes()))

    def nearest(self, values) -> np.ndarray:
        """Index of the nearest codepoint for each value; ties go to the smaller index."""
        v = np.asarray(values, dtype=float)
        return np.argmin(np.abs(v[..., None] - self.codepoints), axis=-1)

    def to_text(self) -> str:
        lines = [f"rate_bits={self.rate_bits}", f"mode={self.mode}"]
        lines += [float(c).hex() for c in self.codepoints]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Codebook":
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if len(lines) < 3 or not lines[0].startswith("rate_bits=") or not lines[1].startswith("mode="):
            raise CodebookFormatError("expected 'rate_bits=' and 'mode=' header lines")
        try:
            rate = int(lines[0].split("=", 1)[1])
            points = [float.fromhex(ln) for ln in lines[2:]]
        except ValueError as exc:
            raise CodebookFormatError(str(exc)) from None
        try:
            return cls(np.array(points), rate, lines[1].split("=", 1)[1])
        except InvalidParameterError as exc:
            raise CodebookFormatError(str(exc)) from None

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_text().encode()).digest()

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Codebook":
        return cls.from_text(Path(path).read_text())


def _distortion(samples: np.ndarray, codepoints: np.ndarray) -> tuple[float, np.ndarray]:
    if codepoints.size == 1:
        cells = np.zeros(samples.size, dtype=np.intp)
    else:
        cells = np.searchsorted((codepoints[:-1] + codepoints[1:]) / 2, samples, side="left")
    err = samples - codepoints[cells]
    return float(np.mean(err * err)), cells


def lloyd_train(
    samples,
    rate_bits: int,
    max_iters: int = 200,
    rel_tol: float = 1e-9,
    mode: str = "manual",
) -> Codebook:
    """Train a ``2**rate_bits``-level scalar quantizer on empirical samples.

    Starts from evenly spaced sample quantiles and alternates
    nearest-codepoint partitioning with centroid updates until the relative
    drop in mean squared error is below ``rel_tol``.  An empty interior cell
    is moved to the midpoint of its neighbours; an empty edge cell keeps its
    codepoint.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise InvalidParameterError("no training samples")
    levels = 2**rate_bits
    if rate_bits == 0:
        c = np.array([x.mean()])
        d, _ = _distortion(x, c)
        return Codebook(c, 0, mode, (d,))

    if x[0] == x[-1]:
        warnings.warn("degenerate training set: all samples identical", RuntimeWarning, stacklevel=2)
        eps = max(abs(x[0]), 1.0) * 1e-9
        c = x[0] + eps * (np.arange(levels) - (levels - 1) / 2)
        return Codebook(c, rate_bits, mode, (0.0,), degenerate=True)

    c = np.quantile(x, (np.arange(levels) + 0.5) / levels)
    c = _spread(c, x)
    history = []
    d, cells = _distortion(x, c)
    history.append(d)
    for _ in range(max_iters):
        sums = np.bincount(cells, weights=x, minlength=levels)
        counts = np.bincount(cells, minlength=levels)
        new = c.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled]
        for i in np.flatnonzero(~filled):
            if 0 < i < levels - 1:
                new[i] = 0.5 * (new[i - 1] + new[i + 1])
        new = _spread(new, x)
        d_new, cells = _distortion(x, new)
        c = new
        history.append(d_new)
        if abs(d - d_new) <= rel_tol * d:
            break
        d = d_new
    return Codebook(c, rate_bits, mode, tuple(history))


def _spread(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    # coincident codepoints (heavy point masses) get nudged apart
    c = np.sort(c)
    if np.all(np.diff(c) > 0):
        return c
    gap = max(float(x[-1] - x[0]), 1.0) * 1e-9
    for i in range(1, c.size):
        if c[i] <= c[i - 1]:
            c[i] = c[i - 1] + gap
    return c


@dataclass(frozen=True)
class TrainingSpec:
    """Where training samples come from.

    ``m, n, k, dist`` describe the sparse-source regime; ``n`` is only used
    by the measurement-domain sources.
    """

    source: TrainingSource
    m: int
    k: int
    n: int | None = None
    dist: Dist = Dist.GAUSSIAN_UNIT
    n_samples: int = 100_000
    max_lloyd_iters: int = 200
    rel_tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "source", TrainingSource(self.source))
        object.__setattr__(self, "dist", as_dist(self.dist))
        if self.source.is_measurement and self.n is None:
            raise InvalidParameterError("measurement-domain training needs n")

    def samples_for(self, rate_bits: int) -> int:
        return max(self.n_samples, 100 * 2**rate_bits)


def measurement_samples(spec: TrainingSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    if spec.source is TrainingSource.MEASUREMENT_GAUSSIAN:
        return rng.normal(0.0, math.sqrt(spec.k / spec.n), size=count)
    chunks = []
    total = 0
    while total < count:
        phi = generate_sensing_matrix(spec.n, spec.m, rng)
        x = generate_sparse_signal(spec.m, spec.k, spec.dist, rng)
        y = measure(phi, x)
        chunks.append(y)
        total += y.size
    return np.concatenate(chunks)[:count]


def signal_samples(spec: TrainingSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    values = spec.dist.sample(rng, count)
    if spec.source is TrainingSource.SIGNAL_DIRECT:
        # each coefficient is non-zero with probability K/M
        values = np.where(rng.random(count) < spec.k / spec.m, values, 0.0)
    return values


def build_measurement_codebooks(spec: TrainingSpec, rate_bits: int, rng: np.random.Generator) -> Codebook:
    """One codebook shared by every measurement entry."""
    if not spec.source.is_measurement:
        raise InvalidParameterError(f"{spec.source.value} is not a measurement-domain source")
    samples = measurement_samples(spec, spec.samples_for(rate_bits), rng)
    return lloyd_train(samples, rate_bits, spec.max_lloyd_iters, spec.rel_tol, spec.source.value)


def build_signal_codebooks(spec: TrainingSpec, rate_bits: int, rng: np.random.Generator) -> Codebook:
    """Codebook for signal-domain coefficients.

    ``signal_direct`` trains on the sparse mixture (zero with probability
    1 - K/M), ``signal_support`` on the non-zero distribution alone.
    """
    if spec.source.is_measurement:
        raise InvalidParameterError(f"{spec.source.value} is not a signal-domain source")
    samples = signal_samples(spec, spec.samples_for(rate_bits), rng)
    return lloyd_train(samples, rate_bits, spec.max_lloyd_iters, spec.rel_tol, spec.source.value)


@dataclass(frozen=True)
class CodebookBank:
    """All codebooks a decoder may need, keyed by rate in bits.

    ``measurement`` serves the measurement-domain schemes, ``direct`` and
    ``support`` the two signal-domain schemes.
    """

    measurement: dict = field(default_factory=dict)
    direct: dict = field(default_factory=dict)
    support: dict = field(default_factory=dict)

    def family(self, name: str) -> dict:
        return {"measurement": self.measurement, "direct": self.direct, "support": self.support}[name]

    def digest(self) -> bytes:
        """8-octet fingerprint binding a frame to these exact codebooks."""
        h = hashlib.sha256()
        for name in ("measurement", "direct", "support"):
            for rate in sorted(self.family(name)):
                h.update(f"{name}:{rate}\n".encode())
                h.update(self.family(name)[rate].to_text().encode())
        return h.digest()[:8]

    @classmethod
    def from_codebooks(cls, books) -> "CodebookBank":
        """Sort loose codebooks into families by their training mode."""
        bank = cls()
        for cb in books:
            if cb.mode == TrainingSource.SIGNAL_DIRECT.value:
                bank.direct[cb.rate_bits] = cb
            elif cb.mode == TrainingSource.SIGNAL_SUPPORT.value:
                bank.support[cb.rate_bits] = cb
            else:
                bank.measurement[cb.rate_bits] = cb
        return bank
