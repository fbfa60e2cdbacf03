"""Encoders and the decoder for quantized compressed-sensing frames.

Measurement-domain schemes pick one codebook index per measurement entry:

* ``nn`` codes every entry to its nearest codepoint;
* ``abs_seq`` and ``abs_nonseq`` search indices in a closed loop, scoring
  each candidate by reconstructing from the candidate quantized vector and
  comparing against the encoder's own reconstruction ``x_bar`` from the
  unquantized measurements;
* ``joint`` searches all index tuples exhaustively (benchmark only).

Signal-domain schemes quantize ``x_bar`` itself (``direct``, ``support_set``),
and ``adaptive`` picks the best of four schemes per frame behind two flag
bits.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook, CodebookBank
from .model import InvalidParameterError, SensingMatrix
from .recon import CallCounter, ReconConfig, Synthesizer, reconstruct

#: cap on bits per signal-domain coefficient; larger budgets are padded
MAX_SIGNAL_BITS = 10
DEFAULT_JOINT_CAP = 2**20
FLAG_BITS = 2


class Scheme(str, enum.Enum):
    NN = "nn"
    ABS_SEQ = "abs_seq"
    ABS_NONSEQ = "abs_nonseq"
    JOINT = "joint"
    DIRECT = "direct"
    SUPPORT_SET = "support_set"
    ADAPTIVE = "adaptive"

    @classmethod
    def parse(cls, name) -> "Scheme":
        if isinstance(name, Scheme):
            return name
        try:
            return cls(str(name).strip().lower().replace("-", "_"))
        except ValueError:
            raise InvalidParameterError(f"unknown scheme {name!r}") from None

    @property
    def label(self) -> str:
        return self.value.replace("_", "-")

    @property
    def measurement_domain(self) -> bool:
        return self in (Scheme.NN, Scheme.ABS_SEQ, Scheme.ABS_NONSEQ, Scheme.JOINT)


#: flag value -> scheme, in the order the adaptive coder signals them
ADAPTIVE_CANDIDATES = (Scheme.NN, Scheme.ABS_NONSEQ, Scheme.DIRECT, Scheme.SUPPORT_SET)


class CorruptFrameError(ValueError):
    """A frame references indices or schemes its codebooks cannot decode."""


class SearchSpaceError(RuntimeError):
    """The exhaustive joint search would exceed its configured cap."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"joint search space has {size} index tuples, cap is {cap}")
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class BitAllocation:
    per_entry_bits: tuple[int, ...]
    total_bits: int

    def __post_init__(self):
        bits = tuple(int(b) for b in self.per_entry_bits)
        object.__setattr__(self, "per_entry_bits", bits)
        if sum(bits) != self.total_bits:
            raise InvalidParameterError("per-entry bits must add up to total_bits")
        if bits and (min(bits) < 0 or max(bits) - min(bits) > 1):
            raise InvalidParameterError("per-entry bits must be non-negative and differ by at most 1")
        if any(a < b for a, b in zip(bits, bits[1:])):
            raise InvalidParameterError("larger allocations must come first")

    def __len__(self):
        return len(self.per_entry_bits)

    @property
    def uniform(self) -> bool:
        return len(set(self.per_entry_bits)) <= 1

    @property
    def rates(self) -> set[int]:
        return set(self.per_entry_bits)


def allocate_bits(total_bits: int, n_channels: int) -> BitAllocation:
    """Spread ``total_bits`` over channels: floor share each, one extra bit to the first channels."""
    if total_bits < 0 or n_channels < 1:
        raise InvalidParameterError("need total_bits >= 0 and at least one channel")
    base, extra = divmod(int(total_bits), int(n_channels))
    return BitAllocation(tuple([base + 1] * extra + [base] * (n_channels - extra)), int(total_bits))


def abs_objective(x_hat, x_bar) -> float:
    """``||x_hat||^2 - 2 x_bar . x_hat``, i.e. ``||x_bar - x_hat||^2`` minus a constant."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_bar = np.asarray(x_bar, dtype=float)
    if x_hat.shape != x_bar.shape:
        raise InvalidParameterError("objective arguments must have equal length")
    return float(x_hat @ x_hat - 2.0 * (x_bar @ x_hat))


@dataclass
class EncodeStats:
    """Diagnostics of one encoder run (not transmitted).

    ``objective_trace`` starts with the objective of the initial state and
    records the value after every accepted index update;
    ``iteration_objectives`` holds the value at the end of each outer
    iteration.  ``recon_calls`` counts only candidate syntheses.
    """

    outer_iterations: int = 0
    recon_calls: int = 0
    objective_trace: list = field(default_factory=list)
    iteration_objectives: list = field(default_factory=list)
    monotonic_violations: int = 0
    x_bar: np.ndarray | None = None
    x_hat: np.ndarray | None = None
    candidate_distances: tuple = ()

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else math.nan


@dataclass(frozen=True)
class EncodedFrame:
    """One quantized frame.

    ``indices`` has one entry per channel of ``allocation`` (zero-bit channels
    carry index 0).  For adaptive frames, ``flag_bits`` selects the scheme in
    :data:`ADAPTIVE_CANDIDATES` and the remaining fields describe that
    scheme's payload.  ``position_bits`` is the width of each stored support
    position.
    """

    scheme: Scheme
    indices: tuple[int, ...]
    allocation: BitAllocation
    total_bits: int
    support_positions: tuple[int, ...] | None = None
    flag_bits: int | None = None
    position_bits: int = 0
    stats: EncodeStats | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if self.support_positions is not None:
            object.__setattr__(self, "support_positions", tuple(int(p) for p in self.support_positions))
        if len(self.indices) != len(self.allocation):
            raise InvalidParameterError("one index per allocated channel")
        if (self.scheme is Scheme.ADAPTIVE) != (self.flag_bits is not None):
            raise InvalidParameterError("flag bits belong to adaptive frames only")
        if self.flag_bits is not None and not 0 <= self.flag_bits < len(ADAPTIVE_CANDIDATES):
            raise InvalidParameterError("flag bits out of range")
        if (self.payload_scheme is Scheme.SUPPORT_SET) != (self.support_positions is not None):
            raise InvalidParameterError("support positions belong to support-set payloads only")
        if self.payload_bits > self.total_bits:
            raise InvalidParameterError("payload exceeds the frame budget")

    @property
    def payload_scheme(self) -> Scheme:
        """Scheme that produced the payload (the flagged one for adaptive frames)."""
        if self.scheme is Scheme.ADAPTIVE:
            return ADAPTIVE_CANDIDATES[self.flag_bits]
        return self.scheme

    @property
    def payload_bits(self) -> int:
        """Bits carrying information; the rest of ``total_bits`` is zero padding."""
        bits = sum(self.allocation.per_entry_bits)
        if self.support_positions is not None:
            bits += len(self.indices) * self.position_bits
        if self.flag_bits is not None:
            bits += FLAG_BITS
        return bits

    @property
    def padding_bits(self) -> int:
        return self.total_bits - self.payload_bits


# ---------------------------------------------------------------------------
# layouts


def position_width(m: int) -> int:
    return max(1, math.ceil(math.log2(m)))


def support_set_minimum(m: int, k: int) -> float:
    """Smallest budget at which every retained coefficient can get a bit."""
    return k * math.log2(m) + k


@dataclass(frozen=True)
class Layout:
    allocation: BitAllocation
    position_bits: int = 0


def frame_layout(scheme, m: int, n: int, k: int, total_bits: int, flag: int | None = None) -> Layout:
    """Channel layout implied by a frame header.

    Deterministic in its arguments, so the decoder can rebuild it.
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.ADAPTIVE:
        if total_bits < FLAG_BITS + 1:
            raise InvalidParameterError("adaptive coding needs at least 3 bits")
        if flag is None:
            raise InvalidParameterError("adaptive layout needs the flag value")
        return frame_layout(ADAPTIVE_CANDIDATES[flag], m, n, k, total_bits - FLAG_BITS)
    if scheme.measurement_domain:
        return Layout(allocate_bits(total_bits, n))
    if scheme is Scheme.DIRECT:
        return Layout(allocate_bits(min(total_bits, MAX_SIGNAL_BITS * m), m))
    # support set
    width = position_width(m)
    if total_bits >= support_set_minimum(m, k):
        coeff_bits = total_bits - k * width
        return Layout(allocate_bits(min(coeff_bits, MAX_SIGNAL_BITS * k), k), width)
    slots = min(k, total_bits // (width + 1))
    if slots == 0:
        return Layout(BitAllocation((), 0), width)
    return Layout(allocate_bits(slots, slots), width)


# ---------------------------------------------------------------------------
# helpers


def _entry_books(codebooks, alloc: BitAllocation) -> list[Codebook]:
    if isinstance(codebooks, CodebookBank):
        codebooks = codebooks.measurement
    if isinstance(codebooks, Codebook):
        books = [codebooks] * len(alloc)
    elif isinstance(codebooks, Mapping):
        try:
            books = [codebooks[b] for b in alloc.per_entry_bits]
        except KeyError as exc:
            raise InvalidParameterError(f"no {exc.args[0]}-bit codebook supplied") from None
    elif isinstance(codebooks, Sequence):
        books = list(codebooks)
    else:
        raise InvalidParameterError("codebooks must be a Codebook, a rate mapping or a per-entry list")
    if len(books) != len(alloc):
        raise InvalidParameterError("one codebook per channel")
    for b, cb in zip(alloc.per_entry_bits, books):
        if cb.rate_bits != b:
            raise InvalidParameterError(f"channel needs a {b}-bit codebook, got {cb.rate_bits}-bit")
    return books


def _check_measurements(y, phi: SensingMatrix, alloc: BitAllocation) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != phi.n_rows or len(alloc) != y.size:
        raise InvalidParameterError("measurements, sensing matrix and allocation disagree in size")
    return y


def encode_nearest_neighbor(y, codebooks, alloc: BitAllocation) -> EncodedFrame:
    """Code each entry to its nearest codepoint (smaller index on ties)."""
    y = np.asarray(y, dtype=float)
    if len(alloc) != y.size:
        raise InvalidParameterError("allocation must cover every measurement")
    books = _entry_books(codebooks, alloc)
    idx = [int(cb.nearest(v)) for cb, v in zip(books, y)]
    return EncodedFrame(Scheme.NN, tuple(idx), alloc, alloc.total_bits)


class _AbSSearch:
    """Shared state of the closed-loop encoders."""

    def __init__(self, y, codebooks, alloc, recon_cfg, phi, init, rng, counter):
        self.y = _check_measurements(y, phi, alloc)
        self.alloc = alloc
        self.books = _entry_books(codebooks, alloc)
        self.counter = counter if counter is not None else CallCounter()
        self.start = self.counter.count
        self.synth = Synthesizer(recon_cfg, phi, self.counter)
        free = Synthesizer(recon_cfg, phi)
        self.x_bar = free(self.y)
        if init == "nearest":
            self.idx = [int(cb.nearest(v)) for cb, v in zip(self.books, self.y)]
        elif init == "random":
            rng = rng if rng is not None else np.random.default_rng()
            self.idx = [int(rng.integers(len(cb))) for cb in self.books]
        else:
            raise InvalidParameterError(f"unknown initialisation {init!r}")
        self.z = np.array([cb.codepoints[i] for cb, i in zip(self.books, self.idx)])
        self.x_hat = free(self.z)
        self.objective = abs_objective(self.x_hat, self.x_bar)
        self.stats = EncodeStats(x_bar=self.x_bar)
        self.stats.objective_trace.append(self.objective)
        # entries with a single codepoint leave nothing to search
        self.searchable = [n for n, cb in enumerate(self.books) if len(cb) > 1]

    def try_entry(self, n: int):
        """Evaluate every codepoint of entry ``n``; returns (objective, index, x_hat)."""
        keep = self.z[n]
        best = (math.inf, -1, None)
        for i, c in enumerate(self.books[n].codepoints):
            self.z[n] = c
            x_hat = self.synth(self.z)
            j = abs_objective(x_hat, self.x_bar)
            if j < best[0]:
                best = (j, i, x_hat)
        self.z[n] = keep
        return best

    def accept(self, n: int, j: float, i: int, x_hat):
        if j > self.objective:
            self.stats.monotonic_violations += 1
        self.idx[n] = i
        self.z[n] = self.books[n].codepoints[i]
        self.objective = j
        self.x_hat = x_hat
        self.stats.objective_trace.append(j)

    def finish(self, scheme: Scheme) -> EncodedFrame:
        self.stats.recon_calls = self.counter.count - self.start
        self.stats.x_hat = self.x_hat
        return EncodedFrame(scheme, tuple(self.idx), self.alloc, self.alloc.total_bits, stats=self.stats)


def _run_outer(search: _AbSSearch, sweep, gamma: float, max_outer_iters: int):
    if not gamma > 0:
        raise InvalidParameterError("gamma must be positive")
    if max_outer_iters < 1:
        raise InvalidParameterError("max_outer_iters must be at least 1")
    previous = search.objective
    for _ in range(max_outer_iters):
        sweep()
        search.stats.outer_iterations += 1
        search.stats.iteration_objectives.append(search.objective)
        if abs(search.objective - previous) < gamma:
            break
        previous = search.objective


def encode_abs_sequential(
    y,
    codebooks,
    alloc: BitAllocation,
    recon_cfg: ReconConfig,
    phi: SensingMatrix,
    gamma: float = 1e-6,
    max_outer_iters: int = 20,
    init: str = "nearest",
    rng: np.random.Generator | None = None,
    counter: CallCounter | None = None,
) -> EncodedFrame:
    """Sequential analysis-by-synthesis encoding.

    Each outer iteration visits the entries in order; entry ``n`` tries all
    its codepoints with the others held fixed and keeps the one whose
    reconstruction minimises :func:`abs_objective` against ``x_bar``.
    Outer iterations stop once the objective changes by less than
    ``gamma`` or after ``max_outer_iters``.
    """
    search = _AbSSearch(y, codebooks, alloc, recon_cfg, phi, init, rng, counter)

    def sweep():
        for n in search.searchable:
            j, i, x_hat = search.try_entry(n)
            search.accept(n, j, i, x_hat)

    _run_outer(search, sweep, gamma, max_outer_iters)
    return search.finish(Scheme.ABS_SEQ)


def encode_abs_nonsequential(
    y,
    codebooks,
    alloc: BitAllocation,
    recon_cfg: ReconConfig,
    phi: SensingMatrix,
    gamma: float = 1e-6,
    max_outer_iters: int = 20,
    init: str = "nearest",
    rng: np.random.Generator | None = None,
    counter: CallCounter | None = None,
) -> EncodedFrame:
    """Non-sequential analysis-by-synthesis encoding.

    Within an outer iteration every still-unlocked entry is scored against
    every codepoint; the single best (entry, codepoint) pair is applied and
    that entry is locked.  This repeats until all entries are locked, so one
    outer iteration costs ``N(N+1)/2 * 2**r`` reconstructions at a uniform
    ``r`` bits per entry.
    """
    search = _AbSSearch(y, codebooks, alloc, recon_cfg, phi, init, rng, counter)

    def sweep():
        unlocked = list(search.searchable)
        while unlocked:
            best = (math.inf, -1, -1, None)
            for n in unlocked:
                j, i, x_hat = search.try_entry(n)
                if j < best[0]:
                    best = (j, n, i, x_hat)
            j, n, i, x_hat = best
            search.accept(n, j, i, x_hat)
            unlocked.remove(n)

    _run_outer(search, sweep, gamma, max_outer_iters)
    return search.finish(Scheme.ABS_NONSEQ)


def encode_joint_exhaustive(
    y,
    codebooks,
    alloc: BitAllocation,
    recon_cfg: ReconConfig,
    phi: SensingMatrix,
    cap: int = DEFAULT_JOINT_CAP,
    counter: CallCounter | None = None,
) -> EncodedFrame:
    """Globally optimal indices by enumerating every index tuple.

    Ties keep the lexicographically smallest tuple.  Raises
    :class:`SearchSpaceError` when the tuple count exceeds ``cap``.
    """
    y = _check_measurements(y, phi, alloc)
    books = _entry_books(codebooks, alloc)
    size = math.prod(len(cb) for cb in books)
    if size > cap:
        raise SearchSpaceError(size, cap)
    counter = counter if counter is not None else CallCounter()
    start = counter.count
    x_bar = Synthesizer(recon_cfg, phi)(y)
    synth = Synthesizer(recon_cfg, phi, counter)

    best = (math.inf, None, None)
    z = np.empty(len(books))
    for combo in itertools.product(*(range(len(cb)) for cb in books)):
        for n, (cb, i) in enumerate(zip(books, combo)):
            z[n] = cb.codepoints[i]
        x_hat = synth(z)
        j = abs_objective(x_hat, x_bar)
        if j < best[0]:
            best = (j, combo, x_hat)
    stats = EncodeStats(
        outer_iterations=1,
        recon_calls=counter.count - start,
        objective_trace=[best[0]],
        iteration_objectives=[best[0]],
        x_bar=x_bar,
        x_hat=best[2],
    )
    return EncodedFrame(Scheme.JOINT, best[1], alloc, alloc.total_bits, stats=stats)


# ---------------------------------------------------------------------------
# signal domain


def _signal_books(codebooks, alloc: BitAllocation, family: str) -> dict:
    if isinstance(codebooks, CodebookBank):
        codebooks = codebooks.family(family)
    elif isinstance(codebooks, Codebook):
        codebooks = {codebooks.rate_bits: codebooks}
    missing = {b for b in alloc.rates if b > 0} - set(codebooks)
    if missing:
        raise InvalidParameterError(f"no {family} codebook for rates {sorted(missing)}")
    return codebooks


def encode_direct(x_bar, codebooks, total_bits: int) -> EncodedFrame:
    """Quantize every coefficient of ``x_bar`` with the shared allocation rule.

    Below one bit per coefficient only the first ``total_bits`` coefficients
    get a bit; the rest are decoded as zero.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    layout = frame_layout(Scheme.DIRECT, x_bar.size, 1, 1, total_bits)
    books = _signal_books(codebooks, layout.allocation, "direct")
    idx = [int(books[b].nearest(v)) if b > 0 else 0 for b, v in zip(layout.allocation.per_entry_bits, x_bar)]
    return EncodedFrame(Scheme.DIRECT, tuple(idx), layout.allocation, total_bits)


def encode_support_set(x_bar, recon_support, codebooks, total_bits: int, m: int, k: int) -> EncodedFrame:
    """Code the support positions of ``x_bar`` losslessly, then its values.

    Positions are stored in increasing order at ``ceil(log2 m)`` bits each;
    unused slots repeat 0, which the decoder reads as "no more positions".
    When the budget is below ``k log2 m + k`` only as many coefficients as
    fit at one bit each (position included) are kept, largest magnitude
    first.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    if x_bar.size != m:
        raise InvalidParameterError("x_bar length must equal m")
    support = sorted({int(s) for s in recon_support})
    if len(support) > k:
        raise InvalidParameterError("reconstructed support larger than k")
    layout = frame_layout(Scheme.SUPPORT_SET, m, 1, k, total_bits)
    slots = len(layout.allocation)
    if len(support) > slots:
        order = sorted(support, key=lambda s: (-abs(x_bar[s]), s))
        support = sorted(order[:slots])
    if not support and slots:
        # nothing reconstructed: one slot at position 0, whose value is 0
        support = [0]
    books = _signal_books(codebooks, layout.allocation, "support")
    idx = []
    for j, b in enumerate(layout.allocation.per_entry_bits):
        if j < len(support) and b > 0:
            idx.append(int(books[b].nearest(x_bar[support[j]])))
        else:
            idx.append(0)
    return EncodedFrame(
        Scheme.SUPPORT_SET,
        tuple(idx),
        layout.allocation,
        total_bits,
        support_positions=tuple(support),
        position_bits=layout.position_bits,
    )


def encode_adaptive(
    y,
    phi: SensingMatrix,
    recon_cfg: ReconConfig,
    bank: CodebookBank,
    total_bits: int,
    k: int,
    gamma: float = 1e-6,
    max_outer_iters: int = 20,
    counter: CallCounter | None = None,
) -> EncodedFrame:
    """Pick among nearest-neighbour, non-sequential AbS, direct and support-set coding.

    Every candidate is encoded at ``total_bits - 2`` and decoded; the one
    whose decoded signal is closest to ``x_bar`` wins (lowest flag on ties).
    """
    if total_bits < FLAG_BITS + 1:
        raise InvalidParameterError("adaptive coding needs at least 3 bits")
    y = np.asarray(y, dtype=float)
    m, n = phi.n_cols, phi.n_rows
    budget = total_bits - FLAG_BITS
    x_bar_rec = reconstruct(recon_cfg, phi, y)
    x_bar = x_bar_rec.estimate
    alloc = allocate_bits(budget, n)

    frames = [
        encode_nearest_neighbor(y, bank.measurement, alloc),
        encode_abs_nonsequential(y, bank.measurement, alloc, recon_cfg, phi, gamma, max_outer_iters,
                                 counter=counter),
        encode_direct(x_bar, bank, budget),
        encode_support_set(x_bar, x_bar_rec.support_estimate, bank, budget, m, k),
    ]
    dists = []
    for f in frames:
        x_hat = decode_frame(f, bank, phi, recon_cfg)
        d = x_hat - x_bar
        dists.append(float(d @ d))
    flag = int(np.argmin(dists))
    win = frames[flag]
    stats = EncodeStats(
        outer_iterations=frames[1].stats.outer_iterations,
        recon_calls=frames[1].stats.recon_calls,
        x_bar=x_bar,
        candidate_distances=tuple(dists),
    )
    return EncodedFrame(
        Scheme.ADAPTIVE,
        win.indices,
        win.allocation,
        total_bits,
        support_positions=win.support_positions,
        flag_bits=flag,
        position_bits=win.position_bits,
        stats=stats,
    )


# ---------------------------------------------------------------------------
# decoding


def _lookup(book: Codebook, i: int) -> float:
    if not 0 <= i < len(book):
        raise CorruptFrameError(f"index {i} outside a {book.rate_bits}-bit codebook")
    return float(book.codepoints[i])


def dequantize_measurements(frame: EncodedFrame, codebooks) -> np.ndarray:
    """Codepoint vector ``z`` carried by a measurement-domain frame."""
    try:
        books = _entry_books(codebooks, frame.allocation)
    except InvalidParameterError as exc:
        raise CorruptFrameError(str(exc)) from None
    return np.array([_lookup(cb, i) for cb, i in zip(books, frame.indices)])


def decode_frame(
    frame: EncodedFrame,
    codebooks,
    phi: SensingMatrix,
    recon_cfg: ReconConfig,
    m: int | None = None,
) -> np.ndarray:
    """Reconstruct the signal estimate carried by ``frame``."""
    m = phi.n_cols if m is None else m
    scheme = frame.payload_scheme
    bank = codebooks if isinstance(codebooks, CodebookBank) else None
    for b, i in zip(frame.allocation.per_entry_bits, frame.indices):
        if not 0 <= i < 2**b:
            raise CorruptFrameError(f"index {i} does not fit in {b} bits")

    if scheme.measurement_domain:
        z = dequantize_measurements(frame, bank.measurement if bank else codebooks)
        return reconstruct(recon_cfg, phi, z).estimate

    family = "direct" if scheme is Scheme.DIRECT else "support"
    books = bank.family(family) if bank else codebooks
    if isinstance(books, Codebook):
        books = {books.rate_bits: books}
    x_hat = np.zeros(m)
    if scheme is Scheme.DIRECT:
        if len(frame.indices) != m:
            raise CorruptFrameError("direct frame must carry one channel per coefficient")
        for pos, (b, i) in enumerate(zip(frame.allocation.per_entry_bits, frame.indices)):
            if b > 0:
                x_hat[pos] = _lookup(_family_book(books, b, family), i)
        return x_hat

    positions = frame.support_positions or ()
    for j, pos in enumerate(positions):
        if not 0 <= pos < m:
            raise CorruptFrameError(f"support position {pos} outside [0, {m})")
        b = frame.allocation.per_entry_bits[j]
        if b > 0:
            x_hat[pos] = _lookup(_family_book(books, b, family), frame.indices[j])
    return x_hat


def _family_book(books, b: int, family: str) -> Codebook:
    try:
        return books[b]
    except KeyError:
        raise CorruptFrameError(f"no {b}-bit {family} codebook available") from None


def encode_frame(
    scheme,
    y,
    phi: SensingMatrix,
    recon_cfg: ReconConfig,
    bank: CodebookBank,
    total_bits: int,
    k: int,
    gamma: float = 1e-6,
    max_outer_iters: int = 20,
    joint_cap: int = DEFAULT_JOINT_CAP,
    counter: CallCounter | None = None,
) -> EncodedFrame:
    """Encode measurements ``y`` with any scheme at a total budget of ``total_bits``."""
    scheme = Scheme.parse(scheme)
    if scheme.measurement_domain:
        alloc = allocate_bits(total_bits, phi.n_rows)
        if scheme is Scheme.NN:
            return encode_nearest_neighbor(y, bank.measurement, alloc)
        if scheme is Scheme.ABS_SEQ:
            return encode_abs_sequential(y, bank.measurement, alloc, recon_cfg, phi, gamma,
                                         max_outer_iters, counter=counter)
        if scheme is Scheme.ABS_NONSEQ:
            return encode_abs_nonsequential(y, bank.measurement, alloc, recon_cfg, phi, gamma,
                                            max_outer_iters, counter=counter)
        return encode_joint_exhaustive(y, bank.measurement, alloc, recon_cfg, phi, joint_cap, counter)
    if scheme is Scheme.ADAPTIVE:
        return encode_adaptive(y, phi, recon_cfg, bank, total_bits, k, gamma, max_outer_iters, counter)
    rec = reconstruct(recon_cfg, phi, y)
    if scheme is Scheme.DIRECT:
        return encode_direct(rec.estimate, bank, total_bits)
    return encode_support_set(rec.estimate, rec.support_estimate, bank, total_bits, phi.n_cols, k)
