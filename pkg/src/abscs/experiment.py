"""Monte-Carlo NMSE sweeps over measurement rate and quantization rate."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .codebook import (
    CodebookBank,
    TrainingSource,
    TrainingSpec,
    build_measurement_codebooks,
    build_signal_codebooks,
)
from .model import (
    Dist,
    InvalidParameterError,
    as_dist,
    expected_energy,
    generate_sensing_matrix,
    generate_sparse_signal,
    measure,
    n_measurements,
    trial_rng,
)
from .quantizers import (
    FLAG_BITS,
    DEFAULT_JOINT_CAP,
    Scheme,
    SearchSpaceError,
    abs_objective,
    allocate_bits,
    decode_frame,
    encode_frame,
    frame_layout,
)
from .recon import CallCounter, ReconConfig, reconstruct

NMSE_FLOOR_DB = -200.0
CSV_COLUMNS = (
    "scheme", "m", "n", "k", "r_x", "alpha", "trials",
    "nmse_db", "mean_recon_calls", "mean_outer_iters", "wallclock_s",
)


def compute_nmse(errors_sq, k: int, dist, sample_energy=None) -> float:
    """NMSE in dB of per-trial squared errors.

    The denominator is the analytic ``E||X||^2`` (``k`` or ``k/3``) unless
    per-trial ``sample_energy`` values are given.  A zero numerator maps to
    :data:`NMSE_FLOOR_DB`.
    """
    errors = np.asarray(errors_sq, dtype=float)
    if errors.size == 0:
        raise InvalidParameterError("no errors to average")
    denom = expected_energy(k, dist) if sample_energy is None else float(np.mean(sample_energy))
    ratio = float(errors.mean()) / denom
    if ratio <= 0.0:
        return NMSE_FLOOR_DB
    return max(10.0 * math.log10(ratio), NMSE_FLOOR_DB)


@dataclass(frozen=True)
class ExperimentConfig:
    m: int
    k: int
    alphas: tuple[float, ...]
    rates_rx: tuple[float, ...]
    schemes: tuple[Scheme, ...] = (Scheme.NN, Scheme.ABS_SEQ, Scheme.ABS_NONSEQ)
    trials: int = 100
    master_seed: int = 0
    recon_cfg: ReconConfig | None = None
    gamma: float = 1e-6
    max_outer_iters: int = 20
    dist: Dist = Dist.GAUSSIAN_UNIT
    training_source: TrainingSource = TrainingSource.MEASUREMENT_EMPIRICAL
    training_samples: int = 100_000
    fixed_phi: bool = False
    threads: int = 1
    sample_normalization: bool = False
    joint_cap: int = DEFAULT_JOINT_CAP

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "rates_rx", tuple(float(r) for r in self.rates_rx))
        object.__setattr__(self, "schemes", tuple(Scheme.parse(s) for s in self.schemes))
        object.__setattr__(self, "dist", as_dist(self.dist))
        object.__setattr__(self, "training_source", TrainingSource(self.training_source))
        if self.recon_cfg is None:
            object.__setattr__(self, "recon_cfg", ReconConfig.omp(self.k))
        if self.trials < 1:
            raise InvalidParameterError("trials must be at least 1")
        if not 0 < self.k < self.m:
            raise InvalidParameterError("need 0 < k < m")
        if any(not 0 < a <= 1 for a in self.alphas):
            raise InvalidParameterError("measurement rates must lie in (0, 1]")
        if any(r <= 0 for r in self.rates_rx):
            raise InvalidParameterError("quantization rates must be positive")
        if not self.training_source.is_measurement:
            raise InvalidParameterError("training_source picks the measurement-domain mode")


@dataclass
class ResultRow:
    scheme: str
    m: int
    n: int
    k: int
    r_x: float
    alpha: float
    trials: int
    nmse_db: float
    mean_recon_calls: float
    mean_outer_iters: float
    wallclock_s: float
    feasible: bool = True
    note: str = ""


@dataclass
class CellResult:
    """Per-trial records of one (alpha, r_x) cell, keyed by scheme."""

    m: int
    n: int
    k: int
    r_x: float
    alpha: float
    total_bits: int
    errors: dict = field(default_factory=dict)
    objectives: dict = field(default_factory=dict)
    recon_calls: dict = field(default_factory=dict)
    outer_iters: dict = field(default_factory=dict)
    monotonic_violations: dict = field(default_factory=dict)
    wallclock: dict = field(default_factory=dict)
    energies: list = field(default_factory=list)
    infeasible: dict = field(default_factory=dict)


def total_bits_for(m: int, r_x: float) -> int:
    return int(math.floor(m * r_x + 0.5))


@lru_cache(maxsize=256)
def _trained(family: str, m: int, n: int, k: int, dist: Dist, rate: int, source: str,
             n_samples: int, seed: int):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, n, rate, len(family))))
    if family == "measurement":
        spec = TrainingSpec(source, m, k, n, dist, n_samples)
        return build_measurement_codebooks(spec, rate, rng)
    src = TrainingSource.SIGNAL_DIRECT if family == "direct" else TrainingSource.SIGNAL_SUPPORT
    return build_signal_codebooks(TrainingSpec(src, m, k, None, dist, n_samples), rate, rng)


def bank_for(cfg: ExperimentConfig, n: int, total_bits: int, schemes=None) -> CodebookBank:
    """Train (or fetch from cache) every codebook the cell's schemes need."""
    schemes = cfg.schemes if schemes is None else schemes
    need = {"measurement": set(), "direct": set(), "support": set()}

    def add(scheme, budget):
        if scheme.measurement_domain:
            need["measurement"] |= allocate_bits(budget, n).rates
        elif scheme is Scheme.DIRECT:
            need["direct"] |= {b for b in frame_layout(scheme, cfg.m, n, cfg.k, budget).allocation.rates if b}
        elif scheme is Scheme.SUPPORT_SET:
            need["support"] |= {b for b in frame_layout(scheme, cfg.m, n, cfg.k, budget).allocation.rates if b}

    for s in schemes:
        if s is Scheme.ADAPTIVE:
            for inner in (Scheme.NN, Scheme.DIRECT, Scheme.SUPPORT_SET):
                add(inner, total_bits - FLAG_BITS)
        else:
            add(s, total_bits)

    bank = CodebookBank()
    for family, rates in need.items():
        for rate in sorted(rates):
            bank.family(family)[rate] = _trained(
                family, cfg.m, n, cfg.k, cfg.dist, rate, cfg.training_source.value,
                cfg.training_samples, cfg.master_seed,
            )
    return bank


def _feasibility(cfg: ExperimentConfig, n: int, total_bits: int, scheme: Scheme) -> str:
    if n >= cfg.m:
        return f"n={n} not below m={cfg.m}"
    if cfg.recon_cfg.sparsity_k is not None and cfg.recon_cfg.kind.value == "omp" and n <= cfg.recon_cfg.sparsity_k:
        return f"n={n} not above k={cfg.recon_cfg.sparsity_k}"
    if scheme is Scheme.ADAPTIVE and total_bits < FLAG_BITS + 1:
        return "adaptive coding needs at least 3 bits"
    if scheme is Scheme.JOINT:
        size = 2**total_bits
        if size > cfg.joint_cap:
            return f"joint search space 2^{total_bits} exceeds cap {cfg.joint_cap}"
    return ""


def _phi_for(cfg: ExperimentConfig, n: int, rng):
    if cfg.fixed_phi:
        return generate_sensing_matrix(n, cfg.m, trial_rng(cfg.master_seed, n, stream=2))
    return generate_sensing_matrix(n, cfg.m, rng)


def run_cell(cfg: ExperimentConfig, alpha: float, r_x: float, schemes=None) -> CellResult:
    """Run every trial of one (alpha, r_x) cell and keep per-trial records.

    Trial ``t`` draws its source and sensing matrix from a stream derived
    from ``(master_seed, t)`` only, so all schemes see the same data and the
    result does not depend on ``cfg.threads``.
    """
    schemes = cfg.schemes if schemes is None else tuple(Scheme.parse(s) for s in schemes)
    n = n_measurements(alpha, cfg.m)
    total_bits = total_bits_for(cfg.m, r_x)
    cell = CellResult(cfg.m, n, cfg.k, r_x, alpha, total_bits)
    runnable = []
    for s in schemes:
        why = _feasibility(cfg, n, total_bits, s)
        if why:
            cell.infeasible[s] = why
        else:
            runnable.append(s)
            for d in (cell.errors, cell.objectives, cell.recon_calls, cell.outer_iters,
                      cell.monotonic_violations):
                d[s] = []
            cell.wallclock[s] = 0.0
    if not runnable:
        return cell
    bank = bank_for(cfg, n, total_bits, runnable)

    def one_trial(t: int):
        rng = trial_rng(cfg.master_seed, t)
        x = generate_sparse_signal(cfg.m, cfg.k, cfg.dist, rng)
        phi = _phi_for(cfg, n, rng)
        y = measure(phi, x)
        x_bar = reconstruct(cfg.recon_cfg, phi, y).estimate
        out = {}
        for s in runnable:
            counter = CallCounter()
            t0 = time.perf_counter()
            frame = encode_frame(s, y, phi, cfg.recon_cfg, bank, total_bits, cfg.k, cfg.gamma,
                                 cfg.max_outer_iters, cfg.joint_cap, counter)
            x_hat = decode_frame(frame, bank, phi, cfg.recon_cfg)
            elapsed = time.perf_counter() - t0
            err = x.coefficients - x_hat
            st = frame.stats
            out[s] = (
                float(err @ err),
                abs_objective(x_hat, x_bar),
                counter.count,
                st.outer_iterations if st else 0,
                st.monotonic_violations if st else 0,
                elapsed,
            )
        return float(x.coefficients @ x.coefficients), out

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(one_trial, range(cfg.trials)))
    else:
        results = [one_trial(t) for t in range(cfg.trials)]

    for energy, out in results:
        cell.energies.append(energy)
        for s, (e, j, calls, iters, viol, el) in out.items():
            cell.errors[s].append(e)
            cell.objectives[s].append(j)
            cell.recon_calls[s].append(calls)
            cell.outer_iters[s].append(iters)
            cell.monotonic_violations[s].append(viol)
            cell.wallclock[s] += el
    return cell


def cell_rows(cfg: ExperimentConfig, cell: CellResult, schemes=None) -> list[ResultRow]:
    schemes = cfg.schemes if schemes is None else schemes
    rows = []
    for s in schemes:
        s = Scheme.parse(s)
        base = dict(scheme=s.label, m=cell.m, n=cell.n, k=cell.k, r_x=cell.r_x, alpha=cell.alpha,
                    trials=cfg.trials)
        if s in cell.infeasible:
            rows.append(ResultRow(**base, nmse_db=math.nan, mean_recon_calls=0.0, mean_outer_iters=0.0,
                                  wallclock_s=0.0, feasible=False, note=cell.infeasible[s]))
            continue
        energy = cell.energies if cfg.sample_normalization else None
        rows.append(ResultRow(
            **base,
            nmse_db=compute_nmse(cell.errors[s], cfg.k, cfg.dist, energy),
            mean_recon_calls=float(np.mean(cell.recon_calls[s])),
            mean_outer_iters=float(np.mean(cell.outer_iters[s])),
            wallclock_s=cell.wallclock[s],
        ))
    return rows


def run_sweep(cfg: ExperimentConfig, progress=None) -> list[ResultRow]:
    """One row per (alpha, r_x, scheme), in that nesting order."""
    rows = []
    for alpha in cfg.alphas:
        for r_x in cfg.rates_rx:
            cell = run_cell(cfg, alpha, r_x)
            new = cell_rows(cfg, cell)
            rows.extend(new)
            if progress is not None:
                for row in new:
                    progress(row)
    return rows


def run_benchmark_joint(cfg: ExperimentConfig, progress=None) -> list[ResultRow]:
    """Sweep that always includes the exhaustive joint encoder.

    Refuses up front with :class:`SearchSpaceError` if any cell's joint
    search would exceed ``cfg.joint_cap``.
    """
    for r_x in cfg.rates_rx:
        size = 2 ** total_bits_for(cfg.m, r_x)
        if size > cfg.joint_cap:
            raise SearchSpaceError(size, cfg.joint_cap)
    schemes = tuple(dict.fromkeys((Scheme.JOINT,) + cfg.schemes))
    bench = ExperimentConfig(**{f.name: getattr(cfg, f.name) for f in fields(cfg)} | {"schemes": schemes})
    return run_sweep(bench, progress)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, path) -> None:
    """Write rows with the fixed column set; floats keep full precision."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in rows:
                w.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc


def read_csv(path) -> list[ResultRow]:
    ints = {"m", "n", "k", "trials"}
    out = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            vals = {c: (rec[c] if c == "scheme" else int(rec[c]) if c in ints else float(rec[c]))
                    for c in CSV_COLUMNS}
            out.append(ResultRow(**vals, feasible=not math.isnan(vals["nmse_db"])))
    return out


def write_dat(rows, path) -> None:
    """Whitespace-separated copy of the CSV for gnuplot."""
    with Path(path).open("w") as fh:
        fh.write("# " + " ".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(getattr(row, c)) for c in CSV_COLUMNS) + "\n")


def best_alpha(rows) -> dict:
    """Measurement rate with the lowest NMSE, per (scheme, r_x)."""
    best = {}
    for row in rows:
        if not row.feasible or math.isnan(row.nmse_db):
            continue
        key = (row.scheme, row.r_x)
        if key not in best or row.nmse_db < best[key].nmse_db:
            best[key] = row
    return best
