"""Command-line front end: ``abscs <subcommand> ...``.

Exit statuses: 0 success, 2 usage error, 3 data mismatch (codebooks, vector
lengths, corrupt frames), 4 refused joint search.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bitstream as bs
from .codebook import (
    Codebook,
    CodebookBank,
    CodebookFormatError,
    TrainingSource,
    TrainingSpec,
    build_measurement_codebooks,
    build_signal_codebooks,
)
from .experiment import (
    ExperimentConfig,
    best_alpha,
    run_benchmark_joint,
    run_sweep,
    total_bits_for,
    write_csv,
    write_dat,
)
from .model import (
    Dist,
    InvalidParameterError,
    as_dist,
    SensingMatrix,
    generate_sensing_matrix,
    measure,
    n_measurements,
)
from .quantizers import (
    DEFAULT_JOINT_CAP,
    CorruptFrameError,
    Scheme,
    SearchSpaceError,
    decode_frame,
    encode_frame,
)
from .recon import CallCounter, ReconConfig

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_REFUSED = 0, 2, 3, 4

MODES = {
    "gaussian": TrainingSource.MEASUREMENT_GAUSSIAN,
    "empirical": TrainingSource.MEASUREMENT_EMPIRICAL,
    "direct": TrainingSource.SIGNAL_DIRECT,
    "support": TrainingSource.SIGNAL_SUPPORT,
}
MODES.update({s.value: s for s in TrainingSource})

# full-scale defaults filled in by --full
FULL_DEFAULTS = dict(m=512, k=35, trials=1000, alphas="0.1:0.05:0.5", rates="0.5,0.75")
QUICK_DEFAULTS = dict(m=40, k=3, trials=200, alphas="0.15:0.05:0.45", rates="0.5")


class UsageError(Exception):
    pass


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:step:end`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        try:
            start, step, end = (float(p) for p in text.split(":"))
        except ValueError:
            raise UsageError(f"bad grid {text!r}; expected start:step:end") from None
        if step <= 0 or end < start:
            raise UsageError(f"bad grid {text!r}")
        count = int(np.floor((end - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"bad list {text!r}") from None


def read_vector(path) -> np.ndarray:
    try:
        lines = Path(path).read_text().split()
        return np.array([float(v) for v in lines])
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def write_vector(path, v) -> None:
    Path(path).write_text("".join(f"{float(x)!r}\n" for x in v))


def load_bank(paths) -> CodebookBank:
    """Codebook files (or directories of ``*.cb`` files) sorted into a bank."""
    books = []
    for p in paths:
        p = Path(p)
        files = sorted(p.glob("*.cb")) if p.is_dir() else [p]
        for f in files:
            try:
                books.append(Codebook.load(f))
            except OSError as exc:
                raise UsageError(f"cannot read codebook {f}: {exc.strerror}") from None
    if not books:
        raise UsageError("no codebooks given")
    return CodebookBank.from_codebooks(books)


def phi_from_seed(seed: int, n: int, m: int) -> SensingMatrix:
    return generate_sensing_matrix(n, m, np.random.default_rng(seed))


def recon_from(args, k: int) -> ReconConfig:
    if args.recon == "lasso":
        return ReconConfig.lasso(args.lasso_mu)
    return ReconConfig.omp(k)


def threads_from(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("ABSCS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"ABSCS_THREADS must be an integer, got {env!r}") from None
    return 1


# ---------------------------------------------------------------------------
# subcommands


def cmd_train_codebook(args) -> int:
    source = MODES[args.mode]
    dist = as_dist(args.dist)
    if source.is_measurement and args.n is None:
        raise UsageError("--n is required for measurement-domain modes")
    spec = TrainingSpec(source, args.m, args.k, args.n, dist, args.samples)
    rng = np.random.default_rng(args.seed)
    build = build_measurement_codebooks if source.is_measurement else build_signal_codebooks
    cb = build(spec, args.rate_bits, rng)
    cb.save(args.out)
    print(f"wrote {len(cb)} codepoints to {args.out}; final distortion {cb.distortions[-1]:.6g} "
          f"after {len(cb.distortions) - 1} Lloyd iterations")
    return EXIT_OK


def cmd_encode(args) -> int:
    x = read_vector(args.input)
    m = x.size
    if args.m is not None and args.m != m:
        print(f"input has {m} values, expected {args.m}", file=sys.stderr)
        return EXIT_MISMATCH
    scheme = Scheme.parse(args.scheme)
    n = n_measurements(args.alpha, m)
    total = total_bits_for(m, args.rate)
    bank = load_bank(args.codebook)
    phi = phi_from_seed(args.phi_seed, n, m)
    rc = recon_from(args, args.k)
    y = measure(phi, x)
    counter = CallCounter()
    try:
        frame = encode_frame(scheme, y, phi, rc, bank, total, args.k, args.gamma,
                             args.max_outer_iters, args.joint_cap, counter)
    except InvalidParameterError as exc:
        # missing codebook rates and similar
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    header = bs.header_for(frame, m, n, args.k, bank)
    bs.write_frame(args.out, frame, header)
    st = frame.stats
    print(f"scheme={scheme.label} m={m} n={n} k={args.k} total_bits={total} "
          f"outer_iterations={st.outer_iterations if st else 0} recon_calls={counter.count}",
          file=sys.stderr)
    return EXIT_OK


def cmd_decode(args) -> int:
    bank = load_bank(args.codebook)
    try:
        header, frame = bs.read_frame(args.input, bank)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    phi = phi_from_seed(args.phi_seed, header.n, header.m)
    x_hat = decode_frame(frame, bank, phi, recon_from(args, header.k))
    write_vector(args.out, x_hat)
    return EXIT_OK


def _experiment_config(args, schemes) -> ExperimentConfig:
    defaults = FULL_DEFAULTS if args.full else QUICK_DEFAULTS
    pick = lambda name: getattr(args, name) if getattr(args, name) is not None else defaults[name]
    k = pick("k")
    return ExperimentConfig(
        m=pick("m"),
        k=k,
        alphas=parse_grid(pick("alphas")),
        rates_rx=parse_grid(pick("rates")),
        schemes=schemes,
        trials=pick("trials"),
        master_seed=args.seed,
        recon_cfg=recon_from(args, k),
        gamma=args.gamma,
        max_outer_iters=args.max_outer_iters,
        dist=as_dist(args.dist),
        training_source=MODES[args.training],
        training_samples=args.training_samples,
        fixed_phi=args.fixed_phi,
        threads=threads_from(args),
        sample_normalization=args.sample_normalization,
        joint_cap=args.joint_cap,
    )


def _report(rows, args) -> None:
    write_csv(rows, args.out)
    if args.dat:
        write_dat(rows, args.dat)
    skipped = [r for r in rows if not r.feasible]
    print(f"wrote {len(rows)} rows to {args.out}"
          + (f" ({len(skipped)} infeasible, nmse_db=nan)" if skipped else ""))
    best = best_alpha(rows)
    if best:
        print(f"{'scheme':<12} {'r_x':>6} {'best_alpha':>10} {'nmse_db':>9}")
        for (scheme, r_x), row in sorted(best.items()):
            print(f"{scheme:<12} {r_x:>6g} {row.alpha:>10g} {row.nmse_db:>9.3f}")


def _progress(args):
    if not args.verbose:
        return None
    return lambda row: print(f"  {row.scheme} alpha={row.alpha:g} r_x={row.r_x:g} nmse={row.nmse_db:.3f} dB",
                             file=sys.stderr)


def cmd_experiment(args) -> int:
    schemes = tuple(Scheme.parse(s) for s in args.schemes.split(","))
    cfg = _experiment_config(args, schemes)
    _report(run_sweep(cfg, _progress(args)), args)
    return EXIT_OK


def cmd_benchmark_joint(args) -> int:
    schemes = tuple(Scheme.parse(s) for s in args.schemes.split(","))
    cfg = _experiment_config(args, schemes)
    _report(run_benchmark_joint(cfg, _progress(args)), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _add_recon(p):
    p.add_argument("--recon", choices=("omp", "lasso"), default="omp")
    p.add_argument("--lasso-mu", type=float, default=1e-3)


def _add_search(p):
    p.add_argument("--gamma", type=float, default=1e-6)
    p.add_argument("--max-outer-iters", type=_positive_int, default=20)
    p.add_argument("--joint-cap", type=_positive_int, default=DEFAULT_JOINT_CAP)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abscs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    dists = [d.value for d in Dist] + ["gaussian", "uniform"]

    p = sub.add_parser("train-codebook", help="train one scalar codebook with Lloyd's algorithm")
    p.add_argument("--mode", choices=sorted(MODES), required=True)
    p.add_argument("--m", type=_positive_int, default=40)
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--dist", choices=dists, default="gaussian_unit")
    p.add_argument("--rate-bits", type=_nonneg_int, required=True)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_codebook)

    p = sub.add_parser("encode", help="measure a signal and write one .acsf frame")
    p.add_argument("--scheme", required=True, type=Scheme.parse)
    p.add_argument("--input", required=True, help="signal file, one value per line")
    p.add_argument("--codebook", required=True, action="append", help="codebook file or directory (repeatable)")
    p.add_argument("--phi-seed", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--rate", type=float, required=True, help="bits per signal coefficient (r_x)")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, help="expected signal length")
    p.add_argument("--out", required=True)
    _add_recon(p)
    _add_search(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct a signal from an .acsf frame")
    p.add_argument("--input", required=True)
    p.add_argument("--codebook", required=True, action="append")
    p.add_argument("--phi-seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_recon(p)
    p.set_defaults(func=cmd_decode)

    for name, func, default_schemes in (
        ("experiment", cmd_experiment, "nn,abs-seq,abs-nonseq"),
        ("benchmark-joint", cmd_benchmark_joint, "nn,abs-nonseq"),
    ):
        p = sub.add_parser(name, help="Monte-Carlo NMSE sweep" if func is cmd_experiment
                           else "sweep including the exhaustive joint search")
        p.add_argument("--m", type=_positive_int)
        p.add_argument("--k", type=_positive_int)
        p.add_argument("--alphas", help="start:step:end or comma list")
        p.add_argument("--rates", help="r_x values, start:step:end or comma list")
        p.add_argument("--schemes", default=default_schemes)
        p.add_argument("--trials", type=_positive_int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)
        p.add_argument("--dat", help="also write a whitespace-separated copy")
        p.add_argument("--full", action="store_true", help="full-scale defaults (slow)")
        p.add_argument("--threads", type=_positive_int)
        p.add_argument("--fixed-phi", action="store_true")
        p.add_argument("--dist", choices=dists, default="gaussian_unit")
        p.add_argument("--training", choices=("empirical", "gaussian"), default="empirical")
        p.add_argument("--training-samples", type=_positive_int, default=100_000)
        p.add_argument("--sample-normalization", action="store_true")
        p.add_argument("--verbose", "-v", action="store_true")
        _add_recon(p)
        _add_search(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidParameterError) as exc:
        parser.print_usage(sys.stderr)
        print(f"abscs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"abscs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SearchSpaceError as exc:
        print(f"abscs {args.command}: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (bs.CodebookMismatchError, bs.CorruptStreamError, CorruptFrameError, CodebookFormatError) as exc:
        print(f"abscs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
