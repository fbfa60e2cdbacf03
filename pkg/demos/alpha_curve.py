"""Small NMSE-versus-alpha study: where to spend the bits?

With a fixed bit budget, more measurements means coarser quantization of
each one.  This sweeps alpha = N/M at desk scale and prints one curve per
scheme, plus the best alpha for each.  Takes about a minute.

    python3 demos/alpha_curve.py [trials]
"""

import sys

from abscs.experiment import ExperimentConfig, best_alpha, run_sweep

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 200
cfg = ExperimentConfig(
    m=40, k=3,
    alphas=(0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45),
    rates_rx=(0.5,),
    schemes=("nn", "abs_seq", "abs_nonseq"),
    trials=trials,
)
rows = run_sweep(cfg, progress=lambda msg: print(msg, file=sys.stderr))

labels = [s.label for s in cfg.schemes]
print(f"{'alpha':>6}" + "".join(f"{s:>12}" for s in labels))
for alpha in cfg.alphas:
    cell = {r.scheme: r.nmse_db for r in rows if r.alpha == alpha}
    print(f"{alpha:>6.2f}" + "".join(f"{cell[s]:>12.2f}" for s in labels))

print()
for (scheme, _), row in sorted(best_alpha(rows).items()):
    print(f"best alpha for {scheme}: {row.alpha:.2f} ({row.nmse_db:.2f} dB)")
