"""Encode one measurement vector with every scheme and compare the errors.

    python3 demos/quickstart.py
"""

import numpy as np

from abscs.experiment import ExperimentConfig, bank_for, total_bits_for
from abscs.model import generate_sensing_matrix, generate_sparse_signal, measure, n_measurements
from abscs.quantizers import Scheme, decode_frame, encode_frame
from abscs.recon import reconstruct

M, K, ALPHA, R_X = 40, 3, 0.4, 0.5

rng = np.random.default_rng(2024)
signal = generate_sparse_signal(M, K, "gaussian", rng)
x = signal.coefficients
n = n_measurements(ALPHA, M)
phi = generate_sensing_matrix(n, M, rng)
y = measure(phi, signal)
total = total_bits_for(M, R_X)

# codebooks trained on reconstructed data from the same source
cfg = ExperimentConfig(m=M, k=K, alphas=(ALPHA,), rates_rx=(R_X,), schemes=tuple(Scheme))
bank = bank_for(cfg, n, total)
rc = cfg.recon_cfg

x_bar = reconstruct(rc, phi, y).estimate
print(f"M={M} K={K} N={n}, {total} bits for the whole frame")
print(f"unquantized OMP error: {np.sum((x_bar - x) ** 2):.4f}\n")

print(f"{'scheme':<12}{'error':>10}{'outer it':>10}{'recon calls':>13}")
for scheme in Scheme:
    frame = encode_frame(scheme, y, phi, rc, bank, total, K)
    x_hat = decode_frame(frame, bank, phi, rc)
    st = frame.stats
    iters = st.outer_iterations if st else 0
    calls = st.recon_calls if st else 0
    print(f"{scheme.label:<12}{np.sum((x_hat - x) ** 2):>10.4f}{iters:>10}{calls:>13}")
