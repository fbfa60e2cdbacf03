import re

import numpy as np
import pytest

from abscs import bitstream as bs
from abscs.cli import load_bank, main, parse_grid, phi_from_seed, read_vector
from abscs.codebook import Codebook
from abscs.model import measure
from abscs.quantizers import Scheme, allocate_bits, decode_frame, encode_nearest_neighbor
from abscs.recon import ReconConfig

M, K, ALPHA, RATE, SEED = 20, 2, 0.3, 0.5, 7  # n=6, 10 bits


@pytest.fixture(scope="module")
def books(tmp_path_factory):
    d = tmp_path_factory.mktemp("cb")
    for r in (0, 1, 2):
        assert main(["train-codebook", "--mode", "empirical", "--m", str(M), "--k", str(K), "--n", "6",
                     "--rate-bits", str(r), "--samples", "5000", "--out", str(d / f"m{r}.cb")]) == 0
        if r:
            for mode in ("direct", "support"):
                assert main(["train-codebook", "--mode", mode, "--m", str(M), "--k", str(K),
                             "--rate-bits", str(r), "--samples", "5000", "--out", str(d / f"{mode}{r}.cb")]) == 0
    return d


def signal_file(tmp_path, values=None):
    x = np.zeros(M)
    x[[3, 11]] = [1.3, -0.6] if values is None else values
    path = tmp_path / "x.txt"
    path.write_text("".join(f"{v!r}\n" for v in x.tolist()))
    return path


def encode(tmp_path, books, scheme, *extra):
    out = tmp_path / f"{scheme}.acsf"
    rc = main(["encode", "--scheme", scheme, "--input", str(signal_file(tmp_path)), "--codebook", str(books),
               "--phi-seed", str(SEED), "--alpha", str(ALPHA), "--rate", str(RATE), "--k", str(K),
               "--out", str(out), *extra])
    return rc, out


def test_parse_grid():
    assert parse_grid("0.15:0.05:0.45") == (0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45)
    assert parse_grid("0.5,0.75") == (0.5, 0.75)


def test_train_gaussian_scaled(tmp_path, capsys):
    out = tmp_path / "g.cb"
    assert main(["train-codebook", "--rate-bits", "1", "--mode", "gaussian", "--k", "35", "--n", "128",
                 "--samples", "200000", "--out", str(out)]) == 0
    cb = Codebook.load(out)
    np.testing.assert_allclose(cb.codepoints, [-0.417, 0.417], atol=0.01)
    assert "distortion" in capsys.readouterr().out


def test_train_rate_zero(tmp_path):
    out = tmp_path / "z.cb"
    assert main(["train-codebook", "--rate-bits", "0", "--mode", "gaussian", "--k", "3", "--n", "16",
                 "--out", str(out)]) == 0
    assert len(Codebook.load(out)) == 1


def test_train_missing_out(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["train-codebook", "--rate-bits", "0", "--mode", "gaussian", "--k", "3", "--n", "16"])
    assert info.value.code == 2
    assert not list(tmp_path.iterdir())


def test_train_measurement_needs_n(tmp_path):
    assert main(["train-codebook", "--rate-bits", "1", "--mode", "gaussian", "--k", "3",
                 "--out", str(tmp_path / "x.cb")]) == 2


@pytest.mark.parametrize("scheme", ["nn", "abs-seq", "abs-nonseq", "joint", "direct", "support-set", "adaptive"])
def test_encode_decode_matches_library(tmp_path, books, scheme):
    rc, frame_path = encode(tmp_path, books, scheme)
    assert rc == 0
    out = tmp_path / "xh.txt"
    assert main(["decode", "--input", str(frame_path), "--codebook", str(books), "--phi-seed", str(SEED),
                 "--out", str(out)]) == 0
    bank = load_bank([books])
    header, frame = bs.read_frame(frame_path, bank)
    phi = phi_from_seed(SEED, header.n, header.m)
    expect = decode_frame(frame, bank, phi, ReconConfig.omp(K))
    np.testing.assert_array_equal(read_vector(out), expect)


def test_nn_codepoint_aligned(tmp_path, books):
    bank = load_bank([books])
    phi = phi_from_seed(SEED, 6, M)
    rc, frame_path = encode(tmp_path, books, "nn")
    _, frame = bs.read_frame(frame_path, bank)
    x = read_vector(signal_file(tmp_path))
    lib = encode_nearest_neighbor(measure(phi, x), bank.measurement, allocate_bits(10, 6))
    assert frame.indices == lib.indices


def test_adaptive_flag_after_header(tmp_path, books):
    _, frame_path = encode(tmp_path, books, "adaptive")
    data = frame_path.read_bytes()
    _, frame = bs.unpack_frame(data)
    assert data[bs.HEADER_SIZE] >> 6 == frame.flag_bits


def test_nonseq_uniform_count_formula(tmp_path, books, capsys):
    # rate 0.6 gives 12 bits over 6 channels: uniform 2 bits
    rc, _ = encode(tmp_path, books, "abs-nonseq", "--rate", "0.6")
    assert rc == 0
    err = capsys.readouterr().err
    iters = int(re.search(r"outer_iterations=(\d+)", err).group(1))
    calls = int(re.search(r"recon_calls=(\d+)", err).group(1))
    assert calls == iters * 6 * 7 // 2 * 2**2


def test_decode_mismatch_status(tmp_path, books):
    _, frame_path = encode(tmp_path, books, "nn")
    rc = main(["decode", "--input", str(frame_path), "--codebook", str(books / "m1.cb"),
               "--phi-seed", str(SEED), "--out", str(tmp_path / "o.txt")])
    assert rc == 3


def test_decode_corrupt_status(tmp_path, books):
    bad = tmp_path / "bad.acsf"
    bad.write_bytes(b"ACSF")
    rc = main(["decode", "--input", str(bad), "--codebook", str(books), "--phi-seed", "1",
               "--out", str(tmp_path / "o.txt")])
    assert rc == 3


def test_encode_length_mismatch(tmp_path, books):
    rc, _ = encode(tmp_path, books, "nn", "--m", "21")
    assert rc == 3


def test_joint_cap_status(tmp_path, books):
    rc, path = encode(tmp_path, books, "joint", "--joint-cap", "100")
    assert rc == 4
    assert not path.exists()


def test_bad_scheme_is_usage_error(tmp_path, books):
    with pytest.raises(SystemExit) as info:
        encode(tmp_path, books, "bogus")
    assert info.value.code == 2


def experiment_args(out, *extra):
    return ["experiment", "--m", "12", "--k", "2", "--alphas", "0.1,0.5", "--rates", "0.5", "--trials", "3",
            "--training-samples", "3000", "--seed", "42", "--out", str(out), *extra]


def test_experiment_csv_and_summary(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(experiment_args(out, "--dat", str(tmp_path / "r.dat"))) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "scheme,m,n,k,r_x,alpha,trials,nmse_db,mean_recon_calls,mean_outer_iters,wallclock_s"
    assert len(lines) == 1 + 2 * 3
    assert any(",nan," in line for line in lines)  # alpha=0.1 is infeasible
    stdout = capsys.readouterr().out
    assert "best_alpha" in stdout and "infeasible" in stdout
    assert (tmp_path / "r.dat").exists()


def test_experiment_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(experiment_args(a)) == 0
    assert main(experiment_args(b, "--threads", "2")) == 0
    col = lambda p: [line.split(",")[7] for line in p.read_text().splitlines()]
    assert col(a) == col(b)


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("ABSCS_THREADS", "nope")
    assert main(experiment_args(tmp_path / "r.csv")) == 2
    monkeypatch.setenv("ABSCS_THREADS", "2")
    assert main(experiment_args(tmp_path / "r.csv")) == 0


def test_bad_grid(tmp_path):
    assert main(experiment_args(tmp_path / "r.csv") + ["--alphas", "0.5:0:0.1"]) == 2


def test_benchmark_joint_refusal(tmp_path):
    args = ["benchmark-joint", "--m", "12", "--k", "2", "--alphas", "0.5", "--rates", "0.5", "--trials", "2",
            "--training-samples", "3000", "--joint-cap", "10", "--out", str(tmp_path / "j.csv")]
    assert main(args) == 4
    assert main(args[:-4] + ["--out", str(tmp_path / "j.csv")]) == 0
    assert (tmp_path / "j.csv").read_text().splitlines()[1].startswith("joint,")


def test_scheme_values_round_trip():
    assert {Scheme.parse(s.label) for s in Scheme} == set(Scheme)
