"""Analysis-by-synthesis scalar quantization of compressed-sensing measurements."""

from .bitstream import (
    CodebookMismatchError,
    CorruptStreamError,
    FrameHeader,
    InvalidFrameError,
    pack_frame,
    read_frame,
    unpack_frame,
    write_frame,
)
from .codebook import Codebook, CodebookBank, TrainingSource, TrainingSpec, lloyd_train
from .experiment import ExperimentConfig, ResultRow, compute_nmse, run_benchmark_joint, run_sweep, write_csv
from .model import (
    Dist,
    InvalidParameterError,
    SensingMatrix,
    SparseSignal,
    generate_sensing_matrix,
    generate_sparse_signal,
    measure,
)
from .quantizers import (
    BitAllocation,
    EncodedFrame,
    Scheme,
    SearchSpaceError,
    abs_objective,
    allocate_bits,
    decode_frame,
    encode_abs_nonsequential,
    encode_abs_sequential,
    encode_adaptive,
    encode_direct,
    encode_frame,
    encode_joint_exhaustive,
    encode_nearest_neighbor,
    encode_support_set,
)
from .recon import CallCounter, ReconConfig, Reconstruction, lasso_reconstruct, omp_reconstruct, reconstruct

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
