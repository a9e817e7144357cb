"""HRPB sparse format, instrumented tensor-core SpMM emulation and its data-movement model."""

from .binary import deserialize_hrpb, load_hrpb, save_hrpb, serialize_hrpb
from .core import (
    Block,
    ConfigError,
    Hrpb,
    HrpbConfig,
    IntegrityError,
    compact_active_columns,
    csr_to_hrpb,
    encode_brick_pattern,
    hrpb_to_csr,
    prefix_index,
)
from .emulator import ExecConfig, ExecStats, brick_mma, spmm_hrpb, spmm_reference, verify
from .estimator import HrpbSpMM
from .model import (
    ModelReport,
    Synergy,
    analyze_tm,
    classify_synergy,
    compute_alpha,
    compute_beta,
    model_report,
    oi_shmem,
    shmem_trans_b,
)
from .sparse_io import (
    CooMatrix,
    CsrMatrix,
    DenseMatrix,
    coo_to_csr,
    generate_synthetic,
    parse_matrix_market,
    read_matrix_market,
    write_matrix_market,
)

__version__ = "0.1.0"
