import numpy as np
import pytest

from conftest import integer_case, triple_loop_product
from hrpb.core import Block, Hrpb, HrpbConfig, IntegrityError, csr_to_hrpb, popcount, prefix_index
from hrpb.emulator import (
    RTOL,
    DimensionError,
    ExecConfig,
    brick_mma,
    compare,
    decode_brick,
    spmm_hrpb,
    spmm_reference,
    verify,
)
from hrpb.sparse_io import CsrMatrix, DenseMatrix, generate_synthetic


def expected_counters(h, n):
    t = h.bricks()
    nsub = -(-n // 8)
    return {
        "mma_count": t.total_bricks * nsub,
        "b_fragment_loads": h.num_blocks * h.config.brick_cols * nsub,
        "b_fragment_loads_active": t.active_brick_columns() * nsub,
        "b_staging_elements": h.num_blocks * h.config.tk * nsub * 8,
        "decode_ops": 2 * t.total_bricks,
        "a_block_bytes": len(h.packed_blocks),
        "useful_macs": t.nnz * nsub * 8,
    }


# --- ExecConfig -----------------------------------------------------------

@pytest.mark.parametrize("n, padded, warps, grid_cols", [
    (1, 8, 1, 1), (8, 8, 1, 1), (32, 32, 1, 1), (64, 64, 2, 1),
    (128, 128, 4, 1), (130, 136, 4, 2), (512, 512, 4, 4),
])
def test_exec_geometry(n, padded, warps, grid_cols):
    cfg = ExecConfig(n=n)
    assert cfg.n_padded == padded
    assert cfg.warps_per_block == warps
    assert cfg.grid(7) == (7, grid_cols)


def test_exec_config_rejects_zero_width():
    with pytest.raises(ValueError):
        ExecConfig(n=0)


# --- oracle ---------------------------------------------------------------

def test_reference_identity_and_empty(rng):
    b = rng.standard_normal((10, 5)).astype(np.float32)
    assert spmm_reference(CsrMatrix.identity(10), b) == DenseMatrix(b)
    assert not spmm_reference(CsrMatrix.empty(10, 10), b).data.any()


def test_reference_matches_triple_loop():
    rng = np.random.default_rng(3)
    dense = np.where(rng.random((8, 8)) < 0.5, rng.uniform(-1, 1, (8, 8)), 0).astype(np.float32)
    b = rng.uniform(-1, 1, (8, 8)).astype(np.float32)
    np.testing.assert_array_equal(spmm_reference(CsrMatrix.from_dense(dense), b).data,
                                  triple_loop_product(dense, b))


def test_reference_dimension_mismatch():
    with pytest.raises(DimensionError):
        spmm_reference(CsrMatrix.identity(4), np.zeros((5, 2), np.float32))


# --- fragments ------------------------------------------------------------

def test_brick_mma_zero_a_leaves_c():
    c = np.arange(128, dtype=np.float32).reshape(16, 8)
    before = c.copy()
    brick_mma(np.zeros((16, 4), np.float32), np.ones((4, 8), np.float32), c)
    np.testing.assert_array_equal(c, before)


def test_brick_mma_ones():
    c = np.zeros((16, 8), np.float32)
    brick_mma(np.ones((16, 4), np.float32), np.ones((4, 8), np.float32), c)
    assert np.all(c == 4)


def test_brick_mma_random_matches_matmul():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((16, 4)).astype(np.float32)
    b = rng.standard_normal((4, 8)).astype(np.float32)
    c0 = rng.standard_normal((16, 8)).astype(np.float32)
    c = brick_mma(a, b, c0.copy())
    np.testing.assert_allclose(c, c0.astype(np.float64) + a.astype(np.float64) @ b, rtol=1e-5, atol=1e-5)
    # k ascending, one rounding per product and per add
    manual = c0.copy()
    for k in range(4):
        manual = (manual + (a[:, k:k + 1] * b[k])).astype(np.float32)
    np.testing.assert_array_equal(c, manual)


def test_brick_mma_wide_equals_per_subtile():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((16, 4)).astype(np.float32)
    b = rng.standard_normal((4, 32)).astype(np.float32)
    wide = brick_mma(a, b, np.zeros((16, 32), np.float32))
    per = np.zeros((16, 32), np.float32)
    for s in range(4):
        brick_mma(a, b[:, s * 8:(s + 1) * 8], per[:, s * 8:(s + 1) * 8])
    np.testing.assert_array_equal(wide, per)


def test_brick_mma_shape_checks():
    with pytest.raises(ValueError):
        brick_mma(np.zeros((16, 8)), np.zeros((8, 8)), np.zeros((16, 8)))
    with pytest.raises(ValueError):
        brick_mma(np.zeros((16, 4)), np.zeros((4, 6)), np.zeros((16, 6)))


def test_decode_brick_uses_per_lane_prefix_index():
    rng = np.random.default_rng(8)
    for _ in range(50):
        pattern = int(rng.integers(0, 2**63)) | (int(rng.integers(0, 2)) << 63)
        count = pattern.bit_count()
        nnz = rng.standard_normal(count + 7).astype(np.float32)
        frag = decode_brick(pattern, nnz, 7).ravel()
        for lane in range(32):
            for pos in (lane, lane + 32):
                want = nnz[7 + prefix_index(pattern, pos)] if (pattern >> pos) & 1 else 0.0
                assert frag[pos] == want


# --- spmm_hrpb ------------------------------------------------------------

def test_identity_32():
    b = np.random.default_rng(0).standard_normal((32, 8)).astype(np.float32)
    c, stats = spmm_hrpb(csr_to_hrpb(CsrMatrix.identity(32)), b)
    np.testing.assert_array_equal(c.data, b)
    # two panels, one block each, four bricks holding four diagonal entries apiece
    assert stats.mma_count == 8
    assert stats.b_fragment_loads == 8
    assert stats.decode_ops == 16
    assert dict(stats.per_panel_blocks) == {1: 2}


@pytest.mark.parametrize("n", [1, 8, 13, 32, 128])
def test_counter_identities(n):
    csr = generate_synthetic("random-uniform", 150, 120, 0.04, seed=n)
    h = csr_to_hrpb(csr, HrpbConfig(tm=32, tk=16))
    b = np.random.default_rng(n).uniform(-1, 1, (120, n)).astype(np.float32)
    c, stats = spmm_hrpb(h, b)
    for name, value in expected_counters(h, n).items():
        assert getattr(stats, name) == value, name
    if n == 8:
        assert stats.mma_count == h.bricks().total_bricks
    assert compare(c, spmm_reference(csr, b)).passed


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("n", [8, 32, 128])
def test_oracle_equivalence(seed, n):
    rng = np.random.default_rng(seed * 7 + n)
    M, K = (int(x) for x in rng.integers(16, 300, size=2))
    density = float(np.exp(rng.uniform(np.log(1e-4), np.log(0.3))))
    csr = generate_synthetic("random-uniform", M, K, density, seed=seed)
    tm = int(rng.choice([16, 32]))
    b = rng.uniform(-1, 1, (K, n)).astype(np.float32)
    report, _ = verify(csr, b, HrpbConfig(tm=tm))
    assert report.passed, report
    assert report.max_rel_err <= RTOL


def test_tm16_accumulates_in_column_order():
    # with one brick row per panel the emulator adds products in ascending
    # column order, the same sequence as the oracle
    csr = generate_synthetic("random-uniform", 200, 180, 0.1, seed=21)
    b = np.random.default_rng(2).standard_normal((180, 24)).astype(np.float32)
    c, _ = spmm_hrpb(csr_to_hrpb(csr), b)
    np.testing.assert_array_equal(c.data, spmm_reference(csr, b).data)


@pytest.mark.parametrize("tm", [16, 32, 64])
def test_bounded_integer_instances_exact(tm):
    rng = np.random.default_rng(tm)
    csr = integer_case(rng, 97, 140, 0.2)
    b = rng.integers(-2, 3, size=(140, 40)).astype(np.float32)
    report, _ = verify(csr, b, HrpbConfig(tm=tm, tk=8))
    assert report.max_abs_err == 0.0 and report.passed
    exact = csr.to_dense().astype(np.int64) @ b.astype(np.int64)
    c, _ = spmm_hrpb(csr_to_hrpb(csr, HrpbConfig(tm=tm)), b)
    np.testing.assert_array_equal(c.data, exact)


def test_panel_parallelism_bit_identical():
    csr = generate_synthetic("random-uniform", 300, 256, 0.05, seed=3)
    h = csr_to_hrpb(csr, HrpbConfig(tm=32))
    b = np.random.default_rng(1).standard_normal((256, 40)).astype(np.float32)
    c1, s1 = spmm_hrpb(h, b)
    for jobs in (2, 4, 8):
        cj, sj = spmm_hrpb(h, b, jobs=jobs)
        assert cj == c1
        assert sj.to_dict() == s1.to_dict()


def test_ragged_rows_and_columns_trimmed():
    dense = np.zeros((21, 9), np.float32)
    dense[20, 8] = 2.0
    dense[3, 0] = -1.0
    b = np.arange(9 * 5, dtype=np.float32).reshape(9, 5)
    c, stats = spmm_hrpb(csr_to_hrpb(CsrMatrix.from_dense(dense)), b)
    assert c.shape == (21, 5)
    np.testing.assert_array_equal(c.data, dense @ b)
    assert stats.b_staging_elements == 2 * 16 * 8


def test_empty_matrix_gives_zero_output():
    c, stats = spmm_hrpb(csr_to_hrpb(CsrMatrix.empty(40, 12)), np.ones((12, 8), np.float32))
    assert not c.data.any()
    assert stats.mma_count == 0 and dict(stats.per_panel_blocks) == {0: 3}


def test_verify_identity_and_mismatch():
    b = np.random.default_rng(4).standard_normal((64, 16)).astype(np.float32)
    report, _ = verify(CsrMatrix.identity(64), b)
    assert report.max_abs_err == 0.0 and report.passed
    with pytest.raises(DimensionError):
        verify(CsrMatrix.identity(64), b[:10])
    with pytest.raises(DimensionError):
        spmm_hrpb(csr_to_hrpb(CsrMatrix.identity(64)), b[:10])
    with pytest.raises(DimensionError):
        spmm_hrpb(csr_to_hrpb(CsrMatrix.identity(64)), b, ExecConfig(n=8))


def test_compare_flags_large_error():
    ref = np.ones((4, 4), np.float32)
    got = ref.copy()
    got[1, 2] += 1e-3
    report = compare(got, ref)
    assert not report.passed
    assert report.max_abs_err == pytest.approx(1e-3, rel=1e-3)
    assert report.max_rel_err == pytest.approx(5e-4, rel=1e-3)


def test_corrupt_block_rejected_during_execution():
    blk = Block(nnz_array=np.ones(3, np.float32), patterns=np.array([0xF], np.uint64),
                col_ptr=[0, 1, 1, 1, 1], rows=[0], active_cols=list(range(16)))
    h = Hrpb.from_blocks(16, 16, HrpbConfig(), [[blk]])
    with pytest.raises(IntegrityError):
        spmm_hrpb(h, np.ones((16, 8), np.float32))


def test_useful_mac_identity_on_full_blocks():
    # every panel has exactly 16 active columns, so no sentinel padding
    csr = generate_synthetic("block-clustered", 64, 16, density=0.6, seed=2)
    dense = csr.to_dense()
    dense[::16, :] = np.where(dense[::16, :] == 0, 0.5, dense[::16, :])
    csr = CsrMatrix.from_dense(dense)
    h = csr_to_hrpb(csr)
    t = h.bricks()
    assert np.all(h.panel_active_counts == 16)
    _, stats = spmm_hrpb(h, np.ones((16, 32), np.float32))
    alpha = t.nnz / (64 * t.total_bricks)
    beta = t.total_bricks / t.active_brick_columns()
    assert stats.useful_macs / stats.b_fragment_loads == pytest.approx(512 * alpha * beta, rel=1e-12)
    assert int(popcount(t.pattern).sum()) == csr.nnz
