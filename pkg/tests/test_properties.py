"""Property-based checks of the invariants each module promises."""

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rank1part import io
from rank1part.extract import extract_fiedler, extract_marginals, extract_nmf_rank1, extract_pagerank
from rank1part.matrix import DataMatrix, build_similarity, normalized_laplacian, sinkhorn_knopp_ds
from rank1part.metrics import cce, clustering_error, nmi, silhouette_1d
from rank1part.potts import potts_solve, sorted_potts_solve

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

# multiples of 1/8 keep shifts and power-of-two scalings exact in floating point
dyadic = st.integers(-64, 64).map(lambda k: k / 8)
signals = st.lists(dyadic, min_size=1, max_size=40).map(np.array)
labels = st.lists(st.integers(0, 3), min_size=2, max_size=30)
lam = st.sampled_from([0.01, 0.125, 0.5, 1.0, 4.0])
p_values = st.sampled_from([1, 2])


def relabel(z, seed):
    z = np.asarray(z)
    mapping = np.random.default_rng(seed).permutation(10)
    return mapping[z]


# ---------------------------------------------------------------------------
# metrics


@FAST
@given(labels, st.data())
def test_nmi_symmetric_and_bounded(z, data):
    w = data.draw(st.lists(st.integers(0, 4), min_size=len(z), max_size=len(z)))
    value = nmi(z, w)
    assert 0.0 <= value <= 1.0
    assert abs(value - nmi(w, z)) <= 1e-12
    assert abs(value - nmi(relabel(z, 1), relabel(w, 2))) <= 1e-12


@FAST
@given(labels, st.data())
def test_clustering_error_relabel_invariant(z, data):
    w = data.draw(st.lists(st.integers(0, 4), min_size=len(z), max_size=len(z)))
    e = clustering_error(z, w)
    assert 0.0 <= e <= 1.0
    assert abs(e - clustering_error(relabel(z, 3), relabel(w, 4))) <= 1e-12
    assert clustering_error(z, relabel(z, 5)) == 0.0
    if e == 0.0:
        assert nmi(z, w) == 1.0


@FAST
@given(labels, labels)
def test_cce_bounds_and_monotone(z_R, z_C):
    perfect = cce(z_R, z_C, z_R, z_C)
    assert perfect == 0.0
    worse_rows = np.zeros(len(z_R), dtype=int)
    value = cce(z_R, z_C, worse_rows, z_C)
    assert 0.0 <= value <= 1.0
    assert value == clustering_error(z_R, worse_rows)
    both = cce(z_R, z_C, worse_rows, np.zeros(len(z_C), dtype=int))
    assert both >= value - 1e-15


@FAST
@given(
    arrays(float, st.integers(3, 25), elements=st.floats(-100, 100)),
    st.floats(0.01, 100),
    st.floats(-50, 50),
    st.data(),
)
def test_silhouette_affine_invariant(x, alpha, beta, data):
    z = np.array(data.draw(st.lists(st.integers(0, 2), min_size=x.size, max_size=x.size)))
    assume(len(set(z.tolist())) >= 2)
    assume(np.ptp(x) > 1e-3)
    s = silhouette_1d(x, z)
    assert -1.0 <= s <= 1.0
    assert abs(s - silhouette_1d(alpha * x + beta, z)) <= 1e-9


# ---------------------------------------------------------------------------
# Potts


@FAST
@given(signals, lam, p_values, dyadic)
def test_potts_translation_equivariant(u, lam, p, c):
    base = potts_solve(u, lam, p)
    shifted = potts_solve(u + c, lam, p)
    assert shifted.boundaries == base.boundaries
    assert np.allclose(shifted.x, base.x + c, atol=1e-12)


@FAST
@given(signals, lam, p_values, st.sampled_from([0.25, 0.5, 2.0, 4.0]))
def test_potts_scaling_covariant(u, lam, p, alpha):
    base = potts_solve(u, lam, p)
    scaled = potts_solve(alpha * u, lam * alpha**p, p)
    assert scaled.boundaries == base.boundaries
    assert np.allclose(scaled.x, alpha * base.x, atol=1e-12)


@FAST
@given(signals, lam, p_values)
def test_potts_segment_values_exact(u, lam, p):
    res = potts_solve(u, lam, p)
    for (a, b), value in zip(res.segments(), res.segment_values):
        seg = u[a:b]
        expected = np.mean(seg) if p == 2 else np.sort(seg)[(seg.size - 1) // 2]
        assert value == expected
    # no invisible jumps
    assert all(x != y for x, y in zip(res.segment_values, res.segment_values[1:]))


@FAST
@given(signals, lam, p_values)
def test_sorted_input_gives_monotone_output(u, lam, p):
    x = potts_solve(np.sort(u), lam, p).x
    assert (np.diff(x) >= 0).all()


@FAST
@given(st.integers(2, 40), st.integers(0, 2**31), lam, p_values)
def test_sorted_potts_permutation_equivariant(n, seed, lam, p):
    rng = np.random.default_rng(seed)
    u = rng.permutation(n) / 8 + rng.random(n) / 100  # distinct coordinates
    perm = rng.permutation(n)
    assert np.array_equal(sorted_potts_solve(u[perm], lam, p).x, sorted_potts_solve(u, lam, p).x[perm])


# ---------------------------------------------------------------------------
# matrix core and extractors

small_matrices = st.tuples(st.integers(3, 8), st.integers(2, 5), st.integers(0, 2**31)).map(
    lambda t: np.random.default_rng(t[2]).random((t[0], t[1])) + 0.05
)


@FAST
@given(small_matrices, st.floats(0.01, 1000))
def test_doubly_stochastic_scale_invariant(A, alpha):
    S = build_similarity(A).values
    S1, _, _ = sinkhorn_knopp_ds(S)
    S2, _, _ = sinkhorn_knopp_ds(alpha * S)
    assert np.abs(S1 - S2).max() <= 2e-9


@FAST
@given(small_matrices, st.integers(0, 1000))
def test_similarity_permutation_equivariant(A, seed):
    perm = np.random.default_rng(seed).permutation(A.shape[0])
    S = build_similarity(A).values
    assert np.allclose(build_similarity(A[perm]).values, S[np.ix_(perm, perm)], atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(small_matrices, st.integers(0, 1000))
def test_extractors_row_permutation_equivariant(A, seed):
    perm = np.random.default_rng(seed).permutation(A.shape[0])
    for extract in (extract_marginals, extract_pagerank):
        assert np.allclose(extract(A[perm]).u, extract(A).u[perm], rtol=1e-9)
    u = extract_fiedler(A).u
    u_perm = extract_fiedler(A[perm]).u
    # eigenvectors carry a sign, and a repeated eigenvalue leaves no unique vector
    if not _repeated_fiedler(A):
        assert min(np.abs(u_perm - u[perm]).max(), np.abs(u_perm + u[perm]).max()) < 1e-6
    nmf = extract_nmf_rank1(A, restarts=2, seed=1)
    nmf_perm = extract_nmf_rank1(A[perm], restarts=2, seed=1)
    assert np.allclose(nmf_perm.u, nmf.u[perm], rtol=1e-6)


def _repeated_fiedler(A):
    w = np.linalg.eigvalsh(normalized_laplacian(build_similarity(A)).values)
    return w[2] - w[1] < 1e-6


@settings(max_examples=25, deadline=None)
@given(small_matrices, st.floats(0.1, 10))
def test_nmf_scale_convention(A, c):
    pair = extract_nmf_rank1(A, restarts=2)
    assert abs(pair.u.sum() - 1.0) <= 1e-12
    scaled = extract_nmf_rank1(A * c, restarts=2)
    assert np.allclose(scaled.u, pair.u, rtol=1e-6)


# ---------------------------------------------------------------------------
# file formats


@FAST
@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-1e300, 1e300)))
def test_matrix_file_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("io") / "m.csv"
    io.write_matrix(path, DataMatrix(values))
    assert np.array_equal(io.read_matrix(path).values, values)
