import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stpool_eeg.coords import (
    CoordinateMap2D,
    TsneParams,
    azimuthal_equidistant,
    conditional_affinities,
    joint_affinities,
    kl_divergence,
    kl_gradient,
    neighbor_preservation,
    parallel_projection,
    squared_distances,
    svd_init,
    transform,
    tsne_run,
)
from stpool_eeg.errors import (
    AntipodalPointError,
    DegenerateRankBelow2Error,
    InputError,
    KOutOfRangeError,
    PerplexityOutOfRangeError,
)
from stpool_eeg.montage import ElectrodeMontage


def montage_of(points):
    pts = np.asarray(points, dtype=float)
    return ElectrodeMontage(tuple(f"e{i}" for i in range(len(pts))), pts)


def sphere_points(n, seed=0):
    """Random unit vectors on the upper hemisphere."""
    v = np.random.default_rng(seed).standard_normal((n, 3))
    v[:, 2] = np.abs(v[:, 2])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_parallel_drops_z():
    m = montage_of([[0.3, 0.4, 0.866], [0.0, -1.0, 0.0]])
    np.testing.assert_array_equal(parallel_projection(m).coords2d, [[0.3, 0.4], [0.0, -1.0]])


def test_azimuthal_examples():
    m = montage_of([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    c = azimuthal_equidistant(m).coords2d
    np.testing.assert_allclose(c[0], [np.pi / 2, 0.0], atol=1e-12)
    np.testing.assert_allclose(c[1], [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(c[2], [0.0, np.pi / 2], atol=1e-12)
    np.testing.assert_allclose(c[3], [-np.pi / 2, 0.0], atol=1e-12)


def test_azimuthal_antipodal():
    with pytest.raises(AntipodalPointError):
        azimuthal_equidistant(montage_of([[0, 0, 1.0], [0, 0, -1.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_azimuthal_radius_is_polar_angle(seed):
    pts = sphere_points(12, seed) * np.random.default_rng(seed).uniform(0.6, 1.4, (12, 1))
    c = azimuthal_equidistant(montage_of(pts)).coords2d
    theta = np.arccos(pts[:, 2] / np.linalg.norm(pts, axis=1))
    np.testing.assert_allclose(np.linalg.norm(c, axis=1), theta, atol=1e-12)
    # direction is kept
    np.testing.assert_allclose(np.arctan2(c[:, 1], c[:, 0]), np.arctan2(pts[:, 1], pts[:, 0]), atol=1e-9)


def test_svd_init_preserves_planar_geometry():
    rng = np.random.default_rng(3)
    ab = rng.uniform(-0.5, 0.5, (10, 2))
    tilt = np.array([[1.0, 0.0, 0.3], [0.0, 1.0, -0.2]])
    m = montage_of(ab @ tilt + np.array([0.0, 0.0, 0.9]))
    y = svd_init(m).coords2d
    iu = np.triu_indices(10, 1)
    ratio = np.sqrt(squared_distances(y))[iu] / np.sqrt(squared_distances(m.coords3d))[iu]
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-9)
    assert np.std(y[:, 0]) == pytest.approx(1e-4, rel=1e-12)


def test_svd_init_rank_deficient():
    pts = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.1], [0.0, 0.0, 0.9], [0.0, 0.0, 1.2]])
    with pytest.raises(DegenerateRankBelow2Error):
        svd_init(montage_of(pts))


def _entropy_bits(row):
    row = row[row > 0]
    return float(-(row * np.log2(row)).sum())


@pytest.mark.parametrize("perplexity", [2.0, 5.0, 10.0, 15.0])
def test_bandwidth_hits_target_entropy(montage64, perplexity):
    P, betas = conditional_affinities(squared_distances(montage64.coords3d), perplexity)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diag(P) == 0)
    assert np.all(betas > 0)
    ent = np.array([_entropy_bits(r) for r in P])
    np.testing.assert_allclose(ent, np.log2(perplexity), atol=1e-9)


def test_equidistant_rows_are_uniform():
    # regular tetrahedron on the unit sphere
    t = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3)
    P, _ = conditional_affinities(squared_distances(t), 2.0)
    off = P[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, 1 / 3)


def test_joint_affinities_symmetric_and_normalised(montage64):
    cond, _ = conditional_affinities(squared_distances(montage64.coords3d), 10.0)
    P = joint_affinities(cond)
    np.testing.assert_allclose(P, P.T)
    assert P.sum() == pytest.approx(1.0, abs=1e-12)


def test_kl_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((5, 3))
    cond, _ = conditional_affinities(squared_distances(X), 2.0)
    P = joint_affinities(cond)
    Y = rng.standard_normal((5, 2))
    g = kl_gradient(P, Y)
    num = np.zeros_like(Y)
    h = 1e-6
    for idx in np.ndindex(Y.shape):
        Yp, Ym = Y.copy(), Y.copy()
        Yp[idx] += h
        Ym[idx] -= h
        num[idx] = (kl_divergence(P, Yp) - kl_divergence(P, Ym)) / (2 * h)
    assert np.linalg.norm(g - num) / np.linalg.norm(num) <= 1e-6


def test_kl_is_nonnegative(montage64):
    r = tsne_run(montage64, TsneParams(n_iter=300))
    assert np.all(r.kl_trace >= 0)


def test_tsne_is_deterministic(montage32):
    p = TsneParams(n_iter=300)
    a = tsne_run(montage32, p)
    b = tsne_run(montage32, p)
    assert a.embedding.coords2d.tobytes() == b.embedding.coords2d.tobytes()
    assert a.kl_trace.tobytes() == b.kl_trace.tobytes()


def test_perplexity_range(montage64):
    with pytest.raises(PerplexityOutOfRangeError):
        tsne_run(montage64, TsneParams(perplexity=64))
    with pytest.raises(PerplexityOutOfRangeError):
        tsne_run(montage64, TsneParams(perplexity=1.0))
    with pytest.raises(PerplexityOutOfRangeError):
        tsne_run(montage_of(sphere_points(6)), TsneParams(perplexity=2.0))


def test_unknown_transform(montage64):
    with pytest.raises(InputError):
        transform(montage64, "spline")


def test_neighbor_preservation_identity_and_range(montage64):
    az = azimuthal_equidistant(montage64)
    for k in (1, 5, 10):
        assert 0.0 <= neighbor_preservation(az, montage64, k) <= 1.0
    xy = np.random.default_rng(2).uniform(-0.5, 0.5, (20, 2))
    planar = montage_of(np.column_stack([xy, np.full(20, 0.8)]))
    flat = CoordinateMap2D(planar.labels, planar.coords3d[:, :2], "flat")
    assert neighbor_preservation(flat, planar, 4) == 1.0
    with pytest.raises(KOutOfRangeError):
        neighbor_preservation(flat, planar, 0)
    with pytest.raises(KOutOfRangeError):
        neighbor_preservation(flat, planar, 19)


def test_neighbor_preservation_random_baseline(montage64):
    """Randomly relabelled layouts keep a nearest neighbour with probability 1/(n-1)."""
    m = montage64
    base = azimuthal_equidistant(m).coords2d
    rng = np.random.default_rng(5)
    scores = [
        neighbor_preservation(CoordinateMap2D(m.labels, base[rng.permutation(64)], "shuffled"), m, 1)
        for _ in range(1000)
    ]
    mean, se = np.mean(scores), np.std(scores) / np.sqrt(len(scores))
    assert abs(mean - 1 / 63) < 4 * se


def test_coordinate_csv_round_trip(montage64):
    c = azimuthal_equidistant(montage64)
    back = CoordinateMap2D.from_csv(c.to_csv())
    assert back.labels == c.labels
    assert back.method == "azimuthal"
    assert back.coords2d.tobytes() == c.coords2d.tobytes()
