import collections

import numpy as np
import pytest

from sfc import lattices as lat


RNG = np.random.default_rng(20260816)


def gram_det(l):
    return np.linalg.det(l.generator @ l.generator.T)


def test_generator_gram_determinants():
    # frozen: squared covolumes of the unscaled generators
    cases = {
        ("Zn", 12): 1.0,
        ("An", 12): 13.0,
        ("Dn", 12): 4.0,
        ("An_dual", 12): 1.0 / 13.0,
        ("Dn_dual", 12): 0.25,
        ("E8", 8): 1.0,
        ("K12", 12): 729.0,
        ("BW16", 16): 256.0,
    }
    for (fam, n), expect in cases.items():
        l = lat.Lattice(fam, n)
        assert np.isclose(gram_det(l), expect, rtol=1e-9), fam


def test_minimal_norms_and_kissing():
    cases = {
        ("Zn", 12): (1.0, 24),
        ("An", 12): (2.0, 156),
        ("Dn", 12): (2.0, 264),
        ("E8", 8): (2.0, 240),
        ("K12", 12): (4.0, 756),
        ("BW16", 16): (4.0, 4320),
        ("An_dual", 12): (12.0 / 13.0, 26),
        ("Dn_dual", 12): (1.0, 24),
    }
    for (fam, n), (m2, kiss) in cases.items():
        l = lat.Lattice(fam, n)
        assert np.isclose(l.minimal_distance() ** 2, m2, rtol=1e-9), fam
        sv = l.short_vectors(l.minimal_distance() * (1 + 1e-9))
        assert len(sv) == kiss, fam


def test_golay_weight_distribution():
    rows = lat._golay_rows()
    assert rows.shape == (12, 24)
    words = (np.arange(4096)[:, None] >> np.arange(12)[None, :]) & 1
    weights = collections.Counter((words @ rows % 2).sum(axis=1).tolist())
    assert dict(weights) == {0: 1, 8: 759, 12: 2576, 16: 759, 24: 1}


@pytest.mark.slow
def test_leech_validates_by_enumeration():
    l = lat.Lattice("Leech24", 24)
    assert np.isclose(gram_det(l), 1.0, rtol=1e-9)
    assert np.isclose(l.minimal_distance() ** 2, 4.0, rtol=1e-9)
    sv = l.short_vectors(2.0 * (1 + 1e-9))
    assert len(sv) == 196560


def test_rotation_matrix_properties():
    assert np.array_equal(lat.rotation_matrix(12, 0.0), np.eye(12))
    for n, a in [(2, 0.7), (12, np.pi / 2), (5, -1.3)]:
        r = lat.rotation_matrix(n, a)
        assert np.allclose(r @ r.T, np.eye(n), atol=1e-12)
        assert np.allclose(r @ np.ones(n), np.ones(n), atol=1e-12)
        assert np.isclose(np.linalg.det(r), 1.0, atol=1e-9)
    # a nonzero angle actually moves generic vectors
    r = lat.rotation_matrix(12, np.pi / 2)
    e1 = np.eye(12)[0]
    assert np.linalg.norm(r @ e1 - e1) > 0.1


def test_design_distance_scaling():
    assert np.isclose(lat.make_lattice("Zn", 12, design_distance=0.5).scale, 0.5)
    assert np.isclose(lat.make_lattice("Dn", 12, design_distance=0.5).scale,
                      0.5 / np.sqrt(2.0))
    l = lat.make_lattice("K12", 12, design_distance=0.37, alpha=0.9)
    assert np.isclose(l.minimal_distance(), 0.37, rtol=1e-9)


def test_box_enumeration_z2():
    l = lat.Lattice("Zn", 2)
    pts = l.enumerate_in_box([-1.0, -1.0], [1.0, 1.0])
    assert len(pts) == 9  # closed box keeps the boundary
    coeffs = np.array([p.coeffs for p in pts])
    # deterministic lexicographic order
    assert coeffs.tolist() == sorted(coeffs.tolist())
    empty = l.enumerate_in_box([0.2, 0.2], [0.8, 0.8])
    assert empty == []
    with pytest.raises(lat.BoxTooLarge):
        l.enumerate_in_box([-4000.0, -4000.0], [4000.0, 4000.0], cap=1000)
    with pytest.raises(ValueError):
        l.enumerate_in_box([1.0, 0.0], [0.0, 1.0])


def test_closest_point_tie_breaks_lexicographic():
    l = lat.Lattice("Zn", 12)
    x = np.zeros(12)
    x[0] = 0.5
    assert np.array_equal(l.closest_point(x).coeffs, np.zeros(12, dtype=np.int64))
    x[0] = -0.5  # tie between 0 and -1; -1 is lexicographically smaller
    assert l.closest_point(x).coeffs[0] == -1


def _generic_cvp(l, x):
    L, Q = l._lq()
    seed = l.nearest_plane(x[None, :])[0]
    c, _ = lat._cvp_dfs(L, l.to_base_frame(x) @ Q.T, seed)
    return c


def test_fast_decoders_match_generic_search():
    for fam, n in [("Zn", 8), ("Dn", 8), ("An", 8), ("An", 5)]:
        l = lat.Lattice(fam, n, scale=0.7, alpha=0.3)
        for _ in range(150):
            x = RNG.uniform(-4, 4, n)
            pf = l.closest_point(x)
            cg = _generic_cvp(l, x)
            df = np.sum((pf.embedding - x) ** 2)
            dg = np.sum((l.embed(cg) - x) ** 2)
            assert np.isclose(df, dg, atol=1e-9), (fam, x)


def test_closest_point_matches_box_oracle():
    # exact CVP cross-checked against exhaustive enumeration in a ball
    l = lat.Lattice("K12", 12, scale=0.5, alpha=np.pi / 2)
    for _ in range(12):
        anchor = l.embed(RNG.integers(-2, 3, 12))
        x = anchor + RNG.uniform(-0.25, 0.25, 12)
        p = l.closest_point(x)
        d = np.linalg.norm(p.embedding - x)
        cands = l.enumerate_in_box(x - d - 1e-9, x + d + 1e-9)
        dmin = min(np.linalg.norm(c.embedding - x) for c in cands)
        assert np.isclose(d, dmin, atol=1e-9)


def test_nearest_plane_within_covering_bound():
    l = lat.Lattice("K12", 12, scale=0.5, alpha=0.4)
    bound = l.covering_radius_bound()
    xs = RNG.uniform(-3, 3, (300, 12))
    coeffs = l.nearest_plane(xs)
    errs = np.linalg.norm(coeffs @ l.basis - xs, axis=1)
    assert errs.max() <= bound + 1e-12


def test_an_gram_is_path_laplacian_like():
    l = lat.Lattice("An", 6)
    g = l.generator @ l.generator.T
    expect = 2 * np.eye(6) - np.diag(np.ones(5), 1) - np.diag(np.ones(5), -1)
    assert np.allclose(g, expect, atol=1e-12)


def test_dual_gram_is_inverse():
    for fam in ["An", "Dn"]:
        g = lat.Lattice(fam, 9).generator
        gd = lat.Lattice(fam + "_dual", 9).generator
        assert np.allclose(gd @ gd.T, np.linalg.inv(g @ g.T), atol=1e-10)


def test_unsupported_lattices_raise():
    with pytest.raises(lat.UnsupportedLattice):
        lat.Lattice("E8", 12)
    with pytest.raises(lat.UnsupportedLattice):
        lat.Lattice("K12", 8)
    with pytest.raises(lat.UnsupportedLattice):
        lat.Lattice("Foo", 4)
    with pytest.raises(lat.UnsupportedLattice):
        lat.Lattice("Dn", 2)


def test_short_vectors_radius_contract():
    l = lat.Lattice("Dn", 6, scale=0.3)
    sv = l.short_vectors(0.9)
    norms = np.linalg.norm(sv @ l.basis, axis=1)
    assert len(sv) > 0
    assert norms.max() <= 0.9 + 1e-9
    assert np.all(np.any(sv != 0, axis=1))
