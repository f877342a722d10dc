import json

import numpy as np
import pytest

from sfc import sfcode
from sfc.manifold import project_stiefel

rng = np.random.default_rng(20260816)


def test_chirp_small_values():
    assert np.allclose(sfcode.chirp(1), [1.0])
    assert np.allclose(sfcode.chirp(4), [1, 1j, 1, 1j], atol=1e-12)


def test_chirp_unimodular():
    for K in range(2, 65):
        assert np.abs(np.abs(sfcode.chirp(K)) - 1).max() < 1e-12


def test_operators_k2():
    fft, ifft, mu, tau = sfcode.operators(2)
    s = 1 / np.sqrt(2)
    assert np.allclose(fft, [[s, s], [s, -s]], atol=1e-12)
    assert np.allclose(tau, [[0, 1], [1, 0]])
    assert np.allclose(mu, np.diag([1, -1]), atol=1e-12)


@pytest.mark.parametrize("K", [2, 3, 4, 8, 12])
def test_operator_identities(K):
    fft, ifft, mu, tau = sfcode.operators(K)
    assert np.abs(fft @ ifft - np.eye(K)).max() < 1e-12
    assert np.abs(mu - fft @ tau @ ifft).max() < 1e-12
    assert np.abs(np.linalg.matrix_power(tau, K) - np.eye(K)).max() == 0


def test_build_A_k2():
    A = sfcode.build_A(2, 1)
    assert np.abs(A - np.array([[0, 1], [1, 0]])).max() < 1e-12


@pytest.mark.parametrize("K,L", [(2, 1), (4, 2), (8, 2), (8, 4), (12, 3)])
def test_A_columns_orthonormal(K, L):
    A = sfcode.build_A(K, L)
    T = K // L
    assert A.shape == (K, T)
    assert np.abs(np.conj(A.T) @ A - np.eye(T)).max() < 1e-12


def test_extended_A_unitary():
    A = sfcode.build_A(8, 2)
    E = sfcode.extend_A(A, 8, 2)
    assert np.abs(np.conj(E.T) @ E - np.eye(8)).max() < 1e-10


def test_indivisible_raises():
    with pytest.raises(sfcode.IndivisibleK):
        sfcode.build_A(8, 3)
    with pytest.raises(sfcode.IndivisibleK):
        sfcode.OfdmParams(8, 3, 2)
    with pytest.raises(ValueError):
        sfcode.OfdmParams(4, 2, 3)  # n_t > T


def _random_frames(n, T, n_t):
    z = rng.normal(size=(n, T, n_t)) + 1j * rng.normal(size=(n, T, n_t))
    return np.stack([project_stiefel(f) for f in z])


def test_assemble_words_unitary():
    params = sfcode.OfdmParams(8, 2, 2)
    inner = _random_frames(32, 4, 2)
    cb = sfcode.assemble(params, inner)
    g = np.einsum("nkt,nks->nts", np.conj(cb.words), cb.words)
    assert np.abs(g - np.eye(2)).max() < 1e-9
    assert cb.rate == pytest.approx(np.log2(32) / 8)


def test_rate_one_at_256_words():
    params = sfcode.OfdmParams(8, 2, 2)
    cb = sfcode.assemble(params, _random_frames(256, 4, 2))
    assert cb.rate == pytest.approx(1.0)


def test_alamouti_counts_and_rates():
    q = sfcode.alamouti_codebook("qpsk")
    assert len(q) == 16 and q.params.K == 4
    assert q.rate == pytest.approx(1.0)
    e = sfcode.alamouti_codebook("8psk")
    assert len(e) == 64
    assert e.rate == pytest.approx(1.5)
    g = np.einsum("nkt,nks->nts", np.conj(e.words), e.words)
    assert np.abs(g - np.eye(2)).max() < 1e-12
    with pytest.raises(ValueError):
        sfcode.alamouti_codebook("16qam")


@pytest.fixture(scope="module")
def small_cb():
    return sfcode.spherical_codebook(8, 2, 2, "K12", 1.2, alpha=np.pi / 2,
                                     seeds=50_000)


def test_spherical_codebook_structure(small_cb):
    cb = small_cb
    assert len(cb) >= 4
    assert cb.words.shape == (len(cb), 8, 2)
    g = np.einsum("nkt,nks->nts", np.conj(cb.words), cb.words)
    assert np.abs(g - np.eye(2)).max() < 1e-9
    # unit sphere points aligned with words
    assert np.abs(np.linalg.norm(cb.sphere_points, axis=1) - 1).max() < 1e-12
    assert cb.lattice_meta["family"] == "K12"


def test_word_order_is_lexicographic(small_cb):
    cb = small_cb
    order = np.lexsort((cb.hemi,) + tuple(cb.coeffs.T[::-1]))
    assert np.array_equal(order, np.arange(len(cb)))


def test_coeff_lookup_round_trip(small_cb):
    cb = small_cb
    south = cb.south_index
    assert south is not None
    assert cb.hemi[south] < 0 and not cb.coeffs[south].any()
    for i in range(len(cb)):
        if i == south:
            continue
        assert cb.index_of_coeffs(cb.coeffs[i]) == i
    assert cb.index_of_coeffs(np.full(12, 999)) is None


def test_spherical_codebook_deterministic(small_cb):
    again = sfcode.spherical_codebook(8, 2, 2, "K12", 1.2, alpha=np.pi / 2,
                                      seeds=50_000)
    assert np.array_equal(again.words, small_cb.words)
    assert np.array_equal(again.coeffs, small_cb.coeffs)


def test_save_load_round_trip(small_cb, tmp_path):
    path = tmp_path / "code.json"
    sfcode.save_codebook(small_cb, path)
    cb = sfcode.load_codebook(path)
    assert cb.params.K == 8 and cb.params.L == 2 and cb.params.n_t == 2
    assert np.abs(cb.words - small_cb.words).max() < 1e-12
    assert np.abs(cb.A_prime - small_cb.A_prime).max() < 1e-12
    assert cb.rate == small_cb.rate
    assert np.abs(cb.inner - small_cb.inner).max() < 1e-10
    assert cb.lattice_meta == small_cb.lattice_meta


def test_save_is_byte_stable(small_cb, tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    sfcode.save_codebook(small_cb, p1)
    sfcode.save_codebook(small_cb, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_bad_files(small_cb, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    with pytest.raises(sfcode.SchemaMismatch):
        sfcode.load_codebook(p)

    sfcode.save_codebook(small_cb, p)
    doc = json.loads(p.read_text())

    bad = dict(doc, schema_version=99)
    p.write_text(json.dumps(bad))
    with pytest.raises(sfcode.SchemaMismatch):
        sfcode.load_codebook(p)

    bad = {k: v for k, v in doc.items() if k != "words"}
    p.write_text(json.dumps(bad))
    with pytest.raises(sfcode.SchemaMismatch):
        sfcode.load_codebook(p)

    bad = dict(doc, A_prime=doc["A_prime"][:3])
    p.write_text(json.dumps(bad))
    with pytest.raises(sfcode.SchemaMismatch):
        sfcode.load_codebook(p)
