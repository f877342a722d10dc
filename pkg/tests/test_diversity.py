import numpy as np
import pytest

from sfc import diversity, sfcode
from sfc.manifold import project_stiefel

rng = np.random.default_rng(20260816)


def _random_frames(n, T, n_t):
    z = rng.normal(size=(n, T, n_t)) + 1j * rng.normal(size=(n, T, n_t))
    return np.stack([project_stiefel(f) for f in z])


def test_multipath_extension_layout():
    delta = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    ext = diversity.multipath_extension(delta, 2)
    mu = np.exp(-2j * np.pi * np.arange(4) / 4)
    assert ext.shape == (4, 4)
    assert np.allclose(ext[:, :2], delta)
    assert np.allclose(ext[:, 2:], mu[:, None] * delta)


def test_identical_words_are_degenerate():
    phi = _random_frames(1, 4, 2)[0]
    m = diversity.pair_metrics(phi, phi, 2)
    assert m["d_T"] == 0 and m["p_T"] == 0 and m["p_F"] == 0
    assert m["orth_residual"] == 0
    assert m["div_F"] == pytest.approx(1.0)
    assert m["ch_F"] == pytest.approx(1.0)


def test_df_scales_dt():
    a, b = _random_frames(2, 4, 2)
    m = diversity.pair_metrics(a, b, 2)
    assert m["d_F"] == pytest.approx(np.sqrt(2) * m["d_T"])


def test_symmetric_coefficients_match_gram():
    a, b = _random_frames(2, 4, 2)
    ext = diversity.multipath_extension(a - b, 2)
    m = diversity.pair_metrics(a, b, 2)
    assert m["s"][0] == pytest.approx(1.0)
    assert m["s"][1] == pytest.approx(np.linalg.norm(ext) ** 2, rel=1e-8)
    assert m["s"][-1] == pytest.approx(m["p_F"] ** 2, rel=1e-8)


def test_diversity_polynomial_matches_product_form():
    a, b = _random_frames(2, 4, 2)
    m = diversity.pair_metrics(a, b, 2, rho=3.7)
    rho_F = 3.7 * 4 / (4 * 2 * 2)
    direct = np.prod(1.0 + rho_F * m["sigma_sq"])
    assert m["div_F"] == pytest.approx(direct, rel=1e-10)


def test_chernov_exponent_uses_receive_count():
    a, b = _random_frames(2, 4, 2)
    m1 = diversity.pair_metrics(a, b, 2, rho=2.0, n_r=1)
    m2 = diversity.pair_metrics(a, b, 2, rho=2.0, n_r=3)
    assert m2["ch_F"] == pytest.approx(m1["ch_F"] ** 3, rel=1e-10)


def test_assembled_words_are_modulation_orthogonal():
    # words built on the decimated chirp circulant satisfy
    # delta^* mu^l delta = 0 for 0 < l < L exactly
    params = sfcode.OfdmParams(8, 2, 2)
    cb = sfcode.assemble(params, _random_frames(6, 4, 2))
    for i in range(3):
        m = diversity.pair_metrics(cb.words[i], cb.words[i + 3], 2)
        assert m["orth_residual"] < 1e-12
        assert m["p_F"] ** 2 == pytest.approx((m["p_T"] ** 2) ** 2, rel=1e-8)


def _alamouti_delta_oracle(s, t):
    # difference of two Alamouti blocks is again an Alamouti block
    a = s[0] - t[0]
    b = s[1] - t[1]
    e2 = abs(a) ** 2 + abs(b) ** 2
    return np.sqrt(e2), e2 / 2


def test_alamouti_pair_oracle():
    cb = sfcode.alamouti_codebook("qpsk")
    const = np.exp(2j * np.pi * np.arange(4) / 4)
    i, j = 1, 14  # symbol pairs (0,1) and (3,2)
    s = (const[i // 4], const[i % 4])
    t = (const[j // 4], const[j % 4])
    d_T, p_T = _alamouti_delta_oracle(s, t)
    m = diversity.pair_metrics(cb.inner[i], cb.inner[j], cb.params.L)
    assert m["d_T"] == pytest.approx(d_T, rel=1e-12)
    assert m["p_T"] == pytest.approx(p_T, rel=1e-12)


def test_qpsk_alamouti_report_frozen():
    cb = sfcode.alamouti_codebook("qpsk")
    rep = diversity.codebook_report(cb)
    assert rep.exhaustive and rep.pairs == 16 * 15 // 2
    assert rep.min_d_T == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert rep.min_p_T == pytest.approx(1.0, rel=1e-12)
    assert rep.min_p_F == pytest.approx(1.0, rel=1e-9)
    assert rep.max_orth_residual < 1e-12
    assert rep.full_diversity


def test_report_flags_duplicate_word():
    params = sfcode.OfdmParams(8, 2, 2)
    frames = _random_frames(5, 4, 2)
    frames[3] = frames[0]
    rep = diversity.codebook_report(sfcode.assemble(params, frames))
    assert rep.min_p_F == 0.0
    assert not rep.full_diversity
    assert tuple(sorted(rep.worst_pair)) == (0, 3)


def test_sampled_report_is_flagged_and_consistent():
    cb = sfcode.alamouti_codebook("8psk")
    full = diversity.codebook_report(cb)
    sub = diversity.codebook_report(cb, pair_cap=16, sample_pairs=3000, seed=7)
    assert full.exhaustive and not sub.exhaustive
    assert sub.sample_seed == 7
    assert sub.min_p_F >= full.min_p_F - 1e-12
    assert sub.pairs > 0


def test_fischer_residual_reported():
    params = sfcode.OfdmParams(8, 2, 2)
    rep = diversity.codebook_report(sfcode.assemble(params, _random_frames(8, 4, 2)))
    assert rep.max_fischer_rel is not None
    assert rep.max_fischer_rel < 1e-8


def test_report_serializes():
    rep = diversity.codebook_report(sfcode.alamouti_codebook("qpsk"))
    d = rep.to_dict()
    assert d["words"] == 16
    assert isinstance(d["worst_pair"], list)
