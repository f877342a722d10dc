"""Pairwise separation metrics for space-frequency codebooks.

For a word difference Delta the tap-domain quantities (d_T, p_T) and their
frequency-domain counterparts (d_F, p_F) come from the multipath extension
(Delta, mu Delta, ..., mu^{L-1} Delta); full diversity of a codebook means
the worst pair still has a nonvanishing extended determinant.
"""

from dataclasses import dataclass, asdict

import numpy as np


def mu_phases(K):
    """Diagonal of the modulation operator: exp(-2*pi*i*k/K)."""
    return np.exp(-2j * np.pi * np.arange(int(K)) / int(K))


def multipath_extension(delta, L):
    """Stack (Delta, mu Delta, ..., mu^{L-1} Delta) into K x (n_t L)."""
    delta = np.asarray(delta, dtype=complex)
    mu = mu_phases(delta.shape[0])
    return np.concatenate([(mu ** l)[:, None] * delta for l in range(int(L))],
                          axis=1)


def pair_metrics(phi, psi, L, rho=1.0, n_r=1):
    """All pairwise design quantities for one word pair.

    Returns a dict with tap metrics (d_T, p_T), frequency metrics
    (d_F, p_F), the elementary symmetric coefficients s of the extended
    squared singular values, the diversity polynomial value Div_F at
    rho_F = rho*K/(4*n_t*L), the Chernov factor ch_F = Div_F^{-n_r}, and
    the worst modulated-orthogonality residual.
    """
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    K, n_t = phi.shape
    delta = phi - psi
    ext = multipath_extension(delta, L)
    gram_t = np.conj(delta.T) @ delta
    gram_f = np.conj(ext.T) @ ext
    d_T = float(np.linalg.norm(delta))
    p_T2 = max(float(np.linalg.det(gram_t).real), 0.0)
    p_F2 = max(float(np.linalg.det(gram_f).real), 0.0)
    sig2 = np.clip(np.linalg.eigvalsh(gram_f), 0.0, None)
    s = np.poly(-sig2).real  # (1, e_1, e_2, ...): elementary symmetric sums
    rho_F = rho * K / (4.0 * n_t * L)
    div_F = float(np.sum(s * rho_F ** np.arange(len(s))))
    mu = mu_phases(K)
    orth = 0.0
    for l in range(1, int(L)):
        orth = max(orth, float(np.linalg.norm(
            np.conj(delta.T) @ ((mu ** l)[:, None] * delta))))
    return {
        "d_T": d_T,
        "p_T": float(np.sqrt(p_T2)),
        "d_F": float(np.sqrt(L) * d_T),
        "p_F": float(np.sqrt(p_F2)),
        "s": s,
        "sigma_sq": sig2,
        "div_F": div_F,
        "ch_F": float(div_F ** (-float(n_r))) if div_F > 0 else np.inf,
        "orth_residual": orth,
    }


@dataclass
class DiversityReport:
    words: int
    pairs: int
    exhaustive: bool
    sample_seed: int | None
    min_d_T: float
    min_p_T: float
    min_d_F: float
    min_p_F: float
    max_orth_residual: float
    max_fischer_rel: float | None
    worst_pair: tuple
    full_diversity: bool
    threshold: float

    def to_dict(self):
        d = asdict(self)
        d["worst_pair"] = list(d["worst_pair"])
        return d


def _pair_blocks(n, cap, sample_pairs, rng):
    if n <= cap:
        for i in range(n - 1):
            yield np.full(n - 1 - i, i), np.arange(i + 1, n)
        return
    block = 4096
    done = 0
    while done < sample_pairs:
        m = min(block, sample_pairs - done)
        ii = rng.integers(0, n, m)
        jj = rng.integers(0, n, m)
        keep = ii != jj
        yield ii[keep], jj[keep]
        done += m


def codebook_report(cb, rho=1.0, n_r=1, threshold=1e-8, pair_cap=2048,
                    sample_pairs=200_000, seed=20260816):
    """Minima of the pair metrics over a codebook.

    Exhaustive for codebooks up to pair_cap words, otherwise a seeded
    random sample of pairs (flagged in the report).
    """
    words = np.asarray(cb.words)
    n, K, n_t = words.shape
    L = cb.params.L
    if n < 2:
        raise ValueError("need at least two words")
    mu = mu_phases(K)
    powers = np.stack([mu ** l for l in range(L)])
    ext = np.concatenate([powers[l][None, :, None] * words
                          for l in range(L)], axis=2)
    exhaustive = n <= pair_cap
    rng = np.random.default_rng(seed)

    best = {"d_T": np.inf, "p_T": np.inf, "p_F": np.inf}
    worst_pair = (0, 0)
    max_orth = 0.0
    max_fischer = None
    pairs = 0
    for ii, jj in _pair_blocks(n, pair_cap, sample_pairs, rng):
        if not len(ii):
            continue
        pairs += len(ii)
        d = words[ii] - words[jj]
        de = ext[ii] - ext[jj]
        dT2 = np.einsum("bkt,bkt->b", np.conj(d), d).real
        gt = np.einsum("bkt,bks->bts", np.conj(d), d)
        gf = np.einsum("bkt,bks->bts", np.conj(de), de)
        pT2 = np.clip(np.linalg.det(gt).real, 0.0, None)
        pF2 = np.clip(np.linalg.det(gf).real, 0.0, None)
        for l in range(1, L):
            r = np.einsum("bkt,k,bks->bts", np.conj(d), powers[l], d)
            max_orth = max(max_orth, float(
                np.sqrt(np.sum(np.abs(r) ** 2, axis=(1, 2)).max())))
        qual = pT2 > 1e-12
        if qual.any():
            rel = np.abs(pF2[qual] - pT2[qual] ** L) / pT2[qual] ** L
            m = float(rel.max())
            max_fischer = m if max_fischer is None else max(max_fischer, m)
        k = int(np.argmin(pF2))
        if pF2[k] < best["p_F"]:
            best["p_F"] = float(pF2[k])
            worst_pair = (int(ii[k]), int(jj[k]))
        best["d_T"] = min(best["d_T"], float(dT2.min()))
        best["p_T"] = min(best["p_T"], float(pT2.min()))

    min_dT = float(np.sqrt(best["d_T"]))
    min_pF = float(np.sqrt(best["p_F"]))
    return DiversityReport(
        words=n,
        pairs=pairs,
        exhaustive=exhaustive,
        sample_seed=None if exhaustive else seed,
        min_d_T=min_dT,
        min_p_T=float(np.sqrt(best["p_T"])),
        min_d_F=float(np.sqrt(L) * min_dT),
        min_p_F=min_pF,
        max_orth_residual=max_orth,
        max_fischer_rel=max_fischer,
        worst_pair=worst_pair,
        full_diversity=bool(min_pF > threshold),
        threshold=threshold,
    )
