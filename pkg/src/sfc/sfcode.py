"""Space-frequency codebooks over OFDM subcarriers.

A chirp sequence generates a unitary circulant whose decimated columns form
the multipath spreading matrix A'.  Inner codewords are frames from the
unitary transfer pipeline (or an Alamouti orthogonal design for the
baseline); the transmitted words are FFT(A' @ inner).
"""

import json

import numpy as np

from .lattices import make_lattice
from .manifold import (
    dimension,
    sphere_log_north,
    stiefel_exp,
    tangent_transfer,
)
from .spherewrap import PROV_RECLAIMED, WrapParams, build_code

SCHEMA_VERSION = 1


class IndivisibleK(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


def chirp(K):
    """Quadratic-phase sequence exp(2*pi*i*k^2/K), unimodular by design."""
    k = np.arange(int(K))
    return np.exp(2j * np.pi * k * k / int(K))


def operators(K):
    """Unitary DFT pair plus the modulation/shift operators on K bins.

    Returns (fft, ifft, mu, tau) as K x K matrices: fft[k,k'] =
    omega^{kk'}/sqrt(K) with omega = exp(-2*pi*i/K), mu = diag(omega^k),
    tau the cyclic down-shift.  They satisfy mu = fft @ tau @ ifft.
    """
    K = int(K)
    k = np.arange(K)
    omega = np.exp(-2j * np.pi / K)
    fft = omega ** np.outer(k, k) / np.sqrt(K)
    ifft = np.conj(fft.T)
    mu = np.diag(omega ** k)
    tau = np.roll(np.eye(K), 1, axis=0)
    return fft, ifft, mu, tau


def build_A(K, L):
    """Multipath spreading matrix: every L-th column of the chirp circulant.

    The circulant built from c = IFFT(chirp)/sqrt(K) is unitary, so the
    full shift family (A', tau A', ..., tau^{L-1} A') is a column
    permutation of it and inherits exact orthonormality.
    """
    K, L = int(K), int(L)
    if K < 1 or L < 1 or K % L:
        raise IndivisibleK(f"L={L} does not divide K={K}")
    T = K // L
    fft, ifft, _, _ = operators(K)
    c = ifft @ chirp(K) / np.sqrt(K)
    A = np.empty((K, T), dtype=complex)
    for j in range(T):
        A[:, j] = np.roll(c, j * L)
    return A


def extend_A(A, K, L):
    """The stacked shift family (A', tau A', ..., tau^{L-1} A'), K x TL."""
    cols = [np.roll(A, l, axis=0) for l in range(int(L))]
    return np.concatenate(cols, axis=1)


class OfdmParams:
    """Subcarrier/tap geometry: K subcarriers, L taps, T = K/L, n_t antennas."""

    def __init__(self, K, L, n_t):
        K, L, n_t = int(K), int(L), int(n_t)
        if K < 1 or L < 1 or K % L:
            raise IndivisibleK(f"L={L} does not divide K={K}")
        if n_t < 1 or K // L < n_t:
            raise ValueError("need 1 <= n_t <= T = K/L")
        self.K, self.L, self.n_t = K, L, n_t

    @property
    def T(self):
        return self.K // self.L

    def __repr__(self):
        return f"OfdmParams(K={self.K}, L={self.L}, n_t={self.n_t})"


class Codebook:
    """Assembled space-frequency code plus enough provenance to decode it.

    words[i] is the K x n_t transmit matrix for message index i; inner[i]
    the corresponding T x n_t frame.  For lattice-built codes the sphere
    points and lattice coefficients ride along, aligned to word order.
    """

    def __init__(self, params, A_prime, inner, words, rate, lattice_meta=None,
                 sphere_points=None, coeffs=None, hemi=None):
        self.params = params
        self.A_prime = A_prime
        self.inner = inner
        self.words = words
        self.rate = rate
        self.lattice_meta = lattice_meta
        self.sphere_points = sphere_points
        self.coeffs = coeffs
        self.hemi = hemi
        self._coeff_index = None

    def __len__(self):
        return len(self.words)

    @property
    def south_index(self):
        if self.coeffs is None:
            return None
        zero = ~self.coeffs.any(axis=1)
        cand = np.nonzero(zero & (self.hemi < 0))[0]
        return int(cand[0]) if len(cand) else None

    def index_of_coeffs(self, c):
        """Word index for integer lattice coordinates (south pole excluded)."""
        if self.coeffs is None:
            return None
        if self._coeff_index is None:
            south = self.south_index
            keep = np.ones(len(self.coeffs), bool)
            if south is not None:
                keep[south] = False
            rows = self.coeffs[keep].astype(np.int16)
            packed = rows.view(f"S{2 * rows.shape[1]}").ravel()
            order = np.argsort(packed)
            self._coeff_index = (packed[order], np.nonzero(keep)[0][order])
        c = np.asarray(c, dtype=np.int16)
        key = c.view(f"S{2 * len(c)}")[0]
        table, idx = self._coeff_index
        pos = np.searchsorted(table, key)
        if pos < len(table) and table[pos] == key:
            return int(idx[pos])
        return None


def _south_tangent(D, n_t):
    # fixed representative for the antipode, where the sphere log is not
    # unique; encode and decode must agree on it.  Spreading pi across all
    # diagonal phase directions keeps the north/south frame difference
    # full rank (a single-axis tangent would only move one column).
    v = np.zeros(D)
    v[:n_t] = np.pi / np.sqrt(n_t)
    return v


def assemble(params, inner, lattice_meta=None, sphere_points=None,
             coeffs=None, hemi=None):
    """FFT(A' @ inner) for every inner frame; rate is log2|C|/K."""
    inner = np.asarray(inner, dtype=complex)
    A = build_A(params.K, params.L)
    fft, _, _, _ = operators(params.K)
    words = np.einsum("kt,ntm->nkm", fft @ A, inner)
    rate = float(np.log2(len(inner)) / params.K)
    return Codebook(params, A, inner, words, rate, lattice_meta=lattice_meta,
                    sphere_points=sphere_points, coeffs=coeffs, hemi=hemi)


def spherical_codebook(K, L, n_t, family, d_S, alpha=0.0, band_width=None,
                       seeds=200_000):
    """Full design pipeline: lattice -> wrapped sphere code -> frames -> words.

    Word order is lexicographic in (lattice coefficients, hemisphere) so the
    message-index mapping is reproducible from the build inputs alone.
    """
    params = OfdmParams(K, L, n_t)
    D = dimension(n_t, params.T)
    lattice = make_lattice(family, D, alpha=alpha, design_distance=d_S)
    wrap = WrapParams(D, d_S, band_width=band_width)
    code = build_code(lattice, wrap, seeds=seeds)
    order = np.lexsort((code.hemi,) + tuple(code.coeffs.T[::-1]))
    pts = code.points[order]
    coeffs = code.coeffs[order]
    hemi = code.hemi[order]

    south = np.arccos(np.clip(pts[:, -1], -1, 1)) > np.pi - 1e-9
    v = np.empty((len(pts), D))
    v[south] = _south_tangent(D, n_t)
    if (~south).any():
        v[~south] = sphere_log_north(pts[~south])
    inner = stiefel_exp(tangent_transfer(v, n_t, params.T), n_t)
    meta = {
        "family": family,
        "d_S": float(lattice.minimal_distance()),
        "alpha": float(alpha),
        "band_width": float(wrap.band_width),
        "seeds": int(seeds),
        "reclaimed": int((code.prov_kind == PROV_RECLAIMED).sum()),
    }
    return assemble(params, inner, lattice_meta=meta, sphere_points=pts,
                    coeffs=coeffs, hemi=hemi)


_PSK = {
    "qpsk": np.exp(2j * np.pi * np.arange(4) / 4),
    "8psk": np.exp(2j * np.pi * np.arange(8) / 8),
}


def alamouti_codebook(scheme, K=4):
    """Alamouti orthogonal design over a PSK constellation (T=2, n_t=2).

    Words are (1/sqrt2) [[s1, s2], [-conj(s2), conj(s1)]] over all ordered
    symbol pairs; every inner word is exactly unitary.
    """
    try:
        const = _PSK[scheme.lower()]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; use qpsk or 8psk")
    params = OfdmParams(K, K // 2, 2)
    M = len(const)
    inner = np.empty((M * M, 2, 2), dtype=complex)
    for a, s1 in enumerate(const):
        for b, s2 in enumerate(const):
            inner[a * M + b] = [[s1, s2], [-np.conj(s2), np.conj(s1)]]
    inner /= np.sqrt(2.0)
    return assemble(params, inner)


def _cplx_to_lists(a):
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _lists_to_cplx(a, shape):
    arr = np.asarray(a, dtype=float)
    if arr.shape != shape + (2,):
        raise SchemaMismatch(f"array shape {arr.shape} != {shape + (2,)}")
    return arr[..., 0] + 1j * arr[..., 1]


def save_codebook(cb, path):
    """Write the canonical JSON form (stable field order, row-major arrays)."""
    p = cb.params
    doc = {
        "schema_version": SCHEMA_VERSION,
        "params": {"K": p.K, "L": p.L, "nt": p.n_t, "T": p.T},
        "lattice": cb.lattice_meta,
        "A_prime": _cplx_to_lists(cb.A_prime),
        "words": _cplx_to_lists(cb.words),
        "rate": cb.rate,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_codebook(path):
    """Read a codebook written by save_codebook, validating the schema."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except ValueError as e:
            raise SchemaMismatch(f"not valid JSON: {e}")
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch("missing or unsupported schema_version")
    for key in ("params", "A_prime", "words", "rate"):
        if key not in doc:
            raise SchemaMismatch(f"missing field {key!r}")
    try:
        params = OfdmParams(doc["params"]["K"], doc["params"]["L"],
                            doc["params"]["nt"])
    except (KeyError, TypeError) as e:
        raise SchemaMismatch(f"bad params block: {e}")
    A = _lists_to_cplx(doc["A_prime"], (params.K, params.T))
    words = np.asarray(doc["words"], dtype=float)
    if words.ndim != 4 or words.shape[1:] != (params.K, params.n_t, 2):
        raise SchemaMismatch(f"bad words shape {words.shape}")
    words = words[..., 0] + 1j * words[..., 1]
    fft, ifft, _, _ = operators(params.K)
    inner = np.einsum("tk,nkm->ntm", np.conj(A.T) @ np.conj(fft.T), words)
    cb = Codebook(params, A, inner, words, float(doc["rate"]),
                  lattice_meta=doc.get("lattice"))
    return cb
