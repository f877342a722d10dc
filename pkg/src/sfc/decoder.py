"""Maximum-likelihood and lattice-assisted decoding of space-frequency words.

The lattice decoder runs the encode pipeline backwards: zero-force each
subcarrier, undo the spreading, project to the nearest frame, pull back
through the frame/sphere logs, unwrap to the lattice, and round.  The
resulting candidate and its precomputed sphere neighbours feed a small
exact-ML comparison; any stage failure falls back to exhaustive ML.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .lattices import make_lattice
from .manifold import (
    NotConverged,
    coords_from_omega,
    dimension,
    project_stiefel,
    sphere_exp_north,
    stiefel_log,
)
from .sfcode import operators
from .spherewrap import WrapParams, unwrap_point


class SingularSubcarrier(RuntimeError):
    """A per-tone channel matrix is too ill-conditioned to zero-force."""

    def __init__(self, k):
        super().__init__(f"subcarrier {k} is singular")
        self.k = k


@dataclass
class DecodeResult:
    index: int
    method: str  # "ML", "lattice", "lattice-fallback-ML", "lattice-nofallback"
    metric: float
    diagnostics: dict = field(default_factory=dict)


def _apply_channel(words, h_hat):
    """word rows through the per-tone channel: (n, K, n_t) -> (n, K, n_r)."""
    K = h_hat.shape[0]
    out = np.empty(words.shape[:2] + (h_hat.shape[2],), dtype=complex)
    for k in range(K):
        out[:, k, :] = words[:, k, :] @ h_hat[k]
    return out


def ml_metrics(received, h_hat, words, rho):
    """Squared distance of the received tones to every candidate word."""
    words = np.asarray(words)
    n_t = words.shape[2]
    s = np.sqrt(rho * h_hat.shape[0] / n_t)
    diff = received[None, :, :] - s * _apply_channel(words, h_hat)
    return np.einsum("nkr,nkr->n", np.conj(diff), diff).real


def ml_decode(received, h_hat, words, rho):
    """Exhaustive ML over the word list; ties go to the lowest index."""
    m = ml_metrics(received, h_hat, words, rho)
    i = int(np.argmin(m))
    return DecodeResult(i, "ML", float(m[i]), {"candidates": len(words)})


def zf_front_end(received, h_hat, rho, cond_limit=1e12):
    """Per-tone zero-forcing estimate of the transmitted word rows.

    Needs n_r >= n_t; raises SingularSubcarrier when any tone's Gram
    matrix H_k H_k^* is ill-conditioned beyond cond_limit.
    """
    K, n_t, n_r = h_hat.shape
    if n_r < n_t:
        raise ValueError("zero-forcing needs n_r >= n_t")
    gram = np.einsum("ktr,ksr->kts", h_hat, np.conj(h_hat))
    cond = np.linalg.cond(gram)
    if not np.all(cond < cond_limit):
        raise SingularSubcarrier(int(np.argmax(~(cond < cond_limit))))
    y = np.einsum("kr,ktr->kt", received, np.conj(h_hat))
    phi = np.linalg.solve(np.conj(gram), y[..., None])[..., 0]
    return phi / np.sqrt(rho * K / n_t)


class DecoderContext:
    """Per-codebook state for lattice decoding.

    Rebuilds the design lattice from the codebook's construction record and
    precomputes, for every word, the sphere neighbours within geodesic
    distance 2*d_S (capped at max_neighbors) that bound the final ML step.
    """

    def __init__(self, cb, max_neighbors=30):
        if cb.sphere_points is None or cb.coeffs is None or not cb.lattice_meta:
            raise ValueError("codebook lacks lattice provenance")
        self.cb = cb
        self.max_neighbors = max_neighbors
        p = cb.params
        D = dimension(p.n_t, p.T)
        meta = cb.lattice_meta
        self.lattice = make_lattice(meta["family"], D, alpha=meta["alpha"],
                                    design_distance=meta["d_S"])
        self.wrap = WrapParams(D, meta["d_S"], band_width=meta["band_width"])
        fft, _, _, _ = operators(p.K)
        self.pre = np.conj(cb.A_prime.T) @ np.conj(fft.T)
        self.tree = cKDTree(cb.sphere_points)
        # geodesic 2*d_S converted to chord length, the neighbour cutoff
        self.chord = 2.0 * np.sin(min(meta["d_S"], np.pi / 2)) + 1e-9
        extra = [cb.index_of_coeffs(np.zeros(D, dtype=np.int64)),
                 cb.south_index]
        self.pole_indices = np.array(sorted({e for e in extra if e is not None}),
                                     dtype=np.int64)
        self._nb_cache = {}

    def candidates_for(self, index):
        cand = self._nb_cache.get(index)
        if cand is None:
            k = min(self.max_neighbors + 1, len(self.cb))
            dist, idx = self.tree.query(self.cb.sphere_points[index], k=k)
            idx = np.atleast_1d(idx)
            dist = np.atleast_1d(dist)
            cand = np.union1d(idx[dist <= self.chord], self.pole_indices)
            self._nb_cache[index] = cand
        return cand


def _pipeline_candidate(ctx, received, h_hat, rho, log_tol, log_max_iter):
    """Run the inverse pipeline; returns (index, diagnostics) or (None, diag)."""
    diag = {"stiefel_log_converged": False, "in_buffer": False,
            "stage": "zf"}
    cb = ctx.cb
    p = cb.params
    try:
        phi_hat = zf_front_end(received, h_hat, rho)
    except SingularSubcarrier:
        return None, diag
    frame = project_stiefel(ctx.pre @ phi_hat)
    diag["stage"] = "log"
    try:
        omega = stiefel_log(frame, tol=log_tol, max_iter=log_max_iter)
    except NotConverged:
        return None, diag
    diag["stiefel_log_converged"] = True
    v = coords_from_omega(omega, p.n_t, p.T)
    r = np.linalg.norm(v)
    if r > np.pi:  # guard the fp fringe of the log's norm contract
        v = v * (np.pi / r)
    q = sphere_exp_north(v)
    diag["sphere_point"] = q
    diag["stage"] = "unwrap"
    if np.arccos(np.clip(q[-1], -1.0, 1.0)) > np.pi - 1e-9:
        idx = cb.south_index
        diag["stage"] = "done" if idx is not None else "south-missing"
        return idx, diag
    x, in_buf, _ = unwrap_point(ctx.wrap, q, project=False)
    diag["in_buffer"] = in_buf
    coeffs = ctx.lattice.closest_point(x).coeffs
    idx = cb.index_of_coeffs(coeffs)
    diag["stage"] = "done" if idx is not None else "unmapped"
    return idx, diag


def lattice_decode(received, h_hat, ctx, rho, fallback=True,
                   log_tol=1e-8, log_max_iter=60):
    """Lattice-assisted decode; exact ML over the candidate neighbourhood.

    With fallback enabled any pipeline failure re-decodes with exhaustive
    ML (method "lattice-fallback-ML").  With fallback disabled the decoder
    commits to the nearest sphere point when the lattice lookup misses, or
    to index 0 when no sphere estimate exists at all.
    """
    cb = ctx.cb
    idx, diag = _pipeline_candidate(ctx, received, h_hat, rho, log_tol,
                                    log_max_iter)
    if idx is None:
        if fallback:
            res = ml_decode(received, h_hat, cb.words, rho)
            return DecodeResult(res.index, "lattice-fallback-ML", res.metric,
                                dict(diag, candidates=len(cb)))
        q = diag.pop("sphere_point", None)
        if q is not None:
            idx = int(ctx.tree.query(q)[1])
        else:
            return DecodeResult(0, "lattice-nofallback", np.inf, diag)
    diag.pop("sphere_point", None)
    cand = ctx.candidates_for(idx)
    metrics = ml_metrics(received, h_hat, cb.words[cand], rho)
    j = int(np.argmin(metrics))
    method = "lattice" if fallback else "lattice-nofallback"
    return DecodeResult(int(cand[j]), method, float(metrics[j]),
                        dict(diag, candidates=len(cand)))
