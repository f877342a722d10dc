"""Wrapped spherical codes on S^D built from a scaled lattice.

The map lays the lattice onto latitude bands of the sphere, recursing one
dimension at a time: the last coordinate z of x = (y, z) becomes the
colatitude, and y (magnified by the reference latitude 1/sin a_i of the
band) is wrapped onto the subsphere one dimension down.  Bands are
separated by buffer zones so that distinct images stay at least the design
distance d_S apart; a reclamation pass greedily re-admits buffered points
that happen to be far from everything.

All geometric zones (pole cap, band widths, buffers, the seam of the base
circle, the equator margin) scale with the *effective* design distance
d_S / prod(sin a_ref) of the recursion level, which is what makes the
pairwise-distance guarantee hold after the tangential magnification.
"""

import hashlib
import math

import numpy as np

from .lattices import BoxTooLarge


IN_DOMAIN = 0
IN_BUFFER = 1
OUT_OF_DOMAIN = 2

_PROV_N = 0
_PROV_S = 1
_PROV_BAND = 2
_PROV_RECLAIMED = 3

PROV_NORTH, PROV_SOUTH, PROV_BAND, PROV_RECLAIMED = (
    _PROV_N, _PROV_S, _PROV_BAND, _PROV_RECLAIMED)


class EmptyCode(RuntimeError):
    """No code point survived construction."""


class MinDistanceViolation(RuntimeError):
    """Internal consistency check failed: two code points too close."""


class WrapParams:
    """Geometry of the wrapping: dimension, design distance, band width.

    band_width is in radians at the top level (default 4*d_S); buffers are
    one d_S wide, the pole cap has radius d_S, and bands are truncated at
    colatitude pi/2 - d_S/2 leaving an equatorial gap of d_S.
    """

    def __init__(self, D, d_S, band_width=None):
        if D < 1:
            raise ValueError("D must be >= 1")
        if not (0 < d_S < math.pi + 1e-12):
            raise ValueError("d_S must lie in (0, pi]")
        self.D = int(D)
        self.d_S = float(d_S)
        self.band_width = float(band_width) if band_width is not None else 4.0 * self.d_S
        self.ratio = self.band_width / self.d_S  # band width in buffer units
        if self.ratio <= 1.0:
            raise ValueError("band_width must exceed d_S")

    def __repr__(self):
        return "WrapParams(D=%d, d_S=%.12g, band_width=%.12g)" % (
            self.D, self.d_S, self.band_width)


def _chart_divisor(a, d_eff):
    """Tangential chart scale for a band with bottom colatitude a.

    Plain sin(a) is not quite enough: the great circle between two points
    on the latitude circle at a cuts poleward of it, so an arc of length
    d along the circle subtends a geodesic slightly shorter than d.  Solve
    cos(geo) = cos^2 a + sin^2 a cos(phi) = cos(d_eff) for the chart angle
    phi and use sigma = d_eff/phi, which makes the worst (bottom-latitude)
    pair land exactly at geodesic distance d_eff.
    """
    sin_a = np.sin(np.clip(a, 0.0, math.pi / 2))
    cos_a2 = 1.0 - sin_a ** 2
    c = (np.cos(np.minimum(d_eff, math.pi)) - cos_a2) / np.maximum(sin_a ** 2, 1e-300)
    phi = np.arccos(np.clip(c, -1.0, 1.0))
    sigma = np.where(phi > 1e-300, d_eff / np.maximum(phi, 1e-300), sin_a)
    return np.maximum(np.minimum(sigma, sin_a), 1e-300)


def _classify_level(za, mag, d_S, w):
    """Band bookkeeping for one recursion level, vectorized over points.

    za: |z| in lattice units; mag: accumulated product of chart divisors
    (so level radians are za/mag and the effective d is d_S/mag).
    Returns (in_band, out, band_idx, ref_sigma, theta) with theta in level
    radians; everything not in a band and not out is buffer.
    """
    theta = za / mag
    zcap = mag * (math.pi / 2) - d_S / 2  # truncation edge, lattice units
    i = np.floor((za / d_S - 1.0) / w).astype(np.int64)
    i = np.maximum(i, 0)
    in_band = (za >= d_S) & (za < d_S * w * (i + 1)) & (za <= zcap)
    out = za > mag * (math.pi / 2)
    # chart reference: the band's lower edge for band points; buffer points
    # (pole caps, inter-band gaps, the equator ring) use their own latitude,
    # which keeps their continued images alive for the reclamation pass
    ref = np.where(in_band, d_S * (1.0 + i * w) / mag, theta)
    ref_sigma = _chart_divisor(ref, d_S / mag)
    return in_band, out, i, ref_sigma, theta


def wrap_points(params, X):
    """Map lattice points (m, D) onto S^D; returns (Q, status, band, hemi).

    status is IN_DOMAIN / IN_BUFFER / OUT_OF_DOMAIN per point.  Buffer and
    out-of-domain points still get the continuously extended image (used by
    the reclamation pass); band/hemi describe the top recursion level.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m_pts, D = X.shape
    if D != params.D:
        raise ValueError("points have dimension %d, params say %d" % (D, params.D))
    d_S, w = params.d_S, params.ratio
    status = np.zeros(m_pts, dtype=np.int8)
    mag = np.ones(m_pts)
    settled = np.zeros(m_pts, dtype=bool)  # exact pole of some subsphere
    sins = np.empty((m_pts, max(D - 1, 0)))
    coss = np.empty((m_pts, max(D - 1, 0)))
    top_band = np.zeros(m_pts, dtype=np.int64)
    top_hemi = np.ones(m_pts, dtype=np.int8)
    for lvl in range(D, 1, -1):
        z = X[:, lvl - 1]
        s = np.where(z < 0, -1.0, 1.0)
        za = np.abs(z)
        in_band, out, band, ref_sin, theta = _classify_level(za, mag, d_S, w)
        deeper_zero = ~np.any(X[:, :lvl - 1] != 0.0, axis=1)
        pole_here = (za == 0.0) & deeper_zero
        in_ok = in_band | pole_here
        lvl_status = np.where(out, OUT_OF_DOMAIN,
                              np.where(in_ok, IN_DOMAIN, IN_BUFFER))
        status = np.maximum(status, np.where(settled, IN_DOMAIN, lvl_status))
        settled |= pole_here
        if lvl == D:
            top_band = band
            top_hemi = np.where(z < 0, -1, 1).astype(np.int8)
        sins[:, lvl - 2] = np.sin(np.minimum(theta, math.pi / 2))
        coss[:, lvl - 2] = s * np.cos(np.minimum(theta, math.pi / 2))
        mag = np.maximum(mag * ref_sin, 1e-150)
    # base circle: seam buffered by half the effective distance
    t = X[:, 0] / mag
    ta = np.abs(X[:, 0])
    base_in = (ta <= mag * math.pi - d_S / 2) | settled
    base_out = (ta > mag * math.pi) & ~settled
    status = np.maximum(status, np.where(base_out, OUT_OF_DOMAIN,
                                         np.where(base_in, IN_DOMAIN, IN_BUFFER)))
    q = np.stack([np.cos(t), np.sin(t)], axis=1)
    for lvl in range(2, D + 1):
        q = np.concatenate([sins[:, lvl - 2:lvl - 1] * q,
                            coss[:, lvl - 2:lvl - 1]], axis=1)
    return q, status, top_band, top_hemi


def wrap_point(params, x):
    """Single-point wrap: returns (status, q)."""
    q, status, _, _ = wrap_points(params, np.asarray(x, dtype=float)[None, :])
    return int(status[0]), q[0]


def unwrap_points(params, Q, project=True):
    """Invert wrap_points on (m, D+1) unit vectors.

    Buffer colatitudes are projected to the nearest band edge and flagged;
    a vanishing subsphere radius (sin theta < 1e-12) zeroes the remaining
    coordinates and sets the pole flag.  Returns (X, in_buffer, pole).

    With project=False the continuous extension is inverted instead: buffer
    colatitudes keep their own chart latitude exactly as the forward map
    assigned it, so wrap -> unwrap is the identity on reclaimed-point
    preimages too (used by the decoder, whose codebooks may be dominated by
    reclaimed points).
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    m_pts = Q.shape[0]
    D = params.D
    if Q.shape[1] != D + 1:
        raise ValueError("expected unit vectors of length D+1")
    d_S, w = params.d_S, params.ratio
    X = np.zeros((m_pts, D))
    in_buffer = np.zeros(m_pts, dtype=bool)
    pole = np.zeros(m_pts, dtype=bool)
    mag = np.ones(m_pts)
    cur = Q.copy()
    active = np.ones(m_pts, dtype=bool)
    for lvl in range(D, 1, -1):
        c = np.clip(cur[:, lvl], -1.0, 1.0)
        head = np.linalg.norm(cur[:, :lvl], axis=1)
        theta = np.arctan2(head, np.abs(c))
        sin_t = np.sin(theta)
        hit_pole = active & (sin_t < 1e-12)
        pole |= hit_pole
        active = active & ~hit_pole
        za = theta * mag
        in_band, _, i, _, _ = _classify_level(za, mag, d_S, w)
        in_buffer |= active & ~in_band
        if project:
            theta_p = _project_to_band(theta, mag, d_S, w)
            theta_eff = np.where(in_band, theta, theta_p)
        else:
            theta_eff = theta
        za_eff = theta_eff * mag
        _, _, i_eff, ref_sin, _ = _classify_level(za_eff, mag, d_S, w)
        s = np.where(c < 0, -1.0, 1.0)
        X[:, lvl - 1] = np.where(active, s * za_eff, 0.0)
        mag = np.maximum(mag * ref_sin, 1e-150)
        denom = np.where(head < 1e-300, 1.0, head)
        cur = cur[:, :lvl] / denom[:, None]
    t = np.arctan2(cur[:, 1], cur[:, 0])
    X[:, 0] = np.where(active, t * mag, 0.0)
    d_eff = d_S / mag
    in_buffer |= active & (np.abs(t) > math.pi - d_eff / 2)
    return X, in_buffer, pole


def _project_to_band(theta, mag, d_S, w):
    """Nearest point of the band set to colatitude theta (level radians)."""
    d_eff = d_S / mag
    zmax = math.pi / 2 - d_eff / 2
    i_max = np.floor(((zmax / d_eff) - 1.0) / w).astype(np.int64)
    zeta = theta / d_eff
    i = np.clip(np.floor((zeta - 1.0) / w).astype(np.int64), 0,
                np.maximum(i_max, 0))
    lo = d_eff * (1.0 + i * w)
    hi = np.minimum(d_eff * w * (i + 1), zmax)
    hi = np.maximum(hi, lo)  # guard against empty truncated bands
    proj = np.clip(theta, lo, hi)
    # a buffer point above band i may be closer to the floor of band i+1
    nxt_ok = i + 1 <= i_max
    lo_n = d_eff * (1.0 + (i + 1) * w)
    better = nxt_ok & (np.abs(lo_n - theta) < np.abs(proj - theta))
    proj = np.where(better, lo_n, proj)
    bandless = i_max < 0
    return np.where(bandless, theta, proj)


def unwrap_point(params, q, project=True):
    x, b, p = unwrap_points(params, np.asarray(q, dtype=float)[None, :],
                            project=project)
    return x[0], bool(b[0]), bool(p[0])


# ---------------------------------------------------------------------------
# code construction

class SphericalCode:
    """An immutable spherical code with provenance back to the lattice.

    points: (m, D+1) unit vectors.  For each point, provenance records
    whether it is a pole, a regular band point (hemisphere, band index,
    lattice coefficients) or a reclaimed buffer point.
    """

    def __init__(self, points, prov_kind, coeffs, band, hemi, params, lattice):
        self.points = points
        self.prov_kind = prov_kind
        self.coeffs = coeffs
        self.band = band
        self.hemi = hemi
        self.params = params
        self.lattice = lattice
        self.d_S = params.d_S
        self._index = None

    def __len__(self):
        return len(self.points)

    def index_of_coeffs(self, c):
        """Code index for lattice coefficient vector c, or None."""
        if self._index is None:
            idx = {}
            for k in range(len(self.points)):
                if self.prov_kind[k] != _PROV_S:
                    idx[self.coeffs[k].astype(np.int64).tobytes()] = k
            self._index = idx
        return self._index.get(np.asarray(c, dtype=np.int64).tobytes())

    @property
    def north_index(self):
        return int(np.argmax(self.prov_kind == _PROV_N))

    @property
    def south_index(self):
        return int(np.argmax(self.prov_kind == _PROV_S))


def _pack_rows(C):
    """View int16 coefficient rows as fixed-width byte strings (sortable)."""
    c16 = np.ascontiguousarray(C, dtype=np.int16)
    return c16.view(np.dtype(('S', 2 * c16.shape[1]))).ravel()


def _unpack_rows(packed, n):
    return np.ascontiguousarray(packed).view(np.int16).reshape(-1, n)


def _seed_rng(lattice, params, extra=0):
    key = "%s|%d|%.12e|%.12e|%.12e|%.12e|%d" % (
        lattice.family, lattice.n, lattice.scale, lattice.alpha,
        params.d_S, params.band_width, extra)
    h = hashlib.sha256(key.encode()).digest()
    return np.random.default_rng(int.from_bytes(h[:8], "little"))


def _in_sorted(table, vals):
    """Boolean mask: which of `vals` are present in the sorted array `table`."""
    if not len(table):
        return np.zeros(len(vals), dtype=bool)
    pos = np.searchsorted(table, vals)
    hit = pos < len(table)
    pos[~hit] = 0
    return hit & (table[pos] == vals)


def _pullback_nodes(lattice, params, rng, count, block=65536):
    """Sample sphere-uniform points, pull them back to lattice nodes.

    Returns packed coefficient rows (deduplicated) whose wrapped images are
    not out-of-domain.  This samples the wrap domain and its buffer zones
    with the sphere's own measure, which reaches thin high-dimensional
    shells that stepwise neighbour walks miss.
    """
    D = params.D
    found = []
    for lo in range(0, count, block):
        m = min(block, count - lo)
        g = rng.standard_normal((m, D + 1))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        xs, _, _ = unwrap_points(params, g)
        coeffs = lattice.nearest_plane(xs).astype(np.int16)
        _, status, _, _ = wrap_points(params, coeffs.astype(np.float64) @ lattice.basis)
        coeffs = coeffs[status != OUT_OF_DOMAIN]
        if len(coeffs):
            found.append(np.unique(_pack_rows(coeffs)))
    if not found:
        return np.zeros(0, dtype="S%d" % (2 * D))
    return np.unique(np.concatenate(found))


def build_code(lattice, params, seeds=200_000, node_cap=3_000_000):
    """Construct the wrapped spherical code for a scaled lattice.

    Two harvesting passes feed the code.  A flood fill over the lattice's
    minimal-vector adjacency graph (rooted at the origin and at pulled-back
    sphere samples) collects the banded in-domain backbone, with buffered
    points kept as reclamation candidates.  A direct sampling pass then
    enlarges the reclamation pool with nodes the walk cannot reach.  Both
    poles are always added; a greedy reclamation pass re-admits buffer
    points at distance >= d_S from everything, and the pairwise
    minimum-distance invariant is verified before returning.
    """
    D = params.D
    if lattice.n != D:
        raise ValueError("lattice dimension %d != D=%d" % (lattice.n, D))
    if abs(lattice.minimal_distance() - params.d_S) > 1e-9 * (1 + params.d_S):
        raise ValueError("lattice minimal distance %.12g is not d_S=%.12g"
                         % (lattice.minimal_distance(), params.d_S))
    d_S = params.d_S
    if d_S >= math.pi:
        return _poles_only_code(params, lattice)

    moves = lattice.short_vectors(lattice.minimal_distance() * (1 + 1e-9))
    moves = moves.astype(np.int16)

    covol = abs(float(np.linalg.det(lattice.basis)))
    box_est = math.pi * (2 * math.pi) ** (D - 1) / covol
    if box_est <= 150_000:
        # small enough to enumerate the whole candidate box exactly
        lo = np.full(D, -math.pi)
        hi = np.full(D, math.pi)
        if D > 1:  # colatitude coordinate spans a quarter arc, not a half
            lo[D - 1], hi[D - 1] = -math.pi / 2 - d_S, math.pi / 2 + d_S
        nodes = lattice.enumerate_in_box(lo, hi)
        coeffs = np.array([p.coeffs for p in nodes], dtype=np.int16)
        _, status, _, _ = wrap_points(params, coeffs.astype(np.float64) @ lattice.basis)
        pool = np.unique(_pack_rows(coeffs[status != OUT_OF_DOMAIN]))
    else:
        rng = _seed_rng(lattice, params)
        pool = _pullback_nodes(lattice, params, rng, seeds)
    seed_coeffs = _unpack_rows(pool[:: max(1, len(pool) // 256)], D)
    seed_coeffs = np.concatenate([np.zeros((1, D), dtype=np.int16), seed_coeffs])

    frontier = np.unique(seed_coeffs, axis=0)
    visited = np.sort(_pack_rows(frontier))
    ok_rows, buf_rows = [], []
    while len(frontier):
        emb = frontier.astype(np.float64) @ lattice.basis
        _, status, _, _ = wrap_points(params, emb)
        ok_rows.append(frontier[status == IN_DOMAIN])
        buf_rows.append(frontier[status == IN_BUFFER])
        grow = frontier[status == IN_DOMAIN]
        if not len(grow):
            break
        pend, pend_rows = [], 0
        for lo in range(0, len(grow), 2048):
            block = grow[lo:lo + 2048]
            cand = (block[:, None, :] + moves[None, :, :]).reshape(-1, D)
            cand = np.unique(_pack_rows(cand))
            cand = cand[~_in_sorted(visited, cand)]
            if len(cand):
                pend.append(cand)
                pend_rows += len(cand)
            if pend_rows > 6_000_000:
                pend = [np.unique(np.concatenate(pend))]
                pend_rows = len(pend[0])
                if len(visited) + pend_rows > node_cap:
                    raise BoxTooLarge(
                        "flood fill grew past node_cap=%d; shrink the domain "
                        "or raise the cap" % node_cap)
        if not pend:
            break
        fresh = np.unique(np.concatenate(pend))
        if len(visited) + len(fresh) > node_cap:
            raise BoxTooLarge(
                "flood fill grew past node_cap=%d; shrink the domain "
                "or raise the cap" % node_cap)
        visited = np.sort(np.concatenate([visited, fresh]))
        frontier = _unpack_rows(fresh, D)

    ok = np.concatenate(ok_rows) if ok_rows else np.zeros((0, D), dtype=np.int16)
    buf = np.concatenate(buf_rows) if buf_rows else np.zeros((0, D), dtype=np.int16)

    # sampled nodes the walk never reached still feed the reclamation pool
    extra = _unpack_rows(pool[~_in_sorted(visited, pool)], D)
    if len(extra):
        _, status, _, _ = wrap_points(params, extra.astype(np.float64) @ lattice.basis)
        ok = np.concatenate([ok, extra[status == IN_DOMAIN]])
        buf = np.concatenate([buf, extra[status == IN_BUFFER]])
    return _assemble_code(lattice, params, ok, buf)


def _poles_only_code(params, lattice):
    D = params.D
    n_pt = np.zeros(D + 1)
    n_pt[D] = 1.0
    pts = np.stack([n_pt, -n_pt])
    if D == 1:  # base circle: wrap(0) = e_1 serves as the pole axis
        pts = np.array([[1.0, 0.0], [-1.0, 0.0]])
    return SphericalCode(
        pts, np.array([_PROV_N, _PROV_S], dtype=np.int8),
        np.zeros((2, D), dtype=np.int64), np.zeros(2, dtype=np.int64),
        np.array([1, -1], dtype=np.int8), params, lattice)


def _assemble_code(lattice, params, ok, buf):
    D = params.D
    d_S = params.d_S
    emb_ok = ok.astype(np.float64) @ lattice.basis
    q_ok, status, band, hemi = wrap_points(params, emb_ok)
    origin = ~np.any(ok != 0, axis=1)

    pts = [q_ok]
    kinds = [np.where(origin, _PROV_N, _PROV_BAND).astype(np.int8)]
    coeffs = [ok.astype(np.int64)]
    bands = [band]
    hemis = [hemi]
    if not origin.any():  # origin is always in-domain, but be defensive
        n_pt = np.zeros((1, D + 1))
        n_pt[0, D if D > 1 else 0] = 1.0
        pts.append(n_pt)
        kinds.append(np.array([_PROV_N], dtype=np.int8))
        coeffs.append(np.zeros((1, D), dtype=np.int64))
        bands.append(np.zeros(1, dtype=np.int64))
        hemis.append(np.ones(1, dtype=np.int8))
    s_pt = np.zeros((1, D + 1))
    s_pt[0, D if D > 1 else 0] = -1.0
    pts.append(s_pt)
    kinds.append(np.array([_PROV_S], dtype=np.int8))
    coeffs.append(np.zeros((1, D), dtype=np.int64))
    bands.append(np.zeros(1, dtype=np.int64))
    hemis.append(np.full(1, -1, dtype=np.int8))

    pts = np.concatenate(pts)
    kinds = np.concatenate(kinds)
    coeffs = np.concatenate(coeffs)
    bands = np.concatenate(bands)
    hemis = np.concatenate(hemis)

    # reclamation: farthest-first greedy re-admission of buffered points
    if len(buf):
        q_buf, _, b_band, b_hemi = wrap_points(params, buf.astype(np.float64) @ lattice.basis)
        cos_lim = math.cos(d_S - 1e-12)
        best = np.full(len(q_buf), -1.0)
        for lo in range(0, len(pts), 4096):
            best = np.maximum(best, (q_buf @ pts[lo:lo + 4096].T).max(axis=1))
        # anything within d_S of the base code can never be admitted
        keep = best <= cos_lim
        buf, q_buf, b_band, b_hemi = buf[keep], q_buf[keep], b_band[keep], b_hemi[keep]
        base_dist = np.arccos(np.clip(best[keep], -1.0, 1.0))
        order = np.lexsort(tuple(buf.T[::-1]) + (-base_dist,))
        extra = np.zeros((1024, pts.shape[1]))
        n_extra = 0
        taken = []
        for blo in range(0, len(order), 4096):
            idx = order[blo:blo + 4096]
            if n_extra:  # vectorized cull against everything taken so far
                mx = np.full(len(idx), -1.0)
                qb = q_buf[idx]
                for alo in range(0, n_extra, 8192):
                    ahi = min(alo + 8192, n_extra)
                    mx = np.maximum(mx, (qb @ extra[alo:ahi].T).max(axis=1))
                idx = idx[mx <= cos_lim]
            start = n_extra
            for k in idx:
                if n_extra > start and np.max(extra[start:n_extra] @ q_buf[k]) > cos_lim:
                    continue
                while n_extra >= len(extra):
                    extra = np.concatenate([extra, np.zeros_like(extra)])
                extra[n_extra] = q_buf[k]
                n_extra += 1
                taken.append(k)
        if taken:
            ki = np.asarray(taken)
            pts = np.concatenate([pts, extra[:n_extra]])
            kinds = np.concatenate([kinds, np.full(n_extra, _PROV_RECLAIMED, dtype=np.int8)])
            coeffs = np.concatenate([coeffs, buf[ki].astype(np.int64)])
            bands = np.concatenate([bands, b_band[ki]])
            hemis = np.concatenate([hemis, b_hemi[ki]])

    if not len(pts):
        raise EmptyCode("no code points survived")
    _verify_pairwise(pts, d_S, lattice, params)
    return SphericalCode(pts, kinds, coeffs, bands, hemis, params, lattice)


def _verify_pairwise(pts, d_S, lattice, params):
    m = len(pts)
    cos_lim = math.cos(max(d_S - 1e-9, 0.0))
    worst = -1.0
    if m <= 10_000:
        for lo in range(0, m, 2048):
            blk = pts[lo:lo + 2048] @ pts.T
            for r in range(blk.shape[0]):
                blk[r, lo + r] = -1.0
            worst = max(worst, float(blk.max()))
    else:
        rng = _seed_rng(lattice, params, extra=1)
        ii = rng.integers(0, m, 1_000_000)
        jj = rng.integers(0, m, 1_000_000)
        keep = ii != jj
        worst = float(np.max(np.sum(pts[ii[keep]] * pts[jj[keep]], axis=1)))
    if worst > cos_lim:
        raise MinDistanceViolation(
            "pairwise geodesic distance %.6g below d_S=%.6g"
            % (math.acos(min(worst, 1.0)), d_S))


def tune_code(family, n, alpha, target_log2, d0, band_ratio=2.0,
              tol_log2=0.25, max_iters=8, seeds=2_000_000, lattice_kwargs=None):
    """Adjust d_S until log2 |code| is within tol_log2 of target_log2.

    Secant iteration on log2 |code| as a function of log d_S; the local
    slope is measured from the last two iterates (the size curve is much
    shallower than the naive volume exponent -D in some regimes and far
    steeper in others).  Returns (code, lattice, d_S) for the best iterate.
    """
    from . import lattices as _lat
    kw = dict(lattice_kwargs or {})
    d = float(d0)
    best = None
    prev = None  # (log d, log2 |code|)
    for _ in range(max_iters):
        lattice = _lat.make_lattice(family, n, alpha=alpha, design_distance=d, **kw)
        params = WrapParams(n, d, band_width=band_ratio * d)
        code = build_code(lattice, params, seeds=seeds)
        size_log2 = math.log2(max(len(code), 1))
        err = size_log2 - target_log2
        if best is None or abs(err) < abs(best[0]):
            best = (err, code, lattice, d)
        if abs(err) <= tol_log2:
            break
        slope = -float(n)
        if prev is not None and abs(math.log(d) - prev[0]) > 1e-12:
            slope = (size_log2 - prev[1]) / (math.log(d) - prev[0])
            slope = min(max(slope, -40.0), -1.0)
        prev = (math.log(d), size_log2)
        step = -err / slope
        step = min(max(step, -0.35), 0.35)  # one secant step, kept local
        d = min(max(d * math.exp(step), 1e-4), math.pi)
    return best[1], best[2], best[3]
