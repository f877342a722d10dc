"""Lattice constructions, closest-point search and box enumeration.

Supported families: Zn, An, Dn, An_dual, Dn_dual, E8, K12 (Coxeter-Todd),
BW16 (Barnes-Wall) and Leech24.  Every lattice is represented by a square
generator matrix whose rows are basis vectors; A_n is built in its usual
(n+1)-dimensional hyperplane and rotated isometrically down to R^n so that
the generator stays square.  A lattice can be scaled to a requested minimal
distance and rotated about the all-ones diagonal.
"""

import math

import numpy as np
from scipy.linalg import expm


FAMILIES = (
    "Zn", "An", "Dn", "An_dual", "Dn_dual", "E8", "K12", "BW16", "Leech24",
)


class UnsupportedLattice(ValueError):
    """Unknown family name or dimension not matching the family."""


class BoxTooLarge(RuntimeError):
    """Box enumeration would exceed the configured point cap."""


# ---------------------------------------------------------------------------
# integer Hermite normal form, used to turn generating sets into bases

def _hnf_basis(rows):
    """Z-basis (as rows) of the integer row span of `rows`, via exact HNF."""
    M = [[int(v) for v in r] for r in rows]
    m, n = len(M), len(M[0])
    r = 0
    for col in range(n):
        while True:
            nz = [i for i in range(r, m) if M[i][col] != 0]
            if len(nz) <= 1:
                break
            i0 = min(nz, key=lambda i: abs(M[i][col]))
            for i in nz:
                if i == i0:
                    continue
                q = M[i][col] // M[i0][col]
                M[i] = [a - q * b for a, b in zip(M[i], M[i0])]
        nz = [i for i in range(r, m) if M[i][col] != 0]
        if not nz:
            continue
        i0 = nz[0]
        M[r], M[i0] = M[i0], M[r]
        if M[r][col] < 0:
            M[r] = [-a for a in M[r]]
        for i in range(r):  # reduce rows above, keeps entries small
            q = M[i][col] // M[r][col]
            if q:
                M[i] = [a - q * b for a, b in zip(M[i], M[r])]
        r += 1
    return np.array(M[:r], dtype=np.int64)


# ---------------------------------------------------------------------------
# generator matrices

def _gen_zn(n):
    return np.eye(n)


def _an_hyperplane_frame(n):
    # orthonormal rows spanning {x in R^(n+1) : sum x = 0}, chosen by the
    # Householder map sending e_1 to the normalized all-ones vector
    u = np.full(n + 1, 1.0 / math.sqrt(n + 1))
    v = -u.copy()
    v[0] += 1.0
    H = np.eye(n + 1) - 2.0 * np.outer(v, v) / (v @ v)
    return H[1:]


def _gen_an(n):
    rows = np.zeros((n, n + 1))
    idx = np.arange(n)
    rows[idx, idx] = 1.0
    rows[idx, idx + 1] = -1.0
    return rows @ _an_hyperplane_frame(n).T


def _gen_dn(n):
    if n < 3:
        raise UnsupportedLattice("Dn needs n >= 3")
    g = np.zeros((n, n))
    g[0, 0] = g[0, 1] = -1.0
    for i in range(1, n):
        g[i, i - 1] = 1.0
        g[i, i] = -1.0
    return g


def _gen_e8(n):
    if n != 8:
        raise UnsupportedLattice("E8 is 8-dimensional")
    g = np.zeros((8, 8))
    g[0, 0] = 2.0
    for i in range(1, 7):
        g[i, i - 1] = -1.0
        g[i, i] = 1.0
    g[7, :] = 0.5
    return g


def _gen_k12(n):
    # Coxeter-Todd lattice from Eisenstein integers: vectors in E^6 whose
    # coordinates agree mod theta (theta^2 = -3) and sum to 0 mod 3.  The
    # E-generating set below is reduced to a Z-basis by integer HNF over the
    # coordinates (u, v) of u + v*omega, then embedded and scaled so that
    # the minimal norm is 4 and the Gram determinant is 3^6 = 729.
    if n != 12:
        raise UnsupportedLattice("K12 is 12-dimensional")
    cgens = []
    one = [(1, 0)] * 6
    cgens.append(one)
    theta = (1, 2)  # 1 + 2w  (= w - conj(w))
    for i in range(5):
        row = [(0, 0)] * 6
        row[i] = theta
        row[i + 1] = (-theta[0], -theta[1])
        cgens.append(row)
    last = [(0, 0)] * 6
    last[5] = (3, 0)
    cgens.append(last)

    def times_omega(uv):
        u, v = uv
        return (-v, u - v)

    rows = []
    for g in cgens:
        for mult in (lambda z: z, times_omega):
            row = []
            for uv in map(mult, g):
                row.extend(uv)
            rows.append(row)
    basis = _hnf_basis(rows)
    emb = np.zeros((12, 12))
    blk = np.array([[1.0, 0.0], [-0.5, math.sqrt(3.0) / 2.0]])
    for i in range(6):
        emb[2 * i:2 * i + 2, 2 * i:2 * i + 2] = blk
    return math.sqrt(2.0 / 3.0) * (basis @ emb)


def _golay_rows():
    # extended binary Golay code [24,12,8] from the cyclic [23,12,7] code
    # with generator polynomial x^11+x^10+x^6+x^5+x^4+x^2+1, plus parity bit
    rows = []
    for i in range(12):
        row = np.zeros(23, dtype=np.int64)
        row[[j + i for j in (0, 2, 4, 5, 6, 10, 11)]] = 1
        rows.append(row)
    rows = np.array(rows)
    parity = rows.sum(axis=1) % 2
    return np.concatenate([rows, parity[:, None]], axis=1)


def _gen_bw16(n):
    # Barnes-Wall lattice: {x in Z^16 : x mod 2 in RM(1,4), sum x = 0 mod 4}
    # scaled by 1/sqrt(2); minimal norm 4, determinant 2^8
    if n != 16:
        raise UnsupportedLattice("BW16 is 16-dimensional")
    pos = np.arange(16)
    rm = [np.ones(16, dtype=np.int64)]
    rm += [((pos >> b) & 1).astype(np.int64) for b in range(4)]
    gens = list(rm) + list(2 * np.eye(16, dtype=np.int64))
    b1 = _hnf_basis(gens)
    sums = b1.sum(axis=1)
    if np.any(sums % 2):
        raise AssertionError("RM(1,4) preimage should have even row sums")
    t = (sums // 2) % 2
    if not t.any():
        b2 = b1
    else:
        j = int(np.argmax(t))
        k = np.eye(16, dtype=np.int64)
        k[:, j] += t
        k[j] = 0
        k[j, j] = 2
        b2 = k @ b1
    return b2 / math.sqrt(2.0)


def _gen_leech(n):
    # Leech lattice from the Golay code: spanned by 2*(codewords),
    # (4,4,0,...), (8,0,...) and (-3,1,...,1), all scaled by 1/sqrt(8)
    if n != 24:
        raise UnsupportedLattice("Leech24 is 24-dimensional")
    gens = [2 * c for c in _golay_rows()]
    for i in range(1, 24):
        row = np.zeros(24, dtype=np.int64)
        row[0] = 4
        row[i] = 4
        gens.append(row)
    row = np.zeros(24, dtype=np.int64)
    row[0] = 8
    gens.append(row)
    gens.append(np.concatenate([[-3], np.ones(23, dtype=np.int64)]))
    basis = _hnf_basis(gens)
    return basis / math.sqrt(8.0)


def make_generator(family, n):
    """Square generator matrix (rows are basis vectors) for `family` in R^n."""
    if family == "Zn":
        g = _gen_zn(n)
    elif family == "An":
        g = _gen_an(n)
    elif family == "Dn":
        g = _gen_dn(n)
    elif family == "An_dual":
        g = np.linalg.inv(_gen_an(n)).T
    elif family == "Dn_dual":
        g = np.linalg.inv(_gen_dn(n)).T
    elif family == "E8":
        g = _gen_e8(n)
    elif family == "K12":
        g = _gen_k12(n)
    elif family == "BW16":
        g = _gen_bw16(n)
    elif family == "Leech24":
        g = _gen_leech(n)
    else:
        raise UnsupportedLattice("unknown lattice family %r" % (family,))
    if g.shape != (n, n):
        raise UnsupportedLattice("%s does not exist in dimension %d" % (family, n))
    return g


def rotation_matrix(n, alpha):
    """Orthogonal matrix fixing the all-ones diagonal.

    Conjugates the block rotation diag(1, expm(alpha*X)) by the Householder
    reflection sending the normalized diagonal to e_1; X is the (n-1)-square
    antisymmetric matrix with +1 above and -1 below the diagonal.
    """
    if alpha == 0.0 or n == 1:
        return np.eye(n)
    e = np.ones(n)
    v = e - math.sqrt(n) * np.eye(n)[0]
    w = np.eye(n) - 2.0 * np.outer(v, v) / (v @ v)
    x = np.triu(np.ones((n - 1, n - 1)), 1)
    x = x - x.T
    r1 = np.eye(n)
    r1[1:, 1:] = expm(alpha * x)
    return w.T @ r1 @ w


# ---------------------------------------------------------------------------
# enumeration engine: depth-first over integer coefficients with interval
# pruning per level (Fincke-Pohst bounds), vectorized over open branches

def _lq(basis):
    # basis = L @ Q with L lower triangular (positive diagonal), Q orthonormal
    q, r = np.linalg.qr(basis.T)
    L = r.T.copy()
    Q = q.T.copy()
    s = np.sign(np.diag(L))
    s[s == 0] = 1.0
    L *= s[None, :]
    Q *= s[:, None]
    return L, Q


def _expand_levels(L, tprime, r2=None, supports=None, node_cap=50_000_000,
                   chunk=1_000_000):
    """All integer c with per-level bounds |(cL - t')_j| <= bound_j.

    bound_j is the tighter of the running ball residual sqrt(r2 - acc) and
    supports[j].  Returns (coeffs, acc) where acc is the accumulated squared
    residual (the full squared distance when r2 is used alone).
    """
    n = L.shape[0]
    diag = np.diag(L)
    stack = [(n, np.zeros((1, n), dtype=np.int64), np.zeros((1, n)),
              np.zeros(1))]
    out_c, out_a = [], []
    nodes = 0
    while stack:
        j, C, OFF, acc = stack.pop()
        while j > 0:
            j -= 1
            center = (tprime[j] - OFF[:, j]) / diag[j]
            if r2 is not None:
                half = np.sqrt(np.maximum(r2 - acc, 0.0)) / diag[j]
                if supports is not None:
                    half = np.minimum(half, supports[j] / diag[j])
            else:
                half = np.full(len(acc), supports[j] / diag[j])
            lo = np.ceil(center - half - 1e-9).astype(np.int64)
            hi = np.floor(center + half + 1e-9).astype(np.int64)
            cnt = np.maximum(hi - lo + 1, 0)
            total = int(cnt.sum())
            nodes += total
            if nodes > node_cap:
                raise BoxTooLarge("enumeration exceeded %d nodes" % node_cap)
            if total == 0:
                C = C[:0]
                break
            rows = np.repeat(np.arange(len(cnt)), cnt)
            starts = np.cumsum(cnt) - cnt
            cj = np.repeat(lo, cnt) + (np.arange(total) - np.repeat(starts, cnt))
            C = C[rows]
            C[:, j] = cj
            step = cj * diag[j] + OFF[rows, j] - tprime[j]
            acc = acc[rows] + step * step
            OFF = OFF[rows] + cj[:, None] * L[j]
            if r2 is not None:
                keep = acc <= r2 * (1 + 1e-12) + 1e-12
                if not keep.all():
                    C, OFF, acc = C[keep], OFF[keep], acc[keep]
            if len(C) > chunk and j > 0:
                pieces = max(2, len(C) // chunk)
                for sl in np.array_split(np.arange(len(C)), pieces)[1:]:
                    stack.append((j, C[sl], OFF[sl], acc[sl]))
                sl = np.array_split(np.arange(len(C)), pieces)[0]
                C, OFF, acc = C[sl], OFF[sl], acc[sl]
        if len(C):
            out_c.append(C)
            out_a.append(acc)
    if not out_c:
        return np.zeros((0, n), dtype=np.int64), np.zeros(0)
    return np.concatenate(out_c), np.concatenate(out_a)


def _cvp_dfs(L, tprime, seed, tol_scale=1e-10):
    """Exact closest vector by depth-first search with radius shrinking.

    Candidates at each level are visited in Schnorr-Euchner order (closest
    residual first), so the first candidate exceeding the current radius
    ends the level.  Ties within tolerance go to the lexicographically
    smallest coefficient vector.  `seed` (Babai) bounds the initial radius.
    """
    n = L.shape[0]
    diag = np.diag(L)
    best_c = seed.astype(np.int64).copy()
    resid = seed.astype(float) @ L - tprime
    best_d2 = float(resid @ resid)
    tol = tol_scale * (1.0 + best_d2)
    c = np.zeros(n, dtype=np.int64)

    def rec(j, off, acc):
        nonlocal best_c, best_d2
        center = (tprime[j] - off[j]) / diag[j]
        base = int(math.floor(center + 0.5))
        d = 1 if center >= base else -1
        k = 0
        while True:
            if k == 0:
                cand = base
            elif k % 2:
                cand = base + ((k + 1) // 2) * d
            else:
                cand = base - (k // 2) * d
            k += 1
            step = cand * diag[j] + off[j] - tprime[j]
            a2 = acc + step * step
            if a2 > best_d2 + tol:
                return
            c[j] = cand
            if j == 0:
                if a2 < best_d2 - tol:
                    best_d2 = a2
                    best_c = c.copy()
                elif tuple(c) < tuple(best_c):
                    best_c = c.copy()
            else:
                rec(j - 1, off + cand * L[j], a2)

    rec(n - 1, np.zeros(n), 0.0)
    return best_c, best_d2


class LatticePoint:
    """A lattice point: integer coefficients plus its embedding in R^n."""

    __slots__ = ("coeffs", "embedding")

    def __init__(self, coeffs, embedding):
        self.coeffs = coeffs
        self.embedding = embedding

    def __repr__(self):
        return "LatticePoint(%s)" % (self.coeffs.tolist(),)


class Lattice:
    """A scaled, rotated lattice with search operations.

    Points are c @ basis for integer rows c, where
    basis = scale * generator @ rotation.T.
    """

    def __init__(self, family, n, scale=1.0, alpha=0.0):
        if family not in FAMILIES:
            raise UnsupportedLattice("unknown lattice family %r" % (family,))
        if n < 1:
            raise UnsupportedLattice("dimension must be positive")
        self.family = family
        self.n = n
        self.scale = float(scale)
        self.alpha = float(alpha)
        self.generator = make_generator(family, n)
        self.rotation = rotation_matrix(n, alpha)
        self.basis = self.scale * self.generator @ self.rotation.T
        self.basis_inv = np.linalg.inv(self.basis)
        self._gen_inv = np.linalg.inv(self.generator)
        self._lq_cache = None
        self._min2_unscaled = None

    # -- construction helpers ------------------------------------------------

    def with_design_distance(self, d):
        """Same lattice rescaled so the minimal distance equals d."""
        lam = math.sqrt(self._unscaled_min2())
        out = Lattice(self.family, self.n, scale=d / lam, alpha=self.alpha)
        out._min2_unscaled = self._min2_unscaled
        return out

    def _lq(self):
        if self._lq_cache is None:
            self._lq_cache = _lq(self.generator)
        return self._lq_cache

    def _unscaled_min2(self):
        if self._min2_unscaled is None:
            L, Q = self._lq()
            r = float(np.sqrt((self.generator ** 2).sum(axis=1)).min())
            C, a2 = _expand_levels(L, np.zeros(self.n), r2=r * r * (1 + 1e-9))
            nz = a2[np.any(C != 0, axis=1)]
            self._min2_unscaled = float(nz.min())
        return self._min2_unscaled

    def minimal_distance(self):
        """Minimal distance between distinct lattice points (exact, cached)."""
        return self.scale * math.sqrt(self._unscaled_min2())

    def covering_radius_bound(self):
        """Upper bound on the covering radius (Babai bound from GS norms)."""
        L, _ = self._lq()
        return 0.5 * self.scale * math.sqrt(float((np.diag(L) ** 2).sum()))

    # -- frame changes -------------------------------------------------------

    def to_base_frame(self, x):
        # inverse of y -> scale * y @ rotation.T
        return (np.asarray(x) @ self.rotation) / self.scale

    def embed(self, coeffs):
        return np.asarray(coeffs) @ self.basis

    # -- point search --------------------------------------------------------

    def nearest_plane(self, targets):
        """Babai nearest-plane approximation, batched; returns int coeffs."""
        X = np.atleast_2d(np.asarray(targets, dtype=float))
        L, Q = self._lq()
        tp = self.to_base_frame(X) @ Q.T
        m = len(X)
        C = np.zeros((m, self.n), dtype=np.int64)
        off = np.zeros((m, self.n))
        diag = np.diag(L)
        for j in range(self.n - 1, -1, -1):
            cj = np.floor((tp[:, j] - off[:, j]) / diag[j] + 0.5).astype(np.int64)
            C[:, j] = cj
            off += cj[:, None] * L[j]
        return C

    def closest_point(self, x):
        """Exact closest lattice point to x (ties: lexicographically smallest
        coefficient vector).  Uses fast rounding decoders for Zn/Dn/An and a
        seeded sphere decoder otherwise."""
        x = np.asarray(x, dtype=float)
        x0 = self.to_base_frame(x)
        if self.family == "Zn":
            coeffs = np.ceil(x0 - 0.5).astype(np.int64)
        elif self.family == "Dn":
            coeffs = self._dn_coeffs(x0)
        elif self.family == "An":
            coeffs = self._an_coeffs(x0)
        else:
            L, Q = self._lq()
            seed = self.nearest_plane(x[None, :])[0]
            coeffs, _ = _cvp_dfs(L, x0 @ Q.T, seed)
        return LatticePoint(coeffs, self.embed(coeffs))

    def _dn_coeffs(self, x0):
        y = np.ceil(x0 - 0.5)
        if int(y.sum()) % 2:
            err = np.abs(x0 - y)
            j = int(np.argmax(err))
            y[j] += 1.0 if x0[j] > y[j] else -1.0
        c = y @ np.linalg.inv(self.generator)
        return np.rint(c).astype(np.int64)

    def _an_coeffs(self, x0):
        frame = _an_hyperplane_frame(self.n)
        xh = x0 @ frame  # target inside the sum-zero hyperplane
        y = np.ceil(xh - 0.5)
        delta = int(y.sum())
        err = xh - y
        if delta > 0:
            order = np.argsort(err, kind="stable")  # most negative first
            y[order[:delta]] -= 1.0
        elif delta < 0:
            order = np.argsort(-err, kind="stable")  # largest first
            y[order[:-delta]] += 1.0
        return np.cumsum(y[:-1]).astype(np.int64)

    # -- enumeration ---------------------------------------------------------

    def short_vectors(self, radius):
        """Integer coeffs of all nonzero lattice vectors with norm <= radius."""
        L, _ = self._lq()
        r = radius / self.scale
        C, _ = _expand_levels(L, np.zeros(self.n), r2=r * r * (1 + 1e-9))
        return C[np.any(C != 0, axis=1)]

    def enumerate_in_box(self, lower, upper, cap=10_000_000):
        """All lattice points whose embedding lies in the closed box.

        Raises BoxTooLarge when the expected point count (box volume over
        lattice covolume) exceeds `cap`.
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != (self.n,) or upper.shape != (self.n,):
            raise ValueError("box bounds must have length n")
        if np.any(upper < lower):
            raise ValueError("upper < lower")
        vol = float(np.prod(upper - lower))
        covol = abs(float(np.linalg.det(self.basis)))
        if vol / covol > cap:
            raise BoxTooLarge("box holds ~%g points, cap is %d"
                              % (vol / covol, cap))
        center = 0.5 * (lower + upper)
        halfw = 0.5 * (upper - lower)
        L, Q = self._lq()
        t0 = self.to_base_frame(center)
        # embedding = scale * u @ (Q @ rot.T) with u = c @ L, so the box
        # support along Q-frame axis j is the abs row sum against halfw
        amp = np.abs(Q @ self.rotation.T) @ halfw / self.scale
        ball = float(np.linalg.norm(halfw)) / self.scale
        C, _ = _expand_levels(L, t0 @ Q.T, r2=ball * ball * (1 + 1e-9),
                              supports=amp, node_cap=max(50 * cap, 10 ** 7))
        emb = C @ self.basis
        pad = 1e-9 * (1.0 + np.abs(lower) + np.abs(upper))
        keep = np.all((emb >= lower - pad) & (emb <= upper + pad), axis=1)
        C, emb = C[keep], emb[keep]
        order = np.lexsort(C.T[::-1])
        return [LatticePoint(c, e) for c, e in zip(C[order], emb[order])]


def make_lattice(family, n, scale=1.0, alpha=0.0, design_distance=None):
    """Build a lattice; if design_distance is given the scale is derived."""
    lat = Lattice(family, n, scale=scale, alpha=alpha)
    if design_distance is not None:
        lat = lat.with_design_distance(design_distance)
    return lat
