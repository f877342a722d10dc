"""Sphere and complex-Stiefel geometry used to carry packings onto unitary frames.

The sphere side works in polar normal coordinates at the north pole.  The
Stiefel side V_{n_t}(C^T) is handled through skew-Hermitian generators of
the block form ``[[A, -B^H], [B, 0]]``: geodesics from the tall identity
frame are ``expm(Omega) @ [I; 0]``, and a fixed Frobenius-orthonormal basis
of those generators carries real coordinate vectors of length
n_t(2T - n_t) back and forth.
"""

import numpy as np
from scipy.linalg import expm, logm


class CutLocus(ValueError):
    """Point is (numerically) antipodal; the logarithm is not unique."""


class NotSkewHermitian(ValueError):
    pass


class NotConverged(RuntimeError):
    pass


def dimension(n_t, T):
    """Real dimension of V_{n_t}(C^T): n_t * (2T - n_t)."""
    n_t, T = int(n_t), int(T)
    if n_t < 1 or T < n_t:
        raise ValueError("need 1 <= n_t <= T")
    return n_t * (2 * T - n_t)


def sphere_exp_north(v):
    """Map tangent vectors at the north pole of S^D into R^{D+1}.

    Radial lines go to meridians at unit speed; the domain is the closed
    ball of radius pi.
    """
    v = np.asarray(v, dtype=float)
    th = np.linalg.norm(v, axis=-1)
    if np.any(th > np.pi + 1e-12):
        raise ValueError("tangent norm exceeds pi")
    small = th < 1e-9
    scale = np.where(small, 1.0, np.sin(th) / np.where(small, 1.0, th))
    out = np.empty(v.shape[:-1] + (v.shape[-1] + 1,))
    out[..., :-1] = v * scale[..., None]
    out[..., -1] = np.cos(th)
    return out


def sphere_log_north(q):
    """Inverse of sphere_exp_north on the sphere minus the south pole."""
    q = np.asarray(q, dtype=float)
    th = np.arccos(np.clip(q[..., -1], -1.0, 1.0))
    if np.any(th > np.pi - 1e-9):
        raise CutLocus("point too close to the south pole")
    small = th < 1e-9
    scale = np.where(small, 1.0, th / np.where(small, 1.0, np.sin(th)))
    return q[..., :-1] * scale[..., None]


def stiefel_base(n_t, T):
    """The tall identity frame I_{T x n_t}."""
    base = np.zeros((T, n_t), dtype=complex)
    np.fill_diagonal(base, 1.0)
    return base


_BASIS_CACHE = {}


def stiefel_basis(n_t, T):
    """Ordered orthonormal generators of the tangent space at the tall identity.

    Each element is a T x T skew-Hermitian matrix of the block form
    [[A, -B^H], [B, 0]].  Order: diagonal imaginary directions of A, then
    rotation/imaginary pairs for each j<k inside A, then the B block entry
    by entry in row-major order with the real direction before the
    imaginary one (both scaled by 1/sqrt2).  Orthonormal under
    Re tr(X^H Y); cached per (n_t, T).
    """
    key = (int(n_t), int(T))
    if key in _BASIS_CACHE:
        return _BASIS_CACHE[key]
    n_t, T = key
    D = dimension(n_t, T)
    basis = np.zeros((D, T, T), dtype=complex)
    m = 0
    for j in range(n_t):
        basis[m, j, j] = 1j
        m += 1
    r = 1.0 / np.sqrt(2.0)
    for j in range(n_t):
        for k in range(j + 1, n_t):
            basis[m, k, j] = r
            basis[m, j, k] = -r
            m += 1
            basis[m, k, j] = 1j * r
            basis[m, j, k] = 1j * r
            m += 1
    for row in range(n_t, T):
        for col in range(n_t):
            basis[m, row, col] = r
            basis[m, col, row] = -r
            m += 1
            basis[m, row, col] = 1j * r
            basis[m, col, row] = 1j * r
            m += 1
    assert m == D
    basis.setflags(write=False)
    _BASIS_CACHE[key] = basis
    return basis


def tangent_transfer(v, n_t, T):
    """Real coordinates -> skew-Hermitian generator (norm preserving)."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != dimension(n_t, T):
        raise ValueError("coordinate length does not match n_t, T")
    return np.einsum("...d,dij->...ij", v, stiefel_basis(n_t, T))


def coords_from_omega(Om, n_t, T, atol=1e-8):
    """Inverse of tangent_transfer, validating the block structure."""
    Om = np.asarray(Om, dtype=complex)
    _check_skew(Om, atol)
    tail = Om[..., n_t:, n_t:]
    if tail.size and np.abs(tail).max() > atol:
        raise NotSkewHermitian("lower-right block is not zero")
    v = np.empty(Om.shape[:-2] + (dimension(n_t, T),))
    m = 0
    for j in range(n_t):
        v[..., m] = Om[..., j, j].imag
        m += 1
    s = np.sqrt(2.0)
    for j in range(n_t):
        for k in range(j + 1, n_t):
            v[..., m] = (Om[..., k, j] - Om[..., j, k]).real / s
            m += 1
            v[..., m] = (Om[..., k, j] + Om[..., j, k]).imag / s
            m += 1
    for row in range(n_t, T):
        for col in range(n_t):
            v[..., m] = s * Om[..., row, col].real
            m += 1
            v[..., m] = s * Om[..., row, col].imag
            m += 1
    return v


def _check_skew(M, atol):
    res = np.abs(M + np.conj(np.swapaxes(M, -1, -2))).max()
    if res > atol:
        raise NotSkewHermitian(f"skew-Hermitian residual {res:.3e}")


def _expm_skew(Om):
    # e^{iH} through the eigendecomposition of H = -i*Om; unitary to
    # machine precision
    H = -1j * Om
    H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    w, V = np.linalg.eigh(H)
    phase = np.exp(1j * w)
    return np.einsum("...ij,...j,...kj->...ik", V, phase, np.conj(V))


def stiefel_exp(Om, n_t, atol=1e-10):
    """Geodesic endpoint at unit time from the tall identity frame.

    Om is (..., T, T) skew-Hermitian; the result keeps the first n_t
    columns of its exponential, a frame with orthonormal columns.
    """
    Om = np.asarray(Om, dtype=complex)
    _check_skew(Om, atol)
    if Om.ndim == 2:
        return expm(Om)[:, :n_t]
    return _expm_skew(Om)[..., :, :n_t]


def _skew_part(M):
    return 0.5 * (M - np.conj(M.T))


def _complete_unitary(C0):
    """Append columns to an orthonormal (m, n) block to reach a unitary."""
    m, n = C0.shape
    if m == n:
        return C0
    proj = np.eye(m, dtype=complex) - C0 @ np.conj(C0.T)
    u, s, _ = np.linalg.svd(proj)
    return np.concatenate([C0, u[:, : m - n]], axis=1)


def _log_attempt(M, N, Q, n_t, T, spin, tol, max_iter):
    V = _complete_unitary(np.concatenate([M, N], axis=0))
    if spin is not None:
        V = V.copy()
        V[:, n_t:] = V[:, n_t:] @ spin
    for _ in range(max_iter):
        L = logm(V)
        C = _skew_part(L[n_t:, n_t:])
        if np.linalg.norm(C) <= tol:
            B = Q @ L[n_t:, :n_t]
            Om = np.zeros((T, T), dtype=complex)
            Om[:n_t, :n_t] = _skew_part(L[:n_t, :n_t])
            Om[n_t:, :n_t] = B
            Om[:n_t, n_t:] = -np.conj(B.T)
            return Om
        V = V.copy()
        V[:, n_t:] = V[:, n_t:] @ _expm_skew(-C)
    return None


def stiefel_log(Phi, tol=1e-10, max_iter=400):
    """Skew-Hermitian generator whose geodesic reaches Phi at unit time.

    Iterative completion: extend the frame to a unitary, take the principal
    matrix log, drive the lower-right block to zero by re-exponentiating the
    orthogonal complement.  Far points can have several admissible
    generators; restarts explore the branches and the smallest one wins.
    Raises NotConverged when no branch with ``norm <= pi`` is found.
    """
    Phi = np.asarray(Phi, dtype=complex)
    T, n_t = Phi.shape
    M = Phi[:n_t]
    if T == n_t:
        Om = _skew_part(logm(M))
        return Om
    Q, N = np.linalg.qr(Phi[n_t:])
    k = Q.shape[1]
    best = None
    rng = np.random.default_rng(0)
    for attempt in range(4):
        if attempt == 0:
            spin = None
        else:
            G = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
            spin = np.linalg.qr(G)[0]
        Om = _log_attempt(M, N, Q, n_t, T, spin, tol, max_iter)
        if Om is None:
            continue
        size = np.linalg.norm(Om)
        if best is None or size < best[0]:
            best = (size, Om)
        if size <= 2.85:
            break  # inside the unique region; no other branch can undercut
    if best is None or best[0] > np.pi + 1e-9:
        raise NotConverged("no admissible generator found")
    return best[1]


def project_stiefel(M):
    """Nearest frame with orthonormal columns (polar factor via SVD)."""
    u, _, vh = np.linalg.svd(np.asarray(M, dtype=complex), full_matrices=False)
    return u @ vh
