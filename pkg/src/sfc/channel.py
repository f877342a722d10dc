"""Frequency-selective Rayleigh fading with counter-based per-trial streams.

Each trial owns an independent Philox stream keyed by
(master_seed, trial_index), so trial t of a run is reproducible without
generating trials 0..t-1 first.  Gaussians come from an explicit
Box-Muller transform on that stream.
"""

import numpy as np

GAUSSIAN_ALGORITHM = "philox-box-muller"


def trial_rng(master_seed, trial_index):
    key = np.array([master_seed, trial_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normal(rng, shape):
    """Box-Muller pairs; u1 is flipped into (0,1] so log never sees 0."""
    u1 = 1.0 - rng.random(shape)
    u2 = rng.random(shape)
    r = np.sqrt(-2.0 * np.log(u1))
    return r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)


def complex_normal(rng, shape, var=1.0):
    """i.i.d. circular complex gaussians with E|x|^2 = var."""
    a, b = standard_normal(rng, shape)
    return np.sqrt(var / 2.0) * (a + 1j * b)


def sample_taps(L, n_t, n_r, rng):
    """L tap matrices, entries CN(0, 1/L) so the per-tone gain is unit."""
    return complex_normal(rng, (L, n_t, n_r), var=1.0 / L)


def tap_transfer(taps, K):
    """Per-tone transfer H_hat[k] = sum_l taps[l] * exp(-2*pi*i*k*l/K)."""
    L = taps.shape[0]
    phase = np.exp(-2j * np.pi * np.outer(np.arange(K), np.arange(L)) / K)
    return np.einsum("kl,ltr->ktr", phase, taps)


def sample_channel(K, L, n_t, n_r, rng):
    taps = sample_taps(L, n_t, n_r, rng)
    return taps, tap_transfer(taps, K)


def transmit(word, h_hat, rho, rng=None, noiseless=False):
    """Received tones: sqrt(rho*K/n_t) * word_k @ H_hat_k (+ unit noise)."""
    word = np.asarray(word)
    K, n_t = word.shape
    out = np.sqrt(rho * K / n_t) * np.einsum("kt,ktr->kr", word, h_hat)
    if not noiseless:
        if rng is None:
            raise ValueError("rng required unless noiseless")
        out = out + complex_normal(rng, out.shape, var=1.0)
    return out
