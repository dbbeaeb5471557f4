"""Seeded synthetic mixture scenes with full ground truth.

Sources are spectrally tilted noise under a smooth heavy-tailed amplitude
envelope — nonstationary and super-Gaussian, the structure the separator
exploits. Mixing is either anechoic (per-pair gain and integer delay) or
reverberant (a minimum-phase direct path plus an exponentially decaying
random tail); channel noise is added at an exact SNR. Everything is
deterministic given the seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve, lfilter

DIRECT_LENGTH = 32


@dataclass
class MixtureScene:
    """Rendered scene: dry sources, filters, images, noise, and the mixture.

    ``images[k, m]`` is source k as observed at channel m (direct plus
    tail); the mixture is exactly ``images.sum(axis=0) + noise``.
    """

    sources: np.ndarray
    direct_filters: np.ndarray
    tail_filters: np.ndarray | None
    noise: np.ndarray
    mixture: np.ndarray
    images: np.ndarray
    direct_images: np.ndarray
    tail_images: np.ndarray
    sample_rate: int
    seed: int
    params: dict = field(default_factory=dict)

    @property
    def n_sources(self) -> int:
        return self.sources.shape[0]

    @property
    def n_channels(self) -> int:
        return self.mixture.shape[0]


def _make_source(rng: np.random.Generator, n_samples: int, sample_rate: int) -> np.ndarray:
    white = rng.standard_normal(n_samples)
    tilt = rng.uniform(0.80, 0.97)
    colored = lfilter([1.0], [1.0, -tilt], white)
    node_hop = int(0.08 * sample_rate)
    n_nodes = n_samples // node_hop + 2
    nodes = rng.lognormal(mean=0.0, sigma=1.2, size=n_nodes)
    env = np.interp(np.arange(n_samples), np.arange(n_nodes) * node_hop, nodes)
    s = colored * env
    return s / np.sqrt(np.mean(s**2))


def _draw_gains(rng: np.random.Generator, n_chan: int, n_src: int) -> np.ndarray:
    # Redraw until the gain matrix is comfortably invertible.
    for _ in range(200):
        g = rng.uniform(0.3, 1.0, size=(n_chan, n_src))
        sv = np.linalg.svd(g, compute_uv=False)
        if sv[0] / sv[-1] <= 8.0:
            return g
    raise RuntimeError("could not draw a well-conditioned gain matrix")


def _min_phase_direct(rng: np.random.Generator) -> np.ndarray:
    """Short FIR whose leading tap dominates the rest, hence minimum phase."""
    h = np.zeros(DIRECT_LENGTH)
    h[0] = 1.0
    decay = np.exp(-np.arange(1, DIRECT_LENGTH) / 4.0)
    rest = rng.standard_normal(DIRECT_LENGTH - 1) * decay
    scale = np.sum(np.abs(rest))
    if scale > 0.9:
        rest *= 0.9 / scale
    h[1:] = rest
    return h


def make_scene(
    n_sources: int,
    n_channels: int,
    kind: str = "anechoic",
    rt_decay_ms: float = 300.0,
    snr_db: float = math.inf,
    duration_s: float = 3.0,
    sample_rate: int = 16000,
    seed: int = 0,
    max_delay_samples: int = 0,
) -> MixtureScene:
    """Render a seeded mixture scene.

    Parameters
    ----------
    n_sources, n_channels : int
        K and M. K > M is allowed but warned about.
    kind : {"anechoic", "reverberant"}
        Anechoic applies per-pair gains and integer delays up to
        ``max_delay_samples`` (0 means instantaneous mixing); reverberant
        adds an exponentially decaying random tail sized by ``rt_decay_ms``
        (the -60 dB point) behind a minimum-phase direct path.
    snr_db : float
        Channel-noise level; +inf disables noise. Achieved exactly,
        measured over the full signal.
    duration_s : float
        Scene length, >= 1 s.
    seed : int
        Drives every random draw.
    """
    if kind not in ("anechoic", "reverberant"):
        raise ValueError(f"unknown scene kind {kind!r}")
    if duration_s < 1.0:
        raise ValueError("duration must be at least 1 s")
    if n_sources > n_channels:
        warnings.warn(
            f"underdetermined scene: {n_sources} sources into {n_channels} channels",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    T = int(round(duration_s * sample_rate))
    K, M = n_sources, n_channels

    sources = np.stack([_make_source(rng, T, sample_rate) for _ in range(K)])
    gains = _draw_gains(rng, M, K)

    if kind == "anechoic":
        flen = max_delay_samples + 1
        direct = np.zeros((M, K, flen))
        for m in range(M):
            for k in range(K):
                d = int(rng.integers(0, max_delay_samples + 1)) if max_delay_samples else 0
                direct[m, k, d] = gains[m, k]
        tail = None
    else:
        tail_len = int(rt_decay_ms / 1000.0 * sample_rate)
        onset = 3 * 160 + DIRECT_LENGTH  # past the predictor's delay horizon
        flen = onset + rng.integers(0, 160) + tail_len
        direct = np.zeros((M, K, flen))
        tail = np.zeros((M, K, flen))
        envelope = 10.0 ** (-3.0 * np.arange(tail_len) / tail_len)
        for m in range(M):
            for k in range(K):
                d = int(rng.integers(0, 40))
                direct[m, k, d : d + DIRECT_LENGTH] = gains[m, k] * _min_phase_direct(rng)
                start = onset + int(rng.integers(0, 120))
                taps = rng.standard_normal(tail_len) * envelope
                # Tail energy a few dB below the direct path.
                drr_db = rng.uniform(0.0, 3.0)
                e_direct = np.sum(direct[m, k] ** 2)
                taps *= np.sqrt(e_direct * 10.0 ** (-drr_db / 10.0) / np.sum(taps**2))
                stop = min(flen, start + tail_len)
                tail[m, k, start:stop] = taps[: stop - start]

    direct_images = np.zeros((K, M, T))
    tail_images = np.zeros((K, M, T))
    for k in range(K):
        for m in range(M):
            direct_images[k, m] = fftconvolve(sources[k], direct[m, k])[:T]
            if tail is not None:
                tail_images[k, m] = fftconvolve(sources[k], tail[m, k])[:T]
    images = direct_images + tail_images

    clean = images.sum(axis=0)
    if math.isinf(snr_db):
        noise = np.zeros((M, T))
    else:
        noise = rng.standard_normal((M, T))
        p_clean = np.mean(clean**2)
        p_noise = np.mean(noise**2)
        noise *= np.sqrt(p_clean / p_noise * 10.0 ** (-snr_db / 10.0))
    mixture = clean + noise

    residual = np.abs(mixture - (images.sum(axis=0) + noise)).max()
    if residual > 1e-10 * max(1.0, np.abs(mixture).max()):
        raise AssertionError("scene additivity check failed")

    params = {
        "n_sources": K,
        "n_channels": M,
        "kind": kind,
        "rt_decay_ms": rt_decay_ms,
        "snr_db": None if math.isinf(snr_db) else snr_db,
        "duration_s": duration_s,
        "sample_rate": sample_rate,
        "seed": seed,
        "max_delay_samples": max_delay_samples,
    }
    return MixtureScene(
        sources=sources,
        direct_filters=direct,
        tail_filters=tail,
        noise=noise,
        mixture=mixture,
        images=images,
        direct_images=direct_images,
        tail_images=tail_images,
        sample_rate=sample_rate,
        seed=seed,
        params=params,
    )


def oracle_images(scene: MixtureScene) -> np.ndarray:
    """Ground-truth per-source images, shape (K, M, T).

    Verifies that images plus noise reproduce the mixture before returning.
    """
    recon = scene.images.sum(axis=0) + scene.noise
    scale = max(1.0, float(np.abs(scene.mixture).max()))
    if np.abs(recon - scene.mixture).max() > 1e-10 * scale:
        raise AssertionError("images + noise do not reproduce the mixture")
    return scene.images
