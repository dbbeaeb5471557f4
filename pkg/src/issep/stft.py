"""Short-time Fourier analysis/synthesis and WAV file I/O.

Analysis uses a periodic Hann window; synthesis uses the canonical dual
window, so the round trip is exact (up to floating point) on the interior
region fully covered by overlapping frames. Frame ``n`` covers samples
``[n * hop, n * hop + window_length)``; the tail of the signal is
zero-padded so every sample falls inside at least one frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

EPS = 1e-10


@dataclass
class StftConfig:
    """Framing parameters for analysis and synthesis.

    Defaults are 25 ms windows with 10 ms shifts at 16 kHz, zero-padded
    to a 512-point transform (257 one-sided bins).
    """

    window_length: int = 400
    hop: int = 160
    fft_length: int = 512
    window: str = "hann"

    def __post_init__(self):
        if not (0 < self.hop <= self.window_length <= self.fft_length):
            raise ValueError(
                "need 0 < hop <= window_length <= fft_length, got "
                f"hop={self.hop}, window={self.window_length}, fft={self.fft_length}"
            )
        if self.window != "hann":
            raise ValueError(f"unknown window taper: {self.window!r}")

    @property
    def n_freq(self) -> int:
        return self.fft_length // 2 + 1

    def analysis_window(self) -> np.ndarray:
        # Periodic Hann; w[0] = 0, never reaches 1 at the last tap.
        t = np.arange(self.window_length)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * t / self.window_length)

    def synthesis_window(self) -> np.ndarray:
        """Canonical dual of the analysis window for unit-gain overlap-add."""
        w = self.analysis_window()
        wsq_sum = np.zeros(self.window_length)
        n_shift = self.window_length // self.hop + 1
        for j in range(-n_shift, n_shift + 1):
            start = j * self.hop
            lo, hi = max(0, start), min(self.window_length, start + self.window_length)
            if lo < hi:
                wsq_sum[lo:hi] += w[lo - start : hi - start] ** 2
        return w / np.maximum(wsq_sum, EPS)


@dataclass
class Waveform:
    """Multichannel time-domain signal, shape (channels, samples)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2:
            raise ValueError("samples must be 1-D or 2-D (channels, samples)")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class MultichannelSpectrogram:
    """Complex spectrogram, shape (channels, freqs, frames)."""

    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    sample_rate: int = 16000

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ValueError("data must be (channels, freqs, frames)")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_freq(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]


def _frame_count(n_samples: int, cfg: StftConfig) -> int:
    if n_samples <= cfg.window_length:
        return 1
    return int(np.ceil((n_samples - cfg.window_length) / cfg.hop)) + 1


def stft(w: Waveform, cfg: StftConfig | None = None) -> MultichannelSpectrogram:
    """Analyze a waveform into a one-sided complex spectrogram.

    Parameters
    ----------
    w : Waveform
        Input signal, any channel count.
    cfg : StftConfig, optional
        Framing parameters; defaults match the 16 kHz setup.

    Returns
    -------
    MultichannelSpectrogram
        Shape (channels, fft_length // 2 + 1, frames).
    """
    if cfg is None:
        cfg = StftConfig()
    x = w.samples
    if x.size == 0:
        raise ValueError("empty waveform")
    if not np.all(np.isfinite(x)):
        raise ValueError("waveform contains non-finite samples")

    n_frames = _frame_count(w.n_samples, cfg)
    padded = np.zeros((w.n_channels, (n_frames - 1) * cfg.hop + cfg.window_length))
    padded[:, : w.n_samples] = x

    idx = np.arange(cfg.window_length)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = padded[:, idx] * cfg.analysis_window()
    spec = np.fft.rfft(frames, n=cfg.fft_length, axis=-1)
    return MultichannelSpectrogram(spec.transpose(0, 2, 1), cfg, w.sample_rate)


def istft(S: MultichannelSpectrogram, length: int | None = None) -> Waveform:
    """Synthesize a waveform by weighted overlap-add with the dual window.

    Parameters
    ----------
    S : MultichannelSpectrogram
        One-sided spectrogram carrying its analysis config.
    length : int, optional
        Trim or zero-pad the result to this many samples.

    Returns
    -------
    Waveform
        Reconstruction; exact on the interior when ``S`` came from stft.
    """
    cfg = S.config
    if S.n_freq != cfg.n_freq:
        raise ValueError(
            f"spectrogram has {S.n_freq} bins but config implies {cfg.n_freq}"
        )
    spec = S.data.transpose(0, 2, 1).copy()
    # DC and Nyquist describe real quantities of the underlying frame.
    spec[..., 0] = spec[..., 0].real
    spec[..., -1] = spec[..., -1].real
    frames = np.fft.irfft(spec, n=cfg.fft_length, axis=-1)[..., : cfg.window_length]
    frames *= cfg.synthesis_window()

    n_ch, n_frames = frames.shape[0], frames.shape[1]
    out_len = (n_frames - 1) * cfg.hop + cfg.window_length
    out = np.zeros((n_ch, out_len))
    for n in range(n_frames):
        out[:, n * cfg.hop : n * cfg.hop + cfg.window_length] += frames[:, n]

    if length is not None:
        trimmed = np.zeros((n_ch, length))
        keep = min(length, out_len)
        trimmed[:, :keep] = out[:, :keep]
        out = trimmed
    return Waveform(out, S.sample_rate)


def read_wav(path) -> Waveform:
    """Read a RIFF WAV file (16-bit PCM or 32/64-bit float) as float64."""
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    x = data.T.astype(np.float64)
    if data.dtype == np.int16:
        x /= 32768.0
    elif data.dtype == np.int32:
        x /= 2147483648.0
    return Waveform(x, rate)


def write_wav(path, w: Waveform, subtype: str = "float32") -> None:
    """Write a waveform as interleaved WAV, 32-bit float or 16-bit PCM."""
    x = w.samples.T
    if subtype == "float32":
        wavfile.write(path, w.sample_rate, x.astype(np.float32))
    elif subtype == "pcm16":
        clipped = np.clip(x, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, w.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    else:
        raise ValueError(f"unsupported subtype: {subtype!r}")
