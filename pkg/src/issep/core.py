"""Shared data structures and assembly ops for the separation algorithms.

Covers delayed-frame stacking of the observation, the per-frequency
demixing state acted on by the steering sweeps, and the projection-back
scale alignment that resolves the per-source scale ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class StackedObservation:
    """Observation with delayed frames appended, shape (M(L+1), F, N).

    Rows 0..M-1 are the current frames; block ``l`` in 1..L at frame ``n``
    holds the observation at frame ``n - delay - (l - 1)``, zero where that
    index is negative.
    """

    data: np.ndarray
    n_channels: int
    taps: int
    delay: int

    @property
    def n_freq(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]


@dataclass
class DemixState:
    """Per-frequency demixing filters and background coupling.

    ``P`` has shape (F, K, M(L+1)); row k of ``P[f]`` applied to the stacked
    observation yields source k. The leading M columns act on current
    frames, the rest on delayed frames. ``J`` (shape (F, M-K, K)) couples
    the targets to the background channels and is empty when K = M.
    """

    P: np.ndarray
    J: np.ndarray
    n_src: int
    n_chan: int
    taps: int
    delay: int
    skipped_updates: int = 0

    @property
    def n_freq(self) -> int:
        return self.P.shape[0]

    def copy(self) -> "DemixState":
        return DemixState(
            self.P.copy(),
            self.J.copy(),
            self.n_src,
            self.n_chan,
            self.taps,
            self.delay,
            self.skipped_updates,
        )


def build_stacked(X: np.ndarray, taps: int, delay: int) -> StackedObservation:
    """Concatenate the observation with its delayed frames.

    Parameters
    ----------
    X : ndarray (M, F, N)
        Complex multichannel spectrogram.
    taps : int
        Number of delayed blocks L, >= 0.
    delay : int
        Frame delay D of the first block, >= 1. The most recent past frame
        used is ``n - delay``.

    Returns
    -------
    StackedObservation
        Shape (M(L+1), F, N); taps=0 returns a copy of the input.
    """
    X = np.asarray(X)
    if X.ndim != 3:
        raise ValueError("X must be (channels, freqs, frames)")
    if taps < 0:
        raise ValueError("taps must be >= 0")
    if delay <= 0:
        raise ValueError("delay must be >= 1; smaller values would leak the current frame")
    M, F, N = X.shape
    out = np.zeros(((taps + 1) * M, F, N), dtype=complex)
    out[:M] = X
    for l in range(1, taps + 1):
        shift = delay + (l - 1)
        if shift < N:
            out[l * M : (l + 1) * M, :, shift:] = X[:, :, : N - shift]
    return StackedObservation(out, M, taps, delay)


def init_demix(n_chan: int, n_src: int, taps: int, n_freq: int, delay: int = 1) -> DemixState:
    """Identity initialization: sources start as the first K microphones."""
    if not 1 <= n_src <= n_chan:
        raise ValueError(f"need 1 <= n_src <= n_chan, got K={n_src}, M={n_chan}")
    P = np.zeros((n_freq, n_src, n_chan * (taps + 1)), dtype=complex)
    P[:, :, :n_src] = np.eye(n_src)
    J = np.zeros((n_freq, n_chan - n_src, n_src), dtype=complex)
    return DemixState(P, J, n_src, n_chan, taps, delay)


def demix(state: DemixState, xt: StackedObservation) -> np.ndarray:
    """Apply the demixing filters: Y[k, f, n] = sum_q P[f, k, q] * xt[q, f, n]."""
    if state.P.shape[2] != xt.data.shape[0] or state.P.shape[0] != xt.data.shape[1]:
        raise ValueError(
            f"state P {state.P.shape} does not match stacked observation {xt.data.shape}"
        )
    return np.einsum("fkq,qfn->kfn", state.P, xt.data)


def background_estimates(state: DemixState, X: np.ndarray) -> np.ndarray:
    """Background channels Z[f, n] = J_f @ X[:K, f, n] - X[K:, f, n].

    Empty (0 rows) when K = M.
    """
    K = state.n_src
    return np.einsum("fjk,kfn->jfn", state.J, X[:K]) - X[K:]


def projection_back(Y: np.ndarray, X: np.ndarray, ref: int = 0) -> np.ndarray:
    """Rescale each source to its least-squares image at a reference channel.

    Solves min_a sum_n |X[ref, f, n] - a * Y[k, f, n]|^2 per (k, f) and
    returns the scaled estimates. Bins where a source has zero energy are
    left unscaled.
    """
    if ref < 0 or ref >= X.shape[0]:
        raise ValueError(f"reference channel {ref} out of range for {X.shape[0]} channels")
    num = np.einsum("fn,kfn->kf", X[ref], Y.conj())
    den = np.einsum("kfn,kfn->kf", Y, Y.conj()).real
    a = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 1.0)
    return a[:, :, None] * Y
