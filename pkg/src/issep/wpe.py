"""Blind multichannel dereverberation by weighted prediction error.

Alternates two exact coordinate updates: per-(frequency, frame) weights
from the current dereverberated power, and per-frequency prediction
filters from weighted normal equations over the delayed frames. Late
reverberation predictable from frames at least ``delay`` back is
subtracted; the direct path is untouched by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import build_stacked
from .iss import regularized_solve

WEIGHT_FLOOR = 1e-10


@dataclass
class WpeFilter:
    """Prediction filters, shape (F, M, ML), with the run's diagnostics.

    ``objective`` traces sum_fn(u * ||x - Z xbar||^2 - M * log u), the
    joint objective both coordinate updates minimize; it is non-increasing
    when epsilon = 0.
    """

    Z: np.ndarray
    taps: int
    delay: int
    objective: list = field(default_factory=list)


def _objective(Xd: np.ndarray, u: np.ndarray, n_chan: int) -> float:
    power = np.sum(Xd.real**2 + Xd.imag**2, axis=0)
    return float(np.sum(u * power - n_chan * np.log(u)))


def wpe_dereverb(X, taps: int = 5, delay: int = 3, iterations: int = 1, epsilon: float = 1e-3):
    """Dereverberate a multichannel spectrogram.

    Parameters
    ----------
    X : MultichannelSpectrogram or ndarray (M, F, N)
        Reverberant input.
    taps : int
        Prediction filter length per channel, >= 1.
    delay : int
        Frames skipped before prediction starts, >= 1.
    iterations : int
        Weight/filter refinement rounds, >= 1.
    epsilon : float
        Diagonal loading of the stabilized solve; 0 demands full-rank
        delayed covariances and raises otherwise.

    Returns
    -------
    Xd : ndarray (M, F, N)
        Dereverberated spectrogram x - Z xbar.
    filt : WpeFilter
        Final filters plus the objective trace.
    """
    data = np.asarray(X.data if hasattr(X, "data") else X)
    if data.ndim != 3:
        raise ValueError("X must be (channels, freqs, frames)")
    if taps < 1 or delay < 1 or iterations < 1:
        raise ValueError("need taps >= 1, delay >= 1, iterations >= 1")
    M = data.shape[0]
    xt = build_stacked(data, taps, delay)
    Xbar = xt.data[M:]

    # Iteration-0 weights come from the raw observation power.
    u = 1.0 / np.maximum(WEIGHT_FLOOR, np.mean(data.real**2 + data.imag**2, axis=0))
    Xd = data
    Z = np.zeros((data.shape[1], M, M * taps), dtype=complex)
    trace = [_objective(Xd, u, M)]
    for _ in range(iterations):
        # Weighted covariances of the delayed frames, per frequency.
        Phi = np.einsum("fn,qfn,pfn->fqp", u, Xbar, Xbar.conj())
        cross = np.einsum("fn,qfn,pfn->fqp", u, Xbar, data.conj())
        G = regularized_solve(Phi, cross, epsilon)
        Z = G.conj().transpose(0, 2, 1)
        Xd = data - np.einsum("fmq,qfn->mfn", Z, Xbar)
        u = 1.0 / np.maximum(WEIGHT_FLOOR, np.mean(Xd.real**2 + Xd.imag**2, axis=0))
        trace.append(_objective(Xd, u, M))
    return Xd, WpeFilter(Z, taps, delay, trace)
