"""Separation and joint dereverberation by iterative source steering.

The optimizer walks every row/column position of the stacked demixing
system and applies the closed-form rank-1 correction that minimizes the
weighted quadratic cost at that position, never inverting a matrix. With
more microphones than sources, the extra degrees of freedom are captured
by background channels kept orthogonal to the targets through a
row-normalized, diagonally-loaded linear solve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DemixState,
    StackedObservation,
    background_estimates,
    build_stacked,
    demix,
    init_demix,
    projection_back,
)
from .models import SourceModel

LOG_DET_FLOOR = np.log(1e-300)


@dataclass
class IssConfig:
    """Knobs for the steering separator.

    ``n_sources`` of None means determined operation (as many sources as
    channels). ``warmstart_iterations`` runs tap-free sweeps before the
    tapped phase, the recommended recipe for clean (noise-free) input.
    """

    n_sources: int | None = None
    iterations: int = 15
    taps: int = 5
    delay: int = 3
    source_model: SourceModel = field(default_factory=SourceModel)
    epsilon: float = 1e-3
    ref_channel: int = 0
    track_cost: bool = False
    warmstart_iterations: int = 0

    def __post_init__(self):
        if self.iterations < 0 or self.warmstart_iterations < 0:
            raise ValueError("iteration counts must be >= 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.taps < 0 or self.delay < 1:
            raise ValueError("need taps >= 0 and delay >= 1")


@dataclass
class CovariancePair:
    """Input statistics reused by every background update.

    R: (F, M, M) mean over frames of x x^H. Cbar: (F, ML, M) mean of
    xbar x^H, where xbar holds the delayed frames.
    """

    R: np.ndarray
    Cbar: np.ndarray


def observation_covariances(xt: StackedObservation) -> CovariancePair:
    """Frame-averaged covariances of the current and delayed observation."""
    M = xt.n_channels
    N = xt.n_frames
    X = xt.data[:M]
    Xbar = xt.data[M:]
    R = np.einsum("mfn,pfn->fmp", X, X.conj()) / N
    Cbar = np.einsum("qfn,pfn->fqp", Xbar, X.conj()) / N
    return CovariancePair(R, Cbar)


def weighted_normal_system(A: np.ndarray, b: np.ndarray, epsilon: float):
    """Row-normalized normal equations (G, rhs) for the stabilized solve.

    G = A^H D^{-1} A + epsilon I with D carrying the squared row norms of
    A (unit weight for all-zero rows), so trace(G) = d + epsilon * d and
    epsilon acts as a relative eigenvalue shift.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    row_power = np.sum(A.real**2 + A.imag**2, axis=-1)
    weight = np.where(row_power > 0.0, row_power, 1.0)
    Ah = np.swapaxes(A, -1, -2).conj()
    G = Ah @ (A / weight[..., None])
    G = G + epsilon * np.eye(A.shape[-1])
    rhs = Ah @ (b / weight[..., None])
    return G, rhs


def regularized_solve(A: np.ndarray, b: np.ndarray, epsilon: float = 1e-3) -> np.ndarray:
    """Solve A x = b through row-normalized, diagonally-loaded normal equations.

    For epsilon = 0 and nonsingular A this reproduces the direct solution;
    for epsilon > 0 the system matrix is Hermitian positive definite
    regardless of the rank of A. Accepts stacked leading dimensions.

    Raises
    ------
    numpy.linalg.LinAlgError
        If epsilon = 0 and A is singular.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    vector_rhs = np.asarray(b).ndim == np.asarray(A).ndim - 1
    if vector_rhs:
        b = np.asarray(b)[..., None]
    G, rhs = weighted_normal_system(A, b, epsilon)
    x = np.linalg.solve(G, rhs)
    return x[..., 0] if vector_rhs else x


def effective_demixer(state: DemixState) -> np.ndarray:
    """Square M x M demixer whose determinant the cost penalizes.

    Determined: the current-frame block of P itself. Overdetermined: that
    block stacked over [J, -I], the rows producing the background channels.
    """
    K, M = state.n_src, state.n_chan
    top = state.P[:, :, :M]
    if K == M:
        return top
    F = state.n_freq
    W_hat = np.zeros((F, M, M), dtype=complex)
    W_hat[:, :K, :] = top
    W_hat[:, K:, :K] = state.J
    rng = np.arange(M - K)
    W_hat[:, K + rng, K + rng] = -1.0
    return W_hat


def eval_cost(
    state: DemixState,
    xt: StackedObservation,
    model: SourceModel | None = None,
    weights: np.ndarray | None = None,
) -> float:
    """Separation cost: data term minus 2N times the log-determinant sum.

    With ``model`` given, the data term is the model's contrast summed over
    sources — the quantity each sweep provably decreases. With ``weights``
    (shape (K, F, N), treated as constants) it is the weighted quadratic
    sum u * |y|^2, the fixed-weight objective each rank-1 update minimizes
    exactly. Exactly one of the two must be supplied.

    Raises
    ------
    ValueError
        If the effective demixer is singular (|det| below 1e-300).
    """
    if (model is None) == (weights is None):
        raise ValueError("supply exactly one of model= or weights=")
    Y = demix(state, xt)
    N = xt.n_frames
    if weights is not None:
        if weights.shape != Y.shape:
            raise ValueError(f"weights shape {weights.shape} != estimates shape {Y.shape}")
        data = float(np.sum(weights * (Y.real**2 + Y.imag**2)))
    else:
        data = float(sum(model.contrast(Y[k]) for k in range(state.n_src)))
    sign, logdet = np.linalg.slogdet(effective_demixer(state))
    if np.any(np.abs(sign) == 0.0) or np.any(logdet < LOG_DET_FLOOR):
        raise ValueError("degenerate demixing state: effective demixer is singular")
    return data - 2.0 * N * float(logdet.sum())


def steering_vector(
    Y: np.ndarray,
    y_l: np.ndarray,
    U: np.ndarray,
    n_frames: int,
    diag_row: int | None = None,
):
    """Closed-form steering vector for one rank-1 update, all frequencies.

    Parameters
    ----------
    Y : ndarray (K, F, N)
        Current source estimates.
    y_l : ndarray (F, N)
        Component being steered against.
    U : ndarray (K, F, N)
        Fixed positive weights per source.
    n_frames : int
        N, the normalizer of the diagonal branch.
    diag_row : int, optional
        Row receiving the power-normalization branch (set when the steered
        position is that source's own row), else all rows use the
        least-squares branch.

    Returns
    -------
    v : ndarray (K, F) complex
        Steering coefficients; zero where the denominator vanished.
    n_skipped : int
        Count of (row, frequency) updates skipped for zero power.
    """
    power = y_l.real**2 + y_l.imag**2
    denom = np.einsum("kfn,fn->kf", U, power)
    numer = np.einsum("kfn,kfn,fn->kf", U, Y, y_l.conj())
    ok = denom > 0.0
    safe = np.where(ok, denom, 1.0)
    v = np.where(ok, numer / safe, 0.0)
    if diag_row is not None:
        v[diag_row] = np.where(
            ok[diag_row], 1.0 - np.sqrt(n_frames / safe[diag_row]), 0.0
        )
    return v, int(ok.size - np.count_nonzero(ok))


def iss_sweep(state: DemixState, xt: StackedObservation, model: SourceModel) -> DemixState:
    """One pass of rank-1 steering updates over every stacked position.

    Source positions (the first K) get the full closed form including the
    power normalization of their own row. With more channels than sources,
    the next M - K positions steer against the background channels, the
    rank-1 direction being the row [J, -I] that produces them. Positions
    past M steer against the raw delayed components. Weights are refreshed
    from the current estimates once, at the start of the sweep; estimates
    are refreshed after every rank-1 update. The background coupling J is
    read but never written here.
    """
    K, M = state.n_src, state.n_chan
    N = xt.n_frames
    Q = xt.data.shape[0]
    new = state.copy()
    P = new.P
    Y = demix(new, xt)
    U = np.stack([model.weights(Y[k]) for k in range(K)])
    Z = background_estimates(new, xt.data[:M]) if M > K else None
    skipped = 0
    for ell in range(Q):
        if ell < K:
            y_l = Y[ell].copy()
            p_l = P[:, ell, :].copy()
            v, n_skip = steering_vector(Y, y_l, U, N, diag_row=ell)
            P -= v.T[:, :, None] * p_l[:, None, :]
        elif ell < M:
            bak = ell - K
            y_l = Z[bak]
            v, n_skip = steering_vector(Y, y_l, U, N)
            P[:, :, :K] -= v.T[:, :, None] * new.J[:, bak, None, :]
            P[:, :, ell] += v.T
        else:
            y_l = xt.data[ell]
            v, n_skip = steering_vector(Y, y_l, U, N)
            P[:, :, ell] -= v.T
        Y -= v[:, :, None] * y_l[None, :, :]
        skipped += n_skip
    new.skipped_updates += skipped
    return new


def background_update(
    state: DemixState, cov: CovariancePair, epsilon: float = 1e-3
) -> DemixState:
    """Refit the background coupling so targets and background decorrelate.

    Solves, per frequency, (A E_1) J^H = A E_2 with A = W R + U Cbar and
    [E_1 E_2] = I, making the empirical cross-covariance between source
    estimates and background channels vanish (exactly, when epsilon = 0).
    No-op when K = M.
    """
    K, M = state.n_src, state.n_chan
    if K == M:
        return state.copy()
    A = state.P[:, :, :M] @ cov.R + state.P[:, :, M:] @ cov.Cbar
    try:
        Jh = regularized_solve(A[:, :, :K], A[:, :, K:], epsilon)
    except np.linalg.LinAlgError:
        bad = [
            f
            for f in range(A.shape[0])
            if abs(np.linalg.det(A[f, :, :K])) < 1e-300
        ]
        raise np.linalg.LinAlgError(
            f"background update failed: singular target block at frequencies {bad[:8]}"
        ) from None
    new = state.copy()
    new.J = Jh.conj().transpose(0, 2, 1)
    return new


def _require_finite(state: DemixState, iteration: int) -> None:
    if not (np.all(np.isfinite(state.P)) and np.all(np.isfinite(state.J))):
        raise FloatingPointError(f"non-finite demixing state at iteration {iteration}")


def separate(X, cfg: IssConfig | None = None):
    """Run the full separator on a multichannel spectrogram.

    Parameters
    ----------
    X : MultichannelSpectrogram or ndarray (M, F, N)
        Mixture in the transform domain.
    cfg : IssConfig, optional
        Defaults: determined, 15 iterations, 5 taps, delay 3, Laplace model.

    Returns
    -------
    Y : ndarray (K, F, N)
        Separated sources, scale-aligned to the reference channel.
    state : DemixState
        Final demixing filters.
    trace : list of float or None
        Cost before the first iteration and after each one, when
        ``track_cost`` is set.
    """
    if cfg is None:
        cfg = IssConfig()
    data = np.asarray(X.data if hasattr(X, "data") else X)
    if data.ndim != 3:
        raise ValueError("X must be (channels, freqs, frames)")
    M, F, N = data.shape
    K = M if cfg.n_sources is None else cfg.n_sources
    if not 1 <= K <= M:
        raise ValueError(f"need 1 <= n_sources <= {M}, got {K}")
    if N <= M * (cfg.taps + 1):
        warnings.warn(
            f"only {N} frames for a {M * (cfg.taps + 1)}-dimensional stacked system; "
            "covariances will be rank deficient",
            stacklevel=2,
        )
    model = cfg.source_model
    overdetermined = M > K
    trace: list[float] | None = [] if cfg.track_cost else None

    xt = build_stacked(data, 0, cfg.delay)
    state = init_demix(M, K, 0, F, cfg.delay)
    cov = observation_covariances(xt) if overdetermined else None
    if trace is not None:
        trace.append(eval_cost(state, xt, model=model))

    phases = [(cfg.warmstart_iterations, 0)]
    phases.append((cfg.iterations, cfg.taps))
    done = 0
    for n_iter, taps in phases:
        if taps != xt.taps:
            xt = build_stacked(data, taps, cfg.delay)
            grown = init_demix(M, K, taps, F, cfg.delay)
            grown.P[:, :, :M] = state.P[:, :, :M]
            grown.J = state.J
            grown.skipped_updates = state.skipped_updates
            state = grown
            cov = observation_covariances(xt) if overdetermined else None
        for _ in range(n_iter):
            state = iss_sweep(state, xt, model)
            if overdetermined:
                state = background_update(state, cov, cfg.epsilon)
            done += 1
            _require_finite(state, done)
            if trace is not None:
                trace.append(eval_cost(state, xt, model=model))

    Y = demix(state, xt)
    Y = projection_back(Y, data, cfg.ref_channel)
    return Y, state, trace


def auxiva_iss(X, iterations: int = 15, model: SourceModel | None = None, ref_channel: int = 0):
    """Tap-free determined separation with plain demixing matrices.

    The classic steering loop: per iteration, refresh the weights, then for
    each source subtract the closed-form rank-1 correction from every row
    of the per-frequency demixing matrix. Returns the scale-aligned
    estimates and the final matrices, shape (F, M, M).
    """
    X = np.asarray(X)
    if model is None:
        model = SourceModel()
    M, F, N = X.shape
    W = np.zeros((F, M, M), dtype=complex)
    W[:] = np.eye(M)
    for _ in range(iterations):
        Y = np.einsum("fkq,qfn->kfn", W, X)
        U = np.stack([model.weights(Y[k]) for k in range(M)])
        for ell in range(M):
            y_l = Y[ell].copy()
            w_l = W[:, ell, :].copy()
            v, _ = steering_vector(Y, y_l, U, N, diag_row=ell)
            W -= v.T[:, :, None] * w_l[:, None, :]
            Y -= v[:, :, None] * y_l[None, :, :]
    Y = np.einsum("fkq,qfn->kfn", W, X)
    return projection_back(Y, X, ref_channel), W
