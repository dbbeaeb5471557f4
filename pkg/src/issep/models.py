"""Pluggable source models supplying majorization weights.

Each model defines a per-(frequency, frame) weight u_fn > 0 computed from a
current source estimate, and the matching contrast function whose tangent
majorizer those weights realize. The contrasts use a smooth continuation
below the weight floor so the floored weights remain exact derivatives,
which keeps the descent guarantee airtight on silent frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODEL_NAMES = ("gauss", "laplace", "unit")


@dataclass
class SourceModel:
    """Weight function selected by name: "gauss", "laplace", or "unit".

    gauss
        Time-varying Gaussian with per-frame variance shared across
        frequencies: u_fn = 1 / max(floor, mean_f |y_fn|^2).
    laplace
        Spherical Laplace over the frequency vector:
        u_fn = 1 / max(floor, 2 * sqrt(sum_f |y_fn|^2)).
    unit
        Constant 1 (plain quadratic contrast).
    """

    kind: str = "laplace"
    floor: float = 1e-10

    def __post_init__(self):
        if self.kind not in MODEL_NAMES:
            raise ValueError(f"unknown source model {self.kind!r}; pick from {MODEL_NAMES}")
        if self.floor <= 0:
            raise ValueError("floor must be positive")

    def weights(self, Y: np.ndarray) -> np.ndarray:
        """Per-(f, n) weights from a source estimate of shape (F, N)."""
        if not np.all(np.isfinite(Y)):
            raise ValueError("source estimate contains non-finite values")
        F, N = Y.shape
        power = Y.real**2 + Y.imag**2
        if self.kind == "unit":
            return np.ones((F, N))
        if self.kind == "gauss":
            mean_power = power.mean(axis=0)
            u = 1.0 / np.maximum(self.floor, mean_power)
            return np.broadcast_to(u, (F, N)).copy()
        # laplace
        radius = np.sqrt(power.sum(axis=0))
        u = 1.0 / np.maximum(self.floor, 2.0 * radius)
        return np.broadcast_to(u, (F, N)).copy()

    def contrast(self, Y: np.ndarray) -> float:
        """Contrast G(Y) whose tangent majorizer has slope weights(Y).

        unit: sum |y|^2. gauss: F * sum_n log(mean_f |y_fn|^2), continued
        linearly below the floor. laplace: sum_n sqrt(sum_f |y_fn|^2),
        continued quadratically where 2 * radius < floor.
        """
        power = Y.real**2 + Y.imag**2
        if self.kind == "unit":
            return float(power.sum())
        F = Y.shape[0]
        if self.kind == "gauss":
            m = power.mean(axis=0)
            g = np.where(
                m >= self.floor,
                np.log(np.maximum(m, self.floor)),
                m / self.floor + np.log(self.floor) - 1.0,
            )
            return float(F * g.sum())
        # laplace: sqrt(p) for p >= (floor/2)^2, else p/floor + floor/4
        p = power.sum(axis=0)
        knee = (self.floor / 2.0) ** 2
        g = np.where(p >= knee, np.sqrt(np.maximum(p, knee)), p / self.floor + self.floor / 4.0)
        return float(g.sum())
