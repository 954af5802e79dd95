"""Container for numerically computed similarity profiles.

A ProfileGrid stores a profile together with its first three derivatives on
a 1-D node set, plus convergence metadata and (once fitted) the far-field
bundle coefficients.  It interpolates itself with C^1 cubic Hermite pieces,
which is accurate enough for sup-norm comparisons on the dense meshes the
solvers emit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .odecore import ModelParams


@dataclass
class ProfileGrid:
    """Profile f with derivatives f', f'', f''' sampled on monotone nodes.

    values has shape (4, len(nodes)); row i holds the i-th derivative.
    Nodes increase for boundary-value solutions and decrease for inward
    shooting trajectories; either orientation is accepted.
    """

    nodes: np.ndarray
    values: np.ndarray
    params: ModelParams
    fitted: Optional[Any] = None          # BundleCoeffs once fit_tail has run
    residual_norm: float = np.nan
    converged: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (4, self.nodes.size):
            raise ValueError(f"values must have shape (4, {self.nodes.size}), "
                             f"got {self.values.shape}")
        d = np.diff(self.nodes)
        if self.nodes.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("nodes must be strictly monotone")

    def _oriented(self):
        if self.nodes.size > 1 and self.nodes[1] < self.nodes[0]:
            return self.nodes[::-1], self.values[:, ::-1]
        return self.nodes, self.values

    def __call__(self, y, order: int = 0):
        """Interpolated derivative of the given order (0..3) at y."""
        if not 0 <= order <= 3:
            raise ValueError(f"order must be in 0..3, got {order}")
        x, v = self._oriented()
        if order == 3:
            # slope of the f'' interpolant; matches the stored f''' at nodes
            return CubicHermiteSpline(x, v[2], v[3])(np.asarray(y, dtype=float), nu=1)
        spline = CubicHermiteSpline(x, v[order], v[order + 1])
        return spline(np.asarray(y, dtype=float))

    @property
    def y_span(self) -> tuple[float, float]:
        x, _ = self._oriented()
        return float(x[0]), float(x[-1])

    def even_extension(self) -> "ProfileGrid":
        """Reflect a half-line profile about y = 0 (odd rows flip sign)."""
        x, v = self._oriented()
        if x[0] < 0:
            return self
        if x[0] == 0.0:
            xm, vm = x[1:], v[:, 1:]
        else:
            xm, vm = x, v
        sign = np.array([1.0, -1.0, 1.0, -1.0])[:, None]
        nodes = np.concatenate([-xm[::-1], x])
        values = np.concatenate([sign * vm[:, ::-1], v], axis=1)
        return ProfileGrid(nodes, values, self.params, fitted=self.fitted,
                           residual_norm=self.residual_norm,
                           converged=self.converged, meta=dict(self.meta))

    def restrict(self, y_lo: float, y_hi: float) -> "ProfileGrid":
        x, v = self._oriented()
        mask = (x >= y_lo) & (x <= y_hi)
        if mask.sum() < 2:
            raise ValueError(f"fewer than 2 nodes in [{y_lo}, {y_hi}]")
        return ProfileGrid(x[mask], v[:, mask], self.params, fitted=self.fitted,
                           residual_norm=self.residual_norm,
                           converged=self.converged, meta=dict(self.meta))
