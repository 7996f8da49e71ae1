"""Peak location on a sampled curve, shared by the sweep analyses."""
from __future__ import annotations

import numpy as np

from .errors import InsufficientDataError


def quadratic_peak(x, y) -> tuple[float, float, bool]:
    """Refined maximum of samples ``y`` over grid ``x``.

    Takes the discrete argmax and, when it is interior, refines it with
    the parabola through the three surrounding points (vertex clamped to
    that bracket).  Returns ``(x_peak, y_peak, at_boundary)``; a boundary
    or flat argmax is returned unrefined.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InsufficientDataError("need matching 1-d grids")
    if x.size < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {x.size}")
    i = int(np.argmax(y))
    if i == 0 or i == x.size - 1:
        return float(x[i]), float(y[i]), True
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    # parabola vertex; denom <= 0 would mean no local curvature at the max
    denom = (y0 - 2.0 * y1 + y2)
    if denom >= -1e-300:
        return float(x1), float(y1), False
    # uniform-grid form is not assumed; use the general three-point vertex
    d01, d12 = x1 - x0, x2 - x1
    num = d01 * d01 * (y1 - y2) - d12 * d12 * (y1 - y0)
    den = d01 * (y1 - y2) + d12 * (y1 - y0)
    if den == 0.0:
        return float(x1), float(y1), False
    xv = x1 + 0.5 * num / den
    xv = float(min(max(xv, x0), x2))
    # value at the vertex from the same parabola (Lagrange form)
    l0 = (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2))
    l1 = (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2))
    l2 = (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1))
    yv = float(y0 * l0 + y1 * l1 + y2 * l2)
    return xv, yv, False
