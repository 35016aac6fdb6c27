"""Finite-difference oracle used by the test suite to validate the jets.

Central differences over a scalar function of k floats, with one level of
Richardson extrapolation.  Step sizes grow with the derivative order: at
double precision a k-th order central difference loses roughly eps/h^k to
cancellation, so the defaults balance truncation against roundoff per order.
Not intended for production use.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .expr import ExprDomainError
from .geometry import DegenerateMetric
from .jets import DomainError

# per-order default base steps (relative to the coordinate scale)
_DEFAULT_STEPS = {1: 1e-4, 2: 1e-4, 3: 6.3e-4, 4: 2.2e-3}


class StencilDomainError(RuntimeError):
    """A stencil point left the function's admissible domain."""


def fd_partial(
    f: Callable[[np.ndarray], float],
    point: Sequence[float],
    multi_index: Sequence[int],
    step: float | None = None,
    richardson: bool = True,
) -> float:
    """Mixed central-difference partial d^k f at `point`.

    `multi_index` lists one variable index per differentiation (total order
    at most 4).  With `richardson` the stencil is evaluated at two step
    scales and extrapolated once, removing the leading h^2 error.
    """
    point = np.asarray(point, dtype=float)
    k = len(multi_index)
    if k == 0:
        return float(f(point))
    if k > 4:
        raise ValueError("total derivative order must be <= 4")
    base = _DEFAULT_STEPS[k] if step is None else float(step)
    steps = base * np.maximum(1.0, np.abs(point))

    def central(pt: np.ndarray, idxs: Sequence[int], lam: float) -> float:
        if not idxs:
            try:
                return float(f(pt))
            except (
                DomainError,
                ExprDomainError,
                DegenerateMetric,
                ValueError,
                ZeroDivisionError,
                OverflowError,
            ) as err:
                raise StencilDomainError(
                    f"stencil point {pt} left the domain: {err}"
                ) from err
        i = idxs[0]
        h = lam * steps[i]
        up = pt.copy()
        up[i] += h
        dn = pt.copy()
        dn[i] -= h
        return (central(up, idxs[1:], lam) - central(dn, idxs[1:], lam)) / (2.0 * h)

    coarse = central(point, list(multi_index), 1.0)
    if not richardson:
        return coarse
    fine = central(point, list(multi_index), 0.5)
    return (4.0 * fine - coarse) / 3.0
