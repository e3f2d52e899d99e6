"""Bound-preserving scaling limiters applied at the decomposition point set.

Both limiters contract the solution polynomial toward its cell average,
p~ = theta (p - avg) + avg, which in the orthonormal modal basis is a pure
scaling of the non-constant coefficients: cell averages are preserved exactly
in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from crkdg.operators import Discretization, SolutionField

__all__ = ["LimiterReport", "LimiterPreconditionError", "limit_scalar", "limit_euler", "limit_field"]

_FLAT = 1e-14  # denominator guard for flat polynomials
_ULP = 8.0 * np.finfo(float).eps  # re-trigger guard scaled by cell magnitudes


class LimiterPreconditionError(RuntimeError):
    """A cell average violated the limiter precondition."""


@dataclass
class LimiterReport:
    cells_touched: int = 0
    theta_min: float = 1.0
    stage_active: list = field(default_factory=list)
    boundary_cells: int = 0  # cells whose average sits exactly on the floor


def _apply_theta(coeffs: np.ndarray, theta: np.ndarray, component: int | None = None) -> None:
    if component is None:
        coeffs[..., 1:, :] *= theta[..., None, None]
    else:
        coeffs[..., 1:, component] *= theta[..., None]


def limit_scalar(disc: Discretization, fld: SolutionField, bounds) -> LimiterReport:
    """Scalar maximum-principle limiter: squash values at S_K into [lo, hi].

    Requires every active cell average in [lo, hi] (up to 1e-12 roundoff, in
    which case the cell is flattened to its average).  Modifies in place.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    active = disc.mesh.active
    vals = disc.decomposition_values(fld)[..., 0]      # (*grid, ndec)
    avg = fld.averages[..., 0]

    bad = active & ((avg < lo - 1e-12) | (avg > hi + 1e-12))
    if bad.any():
        cell = tuple(int(v) for v in np.argwhere(bad)[0])
        raise LimiterPreconditionError(
            f"cell {cell} average {avg[cell]!r} outside bounds [{lo}, {hi}]")

    vmax = np.max(vals, axis=-1)
    vmin = np.min(vals, axis=-1)
    num_hi = hi - avg
    num_lo = avg - lo
    den_hi = vmax - avg
    den_lo = avg - vmin
    # Trigger only beyond the cell's own roundoff so re-limiting a limited
    # cell is an exact no-op; stays far inside the documented 1e-12 slack.
    slack_hi = _ULP * (np.abs(avg) + den_hi)
    slack_lo = _ULP * (np.abs(avg) + den_lo)
    theta = np.ones_like(avg)
    trig_hi = (vmax > hi + slack_hi) & (den_hi > _FLAT)
    trig_lo = (vmin < lo - slack_lo) & (den_lo > _FLAT)
    ratio_hi = np.divide(np.abs(num_hi), den_hi, out=np.ones_like(avg), where=trig_hi)
    ratio_lo = np.divide(np.abs(num_lo), den_lo, out=np.ones_like(avg), where=trig_lo)
    np.minimum(theta, ratio_hi, out=theta, where=trig_hi)
    np.minimum(theta, ratio_lo, out=theta, where=trig_lo)
    # Averages within roundoff of a bound with an out-of-bound point: flatten.
    theta[trig_hi & (num_hi < 0)] = 0.0
    theta[trig_lo & (num_lo < 0)] = 0.0
    theta[~active] = 1.0

    _apply_theta(fld.coeffs, theta)
    touched = active & (theta < 1.0)
    return LimiterReport(
        cells_touched=int(np.count_nonzero(touched)),
        theta_min=float(np.min(theta[active], initial=1.0)),
        stage_active=[bool(touched.any())],
    )


def limit_euler(disc: Discretization, fld: SolutionField, eps: float) -> LimiterReport:
    """Two-stage positivity limiter for Euler: density first, then internal energy.

    Stage 1 scales the density polynomial so rho >= eps at every point of S_K.
    Stage 2 evaluates rho*e from the stage-1 density and scales all components
    so rho*e >= eps at S_K.  Cell averages must lie in the numerical admissible
    set (rho_avg >= eps, p_avg >= eps); averages exactly on the floor flatten
    the cell and are counted in the report.
    """
    active = disc.mesh.active
    coeffs = fld.coeffs
    avg = fld.averages                                  # (*grid, m)
    rho_avg = avg[..., 0]
    mom_avg = avg[..., 1:-1]
    E_avg = avg[..., -1]
    rhoe_avg = E_avg - 0.5 * np.sum(mom_avg**2, axis=-1) / rho_avg
    gamma = disc.model.gamma

    bad = active & ((rho_avg < eps) | ((gamma - 1.0) * rhoe_avg < eps))
    if bad.any():
        cell = tuple(int(v) for v in np.argwhere(bad)[0])
        raise LimiterPreconditionError(
            f"cell {cell} average (rho={rho_avg[cell]!r}, "
            f"p={(gamma - 1.0) * rhoe_avg[cell]!r}) outside admissible floor {eps!r}")

    vals = disc.decomposition_values(fld)               # (*grid, ndec, m)
    rho_min = np.min(vals[..., 0], axis=-1)
    den1 = rho_avg - rho_min
    theta1 = np.ones_like(rho_avg)
    need1 = (rho_min < eps - _ULP * (np.abs(rho_avg) + np.abs(den1))) & (den1 > _FLAT)
    np.divide(rho_avg - eps, den1, out=theta1, where=need1)
    np.clip(theta1, 0.0, 1.0, out=theta1)
    theta1[~active] = 1.0
    _apply_theta(coeffs, theta1, component=0)

    # Internal energy from the stage-1 density.
    rho_hat = theta1[..., None] * (vals[..., 0] - rho_avg[..., None]) + rho_avg[..., None]
    mom2 = np.sum(vals[..., 1:-1] ** 2, axis=-1)
    rhoe = vals[..., -1] - 0.5 * mom2 / rho_hat
    rhoe_min = np.min(rhoe, axis=-1)
    den2 = rhoe_avg - rhoe_min
    theta2 = np.ones_like(rho_avg)
    need2 = (rhoe_min < eps - _ULP * (np.abs(rhoe_avg) + np.abs(den2) + mom2.max(axis=-1))) \
        & (den2 > _FLAT)
    np.divide(rhoe_avg - eps, den2, out=theta2, where=need2)
    np.clip(theta2, 0.0, 1.0, out=theta2)
    theta2[~active] = 1.0
    _apply_theta(coeffs, theta2)

    touched = active & ((theta1 < 1.0) | (theta2 < 1.0))
    on_floor = active & ((need1 & (theta1 <= 0.0)) | (need2 & (theta2 <= 0.0)))
    theta_all = np.minimum(theta1, theta2)
    return LimiterReport(
        cells_touched=int(np.count_nonzero(touched)),
        theta_min=float(np.min(theta_all[active], initial=1.0)),
        stage_active=[bool((theta1 < 1.0).any()), bool((theta2 < 1.0).any())],
        boundary_cells=int(np.count_nonzero(on_floor)),
    )


def limit_field(disc: Discretization, fld: SolutionField, *, bounds=None,
                eps: float | None = None) -> LimiterReport:
    """Dispatch to the model's limiter strategy."""
    if disc.model.kind == "euler":
        return limit_euler(disc, fld, disc.model.eps if eps is None else eps)
    return limit_scalar(disc, fld, disc.model.bounds if bounds is None else bounds)
