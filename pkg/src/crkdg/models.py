"""Equation systems: scalar linear advection and the compressible Euler equations.

States are arrays with the component axis last: shape (..., m).  Scalar
advection has m = 1; Euler in d dimensions has m = d + 2 with components
(density, momentum, total energy).

Flux evaluation is total on any state with nonzero finite density; the
admissibility checks and wave-speed bounds are the guarded operations.  This
split matters: high-order moments of a limited solution may dip outside the
admissible set between the decomposition points, and the scheme relies on the
cell-average update (which never sees those values' singularities) plus the
limiter to repair them.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "AdmissibilityError",
    "AdvectionModel",
    "EulerModel",
    "euler_pressure",
    "euler_flux",
]

DEFAULT_EPS = 1e-8


class AdmissibilityError(RuntimeError):
    """A state violated the admissibility requirements of an operation."""


class AdvectionModel:
    """Linear advection u_t + div(w u) = 0 with constant velocity w.

    `bounds` is the invariant interval [lo, hi] used by the limiter and the
    admissibility gates; it is problem data, not intrinsic to the flux.
    """

    kind = "advection"
    m = 1

    def __init__(self, velocity, bounds=(0.0, 1.0)):
        self.velocity = np.atleast_1d(np.asarray(velocity, dtype=float))
        self.dim = self.velocity.shape[0]
        lo, hi = float(bounds[0]), float(bounds[1])
        if not lo < hi:
            raise ValueError(f"bounds must satisfy lo < hi, got {bounds}")
        self.bounds = (lo, hi)

    def flux(self, u: np.ndarray) -> np.ndarray:
        """f(u) = w u, shape (..., 1, d)."""
        return u[..., :, None] * self.velocity

    def max_wavespeed(self, u: np.ndarray, nu) -> np.ndarray:
        nu = np.asarray(nu, dtype=float)
        return np.broadcast_to(abs(float(self.velocity @ nu)), np.shape(u)[:-1]).copy()

    def wavespeed_bound(self, u: np.ndarray) -> np.ndarray:
        """Per-state bound over the axis directions: max_d |w_d|."""
        return np.broadcast_to(np.max(np.abs(self.velocity)), np.shape(u)[:-1]).copy()

    def admissible(self, u: np.ndarray, slack: float = 0.0) -> np.ndarray:
        lo, hi = self.bounds
        vals = u[..., 0]
        return (vals >= lo - slack) & (vals <= hi + slack)


def euler_pressure(u: np.ndarray, gamma: float = 1.4) -> np.ndarray:
    """p = (gamma - 1)(E - |m|^2 / (2 rho)); raises on zero density."""
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    if np.any(rho == 0.0):
        raise AdmissibilityError("pressure undefined at zero density")
    mom2 = np.sum(u[..., 1:-1] ** 2, axis=-1)
    return (gamma - 1.0) * (u[..., -1] - 0.5 * mom2 / rho)


def euler_flux(u: np.ndarray, gamma: float = 1.4) -> np.ndarray:
    """Euler flux matrix, shape (..., m, d): rows (m; m x m / rho + p I; (E+p) m / rho)."""
    u = np.asarray(u, dtype=float)
    if np.any(u[..., 0] <= 0.0):
        raise AdmissibilityError("flux requested at nonpositive density")
    return _euler_flux_raw(u, gamma)


def _euler_flux_raw(u: np.ndarray, gamma: float) -> np.ndarray:
    rho = u[..., 0]
    mom = u[..., 1:-1]
    E = u[..., -1]
    d = mom.shape[-1]
    p = (gamma - 1.0) * (E - 0.5 * np.sum(mom**2, axis=-1) / rho)
    w = mom / rho[..., None]
    out = np.empty(u.shape + (d,), dtype=float)
    out[..., 0, :] = mom
    out[..., 1:-1, :] = mom[..., :, None] * w[..., None, :]
    for i in range(d):
        out[..., 1 + i, i] += p
    out[..., -1, :] = (E + p)[..., None] * w
    return out


class EulerModel:
    """Ideal-gas compressible Euler equations in 1 or 2 dimensions."""

    kind = "euler"

    def __init__(self, dim: int, gamma: float = 1.4, eps: float = DEFAULT_EPS):
        if dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {dim}")
        self.dim = dim
        self.m = dim + 2
        self.gamma = float(gamma)
        self.eps = float(eps)

    def pressure(self, u: np.ndarray) -> np.ndarray:
        return euler_pressure(u, self.gamma)

    def flux(self, u: np.ndarray) -> np.ndarray:
        """Total flux evaluation; only exact vacuum (rho == 0) is rejected."""
        u = np.asarray(u, dtype=float)
        if np.any(u[..., 0] == 0.0) or not np.all(np.isfinite(u)):
            raise AdmissibilityError("flux evaluation at singular state (rho == 0 or non-finite)")
        return _euler_flux_raw(u, self.gamma)

    def sound_speed(self, u: np.ndarray) -> np.ndarray:
        rho = u[..., 0]
        p = self.pressure(u)
        if np.any(rho <= 0.0) or np.any(p < 0.0):
            raise AdmissibilityError("sound speed requested at inadmissible state")
        return np.sqrt(self.gamma * p / rho)

    def max_wavespeed(self, u: np.ndarray, nu) -> np.ndarray:
        """|w . nu| + c for the direction nu."""
        u = np.asarray(u, dtype=float)
        nu = np.asarray(nu, dtype=float)
        w = u[..., 1:-1] / u[..., 0:1]
        return np.abs(w @ nu) + self.sound_speed(u)

    def wavespeed_bound(self, u: np.ndarray) -> np.ndarray:
        """Per-state bound over the axis directions: max_d |w_d| + c."""
        u = np.asarray(u, dtype=float)
        w = u[..., 1:-1] / u[..., 0:1]
        return np.max(np.abs(w), axis=-1) + self.sound_speed(u)

    def admissible(self, u: np.ndarray, eps: float | None = None) -> np.ndarray:
        """Membership in B^eps: rho >= eps and p >= eps (elementwise)."""
        u = np.asarray(u, dtype=float)
        eps = self.eps if eps is None else eps
        rho = u[..., 0]
        ok = rho >= eps
        p = np.full_like(rho, -np.inf)
        np.divide(np.sum(u[..., 1:-1] ** 2, axis=-1), rho, out=p, where=rho > 0)
        p = (self.gamma - 1.0) * (u[..., -1] - 0.5 * p)
        return ok & (p >= eps) & np.all(np.isfinite(u), axis=-1)

    def lf_split_member(self, u: np.ndarray, nu, a: float) -> np.ndarray:
        """True where both u +- a^{-1} f(u) . nu lie in the open invariant region."""
        if a == 0.0:
            raise ValueError("splitting check requires a > 0")
        u = np.asarray(u, dtype=float)
        nu = np.asarray(nu, dtype=float)
        fnu = self.flux(u) @ nu
        ok = np.ones(u.shape[:-1], dtype=bool)
        for sign in (+1.0, -1.0):
            v = u + sign * fnu / a
            rho = v[..., 0]
            inside = rho > 0.0
            p = np.full_like(rho, -1.0)
            np.divide(np.sum(v[..., 1:-1] ** 2, axis=-1), rho, out=p, where=inside)
            p = (self.gamma - 1.0) * (v[..., -1] - 0.5 * p)
            ok &= inside & (p > 0.0)
        return ok

    def gql_member(self, u: np.ndarray, w_samples=None) -> np.ndarray:
        """Half-space formulation of membership: u.n1 > 0 and u.n(w*) > 0.

        n1 = (1, 0, 0)^T and n(w*) = (|w*|^2/2, -w*, 1)^T.  The sample set
        always includes w* = m/rho, the analytic minimizer of u.n(w*), which
        makes the check exact rather than sampled.
        """
        u = np.asarray(u, dtype=float)
        rho = u[..., 0]
        mom = u[..., 1:-1]
        E = u[..., -1]
        ok = rho > 0.0
        if w_samples is not None:
            for ws in np.atleast_2d(np.asarray(w_samples, dtype=float)):
                dot = 0.5 * np.sum(ws**2) * rho - mom @ ws + E
                ok &= dot > 0.0
        wstar = np.zeros_like(mom)
        np.divide(mom, rho[..., None], out=wstar, where=rho[..., None] > 0)
        dot_min = 0.5 * np.sum(wstar**2, axis=-1) * rho - np.sum(mom * wstar, axis=-1) + E
        return ok & (dot_min > 0.0)

    def primitive_to_conservative(self, rho, w, p) -> np.ndarray:
        """Assemble conservative states from (density, velocity, pressure)."""
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.dim:
            raise ValueError(f"velocity must have {self.dim} components, got shape {w.shape}")
        rho = np.broadcast_to(np.asarray(rho, dtype=float), w.shape[:-1]).astype(float)
        p = np.broadcast_to(np.asarray(p, dtype=float), w.shape[:-1]).astype(float)
        mom = rho[..., None] * w
        E = p / (self.gamma - 1.0) + 0.5 * rho * np.sum(w**2, axis=-1)
        return np.concatenate([rho[..., None], mom, E[..., None]], axis=-1)
