"""Spatial operators for the compact RKDG scheme.

Two weak divergence operators act on a discontinuous piecewise-polynomial
field: `apply_dg` uses the Lax-Friedrichs numerical flux at cell interfaces
(the globally coupled operator used in the final stage of a step), and
`apply_local` uses the interior trace (strictly cell-local, used in the inner
stages).  Both return the rate -div f(u_h) projected onto the basis.

All per-cell work is vectorized over the full grid; inactive cells of masked
meshes carry a benign constant state and their rates are zeroed on exit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crkdg.basis import Basis, build_decomposition, gauss_rule, tensor_gauss
from crkdg.mesh import (
    FACE_FLUID_HI,
    FACE_FLUID_LO,
    FACE_PERIODIC,
    CartesianMesh,
    DirichletConstant,
    DirichletFunction,
    Outflow,
    Periodic,
    ReflectiveWall,
)
from crkdg.models import AdmissibilityError

__all__ = [
    "SolutionField",
    "Discretization",
    "lax_friedrichs_flux",
    "ghost_state",
    "apply_dg",
    "apply_local",
]


@dataclass
class SolutionField:
    """DG coefficients over the mesh: shape (*grid, n_basis, m)."""

    mesh: CartesianMesh
    basis: Basis
    coeffs: np.ndarray

    def copy(self) -> "SolutionField":
        return SolutionField(self.mesh, self.basis, self.coeffs.copy())

    def with_coeffs(self, coeffs: np.ndarray) -> "SolutionField":
        return SolutionField(self.mesh, self.basis, coeffs)

    @property
    def averages(self) -> np.ndarray:
        """Cell averages (*grid, m); the constant mode of the orthonormal basis."""
        return self.coeffs[..., 0, :]


def lax_friedrichs_flux(model, u_int, u_ext, nu, alpha):
    """(f(u_int) + f(u_ext))/2 . nu - (alpha/2)(u_ext - u_int).

    The caller guarantees alpha dominates both local wave speeds.
    """
    nu = np.asarray(nu, dtype=float)
    f_avg = 0.5 * (model.flux(u_int) + model.flux(u_ext)) @ nu
    return f_avg - 0.5 * alpha * (u_ext - u_int)


def ghost_state(model, bc, u_int, x, t, nu):
    """Exterior trace generated by a boundary condition.

    u_int: (n, m) interior trace values; x: (n, dim) positions; nu: outward
    unit normal (constant per face group).
    """
    if isinstance(bc, Outflow):
        return u_int
    if isinstance(bc, DirichletConstant):
        return np.broadcast_to(bc.state, u_int.shape)
    if isinstance(bc, DirichletFunction):
        return np.asarray(bc.fn(x, t), dtype=float).reshape(u_int.shape)
    if isinstance(bc, ReflectiveWall):
        if model.m < 3:
            raise AdmissibilityError("reflective walls require a system with momentum")
        nu = np.asarray(nu, dtype=float)
        out = u_int.copy()
        mom = u_int[..., 1:-1]
        out[..., 1:-1] = mom - 2.0 * (mom @ nu)[..., None] * nu
        return out
    if isinstance(bc, Periodic):
        raise ValueError("periodic faces are resolved by mesh connectivity, not ghosts")
    raise ValueError(f"unknown boundary kind {bc!r}")


class Discretization:
    """Reference-cell data binding a mesh, basis, and model.

    Precomputes basis evaluations at the volume rule, the per-face edge rule,
    and the convex-decomposition point set, plus the physical coordinates of
    boundary-face quadrature points for time-dependent ghost states.
    """

    def __init__(self, mesh: CartesianMesh, basis: Basis, model):
        if basis.dim != mesh.dim:
            raise ValueError("basis and mesh dimensions differ")
        self.mesh = mesh
        self.basis = basis
        self.model = model
        k = basis.degree
        dim = mesh.dim

        self.vol_pts, self.vol_w = tensor_gauss(k + 1, dim)
        self.phi_vol = basis.eval(self.vol_pts)                # (nq, nb)
        self.dphi_vol = basis.grad(self.vol_pts)               # (nq, nb, dim)

        if dim == 1:
            self.edge_ref = np.array([0.5])  # placeholder for transverse coordinate
            self.edge_w = np.array([1.0])
        else:
            rule = gauss_rule(k + 1)
            self.edge_ref = rule.points
            self.edge_w = rule.weights
        self.n_edge = len(self.edge_w)

        # phi_face[axis][side]: basis values at the face's edge points, side 0 = low.
        self.phi_face = []
        for axis in range(dim):
            pair = []
            for side in (0.0, 1.0):
                if dim == 1:
                    pts = np.array([[side]])
                elif axis == 0:
                    pts = np.column_stack([np.full(self.n_edge, side), self.edge_ref])
                else:
                    pts = np.column_stack([self.edge_ref, np.full(self.n_edge, side)])
                pair.append(basis.eval(pts))
            self.phi_face.append(pair)

        # Snap the volume derivative matrix so that the discrete integration
        # by parts telescopes exactly for constant fluxes: the quadrature of
        # each d phi_i must match the edge-rule difference of phi_i.  The
        # correction is O(1e-16), far below quadrature roundoff.
        for axis in range(dim):
            edge_diff = self.edge_w @ (self.phi_face[axis][1] - self.phi_face[axis][0])
            vol_sum = self.vol_w @ self.dphi_vol[:, :, axis]
            self.dphi_vol[:, :, axis] += (edge_diff - vol_sum)[None, :]

        self.decomp = build_decomposition(k, dim)
        self.phi_dec = basis.eval(self.decomp.points)          # (ndec, nb)

        self._proj_pts, self._proj_w = tensor_gauss(max(k + 2, 6), dim)
        self._phi_proj = basis.eval(self._proj_pts)

        # Boundary face groups per axis: (bc, kind, face-grid indices, coords, nu).
        self.boundary_groups = []
        for axis in range(dim):
            groups = []
            kind = mesh.face_kind[axis]
            bc_idx = mesh.face_bc[axis]
            for code in (FACE_FLUID_LO, FACE_FLUID_HI):
                sel = kind == code
                for b in np.unique(bc_idx[sel]):
                    where = np.nonzero(sel & (bc_idx == b))
                    coords = mesh.face_quadrature_points(axis, where, self.edge_ref)
                    nu = np.zeros(dim)
                    nu[axis] = 1.0 if code == FACE_FLUID_LO else -1.0
                    groups.append((mesh.bc_objects[b], code, where, coords, nu))
            self.boundary_groups.append(groups)

        self._benign = self._benign_state()

    def _benign_state(self) -> np.ndarray:
        if self.model.kind == "euler":
            s = np.zeros(self.model.m)
            s[0] = 1.0
            s[-1] = 1.0
            return s
        lo, hi = self.model.bounds
        return np.array([0.5 * (lo + hi)])

    # -- field construction ----------------------------------------------------

    def project(self, fn, t: float = 0.0) -> SolutionField:
        """Per-cell L2 projection of fn(x[, t]) onto the basis."""
        mesh = self.mesh
        pts = self._cell_points(self._proj_pts)                # (*grid, nq, dim)
        try:
            vals = fn(pts.reshape(-1, mesh.dim), t)
        except TypeError:
            vals = fn(pts.reshape(-1, mesh.dim))
        vals = np.asarray(vals, dtype=float).reshape(pts.shape[:-1] + (self.model.m,))
        coeffs = np.einsum("...qm,q,qb->...bm", vals, self._proj_w, self._phi_proj)
        if not mesh.active.all():
            coeffs[~mesh.active] = 0.0
            coeffs[~mesh.active, 0, :] = self._benign
        return SolutionField(mesh, self.basis, coeffs)

    def _cell_points(self, ref_pts: np.ndarray) -> np.ndarray:
        mesh = self.mesh
        corners = mesh.cell_centers() - 0.5 * mesh.spacing
        return corners[..., None, :] + ref_pts * mesh.spacing

    def constant_field(self, state) -> SolutionField:
        """Field that is exactly the given state in every cell."""
        state = np.atleast_1d(np.asarray(state, dtype=float))
        coeffs = np.zeros(self.mesh.counts + (self.basis.n_basis, self.model.m))
        coeffs[..., 0, :] = state
        return SolutionField(self.mesh, self.basis, coeffs)

    def eval_at(self, field: SolutionField, phi: np.ndarray) -> np.ndarray:
        return np.einsum("...bm,qb->...qm", field.coeffs, phi)

    def decomposition_values(self, field: SolutionField) -> np.ndarray:
        """Field values at the convex-decomposition point set S_K: (*grid, ndec, m)."""
        return self.eval_at(field, self.phi_dec)

    def wavespeed_bound(self, field: SolutionField) -> float:
        """Global wave-speed bound: max over decomposition points of active cells."""
        vals = self.decomposition_values(field)[self.mesh.active]
        return float(np.max(self.model.wavespeed_bound(vals)))

    def error_norm(self, field: SolutionField, exact_fn, t: float) -> float:
        """Discrete L2 distance to an exact solution (root-sum over components)."""
        pts = self._cell_points(self._proj_pts)
        vals = self.eval_at(field, self._phi_proj)
        ref = np.asarray(exact_fn(pts.reshape(-1, self.mesh.dim), t), dtype=float)
        ref = ref.reshape(vals.shape)
        diff2 = np.sum((vals - ref) ** 2, axis=-1)
        cellwise = diff2 @ self._proj_w * self.mesh.cell_volume
        return float(np.sqrt(np.sum(cellwise[self.mesh.active])))

    # -- operator assembly -------------------------------------------------------

    def _volume_term(self, field: SolutionField) -> np.ndarray:
        uq = self.eval_at(field, self.phi_vol)                 # (*grid, nq, m)
        self._check_states(uq, "volume quadrature")
        fq = self.model.flux(uq)                               # (*grid, nq, m, dim)
        scaled = self.dphi_vol / self.mesh.spacing[None, None, :]
        return np.einsum("q,...qmd,qbd->...bm", self.vol_w, fq, scaled)

    def _traces(self, field: SolutionField, axis: int):
        lo = self.eval_at(field, self.phi_face[axis][0])       # own low-face trace
        hi = self.eval_at(field, self.phi_face[axis][1])
        return lo, hi

    def _check_states(self, vals: np.ndarray, where: str) -> None:
        active = self.mesh.active
        bad = ~np.isfinite(vals).all(axis=(-2, -1))
        if self.model.kind == "euler":
            bad |= (vals[..., 0] == 0.0).any(axis=-1)
        bad &= active
        if bad.any():
            cell = tuple(int(v) for v in np.argwhere(bad)[0])
            raise AdmissibilityError(
                f"state not evaluable at {where} of cell {cell} (zero density or non-finite)")

    def _face_states(self, field: SolutionField, axis: int, t: float):
        """Left/right trace arrays on the axis face grid, ghosts patched in."""
        mesh = self.mesh
        lo, hi = self._traces(field, axis)
        # Move the working axis to the front.
        lo_m = np.moveaxis(lo, axis, 0)
        hi_m = np.moveaxis(hi, axis, 0)
        n = mesh.counts[axis]
        face_shape = (n + 1,) + lo_m.shape[1:]
        L = np.empty(face_shape)
        R = np.empty(face_shape)
        L[1:] = hi_m
        R[:n] = lo_m
        if mesh.periodic[axis]:
            L[0] = hi_m[n - 1]
            R[n] = lo_m[0]
        else:
            L[0] = self._benign
            R[n] = self._benign
        # Dead interior faces hold the benign state on both sides.
        kind_m = np.moveaxis(mesh.face_kind[axis], axis, 0) if mesh.dim == 2 else mesh.face_kind[axis]
        dead = kind_m == 1  # FACE_DEAD
        if dead.any():
            L[dead] = self._benign
            R[dead] = self._benign
        for bc, code, where, coords, nu in self.boundary_groups[axis]:
            idx = tuple(np.moveaxis(np.array(where), 0, 0))    # arrays per dim
            idx_m = (where[axis],) + tuple(where[a] for a in range(mesh.dim) if a != axis)
            pts = coords.reshape(-1, mesh.dim)
            if code == FACE_FLUID_LO:
                u_int = L[idx_m].reshape(-1, self.model.m)
                R[idx_m] = ghost_state(self.model, bc, u_int, pts, t, nu).reshape(
                    len(where[0]), self.n_edge, self.model.m)
            else:
                u_int = R[idx_m].reshape(-1, self.model.m)
                L[idx_m] = ghost_state(self.model, bc, u_int, pts, t, nu).reshape(
                    len(where[0]), self.n_edge, self.model.m)
        return L, R

    def _edge_accumulate(self, rate: np.ndarray, flux_lo: np.ndarray, flux_hi: np.ndarray,
                         axis: int) -> None:
        """Subtract (1/dx_axis) * sum_beta w_beta (fhat_hi phi_hi - fhat_lo phi_lo)."""
        inv_h = 1.0 / self.mesh.spacing[axis]
        phi_lo = self.phi_face[axis][0]
        phi_hi = self.phi_face[axis][1]
        term = (np.einsum("q,...qm,qb->...bm", self.edge_w, flux_hi, phi_hi)
                - np.einsum("q,...qm,qb->...bm", self.edge_w, flux_lo, phi_lo))
        rate -= inv_h * np.moveaxis(term, 0, axis)

    def apply_dg(self, field: SolutionField, t: float, alpha: float) -> np.ndarray:
        """Rate of -div^DG f(u_h) with the Lax-Friedrichs flux; alpha is the LF
        dissipation parameter (the global wave-speed bound by default)."""
        rate = self._volume_term(field)
        for axis in range(self.mesh.dim):
            L, R = self._face_states(field, axis, t)
            self._check_face_states(L, R, axis)
            nu = np.zeros(self.mesh.dim)
            nu[axis] = 1.0
            a = alpha if np.isscalar(alpha) else float(alpha)
            fhat = 0.5 * (self.model.flux(L) + self.model.flux(R))[..., axis] \
                - 0.5 * a * (R - L)
            n = self.mesh.counts[axis]
            self._edge_accumulate(rate, fhat[:n], fhat[1:], axis)
        if not self.mesh.active.all():
            rate[~self.mesh.active] = 0.0
        return rate

    def apply_dg_local_alpha(self, field: SolutionField, t: float) -> np.ndarray:
        """Variant of apply_dg with a per-face LF parameter (diagnostics only)."""
        rate = self._volume_term(field)
        for axis in range(self.mesh.dim):
            L, R = self._face_states(field, axis, t)
            nu = np.zeros(self.mesh.dim)
            nu[axis] = 1.0
            a = np.maximum(self.model.max_wavespeed(L, nu), self.model.max_wavespeed(R, nu))
            a = np.max(a, axis=-1, keepdims=True)[..., None][..., 0]
            fhat = 0.5 * (self.model.flux(L) + self.model.flux(R))[..., axis] \
                - 0.5 * a[..., None] * (R - L)
            n = self.mesh.counts[axis]
            self._edge_accumulate(rate, fhat[:n], fhat[1:], axis)
        if not self.mesh.active.all():
            rate[~self.mesh.active] = 0.0
        return rate

    def _check_face_states(self, L: np.ndarray, R: np.ndarray, axis: int) -> None:
        if not (np.isfinite(L).all() and np.isfinite(R).all()):
            raise AdmissibilityError(f"non-finite face trace along axis {axis}")
        if self.model.kind == "euler" and ((L[..., 0] == 0.0).any() or (R[..., 0] == 0.0).any()):
            raise AdmissibilityError(f"zero-density face trace along axis {axis}")

    def apply_local(self, field: SolutionField, t: float) -> np.ndarray:
        """Rate of -div^loc f(u_h): interior traces at the interfaces, cell-local."""
        rate = self._volume_term(field)
        for axis in range(self.mesh.dim):
            lo, hi = self._traces(field, axis)
            flux_lo = self.model.flux(lo)[..., axis]
            flux_hi = self.model.flux(hi)[..., axis]
            self._edge_accumulate(rate,
                                  np.moveaxis(flux_lo, axis, 0),
                                  np.moveaxis(flux_hi, axis, 0), axis)
        if not self.mesh.active.all():
            rate[~self.mesh.active] = 0.0
        return rate

    def project_rate(self, fn, t: float) -> np.ndarray:
        """L2 projection of a source s(x, t) onto the basis, as a rate array."""
        mesh = self.mesh
        pts = self._cell_points(self._proj_pts)
        vals = np.asarray(fn(pts.reshape(-1, mesh.dim), t), dtype=float)
        vals = vals.reshape(pts.shape[:-1] + (self.model.m,))
        rate = np.einsum("...qm,q,qb->...bm", vals, self._proj_w, self._phi_proj)
        if not mesh.active.all():
            rate[~mesh.active] = 0.0
        return rate


def apply_dg(disc: Discretization, field: SolutionField, t: float, alpha: float) -> np.ndarray:
    return disc.apply_dg(field, t, alpha)


def apply_local(disc: Discretization, field: SolutionField, t: float) -> np.ndarray:
    return disc.apply_local(field, t)
