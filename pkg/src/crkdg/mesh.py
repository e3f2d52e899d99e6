"""Uniform Cartesian meshes in 1D/2D with activity masks for stair-shaped domains.

Cells are indexed (i,) in 1D and (i, j) in 2D with i along x.  Faces follow
the (W, E) / (W, E, S, N) ordering with canonical unit normals.  Each face of
an active cell is either interior (shared with another active cell, periodic
wrap included) or carries a boundary kind; faces between two inactive cells
are dead and never touched by the operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "MeshError",
    "Periodic",
    "DirichletConstant",
    "DirichletFunction",
    "Outflow",
    "ReflectiveWall",
    "CartesianMesh",
    "build_interval",
    "build_box",
    "build_masked_box",
    "neighbor",
    "FACE_INTERIOR",
    "FACE_DEAD",
    "FACE_FLUID_LO",
    "FACE_FLUID_HI",
    "FACE_PERIODIC",
]


class MeshError(ValueError):
    """Invalid mesh construction request."""


class Periodic:
    def __repr__(self):
        return "Periodic()"


@dataclass
class DirichletConstant:
    """Fixed exterior state; must be admissible for the attached model."""

    state: np.ndarray

    def __post_init__(self):
        self.state = np.atleast_1d(np.asarray(self.state, dtype=float))


@dataclass
class DirichletFunction:
    """Exterior state prescribed as a function of position and time.

    `fn(x, t)` receives points of shape (n, dim) and returns states (n, m).
    """

    fn: Callable[[np.ndarray, float], np.ndarray]


class Outflow:
    def __repr__(self):
        return "Outflow()"


class ReflectiveWall:
    def __repr__(self):
        return "ReflectiveWall()"


# Face classification codes.
FACE_INTERIOR = 0
FACE_DEAD = 1
FACE_FLUID_LO = 2   # active cell on the low-index side, ghost on the high side
FACE_FLUID_HI = 3   # active cell on the high-index side, ghost on the low side
FACE_PERIODIC = 4


class CartesianMesh:
    """Uniform Cartesian mesh, immutable after construction."""

    def __init__(self, origin, spacing, counts, active, side_bcs,
                 wall_bc=None, wall_bc_fn=None):
        self.origin = np.atleast_1d(np.asarray(origin, dtype=float))
        self.spacing = np.atleast_1d(np.asarray(spacing, dtype=float))
        self.counts = tuple(int(n) for n in np.atleast_1d(counts))
        self.dim = len(self.counts)
        if self.dim not in (1, 2):
            raise MeshError(f"mesh dim must be 1 or 2, got {self.dim}")
        if np.any(self.spacing <= 0) or any(n < 1 for n in self.counts):
            raise MeshError("spacing must be positive and counts >= 1")
        self.active = np.asarray(active, dtype=bool)
        if self.active.shape != self.counts:
            raise MeshError(f"active mask shape {self.active.shape} != counts {self.counts}")
        if not np.any(self.active):
            raise MeshError("mesh has no active cells")
        self.side_bcs = dict(side_bcs)
        self.wall_bc = wall_bc if wall_bc is not None else ReflectiveWall()
        self.wall_bc_fn = wall_bc_fn

        self.bc_objects: list = []
        self._bc_index: dict[int, int] = {}
        self.face_kind: list[np.ndarray] = []
        self.face_bc: list[np.ndarray] = []
        self.periodic = [False] * self.dim
        for axis in range(self.dim):
            kind, bc = self._classify_axis(axis)
            self.face_kind.append(kind)
            self.face_bc.append(bc)

    # -- construction helpers ------------------------------------------------

    def _bc_id(self, bc) -> int:
        key = id(bc)
        if key not in self._bc_index:
            self._bc_index[key] = len(self.bc_objects)
            self.bc_objects.append(bc)
        return self._bc_index[key]

    def _wall_bc_for(self, axis: int, face_index: tuple) -> int:
        if self.wall_bc_fn is not None:
            x = self.face_center(axis, face_index)
            bc = self.wall_bc_fn(x, axis)
            if bc is not None:
                return self._bc_id(bc)
        return self._bc_id(self.wall_bc)

    def _classify_axis(self, axis: int):
        lo_name, hi_name = (("W", "E"), ("S", "N"))[axis]
        bc_lo = self.side_bcs.get(lo_name, Outflow())
        bc_hi = self.side_bcs.get(hi_name, Outflow())
        periodic = isinstance(bc_lo, Periodic) or isinstance(bc_hi, Periodic)
        if periodic and not (isinstance(bc_lo, Periodic) and isinstance(bc_hi, Periodic)):
            raise MeshError(f"periodic axis {axis} needs Periodic on both sides")
        self.periodic[axis] = periodic

        n = self.counts[axis]
        pad = [(0, 0)] * self.dim
        pad[axis] = (1, 1)
        ext = np.pad(self.active, pad, constant_values=False)
        lo_act = np.take(ext, np.arange(0, n + 1), axis=axis)
        hi_act = np.take(ext, np.arange(1, n + 2), axis=axis)

        kind = np.full(lo_act.shape, FACE_DEAD, dtype=np.int8)
        kind[lo_act & hi_act] = FACE_INTERIOR
        kind[lo_act & ~hi_act] = FACE_FLUID_LO
        kind[~lo_act & hi_act] = FACE_FLUID_HI
        bc = np.full(kind.shape, -1, dtype=np.int32)

        def face_tuple(flat_idx):
            return np.unravel_index(flat_idx, kind.shape)

        if periodic:
            first = np.take(self.active, 0, axis=axis)
            last = np.take(self.active, n - 1, axis=axis)
            if not (np.all(first) and np.all(last)):
                raise MeshError(f"periodic axis {axis} must have fully active boundary layers")
            edge = [slice(None)] * self.dim
            for end in (0, n):
                edge[axis] = end
                kind[tuple(edge)] = FACE_PERIODIC
        else:
            for end, code, bc_obj in ((0, FACE_FLUID_HI, bc_lo), (n, FACE_FLUID_LO, bc_hi)):
                edge_mask = np.zeros(kind.shape, dtype=bool)
                edge = [slice(None)] * self.dim
                edge[axis] = end
                edge_mask[tuple(edge)] = True
                bc[edge_mask & (kind == code)] = self._bc_id(bc_obj)

        # Remaining boundary faces sit on mask walls.
        wall = (kind == FACE_FLUID_LO) | (kind == FACE_FLUID_HI)
        wall &= bc == -1
        for flat in np.nonzero(wall.ravel())[0]:
            idx = face_tuple(flat)
            bc[idx] = self._wall_bc_for(axis, idx)
        return kind, bc

    # -- geometry ------------------------------------------------------------

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def face_area(self, axis: int) -> float:
        """|e| for faces normal to `axis`; 1 in 1D by convention."""
        if self.dim == 1:
            return 1.0
        return float(self.spacing[1 - axis])

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active))

    @property
    def total_active_volume(self) -> float:
        return self.n_active * self.cell_volume

    def cell_centers(self) -> np.ndarray:
        """Physical centers of all cells (active and not), grid-shaped (+dim axis)."""
        axes = [self.origin[a] + (np.arange(self.counts[a]) + 0.5) * self.spacing[a]
                for a in range(self.dim)]
        if self.dim == 1:
            return axes[0][:, None]
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.stack([X, Y], axis=-1)

    def face_center(self, axis: int, face_index: tuple) -> np.ndarray:
        """Physical midpoint of one face on the `axis` face grid."""
        idx = list(face_index)
        out = np.empty(self.dim)
        out[axis] = self.origin[axis] + idx[axis] * self.spacing[axis]
        for a in range(self.dim):
            if a != axis:
                out[a] = self.origin[a] + (idx[a] + 0.5) * self.spacing[a]
        return out

    def face_quadrature_points(self, axis: int, face_indices, edge_points) -> np.ndarray:
        """Physical coordinates of edge-rule points on the given faces.

        `face_indices` is a tuple of index arrays into the axis face grid;
        `edge_points` are reference coordinates in [0,1] along the face.
        Returns (n_faces, n_edge_points, dim).
        """
        nf = len(face_indices[0])
        nq = len(edge_points)
        out = np.empty((nf, nq, self.dim))
        out[:, :, axis] = (self.origin[axis] + np.asarray(face_indices[axis]) *
                           self.spacing[axis])[:, None]
        if self.dim == 2:
            t_axis = 1 - axis
            base = self.origin[t_axis] + np.asarray(face_indices[t_axis]) * self.spacing[t_axis]
            out[:, :, t_axis] = base[:, None] + np.asarray(edge_points)[None, :] * self.spacing[t_axis]
        return out

    # -- topology ------------------------------------------------------------

    def face_of_cell(self, cell: tuple, face: int) -> tuple[int, tuple]:
        """Map (cell, local face index) to (axis, face-grid index)."""
        from crkdg.basis import FACE_AXES, FACE_SIGNS
        axis = FACE_AXES[self.dim][face]
        sign = FACE_SIGNS[self.dim][face]
        idx = list(cell)
        if sign > 0:
            idx[axis] += 1
        return axis, tuple(idx)

    def is_active(self, cell: tuple) -> bool:
        return bool(self.active[tuple(cell)])


def neighbor(mesh: CartesianMesh, cell: tuple, face: int):
    """Adjacent active cell across `face`, or the BoundaryKind of that face.

    Total on valid input: every face of an active cell is either interior
    (possibly via periodic wrap) or carries a boundary condition.
    """
    cell = tuple(np.atleast_1d(cell))
    if not mesh.is_active(cell):
        raise MeshError(f"cell {cell} is not active")
    from crkdg.basis import FACE_AXES, FACE_SIGNS
    axis = FACE_AXES[mesh.dim][face]
    sign = FACE_SIGNS[mesh.dim][face]
    _, fidx = mesh.face_of_cell(cell, face)
    kind = mesh.face_kind[axis][fidx]
    if kind == FACE_INTERIOR:
        nb = list(cell)
        nb[axis] += sign
        return tuple(nb)
    if kind == FACE_PERIODIC:
        nb = list(cell)
        nb[axis] = (nb[axis] + sign) % mesh.counts[axis]
        return tuple(nb)
    if kind in (FACE_FLUID_LO, FACE_FLUID_HI):
        return mesh.bc_objects[mesh.face_bc[axis][fidx]]
    raise MeshError(f"face {face} of cell {cell} is dead")


def build_interval(a: float, b: float, n: int, bc_left, bc_right) -> CartesianMesh:
    """Uniform 1D mesh of n cells on [a, b]."""
    if n < 1:
        raise MeshError(f"need at least one cell, got n={n}")
    if not a < b:
        raise MeshError(f"need a < b, got [{a}, {b}]")
    dx = (b - a) / n
    return CartesianMesh(
        origin=[a], spacing=[dx], counts=[n],
        active=np.ones(n, dtype=bool),
        side_bcs={"W": bc_left, "E": bc_right},
    )


def build_box(box, nx: int, ny: int, bcs: dict) -> CartesianMesh:
    """Uniform 2D box mesh; `box` is (x0, x1, y0, y1), `bcs` maps W/E/S/N."""
    return build_masked_box(box, nx, ny, solid=(), bcs=bcs)


def build_masked_box(box, nx: int, ny: int, solid=(), bcs=None,
                     wall_bc=None, wall_bc_fn=None) -> CartesianMesh:
    """2D box mesh with grid-aligned solid rectangles masked out.

    Fluid-solid faces default to ReflectiveWall; `wall_bc_fn(x, axis)` may
    override the kind per wall face (return None to keep the default).
    """
    x0, x1, y0, y1 = map(float, box)
    if not (x0 < x1 and y0 < y1):
        raise MeshError(f"degenerate box {box}")
    if nx < 1 or ny < 1:
        raise MeshError("need nx, ny >= 1")
    dx = (x1 - x0) / nx
    dy = (y1 - y0) / ny
    active = np.ones((nx, ny), dtype=bool)
    for rect in solid:
        sx0, sx1, sy0, sy1 = map(float, rect)
        idx = []
        for val, start, step, count in ((sx0, x0, dx, nx), (sx1, x0, dx, nx),
                                        (sy0, y0, dy, ny), (sy1, y0, dy, ny)):
            pos = (val - start) / step
            if abs(pos - round(pos)) > 1e-9:
                raise MeshError(f"solid rectangle {rect} is not aligned with the grid")
            idx.append(int(round(pos)))
        i0, i1, j0, j1 = idx
        i0, i1 = max(i0, 0), min(i1, nx)
        j0, j1 = max(j0, 0), min(j1, ny)
        active[i0:i1, j0:j1] = False
    return CartesianMesh(
        origin=[x0, y0], spacing=[dx, dy], counts=[nx, ny],
        active=active, side_bcs=dict(bcs or {}),
        wall_bc=wall_bc, wall_bc_fn=wall_bc_fn,
    )
