"""Polynomial bases, quadrature rules, and the convex decomposition of cell averages.

Everything lives on the reference cell [0,1]^dim.  Bases are orthonormal
tensor-Legendre (modal), so the reference mass matrix is the identity and
per-cell mass solves reduce to a scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

__all__ = [
    "QuadratureRule",
    "Basis",
    "ConvexDecomposition",
    "gauss_rule",
    "gauss_lobatto_rule",
    "tensor_gauss",
    "build_decomposition",
    "cfl_constants",
    "FACE_NAMES",
    "FACE_AXES",
    "FACE_SIGNS",
]

# Face ordering convention: (W, E) in 1D and (W, E, S, N) in 2D.
FACE_NAMES = {1: ("W", "E"), 2: ("W", "E", "S", "N")}
FACE_AXES = {1: (0, 0), 2: (0, 0, 1, 1)}  # axis normal to each face
FACE_SIGNS = {1: (-1, +1), 2: (-1, +1, -1, +1)}  # outward normal orientation


@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights on the reference interval [0,1]."""

    points: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points)))


def gauss_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [0,1], exact to degree 2n-1."""
    if n < 1:
        raise ValueError(f"Gauss rule needs n >= 1, got {n}")
    t, w = npleg.leggauss(n)
    return QuadratureRule(points=(t + 1.0) / 2.0, weights=w / 2.0)


def gauss_lobatto_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Lobatto rule on [0,1], exact to degree 2n-3.

    Includes both endpoints; interior nodes are the roots of P'_{n-1} and the
    weights are 2/(n(n-1) P_{n-1}(x)^2) on [-1,1], halved for the unit interval.
    """
    if n < 2:
        raise ValueError(f"Gauss-Lobatto rule needs n >= 2, got {n}")
    if n == 2:
        nodes = np.array([-1.0, 1.0])
    else:
        pn1 = np.zeros(n)
        pn1[n - 1] = 1.0
        interior = npleg.legroots(npleg.legder(pn1))
        nodes = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    pvals = npleg.legval(nodes, np.eye(n)[n - 1])
    w = 2.0 / (n * (n - 1) * pvals**2)
    return QuadratureRule(points=(nodes + 1.0) / 2.0, weights=w / 2.0)


def tensor_gauss(n: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product Gauss rule on [0,1]^dim: points (nq, dim), weights sum to 1."""
    rule = gauss_rule(n)
    if dim == 1:
        return rule.points[:, None], rule.weights.copy()
    X, Y = np.meshgrid(rule.points, rule.points, indexing="ij")
    W = np.outer(rule.weights, rule.weights)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()


def _legendre_shifted(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the orthonormal shifted Legendre family on [0,1].

    Returns (vals, ders), each of shape (len(x), k+1), where the n-th column is
    sqrt(2n+1) * P_n(2x-1) so that the family is L2([0,1])-orthonormal.
    """
    x = np.asarray(x, dtype=float)
    t = 2.0 * x - 1.0
    scale = np.sqrt(2.0 * np.arange(k + 1) + 1.0)
    vals = npleg.legvander(t, k) * scale
    ders = np.empty_like(vals)
    for n in range(k + 1):
        coeff = np.zeros(n + 1)
        coeff[n] = 1.0
        ders[:, n] = npleg.legval(t, npleg.legder(coeff)) * 2.0 * scale[n]
    return vals, ders


@dataclass(frozen=True)
class Basis:
    """Orthonormal modal basis for P^k or Q^k on the reference cell [0,1]^dim.

    P^k in 2D is the tensor-Legendre set truncated to total degree <= k;
    Q^k keeps the full tensor set with degree <= k in each variable.
    """

    kind: str
    degree: int
    dim: int
    exponents: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("P", "Q"):
            raise ValueError(f"basis kind must be 'P' or 'Q', got {self.kind!r}")
        if self.degree < 1:
            raise ValueError(f"basis degree must be >= 1, got {self.degree}")
        if self.dim not in (1, 2):
            raise ValueError(f"basis dim must be 1 or 2, got {self.dim}")
        k = self.degree
        if self.dim == 1:
            exps = np.arange(k + 1)[:, None]
        else:
            pairs = [(i, j) for i in range(k + 1) for j in range(k + 1)]
            if self.kind == "P":
                pairs = [p for p in pairs if p[0] + p[1] <= k]
            pairs.sort(key=lambda p: (p[0] + p[1], p[0]))
            exps = np.array(pairs)
        object.__setattr__(self, "exponents", exps)

    @property
    def n_basis(self) -> int:
        return self.exponents.shape[0]

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Basis values at reference points: (npts, n_basis)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.degree
        vals_x, _ = _legendre_shifted(pts[:, 0], k)
        out = vals_x[:, self.exponents[:, 0]]
        if self.dim == 2:
            vals_y, _ = _legendre_shifted(pts[:, 1], k)
            out = out * vals_y[:, self.exponents[:, 1]]
        return out

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients at points: (npts, n_basis, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.degree
        vx, dx = _legendre_shifted(pts[:, 0], k)
        ex = self.exponents[:, 0]
        if self.dim == 1:
            return dx[:, ex][:, :, None]
        vy, dy = _legendre_shifted(pts[:, 1], k)
        ey = self.exponents[:, 1]
        out = np.empty((pts.shape[0], self.n_basis, 2))
        out[:, :, 0] = dx[:, ex] * vy[:, ey]
        out[:, :, 1] = vx[:, ex] * dy[:, ey]
        return out

    def mass_matrix(self) -> np.ndarray:
        """Reference mass matrix via (k+1)-point tensor Gauss (exact here)."""
        pts, w = tensor_gauss(self.degree + 1, self.dim)
        V = self.eval(pts)
        return (V * w[:, None]).T @ V


def _lobatto_count(k: int) -> int:
    # One Gauss-Lobatto node per polynomial coefficient keeps the 1D point set
    # unisolvent; exactness 2N-3 >= k holds with margin for k = 2, 3.
    return max(2, k + 1)


@dataclass(frozen=True)
class ConvexDecomposition:
    """Positive-weight decomposition of the reference cell average.

    The point set contains every edge-integration quadrature point plus
    interior points; `weights` are strictly positive and sum to one, and for
    every polynomial in the basis space the weighted point sum reproduces the
    cell average.  `c_F` and `c_G` are the CFL constants min(w_dec/w_edge).
    """

    dim: int
    degree: int
    points: np.ndarray          # (npts, dim)
    weights: np.ndarray         # (npts,)
    face_point_idx: tuple       # per face: index array into points
    edge_weights: np.ndarray    # (nqe,) edge-rule weights, identical per face
    interior_idx: np.ndarray
    c_F: float
    c_G: float

    @property
    def n_faces(self) -> int:
        return 2 * self.dim


def build_decomposition(k: int, dim: int) -> ConvexDecomposition:
    """Decomposition point set and weights for degree k in 1 or 2 dimensions.

    1D: the (k+1)-point Gauss-Lobatto rule; the endpoints are the face points.
    2D: equal-weight union over the two axis directions of
    {(k+1)-point Gauss transverse} x {Gauss-Lobatto normal}; the face points
    are the (k+1)-point Gauss points of each edge.  The construction is
    verified against an independent high-order quadrature at build time.
    """
    if not 1 <= k <= 3:
        raise ValueError(f"decomposition supports 1 <= k <= 3, got {k}")
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    gl = gauss_lobatto_rule(_lobatto_count(k))
    if dim == 1:
        pts = gl.points[:, None]
        wts = gl.weights.copy()
        face_idx = (np.array([0]), np.array([len(pts) - 1]))
        edge_w = np.array([1.0])
        interior = np.arange(1, len(pts) - 1)
    else:
        g = gauss_rule(k + 1)
        registry: dict[tuple[int, int], float] = {}
        coords: dict[tuple[int, int], tuple[float, float]] = {}

        def add(x, y, w):
            key = (round(x * 1e14), round(y * 1e14))
            registry[key] = registry.get(key, 0.0) + w
            coords[key] = (x, y)

        for a, wa in zip(gl.points, gl.weights):       # normal = x
            for b, wb in zip(g.points, g.weights):
                add(a, b, 0.5 * wa * wb)
        for b, wb in zip(g.points, g.weights):         # normal = y
            for a, wa in zip(gl.points, gl.weights):
                add(b, a, 0.5 * wb * wa)
        keys = sorted(registry)
        pts = np.array([coords[key] for key in keys])
        wts = np.array([registry[key] for key in keys])

        def face_indices(axis, value):
            on_face = np.isclose(pts[:, axis], value, atol=1e-13)
            idx = np.nonzero(on_face)[0]
            order = np.argsort(pts[idx, 1 - axis])
            return idx[order]

        face_idx = (
            face_indices(0, 0.0),
            face_indices(0, 1.0),
            face_indices(1, 0.0),
            face_indices(1, 1.0),
        )
        edge_w = g.weights.copy()
        on_any_face = np.zeros(len(pts), dtype=bool)
        for idx in face_idx:
            on_any_face[idx] = True
        interior = np.nonzero(~on_any_face)[0]

    if np.any(wts <= 0.0):
        raise ValueError(f"decomposition infeasible: nonpositive weight for k={k}, dim={dim}")

    ratios = [wts[idx] / edge_w for idx in face_idx]
    c = float(min(np.min(r) for r in ratios))
    decomp = ConvexDecomposition(
        dim=dim, degree=k, points=pts, weights=wts,
        face_point_idx=face_idx, edge_weights=edge_w,
        interior_idx=interior, c_F=c, c_G=c,
    )
    _verify_decomposition(decomp)
    return decomp


def _verify_decomposition(decomp: ConvexDecomposition, n_trials: int = 100) -> None:
    """Check the cell-average identity against a 10-point Gauss oracle."""
    basis = Basis(kind="Q" if decomp.dim == 2 else "P", degree=decomp.degree, dim=decomp.dim)
    oracle_pts, oracle_w = tensor_gauss(10, decomp.dim)
    V_oracle = basis.eval(oracle_pts)
    V_dec = basis.eval(decomp.points)
    rng = np.random.default_rng(1234)
    coeffs = rng.standard_normal((n_trials, basis.n_basis))
    avg_oracle = coeffs @ (V_oracle.T @ oracle_w)
    avg_dec = coeffs @ (V_dec.T @ decomp.weights)
    resid = np.max(np.abs(avg_oracle - avg_dec))
    if resid > 1e-13:
        raise ValueError(
            f"decomposition failed self-check for k={decomp.degree}, dim={decomp.dim}: "
            f"residual {resid:.3e}"
        )
    if abs(np.sum(decomp.weights) - 1.0) > 1e-13:
        raise ValueError("decomposition weights do not sum to 1")


def cfl_constants(decomp: ConvexDecomposition) -> tuple[float, float]:
    """CFL constants (c_F, c_G); equal on Cartesian cells with a shared edge rule."""
    return decomp.c_F, decomp.c_G
