"""Minimax search for RK coefficients with relaxed bound-preserving CFL limits.

A compact RKDG step mixes two spatial operators; its bound-preserving CFL
constant is governed by the largest forward-Euler coefficient appearing when
each stage is rewritten as a convex combination of forward-Euler substeps
(a generalized Shu-Osher form, allowing backward-in-time substeps with the
local operator).  This module evaluates that worst coefficient for a given
parameter set, checks order conditions, certifies decompositions, and runs a
multi-start constrained search for the minimax optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize

__all__ = [
    "DecompParams",
    "SearchError",
    "butcher_arrays",
    "shu_osher_terms",
    "objective",
    "objective_unreduced2",
    "order_conditions",
    "certify_decomposition",
    "search",
]

_DEN_GUARD = 1e-12

# Parameter-vector layout per order: number of strictly-lower A entries,
# weights, and auxiliary convex coefficients.
_LAYOUT = {2: (1, 2, 1), 3: (3, 3, 3), 4: (6, 4, 6)}


class SearchError(RuntimeError):
    """The multi-start search found no feasible point."""


@dataclass
class DecompParams:
    """Butcher entries plus the auxiliary convex-split coefficients.

    `a` holds the strictly-lower-triangular entries row by row
    (a21 | a31, a32 | a41, a42, a43); `alpha` holds the split coefficients
    (1, 3, or 6 of them for orders 2, 3, 4).  `beta` is the optional extra
    split of the order-2 final stage; when absent the optimal inner split is
    used, which reproduces the reduced objective.
    """

    order: int
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    beta: float | None = None

    def __post_init__(self):
        na, nb, nal = _LAYOUT[self.order]
        self.a = np.asarray(self.a, dtype=float).reshape(na)
        self.b = np.asarray(self.b, dtype=float).reshape(nb)
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(nal)

    @property
    def stages(self) -> int:
        return self.order


def butcher_arrays(params: DecompParams):
    """(A, b, c) with c the row sums of A."""
    s = params.stages
    A = np.zeros((s, s))
    k = 0
    for i in range(1, s):
        A[i, :i] = params.a[k:k + i]
        k += i
    b = params.b.copy()
    return A, b, A.sum(axis=1)


@dataclass
class Term:
    """One forward-Euler substep of a convex combination.

    Acts on stage `j` (1-based) with weight `beta`; `mu_f` scales the coupled
    operator, `mu_g` (signed) the local operator.  The effective CFL
    coefficient of the term is mu_f + |mu_g|.
    """

    j: int
    beta: float
    mu_f: float
    mu_g: float

    @property
    def coefficient(self) -> float:
        return self.mu_f + abs(self.mu_g)


def shu_osher_terms(params: DecompParams) -> dict:
    """Convex-combination terms per stage: {2: [...], ..., 'final': [...]}.

    Terms whose weight is below the positivity guard are flagged by mapping
    the corresponding coefficients to infinity.
    """
    al = params.alpha
    a = params.a
    b = params.b

    def ratio(num, den):
        return num / den if den > _DEN_GUARD else np.inf

    terms: dict = {}
    if params.order == 2:
        a21 = a[0]
        alpha = al[0]
        terms[2] = [Term(1, 1.0, 0.0, a21)]
        beta = params.beta
        if beta is None:
            # Optimal inner split merges the two stage-1 substeps: coefficient
            # (alpha a21 + b1) / (1 - alpha).
            terms["final"] = [
                Term(1, 1.0 - alpha, ratio(b[0], 1.0 - alpha),
                     -ratio(alpha * a21, 1.0 - alpha)),
                Term(2, alpha, ratio(b[1], alpha), 0.0),
            ]
        else:
            terms["final"] = [
                Term(1, (1.0 - alpha) * beta, 0.0,
                     -ratio(alpha * a21, (1.0 - alpha) * beta)),
                Term(1, (1.0 - alpha) * (1.0 - beta),
                     ratio(b[0], (1.0 - alpha) * (1.0 - beta)), 0.0),
                Term(2, alpha, ratio(b[1], alpha), 0.0),
            ]
    elif params.order == 3:
        a21, a31, a32 = a
        al1, al2, al3 = al
        terms[2] = [Term(1, 1.0, 0.0, a21)]
        terms[3] = [
            Term(1, 1.0 - al1, 0.0, ratio(a31 - al1 * a21, 1.0 - al1)),
            Term(2, al1, 0.0, ratio(a32, al1)),
        ]
        w1 = 1.0 - al2 - al3
        terms["final"] = [
            Term(1, w1, ratio(b[0], w1), -ratio(al2 * a21 + al3 * a31, w1)),
            Term(2, al2, ratio(b[1], al2), -ratio(al3 * a32, al2)),
            Term(3, al3, ratio(b[2], al3), 0.0),
        ]
    elif params.order == 4:
        a21, a31, a32, a41, a42, a43 = a
        al1, al2, al3, al4, al5, al6 = al
        terms[2] = [Term(1, 1.0, 0.0, a21)]
        terms[3] = [
            Term(1, 1.0 - al1, 0.0, ratio(a31 - al1 * a21, 1.0 - al1)),
            Term(2, al1, 0.0, ratio(a32, al1)),
        ]
        w4 = 1.0 - al2 - al3
        terms[4] = [
            Term(1, w4, 0.0, ratio(a41 - al2 * a21 - al3 * a31, w4)),
            Term(2, al2, 0.0, ratio(a42 - al3 * a32, al2)),
            Term(3, al3, 0.0, ratio(a43, al3)),
        ]
        wf = 1.0 - al4 - al5 - al6
        terms["final"] = [
            Term(1, wf, ratio(b[0], wf), -ratio(al4 * a21 + al5 * a31 + al6 * a41, wf)),
            Term(2, al4, ratio(b[1], al4), -ratio(al5 * a32 + al6 * a42, al4)),
            Term(3, al5, ratio(b[2], al5), -ratio(al6 * a43, al5)),
            Term(4, al6, ratio(b[3], al6), 0.0),
        ]
    else:
        raise ValueError(f"unsupported order {params.order}")
    return terms


def objective(params: DecompParams) -> float:
    """Largest forward-Euler coefficient of the decomposition (+inf if infeasible)."""
    terms = shu_osher_terms(params)
    worst = 0.0
    for key in sorted(terms, key=str):
        for t in terms[key]:
            c = t.coefficient
            if not np.isfinite(c):
                return np.inf
            worst = max(worst, c)
    return worst


def objective_unreduced2(params: DecompParams, beta: float | None = None) -> float:
    """Order-2 objective before the inner split is eliminated."""
    if params.order != 2:
        raise ValueError("unreduced objective is defined for order 2 only")
    p = DecompParams(2, params.a, params.b, params.alpha,
                     beta=params.beta if beta is None else beta)
    if p.beta is None:
        raise ValueError("unreduced objective needs an explicit beta")
    return objective(p)


def optimal_beta2(params: DecompParams) -> float:
    """Inner split minimizing the order-2 unreduced objective: beta = g/(g+f)."""
    g = params.alpha[0] * params.a[0]
    f = params.b[0]
    if g + f <= 0:
        return 1.0
    return g / (g + f)


def order_conditions(A, b, c, order: int) -> np.ndarray:
    """Residuals of the order conditions up to the requested order."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    res = [b.sum() - 1.0, b @ c - 0.5]
    if order >= 3:
        res += [b @ c**2 - 1.0 / 3.0, b @ (A @ c) - 1.0 / 6.0]
    if order >= 4:
        res += [
            b @ c**3 - 0.25,
            b @ (c * (A @ c)) - 0.125,
            b @ (A @ c**2) - 1.0 / 12.0,
            b @ (A @ (A @ c)) - 1.0 / 24.0,
        ]
    return np.array(res)


def certify_decomposition(params: DecompParams, tol: float = 1e-13) -> bool:
    """Check the convex weights and reassemble the Butcher recursion.

    Valid when each stage's weights lie in [0,1] and sum to 1, coefficients
    are finite, and expanding the convex combination recovers the tableau:
    stage rows must reproduce a_ij exactly with all coupled-operator parts
    vanishing, and the final combination must reproduce b with all local
    parts vanishing.
    """
    A, b, _ = butcher_arrays(params)
    s = params.stages
    try:
        terms = shu_osher_terms(params)
    except ValueError:
        return False
    for key, tlist in terms.items():
        wsum = 0.0
        g_coeff = np.zeros(s)
        f_coeff = np.zeros(s)
        for t in tlist:
            if not (np.isfinite(t.coefficient) and -1e-12 <= t.beta <= 1.0 + 1e-12):
                return False
            wsum += t.beta
            # u^(j) expands to u^n + dt sum_l A[j-1, l] G(u^(l+1)).
            g_coeff[: t.j - 1] += t.beta * A[t.j - 1, : t.j - 1]
            g_coeff[t.j - 1] += t.beta * t.mu_g
            f_coeff[t.j - 1] += t.beta * t.mu_f
        if abs(wsum - 1.0) > 1e-12:
            return False
        if key == "final":
            ok = np.allclose(f_coeff, b, atol=tol) and np.allclose(g_coeff, 0.0, atol=tol)
        else:
            ok = np.allclose(g_coeff, A[key - 1], atol=tol) and np.allclose(f_coeff, 0.0, atol=tol)
        if not ok:
            return False
    return True


# -- multi-start constrained search ---------------------------------------------


def _pack(params: DecompParams) -> np.ndarray:
    return np.concatenate([params.a, params.b, params.alpha])


def _unpack(order: int, x: np.ndarray) -> DecompParams:
    na, nb, nal = _LAYOUT[order]
    return DecompParams(order, x[:na], x[na:na + nb], x[na + nb:na + nb + nal])


def _term_functions(order: int):
    """Constraint callables for the epigraph form: t >= mu_f +- mu_g per term."""
    def all_terms(x):
        return shu_osher_terms(_unpack(order, x))

    def weights(x):
        p = _unpack(order, x)
        al = p.alpha
        if order == 2:
            return np.array([1.0 - al[0], al[0]])
        if order == 3:
            return np.array([1.0 - al[0], al[0], 1.0 - al[1] - al[2], al[1], al[2]])
        return np.array([
            1.0 - al[0], al[0],
            1.0 - al[1] - al[2], al[1], al[2],
            1.0 - al[3] - al[4] - al[5], al[3], al[4], al[5],
        ])

    return all_terms, weights


def search(order: int, starts: int, seed: int) -> tuple[DecompParams, float]:
    """Multi-start constrained minimax search; deterministic for a fixed seed.

    Each start runs SLSQP on the epigraph form (minimize t subject to
    t >= mu_f +- mu_g for every decomposition term, the order conditions as
    equalities, positivity of the convex weights, and the parameter box).
    Feasible results are ranked by (objective, lexicographic parameters).
    """
    if order not in (2, 3, 4):
        raise ValueError(f"order must be 2, 3, or 4, got {order}")
    na, nb, nal = _LAYOUT[order]
    nvar = na + nb + nal
    rng = np.random.default_rng(seed)
    all_terms, weights = _term_functions(order)

    def eq_res(x):
        A, b, c = butcher_arrays(_unpack(order, x))
        return order_conditions(A, b, c, order)

    def ineq(x):
        t = x[-1]
        out = []
        terms = all_terms(x[:-1])
        for key in sorted(terms, key=str):
            for term in terms[key]:
                mu_f, mu_g = term.mu_f, term.mu_g
                if not np.isfinite(mu_f + mu_g):
                    out += [-1.0, -1.0]
                else:
                    out += [t - (mu_f + mu_g), t - (mu_f - mu_g)]
        out.extend(weights(x[:-1]) - 1e-6)
        return np.array(out)

    bounds = ([(0.0, 10.0)] * na + [(0.0, 1.0)] * nb + [(1e-6, 1.0 - 1e-6)] * nal
              + [(0.0, 12.0)])
    constraints = [
        {"type": "eq", "fun": lambda z: eq_res(z[:-1])},
        {"type": "ineq", "fun": ineq},
    ]

    def project_butcher(ab0: np.ndarray) -> np.ndarray | None:
        """Land the Butcher entries on the order-condition manifold."""
        def res(x):
            p = DecompParams(order, x[:na], x[na:], np.full(nal, 0.5))
            A, b, c = butcher_arrays(p)
            return order_conditions(A, b, c, order)
        lb = np.zeros(na + nb)
        ub = np.concatenate([np.full(na, 10.0), np.ones(nb)])
        sol = least_squares(res, ab0, bounds=(lb, ub), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.max(np.abs(sol.fun)) > 1e-11:
            return None
        return sol.x

    best = None
    for _ in range(starts):
        ab0 = np.concatenate([rng.uniform(0.05, 1.5, size=na),
                              rng.uniform(0.05, 1.0, size=nb)])
        alpha0 = rng.uniform(0.1, 0.9, size=nal)
        ab = project_butcher(ab0)
        if ab is None:
            continue
        x0 = np.concatenate([ab, alpha0, [3.0]])
        try:
            res = minimize(lambda z: z[-1], x0, method="SLSQP", bounds=bounds,
                           constraints=constraints,
                           options={"maxiter": 250, "ftol": 1e-12})
        except (ValueError, ZeroDivisionError):
            continue
        if not res.success:
            continue
        cand = _unpack(order, res.x[:-1])
        A, b, c = butcher_arrays(cand)
        if np.max(np.abs(order_conditions(A, b, c, order))) > 1e-10:
            continue
        val = objective(cand)
        if not np.isfinite(val) or not certify_decomposition(cand, tol=1e-9):
            continue
        key = (round(val, 12), tuple(np.round(_pack(cand), 10)))
        if best is None or key < best[0]:
            best = (key, cand, val)
    if best is None:
        raise SearchError(f"no feasible order-{order} decomposition found in {starts} starts")
    return best[1], best[2]
