"""Compact RK time steppers with limiter-after-each-stage and adaptive marching.

A step of the s-stage scheme reads (tilde marks the limited polynomials):

    u^(i)   = u~^n + dt sum_j a_ij [ L(u~^(j)) + s(t_j) ],   i = 2..s
    u^(n+1) = u~^n + dt sum_i b_i  [ D(u~^(i)) + s(t_i) ]

where L is the cell-local operator and D the flux-coupled one.  The scaling
limiter runs after every stage and after the final combination.  Before each
limiting, the stage's cell averages are tested against the admissible set;
a violation is reported as a flag (never an exception) so the marcher can
halve the step size and restart from the saved state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from crkdg.limiter import LimiterReport, limit_euler, limit_scalar
from crkdg.operators import Discretization, SolutionField
from crkdg.rk_search import (
    DecompParams,
    butcher_arrays,
    certify_decomposition,
    objective,
    order_conditions,
    shu_osher_terms,
)

__all__ = [
    "CRKScheme",
    "MarchLog",
    "MarchAbort",
    "StageTrace",
    "builtin_scheme",
    "crk_step",
    "tentative_dt",
    "adaptive_march",
]


class MarchAbort(RuntimeError):
    """Adaptive marching exceeded the halving cap; carries a diagnostic dump."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class CRKScheme:
    """Butcher tableau of a compact RK method plus its certified decomposition.

    Inner stages are tagged with the local operator, the final combination
    with the coupled operator; `cfl` is the linear-stability CFL number and
    `decomposition` the generalized Shu-Osher terms used by the propositions'
    probes (per-stage convex weights and forward-Euler coefficients).
    """

    name: str
    order: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    cfl: float
    params: DecompParams
    inner_operator: str = "local"
    final_operator: str = "dg"

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def decomposition(self) -> dict:
        return shu_osher_terms(self.params)

    def minimax_objective(self) -> float:
        return objective(self.params)

    def validate(self, tol: float = 1e-14) -> None:
        if np.any(np.triu(self.A) != 0.0):
            raise ValueError("A must be strictly lower triangular")
        res = order_conditions(self.A, self.b, self.c, self.order)
        if np.max(np.abs(res)) > tol:
            raise ValueError(f"order conditions violated: residuals {res}")
        if not certify_decomposition(self.params):
            raise ValueError("decomposition coefficients do not certify")


_BUILTIN = {
    2: dict(name="midpoint", a=[0.5], b=[0.0, 1.0],
            alpha=[np.sqrt(3.0) - 1.0], cfl=0.333),
    3: dict(name="heun3", a=[1.0 / 3.0, 0.0, 2.0 / 3.0], b=[0.25, 0.0, 0.75],
            alpha=[0.4764, 0.2442, 0.5242], cfl=0.178),
    4: dict(name="rk4", a=[0.5, 0.0, 0.5, 0.0, 0.0, 1.0],
            b=[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            alpha=[0.5, 0.2346, 0.6850, 0.3334, 0.3066, 0.1142], cfl=0.103),
}


def builtin_scheme(order: int) -> CRKScheme:
    """The built-in 2nd/3rd/4th-order schemes with their published CFL numbers."""
    if order not in _BUILTIN:
        raise ValueError(f"no built-in scheme of order {order}")
    spec = _BUILTIN[order]
    params = DecompParams(order, spec["a"], spec["b"], spec["alpha"])
    A, b, c = butcher_arrays(params)
    scheme = CRKScheme(name=spec["name"], order=order, A=A, b=b, c=c,
                       cfl=spec["cfl"], params=params)
    scheme.validate()
    return scheme


def _avg_admissible(disc: Discretization, averages: np.ndarray, eps: float | None,
                    bounds) -> bool:
    model = disc.model
    active = disc.mesh.active
    if model.kind == "euler":
        ok = model.admissible(averages, eps=eps)
    else:
        lo, hi = model.bounds if bounds is None else bounds
        v = averages[..., 0]
        ok = (v >= lo - 1e-12) & (v <= hi + 1e-12)
    return bool(np.all(ok[active]))


def _limit(disc: Discretization, fld: SolutionField, eps, bounds) -> LimiterReport:
    if disc.model.kind == "euler":
        return limit_euler(disc, fld, disc.model.eps if eps is None else eps)
    return limit_scalar(disc, fld, disc.model.bounds if bounds is None else bounds)


@dataclass
class StageTrace:
    """Optional per-step record for the proposition probes."""

    limited_stages: list = field(default_factory=list)   # coeff arrays of u~^(i)
    pre_limit_averages: list = field(default_factory=list)
    local_rate_averages: list = field(default_factory=list)  # avg of L(u~^(i))
    dg_rate_averages: list = field(default_factory=list)     # avg of D(u~^(i))
    alpha: float = 0.0


def crk_step(disc: Discretization, fld: SolutionField, dt: float, scheme: CRKScheme,
             t: float = 0.0, *, limiter_on: bool = True, eps: float | None = None,
             bounds=None, source=None, alpha: float | None = None,
             record: StageTrace | None = None):
    """One compact RK step from the limited state `fld` at time t.

    Returns (new_field, stage_flags, reports).  stage_flags[i] tells whether
    stage i's cell averages were admissible before limiting (index 0 is the
    final combination's flag position s); on the first failure the remaining
    entries are False and the returned field is the partial stage (callers
    restart with a smaller dt).
    """
    s = scheme.stages
    mesh = disc.mesh
    if alpha is None:
        alpha = disc.wavespeed_bound(fld)
    flags = [True] * (s + 1)
    reports: list[LimiterReport | None] = [None] * (s + 1)
    stage_fields: list[SolutionField] = [fld]
    local_rates: dict[int, np.ndarray] = {}

    def source_rate(i: int) -> np.ndarray | None:
        if source is None:
            return None
        return disc.project_rate(source, t + scheme.c[i] * dt)

    src = [source_rate(i) for i in range(s)]

    def local_rate(j: int) -> np.ndarray:
        if j not in local_rates:
            rate = disc.apply_local(stage_fields[j], t + scheme.c[j] * dt)
            if src[j] is not None:
                rate = rate + src[j]
            local_rates[j] = rate
        return local_rates[j]

    if record is not None:
        record.alpha = alpha
        record.limited_stages.append(fld.coeffs.copy())
        record.pre_limit_averages.append(fld.averages.copy())

    for i in range(1, s):
        acc = np.zeros_like(fld.coeffs)
        for j in range(i):
            aij = scheme.A[i, j]
            if aij != 0.0:
                acc += aij * local_rate(j)
        new = fld.with_coeffs(fld.coeffs + dt * acc)
        ok = _avg_admissible(disc, new.averages, eps, bounds)
        flags[i] = ok
        if record is not None:
            record.pre_limit_averages.append(new.averages.copy())
        if not ok and limiter_on:
            for r in range(i + 1, s + 1):
                flags[r] = False
            return new, flags, reports
        if limiter_on:
            reports[i] = _limit(disc, new, eps, bounds)
        stage_fields.append(new)
        if record is not None:
            record.limited_stages.append(new.coeffs.copy())

    acc = np.zeros_like(fld.coeffs)
    for i in range(s):
        bi = scheme.b[i]
        if bi != 0.0:
            rate = disc.apply_dg(stage_fields[i], t + scheme.c[i] * dt, alpha)
            if src[i] is not None:
                rate = rate + src[i]
            acc += bi * rate
            if record is not None:
                record.dg_rate_averages.append((i, rate[..., 0, :].copy()))
    final = fld.with_coeffs(fld.coeffs + dt * acc)
    ok = _avg_admissible(disc, final.averages, eps, bounds)
    flags[s] = ok
    if record is not None:
        record.pre_limit_averages.append(final.averages.copy())
        record.local_rate_averages.extend(
            (j, r[..., 0, :].copy()) for j, r in sorted(local_rates.items()))
    if not ok and limiter_on:
        return final, flags, reports
    if limiter_on:
        reports[s] = _limit(disc, final, eps, bounds)
    if record is not None:
        record.limited_stages.append(final.coeffs.copy())
    return final, flags, reports


def tentative_dt(disc: Discretization, fld: SolutionField, cfl: float) -> float:
    """dt = cfl * min(dx) / a0 with a0 the global wave-speed bound."""
    a0 = disc.wavespeed_bound(fld)
    if a0 <= 0.0:
        raise ValueError("wave-speed bound is zero: cannot size a time step")
    return float(cfl * np.min(disc.mesh.spacing) / a0)


@dataclass
class MarchLog:
    steps: int = 0
    halvings: list = field(default_factory=list)   # per accepted step
    limiter_activations: list = field(default_factory=list)  # per stage slot
    t_final: float = 0.0

    @property
    def total_halvings(self) -> int:
        return int(sum(self.halvings))


def adaptive_march(disc: Discretization, fld: SolutionField, scheme: CRKScheme,
                   t_end: float, *, cfl: float | None = None,
                   dt_fixed: float | None = None, max_halvings: int = 40,
                   limiter_on: bool = True, eps: float | None = None, bounds=None,
                   source=None, t0: float = 0.0, max_steps: int | None = None,
                   monitor=None) -> tuple[SolutionField, MarchLog]:
    """March to t_end, halving and restarting any step whose stage averages
    leave the admissible set; the final step is clipped to land exactly on
    t_end.  `monitor(t, field, log)` runs after every accepted step."""
    if cfl is None:
        cfl = scheme.cfl
    log = MarchLog()
    log.limiter_activations = [0] * (scheme.stages + 1)
    t = t0
    while t < t_end - 1e-14 * max(1.0, abs(t_end)):
        if max_steps is not None and log.steps >= max_steps:
            break
        dt = dt_fixed if dt_fixed is not None else tentative_dt(disc, fld, cfl)
        dt = min(dt, t_end - t)
        halvings = 0
        while True:
            new, flags, reports = crk_step(
                disc, fld, dt, scheme, t, limiter_on=limiter_on, eps=eps,
                bounds=bounds, source=source)
            if not limiter_on or all(flags):
                break
            halvings += 1
            if halvings > max_halvings:
                bad = [i for i, f in enumerate(flags) if not f]
                raise MarchAbort(
                    f"step at t={t:.6g} still inadmissible after {max_halvings} halvings "
                    f"(dt={dt:.3e}, failing stages {bad})",
                    diagnostics={"t": t, "dt": dt, "flags": flags,
                                 "averages": new.averages.copy()},
                )
            dt *= 0.5
        fld = new
        t += dt
        log.steps += 1
        log.halvings.append(halvings)
        for slot, rep in enumerate(reports):
            if rep is not None and any(rep.stage_active):
                log.limiter_activations[slot] += 1
        if monitor is not None:
            monitor(t, fld, log)
    log.t_final = t
    return fld, log
