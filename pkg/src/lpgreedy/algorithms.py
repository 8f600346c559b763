"""Greedy iteration engine: one-step transitions and the run driver.

Algorithm ids: wcga (full projection onto all selected atoms), wgafr (joint
2-D relaxation), rwrga (decoupled line search + rescale), rrxga (norm-scan
selection + rescale, no weakness parameter), wrga (convex relaxation), wdga
(plain one-dimensional update), gg (explicit step size from the space's
smoothness constants, then rescale).

Every iteration records the measured quantities the diagnostics layer
audits: selection threshold values, an independently measured single-atom
error-reduction reference, the residual-approximant pairing, and grid
margins for the orthogonality-style inequalities.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .dictionary import Dictionary, Target, greedy_select
from .solvers import (DEFAULT_SOLVER, SolverConfig, bracket_minimum,
                      chebyshev_project, dense_line_min, line_search,
                      min_along_ray, minimize_2d)
from .space import (DualFunctional, Element, LpSpace, dict_dual_norm,
                    functional_coords, pnorm, pnorm_rows)
from .tolerances import DEFAULT_TOLS

ALGORITHM_IDS = ("wcga", "wgafr", "rwrga", "rrxga", "wrga", "wdga", "gg")

_BJ_GRID = (-1.0, -0.5, 0.1, 0.5, 1.0)
_NEG_GRID = (-2.0, -1.0, -0.5, -0.1, -0.01)


@dataclass(frozen=True)
class WeaknessSchedule:
    """Per-iteration selection relaxation factors t_m in [0, 1]."""

    kind: str = "constant"  # constant | power_decay | explicit_list
    t0: float = 1.0
    exponent: float = 0.0
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("constant", "power_decay", "explicit_list"):
            raise ValueError(f"unknown weakness kind {self.kind!r}")
        if not (0.0 < self.t0 <= 1.0):
            raise ValueError("t0 must lie in (0, 1]")
        if self.exponent < 0:
            raise ValueError("decay exponent must be nonnegative")
        if self.kind == "explicit_list":
            if not self.values:
                raise ValueError("explicit_list schedule needs values")
            if any(not (0.0 <= v <= 1.0) for v in self.values):
                raise ValueError("weakness values must lie in [0, 1]")

    def value(self, m: int) -> float:
        if self.kind == "constant":
            return self.t0
        if self.kind == "power_decay":
            return self.t0 * float(m) ** (-self.exponent)
        return self.values[min(m - 1, len(self.values) - 1)]

    def as_dict(self) -> dict:
        return {"kind": self.kind, "t0": self.t0, "exponent": self.exponent,
                "values": list(self.values) if self.values else None}

    @staticmethod
    def from_dict(d: dict) -> "WeaknessSchedule":
        vals = tuple(d["values"]) if d.get("values") else None
        return WeaknessSchedule(kind=d["kind"], t0=d["t0"],
                                exponent=d["exponent"], values=vals)


@dataclass
class GreedyState:
    """Mutable per-run state: f = f_m + G_m holds throughout."""

    space: LpSpace
    f: np.ndarray
    f_m: np.ndarray
    G_m: np.ndarray
    m: int = 0
    selected: list = field(default_factory=list)
    basis: list = field(default_factory=list)   # Elements, wcga only
    coeffs: Optional[np.ndarray] = None


@dataclass
class IterationRecord:
    """Everything one greedy step produced, as measured scalars."""

    m: int
    selected_index: int
    t_m: float
    gs_lhs: float
    gs_rhs: float
    residual_norm: float
    bo_abs: float
    er_reference: float
    lam: float
    omega: Optional[float] = None
    mu: Optional[float] = None
    delta_m: float = 0.0
    delta_achieved: float = 0.0
    eta_m: float = 0.0
    eps_m: float = 0.0
    bj_margin: float = 0.0
    neg_line_margin: float = 0.0
    wall_ns: int = 0


@dataclass
class RunReport:
    """Ordered iteration records plus everything needed to audit them."""

    algorithm: str
    space_spec: str
    space_meta: dict
    dict_spec: str
    target_spec: str
    target_meta: dict
    weakness: dict
    solver: dict
    max_m: int
    stop_tol: float
    rule: str
    termination: str
    records: list
    initial_residual: float = 0.0
    warnings: list = field(default_factory=list)
    errors: Optional[dict] = None
    delta0: float = 0.0
    delta0_achieved: float = 0.0
    schema: int = 1

    def residual_norms(self) -> np.ndarray:
        return np.array([r.residual_norm for r in self.records])

    def t_values(self) -> np.ndarray:
        return np.array([r.t_m for r in self.records])

    def partial_tp_sums(self) -> np.ndarray:
        """Cumulative sums of t_k^p_conj, one entry per iteration."""
        p_conj = self.space_meta["p_conj"]
        return np.cumsum(self.t_values() ** p_conj)

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RunReport":
        d = json.loads(text)
        records = [IterationRecord(**r) for r in d.pop("records")]
        return RunReport(records=records, **d)


def _functional(space: LpSpace, arr: np.ndarray, arr_norm: float) -> DualFunctional:
    coords = functional_coords(space.p, arr, arr_norm)
    return DualFunctional(coords=coords, space=space, norm_bound=1.0)


def bo_noise_floor(g_norm: float) -> float:
    """Below this residual norm the residual direction is float cancellation
    noise and the residual-approximant pairing cannot be measured; such
    remainders count as numerically exact and their defect is recorded as 0."""
    return max(DEFAULT_TOLS.zero_residual, 1e-8 * max(1.0, g_norm))


def _measured_bo(space: LpSpace, f_m: np.ndarray, r_new: float,
                 G: np.ndarray) -> float:
    if r_new <= bo_noise_floor(pnorm(space.p, G)):
        return 0.0
    F = functional_coords(space.p, f_m, r_new)
    return abs(float(np.dot(F, G)))


def _er_reference(space: LpSpace, f_prev: np.ndarray, phi: np.ndarray,
                  r_prev: float, cfg: SolverConfig) -> float:
    """Independently measured inf over lam >= 0 of ||f_prev - lam phi||."""
    def vec(ls: np.ndarray) -> np.ndarray:
        return pnorm_rows(space.p, f_prev[None, :] - ls[:, None] * phi[None, :])
    return dense_line_min(vec, 0.0, 2.0 * r_prev, 512, cfg)[1]


def _grid_margins(space: LpSpace, f_prev: np.ndarray, r_prev: float,
                  phi: np.ndarray, f_new: np.ndarray, r_new: float,
                  G_new: np.ndarray) -> tuple:
    """(bj_margin, neg_line_margin) over the fixed lambda grids."""
    neg = min(pnorm(space.p, f_prev - lam * phi) for lam in _NEG_GRID) - r_prev
    bj = min(pnorm(space.p, f_new - lam * G_new) for lam in _BJ_GRID) - r_new
    return bj, neg


def _xgreedy_scan(space: LpSpace, f_prev: np.ndarray, D: Dictionary,
                  r_prev: float) -> tuple:
    """Best (signed atom, lam) minimizing ||f_prev - lam g|| over the scan.

    A vectorized golden-section pass over all atoms at once (the minimizer
    magnitude never exceeds 2 ||f_prev|| for unit atoms), then an exact
    refinement along the winning atom.
    """
    M = D.matrix
    N = M.shape[0]
    a = np.full(N, -2.0 * r_prev)
    b = np.full(N, 2.0 * r_prev)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    for _ in range(48):
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc = pnorm_rows(space.p, f_prev[None, :] - c[:, None] * M)
        fd = pnorm_rows(space.p, f_prev[None, :] - d[:, None] * M)
        take_left = fc < fd
        b = np.where(take_left, d, b)
        a = np.where(take_left, a, c)
    mid = 0.5 * (a + b)
    vals = pnorm_rows(space.p, f_prev[None, :] - mid[:, None] * M)
    i = int(np.argmin(vals))
    lam = min_along_ray(space.p, f_prev, M[i])
    sidx = (i + 1) if lam >= 0 else -(i + 1)
    return sidx, abs(lam)


def _rescale(space: LpSpace, f: np.ndarray, v: np.ndarray,
             cfg: SolverConfig) -> tuple:
    """min over mu in R of ||f - mu v||: bracketed golden section around the
    identity, polished to derivative precision along the ray.

    The polish matters: the golden-section argument error alone leaves a
    residual-approximant pairing that blows up as the residual shrinks.
    Returns (mu, mu * v, value)."""
    if pnorm(space.p, v) <= 1e-15:
        return 1.0, v * 0.0, pnorm(space.p, f)

    def obj(mu: float) -> float:
        return pnorm(space.p, f - mu * v)

    blo, bhi = bracket_minimum(obj, 1.0, cfg, two_sided=True)
    mu, val = line_search(obj, blo, bhi, cfg)
    mu_ray = min_along_ray(space.p, f, v)
    v_ray = obj(mu_ray)
    if v_ray <= val * (1.0 + 1e-12):  # prefer the stationary point on ties
        mu, val = mu_ray, v_ray
    if obj(1.0) < val * (1.0 - 1e-12):  # identity rescale is always admissible
        mu, val = 1.0, obj(1.0)
    return mu, mu * v, val


def _two_dir_solve(space: LpSpace, f: np.ndarray, G_prev: np.ndarray,
                   phi: np.ndarray, cfg: SolverConfig) -> tuple:
    """min over (w in R, lam >= 0) of ||f - ((1-w) G_prev + lam phi)||.

    Coordinate descent by bracket + golden section, then alternating exact
    ray solves until the residual pairs with both directions at machine
    precision (the pairing with the final approximant is what the
    biorthogonality audit measures).  Returns (w, lam, value).
    """
    p = space.p

    def obj(w: float, lam: float) -> float:
        return pnorm(p, f - ((1.0 - w) * G_prev + lam * phi))

    (w, lam), _ = minimize_2d(obj, cfg)
    a, b = 1.0 - w, lam
    r = f - a * G_prev - b * phi
    for _ in range(60):
        a0, b0 = a, b
        da = min_along_ray(p, r, G_prev)
        a += da
        r = r - da * G_prev
        db = max(min_along_ray(p, r, phi), -b)  # keep lam >= 0
        b += db
        r = r - db * phi
        # joint-direction solve along the net displacement breaks the slow
        # zigzag of pure coordinate alternation
        ja, jb = a - a0, b - b0
        u = ja * G_prev + jb * phi
        if float(np.dot(u, u)) > 0.0:
            t = min_along_ray(p, r, u)
            if jb > 0.0:
                t = max(t, -b / jb)
            elif jb < 0.0:
                t = min(t, -b / jb)
            a += t * ja
            b += t * jb
            r = r - t * u
        rn = pnorm(p, r)
        if rn <= 1e-13:
            break
        Fc = functional_coords(p, r, rn)
        pairing = abs(a * float(np.dot(Fc, G_prev))) + abs(b * float(np.dot(Fc, phi)))
        if pairing <= 1e-10:
            break
    return 1.0 - a, b, pnorm(p, r)


def step_wcga(state: GreedyState, D: Dictionary, sidx: int,
              cfg: SolverConfig) -> dict:
    """Append the atom and project f onto the span of all selected atoms."""
    phi = D.atom(sidx)
    state.basis.append(Element(coords=phi, space=state.space))
    proj = chebyshev_project(state.space, Element(coords=state.f, space=state.space),
                             state.basis, cfg)
    state.G_m = proj.approximant.coords
    state.f_m = proj.residual.coords
    state.coeffs = proj.coeffs
    return {"lam": float(proj.coeffs[-1]), "converged": proj.converged}


def step_wgafr(state: GreedyState, D: Dictionary, sidx: int,
               cfg: SolverConfig) -> dict:
    """Joint search over the relaxation weight and the new coefficient."""
    phi = D.atom(sidx)
    w, lam, _ = _two_dir_solve(state.space, state.f, state.G_m, phi, cfg)
    state.G_m = (1.0 - w) * state.G_m + lam * phi
    state.f_m = state.f - state.G_m
    return {"lam": lam, "omega": w}


def step_rwrga(state: GreedyState, D: Dictionary, sidx: int,
               cfg: SolverConfig) -> dict:
    """Line search along the atom, then rescale the whole approximant."""
    phi = D.atom(sidx)
    f, p = state.f, state.space.p
    f_prev = state.f_m

    def obj(lam: float) -> float:
        return pnorm(p, f_prev - lam * phi)

    blo, bhi = bracket_minimum(obj, 0.0, cfg)
    lam, _ = line_search(obj, blo, bhi, cfg)
    mu, G, _ = _rescale(state.space, f, state.G_m + lam * phi, cfg)
    state.G_m = G
    state.f_m = f - G
    return {"lam": lam, "mu": mu}


def step_rrxga(state: GreedyState, D: Dictionary, sidx: int, lam: float,
               cfg: SolverConfig) -> dict:
    """Rescale step for the scan-selected atom (selection happens upstream)."""
    phi = D.atom(sidx)
    mu, G, _ = _rescale(state.space, state.f, state.G_m + lam * phi, cfg)
    state.G_m = G
    state.f_m = state.f - G
    return {"lam": lam, "mu": mu}


def step_variant(state: GreedyState, D: Dictionary, sidx: int, variant: str,
                 cfg: SolverConfig, gs_value: float = 0.0) -> dict:
    """wrga / wdga / gg one-step updates."""
    phi = D.atom(sidx)
    f, p = state.f, state.space.p
    f_prev, G_prev = state.f_m, state.G_m

    if variant == "wrga":
        def obj(lam: float) -> float:
            return pnorm(p, f - ((1.0 - lam) * G_prev + lam * phi))
        lam, _ = line_search(obj, 0.0, 1.0, cfg)
        state.G_m = (1.0 - lam) * G_prev + lam * phi
        state.f_m = f - state.G_m
        return {"lam": lam}

    if variant == "wdga":
        def obj(lam: float) -> float:
            return pnorm(p, f_prev - lam * phi)
        blo, bhi = bracket_minimum(obj, 0.0, cfg)
        lam, _ = line_search(obj, blo, bhi, cfg)
        state.G_m = G_prev + lam * phi
        state.f_m = f - state.G_m
        return {"lam": lam}

    if variant == "gg":
        space = state.space
        r_prev = pnorm(p, f_prev)
        mag = (abs(gs_value) / (2.0 * space.gamma * space.q)) ** (1.0 / (space.q - 1.0))
        lam = float(np.sign(gs_value)) * r_prev * mag if gs_value != 0.0 else 0.0
        mu, G, _ = _rescale(space, f, G_prev + lam * phi, cfg)
        state.G_m = G
        state.f_m = f - G
        return {"lam": lam, "mu": mu}

    raise ValueError(f"unknown variant {variant!r}")


def run_greedy(algorithm: str, f: Element, D: Dictionary, tau: WeaknessSchedule,
               cfg: SolverConfig = None, max_m: int = 100,
               stop_tol: float = 1e-12, rule: str = "exact_argmax",
               target: Optional[Target] = None) -> RunReport:
    """Iterate one algorithm until max_m, exact arrival, or a stall.

    Deterministic given the dictionary/target seeds; every record is fully
    populated with the measured per-iteration quantities.
    """
    algorithm = algorithm.lower()
    if algorithm not in ALGORITHM_IDS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    space = f.space
    if D.space != space:
        raise ValueError("target and dictionary live in different spaces")
    cfg = cfg or DEFAULT_SOLVER

    warnings: list = []
    if algorithm == "wrga" and (target is None or not target.in_hull):
        warnings.append("wrga target lacks a hull certificate; "
                        "convergence is only guaranteed on the hull")

    state = GreedyState(space=space, f=f.coords.copy(), f_m=f.coords.copy(),
                        G_m=np.zeros(space.n))
    records: list = []
    termination = "max_m"
    loop_to = max_m
    if pnorm(space.p, state.f_m) <= stop_tol:
        termination = "already exact"
        loop_to = 0

    for m in range(1, loop_to + 1):
        tick = time.perf_counter_ns()
        f_prev = state.f_m.copy()
        r_prev = pnorm(space.p, f_prev)
        F = _functional(space, f_prev, r_prev)

        if algorithm == "rrxga":
            t_m = 0.0
            sidx, lam_scan = _xgreedy_scan(space, f_prev, D, r_prev)
            phi = D.atom(sidx)
            gs_lhs = float(np.dot(F.coords, phi))
            gs_rhs = 0.0
        else:
            t_m = tau.value(m)
            dn = dict_dual_norm(F, D)
            if dn <= 1e-13:
                termination = "stalled"
                break
            sidx, gs_lhs = greedy_select(F, D, t_m, rule)
            gs_rhs = t_m * dn
            phi = D.atom(sidx)

        er_ref = _er_reference(space, f_prev, phi, r_prev, cfg)

        if algorithm == "wcga":
            info = step_wcga(state, D, sidx, cfg)
            if not info.pop("converged"):
                warnings.append(f"projection not converged at m={m}")
        elif algorithm == "wgafr":
            info = step_wgafr(state, D, sidx, cfg)
        elif algorithm == "rwrga":
            info = step_rwrga(state, D, sidx, cfg)
        elif algorithm == "rrxga":
            info = step_rrxga(state, D, sidx, lam_scan, cfg)
        else:
            info = step_variant(state, D, sidx, algorithm, cfg, gs_value=gs_lhs)

        state.selected.append(sidx)
        state.m = m
        r_new = pnorm(space.p, state.f_m)
        bo_abs = _measured_bo(space, state.f_m, r_new, state.G_m)
        bj, neg = _grid_margins(space, f_prev, r_prev, phi, state.f_m, r_new,
                                state.G_m)
        records.append(IterationRecord(
            m=m, selected_index=int(sidx), t_m=t_m, gs_lhs=gs_lhs, gs_rhs=gs_rhs,
            residual_norm=r_new, bo_abs=bo_abs, er_reference=er_ref,
            lam=float(info.get("lam", 0.0)),
            omega=info.get("omega"), mu=info.get("mu"),
            bj_margin=bj, neg_line_margin=neg,
            wall_ns=time.perf_counter_ns() - tick))
        if r_new <= stop_tol:
            termination = "stop_tol"
            break

    return RunReport(
        algorithm=algorithm,
        space_spec=space.spec_string(),
        space_meta={"n": space.n, "p": space.p, "q": space.q,
                    "gamma": space.gamma, "p_conj": space.p_conj},
        dict_spec=D.spec_string(),
        target_spec=target.spec.mode if target else "custom",
        target_meta=_target_meta(target),
        weakness=tau.as_dict(),
        solver=asdict(cfg),
        max_m=max_m, stop_tol=stop_tol, rule=rule,
        termination=termination, records=records,
        initial_residual=pnorm(space.p, f.coords), warnings=warnings)


def _target_meta(target: Optional[Target]) -> dict:
    if target is None:
        return {"in_hull": False, "eps": 0.0, "a_eps": 1.0, "certificate": None,
                "mode": "custom", "k": 0, "seed": 0}
    cert = [[i, w] for i, w in target.certificate] if target.certificate else None
    return {"in_hull": target.in_hull, "eps": target.eps, "a_eps": target.a_eps,
            "certificate": cert, "mode": target.spec.mode, "k": target.spec.k,
            "seed": target.spec.seed}
