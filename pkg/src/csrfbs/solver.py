"""Alternating minimization with a primal-dual inner solver and FISTA filter update.

The outer loop alternates two convex subproblems:

* with the filters fixed, ``(f, b, s, l, a)`` are updated by a preconditioned
  primal-dual splitting iteration (:func:`solve_inner`);
* with everything else fixed, the filters are updated by a few projected
  FISTA steps on the CSR data term (:func:`update_dictionary`).

After the outer loop a long primal-dual run with frozen filters produces the
final estimate (:func:`final_refinement`).
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .background import BackgroundModel, StaticScene, model_stepsize
from .csr import (CsrConfig, Dictionary, DictionaryOperator, init_dictionary, load_dictionary,
                  save_dictionary)
from .linop import flat_adjoint, flat_norm_sq, flat_stack, tv_adjoint, tv_stack, STACK2_NORM_SQ
from .prox import project_l1_ball, project_l2_ball, project_unit_l2, soft_threshold
from .video import as_array, load_video, save_video

log = logging.getLogger(__name__)

STRIPE_MODES = ("off", "time_invariant", "time_varying")


class DivergenceError(RuntimeError):
    """An inner iterate became non-finite or blew up."""


@dataclass(frozen=True)
class SeparationProblem:
    v: np.ndarray
    eps: float
    eta_f: float
    eta_s: float
    lambda2: float
    csr: CsrConfig = field(default_factory=CsrConfig)
    background: BackgroundModel = field(default_factory=StaticScene)
    stripe_mode: str = "off"
    ablation_no_csr: bool = False

    def __post_init__(self):
        v = np.array(as_array(self.v), dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"observed video must be 3-D, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        for name in ("eps", "eta_f", "eta_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.lambda2 <= 0:
            raise ValueError("lambda2 must be positive")
        if self.stripe_mode not in STRIPE_MODES:
            raise ValueError(f"stripe_mode must be one of {STRIPE_MODES}")

    @property
    def shape(self):
        return self.v.shape

    @property
    def lambda1(self) -> float:
        return self.csr.lambda1

    @property
    def use_csr(self) -> bool:
        return not self.ablation_no_csr

    @property
    def stripes(self) -> bool:
        return self.stripe_mode != "off"

    @property
    def stripe_time_invariant(self) -> bool:
        return self.stripe_mode == "time_invariant"


@dataclass
class PrimalState:
    f: np.ndarray
    b: np.ndarray
    s: np.ndarray
    l: np.ndarray
    a: np.ndarray  # (D, n1, n2, n3); D = 0 without CSR

    def blocks(self):
        return (self.f, self.b, self.s, self.l, self.a)


@dataclass
class DualState:
    y_bg: list
    y_flat: Optional[np.ndarray]
    y_tv: np.ndarray
    y_fid: np.ndarray
    y_quad: Optional[np.ndarray]


@dataclass
class SolverState:
    primal: PrimalState
    dual: DualState

    def copy(self) -> "SolverState":
        p = PrimalState(*(x.copy() for x in self.primal.blocks()))
        d = self.dual
        return SolverState(p, DualState(
            [y.copy() for y in d.y_bg],
            None if d.y_flat is None else d.y_flat.copy(),
            d.y_tv.copy(), d.y_fid.copy(),
            None if d.y_quad is None else d.y_quad.copy()))


@dataclass(frozen=True)
class Stepsizes:
    gamma_f: float
    gamma_b: float
    gamma_s: float
    gamma_l: float
    gamma_a: Optional[float]
    gamma_z: float


@dataclass
class SolverSettings:
    max_outer: int = 300
    max_inner: int = 500
    fista_iters: int = 10
    refine_iters: int = 20000
    outer_tol: float = 1e-5
    inner_tol: float = 1e-6
    refine_tol: float = 0.0
    divergence_factor: float = 1e8
    l1_method: str = "sort"
    workers: int = 1

    def __post_init__(self):
        for name in ("max_outer", "max_inner", "fista_iters", "refine_iters"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class InnerPhase:
    stage: str
    iters: int
    objective_start: float
    objective_end: float
    rel_change: float
    slacks_start: dict = field(default_factory=dict)
    slacks_end: dict = field(default_factory=dict)


@dataclass
class SolverReport:
    outer_iters: int = 0
    dictionary_updates: int = 0
    refine_iters: int = 0
    converged: bool = False
    phases: list = field(default_factory=list)
    rel_change_f: list = field(default_factory=list)
    rel_change_b: list = field(default_factory=list)
    slacks: dict = field(default_factory=dict)
    stepsizes: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def inner_iters(self) -> list:
        return [p.iters for p in self.phases]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inner_iters"] = self.inner_iters
        return d


@dataclass
class SeparationResult:
    """Estimated components; ``b`` has the model's final pass applied."""

    f: np.ndarray
    b: np.ndarray
    s: np.ndarray
    l: np.ndarray
    a: np.ndarray
    dictionary: Optional[Dictionary]
    state: SolverState
    report: SolverReport


# -- objective and feasibility -------------------------------------------------

def inner_objective(problem: SeparationProblem, dictionary: Optional[Dictionary], primal: PrimalState,
                    op: Optional[DictionaryOperator] = None) -> float:
    """Finite part of the convex subproblem; constraint indicators are left out."""
    f, b, s, l, a = primal.blocks()
    val = problem.lambda2 * float(np.abs(tv_stack(f + b)).sum()) + problem.background.value(b)
    if problem.stripes:
        val += float(np.abs(l).sum())
    if problem.use_csr:
        if op is None:
            op = DictionaryOperator(dictionary, problem.shape)
        val += 0.5 * float(np.sum((f - op.apply(a)) ** 2)) + problem.lambda1 * float(np.abs(a).sum())
    return val


def constraint_slacks(problem: SeparationProblem, f, b, s, l) -> dict:
    out = {
        "fidelity": float(np.linalg.norm(f + b + s + l - problem.v) - problem.eps),
        "sparse_l1": float(np.abs(s).sum() - problem.eta_s),
        "foreground_l1": float(np.abs(f).sum() - problem.eta_f),
        "flatness_inf": float(np.abs(flat_stack(l, problem.stripe_time_invariant)).max()) if problem.stripes else 0.0,
    }
    for i, L in enumerate(problem.background.linear_maps(problem.shape)):
        out[f"background_{i}_inf"] = float(np.abs(L.apply(b)).max())
    return out


# -- stepsizes -----------------------------------------------------------------

def compute_stepsizes(problem: SeparationProblem, dictionary: Optional[Dictionary]) -> Stepsizes:
    """Operator-norm preconditioned stepsizes.

    Each primal stepsize is the inverse of the summed squared norms of the
    operators acting on that block; the dual stepsize is shared.
    """
    n1, n2, _ = problem.shape
    if problem.stripes:
        gamma_l = 1.0 / (1.0 + flat_norm_sq(problem.stripe_time_invariant))
    else:
        gamma_l = 1.0 / (1.0 + STACK2_NORM_SQ)
    if problem.use_csr:
        if dictionary is None:
            raise ValueError("CSR problem needs a dictionary")
        dictionary.check_fits(n1, n2)
        nsq = DictionaryOperator(dictionary, problem.shape).norm_sq_sum()
        if nsq <= 0:
            raise ValueError("degenerate dictionary: every filter is zero")
        gamma_f = 1.0 / (STACK2_NORM_SQ + 2.0)
        gamma_a = 1.0 / nsq
        n_filters = dictionary.n_filters
    else:
        gamma_f = 1.0 / (STACK2_NORM_SQ + 1.0)
        gamma_a = None
        n_filters = 0
    return Stepsizes(
        gamma_f=gamma_f,
        gamma_b=model_stepsize(problem.background),
        gamma_s=1.0,
        gamma_l=gamma_l,
        gamma_a=gamma_a,
        gamma_z=1.0 / (4.0 + n_filters),
    )


# -- initialization ------------------------------------------------------------

def initial_state(problem: SeparationProblem, dictionary: Optional[Dictionary]) -> SolverState:
    """``b = v``, everything else (primal and dual) zero."""
    shape = problem.shape
    z = lambda: np.zeros(shape)
    n_filters = dictionary.n_filters if (problem.use_csr and dictionary is not None) else 0
    primal = PrimalState(z(), problem.v.copy(), z(), z(), np.zeros((n_filters,) + shape))
    bg = [np.zeros(L.out_shape) for L in problem.background.linear_maps(shape)]
    flat = None
    if problem.stripes:
        flat = np.zeros(((2 if problem.stripe_time_invariant else 1),) + shape)
    dual = DualState(bg, flat, np.zeros((2,) + shape), z(), z() if problem.use_csr else None)
    return SolverState(primal, dual)


# -- inner primal-dual solver --------------------------------------------------

def solve_inner(problem: SeparationProblem, dictionary: Optional[Dictionary], state: SolverState,
                max_iters: int, tol: float = 1e-6, settings: Optional[SolverSettings] = None,
                stage: str = "inner", objective_every: int = 0) -> tuple[SolverState, InnerPhase]:
    """Run the primal-dual iteration on the convex subproblem with fixed filters.

    Stops after ``max_iters`` iterations or once the relative change of the
    primal variables drops to ``tol``.  ``state`` is not modified.
    """
    settings = settings or SolverSettings()
    st = compute_stepsizes(problem, dictionary)
    gf, gb, gs, gl, ga, gz = (st.gamma_f, st.gamma_b, st.gamma_s, st.gamma_l, st.gamma_a, st.gamma_z)
    v, eps, lam1, lam2 = problem.v, problem.eps, problem.lambda1, problem.lambda2
    model = problem.background
    maps = model.linear_maps(problem.shape)
    ti = problem.stripe_time_invariant
    csr = problem.use_csr
    stripes = problem.stripes
    l1 = settings.l1_method

    op = DictionaryOperator(dictionary, problem.shape, settings.workers) if csr else None

    state = state.copy()
    p, d = state.primal, state.dual
    f, b, s, l, a = p.blocks()
    y_tv, y_fid, y_quad, y_flat, y_bg = d.y_tv, d.y_fid, d.y_quad, d.y_flat, d.y_bg

    obj_start = inner_objective(problem, dictionary, p, op)
    slacks_start = constraint_slacks(problem, f, b, s, l)
    limit = settings.divergence_factor * max(np.linalg.norm(v), 1.0)
    rec = op.apply(a) if csr else None
    rel = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        # primal step
        tv_adj = tv_adjoint(y_tv)
        grad_f = tv_adj + y_fid
        if csr:
            grad_f = grad_f + y_quad
        f_new = project_l1_ball(f - gf * grad_f, problem.eta_f, l1)

        grad_b = tv_adj + y_fid
        for L, y in zip(maps, y_bg):
            grad_b = grad_b + L.adjoint(y)
        b_new = model.primal_prox(b - gb * grad_b, gb)

        s_new = project_l1_ball(s - gs * y_fid, problem.eta_s, l1)

        if stripes:
            l_new = soft_threshold(l - gl * (flat_adjoint(y_flat, ti) + y_fid), gl)
        else:
            l_new = l

        if csr:
            a_new = soft_threshold(a + ga * op.adjoint(y_quad), ga * lam1)
            rec_new = op.apply(a_new)

        # extrapolation
        ft = 2.0 * f_new - f
        bt = 2.0 * b_new - b
        st_ = 2.0 * s_new - s
        lt = 2.0 * l_new - l

        # dual step
        if csr:
            y_quad = (y_quad + gz * (ft - (2.0 * rec_new - rec))) / (1.0 + gz)
        y_tv = np.clip(y_tv + gz * tv_stack(ft + bt), -lam2, lam2)
        w = y_fid + gz * (ft + bt + st_ + lt)
        y_fid = w - gz * project_l2_ball(w / gz, v, eps)
        if stripes:
            y_flat = y_flat + gz * flat_stack(lt, ti)
        y_bg = [model.dual_prox(i, y + gz * L.apply(bt), gz) for i, (L, y) in enumerate(zip(maps, y_bg))]

        # convergence bookkeeping
        num = (np.sum((f_new - f) ** 2) + np.sum((b_new - b) ** 2) + np.sum((s_new - s) ** 2)
               + np.sum((l_new - l) ** 2))
        den = np.sum(f * f) + np.sum(b * b) + np.sum(s * s) + np.sum(l * l)
        if csr:
            num += np.sum((a_new - a) ** 2)
            den += np.sum(a * a)
            a, rec = a_new, rec_new
        f, b, s, l = f_new, b_new, s_new, l_new

        size = math.sqrt(np.sum(f * f) + np.sum(b * b) + np.sum(s * s) + np.sum(l * l))
        if not math.isfinite(num) or size > limit:
            raise DivergenceError(f"{stage}: iterate diverged at iteration {it} (norm {size:.3g})")
        rel = math.sqrt(num / den) if den > 0 else (0.0 if num == 0 else math.inf)
        if objective_every and it % objective_every == 0:
            log.debug("%s it=%d rel=%.3e obj=%.6g", stage, it, rel,
                      inner_objective(problem, dictionary, PrimalState(f, b, s, l, a), op))
        # the first step only moves the duals away from zero
        if it > 1 and rel <= tol:
            break

    primal = PrimalState(f, b, s, l, a)
    dual = DualState(y_bg, y_flat, y_tv, y_fid, y_quad)
    obj_end = inner_objective(problem, dictionary, primal, op)
    phase = InnerPhase(stage, it, obj_start, obj_end, rel, slacks_start, constraint_slacks(problem, f, b, s, l))
    return SolverState(primal, dual), phase


# -- dictionary update ---------------------------------------------------------

def update_dictionary(f, a, dictionary: Dictionary, iters: int = 10, workers: int = 1) -> Dictionary:
    """Projected FISTA on ``0.5 ||f - sum_d d_d * a_d||^2`` over unit-norm filters."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    f = np.asarray(f, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if not np.any(a):
        return dictionary
    n1, n2 = f.shape[0], f.shape[1]
    ah = sfft.rfft2(a, axes=(-3, -2), workers=workers)          # (D, n1, m, n3)
    fh = sfft.rfft2(f, axes=(-3, -2), workers=workers)          # (n1, m, n3)
    lip = float(sum(np.max(np.sum(np.abs(x) ** 2, axis=-1)) for x in ah))
    if lip <= 0:
        return dictionary
    step = 1.0 / lip
    shapes = [flt.shape for flt in dictionary.filters]
    ah_conj = np.conj(ah)

    def grad(filters):
        pad = np.zeros((len(filters), n1, n2))
        for k, flt in enumerate(filters):
            pad[k, : flt.shape[0], : flt.shape[1]] = flt
        zh = sfft.rfft2(pad, axes=(-2, -1), workers=workers)   # (D, n1, m)
        rh = fh - np.sum(zh[..., None] * ah, axis=0)
        full = sfft.irfft2(np.sum(ah_conj * rh[None], axis=-1), s=(n1, n2), axes=(-2, -1), workers=workers)
        return [-full[k, : sh[0], : sh[1]] for k, sh in enumerate(shapes)]

    d_prev = [flt.copy() for flt in dictionary.filters]
    z = [flt.copy() for flt in dictionary.filters]
    t = 1.0
    for _ in range(iters):
        g = grad(z)
        d_new = [project_unit_l2(zk - step * gk) for zk, gk in zip(z, g)]
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = [dn + ((t - 1.0) / t_new) * (dn - dp) for dn, dp in zip(d_new, d_prev)]
        d_prev, t = d_new, t_new
    return Dictionary(tuple(d_prev))


# -- outer loop ----------------------------------------------------------------

def _rel_change(new, old) -> float:
    den = np.linalg.norm(old)
    num = np.linalg.norm(new - old)
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return float(num / den)


def _package(problem, dictionary, state: SolverState, report: SolverReport) -> SeparationResult:
    p = state.primal
    b = problem.background.finalize(p.b)
    report.slacks = constraint_slacks(problem, p.f, b, p.s, p.l)
    return SeparationResult(p.f, b, p.s, p.l, p.a, dictionary, state, report)


def run_alm(problem: SeparationProblem, settings: Optional[SolverSettings] = None,
            dictionary: Optional[Dictionary] = None) -> SeparationResult:
    """Alternate the inner solver and the filter update until both relative
    changes of ``f`` and ``b`` reach ``outer_tol`` or ``max_outer`` is hit.

    Without CSR there is a single inner phase and no filter updates.
    """
    settings = settings or SolverSettings()
    t0 = time.perf_counter()
    report = SolverReport()
    if problem.use_csr and dictionary is None:
        dictionary = init_dictionary(problem.csr)
    if not problem.use_csr:
        dictionary = None
    state = initial_state(problem, dictionary)
    report.stepsizes = asdict(compute_stepsizes(problem, dictionary))

    n_outer = 1 if not problem.use_csr else settings.max_outer
    for n in range(n_outer):
        f_old, b_old = state.primal.f, state.primal.b
        state, phase = solve_inner(problem, dictionary, state, settings.max_inner, settings.inner_tol,
                                   settings, stage=f"outer{n + 1}")
        report.phases.append(phase)
        report.outer_iters = n + 1
        if problem.use_csr:
            dictionary = update_dictionary(state.primal.f, state.primal.a, dictionary,
                                           settings.fista_iters, settings.workers)
            report.dictionary_updates += 1
        rf = _rel_change(state.primal.f, f_old)
        rb = _rel_change(state.primal.b, b_old)
        report.rel_change_f.append(rf)
        report.rel_change_b.append(rb)
        log.info("outer %d: inner iters %d, rel f %.3e, rel b %.3e", n + 1, phase.iters, rf, rb)
        if rf <= settings.outer_tol and rb <= settings.outer_tol:
            report.converged = True
            break
    report.wall_time = time.perf_counter() - t0
    return _package(problem, dictionary, state, report)


def final_refinement(problem: SeparationProblem, dictionary: Optional[Dictionary], state: SolverState,
                     settings: Optional[SolverSettings] = None,
                     report: Optional[SolverReport] = None) -> SeparationResult:
    """Long inner run with the filters frozen; ``refine_iters = 0`` leaves the state as is."""
    settings = settings or SolverSettings()
    report = replace(report) if report is not None else SolverReport()
    report.phases = list(report.phases)
    t0 = time.perf_counter()
    if settings.refine_iters > 0:
        state, phase = solve_inner(problem, dictionary, state, settings.refine_iters, settings.refine_tol,
                                   settings, stage="refine")
        report.phases.append(phase)
        report.refine_iters = phase.iters
    report.wall_time += time.perf_counter() - t0
    return _package(problem, dictionary, state, report)


def separate(problem: SeparationProblem, settings: Optional[SolverSettings] = None) -> SeparationResult:
    """Outer alternating loop followed by the final refinement run."""
    settings = settings or SolverSettings()
    res = run_alm(problem, settings)
    return final_refinement(problem, res.dictionary, res.state, settings, res.report)


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(directory, state: SolverState, dictionary: Optional[Dictionary]) -> None:
    """Write every block as a raw video file; stacked blocks are split along a suffix."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    p, d = state.primal, state.dual
    index = {"a": p.a.shape[0], "y_bg": [], "y_flat": None, "y_quad": d.y_quad is not None,
             "dictionary": dictionary is not None}
    for name in ("f", "b", "s", "l"):
        save_video(getattr(p, name), directory / f"{name}.cfbs")
    for k in range(p.a.shape[0]):
        save_video(p.a[k], directory / f"a_{k:03d}.cfbs")
    for k in range(2):
        save_video(d.y_tv[k], directory / f"y_tv_{k}.cfbs")
    save_video(d.y_fid, directory / "y_fid.cfbs")
    if d.y_quad is not None:
        save_video(d.y_quad, directory / "y_quad.cfbs")
    if d.y_flat is not None:
        index["y_flat"] = d.y_flat.shape[0]
        for k in range(d.y_flat.shape[0]):
            save_video(d.y_flat[k], directory / f"y_flat_{k}.cfbs")
    for i, y in enumerate(d.y_bg):
        index["y_bg"].append(list(y.shape))
        save_video(y.reshape(y.shape[0], y.shape[1], -1), directory / f"y_bg_{i}.cfbs")
    if dictionary is not None:
        save_dictionary(dictionary, directory / "dictionary.cfbd")
    (directory / "checkpoint.json").write_text(json.dumps(index, indent=2))


def load_checkpoint(directory) -> tuple[SolverState, Optional[Dictionary]]:
    """Inverse of :func:`save_checkpoint` (values pass through float32)."""
    directory = Path(directory)
    index = json.loads((directory / "checkpoint.json").read_text())
    rd = lambda name: load_video(directory / name).array.copy()
    f, b, s, l = (rd(f"{n}.cfbs") for n in ("f", "b", "s", "l"))
    a = np.stack([rd(f"a_{k:03d}.cfbs") for k in range(index["a"])]) if index["a"] else np.zeros((0,) + f.shape)
    y_tv = np.stack([rd(f"y_tv_{k}.cfbs") for k in range(2)])
    y_fid = rd("y_fid.cfbs")
    y_quad = rd("y_quad.cfbs") if index["y_quad"] else None
    y_flat = np.stack([rd(f"y_flat_{k}.cfbs") for k in range(index["y_flat"])]) if index["y_flat"] else None
    y_bg = [rd(f"y_bg_{i}.cfbs").reshape(shape) for i, shape in enumerate(index["y_bg"])]
    dictionary = load_dictionary(directory / "dictionary.cfbd") if index["dictionary"] else None
    return SolverState(PrimalState(f, b, s, l, a), DualState(y_bg, y_flat, y_tv, y_fid, y_quad)), dictionary
