"""Deterministic parameter sweeps that emit tables, one row per grid coordinate."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from .equilibrium import Objective, as_single_minded, evaluate_worst, metrics
from .game import AuditGame, ContinuousModelSpec, Costly, discretize, fig1_game
from .nonadaptive import max_epsilon, succinct_search

#: Replacement for zero prior entries on the simplex boundary.
SIMPLEX_NUDGE = 1e-6


@dataclass(frozen=True)
class PriorSimplex:
    resolution: int = 60


@dataclass(frozen=True)
class CostSweep:
    lo: float
    hi: float
    step: float


@dataclass(frozen=True)
class PenaltyMargin:
    lo: float
    hi: float
    step: float


@dataclass(frozen=True)
class Resolution:
    m_values: tuple


@dataclass(frozen=True)
class AuditScan:
    type_index: int
    lo: float = 0.0
    hi: float = 1.0
    step: float = 0.01


SweepKind = Union[PriorSimplex, CostSweep, PenaltyMargin, Resolution, AuditScan]


def _ladder(lo, hi, step):
    if step <= 0 or hi < lo:
        raise ValueError(f"bad range [{lo}, {hi}] with step {step}")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + j * step, 12) for j in range(count)]


@dataclass(frozen=True)
class SweepPlan:
    kind: SweepKind
    base: AuditGame | ContinuousModelSpec
    objectives: tuple = (Objective.UTILITY, Objective.WELFARE)
    eps: float = 1e-3

    def __post_init__(self):
        objs = tuple(Objective.parse(o) for o in self.objectives)
        if not objs:
            raise ValueError("plan needs at least one objective")
        object.__setattr__(self, "objectives", objs)
        if isinstance(self.kind, Resolution):
            if not isinstance(self.base, ContinuousModelSpec):
                raise ValueError("a resolution sweep needs a continuous model spec")
            if not self.kind.m_values:
                raise ValueError("resolution sweep needs at least one m")
        elif not isinstance(self.base, AuditGame):
            raise ValueError("this sweep needs a base game")
        if isinstance(self.kind, PriorSimplex) and self.base.m != 3:
            raise ValueError("prior simplex sweep needs m = 3")

    def coordinates(self) -> list:
        k = self.kind
        if isinstance(k, PriorSimplex):
            R = k.resolution
            return [(i / R, j / R, (R - i - j) / R)
                    for i in range(R + 1) for j in range(R + 1 - i)]
        if isinstance(k, (CostSweep, PenaltyMargin, AuditScan)):
            return [(x,) for x in _ladder(k.lo, k.hi, k.step)]
        return [(int(m),) for m in k.m_values]

    @property
    def coord_names(self) -> tuple:
        k = self.kind
        if isinstance(k, PriorSimplex):
            return ("q0", "q1", "q2")
        if isinstance(k, CostSweep):
            return ("lam",)
        if isinstance(k, PenaltyMargin):
            return ("b",)
        if isinstance(k, AuditScan):
            return (f"p{k.type_index}",)
        return ("m",)

    def instantiate(self, coord) -> AuditGame:
        k, base = self.kind, self.base
        if isinstance(k, PriorSimplex):
            q = np.maximum(np.array(coord), SIMPLEX_NUDGE)
            return base.with_prior(q / q.sum())
        if isinstance(k, CostSweep):
            return base.replace(regime=Costly(coord[0]))
        if isinstance(k, PenaltyMargin):
            return base.replace(pen=base.pay + coord[0])
        if isinstance(k, AuditScan):
            return base
        return discretize(base, coord[0])


@dataclass
class ObjectiveResult:
    value: float
    p_star: np.ndarray
    witness_class: str
    critical: str
    misreport_mass: float
    audit_rate: float
    distortion: np.ndarray


@dataclass
class SweepRow:
    coord: tuple
    results: dict = field(default_factory=dict)
    skipped: str | None = None


def witness_class(Q) -> str:
    sm = as_single_minded(Q)
    if sm is None:
        return "mixed"
    if sm.iota == 0:
        return "truthful"
    return f"single-minded({sm.iota},{sm.kappa})"


def _result(game, p, value, witness, critical=""):
    mt = metrics(game, p, witness)
    return ObjectiveResult(value=float(value), p_star=np.array(p),
                           witness_class=witness_class(witness.Q), critical=critical,
                           misreport_mass=mt.misreport_mass, audit_rate=mt.audit_rate,
                           distortion=mt.distortion)


def run_row(plan: SweepPlan, coord) -> SweepRow:
    row = SweepRow(coord=tuple(coord))
    try:
        game = plan.instantiate(coord)
        for obj in plan.objectives:
            if isinstance(plan.kind, AuditScan):
                p = np.zeros(game.m)
                p[plan.kind.type_index] = coord[0]
                value, witness = evaluate_worst(game, p, obj)
                row.results[obj] = _result(game, p, value, witness)
                continue
            if plan.eps > max_epsilon(game):
                raise ValueError(f"eps = {plan.eps:g} exceeds {max_epsilon(game):g}")
            res = succinct_search(game, obj, plan.eps)
            row.results[obj] = _result(game, res.p_star, res.value, res.witness,
                                       str(res.critical))
    except ValueError as exc:
        row.results.clear()
        row.skipped = str(exc)
    return row


def _run_row_args(args):
    return run_row(*args)


def run_sweep(plan: SweepPlan, parallel: int = 1) -> list:
    """Rows in coordinate order; rows whose game is invalid are kept with ``skipped`` set."""
    coords = plan.coordinates()
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            return list(ex.map(_run_row_args, [(plan, c) for c in coords], chunksize=8))
    return [run_row(plan, c) for c in coords]


_SUFFIX = {Objective.UTILITY: "_U", Objective.WELFARE: "_W"}
_FIELDS = ("value", "witness", "critical", "misreport_mass", "audit_rate",
           "mean_distortion", "p_star")


def _fmt(x) -> str:
    return f"{x:.12g}"


def rows_to_csv(plan: SweepPlan, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(plan.coord_names)
    for obj in plan.objectives:
        header += [f + _SUFFIX[obj] for f in _FIELDS]
    header.append("skipped")
    w.writerow(header)
    for row in rows:
        line = [_fmt(c) if isinstance(c, float) else str(c) for c in row.coord]
        for obj in plan.objectives:
            r = row.results.get(obj)
            if r is None:
                line += [""] * len(_FIELDS)
                continue
            game_q = None
            try:
                game_q = plan.instantiate(row.coord).q
            except ValueError:
                pass
            mean_d = float(game_q @ r.distortion) if game_q is not None else float("nan")
            line += [_fmt(r.value), r.witness_class, r.critical, _fmt(r.misreport_mass),
                     _fmt(r.audit_rate), _fmt(mean_d), " ".join(_fmt(x) for x in r.p_star)]
        line.append(row.skipped or "")
        w.writerow(line)
    return buf.getvalue()


def plan_summary(plan: SweepPlan, rows) -> str:
    base = plan.base
    if isinstance(base, ContinuousModelSpec):
        base_desc = {"continuous": asdict(base)}
    else:
        base_desc = {"game": {"q": base.q.tolist(), "pay": base.pay.tolist(),
                              "pen": base.pen.tolist(), "val": base.val.tolist(),
                              "n": base.n, "lam": base.lam}}
    summary = {
        "kind": type(plan.kind).__name__,
        "parameters": asdict(plan.kind),
        "base": base_desc,
        "objectives": [o.value for o in plan.objectives],
        "eps": plan.eps,
        "rows": len(rows),
        "skipped": sum(r.skipped is not None for r in rows),
    }
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def fig1_scan(step: float = 0.01) -> list:
    """Rows ``(p1, V_tru, V_lie, worst)`` along ``p = (0, p1)`` in the two-type example."""
    if step <= 0:
        raise ValueError("step must be positive")
    game = fig1_game()
    out = []
    for p1 in _ladder(0.0, 1.0, step):
        worst = evaluate_worst(game, np.array([0.0, p1]))[0]
        out.append((p1, (4.0 - p1) / 2.0, p1, worst))
    return out


def fig1_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("p1", "V_tru", "V_lie", "worst"))
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()
