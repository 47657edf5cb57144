"""TOML config files for games, priors, sweep plans and policies.

Floats are written with ``repr``, the shortest string that parses back to the
same double, so a written file re-reads bit-identically.
"""

from __future__ import annotations

import sys

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .adaptive import DictatorPolicy
from .equilibrium import Objective
from .game import AuditGame, Budgeted, ContinuousModelSpec, Costly
from .sweeps import AuditScan, CostSweep, PenaltyMargin, PriorSimplex, Resolution, SweepPlan


class ConfigError(ValueError):
    """Malformed or inconsistent config; the message names the file and field."""


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        msg = getattr(exc, "msg", str(exc).split(" (at ")[0])
        line, col = getattr(exc, "lineno", None), getattr(exc, "colno", None)
        where = f"line {line}, column {col}" if line is not None else str(exc)
        raise ConfigError(f"{path}: {where}: {msg}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def _field(table, key, where, kind=float, required=True, default=None):
    if key not in table:
        if required:
            raise ConfigError(f"{where}: missing field '{key}'")
        return default
    value = table[key]
    try:
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if kind == "vector":
            arr = np.array(value, dtype=float)
            if arr.ndim != 1:
                raise TypeError
            return arr
        if kind == "matrix":
            arr = np.array(value, dtype=float)
            if arr.ndim != 2:
                raise TypeError
            return arr
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        pass
    name = kind if isinstance(kind, str) else kind.__name__
    raise ConfigError(f"{where}: field '{key}' must be a {name}, got {value!r}")


def parse_game(table: dict, where: str = "game") -> AuditGame:
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    q = _field(table, "q", where, "vector")
    pay = _field(table, "pay", where, "vector")
    pen = _field(table, "pen", where, "vector")
    val = _field(table, "val", where, "matrix")
    n = _field(table, "n", where, required=False, default=1.0)
    has_lam, has_budget = "lam" in table, "budget" in table
    if has_lam == has_budget:
        raise ConfigError(f"{where}: give exactly one of 'lam' or 'budget'")
    regime = (Costly(_field(table, "lam", where)) if has_lam
              else Budgeted(_field(table, "budget", where)))
    unknown = set(table) - {"q", "pay", "pen", "val", "n", "lam", "budget"}
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    try:
        return AuditGame(q=q, val=val, pay=pay, pen=pen, regime=regime, n=n)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def game_table(game: AuditGame) -> dict:
    t = {"q": game.q.tolist(), "pay": game.pay.tolist(), "pen": game.pen.tolist(),
         "val": game.val.tolist(), "n": float(game.n)}
    if isinstance(game.regime, Costly):
        t["lam"] = float(game.regime.lam)
    else:
        t["budget"] = float(game.regime.budget)
    return t


def dump_game(game: AuditGame) -> str:
    return tomli_w.dumps({"game": game_table(game)})


def load_game(path) -> AuditGame:
    doc = read_toml(path)
    if "game" not in doc:
        raise ConfigError(f"{path}: missing [game] table")
    return parse_game(doc["game"], f"{path}: game")


def load_priors(path, m: int | None = None) -> list:
    doc = read_toml(path)
    where = f"{path}"
    if "priors" not in doc:
        raise ConfigError(f"{where}: missing field 'priors'")
    raw = doc["priors"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}: 'priors' must be a nonempty array of arrays")
    out = []
    for j, q in enumerate(raw):
        try:
            arr = np.array(q, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: priors[{j}] is not numeric") from None
        if arr.ndim != 1 or (m is not None and arr.shape[0] != m):
            raise ConfigError(f"{where}: priors[{j}] must have length {m}")
        out.append(arr)
    return out


_KINDS = {
    "prior_simplex": PriorSimplex,
    "cost": CostSweep,
    "penalty_margin": PenaltyMargin,
    "resolution": Resolution,
    "audit_scan": AuditScan,
}


def parse_plan(doc: dict, where: str = "plan") -> SweepPlan:
    if "sweep" not in doc:
        raise ConfigError(f"{where}: missing [sweep] table")
    s = doc["sweep"]
    w = f"{where}: sweep"
    kind_name = _field(s, "kind", w, str)
    if kind_name not in _KINDS:
        raise ConfigError(f"{w}: unknown kind {kind_name!r}; expected one of {sorted(_KINDS)}")
    if kind_name == "prior_simplex":
        kind = PriorSimplex(_field(s, "resolution", w, int, required=False, default=60))
    elif kind_name in ("cost", "penalty_margin"):
        kind = _KINDS[kind_name](_field(s, "lo", w), _field(s, "hi", w), _field(s, "step", w))
    elif kind_name == "resolution":
        ms = s.get("m_values")
        if not isinstance(ms, list) or not all(isinstance(x, int) and not isinstance(x, bool)
                                                for x in ms):
            raise ConfigError(f"{w}: field 'm_values' must be an array of integers")
        kind = Resolution(tuple(ms))
    else:
        kind = AuditScan(_field(s, "type_index", w, int),
                         _field(s, "lo", w, required=False, default=0.0),
                         _field(s, "hi", w, required=False, default=1.0),
                         _field(s, "step", w, required=False, default=0.01))
    objectives = s.get("objectives", ["utility", "welfare"])
    try:
        objectives = tuple(Objective.parse(o) for o in objectives)
    except ValueError:
        raise ConfigError(f"{w}: objectives must be 'utility' or 'welfare'") from None
    eps = _field(s, "eps", w, required=False, default=1e-3)
    if "continuous" in doc:
        c = doc["continuous"]
        wc = f"{where}: continuous"
        base = ContinuousModelSpec(
            pay_affine=tuple(_field(c, "pay_affine", wc, "vector").tolist()),
            pen_offset=_field(c, "pen_offset", wc),
            val_family=tuple(_field(c, "val_family", wc, "vector").tolist()),
            lam=_field(c, "lam", wc),
            m=_field(c, "m", wc, int, required=False, default=2),
        )
    elif "game" in doc:
        base = parse_game(doc["game"], f"{where}: game")
    else:
        raise ConfigError(f"{where}: need a [game] or [continuous] table")
    try:
        return SweepPlan(kind=kind, base=base, objectives=objectives, eps=eps)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_plan(path) -> SweepPlan:
    return parse_plan(read_toml(path), str(path))


def dump_policy(policy: DictatorPolicy) -> str:
    t = {
        "p_star": [float(x) for x in policy.p_star],
        "qhat_star": [float(x) for x in policy.qhat_star],
        "value": float(policy.value),
        "branch": policy.branch,
    }
    if isinstance(policy.regime, Costly):
        t["lam"] = float(policy.regime.lam)
    else:
        t["budget"] = float(policy.regime.budget)
    if policy.witness is not None:
        t["witness"] = [policy.witness.iota, policy.witness.kappa]
    if policy.bound is not None:
        t["bound"] = float(policy.bound)
    return tomli_w.dumps({"policy": t})


def parse_policy(text: str) -> DictatorPolicy:
    from .equilibrium import SingleMinded

    try:
        t = tomllib.loads(text)["policy"]
    except (tomllib.TOMLDecodeError, KeyError) as exc:
        raise ConfigError(f"policy: {exc}") from None
    regime = Costly(t["lam"]) if "lam" in t else Budgeted(t["budget"])
    witness = SingleMinded(*t["witness"]) if "witness" in t else None
    return DictatorPolicy(p_star=np.array(t["p_star"]), qhat_star=np.array(t["qhat_star"]),
                          regime=regime, value=t["value"], witness=witness,
                          branch=t.get("branch", "costly"), bound=t.get("bound"))
