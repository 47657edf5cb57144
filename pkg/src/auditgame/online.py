"""EXP3 over critical-vector templates when the prior changes every round.

Each arm is a template ``(iota, kappa, sign)``.  The audit vector played for
an arm depends on the current slack ``eps_t``, which starts at a third of the
smallest payment gap and halves every round down to a floor.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .equilibrium import Objective, evaluate_worst
from .game import AuditGame, validate_game
from .nonadaptive import CriticalIndex, critical_indices, critical_vector

#: Smallest slack ever played; keeps critical vectors clear of the tie band.
EPS_FLOOR = 1e-6
#: Slack of the fixed benchmark arms in the regret report.
EPS_BENCH = 1e-6


def reward_bound(game: AuditGame) -> float:
    """Bound ``L`` on the magnitude of any single-round objective."""
    return game.n * float(np.max(np.abs(game.val) + game.pay[None, :] + game.pen[None, :]))


def learning_rate(m: int, T: int) -> float:
    return math.sqrt(math.log(2 * m * m) / (2 * m * m * T))


def score_increments(chosen: int, reward: float, probs: np.ndarray, L: float) -> np.ndarray:
    """Importance-weighted score update for every arm after one round."""
    inc = np.ones_like(probs)
    inc[chosen] -= (L - reward) / (2.0 * L) / probs[chosen]
    return inc


@dataclass
class RoundLog:
    t: int
    sigma: CriticalIndex
    p_played: np.ndarray
    eps_t: float
    reward: float
    cum_reward: float
    prior: np.ndarray | None = None
    probs: np.ndarray | None = None


@dataclass
class LearnerState:
    game: AuditGame
    arms: list
    scores: np.ndarray
    eps0: float
    eta: float
    L: float
    T: int
    rng: np.random.Generator
    t: int = 0
    cum_reward: float = 0.0
    eps_floor: float = EPS_FLOOR
    record_probs: bool = False

    @property
    def eps_t(self) -> float:
        return max(self.eps0 * 2.0 ** (-self.t), self.eps_floor)

    def probabilities(self) -> np.ndarray:
        z = self.eta * (self.scores - self.scores.max())
        w = np.exp(z)
        return w / w.sum()


def learner_init(game: AuditGame, T: int, seed: int = 0, *, eps_floor: float = EPS_FLOOR,
                 record_probs: bool = False) -> LearnerState:
    """Fresh learner; the game's prior is never read."""
    if T < 1:
        raise ValueError(f"horizon T must be >= 1, got {T}")
    arms = critical_indices(game.m)
    return LearnerState(
        game=game,
        arms=arms,
        scores=np.zeros(len(arms)),
        eps0=game.gamma / 3.0,
        eta=learning_rate(game.m, T),
        L=reward_bound(game),
        T=T,
        rng=np.random.default_rng(seed),
        eps_floor=eps_floor,
        record_probs=record_probs,
    )


class RewardOutOfRange(RuntimeError):
    pass


def learner_step(state: LearnerState, reward_oracle: Callable) -> tuple:
    """Play one round in place.

    ``reward_oracle(p, t)`` must return the worst-case objective of the audit
    vector ``p`` under the round's prior.
    """
    probs = state.probabilities()
    chosen = int(state.rng.choice(len(probs), p=probs))
    sigma = state.arms[chosen]
    eps = state.eps_t
    p = critical_vector(state.game, sigma, eps)
    v = float(reward_oracle(p, state.t))
    if abs(v) > state.L * (1 + 1e-12):
        raise RewardOutOfRange(f"reward {v} outside [-{state.L}, {state.L}]")
    state.scores += score_increments(chosen, v, probs, state.L)
    state.t += 1
    state.cum_reward += v
    log = RoundLog(t=state.t, sigma=sigma, p_played=p, eps_t=eps, reward=v,
                   cum_reward=state.cum_reward,
                   probs=probs if state.record_probs else None)
    return state, log


@dataclass
class RegretReport:
    T: int
    total_reward: float
    arm_totals: dict
    best_arm: CriticalIndex
    best_total: float
    eps_bench: float
    n: float
    note: str = field(default=(
        "benchmark is the best fixed critical arm at eps_bench; the supremum "
        "over all audit vectors may exceed it by at most 2 n eps_bench T"))

    @property
    def regret(self) -> float:
        return self.best_total - self.total_reward

    @property
    def avg_regret(self) -> float:
        return self.regret / self.T

    def to_text(self) -> str:
        lines = [
            f"T = {self.T}",
            f"total_reward = {self.total_reward:.12g}",
            f"best_arm = {self.best_arm}",
            f"best_arm_total = {self.best_total:.12g}",
            f"regret = {self.regret:.12g}",
            f"avg_regret = {self.avg_regret:.12g}",
            f"eps_bench = {self.eps_bench:.12g}",
            f"benchmark_slack = {2 * self.n * self.eps_bench * self.T:.12g}",
            f"note = {self.note}",
        ]
        for arm, total in self.arm_totals.items():
            lines.append(f"arm {arm} total = {total:.12g}")
        return "\n".join(lines) + "\n"


def _check_priors(game, priors):
    out = []
    for j, q in enumerate(priors):
        q = np.asarray(q, dtype=float)
        problems = [v for v in validate_game(game.with_prior(q)) if v.startswith(("q(", "sum(q)"))]
        if q.shape != (game.m,):
            problems.append(f"length {q.shape} != ({game.m},)")
        if problems:
            raise ValueError(f"prior {j} is invalid: " + "; ".join(problems))
        out.append(q)
    return out


def run_online(game: AuditGame, priors: Sequence, T: int, seed: int = 0, *,
               objective=Objective.UTILITY, eps_floor: float = EPS_FLOOR,
               eps_bench: float = EPS_BENCH, record_probs: bool = False):
    """Run ``T`` rounds against a prior sequence (cycled if shorter than ``T``).

    Returns ``(logs, report)``.
    """
    objective = Objective.parse(objective)
    priors = _check_priors(game, priors)
    keys = [tuple(q.tolist()) for q in priors]

    state = learner_init(game, T, seed, eps_floor=eps_floor, record_probs=record_probs)
    played = {}

    def oracle(p, t):
        key = keys[t % len(keys)]
        memo = (p.tobytes(), key)
        if memo not in played:
            played[memo] = evaluate_worst(game.with_prior(np.array(key)), p, objective)[0]
        return played[memo]

    logs = []
    for _ in range(T):
        state, log = learner_step(state, oracle)
        log.prior = priors[(log.t - 1) % len(priors)]
        logs.append(log)

    counts = [0] * len(keys)
    for t in range(T):
        counts[t % len(keys)] += 1
    totals = {}
    for arm in state.arms:
        p = critical_vector(game, arm, eps_bench)
        totals[arm] = sum(
            c * evaluate_worst(game.with_prior(q), p, objective)[0]
            for q, c in zip(priors, counts)
        )
    best_arm = max(state.arms, key=lambda a: totals[a])
    report = RegretReport(T=T, total_reward=state.cum_reward, arm_totals=totals,
                          best_arm=best_arm, best_total=totals[best_arm],
                          eps_bench=eps_bench, n=game.n)
    return logs, report


LOG_COLUMNS = ("t", "sigma_iota", "sigma_kappa", "sigma_sign", "eps_t", "reward", "cum_reward")


def logs_to_csv(logs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for log in logs:
        w.writerow([log.t, log.sigma.iota, log.sigma.kappa, log.sigma.sign.value,
                    f"{log.eps_t:.12g}", f"{log.reward:.12g}", f"{log.cum_reward:.12g}"])
    return buf.getvalue()
