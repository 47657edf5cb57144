"""Audit game instances, validation, and the continuous-model discretizer.

Types are indexed ``0..m-1`` in increasing order of payment.  The penalty
is stored per reported type; the principal collects ``pen[k]`` only when an
agent that reported ``k`` is audited and found to be lying.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

#: Absolute slack for the inequality checks in :func:`validate_game`.
VALIDATION_TOL = 1e-12


@dataclass(frozen=True)
class Costly:
    """Every audit costs ``lam``."""

    lam: float


@dataclass(frozen=True)
class Budgeted:
    """Expected number of audits is capped at ``budget``."""

    budget: float


Regime = Union[Costly, Budgeted]


def _frozen(x, ndim):
    a = np.array(x, dtype=float)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AuditGame:
    """A principal-agent audit game.

    Attributes:
        q: Prior over true types, length ``m``.
        val: ``val[i, k]`` is the principal's value when type ``i`` reports ``k``.
        pay: Payment per reported type, strictly increasing.
        pen: Penalty per reported type, charged on a detected misreport.
        regime: :class:`Costly` or :class:`Budgeted`.
        n: Total agent mass.

    Construction only checks shapes.  Use :func:`validate_game` for the
    model assumptions.
    """

    q: np.ndarray
    val: np.ndarray
    pay: np.ndarray
    pen: np.ndarray
    regime: Regime = field(default_factory=lambda: Costly(0.0))
    n: float = 1.0

    def __post_init__(self):
        q = _frozen(self.q, 1)
        m = q.shape[0]
        val = _frozen(self.val, 2)
        pay = _frozen(self.pay, 1)
        pen = _frozen(self.pen, 1)
        if val.shape != (m, m) or pay.shape != (m,) or pen.shape != (m,):
            raise ValueError(
                f"inconsistent shapes: q {q.shape}, val {val.shape}, "
                f"pay {pay.shape}, pen {pen.shape}"
            )
        if not isinstance(self.regime, (Costly, Budgeted)):
            raise TypeError(f"regime must be Costly or Budgeted, got {self.regime!r}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "val", val)
        object.__setattr__(self, "pay", pay)
        object.__setattr__(self, "pen", pen)
        object.__setattr__(self, "n", float(self.n))

    def __eq__(self, other):
        if not isinstance(other, AuditGame):
            return NotImplemented
        return (
            self.n == other.n
            and self.regime == other.regime
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("q", "val", "pay", "pen")
            )
        )

    __hash__ = None

    @property
    def m(self) -> int:
        return self.q.shape[0]

    @property
    def lam(self) -> float:
        if not isinstance(self.regime, Costly):
            raise AttributeError("budgeted game has no per-audit cost")
        return self.regime.lam

    @property
    def budget(self) -> float:
        if not isinstance(self.regime, Budgeted):
            raise AttributeError("costly game has no audit budget")
        return self.regime.budget

    @property
    def is_costly(self) -> bool:
        return isinstance(self.regime, Costly)

    @property
    def pay_below(self) -> np.ndarray:
        """``pay(k-1)`` for every ``k``, with ``pay(-1) = 0``."""
        return np.concatenate(([0.0], self.pay[:-1]))

    @property
    def gamma(self) -> float:
        """Smallest payment gap, counting ``pay(0) - 0``."""
        return float(np.min(self.pay - self.pay_below))

    def pay_prev(self, k: int) -> float:
        return 0.0 if k <= 0 else float(self.pay[k - 1])

    def replace(self, **changes) -> "AuditGame":
        kw = dict(q=self.q, val=self.val, pay=self.pay, pen=self.pen,
                  regime=self.regime, n=self.n)
        kw.update(changes)
        return AuditGame(**kw)

    def with_prior(self, q) -> "AuditGame":
        return self.replace(q=q)


@dataclass(frozen=True)
class InsensitivityFlag:
    """Whether ``pay(l)/pay(k) >= pen(l)/pen(k)`` for all ``k <= l``."""

    holds: bool
    violations: tuple = ()


def insensitivity(game: AuditGame) -> InsensitivityFlag:
    pay, pen = game.pay, game.pen
    bad = []
    for k in range(game.m):
        for l in range(k + 1, game.m):
            # cross-multiplied to stay defined when pay or pen is zero
            if pay[l] * pen[k] < pen[l] * pay[k] - VALIDATION_TOL:
                bad.append((k, l))
    return InsensitivityFlag(holds=not bad, violations=tuple(bad))


class ValidationResult(list):
    """List of violation messages; empty means the game is valid.

    The insensitivity condition is carried as an advisory attribute and never
    appears in the list itself.
    """

    insensitivity: InsensitivityFlag

    def __init__(self, violations, flag):
        super().__init__(violations)
        self.insensitivity = flag

    @property
    def ok(self) -> bool:
        return len(self) == 0


def validate_game(game: AuditGame, tol: float = VALIDATION_TOL) -> ValidationResult:
    out = []
    m = game.m
    if m < 2:
        out.append(f"m = {m} < 2")
    if not np.all(np.isfinite(game.val)) or not np.all(np.isfinite(game.q)):
        out.append("non-finite entries in q or val")
    if game.n < 0:
        out.append(f"n = {game.n:g} < 0")
    for i, qi in enumerate(game.q):
        if qi <= 0:
            out.append(f"q({i}) = {qi:g} is not positive")
    if abs(game.q.sum() - 1.0) > 1e-9:
        out.append(f"sum(q) = {game.q.sum():.12g} != 1")
    if game.pay[0] <= 0:
        out.append(f"pay(0) = {game.pay[0]:g} is not positive")
    for k in range(1, m):
        if game.pay[k] <= game.pay[k - 1]:
            out.append(f"pay({k}) <= pay({k - 1})")
    for i in range(m):
        for k in range(i, m - 1):
            if game.val[i, k] < game.val[i, k + 1] - tol:
                out.append(f"val({i},{k}) < val({i},{k + 1})")
    for k in range(m):
        if game.pen[k] < game.pay[k] - tol:
            out.append(f"pen({k}) < pay({k})")
    if isinstance(game.regime, Costly):
        lam = game.regime.lam
        if lam < 0:
            out.append(f"lambda = {lam:g} < 0")
        for k in range(m):
            if lam > game.pen[k] + tol:
                out.append(f"lambda > pen({k})")
    else:
        if game.regime.budget < 0:
            out.append(f"budget = {game.regime.budget:g} < 0")
    return ValidationResult(out, insensitivity(game))


class InvalidGameError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid game: " + "; ".join(self.violations))


def require_valid(game: AuditGame) -> AuditGame:
    violations = validate_game(game)
    if violations:
        raise InvalidGameError(violations)
    return game


@dataclass(frozen=True)
class ContinuousModelSpec:
    """Affine continuous environment on ``x in [0, 1]`` with uniform prior.

    ``pay(x) = c0 + c1 x``, ``pen(x) = pay(x) + pen_offset`` and
    ``val(x, y) = a0 + a1 x - a2 |x - y|``.
    """

    pay_affine: tuple = (1.0, 2.0)
    pen_offset: float = 2.0
    val_family: tuple = (2.0, 2.0, 1.0)
    lam: float = 2.5
    m: int = 2

    def check(self):
        c0, c1 = self.pay_affine
        a0, a1, a2 = self.val_family
        problems = []
        if c0 <= 0:
            problems.append("c0 must be positive")
        if c1 < 0:
            problems.append("c1 must be nonnegative")
        if self.pen_offset < 0:
            problems.append("pen_offset must be nonnegative")
        if a2 < 0:
            problems.append("a2 must be nonnegative")
        if self.m < 2:
            problems.append(f"m = {self.m} < 2")
        return problems


def discretize(spec: ContinuousModelSpec, m: int | None = None) -> AuditGame:
    """Bin-expectation discretization of ``spec`` into ``m`` equal-width types."""
    if m is not None:
        spec = ContinuousModelSpec(spec.pay_affine, spec.pen_offset,
                                   spec.val_family, spec.lam, m)
    problems = spec.check()
    if problems:
        raise ValueError("invalid continuous spec: " + "; ".join(problems))
    m = spec.m
    c0, c1 = spec.pay_affine
    a0, a1, a2 = spec.val_family
    idx = np.arange(m)
    x = (2 * idx + 1) / (2 * m)
    pay = c0 + c1 * x
    pen = pay + spec.pen_offset
    gap = np.abs(idx[:, None] - idx[None, :]) / m
    # E|X - Y| within a single bin of width 1/m is 1/(3m)
    np.fill_diagonal(gap, 1.0 / (3 * m))
    val = a0 + a1 * x[:, None] - a2 * gap
    game = AuditGame(q=np.full(m, 1.0 / m), val=val, pay=pay, pen=pen,
                     regime=Costly(spec.lam), n=1.0)
    return require_valid(game)


def random_game(rng: np.random.Generator, m: int, *, budget: float | None = None,
                n: float = 1.0, insensitive: bool = False) -> AuditGame:
    """Draw a valid game with moderate payment gaps.

    With ``insensitive=True`` the penalty is affine in the payment, which
    satisfies the insensitivity condition.
    """
    q = rng.dirichlet(np.ones(m))
    q = np.maximum(q, 1e-3)
    q = q / q.sum()
    pay = np.cumsum(rng.uniform(0.2, 1.0, size=m))
    if insensitive:
        pen = rng.uniform(1.0, 2.0) * pay + rng.uniform(0.0, 1.5)
    else:
        pen = pay + rng.uniform(0.0, 2.0, size=m)
    val = np.empty((m, m))
    for i in range(m):
        val[i, i] = pay[i] + rng.uniform(0.0, 3.0)
        for k in range(i + 1, m):
            val[i, k] = val[i, k - 1] - rng.uniform(0.0, 1.5)
        for k in range(i):
            val[i, k] = rng.uniform(-1.0, val[i, i])
    if budget is None:
        regime = Costly(float(rng.uniform(0.0, 0.9) * pen.min()))
    else:
        regime = Budgeted(float(budget))
    return require_valid(AuditGame(q=q, val=val, pay=pay, pen=pen, regime=regime, n=n))


def fig1_game(lam: float = 1.0) -> AuditGame:
    """Two-type game whose worst-case optimum is not attained."""
    return AuditGame(q=[0.5, 0.5], val=[[3.0, 0.0], [0.0, 4.0]], pay=[1.0, 2.0],
                     pen=[3.0, 4.0], regime=Costly(lam))


def heatmap_game(q=(1 / 3, 1 / 3, 1 / 3)) -> AuditGame:
    """Three-type game used for the prior-simplex sweep."""
    return AuditGame(q=q, val=np.diag([0.5, 1.4, 3.0]), pay=[0.3, 0.8, 1.3],
                     pen=[1.0, 1.2, 1.4], regime=Costly(0.7))


THREE_TYPE_PRIOR = (0.6488, 0.3333, 0.0179)
THREE_TYPE_VAL = ((2.2, 0.7, 0.0), (1.9, 3.4, 1.9), (1.6, 1.1, 4.6))


def three_type_game(lam: float = 0.7, b: float = 1.5) -> AuditGame:
    """Three-type game of the cost and penalty-margin sweeps, ``pen = pay + b``."""
    pay = np.array([1.0, 2.0, 3.0])
    return AuditGame(q=THREE_TYPE_PRIOR, val=THREE_TYPE_VAL, pay=pay, pen=pay + b,
                     regime=Costly(lam))
