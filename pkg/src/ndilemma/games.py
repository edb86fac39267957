"""The three social dilemma games: payoffs, round records, and game results.

All three games are simultaneous-move, binary-action (cooperate/defect) and
symmetric in the players. Payoffs are short rational expressions of the
cooperator count, so they are computed in double precision and, for the
parameter grids used in tests, often exactly.

Games:
  * public goods: contributions are scaled by ``k`` and shared equally;
    defectors additionally keep their endowment.
  * collective risk: everyone receives benefit ``k`` only if at least ``m``
    players cooperate; defectors keep their endowment either way.
  * common pool: a regenerating stock; defectors extract twice the restrained
    share, and over-extraction can collapse the stock irreversibly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np


class GameKind(Enum):
    """Which social dilemma is being played."""

    PUBLIC_GOODS = "pgg"
    COLLECTIVE_RISK = "crd"
    COMMON_POOL = "cpr"

    @classmethod
    def parse(cls, name: str) -> "GameKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise GameConfigError(f"unknown game kind {name!r}; expected one of: {valid}")


class Action(Enum):
    """A single binary choice: cooperate or defect."""

    C = "C"
    D = "D"

    @classmethod
    def parse(cls, name: str) -> "Action":
        try:
            return cls(name.strip().upper())
        except ValueError:
            raise GameConfigError(f"invalid action {name!r}; expected 'C' or 'D'")


class GameConfigError(ValueError):
    """Invalid game parameters or malformed game configuration."""


@dataclass(frozen=True)
class GameParams:
    """Parameters shared by the three games.

    ``k`` is the payoff parameter: the public-goods multiplication factor or
    the collective-risk benefit. The common-pool game does not use ``k``; its
    carrying capacity is the separate ``capacity`` field (default ``4 * n``)
    to avoid overloading one symbol with two meanings. ``m`` is the
    collective-risk cooperator threshold and defaults to ``n // 2``.
    """

    n: int
    rounds: int = 20
    k: float = 2.0
    m: int = field(default=-1)
    capacity: float = field(default=-1.0)

    def __post_init__(self) -> None:
        if self.m == -1:
            object.__setattr__(self, "m", self.n // 2)
        if self.capacity == -1.0:
            object.__setattr__(self, "capacity", 4.0 * self.n)

    def validate_for(self, kind: GameKind) -> None:
        """Raise GameConfigError if the parameters are invalid for ``kind``."""
        if self.n < 2:
            raise GameConfigError(f"player count must be >= 2, got {self.n}")
        if self.rounds < 1:
            raise GameConfigError(f"round count must be >= 1, got {self.rounds}")
        if kind is GameKind.PUBLIC_GOODS and not 1 < self.k < self.n:
            raise GameConfigError(
                f"public goods requires 1 < k < n, got k={self.k}, n={self.n}"
            )
        if kind is GameKind.COLLECTIVE_RISK and not 1 <= self.m <= self.n:
            raise GameConfigError(
                f"collective risk requires 1 <= m <= n, got m={self.m}, n={self.n}"
            )
        if kind is GameKind.COMMON_POOL and not self.capacity > 0:
            raise GameConfigError(f"common pool requires capacity > 0, got {self.capacity}")


@dataclass(frozen=True)
class RoundRecord:
    """One completed round: everyone's action and payoff, plus CPR stock."""

    actions: tuple[Action, ...]
    payoffs: tuple[float, ...]
    stock_before: float | None = None
    stock_after: float | None = None

    def cooperator_count(self) -> int:
        return sum(1 for a in self.actions if a is Action.C)


def _check_actions(actions: Sequence[Action], n: int) -> int:
    if len(actions) != n:
        raise GameConfigError(f"expected {n} actions, got {len(actions)}")
    n_c = 0
    for a in actions:
        if not isinstance(a, Action):
            raise GameConfigError(f"invalid action {a!r}")
        if a is Action.C:
            n_c += 1
    return n_c


# ---------------------------------------------------------------------------
# Payoff cores. Each game's arithmetic lives in exactly one place; the public
# per-action functions and the batched engine both call into these.
# ---------------------------------------------------------------------------


def pgg_payoff_pair(n_c: int, params: GameParams) -> tuple[float, float]:
    """(cooperator payoff, defector payoff) for a public-goods round."""
    share = (n_c * params.k) / params.n
    return share, share + 1.0


def crd_payoff_pair(n_c: int, params: GameParams) -> tuple[float, float]:
    """(cooperator payoff, defector payoff) for a collective-risk round."""
    benefit = params.k if n_c >= params.m else 0.0
    return benefit, benefit + 1.0


def cpr_payoff_pair(stock: float, params: GameParams) -> tuple[float, float]:
    """(cooperator payoff, defector payoff) for a common-pool round."""
    share = stock / (2 * params.n)
    return share, 2.0 * share


def cpr_next_stock(stock: float, n_c: int, params: GameParams) -> float:
    """Stock after extraction by ``n_c`` cooperators plus logistic regrowth."""
    remaining = stock * n_c / (2 * params.n)
    grown = remaining + 2.0 * remaining * (1.0 - remaining / params.capacity)
    return min(grown, params.capacity)


# ---------------------------------------------------------------------------
# Public per-action payoff operations.
# ---------------------------------------------------------------------------


def pgg_payoffs(actions: Sequence[Action], params: GameParams) -> list[float]:
    """Public-goods payoffs: everyone gets ``n_c * k / n``, defectors +1."""
    params.validate_for(GameKind.PUBLIC_GOODS)
    n_c = _check_actions(actions, params.n)
    coop, defect = pgg_payoff_pair(n_c, params)
    return [coop if a is Action.C else defect for a in actions]


def crd_payoffs(actions: Sequence[Action], params: GameParams) -> list[float]:
    """Collective-risk payoffs: benefit ``k`` iff ``n_c >= m``, defectors +1."""
    params.validate_for(GameKind.COLLECTIVE_RISK)
    n_c = _check_actions(actions, params.n)
    coop, defect = crd_payoff_pair(n_c, params)
    return [coop if a is Action.C else defect for a in actions]


def cpr_round(
    actions: Sequence[Action], stock: float, params: GameParams
) -> tuple[list[float], float]:
    """Common-pool payoffs for one round plus the regrown stock.

    Cooperators extract ``stock / 2n``, defectors twice that. The stock left
    after extraction is ``stock * n_c / 2n`` and regrows logistically, capped
    at the carrying capacity.
    """
    params.validate_for(GameKind.COMMON_POOL)
    if not 0.0 <= stock <= params.capacity:
        raise GameConfigError(
            f"stock {stock} outside [0, {params.capacity}]"
        )
    n_c = _check_actions(actions, params.n)
    coop, defect = cpr_payoff_pair(stock, params)
    payoffs = [coop if a is Action.C else defect for a in actions]
    return payoffs, cpr_next_stock(stock, n_c, params)


def round_payoffs(
    kind: GameKind,
    params: GameParams,
    actions: Sequence[Action],
    stock: float | None,
) -> tuple[list[float], float | None]:
    """Dispatch one round of any game; returns (payoffs, next stock or None)."""
    if kind is GameKind.PUBLIC_GOODS:
        return pgg_payoffs(actions, params), None
    if kind is GameKind.COLLECTIVE_RISK:
        return crd_payoffs(actions, params), None
    assert stock is not None
    return cpr_round(actions, stock, params)


# ---------------------------------------------------------------------------
# Batched payoffs over a stack of games (bool cooperation matrices).
# ---------------------------------------------------------------------------


def batch_round_payoffs(
    kind: GameKind,
    params: GameParams,
    coop: np.ndarray,
    stock: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Payoffs for one round of S parallel games.

    ``coop`` is a bool array of shape (S, n); ``stock`` is shape (S,) for the
    common-pool game, None otherwise. Uses the same payoff cores as the
    scalar functions, vectorised.
    """
    n = params.n
    defect = ~coop
    if kind is GameKind.PUBLIC_GOODS:
        share = (coop.sum(axis=1) * params.k) / n
        return share[:, None] + defect, None
    if kind is GameKind.COLLECTIVE_RISK:
        met = coop.sum(axis=1) >= params.m
        return met[:, None] * params.k + defect, None
    assert stock is not None
    share = stock / (2 * n)
    payoffs = share[:, None] * (1.0 + defect)
    remaining = stock * coop.sum(axis=1) / (2 * n)
    grown = remaining + 2.0 * remaining * (1.0 - remaining / params.capacity)
    return payoffs, np.minimum(grown, params.capacity)


# ---------------------------------------------------------------------------
# Game results.
# ---------------------------------------------------------------------------


ROUND_CSV_COLUMNS = ("round", "player", "action", "payoff", "stock_before", "stock_after")


@dataclass
class GameResult:
    """A completed iterated game.

    Round data is held as arrays (shape ``(rounds, n)``); ``rounds_list``
    materialises per-round records on demand. ``normalized`` is each player's
    total divided by the number of rounds, and ``mean_welfare`` is the grand
    total divided by players times rounds.
    """

    kind: GameKind
    params: GameParams
    coop: np.ndarray  # bool (rounds, n)
    payoffs: np.ndarray  # float (rounds, n)
    stocks: np.ndarray | None  # float (rounds + 1,) for CPR, else None
    # round-by-round accumulated player totals; engines fill this so that the
    # per-decision and batched paths aggregate in the same order
    player_totals: np.ndarray | None = None
    _rounds: list[RoundRecord] | None = field(default=None, repr=False)

    def _totals_vector(self) -> np.ndarray:
        if self.player_totals is None:
            acc = np.zeros(self.params.n)
            for row in self.payoffs:
                acc += row
            self.player_totals = acc
        return self.player_totals

    @property
    def rounds_list(self) -> list[RoundRecord]:
        if self._rounds is None:
            records = []
            for t in range(self.params.rounds):
                acts = tuple(Action.C if c else Action.D for c in self.coop[t])
                pays = tuple(float(p) for p in self.payoffs[t])
                if self.stocks is not None:
                    rec = RoundRecord(acts, pays, float(self.stocks[t]), float(self.stocks[t + 1]))
                else:
                    rec = RoundRecord(acts, pays)
                records.append(rec)
            self._rounds = records
        return self._rounds

    @property
    def totals(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self._totals_vector())

    @property
    def normalized(self) -> tuple[float, ...]:
        r = self.params.rounds
        return tuple(float(x) / r for x in self._totals_vector())

    @property
    def mean_welfare(self) -> float:
        return float(self._totals_vector().sum()) / (self.params.n * self.params.rounds)

    def to_dict(self) -> dict:
        """JSON-ready document; see docs/formats.md for the schema."""
        rounds = []
        for t, rec in enumerate(self.rounds_list):
            row: dict = {
                "round": t,
                "actions": "".join(a.value for a in rec.actions),
                "payoffs": list(rec.payoffs),
            }
            if rec.stock_before is not None:
                row["stock_before"] = rec.stock_before
                row["stock_after"] = rec.stock_after
            rounds.append(row)
        return {
            "schema_version": 1,
            "game": self.kind.value,
            "n": self.params.n,
            "rounds": self.params.rounds,
            "k": self.params.k,
            "m": self.params.m,
            "capacity": self.params.capacity,
            "totals": list(self.totals),
            "normalized": list(self.normalized),
            "mean_welfare": self.mean_welfare,
            "round_data": rounds,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_round_csv(self, path: str | Path) -> None:
        """Per-round CSV: one row per (round, player)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(ROUND_CSV_COLUMNS)
            for t, rec in enumerate(self.rounds_list):
                for i, (a, p) in enumerate(zip(rec.actions, rec.payoffs)):
                    sb = "" if rec.stock_before is None else repr(rec.stock_before)
                    sa = "" if rec.stock_after is None else repr(rec.stock_after)
                    writer.writerow([t, i, a.value, repr(p), sb, sa])
