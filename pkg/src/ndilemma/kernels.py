"""Built-in strategy families with paired per-decision and batched deciders.

Each family defines the same rule twice: ``decide_one`` works on a single
``Observation`` (the reference semantics, used by the per-decision engine,
validation, and fingerprint fallbacks), and ``decide_batch`` works on arrays
over many (game, player) slots at once, which is what makes group sizes in
the hundreds and grids with tens of thousands of games tractable. The two
forms are kept adjacent in one class per family and are cross-checked by the
test suite; any deterministic family must produce identical games on both
paths.

Stochastic families may consume their random stream differently on the two
paths (batched draws versus lazy scalar draws); each path is individually
reproducible from its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import Action
from .strategies import Observation, Strategy

_EPS = 1e-9


class KernelError(RuntimeError):
    """A kernel was asked to decide in a game it cannot play."""


@dataclass
class SlotView:
    """Per-round observables for a set of (game, player) slots.

    Arrays are aligned with the slots a family was asked to decide for.
    ``prev_c``, ``opp_coop`` and ``opp_rate`` are None in round 0;
    ``stock_frac`` is None outside the common-pool game.
    """

    t: int
    rounds: int
    n: int
    col: np.ndarray
    prev_c: np.ndarray | None
    opp_coop: np.ndarray | None
    opp_rate: np.ndarray | None
    stock_frac: np.ndarray | None


class KernelFamily:
    name: str = ""
    param_names: tuple[str, ...] = ()
    stochastic: bool = False

    def validate(self, params: tuple[float, ...]) -> None:
        if len(params) != len(self.param_names):
            raise ValueError(
                f"{self.name} expects {len(self.param_names)} params "
                f"{self.param_names}, got {len(params)}"
            )

    def new_state(self, n_slots: int):
        return None

    def decide_one(self, params: tuple[float, ...], obs: Observation, rng) -> Action:
        raise NotImplementedError

    def decide_batch(self, P: np.ndarray, state, view: SlotView, rng) -> np.ndarray:
        raise NotImplementedError


class Constant(KernelFamily):
    """Always cooperate (c=1) or always defect (c=0)."""

    name = "constant"
    param_names = ("cooperate",)

    def validate(self, params):
        super().validate(params)
        if params[0] not in (0.0, 1.0):
            raise ValueError(f"constant cooperate flag must be 0 or 1, got {params[0]}")

    def decide_one(self, params, obs, rng):
        return Action.C if params[0] >= 0.5 else Action.D

    def decide_batch(self, P, state, view, rng):
        return P[:, 0] >= 0.5


class Bernoulli(KernelFamily):
    """Cooperate with probability p each round, independently."""

    name = "bernoulli"
    param_names = ("p",)
    stochastic = True

    def validate(self, params):
        super().validate(params)
        if not 0.0 <= params[0] <= 1.0:
            raise ValueError(f"bernoulli p must be in [0, 1], got {params[0]}")

    def decide_one(self, params, obs, rng):
        return Action.C if rng.random() < params[0] else Action.D

    def decide_batch(self, P, state, view, rng):
        return rng.random(len(P)) < P[:, 0]


class ThresholdTrigger(KernelFamily):
    """First-round move, then react to an absolute opponent-cooperator count.

    ``sense=1``: cooperate iff at least ``threshold`` opponents cooperated
    last round (the classic cooperate-on-cooperation trigger). ``sense=0``:
    defect iff at least ``threshold`` opponents cooperated (exploits visible
    cooperation).
    """

    name = "threshold_trigger"
    param_names = ("first_c", "threshold", "sense")

    def validate(self, params):
        super().validate(params)
        if params[0] not in (0.0, 1.0) or params[2] not in (0.0, 1.0):
            raise ValueError("first_c and sense must be 0 or 1")
        if params[1] < 0 or params[1] != int(params[1]):
            raise ValueError(f"threshold must be a non-negative integer, got {params[1]}")

    def decide_one(self, params, obs, rng):
        if obs.round_index == 0:
            return Action.C if params[0] >= 0.5 else Action.D
        meets = obs.opp_coop_last >= params[1]
        return Action.C if meets == (params[2] >= 0.5) else Action.D

    def decide_batch(self, P, state, view, rng):
        if view.t == 0:
            return P[:, 0] >= 0.5
        meets = view.opp_coop >= P[:, 1]
        return meets == (P[:, 2] >= 0.5)


class Reciprocator(KernelFamily):
    """Cooperate first, then require a fraction of opponents to have
    cooperated last round; otherwise forgive with a fixed probability."""

    name = "reciprocator"
    param_names = ("threshold_frac", "forgive_prob")
    stochastic = True

    def validate(self, params):
        super().validate(params)
        if not 0.0 <= params[0] <= 1.0 or not 0.0 <= params[1] <= 1.0:
            raise ValueError("reciprocator params must be fractions in [0, 1]")

    def decide_one(self, params, obs, rng):
        if obs.round_index == 0:
            return Action.C
        if obs.opp_coop_last >= params[0] * (obs.n_players - 1) - _EPS:
            return Action.C
        return Action.C if rng.random() < params[1] else Action.D

    def decide_batch(self, P, state, view, rng):
        if view.t == 0:
            return np.ones(len(P), dtype=bool)
        meets = view.opp_coop >= P[:, 0] * (view.n - 1) - _EPS
        return meets | (rng.random(len(P)) < P[:, 1])


class Grim(KernelFamily):
    """Cooperate until opponents' defection fraction ever exceeds a
    tolerance, then defect for the rest of the game."""

    name = "grim"
    param_names = ("tolerance_frac",)

    def validate(self, params):
        super().validate(params)
        if not 0.0 <= params[0] <= 1.0:
            raise ValueError(f"grim tolerance must be in [0, 1], got {params[0]}")

    def decide_one(self, params, obs, rng):
        n_opp = obs.n_players - 1
        limit = params[0] * n_opp + _EPS
        me = obs.my_index
        for rec in obs.history:
            opp_coop = rec.cooperator_count() - (1 if rec.actions[me] is Action.C else 0)
            if n_opp - opp_coop > limit:
                return Action.D
        return Action.C

    def new_state(self, n_slots):
        return np.zeros(n_slots, dtype=bool)

    def decide_batch(self, P, state, view, rng):
        if view.t > 0:
            n_opp = view.n - 1
            state |= (n_opp - view.opp_coop) > P[:, 0] * n_opp + _EPS
        return ~state


class Endgame(KernelFamily):
    """Reciprocate until only ``horizon`` rounds remain, then defect."""

    name = "endgame"
    param_names = ("horizon", "threshold_frac")

    def validate(self, params):
        super().validate(params)
        if params[0] < 1 or params[0] != int(params[0]):
            raise ValueError(f"endgame horizon must be a positive integer, got {params[0]}")
        if not 0.0 <= params[1] <= 1.0:
            raise ValueError("endgame threshold_frac must be in [0, 1]")

    def decide_one(self, params, obs, rng):
        if obs.rounds_left <= params[0]:
            return Action.D
        if obs.round_index == 0:
            return Action.C
        meets = obs.opp_coop_last >= params[1] * (obs.n_players - 1) - _EPS
        return Action.C if meets else Action.D

    def decide_batch(self, P, state, view, rng):
        closing = (view.rounds - view.t) <= P[:, 0]
        if view.t == 0:
            base = np.ones(len(P), dtype=bool)
        else:
            base = view.opp_coop >= P[:, 1] * (view.n - 1) - _EPS
        return base & ~closing


class StockGuardian(KernelFamily):
    """Cooperate while the common-pool stock is healthy; defect once the
    stock fraction falls below the guard level. Only defined for the
    common-pool game."""

    name = "stock_guardian"
    param_names = ("guard_frac",)

    def validate(self, params):
        super().validate(params)
        if not 0.0 < params[0] <= 1.0:
            raise ValueError(f"guard_frac must be in (0, 1], got {params[0]}")

    def decide_one(self, params, obs, rng):
        frac = obs.stock_fraction
        if frac is None:
            raise KernelError("stock_guardian requires a common-pool game")
        return Action.C if frac >= params[0] - _EPS else Action.D

    def decide_batch(self, P, state, view, rng):
        if view.stock_frac is None:
            raise KernelError("stock_guardian requires a common-pool game")
        return view.stock_frac >= P[:, 0] - _EPS


class Rota(KernelFamily):
    """Follow a fixed cooperation schedule keyed to the player's own index,
    optionally defecting to punish rounds where fewer opponents cooperated
    than the schedule would have produced. No opponent ever agreed to the
    schedule, which is exactly why these strategies are pathological."""

    name = "rota"
    param_names = ("period", "phase", "punish")

    def validate(self, params):
        super().validate(params)
        period, phase, punish = params
        if period < 1 or period != int(period):
            raise ValueError(f"rota period must be a positive integer, got {period}")
        if not 0 <= phase < period or phase != int(phase):
            raise ValueError(f"rota phase must be an integer in [0, period), got {phase}")
        if punish not in (0.0, 1.0):
            raise ValueError("rota punish flag must be 0 or 1")

    @staticmethod
    def _scheduled_count(t: int, period: int, phase: int, n: int) -> int:
        # number of player indices j in [0, n) with (t + j) % period == phase
        resid = (phase - t) % period
        if resid >= n:
            return 0
        return (n - 1 - resid) // period + 1

    def decide_one(self, params, obs, rng):
        period, phase = int(params[0]), int(params[1])
        if params[2] >= 0.5 and obs.round_index > 0:
            last = obs.round_index - 1
            own_sched = (last + obs.my_index) % period == phase
            expected = self._scheduled_count(last, period, phase, obs.n_players) - own_sched
            if obs.opp_coop_last < expected:
                return Action.D
        on_duty = (obs.round_index + obs.my_index) % period == phase
        return Action.C if on_duty else Action.D

    def decide_batch(self, P, state, view, rng):
        period = P[:, 0].astype(np.int64)
        phase = P[:, 1].astype(np.int64)
        on_duty = (view.t + view.col) % period == phase
        if view.t == 0:
            return on_duty
        last = view.t - 1
        resid = (phase - last) % period
        count_all = np.where(resid >= view.n, 0, (view.n - 1 - resid) // period + 1)
        own_sched = (last + view.col) % period == phase
        expected = count_all - own_sched
        punished = (P[:, 2] >= 0.5) & (view.opp_coop < expected)
        return on_duty & ~punished


FAMILIES: dict[str, KernelFamily] = {
    fam.name: fam
    for fam in (
        Constant(),
        Bernoulli(),
        ThresholdTrigger(),
        Reciprocator(),
        Grim(),
        Endgame(),
        StockGuardian(),
        Rota(),
    )
}


def kernel_strategy(
    family: str,
    *params: float,
    label: str | None = None,
    origin: str = "parametric",
) -> Strategy:
    """Build a Strategy from a named family and its parameter vector."""
    if family not in FAMILIES:
        raise ValueError(f"unknown strategy family {family!r}")
    fam = FAMILIES[family]
    vec = tuple(float(p) for p in params)
    fam.validate(vec)
    if label is None:
        label = f"{family}({', '.join(repr(p) for p in vec)})"

    def decide(obs: Observation, rng: np.random.Generator) -> Action:
        return fam.decide_one(vec, obs, rng)

    return Strategy(label=label, origin=origin, decide=decide, kernel=(family, vec))


def make_reference(
    spec: str, *, p: float | None = None, t: int | None = None
) -> Strategy:
    """Construct one of the named reference strategies.

    ``spec`` is one of ``allc``, ``alld``, ``rnd`` (requires ``p`` in
    [0, 1]), ``cc`` or ``cd`` (require a non-negative integer threshold
    ``t``). ``cc(t)`` cooperates in round 0 and then cooperates iff at least
    ``t`` opponents cooperated in the previous round; ``cd(t)`` defects in
    round 0 and then defects iff at least ``t`` opponents cooperated.
    """
    name = spec.strip().lower()
    if name == "allc":
        return kernel_strategy("constant", 1.0, label="AllC", origin="reference")
    if name == "alld":
        return kernel_strategy("constant", 0.0, label="AllD", origin="reference")
    if name == "rnd":
        if p is None:
            raise ValueError("rnd requires probability p")
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"rnd probability must be in [0, 1], got {p}")
        return kernel_strategy("bernoulli", p, label=f"Rnd({p:g})", origin="reference")
    if name in ("cc", "cd"):
        if t is None:
            raise ValueError(f"{name} requires threshold t")
        if t < 0 or int(t) != t:
            raise ValueError(f"threshold must be a non-negative integer, got {t}")
        if name == "cc":
            return kernel_strategy(
                "threshold_trigger", 1.0, float(t), 1.0,
                label=f"CC({t})", origin="reference",
            )
        return kernel_strategy(
            "threshold_trigger", 0.0, float(t), 0.0,
            label=f"CD({t})", origin="reference",
        )
    raise ValueError(f"unknown reference strategy {spec!r}")


def default_reference_overlay(n_players: int) -> list[Strategy]:
    """The standard comparison set: constants, coin flips at several biases,
    and the threshold triggers at every feasible threshold."""
    refs = [make_reference("allc"), make_reference("alld")]
    refs += [make_reference("rnd", p=p) for p in (0.0, 0.25, 0.5, 0.75, 1.0)]
    refs += [make_reference("cc", t=t) for t in range(n_players)]
    refs += [make_reference("cd", t=t) for t in range(n_players)]
    return refs
