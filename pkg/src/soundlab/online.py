"""Stateful online algorithms and their conversion to fixed strategies.

An online algorithm maps (information state, algorithm state theta) to a
distribution over legal actions plus a successor state.  All stochasticity
enters through the initial state, so an algorithm is deterministic given
theta0; ``act`` must not mutate its input state.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from .errors import QueryOrderError
from .fosg_core import (
    BehavioralStrategy,
    Game,
    History,
    InfoState,
    PlayerId,
    info_state_of,
    infoset_index,
    own_reach,
)
from .solvers import RegretTable, SolverConfig, derive_seed, kickstart_regrets, run_mccfr

Theta = Any


class OnlineAlgorithm(ABC):
    """Stateful mapping (info state, theta) -> (action distribution, theta')."""

    player: PlayerId
    #: output provably independent of theta
    stateless: bool = False

    @abstractmethod
    def initial_state(self, rng: np.random.Generator) -> Theta:
        ...

    def initial_state_support(self) -> list[tuple[Theta, float]] | None:
        """Enumerable distribution of theta0, or None when there is none
        (which rules the algorithm out of exact response-game analysis)."""
        return None

    @abstractmethod
    def act(self, info_state: InfoState, theta: Theta) -> tuple[np.ndarray, Theta]:
        ...

    def state_key(self, theta: Theta) -> Hashable:
        """Canonical hashable form of theta, used for memoization."""
        if isinstance(theta, dict):
            return tuple(sorted(theta.items()))
        return theta


class FixedStrategyPlayer(OnlineAlgorithm):
    """Stateless algorithm that always answers from one fixed strategy."""

    stateless = True

    def __init__(self, strategy: BehavioralStrategy, player: PlayerId):
        self.strategy = strategy
        self.player = player

    def initial_state(self, rng: np.random.Generator) -> Theta:
        return None

    def initial_state_support(self):
        return [(None, 1.0)]

    def act(self, info_state: InfoState, theta: Theta) -> tuple[np.ndarray, Theta]:
        return self.strategy.probs(info_state.key), theta


def fixed_player(strategy: BehavioralStrategy, player: PlayerId) -> FixedStrategyPlayer:
    return FixedStrategyPlayer(strategy, player)


class PlayCache(OnlineAlgorithm):
    """Caches its first answers: an empty cache plays action 0 ("Heads"),
    a cache miss with a non-empty cache plays action 1 ("Tails"), and a hit
    replays the cached action.  Games must order actions (Heads, Tails)."""

    def __init__(self, game: Game, player: PlayerId = 2):
        self.game = game
        self.player = player
        self._index = infoset_index(game, player)

    def initial_state(self, rng: np.random.Generator) -> Theta:
        return {}

    def initial_state_support(self):
        return [({}, 1.0)]

    def act(self, info_state: InfoState, theta: Theta) -> tuple[np.ndarray, Theta]:
        key = info_state.key
        n = len(self._index[key].actions)
        if key in theta:
            action = theta[key]
            cache = theta
        else:
            action = 0 if not theta else min(1, n - 1)
            cache = dict(theta)
            cache[key] = action
        probs = np.zeros(n)
        probs[action] = 1.0
        return probs, cache


@dataclass(frozen=True)
class OOSState:
    entropy: int
    counter: int
    table: RegretTable | None = None


class OOSPlayer(OnlineAlgorithm):
    """Online-outcome-sampling style player.

    Each query runs a biased MCCFR in the full game with the queried
    infoset as the sampling target and answers from the resulting average
    strategy at that infoset.  With ``retain=False`` (the default, which is
    what the emulation experiments use) every query starts from a fresh,
    optionally kick-started regret table; with ``retain=True`` the table
    persists inside theta across queries and matches.
    """

    def __init__(
        self,
        game: Game,
        player: PlayerId,
        config: SolverConfig,
        per_move_iterations: int,
        retain: bool = False,
        kickstart: BehavioralStrategy | None = None,
    ):
        self.game = game
        self.player = player
        self.config = config
        self.per_move_iterations = per_move_iterations
        self.retain = retain
        self.kickstart = kickstart

    def _fresh_table(self) -> RegretTable:
        table = RegretTable.for_game(self.game)
        if self.kickstart is not None and self.config.kickstart_mu > 0.0:
            table = kickstart_regrets(table, self.kickstart, self.config.kickstart_mu)
        return table

    def initial_state(self, rng: np.random.Generator) -> Theta:
        entropy = int(rng.integers(0, 2**63 - 1))
        return OOSState(entropy, 0, self._fresh_table() if self.retain else None)

    def act(self, info_state: InfoState, theta: OOSState) -> tuple[np.ndarray, Theta]:
        seed = derive_seed(theta.entropy, theta.counter)
        config = replace(
            self.config,
            iterations=self.per_move_iterations,
            bias_targets=(info_state.key,),
            seed=seed,
            checkpoints=(),
        )
        table = theta.table if self.retain else self._fresh_table()
        result = run_mccfr(self.game, config, table=table)
        probs = result.table.average_strategy(self.player).probs(info_state.key)
        new_state = OOSState(theta.entropy, theta.counter + 1, result.table if self.retain else None)
        return probs, new_state

    def state_key(self, theta: OOSState) -> Hashable:
        return (theta.entropy, theta.counter)


def oos_player(
    game: Game,
    player: PlayerId,
    config: SolverConfig,
    per_move_iterations: int,
    retain: bool = False,
    kickstart: BehavioralStrategy | None = None,
) -> OOSPlayer:
    return OOSPlayer(game, player, config, per_move_iterations, retain, kickstart)


class PartialStrategy(BehavioralStrategy):
    """Behavioral strategy defined only on the infosets visited along given
    match trajectories."""


def partial_strategy(
    alg: OnlineAlgorithm, game: Game, match: History, player: PlayerId, state_in: Theta
) -> tuple[PartialStrategy, Theta]:
    """Query ``alg`` at the player's acting infosets along a terminal match,
    threading theta through in visit order."""
    if not game.is_terminal(match.last_world):
        raise ValueError("match must be a terminal history")
    out = PartialStrategy()
    theta = state_in
    prefix = History((match.worlds[0],))
    for world, joint, next_world in match.steps():
        if len(game.legal_actions(world, player)) >= 2:
            state = info_state_of(game, prefix, player)
            probs, theta = alg.act(state, theta)
            out.set_probs(state.key, probs)
        prefix = prefix.extend(joint, next_world)
    return out, theta


def _check_query_order(game: Game, player: PlayerId, query_order: Sequence[bytes]) -> None:
    index = infoset_index(game, player)
    if sorted(query_order) != sorted(index.keys()) or len(set(query_order)) != len(query_order):
        raise QueryOrderError("query order must be a permutation of the player's acting infosets")
    seen: set[bytes] = set()
    for key in query_order:
        for ancestor, _ in index[key].own_path:
            if ancestor not in seen:
                raise QueryOrderError(
                    f"infoset {game.infoset_label(key)} queried before its "
                    f"ancestor {game.infoset_label(ancestor)}"
                )
        seen.add(key)


def tabularize(
    alg: OnlineAlgorithm,
    game: Game,
    player: PlayerId,
    query_order: Sequence[bytes],
    draws: int = 64,
    rng: np.random.Generator | None = None,
) -> BehavioralStrategy:
    """Convert an online algorithm to a fixed strategy by sequential querying.

    Theta threads across queries, so stateful algorithms give order-dependent
    results.  For stochastic algorithms the per-infoset answers of multiple
    theta0 draws are combined by a reach-weighted average (weights are the
    player's own reach probabilities of the infoset under each draw).
    """
    _check_query_order(game, player, query_order)
    index = infoset_index(game, player)

    support = alg.initial_state_support()
    if support is None:
        if rng is None:
            rng = np.random.default_rng(0)
        support = [(alg.initial_state(rng), 1.0 / draws) for _ in range(draws)]

    sweeps: list[tuple[float, BehavioralStrategy]] = []
    for theta0, prob in support:
        table = BehavioralStrategy()
        theta = theta0
        for key in query_order:
            probs, theta = alg.act(index[key].info_state, theta)
            table.set_probs(key, probs)
        sweeps.append((prob, table))

    if len(sweeps) == 1:
        return sweeps[0][1]
    out = BehavioralStrategy()
    for key in query_order:
        weights = np.array([p * own_reach(table, index[key]) for p, table in sweeps])
        stacked = np.stack([table.probs(key) for _, table in sweeps])
        total = weights.sum()
        if total > 0.0:
            mean = weights @ stacked / total
        else:
            mean = stacked.mean(axis=0)
        out.set_probs(key, mean / mean.sum())
    return out


def acting_infosets(game: Game, player: PlayerId) -> list[bytes]:
    """The player's acting infoset keys in depth-first (ancestor-first) order."""
    return list(infoset_index(game, player).keys())
