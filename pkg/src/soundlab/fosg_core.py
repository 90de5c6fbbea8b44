"""Game abstraction and tree/probability primitives.

A game is a two-player zero-sum factored-observation stochastic game with
explicit chance: world states, per-player ordered action lists, stochastic
transitions, per-step rewards and per-step (private, private, public)
observations.  Worlds and actions are opaque small integers owned by each
game implementation; everything the engine needs goes through the ``Game``
interface.

Players are named 1 and 2.  A "joint action" is a pair ``(a1, a2)`` of
action ids.  At worlds where a player has no real decision it is given a
single dummy action; strategies are defined only on *acting* information
states, i.e. those with at least two legal actions.
"""

from __future__ import annotations

import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import BudgetExceededError, MissingStrategyError

DEFAULT_NODE_BUDGET = 10**6

PlayerId = int
WorldId = int
ActionId = int
JointAction = tuple[ActionId, ActionId]

#: Observations are small ints or (nested) tuples of ints.
Observation = object


def opponent(player: PlayerId) -> PlayerId:
    return 3 - player


class Game(ABC):
    """Two-player zero-sum FOSG with explicit chance in the transitions."""

    #: short identifier used by the CLI registry and in logs
    name: str = "game"

    #: exact game value for player 1 when known analytically, else None
    known_value: float | None = None

    players: tuple[PlayerId, PlayerId] = (1, 2)

    @property
    @abstractmethod
    def initial_world(self) -> WorldId:
        ...

    @abstractmethod
    def legal_actions(self, world: WorldId, player: PlayerId) -> tuple[ActionId, ...]:
        """Ordered legal action ids for ``player`` at ``world`` (empty iff terminal)."""

    @abstractmethod
    def transition(self, world: WorldId, joint: JointAction) -> tuple[tuple[WorldId, float], ...]:
        """Explicit finite distribution over successor worlds."""

    @abstractmethod
    def reward(self, world: WorldId, joint: JointAction, player: PlayerId) -> float:
        """Per-step reward; terminal utilities are the sums along a history."""

    @abstractmethod
    def observations(
        self, world: WorldId, joint: JointAction, next_world: WorldId
    ) -> tuple[Observation, Observation, Observation]:
        """(private to 1, private to 2, public) observation symbols for one step."""

    @abstractmethod
    def is_terminal(self, world: WorldId) -> bool:
        ...

    @property
    @abstractmethod
    def utility_range(self) -> float:
        """Delta: max terminal utility of player 1 minus the min."""

    def infoset_label(self, key: bytes) -> str:
        """Human-readable name for an acting infoset key (hex fallback)."""
        return key.hex()


@dataclass(frozen=True)
class History:
    """A legal world trajectory: worlds interleaved with joint actions."""

    worlds: tuple[WorldId, ...]
    actions: tuple[JointAction, ...] = ()

    def __post_init__(self) -> None:
        if len(self.worlds) != len(self.actions) + 1:
            raise ValueError("history needs exactly one more world than actions")

    @property
    def last_world(self) -> WorldId:
        return self.worlds[-1]

    def extend(self, joint: JointAction, next_world: WorldId) -> "History":
        return History(self.worlds + (next_world,), self.actions + (joint,))

    def steps(self) -> Iterator[tuple[WorldId, JointAction, WorldId]]:
        for i, joint in enumerate(self.actions):
            yield self.worlds[i], joint, self.worlds[i + 1]

    def __len__(self) -> int:
        return len(self.actions)


def root_history(game: Game) -> History:
    return History((game.initial_world,))


_INITIAL_OBSERVATION = 0


def _encode_value(value) -> bytes:
    if isinstance(value, (int, np.integer)):
        return b"i" + struct.pack("<q", int(value))
    if isinstance(value, tuple):
        return b"t" + struct.pack("<H", len(value)) + b"".join(_encode_value(v) for v in value)
    raise TypeError(f"observations must be ints or tuples of ints, got {type(value)!r}")


@dataclass(frozen=True)
class InfoState:
    """A player's action-observation sequence (its private history).

    ``events`` alternates observation entries ``("o", symbol)`` with own-action
    entries ``("a", action_id)``, starting from a fixed initial observation.
    """

    player: PlayerId
    events: tuple[tuple[str, object], ...]

    @property
    def canonical_key(self) -> bytes:
        return self.key

    @property
    def key(self) -> bytes:
        # Tagged fixed-width encoding: injective on (player, events), and a
        # byte-prefix of every extension's key (used by perfect-recall checks).
        parts = [bytes([self.player])]
        for kind, value in self.events:
            parts.append(b"O" if kind == "o" else b"A")
            parts.append(_encode_value(value))
        return b"".join(parts)

    def extended(self, observation, own_action: ActionId | None) -> "InfoState":
        events = self.events + (("o", observation),)
        if own_action is not None:
            events = events + (("a", own_action),)
        return InfoState(self.player, events)


def info_state_of(game: Game, history: History, player: PlayerId) -> InfoState:
    """The player's private view of ``history``.

    Each step contributes the pair (private, public) observation plus the
    player's own component of the joint action.
    """
    events: list[tuple[str, object]] = [("o", _INITIAL_OBSERVATION)]
    for world, joint, next_world in history.steps():
        own = joint[player - 1]
        events.append(("a", own))
        obs = game.observations(world, joint, next_world)
        events.append(("o", (obs[player - 1], obs[2])))
    return InfoState(player, tuple(events))


class BehavioralStrategy:
    """Mapping from acting-infoset keys to probability vectors.

    Vectors are aligned with the game's ordered legal-action list at the
    infoset, must be non-negative, and must sum to 1 within 1e-12.
    """

    __slots__ = ("_table",)

    def __init__(self, table: Mapping[bytes, Sequence[float]] | None = None):
        self._table: dict[bytes, np.ndarray] = {}
        if table:
            for key, probs in table.items():
                self.set_probs(key, probs)

    def set_probs(self, key: bytes, probs: Sequence[float]) -> None:
        vec = np.asarray(probs, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ValueError("probability vector must be 1-D and non-empty")
        if np.any(vec < 0):
            raise ValueError(f"negative probability in {vec!r}")
        if abs(float(vec.sum()) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {vec.sum()!r}, not 1")
        self._table[key] = vec

    def probs(self, key: bytes) -> np.ndarray:
        try:
            return self._table[key]
        except KeyError:
            raise MissingStrategyError(f"no strategy entry for infoset {key.hex()}") from None

    def __contains__(self, key: bytes) -> bool:
        return key in self._table

    def __len__(self) -> int:
        return len(self._table)

    def __iter__(self) -> Iterator[bytes]:
        return iter(self._table)

    def keys(self):
        return self._table.keys()

    def items(self):
        return self._table.items()

    def copy(self) -> "BehavioralStrategy":
        out = BehavioralStrategy()
        out._table = {k: v.copy() for k, v in self._table.items()}
        return out

    def merged_with(self, other: "BehavioralStrategy") -> "BehavioralStrategy":
        out = self.copy()
        for key, vec in other.items():
            out.set_probs(key, vec)
        return out

    def restricted(self, keys: Iterable[bytes]) -> "BehavioralStrategy":
        out = BehavioralStrategy()
        for key in keys:
            out.set_probs(key, self.probs(key))
        return out

    def table_equal(self, other: "BehavioralStrategy", atol: float = 0.0) -> bool:
        if set(self.keys()) != set(other.keys()):
            return False
        return all(np.allclose(v, other.probs(k), rtol=0.0, atol=atol) for k, v in self.items())


Profile = tuple[BehavioralStrategy, BehavioralStrategy]


@dataclass(frozen=True)
class ReachProbs:
    """Per-source factors of a history's reach probability."""

    player1: float
    player2: float
    chance: float

    @property
    def product(self) -> float:
        return self.player1 * self.player2 * self.chance


@lru_cache(maxsize=None)
def _tree(game: Game, budget: int = DEFAULT_NODE_BUDGET) -> tuple[History, ...]:
    """All legal histories of ``game`` in deterministic depth-first order."""
    out: list[History] = []
    stack = [root_history(game)]
    while stack:
        h = stack.pop()
        out.append(h)
        if len(out) > budget:
            raise BudgetExceededError(
                f"{game.name}: more than {budget} histories; raise the node budget"
            )
        world = h.last_world
        if game.is_terminal(world):
            continue
        children = []
        for a1 in game.legal_actions(world, 1):
            for a2 in game.legal_actions(world, 2):
                for next_world, prob in game.transition(world, (a1, a2)):
                    if prob > 0.0:
                        children.append(h.extend((a1, a2), next_world))
        stack.extend(reversed(children))  # keep DFS order deterministic
    return tuple(out)


def enumerate_terminals(game: Game, budget: int = DEFAULT_NODE_BUDGET) -> list[History]:
    """Every terminal history exactly once, in depth-first order."""
    return [h for h in _tree(game, budget) if game.is_terminal(h.last_world)]


def terminal_utility(game: Game, history: History, player: PlayerId) -> float:
    """Cumulative reward of ``player`` along ``history``."""
    return sum(game.reward(w, joint, player) for w, joint, _ in history.steps())


def _acting(game: Game, world: WorldId, player: PlayerId) -> bool:
    return len(game.legal_actions(world, player)) >= 2


def reach_probabilities(game: Game, profile: Profile, history: History) -> ReachProbs:
    """Factor the reach probability of ``history`` into per-player and chance parts."""
    p1 = p2 = pc = 1.0
    prefix = root_history(game)
    for world, joint, next_world in history.steps():
        for player, strategy in ((1, profile[0]), (2, profile[1])):
            if _acting(game, world, player):
                actions = game.legal_actions(world, player)
                idx = actions.index(joint[player - 1])
                prob = float(strategy.probs(info_state_of(game, prefix, player).key)[idx])
                if player == 1:
                    p1 *= prob
                else:
                    p2 *= prob
        dist = dict(game.transition(world, joint))
        if next_world not in dist:
            raise ValueError("history step leaves the transition support")
        pc *= dist[next_world]
        prefix = prefix.extend(joint, next_world)
    return ReachProbs(p1, p2, pc)


def expected_utility(game: Game, profile: Profile) -> float:
    """Expected terminal utility of player 1 under a complete profile."""
    total = 0.0
    for z in enumerate_terminals(game):
        reach = reach_probabilities(game, profile, z).product
        if reach > 0.0:
            total += reach * terminal_utility(game, z, 1)
    return total


@dataclass
class InfosetRecord:
    """All histories sharing one acting information state of a player."""

    info_state: InfoState
    actions: tuple[ActionId, ...]
    histories: list[History] = field(default_factory=list)
    #: the player's own decisions leading here: (ancestor infoset key, action index)
    own_path: tuple[tuple[bytes, int], ...] = ()

    @property
    def key(self) -> bytes:
        return self.info_state.key


@lru_cache(maxsize=None)
def infoset_index(game: Game, player: PlayerId) -> dict[bytes, InfosetRecord]:
    """Acting infosets of ``player``, keyed canonically, in depth-first order."""
    index: dict[bytes, InfosetRecord] = {}
    for h in _tree(game):
        world = h.last_world
        if game.is_terminal(world) or not _acting(game, world, player):
            continue
        state = info_state_of(game, h, player)
        rec = index.get(state.key)
        actions = game.legal_actions(world, player)
        if rec is None:
            rec = InfosetRecord(state, actions, own_path=_own_path(game, h, player))
            index[state.key] = rec
        elif rec.actions != actions:
            raise ValueError("histories in one infoset disagree on legal actions")
        rec.histories.append(h)
    return index


def _own_path(game: Game, history: History, player: PlayerId) -> tuple[tuple[bytes, int], ...]:
    path: list[tuple[bytes, int]] = []
    prefix = root_history(game)
    for world, joint, next_world in history.steps():
        if _acting(game, world, player):
            actions = game.legal_actions(world, player)
            key = info_state_of(game, prefix, player).key
            path.append((key, actions.index(joint[player - 1])))
        prefix = prefix.extend(joint, next_world)
    return tuple(path)


def own_reach(strategy: BehavioralStrategy, record: InfosetRecord) -> float:
    """The player's own contribution to reaching ``record`` under ``strategy``."""
    prob = 1.0
    for key, idx in record.own_path:
        prob *= float(strategy.probs(key)[idx])
    return prob


def uniform_strategy(game: Game, player: PlayerId) -> BehavioralStrategy:
    out = BehavioralStrategy()
    for key, rec in infoset_index(game, player).items():
        n = len(rec.actions)
        out.set_probs(key, np.full(n, 1.0 / n))
    return out


def pure_strategy(
    game: Game, player: PlayerId, choices: Mapping[bytes, int] | int = 0
) -> BehavioralStrategy:
    """Deterministic strategy; ``choices`` maps infoset key to an action index
    (or is one index used everywhere)."""
    out = BehavioralStrategy()
    for key, rec in infoset_index(game, player).items():
        idx = choices if isinstance(choices, int) else choices[key]
        vec = np.zeros(len(rec.actions))
        vec[idx] = 1.0
        out.set_probs(key, vec)
    return out


def is_complete(game: Game, strategy: BehavioralStrategy, player: PlayerId) -> bool:
    return all(key in strategy for key in infoset_index(game, player))


def assert_complete(game: Game, strategy: BehavioralStrategy, player: PlayerId) -> None:
    missing = [key for key in infoset_index(game, player) if key not in strategy]
    if missing:
        labels = ", ".join(game.infoset_label(k) for k in missing)
        raise MissingStrategyError(f"strategy for player {player} missing infosets: {labels}")
