"""Concrete benchmark games.

All games are desk-scale and expose readable labels for their acting
infosets so strategies can be written as plain text files and CLI flags
can name bias targets.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .fosg_core import (
    BehavioralStrategy,
    Game,
    History,
    JointAction,
    PlayerId,
    WorldId,
    info_state_of,
    infoset_index,
    root_history,
)


class LabeledGame(Game):
    """Game with a bidirectional label map over acting infoset keys."""

    def _labels(self) -> dict[bytes, str]:
        raise NotImplementedError

    @property
    def labels(self) -> dict[bytes, str]:
        cached = getattr(self, "_label_cache", None)
        if cached is None:
            cached = self._label_cache = self._labels()
        return cached

    def infoset_label(self, key: bytes) -> str:
        return self.labels.get(key, key.hex())

    def infoset_key(self, label: str) -> bytes:
        for key, name in self.labels.items():
            if name == label:
                return key
        raise KeyError(f"{self.name}: unknown infoset label {label!r}")


class CoordinatedMatchingPennies(LabeledGame):
    """Matching pennies with a public fair chance event after player 1 acts.

    Player 1 picks Heads/Tails, chance publicly routes player 2 (blue) to
    one of two infosets s1/s2, player 2 picks Heads/Tails.  Player 1 gets
    +1 when the actions match and -1 otherwise.  Blue's equilibria are
    exactly the strategies with p + q = 1, where p and q are the Heads
    probabilities at s1 and s2.
    """

    name = "cmp"
    known_value = 0.0

    HEADS, TAILS = 0, 1

    @property
    def initial_world(self) -> WorldId:
        return 0

    def _mid(self, world: WorldId) -> tuple[int, int]:
        return divmod(world - 1, 2)  # (p1 action, chance branch)

    def is_terminal(self, world: WorldId) -> bool:
        return world >= 5

    def legal_actions(self, world: WorldId, player: PlayerId) -> tuple[int, ...]:
        if self.is_terminal(world):
            return ()
        if world == 0:
            return (0, 1) if player == 1 else (0,)
        return (0,) if player == 1 else (0, 1)

    def transition(self, world: WorldId, joint: JointAction):
        if world == 0:
            a1 = joint[0]
            return ((1 + 2 * a1, 0.5), (2 + 2 * a1, 0.5))
        a1, branch = self._mid(world)
        a2 = joint[1]
        return ((5 + 4 * a2 + 2 * a1 + branch, 1.0),)

    def reward(self, world: WorldId, joint: JointAction, player: PlayerId) -> float:
        if world == 0:
            return 0.0
        a1, _ = self._mid(world)
        u1 = 1.0 if joint[1] == a1 else -1.0
        return u1 if player == 1 else -u1

    def observations(self, world: WorldId, joint: JointAction, next_world: WorldId):
        if world == 0:
            branch = (next_world - 1) % 2
            return (branch, branch, branch)
        a2 = joint[1]  # public showdown
        return (a2, a2, a2)

    @property
    def utility_range(self) -> float:
        return 2.0

    def _labels(self) -> dict[bytes, str]:
        root = root_history(self)
        s1 = root.extend((0, 0), 1)  # player 1 played Heads, chance went left
        s2 = root.extend((0, 0), 2)
        return {
            info_state_of(self, root, 1).key: "p1",
            info_state_of(self, s1, 2).key: "s1",
            info_state_of(self, s2, 2).key: "s2",
        }

    def min_completion_exploitability(self, partial: dict, player: PlayerId) -> float:
        """Exact minimum-completion exploitability from the analytic forms
        |p + q - 1| (blue) and |2r - 1| (player 1)."""
        if player == 1:
            entry = partial.get(self.infoset_key("p1"))
            return 0.0 if entry is None else abs(2.0 * float(entry[0]) - 1.0)
        p_entry = partial.get(self.infoset_key("s1"))
        q_entry = partial.get(self.infoset_key("s2"))
        if p_entry is None or q_entry is None:
            return 0.0  # the free state can always rebalance to p + q = 1
        return abs(float(p_entry[0]) + float(q_entry[0]) - 1.0)


def cmp_strategy(p: float, q: float) -> BehavioralStrategy:
    """Blue (player 2) CMP strategy playing Heads with probability p at s1
    and q at s2."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"p and q must lie in [0, 1], got p={p}, q={q}")
    game = game_by_name("cmp")
    out = BehavioralStrategy()
    out.set_probs(game.infoset_key("s1"), np.array([p, 1.0 - p]))
    out.set_probs(game.infoset_key("s2"), np.array([q, 1.0 - q]))
    return out


_KUHN_SEQS = ("", "k", "b", "kb", "kk", "kbf", "kbc", "bf", "bc")
_KUHN_TERMINAL = {"kk", "kbf", "kbc", "bf", "bc"}
_KUHN_DEALS = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))
_CARD_NAMES = "JQK"
_DEAL_MARK = 100


class KuhnPoker(LabeledGame):
    """Standard three-card Kuhn poker (cards J < Q < K, ante 1, bet 1).

    World 0 is the pre-deal state where both players hold a single dummy
    action and the transition deals one of the six ordered card pairs.
    Betting worlds encode (deal, action sequence).
    """

    name = "kuhn"
    known_value = -1.0 / 18.0

    @property
    def initial_world(self) -> WorldId:
        return 0

    def _decode(self, world: WorldId) -> tuple[tuple[int, int], str]:
        deal_idx, seq_idx = divmod(world - 1, len(_KUHN_SEQS))
        return _KUHN_DEALS[deal_idx], _KUHN_SEQS[seq_idx]

    def _encode(self, deal_idx: int, seq: str) -> WorldId:
        return 1 + deal_idx * len(_KUHN_SEQS) + _KUHN_SEQS.index(seq)

    def is_terminal(self, world: WorldId) -> bool:
        return world != 0 and self._decode(world)[1] in _KUHN_TERMINAL

    def _to_act(self, seq: str) -> PlayerId:
        return 1 if seq in ("", "kb") else 2

    def legal_actions(self, world: WorldId, player: PlayerId) -> tuple[int, ...]:
        if self.is_terminal(world):
            return ()
        if world == 0:
            return (0,)
        _, seq = self._decode(world)
        return (0, 1) if player == self._to_act(seq) else (0,)

    def transition(self, world: WorldId, joint: JointAction):
        if world == 0:
            return tuple((self._encode(d, ""), 1.0 / 6.0) for d in range(len(_KUHN_DEALS)))
        deal_idx = (world - 1) // len(_KUHN_SEQS)
        _, seq = self._decode(world)
        action = joint[self._to_act(seq) - 1]
        if seq in ("", "k"):
            seq_next = seq + ("k" if action == 0 else "b")
        else:  # facing a bet: fold or call
            seq_next = seq + ("f" if action == 0 else "c")
        return ((self._encode(deal_idx, seq_next), 1.0),)

    def reward(self, world: WorldId, joint: JointAction, player: PlayerId) -> float:
        if world == 0:
            return 0.0
        deal, seq = self._decode(world)
        mover = self._to_act(seq)
        action = joint[mover - 1]
        u1 = 0.0
        if seq == "k" and action == 0:  # kk showdown, ante only
            u1 = 1.0 if deal[0] > deal[1] else -1.0
        elif seq == "b" and action == 0:  # player 2 folds
            u1 = 1.0
        elif seq == "b" and action == 1:  # bet called
            u1 = 2.0 if deal[0] > deal[1] else -2.0
        elif seq == "kb" and action == 0:  # player 1 folds
            u1 = -1.0
        elif seq == "kb" and action == 1:
            u1 = 2.0 if deal[0] > deal[1] else -2.0
        return u1 if player == 1 else -u1

    def observations(self, world: WorldId, joint: JointAction, next_world: WorldId):
        if world == 0:
            deal, _ = self._decode(next_world)
            return (deal[0], deal[1], _DEAL_MARK)
        deal, seq = self._decode(world)
        mover = self._to_act(seq)
        action = joint[mover - 1]
        _, seq_next = self._decode(next_world)
        if seq_next in ("kk", "bc", "kbc"):  # showdown reveals the other card
            return ((action, deal[1]), (action, deal[0]), action)
        return (action, action, action)

    @property
    def utility_range(self) -> float:
        return 4.0

    def _labels(self) -> dict[bytes, str]:
        labels: dict[bytes, str] = {}
        root = root_history(self)
        for deal_idx, deal in enumerate(_KUHN_DEALS):
            start = root.extend((0, 0), self._encode(deal_idx, ""))
            labels.setdefault(info_state_of(self, start, 1).key, _CARD_NAMES[deal[0]])
            after_k = start.extend((0, 0), self._encode(deal_idx, "k"))
            labels.setdefault(info_state_of(self, after_k, 2).key, _CARD_NAMES[deal[1]] + "c")
            after_b = start.extend((1, 0), self._encode(deal_idx, "b"))
            labels.setdefault(info_state_of(self, after_b, 2).key, _CARD_NAMES[deal[1]] + "b")
            after_kb = after_k.extend((0, 1), self._encode(deal_idx, "kb"))
            labels.setdefault(info_state_of(self, after_kb, 1).key, _CARD_NAMES[deal[0]] + "cb")
        return labels


def kuhn_alpha_equilibrium(alpha: float) -> BehavioralStrategy:
    """Player 1 strategy from the one-parameter Kuhn equilibrium family.

    alpha in [0, 1] scales the Jack bluffing frequency (alpha/3), the King
    value-betting frequency (alpha), and the Queen call frequency after a
    check-bet ((1 + alpha)/3).  Every member has zero exploitability.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    game = game_by_name("kuhn")
    table = {
        "J": (1.0 - alpha / 3.0, alpha / 3.0),
        "Jcb": (1.0, 0.0),
        "Q": (1.0, 0.0),
        "Qcb": ((2.0 - alpha) / 3.0, (1.0 + alpha) / 3.0),
        "K": (1.0 - alpha, alpha),
        "Kcb": (0.0, 1.0),
    }
    out = BehavioralStrategy()
    for label, probs in table.items():
        out.set_probs(game.infoset_key(label), np.asarray(probs))
    return out


class MatchingPennies(LabeledGame):
    """Classic simultaneous matching pennies; player 1 wins on a match."""

    name = "mp"
    known_value = 0.0

    @property
    def initial_world(self) -> WorldId:
        return 0

    def is_terminal(self, world: WorldId) -> bool:
        return world != 0

    def legal_actions(self, world: WorldId, player: PlayerId) -> tuple[int, ...]:
        return (0, 1) if world == 0 else ()

    def transition(self, world: WorldId, joint: JointAction):
        return ((1 + 2 * joint[0] + joint[1], 1.0),)

    def reward(self, world: WorldId, joint: JointAction, player: PlayerId) -> float:
        u1 = 1.0 if joint[0] == joint[1] else -1.0
        return u1 if player == 1 else -u1

    def observations(self, world: WorldId, joint: JointAction, next_world: WorldId):
        return (joint, joint, joint)

    @property
    def utility_range(self) -> float:
        return 2.0

    def _labels(self) -> dict[bytes, str]:
        root = root_history(self)
        return {
            info_state_of(self, root, 1).key: "p1",
            info_state_of(self, root, 2).key: "p2",
        }


class ZeroPayoffNFG3x3(LabeledGame):
    """Both players pick from {A, B, C} simultaneously; every payoff is zero."""

    name = "nfg3x3"
    known_value = 0.0

    @property
    def initial_world(self) -> WorldId:
        return 0

    def is_terminal(self, world: WorldId) -> bool:
        return world != 0

    def legal_actions(self, world: WorldId, player: PlayerId) -> tuple[int, ...]:
        return (0, 1, 2) if world == 0 else ()

    def transition(self, world: WorldId, joint: JointAction):
        return ((1 + 3 * joint[0] + joint[1], 1.0),)

    def reward(self, world: WorldId, joint: JointAction, player: PlayerId) -> float:
        return 0.0

    def observations(self, world: WorldId, joint: JointAction, next_world: WorldId):
        return (joint, joint, joint)

    @property
    def utility_range(self) -> float:
        return 0.0

    def _labels(self) -> dict[bytes, str]:
        root = root_history(self)
        return {
            info_state_of(self, root, 1).key: "p1",
            info_state_of(self, root, 2).key: "p2",
        }


class PerfectInfoLXGame(LabeledGame):
    """Single-decision-maker perfect-information two-level tree.

    Player 1 picks L/R at the top node, then Y/X at the reached second
    node.  Payoffs: (L, Y) = 1, (L, X) = 0, (R, Y) = 0, (R, X) = 1, so the
    optimal plans are exactly L,Y and R,X, while the L,X composition of the
    two is strictly sub-optimal.  Player 2 only ever holds dummy actions.
    """

    name = "lx"
    known_value = 1.0

    L, R, Y, X = 0, 1, 0, 1

    @property
    def initial_world(self) -> WorldId:
        return 0

    def is_terminal(self, world: WorldId) -> bool:
        return world >= 3

    def legal_actions(self, world: WorldId, player: PlayerId) -> tuple[int, ...]:
        if self.is_terminal(world):
            return ()
        return (0, 1) if player == 1 else (0,)

    def transition(self, world: WorldId, joint: JointAction):
        a = joint[0]
        if world == 0:
            return ((1 + a, 1.0),)
        first = world - 1
        return ((3 + 2 * first + a, 1.0),)

    def reward(self, world: WorldId, joint: JointAction, player: PlayerId) -> float:
        if world == 0:
            return 0.0
        first, second = world - 1, joint[0]
        u1 = 1.0 if first == second else 0.0
        return u1 if player == 1 else -u1

    def observations(self, world: WorldId, joint: JointAction, next_world: WorldId):
        a = joint[0]  # perfect information: the move is public
        return (a, a, a)

    @property
    def utility_range(self) -> float:
        return 1.0

    def _labels(self) -> dict[bytes, str]:
        root = root_history(self)
        after_l = root.extend((0, 0), 1)
        after_r = root.extend((1, 0), 2)
        return {
            info_state_of(self, root, 1).key: "top",
            info_state_of(self, after_l, 1).key: "afterL",
            info_state_of(self, after_r, 1).key: "afterR",
        }


_GAME_CLASSES = {
    cls.name: cls
    for cls in (
        CoordinatedMatchingPennies,
        KuhnPoker,
        MatchingPennies,
        ZeroPayoffNFG3x3,
        PerfectInfoLXGame,
    )
}


@lru_cache(maxsize=None)
def game_by_name(name: str) -> LabeledGame:
    """Shared singleton instance per game name (tree caches are per instance)."""
    try:
        return _GAME_CLASSES[name]()
    except KeyError:
        raise KeyError(f"unknown game {name!r}; choose from {sorted(_GAME_CLASSES)}") from None


def game_names() -> list[str]:
    return sorted(_GAME_CLASSES)
