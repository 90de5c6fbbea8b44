"""Flat array encoding of a game tree for the numba solver kernels.

The FOSG is sequentialized into a classic extensive-form tree: player 1's
decision (when it has one), then player 2's (its information state never
reveals player 1's simultaneous choice), then an explicit chance node for
stochastic transitions.  Single-action turns and deterministic transitions
are collapsed away.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..fosg_core import Game, History, info_state_of, root_history, terminal_utility

KIND_DECISION = 0
KIND_CHANCE = 1
KIND_TERMINAL = 2


@dataclass
class CompiledTree:
    game: Game
    kind: np.ndarray  # int8 per node
    player: np.ndarray  # int8, -1 unless decision
    infoset: np.ndarray  # int32, -1 unless decision
    first_child: np.ndarray  # int32 into child/child_prob
    num_children: np.ndarray  # int32
    child: np.ndarray  # int32 flat child node ids
    child_prob: np.ndarray  # float64, meaningful for chance nodes
    util1: np.ndarray  # float64 terminal utility for player 1
    # infoset tables (both players share one id space)
    iset_keys: list[bytes]
    iset_player: np.ndarray  # int8
    iset_n_actions: np.ndarray  # int32
    iset_offset: np.ndarray  # int64 into the flat slot arrays
    key_to_iset: dict[bytes, int]
    total_slots: int
    max_depth: int
    max_actions: int

    @property
    def n_nodes(self) -> int:
        return len(self.kind)

    @property
    def n_infosets(self) -> int:
        return len(self.iset_keys)

    def slots(self, key: bytes) -> slice:
        iid = self.key_to_iset[key]
        off = int(self.iset_offset[iid])
        return slice(off, off + int(self.iset_n_actions[iid]))


@lru_cache(maxsize=None)
def compile_game(game: Game) -> CompiledTree:
    kind: list[int] = []
    player: list[int] = []
    infoset: list[int] = []
    first_child: list[int] = []
    num_children: list[int] = []
    child: list[int] = []
    child_prob: list[float] = []
    util1: list[float] = []

    iset_keys: list[bytes] = []
    iset_player: list[int] = []
    iset_n_actions: list[int] = []
    key_to_iset: dict[bytes, int] = {}
    max_depth = 0

    def new_node(k: int) -> int:
        kind.append(k)
        player.append(-1)
        infoset.append(-1)
        first_child.append(0)
        num_children.append(0)
        util1.append(0.0)
        return len(kind) - 1

    def iset_id(key: bytes, pl: int, n_actions: int) -> int:
        iid = key_to_iset.get(key)
        if iid is None:
            iid = len(iset_keys)
            key_to_iset[key] = iid
            iset_keys.append(key)
            iset_player.append(pl)
            iset_n_actions.append(n_actions)
        elif iset_n_actions[iid] != n_actions:
            raise ValueError("infoset revisited with a different action count")
        return iid

    def attach(node: int, kids: list[int], probs: list[float] | None) -> None:
        first_child[node] = len(child)
        num_children[node] = len(kids)
        child.extend(kids)
        child_prob.extend(probs if probs is not None else [0.0] * len(kids))

    def build(h: History, depth: int) -> int:
        nonlocal max_depth
        max_depth = max(max_depth, depth)
        world = h.last_world
        if game.is_terminal(world):
            node = new_node(KIND_TERMINAL)
            util1[node] = terminal_utility(game, h, 1)
            return node
        return expand(h, None, None, depth)

    def expand(h: History, a1, a2, depth: int) -> int:
        world = h.last_world
        if a1 is None:
            acts = game.legal_actions(world, 1)
            if len(acts) < 2:
                return expand(h, acts[0], None, depth)
            node = new_node(KIND_DECISION)
            player[node] = 1
            infoset[node] = iset_id(info_state_of(game, h, 1).key, 1, len(acts))
            attach(node, [expand(h, a, None, depth + 1) for a in acts], None)
            return node
        if a2 is None:
            acts = game.legal_actions(world, 2)
            if len(acts) < 2:
                return expand(h, a1, acts[0], depth)
            node = new_node(KIND_DECISION)
            player[node] = 2
            infoset[node] = iset_id(info_state_of(game, h, 2).key, 2, len(acts))
            attach(node, [expand(h, a1, a, depth + 1) for a in acts], None)
            return node
        outcomes = [(w, p) for w, p in game.transition(world, (a1, a2)) if p > 0.0]
        if len(outcomes) == 1:
            return build(h.extend((a1, a2), outcomes[0][0]), depth)
        node = new_node(KIND_CHANCE)
        kids = [build(h.extend((a1, a2), w), depth + 1) for w, _ in outcomes]
        attach(node, kids, [p for _, p in outcomes])
        return node

    root = build(root_history(game), 0)
    if root != 0:
        raise AssertionError("root must be node 0")

    offsets = np.zeros(len(iset_keys), dtype=np.int64)
    total = 0
    for i, n in enumerate(iset_n_actions):
        offsets[i] = total
        total += n

    return CompiledTree(
        game=game,
        kind=np.asarray(kind, dtype=np.int8),
        player=np.asarray(player, dtype=np.int8),
        infoset=np.asarray(infoset, dtype=np.int32),
        first_child=np.asarray(first_child, dtype=np.int32),
        num_children=np.asarray(num_children, dtype=np.int32),
        child=np.asarray(child, dtype=np.int32),
        child_prob=np.asarray(child_prob, dtype=np.float64),
        util1=np.asarray(util1, dtype=np.float64),
        iset_keys=iset_keys,
        iset_player=np.asarray(iset_player, dtype=np.int8),
        iset_n_actions=np.asarray(iset_n_actions, dtype=np.int32),
        iset_offset=offsets,
        key_to_iset=key_to_iset,
        total_slots=total,
        max_depth=max_depth,
        max_actions=max(iset_n_actions, default=1),
    )


def target_masks(tree: CompiledTree, target_keys: frozenset[bytes]) -> tuple[np.ndarray, np.ndarray]:
    """(is_target_node, subtree_reaches_target) boolean masks per node."""
    unknown = [k for k in target_keys if k not in tree.key_to_iset]
    if unknown:
        raise KeyError(f"bias targets not in game: {[k.hex() for k in unknown]}")
    target_ids = {tree.key_to_iset[k] for k in target_keys}
    n = tree.n_nodes
    is_target = np.zeros(n, dtype=np.bool_)
    reaches = np.zeros(n, dtype=np.bool_)
    for v in range(n - 1, -1, -1):  # children always have higher ids
        if tree.kind[v] == KIND_DECISION and int(tree.infoset[v]) in target_ids:
            is_target[v] = True
            reaches[v] = True
            continue
        fc, nc = int(tree.first_child[v]), int(tree.num_children[v])
        for slot in range(fc, fc + nc):
            if reaches[tree.child[slot]]:
                reaches[v] = True
                break
    return is_target, reaches
