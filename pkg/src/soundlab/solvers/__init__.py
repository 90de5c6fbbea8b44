"""Regret-based equilibrium solvers.

``run_cfr`` is deterministic vanilla CFR with simultaneous updates.
``run_mccfr`` is outcome-sampling MCCFR with epsilon-on-policy exploration
and optional trajectory targeting toward chosen infosets, the combination
used to emulate online outcome sampling.  Both operate on a RegretTable
(cumulative regrets, average-strategy accumulators, visit counts) backed
by flat arrays over a compiled game tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import MissingStrategyError, NumericalUnderflowError
from ..fosg_core import BehavioralStrategy, Game, PlayerId
from ._compile import CompiledTree, compile_game, target_masks
from ._kernels import (
    ERR_UNDERFLOW,
    cfr_iterations,
    derive_seed,
    mccfr_iterations,
    mix_with_uniform,
    stream_state,
)

__all__ = [
    "SolverConfig",
    "RegretTable",
    "CFRResult",
    "MCCFRResult",
    "regret_matching",
    "sampling_policy",
    "kickstart_regrets",
    "run_cfr",
    "run_mccfr",
    "derive_seed",
    "compile_game",
]


def regret_matching(regrets: Sequence[float]) -> np.ndarray:
    """Positive parts normalized; uniform when no regret is positive."""
    vec = np.asarray(regrets, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("regret vector must be 1-D and non-empty")
    positive = np.maximum(vec, 0.0)
    total = positive.sum()
    if total > 0.0:
        return positive / total
    return np.full(vec.size, 1.0 / vec.size)


def sampling_policy(regrets: Sequence[float], exploration: float) -> np.ndarray:
    """The episode sampling distribution used for the updated player."""
    return mix_with_uniform(regret_matching(regrets), exploration)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of a (possibly biased, kick-started) MCCFR run."""

    iterations: int
    seed: int = 0
    exploration: float = 0.6
    bias_probability: float = 0.1
    bias_targets: tuple[bytes, ...] = ()
    #: whether bias_probability is the chance of an untargeted or targeted episode
    bias_meaning: str = "untargeted"
    kickstart_mu: float = 500.0
    weight_floor: float = 1e-12
    checkpoints: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if not 0.0 <= self.exploration <= 1.0:
            raise ValueError("exploration must lie in [0, 1]")
        if not 0.0 <= self.bias_probability <= 1.0:
            raise ValueError("bias_probability must lie in [0, 1]")
        if self.bias_meaning not in ("untargeted", "targeted"):
            raise ValueError("bias_meaning must be 'untargeted' or 'targeted'")
        if self.kickstart_mu < 0.0:
            raise ValueError("kickstart_mu must be non-negative")
        if self.checkpoints is not None and list(self.checkpoints) != sorted(set(self.checkpoints)):
            raise ValueError("checkpoints must be strictly increasing")

    @property
    def untargeted_probability(self) -> float:
        if not self.bias_targets:
            return 1.0
        if self.bias_meaning == "untargeted":
            return self.bias_probability
        return 1.0 - self.bias_probability

    def with_target(self, key: bytes, seed: int | None = None) -> "SolverConfig":
        cfg = replace(self, bias_targets=(key,))
        return cfg if seed is None else replace(cfg, seed=seed)


class RegretTable:
    """Cumulative regrets, average-strategy accumulators and visit counts,
    keyed by infoset, stored as flat arrays over a compiled tree."""

    def __init__(self, tree: CompiledTree):
        self.tree = tree
        self.regrets = np.zeros(tree.total_slots)
        self.strategy_sum = np.zeros(tree.total_slots)
        self.visits = np.zeros(tree.n_infosets, dtype=np.int64)
        self.iterations = 0
        self.cumulative_utility = np.zeros(2)

    @classmethod
    def for_game(cls, game: Game) -> "RegretTable":
        return cls(compile_game(game))

    def copy(self) -> "RegretTable":
        out = RegretTable(self.tree)
        out.regrets = self.regrets.copy()
        out.strategy_sum = self.strategy_sum.copy()
        out.visits = self.visits.copy()
        out.iterations = self.iterations
        out.cumulative_utility = self.cumulative_utility.copy()
        return out

    def _slots(self, key: bytes) -> slice:
        if key not in self.tree.key_to_iset:
            raise MissingStrategyError(
                f"infoset {self.tree.game.infoset_label(key)} not in {self.tree.game.name}"
            )
        return self.tree.slots(key)

    def regrets_for(self, key: bytes) -> np.ndarray:
        return self.regrets[self._slots(key)].copy()

    def strategy_sum_for(self, key: bytes) -> np.ndarray:
        return self.strategy_sum[self._slots(key)].copy()

    def set_regrets(self, key: bytes, values: Sequence[float]) -> None:
        sl = self._slots(key)
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != self.regrets[sl].shape:
            raise ValueError("regret vector length does not match the infoset")
        self.regrets[sl] = vec

    def keys(self, player: PlayerId | None = None) -> list[bytes]:
        t = self.tree
        return [
            k for i, k in enumerate(t.iset_keys) if player is None or t.iset_player[i] == player
        ]

    def _strategy_from(self, slots: np.ndarray, player: PlayerId | None) -> BehavioralStrategy:
        t = self.tree
        out = BehavioralStrategy()
        for iid, key in enumerate(t.iset_keys):
            if player is not None and t.iset_player[iid] != player:
                continue
            off = int(t.iset_offset[iid])
            n = int(t.iset_n_actions[iid])
            vec = slots[off : off + n]
            total = vec.sum()
            out.set_probs(key, vec / total if total > 0.0 else np.full(n, 1.0 / n))
        return out

    def average_strategy(self, player: PlayerId | None = None) -> BehavioralStrategy:
        """Normalized average-strategy accumulator (uniform where unvisited)."""
        return self._strategy_from(self.strategy_sum, player)

    def current_strategy(self, player: PlayerId | None = None) -> BehavioralStrategy:
        t = self.tree
        out = BehavioralStrategy()
        for iid, key in enumerate(t.iset_keys):
            if player is not None and t.iset_player[iid] != player:
                continue
            off = int(t.iset_offset[iid])
            n = int(t.iset_n_actions[iid])
            out.set_probs(key, regret_matching(self.regrets[off : off + n]))
        return out

    def bit_equal(self, other: "RegretTable") -> bool:
        return (
            self.tree is other.tree
            and np.array_equal(self.regrets, other.regrets)
            and np.array_equal(self.strategy_sum, other.strategy_sum)
            and np.array_equal(self.visits, other.visits)
        )


def kickstart_regrets(table: RegretTable, strategy: BehavioralStrategy, mu: float) -> RegretTable:
    """Copy of ``table`` whose regrets at each infoset of ``strategy`` are
    mu times the strategy probabilities; average accumulators untouched."""
    if mu < 0.0:
        raise ValueError("mu must be non-negative")
    out = table.copy()
    for key, probs in strategy.items():
        out.set_regrets(key, mu * np.asarray(probs))
    return out


@dataclass
class CFRResult:
    table: RegretTable

    @property
    def average_strategies(self) -> tuple[BehavioralStrategy, BehavioralStrategy]:
        return self.table.average_strategy(1), self.table.average_strategy(2)

    @property
    def cumulative_utility(self) -> tuple[float, float]:
        return float(self.table.cumulative_utility[0]), float(self.table.cumulative_utility[1])


def run_cfr(game: Game, iterations: int, table: RegretTable | None = None) -> CFRResult:
    """Deterministic CFR; returns reach-weighted average strategies.

    Passing a previous result's table continues the same run.
    """
    tree = compile_game(game)
    table = RegretTable(tree) if table is None else table.copy()
    if table.tree is not tree:
        raise ValueError("table was built for a different game")
    cfr_iterations(
        tree.kind,
        tree.player,
        tree.infoset,
        tree.first_child,
        tree.num_children,
        tree.child,
        tree.child_prob,
        tree.util1,
        tree.iset_offset,
        tree.iset_n_actions,
        table.regrets,
        table.strategy_sum,
        table.visits,
        iterations,
        table.cumulative_utility,
    )
    table.iterations += iterations
    return CFRResult(table)


@dataclass
class MCCFRResult:
    table: RegretTable
    #: (global iteration, average strategy over both players) pairs
    snapshots: list[tuple[int, BehavioralStrategy]] = field(default_factory=list)

    @property
    def strategy(self) -> BehavioralStrategy:
        return self.table.average_strategy()


def default_checkpoints(start: int, end: int) -> tuple[int, ...]:
    """Powers of ten in (start, end], plus the final iteration."""
    points = [10**e for e in range(0, 64) if start < 10**e <= end]
    if end not in points:
        points.append(end)
    return tuple(points)


def run_mccfr(game: Game, config: SolverConfig, table: RegretTable | None = None) -> MCCFRResult:
    """Outcome-sampling MCCFR run described by ``config``.

    The update player alternates each iteration; when bias targets are set,
    episodes are steered toward them with the configured probability and
    all estimates are importance-corrected by the mixture probability.
    """
    tree = compile_game(game)
    table = RegretTable(tree) if table is None else table.copy()
    if table.tree is not tree:
        raise ValueError("table was built for a different game")

    use_bias = bool(config.bias_targets)
    if use_bias:
        is_target, reaches = target_masks(tree, frozenset(config.bias_targets))
    else:
        is_target = np.zeros(tree.n_nodes, dtype=np.bool_)
        reaches = np.zeros(tree.n_nodes, dtype=np.bool_)

    start = table.iterations
    end = start + config.iterations
    if config.checkpoints is not None:
        checkpoints = tuple(c for c in config.checkpoints if start < c <= end)
    else:
        checkpoints = default_checkpoints(start, end) if config.iterations else ()
    cp_array = np.asarray(checkpoints, dtype=np.int64)
    snap = np.zeros((len(checkpoints), tree.total_slots))

    err = mccfr_iterations(
        tree.kind,
        tree.player,
        tree.infoset,
        tree.first_child,
        tree.num_children,
        tree.child,
        tree.child_prob,
        tree.util1,
        tree.iset_offset,
        tree.iset_n_actions,
        table.regrets,
        table.strategy_sum,
        table.visits,
        start,
        config.iterations,
        config.exploration,
        config.untargeted_probability,
        config.weight_floor,
        use_bias,
        is_target,
        reaches,
        stream_state(config.seed),
        cp_array,
        snap,
        tree.max_depth,
        max(int(tree.num_children.max(initial=1)), 1),
    )
    if err == ERR_UNDERFLOW:
        raise NumericalUnderflowError(
            f"sampling weight fell below the floor {config.weight_floor}"
        )
    table.iterations = end

    result = MCCFRResult(table)
    for row, iteration in enumerate(checkpoints):
        result.snapshots.append((iteration, table._strategy_from(snap[row], None)))
    return result
