"""Audits of logged online play against the consistency hierarchy.

Local: every individually queried strategy extends to some epsilon
equilibrium.  Global: one equilibrium per gameplay covers every strategy
queried across its matches.  Strong global: one equilibrium covers every
possible probe of the algorithm.  Epsilon-equilibrium membership of a
partial strategy is reduced to the minimum exploitability over its
completions, found by coordinate descent with grid refinement (exact
analytic completion where a game provides one).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .arena import RepeatedGameRecord
from .errors import BudgetExceededError
from .equilibrium import exploitability
from .fosg_core import BehavioralStrategy, Game, PlayerId, infoset_index
from .online import OnlineAlgorithm, tabularize

COMPLETION_CAP = 6
#: uncertainty band of the numeric completion search, quoted with results
COMPLETION_TOLERANCE = 1e-3


def _simplex_grid(n_actions: int, step: float) -> list[np.ndarray]:
    ticks = int(round(1.0 / step))
    points = []
    for combo in itertools.combinations_with_replacement(range(n_actions), ticks):
        vec = np.zeros(n_actions)
        for idx in combo:
            vec[idx] += step
        vec[-1] += 1.0 - vec.sum()  # absorb float residue
        points.append(vec)
    return points


def _simplex_neighbors(current: np.ndarray, step: float) -> list[np.ndarray]:
    """Feasible single-step moves current + step * (e_i - e_j) on the simplex."""
    out = []
    n = current.shape[0]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            vec = current.copy()
            vec[i] += step
            vec[j] -= step
            if vec[j] >= -1e-12:
                vec[j] = max(vec[j], 0.0)
                out.append(vec / vec.sum())
    return out


def completion_exploitability(
    game: Game,
    partial: BehavioralStrategy | Mapping[bytes, Sequence[float]],
    player: PlayerId,
    cap: int = COMPLETION_CAP,
    sweep_tolerance: float = 1e-4,
    min_step: float = 1e-4,
) -> float:
    """Minimum exploitability over all completions of a partial strategy."""
    items = dict(partial.items())
    index = infoset_index(game, player)
    unknown = [k for k in items if k not in index]
    if unknown:
        raise KeyError(f"partial strategy keys outside player {player}'s infosets")

    analytic = getattr(game, "min_completion_exploitability", None)
    if analytic is not None:
        return analytic(items, player)

    unfilled = [k for k in index if k not in items]
    if not unfilled:
        return exploitability(game, BehavioralStrategy(items), player)
    if len(unfilled) > cap:
        raise BudgetExceededError(
            f"{len(unfilled)} unfilled infosets exceed the completion cap {cap}"
        )

    assign = {k: np.full(len(index[k].actions), 1.0 / len(index[k].actions)) for k in unfilled}

    def evaluate() -> float:
        table = BehavioralStrategy(items)
        for k, v in assign.items():
            table.set_probs(k, v)
        return exploitability(game, table, player)

    best = evaluate()
    step = 0.25
    coarse = True
    while step >= min_step:
        improved = 0.0
        for key in unfilled:
            best_vec = assign[key]
            if coarse:  # one full coarse scan seeds the local refinement
                candidates = _simplex_grid(len(index[key].actions), step)
            else:
                candidates = _simplex_neighbors(assign[key], step)
            for candidate in candidates:
                assign[key] = candidate
                val = evaluate()
                if val < best - 1e-12:
                    improved += best - val
                    best = val
                    best_vec = candidate
            assign[key] = best_vec
        if improved < sweep_tolerance:
            step /= 2.0
            coarse = False
    return best


def _queries_by_prefix(
    record: RepeatedGameRecord, player: PlayerId
) -> Iterable[tuple[int, list]]:
    for i, match in enumerate(record.matches, start=1):
        yield i, [q for q in match.queries if q.player == player]


def audit_local(record: RepeatedGameRecord, game: Game, player: PlayerId) -> float:
    """Smallest epsilon such that every individually queried strategy
    extends to an epsilon-equilibrium."""
    worst = 0.0
    seen: set[tuple[bytes, tuple[float, ...]]] = set()
    for _, queries in _queries_by_prefix(record, player):
        for q in queries:
            probe = (q.key, q.probs)
            if probe in seen:
                continue
            seen.add(probe)
            worst = max(worst, completion_exploitability(game, {q.key: q.probs}, player))
    return worst


def _audit_global_detail(
    record: RepeatedGameRecord, game: Game, player: PlayerId, atol: float = 1e-9
) -> tuple[float, str | None]:
    merged: dict[bytes, tuple[float, ...]] = {}
    worst = 0.0
    cache: dict[frozenset, float] = {}
    for i, queries in _queries_by_prefix(record, player):
        changed = False
        for q in queries:
            prev = merged.get(q.key)
            if prev is None:
                merged[q.key] = q.probs
                changed = True
            elif not np.allclose(prev, q.probs, rtol=0.0, atol=atol):
                witness = (
                    f"match {i}: infoset {game.infoset_label(q.key)} answered with "
                    f"{np.round(q.probs, 6)} after {np.round(prev, 6)}"
                )
                return game.utility_range, witness
        if changed or i == 1:
            sig = frozenset(merged.items())
            if sig not in cache:
                cache[sig] = completion_exploitability(game, dict(merged), player)
            worst = max(worst, cache[sig])
    return worst, None


def audit_global(record: RepeatedGameRecord, game: Game, player: PlayerId) -> float:
    """Smallest epsilon such that, per match prefix, one epsilon-equilibrium
    matches everything queried so far; the utility range when the algorithm
    answered one infoset two different ways (no single equilibrium exists)."""
    return _audit_global_detail(record, game, player)[0]


def default_probe_orders(game: Game, player: PlayerId) -> list[list[bytes]]:
    """Two ancestor-first query orders: depth-first, and siblings reversed
    within each depth level."""
    index = infoset_index(game, player)
    forward = list(index.keys())
    by_depth: dict[int, list[bytes]] = {}
    for k in forward:
        by_depth.setdefault(len(index[k].own_path), []).append(k)
    reverse: list[bytes] = []
    for depth in sorted(by_depth):
        reverse.extend(reversed(by_depth[depth]))
    return [forward, reverse]


def _audit_strong_detail(
    alg: OnlineAlgorithm,
    game: Game,
    player: PlayerId,
    probe_orders: Sequence[Sequence[bytes]] | None = None,
    records: Sequence[RepeatedGameRecord] = (),
    draws: int = 64,
    atol: float = 1e-9,
) -> tuple[float, str | None, BehavioralStrategy | None]:
    if probe_orders is None:
        probe_orders = default_probe_orders(game, player)
    tables = [
        tabularize(alg, game, player, order, draws=draws, rng=np.random.default_rng(7))
        for order in probe_orders
    ]
    reference = tables[0]
    for order, table in zip(probe_orders, tables[1:], strict=False):
        for key in reference.keys():
            if not np.allclose(reference.probs(key), table.probs(key), rtol=0.0, atol=atol):
                witness = (
                    f"tabularization order-dependent at {game.infoset_label(key)}: "
                    f"{np.round(reference.probs(key), 6)} vs {np.round(table.probs(key), 6)}"
                )
                return game.utility_range, witness, None
    for record in records:
        for q in record.queries_by(player):
            if not np.allclose(reference.probs(q.key), q.probs, rtol=0.0, atol=atol):
                witness = (
                    f"seed {record.master_seed}: played {np.round(q.probs, 6)} at "
                    f"{game.infoset_label(q.key)} but tabularizes to "
                    f"{np.round(reference.probs(q.key), 6)}"
                )
                return game.utility_range, witness, None
    return exploitability(game, reference, player), None, reference


def audit_strong_global(
    alg: OnlineAlgorithm,
    game: Game,
    player: PlayerId,
    probe_orders: Sequence[Sequence[bytes]] | None = None,
    records: Sequence[RepeatedGameRecord] = (),
    draws: int = 64,
) -> float:
    """Exploitability of the single strategy all probes agree on, or the
    utility range when any probe (query order or logged rollout) disagrees."""
    return _audit_strong_detail(alg, game, player, probe_orders, records, draws)[0]


@dataclass
class ConsistencyAudit:
    """Joint audit result; a stronger level is at least as demanding, so
    epsilon_local <= epsilon_global <= epsilon_strong up to the numeric
    completion tolerance."""

    level_achieved: str
    epsilon_local: float
    epsilon_global: float
    epsilon_strong: float | None
    witness: str | None
    tolerance: float = COMPLETION_TOLERANCE


def audit_record(
    record: RepeatedGameRecord,
    game: Game,
    player: PlayerId,
    epsilon: float = 0.0,
    alg: OnlineAlgorithm | None = None,
) -> ConsistencyAudit:
    """Audit one repeated-game record at all hierarchy levels.

    The strong level needs the algorithm itself (probing it is part of the
    definition); without it only the record-based levels are reported.
    """
    eps_local = audit_local(record, game, player)
    eps_global, witness = _audit_global_detail(record, game, player)
    eps_strong = None
    if alg is not None:
        eps_strong, strong_witness, _ = _audit_strong_detail(
            alg, game, player, records=[record]
        )
        witness = witness or strong_witness
    slack = COMPLETION_TOLERANCE
    if eps_strong is not None and eps_strong <= epsilon + slack:
        level = "strong_global"
    elif eps_global <= epsilon + slack:
        level = "global"
    elif eps_local <= epsilon + slack:
        level = "local"
    else:
        level = "none"
    return ConsistencyAudit(level, eps_local, eps_global, eps_strong, witness)
