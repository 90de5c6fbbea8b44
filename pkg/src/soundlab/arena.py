"""Repeated-game execution and exact response-game analysis.

A repeated game threads both algorithms' states across k matches.  The
k-step response game replaces the analyzed algorithm's decisions and all
chance with environment transitions and computes the adversary's exact
best-response value over its cross-match information states: its own
action-observation sequences plus the per-match rewards it observed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, NondeterminismError
from .fosg_core import (
    Game,
    History,
    PlayerId,
    info_state_of,
    opponent,
    root_history,
    terminal_utility,
)
from .online import OnlineAlgorithm, Theta

DEFAULT_RESPONSE_BUDGET = 10**7


@dataclass(frozen=True)
class QueryRecord:
    player: PlayerId
    key: bytes
    probs: tuple[float, ...]


@dataclass
class MatchLog:
    history: History
    queries: tuple[QueryRecord, ...]
    rewards: tuple[float, float]


@dataclass
class RepeatedGameRecord:
    game_name: str
    master_seed: int
    matches: list[MatchLog]
    #: per player: algorithm state after each match (index i = after match i+1)
    theta_snapshots: tuple[list[Theta], list[Theta]]

    @property
    def k(self) -> int:
        return len(self.matches)

    @property
    def rewards_p1(self) -> list[float]:
        return [m.rewards[0] for m in self.matches]

    @property
    def average_reward_p1(self) -> float:
        return float(np.mean(self.rewards_p1))

    def average_reward(self, player: PlayerId) -> float:
        return self.average_reward_p1 if player == 1 else -self.average_reward_p1

    def queries_by(self, player: PlayerId) -> list[QueryRecord]:
        return [q for m in self.matches for q in m.queries if q.player == player]


def _sample(rng: np.random.Generator, probs: Sequence[float]) -> int:
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def play_match(
    game: Game,
    alg1: OnlineAlgorithm,
    alg2: OnlineAlgorithm,
    theta1: Theta,
    theta2: Theta,
    rng: np.random.Generator,
) -> tuple[MatchLog, Theta, Theta]:
    """Sample one terminal history, querying each algorithm at its acting
    infosets and logging every queried strategy."""
    h = root_history(game)
    queries: list[QueryRecord] = []
    thetas = {1: theta1, 2: theta2}
    algs = {1: alg1, 2: alg2}
    while not game.is_terminal(h.last_world):
        world = h.last_world
        joint = []
        for player in (1, 2):
            actions = game.legal_actions(world, player)
            if len(actions) >= 2:
                state = info_state_of(game, h, player)
                probs, thetas[player] = algs[player].act(state, thetas[player])
                queries.append(QueryRecord(player, state.key, tuple(float(p) for p in probs)))
                joint.append(actions[_sample(rng, probs)])
            else:
                joint.append(actions[0])
        outcomes = game.transition(world, tuple(joint))
        idx = _sample(rng, [p for _, p in outcomes]) if len(outcomes) > 1 else 0
        h = h.extend(tuple(joint), outcomes[idx][0])
    rewards = (terminal_utility(game, h, 1), terminal_utility(game, h, 2))
    return MatchLog(h, tuple(queries), rewards), thetas[1], thetas[2]


def run_repeated(
    game: Game,
    alg1: OnlineAlgorithm,
    alg2: OnlineAlgorithm,
    k: int,
    seeds: Sequence[int],
    record_thetas: bool = True,
) -> list[RepeatedGameRecord]:
    """Per seed: fresh seed-derived initial states, then k matches with both
    algorithm states threaded across matches."""
    if k < 1:
        raise ValueError("k must be at least 1")
    records = []
    for seed in seeds:
        theta1 = alg1.initial_state(np.random.default_rng((int(seed), 1)))
        theta2 = alg2.initial_state(np.random.default_rng((int(seed), 2)))
        rng = np.random.default_rng((int(seed), 0))
        matches: list[MatchLog] = []
        snaps: tuple[list, list] = ([], [])
        for _ in range(k):
            log, theta1, theta2 = play_match(game, alg1, alg2, theta1, theta2, rng)
            matches.append(log)
            if record_thetas:
                snaps[0].append(theta1)
                snaps[1].append(theta2)
        records.append(RepeatedGameRecord(game.name, int(seed), matches, snaps))
    return records


@dataclass(frozen=True)
class _EnvState:
    match_idx: int
    history: History
    theta_key: object
    theta: Theta = field(compare=False, hash=False)


def response_game_brv(
    game: Game, alg: OnlineAlgorithm, k: int, budget: int = DEFAULT_RESPONSE_BUDGET
) -> float:
    """Exact best-response value of the adversary over k matches against
    ``alg`` (the adversary's expected total utility under optimal play).

    The algorithm's mixed decisions and chance become environment moves;
    the adversary retains memory across matches, observing its own
    action-observation sequence and each match's reward.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    support = alg.initial_state_support()
    if support is None:
        raise NondeterminismError(
            "algorithm's initial-state distribution is not enumerable; "
            "use the Monte Carlo adversary-value estimate instead"
        )
    adv = opponent(alg.player)
    root = root_history(game)
    nodes = 0
    memo: dict[object, float] = {}

    def value(frontier: list[tuple[_EnvState, float]]) -> float:
        nonlocal nodes
        total_w = sum(w for _, w in frontier)
        if total_w <= 0.0:
            return 0.0
        sig = (
            frozenset(
                (s.match_idx, s.history, s.theta_key, w / total_w) for s, w in frontier
            ),
        )
        cached = memo.get(sig)
        if cached is not None:
            return total_w * cached
        world = frontier[0][0].history.last_world
        adv_actions = game.legal_actions(world, adv)
        for state, _ in frontier:
            if game.legal_actions(state.history.last_world, adv) != adv_actions:
                raise ValueError("adversary's action set differs within one infoset")
        if len(adv_actions) >= 2:
            best = max(step(frontier, a) for a in adv_actions)
        else:
            best = step(frontier, adv_actions[0])
        memo[sig] = best / total_w
        return best

    def step(frontier: list[tuple[_EnvState, float]], adv_action) -> float:
        nonlocal nodes
        immediate = 0.0
        groups: dict[object, list[tuple[_EnvState, float]]] = {}
        for state, w in frontier:
            h = state.history
            world = h.last_world
            alg_actions = game.legal_actions(world, alg.player)
            if len(alg_actions) >= 2:
                probs, theta_next = alg.act(info_state_of(game, h, alg.player), state.theta)
                branches = [
                    (alg_actions[i], float(probs[i]), theta_next)
                    for i in range(len(alg_actions))
                    if probs[i] > 0.0
                ]
            else:
                branches = [(alg_actions[0], 1.0, state.theta)]
            for action, p_alg, theta_next in branches:
                joint = (adv_action, action) if adv == 1 else (action, adv_action)
                r_step = game.reward(world, joint, adv)
                for next_world, p_chance in game.transition(world, joint):
                    if p_chance == 0.0:
                        continue
                    nodes += 1
                    if nodes > budget:
                        raise BudgetExceededError(
                            f"response game exceeded the {budget}-node budget"
                        )
                    weight = w * p_alg * p_chance
                    child = h.extend(joint, next_world)
                    immediate += weight * r_step
                    if game.is_terminal(next_world):
                        if state.match_idx + 1 == k:
                            continue
                        next_state = _EnvState(
                            state.match_idx + 1, root, alg.state_key(theta_next), theta_next
                        )
                        gkey = (
                            "end",
                            info_state_of(game, child, adv).key,
                            terminal_utility(game, child, adv),
                        )
                    else:
                        next_state = _EnvState(
                            state.match_idx, child, alg.state_key(theta_next), theta_next
                        )
                        gkey = ("mid", info_state_of(game, child, adv).key)
                    groups.setdefault(gkey, []).append((next_state, weight))
        return immediate + sum(value(g) for g in groups.values())

    frontier = [
        (_EnvState(0, root, alg.state_key(theta0), theta0), prob) for theta0, prob in support
    ]
    return value(frontier)


@dataclass
class SoundnessReport:
    """Bounded-horizon certificate from exact response-game values.

    The soundness definition quantifies over every horizon k' >= k; a
    finite report probes only k' <= k_max, so certification here means
    "within the probed range".
    """

    k_values: list[int]
    brv_values: list[float]
    epsilon: float
    certified: list[bool]
    epsilon_certified: list[float]
    bounded_horizon: bool = True

    def certified_at(self, k: int) -> bool:
        return self.certified[self.k_values.index(k)]


def certify_soundness(
    game: Game,
    alg: OnlineAlgorithm,
    k_max: int,
    epsilon: float,
    tolerance: float = 1e-9,
    budget: int = DEFAULT_RESPONSE_BUDGET,
) -> SoundnessReport:
    """Exact brv(G^k) for k = 1..k_max and the induced (k, epsilon) checks."""
    ks = list(range(1, k_max + 1))
    brvs = [response_game_brv(game, alg, k, budget=budget) for k in ks]
    certified = [
        all(brvs[j] <= ks[j] * epsilon + tolerance for j in range(i, len(ks)))
        for i in range(len(ks))
    ]
    eps_cert = [max(brvs[j] / ks[j] for j in range(i, len(ks))) for i in range(len(ks))]
    return SoundnessReport(ks, brvs, epsilon, certified, eps_cert)


def estimate_adversary_value(
    game: Game,
    alg: OnlineAlgorithm,
    adversary: OnlineAlgorithm,
    k: int,
    seeds: Sequence[int],
) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of a fixed adversary's
    total reward over k matches: a sampled lower bound on brv(G^k), not an
    exact value."""
    if adversary.player == alg.player:
        raise ValueError("adversary must play the opposite side")
    algs = {alg.player: alg, adversary.player: adversary}
    records = run_repeated(game, algs[1], algs[2], k, seeds, record_thetas=False)
    totals = [
        sum(m.rewards[adversary.player - 1] for m in r.matches) for r in records
    ]
    mean = float(np.mean(totals))
    sem = float(np.std(totals, ddof=1) / np.sqrt(len(totals))) if len(totals) > 1 else 0.0
    return mean, sem
