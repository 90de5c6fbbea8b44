"""Exact best response, exploitability and game-value certification.

Best response walks the responder's information-set tree directly on the
game's histories, so it is exact up to float arithmetic and serves as the
independent oracle against which the iterative solvers are checked.
Game values come from a CFR certificate; a sequence-form LP is available
as a cross-check oracle only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import MissingStrategyError, NonConvergenceError, SoundlabError
from .fosg_core import (
    BehavioralStrategy,
    Game,
    History,
    PlayerId,
    Profile,
    _own_path,
    enumerate_terminals,
    info_state_of,
    infoset_index,
    is_complete,
    opponent,
    pure_strategy,
    reach_probabilities,
    root_history,
    terminal_utility,
)


@dataclass(frozen=True)
class BestResponseResult:
    """A pure maximizing strategy and its expected value."""

    strategy: BehavioralStrategy
    value: float


def best_response(
    game: Game, opponent_strategy: BehavioralStrategy, player: PlayerId
) -> BestResponseResult:
    """Exact best response of ``player`` to a fixed opponent strategy.

    The walk groups histories by the responder's information state; the
    value of an infoset is the max over actions of the reach-weighted sum
    of successor values, with ties broken toward the lowest action index.
    """
    opp = opponent(player)
    choices: dict[bytes, int] = {}

    def walk(frontier: list[tuple[History, float]]) -> float:
        world0 = frontier[0][0].last_world
        my_actions = game.legal_actions(world0, player)
        values = []
        for a in my_actions:
            total = 0.0
            groups: dict[bytes, list[tuple[History, float]]] = {}
            for h, weight in frontier:
                world = h.last_world
                opp_actions = game.legal_actions(world, opp)
                if len(opp_actions) >= 2:
                    opp_probs = opponent_strategy.probs(info_state_of(game, h, opp).key)
                else:
                    opp_probs = (1.0,)
                for bi, b in enumerate(opp_actions):
                    p_opp = float(opp_probs[bi])
                    if p_opp == 0.0:
                        continue
                    joint = (a, b) if player == 1 else (b, a)
                    for next_world, p_chance in game.transition(world, joint):
                        if p_chance == 0.0:
                            continue
                        child = h.extend(joint, next_world)
                        w = weight * p_opp * p_chance
                        if game.is_terminal(next_world):
                            total += w * terminal_utility(game, child, player)
                        else:
                            key = info_state_of(game, child, player).key
                            groups.setdefault(key, []).append((child, w))
            for sub in groups.values():
                total += walk(sub)
            values.append(total)
        best_idx = 0
        for i in range(1, len(values)):
            if values[i] > values[best_idx]:
                best_idx = i
        if len(my_actions) >= 2:
            choices[info_state_of(game, frontier[0][0], player).key] = best_idx
        return values[best_idx]

    root = root_history(game)
    if game.is_terminal(root.last_world):
        return BestResponseResult(BehavioralStrategy(), terminal_utility(game, root, player))
    value = walk([(root, 1.0)])
    # infosets never reached against this opponent get the deterministic default
    strategy = pure_strategy(game, player, 0)
    for key, idx in choices.items():
        vec = np.zeros(len(infoset_index(game, player)[key].actions))
        vec[idx] = 1.0
        strategy.set_probs(key, vec)
    return BestResponseResult(strategy, value)


def brv(game: Game, opponent_strategy: BehavioralStrategy, player: PlayerId) -> float:
    """Best response value of ``player`` against ``opponent_strategy``."""
    return best_response(game, opponent_strategy, player).value


def nash_conv(game: Game, profile: Profile) -> float:
    """Sum of both players' best-response values; zero exactly at equilibria."""
    return brv(game, profile[1], 1) + brv(game, profile[0], 2)


@dataclass(frozen=True)
class GameValueCertificate:
    """A CFR-certified game value with an explicit residual."""

    value: float
    profile: Profile
    residual: float
    iterations: int


@lru_cache(maxsize=None)
def game_value(
    game: Game, tolerance: float = 1e-3, max_iterations: int = 2**21
) -> GameValueCertificate:
    """Game value for player 1, certified by running CFR until both average
    strategies are within ``tolerance`` of unexploitable."""
    from .solvers import run_cfr  # local import: solvers must not depend on us

    table = None
    total = 0
    chunk = 64
    while total < max_iterations:
        result = run_cfr(game, chunk, table=table)
        table = result.table
        total += chunk
        chunk = total
        s1, s2 = result.average_strategies
        lo = -brv(game, s1, 2)  # value player 1 can guarantee with s1
        hi = brv(game, s2, 1)  # most player 1 can get against s2
        if (hi - lo) / 2.0 <= tolerance:
            value = (lo + hi) / 2.0
            return GameValueCertificate(value, (s1, s2), (hi - lo) / 2.0, total)
    raise NonConvergenceError(
        f"{game.name}: CFR certificate did not reach tolerance {tolerance} "
        f"within {max_iterations} iterations"
    )


def _value_for(game: Game) -> float:
    if game.known_value is not None:
        return game.known_value
    return game_value(game).value


def exploitability(
    game: Game,
    strategy: BehavioralStrategy,
    player: PlayerId,
    value: float | None = None,
    tolerance: float = 1e-9,
) -> float:
    """Gap between the game value and the strategy's worst-case expected
    utility; clamped to 0 when within ``tolerance`` below it."""
    v1 = _value_for(game) if value is None else value
    u_star = v1 if player == 1 else -v1
    gap = u_star + brv(game, strategy, opponent(player))
    if gap < 0.0:
        if gap < -tolerance:
            raise SoundlabError(
                f"negative exploitability {gap}: inconsistent game value for {game.name}"
            )
        return 0.0
    return gap


def is_epsilon_equilibrium_member(
    game: Game,
    strategy: BehavioralStrategy,
    epsilon: float,
    player: PlayerId | None = None,
    tolerance: float = 1e-9,
) -> bool:
    """True iff the strategy's exploitability is at most epsilon (+tolerance)."""
    if player is None:
        player = infer_player(game, strategy)
    return exploitability(game, strategy, player) <= epsilon + tolerance


def infer_player(game: Game, strategy: BehavioralStrategy) -> PlayerId:
    owners = [p for p in (1, 2) if is_complete(game, strategy, p)]
    if len(owners) != 1:
        raise ValueError("cannot infer the strategy's player; pass it explicitly")
    return owners[0]


def sequence_form_value(game: Game) -> float:
    """Game value via the sequence-form linear program (cross-check oracle).

    Kept independent of the CFR stack on purpose; not a primary path.
    """
    from scipy.optimize import linprog

    seq_ids: dict[PlayerId, dict[tuple[bytes, int] | None, int]] = {}
    flows = {}
    for p in (1, 2):
        index = infoset_index(game, p)
        ids: dict[tuple[bytes, int] | None, int] = {None: 0}
        for key, rec in index.items():
            for ai in range(len(rec.actions)):
                ids[(key, ai)] = len(ids)
        seq_ids[p] = ids
        # rows: root constraint plus one flow row per infoset
        mat = np.zeros((1 + len(index), len(ids)))
        rhs = np.zeros(1 + len(index))
        mat[0, 0] = 1.0
        rhs[0] = 1.0
        for row, (key, rec) in enumerate(index.items(), start=1):
            parent = rec.own_path[-1] if rec.own_path else None
            mat[row, ids[parent]] = -1.0
            for ai in range(len(rec.actions)):
                mat[row, ids[(key, ai)]] = 1.0
        flows[p] = (mat, rhs)

    payoff = np.zeros((len(seq_ids[1]), len(seq_ids[2])))
    for z in enumerate_terminals(game):
        chance = reach_probabilities(
            game, (pure_strategy(game, 1, 0), pure_strategy(game, 2, 0)), z
        ).chance
        seqs = []
        for p in (1, 2):
            path = _own_path(game, z, p)
            seqs.append(seq_ids[p][path[-1] if path else None])
        payoff[seqs[0], seqs[1]] += chance * terminal_utility(game, z, 1)

    e_mat, e_rhs = flows[1]
    f_mat, f_rhs = flows[2]
    n_x, n_q = payoff.shape[0], f_mat.shape[0]
    # max f^T q  s.t.  F^T q - A^T x <= 0,  E x = e,  x >= 0
    c = np.concatenate([np.zeros(n_x), -f_rhs])
    a_ub = np.hstack([-payoff.T, f_mat.T])
    b_ub = np.zeros(payoff.shape[1])
    a_eq = np.hstack([e_mat, np.zeros((e_mat.shape[0], n_q))])
    bounds = [(0, None)] * n_x + [(None, None)] * n_q
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=e_rhs, bounds=bounds, method="highs")
    if not res.success:
        raise SoundlabError(f"sequence-form LP failed: {res.message}")
    return -float(res.fun)


def assert_profile_complete(game: Game, profile: Profile) -> None:
    for p, strategy in ((1, profile[0]), (2, profile[1])):
        if not is_complete(game, strategy, p):
            raise MissingStrategyError(f"profile incomplete for player {p}")
