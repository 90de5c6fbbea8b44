"""Numba kernels for the regret solvers.

Everything here operates on the flat arrays of a CompiledTree.  Sampling
uses an explicit splitmix64 stream so runs are bit-reproducible from a
(master seed, stream index) pair on any platform.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._compile import KIND_CHANCE, KIND_DECISION, KIND_TERMINAL

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1
_INV_2_53 = 1.0 / 9007199254740992.0

ERR_NONE = 0
ERR_UNDERFLOW = 1


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _rand_u01(state):
    state[0] += _GOLDEN
    return float(_mix64(state[0]) >> np.uint64(11)) * _INV_2_53


def stream_state(master_seed: int, index: int = 0) -> np.ndarray:
    """Initial splitmix64 state for stream ``index`` of ``master_seed``."""
    mixed = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _U64_MASK
    z = mixed
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64_MASK
    z = z ^ (z >> 31)
    return np.array([z], dtype=np.uint64)


def derive_seed(master_seed: int, index: int) -> int:
    """A 64-bit seed for sweep member ``index`` under ``master_seed``."""
    return int(stream_state(master_seed, index)[0])


@njit(cache=True, inline="always")
def _regret_matching_into(regrets, off, n, out):
    total = 0.0
    for i in range(n):
        r = regrets[off + i]
        v = r if r > 0.0 else 0.0
        out[i] = v
        total += v
    if total > 0.0:
        for i in range(n):
            out[i] /= total
    else:
        u = 1.0 / n
        for i in range(n):
            out[i] = u


@njit(cache=True)
def mix_with_uniform(policy, exploration):
    """Sampling distribution: exploration * uniform + (1 - exploration) * policy."""
    n = policy.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = exploration / n + (1.0 - exploration) * policy[i]
    return out


@njit(cache=True)
def cfr_iterations(
    kind,
    player,
    infoset,
    first_child,
    num_children,
    child,
    child_prob,
    util1,
    iset_offset,
    iset_n_actions,
    regrets,
    strat_sum,
    visits,
    n_iterations,
    cum_util,
):
    """Vanilla CFR with simultaneous updates; mutates the table arrays."""
    n_nodes = kind.shape[0]
    n_isets = iset_offset.shape[0]
    total_slots = regrets.shape[0]
    pol = np.empty(total_slots)
    reach1 = np.empty(n_nodes)
    reach2 = np.empty(n_nodes)
    reachc = np.empty(n_nodes)
    val = np.empty(n_nodes)

    for _ in range(n_iterations):
        for iid in range(n_isets):
            _regret_matching_into(regrets, iset_offset[iid], iset_n_actions[iid], pol[iset_offset[iid]:])
        reach1[0] = 1.0
        reach2[0] = 1.0
        reachc[0] = 1.0
        for v in range(n_nodes):
            k = kind[v]
            if k == KIND_TERMINAL:
                continue
            fc = first_child[v]
            nc = num_children[v]
            if k == KIND_DECISION:
                off = iset_offset[infoset[v]]
                for a in range(nc):
                    c = child[fc + a]
                    p = pol[off + a]
                    if player[v] == 1:
                        reach1[c] = reach1[v] * p
                        reach2[c] = reach2[v]
                    else:
                        reach1[c] = reach1[v]
                        reach2[c] = reach2[v] * p
                    reachc[c] = reachc[v]
            else:
                for a in range(nc):
                    c = child[fc + a]
                    reach1[c] = reach1[v]
                    reach2[c] = reach2[v]
                    reachc[c] = reachc[v] * child_prob[fc + a]
        for v in range(n_nodes - 1, -1, -1):
            k = kind[v]
            if k == KIND_TERMINAL:
                val[v] = util1[v]
                continue
            fc = first_child[v]
            nc = num_children[v]
            acc = 0.0
            if k == KIND_DECISION:
                off = iset_offset[infoset[v]]
                for a in range(nc):
                    acc += pol[off + a] * val[child[fc + a]]
            else:
                for a in range(nc):
                    acc += child_prob[fc + a] * val[child[fc + a]]
            val[v] = acc
        for v in range(n_nodes):
            if kind[v] != KIND_DECISION:
                continue
            iid = infoset[v]
            off = iset_offset[iid]
            fc = first_child[v]
            nc = num_children[v]
            if player[v] == 1:
                cf_reach = reach2[v] * reachc[v]
                own_reach = reach1[v]
                sign = 1.0
            else:
                cf_reach = reach1[v] * reachc[v]
                own_reach = reach2[v]
                sign = -1.0
            base = sign * val[v]
            for a in range(nc):
                regrets[off + a] += cf_reach * (sign * val[child[fc + a]] - base)
                strat_sum[off + a] += own_reach * pol[off + a]
            visits[iid] += 1
        cum_util[0] += val[0]
        cum_util[1] -= val[0]


@njit(cache=True)
def mccfr_iterations(
    kind,
    player,
    infoset,
    first_child,
    num_children,
    child,
    child_prob,
    util1,
    iset_offset,
    iset_n_actions,
    regrets,
    strat_sum,
    visits,
    start_iteration,
    n_iterations,
    exploration,
    p_unbiased,
    weight_floor,
    use_bias,
    is_target,
    reaches_target,
    rng_state,
    checkpoints,
    snapshots,
    max_depth,
    max_children,
):
    """Outcome-sampling MCCFR with optional trajectory targeting.

    One sampled episode per iteration; the updated player alternates with
    the global iteration parity.  Biased episodes steer sampling through
    choices from which a target infoset stays reachable; all estimators
    divide by the episode mixture probability so they stay unbiased.
    """
    pol_buf = np.empty(max_children)
    dist_unb = np.empty(max_children)
    dist_tar = np.empty(max_children)
    up_iid = np.empty(max_depth + 2, dtype=np.int64)
    up_choice = np.empty(max_depth + 2, dtype=np.int64)
    up_sigma = np.empty(max_depth + 2)
    cp_idx = 0
    n_checkpoints = checkpoints.shape[0]
    while cp_idx < n_checkpoints and checkpoints[cp_idx] <= start_iteration:
        cp_idx += 1

    for it in range(n_iterations):
        global_iter = start_iteration + it + 1
        update_player = 1 if (global_iter & 1) == 1 else 2
        targeted_episode = False
        if use_bias:
            targeted_episode = _rand_u01(rng_state) >= p_unbiased

        v = 0
        q_unb = 1.0
        q_tar = 1.0
        reach_pol1 = 1.0
        reach_pol2 = 1.0
        reach_c = 1.0
        hit = not use_bias
        n_up = 0
        terminal_u1 = 0.0

        while True:
            k = kind[v]
            if k == KIND_TERMINAL:
                terminal_u1 = util1[v]
                break
            fc = first_child[v]
            nc = num_children[v]
            if k == KIND_DECISION and is_target[v]:
                hit = True
            is_update_node = False
            if k == KIND_CHANCE:
                for a in range(nc):
                    dist_unb[a] = child_prob[fc + a]
            else:
                iid = infoset[v]
                off = iset_offset[iid]
                _regret_matching_into(regrets, off, nc, pol_buf)
                if player[v] == update_player:
                    is_update_node = True
                    for a in range(nc):
                        dist_unb[a] = exploration / nc + (1.0 - exploration) * pol_buf[a]
                else:
                    # opponent of the updated player: on-policy sampling and
                    # importance-corrected average-strategy accumulation
                    q_pre = p_unbiased * q_unb + (1.0 - p_unbiased) * q_tar
                    own_pre = reach_pol1 if player[v] == 1 else reach_pol2
                    w_avg = own_pre / q_pre
                    for a in range(nc):
                        dist_unb[a] = pol_buf[a]
                        strat_sum[off + a] += w_avg * pol_buf[a]

            if hit:
                for a in range(nc):
                    dist_tar[a] = dist_unb[a]
            else:
                mass = 0.0
                n_allowed = 0
                for a in range(nc):
                    if reaches_target[child[fc + a]]:
                        dist_tar[a] = dist_unb[a]
                        mass += dist_unb[a]
                        n_allowed += 1
                    else:
                        dist_tar[a] = 0.0
                if n_allowed == 0:
                    for a in range(nc):
                        dist_tar[a] = dist_unb[a]
                elif mass > 0.0:
                    for a in range(nc):
                        dist_tar[a] /= mass
                else:
                    for a in range(nc):
                        if reaches_target[child[fc + a]]:
                            dist_tar[a] = 1.0 / n_allowed
                        else:
                            dist_tar[a] = 0.0

            u = _rand_u01(rng_state)
            chosen = nc - 1
            cum = 0.0
            for a in range(nc):
                cum += dist_tar[a] if targeted_episode else dist_unb[a]
                if u < cum:
                    chosen = a
                    break
            q_unb *= dist_unb[chosen]
            q_tar *= dist_tar[chosen]

            if k == KIND_CHANCE:
                reach_c *= child_prob[fc + chosen]
            else:
                sigma = pol_buf[chosen]
                if player[v] == 1:
                    reach_pol1 *= sigma
                else:
                    reach_pol2 *= sigma
                if is_update_node:
                    up_iid[n_up] = infoset[v]
                    up_choice[n_up] = chosen
                    up_sigma[n_up] = sigma
                    n_up += 1
            v = child[fc + chosen]

        q_total = p_unbiased * q_unb + (1.0 - p_unbiased) * q_tar
        if q_total < weight_floor:
            return ERR_UNDERFLOW
        if update_player == 1:
            u_i = terminal_u1
            cf_reach = reach_pol2 * reach_c
        else:
            u_i = -terminal_u1
            cf_reach = reach_pol1 * reach_c
        w_terminal = u_i * cf_reach / q_total

        tail = 1.0
        for d in range(n_up - 1, -1, -1):
            iid = up_iid[d]
            off = iset_offset[iid]
            n = iset_n_actions[iid]
            a_s = up_choice[d]
            sigma = up_sigma[d]
            positive = w_terminal * tail * (1.0 - sigma)
            negative = -w_terminal * tail * sigma
            for a in range(n):
                if a == a_s:
                    regrets[off + a] += positive
                else:
                    regrets[off + a] += negative
            visits[iid] += 1
            tail *= sigma

        if cp_idx < n_checkpoints and global_iter == checkpoints[cp_idx]:
            for s in range(strat_sum.shape[0]):
                snapshots[cp_idx, s] = strat_sum[s]
            cp_idx += 1
    return ERR_NONE
