"""Numba kernels for the event-driven simulation and jump-log replay.

RNG: xoshiro256** with per-replica streams.  The splitting function is
pinned: the four state words are the first four outputs of a splitmix64
stream whose initial state is

    seed XOR (0x9E3779B97F4A7C15 * (replica_id + 1))  (mod 2^64).

Event selection uses a binary indexed (Fenwick) sum tree whose leaf x
carries the combined rate of bond x (right jump x -> x+1 plus left jump
x+1 -> x); the residual mass left over by the tree descent is uniform on
the leaf and picks the direction, so each event costs exactly two raw
uniforms.  A jump changes two adjacent sites, hence at most 6 directed
(3 combined) rates are refreshed per event.  The tree is rebuilt
periodically to shed float accumulation drift; the cadence is fixed, so
trajectories remain bit-reproducible.
"""

import numpy as np
from numba import njit

U64_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

REBUILD_EVERY = 1 << 20

__all__ = [
    "xoshiro_init",
    "xoshiro_next",
    "uniform_open_closed",
    "uniform_half_open",
    "draw_uniforms",
    "fenwick_build",
    "fenwick_update",
    "fenwick_find",
    "kmc_run",
    "replay_qv",
]


def _splitmix64_py(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & U64_MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & U64_MASK
    z = z ^ (z >> 31)
    return state, z


def xoshiro_init(seed: int, replica_id: int) -> np.ndarray:
    """Per-replica xoshiro256** state from (seed, replica_id)."""
    s = (int(seed) ^ ((_GOLDEN * (int(replica_id) + 1)) & U64_MASK)) & U64_MASK
    words = np.empty(4, dtype=np.uint64)
    for i in range(4):
        s, out = _splitmix64_py(s)
        words[i] = out
    if not words.any():
        words[0] = 1  # xoshiro state must not be all zero
    return words


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, inline="always")
def xoshiro_next(st):
    result = _rotl(st[0] * np.uint64(5), 7) * np.uint64(9)
    t = st[1] << np.uint64(17)
    st[2] ^= st[0]
    st[3] ^= st[1]
    st[1] ^= st[2]
    st[0] ^= st[3]
    st[2] ^= t
    st[3] = _rotl(st[3], 45)
    return result


@njit(cache=True, inline="always")
def uniform_open_closed(st):
    """Uniform double in (0, 1]; safe under log()."""
    return ((xoshiro_next(st) >> np.uint64(11)) + np.uint64(1)) * (0.5**53)


@njit(cache=True, inline="always")
def uniform_half_open(st):
    """Uniform double in [0, 1)."""
    return (xoshiro_next(st) >> np.uint64(11)) * (0.5**53)


@njit(cache=True)
def draw_uniforms(st, count):
    out = np.empty(count)
    for i in range(count):
        out[i] = uniform_half_open(st)
    return out


# -- Fenwick tree (1-based internal array, tree[0] unused) --------------------


@njit(cache=True)
def fenwick_build(leaves):
    nb = leaves.shape[0]
    tree = np.zeros(nb + 1)
    for i in range(1, nb + 1):
        tree[i] += leaves[i - 1]
        j = i + (i & (-i))
        if j <= nb:
            tree[j] += tree[i]
    return tree


@njit(cache=True, inline="always")
def fenwick_update(tree, nb, index, delta):
    j = index + 1
    while j <= nb:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True, inline="always")
def fenwick_find(tree, nb, highbit, target):
    """Largest 0-based leaf whose strict prefix sum is <= target, along
    with the mass left over inside that leaf."""
    i = 0
    mask = highbit
    while mask:
        ni = i + mask
        if ni <= nb and tree[ni] <= target:
            target -= tree[ni]
            i = ni
        mask >>= 1
    if i >= nb:
        i = nb - 1
    return i, target


@njit(cache=True, inline="always")
def _highbit(nb):
    h = 1
    while (h << 1) <= nb:
        h <<= 1
    return h


@njit(cache=True, inline="always")
def _refresh_bond(sites, right_of, rate_r, rate_l, ratesum, tree, nb, x):
    """Recompute bond x's combined rate from the current occupancies."""
    a = sites[x]
    b = sites[right_of[x]]
    new = rate_r[a, b] + rate_l[b, a]
    delta = new - ratesum[x]
    if delta != 0.0:
        ratesum[x] = new
        fenwick_update(tree, nb, x, delta)
    return delta


@njit(cache=True, nogil=True)
def kmc_run(
    sites,
    rate_r,
    rate_l,
    t0,
    t_end,
    obs_times,
    frames,
    rng,
    log_jumps,
    max_events,
):
    """Exact event loop from t0 to t_end.

    ``sites`` is advanced in place; ``frames[k]`` receives the configuration
    in force at obs_times[k].  Returns (t, n_events, frozen, jump_times,
    jump_bonds, jump_dirs); the jump arrays are empty unless log_jumps.
    dir 0 is a right jump across the bond, dir 1 a left jump.
    """
    N = sites.shape[0]
    right_of = np.empty(N, dtype=np.int64)
    for x in range(N):
        right_of[x] = (x + 1) % N
    ratesum = np.empty(N)
    for x in range(N):
        a = sites[x]
        b = sites[right_of[x]]
        ratesum[x] = rate_r[a, b] + rate_l[b, a]
    tree = fenwick_build(ratesum)
    highbit = _highbit(N)
    total = ratesum.sum()

    n_obs = obs_times.shape[0]
    obs_idx = 0
    cap = 1024 if log_jumps else 0
    jump_t = np.empty(cap)
    jump_b = np.empty(cap, dtype=np.int32)
    jump_d = np.empty(cap, dtype=np.int8)
    events = 0
    frozen = False
    t = t0

    while True:
        if max_events >= 0 and events >= max_events:
            break
        if total <= 0.0:
            frozen = True
            for k in range(obs_idx, n_obs):
                frames[k, :] = sites
            obs_idx = n_obs
            break
        dt = -np.log(uniform_open_closed(rng)) / total
        t_next = t + dt
        while obs_idx < n_obs and obs_times[obs_idx] < t_next:
            frames[obs_idx, :] = sites
            obs_idx += 1
        if t_next > t_end:
            t = t_end
            break
        bond, residual = fenwick_find(tree, N, highbit, uniform_half_open(rng) * total)
        nxt = right_of[bond]
        rr = rate_r[sites[bond], sites[nxt]]
        rl = rate_l[sites[nxt], sites[bond]]
        if rr + rl <= 0.0:
            # float drift steered the search into a dead leaf: resync and redraw
            tree = fenwick_build(ratesum)
            total = ratesum.sum()
            continue
        if residual < rr or rl == 0.0:
            direction = 0
            sites[bond] -= 1
            sites[nxt] += 1
        else:
            direction = 1
            sites[nxt] -= 1
            sites[bond] += 1
        t = t_next
        if log_jumps:
            if events >= cap:
                cap *= 2
                nt = np.empty(cap)
                nt[:events] = jump_t
                jump_t = nt
                nbonds = np.empty(cap, dtype=np.int32)
                nbonds[:events] = jump_b
                jump_b = nbonds
                nd = np.empty(cap, dtype=np.int8)
                nd[:events] = jump_d
                jump_d = nd
            jump_t[events] = t_next
            jump_b[events] = bond
            jump_d[events] = direction
        events += 1
        prev = bond - 1 if bond > 0 else N - 1
        total += _refresh_bond(sites, right_of, rate_r, rate_l, ratesum, tree, N, prev)
        total += _refresh_bond(sites, right_of, rate_r, rate_l, ratesum, tree, N, bond)
        total += _refresh_bond(sites, right_of, rate_r, rate_l, ratesum, tree, N, nxt)
        if events % REBUILD_EVERY == 0:
            tree = fenwick_build(ratesum)
            total = ratesum.sum()

    return t, events, frozen, jump_t[:events], jump_b[:events], jump_d[:events]


@njit(cache=True, nogil=True)
def replay_qv(sites, jump_t, jump_b, jump_d, rate_r, rate_l, weights, t0, out_times):
    """Exact time integral of sum_x (rate_r + rate_l at bond x) * weights[x].

    The integrand is piecewise constant between jumps; ``out`` holds the
    integral from t0 up to each requested time.  ``sites`` is consumed
    (advanced through the whole log).
    """
    N = sites.shape[0]
    bondsum = np.empty(N)
    acc = 0.0
    for x in range(N):
        a = sites[x]
        b = sites[(x + 1) % N]
        bondsum[x] = rate_r[a, b] + rate_l[b, a]
        acc += bondsum[x] * weights[x]
    n_out = out_times.shape[0]
    out = np.empty(n_out)
    oi = 0
    t = t0
    integral = 0.0
    for j in range(jump_t.shape[0]):
        t_next = jump_t[j]
        while oi < n_out and out_times[oi] < t_next:
            out[oi] = integral + acc * (out_times[oi] - t)
            oi += 1
        integral += acc * (t_next - t)
        t = t_next
        bond = jump_b[j]
        if jump_d[j] == 1:
            src = (bond + 1) % N
            dst = bond
        else:
            src = bond
            dst = (bond + 1) % N
        sites[src] -= 1
        sites[dst] += 1
        for k in range(-1, 2):
            x = (bond + k) % N
            a = sites[x]
            b = sites[(x + 1) % N]
            ns = rate_r[a, b] + rate_l[b, a]
            acc += (ns - bondsum[x]) * weights[x]
            bondsum[x] = ns
    while oi < n_out:
        out[oi] = integral + acc * (out_times[oi] - t)
        oi += 1
    return out
