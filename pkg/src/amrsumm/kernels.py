"""Numeric inner loops.

Every function here is written in the numba-compatible subset of Python and
only touches numpy arrays and scalars, so the same body runs compiled or
interpreted (see :mod:`amrsumm._jit`).
"""
import numpy as np

from ._jit import jit


@jit
def lcs_length(a, b):
    """Length of the longest common subsequence of two int64 arrays."""
    n = a.shape[0]
    m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        for j in range(m + 1):
            prev[j] = cur[j]
            cur[j] = 0
    return prev[m]


@jit
def kmeans_assign(points, centers, labels):
    """Assign each row of ``points`` to its nearest center; return inertia."""
    n, d = points.shape
    k = centers.shape[0]
    inertia = 0.0
    for i in range(n):
        best = np.inf
        best_c = 0
        for c in range(k):
            dist = 0.0
            for t in range(d):
                diff = points[i, t] - centers[c, t]
                dist += diff * diff
            if dist < best:
                best = dist
                best_c = c
        labels[i] = best_c
        inertia += best
    return inertia


# ---------------------------------------------------------------- smatch


@jit
def smatch_match_count(mapping, unary, rel_a, rel_b):
    """Matched triples under ``mapping`` (index into graph b, or -1)."""
    total = 0
    for i in range(mapping.shape[0]):
        j = mapping[i]
        if j >= 0:
            total += unary[i, j]
    for t in range(rel_a.shape[0]):
        j = mapping[rel_a[t, 1]]
        k = mapping[rel_a[t, 2]]
        if j >= 0 and k >= 0:
            total += rel_b[rel_a[t, 0], j, k]
    return total


@jit
def _apply_pair(mapping, trial, i, j, k, l):
    # trial := mapping with i->j and k->l; variables displaced from j or l become unmapped
    for x in range(mapping.shape[0]):
        y = mapping[x]
        if x != i and x != k and (y == j or y == l):
            trial[x] = -1
        else:
            trial[x] = y
    trial[i] = j
    trial[k] = l


@jit
def smatch_hill_climb(mapping, unary, rel_a, rel_b, rel_b_list):
    """Steepest ascent over reassign, swap and relation-pair moves.

    A relation-pair move maps both ends of a relation in the first graph onto
    both ends of a same-label relation in the second, which escapes plateaus
    where neither single reassignment gains anything.  ``mapping`` is updated
    in place; the matched count is returned.
    """
    n1 = unary.shape[0]
    n2 = unary.shape[1]
    used = np.zeros(n2, dtype=np.bool_)
    trial = mapping.copy()
    for i in range(n1):
        if mapping[i] >= 0:
            used[mapping[i]] = True
    cur = smatch_match_count(mapping, unary, rel_a, rel_b)
    while True:
        best_gain = 0
        move_kind = 0
        move_i = -1
        move_j = -1
        move_p = -1
        for i in range(n1):
            old = mapping[i]
            for j in range(-1, n2):
                if j == old or (j >= 0 and used[j]):
                    continue
                mapping[i] = j
                gain = smatch_match_count(mapping, unary, rel_a, rel_b) - cur
                mapping[i] = old
                if gain > best_gain:
                    best_gain = gain
                    move_kind = 1
                    move_i = i
                    move_j = j
        for i in range(n1):
            for k in range(i + 1, n1):
                if mapping[i] == mapping[k]:
                    continue
                mi = mapping[i]
                mapping[i] = mapping[k]
                mapping[k] = mi
                gain = smatch_match_count(mapping, unary, rel_a, rel_b) - cur
                mapping[k] = mapping[i]
                mapping[i] = mi
                if gain > best_gain:
                    best_gain = gain
                    move_kind = 2
                    move_i = i
                    move_j = k
        for p in range(rel_a.shape[0]):
            i = rel_a[p, 1]
            k = rel_a[p, 2]
            for q in range(rel_b_list.shape[0]):
                if rel_b_list[q, 0] != rel_a[p, 0]:
                    continue
                j = rel_b_list[q, 1]
                l = rel_b_list[q, 2]
                if (i == k) != (j == l) or (mapping[i] == j and mapping[k] == l):
                    continue
                _apply_pair(mapping, trial, i, j, k, l)
                gain = smatch_match_count(trial, unary, rel_a, rel_b) - cur
                if gain > best_gain:
                    best_gain = gain
                    move_kind = 3
                    move_p = p
                    move_j = q
        if best_gain <= 0:
            break
        if move_kind == 1:
            old = mapping[move_i]
            if old >= 0:
                used[old] = False
            mapping[move_i] = move_j
            if move_j >= 0:
                used[move_j] = True
        elif move_kind == 2:
            mi = mapping[move_i]
            mapping[move_i] = mapping[move_j]
            mapping[move_j] = mi
        else:
            _apply_pair(mapping, trial, rel_a[move_p, 1], rel_b_list[move_j, 1],
                        rel_a[move_p, 2], rel_b_list[move_j, 2])
            for x in range(n2):
                used[x] = False
            for x in range(n1):
                mapping[x] = trial[x]
                if trial[x] >= 0:
                    used[trial[x]] = True
        cur += best_gain
    return cur


# ---------------------------------------------------------------- decoding


@jit
def lex_smaller(mask_a, mask_b):
    """True if the sorted id list of ``mask_a`` precedes that of ``mask_b``."""
    n = mask_a.shape[0]
    for d in range(n):
        if mask_a[d] != mask_b[d]:
            if mask_a[d]:
                return True
            for x in range(d + 1, n):
                if mask_a[x]:
                    return False
            return True
    return False


@jit
def _lex_reachable(in_tree, cand, best):
    # Is there X with in_tree <= X <= in_tree | cand and X lexicographically below best?
    n = in_tree.shape[0]
    t_last = -1
    for x in range(n):
        if in_tree[x]:
            t_last = x
    for d in range(n):
        t = in_tree[d]
        b = best[d]
        if (t or cand[d]) and not b:
            return True
        if b and not t and t_last < d:
            return True
        if b and not (t or cand[d]):
            return False
    return False


@jit
def bnb_max_subtree(node_w, src, dst, edge_w, out_ptr, out_idx, in_ptr, in_idx,
                    budget, max_expansions, eps):
    """Exact maximum-weight arborescence rooted at node 0 with <= ``budget`` extra nodes.

    Branches include/exclude on frontier edges, so every rooted subtree is
    reached along exactly one branch.  The bound adds the ``budget - used``
    largest positive per-node gains (node weight plus best entering edge)
    over nodes still reachable within the remaining budget.  Ties within
    ``eps`` go to the lexicographically smallest sorted node-id list.

    Returns (best node mask, parent edge per node or -1, expansions, timed_out).
    """
    n = node_w.shape[0]
    m = src.shape[0]
    in_tree = np.zeros(n, dtype=np.bool_)
    parent = np.full(n, -1, dtype=np.int64)
    excluded = np.zeros(m, dtype=np.bool_)
    best_mask = np.zeros(n, dtype=np.bool_)
    best_parent = np.full(n, -1, dtype=np.int64)
    best_val = -np.inf

    dist = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    cand = np.zeros(n, dtype=np.bool_)
    gains = np.empty(n, dtype=np.float64)

    stack_edge = np.empty(m + 1, dtype=np.int64)
    stack_phase = np.empty(m + 1, dtype=np.int64)
    stack_val = np.empty(m + 1, dtype=np.float64)
    sp = 0

    in_tree[0] = True
    size = 0
    cur = 0.0
    expansions = 0
    timed_out = False
    entering = True

    while True:
        if entering:
            expansions += 1
            if expansions > max_expansions:
                timed_out = True
                break
            if cur > best_val + eps or (abs(cur - best_val) <= eps and lex_smaller(in_tree, best_mask)):
                best_val = cur
                for x in range(n):
                    best_mask[x] = in_tree[x]
                    best_parent[x] = parent[x]
            chosen = -1
            room = budget - size
            if room > 0:
                # nodes reachable from the tree within the remaining budget
                head = 0
                tail = 0
                for x in range(n):
                    cand[x] = False
                    if in_tree[x]:
                        dist[x] = 0
                        queue[tail] = x
                        tail += 1
                    else:
                        dist[x] = -1
                while head < tail:
                    u = queue[head]
                    head += 1
                    if dist[u] >= room:
                        continue
                    for p in range(out_ptr[u], out_ptr[u + 1]):
                        e = out_idx[p]
                        v = dst[e]
                        if excluded[e] or in_tree[v] or dist[v] >= 0:
                            continue
                        dist[v] = dist[u] + 1
                        cand[v] = True
                        queue[tail] = v
                        tail += 1
                n_pos = 0
                for v in range(n):
                    if not cand[v]:
                        continue
                    best_in = -np.inf
                    for p in range(in_ptr[v], in_ptr[v + 1]):
                        e = in_idx[p]
                        s = src[e]
                        if excluded[e] or s == v or dist[s] < 0:
                            continue
                        if edge_w[e] > best_in:
                            best_in = edge_w[e]
                    g = node_w[v] + best_in
                    if g > 0.0:
                        gains[n_pos] = g
                        n_pos += 1
                bound = cur
                if n_pos > 0:
                    top = np.sort(gains[:n_pos])
                    taken = 0
                    for q in range(n_pos - 1, -1, -1):
                        if taken == room:
                            break
                        bound += top[q]
                        taken += 1
                explore = False
                if bound > best_val + eps:
                    explore = True
                elif bound >= best_val - eps:
                    explore = _lex_reachable(in_tree, cand, best_mask)
                if explore:
                    best_gain = -np.inf
                    for e in range(m):
                        if excluded[e] or not in_tree[src[e]] or in_tree[dst[e]]:
                            continue
                        g = node_w[dst[e]] + edge_w[e]
                        if g > best_gain:
                            best_gain = g
                            chosen = e
            if chosen >= 0:
                stack_edge[sp] = chosen
                stack_phase[sp] = 0
                stack_val[sp] = cur
                sp += 1
                v = dst[chosen]
                in_tree[v] = True
                parent[v] = chosen
                size += 1
                cur = cur + node_w[v] + edge_w[chosen]
                entering = True
                continue
            entering = False
        if sp == 0:
            break
        top_e = stack_edge[sp - 1]
        if stack_phase[sp - 1] == 0:
            v = dst[top_e]
            in_tree[v] = False
            parent[v] = -1
            size -= 1
            cur = stack_val[sp - 1]
            excluded[top_e] = True
            stack_phase[sp - 1] = 1
            entering = True
        else:
            excluded[top_e] = False
            sp -= 1
    return best_mask, best_parent, expansions, timed_out
