"""Primal-dual shortest augmenting paths for the dense transportation problem.

Arc costs are ``max_k (A[i, k] - B[j, k])`` computed on the fly from the
vertex projections of sources and sinks. Potentials keep reduced costs
nonnegative. Each phase runs a full Dijkstra from the sources that still
hold supply, shifts the potentials by the distances, and then pushes a
maximum flow through the admissible subgraph (arcs of zero reduced cost)
with Dinic's algorithm. Every augmenting path used is therefore a shortest
one, as in plain successive shortest paths, but one Dijkstra serves many
augmentations.
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def _cost(A, B, i, j):
    best = -INF
    for k in range(A.shape[1]):
        v = A[i, k] - B[j, k]
        if v > best:
            best = v
    return best


@njit(cache=True)
def _block_refresh(dist, done, bmin, barg, b, bs):
    lo = b * bs
    hi = min(lo + bs, dist.shape[0])
    best = INF
    arg = -1
    for t in range(lo, hi):
        if not done[t] and dist[t] < best:
            best = dist[t]
            arg = t
    bmin[b] = best
    barg[b] = arg


@njit(cache=True)
def _block_argmin(bmin, barg):
    best = INF
    arg = -1
    for b in range(bmin.shape[0]):
        if bmin[b] < best:
            best = bmin[b]
            arg = barg[b]
    return arg, best


@njit(cache=True)
def _dijkstra(A, B, flow, excess, pot_src, pot_snk, eps, neg_tol, dist_src, dist_snk, stats):
    """Fill shortest distances from the supply pool; return False on a bad reduced cost."""
    m = A.shape[0]
    n = B.shape[0]
    done_src = np.zeros(m, dtype=np.bool_)
    done_snk = np.zeros(n, dtype=np.bool_)
    bs_src = max(1, int(np.sqrt(m)))
    bs_snk = max(1, int(np.sqrt(n)))
    bmin_src = np.empty((m + bs_src - 1) // bs_src)
    barg_src = np.empty(bmin_src.shape[0], dtype=np.int64)
    bmin_snk = np.empty((n + bs_snk - 1) // bs_snk)
    barg_snk = np.empty(bmin_snk.shape[0], dtype=np.int64)
    for i in range(m):
        dist_src[i] = 0.0 if excess[i] > eps else INF
    for j in range(n):
        dist_snk[j] = INF
    for b in range(bmin_src.shape[0]):
        _block_refresh(dist_src, done_src, bmin_src, barg_src, b, bs_src)
    for b in range(bmin_snk.shape[0]):
        _block_refresh(dist_snk, done_snk, bmin_snk, barg_snk, b, bs_snk)
    while True:
        bi, bd = _block_argmin(bmin_src, barg_src)
        bj, bdj = _block_argmin(bmin_snk, barg_snk)
        if bi < 0 and bj < 0:
            return True
        if bi >= 0 and bd <= bdj:
            stats[2] += 1
            done_src[bi] = True
            _block_refresh(dist_src, done_src, bmin_src, barg_src, bi // bs_src, bs_src)
            for j in range(n):
                if done_snk[j]:
                    continue
                rc = _cost(A, B, bi, j) + pot_src[bi] - pot_snk[j]
                if rc < 0.0:
                    if rc < -neg_tol:
                        return False
                    rc = 0.0
                nd = bd + rc
                if nd < dist_snk[j]:
                    dist_snk[j] = nd
                    b = j // bs_snk
                    if nd < bmin_snk[b]:
                        bmin_snk[b] = nd
                        barg_snk[b] = j
        else:
            done_snk[bj] = True
            _block_refresh(dist_snk, done_snk, bmin_snk, barg_snk, bj // bs_snk, bs_snk)
            for i in range(m):
                if done_src[i] or flow[i, bj] <= 0.0:
                    continue
                rc = -(_cost(A, B, i, bj) + pot_src[i] - pot_snk[bj])
                if rc < 0.0:
                    if rc < -neg_tol:
                        return False
                    rc = 0.0
                nd = bdj + rc
                if nd < dist_src[i]:
                    dist_src[i] = nd
                    b = i // bs_src
                    if nd < bmin_src[b]:
                        bmin_src[b] = nd
                        barg_src[b] = i


@njit(cache=True)
def _admissible(A, B, flow, pot_src, pot_snk, tol):
    """CSR lists (by source and by sink) of arcs with reduced cost <= tol or positive flow."""
    m = A.shape[0]
    n = B.shape[0]
    count_src = np.zeros(m + 1, dtype=np.int64)
    count_snk = np.zeros(n + 1, dtype=np.int64)
    cap = 4 * (m + n)
    ai = np.empty(cap, dtype=np.int64)
    aj = np.empty(cap, dtype=np.int64)
    k = 0
    for i in range(m):
        for j in range(n):
            if flow[i, j] > 0.0 or _cost(A, B, i, j) + pot_src[i] - pot_snk[j] <= tol:
                if k == cap:
                    cap *= 2
                    ai2 = np.empty(cap, dtype=np.int64)
                    aj2 = np.empty(cap, dtype=np.int64)
                    ai2[:k] = ai[:k]
                    aj2[:k] = aj[:k]
                    ai = ai2
                    aj = aj2
                ai[k] = i
                aj[k] = j
                count_src[i + 1] += 1
                count_snk[j + 1] += 1
                k += 1
    for i in range(m):
        count_src[i + 1] += count_src[i]
    for j in range(n):
        count_snk[j + 1] += count_snk[j]
    fwd = aj[:k].copy()  # arcs are already grouped by source
    bwd = np.empty(k, dtype=np.int64)
    fill = count_snk[:n].copy()
    for t in range(k):
        j = aj[t]
        bwd[fill[j]] = ai[t]
        fill[j] += 1
    return count_src, fwd, count_snk, bwd


@njit(cache=True)
def _blocking_flows(flow, excess, deficit, off_src, fwd, off_snk, bwd, eps, stats):
    """Dinic on the admissible subgraph. Nodes: sources 0..m-1, sinks m..m+n-1."""
    m = excess.shape[0]
    n = deficit.shape[0]
    level = np.empty(m + n, dtype=np.int64)
    queue = np.empty(m + n, dtype=np.int64)
    cur = np.empty(m + n, dtype=np.int64)
    path = np.empty(m + n + 1, dtype=np.int64)
    while True:
        for v in range(m + n):
            level[v] = -1
        head = 0
        tail = 0
        for i in range(m):
            if excess[i] > eps:
                level[i] = 0
                queue[tail] = i
                tail += 1
        goal = -1
        while head < tail:
            v = queue[head]
            head += 1
            if goal >= 0 and level[v] >= goal:
                break
            if v < m:
                for t in range(off_src[v], off_src[v + 1]):
                    w = m + fwd[t]
                    if level[w] < 0:
                        level[w] = level[v] + 1
                        queue[tail] = w
                        tail += 1
                        if deficit[w - m] > eps and goal < 0:
                            goal = level[w]
            else:
                j = v - m
                for t in range(off_snk[j], off_snk[j + 1]):
                    i = bwd[t]
                    if level[i] < 0 and flow[i, j] > eps:
                        level[i] = level[v] + 1
                        queue[tail] = i
                        tail += 1
        if goal < 0:
            return
        for i in range(m):
            cur[i] = off_src[i]
        for j in range(n):
            cur[m + j] = off_snk[j]
        for root in range(m):
            if level[root] != 0:
                continue
            while excess[root] > eps:
                # depth-first search along level-increasing arcs
                depth = 0
                path[0] = root
                found = False
                while depth >= 0:
                    v = path[depth]
                    if v >= m and deficit[v - m] > eps:
                        found = True
                        break
                    advanced = False
                    if v < m:
                        while cur[v] < off_src[v + 1]:
                            w = m + fwd[cur[v]]
                            if level[w] == level[v] + 1 and (level[w] < goal or deficit[w - m] > eps):
                                depth += 1
                                path[depth] = w
                                advanced = True
                                break
                            cur[v] += 1
                    else:
                        j = v - m
                        while cur[v] < off_snk[j + 1]:
                            w = bwd[cur[v]]
                            if level[w] == level[v] + 1 and flow[w, j] > eps:
                                depth += 1
                                path[depth] = w
                                advanced = True
                                break
                            cur[v] += 1
                    if not advanced:
                        level[v] = -1
                        depth -= 1
                        if depth >= 0:
                            cur[path[depth]] += 1
                if not found:
                    break
                delta = min(excess[root], deficit[path[depth] - m])
                for d in range(1, depth, 2):
                    # path[d] is a sink, path[d + 1] a source reached backwards
                    f = flow[path[d + 1], path[d] - m]
                    if f < delta:
                        delta = f
                stats[1] += 1
                for d in range(0, depth, 2):
                    flow[path[d], path[d + 1] - m] += delta
                for d in range(1, depth, 2):
                    i = path[d + 1]
                    j = path[d] - m
                    flow[i, j] -= delta
                    if flow[i, j] <= eps * 1e-3:
                        flow[i, j] = 0.0
                excess[root] -= delta
                if excess[root] <= eps:
                    excess[root] = 0.0
                t = path[depth] - m
                deficit[t] -= delta
                if deficit[t] <= eps:
                    deficit[t] = 0.0


@njit(cache=True)
def solve_dense(A, B, supply, demand, eps, neg_tol, stats):
    """Return ``(flow, pot_src, pot_snk, status)``.

    ``status`` is 0 on success, 1 when a reduced cost falls below
    ``-neg_tol`` and 2 when supply remains but no deficit is reachable.
    The reduced cost of arc i->j is ``c_ij + pot_src[i] - pot_snk[j]``.
    ``stats`` accumulates (phases, augmentations, source scans,
    admissible arcs).
    """
    m = A.shape[0]
    n = B.shape[0]
    flow = np.zeros((m, n))
    excess = supply.copy()
    deficit = demand.copy()
    pot_src = np.zeros(m)
    pot_snk = np.zeros(n)
    dist_src = np.empty(m)
    dist_snk = np.empty(n)
    scale = 0.0
    for i in range(m):
        for k in range(A.shape[1]):
            scale = max(scale, abs(A[i, k]))
    for j in range(n):
        for k in range(B.shape[1]):
            scale = max(scale, abs(B[j, k]))
    tol = 1e-12 * max(scale, 1.0)
    for j in range(n):
        best = INF
        for i in range(m):
            c = _cost(A, B, i, j)
            if c < best:
                best = c
        pot_snk[j] = best
    while True:
        left = 0.0
        for i in range(m):
            if excess[i] > eps:
                left += excess[i]
        if left <= 0.0:
            return flow, pot_src, pot_snk, 0
        stats[0] += 1
        if not _dijkstra(A, B, flow, excess, pot_src, pot_snk, eps, neg_tol, dist_src, dist_snk, stats):
            return flow, pot_src, pot_snk, 1
        D = 0.0
        reach = False
        for j in range(n):
            if deficit[j] > eps and dist_snk[j] < INF:
                reach = True
            if dist_snk[j] < INF and dist_snk[j] > D:
                D = dist_snk[j]
        for i in range(m):
            if dist_src[i] < INF and dist_src[i] > D:
                D = dist_src[i]
        if not reach:
            return flow, pot_src, pot_snk, 2
        for i in range(m):
            pot_src[i] += min(dist_src[i], D)
        for j in range(n):
            pot_snk[j] += min(dist_snk[j], D)
        off_src, fwd, off_snk, bwd = _admissible(A, B, flow, pot_src, pot_snk, tol)
        stats[3] += fwd.shape[0]
        _blocking_flows(flow, excess, deficit, off_src, fwd, off_snk, bwd, eps, stats)
