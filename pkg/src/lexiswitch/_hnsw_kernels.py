"""Compiled inner loops for the HNSW graph.

Graph layout: ``nbrs[layer, node, :cnt[layer, node]]`` are the neighbor ids
of ``node`` on ``layer``. Distances are ``1 - dot`` on unit vectors.
Heap entries carry the node id as a second key, so equal distances always
resolve the same way.
"""

from __future__ import annotations

import heapq

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _dist(data, a, q):
    s = 0.0
    for k in range(data.shape[1]):
        s += data[a, k] * q[k]
    return 1.0 - s


@njit(cache=True)
def search_layer(data, q, eps, ef, nbrs, cnt, layer, visited, tag):
    """Beam search on one layer; returns (ids, dists) sorted by distance."""
    cand = [(0.0, np.int64(0))]
    cand.pop()
    best = [(0.0, np.int64(0))]  # max-heap via negated keys
    best.pop()
    for ep in eps:
        if visited[ep] == tag:
            continue
        visited[ep] = tag
        d = _dist(data, ep, q)
        heapq.heappush(cand, (d, np.int64(ep)))
        heapq.heappush(best, (-d, -np.int64(ep)))
        if len(best) > ef:
            heapq.heappop(best)
    while len(cand) > 0:
        d, c = heapq.heappop(cand)
        worst = -best[0][0]
        if d > worst and len(best) >= ef:
            break
        for j in range(cnt[layer, c]):
            e = nbrs[layer, c, j]
            if visited[e] == tag:
                continue
            visited[e] = tag
            de = _dist(data, e, q)
            worst = -best[0][0]
            if len(best) < ef or de < worst:
                heapq.heappush(cand, (de, np.int64(e)))
                heapq.heappush(best, (-de, -np.int64(e)))
                if len(best) > ef:
                    heapq.heappop(best)
    n = len(best)
    ids = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        nd, nid = heapq.heappop(best)
        ids[i] = -nid
        dists[i] = -nd
    return ids, dists


@njit(cache=True)
def select_neighbors(data, ids, dists, m):
    """Diversity heuristic: keep a candidate only if it is closer to the
    query than to every neighbor already kept."""
    out = np.empty(min(m, len(ids)), dtype=np.int64)
    n_out = 0
    for i in range(len(ids)):
        if n_out >= m:
            break
        c = ids[i]
        keep = True
        for s in range(n_out):
            if _dist(data, c, data[out[s]]) < dists[i]:
                keep = False
                break
        if keep:
            out[n_out] = c
            n_out += 1
    return out[:n_out]


@njit(cache=True)
def _shrink(data, nbrs, cnt, layer, node, extra, cap):
    """Add ``extra`` to a full neighbor list and re-prune it to ``cap``."""
    k = cnt[layer, node]
    ids = np.empty(k + 1, dtype=np.int64)
    dists = np.empty(k + 1, dtype=np.float64)
    q = data[node]
    for j in range(k):
        ids[j] = nbrs[layer, node, j]
        dists[j] = _dist(data, ids[j], q)
    ids[k] = extra
    dists[k] = _dist(data, extra, q)
    order = np.argsort(dists, kind="mergesort")
    ids = ids[order]
    dists = dists[order]
    keep = select_neighbors(data, ids, dists, cap)
    for j in range(len(keep)):
        nbrs[layer, node, j] = keep[j]
    cnt[layer, node] = len(keep)


@njit(cache=True)
def build_graph(data, levels, m, ef_construction):
    """Insert nodes 0..n-1 in order. Returns (nbrs, cnt, entry, max_level)."""
    n = data.shape[0]
    top = 0
    for i in range(n):
        if levels[i] > top:
            top = levels[i]
    cap0 = 2 * m
    nbrs = np.full((top + 1, n, cap0), -1, dtype=np.int32)
    cnt = np.zeros((top + 1, n), dtype=np.int32)
    visited = np.zeros(n, dtype=np.int64)
    tag = 0
    entry = 0
    max_level = levels[0]
    for i in range(1, n):
        q = data[i]
        eps = np.array([entry], dtype=np.int64)
        lvl = levels[i]
        for layer in range(max_level, lvl, -1):
            tag += 1
            ids, _ = search_layer(data, q, eps, 1, nbrs, cnt, layer, visited, tag)
            eps = ids[:1]
        for layer in range(min(lvl, max_level), -1, -1):
            tag += 1
            ids, dists = search_layer(data, q, eps, ef_construction, nbrs, cnt, layer, visited, tag)
            chosen = select_neighbors(data, ids, dists, m)
            cap = cap0 if layer == 0 else m
            for j in range(len(chosen)):
                nbrs[layer, i, j] = chosen[j]
            cnt[layer, i] = len(chosen)
            for j in range(len(chosen)):
                s = chosen[j]
                if cnt[layer, s] < cap:
                    nbrs[layer, s, cnt[layer, s]] = i
                    cnt[layer, s] += 1
                else:
                    _shrink(data, nbrs, cnt, layer, s, i, cap)
            eps = ids
        if lvl > max_level:
            max_level = lvl
            entry = i
    return nbrs, cnt, entry, max_level


@njit(cache=True)
def search(data, q, entry, max_level, ef, nbrs, cnt):
    """Greedy descent to layer 0, then a beam of width ``ef`` there."""
    visited = np.zeros(data.shape[0], dtype=np.int64)
    eps = np.array([entry], dtype=np.int64)
    tag = 0
    for layer in range(max_level, 0, -1):
        tag += 1
        ids, _ = search_layer(data, q, eps, 1, nbrs, cnt, layer, visited, tag)
        eps = ids[:1]
    tag += 1
    ids, dists = search_layer(data, q, eps, ef, nbrs, cnt, 0, visited, tag)
    return ids, dists
