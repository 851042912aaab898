"""Pure-Python versions of the compiled kernels in ``_core.pyx``.

Both modules expose the same two functions with the same argument and return
conventions; ``hinforge.kernels`` picks one at import time.
"""

from collections import deque

import numpy as np


def count_walks(steps, starts):
    """Count typed walks from each start node.

    ``steps`` is a list of CSR triples ``(indptr, indices, weights)``, one per
    hop, each already restricted to the hop's edge type and destination node
    type. A walk may not pass back through its own start node before the last
    hop, and walks ending on the start node are dropped.

    Returns ``(rows, cols, counts)`` as int64 arrays ordered by (row, col).
    """
    rows, cols, vals = [], [], []
    last = len(steps) - 1
    for s in starts:
        s = int(s)
        frontier = {s: 1}
        for t, (indptr, indices, weights) in enumerate(steps):
            nxt = {}
            for u, c in frontier.items():
                for k in range(indptr[u], indptr[u + 1]):
                    v = int(indices[k])
                    nxt[v] = nxt.get(v, 0) + c * int(weights[k])
            if t < last:
                nxt.pop(s, None)
            frontier = nxt
            if not frontier:
                break
        frontier.pop(s, None)
        for v in sorted(frontier):
            rows.append(s)
            cols.append(v)
            vals.append(frontier[v])
    return (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64),
            np.asarray(vals, dtype=np.int64))


def shortest_path_scores(indptr, indices, n):
    """Brandes betweenness (raw, undirected) and harmonic distance sums.

    Returns ``(betweenness, harmonic)`` float64 arrays of length ``n``;
    betweenness counts each unordered pair once.
    """
    bc = np.zeros(n, dtype=np.float64)
    harm = np.zeros(n, dtype=np.float64)
    for s in range(n):
        stack = []
        preds = [[] for _ in range(n)]
        sigma = [0.0] * n
        dist = [-1] * n
        sigma[s] = 1.0
        dist[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            stack.append(v)
            for k in range(indptr[v], indptr[v + 1]):
                w = int(indices[k])
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    q.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        h = 0.0
        for v in stack[1:]:
            h += 1.0 / dist[v]
        harm[s] = h
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc / 2.0, harm
