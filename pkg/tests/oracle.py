"""Direct-from-definition feature computations used as a test oracle.

Plain Python loops over node sets; deliberately shares no code with the
package beyond the input coordinates.
"""

import math
from collections import Counter
from itertools import combinations


def dist(p, q):
    return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2)


def neigh(pts, a, r):
    return {b for b in range(len(pts)) if b != a and dist(pts[a], pts[b]) < r}


def internode(pts, step):
    ds = [dist(pts[a], pts[b]) for a, b in combinations(range(len(pts)), 2)]
    q = Counter(math.floor(d / step + 0.5) for d in ds)
    best = max(q.values())
    mode = min(v for v, c in q.items() if c == best)
    mean = sum(ds) / len(ds)
    std = math.sqrt(sum((d - mean) ** 2 for d in ds) / (len(ds) - 1)) if len(ds) > 1 else 0.0
    return [min(ds), max(ds), max(ds) - min(ds), mode * step, best, mean, std]


def spatial(pts, D, d):
    side = D / d
    counts = Counter()
    for x, y in pts:
        cx = min(int(math.floor(x / side)), d - 1)
        cy = min(int(math.floor(y / side)), d - 1)
        counts[(cx, cy)] += 1
    ncs = [counts[(i, j)] for i in range(d) for j in range(d)]
    freq = Counter(ncs)
    best = max(freq.values())
    mode = min(v for v, c in freq.items() if c == best)
    return [min(ncs), max(ncs), max(ncs) - min(ncs), mode, best]


def density(pts, r):
    return sum(len(neigh(pts, a, r)) for a in range(len(pts))) / len(pts)


def shared(pts, r):
    n = len(pts)
    nb = [neigh(pts, a, r) for a in range(n)]
    total = sum(len(nb[a] & nb[b]) for a, b in combinations(range(n), 2))
    return total / (n * (n - 1) / 2)


def cc(pts, a, r):
    nb = sorted(neigh(pts, a, r))
    if not nb:
        return 0.0
    c = sum(1 for b, e in combinations(nb, 2) if 0 < dist(pts[b], pts[e]) < r)
    return c / len(nb)


def clustering(pts, r):
    return sum(cc(pts, a, r) for a in range(len(pts))) / len(pts)


def features(pts, D, radii, d=10, step=1.0):
    out = internode(pts, step) + spatial(pts, D, d)
    out += [density(pts, r) for r in radii]
    out += [shared(pts, r) for r in radii]
    out += [clustering(pts, r) for r in radii]
    return out
