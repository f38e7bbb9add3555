"""Slow, independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np


def brute_knn(X, k, metric="euclidean"):
    """Neighbour lists by an explicit double loop, ranked by (distance, index)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    out = []
    for i in range(n):
        keyed = []
        for j in range(n):
            if j == i:
                continue
            if metric == "euclidean":
                dist = math.sqrt(sum((a - b) ** 2 for a, b in zip(X[i], X[j])))
            else:
                dot = sum(a * b for a, b in zip(X[i], X[j]))
                ni = math.sqrt(sum(a * a for a in X[i]))
                nj = math.sqrt(sum(b * b for b in X[j]))
                dist = 1.0 - dot / (ni * nj)
            keyed.append((dist, j))
        keyed.sort()
        out.append([j for _, j in keyed[:k]])
    return out


def dense_transition(neighbors, k):
    n = len(neighbors)
    W = np.zeros((n, n))
    for i, row in enumerate(neighbors):
        for j in row:
            W[i, j] += 1.0 / k
    return W


def dense_smoothing(W, lam, F0):
    """``lam (I - (1 - lam) W)^{-1} F0`` through a dense inverse."""
    n = W.shape[0]
    return lam * np.linalg.inv(np.eye(n) - (1.0 - lam) * W) @ F0


def random_neighbors(rng, n, k):
    """Arbitrary kNN-shaped graph: k distinct non-self indices per row."""
    rows = []
    for i in range(n):
        others = np.delete(np.arange(n), i)
        rows.append(np.sort(rng.choice(others, size=k, replace=False)))
    return np.array(rows)


def idealized_graph(k, K):
    """Graph realising the idealised cluster structure.

    Cluster ``j`` occupies rows ``j*(k+1) .. j*(k+1)+k``; the first is the
    informative point. Each member links to the other ``k - 1`` members and
    the informative point; the informative point links to itself and
    ``k - 1`` members. Returns ``(neighbors, informative_indices)``.
    """
    nb, informative = [], []
    for j in range(K):
        p = j * (k + 1)
        members = list(range(p + 1, p + k + 1))
        informative.append(p)
        nb.append(sorted([p] + members[: k - 1]))
        for a in members:
            nb.append(sorted([p] + [b for b in members if b != a]))
    return np.array(nb), informative


def brute_accuracy(counts):
    counts = np.asarray(counts)
    G, K = counts.shape
    size = max(G, K)
    sq = np.zeros((size, size), dtype=np.int64)
    sq[:G, :K] = counts
    best = max(sum(sq[r, c] for r, c in enumerate(p)) for p in itertools.permutations(range(size)))
    return best / counts.sum()


def pair_ari(truth, pred):
    """Adjusted Rand index by enumerating every pair of observations."""
    n = len(truth)
    both = same_t = same_p = 0
    for a, b in itertools.combinations(range(n), 2):
        t = truth[a] == truth[b]
        p = pred[a] == pred[b]
        same_t += t
        same_p += p
        both += t and p
    pairs = Fraction(n * (n - 1), 2)
    expected = Fraction(same_t * same_p) / pairs
    top = Fraction(same_t + same_p, 2)
    if top == expected:
        return 0.0
    return float((both - expected) / (top - expected))


def _mi(truth, pred):
    n = len(truth)
    joint = Counter(zip(truth, pred))
    a, b = Counter(truth), Counter(pred)
    return sum(c / n * math.log(n * c / (a[t] * b[p])) for (t, p), c in joint.items())


def _entropy(labels):
    n = len(labels)
    return -sum(c / n * math.log(c / n) for c in Counter(labels).values())


def exhaustive_ami(truth, pred):
    """AMI with E[MI] averaged over every distinct rearrangement of ``pred``.

    Only feasible for tiny inputs; independent of the hypergeometric sum.
    """
    arrangements = set(itertools.permutations(pred))
    emi = sum(_mi(truth, p) for p in arrangements) / len(arrangements)
    mi = _mi(truth, pred)
    norm = max(_entropy(truth), _entropy(pred))
    return (mi - emi) / (norm - emi)


def labels_from_table(counts):
    truth, pred = [], []
    for g, row in enumerate(np.asarray(counts)):
        for c, m in enumerate(row):
            truth += [g] * int(m)
            pred += [c] * int(m)
    return truth, pred


def two_blobs(seed=0, n_per=100, d=10, sep=10.0):
    """Unit-covariance blobs whose centres are ``sep`` apart along the
    diagonal direction ``(1, ..., 1) / sqrt(d)``."""
    rng = np.random.default_rng(seed)
    u = np.ones(d) / np.sqrt(d)
    X = np.vstack([
        rng.standard_normal((n_per, d)) - 0.5 * sep * u,
        rng.standard_normal((n_per, d)) + 0.5 * sep * u,
    ])
    y = np.repeat([0, 1], n_per)
    return X, y
