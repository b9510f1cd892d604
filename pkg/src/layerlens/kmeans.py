"""k-means baseline: Lloyd's algorithm with k-means++ seeding.

Cluster assignments play the role of layer states: cluster sizes become a
StateHistogram that feeds the same entropy analysis as the trained layers.
Hand-rolled (rather than delegated) so that seeding, tie-breaking, and the
per-iteration inertia trace are exactly deterministic.
"""

import dataclasses

import numpy as np

from .rra import StateHistogram
from .seeding import rng_for


@dataclasses.dataclass(frozen=True)
class Clustering:
    assignment: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: tuple
    n_iterations: int


def _squared_distances(x, centroids):
    # ||x||^2 - 2 x.c + ||c||^2, clipped: the expansion can go slightly negative
    d2 = (
        (x**2).sum(axis=1)[:, None]
        - 2.0 * (x @ centroids.T)
        + (centroids**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _plus_plus_seeds(x, k, rng):
    m = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(m)
    d2 = _squared_distances(x, x[chosen[:1]])[:, 0]
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # remaining points coincide with chosen centroids
            chosen[i] = rng.integers(m)
        else:
            chosen[i] = rng.choice(m, p=d2 / total)
        d2 = np.minimum(d2, _squared_distances(x, x[chosen[i : i + 1]])[:, 0])
    return x[chosen].copy()


def _lloyd(x, centroids, max_iters):
    assignment = None
    history = []
    iterations = 0
    for _ in range(max_iters):
        d2 = _squared_distances(x, centroids)
        new_assignment = d2.argmin(axis=1)
        history.append(float(d2[np.arange(x.shape[0]), new_assignment].sum()))
        iterations += 1
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(centroids.shape[0]):
            members = assignment == j
            if members.any():
                centroids[j] = x[members].mean(axis=0)
            # empty clusters keep their centroid
    return assignment, centroids, history, iterations


def kmeans(dataset_or_samples, k, max_iters=100, n_restarts=3, seed=0):
    """Best-of-restarts Lloyd clustering with squared-Euclidean distance.

    Deterministic given the seed: restarts use derived streams and ties in
    both assignment and restart selection break toward the lowest index.
    """
    x = getattr(dataset_or_samples, "samples", dataset_or_samples)
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in 1..{m}, got {k}")
    best = None
    for restart in range(n_restarts):
        rng = rng_for(seed, "kmeans", restart)
        centroids = _plus_plus_seeds(x, k, rng)
        assignment, centroids, history, iterations = _lloyd(x, centroids, max_iters)
        result = Clustering(
            assignment=assignment,
            centroids=centroids,
            inertia=history[-1],
            inertia_history=tuple(history),
            n_iterations=iterations,
        )
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def clustering_histogram(clustering):
    """Cluster sizes as a state histogram; empty clusters contribute nothing."""
    sizes = np.bincount(clustering.assignment, minlength=clustering.centroids.shape[0])
    return StateHistogram({int(j): int(s) for j, s in enumerate(sizes) if s > 0})
