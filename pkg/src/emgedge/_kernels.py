"""Compiled tree-walking loops for low-latency forest inference."""
import numpy as np
from numba import njit


@njit(cache=True)
def forest_votes(x, feature, threshold, left, right, leaf_class, roots, n_classes):
    votes = np.zeros(n_classes, np.int64)
    for r in roots:
        i = r
        while feature[i] >= 0:
            if x[feature[i]] <= threshold[i]:
                i = left[i]
            else:
                i = right[i]
        votes[leaf_class[i]] += 1
    return votes


@njit(cache=True)
def forest_vote_one(x, feature, threshold, left, right, leaf_class, roots, n_classes):
    votes = forest_votes(x, feature, threshold, left, right, leaf_class, roots, n_classes)
    best = 0
    for c in range(1, n_classes):
        if votes[c] > votes[best]:
            best = c
    return best


@njit(cache=True)
def forest_vote_batch(X, feature, threshold, left, right, leaf_class, roots, n_classes):
    out = np.empty(X.shape[0], np.int64)
    for n in range(X.shape[0]):
        out[n] = forest_vote_one(X[n], feature, threshold, left, right, leaf_class, roots, n_classes)
    return out


@njit(cache=True)
def forest_proba_batch(X, feature, threshold, left, right, leaf_dist, roots):
    n_classes = leaf_dist.shape[1]
    out = np.zeros((X.shape[0], n_classes))
    for n in range(X.shape[0]):
        for r in roots:
            i = r
            while feature[i] >= 0:
                if X[n, feature[i]] <= threshold[i]:
                    i = left[i]
                else:
                    i = right[i]
            for c in range(n_classes):
                out[n, c] += leaf_dist[i, c]
        for c in range(n_classes):
            out[n, c] /= len(roots)
    return out
