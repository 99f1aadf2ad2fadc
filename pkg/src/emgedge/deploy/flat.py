"""Flat little-endian forest format for firmware.

::

    offset  size  field
    0       4     magic b"EMRF"
    4       1     version (1)
    5       2     n_trees      u16
    7       1     n_classes    u8
    8       1     n_features   u8
    then for each tree:
            2     n_nodes      u16
            10 * n_nodes node records, preorder, node 0 is the root:
                  feature    i8   (-1 marks a leaf)
                  threshold  f32  (go left when x[feature] <= threshold)
                  left       u16
                  right      u16
                  leaf_class u8   (modal training class; 0 for split nodes)

Leaves store zero for threshold, left and right. Features are compared in
double precision against the widened float32 threshold.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..models.trees import Forest

MAGIC = b"EMRF"
VERSION = 1
HEADER = struct.Struct("<4sBHBB")
NODE_DTYPE = np.dtype([("feature", "<i1"), ("threshold", "<f4"), ("left", "<u2"),
                       ("right", "<u2"), ("leaf_class", "u1")])
MAX_NODES = 0xFFFF


class FlatFormatError(ValueError):
    pass


@dataclass(eq=False)
class FlatModel:
    n_classes: int
    n_features: int
    trees: list[np.ndarray]  # structured arrays of NODE_DTYPE

    kind = "flat-forest"

    @property
    def node_count(self) -> int:
        return sum(len(t) for t in self.trees)

    def to_bytes(self) -> bytes:
        out = [HEADER.pack(MAGIC, VERSION, len(self.trees), self.n_classes, self.n_features)]
        for t in self.trees:
            out.append(struct.pack("<H", len(t)))
            out.append(np.ascontiguousarray(t, dtype=NODE_DTYPE).tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FlatModel":
        if len(data) < HEADER.size:
            raise FlatFormatError("truncated model file: header")
        magic, version, n_trees, n_classes, n_features = HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise FlatFormatError(f"bad magic {magic!r}: not a flat forest file")
        if version != VERSION:
            raise FlatFormatError(f"unsupported flat format version {version}")
        pos = HEADER.size
        trees = []
        for b in range(n_trees):
            if pos + 2 > len(data):
                raise FlatFormatError(f"truncated model file: tree {b} node count")
            (n_nodes,) = struct.unpack_from("<H", data, pos)
            pos += 2
            size = n_nodes * NODE_DTYPE.itemsize
            if pos + size > len(data):
                raise FlatFormatError(f"truncated model file: tree {b} node table")
            nodes = np.frombuffer(data, dtype=NODE_DTYPE, count=n_nodes, offset=pos).copy()
            pos += size
            _validate_tree(nodes, b, n_classes, n_features)
            trees.append(nodes)
        if pos != len(data):
            raise FlatFormatError("trailing bytes after last tree")
        return cls(n_classes, n_features, trees)

    def predict_one(self, v) -> int:
        return flat_predict(self, v)

    def predict(self, X) -> np.ndarray:
        return flat_predict_batch(self, X)


def _validate_tree(nodes: np.ndarray, b: int, n_classes: int, n_features: int) -> None:
    n = len(nodes)
    if n == 0:
        raise FlatFormatError(f"tree {b} has no nodes")
    feat = nodes["feature"].astype(np.int64)
    split = feat >= 0
    if np.any(feat < -1) or np.any(feat >= n_features):
        raise FlatFormatError(f"tree {b}: feature index out of range")
    if np.any(nodes["leaf_class"][~split] >= n_classes):
        raise FlatFormatError(f"tree {b}: leaf class out of range")
    parents = np.zeros(n, dtype=np.int64)
    for i in np.flatnonzero(split):
        for child in (int(nodes["left"][i]), int(nodes["right"][i])):
            if not i < child < n:
                raise FlatFormatError(f"tree {b}: node {i} child index {child} out of range")
            parents[child] += 1
    if parents[0] != 0 or np.any(parents[1:] != 1):
        raise FlatFormatError(f"tree {b}: nodes do not form a single rooted tree")


def flatten(f: Forest) -> FlatModel:
    if len(f.trees) > MAX_NODES:
        raise ValueError("too many trees for the flat format")
    trees = []
    for b, t in enumerate(f.trees):
        if t.n_nodes > MAX_NODES:
            raise ValueError(f"tree {b} has {t.n_nodes} nodes; uint16 indexing allows {MAX_NODES}")
        nodes = np.zeros(t.n_nodes, dtype=NODE_DTYPE)
        split = t.feature >= 0
        nodes["feature"] = t.feature
        thr32 = t.threshold.astype(np.float32)
        if np.any(thr32[split].astype(np.float64) != t.threshold[split]):
            raise ValueError(f"tree {b}: threshold not representable as float32")
        nodes["threshold"] = np.where(split, thr32, 0)
        nodes["left"] = np.where(split, t.left, 0)
        nodes["right"] = np.where(split, t.right, 0)
        nodes["leaf_class"] = np.where(split, 0, t.leaf_class)
        trees.append(nodes)
    return FlatModel(f.n_classes, f.n_features, trees)


def flat_predict(fm: FlatModel, features4) -> int:
    x = [float(v) for v in features4]
    votes = [0] * fm.n_classes
    for t in fm.trees:
        feat = t["feature"]
        i = 0
        while feat[i] >= 0:
            i = int(t["left"][i]) if x[feat[i]] <= float(t["threshold"][i]) else int(t["right"][i])
        votes[int(t["leaf_class"][i])] += 1
    return max(range(fm.n_classes), key=lambda c: (votes[c], -c))


def flat_predict_batch(fm: FlatModel, X) -> np.ndarray:
    """Vectorized over rows of ``X``; same decision rule as :func:`flat_predict`."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    votes = np.zeros((len(X), fm.n_classes), dtype=np.int64)
    rows = np.arange(len(X))
    for t in fm.trees:
        feat = t["feature"].astype(np.int64)
        thr = t["threshold"].astype(np.float64)
        left = t["left"].astype(np.int64)
        right = t["right"].astype(np.int64)
        idx = np.zeros(len(X), dtype=np.int64)
        while True:
            f = feat[idx]
            active = f >= 0
            if not active.any():
                break
            go_left = X[rows, np.maximum(f, 0)] <= thr[idx]
            idx = np.where(active, np.where(go_left, left[idx], right[idx]), idx)
        np.add.at(votes, (rows, t["leaf_class"][idx].astype(np.int64)), 1)
    return np.argmax(votes, axis=1)
