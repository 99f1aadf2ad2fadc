"""Tagged-section binary container for trained models.

Layout (all integers little-endian)::

    b"EMGM"  u8 version  u8 len + ascii kind  u16 n_sections
    per section:
        u8 len + ascii name
        u8 type   'f' float64 array | 'i' int64 array | 'b' raw bytes
        u8 ndim   u32 * ndim shape
        payload   little-endian, C order

Nested models (ensemble members, the classifier inside pca-logreg) are
stored as 'b' sections holding a complete container.
"""
from __future__ import annotations

import struct

import numpy as np

from ..features import Standardizer
from ._base import MODEL_REGISTRY
from .boosting import GbtConfig, GbtModel, RegTree
from .ensemble import EnsembleModel
from .heuristics import ThresholdModel, VarianceModel
from .knn import KnnModel
from .linear import LogRegModel, PcaLogRegModel, PcaModel
from .trees import Forest, ForestConfig, Tree

MAGIC = b"EMGM"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def encode_sections(kind: str, sections: dict) -> bytes:
    out = [MAGIC, struct.pack("<B", VERSION), _short_str(kind), struct.pack("<H", len(sections))]
    for name, value in sections.items():
        out.append(_short_str(name))
        if isinstance(value, (bytes, bytearray)):
            out.append(struct.pack("<BBI", ord("b"), 1, len(value)))
            out.append(bytes(value))
            continue
        arr = np.asarray(value)
        if arr.dtype.kind in "iub":
            code, arr = "i", arr.astype("<i8")
        elif arr.dtype.kind == "f":
            code, arr = "f", arr.astype("<f8")
        else:
            raise TypeError(f"section {name!r}: unsupported dtype {arr.dtype}")
        out.append(struct.pack("<BB", ord(code), arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(out)


def decode_sections(data: bytes) -> tuple[str, dict]:
    view = memoryview(data)
    pos = 0

    def take(n: int, what: str):
        nonlocal pos
        if pos + n > len(view):
            raise ModelFormatError(f"truncated model file in {what}")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4, "header")) != MAGIC:
        raise ModelFormatError("bad magic: not a model container")
    (version,) = struct.unpack("<B", take(1, "header"))
    if version != VERSION:
        raise ModelFormatError(f"unsupported container version {version}")
    (klen,) = struct.unpack("<B", take(1, "header"))
    kind = bytes(take(klen, "header")).decode("ascii")
    (count,) = struct.unpack("<H", take(2, "header"))
    sections = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<B", take(1, "section name"))
        name = bytes(take(nlen, "section name")).decode("ascii")
        code, ndim = struct.unpack("<BB", take(2, f"section {name!r}"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, f"section {name!r}"))
        if chr(code) == "b":
            sections[name] = bytes(take(shape[0], f"section {name!r}"))
            continue
        if chr(code) not in "fi":
            raise ModelFormatError(f"section {name!r}: unknown type code {code}")
        dtype = np.dtype("<f8" if chr(code) == "f" else "<i8")
        size = int(np.prod(shape, dtype=np.int64)) * 8
        arr = np.frombuffer(bytes(take(size, f"section {name!r}")), dtype=dtype).reshape(shape)
        sections[name] = arr.astype(np.float64 if chr(code) == "f" else np.int64)
    if pos != len(view):
        raise ModelFormatError("trailing bytes after last section")
    return kind, sections


def _short_str(s: str) -> bytes:
    b = s.encode("ascii")
    if len(b) > 255:
        raise ValueError("name too long")
    return struct.pack("<B", len(b)) + b


def _std_sections(std: Standardizer | None, prefix: str = "std_") -> dict:
    if std is None:
        return {}
    return {prefix + "mean": std.mean, prefix + "scale": std.scale}


def _std_from(s: dict, prefix: str = "std_") -> Standardizer | None:
    if prefix + "mean" not in s:
        return None
    return Standardizer(s[prefix + "mean"], s[prefix + "scale"])


def _opt(v) -> int:
    return -1 if v is None else int(v)


def _unopt(v) -> int | None:
    v = int(v)
    return None if v < 0 else v


def _concat_trees(trees, fields) -> dict:
    out = {"sizes": np.array([len(t.feature) for t in trees], dtype=np.int64)}
    for f in fields:
        out[f] = np.concatenate([getattr(t, f) for t in trees]) if trees else np.zeros(0)
    return out


def _split_trees(s: dict, fields, cls):
    bounds = np.concatenate([[0], np.cumsum(s["sizes"])]).astype(np.int64)
    trees = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        parts = {f: s[f][a:b] for f in fields}
        trees.append(cls(**parts))
    return trees


_TREE_FIELDS = ("feature", "threshold", "left", "right", "counts")
_REG_FIELDS = ("feature", "threshold", "left", "right", "value")


def to_sections(m) -> dict:
    if isinstance(m, (ThresholdModel, VarianceModel)):
        return {"threshold": np.array([m.threshold])}
    if isinstance(m, LogRegModel):
        return {"W": m.W, "b": m.b, "n_iter": np.array([m.n_iter_run]), **_std_sections(m.standardizer)}
    if isinstance(m, KnnModel):
        return {"k": np.array([m.k]), "X": m.X, "y": m.y, **_std_sections(m.standardizer)}
    if isinstance(m, PcaLogRegModel):
        p = m.pca
        return {"mean": p.mean, "components": p.components, "explained_variance": p.explained_variance,
                "ratio": p.explained_variance_ratio, **_std_sections(p.standardizer),
                "logreg": save_model(m.logreg)}
    if isinstance(m, Forest):
        c = m.config
        cfg = np.array([c.n_trees, c.seed, _opt(c.max_depth), c.min_samples_split, _opt(c.max_features),
                        m.n_classes, m.n_features])
        return {"config": cfg, **_concat_trees(m.trees, _TREE_FIELDS)}
    if isinstance(m, GbtModel):
        c = m.config
        flat = [t for rnd in m.trees for t in rnd]
        return {"config": np.array([c.n_rounds, c.learning_rate, c.reg_lambda, c.gamma, c.max_depth],
                                   dtype=np.float64),
                "base_score": m.base_score, "train_loss": np.array(m.train_loss, dtype=np.float64),
                **_concat_trees(flat, _REG_FIELDS)}
    if isinstance(m, EnsembleModel):
        if any(a is not None for a in m.adapters):
            raise ValueError("ensembles with feature adapters cannot be serialized")
        out = {"weights": m.weights}
        for i, member in enumerate(m.members):
            out[f"member{i}"] = save_model(member)
        return out
    raise TypeError(f"cannot serialize {type(m).__name__}")


def from_sections(kind: str, s: dict):
    if kind == "threshold":
        return ThresholdModel(float(s["threshold"][0]))
    if kind == "variance":
        return VarianceModel(float(s["threshold"][0]))
    if kind == "logreg":
        return LogRegModel(s["W"], s["b"], _std_from(s), int(s["n_iter"][0]))
    if kind == "knn":
        return KnnModel(int(s["k"][0]), s["X"], s["y"], _std_from(s))
    if kind == "pca-logreg":
        pca = PcaModel(_std_from(s), s["mean"], s["components"], s["explained_variance"], s["ratio"])
        return PcaLogRegModel(pca, load_model(s["logreg"]))
    if kind == "forest":
        n_trees, seed, depth, mss, mf, n_classes, n_features = (int(v) for v in s["config"])
        s = dict(s)
        s["counts"] = s["counts"].reshape(-1, n_classes)
        trees = _split_trees(s, _TREE_FIELDS, Tree)
        cfg = ForestConfig(n_trees, seed, _unopt(depth), mss, _unopt(mf))
        return Forest(trees, n_classes, n_features, cfg)
    if kind == "gbt":
        n_rounds, lr, lam, gamma, depth = s["config"]
        cfg = GbtConfig(int(n_rounds), float(lr), float(lam), float(gamma), int(depth))
        flat = _split_trees(s, _REG_FIELDS, RegTree)
        k = len(s["base_score"])
        rounds = [flat[i:i + k] for i in range(0, len(flat), k)]
        return GbtModel(rounds, s["base_score"], cfg, list(s["train_loss"]))
    if kind == "ensemble":
        members = [load_model(s[f"member{i}"]) for i in range(len(s["weights"]))]
        return EnsembleModel(members, s["weights"])
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(m) -> bytes:
    return encode_sections(m.kind, to_sections(m))


def load_model(data: bytes):
    kind, sections = decode_sections(data)
    if kind not in MODEL_REGISTRY:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    return from_sections(kind, sections)
