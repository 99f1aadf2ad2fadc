"""Compile a forest to branch-only C source, and read that source back.

The reader is a small parser for exactly the subset :func:`codegen` emits
(nested ``if (m[i] <= T) {...} else {...}`` and ``return c;``), used to
check that the emitted text decides like the trained forest.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from ..dataio import Class
from ..features import FEATURE_NAMES
from ..models.trees import Forest
from .flat import FlatModel, flatten

# documented footprint model: code bytes per compiled node
BRANCH_BYTES = 8
LEAF_BYTES = 2
VOTE_COUNTER_BYTES = 2
FEATURE_BYTES = 4


@dataclass(frozen=True)
class CodegenOutput:
    source_text: str
    node_count: int
    est_flash_bytes: int
    est_ram_bytes: int


def c_float(t: float) -> str:
    """Exact literal for a float32 value, e.g. ``50.5f``."""
    r = repr(float(np.float32(t)))
    if "e" not in r and "." not in r:
        r += ".0"
    return r + "f"


def estimate_flash(n_branches: int, n_leaves: int) -> int:
    return BRANCH_BYTES * n_branches + LEAF_BYTES * n_leaves


def _emit_node(nodes: np.ndarray, i: int, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    f = int(nodes["feature"][i])
    if f < 0:
        out.append(f"{pad}return {int(nodes['leaf_class'][i])};")
        return
    out.append(f"{pad}if (m[{f}] <= {c_float(nodes['threshold'][i])}) {{")
    _emit_node(nodes, int(nodes["left"][i]), depth + 1, out)
    out.append(f"{pad}}} else {{")
    _emit_node(nodes, int(nodes["right"][i]), depth + 1, out)
    out.append(f"{pad}}}")


def codegen(model: Forest | FlatModel, name: str = "forest_predict") -> CodegenOutput:
    fm = flatten(model) if isinstance(model, Forest) else model
    k, nf = fm.n_classes, fm.n_features
    feat_doc = ", ".join(f"m[{i}]={n.upper()}" for i, n in enumerate(FEATURE_NAMES[:nf]))
    class_doc = " ".join(f"{c.value}={c.name}" for c in Class)
    out = [
        f"/* Random forest: {len(fm.trees)} trees, {k} classes, {nf} features. */",
        f"/* Features: {feat_doc}. Classes: {class_doc}. */",
        "#include <stdint.h>",
        "",
    ]
    n_branches = n_leaves = 0
    for b, nodes in enumerate(fm.trees):
        split = int(np.count_nonzero(nodes["feature"] >= 0))
        n_branches += split
        n_leaves += len(nodes) - split
        out.append(f"static uint8_t tree_{b}(const float *m) {{")
        _emit_node(nodes, 0, 1, out)
        out.append("}")
        out.append("")
    out.append(f"uint8_t {name}(const float *m) {{")
    out.append(f"  uint16_t votes[{k}] = {{{', '.join(['0'] * k)}}};")
    for b in range(len(fm.trees)):
        out.append(f"  votes[tree_{b}(m)]++;")
    out.append("  uint8_t best = 0;")
    out.append(f"  for (uint8_t c = 1; c < {k}; c++) {{")
    out.append("    if (votes[c] > votes[best]) best = c;")
    out.append("  }")
    out.append("  return best;")
    out.append("}")
    text = "\n".join(out) + "\n"
    ram = VOTE_COUNTER_BYTES * k + FEATURE_BYTES * nf
    return CodegenOutput(text, n_branches + n_leaves, estimate_flash(n_branches, n_leaves), ram)


# ------------------------------------------------------------------ interpreter

_TOKEN = re.compile(r"\s*(?:(/\*.*?\*/)|(#[^\n]*)|([A-Za-z_]\w*)|"
                    r"((?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?f?)|(<=|>=|\+\+|[{}()\[\];,=<>*+-]))", re.S)


def tokenize(text: str) -> list[str]:
    toks, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SyntaxError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        if m.group(1) or m.group(2):
            continue
        toks.append(m.group(m.lastindex))
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def take(self, expect: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (expect is not None and tok != expect):
            raise SyntaxError(f"expected {expect!r}, got {tok!r} at token {self.i}")
        self.i += 1
        return tok

    def stmt(self):
        if self.peek() == "return":
            self.take()
            value = int(self.take())
            self.take(";")
            return ("leaf", value)
        self.take("if")
        self.take("(")
        self.take("m")
        self.take("[")
        feat = int(self.take())
        self.take("]")
        op = self.take()
        if op not in ("<=", "<", ">", ">="):
            raise SyntaxError(f"unsupported comparison {op!r}")
        sign = -1.0 if self.peek() == "-" else 1.0
        if sign < 0:
            self.take()
        thr = sign * float(self.take().rstrip("f"))
        self.take(")")
        then = self.block()
        self.take("else")
        other = self.block()
        return ("if", feat, op, thr, then, other)

    def block(self):
        self.take("{")
        node = self.stmt()
        self.take("}")
        return node

    def skip_balanced(self):
        depth = 0
        while True:
            tok = self.take()
            if tok == "{":
                depth += 1
            elif tok == "}":
                depth -= 1
                if depth == 0:
                    return self.i


_OPS = {"<=": np.less_equal, "<": np.less, ">": np.greater, ">=": np.greater_equal}


def _eval_batch(node, X, rows, out):
    if node[0] == "leaf":
        out[rows] = node[1]
        return
    _, feat, op, thr, then, other = node
    mask = _OPS[op](X[rows, feat], thr)
    if mask.any():
        _eval_batch(then, X, rows[mask], out)
    if not mask.all():
        _eval_batch(other, X, rows[~mask], out)


class DecisionSource:
    """Executable view of generated source: tree functions plus the vote."""

    def __init__(self, text: str, entry: str = "forest_predict"):
        p = _Parser(tokenize(text))
        self.trees: dict[str, tuple] = {}
        calls: list[str] = []
        self.n_classes = None
        self.strict_ties = True
        found_entry = False
        while p.peek() is not None:
            if p.peek() == "static":
                p.take()
            p.take()  # return type
            fname = p.take()
            while p.take() != ")":
                pass
            if fname == entry:
                start = p.i
                end = p.skip_balanced()
                body = p.toks[start:end]
                calls, self.n_classes, self.strict_ties = self._parse_vote(body)
                found_entry = True
            else:
                self.trees[fname] = p.block()
        if not found_entry:
            raise SyntaxError(f"entry function {entry!r} not found")
        missing = [c for c in calls if c not in self.trees]
        if missing:
            raise SyntaxError(f"vote references undefined functions {missing}")
        self.calls = calls

    @staticmethod
    def _parse_vote(body: list[str]):
        text = " ".join(body)
        k = re.search(r"votes \[ (\d+) \]", text)
        if not k:
            raise SyntaxError("vote counter declaration not found")
        calls = re.findall(r"votes \[ (\w+) \( m \) \] \+\+", text)
        cmp = re.search(r"votes \[ c \] (>=|>) votes \[ best \]", text)
        if not cmp:
            raise SyntaxError("argmax comparison not found")
        return calls, int(k.group(1)), cmp.group(1) == ">"

    def _argmax(self, votes: np.ndarray) -> np.ndarray:
        if self.strict_ties:
            return np.argmax(votes, axis=1)
        return votes.shape[1] - 1 - np.argmax(votes[:, ::-1], axis=1)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        votes = np.zeros((len(X), self.n_classes), dtype=np.int64)
        rows = np.arange(len(X))
        out = np.empty(len(X), dtype=np.int64)
        for name in self.calls:
            _eval_batch(self.trees[name], X, rows, out)
            np.add.at(votes, (rows, out), 1)
        return self._argmax(votes)

    def predict_one(self, v) -> int:
        return int(self.predict(v)[0])


def interpret(text: str, X) -> np.ndarray:
    return DecisionSource(text).predict(X)
