"""Line-based text format for environments.

::

    env v=1 model=<name> d=<int> L=<int> seed=<u64> params=<k=v,...> root=<id>
    v <id> <c1> ... <cd>
    e <i> <j> <weight>     (reversible: undirected conductances, i < j)
    a <i> <j> <prob>       (general: directed transition probabilities)

Reals are printed with 17 significant digits, so doubles round-trip exactly.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .core import EnvMeta, RootedEnvironment, kernel_from_weights, validate, weights_from_edges

FORMAT_VERSION = 1


class EnvironmentFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _fmt(x: float) -> str:
    return "%.17g" % x


def _encode_param(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def _decode_param(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def format_params(params: dict) -> str:
    items = []
    for k in sorted(params):
        v = _encode_param(params[k])
        if any(c in v for c in ", =\n"):
            raise ValueError(f"parameter {k}={v!r} cannot be encoded")
        items.append(f"{k}={v}")
    return ",".join(items) if items else "-"


def parse_params(text: str) -> dict:
    if text == "-":
        return {}
    out = {}
    for item in text.split(","):
        k, sep, v = item.partition("=")
        if not sep:
            raise ValueError(f"bad parameter {item!r}")
        out[k] = _decode_param(v)
    return out


def dumps(env: RootedEnvironment) -> str:
    m = env.meta
    lines = [
        f"env v={FORMAT_VERSION} model={m.model} d={m.d} L={m.L} seed={m.seed} "
        f"params={format_params(m.params)} root={env.root}"
    ]
    if env.coords is not None:
        for i, row in enumerate(env.coords):
            lines.append("v " + " ".join(str(int(c)) for c in (i, *row)))
    else:
        lines.extend(f"v {i}" for i in range(env.n_vertices))
    if env.weights is not None:
        W = sp.triu(env.weights, k=0).tocsr()
        W.sort_indices()
        for i in range(W.shape[0]):
            for k in range(W.indptr[i], W.indptr[i + 1]):
                lines.append(f"e {i} {W.indices[k]} {_fmt(W.data[k])}")
    else:
        P = env.kernel
        for i in range(P.shape[0]):
            for k in range(P.indptr[i], P.indptr[i + 1]):
                lines.append(f"a {i} {P.indices[k]} {_fmt(P.data[k])}")
    return "\n".join(lines) + "\n"


def serialize(env: RootedEnvironment, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(env))


def loads(text: str) -> RootedEnvironment:
    lines = text.splitlines()
    if not lines:
        raise EnvironmentFormatError("empty file", 1)
    header = lines[0].split()
    if not header or header[0] != "env":
        raise EnvironmentFormatError("missing 'env' header", 1)
    fields = {}
    for tok in header[1:]:
        k, sep, v = tok.partition("=")
        if not sep:
            raise EnvironmentFormatError(f"malformed header field {tok!r}", 1)
        fields[k] = v
    required = ("v", "model", "d", "L", "seed", "params", "root")
    for key in required:
        if key not in fields:
            raise EnvironmentFormatError(f"header lacks {key}=", 1)
    try:
        if int(fields["v"]) != FORMAT_VERSION:
            raise EnvironmentFormatError(f"unsupported format version {fields['v']}", 1)
        d, L, seed, root = (int(fields[k]) for k in ("d", "L", "seed", "root"))
        params = parse_params(fields["params"])
    except ValueError as exc:
        if isinstance(exc, EnvironmentFormatError):
            raise
        raise EnvironmentFormatError(str(exc), 1) from None

    ids, coords = [], []
    ei, ej, ev = [], [], []
    kinds = set()
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        try:
            if tok[0] == "v":
                ids.append(int(tok[1]))
                coords.append([int(c) for c in tok[2:]])
            elif tok[0] in ("e", "a"):
                if len(tok) != 4:
                    raise ValueError(f"expected 3 fields after {tok[0]!r}")
                kinds.add(tok[0])
                ei.append(int(tok[1]))
                ej.append(int(tok[2]))
                ev.append(float(tok[3]))
            else:
                raise ValueError(f"unknown record type {tok[0]!r}")
        except (ValueError, IndexError) as exc:
            raise EnvironmentFormatError(str(exc), lineno) from None
    if len(kinds) > 1:
        raise EnvironmentFormatError("file mixes edge and arc records")
    n = len(ids)
    if ids != list(range(n)):
        raise EnvironmentFormatError("vertex ids must be 0..n-1 in order")
    ei_a, ej_a = np.asarray(ei, dtype=np.int64), np.asarray(ej, dtype=np.int64)
    if ei_a.size and (min(ei_a.min(), ej_a.min()) < 0 or max(ei_a.max(), ej_a.max()) >= n):
        raise EnvironmentFormatError("edge endpoint is not a declared vertex")
    widths = {len(c) for c in coords}
    if widths == {0}:
        xy = None
    elif widths == {d}:
        xy = np.asarray(coords, dtype=np.int64)
    else:
        raise EnvironmentFormatError(f"vertex lines must carry 0 or d={d} coordinates")
    meta = EnvMeta(fields["model"], d, L, seed, params)
    if kinds == {"e"}:
        W = weights_from_edges(n, ei_a, ej_a, np.asarray(ev))
        # self-loops were doubled by symmetrisation
        diag = W.diagonal()
        if np.any(diag):
            W = W - sp.diags(diag / 2.0)
            W = W.tocsr()
            W.eliminate_zeros()
            W.sort_indices()
        env = RootedEnvironment(kernel_from_weights(W), root, meta, xy, W)
    else:
        P = sp.csr_matrix((np.asarray(ev), (ei_a, ej_a)), shape=(n, n))
        P.sum_duplicates()
        P.sort_indices()
        env = RootedEnvironment(P, root, meta, xy, None)
    validate(env)
    return env


def deserialize(path) -> RootedEnvironment:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
