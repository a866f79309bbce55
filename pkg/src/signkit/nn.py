"""Dense float64 layers with hand-derived backward passes.

Every ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache. Sequence layers work on padded
batches ``(B, T, F)`` together with per-sample ``lengths``.
"""

from __future__ import annotations

import struct
import json
from typing import Iterator

import numpy as np

RNG_ALGORITHM = "PCG64"
LN_EPS = 1e-5
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
MASK_VALUE = -1e30


class ShapeMismatch(ValueError):
    pass


class BatchTooSmall(ValueError):
    pass


class OddDimension(ValueError):
    pass


class IndivisibleHeads(ValueError):
    pass


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded PCG64 generator; ``stream`` selects an independent substream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def _check(cond: bool, msg: str):
    if not cond:
        raise ShapeMismatch(msg)


# --------------------------------------------------------------------------- #
# parameters


class ParameterSet:
    """Named parameters with a parallel gradient map, iterated in sorted path order.

    ``buffers`` holds non-trainable state (batch-norm running statistics).
    """

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def add(self, path: str, value: np.ndarray) -> np.ndarray:
        if path in self.params:
            raise KeyError(f"duplicate parameter {path}")
        value = np.ascontiguousarray(value, dtype=np.float64)
        self.params[path] = value
        self.grads[path] = np.zeros_like(value)
        return value

    def __getitem__(self, path: str) -> np.ndarray:
        return self.params[path]

    def __contains__(self, path: str) -> bool:
        return path in self.params

    def __len__(self) -> int:
        return len(self.params)

    def paths(self) -> list[str]:
        return sorted(self.params)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for p in self.paths():
            yield p, self.params[p]

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def accumulate(self, path: str, grad: np.ndarray):
        g = self.grads[path]
        _check(g.shape == grad.shape, f"{path}: gradient {grad.shape} vs parameter {g.shape}")
        g += grad

    def count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def state(self) -> dict[str, np.ndarray]:
        """Parameters and buffers, the content of a checkpoint."""
        out = dict(self.params)
        out.update({f"buffer:{k}": v for k, v in self.buffers.items()})
        return out

    def load_state(self, state: dict[str, np.ndarray]):
        expected = set(self.params) | {f"buffer:{k}" for k in self.buffers}
        if set(state) != expected:
            missing = sorted(expected - set(state))
            extra = sorted(set(state) - expected)
            raise ShapeMismatch(f"checkpoint keys differ: missing {missing}, unexpected {extra}")
        for key, value in state.items():
            target = self.buffers[key[7:]] if key.startswith("buffer:") else self.params[key]
            _check(
                target.shape == value.shape,
                f"{key}: checkpoint shape {value.shape}, model shape {target.shape}",
            )
            target[...] = value


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# --------------------------------------------------------------------------- #
# checkpoint file
#
#   b"SKCK" | u16 version | u32 meta length | meta (UTF-8 JSON, sorted keys)
#   | u32 tensor count | per tensor (sorted by path):
#       u16 path length | path | u8 ndim | ndim x u32 | float64 LE values

_CKPT_MAGIC = b"SKCK"


def dump_checkpoint(tensors: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    out = bytearray(_CKPT_MAGIC)
    out += struct.pack("<HI", 1, len(meta_bytes)) + meta_bytes
    out += struct.pack("<I", len(tensors))
    for path in sorted(tensors):
        arr = np.asarray(tensors[path], dtype="<f8")
        name = path.encode("utf-8")
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes()
    return bytes(out)


def parse_checkpoint(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if data[:4] != _CKPT_MAGIC:
        raise ValueError("not a checkpoint file")
    pos = 4
    try:
        version, meta_len = struct.unpack_from("<HI", data, pos)
        pos += 6
        if version != 1:
            raise ValueError(f"unsupported checkpoint version {version}")
        meta = json.loads(data[pos:pos + meta_len].decode("utf-8"))
        pos += meta_len
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (n,) = struct.unpack_from("<H", data, pos)
            pos += 2
            path = data[pos:pos + n].decode("utf-8")
            pos += n
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64)) * 8
            if pos + size > len(data):
                raise ValueError("checkpoint truncated")
            tensors[path] = np.frombuffer(data, dtype="<f8", count=size // 8, offset=pos).reshape(shape).copy()
            pos += size
    except struct.error as e:
        raise ValueError(f"checkpoint truncated: {e}") from e
    if pos != len(data):
        raise ValueError("trailing bytes after checkpoint")
    return meta, tensors


# --------------------------------------------------------------------------- #
# elementwise / normalizing layers


def linear_forward(x, w, b):
    """y = x @ w.T + b over the last axis of x."""
    _check(w.ndim == 2 and b.shape == (w.shape[0],), f"bad linear params {w.shape}, {b.shape}")
    _check(x.shape[-1] == w.shape[1], f"linear expects last dim {w.shape[1]}, got {x.shape}")
    return x @ w.T + b, (x, w)


def linear_backward(dy, cache):
    x, w = cache
    _check(dy.shape == x.shape[:-1] + (w.shape[0],), f"upstream grad shape {dy.shape}")
    dx = dy @ w
    dy2 = dy.reshape(-1, w.shape[0])
    dw = dy2.T @ x.reshape(-1, w.shape[1])
    db = dy2.sum(axis=0)
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0.0), x


def relu_backward(dy, x):
    return dy * (x > 0)


def sigmoid(x):
    # tanh form: stable for large |x| and a single transcendental call
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    m = x.max(axis=axis, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def log_softmax_backward(dy, logp, axis=-1):
    return dy - np.exp(logp) * dy.sum(axis=axis, keepdims=True)


def batchnorm1d_forward(x, gamma, beta, running_mean, running_var, train: bool,
                        momentum: float = BN_MOMENTUM, eps: float = BN_EPS):
    """Batch norm over rows of ``x`` (N, F).

    In train mode the running statistics are updated in place (unbiased
    variance, as the usual framework convention).
    """
    _check(x.ndim == 2 and gamma.shape == (x.shape[1],), f"batchnorm shape {x.shape} / {gamma.shape}")
    n = x.shape[0]
    if train:
        if n < 2:
            raise BatchTooSmall(f"batch norm needs at least 2 rows in train mode, got {n}")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        running_mean *= 1 - momentum
        running_mean += momentum * mu
        running_var *= 1 - momentum
        running_var += momentum * var * n / (n - 1)
    else:
        mu, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, (xhat, gamma, inv_std, train)


def batchnorm1d_backward(dy, cache):
    xhat, gamma, inv_std, train = cache
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    if not train:
        return dxhat * inv_std, dgamma, dbeta
    n = dy.shape[0]
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def dropout_forward(x, rate: float, rng: np.random.Generator | None, train: bool, mask=None):
    """Inverted dropout. A precomputed ``mask`` (already scaled) overrides sampling."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or (rate == 0 and mask is None):
        return x, None
    if mask is None:
        mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    _check(mask.shape == x.shape, f"dropout mask {mask.shape} vs input {x.shape}")
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


def layernorm_forward(x, gamma, beta, eps: float = LN_EPS):
    _check(gamma.shape == (x.shape[-1],), f"layernorm gamma {gamma.shape} for input {x.shape}")
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, (xhat, gamma, inv_std)


def layernorm_backward(dy, cache):
    xhat, gamma, inv_std = cache
    d = xhat.shape[-1]
    axes = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma
    dx = inv_std / d * (
        d * dxhat - dxhat.sum(axis=-1, keepdims=True) - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


# --------------------------------------------------------------------------- #
# recurrent layers (gate order: input, forget, cell candidate, output)


def lstm_cell_forward(x, h, c, w_ih, w_hh, b):
    hidden = h.shape[-1]
    _check(w_ih.shape == (4 * hidden, x.shape[-1]), f"w_ih {w_ih.shape} for input {x.shape}, hidden {hidden}")
    _check(w_hh.shape == (4 * hidden, hidden) and b.shape == (4 * hidden,), "bad recurrent weights")
    _check(c.shape == h.shape, f"cell {c.shape} vs hidden {h.shape}")
    z = x @ w_ih.T + h @ w_hh.T + b
    h_next, c_next, gates = _lstm_gates(z, c)
    return (h_next, c_next), (x, h, c, gates, c_next, w_ih, w_hh)


def _lstm_gates(z, c):
    H = c.shape[-1]
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = sigmoid(z[..., 3 * H:])
    c_next = f * c + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next, (i, f, g, o)


def _lstm_gate_grads(dh, dc, c, c_next, gates):
    i, f, g, o = gates
    tc = np.tanh(c_next)
    dc = dc + dh * o * (1 - tc * tc)
    dz = np.concatenate(
        [dc * g * i * (1 - i), dc * c * f * (1 - f), dc * i * (1 - g * g), dh * tc * o * (1 - o)],
        axis=-1,
    )
    return dz, dc * f


def lstm_cell_backward(dh_next, dc_next, cache):
    x, h, c, gates, c_next, w_ih, w_hh = cache
    dz, dc = _lstm_gate_grads(dh_next, dc_next, c, c_next, gates)
    return dz @ w_ih, dz @ w_hh, dc, dz.T @ x, dz.T @ h, dz.sum(axis=0)


def _active_counts(lengths, B, T):
    """Rows still running at each step; lengths must be non-increasing."""
    if lengths is None:
        return np.full(T, B)
    lengths = np.asarray(lengths)
    _check(lengths.shape == (B,), "one length per batch row")
    _check(bool(np.all(lengths[:-1] >= lengths[1:])), "packed LSTM needs lengths sorted descending")
    return (lengths[None, :] > np.arange(T)[:, None]).sum(axis=1)


def lstm_forward(x, w_ih, w_hh, b, lengths=None):
    """Unidirectional LSTM over (B, T, F) from a zero state; returns (B, T, H).

    With ``lengths`` (sorted descending) steps past a row's length are skipped
    and its outputs there stay zero.
    """
    B, T, _ = x.shape
    H = w_hh.shape[1]
    _check(w_ih.shape == (4 * H, x.shape[2]), f"w_ih {w_ih.shape} for input {x.shape}")
    _check(w_hh.shape == (4 * H, H) and b.shape == (4 * H,), "bad recurrent weights")
    active = _active_counts(lengths, B, T)
    if lengths is None:
        xz = x @ w_ih.T + b
    else:
        valid = np.arange(T)[None, :] < np.asarray(lengths)[:, None]
        xz = np.zeros((B, T, 4 * H))
        xz[valid] = x[valid] @ w_ih.T + b
    hs = np.zeros((B, T + 1, H))
    cs = np.zeros((B, T + 1, H))
    gates = np.zeros((B, T, 4 * H))
    for t in range(T):
        n = active[t]
        z = xz[:n, t] + hs[:n, t] @ w_hh.T
        hs[:n, t + 1], cs[:n, t + 1], (i, f, g, o) = _lstm_gates(z, cs[:n, t])
        gates[:n, t] = np.concatenate([i, f, g, o], axis=-1)
    return hs[:, 1:], (x, hs, cs, gates, w_ih, w_hh, active)


def lstm_backward(dhs, cache):
    x, hs, cs, gates, w_ih, w_hh, active = cache
    B, T, H = dhs.shape
    dz_all = np.zeros((B, T, 4 * H))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        n = active[t]
        gt = gates[:n, t]
        split = (gt[:, :H], gt[:, H:2 * H], gt[:, 2 * H:3 * H], gt[:, 3 * H:])
        dz, dc_n = _lstm_gate_grads(dhs[:n, t] + dh[:n], dc[:n], cs[:n, t], cs[:n, t + 1], split)
        dz_all[:n, t] = dz
        dc[:n] = dc_n
        dh[:n] = dz @ w_hh
    dz2 = dz_all.reshape(B * T, 4 * H)
    dx = dz_all @ w_ih
    dw_ih = dz2.T @ x.reshape(B * T, -1)
    dw_hh = dz2.T @ hs[:, :-1].reshape(B * T, H)
    db = dz2.sum(axis=0)
    return dx, dw_ih, dw_hh, db


def reverse_index(lengths, T: int) -> np.ndarray:
    """Index map reversing each sequence inside its own length; padding stays put.

    The map is an involution, so the same array un-reverses.
    """
    lengths = np.asarray(lengths)
    t = np.arange(T)[None, :]
    L = lengths[:, None]
    return np.where(t < L, L - 1 - t, t)


def _gather_time(x, idx):
    return np.take_along_axis(x, idx[..., None], axis=1)


def bilstm_forward(x, layers, lengths=None):
    """Stacked bidirectional LSTM.

    ``layers`` is a list of dicts with keys ``fwd`` and ``bwd``, each a
    ``(w_ih, w_hh, b)`` triple. Output is (B, T, 2H): forward then reverse
    states, zero at padded frames. Rows are processed longest first so each
    step only touches sequences that are still running.
    """
    B, T, _ = x.shape
    if lengths is None:
        lengths = np.full(B, T)
    lengths = np.asarray(lengths)
    _check(lengths.shape == (B,), "one length per batch row")
    perm = np.argsort(-lengths, kind="stable")
    inv = np.argsort(perm)
    Ls = lengths[perm]
    ridx = reverse_index(Ls, T)
    caches = []
    h = x[perm]
    for layer in layers:
        out_f, cf = lstm_forward(h, *layer["fwd"], lengths=Ls)
        out_b_rev, cb = lstm_forward(_gather_time(h, ridx), *layer["bwd"], lengths=Ls)
        h = np.concatenate([out_f, _gather_time(out_b_rev, ridx)], axis=-1)
        caches.append((cf, cb))
    return h[inv], (caches, ridx, perm, inv)


def bilstm_backward(dy, cache):
    """Returns (dx, grads) where grads[l] = {"fwd": (dw_ih, dw_hh, db), "bwd": (...)}."""
    caches, ridx, perm, inv = cache
    dy = dy[perm]
    grads = [None] * len(caches)
    for l in range(len(caches) - 1, -1, -1):
        cf, cb = caches[l]
        H = cf[5].shape[1]
        dxf, *gf = lstm_backward(dy[..., :H], cf)
        dxb_rev, *gb = lstm_backward(_gather_time(dy[..., H:], ridx), cb)
        dy = dxf + _gather_time(dxb_rev, ridx)
        grads[l] = {"fwd": tuple(gf), "bwd": tuple(gb)}
    return dy[inv], grads


def max_pool_time_forward(x, lengths=None):
    """Column-wise max over time; ties resolve to the earliest frame."""
    if x.ndim == 2:
        y, cache = max_pool_time_forward(x[None], None if lengths is None else [lengths])
        return y[0], ("single", cache)
    B, T, F = x.shape
    _check(T >= 1, "max pool needs at least one frame")
    if lengths is not None:
        valid = np.arange(T)[None, :] < np.asarray(lengths)[:, None]
        x = np.where(valid[..., None], x, -np.inf)
    idx = np.argmax(x, axis=1)
    y = np.take_along_axis(x, idx[:, None, :], axis=1)[:, 0]
    return y, (idx, (B, T, F))


def max_pool_time_backward(dy, cache):
    if isinstance(cache[0], str):
        return max_pool_time_backward(dy[None], cache[1])[0]
    idx, shape = cache
    dx = np.zeros(shape)
    np.put_along_axis(dx, idx[:, None, :], dy[:, None, :], axis=1)
    return dx


# --------------------------------------------------------------------------- #
# attention


def positional_encoding(T: int, d_model: int) -> np.ndarray:
    if d_model % 2:
        raise OddDimension(f"d_model must be even, got {d_model}")
    pos = np.arange(T)[:, None]
    rate = 10000.0 ** (np.arange(0, d_model, 2) / d_model)
    pe = np.zeros((T, d_model))
    pe[:, 0::2] = np.sin(pos / rate)
    pe[:, 1::2] = np.cos(pos / rate)
    return pe


def mhsa_forward(x, p, heads: int, key_mask=None):
    """Bidirectional multi-head self-attention over (B, T, d).

    ``p`` holds ``wq, bq, wk, bk, wv, bv, wo, bo``; ``key_mask`` (B, T) marks
    real frames, padded keys get zero weight.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    B, T, d = x.shape
    if d % heads:
        raise IndivisibleHeads(f"d_model {d} is not divisible by {heads} heads")
    dh = d // heads
    q, cq = linear_forward(x, p["wq"], p["bq"])
    k, ck = linear_forward(x, p["wk"], p["bk"])
    v, cv = linear_forward(x, p["wv"], p["bv"])

    def split(a):
        return a.reshape(B, T, heads, dh).transpose(0, 2, 1, 3)

    qh, kh, vh = split(q), split(k), split(v)
    scale = 1.0 / np.sqrt(dh)
    scores = qh @ kh.transpose(0, 1, 3, 2) * scale
    if key_mask is not None:
        scores = np.where(np.asarray(key_mask)[:, None, None, :], scores, MASK_VALUE)
    attn = softmax(scores, axis=-1)
    ctx = (attn @ vh).transpose(0, 2, 1, 3).reshape(B, T, d)
    y, co = linear_forward(ctx, p["wo"], p["bo"])
    cache = (cq, ck, cv, co, qh, kh, vh, attn, scale, heads, squeeze)
    return (y[0] if squeeze else y), cache


def mhsa_backward(dy, cache):
    cq, ck, cv, co, qh, kh, vh, attn, scale, heads, squeeze = cache
    if squeeze:
        dy = dy[None]
    B, T, d = dy.shape
    dh = d // heads
    dctx, dwo, dbo = linear_backward(dy, co)
    dctx = dctx.reshape(B, T, heads, dh).transpose(0, 2, 1, 3)
    dattn = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = attn.transpose(0, 1, 3, 2) @ dctx
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True)) * scale
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 1, 3, 2) @ qh

    def merge(a):
        return a.transpose(0, 2, 1, 3).reshape(B, T, d)

    dxq, dwq, dbq = linear_backward(merge(dqh), cq)
    dxk, dwk, dbk = linear_backward(merge(dkh), ck)
    dxv, dwv, dbv = linear_backward(merge(dvh), cv)
    dx = dxq + dxk + dxv
    grads = {"wq": dwq, "bq": dbq, "wk": dwk, "bk": dbk, "wv": dwv, "bv": dbv, "wo": dwo, "bo": dbo}
    return (dx[0] if squeeze else dx), grads


def attention_weights(x, p, heads: int, key_mask=None) -> np.ndarray:
    """The (B, heads, T, T) attention matrix of one forward pass."""
    _, cache = mhsa_forward(x, p, heads, key_mask)
    return cache[7]


def transformer_block_forward(x, p, heads: int, key_mask=None, dropout: float = 0.0,
                              rng=None, train: bool = False):
    """Post-norm encoder block: LN(x + MHSA(x)), then LN(x + FF(x)).

    ``p`` keys: attention weights (see ``mhsa_forward``), ``ln1_g, ln1_b,
    ff1_w, ff1_b, ff2_w, ff2_b, ln2_g, ln2_b``.
    """
    a, c_att = mhsa_forward(x, p, heads, key_mask)
    a, m1 = dropout_forward(a, dropout, rng, train)
    h1, c_ln1 = layernorm_forward(x + a, p["ln1_g"], p["ln1_b"])
    f, c_ff1 = linear_forward(h1, p["ff1_w"], p["ff1_b"])
    f, c_relu = relu_forward(f)
    f, c_ff2 = linear_forward(f, p["ff2_w"], p["ff2_b"])
    f, m2 = dropout_forward(f, dropout, rng, train)
    y, c_ln2 = layernorm_forward(h1 + f, p["ln2_g"], p["ln2_b"])
    return y, (c_att, m1, c_ln1, c_ff1, c_relu, c_ff2, m2, c_ln2)


def transformer_block_backward(dy, cache):
    c_att, m1, c_ln1, c_ff1, c_relu, c_ff2, m2, c_ln2 = cache
    ds, dln2_g, dln2_b = layernorm_backward(dy, c_ln2)
    df = dropout_backward(ds, m2)
    df, dff2_w, dff2_b = linear_backward(df, c_ff2)
    df = relu_backward(df, c_relu)
    dh1, dff1_w, dff1_b = linear_backward(df, c_ff1)
    dh1 = dh1 + ds
    ds1, dln1_g, dln1_b = layernorm_backward(dh1, c_ln1)
    da = dropout_backward(ds1, m1)
    dx, grads = mhsa_backward(da, c_att)
    grads.update(
        ln1_g=dln1_g, ln1_b=dln1_b, ff1_w=dff1_w, ff1_b=dff1_b,
        ff2_w=dff2_w, ff2_b=dff2_b, ln2_g=dln2_g, ln2_b=dln2_b,
    )
    return dx + ds1, grads


BLOCK_KEYS = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
              "ln1_g", "ln1_b", "ff1_w", "ff1_b", "ff2_w", "ff2_b", "ln2_g", "ln2_b")


def init_block(rng, d_model: int, ff_dim: int) -> dict[str, np.ndarray]:
    p = {}
    for name in "qkvo":
        p[f"w{name}"] = init_uniform(rng, (d_model, d_model), d_model)
        p[f"b{name}"] = np.zeros(d_model)
    p["ln1_g"], p["ln1_b"] = np.ones(d_model), np.zeros(d_model)
    p["ff1_w"], p["ff1_b"] = init_uniform(rng, (ff_dim, d_model), d_model), np.zeros(ff_dim)
    p["ff2_w"], p["ff2_b"] = init_uniform(rng, (d_model, ff_dim), ff_dim), np.zeros(d_model)
    p["ln2_g"], p["ln2_b"] = np.ones(d_model), np.zeros(d_model)
    return p
