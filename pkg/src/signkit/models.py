"""The two recognition architectures, Adam, training and evaluation.

``BiLstmClassifier`` follows the pose -> dropout -> batch norm -> projection
-> 2-layer BiLSTM -> max pool -> linear pipeline trained with cross-entropy.
``TransformerCtcClassifier`` projects frames, adds sinusoidal positions, runs
post-norm encoder blocks and is trained with CTC, predicting by beam search.

Both are scikit-learn estimators: ``fit(X, y)`` / ``predict(X)`` / ``score``
where ``X`` is a list of ``PoseSequence`` (featurized internally) or a list
of precomputed (T, F) feature arrays.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_is_fitted

from . import nn
from .ctc import ctc_beam_search, ctc_loss_from_logits, cross_entropy, isolated_prediction
from .features import PoseFeaturizer, dominant_hand_presence, is_pose_list
from .pose import PoseSequence

log = logging.getLogger(__name__)

FLIP_MODES = ("off", "all", "detected_left")


class EmptyDataset(ValueError):
    pass


# --------------------------------------------------------------------------- #
# configs and records


@dataclass(frozen=True)
class BiLstmConfig:
    input_dim: int
    classes: int
    projection_dim: int = 512
    lstm_hidden: int = 256
    lstm_layers: int = 2
    dropout: float = 0.2

    def __post_init__(self):
        for name in ("input_dim", "classes", "projection_dim", "lstm_hidden", "lstm_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


@dataclass(frozen=True)
class TransformerCtcConfig:
    input_dim: int
    classes: int
    d_model: int = 128
    heads: int = 8
    blocks: int = 2
    ff_dim: int = 256
    dropout: float = 0.1

    def __post_init__(self):
        if self.d_model % self.heads:
            raise nn.IndivisibleHeads(f"d_model {self.d_model} not divisible by {self.heads} heads")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 512
    epochs: int = 30
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    flip_mode: str = "off"

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.flip_mode not in FLIP_MODES:
            raise ValueError(f"flip_mode must be one of {FLIP_MODES}")


@dataclass
class LabeledSample:
    sample_id: str
    pose: PoseSequence
    label: int
    signer_id: str


@dataclass(frozen=True)
class PredictionOutcome:
    sample_id: str
    true_label: int
    predicted_label: int | None
    correct: bool
    dominant_hand_presence: float
    multi_symbol_flag: bool = False

    @property
    def rejected(self) -> bool:
        return self.predicted_label is None


# --------------------------------------------------------------------------- #
# optimizer


class Adam:
    """Adam with bias correction, updating a ParameterSet in place."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: nn.ParameterSet):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for path, value in params.items():
            g = params.grads[path]
            if path not in self.m:
                self.m[path] = np.zeros_like(value)
                self.v[path] = np.zeros_like(value)
            m, v = self.m[path], self.v[path]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_step(params: nn.ParameterSet, optimizer: Adam) -> nn.ParameterSet:
    optimizer.step(params)
    return params


# --------------------------------------------------------------------------- #
# networks


def pad_batch(seqs: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in seqs])
    if np.any(lengths < 1):
        raise ValueError("every sequence needs at least one frame")
    F = seqs[0].shape[1]
    x = np.zeros((len(seqs), lengths.max(), F))
    for i, s in enumerate(seqs):
        if s.shape[1] != F:
            raise nn.ShapeMismatch(f"sequence {i} has {s.shape[1]} features, expected {F}")
        x[i, : len(s)] = s
    return x, lengths


def _valid_mask(lengths, T):
    return np.arange(T)[None, :] < np.asarray(lengths)[:, None]


class BiLstmNet:
    """Numerical core of the BiLSTM classifier."""

    def __init__(self, cfg: BiLstmConfig, rng: np.random.Generator):
        self.cfg = cfg
        ps = self.params = nn.ParameterSet()
        F, P, H = cfg.input_dim, cfg.projection_dim, cfg.lstm_hidden
        ps.add("bn.gamma", np.ones(F))
        ps.add("bn.beta", np.zeros(F))
        ps.buffers["bn.running_mean"] = np.zeros(F)
        ps.buffers["bn.running_var"] = np.ones(F)
        ps.add("proj.w", nn.init_uniform(rng, (P, F), F))
        ps.add("proj.b", np.zeros(P))
        for layer in range(cfg.lstm_layers):
            fan = P if layer == 0 else 2 * H
            for direction in ("fwd", "bwd"):
                pre = f"bilstm.{layer}.{direction}"
                ps.add(f"{pre}.w_ih", nn.init_uniform(rng, (4 * H, fan), fan))
                ps.add(f"{pre}.w_hh", nn.init_uniform(rng, (4 * H, H), H))
                b = np.zeros(4 * H)
                b[H:2 * H] = 1.0  # forget gate
                ps.add(f"{pre}.b", b)
        ps.add("head.w", nn.init_uniform(rng, (cfg.classes, 2 * H), 2 * H))
        ps.add("head.b", np.zeros(cfg.classes))

    def _layers(self):
        ps = self.params
        return [
            {d: tuple(ps[f"bilstm.{l}.{d}.{k}"] for k in ("w_ih", "w_hh", "b")) for d in ("fwd", "bwd")}
            for l in range(self.cfg.lstm_layers)
        ]

    def forward(self, x, lengths, train=False, rng=None):
        ps = self.params
        B, T, F = x.shape
        if F != self.cfg.input_dim:
            raise nn.ShapeMismatch(f"model expects {self.cfg.input_dim} features, got {F}")
        valid = _valid_mask(lengths, T)
        xd, m_drop = nn.dropout_forward(x, self.cfg.dropout, rng, train)
        rows, c_bn = nn.batchnorm1d_forward(
            xd[valid], ps["bn.gamma"], ps["bn.beta"],
            ps.buffers["bn.running_mean"], ps.buffers["bn.running_var"], train,
        )
        proj, c_proj = nn.linear_forward(rows, ps["proj.w"], ps["proj.b"])
        h = np.zeros((B, T, self.cfg.projection_dim))
        h[valid] = proj
        out, c_lstm = nn.bilstm_forward(h, self._layers(), lengths)
        pooled, c_pool = nn.max_pool_time_forward(out, lengths)
        logits, c_head = nn.linear_forward(pooled, ps["head.w"], ps["head.b"])
        return logits, (x.shape, valid, m_drop, c_bn, c_proj, c_lstm, c_pool, c_head)

    def backward(self, dlogits, cache):
        """Accumulate parameter gradients; returns the gradient w.r.t. the input."""
        shape, valid, m_drop, c_bn, c_proj, c_lstm, c_pool, c_head = cache
        ps = self.params
        dpooled, dw, db = nn.linear_backward(dlogits, c_head)
        ps.accumulate("head.w", dw)
        ps.accumulate("head.b", db)
        dout = nn.max_pool_time_backward(dpooled, c_pool)
        dh, lstm_grads = nn.bilstm_backward(dout, c_lstm)
        for l, g in enumerate(lstm_grads):
            for d in ("fwd", "bwd"):
                for k, gk in zip(("w_ih", "w_hh", "b"), g[d]):
                    ps.accumulate(f"bilstm.{l}.{d}.{k}", gk)
        drows, dw, db = nn.linear_backward(dh[valid], c_proj)
        ps.accumulate("proj.w", dw)
        ps.accumulate("proj.b", db)
        drows, dgamma, dbeta = nn.batchnorm1d_backward(drows, c_bn)
        ps.accumulate("bn.gamma", dgamma)
        ps.accumulate("bn.beta", dbeta)
        dxd = np.zeros(shape)
        dxd[valid] = drows
        return nn.dropout_backward(dxd, m_drop)

    def loss_and_grad(self, x, lengths, labels, train=True, rng=None):
        logits, cache = self.forward(x, lengths, train, rng)
        loss, dlogits = cross_entropy(logits, labels)
        self.params.zero_grad()
        self.backward(dlogits, cache)
        return loss, logits


class TransformerCtcNet:
    """Numerical core of the transformer encoder + CTC model (blank = output 0)."""

    def __init__(self, cfg: TransformerCtcConfig, rng: np.random.Generator):
        self.cfg = cfg
        ps = self.params = nn.ParameterSet()
        F, d = cfg.input_dim, cfg.d_model
        ps.add("proj.w", nn.init_uniform(rng, (d, F), F))
        ps.add("proj.b", np.zeros(d))
        for i in range(cfg.blocks):
            for k, v in nn.init_block(rng, d, cfg.ff_dim).items():
                ps.add(f"blocks.{i}.{k}", v)
        ps.add("head.w", nn.init_uniform(rng, (cfg.classes + 1, d), d))
        ps.add("head.b", np.zeros(cfg.classes + 1))

    def _block(self, i):
        return {k: self.params[f"blocks.{i}.{k}"] for k in nn.BLOCK_KEYS}

    def forward(self, x, lengths, train=False, rng=None):
        """Per-frame log-probabilities (B, T, C+1)."""
        ps, cfg = self.params, self.cfg
        B, T, F = x.shape
        if F != cfg.input_dim:
            raise nn.ShapeMismatch(f"model expects {cfg.input_dim} features, got {F}")
        valid = _valid_mask(lengths, T)
        h, c_in = nn.linear_forward(x, ps["proj.w"], ps["proj.b"])
        h = h + nn.positional_encoding(T, cfg.d_model)
        h, m0 = nn.dropout_forward(h, cfg.dropout, rng, train)
        c_blocks = []
        for i in range(cfg.blocks):
            h, c = nn.transformer_block_forward(h, self._block(i), cfg.heads, valid, cfg.dropout, rng, train)
            c_blocks.append(c)
        logits, c_head = nn.linear_forward(h, ps["head.w"], ps["head.b"])
        return nn.log_softmax(logits), (c_in, m0, c_blocks, c_head)

    def backward(self, dlogits, cache):
        """Takes the gradient w.r.t. the pre-softmax logits."""
        c_in, m0, c_blocks, c_head = cache
        ps = self.params
        dh, dw, db = nn.linear_backward(dlogits, c_head)
        ps.accumulate("head.w", dw)
        ps.accumulate("head.b", db)
        for i in range(self.cfg.blocks - 1, -1, -1):
            dh, grads = nn.transformer_block_backward(dh, c_blocks[i])
            for k, g in grads.items():
                ps.accumulate(f"blocks.{i}.{k}", g)
        dh = nn.dropout_backward(dh, m0)
        dx, dw, db = nn.linear_backward(dh, c_in)
        ps.accumulate("proj.w", dw)
        ps.accumulate("proj.b", db)
        return dx

    def loss_and_grad(self, x, lengths, labels, train=True, rng=None):
        """Mean CTC loss with one target symbol (label + 1) per sequence."""
        logp, cache = self.forward(x, lengths, train, rng)
        B = x.shape[0]
        dlogits = np.zeros_like(logp)
        total = 0.0
        for b in range(B):
            L = lengths[b]
            res = ctc_loss_from_logits(logp[b, :L], [int(labels[b]) + 1])
            total += res.loss
            dlogits[b, :L] = res.grad / B
        self.params.zero_grad()
        self.backward(dlogits, cache)
        return total / B, logp


def build_bilstm_model(cfg: BiLstmConfig, rng: np.random.Generator) -> BiLstmNet:
    return BiLstmNet(cfg, rng)


def build_transformer_ctc_model(cfg: TransformerCtcConfig, rng: np.random.Generator) -> TransformerCtcNet:
    return TransformerCtcNet(cfg, rng)


# --------------------------------------------------------------------------- #
# estimators


def _batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    chunks = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


class _SequenceClassifier(ClassifierMixin, BaseEstimator):
    reject_label = -1
    _kind = ""

    # ---- input handling

    def _make_featurizer(self):
        f = PoseFeaturizer() if self.featurizer is None else clone(self.featurizer)
        if self.flip_mode == "detected_left":
            f.set_params(canonical_hand="right")
        return f

    def _features(self, X, flip=False):
        X = list(X)
        if not X:
            raise EmptyDataset("no samples")
        if is_pose_list(X):
            return self.featurizer_.transform(X, flip=flip)
        if flip:
            raise ValueError("flip augmentation needs PoseSequence inputs")
        out = []
        for i, a in enumerate(X):
            a = np.asarray(getattr(a, "values", a), dtype=np.float64)
            if a.ndim != 2 or len(a) < 1:
                raise nn.ShapeMismatch(f"sample {i}: expected a (T, F) array, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"sample {i} contains NaN or Inf")
            out.append(a)
        return out

    def _validate_params(self):
        TrainConfig(self.batch_size, self.epochs, self.random_state, self.learning_rate,
                    self.beta1, self.beta2, self.adam_eps, self.flip_mode)

    # ---- training

    def fit(self, X, y, eval_set=None):
        """Train from scratch. ``eval_set=(X_val, y_val)`` adds per-epoch validation records."""
        self._validate_params()
        X = list(X)
        y = np.asarray(y)
        if len(X) == 0:
            raise EmptyDataset("cannot fit on an empty dataset")
        if len(X) != len(y):
            raise ValueError(f"{len(X)} samples but {len(y)} labels")
        self.classes_ = np.unique(y)
        y_idx = np.searchsorted(self.classes_, y)

        poses = is_pose_list(X)
        if poses:
            self.featurizer_ = self._make_featurizer().fit(X)
        elif self.flip_mode != "off":
            raise ValueError("flip_mode requires PoseSequence inputs")
        else:
            self.featurizer_ = None
        feats = self._features(X)
        flipped = self._features(X, flip=True) if self.flip_mode == "all" else None
        self.n_features_in_ = feats[0].shape[1]

        seed = int(self.random_state)
        self.net_ = self._build(self.n_features_in_, len(self.classes_), nn.make_rng(seed, 0))
        shuffle_rng = nn.make_rng(seed, 1)
        dropout_rng = nn.make_rng(seed, 2)
        flip_rng = nn.make_rng(seed, 3)
        opt = Adam(self.learning_rate, self.beta1, self.beta2, self.adam_eps)
        val = None
        if eval_set is not None:
            val = (list(eval_set[0]), np.asarray(eval_set[1]))

        self.history_ = []
        n = len(feats)
        for epoch in range(1, self.epochs + 1):
            order = shuffle_rng.permutation(n)
            loss_sum, correct = 0.0, 0
            for idx in _batches(order, self.batch_size):
                if flipped is not None:
                    flip = flip_rng.random(len(idx)) < 0.5
                    seqs = [flipped[i] if f else feats[i] for i, f in zip(idx, flip)]
                else:
                    seqs = [feats[i] for i in idx]
                x, lengths = pad_batch(seqs)
                loss, out = self.net_.loss_and_grad(x, lengths, y_idx[idx], train=True, rng=dropout_rng)
                opt.step(self.net_.params)
                loss_sum += loss * len(idx)
                correct += int(np.sum(self._batch_predict_idx(out, lengths) == y_idx[idx]))
            rec = {"epoch": epoch, "split": "train", "loss": loss_sum / n, "accuracy": correct / n}
            self.history_.append(rec)
            if val is not None:
                self.history_.append(
                    {"epoch": epoch, "split": "validation", "loss": self._eval_loss(*val),
                     "accuracy": float(self.score(*val))}
                )
            if self.verbose:
                log.info("%s", " ".join(f"{k}={v}" for k, v in self.history_[-1].items()))
        return self

    def _eval_loss(self, X, y):
        feats = self._features(X)
        y_idx = np.searchsorted(self.classes_, y)
        known = np.isin(y, self.classes_)
        total, n = 0.0, 0
        for idx in _batches(np.arange(len(feats)), 256):
            idx = idx[known[idx]]
            if len(idx) == 0:
                continue
            x, lengths = pad_batch([feats[i] for i in idx])
            total += self._loss_eval(x, lengths, y_idx[idx]) * len(idx)
            n += len(idx)
        return total / max(n, 1)

    # ---- prediction

    def predict_details(self, X) -> list[tuple[int | None, bool]]:
        """(label or None for a reject, multi-symbol flag) per sample."""
        check_is_fitted(self, "net_")
        feats = self._features(X)
        if feats[0].shape[1] != self.n_features_in_:
            raise nn.ShapeMismatch(
                f"model expects input shape (T, {self.n_features_in_}), data has shape {feats[0].shape}"
            )
        out = []
        for idx in _batches(np.arange(len(feats)), 256):
            x, lengths = pad_batch([feats[i] for i in idx])
            out.extend(self._decode(x, lengths))
        return [(None if s is None else self.classes_[s].item(), flag) for s, flag in out]

    def predict(self, X):
        return np.array([self.reject_label if p is None else p for p, _ in self.predict_details(X)])

    # ---- persistence

    def _meta(self):
        params = self.get_params(deep=False)
        params["featurizer"] = None if self.featurizer_ is None else self.featurizer_.get_params()
        return {
            "kind": self._kind,
            "params": params,
            "classes": self.classes_.tolist(),
            "n_features_in": int(self.n_features_in_),
        }

    def to_bytes(self) -> bytes:
        check_is_fitted(self, "net_")
        return nn.dump_checkpoint(self.net_.params.state(), self._meta())

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())


class BiLstmClassifier(_SequenceClassifier):
    """BiLSTM sequence classifier trained with cross-entropy.

    Defaults: dropout 0.2 on the input, 1-D batch norm, 512-d projection,
    two bidirectional layers of 256 units, max pooling over time, batch 512,
    Adam(1e-3, 0.9, 0.999, 1e-8).
    """

    _kind = "bilstm"

    def __init__(self, projection_dim=512, lstm_hidden=256, lstm_layers=2, dropout=0.2,
                 batch_size=512, epochs=30, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 adam_eps=1e-8, flip_mode="off", featurizer=None, random_state=0, verbose=False):
        self.projection_dim = projection_dim
        self.lstm_hidden = lstm_hidden
        self.lstm_layers = lstm_layers
        self.dropout = dropout
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.flip_mode = flip_mode
        self.featurizer = featurizer
        self.random_state = random_state
        self.verbose = verbose

    def config(self, input_dim, classes) -> BiLstmConfig:
        return BiLstmConfig(input_dim, classes, self.projection_dim, self.lstm_hidden,
                            self.lstm_layers, self.dropout)

    def _build(self, input_dim, classes, rng):
        return build_bilstm_model(self.config(input_dim, classes), rng)

    def _batch_predict_idx(self, logits, lengths):
        return np.argmax(logits, axis=1)

    def _loss_eval(self, x, lengths, y_idx):
        logits, _ = self.net_.forward(x, lengths, train=False)
        return cross_entropy(logits, y_idx)[0]

    def _decode(self, x, lengths):
        logits, _ = self.net_.forward(x, lengths, train=False)
        return [(int(i), False) for i in np.argmax(logits, axis=1)]

    def predict_proba(self, X):
        check_is_fitted(self, "net_")
        feats = self._features(X)
        out = []
        for idx in _batches(np.arange(len(feats)), 256):
            x, lengths = pad_batch([feats[i] for i in idx])
            logits, _ = self.net_.forward(x, lengths, train=False)
            out.append(nn.softmax(logits))
        return np.concatenate(out)


class TransformerCtcClassifier(_SequenceClassifier):
    """Transformer encoder trained with CTC; one target symbol per sequence.

    Defaults (d_model 128, 8 heads, 2 blocks, ff 256, dropout 0.1, beam 5)
    are artifact choices sized for CPU training.
    """

    _kind = "transformer-ctc"

    def __init__(self, d_model=128, heads=8, blocks=2, ff_dim=256, dropout=0.1, beam_width=5,
                 batch_size=512, epochs=30, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 adam_eps=1e-8, flip_mode="off", featurizer=None, random_state=0, verbose=False):
        self.d_model = d_model
        self.heads = heads
        self.blocks = blocks
        self.ff_dim = ff_dim
        self.dropout = dropout
        self.beam_width = beam_width
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.flip_mode = flip_mode
        self.featurizer = featurizer
        self.random_state = random_state
        self.verbose = verbose

    def config(self, input_dim, classes) -> TransformerCtcConfig:
        return TransformerCtcConfig(input_dim, classes, self.d_model, self.heads, self.blocks,
                                    self.ff_dim, self.dropout)

    def _build(self, input_dim, classes, rng):
        return build_transformer_ctc_model(self.config(input_dim, classes), rng)

    def _batch_predict_idx(self, logp, lengths):
        # cheap training-time proxy: frame-summed posteriors, blank excluded
        out = np.empty(len(lengths), dtype=int)
        for b, L in enumerate(lengths):
            out[b] = int(np.argmax(np.exp(logp[b, :L, 1:]).sum(axis=0)))
        return out

    def _loss_eval(self, x, lengths, y_idx):
        logp, _ = self.net_.forward(x, lengths, train=False)
        return float(np.mean([
            ctc_loss_from_logits(logp[b, :L], [int(y_idx[b]) + 1]).loss for b, L in enumerate(lengths)
        ]))

    def lattices(self, X) -> list[np.ndarray]:
        """Per-sample (T, C+1) log-probability lattices."""
        check_is_fitted(self, "net_")
        feats = self._features(X)
        out = []
        for idx in _batches(np.arange(len(feats)), 256):
            x, lengths = pad_batch([feats[i] for i in idx])
            logp, _ = self.net_.forward(x, lengths, train=False)
            out.extend(logp[b, :L] for b, L in enumerate(lengths))
        return out

    def _decode(self, x, lengths):
        logp, _ = self.net_.forward(x, lengths, train=False)
        out = []
        for b, L in enumerate(lengths):
            pred = isolated_prediction(ctc_beam_search(logp[b, :L], self.beam_width))
            out.append((None if pred.rejected else pred.symbol - 1, pred.multi_symbol))
        return out


MODEL_KINDS = {"bilstm": BiLstmClassifier, "transformer-ctc": TransformerCtcClassifier}


def model_from_bytes(data: bytes) -> _SequenceClassifier:
    meta, tensors = nn.parse_checkpoint(data)
    cls = MODEL_KINDS[meta["kind"]]
    params = dict(meta["params"])
    feat_params = params.pop("featurizer")
    model = cls(**params)
    model.classes_ = np.asarray(meta["classes"])
    model.n_features_in_ = int(meta["n_features_in"])
    if feat_params is not None:
        feat_params["components"] = tuple(feat_params["components"])
        model.featurizer_ = PoseFeaturizer(**feat_params)
    else:
        model.featurizer_ = None
    model.net_ = model._build(model.n_features_in_, len(model.classes_), nn.make_rng(0))
    model.net_.params.load_state(tensors)
    return model


def load_model(path) -> _SequenceClassifier:
    with open(path, "rb") as f:
        return model_from_bytes(f.read())


# --------------------------------------------------------------------------- #
# functional entry points


def train(model: _SequenceClassifier, dataset: Sequence[LabeledSample], cfg: TrainConfig,
          eval_set: Sequence[LabeledSample] | None = None) -> list[dict]:
    """Fit ``model`` on labeled samples with ``cfg``; returns the per-epoch history."""
    if not dataset:
        raise EmptyDataset("cannot train on an empty dataset")
    model.set_params(batch_size=cfg.batch_size, epochs=cfg.epochs, random_state=cfg.seed,
                     learning_rate=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2,
                     adam_eps=cfg.adam_eps, flip_mode=cfg.flip_mode)
    X = [s.pose for s in dataset]
    y = [s.label for s in dataset]
    ev = None
    if eval_set:
        ev = ([s.pose for s in eval_set], [s.label for s in eval_set])
    model.fit(X, y, eval_set=ev)
    return model.history_


def evaluate(model: _SequenceClassifier, dataset: Sequence[LabeledSample]):
    """Eval-mode accuracy plus one PredictionOutcome per sample, in input order."""
    if not dataset:
        return 0.0, []
    details = model.predict_details([s.pose for s in dataset])
    outcomes = []
    for s, (pred, flag) in zip(dataset, details):
        outcomes.append(PredictionOutcome(
            sample_id=s.sample_id,
            true_label=int(s.label),
            predicted_label=pred,
            correct=pred is not None and pred == s.label,
            dominant_hand_presence=dominant_hand_presence(s.pose),
            multi_symbol_flag=flag,
        ))
    accuracy = float(np.mean([o.correct for o in outcomes]))
    return accuracy, outcomes


def history_to_ndjson(history: list[dict]) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in history)
