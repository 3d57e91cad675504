"""Feed-forward classifier on node representation vectors.

Every linear layer, the last one included, is followed by ELU; a softmax
or sigmoid head is applied to the final ELU output.  Hidden entries are
either layer widths (ints) or dropout rates (floats in (0, 1)), so
``[96, 128, 0.1, 256]`` puts a dropout layer after the 128-wide layer.

Weights are stored as ``(fan_in, fan_out)`` matrices applied as ``X @ W + b``.
Everything is float64 numpy; training is deterministic for a given seed.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from . import matio
from .errors import DataError, NumericalError
from .features import FeatureMatrix, NormStats, SplitAssignment, apply_normalizer, fit_normalizer

ELU_ALPHA = 1.0
HEADS = ("softmax", "sigmoid")

HiddenEntry = Union[int, float]


def parse_hidden(text: str | Sequence[HiddenEntry]) -> tuple[HiddenEntry, ...]:
    """``"96,128,0.1,256"`` -> ``(96, 128, 0.1, 256)``; ``""`` or ``"[]"`` -> ``()``."""
    if not isinstance(text, str):
        return tuple(text)
    s = text.strip().strip("[]").strip()
    if not s:
        return ()
    out: list[HiddenEntry] = []
    for tok in s.split(","):
        tok = tok.strip()
        out.append(float(tok) if any(c in tok for c in ".eE") else int(tok))
    return tuple(out)


def format_hidden(hidden: Sequence[HiddenEntry]) -> str:
    return "[" + ",".join(repr(h) if isinstance(h, float) else str(h) for h in hidden) + "]"


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[HiddenEntry, ...] = ()
    output_dim: int = 1
    head: str = "softmax"

    def __post_init__(self):
        object.__setattr__(self, "hidden", parse_hidden(self.hidden))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")
        for h in self.hidden:
            if isinstance(h, float):
                if not 0.0 < h < 1.0:
                    raise ValueError(f"dropout rate {h} outside (0, 1)")
            elif int(h) < 1:
                raise ValueError(f"layer width {h} must be >= 1")

    def linear_shapes(self) -> list[tuple[int, int]]:
        widths = [self.input_dim] + [int(h) for h in self.hidden if not isinstance(h, float)] + [self.output_dim]
        return list(zip(widths[:-1], widths[1:]))

    def ops(self) -> list[tuple[str, float]]:
        """Layer program: ``("linear", i)``, ``("elu", 0)`` and ``("dropout", rate)`` steps."""
        prog: list[tuple[str, float]] = []
        k = 0
        for h in self.hidden:
            if isinstance(h, float):
                prog.append(("dropout", h))
            else:
                prog += [("linear", k), ("elu", 0)]
                k += 1
        prog += [("linear", k), ("elu", 0)]
        return prog


def count_parameters(spec: MlpSpec) -> int:
    """Weights plus biases of every linear layer; dropout layers own nothing."""
    return sum(i * o + o for i, o in spec.linear_shapes())


# --------------------------------------------------------------------------
# Model math
# --------------------------------------------------------------------------

Params = list[tuple[np.ndarray, np.ndarray]]


def init_params(spec: MlpSpec, rng: np.random.Generator) -> Params:
    params = []
    for fan_in, fan_out in spec.linear_shapes():
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        params.append((W, b))
    return params


def elu(x: np.ndarray, alpha: float = ELU_ALPHA) -> np.ndarray:
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def softmax(y: np.ndarray) -> np.ndarray:
    z = np.exp(y - y.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def sigmoid(y: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * y))


def apply_head(y: np.ndarray, head: str) -> np.ndarray:
    return softmax(y) if head == "softmax" else sigmoid(y)


def _forward(spec: MlpSpec, params: Params, X: np.ndarray, rng: np.random.Generator | None):
    """Run the layer program, caching what backprop needs; ``rng`` enables dropout."""
    cache = []
    h = X
    for op, arg in spec.ops():
        if op == "linear":
            W, b = params[int(arg)]
            cache.append(("linear", int(arg), h))
            h = h @ W + b
        elif op == "elu":
            cache.append(("elu", 0, h))
            h = elu(h)
        elif rng is not None:
            keep = 1.0 - arg
            mask = (rng.random(h.shape) < keep) / keep
            cache.append(("dropout", 0, mask))
            h = h * mask
    return h, cache


def forward(model: "TrainedModel | tuple[MlpSpec, Params]", batch: np.ndarray, mode: str = "eval",
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(logits, head_outputs)``; logits are the final ELU output.

    ``batch`` is taken as already normalized.  Dropout runs only in
    ``train`` mode and needs ``rng``.
    """
    spec, params = (model.spec, model.params) if isinstance(model, TrainedModel) else model
    X = np.asarray(batch, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ValueError(f"batch must be (B, {spec.input_dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "train" and rng is None:
        rng = np.random.default_rng(0)
    y, _ = _forward(spec, params, X, rng if mode == "train" else None)
    return y, apply_head(y, spec.head)


def loss_and_grad(spec: MlpSpec, params: Params, X: np.ndarray, target: np.ndarray,
                  rng: np.random.Generator | None = None) -> tuple[float, Params]:
    """Mean loss over the batch and its gradient with respect to every parameter.

    Softmax heads take integer class targets (cross-entropy); sigmoid heads
    take 0/1 matrices (binary cross-entropy averaged over all entries).
    """
    y, cache = _forward(spec, params, X, rng)
    B = X.shape[0]
    if spec.head == "softmax":
        shifted = y - y.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1))
        rows = np.arange(B)
        loss = float(np.mean(logz - shifted[rows, target]))
        dy = np.exp(shifted - logz[:, None])
        dy[rows, target] -= 1.0
        dy /= B
    else:
        # log(1 + e^y) computed stably
        loss = float(np.mean(np.logaddexp(0.0, y) - target * y))
        dy = (sigmoid(y) - target) / target.size
    grads: list = [None] * len(params)
    g = dy
    for op, idx, saved in reversed(cache):
        if op == "elu":
            g = g * np.where(saved > 0, 1.0, ELU_ALPHA * np.exp(np.minimum(saved, 0.0)))
        elif op == "dropout":
            g = g * saved
        else:
            W, _ = params[idx]
            grads[idx] = (saved.T @ g, g.sum(axis=0))
            g = g @ W.T
    return loss, grads


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

def accuracy(scores: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the label."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DataError("empty evaluation set")
    return float(np.mean(np.argmax(scores, axis=1) == labels))


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-statistic AUC; tied scores count one half."""
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined with a single class")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class AucReport:
    mean: float
    per_label: np.ndarray
    excluded: list[int]


def mean_roc_auc(scores: np.ndarray, targets: np.ndarray) -> AucReport:
    """Mean of per-label AUCs, skipping labels that have a single class in ``targets``."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets))
    if scores.shape != targets.shape:
        raise DataError(f"scores {scores.shape} and targets {targets.shape} differ")
    per = np.full(targets.shape[1], np.nan)
    excluded = []
    for t in range(targets.shape[1]):
        col = targets[:, t]
        if col.min() == col.max():
            excluded.append(t)
            continue
        per[t] = roc_auc(scores[:, t], col)
    if len(excluded) == targets.shape[1]:
        raise DataError("every label is single-class; mean ROC-AUC undefined")
    return AucReport(float(np.nanmean(per)), per, excluded)


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

@dataclass
class TrainConfig:
    seed: int = 0
    step_size: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 10
    eval_every: int = 0
    loss: str = "auto"
    normalize: bool = True

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_every < 0:
            raise ValueError("eval_every must be >= 0")
        if self.loss not in ("auto", "cross_entropy", "binary_cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    valid_metric: list[tuple[int, int, float]] = field(default_factory=list)  # (epoch, step, value)


@dataclass(eq=False)
class TrainedModel:
    spec: MlpSpec
    params: Params
    norm_stats: NormStats | None = None
    history: History = field(default_factory=History)
    seed: int | None = None
    best_epoch: int = 0
    best_metric: float = -np.inf
    epochs_run: int = 0
    stop_reason: str = ""

    def n_parameters(self) -> int:
        return sum(W.size + b.size for W, b in self.params)

    def prepare(self, X) -> np.ndarray:
        X = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
        if self.norm_stats is not None:
            X = apply_normalizer(X, self.norm_stats).values
        return X

    def predict(self, X, rows: np.ndarray | None = None, batch_size: int = 65536) -> np.ndarray:
        """Head outputs for raw (un-normalized) features."""
        X = self.prepare(X)
        if rows is not None:
            X = X[rows]
        out = [forward(self, X[i:i + batch_size])[1] for i in range(0, len(X), batch_size)]
        return np.vstack(out) if out else np.zeros((0, self.spec.output_dim))


class _Adam:
    def __init__(self, params: Params, lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.t = 0
        self.m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        self.v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for (p_pair, g_pair, m_pair, v_pair) in zip(params, grads, self.m, self.v):
            for p, g, m, v in zip(p_pair, g_pair, m_pair, v_pair):
                m *= self.b1
                m += (1.0 - self.b1) * g
                v *= self.b2
                v += (1.0 - self.b2) * g * g
                p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _check_targets(spec: MlpSpec, y: np.ndarray, loss: str) -> str:
    if loss == "auto":
        loss = "cross_entropy" if spec.head == "softmax" else "binary_cross_entropy"
    if (loss == "cross_entropy") != (spec.head == "softmax"):
        raise DataError(f"loss {loss} does not match head {spec.head}")
    if spec.head == "softmax":
        if y.ndim != 1:
            raise DataError("softmax head needs one integer class per node")
    elif y.ndim != 2 or y.shape[1] != spec.output_dim:
        raise DataError(f"sigmoid head needs an (N, {spec.output_dim}) 0/1 target matrix")
    return loss


def default_metric(spec: MlpSpec) -> str:
    return "accuracy" if spec.head == "softmax" else "roc_auc"


def score(model: TrainedModel, X: np.ndarray, y: np.ndarray, rows: np.ndarray, metric: str) -> float:
    """Metric of ``model`` on ``rows``; ``X`` is already normalized."""
    out = np.vstack([forward(model, X[rows[i:i + 65536]])[1] for i in range(0, len(rows), 65536)])
    if metric == "accuracy":
        return accuracy(out, y[rows])
    return mean_roc_auc(out, y[rows]).mean


MetricFn = Callable[[TrainedModel, int, int], float]


def train(
    X: FeatureMatrix | np.ndarray,
    y: np.ndarray,
    split: SplitAssignment,
    spec: MlpSpec,
    cfg: TrainConfig | None = None,
    metric_fn: MetricFn | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainedModel:
    """Minibatch Adam with early stopping on the validation metric.

    Training stops once ``cfg.patience`` epochs pass without a strict
    improvement, or after ``cfg.max_epochs``.  The returned model holds the
    weights snapshotted at the best validation evaluation.  ``metric_fn``
    replaces the built-in validation metric; it is called with the current
    model, the epoch (1-based) and the global step.
    """
    cfg = cfg or TrainConfig()
    y = np.asarray(y)
    Xv = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    if Xv.shape[1] != spec.input_dim:
        raise DataError(f"features have {Xv.shape[1]} columns, spec expects {spec.input_dim}")
    if len(y) != len(Xv) or len(split) != len(Xv):
        raise DataError("features, labels and split disagree on the node count")
    _check_targets(spec, y, cfg.loss)
    train_rows = split.train
    valid_rows = split.valid
    if len(train_rows) == 0:
        raise DataError("empty training set")
    if spec.head == "softmax":
        for name, rows in (("train", train_rows), ("valid", valid_rows)):
            labs = y[rows]
            if len(labs) and (labs.min() < 0 or labs.max() >= spec.output_dim):
                raise DataError(f"{name} labels outside [0, {spec.output_dim})")

    stats = fit_normalizer(Xv, train_rows) if cfg.normalize else None
    Xn = apply_normalizer(Xv, stats).values if stats is not None else Xv

    init_seq, shuffle_seq, drop_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    params = init_params(spec, np.random.default_rng(init_seq))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    drop_rng = np.random.default_rng(drop_seq)
    has_dropout = any(op == "dropout" for op, _ in spec.ops())
    opt = _Adam(params, cfg.step_size)
    model = TrainedModel(spec, params, stats, History(), seed=cfg.seed)
    metric = default_metric(spec)
    can_validate = metric_fn is not None or len(valid_rows) > 0

    best_params = copy.deepcopy(params)
    best_metric, best_epoch = -np.inf, 0
    step = 0
    epoch = 0

    def evaluate(epoch: int) -> None:
        nonlocal best_params, best_metric, best_epoch
        if metric_fn is not None:
            value = float(metric_fn(model, epoch, step))
        else:
            value = score(model, Xn, y, valid_rows, metric)
        model.history.valid_metric.append((epoch, step, value))
        if value > best_metric:
            best_metric, best_epoch = value, epoch
            best_params = copy.deepcopy(params)

    stop = "max_epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(train_rows)
        losses = []
        for i in range(0, len(order), cfg.batch_size):
            rows = order[i:i + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):  # divergence is caught just below
                loss, grads = loss_and_grad(spec, params, Xn[rows], y[rows], drop_rng if has_dropout else None)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}, step {step}")
            opt.step(params, grads)
            if not all(np.isfinite(W).all() and np.isfinite(b).all() for W, b in params):
                raise NumericalError(f"weights diverged at epoch {epoch}, step {step}")
            losses.append(loss)
            step += 1
            if can_validate and cfg.eval_every and step % cfg.eval_every == 0:
                evaluate(epoch)
        model.history.train_loss.append(float(np.mean(losses)))
        if log:
            log(f"epoch {epoch} loss {model.history.train_loss[-1]:.6f}")
        if can_validate and not cfg.eval_every:
            evaluate(epoch)
        if can_validate and epoch - best_epoch >= cfg.patience:
            stop = "patience"
            break

    model.epochs_run = epoch
    model.stop_reason = stop
    if can_validate and best_epoch > 0:
        model.params = best_params
        model.best_metric, model.best_epoch = best_metric, best_epoch
    else:
        model.params = [(W.copy(), b.copy()) for W, b in params]
        model.best_epoch = epoch
    return model


def _rows(split: SplitAssignment | np.ndarray | None, part: str, n: int) -> np.ndarray:
    if split is None:
        return np.arange(n)
    if isinstance(split, SplitAssignment):
        return split.indices(part)
    return np.asarray(split, dtype=np.int64)


def evaluate_accuracy(model: TrainedModel, X, y, split=None, part: str = "test") -> float:
    """Accuracy on the ``part`` rows of ``split`` (or on explicit row indices)."""
    y = np.asarray(y)
    rows = _rows(split, part, len(y))
    if len(rows) == 0:
        raise DataError("empty evaluation set")
    return accuracy(model.predict(X, rows), y[rows])


def evaluate_mean_roc_auc(model: TrainedModel, X, Y, split=None, part: str = "test") -> AucReport:
    Y = np.asarray(Y)
    rows = _rows(split, part, len(Y))
    if len(rows) == 0:
        raise DataError("empty evaluation set")
    return mean_roc_auc(model.predict(X, rows), Y[rows])


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def save_model(directory: str | os.PathLike, model: TrainedModel, extra: dict | None = None) -> None:
    """Manifest ``model.txt`` plus one GCMAT1 file per weight matrix and bias."""
    os.makedirs(directory, exist_ok=True)
    record = {
        "input_dim": model.spec.input_dim,
        "hidden": format_hidden(model.spec.hidden),
        "output_dim": model.spec.output_dim,
        "head": model.spec.head,
        "elu_alpha": ELU_ALPHA,
        "n_parameters": count_parameters(model.spec),
        "n_linear": len(model.params),
        "seed": model.seed,
        "best_epoch": model.best_epoch,
        "best_valid_metric": model.best_metric,
        "epochs_run": model.epochs_run,
        "stop_reason": model.stop_reason,
        "normalized": model.norm_stats is not None,
    }
    record.update(extra or {})
    matio.write_kv(os.path.join(directory, "model.txt"), record)
    for i, (W, b) in enumerate(model.params):
        matio.write_matrix(os.path.join(directory, f"layer{i}_W.gcmat"), W)
        matio.write_matrix(os.path.join(directory, f"layer{i}_b.gcmat"), b.reshape(1, -1))
    if model.norm_stats is not None:
        matio.write_matrix(os.path.join(directory, "norm_mu.gcmat"), model.norm_stats.mu.reshape(1, -1))
        matio.write_matrix(os.path.join(directory, "norm_sigma.gcmat"), model.norm_stats.sigma.reshape(1, -1))
    with open(os.path.join(directory, "history.txt"), "w", encoding="utf-8") as fh:
        for e, loss in enumerate(model.history.train_loss, start=1):
            fh.write(f"train_loss {e} {loss!r}\n")
        for e, s, v in model.history.valid_metric:
            fh.write(f"valid_metric {e} {s} {v!r}\n")


def load_model(directory: str | os.PathLike) -> TrainedModel:
    rec = matio.read_kv(os.path.join(directory, "model.txt"))
    spec = MlpSpec(int(rec["input_dim"]), parse_hidden(rec["hidden"]), int(rec["output_dim"]), rec["head"])
    params = []
    for i in range(int(rec["n_linear"])):
        W = matio.read_matrix(os.path.join(directory, f"layer{i}_W.gcmat"))
        b = matio.read_matrix(os.path.join(directory, f"layer{i}_b.gcmat")).ravel()
        params.append((W, b))
    stats = None
    if rec.get("normalized") == "true":
        stats = NormStats(matio.read_matrix(os.path.join(directory, "norm_mu.gcmat")).ravel(),
                          matio.read_matrix(os.path.join(directory, "norm_sigma.gcmat")).ravel())
    seed = rec.get("seed")
    model = TrainedModel(spec, params, stats, seed=None if seed in (None, "None") else int(seed))
    model.best_epoch = int(rec.get("best_epoch", 0))
    model.best_metric = float(rec.get("best_valid_metric", "-inf"))
    model.epochs_run = int(rec.get("epochs_run", 0))
    model.stop_reason = rec.get("stop_reason", "")
    if [(W.shape, b.shape) for W, b in params] != [((i, o), (o,)) for i, o in spec.linear_shapes()]:
        raise DataError(f"{directory}: weight shapes do not match the manifest")
    return model
