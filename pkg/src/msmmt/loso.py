"""Leave-one-subject-out evaluation: fold planning, per-fold training,
pooled metrics, and the loss-blend sweep.

Every distinct subject forms one test fold. Per fold a fresh model is
trained on the remaining subjects' precomputed modality images with the
blended contrastive + cross-entropy objective, then evaluated on the held
out subject. Aggregate scores pool all folds' predictions into a single
confusion matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .losses import contrastive_loss, cross_entropy, total_loss
from .metrics import MetricsReport, compute_metrics
from .model import MicroExpressionModel, ModelConfig
from .optim import AdamW

__all__ = [
    "Sample",
    "LOSOPlan",
    "TrainConfig",
    "FoldResult",
    "LOSOResult",
    "loso_split",
    "train_model",
    "evaluate",
    "run_loso",
    "run_alpha_sweep",
]

log = logging.getLogger("msmmt")


@dataclass
class Sample:
    """One clip's model inputs: the two modality images plus identifiers."""

    clip_id: str
    subject_id: str
    label: int
    dy_image: np.ndarray      # H x W x 3 in [0, 1]
    flowos_image: np.ndarray  # H x W x 3 in [0, 1]
    source: str = "unknown"


@dataclass
class Fold:
    test_subject: str
    train_ids: list[str]
    test_ids: list[str]


@dataclass
class LOSOPlan:
    folds: list[Fold]


def loso_split(samples: list[Sample]) -> LOSOPlan:
    """One fold per distinct subject, ordered by subject id."""
    subjects = sorted({s.subject_id for s in samples})
    if len(subjects) < 2:
        raise ValueError("leave-one-subject-out needs at least 2 subjects")
    ids = [s.clip_id for s in samples]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate clip ids in dataset")
    folds = []
    for subj in subjects:
        test_ids = [s.clip_id for s in samples if s.subject_id == subj]
        train_ids = [s.clip_id for s in samples if s.subject_id != subj]
        folds.append(Fold(test_subject=subj, train_ids=train_ids, test_ids=test_ids))
    return LOSOPlan(folds=folds)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    lr: float = 5e-5
    weight_decay: float = 0.05
    alpha: float = 0.1
    temperature: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


def _stack_inputs(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dy = np.stack([s.dy_image for s in samples])
    fl = np.stack([s.flowos_image for s in samples])
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return dy, fl, labels


def train_model(
    model: MicroExpressionModel,
    samples: list[Sample],
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Train in place; returns the mean blended loss per epoch."""
    opt = AdamW(model.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    dy, fl, labels = _stack_inputs(samples)
    n = len(samples)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            logits, dy_feat, fl_feat = model.forward(
                dy[idx], fl[idx], train=True, rng=rng
            )
            ce = cross_entropy(logits, labels[idx])
            con = contrastive_loss(dy_feat, fl_feat, cfg.temperature)
            loss = total_loss(ce, con, cfg.alpha)
            model.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += loss.item() * len(idx)
        history.append(epoch_loss / n)
    return history


def evaluate(
    model: MicroExpressionModel, samples: list[Sample], batch_size: int = 16
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eval-mode predictions: returns (labels, predictions, class scores)."""
    dy, fl, labels = _stack_inputs(samples)
    preds = []
    scores = []
    for start in range(0, len(samples), batch_size):
        logits, _, _ = model.forward(
            dy[start : start + batch_size], fl[start : start + batch_size], train=False
        )
        scores.append(logits.data.copy())
        preds.append(logits.data.argmax(axis=-1))
    return labels, np.concatenate(preds), np.concatenate(scores)


@dataclass
class FoldResult:
    test_subject: str
    metrics: MetricsReport
    train_accuracy: float
    clip_ids: list[str]
    labels: np.ndarray
    predictions: np.ndarray
    scores: np.ndarray


@dataclass
class LOSOResult:
    folds: list[FoldResult]
    aggregate: MetricsReport
    per_source: dict[str, MetricsReport] = field(default_factory=dict)

    @property
    def mean_train_accuracy(self) -> float:
        return float(np.mean([f.train_accuracy for f in self.folds]))


def run_loso(
    samples: list[Sample],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    fold_subjects: list[str] | None = None,
) -> LOSOResult:
    """Train and evaluate one fold per subject; pool predictions for the
    aggregate report. Deterministic given the configs' seeds."""
    plan = loso_split(samples)
    by_id = {s.clip_id: s for s in samples}
    num_classes = model_cfg.num_classes
    fold_results = []
    for fold_idx, fold in enumerate(plan.folds):
        if fold_subjects is not None and fold.test_subject not in fold_subjects:
            continue
        seed_seq = np.random.SeedSequence((train_cfg.seed, fold_idx))
        init_seed, data_seed = seed_seq.spawn(2)
        model = MicroExpressionModel(model_cfg, seed=int(init_seed.generate_state(1)[0]))
        rng = np.random.default_rng(data_seed)
        train_samples = [by_id[i] for i in fold.train_ids]
        test_samples = [by_id[i] for i in fold.test_ids]
        history = train_model(model, train_samples, train_cfg, rng)
        tr_labels, tr_preds, _ = evaluate(model, train_samples, train_cfg.batch_size)
        train_acc = float((tr_labels == tr_preds).mean())
        labels, preds, scores = evaluate(model, test_samples, train_cfg.batch_size)
        metrics = compute_metrics(labels, preds, num_classes)
        log.info(
            "fold %s: train acc %.3f, test acc %.3f (final loss %.4f)",
            fold.test_subject, train_acc, metrics.acc, history[-1],
        )
        fold_results.append(
            FoldResult(
                test_subject=fold.test_subject,
                metrics=metrics,
                train_accuracy=train_acc,
                clip_ids=fold.test_ids,
                labels=labels,
                predictions=preds,
                scores=scores,
            )
        )

    if not fold_results:
        known = [f.test_subject for f in plan.folds]
        raise ValueError(f"no folds selected; dataset subjects are {known}")
    all_labels = np.concatenate([f.labels for f in fold_results])
    all_preds = np.concatenate([f.predictions for f in fold_results])
    aggregate = compute_metrics(all_labels, all_preds, num_classes)

    per_source: dict[str, MetricsReport] = {}
    sources = sorted({by_id[cid].source for f in fold_results for cid in f.clip_ids})
    if len(sources) > 1:
        for src in sources:
            mask_labels, mask_preds = [], []
            for f in fold_results:
                for cid, lab, pred in zip(f.clip_ids, f.labels, f.predictions):
                    if by_id[cid].source == src:
                        mask_labels.append(lab)
                        mask_preds.append(pred)
            per_source[src] = compute_metrics(mask_labels, mask_preds, num_classes)
    return LOSOResult(folds=fold_results, aggregate=aggregate, per_source=per_source)


def run_alpha_sweep(
    samples: list[Sample],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    alphas: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(10)),
) -> list[tuple[float, MetricsReport]]:
    """Repeat the full LOSO run for each loss blend weight."""
    results = []
    for alpha in alphas:
        res = run_loso(samples, model_cfg, replace(train_cfg, alpha=alpha))
        log.info("alpha %.1f: UF1 %.4f UAR %.4f", alpha, res.aggregate.uf1, res.aggregate.uar)
        results.append((alpha, res.aggregate))
    return results
