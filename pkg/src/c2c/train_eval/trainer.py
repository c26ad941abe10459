"""Training loop, evaluation and the scenario pipelines (C2C, D2C, B2C and ablation arms)."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from ..audio_io import PIPELINE_RATE, DatasetSplit, load_wav, resample_linear
from ..augment import example_seed, feature_mask, fix_length, random_shift
from ..config import PipelineConfig
from ..errors import ConfigError, NumericalError
from ..features import LOG_MEL, RAW_FRAME, extract_features, feature_dim
from ..model.network import C2CModel
from ..preprocess import preprocess_pipeline
from .metrics import bce_loss, roc_auc
from .optim import AdamState, adam_step, lr_schedule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    name: str
    modalities: tuple = ("cough",)
    preprocess: bool = True
    frontend: str = LOG_MEL
    augment: bool = True


SCENARIOS = {
    "C2C": Scenario("C2C"),
    "D2C": Scenario("D2C", modalities=("breath",)),
    "B2C": Scenario("B2C", modalities=("cough", "breath")),
    "no_preprocess": Scenario("no_preprocess", preprocess=False),
    "raw_frontend": Scenario("raw_frontend", frontend=RAW_FRAME),
    "no_augment": Scenario("no_augment", augment=False),
}


def get_scenario(name):
    if isinstance(name, Scenario):
        return name
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r} (choose from {', '.join(SCENARIOS)})") from None


@dataclass
class EvalReport:
    scenario: str
    roc_auc: float
    n_pos: int
    n_neg: int
    config_fingerprint: str
    scores: list = field(default_factory=list)

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "roc_auc": self.roc_auc,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "config_fingerprint": self.config_fingerprint,
            "scores": self.scores,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d):
        return cls(d["scenario"], d["roc_auc"], d["n_pos"], d["n_neg"], d["config_fingerprint"], d["scores"])


@dataclass
class Example:
    id: str
    label: int
    paths: dict


@dataclass
class TrainResult:
    model: C2CModel
    report: EvalReport
    epoch_losses: list
    alpha_history: list

    def __iter__(self):
        return iter((self.model, self.report))


def build_examples(entries, modalities, root=None):
    """One example per clip for a single modality, one per subject for fusion."""
    def resolve(p):
        return p if root is None or os.path.isabs(p) else os.path.join(root, p)

    if len(modalities) == 1:
        return [Example(e.clip_path, e.label, {modalities[0]: resolve(e.clip_path)})
                for e in entries if e.modality == modalities[0]]
    by_subject: dict[str, dict] = {}
    labels = {}
    for e in entries:
        by_subject.setdefault(e.subject_id, {}).setdefault(e.modality, resolve(e.clip_path))
        labels.setdefault(e.subject_id, e.label)
    return [Example(sid, labels[sid], paths) for sid, paths in by_subject.items()
            if all(m in paths for m in modalities)]


class ClipStore:
    """Loads, resamples and (optionally) segments each clip once."""

    def __init__(self, cfg: PipelineConfig, preprocess: bool):
        self.cfg = cfg
        self.preprocess = preprocess
        self._cache = {}

    def get(self, path):
        clip = self._cache.get(path)
        if clip is None:
            clip = resample_linear(load_wav(path), PIPELINE_RATE)
            if self.preprocess:
                clip = preprocess_pipeline(clip, self.cfg.preprocess)
            self._cache[path] = clip
        return clip


def clip_features(clip, scenario: Scenario, cfg: PipelineConfig, seed=None):
    """Fixed-length clip -> (F, T) model input; ``seed=None`` means evaluation."""
    augment = seed is not None and scenario.augment
    if augment:
        crop_seed, shift_seed, mask_seed = np.random.SeedSequence(seed).generate_state(3)
        clip = fix_length(clip, cfg.augment.segment_sec, int(crop_seed))
        clip = random_shift(clip, cfg.augment, int(shift_seed))
    else:
        clip = fix_length(clip, cfg.augment.segment_sec)
    feats = extract_features(clip, scenario.frontend, cfg.frontend)
    feats = feats.with_data(feats.data - feats.data.mean(axis=0, keepdims=True))
    if augment:
        feats = feature_mask(feats, cfg.augment, int(mask_seed))
    return feats.data.T


def _batch_inputs(examples, store, scenario, cfg, seeds):
    inputs = {}
    for k, modality in enumerate(scenario.modalities):
        rows = []
        for ex, seed in zip(examples, seeds):
            s = None if seed is None else [seed, k]
            rows.append(clip_features(store.get(ex.paths[modality]), scenario, cfg, s))
        inputs[modality] = np.stack(rows)
    return inputs


def make_model(scenario: Scenario, cfg: PipelineConfig):
    enc = replace(cfg.encoder, in_dim=feature_dim(scenario.frontend, cfg.frontend))
    return C2CModel(enc, cfg.classifier, scenario.modalities, seed=cfg.train.seed)


def predict(model, examples, store, scenario, cfg, batch_size=None):
    batch_size = batch_size or cfg.train.batch_size
    probs = []
    for i in range(0, len(examples), batch_size):
        chunk = examples[i:i + batch_size]
        inputs = _batch_inputs(chunk, store, scenario, cfg, [None] * len(chunk))
        probs.append(model(inputs).data.reshape(-1))
    return np.concatenate(probs) if probs else np.zeros(0)


def evaluate(model, examples, store, scenario, cfg, fingerprint=""):
    probs = predict(model, examples, store, scenario, cfg)
    labels = np.array([ex.label for ex in examples])
    if not np.all(np.isfinite(probs)):
        raise NumericalError("non-finite predictions during evaluation")
    auc = roc_auc(probs, labels)
    scores = [{"id": ex.id, "score": float(p), "label": int(ex.label)} for ex, p in zip(examples, probs)]
    return EvalReport(scenario.name, auc, int(labels.sum()), int(len(labels) - labels.sum()), fingerprint, scores)


def train(split: DatasetSplit, scenario, cfg: PipelineConfig = PipelineConfig(), root=None, store=None,
          progress=None) -> TrainResult:
    """Train one scenario on ``split.train`` and evaluate on ``split.validation``.

    Deterministic in ``cfg.train.seed``.  ``root`` resolves relative clip paths.
    """
    scenario = get_scenario(scenario)
    tcfg = cfg.train
    train_ex = build_examples(split.train, scenario.modalities, root)
    val_ex = build_examples(split.validation, scenario.modalities, root)
    if not train_ex:
        raise ConfigError(f"scenario {scenario.name}: no training examples for modalities {scenario.modalities}")
    store = store or ClipStore(cfg, scenario.preprocess)
    model = make_model(scenario, cfg)
    params = model.parameters()
    state = AdamState()
    scales = {"fusion.raw_alpha": tcfg.alpha_lr_scale}
    fingerprint = cfg.fingerprint(scenario.name)

    n = len(train_ex)
    steps = math.ceil(n / tcfg.batch_size)
    epoch_losses, alpha_history = [], []
    for epoch in range(tcfg.epochs):
        order = np.random.default_rng([tcfg.seed, epoch]).permutation(n)
        total = 0.0
        for step in range(steps):
            idx = order[step * tcfg.batch_size:(step + 1) * tcfg.batch_size]
            batch = [train_ex[i] for i in idx]
            seeds = [example_seed(tcfg.seed, epoch, int(i)) for i in idx]
            inputs = _batch_inputs(batch, store, scenario, cfg, seeds)
            loss = bce_loss(model(inputs), [ex.label for ex in batch])
            if not np.isfinite(loss.data):
                raise NumericalError(f"{scenario.name}: loss became {loss.item()} at epoch {epoch}, step {step}")
            model.zero_grad()
            loss.backward()
            adam_step(params, state, lr_schedule(epoch + step / steps, tcfg), scales)
            total += loss.item() * len(batch)
        epoch_losses.append(total / n)
        alpha_history.append(model.alpha)
        log.debug("%s epoch %d loss %.4f", scenario.name, epoch, epoch_losses[-1])
        if progress is not None:
            progress(epoch, epoch_losses[-1])

    report = evaluate(model, val_ex, store, scenario, cfg, fingerprint)
    return TrainResult(model, report, epoch_losses, alpha_history)
