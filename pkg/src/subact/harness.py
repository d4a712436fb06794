"""Training loop, observation-ratio protocol, ablation sweeps, attention export and throughput."""
from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import tensor as T
from .data import (
    OBSERVATION_RATIOS,
    Dataset,
    GeneratorConfig,
    interpolate_nearest,
    pad_subactions,
    read_dataset,
    relabel_subactions,
    truncate_to_ratio,
)
from .errors import CompatibilityError, ConfigError, NumericError, TrainingDivergedError, UnsupportedVariantError
from .fusion import ATTENTION_VARIANTS, VARIANTS
from .labels import NONE_ID, LabelMap, MergeResult, Vocabulary, merge_labels, retrieve_text
from .model import ModelConfig, SubActionModel
from .objectives import LossWeights
from .oracle import SegmentationOracle, make_oracle, segmentation_accuracy
from .tensor.checkpoint import config_hash, load_state, save_state

log = logging.getLogger(__name__)

# published single-GPU figure; reported next to local measurements, never compared
REFERENCE_GPU_HZ = 29.0
ABLATIONS = ("seg_accuracy", "fusion", "semantic_loss", "text_retrieval")
SEG_ERROR_RATES = (0.8, 0.6, 0.4, 0.2, 0.0)


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    momentum: float = 0.9
    eps: float = 1e-8
    epochs: int = 30
    batch_size: int = 16

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if self.kind not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("optimizer needs epochs >= 0, batch_size >= 1 and lr > 0")


@dataclass
class RunConfig:
    train_path: str = "data/train.jsonl"
    test_path: str = "data/test.jsonl"
    labels_path: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    ratios: tuple[float, ...] = OBSERVATION_RATIOS
    train_ratio: float = 1.0
    oracle: dict = field(default_factory=lambda: {"kind": "ground_truth"})
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    merge_threshold: float = 0.9
    ablation_seeds: int = 3
    seed: int = 0
    out_dir: str = "runs/default"

    def to_json(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_json()
        d["ratios"] = list(self.ratios)
        d["optimizer"]["betas"] = list(self.optimizer.betas)
        if self.generator.topology is not None:
            d["generator"]["topology"] = [list(e) for e in self.generator.topology]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> RunConfig:
        obj = dict(obj)
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        if "model" in obj:
            obj["model"] = ModelConfig.from_json(obj["model"])
        if "loss" in obj:
            obj["loss"] = LossWeights(**obj["loss"])
        if "optimizer" in obj:
            obj["optimizer"] = OptimizerConfig(**obj["optimizer"])
        if "generator" in obj:
            g = dict(obj["generator"])
            if g.get("topology") is not None:
                g["topology"] = tuple(tuple(e) for e in g["topology"])
            obj["generator"] = GeneratorConfig(**g)
        if "ratios" in obj:
            obj["ratios"] = tuple(float(r) for r in obj["ratios"])
        return cls(**obj)

    @classmethod
    def load(cls, path: Path) -> RunConfig:
        return cls.from_json(json.loads(Path(path).read_text()))

    def hash(self) -> str:
        d = self.to_json()
        d.pop("out_dir")
        return config_hash(d)


def vocab_hash(vocab: Vocabulary, labels: LabelMap) -> str:
    return config_hash({"vocab": vocab.to_json(), "labels": labels.to_json()})


# data preparation


class Prepared(NamedTuple):
    motion: np.ndarray  # (n, frames, joints, 4)
    sub_ids: np.ndarray  # (n, L)
    y: np.ndarray  # (n,)
    seg_accuracy: np.ndarray  # (n,)
    ids: list[str]
    tracks: list  # oracle tracks after truncation


def prepare(dataset: Dataset, ratio: float, oracle: SegmentationOracle, frames: int, l_max: int) -> Prepared:
    """Truncate raw frames to ``ratio``, segment, resample to ``frames`` and pad the sub-action ids."""
    motions, subs, ys, accs, ids, tracks = [], [], [], [], [], []
    for s in dataset.samples:
        cut = truncate_to_ratio(s, ratio)
        track = oracle.segment(cut.motion, cut.track, cut.sample_id)
        motions.append(interpolate_nearest(cut.motion, frames).data)
        subs.append(pad_subactions(track, l_max).padded_labels)
        ys.append(cut.holistic_label)
        accs.append(segmentation_accuracy(track, cut.track))
        ids.append(cut.sample_id)
        tracks.append(track)
    return Prepared(
        np.stack(motions), np.array(subs, dtype=np.int64), np.array(ys, dtype=np.int64), np.array(accs), ids, tracks
    )


def merge_sub_labels(splits: Sequence[Dataset], threshold: float) -> tuple[list[Dataset], MergeResult]:
    """Collapse near-duplicate sub-action texts; "none" keeps id 0, groups follow in representative order."""
    labels = splits[0].labels
    texts = [labels.sub[i] for i in sorted(labels.sub) if i != NONE_ID]
    merged = merge_labels(texts, threshold)
    reps = sorted(set(merged.representative.values()))
    new_id = {text: k + 1 for k, text in enumerate(reps)}
    mapping = {NONE_ID: NONE_ID}
    mapping.update({i: new_id[merged.representative[t]] for i, t in labels.sub.items() if i != NONE_ID})
    new_labels = LabelMap(holistic=dict(labels.holistic), sub={NONE_ID: labels.sub[NONE_ID], **{v: k for k, v in new_id.items()}})
    return [relabel_subactions(d, mapping, new_labels) for d in splits], merged


# optimization


class Adam:
    def __init__(self, params: Sequence[T.Parameter], lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= self.b1
            m += (1.0 - self.b1) * p.grad
            v *= self.b2
            v += (1.0 - self.b2) * p.grad**2
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class Sgd:
    def __init__(self, params: Sequence[T.Parameter], lr=1e-2, momentum=0.9):
        self.params = list(params)
        self.lr, self.momentum = lr, momentum
        self.buf = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, b in zip(self.params, self.buf):
            if p.grad is None:
                continue
            b *= self.momentum
            b += p.grad
            p.data -= self.lr * b


def make_optimizer(cfg: OptimizerConfig, params):
    if cfg.kind == "adam":
        return Adam(params, cfg.lr, cfg.betas, cfg.eps)
    return Sgd(params, cfg.lr, cfg.momentum)


@dataclass
class TrainResult:
    model: SubActionModel
    epoch_loss: list[float]  # mean minibatch loss per epoch
    eval_loss: list[float]  # eval-mode training-set loss at init and after each epoch
    config_hash: str


def _batch_loss(model: SubActionModel, data: Prepared, idx, weights: LossWeights, where: str):
    """Loss tensor and value for one batch; a non-finite result aborts with the first offending op."""
    hol = data.y[idx] if weights.lambda2 > 0 else None
    try:
        out = model(data.motion[idx], data.sub_ids[idx], hol)
        loss, _, _ = model.loss(out, data.y[idx], weights)
        value = loss.item()
    except NumericError:
        loss, value = None, float("nan")
    if not np.isfinite(value):
        detail = _diagnose_nan(model, data.motion[idx], data.sub_ids[idx], hol, data.y[idx], weights)
        raise TrainingDivergedError(f"non-finite loss {where}: {detail}")
    return loss, value


def _dataset_loss(model: SubActionModel, data: Prepared, weights: LossWeights, batch: int = 64) -> float:
    model.eval()
    total = 0.0
    with T.no_grad():
        for i in range(0, len(data.y), batch):
            sl = np.arange(i, min(i + batch, len(data.y)))
            _, value = _batch_loss(model, data, sl, weights, "on the training set")
            total += value * len(sl)
    model.train()
    return total / len(data.y)


def _diagnose_nan(model, motion, sub_ids, hol, y, weights) -> str:
    try:
        with T.no_grad(), T.detect_anomaly():
            out = model(motion, sub_ids, hol)
            model.loss(out, y, weights)
    except NumericError as exc:
        return str(exc)
    return "loss became non-finite but no individual op produced a non-finite value"


def resolve_config(cfg: RunConfig, dataset: Dataset) -> RunConfig:
    """Take the skeleton topology from the data when the config leaves it empty."""
    if cfg.model.topology:
        return cfg
    return replace(cfg, model=replace(cfg.model, topology=dataset.samples[0].motion.topology))


def build_model(cfg: RunConfig, vocab: Vocabulary, labels: LabelMap, seed: int | None = None) -> SubActionModel:
    return SubActionModel(cfg.model, vocab, labels, cfg.seed if seed is None else seed)


def train(
    cfg: RunConfig,
    train_set: Dataset,
    vocab: Vocabulary | None = None,
    oracle: SegmentationOracle | None = None,
    prepared: Prepared | None = None,
) -> TrainResult:
    run_hash = cfg.hash()
    cfg = resolve_config(cfg, train_set)
    vocab = vocab or Vocabulary.from_labels(train_set.labels)
    oracle = oracle or make_oracle(cfg.oracle, train_set.labels.sub_classes())
    data = prepared or prepare(train_set, cfg.train_ratio, oracle, cfg.model.frames, cfg.model.l_max)
    model = build_model(cfg, vocab, train_set.labels)
    model.train()
    opt = make_optimizer(cfg.optimizer, model.parameters())
    rng = np.random.default_rng([cfg.seed, 99])
    weights = cfg.loss
    eval_loss = [_dataset_loss(model, data, weights)]
    epoch_loss = []
    n = len(data.y)
    bs = cfg.optimizer.batch_size
    for epoch in range(cfg.optimizer.epochs):
        order = rng.permutation(n)
        losses = []
        for i in range(0, n, bs):
            idx = np.sort(order[i : i + bs])
            loss, value = _batch_loss(model, data, idx, weights, f"at epoch {epoch}, batch {i // bs}")
            model.zero_grad()
            loss.backward()
            opt.step()
            losses.append(value)
        epoch_loss.append(float(np.mean(losses)))
        eval_loss.append(_dataset_loss(model, data, weights))
        log.info("epoch %d loss %.6f eval %.6f", epoch + 1, epoch_loss[-1], eval_loss[-1])
    model.eval()
    return TrainResult(model, epoch_loss, eval_loss, run_hash)


def evaluate_prepared(model: SubActionModel, data: Prepared, batch: int = 64) -> dict:
    model.eval()
    preds = []
    with T.no_grad():
        for i in range(0, len(data.y), batch):
            out = model(data.motion[i : i + batch], data.sub_ids[i : i + batch])
            preds.append(np.argmax(out.logits.data, axis=-1))
    pred = np.concatenate(preds)
    return {
        "top1": float(np.mean(pred == data.y)),
        "seg_accuracy": float(np.mean(data.seg_accuracy)),
        "n_samples": int(len(data.y)),
    }


def evaluate(model: SubActionModel, dataset: Dataset, ratio: float, oracle: SegmentationOracle | None = None) -> dict:
    oracle = oracle or make_oracle(None, dataset.labels.sub_classes())
    data = prepare(dataset, ratio, oracle, model.cfg.frames, model.cfg.l_max)
    return {"ratio": ratio, **evaluate_prepared(model, data)}


# checkpoints


def save_checkpoint(directory: Path, model: SubActionModel, run_hash: str, extra: dict | None = None) -> None:
    manifest = {
        "config_hash": run_hash,
        "vocab_hash": vocab_hash(model.vocab, model.labels),
        "model_config": model.cfg.to_json(),
        "vocab": model.vocab.to_json(),
        "labels": model.labels.to_json(),
        **(extra or {}),
    }
    save_state(Path(directory), model.state_dict(), manifest)


def load_checkpoint(directory: Path, dataset: Dataset | None = None, frames: int | None = None) -> tuple[SubActionModel, dict]:
    """Rebuild a model from ``checkpoint.bin`` + ``manifest.json``.

    With ``dataset`` given, its label vocabulary must match the checkpoint's.
    With ``frames`` overriding the trained length, length-dependent weights keep their fresh init.
    """
    state, manifest = load_state(Path(directory))
    vocab = Vocabulary.from_json(manifest["vocab"])
    labels = LabelMap.from_json(manifest["labels"])
    if dataset is not None:
        theirs = vocab_hash(Vocabulary.from_labels(dataset.labels), dataset.labels)
        if theirs != manifest["vocab_hash"]:
            raise CompatibilityError(
                f"dataset vocabulary hash {theirs} does not match checkpoint {manifest['vocab_hash']}"
            )
    cfg = ModelConfig.from_json(manifest["model_config"])
    strict = frames is None or frames == cfg.frames
    if not strict:
        cfg = replace(cfg, frames=frames)
    model = SubActionModel(cfg, vocab, labels, seed=0)
    model.load_state_dict(state, strict=strict)
    model.eval()
    return model, manifest


# output files


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_metrics(path: Path, rows: Sequence[dict], run_hash: str, param_count: int) -> None:
    header = ["ratio", "top1", "seg_accuracy", "n_samples", "parameter_count", "config_hash"]
    write_csv(
        path,
        header,
        [[r["ratio"], r["top1"], r["seg_accuracy"], r["n_samples"], param_count, run_hash] for r in rows],
    )


def write_loss_curve(path: Path, result: TrainResult) -> None:
    rows = [[0, "", result.eval_loss[0], result.config_hash]]
    rows += [[i + 1, l, e, result.config_hash] for i, (l, e) in enumerate(zip(result.epoch_loss, result.eval_loss[1:]))]
    write_csv(path, ["epoch", "train_loss", "eval_loss", "config_hash"], rows)


def load_splits(cfg: RunConfig) -> tuple[Dataset, Dataset]:
    labels = Path(cfg.labels_path) if cfg.labels_path else None
    return read_dataset(Path(cfg.train_path), labels), read_dataset(Path(cfg.test_path), labels)


def run_train(cfg: RunConfig, train_set: Dataset, test_set: Dataset, out: Path) -> TrainResult:
    result = train(cfg, train_set)
    save_checkpoint(out, result.model, result.config_hash, {"seed": cfg.seed, "train_ratio": cfg.train_ratio})
    write_loss_curve(out / "loss_curve.csv", result)
    oracle = make_oracle(cfg.oracle, test_set.labels.sub_classes())
    rows = [evaluate(result.model, test_set, r, oracle) for r in cfg.ratios]
    write_metrics(out / "metrics.csv", rows, result.config_hash, result.model.num_parameters())
    return result


# protocols


def ratio_tag(r: float) -> str:
    return f"{round(r * 100):d}"


def run_or_protocol(cfg: RunConfig, train_set: Dataset, test_set: Dataset, out: Path | None = None) -> dict:
    """Regime A trains and tests at each ratio; regime B tests the full-observation model at the partial ratios."""
    run_hash = cfg.hash()
    oracle = make_oracle(cfg.oracle, test_set.labels.sub_classes())
    regime_a, regime_b, seg_a, seg_b, models = {}, {}, {}, {}, {}
    for r in cfg.ratios:
        result = train(replace(cfg, train_ratio=r), train_set)
        models[r] = result.model
        ev = evaluate(result.model, test_set, r, oracle)
        regime_a[r], seg_a[r] = ev["top1"], ev["seg_accuracy"]
        if out is not None:
            save_checkpoint(out / f"or_{ratio_tag(r)}", result.model, run_hash, {"seed": cfg.seed, "train_ratio": r})
        log.info("regime A ratio %s top1 %.4f", r, ev["top1"])
    if 1.0 not in models:
        raise ConfigError("the protocol needs ratio 1.0 in the ratio list")
    for r in cfg.ratios:
        if r == 1.0:
            continue
        ev = evaluate(models[1.0], test_set, r, oracle)
        regime_b[r], seg_b[r] = ev["top1"], ev["seg_accuracy"]
    params = models[1.0].num_parameters()
    table = {"regime_a": regime_a, "regime_b": regime_b, "seg_a": seg_a, "seg_b": seg_b, "params": params, "config_hash": run_hash}
    if out is not None:
        header = ["method", "params"] + [f"A_{ratio_tag(r)}" for r in regime_a] + [f"B_{ratio_tag(r)}" for r in regime_b] + ["config_hash"]
        row = [cfg.model.fusion, params, *regime_a.values(), *regime_b.values(), run_hash]
        write_csv(out / "table.csv", header, [row])
        seg_header = ["regime"] + [ratio_tag(r) for r in cfg.ratios] + ["config_hash"]
        seg_rows = [["A", *[seg_a[r] for r in cfg.ratios], run_hash], ["B", *[seg_b.get(r, seg_a[r]) for r in cfg.ratios], run_hash]]
        write_csv(out / "seg_table.csv", seg_header, seg_rows)
    return table


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    return float(np.mean(values)), (float(statistics.stdev(values)) if len(values) > 1 else 0.0)


def ablation_settings(cfg: RunConfig, which: str) -> list[tuple[str, RunConfig]]:
    """(row name, config) pairs; each config is later run once per seed."""
    if which == "seg_accuracy":
        base = replace(cfg, model=replace(cfg.model, fusion="bypass"), loss=LossWeights(cfg.loss.lambda1 or 1.0, 0.0))
        rows = [("baseline", base)]
        for rate in SEG_ERROR_RATES:
            oracle = {"kind": "error_injected", "rate": rate} if rate > 0 else {"kind": "ground_truth"}
            rows.append((f"seg_acc_{ratio_tag(1 - rate)}", replace(cfg, oracle=oracle)))
        return rows
    if which == "fusion":
        return [(v, replace(cfg, model=replace(cfg.model, fusion=v))) for v in VARIANTS if v != "bypass"]
    if which == "semantic_loss":
        return [("full", cfg), ("no_semantic_loss", replace(cfg, loss=LossWeights(cfg.loss.lambda1 or 1.0, 0.0)))]
    if which == "text_retrieval":
        return [("full", cfg), ("no_text_retrieval", replace(cfg, model=replace(cfg.model, text_retrieval=False)))]
    raise ConfigError(f"unknown ablation {which!r}; choose from {ABLATIONS}")


def run_setting(sub_cfg: RunConfig, seeds: Sequence[int], train_set: Dataset, test_set: Dataset, tag: str = "") -> dict:
    """Train and test one ablation row once per seed; mean and sample sd of top-1."""
    vocab = Vocabulary.from_labels(train_set.labels)
    accs, segs = [], []
    for seed in seeds:
        oracle_spec = dict(sub_cfg.oracle)
        if oracle_spec.get("kind") == "error_injected":
            oracle_spec["seed"] = seed
        run_cfg = replace(sub_cfg, seed=seed, oracle=oracle_spec)
        oracle = make_oracle(oracle_spec, train_set.labels.sub_classes())
        result = train(run_cfg, train_set, vocab, oracle)
        ev = evaluate(result.model, test_set, 1.0, oracle)
        accs.append(ev["top1"])
        segs.append(ev["seg_accuracy"])
        log.info("ablation %s seed %d top1 %.4f", tag, seed, ev["top1"])
    mean, sd = _mean_sd(accs)
    return {"mean": mean, "sd": sd, "runs": accs, "seg_accuracy": float(np.mean(segs))}


def run_ablation(cfg: RunConfig, which: str, train_set: Dataset, test_set: Dataset, out: Path | None = None) -> dict:
    """Train every setting with ``cfg.ablation_seeds`` seeds; report mean and sample sd of top-1."""
    run_hash = cfg.hash()
    seeds = [cfg.seed + k for k in range(cfg.ablation_seeds)]
    results = {
        name: run_setting(sub_cfg, seeds, train_set, test_set, f"{which}/{name}") for name, sub_cfg in ablation_settings(cfg, which)
    }
    if out is not None:
        rows = [
            [name, r["mean"], r["sd"], r["seg_accuracy"], ";".join(repr(a) for a in r["runs"]), run_hash]
            for name, r in results.items()
        ]
        write_csv(out / "table.csv", ["setting", "mean_top1", "sd_top1", "seg_accuracy", "runs", "config_hash"], rows)
    return results


# inspection


def export_attention(
    model: SubActionModel,
    dataset: Dataset,
    sample_id: str,
    out: Path,
    ratio: float = 1.0,
    oracle: SegmentationOracle | None = None,
    run_hash: str = "",
) -> dict:
    """Write the T'xT' attention matrix (CSV) and its profile plus label metadata (JSON)."""
    if not model.has_attention:
        raise UnsupportedVariantError(f"fusion variant {model.cfg.fusion!r} has no attention weights")
    samples = dataset.by_id()
    if sample_id not in samples:
        raise ConfigError(f"sample {sample_id!r} not in dataset")
    single = Dataset([samples[sample_id]], dataset.labels)
    oracle = oracle or make_oracle(None, dataset.labels.sub_classes())
    data = prepare(single, ratio, oracle, model.cfg.frames, model.cfg.l_max)
    model.eval()
    with T.no_grad():
        attn = model(data.motion, data.sub_ids).attention.data[0]
    profile = attn.mean(axis=0)
    track = data.tracks[0]
    meta = {
        "sample_id": sample_id,
        "ratio": ratio,
        "holistic_label": int(data.y[0]),
        "holistic_text": retrieve_text(int(data.y[0]), dataset.labels, "holistic"),
        "sub_actions": [
            {"class": c, "text": retrieve_text(c, dataset.labels, "sub"), "start": a, "end": b} for c, a, b in track.segments
        ],
        "raw_frames": int(truncate_to_ratio(samples[sample_id], ratio).motion.frames),
        "tokens": int(attn.shape[0]),
        "profile": profile.tolist(),
        "config_hash": run_hash,
    }
    directory = Path(out) / "attention"
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / f"{sample_id}.csv", attn, delimiter=",", fmt="%.17g")
    (directory / f"{sample_id}.json").write_text(json.dumps(meta, indent=2) + "\n")
    return {"attention": attn, "profile": profile, "meta": meta}


def measure_throughput(model: SubActionModel, sequence_length: int, repetitions: int, sample=None) -> dict:
    """Median single-sequence eval-mode forward time at ``sequence_length`` frames."""
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    if model.cfg.frames != sequence_length:
        state = model.state_dict()
        model = SubActionModel(replace(model.cfg, frames=sequence_length), model.vocab, model.labels, seed=0)
        model.load_state_dict(state, strict=False)
    model.eval()
    rng = np.random.default_rng(0)
    cfg = model.cfg
    if sample is not None:
        motion = interpolate_nearest(sample.motion, sequence_length).data[None]
        sub = np.array([pad_subactions(sample.track, cfg.l_max).padded_labels])
    else:
        motion = rng.normal(size=(1, sequence_length, cfg.joints, cfg.channels))
        sub = rng.integers(1, model.labels.n_sub, size=(1, cfg.l_max))
    times = []
    with T.no_grad():
        model(motion, sub)  # warm-up
        for _ in range(repetitions):
            t0 = time.perf_counter()
            model(motion, sub)
            times.append(time.perf_counter() - t0)
    median = statistics.median(times)
    return {
        "sequence_length": sequence_length,
        "repetitions": repetitions,
        "median_seconds": median,
        "sequences_per_second": 1.0 / median,
        "parameter_count": model.num_parameters(),
        "reference_hz": REFERENCE_GPU_HZ,
    }
