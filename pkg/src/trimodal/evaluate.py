"""Downstream protocol: linear probes on frozen encoders.

A probe is one linear layer trained with cross-entropy on cached embeddings
(video-only, or video and audio embeddings concatenated video-first). The
encoders never receive gradients; their parameters are bitwise untouched.

Test-set accuracy averages logits over several clips per video. Clip 0 is
the stored feature block; further clips are fresh noise draws around the
sample's class template, read from the dataset's meta record (the synthetic
stand-in for sampling extra temporal crops).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt_mod
from .data import Manifest, Record, sample_audio, sample_video
from .encoders import EncoderStack, ModalityFeatures
from .errors import AvailabilityError, ConfigError, FormatError
from .layers import Linear
from .ltf import load_ltf
from .optim import Adam
from .rng import Stream
from .tensor import Tensor, backward, cross_entropy_rows

MODES = ("video", "audio+video")
TEST_SPLITS = ("test1", "test2", "test3")


@dataclass
class ProbeConfig:
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 50
    seed: int = 7


@dataclass
class ProbeHead:
    linear: Linear
    mode: str
    n_classes: int

    @property
    def d_in(self) -> int:
        return self.linear.W.shape[0]

    def logits(self, feats: np.ndarray) -> np.ndarray:
        return feats @ self.linear.W.data + self.linear.b.data


@dataclass
class SplitResult:
    split: str
    top1: float
    n: int
    n_excluded: int
    per_class: dict[int, float]
    class_counts: dict[int, tuple[int, int]] = field(default_factory=dict)  # label -> (hits, scored)


@dataclass
class EvalReport:
    mode: str
    clips_per_video: int
    splits: dict[str, SplitResult] = field(default_factory=dict)
    mean_top1: float = 0.0
    per_class: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "clips_per_video": self.clips_per_video,
            "splits": {
                name: {"top1": r.top1, "n": r.n, "n_excluded": r.n_excluded,
                       "per_class": {str(k): v for k, v in sorted(r.per_class.items())},
                       "class_counts": {str(k): list(v) for k, v in sorted(r.class_counts.items())}}
                for name, r in self.splits.items()
            },
            "mean_top1": self.mean_top1,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        rep = cls(mode=d["mode"], clips_per_video=d["clips_per_video"],
                  mean_top1=d["mean_top1"],
                  per_class={int(k): v for k, v in d["per_class"].items()})
        for name, r in d["splits"].items():
            rep.splits[name] = SplitResult(
                split=name, top1=r["top1"], n=r["n"], n_excluded=r["n_excluded"],
                per_class={int(k): v for k, v in r["per_class"].items()},
                class_counts={int(k): tuple(v) for k, v in r.get("class_counts", {}).items()})
        return rep


def fuse_embeddings(z_v: Tensor, z_a: Tensor | None) -> Tensor:
    """Concatenate frozen embeddings video-first: [z_v ; z_a]."""
    if z_a is None:
        raise AvailabilityError("fuse_embeddings: audio embedding missing")
    if z_v.data.ndim != 1 or z_a.data.ndim != 1:
        raise ConfigError("fuse_embeddings expects 1-D embeddings")
    return Tensor(np.concatenate([z_v.data, z_a.data]))


def _embed(stack: EncoderStack, feats: ModalityFeatures, mode: str) -> np.ndarray | None:
    """Frozen embedding for one sample; None when fusion lacks audio."""
    z_v = stack.encode_video(feats.video)
    if mode == "video":
        return z_v.data.copy()
    if not feats.has_audio:
        return None
    z_a = stack.encode_audio(feats.audio)
    return fuse_embeddings(z_v, z_a).data


class _ClipSource:
    """Regenerates extra clips from the dataset's class templates."""

    def __init__(self, manifest: Manifest, need_audio: bool, seed: int):
        self.manifest = manifest
        self.seed = seed
        if manifest.meta is None or "templates" not in manifest.meta:
            raise FormatError("dataset has no meta.json with templates; "
                              "multi-clip evaluation needs clips_per_video=1")
        self.cfg = dict(manifest.meta["config"])
        t = manifest.meta["templates"]
        self.m_video = load_ltf(manifest.root / t["video"]).data
        self.m_audio = load_ltf(manifest.root / t["audio"]).data if need_audio else None

    def clip(self, rec: Record, stored: ModalityFeatures, j: int) -> ModalityFeatures:
        if j == 0:
            return stored
        video = Tensor(sample_video(self.cfg, self.m_video[rec.label],
                                    (self.seed, "clip-video", rec.id, j)))
        audio = stored.audio
        if stored.has_audio and self.m_audio is not None:
            audio = Tensor(sample_audio(self.cfg, self.m_audio[rec.label],
                                        (self.seed, "clip-audio", rec.id, j)))
        return ModalityFeatures(video=video, audio=audio, text=stored.text)


def train_probe(stack: EncoderStack, manifest: Manifest, mode: str,
                probe_cfg: ProbeConfig | None = None) -> ProbeHead:
    """Fit a linear head on frozen train-split embeddings."""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    probe_cfg = probe_cfg or ProbeConfig()
    records = manifest.records_for("train")
    feats, labels = [], []
    for rec in records:
        emb = _embed(stack, manifest.load_features(rec), mode)
        if emb is None:
            continue  # fusion probe trains only where audio exists
        feats.append(emb)
        labels.append(rec.label)
    if not feats:
        raise AvailabilityError(
            "no usable training samples for this probe mode (audio+video requires "
            "at least one training sample with audio)")
    x = np.stack(feats)
    y = np.array(labels, dtype=np.int64)
    n_classes = manifest.n_classes

    head = Linear(x.shape[1], n_classes, probe_cfg.seed, "probe")
    adam = Adam(head.parameters())
    for epoch in range(probe_cfg.epochs):
        order = Stream(probe_cfg.seed, "probe-batches", epoch).permutation(len(x))
        for start in range(0, len(order), probe_cfg.batch_size):
            idx = order[start:start + probe_cfg.batch_size]
            loss = cross_entropy_rows(head.forward(Tensor(x[idx])), y[idx])
            adam.zero_grad()
            backward(loss)
            adam.step(probe_cfg.lr)
    return ProbeHead(linear=head, mode=mode, n_classes=n_classes)


def evaluate(stack: EncoderStack, head: ProbeHead, manifest: Manifest, split: str,
             clips_per_video: int = 1, seed: int = 1234) -> SplitResult:
    """Top-1 accuracy on one split, averaging logits over clips per video."""
    if clips_per_video < 1:
        raise ConfigError("clips_per_video must be >= 1")
    records = manifest.records_for(split)
    if not records:
        raise ConfigError(f"split {split!r} is empty")
    source = None
    if clips_per_video > 1:
        source = _ClipSource(manifest, need_audio=(head.mode == "audio+video"), seed=seed)
    hits: dict[int, int] = {}
    totals: dict[int, int] = {}
    n_excluded = 0
    n_scored = 0
    correct = 0
    for rec in records:
        stored = manifest.load_features(rec)
        clip_embs = []
        for j in range(clips_per_video):
            feats = stored if source is None else source.clip(rec, stored, j)
            emb = _embed(stack, feats, head.mode)
            if emb is None:
                break
            clip_embs.append(emb)
        if len(clip_embs) < clips_per_video:
            n_excluded += 1
            continue
        logits = head.logits(np.stack(clip_embs)).mean(axis=0)
        pred = int(np.argmax(logits))
        n_scored += 1
        totals[rec.label] = totals.get(rec.label, 0) + 1
        if pred == rec.label:
            correct += 1
            hits[rec.label] = hits.get(rec.label, 0) + 1
    if n_scored == 0:
        raise AvailabilityError(f"split {split!r} has no scorable videos in mode {head.mode!r}")
    per_class = {k: hits.get(k, 0) / t for k, t in sorted(totals.items())}
    counts = {k: (hits.get(k, 0), t) for k, t in sorted(totals.items())}
    return SplitResult(split=split, top1=correct / n_scored, n=n_scored,
                       n_excluded=n_excluded, per_class=per_class, class_counts=counts)


def evaluate_all_splits(stack: EncoderStack, head: ProbeHead, manifest: Manifest,
                        clips_per_video: int = 1, seed: int = 1234,
                        splits: tuple[str, ...] = TEST_SPLITS) -> EvalReport:
    """Per-split accuracy plus the arithmetic mean over the requested splits."""
    report = EvalReport(mode=head.mode, clips_per_video=clips_per_video)
    hits: dict[int, int] = {}
    totals: dict[int, int] = {}
    for split in splits:
        res = evaluate(stack, head, manifest, split, clips_per_video, seed)
        report.splits[split] = res
        for k, (h, t) in res.class_counts.items():
            hits[k] = hits.get(k, 0) + h
            totals[k] = totals.get(k, 0) + t
    report.mean_top1 = sum(r.top1 for r in report.splits.values()) / len(report.splits)
    report.per_class = {k: hits[k] / totals[k] for k in sorted(totals)}
    return report


def save_probe(path, head: ProbeHead) -> None:
    blob = json.dumps({"mode": head.mode, "n_classes": head.n_classes},
                      sort_keys=True).encode("utf-8")
    ckpt_mod._write_archive(path, [
        ("param.probe.W", head.linear.W.data),
        ("param.probe.b", head.linear.b.data),
        ("config", np.frombuffer(blob, dtype=np.uint8)),
    ])


def load_probe(path) -> ProbeHead:
    entries = ckpt_mod._read_archive(path)
    blob = json.loads(entries["config"].tobytes().decode("utf-8"))
    w = entries["param.probe.W"]
    head = Linear(w.shape[0], w.shape[1], 0, "probe")
    head.W.data[...] = w
    head.b.data[...] = entries["param.probe.b"]
    return ProbeHead(linear=head, mode=blob["mode"], n_classes=blob["n_classes"])
