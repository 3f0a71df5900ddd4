"""Pre-training loop: batches -> embeddings -> contrastive losses -> Adam.

Fully deterministic given (seed, config, dataset): batch order is keyed on
(seed, epoch), augmentation noise on (seed, epoch, batch, slot), and the
optimizer state rides along in every checkpoint, so resuming from an
epoch-aligned checkpoint reproduces the uninterrupted run bitwise.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Batch, BatchSample, augment_audio, load_manifest, make_batches
from .encoders import EncoderStack, ModalityFeatures
from .errors import ConfigError, NumericError, TrainingAborted
from .losses import LossConfig, compute_centroids, loss_total
from .optim import Adam, CosineSchedule
from .rng import Stream
from .tensor import backward


@dataclass
class TrainResult:
    checkpoint_path: Path
    log_path: Path
    steps: int
    epochs_done: int
    final_loss: float
    epoch_checkpoints: dict[int, Path] = field(default_factory=dict)


def _stack_from_config(cfg: dict, seed: int) -> EncoderStack:
    d = cfg["data"]
    m = cfg["model"]
    return EncoderStack(
        d_video_raw=d["d_video"], d_audio_raw=d["d_audio"], vocab=d["vocab"],
        d_model=m["d_model"], n_heads=m["n_heads"], n_layers=m["n_layers"],
        d_ff=m["d_ff"], d_proj=m["d_proj"], audio_hidden=m["audio_hidden"],
        max_text_len=m["max_text_len"], seed=seed,
    )


def _loss_config(cfg: dict) -> LossConfig:
    loss = cfg["loss"]
    return LossConfig(tau=loss["tau"], enabled_terms=tuple(loss["terms"]),
                      term_weights=dict(loss["weights"]))


def _augmented(batch: Batch, sigma: float, seed: int, epoch: int, batch_idx: int) -> Batch:
    if sigma <= 0:
        return batch
    parent = Stream(seed, "augseed", epoch, batch_idx)
    child_seeds = parent.u64(len(batch.samples))
    out = []
    for slot, s in enumerate(batch.samples):
        if s.features.has_audio:
            noisy = augment_audio(s.features.audio, sigma, int(child_seeds[slot]))
            out.append(BatchSample(s.id, s.label, ModalityFeatures(
                video=s.features.video, audio=noisy, text=s.features.text)))
        else:
            out.append(s)
    return Batch(out)


def pretrain(cfg: dict, data_dir, out_path, log_path=None, resume=None) -> TrainResult:
    """Run pre-training and write the final checkpoint plus a JSONL log.

    `cfg` is a fully-resolved config document (see `config.resolve_config`).
    With `resume`, training continues from an epoch-aligned checkpoint using
    the configuration stored inside it.
    """
    out_path = Path(out_path)
    log_path = Path(log_path) if log_path else out_path.with_suffix(out_path.suffix + ".log.jsonl")
    manifest = load_manifest(data_dir)

    if resume is not None:
        ck = load_checkpoint(resume)
        cfg = ck.config
        stack, adam = ck.stack, ck.adam
        start_epoch, global_step = ck.epochs_done, ck.step
        log_mode = "a"
    else:
        seed_value = cfg["train"]["seed"]
        if seed_value is None:
            raise ConfigError("train.seed is required (set it in the config or pass --seed)")
        stack = _stack_from_config(cfg, int(seed_value))
        adam = Adam(stack.parameters(),
                    beta1=cfg["optim"]["beta1"], beta2=cfg["optim"]["beta2"],
                    eps=cfg["optim"]["eps"], grad_clip=cfg["optim"]["grad_clip"])
        start_epoch, global_step = 0, 0
        log_mode = "w"

    seed = int(cfg["train"]["seed"])
    epochs = int(cfg["train"]["epochs"])
    batch_size = int(cfg["train"]["batch_size"])
    sigma_aug = float(cfg["train"]["augment_sigma_audio"])
    checkpoint_every = int(cfg["train"]["checkpoint_every"])
    loss_cfg = _loss_config(cfg)
    use_centroids = "avt" in loss_cfg.enabled_terms

    n_train = len(manifest.records_for("train"))
    steps_per_epoch = (n_train + batch_size - 1) // batch_size
    schedule = CosineSchedule(lr_max=cfg["optim"]["lr_max"], lr_min=cfg["optim"]["lr_min"],
                              total_steps=max(1, epochs * steps_per_epoch),
                              warmup_steps=cfg["optim"]["warmup_steps"])

    epoch_ckpts: dict[int, Path] = {}
    final_loss = float("nan")
    with open(log_path, log_mode) as log:
        for epoch in range(start_epoch, epochs):
            batches = make_batches(manifest, "train", batch_size, seed, epoch)
            fully_skipped = 0
            for b_idx, batch in enumerate(batches):
                t0 = time.monotonic()
                lr = schedule.lr_at(global_step)
                try:
                    emb = stack.embed_batch(_augmented(batch, sigma_aug, seed, epoch, b_idx),
                                            spaces=loss_cfg.enabled_terms)
                    cents = compute_centroids(emb) if use_centroids else None
                    lb = loss_total(emb, cents, loss_cfg)
                    if lb.total.requires_grad:
                        adam.zero_grad()
                        backward(lb.total)
                        adam.step(lr)
                    else:
                        fully_skipped += 1
                except NumericError as e:
                    raise TrainingAborted(
                        f"numeric failure at step {global_step}: {e}; "
                        f"last saved checkpoint retained") from e
                final_loss = lb.total.item()
                record = {
                    "step": global_step, "epoch": epoch, "lr": lr,
                    "L_AV": lb.terms["av"], "L_VT": lb.terms["vt"], "L_AVT": lb.terms["avt"],
                    "total": final_loss, "skipped_terms": list(lb.skipped),
                    "wall_ms": round((time.monotonic() - t0) * 1000.0, 3),
                }
                log.write(json.dumps(record) + "\n")
                global_step += 1
            if fully_skipped * 2 > len(batches):
                msg = (f"epoch {epoch}: {fully_skipped}/{len(batches)} batches had every "
                       "loss term skipped; check modality availability")
                warnings.warn(msg)
                log.write(json.dumps({"epoch": epoch, "warning": msg}) + "\n")
            if checkpoint_every > 0 and (epoch + 1) % checkpoint_every == 0 and epoch + 1 < epochs:
                ck_path = out_path.with_name(f"{out_path.stem}.epoch{epoch + 1:04d}{out_path.suffix}")
                save_checkpoint(ck_path, stack, adam, cfg, epoch + 1, global_step)
                epoch_ckpts[epoch + 1] = ck_path

    save_checkpoint(out_path, stack, adam, cfg, epochs, global_step)
    epoch_ckpts[epochs] = out_path
    return TrainResult(checkpoint_path=out_path, log_path=log_path, steps=global_step,
                       epochs_done=epochs, final_loss=final_loss,
                       epoch_checkpoints=epoch_ckpts)
