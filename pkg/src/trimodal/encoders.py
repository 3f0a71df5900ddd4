"""Modality encoders and projection heads.

Three transformer encoders (audio / video / text) share a model width; a
single linear head per latent space (audio-video, video-text, and the joint
tri-modal space) projects encoder outputs, followed by L2 normalization so
similarities stay in [-1, 1] before temperature scaling.

Batch embedding is strictly per-sample: a sample's embeddings and projections
never depend on which other samples share the batch, which is what makes
masked losses bitwise equal to their physically reduced sub-batch versions.
Missing modalities yield zero-filled rows that are disconnected from the
graph, so they receive and send exactly zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import AvailabilityError, ShapeError
from .layers import MLP, EmbeddingTable, Linear, TransformerEncoder, mean_pool
from .tensor import Tensor

SPACES = {"av": ("a", "v"), "vt": ("v", "t"), "avt": ("a", "v", "t")}


@dataclass
class ModalityFeatures:
    """One sample's raw inputs: video frames always, audio/text optional."""

    video: Tensor                      # [T_v, d_video_raw]
    audio: Tensor | None = None        # [T_a, d_audio_raw]
    text: np.ndarray | None = None     # [L] int token ids

    @property
    def has_audio(self) -> bool:
        return self.audio is not None

    @property
    def has_text(self) -> bool:
        return self.text is not None


@dataclass
class EmbeddingSet:
    """Per-batch encoder outputs and unit-norm projections.

    Rows of unavailable modalities are zero-filled; `avail_a` / `avail_t`
    say which rows are real. Masked rows are graph-disconnected constants.
    """

    z_a: Tensor
    z_v: Tensor
    z_t: Tensor
    proj: dict[tuple[str, str], Tensor] = field(default_factory=dict)
    avail_a: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    avail_t: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n(self) -> int:
        return self.z_v.shape[0]

    def availability(self, modality: str) -> np.ndarray:
        if modality == "a":
            return self.avail_a
        if modality == "t":
            return self.avail_t
        if modality == "v":
            return np.ones(self.n, dtype=bool)
        raise ValueError(f"unknown modality {modality!r}")


class EncoderStack:
    """All trainable components: front-ends, encoders f_a/f_v/f_t, heads."""

    def __init__(self, *, d_video_raw: int, d_audio_raw: int, vocab: int,
                 d_model: int = 64, n_heads: int = 4, n_layers: int = 2,
                 d_ff: int | None = None, d_proj: int = 32,
                 audio_hidden: int | None = None, max_text_len: int = 128,
                 seed: int = 0):
        d_ff = 2 * d_model if d_ff is None else d_ff
        audio_hidden = d_model if audio_hidden is None else audio_hidden
        self.dims = {
            "d_video_raw": d_video_raw, "d_audio_raw": d_audio_raw, "vocab": vocab,
            "d_model": d_model, "n_heads": n_heads, "n_layers": n_layers,
            "d_ff": d_ff, "d_proj": d_proj, "audio_hidden": audio_hidden,
            "max_text_len": max_text_len,
        }
        self.d_model = d_model
        self.d_proj = d_proj
        self.max_text_len = max_text_len
        self.video_in = Linear(d_video_raw, d_model, seed, "video_in")
        self.audio_mlp = MLP(d_audio_raw, audio_hidden, d_model, seed, "audio_mlp")
        self.text_embed = EmbeddingTable(vocab, d_model, seed, "text_embed")
        self.f_a = TransformerEncoder(d_model, n_heads, n_layers, d_ff, seed, "f_a")
        self.f_v = TransformerEncoder(d_model, n_heads, n_layers, d_ff, seed, "f_v")
        self.f_t = TransformerEncoder(d_model, n_heads, n_layers, d_ff, seed, "f_t")
        self.heads = {
            "av": Linear(d_model, d_proj, seed, "g_av"),
            "vt": Linear(d_model, d_proj, seed, "g_vt"),
            "avt": Linear(d_model, d_proj, seed, "g_avt"),
        }

    # -- single-sample encoders ------------------------------------------

    def encode_video(self, video: Tensor) -> Tensor:
        return mean_pool(self.f_v.forward(self.video_in.forward(video)))

    def encode_audio(self, audio: Tensor | None) -> Tensor:
        if audio is None:
            raise AvailabilityError("encode_audio called on a sample without audio")
        return mean_pool(self.f_a.forward(self.audio_mlp.forward(audio)))

    def encode_text(self, token_ids) -> Tensor:
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.ndim != 1 or ids.size < 1:
            raise ShapeError("text must be a non-empty 1-D id sequence")
        if ids.size > self.max_text_len:
            raise ShapeError(f"text length {ids.size} exceeds maximum {self.max_text_len}")
        return mean_pool(self.f_t.forward(self.text_embed.lookup(ids)))

    # -- projections ------------------------------------------------------

    def project(self, z: Tensor, space: str, modality: str) -> Tensor:
        """Map [n, d_model] rows into the requested latent space (unit rows)."""
        if space not in SPACES or modality not in SPACES[space]:
            raise ShapeError(f"invalid (space, modality) pair ({space!r}, {modality!r})")
        return T.l2_normalize_rows(self.heads[space].forward(z))

    def _project_row(self, z_row: Tensor, space: str) -> Tensor:
        """Project one [d_model] embedding; per-sample so batch makeup is irrelevant."""
        return T.l2_normalize_rows(self.heads[space].forward(T.stack_rows([z_row])))

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = (self.video_in.parameters() + self.audio_mlp.parameters()
               + self.text_embed.parameters())
        for enc in (self.f_a, self.f_v, self.f_t):
            out.extend(enc.parameters())
        for space in ("av", "vt", "avt"):
            out.extend(self.heads[space].parameters())
        return out

    # -- batch embedding ---------------------------------------------------

    def embed_batch(self, batch, spaces: tuple[str, ...] = ("av", "vt", "avt")) -> EmbeddingSet:
        """Encode and project every sample of a batch (see data.Batch).

        `spaces` restricts the computed projections (and the encoders they
        need) when some loss terms are disabled; the default covers all.
        """
        samples = batch.samples
        if not samples:
            raise ShapeError("embed_batch: empty batch")
        for space in spaces:
            if space not in SPACES:
                raise ShapeError(f"unknown latent space {space!r}")
        needed = {"v"} | {m for space in spaces for m in SPACES[space]}
        n = len(samples)
        avail_a = np.array([s.features.has_audio for s in samples], dtype=bool)
        avail_t = np.array([s.features.has_text for s in samples], dtype=bool)

        zero_model = Tensor(np.zeros(self.d_model))
        zero_proj = Tensor(np.zeros(self.d_proj))
        rows = {"a": [], "v": [], "t": []}
        proj_rows: dict[tuple[str, str], list[Tensor]] = {
            (space, m): [] for space in spaces for m in SPACES[space]
        }
        for s in samples:
            z = {"v": self.encode_video(s.features.video), "a": None, "t": None}
            if "a" in needed and s.features.has_audio:
                z["a"] = self.encode_audio(s.features.audio)
            if "t" in needed and s.features.has_text:
                z["t"] = self.encode_text(s.features.text)
            for m in ("a", "v", "t"):
                rows[m].append(z[m] if z[m] is not None else zero_model)
            for space in spaces:
                for m in SPACES[space]:
                    if z[m] is None:
                        proj_rows[(space, m)].append(zero_proj)
                    else:
                        flat = self._project_row(z[m], space)
                        proj_rows[(space, m)].append(_as_vector(flat))

        return EmbeddingSet(
            z_a=T.stack_rows(rows["a"]),
            z_v=T.stack_rows(rows["v"]),
            z_t=T.stack_rows(rows["t"]),
            proj={key: T.stack_rows(vals) for key, vals in proj_rows.items()},
            avail_a=avail_a,
            avail_t=avail_t,
        )


def _as_vector(row_matrix: Tensor) -> Tensor:
    """[1, d] -> [d] (graph-preserving)."""
    d = row_matrix.shape[1]

    def back(g):
        return (g[None, :].copy(),)

    return T._node(row_matrix.data[0].copy(), (row_matrix,), back, "as_vector")
