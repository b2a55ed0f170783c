"""Bit-exact model persistence and attention export.

Checkpoint layout (all integers little-endian):

    bytes 0..3   magic "NPA1"
    u32          format version (currently 1)
    u32          config block length, then that many UTF-8 bytes of
                 flat key=value model config
    u32          tensor count
    per tensor:  u16 name length + UTF-8 name, u8 ndim, u32 per dim,
                 float32 little-endian values in row-major order
    u64          64-bit CRC-composition checksum of everything after the magic and
                 before the checksum itself

Values are stored as float32, so load(save(m)) reproduces every tensor
exactly after float32 rounding. Optimizer moments go to a separate
sidecar file with the same container so inference checkpoints stay
small. Writes are atomic (temp file then rename).

The attention export is line-delimited key=value text carrying, for
every prefix step of a basket: the prefix ids, each layer/channel's
pattern-attention distribution, the in-prefix context-attention weights,
and the top-k recommendations with scores.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from . import model as npa_model
from . import recommend as rec
from .config_io import model_config_from_kv, model_config_to_kv
from .errors import CheckpointError

MAGIC = b"NPA1"
VERSION = 1
EXPORT_SCHEMA_VERSION = 1

__all__ = [
    "EXPORT_SCHEMA_VERSION",
    "MAGIC",
    "VERSION",
    "checkpoint_info",
    "export_attention",
    "load_checkpoint",
    "load_optimizer_sidecar",
    "save_checkpoint",
    "save_optimizer_sidecar",
]


def _checksum64(data: bytes) -> int:
    # Two differently seeded CRC32 passes composed into one 64-bit word.
    hi = zlib.crc32(data)
    lo = zlib.crc32(data, 0x4E504131)
    return (hi << 32) | lo


def _pack_tensors(named) -> bytes:
    parts = [struct.pack("<I", len(named))]
    for name, arr in named:
        encoded = name.encode("utf-8")
        arr = np.asarray(arr)
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            parts.append(struct.pack("<I", dim))
        parts.append(arr.astype("<f4").tobytes(order="C"))
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError("truncated checkpoint file")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return struct.unpack("<B", self.take(1))[0]

    def u16(self):
        return struct.unpack("<H", self.take(2))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self.take(8))[0]


def _unpack_tensors(r: _Reader):
    count = r.u32()
    named = []
    for _ in range(count):
        name = r.take(r.u16()).decode("utf-8")
        ndim = r.u8()
        shape = tuple(r.u32() for _ in range(ndim))
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = r.take(4 * size)
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
        named.append((name, arr))
    return named


def _write_container(path, config_text: str, named_tensors):
    cfg = config_text.encode("utf-8")
    payload = struct.pack("<I", VERSION)
    payload += struct.pack("<I", len(cfg)) + cfg
    payload += _pack_tensors(named_tensors)
    blob = MAGIC + payload + struct.pack("<Q", _checksum64(payload))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def _read_container(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 12 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    payload, stored = blob[4:-8], struct.unpack("<Q", blob[-8:])[0]
    if _checksum64(payload) != stored:
        raise CheckpointError(f"{path}: checksum mismatch, file is corrupt")
    r = _Reader(payload)
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {VERSION}")
    config_text = r.take(r.u32()).decode("utf-8")
    named = _unpack_tensors(r)
    if r.pos != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - r.pos} trailing bytes")
    return config_text, named


def save_checkpoint(path, config, params) -> None:
    named = [(n, t.data) for n, t in npa_model.named_parameters(params)]
    _write_container(path, model_config_to_kv(config), named)


def load_checkpoint(path):
    """Rebuild (config, params) from a checkpoint file."""
    config_text, named = _read_container(path)
    config = model_config_from_kv(config_text)
    params = npa_model.init_params(config, seed=0)
    table = dict(named)
    expected = npa_model.named_parameters(params)
    missing = [n for n, _ in expected if n not in table]
    extra = [n for n in table if n not in {n for n, _ in expected}]
    if missing or extra:
        raise CheckpointError(
            f"{path}: tensor names do not match config (missing {missing}, extra {extra})")
    for name, tensor in expected:
        arr = table[name]
        if arr.shape != tensor.data.shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {arr.shape}, expected {tensor.data.shape}")
        tensor.data = arr.astype(np.float64)
    return config, params


def checkpoint_info(path) -> dict:
    """Config text and per-tensor shapes, without building a model."""
    config_text, named = _read_container(path)
    return {
        "version": VERSION,
        "config_text": config_text,
        "tensors": [(name, tuple(arr.shape)) for name, arr in named],
    }


def save_optimizer_sidecar(path, optimizer) -> None:
    hyper = "\n".join([
        f"lr = {optimizer.lr!r}",
        f"beta1 = {optimizer.beta1!r}",
        f"beta2 = {optimizer.beta2!r}",
        f"eps = {optimizer.eps!r}",
        f"weight_decay = {optimizer.weight_decay!r}",
    ]) + "\n"
    _write_container(path, hyper, optimizer.state_tensors())


def load_optimizer_sidecar(path, optimizer) -> None:
    _, named = _read_container(path)
    optimizer.load_state_tensors([(n, a.astype(np.float64)) for n, a in named])


def _fmt(values) -> str:
    return ",".join(f"{v:.8e}" for v in np.asarray(values, dtype=np.float64))


def export_attention(basket, config, params, path, k: int = 10, rng_seed=0,
                     scoring_kind=None, fesf_temperature: float = 1.0) -> None:
    """Write the per-step attention record file for one basket.

    One block per prefix step: the prefix, every layer/channel's pattern
    belief, the context-attention weights over the prefix items, and the
    step's top-k recommendations (k is clipped to the candidate count).
    """
    items = [int(i) for i in basket]
    state = npa_model.forward(items, config, params, rng_seed=rng_seed)
    emb = npa_model.output_embeddings(params).data
    plan = npa_model.layer_channel_plan(config)

    lines = [
        f"schema_version={EXPORT_SCHEMA_VERSION}",
        f"basket={','.join(str(i) for i in items)}",
        f"variant={config.variant}",
        f"num_layers={config.num_layers}",
        f"channels={','.join(str(c) for c, _ in plan)}",
        f"num_patterns={config.num_patterns}",
        f"steps={len(items)}",
    ]
    final = np.stack([ctx.data for ctx in state.contexts])  # (contexts, steps, dim)
    if scoring_kind is None:
        scoring_kind = rec.SOFTMAX if final.shape[0] == 1 else rec.FESF
    for t in range(len(items)):
        prefix = items[:t + 1]
        lines.append(f"step={t} prefix={','.join(str(i) for i in prefix)}")
        for li, states in enumerate(state.unit_states):
            for ci, unit_state in enumerate(states):
                abar = unit_state.prefix_attention.data[t]
                lines.append(f"pattern step={t} layer={li} channel={ci} probs={_fmt(abar)}")
                b_row = unit_state.context_attention.data[t, :t + 1]
                lines.append(f"context step={t} layer={li} channel={ci} weights={_fmt(b_row)}")
        candidates = config.num_items - len(set(prefix))
        kk = min(k, candidates)
        vec = rec.score_contexts(final[:, t, :], emb, scoring_kind, fesf_temperature)
        ranked = rec.rank_items(vec.scores, exclude=set(prefix), k=kk)
        lines.append(
            f"topk step={t} items={','.join(str(i) for i in ranked)}"
            f" scores={_fmt([vec.scores[i] for i in ranked])}")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
