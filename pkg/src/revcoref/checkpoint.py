"""Deterministic model checkpoints.

A checkpoint is a JSON header (sorted keys) followed by the named
parameter tensors as raw little-endian float64, concatenated in name
order. Identical model state produces byte-identical files.
"""

import json
from dataclasses import asdict

import numpy as np
import torch

from .model import CorefScorer, ModelConfig
from .span_repr import TokenVocab, TOY_TRAINABLE

SCHEMA_VERSION = 1
_MAGIC = b"REVCOREF\n"


def save_checkpoint(path, model: CorefScorer, metadata: dict = None):
    state = {k: v.detach().cpu().numpy().astype("<f8") for k, v in model.state_dict().items()}
    names = sorted(state)
    header = {
        "schema_version": SCHEMA_VERSION,
        "model_config": asdict(model.config),
        "metadata": metadata or {},
        "params": [{"name": n, "shape": list(state[n].shape)} for n in names],
    }
    if model.config.encoder.mode == TOY_TRAINABLE:
        header["vocab"] = model.encoder.vocab.pieces
        header["affect_width"] = model.encoder.affect_width
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for n in names:
            fh.write(state[n].tobytes())


def load_checkpoint(path, frozen_path=None):
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a revcoref checkpoint")
        size = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(size))
        if header["schema_version"] != SCHEMA_VERSION:
            raise ValueError(f"unsupported checkpoint schema {header['schema_version']}")
        config = ModelConfig(**header["model_config"])
        if config.encoder.mode == TOY_TRAINABLE:
            vocab = TokenVocab(header["vocab"])
            model = CorefScorer(config, vocab=vocab, affect_width=header["affect_width"])
        else:
            model = CorefScorer(config, frozen_path=frozen_path)
        state = {}
        for spec in header["params"]:
            n = int(np.prod(spec["shape"])) if spec["shape"] else 1
            arr = np.frombuffer(fh.read(n * 8), dtype="<f8").reshape(spec["shape"])
            state[spec["name"]] = torch.from_numpy(arr.copy())
    model.load_state_dict(state)
    return model, header["metadata"]
