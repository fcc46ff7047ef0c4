"""Versioned checkpoint container.

A checkpoint is a single .npz holding named parameter arrays, an optional
bag of extra arrays (optimizer moments), and a JSON metadata record with
the format version plus the configuration the parameters were built from.
The config travels as both the full JSON and a sha256 digest so consumers
can cheaply refuse parameter sets that do not match their own config.
"""

import json
import hashlib

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def config_digest(config):
    """sha256 over the canonical JSON form of a config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def save_checkpoint(path, params, config, extra=None, meta=None):
    """Write parameters (name -> Tensor or array) and their config to path."""
    arrays = {}
    names = sorted(params)
    for name in names:
        p = params[name]
        arrays[f"p.{name}"] = p.data if hasattr(p, "data") else np.asarray(p)
    if extra:
        for name, a in extra.items():
            arrays[f"x.{name}"] = np.asarray(a)
    record = {
        "version": FORMAT_VERSION,
        "config": config,
        "config_digest": config_digest(config),
        "param_names": names,
        "meta": meta or {},
    }
    arrays["__meta__"] = np.frombuffer(json.dumps(record).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


class Checkpoint:
    def __init__(self, params, config, digest, extra, meta):
        self.params = params
        self.config = config
        self.config_digest = digest
        self.extra = extra
        self.meta = meta


def load_checkpoint(path):
    """Read a checkpoint, validating format version and config digest."""
    with np.load(path) as z:
        if "__meta__" not in z:
            raise CheckpointError(f"{path}: not a checkpoint (missing metadata)")
        record = json.loads(bytes(z["__meta__"]).decode())
        version = record.get("version")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
        digest = config_digest(record["config"])
        if digest != record["config_digest"]:
            raise CheckpointError(f"{path}: config digest mismatch, file is corrupt")
        params = {}
        for name in record["param_names"]:
            key = f"p.{name}"
            if key not in z:
                raise CheckpointError(f"{path}: missing parameter {name}")
            params[name] = z[key]
        extra = {k[2:]: z[k] for k in z.files if k.startswith("x.")}
    return Checkpoint(params, record["config"], digest, extra, record["meta"])
