"""Single-file checkpoints: parameters, optimizer state, RNG state, config.

Format: a numpy ``.npz`` archive (format version 1) containing

* ``meta`` — a uint8-encoded JSON document with the step counter, the
  full training and model configuration, the data contract (sample shape
  and value range), per-role initialization seeds, the prior RNG state,
  optimizer step counters, and a content hash of the configuration;
* ``param/<role>/<name>`` — one array per network parameter;
* ``opt/<role>/<key>`` — optimizer state arrays (moment estimates etc.).

Restoring a checkpoint and continuing reproduces the uninterrupted run's
trajectory exactly, because everything the loop consumes is either stored
here or derived deterministically from (config, step).
"""

import hashlib
import json
from dataclasses import asdict

import numpy as np

from .errors import ConfigurationError
from .networks import ModelConfig, ParameterSet
from .training import TrainState, TrainingConfig, LatentPrior, make_optimizer

FORMAT_VERSION = 1


def config_hash(config, model, sample_shape, value_range):
    """Stable hash of everything that defines a run apart from its data."""
    doc = {
        "config": config.to_dict(),
        "model": asdict(model),
        "sample_shape": list(sample_shape),
        "value_range": list(value_range),
    }
    blob = json.dumps(doc, sort_keys=True, default=list).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(path, state, extra=None):
    """Write a TrainState to ``path`` (.npz)."""
    meta = {
        "format_version": FORMAT_VERSION,
        "step": state.step,
        "config": state.config.to_dict(),
        "model": asdict(state.model),
        "sample_shape": list(state.sample_shape),
        "value_range": list(state.value_range),
        "config_hash": config_hash(state.config, state.model,
                                   state.sample_shape, state.value_range),
        "prior_rng_state": state.prior_rng.bit_generator.state,
        "init_seeds": {r: n.initialization_seed for r, n in state.networks.items()},
        "optimizer_steps": {r: o.t for r, o in state.optimizers.items()},
        "roles": list(state.networks.keys()),
        "extra": extra or {},
    }
    arrays = {}
    for role, net in state.networks.items():
        for name, value in net.params.items():
            arrays[f"param/{role}/{name}"] = value
    for role, opt in state.optimizers.items():
        for key, value in opt.state_arrays().items():
            arrays[f"opt/{role}/{key}"] = value
    meta_bytes = np.frombuffer(json.dumps(meta, default=list).encode(), dtype=np.uint8)
    np.savez(path, meta=meta_bytes, **arrays)


def read_meta(path):
    with np.load(path, allow_pickle=False) as archive:
        if "meta" not in archive:
            raise ConfigurationError(f"{path}: not a checkpoint file (no meta entry)")
        return json.loads(bytes(archive["meta"].tobytes()).decode())


def load_checkpoint(path):
    """Restore a TrainState (and the embedded configs) from ``path``."""
    with np.load(path, allow_pickle=False) as archive:
        if "meta" not in archive:
            raise ConfigurationError(f"{path}: not a checkpoint file (no meta entry)")
        meta = json.loads(bytes(archive["meta"].tobytes()).decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"{path}: unsupported checkpoint format version "
                f"{meta.get('format_version')!r}")
        arrays = {k: archive[k] for k in archive.files if k != "meta"}

    config = TrainingConfig.from_dict(meta["config"])
    model = ModelConfig(**{k: (tuple(v) if isinstance(v, list) else v)
                           for k, v in meta["model"].items()})
    sample_shape = tuple(meta["sample_shape"])
    value_range = tuple(meta["value_range"])

    nets, opts = {}, {}
    for role in meta["roles"]:
        spec = model.spec_for(role, config.d_z, sample_shape, value_range)
        prefix = f"param/{role}/"
        params = {}
        for name, _ in _ordered_param_names(spec):
            key = prefix + name
            if key not in arrays:
                raise ConfigurationError(f"{path}: missing parameter {key}")
            params[name] = arrays[key].astype(np.float64, copy=True)
        nets[role] = ParameterSet(spec=spec,
                                  initialization_seed=meta["init_seeds"][role],
                                  params=params)
        opt = make_optimizer(config, role)
        opt_prefix = f"opt/{role}/"
        opt.load_state({k[len(opt_prefix):]: v.astype(np.float64, copy=True)
                        for k, v in arrays.items() if k.startswith(opt_prefix)},
                       meta["optimizer_steps"][role])
        opts[role] = opt

    prior_rng = np.random.default_rng()
    prior_rng.bit_generator.state = meta["prior_rng_state"]

    return TrainState(
        config=config,
        model=model,
        networks=nets,
        optimizers=opts,
        prior=LatentPrior(config.d_z),
        prior_rng=prior_rng,
        sample_shape=sample_shape,
        value_range=value_range,
        step=int(meta["step"]),
    )


def _ordered_param_names(spec):
    from .networks import _layer_shapes
    return list(_layer_shapes(spec))
