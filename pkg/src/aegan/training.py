"""Alternating minimax training of the four-network scaffold.

Three modes share one loop:

* ``aegan`` — all four networks, all six loss components
* ``gan``   — generator + sample discriminator, generated-sample term only
* ``aae``   — generator + encoder + latent discriminator, encoded-latent
  term plus sample reconstruction

Each step performs two phases.  Phase one ascends both discriminators on
their adversarial components while the generator and encoder are held
fixed (their outputs are computed outside the tape).  Phase two descends
the generator and encoder jointly on the generator-side loss while the
discriminators are frozen.  Every phase draws fresh latent vectors; one
draw feeds the whole generation/cycle path of that phase, mirroring the
scaffold's wiring, and the latent discriminator's real side gets its own
draw.

Determinism: network initializations, shuffling, and prior draws all
derive from ``TrainingConfig.seed`` through fixed, role-specific streams.
Because initialization streams are per-role, runs that share a seed share
the initial parameters of whichever networks they have in common,
regardless of mode.
"""

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import data as data_mod
from . import losses as losses_mod
from . import networks, tape
from .errors import ConfigurationError, NumericalAbort, UsageError
from .losses import LossBreakdown, ReconWeights
from .networks import ModelConfig

MODES = ("aegan", "gan", "aae")
OPTIMIZERS = ("sgd", "momentum", "adaptive_moment")

MODE_ROLES = {
    "aegan": ("generator", "encoder", "sample_discriminator", "latent_discriminator"),
    "gan": ("generator", "sample_discriminator"),
    "aae": ("generator", "encoder", "latent_discriminator"),
}

# fixed sub-stream ids hanging off the master seed
_STREAMS = {
    "generator": 0,
    "encoder": 1,
    "sample_discriminator": 2,
    "latent_discriminator": 3,
    "shuffle": 4,
    "prior": 5,
}

METRICS_HEADER = ("step", "mode", "gan_x_hat", "gan_x_tilde", "gan_z_hat",
                  "gan_z_tilde", "recon_x", "recon_z", "total")


@dataclass(frozen=True)
class LatentPrior:
    """Standard multivariate normal over the latent space."""

    dimension: int = 32


def sample_prior(prior, n, rng):
    """Draw n i.i.d. standard-normal latent vectors from ``rng``."""
    if n < 1:
        raise UsageError(f"cannot draw {n} latent vectors; need n >= 1")
    return rng.standard_normal((int(n), prior.dimension))


def stream_seed(master_seed, stream, extra=()):
    """Derive a deterministic child seed for one named stream."""
    key = (_STREAMS[stream], *extra) if isinstance(stream, str) else (stream, *extra)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return int(seq.generate_state(1)[0])


@dataclass
class TrainingConfig:
    """Every hyperparameter of a training run."""

    mode: str = "aegan"
    batch_size: int = 16
    total_steps: int = 10000
    d_z: int = 32
    recon_weights: ReconWeights = field(default_factory=ReconWeights)
    learning_rate_g_e: float = 2e-4
    learning_rate_d: float = 2e-4
    optimizer: str = "adaptive_moment"
    generator_loss_variant: str = "non_saturating"
    seed: int = 0
    checkpoint_every: int = 1000
    log_every: int = 10
    discriminator_updates: int = 1
    latent_recon_squared: bool = False
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    momentum: float = 0.9

    def validate(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode: unknown mode {self.mode!r}; expected {MODES}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(
                f"optimizer: unknown optimizer {self.optimizer!r}; expected {OPTIMIZERS}")
        if self.generator_loss_variant not in ("minimax", "non_saturating"):
            raise ConfigurationError(
                f"generator_loss_variant: unknown variant {self.generator_loss_variant!r}")
        for name, minimum in (("batch_size", 1), ("d_z", 1), ("checkpoint_every", 1),
                              ("log_every", 1), ("discriminator_updates", 1)):
            if getattr(self, name) < minimum:
                raise ConfigurationError(f"{name}: must be >= {minimum}")
        if self.total_steps < 0:
            raise ConfigurationError("total_steps: must be >= 0")
        for name in ("learning_rate_g_e", "learning_rate_d"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name}: must be a positive finite number")

    def to_dict(self):
        d = asdict(self)
        w = d.pop("recon_weights")
        d["lambda_rx"] = w["lambda_rx"]
        d["lambda_rz"] = w["lambda_rz"]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        weights = ReconWeights(d.pop("lambda_rx", 1.0), d.pop("lambda_rz", 1.0))
        return cls(recon_weights=weights, **d)


# -- optimizers --------------------------------------------------------------


class SgdOptimizer:
    kind = "sgd"

    def __init__(self, lr, **_):
        self.lr = lr
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for k, g in grads.items():
            params[k] = params[k] - self.lr * g

    def state_arrays(self):
        return {}

    def load_state(self, arrays, t):
        self.t = int(t)


class MomentumOptimizer:
    kind = "momentum"

    def __init__(self, lr, momentum=0.9, **_):
        self.lr = lr
        self.mu = momentum
        self.t = 0
        self.velocity = {}

    def step(self, params, grads):
        self.t += 1
        for k, g in grads.items():
            v = self.velocity.get(k)
            v = g if v is None else self.mu * v + g
            self.velocity[k] = v
            params[k] = params[k] - self.lr * v

    def state_arrays(self):
        return {f"velocity/{k}": v for k, v in self.velocity.items()}

    def load_state(self, arrays, t):
        self.t = int(t)
        self.velocity = {k.split("/", 1)[1]: v for k, v in arrays.items()
                         if k.startswith("velocity/")}


class AdamOptimizer:
    kind = "adaptive_moment"

    def __init__(self, lr, beta1=0.5, beta2=0.999, eps=1e-8, **_):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correct1 = 1.0 - b1 ** self.t
        correct2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            m = self.m.get(k, 0.0) * b1 + (1 - b1) * g
            v = self.v.get(k, 0.0) * b2 + (1 - b2) * g * g
            self.m[k] = m
            self.v[k] = v
            params[k] = params[k] - self.lr * (m / correct1) / (
                np.sqrt(v / correct2) + self.eps)

    def state_arrays(self):
        out = {f"m/{k}": v for k, v in self.m.items()}
        out.update({f"v/{k}": v for k, v in self.v.items()})
        return out

    def load_state(self, arrays, t):
        self.t = int(t)
        self.m = {k[2:]: v for k, v in arrays.items() if k.startswith("m/")}
        self.v = {k[2:]: v for k, v in arrays.items() if k.startswith("v/")}


def make_optimizer(config, role):
    lr = (config.learning_rate_d if role.endswith("discriminator")
          else config.learning_rate_g_e)
    cls = {"sgd": SgdOptimizer, "momentum": MomentumOptimizer,
           "adaptive_moment": AdamOptimizer}[config.optimizer]
    return cls(lr, momentum=config.momentum, beta1=config.adam_beta1,
               beta2=config.adam_beta2)


# -- training state ----------------------------------------------------------


@dataclass
class TrainState:
    config: TrainingConfig
    model: ModelConfig
    networks: dict
    optimizers: dict
    prior: LatentPrior
    prior_rng: np.random.Generator
    sample_shape: tuple
    value_range: tuple
    step: int = 0

    def active_roles(self):
        return MODE_ROLES[self.config.mode]


def init_state(config, dataset, model=None):
    """Build networks and optimizers for a fresh run."""
    config.validate()
    model = model or ModelConfig()
    if len(dataset) < config.batch_size:
        raise ConfigurationError(
            f"batch_size: dataset has {len(dataset)} samples, "
            f"smaller than batch_size {config.batch_size}")
    nets, opts = {}, {}
    for role in MODE_ROLES[config.mode]:
        spec = model.spec_for(role, config.d_z, dataset.sample_shape,
                              dataset.value_range)
        nets[role] = networks.build_network(spec, stream_seed(config.seed, role))
        opts[role] = make_optimizer(config, role)
    prior_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=int(config.seed),
                               spawn_key=(_STREAMS["prior"],)))
    return TrainState(
        config=config,
        model=model,
        networks=nets,
        optimizers=opts,
        prior=LatentPrior(config.d_z),
        prior_rng=prior_rng,
        sample_shape=tuple(dataset.sample_shape),
        value_range=tuple(dataset.value_range),
        step=0,
    )


def _grad_params(net):
    return {k: tape.Tensor(v, requires_grad=True) for k, v in net.params.items()}


def _collect_grads(tensors):
    return {k: (t.grad if t.grad is not None else np.zeros_like(t.value))
            for k, t in tensors.items()}


def _update(state, role, loss_tensor, param_tensors, ascend):
    """One optimizer step on ``role`` from a scalar loss tensor."""
    (loss_tensor * (-1.0 if ascend else 1.0)).backward()
    state.optimizers[role].step(state.networks[role].params,
                                _collect_grads(param_tensors))


def _fwd(net, x):
    """Forward pass with stored parameters as constants (no gradients)."""
    return networks.forward(net, x).value


def train_step(state, real_batch):
    """One alternating update; mutates ``state`` and returns the breakdown.

    The returned components are the ones evaluated during the
    generator-phase, i.e. after the discriminators' update.  Non-finite
    components abort with :class:`NumericalAbort`.
    """
    cfg = state.config
    mode = cfg.mode
    nets = state.networks
    x = np.asarray(real_batch, dtype=np.float64)
    step_number = state.step + 1

    # ---- phase 1: discriminator ascent, generator/encoder frozen ----
    for _ in range(cfg.discriminator_updates):
        if mode in ("aegan", "gan"):
            z_path = sample_prior(state.prior, len(x), state.prior_rng)
            x_gen = _fwd(nets["generator"], z_path)
            fakes = [x_gen]
            if mode == "aegan":
                z_enc = _fwd(nets["encoder"], x)
                fakes.append(_fwd(nets["generator"], z_enc))  # autoencoded x
            pd = _grad_params(nets["sample_discriminator"])
            p_real = networks.forward(nets["sample_discriminator"], x, params=pd)
            p_fakes = [networks.forward(nets["sample_discriminator"], f, params=pd)
                       for f in fakes]
            d_loss = losses_mod.discriminator_side_loss(p_real, p_fakes)
            _update(state, "sample_discriminator", d_loss, pd, ascend=True)
        if mode in ("aegan", "aae"):
            z_real = sample_prior(state.prior, len(x), state.prior_rng)
            z_enc = _fwd(nets["encoder"], x)
            fakes = [z_enc]
            if mode == "aegan":
                fakes.append(_fwd(nets["encoder"], x_gen))  # cycled latents
            pd = _grad_params(nets["latent_discriminator"])
            p_real = networks.forward(nets["latent_discriminator"], z_real, params=pd)
            p_fakes = [networks.forward(nets["latent_discriminator"], f, params=pd)
                       for f in fakes]
            d_loss = losses_mod.discriminator_side_loss(p_real, p_fakes)
            _update(state, "latent_discriminator", d_loss, pd, ascend=True)

    # ---- phase 2: joint generator/encoder descent, discriminators frozen ----
    w = cfg.recon_weights
    pg = _grad_params(nets["generator"])
    pe = _grad_params(nets["encoder"]) if mode in ("aegan", "aae") else None

    parts = {}
    fake_probs = []
    recon = 0.0

    if mode in ("aegan", "gan"):
        z_path = sample_prior(state.prior, len(x), state.prior_rng)
        x_gen = networks.forward(nets["generator"], z_path, params=pg)
        px_gen = networks.forward(nets["sample_discriminator"], x_gen)
        px_real = _fwd(nets["sample_discriminator"], x)
        parts["gan_x_hat"] = losses_mod.adversarial_loss(px_real, px_gen)
        fake_probs.append(px_gen)
    if mode in ("aegan", "aae"):
        z_enc = networks.forward(nets["encoder"], x, params=pe)
        x_rec = networks.forward(nets["generator"], z_enc, params=pg)
        pz_enc = networks.forward(nets["latent_discriminator"], z_enc)
        z_real = sample_prior(state.prior, len(x), state.prior_rng)
        pz_real = _fwd(nets["latent_discriminator"], z_real)
        parts["gan_z_hat"] = losses_mod.adversarial_loss(pz_real, pz_enc)
        fake_probs.append(pz_enc)
        parts["recon_x"] = losses_mod.sample_reconstruction(x, x_rec)
        recon = recon + w.lambda_rx * parts["recon_x"]
    if mode == "aegan":
        z_cyc = networks.forward(nets["encoder"], x_gen, params=pe)
        px_rec = networks.forward(nets["sample_discriminator"], x_rec)
        pz_cyc = networks.forward(nets["latent_discriminator"], z_cyc)
        parts["gan_x_tilde"] = losses_mod.adversarial_loss(px_real, px_rec)
        parts["gan_z_tilde"] = losses_mod.adversarial_loss(pz_real, pz_cyc)
        fake_probs.insert(1, px_rec)  # keep x-components adjacent
        fake_probs.append(pz_cyc)
        parts["recon_z"] = losses_mod.latent_reconstruction(
            z_path, z_cyc, squared=cfg.latent_recon_squared)
        recon = recon + w.lambda_rz * parts["recon_z"]

    g_loss = losses_mod.generator_side_loss(
        fake_probs, recon, variant=cfg.generator_loss_variant)
    g_loss.backward()
    state.optimizers["generator"].step(nets["generator"].params, _collect_grads(pg))
    if pe is not None:
        state.optimizers["encoder"].step(nets["encoder"].params, _collect_grads(pe))

    breakdown = losses_mod.compose_breakdown(
        w, **{k: (v.item() if isinstance(v, tape.Tensor) else v)
              for k, v in parts.items()})
    for name in LossBreakdown.FIELDS:
        v = getattr(breakdown, name)
        if v is not None and not math.isfinite(v):
            raise NumericalAbort(name, step_number)

    state.step = step_number
    return breakdown


@dataclass
class TrainResult:
    state: TrainState
    history: list  # (step, LossBreakdown) at logged steps
    checkpoint_path: str | None = None
    metrics_path: str | None = None


def metrics_row(step, mode, breakdown):
    return [str(step), mode] + breakdown.csv_row()


def train(config, dataset, model=None, out_dir=None, state=None,
          step_callback=None):
    """Run (or resume) a training loop over shuffled minibatches.

    ``state`` resumes from an existing :class:`TrainState` (as produced by
    :func:`init_state` or restored from a checkpoint); otherwise a fresh
    state is initialized.  When ``out_dir`` is given, a ``metrics.csv``
    and periodic ``checkpoints/step_*.npz`` plus a ``checkpoints/final.npz``
    are written there.  Returns a :class:`TrainResult`; a resumed run
    reproduces the uninterrupted trajectory bit for bit.
    """
    from . import checkpoint as ckpt_mod

    if state is None:
        if config is None:
            raise UsageError("train() needs a config or a state to resume from")
        state = init_state(config, dataset, model=model)
    else:
        config = state.config
    config.validate()
    if len(dataset) < config.batch_size:
        raise ConfigurationError(
            f"batch_size: dataset has {len(dataset)} samples, "
            f"smaller than batch_size {config.batch_size}")

    out_path = ckpt_dir = metrics_path = None
    metrics_file = None
    if out_dir is not None:
        from pathlib import Path
        out_path = Path(out_dir)
        ckpt_dir = out_path / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = out_path / "metrics.csv"
        fresh = state.step == 0 or not metrics_path.exists()
        metrics_file = open(metrics_path, "w" if fresh else "a", newline="")
        if fresh:
            metrics_file.write(",".join(METRICS_HEADER) + "\n")

    history = []
    per = data_mod.batches_per_epoch(len(dataset), config.batch_size)
    shuffle_seed = stream_seed(config.seed, "shuffle")
    current_epoch, perm = -1, None

    try:
        while state.step < config.total_steps:
            epoch, slot = divmod(state.step, per)
            if epoch != current_epoch:
                perm = data_mod.epoch_permutation(len(dataset), shuffle_seed, epoch)
                current_epoch = epoch
            batch = dataset.samples[perm[slot * config.batch_size:
                                         (slot + 1) * config.batch_size]]
            breakdown = train_step(state, batch)
            logged = (state.step % config.log_every == 0
                      or state.step == config.total_steps)
            if logged:
                history.append((state.step, breakdown))
                if metrics_file is not None:
                    metrics_file.write(
                        ",".join(metrics_row(state.step, config.mode, breakdown)) + "\n")
            if step_callback is not None:
                step_callback(state, breakdown)
            if ckpt_dir is not None and state.step % config.checkpoint_every == 0:
                ckpt_mod.save_checkpoint(ckpt_dir / f"step_{state.step:08d}.npz", state)
    finally:
        if metrics_file is not None:
            metrics_file.close()

    final_path = None
    if ckpt_dir is not None:
        final_path = ckpt_dir / "final.npz"
        ckpt_mod.save_checkpoint(final_path, state)
    return TrainResult(state=state, history=history,
                       checkpoint_path=None if final_path is None else str(final_path),
                       metrics_path=None if metrics_path is None else str(metrics_path))
