"""Loss terms for the four-network objective.

The composite objective has four adversarial components and two
reconstruction components:

* ``gan_x_hat``   — sample discriminator on real vs generated samples
* ``gan_x_tilde`` — sample discriminator on real vs autoencoded samples
* ``gan_z_hat``   — latent discriminator on prior draws vs encoded samples
* ``gan_z_tilde`` — latent discriminator on prior draws vs cycled latents
* ``recon_x``     — mean absolute error between samples and their
  autoencodings (per-element mean, so the weight is resolution-independent)
* ``recon_z``     — mean Euclidean distance between latent draws and their
  cycles (unsquared by default; a squared variant is available)

``total = gan_x_hat + gan_x_tilde + gan_z_hat + gan_z_tilde
          + lambda_rx * recon_x + lambda_rz * recon_z``

The generator and encoder descend on this total; both discriminators
ascend on the adversarial components that involve them.  All four
adversarial components share one kernel, :func:`adversarial_loss`.

Every function here accepts either plain arrays (returning floats, used
for reporting and tests) or tape tensors (returning tensors, used inside
training steps); the arithmetic is identical.
"""

from dataclasses import dataclass

import numpy as np

from . import tape
from .errors import ShapeError, UsageError

__all__ = [
    "ReconWeights",
    "LossBreakdown",
    "adversarial_loss",
    "gan_loss_generated_samples",
    "gan_loss_autoencoded_samples",
    "gan_loss_encoded_latents",
    "gan_loss_cycled_latents",
    "sample_reconstruction",
    "latent_reconstruction",
    "reconstruction_loss",
    "aegan_loss",
    "generator_side_loss",
    "discriminator_side_loss",
]


@dataclass(frozen=True)
class ReconWeights:
    """Nonnegative weights for the sample and latent reconstruction terms."""

    lambda_rx: float = 1.0
    lambda_rz: float = 1.0

    def __post_init__(self):
        for name in ("lambda_rx", "lambda_rz"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise UsageError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class LossBreakdown:
    """Per-step values of every loss component plus the composed total.

    Components that are inactive in the current training mode are ``None``
    and are written as empty fields in the metrics CSV.
    """

    gan_x_hat: float | None = None
    gan_x_tilde: float | None = None
    gan_z_hat: float | None = None
    gan_z_tilde: float | None = None
    recon_x: float | None = None
    recon_z: float | None = None
    total: float = 0.0

    FIELDS = ("gan_x_hat", "gan_x_tilde", "gan_z_hat", "gan_z_tilde",
              "recon_x", "recon_z", "total")

    def csv_row(self):
        out = []
        for name in self.FIELDS:
            v = getattr(self, name)
            out.append("" if v is None else repr(float(v)))
        return out


def _is_tensor(*xs):
    return any(isinstance(x, tape.Tensor) for x in xs)


def _as_prob_batch(p, name):
    """Validate a probability batch; returns a tensor alongside a flag."""
    t = p if isinstance(p, tape.Tensor) else tape.Tensor(np.asarray(p, dtype=np.float64))
    v = t.value
    if v.size == 0:
        raise UsageError(f"{name}: probability batch is empty")
    # NaNs are let through on purpose: they poison the loss value, which the
    # training loop converts into a NumericalAbort naming the component.
    finite = v[np.isfinite(v)]
    if not np.all((finite > 0.0) & (finite < 1.0)):
        raise UsageError(f"{name}: probabilities must lie strictly in (0, 1)")
    return t


def _maybe_float(x, want_tensor):
    return x if want_tensor else x.item()


def adversarial_loss(p_real, p_fake):
    """Shared adversarial kernel: mean(log p_real) + mean(log(1 - p_fake)).

    A perfect discriminator (p_real -> 1, p_fake -> 0) drives this toward
    0; with probabilities strictly inside (0, 1) the value is always
    negative.  The discriminator ascends on it, the generator side
    descends.
    """
    want = _is_tensor(p_real, p_fake)
    pr = _as_prob_batch(p_real, "p_real")
    pf = _as_prob_batch(p_fake, "p_fake")
    out = tape.mean(tape.log(pr)) + tape.mean(tape.log(1.0 - pf))
    return _maybe_float(out, want)


def gan_loss_generated_samples(dx_real, dx_generated):
    """Adversarial component on freshly generated samples."""
    return adversarial_loss(dx_real, dx_generated)


def gan_loss_autoencoded_samples(dx_real, dx_autoencoded):
    """Adversarial component on autoencoded (reconstructed) samples."""
    return adversarial_loss(dx_real, dx_autoencoded)


def gan_loss_encoded_latents(dz_prior, dz_encoded):
    """Adversarial component matching encoded samples to the latent prior."""
    return adversarial_loss(dz_prior, dz_encoded)


def gan_loss_cycled_latents(dz_prior, dz_cycled):
    """Adversarial component on latents cycled through generator + encoder."""
    return adversarial_loss(dz_prior, dz_cycled)


def _check_same_shape(a, b, what):
    va = a.value if isinstance(a, tape.Tensor) else np.asarray(a)
    vb = b.value if isinstance(b, tape.Tensor) else np.asarray(b)
    if va.shape != vb.shape:
        raise ShapeError(f"{what}: shape mismatch {va.shape} vs {vb.shape}")


def sample_reconstruction(x, x_recon):
    """Mean absolute difference per element, averaged over the batch."""
    _check_same_shape(x, x_recon, "sample reconstruction")
    want = _is_tensor(x, x_recon)
    diff = tape.as_tensor(x_recon) - tape.as_tensor(x)
    return _maybe_float(tape.mean(tape.absolute(diff)), want)


def latent_reconstruction(z, z_recon, squared=False):
    """Mean Euclidean distance between latent rows and their cycles.

    ``squared=True`` switches to the mean squared norm, a common variant.
    """
    _check_same_shape(z, z_recon, "latent reconstruction")
    want = _is_tensor(z, z_recon)
    diff = tape.as_tensor(z_recon) - tape.as_tensor(z)
    diff = tape.reshape(diff, (diff.value.shape[0], -1))
    if squared:
        out = tape.mean(tape.sum_along(diff * diff, axis=1))
    else:
        out = tape.mean(tape.row_norm(diff))
    return _maybe_float(out, want)


def reconstruction_loss(x, x_recon, z, z_recon, weights, squared_latent=False):
    """Both reconstruction terms and their weighted sum.

    Returns ``(recon_x, recon_z, lambda_rx * recon_x + lambda_rz * recon_z)``.
    """
    rx = sample_reconstruction(x, x_recon)
    rz = latent_reconstruction(z, z_recon, squared=squared_latent)
    return rx, rz, weights.lambda_rx * rx + weights.lambda_rz * rz


def _compose_total(parts, weights):
    """Sum active components exactly as the objective is defined."""
    total = None
    weighted = [
        (parts.get("gan_x_hat"), 1.0),
        (parts.get("gan_x_tilde"), 1.0),
        (parts.get("gan_z_hat"), 1.0),
        (parts.get("gan_z_tilde"), 1.0),
        (parts.get("recon_x"), weights.lambda_rx),
        (parts.get("recon_z"), weights.lambda_rz),
    ]
    for value, w in weighted:
        if value is None:
            continue
        term = w * value
        total = term if total is None else total + term
    if total is None:
        raise UsageError("no loss components supplied")
    return total


def compose_breakdown(weights, **components):
    """Assemble a LossBreakdown from already-computed component values.

    Missing or ``None`` components are recorded as absent; the total sums
    the active components with the reconstruction weights applied.
    """
    parts = {k: components.get(k) for k in LossBreakdown.FIELDS if k != "total"}
    unknown = set(components) - set(LossBreakdown.FIELDS)
    if unknown:
        raise UsageError(f"unknown loss components: {sorted(unknown)}")
    total = _compose_total({k: v for k, v in parts.items() if v is not None}, weights)
    as_float = {k: (None if v is None else float(v if not isinstance(v, tape.Tensor)
                                                 else v.item()))
                for k, v in parts.items()}
    return LossBreakdown(total=float(total.item() if isinstance(total, tape.Tensor)
                                     else total), **as_float)


def aegan_loss(dx_real, dx_generated, dx_autoencoded,
               dz_prior, dz_encoded, dz_cycled,
               x, x_autoencoded, z, z_cycled,
               weights, squared_latent=False):
    """Evaluate every component of the full objective as one breakdown.

    The same breakdown serves both sides of the minimax game: the
    generator and encoder minimize ``total`` while the discriminators
    maximize their adversarial components.
    """
    rx, rz, _ = reconstruction_loss(x, x_autoencoded, z, z_cycled, weights,
                                    squared_latent=squared_latent)
    return compose_breakdown(
        weights,
        gan_x_hat=gan_loss_generated_samples(dx_real, dx_generated),
        gan_x_tilde=gan_loss_autoencoded_samples(dx_real, dx_autoencoded),
        gan_z_hat=gan_loss_encoded_latents(dz_prior, dz_encoded),
        gan_z_tilde=gan_loss_cycled_latents(dz_prior, dz_cycled),
        recon_x=rx,
        recon_z=rz,
    )


def generator_side_loss(fake_probabilities, weighted_reconstruction=0.0,
                        variant="non_saturating"):
    """Loss the generator and encoder descend on.

    ``fake_probabilities`` is one probability batch per active adversarial
    component.  The ``minimax`` variant contributes mean(log(1 - p)) per
    component — the literal objective; ``non_saturating`` replaces each
    with -mean(log p), which has the same fixed points but keeps gradients
    alive when the discriminator wins early.  The weighted reconstruction
    term is added unchanged.
    """
    if variant not in ("minimax", "non_saturating"):
        raise UsageError(f"unknown generator loss variant {variant!r}")
    batches = list(fake_probabilities)
    if not batches:
        raise UsageError("generator_side_loss needs at least one fake batch")
    want = _is_tensor(*batches) or isinstance(weighted_reconstruction, tape.Tensor)
    total = None
    for p in batches:
        p = _as_prob_batch(p, "fake probabilities")
        if variant == "minimax":
            term = tape.mean(tape.log(1.0 - p))
        else:
            term = -1.0 * tape.mean(tape.log(p))
        total = term if total is None else total + term
    total = total + weighted_reconstruction
    return _maybe_float(total, want)


def discriminator_side_loss(p_real, fake_batches):
    """Sum of adversarial components sharing one real-probability batch.

    This is what a discriminator ascends on; reconstruction terms carry no
    discriminator gradient and are deliberately absent.
    """
    fakes = list(fake_batches)
    if not fakes:
        raise UsageError("discriminator_side_loss needs at least one fake batch")
    total = None
    for pf in fakes:
        term = adversarial_loss(p_real, pf)
        total = term if total is None else total + term
    return total
