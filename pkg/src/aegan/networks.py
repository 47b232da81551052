"""Network definitions: four roles, two architecture families.

The scaffold trains four networks with fixed input/output contracts:

* ``generator``   : latent (batch, d_z) -> sample batch, bounded output
* ``encoder``     : sample batch -> latent (batch, d_z), unbounded output
* ``sample_discriminator`` : sample batch -> probability (batch, 1)
* ``latent_discriminator`` : latent batch -> probability (batch, 1)

Two families are provided: ``dense`` multi-layer perceptrons for flat
samples (2-D points), and a small ``convolutional`` family for square
images whose side is ``4 * 2**k``.  No cross-batch statistics are used
anywhere, so every sample in a batch is processed independently.
"""

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import tape
from .errors import ConfigurationError, DataError, ShapeError, UsageError

ROLES = ("generator", "encoder", "sample_discriminator", "latent_discriminator")
FAMILIES = ("dense", "convolutional")
OUTPUT_ACTIVATIONS = ("bounded_symmetric", "probability", "identity")
HIDDEN_ACTIVATIONS = ("leaky_relu", "tanh", "relu")

# Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] so log-loss terms
# stay finite no matter how saturated a discriminator becomes.
PROB_EPS = 1e-7

_DEFAULT_OUTPUT = {
    "generator": "bounded_symmetric",
    "encoder": "identity",
    "sample_discriminator": "probability",
    "latent_discriminator": "probability",
}


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description; parameter count is a pure function of it.

    ``layer_widths`` is family-dependent.  Dense: the full width chain
    including input and output, e.g. ``(32, 64, 2)`` for a generator from a
    32-dim latent space to 2-D points.  Convolutional: channel counts —
    for the generator, channels at each spatial scale starting at 4x4
    (length ``k + 1`` for a ``4 * 2**k`` image); for the encoder and sample
    discriminator, channels after each stride-2 stage (length ``k``).
    """

    network_role: str
    layer_widths: tuple
    architecture_family: str = "dense"
    d_z: int = 32
    sample_shape: tuple = (2,)
    value_range: tuple = (-1.0, 1.0)
    output_activation: str | None = None
    hidden_activation: str = "leaky_relu"

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        object.__setattr__(self, "sample_shape", tuple(int(s) for s in self.sample_shape))
        object.__setattr__(self, "value_range",
                           (float(self.value_range[0]), float(self.value_range[1])))
        if self.output_activation is None:
            object.__setattr__(self, "output_activation",
                               _DEFAULT_OUTPUT.get(self.network_role))

    # -- validation -------------------------------------------------------

    def validate(self):
        if self.network_role not in ROLES:
            raise ConfigurationError(
                f"network_role: unknown role {self.network_role!r}; expected one of {ROLES}")
        if self.architecture_family not in FAMILIES:
            raise ConfigurationError(
                f"architecture_family: unknown family {self.architecture_family!r}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigurationError(
                f"hidden_activation: unknown activation {self.hidden_activation!r}")
        if self.d_z < 1:
            raise ConfigurationError(f"d_z: must be positive, got {self.d_z}")
        if not self.layer_widths:
            raise ConfigurationError("layer_widths: must not be empty")
        if any(w < 1 for w in self.layer_widths):
            raise ConfigurationError(
                f"layer_widths: all widths must be positive, got {self.layer_widths}")
        lo, hi = self.value_range
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ConfigurationError(f"value_range: invalid interval ({lo}, {hi})")

        allowed = {
            "generator": ("bounded_symmetric", "identity"),
            "encoder": ("identity",),
            "sample_discriminator": ("probability",),
            "latent_discriminator": ("probability",),
        }[self.network_role]
        if self.output_activation not in allowed:
            raise ConfigurationError(
                f"output_activation: {self.output_activation!r} is not valid for a "
                f"{self.network_role} (allowed: {allowed})")

        if self.architecture_family == "dense":
            self._validate_dense()
        else:
            self._validate_conv()

    def _validate_dense(self):
        if len(self.sample_shape) != 1 and self.network_role != "latent_discriminator":
            raise ConfigurationError(
                "architecture_family: dense networks require flat samples; "
                f"got sample_shape {self.sample_shape}")
        if len(self.layer_widths) < 2:
            raise ConfigurationError(
                "layer_widths: dense networks need at least input and output widths")
        n_in, n_out = self.layer_widths[0], self.layer_widths[-1]
        want_in, want_out = {
            "generator": (self.d_z, _flat_size(self.sample_shape)),
            "encoder": (_flat_size(self.sample_shape), self.d_z),
            "sample_discriminator": (_flat_size(self.sample_shape), 1),
            "latent_discriminator": (self.d_z, 1),
        }[self.network_role]
        if n_in != want_in:
            raise ConfigurationError(
                f"layer_widths: first width {n_in} does not match the "
                f"{self.network_role} input size {want_in}")
        if n_out != want_out:
            raise ConfigurationError(
                f"layer_widths: last width {n_out} does not match the "
                f"{self.network_role} output size {want_out}")

    def _validate_conv(self):
        if self.network_role == "latent_discriminator":
            raise ConfigurationError(
                "architecture_family: the latent discriminator operates on flat "
                "latent vectors and must use the dense family")
        if len(self.sample_shape) != 3:
            raise ConfigurationError(
                "sample_shape: convolutional networks require (height, width, channels); "
                f"got {self.sample_shape}")
        h, w, _ = self.sample_shape
        if h != w:
            raise ConfigurationError(f"sample_shape: images must be square, got {h}x{w}")
        stages = _n_stages(h)
        if stages is None:
            raise ConfigurationError(
                f"sample_shape: image side must be 4 * 2**k, got {h}")
        want = stages + 1 if self.network_role == "generator" else stages
        if len(self.layer_widths) != want:
            raise ConfigurationError(
                f"layer_widths: {self.network_role} at {h}x{w} needs exactly "
                f"{want} channel counts, got {len(self.layer_widths)}")


def _flat_size(shape):
    return int(np.prod(shape))


def _n_stages(side):
    """Number of 2x stages between 4x4 and ``side``; None if not 4*2**k."""
    k, s = 0, 4
    while s < side:
        s *= 2
        k += 1
    return k if s == side else None


@dataclass
class ParameterSet:
    """Named parameter tensors for one network, plus its build provenance."""

    spec: NetworkSpec
    initialization_seed: int
    params: dict = field(default_factory=dict)

    @property
    def n_parameters(self):
        return sum(v.size for v in self.params.values())

    def copy(self):
        return ParameterSet(self.spec, self.initialization_seed,
                            {k: v.copy() for k, v in self.params.items()})

    def hash(self):
        """Content hash of all parameter values (order-sensitive)."""
        digest = hashlib.sha256()
        for name in self.params:
            digest.update(name.encode())
            digest.update(self.params[name].tobytes())
        return digest.hexdigest()


def parameter_count(spec):
    """Total scalar parameter count implied by a spec (without building it)."""
    spec.validate()
    return sum(int(np.prod(shape)) for _, shape in _layer_shapes(spec))


def _layer_shapes(spec):
    """Yield (name, shape) in build order."""
    if spec.architecture_family == "dense":
        widths = spec.layer_widths
        for i in range(len(widths) - 1):
            yield f"w{i}", (widths[i], widths[i + 1])
            yield f"b{i}", (widths[i + 1],)
        return
    h, _, c = spec.sample_shape
    stages = _n_stages(h)
    widths = spec.layer_widths
    if spec.network_role == "generator":
        yield "proj_w", (spec.d_z, 4 * 4 * widths[0])
        yield "proj_b", (4 * 4 * widths[0],)
        for i in range(1, stages + 1):
            yield f"conv{i}_w", (3, 3, widths[i - 1], widths[i])
            yield f"conv{i}_b", (widths[i],)
        yield "out_w", (3, 3, widths[-1], c)
        yield "out_b", (c,)
    else:
        prev = c
        for i, w in enumerate(widths):
            yield f"conv{i}_w", (3, 3, prev, w)
            yield f"conv{i}_b", (w,)
            prev = w
        out = spec.d_z if spec.network_role == "encoder" else 1
        yield "head_w", (4 * 4 * prev, out)
        yield "head_b", (out,)


def build_network(spec, seed):
    """Initialize a network deterministically from (spec, seed).

    Weights are zero-mean Gaussian scaled by 1/sqrt(fan_in); biases start
    at zero.  Two calls with identical arguments produce bitwise-identical
    parameters.
    """
    spec.validate()
    rng = np.random.default_rng(int(seed))
    params = {}
    for name, shape in _layer_shapes(spec):
        if name.endswith("_b") or name.startswith("b"):
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in = int(np.prod(shape[:-1]))
            params[name] = rng.standard_normal(shape) / np.sqrt(fan_in)
    return ParameterSet(spec=spec, initialization_seed=int(seed), params=params)


# -- forward passes ---------------------------------------------------------


def _hidden(spec, x):
    if spec.hidden_activation == "leaky_relu":
        return tape.leaky_relu(x, 0.2)
    if spec.hidden_activation == "relu":
        return tape.leaky_relu(x, 0.0)
    return tape.tanh(x)


def _output(spec, x):
    kind = spec.output_activation
    if kind == "identity":
        return x
    if kind == "bounded_symmetric":
        lo, hi = spec.value_range
        mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        return mid + half * tape.tanh(x)
    if kind == "probability":
        return tape.clip(tape.sigmoid(x), PROB_EPS, 1.0 - PROB_EPS)
    raise ConfigurationError(f"output_activation: unknown kind {kind!r}")


def forward(net, x, params=None):
    """Run one network on a tape tensor (or array), returning a tape tensor.

    ``params`` may supply gradient-enabled tensors keyed like
    ``net.params``; otherwise the stored arrays are used as constants.
    """
    spec = net.spec
    p = params if params is not None else net.params
    get = lambda name: p[name] if isinstance(p[name], tape.Tensor) else tape.Tensor(p[name])
    x = tape.as_tensor(x)

    if spec.architecture_family == "dense":
        n_layers = len(spec.layer_widths) - 1
        h = x
        for i in range(n_layers):
            h = tape.matmul(h, get(f"w{i}")) + get(f"b{i}")
            if i < n_layers - 1:
                h = _hidden(spec, h)
        return _output(spec, h)

    side = spec.sample_shape[0]
    stages = _n_stages(side)
    if spec.network_role == "generator":
        w0 = spec.layer_widths[0]
        h = tape.matmul(x, get("proj_w")) + get("proj_b")
        h = _hidden(spec, h)
        h = tape.reshape(h, (-1, 4, 4, w0))
        for i in range(1, stages + 1):
            h = tape.upsample2x(h)
            h = tape.conv2d(h, get(f"conv{i}_w"), get(f"conv{i}_b"), stride=1, padding=1)
            h = _hidden(spec, h)
        h = tape.conv2d(h, get("out_w"), get("out_b"), stride=1, padding=1)
        return _output(spec, h)

    h = x
    for i in range(stages):
        h = tape.conv2d(h, get(f"conv{i}_w"), get(f"conv{i}_b"), stride=2, padding=1)
        h = _hidden(spec, h)
    h = tape.reshape(h, (-1, 4 * 4 * spec.layer_widths[-1]))
    h = tape.matmul(h, get("head_w")) + get("head_b")
    return _output(spec, h)


# -- batch validation and the public array-level contract -------------------


def ensure_latent_batch(z, d_z):
    """Validate and return a (batch, d_z) float64 latent batch."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != d_z:
        raise ShapeError(f"latent batch must have shape (batch, {d_z}); got {z.shape}")
    if z.shape[0] == 0:
        raise UsageError("latent batch is empty")
    if not np.all(np.isfinite(z)):
        raise DataError("latent batch contains non-finite values")
    return z


def ensure_sample_batch(x, sample_shape):
    """Validate and return a (batch, *sample_shape) float64 sample batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != tuple(sample_shape):
        raise ShapeError(
            f"sample batch must have shape (batch, {', '.join(map(str, sample_shape))}); "
            f"got {x.shape}")
    if x.shape[0] == 0:
        raise UsageError("sample batch is empty")
    if not np.all(np.isfinite(x)):
        raise DataError("sample batch contains non-finite values")
    return x


def _require_role(net, role):
    if net.spec.network_role != role:
        raise UsageError(f"expected a {role} network, got {net.spec.network_role}")


def generate(net, z):
    """Map latent vectors to samples: (batch, d_z) -> (batch, *sample_shape)."""
    _require_role(net, "generator")
    z = ensure_latent_batch(z, net.spec.d_z)
    out = forward(net, z).value
    return out.reshape(out.shape[0], *net.spec.sample_shape)

def encode(net, x):
    """Map samples to latent vectors: (batch, *sample_shape) -> (batch, d_z)."""
    _require_role(net, "encoder")
    x = ensure_sample_batch(x, net.spec.sample_shape)
    if net.spec.architecture_family == "dense":
        x = x.reshape(x.shape[0], -1)
    return forward(net, x).value


def discriminate_sample(net, x):
    """Probability in (0, 1) that each sample comes from the dataset."""
    _require_role(net, "sample_discriminator")
    x = ensure_sample_batch(x, net.spec.sample_shape)
    if net.spec.architecture_family == "dense":
        x = x.reshape(x.shape[0], -1)
    return forward(net, x).value


def discriminate_latent(net, z):
    """Probability in (0, 1) that each latent vector came from the prior."""
    _require_role(net, "latent_discriminator")
    z = ensure_latent_batch(z, net.spec.d_z)
    return forward(net, z).value


# -- flat views used by optimizers-agnostic tooling (grad checks, hashing) --


def flat_parameters(net):
    """All parameters concatenated into a single 1-D vector (copy)."""
    return np.concatenate([v.reshape(-1) for v in net.params.values()])


def set_flat_parameters(net, vec):
    """Write a flat vector produced by :func:`flat_parameters` back in place."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size != net.n_parameters:
        raise ShapeError(f"expected {net.n_parameters} values, got {vec.size}")
    offset = 0
    for name, v in net.params.items():
        net.params[name] = vec[offset:offset + v.size].reshape(v.shape).copy()
        offset += v.size


@dataclass(frozen=True)
class ModelConfig:
    """Per-role architecture knobs, resolved into NetworkSpecs on demand.

    Width tuples follow the family conventions of :class:`NetworkSpec`,
    except that dense widths here list only the hidden layers; the input
    and output widths are derived from the data and latent dimensions.
    """

    generator_widths: tuple = (64, 64)
    encoder_widths: tuple = (64, 64)
    sample_discriminator_widths: tuple = (128, 128)
    latent_discriminator_widths: tuple = (64, 64)
    hidden_activation: str = "leaky_relu"

    def spec_for(self, role, d_z, sample_shape, value_range):
        sample_shape = tuple(sample_shape)
        family = "dense" if len(sample_shape) == 1 else "convolutional"
        widths = {
            "generator": self.generator_widths,
            "encoder": self.encoder_widths,
            "sample_discriminator": self.sample_discriminator_widths,
            "latent_discriminator": self.latent_discriminator_widths,
        }[role]
        if role == "latent_discriminator":
            layer_widths = (d_z, *widths, 1)
            family = "dense"
        elif family == "dense":
            flat = _flat_size(sample_shape)
            layer_widths = {
                "generator": (d_z, *widths, flat),
                "encoder": (flat, *widths, d_z),
                "sample_discriminator": (flat, *widths, 1),
            }[role]
        else:
            layer_widths = tuple(widths)
        spec = NetworkSpec(
            network_role=role,
            layer_widths=layer_widths,
            architecture_family=family,
            d_z=d_z,
            sample_shape=sample_shape,
            value_range=tuple(value_range),
            hidden_activation=self.hidden_activation,
        )
        spec.validate()
        return spec

    def with_widths(self, **kwargs):
        return replace(self, **kwargs)
