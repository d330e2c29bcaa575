"""Generator and discriminator builders with condition-injection sites.

Two placement rules are enforced at build time:
  1. the generator layer consuming the noise input never receives the domain
     vector (highest-level semantics are shared across domains);
  2. the discriminator layer consuming the image input always receives the
     domain vector (the strongest signal for telling domains apart).

When both domain and label vectors are in play they are injected at disjoint
layer sets; a single layer never receives both.

Conditioning is realized by concatenation: a flat site appends the vector to
the feature axis, a convolutional site appends one constant channel per
vector component.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor


class BuildError(ValueError):
    """A network spec violates a structural rule."""


@dataclass(frozen=True)
class ConditionVector:
    """One-hot (or deliberately zeroed) domain or label code.

    values may be a single vector (K,) or a per-sample batch (B, K); every
    row must be exactly one-hot or exactly all-zero.
    """

    kind: str  # "domain" | "label"
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", arr)
        if self.kind not in ("domain", "label"):
            raise ValueError(f"unknown condition kind {self.kind!r}")
        rows = arr[None, :] if arr.ndim == 1 else arr
        if arr.ndim not in (1, 2):
            raise ValueError("condition values must be 1-D or 2-D")
        ok = np.all((rows == 0.0) | (rows == 1.0)) and np.all(
            np.isin(rows.sum(axis=1), (0.0, 1.0))
        )
        if not ok:
            raise ValueError("condition rows must be exactly one-hot or all-zero")


def one_hot(index: int, length: int) -> np.ndarray:
    v = np.zeros(length, dtype=np.float64)
    v[index] = 1.0
    return v


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "dense" | "conv" | "transposed_conv"
    width: int  # fan-out (dense) or out-channels (conv kinds)
    kernel: int = 0
    stride: int = 1
    pad: int = 0
    activation: str = "none"  # "leaky_relu" | "tanh" | "sigmoid" | "none"
    inject_domain: bool = False
    inject_label: bool = False
    reshape: tuple | None = None  # (C, H, W) applied to the layer input
    normalize: bool = False

    def __post_init__(self):
        if self.inject_domain and self.inject_label:
            raise BuildError(
                "a layer may receive the domain vector or the label vector, "
                "never both (disjoint injection sites)"
            )
        if self.kind not in ("dense", "conv", "transposed_conv"):
            raise BuildError(f"unknown layer kind {self.kind!r}")


@dataclass(frozen=True)
class NetworkSpec:
    role: str  # "generator" | "discriminator"
    layers: tuple
    noise_dim: int = 0  # generator input width
    image_shape: tuple = ()  # discriminator input (C, H, W)
    domain_count: int = 2
    label_count: int = 0
    # multiplier on the He-style uniform init bound; < 1 starts the network
    # in a flatter, more nearly linear regime
    init_gain: float = 1.0

    def validate(self):
        if self.role not in ("generator", "discriminator"):
            raise BuildError(f"unknown role {self.role!r}")
        if not self.layers:
            raise BuildError("network needs at least one layer")
        if self.role == "generator":
            if self.layers[0].inject_domain:
                raise BuildError(
                    "generator rule violation: the noise input layer must not "
                    "be conditioned by the domain vector"
                )
            if self.noise_dim < 1:
                raise BuildError("generator needs noise_dim >= 1")
        else:
            if not self.layers[0].inject_domain:
                raise BuildError(
                    "discriminator rule violation: the image input layer must "
                    "be conditioned by the domain vector"
                )
            if len(self.image_shape) not in (1, 3):
                raise BuildError(
                    "discriminator needs image_shape (C, H, W) or (F,)"
                )
        if any(l.inject_label for l in self.layers) and self.label_count < 1:
            raise BuildError("label injection requires label_count >= 1")

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "noise_dim": self.noise_dim,
            "image_shape": list(self.image_shape),
            "domain_count": self.domain_count,
            "label_count": self.label_count,
            "init_gain": self.init_gain,
            "layers": [
                {
                    "kind": l.kind,
                    "width": l.width,
                    "kernel": l.kernel,
                    "stride": l.stride,
                    "pad": l.pad,
                    "activation": l.activation,
                    "inject_domain": l.inject_domain,
                    "inject_label": l.inject_label,
                    "reshape": list(l.reshape) if l.reshape else None,
                    "normalize": l.normalize,
                }
                for l in self.layers
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkSpec":
        layers = tuple(
            LayerSpec(
                kind=l["kind"], width=l["width"], kernel=l["kernel"],
                stride=l["stride"], pad=l["pad"], activation=l["activation"],
                inject_domain=l["inject_domain"], inject_label=l["inject_label"],
                reshape=tuple(l["reshape"]) if l["reshape"] else None,
                normalize=l["normalize"],
            )
            for l in d["layers"]
        )
        return NetworkSpec(
            role=d["role"], layers=layers, noise_dim=d["noise_dim"],
            image_shape=tuple(d["image_shape"]), domain_count=d["domain_count"],
            label_count=d["label_count"], init_gain=d["init_gain"],
        )


@dataclass
class _Layer:
    spec: LayerSpec
    weight: np.ndarray  # dense: (fan_in, fan_out); conv kinds: kernel
    bias: np.ndarray
    in_shape: tuple  # shape of the layer input before injection (no batch)
    out_shape: tuple
    # ranges along the fan-in axis (dense rows / kernel in-channels)
    core: slice = field(default=slice(0, 0))
    domain: slice | None = None
    label: slice | None = None


class Network:
    """Instantiated parameters plus the spec that produced them."""

    def __init__(self, spec: NetworkSpec, layers: list[_Layer]):
        self.spec = spec
        self.layers = layers

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for i, l in enumerate(self.layers):
            out[f"layer{i}.weight"] = l.weight
            out[f"layer{i}.bias"] = l.bias
        return out

    def set_parameters(self, params: dict[str, np.ndarray]):
        for i, l in enumerate(self.layers):
            l.weight = np.array(params[f"layer{i}.weight"], dtype=np.float64)
            l.bias = np.array(params[f"layer{i}.bias"], dtype=np.float64)

    def parameter_count(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def bind(self, tape: Tape) -> dict[str, Tensor]:
        """Register all parameters as leaves on the tape (once per tape)."""
        key = id(self)
        cached = tape._param_cache.get(key)
        if cached is None:
            cached = {name: tape.leaf(arr) for name, arr in self.parameters().items()}
            tape._param_cache[key] = cached
        return cached


def _fan_in(spec: NetworkSpec, layer: LayerSpec, in_shape: tuple) -> int:
    extra = 0
    if layer.inject_domain:
        extra += spec.domain_count
    if layer.inject_label:
        extra += spec.label_count
    if layer.kind == "dense":
        flat = int(np.prod(in_shape))
        return flat + extra
    return in_shape[0] + extra


def _plan_shapes(spec: NetworkSpec) -> list[tuple]:
    """Per-layer (in_shape, out_shape) ignoring injected extras."""
    if spec.role == "generator":
        cur: tuple = (spec.noise_dim,)
    else:
        cur = tuple(spec.image_shape)
    plan = []
    for layer in spec.layers:
        if layer.reshape is not None:
            if int(np.prod(cur)) != int(np.prod(layer.reshape)):
                raise BuildError(
                    f"reshape {layer.reshape} incompatible with input {cur}"
                )
            cur = tuple(layer.reshape)
        if layer.kind == "dense":
            in_shape = (int(np.prod(cur)),)
            out_shape = (layer.width,)
        else:
            if len(cur) != 3:
                raise BuildError(
                    f"{layer.kind} layer needs a (C, H, W) input, got {cur}"
                )
            C, H, W = cur
            k, s, p = layer.kernel, layer.stride, layer.pad
            if layer.kind == "conv":
                if (H + 2 * p - k) % s or (W + 2 * p - k) % s:
                    raise BuildError("conv extent not divisible by stride")
                out_shape = (layer.width,
                             (H + 2 * p - k) // s + 1,
                             (W + 2 * p - k) // s + 1)
            else:
                out_shape = (layer.width,
                             (H - 1) * s + k - 2 * p,
                             (W - 1) * s + k - 2 * p)
            in_shape = cur
        plan.append((in_shape, out_shape))
        cur = out_shape
    return plan


def build_network(spec: NetworkSpec, seed: int) -> Network:
    """Instantiate parameters for a validated spec.

    Weights are uniform in [-s, s] with s = sqrt(6/fan_in) (He-style; fan-in
    counts injected components and kernel area), which keeps pre-activation
    scale roughly constant through leaky-relu stacks; biases start at zero.
    """
    spec.validate()
    plan = _plan_shapes(spec)
    seeds = np.random.SeedSequence(seed).spawn(len(spec.layers))
    layers = []
    for lspec, (in_shape, out_shape), ss in zip(spec.layers, plan, seeds):
        rng = np.random.default_rng(ss)
        core_n = int(np.prod(in_shape)) if lspec.kind == "dense" else in_shape[0]
        fan_in = _fan_in(spec, lspec, in_shape)
        gain = spec.init_gain
        if lspec.kind == "dense":
            s = gain * np.sqrt(6.0 / fan_in)
            weight = rng.uniform(-s, s, size=(fan_in, lspec.width))
        else:
            # conv fan-in counts kernel area; a strided transposed conv only
            # feeds (k/stride)^2 taps into each output position
            k = lspec.kernel
            if lspec.kind == "conv":
                s = gain * np.sqrt(6.0 / (fan_in * k * k))
                weight = rng.uniform(-s, s, size=(lspec.width, fan_in, k, k))
            else:
                taps = max(k * k // (lspec.stride * lspec.stride), 1)
                s = gain * np.sqrt(6.0 / (fan_in * taps))
                weight = rng.uniform(-s, s, size=(fan_in, lspec.width, k, k))
        bias = np.zeros(lspec.width, dtype=np.float64)
        layer = _Layer(
            spec=lspec, weight=weight, bias=bias,
            in_shape=in_shape, out_shape=out_shape,
            core=slice(0, core_n),
        )
        pos = core_n
        if lspec.inject_domain:
            layer.domain = slice(pos, pos + spec.domain_count)
            pos += spec.domain_count
        if lspec.inject_label:
            layer.label = slice(pos, pos + spec.label_count)
        layers.append(layer)
    return Network(spec, layers)


def build_generator(spec: NetworkSpec, seed: int) -> Network:
    if spec.role != "generator":
        raise BuildError("build_generator needs a generator spec")
    return build_network(spec, seed)


def build_discriminator(spec: NetworkSpec, seed: int) -> Network:
    if spec.role != "discriminator":
        raise BuildError("build_discriminator needs a discriminator spec")
    return build_network(spec, seed)


def _vector_rows(values: np.ndarray, batch: int, length: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (batch, arr.shape[0]))
    if arr.shape != (batch, length):
        raise ad.ShapeError(f"condition vector ({what})", arr.shape, (batch, length))
    return arr


def condition_inject(activation: Tensor, values, site_kind: str) -> Tensor:
    """Append a condition vector to an activation.

    Flat site: concatenate along the feature axis.  Conv site: append one
    constant channel per component, filled with that component's value at
    every spatial position.
    """
    if isinstance(values, ConditionVector):
        values = values.values
    tape = activation.tape
    B = activation.data.shape[0]
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (B, arr.shape[0]))
    if arr.shape[0] != B:
        raise ad.ShapeError("condition_inject", activation.data.shape, arr.shape)
    if site_kind == "dense":
        if activation.data.ndim != 2:
            raise ad.ShapeError("condition_inject (flat site)", activation.data.shape)
        return ad.concat([activation, tape.leaf(arr)], axis=1)
    if activation.data.ndim != 4:
        raise ad.ShapeError("condition_inject (conv site)", activation.data.shape)
    _, _, H, W = activation.data.shape
    channels = np.broadcast_to(arr[:, :, None, None], (B, arr.shape[1], H, W))
    return ad.concat([activation, tape.leaf(np.ascontiguousarray(channels))], axis=1)


def _batch_norm(h: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-feature standardization over the batch axis (no learned affine)."""
    centered = ad.sub(h, _batch_mean(h))
    var = _batch_mean(ad.square(centered))
    return ad.mul(centered, ad.rsqrt(ad.shift(var, eps)))


def _batch_mean(h: Tensor) -> Tensor:
    """Mean over the batch axis, shape = h.shape[1:]. Composed from matmul."""
    B = h.data.shape[0]
    flat = ad.reshape(h, (B, -1))
    ones = h.tape.leaf(np.full((1, B), 1.0 / B))
    m = ad.matmul(ones, flat)  # (1, F)
    return ad.reshape(m, h.data.shape[1:])


_ACTIVATIONS = {
    "leaky_relu": lambda t: ad.leaky_relu(t, 0.2),
    "tanh": ad.tanh,
    "sigmoid": ad.sigmoid,
    "none": lambda t: t,
}


def forward(net: Network, x, domain=None, label=None, tape: Tape | None = None) -> Tensor:
    """Run the network, recording all intermediates on the tape."""
    if tape is None:
        tape = Tape()
    h = x if isinstance(x, Tensor) else tape.leaf(x)
    if h.tape is not tape:
        raise ValueError("input tensor lives on a different tape")
    B = h.data.shape[0]
    params = net.bind(tape)
    spec = net.spec
    for i, layer in enumerate(net.layers):
        lspec = layer.spec
        if lspec.reshape is not None:
            h = ad.reshape(h, (B,) + lspec.reshape)
        if lspec.kind == "dense" and h.data.ndim != 2:
            h = ad.reshape(h, (B, -1))
        if lspec.inject_domain:
            if domain is None:
                raise ValueError("network requires a domain vector")
            rows = _vector_rows(
                domain.values if isinstance(domain, ConditionVector) else domain,
                B, spec.domain_count, "domain")
            h = condition_inject(h, rows, "dense" if lspec.kind == "dense" else "conv")
        if lspec.inject_label:
            if label is None:
                raise ValueError("network requires a label vector")
            rows = _vector_rows(
                label.values if isinstance(label, ConditionVector) else label,
                B, spec.label_count, "label")
            h = condition_inject(h, rows, "dense" if lspec.kind == "dense" else "conv")
        W = params[f"layer{i}.weight"]
        b = params[f"layer{i}.bias"]
        if lspec.kind == "dense":
            h = ad.add(ad.matmul(h, W), b)
        elif lspec.kind == "conv":
            h = ad.conv2d(h, W, bias=b, stride=lspec.stride, pad=lspec.pad)
        else:
            h = ad.transposed_conv2d(h, W, bias=b, stride=lspec.stride, pad=lspec.pad)
        if lspec.normalize:
            h = _batch_norm(h)
        h = _ACTIVATIONS[lspec.activation](h)
    return h


# ---------------------------------------------------------------------------
# default desk-scale architectures


def default_generator_spec(noise_dim: int = 64, domain_count: int = 2,
                           label_count: int = 0, image_shape: tuple = (1, 8, 8),
                           base: int = 64, normalize: bool = False) -> NetworkSpec:
    """Dense stem into two stride-2 transposed convolutions.

    image_shape is (C, H, W) with H and W divisible by 4.  With normalize,
    hidden layers standardize their pre-activations over the batch (the
    output layer never does).
    """
    C, H, W = image_shape
    if H % 4 or W % 4:
        raise BuildError("image extents must be divisible by 4")
    fh, fw = H // 4, W // 4
    return NetworkSpec(
        role="generator",
        noise_dim=noise_dim,
        domain_count=domain_count,
        label_count=label_count,
        layers=(
            LayerSpec("dense", 4 * base, activation="leaky_relu",
                      inject_label=label_count > 0, normalize=normalize),
            # the dense trunk is fully shared across domains; the domain
            # vector only steers the convolutional rendering layers, which
            # keeps shared-noise generations structurally aligned
            LayerSpec("dense", 2 * base * fh * fw, activation="leaky_relu",
                      normalize=normalize),
            LayerSpec("transposed_conv", base, kernel=4, stride=2, pad=1,
                      activation="leaky_relu", inject_domain=True,
                      reshape=(2 * base, fh, fw), normalize=normalize),
            LayerSpec("transposed_conv", C, kernel=4, stride=2, pad=1,
                      activation="tanh", inject_domain=True),
        ),
    )


def default_discriminator_spec(image_shape: tuple = (1, 8, 8), domain_count: int = 2,
                               label_count: int = 0, base: int = 64,
                               normalize: bool = False) -> NetworkSpec:
    """Two stride-2 convolutions into a dense head emitting one scalar.

    With normalize, hidden layers after the image-input layer standardize
    their pre-activations over the batch.
    """
    return NetworkSpec(
        role="discriminator",
        image_shape=image_shape,
        domain_count=domain_count,
        label_count=label_count,
        layers=(
            LayerSpec("conv", base, kernel=4, stride=2, pad=1,
                      activation="leaky_relu", inject_domain=True),
            LayerSpec("conv", 2 * base, kernel=4, stride=2, pad=1,
                      activation="leaky_relu", normalize=normalize),
            LayerSpec("dense", 4 * base, activation="leaky_relu",
                      inject_label=label_count > 0, normalize=normalize),
            LayerSpec("dense", 1, activation="none"),
        ),
    )


def mlp_generator_spec(noise_dim: int = 4, domain_count: int = 2,
                       label_count: int = 0, out_dim: int = 2,
                       hidden: tuple = (32, 32)) -> NetworkSpec:
    layers = [LayerSpec("dense", hidden[0], activation="leaky_relu",
                        inject_label=label_count > 0)]
    for h in hidden[1:]:
        layers.append(LayerSpec("dense", h, activation="leaky_relu",
                                inject_domain=True))
    layers.append(LayerSpec("dense", out_dim, activation="tanh",
                            inject_domain=True))
    # small-gain start: a nearly linear generator keeps shared-noise maps
    # across domains strongly correlated on the low-dimensional tasks
    return NetworkSpec(role="generator", layers=tuple(layers),
                       noise_dim=noise_dim, domain_count=domain_count,
                       label_count=label_count, init_gain=0.4)


def mlp_discriminator_spec(in_dim: int = 2, domain_count: int = 2,
                           label_count: int = 0,
                           hidden: tuple = (32, 32)) -> NetworkSpec:
    layers = [LayerSpec("dense", hidden[0], activation="leaky_relu",
                        inject_domain=True)]
    for h in hidden[1:]:
        layers.append(LayerSpec("dense", h, activation="leaky_relu"))
    if label_count > 0:
        # label goes to the penultimate dense layer, never the input layer
        layers[-1] = replace(layers[-1], inject_label=True)
    layers.append(LayerSpec("dense", 1, activation="none"))
    return NetworkSpec(role="discriminator", layers=tuple(layers),
                       image_shape=(in_dim,), domain_count=domain_count,
                       label_count=label_count, init_gain=0.4)
