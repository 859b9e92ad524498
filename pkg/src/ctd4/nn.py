"""Minimal dense-network stack: fixed-topology MLPs with manual reverse mode.

There are exactly two network shapes in this codebase (a tanh-headed actor and
a two-headed critic), so instead of a general autodiff graph we hand-write the
forward and backward passes for one architecture family:

    x -> [Linear -> ReLU] * len(hidden) -> {head_i: Linear -> activation_i}

Heads share the last hidden layer.  ``backward`` computes the exact gradient
of the scalar sum(upstream_h * output_h) over all heads, with respect to every
parameter and (optionally) the input -- the input gradient is what lets the
actor update chain through the critics.

All math is double precision and runs through the active kernel backend
(``ctd4.backends``), so the compiled and numpy paths are interchangeable.

Parameter blobs: a 16-byte header (magic ``CTD4``, u32 format version,
u64 scalar count) followed by every array raveled to little-endian float64,
in layer order (W0, b0, W1, b1, ..., then each head's W, b in spec order).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import backends

MAGIC = b"CTD4"
BLOB_VERSION = 1
_HEADER = struct.Struct("<4sIQ")

SIGMA_FLOOR = 1e-4  # shift added by the softplus head so outputs stay > 0

LINEAR = "linear"
TANH = "tanh"
SOFTPLUS_SHIFTED = "softplus_shifted"
HEAD_ACTIVATIONS = (LINEAR, TANH, SOFTPLUS_SHIFTED)


@dataclass(frozen=True, slots=True)
class HeadSpec:
    name: str
    width: int
    activation: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("head name must be non-empty")
        if self.width < 1:
            raise ValueError(f"head {self.name!r} has zero width")
        if self.activation not in HEAD_ACTIVATIONS:
            raise ValueError(
                f"head {self.name!r}: unknown activation {self.activation!r}; "
                f"expected one of {HEAD_ACTIVATIONS}"
            )


@dataclass(frozen=True, slots=True)
class MlpSpec:
    """Topology of one MLP: input width, ReLU hidden widths, output heads."""

    input_dim: int
    hidden: tuple[int, ...]
    heads: tuple[HeadSpec, ...]

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if any(w < 1 for w in self.hidden):
            raise ValueError(f"zero-width hidden layer in {self.hidden}")
        if not self.heads:
            raise ValueError("spec needs at least one head")
        names = [h.name for h in self.heads]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate head names: {names}")

    def layer_shapes(self) -> list[tuple[int, ...]]:
        """Shapes of every parameter array, in serialization order."""
        shapes: list[tuple[int, ...]] = []
        fan_in = self.input_dim
        for width in self.hidden:
            shapes.append((fan_in, width))
            shapes.append((width,))
            fan_in = width
        for head in self.heads:
            shapes.append((fan_in, head.width))
            shapes.append((head.width,))
        return shapes

    def num_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.layer_shapes())


def actor_spec(obs_dim: int, action_dim: int, hidden: tuple[int, ...]) -> MlpSpec:
    return MlpSpec(obs_dim, hidden, (HeadSpec("action", action_dim, TANH),))


def critic_spec(obs_dim: int, action_dim: int, hidden: tuple[int, ...]) -> MlpSpec:
    """State-action in, a Gaussian out: a linear mean head and a softplus
    std head (shifted by SIGMA_FLOOR so the std is strictly positive)."""
    heads = (
        HeadSpec("mu", 1, LINEAR),
        HeadSpec("sigma", 1, SOFTPLUS_SHIFTED),
    )
    return MlpSpec(obs_dim + action_dim, hidden, heads)


@dataclass(slots=True)
class MlpParams:
    spec: MlpSpec
    arrays: list[np.ndarray]

    def copy(self) -> MlpParams:
        return MlpParams(self.spec, [a.copy() for a in self.arrays])


@dataclass(slots=True)
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, spec: MlpSpec) -> AdamState:
        shapes = spec.layer_shapes()
        return cls(
            m=[np.zeros(s) for s in shapes],
            v=[np.zeros(s) for s in shapes],
        )


def init_mlp(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Fan-in uniform weights, U(-1/sqrt(fan_in), +1/sqrt(fan_in)); zero biases."""
    arrays: list[np.ndarray] = []
    for shape in spec.layer_shapes():
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[0])
            arrays.append(rng.uniform(-bound, bound, size=shape))
        else:
            arrays.append(np.zeros(shape))
    return MlpParams(spec, arrays)


@dataclass(slots=True)
class ForwardCache:
    x: np.ndarray                       # (M, input_dim)
    posts: list[np.ndarray]             # hidden post-activations, (M, width)
    head_saved: dict[str, np.ndarray | None]  # tanh: post; softplus: pre
    batched: bool
    spec: MlpSpec = field(repr=False, kw_only=True)


def forward(
    params: MlpParams, x: np.ndarray
) -> tuple[dict[str, np.ndarray], ForwardCache]:
    """Run the MLP on a vector or a batch of row vectors.

    Returns ({head name: output}, cache).  A 1-D input of length input_dim
    yields 1-D head outputs of each head's width; a (M, input_dim) batch
    yields (M, width) outputs.
    """
    spec = params.spec
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    if not batched:
        if x.ndim != 1:
            raise ValueError(f"input must be 1-D or 2-D, got ndim={x.ndim}")
        x = x[None, :]
    if x.shape[1] != spec.input_dim:
        raise ValueError(
            f"input width {x.shape[1]} != spec input_dim {spec.input_dim}"
        )
    x = np.ascontiguousarray(x)

    k = backends.get()
    posts: list[np.ndarray] = []
    h = x
    idx = 0
    for _ in spec.hidden:
        z = k.matmul(h, params.arrays[idx])
        k.add_bias_relu_(z, params.arrays[idx + 1])
        posts.append(z)
        h = z
        idx += 2

    outputs: dict[str, np.ndarray] = {}
    head_saved: dict[str, np.ndarray | None] = {}
    for head in spec.heads:
        z = k.matmul(h, params.arrays[idx])
        k.add_bias_(z, params.arrays[idx + 1])
        idx += 2
        if head.activation == TANH:
            k.tanh_(z)
            head_saved[head.name] = z
        elif head.activation == SOFTPLUS_SHIFTED:
            head_saved[head.name] = z.copy()  # pre-activation, for backward
            k.softplus_shift_(z, SIGMA_FLOOR)
        else:
            head_saved[head.name] = None
        outputs[head.name] = z if batched else z[0]

    return outputs, ForwardCache(x, posts, head_saved, batched, spec=spec)


def backward(
    params: MlpParams,
    cache: ForwardCache,
    upstream: dict[str, np.ndarray],
    *,
    need_param_grads: bool = True,
    need_input_grad: bool = True,
) -> tuple[list[np.ndarray] | None, np.ndarray | None]:
    """Gradients of sum_h <upstream[h], output_h> from a matching forward.

    Heads absent from ``upstream`` contribute zero (their grads are skipped
    entirely, which is what makes the actor's mu-only backward cheap).
    Param grads are summed over the batch.  Returns (param_grads, input_grad),
    either of which is None when not requested.
    """
    spec = params.spec
    if cache.spec is not spec and cache.spec != spec:
        raise ValueError("cache does not match params spec")
    k = backends.get()
    m = cache.x.shape[0]

    shapes = spec.layer_shapes()
    grads: list[np.ndarray] | None = None
    if need_param_grads:
        grads = [None] * len(shapes)  # type: ignore[list-item]

    last_post = cache.posts[-1] if spec.hidden else cache.x
    d_post = np.zeros_like(last_post)

    idx = 2 * len(spec.hidden)
    for head in spec.heads:
        w = params.arrays[idx]
        up = upstream.get(head.name)
        if up is None:
            if grads is not None:
                grads[idx] = np.zeros(shapes[idx])
                grads[idx + 1] = np.zeros(shapes[idx + 1])
            idx += 2
            continue
        dz = np.array(up, dtype=np.float64)  # private copy; bwd ops mutate it
        if not cache.batched and dz.shape == (head.width,):
            dz = dz[None, :]
        if dz.shape != (m, head.width):
            raise ValueError(
                f"upstream for head {head.name!r} has shape {np.shape(up)}, "
                f"expected {(m, head.width)}"
            )
        dz = np.ascontiguousarray(dz)
        saved = cache.head_saved[head.name]
        if head.activation == TANH:
            k.tanh_bwd_(dz, saved)
        elif head.activation == SOFTPLUS_SHIFTED:
            k.softplus_bwd_(dz, saved)
        if grads is not None:
            grads[idx] = k.matmul_tn(last_post, dz)
            grads[idx + 1] = k.colsum(dz)
        d_post += k.matmul_nt(dz, w)
        idx += 2

    h_inputs = [cache.x] + cache.posts[:-1]
    for layer in reversed(range(len(spec.hidden))):
        k.relu_bwd_(d_post, cache.posts[layer])
        wi = 2 * layer
        if grads is not None:
            grads[wi] = k.matmul_tn(h_inputs[layer], d_post)
            grads[wi + 1] = k.colsum(d_post)
        if layer > 0 or need_input_grad:
            d_post = k.matmul_nt(d_post, params.arrays[wi])

    input_grad: np.ndarray | None = None
    if need_input_grad:
        input_grad = d_post if cache.batched else d_post[0]
    return grads, input_grad


def adam_step(
    params: MlpParams,
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place Adam update with bias correction; increments state.t.

    Raises FloatingPointError if any updated parameter is non-finite, so a
    diverging run dies loudly instead of training on NaNs.
    """
    if len(grads) != len(params.arrays):
        raise ValueError(
            f"got {len(grads)} gradient arrays for {len(params.arrays)} params"
        )
    k = backends.get()
    state.t += 1
    for i, (p, g) in enumerate(zip(params.arrays, grads)):
        if p.shape != g.shape:
            raise ValueError(
                f"gradient {i} has shape {g.shape}, expected {p.shape}"
            )
        ok = k.adam_(p, g, state.m[i], state.v[i], state.t, lr, beta1, beta2, eps)
        if not ok:
            raise FloatingPointError(
                f"non-finite parameter after Adam step t={state.t} (array {i})"
            )


def polyak(target: MlpParams, source: MlpParams, tau: float) -> None:
    """In-place soft update: target <- (1 - tau) * target + tau * source."""
    if target.spec != source.spec:
        raise ValueError("polyak: specs differ")
    k = backends.get()
    for t_arr, s_arr in zip(target.arrays, source.arrays):
        k.polyak_(t_arr, s_arr, tau)


def serialize_arrays(arrays: list[np.ndarray]) -> bytes:
    count = sum(a.size for a in arrays)
    parts = [_HEADER.pack(MAGIC, BLOB_VERSION, count)]
    parts.extend(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    return b"".join(parts)


def deserialize_arrays(
    data: bytes | memoryview, shapes: list[tuple[int, ...]], offset: int = 0
) -> tuple[list[np.ndarray], int]:
    """Parse one blob starting at ``offset``; returns (arrays, next offset)."""
    view = memoryview(data)
    if len(view) - offset < _HEADER.size:
        raise ValueError("truncated blob: missing header")
    magic, version, count = _HEADER.unpack_from(view, offset)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != BLOB_VERSION:
        raise ValueError(f"unsupported blob version {version}")
    expected = sum(int(np.prod(s)) for s in shapes)
    if count != expected:
        raise ValueError(f"blob holds {count} scalars, spec expects {expected}")
    offset += _HEADER.size
    nbytes = 8 * count
    if len(view) - offset < nbytes:
        raise ValueError("truncated blob: missing parameter data")
    flat = np.frombuffer(view, dtype="<f8", count=count, offset=offset)
    arrays: list[np.ndarray] = []
    pos = 0
    for shape in shapes:
        n = int(np.prod(shape))
        arrays.append(flat[pos : pos + n].reshape(shape).astype(np.float64))
        pos += n
    return arrays, offset + nbytes


def serialize_params(params: MlpParams) -> bytes:
    return serialize_arrays(params.arrays)


def deserialize_params(
    data: bytes | memoryview, spec: MlpSpec, offset: int = 0
) -> tuple[MlpParams, int]:
    arrays, offset = deserialize_arrays(data, spec.layer_shapes(), offset)
    return MlpParams(spec, arrays), offset
