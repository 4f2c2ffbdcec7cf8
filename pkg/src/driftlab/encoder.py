"""Small dual-encoder model: MLP branches with L2-normalized outputs.

Forward passes apply the activation after every layer except the last, then
normalize each output row to the unit sphere. Gradients are computed by
manual backpropagation, including the Jacobian of the row normalization
x -> x/||x||, which is (I - u u^T)/||x|| for u = x/||x||.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegenerateRowError, DimensionMismatchError, ShapeMismatchError
from .linalg import DEGENERATE_NORM, SeedLike, as_matrix, rng_from

ACTIVATIONS = ("tanh", "relu")

_SNAPSHOT_MAGIC = "driftlab-snapshot 1"


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input -> hidden... -> output) plus activation tag."""

    layer_dims: Tuple[int, ...]
    activation: str = "tanh"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 2:
            raise DimensionMismatchError("an MLP needs at least input and output dims")
        if any(d < 1 for d in dims):
            raise DimensionMismatchError(f"all layer dims must be >= 1: {dims}")
        if self.activation not in ACTIVATIONS:
            raise DimensionMismatchError(f"unknown activation {self.activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1


@dataclass
class MlpParams:
    """Per-layer weight matrices (out x in) and bias vectors (out)."""

    spec: MlpSpec
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def copy(self) -> "MlpParams":
        return MlpParams(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def arrays(self) -> List[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]; referenced, not copied."""
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


@dataclass
class MlpGrads:
    """Gradient bundle shape-mirroring MlpParams."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def arrays(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_params(spec: MlpSpec, seed: SeedLike) -> MlpParams:
    """Glorot-uniform weights (a = sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = rng_from(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_dims[:-1], spec.layer_dims[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(spec, weights, biases)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activate_grad(z: np.ndarray, h: np.ndarray, activation: str) -> np.ndarray:
    # h is the already-computed activation output for z.
    if activation == "tanh":
        return 1.0 - h * h
    return (z > 0.0).astype(np.float64)


@dataclass
class ForwardCache:
    """Intermediates needed to backpropagate without recomputation."""

    inputs: np.ndarray
    pre_acts: List[np.ndarray]   # z_k for every layer
    hiddens: List[np.ndarray]    # activation outputs, one per hidden layer
    norms: np.ndarray            # row norms of the final pre-normalization output
    unit_out: np.ndarray


def encode_with_cache(params: MlpParams, inputs) -> Tuple[np.ndarray, ForwardCache]:
    """Forward pass returning unit-norm rows plus backprop intermediates."""
    x = as_matrix(inputs)
    spec = params.spec
    if x.shape[1] != spec.layer_dims[0]:
        raise DimensionMismatchError(
            f"input width {x.shape[1]} != spec input dim {spec.layer_dims[0]}"
        )
    pre_acts: List[np.ndarray] = []
    hiddens: List[np.ndarray] = []
    h = x
    last = spec.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre_acts.append(z)
        if k < last:
            h = _activate(z, spec.activation)
            hiddens.append(h)
        else:
            h = z
    norms = np.linalg.norm(h, axis=1)
    if np.any(norms <= DEGENERATE_NORM):
        bad = int(np.argmax(norms <= DEGENERATE_NORM))
        raise DegenerateRowError(f"pre-normalization row {bad} collapsed ({norms[bad]:.3e})")
    unit = h / norms[:, None]
    return unit, ForwardCache(x, pre_acts, hiddens, norms, unit)


def encode(params: MlpParams, inputs) -> np.ndarray:
    """Forward pass through all layers, then row L2 normalization."""
    unit, _ = encode_with_cache(params, inputs)
    return unit


def encode_backward(
    params: MlpParams,
    inputs,
    upstream: np.ndarray,
    cache: Optional[ForwardCache] = None,
) -> MlpGrads:
    """Exact parameter gradients given d(loss)/d(unit output).

    The upstream gradient is with respect to the normalized rows; the
    normalization Jacobian is applied first, then standard linear/activation
    backprop. Intermediates are recomputed when no cache is supplied.
    """
    if cache is None:
        _, cache = encode_with_cache(params, inputs)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != cache.unit_out.shape:
        raise ShapeMismatchError(
            f"upstream shape {g.shape} != output shape {cache.unit_out.shape}"
        )
    spec = params.spec
    u = cache.unit_out
    # (I - u u^T)/||x|| applied row-wise.
    dz = (g - u * np.sum(g * u, axis=1, keepdims=True)) / cache.norms[:, None]
    d_weights: List[np.ndarray] = [np.empty(0)] * spec.n_layers
    d_biases: List[np.ndarray] = [np.empty(0)] * spec.n_layers
    for k in range(spec.n_layers - 1, -1, -1):
        h_in = cache.inputs if k == 0 else cache.hiddens[k - 1]
        d_weights[k] = dz.T @ h_in
        d_biases[k] = dz.sum(axis=0)
        if k > 0:
            dh = dz @ params.weights[k]
            dz = dh * _activate_grad(
                cache.pre_acts[k - 1], cache.hiddens[k - 1], spec.activation
            )
    return MlpGrads(d_weights, d_biases)


@dataclass
class DualEncoderSnapshot:
    """Frozen or trainable encoder pair plus softmax temperature."""

    vision: MlpParams
    language: MlpParams
    temperature: float
    phase_index: int = 0

    def __post_init__(self):
        if not self.temperature > 0:
            raise DimensionMismatchError(f"temperature must be > 0, got {self.temperature}")

    def copy(self) -> "DualEncoderSnapshot":
        return DualEncoderSnapshot(
            self.vision.copy(), self.language.copy(), self.temperature, self.phase_index
        )

    def param_arrays(self) -> List[np.ndarray]:
        """Flat parameter list: vision layers first, then language."""
        return self.vision.arrays() + self.language.arrays()


def init_snapshot(
    vision_spec: MlpSpec,
    language_spec: MlpSpec,
    temperature: float,
    seed: SeedLike,
) -> DualEncoderSnapshot:
    """Fresh snapshot; the two branches draw from disjoint child seeds."""
    base = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    vision = init_params(vision_spec, base + [0])
    language = init_params(language_spec, base + [1])
    return DualEncoderSnapshot(vision, language, temperature, phase_index=0)


def _spec_line(tag: str, spec: MlpSpec) -> str:
    dims = ",".join(str(d) for d in spec.layer_dims)
    return f"{tag}={dims}:{spec.activation}"


def _parse_spec_line(line: str, tag: str) -> MlpSpec:
    key, _, value = line.partition("=")
    if key != tag or not value:
        raise ValueError(f"bad snapshot line {line!r}, expected {tag}=dims:activation")
    dims_s, _, act = value.partition(":")
    dims = tuple(int(d) for d in dims_s.split(","))
    return MlpSpec(dims, act)


def snapshot_bytes(snapshot: DualEncoderSnapshot) -> bytes:
    """Serialized snapshot: small header plus raw little-endian float64 blob.

    Round-trips bit-exactly: the header carries dims/activation/temperature
    (temperature as a hex float), the blob carries every parameter array in
    layer order, weights row-major, vision branch first.
    """
    arrays = snapshot.param_arrays()
    total = sum(a.size for a in arrays)
    header = "\n".join(
        [
            _SNAPSHOT_MAGIC,
            f"phase_index={snapshot.phase_index}",
            f"temperature={float(snapshot.temperature).hex()}",
            _spec_line("vision", snapshot.vision.spec),
            _spec_line("language", snapshot.language.spec),
            f"data={total}",
            "",
        ]
    )
    buf = io.BytesIO()
    buf.write(header.encode("utf-8"))
    for a in arrays:
        buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return buf.getvalue()


def write_snapshot(snapshot: DualEncoderSnapshot, path) -> None:
    """Write the serialized snapshot to ``path``."""
    with open(path, "wb") as f:
        f.write(snapshot_bytes(snapshot))


def read_snapshot(path) -> DualEncoderSnapshot:
    """Inverse of write_snapshot."""
    with open(path, "rb") as f:
        raw = f.read()
    head, _, rest = raw.partition(b"data=")
    lines = head.decode("utf-8").splitlines()
    if not lines or lines[0] != _SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    count_s, _, blob = rest.partition(b"\n")
    total = int(count_s)
    phase_index = int(lines[1].partition("=")[2])
    temperature = float.fromhex(lines[2].partition("=")[2])
    vision_spec = _parse_spec_line(lines[3], "vision")
    language_spec = _parse_spec_line(lines[4], "language")
    values = np.frombuffer(blob[: total * 8], dtype="<f8")
    if values.size != total:
        raise ValueError(f"{path}: truncated parameter blob")

    def consume(spec: MlpSpec, offset: int):
        weights, biases = [], []
        for fan_in, fan_out in zip(spec.layer_dims[:-1], spec.layer_dims[1:]):
            w = values[offset : offset + fan_out * fan_in].reshape(fan_out, fan_in).copy()
            offset += fan_out * fan_in
            b = values[offset : offset + fan_out].copy()
            offset += fan_out
            weights.append(w)
            biases.append(b)
        return MlpParams(spec, weights, biases), offset

    vision, offset = consume(vision_spec, 0)
    language, offset = consume(language_spec, offset)
    if offset != total:
        raise ValueError(f"{path}: parameter count mismatch")
    return DualEncoderSnapshot(vision, language, temperature, phase_index)
