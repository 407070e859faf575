"""Float64 forward reference of the multi-scale temporal module.

This is an executable specification, not a training kernel: everything is
plain numpy in 64-bit precision so ports into training frameworks can be
diffed against it numerically.

A feature map is a (T, H, W, D) float64 tensor. One forward pass:

  1. temporal swap: split frames at ceil(T/2) and concatenate the halves
     in reverse order to form the cross-attention key/value stream;
  2. a stack of shift-window attention layers, each computing
     post-norm self-attention on both streams, then frame-wise
     cross-attention (query = original stream, key/value = swapped
     stream), accumulated onto a running residual that starts at the
     input; window placement alternates unshifted/shifted per layer;
  3. stacked ConvGRU layers scanned over frames with zero initial state
     (update/reset/candidate gates, same-padded convolutions);
  4. elementwise residual: output = input + final GRU states.

Windows are zero-padded to cover the (optionally shifted) plane and the
padded positions are masked out of every softmax. Normalization is layer
norm over channels without learnable affine.

Weights live in a flat binary sidecar: magic ``MSTMWTS1``, a uint64
little-endian header length, a JSON header listing config and tensor
shapes in emission order, then the float64 little-endian payload.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError, WeightFormatError

_MAGIC = b"MSTMWTS1"

GOLDEN_DIMS = (4, 8, 8, 16)
GOLDEN_INPUT_SEED = 1007
GOLDEN_WEIGHT_SEED = 2013


@dataclass(frozen=True)
class MstmConfig:
    window: int = 4
    shift: int = 2
    heads: int = 4
    layers: int = 2
    gru_layers: int = 2
    gru_kernel: int = 3

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if not 0 <= self.shift < self.window:
            raise ConfigError(f"shift must be in [0, window), got {self.shift}")
        if self.heads < 1:
            raise ConfigError(f"heads must be >= 1, got {self.heads}")
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.gru_layers < 1:
            raise ConfigError(f"gru_layers must be >= 1, got {self.gru_layers}")
        if self.gru_kernel < 1 or self.gru_kernel % 2 == 0:
            raise ConfigError(f"gru_kernel must be odd and >= 1, got {self.gru_kernel}")


@dataclass
class SwmaLayerWeights:
    self_q: np.ndarray
    self_k: np.ndarray
    self_v: np.ndarray
    self_o: np.ndarray
    cross_q: np.ndarray
    cross_k: np.ndarray
    cross_v: np.ndarray
    cross_o: np.ndarray


@dataclass
class GruLayerWeights:
    w_update: np.ndarray  # (k, k, 2D, D)
    w_reset: np.ndarray
    w_candidate: np.ndarray
    b_update: np.ndarray  # (D,)
    b_reset: np.ndarray
    b_candidate: np.ndarray


@dataclass
class MstmWeights:
    swma: list[SwmaLayerWeights]
    gru: list[GruLayerWeights]

    @property
    def channels(self) -> int:
        return self.swma[0].self_q.shape[0]


def check_feature_map(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 4:
        raise ShapeError(f"feature map must be (T, H, W, D), got shape {f.shape}")
    if min(f.shape) < 1:
        raise ShapeError(f"all feature dims must be >= 1, got {f.shape}")
    if not np.isfinite(f).all():
        raise ShapeError("feature map contains non-finite values")
    return f


def temporal_swap(f: np.ndarray) -> np.ndarray:
    """Concatenate the two temporal halves in reverse order.

    The split point is ceil(T/2), so T=3 maps [0,1,2] -> [2,0,1]; for even
    T the swap is an involution.
    """
    f = check_feature_map(f)
    t = f.shape[0]
    if t < 2:
        raise ShapeError(f"temporal_swap needs T >= 2, got T={t}")
    split = (t + 1) // 2
    return np.concatenate([f[split:], f[:split]], axis=0)


def layer_norm(x: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Layer norm over the channel axis, no learnable affine."""
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps)


def _partition_windows(x: np.ndarray, window: int, shift: int):
    """Zero-pad so shifted windows tile the plane; return window tensors.

    Returns (windows, key_valid, geometry) where windows is
    (T, n_windows, window*window, D) and key_valid marks non-padding
    positions per window.
    """
    t, h, w, d = x.shape
    padded_h = math.ceil((h + shift) / window) * window
    padded_w = math.ceil((w + shift) / window) * window
    padded = np.zeros((t, padded_h, padded_w, d), dtype=x.dtype)
    padded[:, shift : shift + h, shift : shift + w] = x
    valid = np.zeros((padded_h, padded_w), dtype=bool)
    valid[shift : shift + h, shift : shift + w] = True

    n_h = padded_h // window
    n_w = padded_w // window
    windows = (
        padded.reshape(t, n_h, window, n_w, window, d)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(t, n_h * n_w, window * window, d)
    )
    key_valid = (
        valid.reshape(n_h, window, n_w, window)
        .transpose(0, 2, 1, 3)
        .reshape(n_h * n_w, window * window)
    )
    return windows, key_valid, (padded_h, padded_w, n_h, n_w)


def _unpartition_windows(windows: np.ndarray, geometry, window: int, shift: int, h: int, w: int):
    t = windows.shape[0]
    d = windows.shape[-1]
    padded_h, padded_w, n_h, n_w = geometry
    padded = (
        windows.reshape(t, n_h, n_w, window, window, d)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(t, padded_h, padded_w, d)
    )
    return padded[:, shift : shift + h, shift : shift + w]


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    t, n, p, d = x.shape
    return x.reshape(t, n, p, heads, d // heads).transpose(0, 1, 3, 2, 4)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def windowed_attention(
    q: np.ndarray,
    kv: np.ndarray,
    w_q: np.ndarray,
    w_k: np.ndarray,
    w_v: np.ndarray,
    w_o: np.ndarray,
    window: int,
    shift: int,
    heads: int,
    return_probs: bool = False,
):
    """Frame-wise shift-window multi-head attention.

    Queries at frame t attend to keys/values of `kv` at the same frame t,
    restricted to their spatial window; scores are scaled by
    1/sqrt(D/heads) and padded key positions are masked out.
    """
    q = check_feature_map(q)
    kv = check_feature_map(kv)
    if q.shape != kv.shape:
        raise ShapeError(f"q {q.shape} and kv {kv.shape} must match")
    t, h, w, d = q.shape
    if d % heads != 0:
        raise ConfigError(f"channels {d} not divisible by heads {heads}")

    q_proj = q @ w_q
    k_proj = kv @ w_k
    v_proj = kv @ w_v

    q_win, key_valid, geometry = _partition_windows(q_proj, window, shift)
    k_win, _, _ = _partition_windows(k_proj, window, shift)
    v_win, _, _ = _partition_windows(v_proj, window, shift)

    qh = _split_heads(q_win, heads)  # (T, n, heads, P, dh)
    kh = _split_heads(k_win, heads)
    vh = _split_heads(v_win, heads)

    scale = 1.0 / math.sqrt(d // heads)
    scores = (qh @ kh.transpose(0, 1, 2, 4, 3)) * scale
    scores = np.where(key_valid[None, :, None, None, :], scores, -np.inf)
    probs = _softmax(scores)

    out = probs @ vh  # (T, n, heads, P, dh)
    merged = out.transpose(0, 1, 3, 2, 4).reshape(q_win.shape)
    result = _unpartition_windows(merged, geometry, window, shift, h, w) @ w_o
    if return_probs:
        return result, probs, key_valid
    return result


def swma_layer(
    f: np.ndarray,
    f_swapped: np.ndarray,
    z_prev: np.ndarray,
    weights: SwmaLayerWeights,
    window: int,
    shift: int,
    heads: int,
) -> np.ndarray:
    """One short-term block: self-attend both streams, cross-attend, add residual.

    Both attentions are post-norm (norm of input + attention output); the
    swapped stream is self-attended with the same projections before it
    serves as key/value for the cross step. The layer output is the
    cross result plus the running residual z_prev.
    """
    if f.shape != f_swapped.shape or f.shape != z_prev.shape:
        raise ShapeError(
            f"mismatched dims: f {f.shape}, swapped {f_swapped.shape}, z {z_prev.shape}"
        )
    q_branch = layer_norm(
        f + windowed_attention(
            f, f, weights.self_q, weights.self_k, weights.self_v, weights.self_o,
            window, shift, heads,
        )
    )
    kv_branch = layer_norm(
        f_swapped + windowed_attention(
            f_swapped, f_swapped, weights.self_q, weights.self_k, weights.self_v,
            weights.self_o, window, shift, heads,
        )
    )
    cross = windowed_attention(
        q_branch, kv_branch, weights.cross_q, weights.cross_k, weights.cross_v,
        weights.cross_o, window, shift, heads,
    )
    return layer_norm(q_branch + cross) + z_prev


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    exp_x = np.exp(x[~pos])
    out[~pos] = exp_x / (1.0 + exp_x)
    return out


def conv2d_same(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded 2-D convolution; x (H, W, Cin), kernel (k, k, Cin, Cout)."""
    k = kernel.shape[0]
    pad = k // 2
    h, w = x.shape[:2]
    padded = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    out = np.zeros((h, w, kernel.shape[3]), dtype=np.float64)
    for dy in range(k):
        for dx in range(k):
            out += padded[dy : dy + h, dx : dx + w] @ kernel[dy, dx]
    return out + bias


def conv_gru_cell(h: np.ndarray, x: np.ndarray, weights: GruLayerWeights) -> np.ndarray:
    """One ConvGRU step: gates from conv([h, x]), candidate from conv([r*h, x]).

    h' = (1 - u) * h + u * c, so each output element is a convex
    combination of the old state and the candidate.
    """
    if h.shape != x.shape:
        raise ShapeError(f"state {h.shape} and input {x.shape} must match")
    hx = np.concatenate([h, x], axis=-1)
    update = _sigmoid(conv2d_same(hx, weights.w_update, weights.b_update))
    reset = _sigmoid(conv2d_same(hx, weights.w_reset, weights.b_reset))
    candidate = np.tanh(
        conv2d_same(np.concatenate([reset * h, x], axis=-1), weights.w_candidate, weights.b_candidate)
    )
    return (1.0 - update) * h + update * candidate


def mstm_forward(f: np.ndarray, cfg: MstmConfig, weights: MstmWeights) -> np.ndarray:
    """Full forward pass; output has the input's (T, H, W, D)."""
    f = check_feature_map(f)
    t, h, w, d = f.shape
    if d % cfg.heads != 0:
        raise ConfigError(f"channels {d} not divisible by heads {cfg.heads}")
    if weights.channels != d:
        raise ShapeError(f"weights expect {weights.channels} channels, input has {d}")
    if len(weights.swma) != cfg.layers or len(weights.gru) != cfg.gru_layers:
        raise ShapeError("weight layer counts do not match the config")

    f_swapped = temporal_swap(f)
    z = f
    for index, layer in enumerate(weights.swma):
        shift = 0 if index % 2 == 0 else cfg.shift
        z = swma_layer(f, f_swapped, z, layer, cfg.window, shift, cfg.heads)

    frames = z
    for gru in weights.gru:
        state = np.zeros((h, w, d), dtype=np.float64)
        outputs = []
        for t_index in range(t):
            state = conv_gru_cell(state, frames[t_index], gru)
            outputs.append(state)
        frames = np.stack(outputs, axis=0)

    return f + frames


# --- weight construction and sidecar io --------------------------------------


def init_weights(cfg: MstmConfig, channels: int, seed: int) -> MstmWeights:
    """Seeded random weights; draw order is per layer, q/k/v/o then gru gates."""
    if channels % cfg.heads != 0:
        raise ConfigError(f"channels {channels} not divisible by heads {cfg.heads}")
    rng = np.random.default_rng(np.random.PCG64(seed))
    proj_scale = 1.0 / math.sqrt(channels)

    def proj() -> np.ndarray:
        return rng.standard_normal((channels, channels)) * proj_scale

    swma = []
    for _ in range(cfg.layers):
        swma.append(SwmaLayerWeights(*(proj() for _ in range(8))))
    gru = []
    kernel_shape = (cfg.gru_kernel, cfg.gru_kernel, 2 * channels, channels)
    for _ in range(cfg.gru_layers):
        kernels = [rng.standard_normal(kernel_shape) * 0.1 for _ in range(3)]
        biases = [np.zeros(channels) for _ in range(3)]
        gru.append(GruLayerWeights(*kernels, *biases))
    return MstmWeights(swma=swma, gru=gru)


def _tensor_items(weights: MstmWeights):
    for index, layer in enumerate(weights.swma):
        for name in ("self_q", "self_k", "self_v", "self_o", "cross_q", "cross_k", "cross_v", "cross_o"):
            yield f"swma{index}.{name}", getattr(layer, name)
    for index, layer in enumerate(weights.gru):
        for name in ("w_update", "w_reset", "w_candidate", "b_update", "b_reset", "b_candidate"):
            yield f"gru{index}.{name}", getattr(layer, name)


def dump_weights(weights: MstmWeights, cfg: MstmConfig, path: str | Path) -> None:
    tensors = list(_tensor_items(weights))
    header = {
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "channels": weights.channels,
        "tensors": [[name, list(tensor.shape)] for name, tensor in tensors],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(len(header_bytes).to_bytes(8, "little"))
        f.write(header_bytes)
        for _, tensor in tensors:
            f.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_weights(
    path: str | Path, expected: MstmConfig | None = None
) -> tuple[MstmWeights, MstmConfig]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise WeightFormatError(f"{path}: bad magic, not a weight sidecar")
    offset = len(_MAGIC)
    if len(blob) < offset + 8:
        raise WeightFormatError(f"{path}: truncated before header length")
    header_len = int.from_bytes(blob[offset : offset + 8], "little")
    offset += 8
    if len(blob) < offset + header_len:
        raise WeightFormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"{path}: unreadable header: {exc}") from exc
    offset += header_len

    try:
        cfg = MstmConfig(**header["config"])
        tensor_specs = [(str(name), tuple(int(s) for s in shape)) for name, shape in header["tensors"]]
    except (KeyError, TypeError) as exc:
        raise WeightFormatError(f"{path}: malformed header: {exc}") from exc

    if expected is not None:
        for field in fields(MstmConfig):
            if getattr(cfg, field.name) != getattr(expected, field.name):
                raise WeightFormatError(
                    f"{path}: header {field.name}={getattr(cfg, field.name)} "
                    f"does not match expected {getattr(expected, field.name)}"
                )

    payload = blob[offset:]
    expected_count = sum(int(np.prod(shape)) for _, shape in tensor_specs)
    if len(payload) != expected_count * 8:
        raise WeightFormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected_count * 8}"
        )

    arrays = {}
    cursor = 0
    for name, shape in tensor_specs:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(
            payload, dtype="<f8", count=count, offset=cursor * 8
        ).reshape(shape).astype(np.float64)
        cursor += count

    try:
        swma = [
            SwmaLayerWeights(
                *(arrays[f"swma{i}.{n}"] for n in (
                    "self_q", "self_k", "self_v", "self_o",
                    "cross_q", "cross_k", "cross_v", "cross_o",
                ))
            )
            for i in range(cfg.layers)
        ]
        gru = [
            GruLayerWeights(
                *(arrays[f"gru{i}.{n}"] for n in (
                    "w_update", "w_reset", "w_candidate",
                    "b_update", "b_reset", "b_candidate",
                ))
            )
            for i in range(cfg.gru_layers)
        ]
    except KeyError as exc:
        raise WeightFormatError(f"{path}: header is missing tensor {exc}") from exc
    return MstmWeights(swma=swma, gru=gru), cfg


# --- invariant self-check -----------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def dense_frame_attention(
    q: np.ndarray, kv: np.ndarray, w_q, w_k, w_v, w_o, heads: int
) -> np.ndarray:
    """Dense per-frame attention over all spatial positions (oracle path)."""
    t, h, w, d = q.shape
    dh = d // heads
    q_proj = (q @ w_q).reshape(t, h * w, heads, dh).transpose(0, 2, 1, 3)
    k_proj = (kv @ w_k).reshape(t, h * w, heads, dh).transpose(0, 2, 1, 3)
    v_proj = (kv @ w_v).reshape(t, h * w, heads, dh).transpose(0, 2, 1, 3)
    scores = q_proj @ k_proj.transpose(0, 1, 3, 2) / math.sqrt(dh)
    probs = _softmax(scores)
    out = (probs @ v_proj).transpose(0, 2, 1, 3).reshape(t, h, w, d)
    return out @ w_o


def golden_fixture_path() -> Path:
    return Path(importlib.resources.files("pseudovis").joinpath("data/mstm_golden.npz"))


def compute_golden_output(cfg: MstmConfig | None = None) -> np.ndarray:
    cfg = cfg or MstmConfig()
    rng = np.random.default_rng(np.random.PCG64(GOLDEN_INPUT_SEED))
    f = rng.standard_normal(GOLDEN_DIMS)
    weights = init_weights(cfg, GOLDEN_DIMS[3], GOLDEN_WEIGHT_SEED)
    return mstm_forward(f, cfg, weights)


def self_check(
    dims: tuple[int, int, int, int] = GOLDEN_DIMS,
    cfg: MstmConfig | None = None,
    golden_path: str | Path | None = None,
    seed: int = 7,
    weights: MstmWeights | None = None,
) -> list[CheckResult]:
    """Run the kernel invariant suite; returns one result per invariant."""
    cfg = cfg or MstmConfig()
    t, h, w, d = dims
    rng = np.random.default_rng(np.random.PCG64(seed))
    f = rng.standard_normal(dims)
    if weights is None:
        weights = init_weights(cfg, d, seed + 1)
    elif weights.channels != d:
        raise ShapeError(f"weights have {weights.channels} channels, dims say {d}")
    results = []

    def record(name: str, passed: bool, detail: str):
        results.append(CheckResult(name, bool(passed), detail))

    # softmax normalization + finiteness, on the shifted configuration
    layer = weights.swma[0]
    out, probs, _ = windowed_attention(
        f, temporal_swap(f), layer.cross_q, layer.cross_k, layer.cross_v,
        layer.cross_o, cfg.window, cfg.shift, cfg.heads, return_probs=True,
    )
    row_err = float(np.abs(probs.sum(axis=-1) - 1.0).max())
    record(
        "softmax_rows_sum_to_one",
        row_err <= 1e-9 and np.isfinite(out).all(),
        f"max |row sum - 1| = {row_err:.3e}",
    )

    if t % 2 == 0:
        swap_ok = np.array_equal(temporal_swap(temporal_swap(f)), f)
        record("temporal_swap_involution", swap_ok, "swap(swap(f)) == f for even T")
    else:
        cycled = temporal_swap(f)
        seen = {tuple(np.sort(frame, axis=None)) for frame in f}
        seen2 = {tuple(np.sort(frame, axis=None)) for frame in cycled}
        record("temporal_swap_involution", seen == seen2, "frame multiset preserved (odd T)")

    forward = mstm_forward(f, cfg, weights)
    record(
        "shape_preserved",
        forward.shape == f.shape and np.isfinite(forward).all(),
        f"{f.shape} -> {forward.shape}",
    )

    oracle_dims = (2, 4, 4, 4)
    rng_o = np.random.default_rng(np.random.PCG64(seed + 2))
    q_o = rng_o.standard_normal(oracle_dims)
    kv_o = rng_o.standard_normal(oracle_dims)
    w_full = init_weights(MstmConfig(window=4, shift=0, heads=2), 4, seed + 3).swma[0]
    windowed = windowed_attention(
        q_o, kv_o, w_full.cross_q, w_full.cross_k, w_full.cross_v, w_full.cross_o,
        window=4, shift=0, heads=2,
    )
    dense = dense_frame_attention(
        q_o, kv_o, w_full.cross_q, w_full.cross_k, w_full.cross_v, w_full.cross_o, heads=2
    )
    oracle_err = float(np.abs(windowed - dense).max())
    record("dense_attention_oracle", oracle_err <= 1e-9, f"max |windowed - dense| = {oracle_err:.3e}")

    rng_g = np.random.default_rng(np.random.PCG64(seed + 4))
    gru = weights.gru[0]
    convex_ok = True
    worst = 0.0
    for _ in range(100):
        h_state = rng_g.standard_normal((2, 2, d))
        x_state = rng_g.standard_normal((2, 2, d))
        hx = np.concatenate([h_state, x_state], axis=-1)
        reset = _sigmoid(conv2d_same(hx, gru.w_reset, gru.b_reset))
        candidate = np.tanh(
            conv2d_same(np.concatenate([reset * h_state, x_state], axis=-1), gru.w_candidate, gru.b_candidate)
        )
        new_state = conv_gru_cell(h_state, x_state, gru)
        lo = np.minimum(h_state, candidate) - 1e-12
        hi = np.maximum(h_state, candidate) + 1e-12
        gap = max(float((lo - new_state).max()), float((new_state - hi).max()))
        worst = max(worst, gap)
        convex_ok &= bool((new_state >= lo).all() and (new_state <= hi).all())
    record("convgru_convex_combination", convex_ok, f"max bound excess = {worst:.3e}")

    perturb_frame = t - 1
    kv_base = temporal_swap(f)
    kv_pert = kv_base.copy()
    kv_pert[perturb_frame] += 1.0
    out_base = windowed_attention(
        f, kv_base, layer.cross_q, layer.cross_k, layer.cross_v, layer.cross_o,
        cfg.window, cfg.shift, cfg.heads,
    )
    out_pert = windowed_attention(
        f, kv_pert, layer.cross_q, layer.cross_k, layer.cross_v, layer.cross_o,
        cfg.window, cfg.shift, cfg.heads,
    )
    delta = np.abs(out_pert - out_base).reshape(t, -1).max(axis=1)
    others_quiet = bool((np.delete(delta, perturb_frame) == 0.0).all())
    record(
        "crossframe_locality",
        others_quiet and delta[perturb_frame] > 0,
        "kv perturbation at frame t only moves frame t",
    )

    path = Path(golden_path) if golden_path is not None else golden_fixture_path()
    try:
        with np.load(path) as archive:
            expected = archive["output"]
        golden_cfg = MstmConfig()
        actual = compute_golden_output(golden_cfg)
        golden_err = float(np.abs(actual - expected).max())
        record("golden_fixture", golden_err <= 1e-12, f"max |out - golden| = {golden_err:.3e}")
    except Exception as exc:
        record("golden_fixture", False, f"unusable fixture: {exc}")

    return results
