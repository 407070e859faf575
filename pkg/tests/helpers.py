"""Shared fixture builders and independent oracles for the test suite.

Oracles here are deliberately written as naive per-pixel / per-position
loops, structured differently from the library code they check.
"""

from __future__ import annotations

import json
import math

import numpy as np
from PIL import Image

from pseudovis.ingest import AnnotatedImage, InstanceAnnotation


def make_annotated_image(
    rng: np.random.Generator,
    height: int = 24,
    width: int = 32,
    boxes: list[tuple[int, int, int, int]] | None = None,
) -> AnnotatedImage:
    """Random image with rectangular instance masks (r0, r1, c0, c1 boxes)."""
    pixels = rng.integers(0, 256, (height, width, 3), dtype=np.uint8)
    if boxes is None:
        boxes = [(2, height // 2, 2, width // 2), (height // 2 + 1, height - 2, width // 2 + 1, width - 2)]
    instances = []
    for index, (r0, r1, c0, c1) in enumerate(boxes, start=1):
        mask = np.zeros((height, width), dtype=bool)
        mask[r0:r1, c0:c1] = True
        instances.append(InstanceAnnotation(instance_id=index, category_id=index % 3 + 1, mask=mask))
    return AnnotatedImage(image_id=1, pixels=pixels, instances=instances)


def write_coco_fixture(root, images: list[dict], annotations: list[dict], categories=None):
    """Write image PNGs plus a COCO manifest under `root`; returns manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "images": [],
        "annotations": annotations,
        "categories": categories or [{"id": 1, "name": "thing"}, {"id": 2, "name": "stuff"}],
    }
    for rec in images:
        pixels = rec["pixels"]
        name = f"img_{rec['id']:04d}.png"
        Image.fromarray(pixels).save(root / name)
        manifest["images"].append(
            {"id": rec["id"], "file_name": name, "width": pixels.shape[1], "height": pixels.shape[0]}
        )
    path = root / "annotations.json"
    path.write_text(json.dumps(manifest), encoding="utf-8")
    return path


# --- independent oracles ------------------------------------------------------


def oracle_point_in_polygon(px: float, py: float, ring: np.ndarray) -> bool:
    """Even-odd rule by counting edge crossings strictly right of the point."""
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if y1 == y2:
            continue
        if min(y1, y2) <= py < max(y1, y2):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > px:
                inside = not inside
    return inside


def oracle_rasterize(ring: np.ndarray, width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=bool)
    for r in range(height):
        for c in range(width):
            out[r, c] = oracle_point_in_polygon(c + 0.5, r + 0.5, ring)
    return out


def oracle_warp_mask_nearest(mask: np.ndarray, transform: np.ndarray) -> np.ndarray:
    """Enumerate every destination pixel through the inverse affine."""
    h, w = mask.shape
    inv = np.linalg.inv(transform)
    out = np.zeros_like(mask)
    for r in range(h):
        for c in range(w):
            sx = inv[0, 0] * (c + 0.5) + inv[0, 1] * (r + 0.5) + inv[0, 2]
            sy = inv[1, 0] * (c + 0.5) + inv[1, 1] * (r + 0.5) + inv[1, 2]
            sc = math.floor(sx)
            sr = math.floor(sy)
            if 0 <= sr < h and 0 <= sc < w:
                out[r, c] = mask[sr, sc]
    return out


def oracle_splice_frame(frame, existing_masks, warped_pixels, warped_mask):
    """Per-pixel reference of the splice equation and the occlusion update."""
    h, w = warped_mask.shape
    out = frame.copy()
    for r in range(h):
        for c in range(w):
            if warped_mask[r, c]:
                out[r, c] = warped_pixels[r, c]
    updated = {}
    for tid, old in existing_masks.items():
        if old is None:
            updated[tid] = None
            continue
        new = np.zeros_like(old)
        for r in range(h):
            for c in range(w):
                new[r, c] = old[r, c] and not warped_mask[r, c]
        updated[tid] = new if new.any() else None
    return out, updated


# --- independent MSTM forward -------------------------------------------------


def _oracle_layer_norm(x: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    out = np.empty_like(x)
    flat = x.reshape(-1, x.shape[-1])
    target = out.reshape(-1, x.shape[-1])
    for i in range(flat.shape[0]):
        row = flat[i]
        mu = row.mean()
        sigma = math.sqrt(((row - mu) ** 2).mean() + eps)
        target[i] = (row - mu) / sigma
    return out


def oracle_windowed_attention(q, kv, w_q, w_k, w_v, w_o, window, shift, heads):
    """Window attention via explicit python loops over windows and positions."""
    t_dim, h, w, d = q.shape
    dh = d // heads
    padded_h = math.ceil((h + shift) / window) * window
    padded_w = math.ceil((w + shift) / window) * window

    def pad(x):
        buf = np.zeros((t_dim, padded_h, padded_w, d))
        buf[:, shift : shift + h, shift : shift + w] = x
        return buf

    qp, kp, vp = pad(q @ w_q), pad(kv @ w_k), pad(kv @ w_v)
    valid = np.zeros((padded_h, padded_w), dtype=bool)
    valid[shift : shift + h, shift : shift + w] = True

    attended = np.zeros((t_dim, padded_h, padded_w, d))
    for t in range(t_dim):
        for wy in range(0, padded_h, window):
            for wx in range(0, padded_w, window):
                cells = [
                    (y, x)
                    for y in range(wy, wy + window)
                    for x in range(wx, wx + window)
                ]
                keys = [(y, x) for (y, x) in cells if valid[y, x]]
                for (y, x) in cells:
                    for head in range(heads):
                        sl = slice(head * dh, (head + 1) * dh)
                        scores = [
                            float(qp[t, y, x, sl] @ kp[t, ky, kx, sl]) / math.sqrt(dh)
                            for (ky, kx) in keys
                        ]
                        peak = max(scores)
                        weights = [math.exp(s - peak) for s in scores]
                        total = sum(weights)
                        acc = np.zeros(dh)
                        for weight, (ky, kx) in zip(weights, keys):
                            acc += (weight / total) * vp[t, ky, kx, sl]
                        attended[t, y, x, sl] = acc
    return attended[:, shift : shift + h, shift : shift + w] @ w_o


def _oracle_conv_same(x, kernel, bias):
    k = kernel.shape[0]
    pad = k // 2
    h, w, _ = x.shape
    c_out = kernel.shape[3]
    out = np.zeros((h, w, c_out))
    for r in range(h):
        for c in range(w):
            acc = bias.copy()
            for dy in range(k):
                for dx in range(k):
                    sr, sc = r + dy - pad, c + dx - pad
                    if 0 <= sr < h and 0 <= sc < w:
                        acc = acc + x[sr, sc] @ kernel[dy, dx]
            out[r, c] = acc
    return out


def oracle_mstm_forward(f, cfg, weights):
    """Independent re-implementation of the full temporal-module forward."""
    t_dim, h, w, d = f.shape
    split = (t_dim + 1) // 2
    f_swapped = np.concatenate([f[split:], f[:split]], axis=0)

    z = f.copy()
    for index, layer in enumerate(weights.swma):
        shift = 0 if index % 2 == 0 else cfg.shift
        q_branch = _oracle_layer_norm(
            f + oracle_windowed_attention(
                f, f, layer.self_q, layer.self_k, layer.self_v, layer.self_o,
                cfg.window, shift, cfg.heads,
            )
        )
        kv_branch = _oracle_layer_norm(
            f_swapped + oracle_windowed_attention(
                f_swapped, f_swapped, layer.self_q, layer.self_k, layer.self_v,
                layer.self_o, cfg.window, shift, cfg.heads,
            )
        )
        cross = oracle_windowed_attention(
            q_branch, kv_branch, layer.cross_q, layer.cross_k, layer.cross_v,
            layer.cross_o, cfg.window, shift, cfg.heads,
        )
        z = _oracle_layer_norm(q_branch + cross) + z

    frames = z
    for gru in weights.gru:
        state = np.zeros((h, w, d))
        outputs = []
        for t in range(t_dim):
            hx = np.concatenate([state, frames[t]], axis=-1)
            update = 1.0 / (1.0 + np.exp(-_oracle_conv_same(hx, gru.w_update, gru.b_update)))
            reset = 1.0 / (1.0 + np.exp(-_oracle_conv_same(hx, gru.w_reset, gru.b_reset)))
            rx = np.concatenate([reset * state, frames[t]], axis=-1)
            candidate = np.tanh(_oracle_conv_same(rx, gru.w_candidate, gru.b_candidate))
            state = (1.0 - update) * state + update * candidate
            outputs.append(state)
        frames = np.stack(outputs)
    return f + frames
