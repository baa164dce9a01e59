"""Regenerates the golden frames and the golden training round.

Written against the format description only, with numpy, so the Rust
implementation is checked against independent arithmetic.

    python3 gen_golden.py
"""

import json
import math
import struct
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
F32 = np.float32


def pack_fields(codes, width):
    total = len(codes) * width
    out = bytearray((total + 7) // 8)
    for i, c in enumerate(codes):
        for bit in range(width):
            if (c >> bit) & 1:
                pos = i * width + bit
                out[pos // 8] |= 1 << (pos % 8)
    return bytes(out)


def header(codec_id, flags, width, shape, k):
    h = b"MSC1" + bytes([codec_id, flags, width, len(shape)])
    for dim in shape:
        h += struct.pack("<I", dim)
    return h + struct.pack("<I", k)


def top_k(x, k):
    # largest magnitude first, lower index on ties; returned ascending
    order = sorted(range(len(x)), key=lambda i: (-abs(float(x[i])), i))
    return sorted(order[:k])


def ms(x, shape, ratio, b, signed=False):
    d = len(x)
    k = math.floor((1 - ratio) * d + 1e-9)
    sel = top_k(x, k)
    levels = 2**b - 1
    tmin = min(abs(float(x[i])) for i in sel)
    codes = []
    dec = []
    tv = [F32(x[i]) for i in sel]
    it = iter(tv)
    for i, v in enumerate(x):
        if i in sel:
            codes.append(levels)
            dec.append(next(it))
            continue
        m = 0 if tmin <= 0 else min(math.floor(abs(float(v)) * levels / tmin), levels - 1)
        neg = signed and m > 0 and v < 0
        codes.append(m | ((1 << b) if neg else 0))
        r = F32(m) * F32(tmin) / F32(levels)
        dec.append(F32(-r) if neg else F32(r))
    width = b + (1 if signed else 0)
    frame = header(0, 1 if signed else 0, b, shape, k) + pack_fields(codes, width)
    frame += b"".join(struct.pack("<f", t) for t in tv)
    return frame, dec


def sp(x, shape, ratio):
    d = len(x)
    k = math.floor((1 - ratio) * d + 1e-9)
    sel = top_k(x, k)
    kv = 32 * k < d
    frame = header(1, 2 if kv else 0, 0, shape, k)
    if kv:
        frame += b"".join(struct.pack("<I", i) for i in sel)
    else:
        frame += pack_fields([1 if i in sel else 0 for i in range(d)], 1)
    frame += b"".join(struct.pack("<f", F32(x[i])) for i in sel)
    dec = [F32(x[i]) if i in sel else F32(0) for i in range(d)]
    return frame, dec


def qu(x, shape, q):
    levels = 2**q - 1
    lo, hi = F32(min(x)), F32(max(x))
    codes = []
    for v in x:
        if hi > lo:
            pos = (float(v) - float(lo)) * levels / (float(hi) - float(lo))
            codes.append(min(max(math.floor(pos + 0.5), 0), levels))
        else:
            codes.append(0)
    dec = [F32(c) * (hi - lo) / F32(levels) + lo for c in codes]
    frame = header(2, 0, q, shape, 0) + struct.pack("<ff", lo, hi) + pack_fields(codes, q)
    return frame, dec


def frames():
    rng = np.random.default_rng(2024)
    relu = np.maximum(rng.normal(size=24), 0).astype(F32)
    cases = [
        ("ms_b2", [2, 4], F32([0.1, 0.0, 1.0, 0.7, 2.0, 0.35, 1.5, 0.05]), ("MS", 0.5, 2, False)),
        ("ms_b3_relu", [4, 6], relu, ("MS", 0.75, 3, False)),
        ("ms_signbit", [5], F32([-1.0, 2.1, -3.0, 0.2, -1.5]), ("MS", 0.6, 2, True)),
        ("sp_mask", [10], F32(rng.normal(size=10)), ("SP", 0.7)),
        ("sp_key_value", [100], F32(rng.normal(size=100)), ("SP", 0.99)),
        ("qu_q3", [2, 3], F32([0.0, 0.25, 1.0, 1.9, 0.5, 2.0]), ("QU", 3)),
    ]
    index = []
    for name, shape, x, spec in cases:
        if spec[0] == "MS":
            frame, dec = ms(x, shape, spec[1], spec[2], spec[3])
            codec = {"codec": "MS", "ratio": spec[1], "mask_bits": spec[2],
                     "sign_mode": "sign_bit" if spec[3] else "non_negative_only"}
        elif spec[0] == "SP":
            frame, dec = sp(x, shape, spec[1])
            codec = {"codec": "SP", "ratio": spec[1]}
        else:
            frame, dec = qu(x, shape, spec[1])
            codec = {"codec": "QU", "quant_bits": spec[1]}
        (HERE / f"{name}.msc").write_bytes(frame)
        index.append({
            "name": name,
            "shape": shape,
            "codec": codec,
            "input": [float(v) for v in x],
            "decoded": [float(v) for v in dec],
        })
    (HERE / "frames.json").write_text(json.dumps(index, indent=1) + "\n")


def round_record():
    rng = np.random.default_rng(7)
    n, din, h, b = 2, 3, 4, 4
    w1 = rng.normal(size=(din, h)) * math.sqrt(2 / din)
    b1 = rng.normal(size=h) * 0.1 + 0.2
    w2 = rng.normal(size=(h, 1)) * math.sqrt(2 / h)
    b2 = np.array([0.05])
    xs = [rng.normal(size=(b, din)) for _ in range(n)]
    ys = [rng.normal(size=(b, 1)) for _ in range(n)]
    ratio, bits = 0.5, 2

    def compress(z):
        f = z.ravel()
        d = len(f)
        k = math.floor((1 - ratio) * d)
        sel = top_k(f, k)
        levels = 2**bits - 1
        tmin = min(f[i] for i in sel)
        out = np.array([f[i] if i in sel else
                        (0 if tmin <= 0 else min(math.floor(f[i] * levels / tmin), levels - 1)) * tmin / levels
                        for i in range(d)])
        frame_len = 8 + 4 * 2 + 4 + (d * bits + 7) // 8 + 4 * k
        return out.reshape(z.shape), frame_len

    def grads(x, y, zu):
        a = x @ w1 + b1
        e = zu @ w2 + b2 - y
        dp = 2 * e / e.size
        gw2, gb2 = zu.T @ dp, dp.sum(0)
        da = (dp @ w2.T) * (a > 0)
        return np.mean(e**2), [x.T @ da, da.sum(0), gw2, gb2]

    total = [np.zeros_like(p) for p in (w1, b1, w2, b2)]
    exact = [np.zeros_like(p) for p in (w1, b1, w2, b2)]
    loss = err = 0.0
    nbytes = 0
    for x, y in zip(xs, ys):
        z = np.maximum(x @ w1 + b1, 0)
        zh, fl = compress(z)
        l, g = grads(x, y, zh)
        _, g0 = grads(x, y, z)
        loss += l / n
        err += np.linalg.norm(zh - z) / n
        nbytes += fl
        total = [t + gi / n for t, gi in zip(total, g)]
        exact = [t + gi / n for t, gi in zip(exact, g0)]

    def dist(a, b):
        return math.sqrt(sum(float(np.sum((p - q) ** 2)) for p, q in zip(a, b)))

    record = {
        "loss": loss,
        "E": err,
        "grad_gap_server": dist(total[2:], exact[2:]),
        "grad_gap_client": dist(total[:2], exact[:2]),
        "grad_norm": math.sqrt(sum(float(np.sum(p**2)) for p in exact)),
        "bytes_up": nbytes,
    }
    lr = 0.1
    updated = [p - lr * g for p, g in zip((w1, b1, w2, b2), total)]
    doc = {
        "codec": {"codec": "MS", "ratio": ratio, "mask_bits": bits},
        "learning_rate": lr,
        "w1": w1.ravel().tolist(), "b1": b1.tolist(),
        "w2": w2.ravel().tolist(), "b2": b2.tolist(),
        "dims": [din, h, 1],
        "batch": b,
        "x": [x.ravel().tolist() for x in xs],
        "y": [y.ravel().tolist() for y in ys],
        "record": record,
        "updated_w1": updated[0].ravel().tolist(),
        "updated_w2": updated[2].ravel().tolist(),
    }
    (HERE / "round_ms.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    frames()
    round_record()
