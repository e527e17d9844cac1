#!/usr/bin/env python3
"""Writes golden fixtures computed in 50-digit arithmetic with mpmath.

Shares no code with the C++ library. Inputs are drawn with numpy, rounded
to double, and every op is evaluated from its textbook definition at high
precision; only the final result is rounded back to double.

    python3 tools/fixtures/make_fixtures.py tests/fixtures
"""

import json
import math
import struct
import sys
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 50
EPS = mp.mpf("1e-5")


def write_isot(path, arr):
    arr = np.asarray(arr, dtype=np.float64)
    with open(path, "wb") as f:
        f.write(b"ISOT")
        f.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            f.write(struct.pack("<Q", d))
        f.write(arr.astype("<f8").tobytes(order="C"))


def to_mp(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return [mp.mpf(float(v)) for v in a]
    return [[mp.mpf(float(v)) for v in row] for row in a]


def to_np(m):
    return np.array([[float(v) for v in row] for row in m], dtype=np.float64)


def matmul(a, b):
    return [[mp.fsum(a[i][t] * b[t][j] for t in range(len(b))) for j in range(len(b[0]))]
            for i in range(len(a))]


def linear(x, w, b=None):
    y = matmul(x, w)
    if b is not None:
        y = [[v + b[j] for j, v in enumerate(row)] for row in y]
    return y


def add(a, b):
    return [[u + v for u, v in zip(ra, rb)] for ra, rb in zip(a, b)]


def relu(a):
    return [[v if v > 0 else mp.mpf(0) for v in row] for row in a]


def softmax_row(r):
    m = max(r)
    e = [mp.exp(v - m) for v in r]
    z = mp.fsum(e)
    return [v / z for v in e]


def layernorm(x, gamma, beta):
    out = []
    for row in x:
        n = len(row)
        mean = mp.fsum(row) / n
        var = mp.fsum((v - mean) ** 2 for v in row) / n
        inv = 1 / mp.sqrt(var + EPS)
        out.append([(v - mean) * inv * gamma[j] + beta[j] for j, v in enumerate(row)])
    return out


def cols(a, start, count):
    return [row[start:start + count] for row in a]


def attention(q, k, v, scale):
    out = []
    for qi in q:
        s = softmax_row([mp.fsum(a * b for a, b in zip(qi, kj)) * scale for kj in k])
        out.append([mp.fsum(s[j] * v[j][c] for j in range(len(k))) for c in range(len(v[0]))])
    return out


def multihead(queries, kv, p, heads):
    c = len(queries[0])
    dh = c // heads
    q = linear(queries, p["attn.wq"], p["attn.bq"])
    k = linear(kv, p["attn.wk"])
    v = linear(kv, p["attn.wv"], p["attn.bv"])
    ctx = [[None] * c for _ in queries]
    for h in range(heads):
        o = attention(cols(q, h * dh, dh), cols(k, h * dh, dh), cols(v, h * dh, dh),
                      1 / mp.sqrt(dh))
        for i, row in enumerate(o):
            ctx[i][h * dh:(h + 1) * dh] = row
    return linear(ctx, p["attn.wo"], p["attn.bo"])


def ffn(y, p):
    n = layernorm(y, p["ln2.gamma"], p["ln2.beta"])
    h = relu(linear(n, p["ffn.w1"], p["ffn.b1"]))
    return add(y, linear(h, p["ffn.w2"], p["ffn.b2"]))


def cst_refined(x, p):
    g = softmax_row([mp.fsum(a * b[0] for a, b in zip(row, p["cst.wg"])) for row in x])
    ctx = [[mp.fsum(g[i] * x[i][c] for i in range(len(x))) for c in range(len(x[0]))]]
    h = linear(ctx, p["cst.w1"], p["cst.b1"])
    h = relu(layernorm(h, p["cst.ln.gamma"], p["cst.ln.beta"]))
    return linear(h, p["cst.w2"], p["cst.b2"])[0]


def cst_global_context(x, p):
    r = cst_refined(x, p)
    return [[v + r[j] for j, v in enumerate(row)] for row in x]


def vanilla_block(x, p, cfg):
    u = layernorm(x, p["ln1.gamma"], p["ln1.beta"])
    return ffn(add(x, multihead(u, u, p, cfg["heads"])), p)


def cst_block(x, p, cfg):
    u = layernorm(x, p["ln1.gamma"], p["ln1.beta"])
    r = cst_refined(u, p)
    return ffn([[v + r[j] for j, v in enumerate(row)] for row in x], p)


def sgst_block(x, p, cfg):
    n = len(x)
    u = layernorm(x, p["ln1.gamma"], p["ln1.beta"])
    logits = [mp.fsum(a * b[0] for a, b in zip(row, p["sgst.wh"])) + p["sgst.bh"][0] for row in u]
    heat = [1 / (1 + mp.exp(-z)) for z in logits]
    for hv in heat:
        assert abs(hv - mp.mpf("0.5")) > mp.mpf("1e-6"), "heatmap too close to the threshold"
    k = len(p["sgst.wm"][0])
    cols_sm = [softmax_row([p["sgst.wm"][i][j] for i in range(n)]) for j in range(k)]
    out = [None] * n
    for fg in (True, False):
        idx = [i for i in range(n) if (heat[i] >= 0.5) == fg]
        if not idx:
            continue
        f = [heat[i] if fg else 1 - heat[i] for i in range(n)]
        enh = [[f[i] * v for v in u[i]] for i in range(n)]
        merged = [[mp.fsum(cols_sm[j][i] * enh[i][c] for i in range(n)) for c in range(len(x[0]))]
                  for j in range(k)]
        qx = [x[i] for i in idx]
        qu = layernorm(qx, p["ln1.gamma"], p["ln1.beta"])
        z = ffn(add(qx, multihead(qu, merged, p, cfg["heads"])), p)
        for r, i in enumerate(idx):
            out[i] = z[r]
    return out


def block_params(rng, kind, n, c, cfg):
    p = {}

    def norm(name, width):
        p[name + "gamma"] = rng.uniform(0.5, 1.5, width)
        p[name + "beta"] = rng.uniform(-0.5, 0.5, width)

    def lin(w, b, i, o):
        p[w] = rng.normal(0, 1 / math.sqrt(i), (i, o))
        if b:
            p[b] = rng.uniform(-0.5, 0.5, o)

    norm("ln1.", c)
    norm("ln2.", c)
    if kind in ("vanilla", "sgst", "mhsa"):
        lin("attn.wq", "attn.bq", c, c)
        lin("attn.wk", None, c, c)
        lin("attn.wv", "attn.bv", c, c)
        lin("attn.wo", "attn.bo", c, c)
    hid = cfg["ffn_ratio"] * c
    lin("ffn.w1", "ffn.b1", c, hid)
    lin("ffn.w2", "ffn.b2", hid, c)
    if kind in ("cst", "cst_ctx"):
        r = c // cfg["context_reduction"]
        p["cst.wg"] = rng.normal(0, 1, (c, 1))
        lin("cst.w1", "cst.b1", c, r)
        norm("cst.ln.", r)
        lin("cst.w2", "cst.b2", r, c)
    if kind == "sgst":
        p["sgst.wh"] = rng.normal(0, 1, (c, 1))
        p["sgst.bh"] = np.array([0.1])
        k = -(-n * cfg["num"] // cfg["den"])
        p["sgst.wm"] = rng.uniform(-2, 2, (n, k))
    return p


def save(root, name, op, config, inputs, params, expected, tol=1e-10):
    d = Path(root) / name
    d.mkdir(parents=True, exist_ok=True)
    manifest = {"op": op, "config": config, "tolerance": tol, "inputs": {}, "params": {},
                "expected": "expected.isot", "source": "tools/fixtures/make_fixtures.py"}
    for k, v in inputs.items():
        write_isot(d / f"{k}.isot", v)
        manifest["inputs"][k] = f"{k}.isot"
    for k, v in params.items():
        write_isot(d / f"param.{k}.isot", v)
        manifest["params"][k] = f"param.{k}.isot"
    write_isot(d / "expected.isot", expected)
    (d / "fixture.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print("wrote", d)


def main(root):
    rng = np.random.default_rng(20240607)

    x = rng.normal(0, 3, (5, 7))
    x[4] = [1000.0, 1000.0, 999.0, -1000.0, 0.0, 1e-3, 500.0]
    save(root, "softmax_rows", "softmax", {}, {"x": x}, {},
         to_np([softmax_row(r) for r in to_mp(x)]))

    x = rng.normal(2, 5, (6, 9))
    g = rng.uniform(0.5, 1.5, 9)
    b = rng.uniform(-1, 1, 9)
    save(root, "layernorm_rows", "layernorm", {}, {"x": x, "gamma": g, "beta": b}, {},
         to_np(layernorm(to_mp(x), to_mp(g), to_mp(b))))

    q, k, v = rng.normal(0, 1, (4, 6)), rng.normal(0, 1, (7, 6)), rng.normal(0, 1, (7, 5))
    scale = 0.5
    save(root, "attention_single_head", "attention", {"scale": scale}, {"q": q, "k": k, "v": v},
         {}, to_np(attention(to_mp(q), to_mp(k), to_mp(v), mp.mpf(scale))))

    n, c = 6, 8
    cfg = {"heads": 2, "ffn_ratio": 2, "context_reduction": 2, "num": 1, "den": 2}
    jcfg = {"tokens": n, "channels": c, "heads": 2, "ffn_ratio": 2, "context_reduction": 2,
            "merge_ratio": "1/2", "merge_norm": "softmax"}
    for kind, op, fn in [("mhsa", "mhsa", None), ("cst_ctx", "cst_global_context", None),
                         ("vanilla", "vanilla_block", vanilla_block), ("cst", "cst_block", cst_block),
                         ("sgst", "sgst_block", sgst_block)]:
        x = rng.normal(0, 1, (n, c))
        p = block_params(rng, kind, n, c, cfg)
        mx = to_mp(x)
        mpp = {k2: to_mp(v2) for k2, v2 in p.items()}
        if op == "mhsa":
            y = multihead(mx, mx, mpp, cfg["heads"])
            p = {k2: v2 for k2, v2 in p.items() if k2.startswith("attn.")}
        elif op == "cst_global_context":
            y = cst_global_context(mx, mpp)
            p = {k2: v2 for k2, v2 in p.items() if k2.startswith("cst.")}
        else:
            y = fn(mx, mpp, cfg)
        save(root, op, op, jcfg, {"x": x}, p, to_np(y))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures")
