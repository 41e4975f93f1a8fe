"""Independent oracles shared by test modules.

Everything here is deliberately written from scratch (plain numpy loops and
itertools enumeration) so it cannot share a code path with the library
implementations it checks.
"""

import itertools

import numpy as np


def explicit_forward(effectives, biases, x, activation):
    """Forward over explicit effective matrices; returns (output, relu gates)."""
    h = x
    gates = []
    for i, (p, b) in enumerate(zip(effectives, biases)):
        h = h @ p.T
        if b is not None:
            h = h + b
        if i < len(effectives) - 1:
            gates.append(h > 0)
            h = np.maximum(h, 0) if activation == "relu" else np.tanh(h)
    return h, gates


def explicit_loss(kind, out, targets):
    if kind == "mse":
        return float(np.mean((out - targets) ** 2))
    z = out - out.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-np.mean(logp[np.arange(out.shape[0]), targets]))


def fd_weight_grad(effectives, biases, x, targets, kind, activation, li, i, j, delta=1e-4):
    """Central difference in effective entry (li, i, j); None across relu kinks."""
    plus = [p.copy() for p in effectives]
    minus = [p.copy() for p in effectives]
    plus[li][i, j] += delta
    minus[li][i, j] -= delta
    out_p, gates_p = explicit_forward(plus, biases, x, activation)
    out_m, gates_m = explicit_forward(minus, biases, x, activation)
    if activation == "relu" and any(
        not np.array_equal(gp, gm) for gp, gm in zip(gates_p, gates_m)
    ):
        return None
    return (explicit_loss(kind, out_p, targets) - explicit_loss(kind, out_m, targets)) / (
        2 * delta
    )


def brute_force_2d_patterns():
    """All 4x4 binary tiles with two ones per row and column, by 1296-way filter."""
    rows = [np.array(bits) for bits in itertools.product([0, 1], repeat=4) if sum(bits) == 2]
    out = []
    for combo in itertools.product(rows, repeat=4):
        tile = np.stack(combo)
        if (tile.sum(axis=0) == 2).all():
            out.append(tile)
    return out


def suffix_scan_sets(series, threshold):
    """Per-weight suffix classification by explicit loops; series is (T, n)."""
    T, n = series.shape
    active = np.zeros((T, n), dtype=bool)
    inactive = np.zeros((T, n), dtype=bool)
    for w in range(n):
        for t in range(T):
            tail = np.abs(series[t:, w])
            active[t, w] = np.all(tail >= threshold)
            inactive[t, w] = np.all(tail < threshold)
    return active.mean(axis=1), inactive.mean(axis=1)
