"""Pure NumPy kernels: batched tanh-MLP forward pass and per-sample Jacobian.

Parameter layout (shared with the compiled backend): for layer dims
(d, h_1, ..., h_k, C) the flat vector holds, per layer, the weight matrix
(out, in) in C order followed by the bias, so p = sum (fan_in+1)*fan_out.
Jacobian rows are sample-major: row i*C + c is d out_c(x_i) / d params.
"""

import numpy as np

BACKEND_NAME = "numpy"


def _unpack(params, dims):
    weights, biases = [], []
    pos = 0
    for fin, fout in zip(dims[:-1], dims[1:]):
        weights.append(params[pos : pos + fin * fout].reshape(fout, fin))
        pos += fin * fout
        biases.append(params[pos : pos + fout])
        pos += fout
    return weights, biases


def forward(x, params, dims):
    """Evaluate the network at every row of x; returns (N, C)."""
    weights, biases = _unpack(np.asarray(params, dtype=float), dims)
    a = np.asarray(x, dtype=float)
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.tanh(a @ w.T + b)
    return a @ weights[-1].T + biases[-1]


def forward_jacobian(x, params, dims):
    """Forward pass plus exact reverse-mode per-sample derivatives.

    Returns (out, jac) with out of shape (N, C) and jac of shape (N*C, p).
    """
    params = np.asarray(params, dtype=float)
    x = np.asarray(x, dtype=float)
    weights, biases = _unpack(params, dims)
    n = x.shape[0]
    c_out = dims[-1]

    acts = [x]
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.tanh(a @ w.T + b)
        acts.append(a)
    out = a @ weights[-1].T + biases[-1]

    offsets = []
    pos = 0
    for fin, fout in zip(dims[:-1], dims[1:]):
        offsets.append(pos)
        pos += (fin + 1) * fout
    p = pos

    jac = np.zeros((n, c_out, p))
    n_hidden = len(weights) - 1
    h_last = dims[-2]
    last = offsets[-1]
    for c in range(c_out):
        jc = jac[:, c, :]
        jc[:, last + c * h_last : last + (c + 1) * h_last] = acts[-1]
        jc[:, last + c_out * h_last + c] = 1.0
        if n_hidden == 0:
            continue
        delta = weights[-1][c] * (1.0 - acts[-1] ** 2)
        for layer in range(n_hidden - 1, -1, -1):
            fin, fout = dims[layer], dims[layer + 1]
            off = offsets[layer]
            jc[:, off : off + fin * fout] = np.einsum(
                "no,ni->noi", delta, acts[layer]
            ).reshape(n, fin * fout)
            jc[:, off + fin * fout : off + fin * fout + fout] = delta
            if layer > 0:
                delta = (delta @ weights[layer]) * (1.0 - acts[layer] ** 2)
    return out, jac.reshape(n * c_out, p)
