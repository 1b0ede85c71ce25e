"""Pure numpy versions of the compiled kernels (same signatures)."""
import numpy as np


def hermite_e(m, x):
    x = np.asarray(x, dtype=np.float64)
    if m == 0:
        return np.ones_like(x)
    a = np.ones_like(x)
    b = x.copy()
    for k in range(2, m + 1):
        a, b = b, x * b - (k - 1) * a
    return b


def eval_terms(term_ptr, labels, powers, weights, xi, max_power):
    """sum_k weights[k] * prod_t He_{powers[t]}(xi[:, labels[t]]) over each term's slots."""
    xi = np.asarray(xi, dtype=np.float64)
    n_samples = xi.shape[0]
    used = np.unique(labels) if len(labels) else np.empty(0, dtype=np.int64)
    tables = {}
    for j in used:
        col = xi[:, j]
        rows = [np.ones(n_samples), col]
        for m in range(2, max_power + 1):
            rows.append(col * rows[-1] - (m - 1) * rows[-2])
        tables[int(j)] = rows
    out = np.zeros(n_samples)
    for k in range(len(weights)):
        prod = np.full(n_samples, weights[k])
        for t in range(term_ptr[k], term_ptr[k + 1]):
            prod = prod * tables[int(labels[t])][int(powers[t])]
        out += prod
    return out


def banded_quadform(v, rho):
    """Row-wise sum_{i,j} v_i v_j rho[|i-j|], lags beyond len(rho)-1 dropped."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[1]
    out = rho[0] * np.einsum("ij,ij->i", v, v)
    for lag in range(1, min(len(rho), n)):
        out += 2.0 * rho[lag] * np.einsum("ij,ij->i", v[:, :-lag], v[:, lag:])
    return out
