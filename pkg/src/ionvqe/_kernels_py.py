"""Pure-numpy implementations of the simulation kernels.

Same signatures as the compiled ``_kernels`` extension; used when the
extension is not built. Pauli strings are passed as ``(x_mask, z_mask, n_y)``.
"""
import numpy as np

_cache: dict = {}


def _parity(dim: int, mask: int) -> np.ndarray:
    key = (dim, mask)
    v = _cache.get(key)
    if v is None:
        k = np.arange(dim, dtype=np.int64) & mask
        par = np.zeros(dim, dtype=np.int64)
        while np.any(k):
            par ^= k & 1
            k >>= 1
        v = (1 - 2 * par).astype(np.float64)
        if len(_cache) > 4096:
            _cache.clear()
        _cache[key] = v
    return v


def apply_pauli(psi, x, z, ny):
    """Return ``P @ psi``."""
    dim = psi.shape[0]
    idx = np.arange(dim) ^ x
    return (1j**ny) * _parity(dim, z)[idx] * psi[idx]


def expval_pauli_state(psi, x, z, ny):
    return float(np.real(np.vdot(psi, apply_pauli(psi, x, z, ny))))


def expval_pauli_density(rho, x, z, ny):
    dim = rho.shape[0]
    j = np.arange(dim)
    jx = j ^ x
    vals = (1j**ny) * _parity(dim, z)[jx] * rho[jx, j]
    return float(np.real(vals.sum()))


def pauli_channel(rho, xs, zs, weights):
    """``sum_k w_k P_k rho P_k``; phases of Y cancel in the conjugation."""
    dim = rho.shape[0]
    out = np.zeros_like(rho)
    idx = np.arange(dim)
    for x, z, w in zip(xs, zs, weights):
        if w == 0:
            continue
        ax = idx ^ x
        s = _parity(dim, z)[ax]
        out += w * np.outer(s, s) * rho[np.ix_(ax, ax)]
    return out


def dephase(rho, qubit, p):
    """``(1-p) rho + p Z rho Z`` on one qubit, returned as a new array."""
    dim = rho.shape[0]
    b = (np.arange(dim) >> qubit) & 1
    f = np.where(b[:, None] != b[None, :], 1.0 - 2.0 * p, 1.0)
    return rho * f


def collective_dephase(rho, n_qubits, sigma2):
    """Average of ``exp(-i phi sum Z / 2)`` over Gaussian ``phi`` of variance ``sigma2``."""
    dim = rho.shape[0]
    m = n_qubits - 2 * _popcount(np.arange(dim))
    d = m[:, None] - m[None, :]
    return rho * np.exp(-sigma2 * d * d / 8.0)


def _popcount(a):
    a = a.astype(np.int64)
    out = np.zeros_like(a)
    while np.any(a):
        out += a & 1
        a >>= 1
    return out


def parity_expectations(outcomes, counts, zmasks):
    """Mean of ``(-1)^{popcount(outcome & mask)}`` for each mask, weighted by counts."""
    outcomes = np.asarray(outcomes, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    res = np.empty(len(zmasks))
    for i, m in enumerate(zmasks):
        res[i] = (counts * (1 - 2 * (_popcount(outcomes & m) & 1))).sum() / total
    return res
