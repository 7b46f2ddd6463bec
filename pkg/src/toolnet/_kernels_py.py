"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Loop and operation order match the Cython code so both backends produce
bit-identical floats.
"""
import numpy as np


def reweight_rows(indptr, indices, prior, fvals, beta, n_rows, out):
    ip = indptr.tolist()
    ix = indices.tolist()
    pr = prior.tolist()
    fv = fvals.tolist()
    res = out.tolist()
    keep = 1.0 - beta
    for r in range(n_rows):
        lo, hi = ip[r], ip[r + 1]
        total = 0.0
        for e in range(lo, hi):
            total = total + fv[ix[e]]
        if total == 0.0:
            continue
        for e in range(lo, hi):
            res[e] = beta * pr[e] + keep * (fv[ix[e]] / total)
    out[:] = res


def inbound_mean(indptr, indices, current, n_sources, n_nodes):
    ip = indptr.tolist()
    ix = indices.tolist()
    cur = current.tolist()
    sums = [0.0] * n_nodes
    counts = [0] * n_nodes
    for r in range(n_sources):
        for e in range(ip[r], ip[r + 1]):
            j = ix[e]
            sums[j] = sums[j] + cur[e]
            counts[j] += 1
    for j in range(n_nodes):
        if counts[j] > 0:
            sums[j] = sums[j] / counts[j]
    return np.array(sums, dtype=np.float64)
