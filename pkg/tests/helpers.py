"""Independent oracles shared by the test modules."""

import numpy as np


def numerical_grad(f, x, h=1e-5):
    """Central differences of scalar ``f()`` wrt every entry of ``x`` (in place)."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + h
        fp = f()
        x[i] = orig - h
        fm = f()
        x[i] = orig
        grad[i] = (fp - fm) / (2 * h)
    return grad


def rel_error(analytic, numeric):
    """||a - n|| / max(||a||, ||n||); 0 when both vanish."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)


def brute_conv2d(x, w, b, stride=1, pad=0):
    n, c, h, wd = x.shape
    co, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, co, ho, wo))
    for i in range(n):
        for o in range(co):
            for r in range(ho):
                for s in range(wo):
                    acc = b[o]
                    for ci in range(c):
                        for p in range(k):
                            for q in range(k):
                                acc += xp[i, ci, r * stride + p, s * stride + q] * w[o, ci, p, q]
                    out[i, o, r, s] = acc
    return out


def brute_dwt1d(x, lo, hi):
    """approx[k] = sum_m x[m] lo[m - 2k], indices taken mod N."""
    n = len(x)
    L = len(lo)
    a = np.zeros(n // 2)
    d = np.zeros(n // 2)
    for k in range(n // 2):
        for m in range(n):
            for wrap in range(-L, L + 1):
                j = m - 2 * k + wrap * n
                if 0 <= j < L:
                    a[k] += x[m] * lo[j]
                    d[k] += x[m] * hi[j]
    return a, d


def mann_whitney_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))
