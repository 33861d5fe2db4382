"""Independent reference implementations the tests check the library against.

Everything here is written the slow, obvious way on purpose: explicit loops
for convolution, elementwise central differences for gradients. These are
the oracles; the library must agree with them, never the other way around.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64_ref(seed, count):
    """Reference splitmix64 stream, pure-int arithmetic."""
    state = seed & MASK64
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        out.append(z ^ (z >> 31))
    return out


def rand_array(rng, shape, lo=-1.0, hi=1.0):
    size = int(np.prod(shape)) if shape else 1
    return rng.uniform_array(size, lo, hi).reshape(shape)


def naive_conv2d(x, w, b):
    """Valid cross-correlation, one multiply-add at a time."""
    n, c, h, width = x.shape
    filters, _, kh, kw = w.shape
    ho, wo = h - kh + 1, width - kw + 1
    out = np.zeros((n, filters, ho, wo), dtype=np.float64)
    for img in range(n):
        for f in range(filters):
            for y in range(ho):
                for x0 in range(wo):
                    acc = 0.0
                    for ci in range(c):
                        for ky in range(kh):
                            for kx in range(kw):
                                acc += float(x[img, ci, y + ky, x0 + kx]) * float(
                                    w[f, ci, ky, kx]
                                )
                    out[img, f, y, x0] = acc + float(b[f])
    return out


def naive_maxpool2x2(x):
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    out = np.zeros((n, c, ho, wo), dtype=x.dtype)
    for img in range(n):
        for ch in range(c):
            for y in range(ho):
                for x0 in range(wo):
                    out[img, ch, y, x0] = x[
                        img, ch, 2 * y : 2 * y + 2, 2 * x0 : 2 * x0 + 2
                    ].max()
    return out


def naive_softmax_ce(logits, labels):
    """Mean -log softmax(logits)[label], no clamping, float64."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    return float(-np.log(p[np.arange(n), labels]).mean())


def fd_gradient(loss_fn, x, step=1e-5):
    """Central-difference d loss / d x.

    ``loss_fn`` takes no arguments and reads ``x``; each element of ``x`` is
    perturbed in place and restored.
    """
    grad = np.zeros(x.shape, dtype=np.float64)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + step
        up = loss_fn()
        flat_x[i] = orig - step
        down = loss_fn()
        flat_x[i] = orig
        flat_g[i] = (up - down) / (2.0 * step)
    return grad


def max_rel_err(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float(np.max(np.abs(a - n) / denom))
