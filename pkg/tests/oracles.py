"""Naive reference implementations and the finite-difference checker.

Everything here is deliberately loop-based and independent of the library
code paths it validates.
"""

import math

import numpy as np


def conv2d_ref(x, k, bias=None, stride=(1, 1), padding=(0, 0)):
    """Six-loop cross-correlation."""
    n, ci, h, w = x.shape
    co, _, kh, kw = k.shape
    sh, sw = stride
    ph, pw = padding
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    out = np.zeros((n, co, ho, wo))
    for ni in range(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    s = 0.0
                    for c in range(ci):
                        for u in range(kh):
                            for v in range(kw):
                                s += k[o, c, u, v] * xp[ni, c, i * sh + u, j * sw + v]
                    out[ni, o, i, j] = s + (bias[o] if bias is not None else 0.0)
    return out


def conv2d_matrix(in_shape, k, stride, padding):
    """Explicit matrix of the conv2d linear operator (unit-vector probing)."""
    from lidarsr import autodiff as ad

    n_in = int(np.prod(in_shape))
    cols = []
    for idx in range(n_in):
        e = np.zeros(n_in)
        e[idx] = 1.0
        y = ad.conv2d(ad.Tensor(e.reshape(in_shape)), ad.Tensor(k),
                      stride=stride, padding=padding).data
        cols.append(y.ravel())
    return np.stack(cols, axis=1)  # (n_out, n_in)


def masked_loss_ref(pred, gt, valid, alpha):
    """Double-loop Eq.-style masked point-wise loss."""
    total = 0.0
    count = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            if valid[i, j]:
                total += abs(gt[i, j] - pred[i, j]) ** alpha
                count += 1
    return total / (alpha * count)


def cross_entropy_ref(logits, target, ignore_id=255):
    """Per-cell softmax cross-entropy, mean over non-ignored cells."""
    c, h, w = logits.shape
    total = 0.0
    count = 0
    for i in range(h):
        for j in range(w):
            t = int(target[i, j])
            if t == ignore_id:
                continue
            z = logits[:, i, j]
            m = max(z)
            lse = m + math.log(sum(math.exp(v - m) for v in z))
            total += lse - z[t]
            count += 1
    return total / count


def masked_errors_ref(pred_r, pred_v, gt_r, gt_v):
    """Loop-based masked (mse, mae) over the overlap of two validity masks."""
    sq = ab = 0.0
    count = 0
    for i in range(gt_r.shape[0]):
        for j in range(gt_r.shape[1]):
            if pred_v[i, j] and gt_v[i, j]:
                d = pred_r[i, j] - gt_r[i, j]
                sq += d * d
                ab += abs(d)
                count += 1
    return sq / count, ab / count


def miou_ref(pred, gt, num_classes, ignore_id=255):
    """Counting-loop mIoU over classes present in the ground truth."""
    tp = [0] * num_classes
    fp = [0] * num_classes
    fn = [0] * num_classes
    for p, g in zip(pred.ravel(), gt.ravel()):
        if g == ignore_id:
            continue
        if p == g:
            tp[g] += 1
        else:
            fp[p] += 1
            fn[g] += 1
    ious = []
    for c in range(num_classes):
        if tp[c] + fn[c] == 0:
            continue  # class absent from gt
        denom = tp[c] + fp[c] + fn[c]
        ious.append(tp[c] / denom if denom else 0.0)
    return sum(ious) / len(ious) if ious else 0.0


def fd_gradient(f, x, probe=1e-3):
    """Central finite differences of a scalar function at x (elementwise)."""
    g = np.zeros_like(x, dtype=np.float64)
    for idx in np.ndindex(*x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += probe
        xm[idx] -= probe
        g[idx] = (f(xp) - f(xm)) / (2.0 * probe)
    return g


def grad_close(analytic, fd, rtol=1e-4, atol=1e-7):
    """|a - fd| <= rtol*max(|a|,|fd|) + atol, reported as (ok, worst)."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(fd, dtype=np.float64)
    err = np.abs(a - b) - (rtol * np.maximum(np.abs(a), np.abs(b)) + atol)
    return bool((err <= 0).all()), float(err.max())


def sphere_sdf(p, center, radius):
    return np.linalg.norm(p - center) - radius


def box_sdf(p, center, half):
    q = np.abs(p - center) - half
    return (np.linalg.norm(np.maximum(q, 0.0))
            + min(max(q[0], max(q[1], q[2])), 0.0))


def cylinder_sdf(p, base, radius, height):
    dxy = math.hypot(p[0] - base[0], p[1] - base[1]) - radius
    zlo, zhi = base[2], base[2] + height
    dz = max(zlo - p[2], p[2] - zhi)
    outside = math.hypot(max(dxy, 0.0), max(dz, 0.0))
    inside = min(max(dxy, dz), 0.0)
    return outside + inside


def plane_sdf(p, height):
    return abs(p[2] - height)
