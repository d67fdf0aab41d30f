"""Naive reference implementations used as independent test oracles.

Everything here is written with explicit Python loops over pixels and
windows, sharing no code with the package under test.
"""

import math

import numpy as np


def min_filter(field, patch):
    h, w = field.shape
    r = patch // 2
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            best = math.inf
            for yy in range(max(0, y - r), min(h, y + r + 1)):
                for xx in range(max(0, x - r), min(w, x + r + 1)):
                    best = min(best, float(field[yy, xx]))
            out[y, x] = best
    return out


def channel_min(img):
    h, w, _ = img.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = min(float(img[y, x, 0]), float(img[y, x, 1]), float(img[y, x, 2]))
    return out


def dark_channel(img, patch):
    h, w, _ = img.shape
    r = patch // 2
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            best = math.inf
            for yy in range(max(0, y - r), min(h, y + r + 1)):
                for xx in range(max(0, x - r), min(w, x + r + 1)):
                    for c in range(3):
                        best = min(best, float(img[yy, xx, c]))
            out[y, x] = best
    return out


def atmosphere(img, dark, fraction):
    h, w, _ = img.shape
    k = max(1, int(math.floor(fraction * h * w)))
    cells = [(-float(dark[y, x]), y * w + x) for y in range(h) for x in range(w)]
    cells.sort()
    best, best_val = None, -math.inf
    for _, idx in cells[:k]:
        y, x = divmod(idx, w)
        v = (float(img[y, x, 0]) + float(img[y, x, 1]) + float(img[y, x, 2])) / 3.0
        if v > best_val:
            best, best_val = (y, x), v
    a = np.array([float(img[best[0], best[1], c]) for c in range(3)])
    return np.maximum(a, 1e-6)


def transmission(img, atm, patch, omega, t0):
    h, w, _ = img.shape
    r = patch // 2
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            best = math.inf
            for yy in range(max(0, y - r), min(h, y + r + 1)):
                for xx in range(max(0, x - r), min(w, x + r + 1)):
                    for c in range(3):
                        ratio = min(1.0, max(0.0, float(img[yy, xx, c]) / float(atm[c])))
                        best = min(best, ratio)
            t = 1.0 - omega * best
            out[y, x] = min(1.0, max(t0, t))
    return out


def box_mean(field, r):
    h, w = field.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            total, count = 0.0, 0
            for yy in range(max(0, y - r), min(h, y + r + 1)):
                for xx in range(max(0, x - r), min(w, x + r + 1)):
                    total += float(field[yy, xx])
                    count += 1
            out[y, x] = total / count
    return out


def mse_loss(pred, target):
    h, w, _ = pred.shape
    per_channel = []
    for c in range(3):
        total = 0.0
        for y in range(h):
            for x in range(w):
                d = float(target[y, x, c]) - float(pred[y, x, c])
                total += d * d
        per_channel.append(total / (2.0 * h * w))
    return sum(per_channel) / 3.0


def psnr(a, b):
    total, n = 0.0, 0
    for v, u in zip(np.asarray(a, float).ravel(), np.asarray(b, float).ravel()):
        total += (v - u) ** 2
        n += 1
    mse = total / n
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)


def ssim(a, b, size=11, sigma=1.5):
    def luma(img):
        h, w, _ = img.shape
        out = np.empty((h, w))
        for y in range(h):
            for x in range(w):
                out[y, x] = (0.299 * float(img[y, x, 0]) + 0.587 * float(img[y, x, 1])
                             + 0.114 * float(img[y, x, 2]))
        return out

    x_img, y_img = luma(a), luma(b)
    half = (size - 1) / 2.0
    weights = [[math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2 * sigma**2))
                for j in range(size)] for i in range(size)]
    z = sum(map(sum, weights))
    weights = [[v / z for v in row] for row in weights]
    c1, c2 = 0.01**2, 0.03**2
    h, w = x_img.shape
    vals = []
    for y0 in range(h - size + 1):
        for x0 in range(w - size + 1):
            mx = my = 0.0
            for i in range(size):
                for j in range(size):
                    mx += weights[i][j] * x_img[y0 + i, x0 + j]
                    my += weights[i][j] * y_img[y0 + i, x0 + j]
            vx = vy = cxy = 0.0
            for i in range(size):
                for j in range(size):
                    dx = x_img[y0 + i, x0 + j] - mx
                    dy = y_img[y0 + i, x0 + j] - my
                    vx += weights[i][j] * dx * dx
                    vy += weights[i][j] * dy * dy
                    cxy += weights[i][j] * dx * dy
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)


def numerical_gradient(loss_fn, vec, h=1e-4):
    """Central differences of ``loss_fn`` at ``vec``."""
    vec = np.asarray(vec, dtype=np.float64)
    grad = np.empty_like(vec)
    for i in range(vec.size):
        up, down = vec.copy(), vec.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (loss_fn(up) - loss_fn(down)) / (2.0 * h)
    return grad
