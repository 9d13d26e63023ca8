"""Reference computations kept independent of the package code paths."""

import itertools

import numpy as np


def gauss_solve(A, b):
    """Gaussian elimination with partial pivoting and back substitution."""
    M = np.column_stack([np.array(A, dtype=float), np.array(b, dtype=float)])
    n = M.shape[0]
    for col in range(n):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        M[[col, piv]] = M[[piv, col]]
        M[col + 1:] -= np.outer(M[col + 1:, col] / M[col, col], M[col])
    x = np.zeros(n)
    for r in reversed(range(n)):
        x[r] = (M[r, n] - M[r, r + 1:n] @ x[r + 1:]) / M[r, r]
    return x


def grid_least_squares(A, b, lo=-10.0, hi=10.0, points=41, rounds=12):
    """Minimize ||Ax - b|| by repeatedly zooming a grid around the best point."""
    A = np.asarray(A, float)
    n = A.shape[1]
    center = np.zeros(n)
    half = (hi - lo) / 2
    center[:] = (hi + lo) / 2
    for _ in range(rounds):
        axes = [np.linspace(c - half, c + half, points) for c in center]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        res = np.linalg.norm(grid @ A.T - b, axis=1)
        center = grid[np.argmin(res)]
        half *= 4.0 / (points - 1)
    return center


def best_support(D, s, k):
    """Exhaustive search over supports of size <= k; returns (residual, support)."""
    best = (float(np.linalg.norm(s)), ())
    n = D.shape[1]
    for size in range(1, k + 1):
        for sup in itertools.combinations(range(n), size):
            sub = D[:, sup]
            coef = gauss_solve(sub.T @ sub, sub.T @ s)
            r = float(np.linalg.norm(s - sub @ coef))
            if r < best[0]:
                best = (r, sup)
    return best


def naive_conv(img, weights, bias, stride, padding):
    """Five nested loops over output rows, columns, filters and kernel taps."""
    h, w, cin = img.shape
    cout, k, _, _ = weights.shape
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    out = np.zeros((ho, wo, cout))
    for i in range(ho):
        for j in range(wo):
            for f in range(cout):
                acc = bias[f]
                for ky in range(k):
                    for kx in range(k):
                        y = i * stride + ky - padding
                        x = j * stride + kx - padding
                        if 0 <= y < h and 0 <= x < w:
                            for c in range(cin):
                                acc += weights[f, ky, kx, c] * img[y, x, c]
                out[i, j, f] = acc
    return out


def scatter_pool(code, column_class, classes):
    """Per-column scatter-add into class bins."""
    out = {c: 0.0 for c in classes}
    for j, v in enumerate(code):
        out[column_class(j)] += v
    return np.array([out[c] for c in classes])


def nearest_mean_accuracy(train, test):
    labels = sorted({s.label for s in train})
    means = {c: np.mean([s.features for s in train if s.label == c], axis=0) for c in labels}
    hits = 0
    for s in test:
        pred = min(labels, key=lambda c: np.linalg.norm(s.features - means[c]))
        hits += pred == s.label
    return hits / len(test)
