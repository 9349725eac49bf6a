"""Independent reference implementations used only to check the package.

Nothing here shares code with fairprep's fitting paths: the percentile rule
is recomputed from its definition, gradients come from central differences,
logistic regression from IRLS, and ridge regression from plain gradient
descent with an explicitly safe step size.
"""

import math

import numpy as np


def nearest_rank_q(values, q):
    """ceil(q*n)-th smallest value, straight from the definition."""
    vals = sorted(values)
    rank = math.ceil(q * len(vals))
    return vals[max(rank, 1) - 1]


def finite_diff_param_grads(net, X, loss_of_output, step=1e-5):
    """Central-difference gradients for every MLP parameter.

    loss_of_output maps the network output to a scalar; the forward pass is
    re-run from scratch for each perturbation.
    """
    from fairprep.mlcore import mlp_forward

    grads = []
    for w, b in zip(net.weights, net.biases):
        gw = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + step
            lp = loss_of_output(mlp_forward(net, X)[1])
            w[idx] = orig - step
            lm = loss_of_output(mlp_forward(net, X)[1])
            w[idx] = orig
            gw[idx] = (lp - lm) / (2 * step)
        gb = np.zeros_like(b)
        for idx in np.ndindex(b.shape):
            orig = b[idx]
            b[idx] = orig + step
            lp = loss_of_output(mlp_forward(net, X)[1])
            b[idx] = orig - step
            lm = loss_of_output(mlp_forward(net, X)[1])
            b[idx] = orig
            gb[idx] = (lp - lm) / (2 * step)
        grads.append((gw, gb))
    return grads


def max_relative_error(analytic, numeric, floor=1e-8):
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            denom = np.maximum(np.abs(a) + np.abs(n), floor)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def irls_logistic(X, y, l2, max_iter=200, tol=1e-12):
    """Penalized iteratively-reweighted least squares with a free intercept.

    Solves the same objective as fairprep's gradient-descent fit:
    mean cross-entropy + l2 * ||w||^2, intercept unpenalized.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(d + 1)
    penalty = np.diag([2.0 * l2 * n] * d + [0.0])  # scaled to the summed loss
    for _ in range(max_iter):
        z = Xa @ theta
        p = 1.0 / (1.0 + np.exp(-z))
        w_diag = np.maximum(p * (1.0 - p), 1e-10)
        grad = Xa.T @ (p - y) + penalty @ theta
        hess = (Xa * w_diag[:, None]).T @ Xa + penalty
        delta = np.linalg.solve(hess, grad)
        theta = theta - delta
        if np.linalg.norm(delta) < tol:
            break
    return theta[:d], theta[d]


def gd_ridge(X, y, lam, max_iter=200_000, tol=1e-13):
    """Gradient descent on ||Xw + b - y||^2 + lam*||w||^2 with a safe step."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    gram = 2.0 * (Xa.T @ Xa)
    gram[:d, :d] += 2.0 * lam * np.eye(d)
    eigs = np.linalg.eigvalsh(gram)
    step = 2.0 / (eigs[0] + eigs[-1])
    theta = np.zeros(d + 1)
    for _ in range(max_iter):
        grad = gram @ theta - 2.0 * (Xa.T @ y)
        theta = theta - step * grad
        if np.linalg.norm(grad) < tol:
            break
    return theta[:d], theta[d]
