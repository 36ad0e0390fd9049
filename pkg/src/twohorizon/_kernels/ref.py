"""Pure-numpy implementations of the training loops.

Mirrors ``fast.pyx`` operation for operation so both backends produce the
same trajectories up to floating-point association order.
"""

import numpy as np

BACKEND = "python"


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_gd(x, y, reg, lr, iters, w, b):
    """Full-batch gradient descent on L2-regularized logistic loss.

    Starts from (w, b) and returns the updated pair. The intercept is not
    penalized.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.array(w, dtype=np.float64, copy=True)
    b = float(b)
    n = x.shape[0]
    for _ in range(int(iters)):
        p = sigmoid(x @ w + b)
        d = (p - y) / n
        gw = x.T @ d + reg * w
        gb = float(np.sum(d))
        w -= lr * gw
        b -= lr * gb
    return w, b


def mlp_gd(x, y, w1, b1, w2, b2, reg, lr, iters, probability):
    """Full-batch gradient descent for a one-hidden-layer tanh network.

    Squared loss on the linear output for regression, cross-entropy on the
    sigmoid output when ``probability`` is true. Weight matrices are
    penalized, biases are not.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w1 = np.array(w1, dtype=np.float64, copy=True)  # (h, p)
    b1 = np.array(b1, dtype=np.float64, copy=True)  # (h,)
    w2 = np.array(w2, dtype=np.float64, copy=True)  # (h,)
    b2 = float(b2)
    n = x.shape[0]
    for _ in range(int(iters)):
        z1 = x @ w1.T + b1          # (n, h)
        h = np.tanh(z1)
        out = h @ w2 + b2           # (n,)
        if probability:
            d_out = (sigmoid(out) - y) / n
        else:
            d_out = (out - y) / n
        gw2 = h.T @ d_out + reg * w2
        gb2 = float(np.sum(d_out))
        d_h = np.outer(d_out, w2) * (1.0 - h * h)   # (n, h)
        gw1 = d_h.T @ x + reg * w1
        gb1 = d_h.sum(axis=0)
        w1 -= lr * gw1
        b1 -= lr * gb1
        w2 -= lr * gw2
        b2 -= lr * gb2
    return w1, b1, w2, b2


def adam_max(xb, slope, lr, iters, beta1, beta2, eps, theta):
    """Adam ascent on mean(slope * sigmoid(xb @ theta)).

    ``xb`` already carries the intercept column. Returns the final theta.
    """
    xb = np.ascontiguousarray(xb, dtype=np.float64)
    slope = np.asarray(slope, dtype=np.float64)
    theta = np.array(theta, dtype=np.float64, copy=True)
    n = xb.shape[0]
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for t in range(1, int(iters) + 1):
        p = sigmoid(xb @ theta)
        g = xb.T @ (slope * p * (1.0 - p)) / n
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        theta += lr * mhat / (np.sqrt(vhat) + eps)
    return theta
