"""Numba kernel for the stochastic layout optimizer.

One function runs one epoch of attractive/repulsive updates over the edge
list, in place. Kept free of fastmath so that a fixed seed reproduces the
embedding bit for bit; the surrounding driver stays in embed.py.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _clip(val, bound):
    if val > bound:
        return bound
    if val < -bound:
        return -bound
    return val


@numba.njit(cache=True, inline="always")
def _next_uint(state):
    # xorshift64; state is a one-element uint64 array
    x = state[0]
    x ^= x << np.uint64(13)
    x ^= x >> np.uint64(7)
    x ^= x << np.uint64(17)
    state[0] = x
    return x


@numba.njit(cache=True)
def run_epoch(
    coords,
    head,
    tail,
    epochs_per_sample,
    epoch_of_next_sample,
    epochs_per_negative_sample,
    epoch_of_next_negative_sample,
    a,
    b,
    gamma,
    alpha,
    clip_bound,
    epoch,
    rng_state,
):
    n_vertices = coords.shape[0]
    for i in range(epochs_per_sample.shape[0]):
        if epoch_of_next_sample[i] > epoch:
            continue
        j = head[i]
        k = tail[i]
        current = coords[j]
        other = coords[k]

        dist_sq = 0.0
        for d in range(2):
            diff = current[d] - other[d]
            dist_sq += diff * diff

        if dist_sq > 0.0:
            grad_coeff = -2.0 * a * b * dist_sq ** (b - 1.0)
            grad_coeff /= a * dist_sq**b + 1.0
        else:
            grad_coeff = 0.0
        for d in range(2):
            grad_d = _clip(grad_coeff * (current[d] - other[d]), clip_bound)
            current[d] += grad_d * alpha
            other[d] -= grad_d * alpha

        epoch_of_next_sample[i] += epochs_per_sample[i]

        n_neg = int(
            (epoch - epoch_of_next_negative_sample[i]) / epochs_per_negative_sample[i]
        )
        for _ in range(n_neg):
            c = int(_next_uint(rng_state) % np.uint64(n_vertices))
            if c == j:
                continue
            negative = coords[c]
            dist_sq = 0.0
            for d in range(2):
                diff = current[d] - negative[d]
                dist_sq += diff * diff
            if dist_sq > 0.0:
                grad_coeff = 2.0 * gamma * b
                grad_coeff /= (0.001 + dist_sq) * (a * dist_sq**b + 1.0)
            else:
                grad_coeff = 0.0
            for d in range(2):
                if grad_coeff > 0.0:
                    grad_d = _clip(grad_coeff * (current[d] - negative[d]), clip_bound)
                else:
                    grad_d = clip_bound
                current[d] += grad_d * alpha
        epoch_of_next_negative_sample[i] += n_neg * epochs_per_negative_sample[i]
