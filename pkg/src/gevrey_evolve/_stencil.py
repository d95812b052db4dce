"""Finite-difference stencils and small combinatorial helpers.

Fornberg's algorithm generates derivative weights on arbitrary nodes, which
lets us difference uniform frequency lattices with one-sided stencils near
the edges.  The Bell-polynomial recursion turns derivative lists of an
exponent into derivatives of its exponential with the exponential factor
cancelled, so no large exponentials are ever formed.
"""

import numpy as np


def fd_weights(nodes, x0, order):
    """Weights w with sum(w*f(nodes)) ~ f^(order)(x0) (Fornberg 1988)."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if order >= n:
        raise ValueError("need more nodes than derivative order")
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def diff_uniform(values, spacing, order, axis=0, accuracy=4):
    """Differentiate sampled values on a uniform lattice along ``axis``.

    Central stencils of the requested accuracy in the interior, one-sided
    stencils of the same width near the boundary.
    """
    values = np.asarray(values)
    n = values.shape[axis]
    width = order + accuracy  # stencil size; central needs odd width
    if width % 2 == 0:
        width += 1
    if width > n:
        raise ValueError("lattice too short for requested stencil")
    half = width // 2
    moved = np.moveaxis(values, axis, 0)
    out = np.empty_like(moved)
    # interior: one shared central stencil
    offsets = np.arange(-half, half + 1)
    w = fd_weights(offsets.astype(float), 0.0, order) / spacing**order
    core = sum(w[j] * moved[half + offsets[j]: n - half + offsets[j] or None]
               for j in range(width))
    out[half: n - half] = core
    # edges: one-sided stencils
    for i in range(half):
        w = fd_weights(np.arange(width, dtype=float), float(i), order) / spacing**order
        out[i] = np.tensordot(w, moved[:width], axes=(0, 0))
        w = fd_weights(np.arange(width, dtype=float), float(width - 1 - i), order) / spacing**order
        out[n - 1 - i] = np.tensordot(w, moved[n - width:], axes=(0, 0))
    return np.moveaxis(out, 0, axis)


def exp_derivative_factors(derivs):
    """Given [g', g'', ..., g^(n)] return [B_1, ..., B_n] with
    d^k/dx^k e^g = B_k e^g (complete Bell polynomial recursion).

    Entries may be scalars or arrays; broadcasting applies.
    """
    n = len(derivs)
    bell = []
    from math import comb
    for k in range(1, n + 1):
        # B_k = sum_{i=0}^{k-1} C(k-1, i) B_{k-1-i} g^(i+1), B_0 = 1
        acc = 0.0
        for i in range(k):
            prev = bell[k - 2 - i] if k - 2 - i >= 0 else 1.0
            acc = acc + comb(k - 1, i) * prev * derivs[i]
        bell.append(acc)
    return bell
