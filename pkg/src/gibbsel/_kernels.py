"""Compiled inner loops: union-find labelling and Swendsen-Wang sweeps."""
import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    # path compression
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True, inline="always")
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra != rb:
        # smaller root index wins, keeps the forest deterministic
        if ra < rb:
            parent[rb] = ra
        else:
            parent[ra] = rb


@njit(cache=True)
def label_components(colors, eu, ev):
    """Canonical component labels of the induced graph.

    Labels follow first-visit order in a row-major scan. Returns
    ``(labels, sizes)``.
    """
    n = colors.shape[0]
    parent = np.arange(n)
    for e in range(eu.shape[0]):
        a = eu[e]
        b = ev[e]
        if colors[a] == colors[b]:
            _union(parent, a, b)
    labels = np.empty(n, dtype=np.int64)
    root_label = np.full(n, -1, dtype=np.int64)
    sizes = np.zeros(n, dtype=np.int64)
    count = 0
    for i in range(n):
        r = _find(parent, i)
        if root_label[r] < 0:
            root_label[r] = count
            count += 1
        lab = root_label[r]
        labels[i] = lab
        sizes[lab] += 1
    return labels, sizes[:count]


@njit(cache=True)
def component_stats(colors, eu, ev):
    """(monochrome edges, component count, largest component size)."""
    n = colors.shape[0]
    parent = np.arange(n)
    r = 0
    for e in range(eu.shape[0]):
        a = eu[e]
        b = ev[e]
        if colors[a] == colors[b]:
            r += 1
            _union(parent, a, b)
    sizes = np.zeros(n, dtype=np.int64)
    t = 0
    u = 0
    for i in range(n):
        root = _find(parent, i)
        if sizes[root] == 0:
            t += 1
        sizes[root] += 1
        if sizes[root] > u:
            u = sizes[root]
    return r, t, u


@njit(cache=True)
def _sweep(colors, eu, ev, p_bond, n_colors, rng, parent, new_color):
    n = colors.shape[0]
    for i in range(n):
        parent[i] = i
        new_color[i] = -1
    for e in range(eu.shape[0]):
        a = eu[e]
        b = ev[e]
        if colors[a] == colors[b]:
            if rng.random() < p_bond:
                _union(parent, a, b)
    for i in range(n):
        root = _find(parent, i)
        if new_color[root] < 0:
            new_color[root] = int(rng.random() * n_colors)
        colors[i] = new_color[root]


@njit(cache=True)
def sw_sweeps(states, eu, ev, p_bond, n_colors, n_sweeps, rng):
    """Run ``n_sweeps`` Swendsen-Wang sweeps on each row of ``states`` in place."""
    n = states.shape[1]
    parent = np.empty(n, dtype=np.int64)
    new_color = np.empty(n, dtype=np.int64)
    for s in range(states.shape[0]):
        colors = states[s]
        for _ in range(n_sweeps):
            _sweep(colors, eu, ev, p_bond, n_colors, rng, parent, new_color)


@njit(cache=True)
def enumerate_edge_counts(n_sites, n_colors, eu, ev):
    """Monochrome edge count of every configuration.

    Configuration ``c`` colors site ``i`` with base-K digit ``i`` of ``c``
    (site 0 is the least significant digit).
    """
    total = n_colors ** n_sites
    out = np.empty(total, dtype=np.int16)
    digits = np.zeros(n_sites, dtype=np.int64)
    for c in range(total):
        r = 0
        for e in range(eu.shape[0]):
            if digits[eu[e]] == digits[ev[e]]:
                r += 1
        out[c] = r
        # odometer increment
        i = 0
        while i < n_sites:
            digits[i] += 1
            if digits[i] < n_colors:
                break
            digits[i] = 0
            i += 1
    return out


@njit(cache=True)
def enumerate_agreements(n_colors, y):
    """Number of sites where each configuration agrees with ``y``."""
    n_sites = y.shape[0]
    total = n_colors ** n_sites
    out = np.empty(total, dtype=np.int16)
    digits = np.zeros(n_sites, dtype=np.int64)
    a = 0
    for i in range(n_sites):
        if y[i] == 0:
            a += 1
    for c in range(total):
        out[c] = a
        i = 0
        while i < n_sites:
            old = digits[i]
            digits[i] += 1
            if digits[i] < n_colors:
                a += (digits[i] == y[i]) - (old == y[i])
                break
            digits[i] = 0
            a += (0 == y[i]) - (old == y[i])
            i += 1
    return out
