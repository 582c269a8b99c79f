"""Matrix-free multilevel Toeplitz operator applied with FFTs."""
from __future__ import annotations

import math
import time

import numpy as np
from scipy import fft as sfft

__all__ = ["ToeplitzOperator", "build_operator", "materialize_dense", "smooth_fft_length"]


def smooth_fft_length(n):
    """Smallest integer >= n with no prime factor outside {2, 3, 5}."""
    n = int(n)
    if n <= 1:
        return 1
    best = 1 << (n - 1).bit_length()  # power of two always works
    p3 = 1
    while p3 < best:
        p35 = p3
        while p35 < best:
            x = p35
            while x < n:
                x *= 2
            if x < best:
                best = x
            p35 *= 5
        p3 *= 3
    return best


def _first_block(G, N):
    """Zero-extend the banded entries to the full (N_1, ..., N_d) block of
    first-row offsets."""
    block = np.zeros(N)
    sl = tuple(slice(0, min(G.band, n)) for n in N)
    block[sl] = G.entries[sl]
    return block


class ToeplitzOperator:
    """Applies the level-d Toeplitz matrix T[i, j] = t_{|i-j|} by circulant
    embedding: each axis is padded to a {2,3,5}-smooth length >= 2N-1 and the
    product becomes a pointwise multiply in Fourier space."""

    def __init__(self, G, N, workers=None):
        N = tuple(int(v) for v in N)
        if len(N) != G.d:
            raise ValueError(f"expected {G.d} grid sizes, got {len(N)}")
        if any(n < 1 for n in N):
            raise ValueError("grid sizes must be >= 1")
        if G.kernel is not None:
            needed = min(max(N), int(math.floor(G.kernel.delta / G.h + 1e-12)) + 3)
            if G.band < needed:
                raise ValueError(
                    f"tensor band {G.band} too small for grid {N} (needs {needed})"
                )
        self.G = G
        self.N = N
        self.size = int(np.prod(N))
        self.P = tuple(smooth_fft_length(2 * n - 1) for n in N)
        self.workers = workers if workers is not None else -1
        block = _first_block(G, N)
        ext = np.zeros(tuple(n + 1 for n in N))
        ext[tuple(slice(0, n) for n in N)] = block
        maps = []
        for n, p in zip(N, self.P):
            m = np.full(p, n)  # the extra slot holds the zero gap
            m[:n] = np.arange(n)
            m[p - np.arange(1, n)] = np.arange(1, n)
            maps.append(m)
        emb = ext[np.ix_(*maps)]
        self.symbol = sfft.rfftn(emb, workers=self.workers)
        self.matvec_count = 0
        self.matvec_seconds = 0.0

    @property
    def shape(self):
        return (self.size, self.size)

    def matvec(self, x):
        """Apply the operator; accepts a flat vector or an N-shaped grid and
        returns the same layout.  The output of the real-transform pipeline
        is real by construction, which keeps the circulant product free of
        imaginary residue."""
        x = np.asarray(x, dtype=float)
        if x.shape == (self.size,):
            grid_in = False
        elif x.shape == self.N:
            grid_in = True
        else:
            raise ValueError(f"operand shape {x.shape} does not match grid {self.N}")
        start = time.perf_counter()
        V = np.zeros(self.P)
        V[tuple(slice(0, n) for n in self.N)] = x.reshape(self.N)
        Y = sfft.irfftn(
            sfft.rfftn(V, workers=self.workers) * self.symbol,
            s=self.P,
            workers=self.workers,
        )
        out = Y[tuple(slice(0, n) for n in self.N)]
        self.matvec_count += 1
        self.matvec_seconds += time.perf_counter() - start
        return out if grid_in else out.reshape(-1)


def build_operator(G, N, workers=None):
    """Wrap a generating tensor as a matrix-free operator on an N grid."""
    return ToeplitzOperator(G, N, workers=workers)


def materialize_dense(G, N):
    """Dense matrix with A[i, j] = t_{|i-j|}; guarded to small grids."""
    N = tuple(int(v) for v in N)
    size = int(np.prod(N))
    if size > 4096:
        raise ValueError("dense materialization is limited to prod(N) <= 4096")
    block = _first_block(G, N)
    grids = np.meshgrid(*[np.arange(n) for n in N], indexing="ij")
    flat = [g.ravel() for g in grids]
    A = np.empty((size, size))
    for i in range(size):
        A[i] = block[tuple(np.abs(f - f[i]) for f in flat)]
    return A
