"""Generating tensor of the stiffness operator on uniform tensor grids.

On a uniform grid with spacing h, the Galerkin matrix of the truncated
interaction operator in the bilinear hat basis is multilevel Toeplitz: the
entry for nodes n, m depends only on the offset k = |n - m|.  Writing the
hat-product overlaps through cubic cardinal B-splines B3 reduces each entry
to a weighted integral of the fixed piecewise polynomial

    f_k(sigma) = 2 prod_j B3(k_j + 2) - prod_j B3(k_j + 2 - sigma_j)
                                      - prod_j B3(k_j + 2 + sigma_j),

so that

    t_k = (c h^(d-alpha) / 2) * int_{S^{d-1}} int_0^{delta/h}
            f_k(t w) t^(-1-alpha) dt dsigma(w).

The radial integral is split at t = 1 (that is, r = h).  Inside, f_k has a
double zero at t = 0 and, on each sign sector of the sphere, f_k(t w) is a
single polynomial in t of degree <= 3d; dividing the zero out, a Gauss-Jacobi
rule with weight t^(1-alpha) integrates the singular factor exactly.
Outside (only reached when delta > h), a tensorized Gauss-Legendre rule in
radius and angles is used; its accuracy is controlled by ``QuadConfig``.

Entries vanish once any offset component reaches delta/h + 2, so only a band
of the tensor is ever computed, and entries are invariant under permutations
of k, so only sorted offsets are integrated.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import combinations_with_replacement, permutations

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .bspline import bspline_eval
from .kernel import KernelSpec, Normalization, make_kernel

__all__ = [
    "QuadConfig",
    "RadialPanels",
    "GeneratingTensor",
    "integrand_fk",
    "integrand_fk_polar",
    "closed_form_integrand_2d",
    "singular_part",
    "regular_part",
    "assemble_generating_tensor",
    "closed_form_table_2d",
    "closed_form_table_3d",
    "classical_generating_tensor",
    "save_tensor",
    "load_tensor",
]

_SINGULAR_ANGULAR = 32  # fixed Gauss order per sign sector for the r < h part


class RadialPanels(str, Enum):
    SINGLE_INTERVAL = "SingleInterval"
    UNIT_SHELLS = "UnitShells"


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature resolution for the regular (r > h) part of the entries."""

    n_radial: int = 64
    n_angular: int = 64
    radial_panels: RadialPanels = RadialPanels.SINGLE_INTERVAL

    def __post_init__(self):
        if self.n_radial < 2 or self.n_angular < 2:
            raise ValueError("quadrature orders must be >= 2")
        object.__setattr__(self, "radial_panels", RadialPanels(self.radial_panels))


@dataclass(frozen=True, eq=False)
class GeneratingTensor:
    """Band of stiffness entries t_k for sorted offsets expanded to a cube."""

    d: int
    band: int
    entries: np.ndarray
    h: float
    kernel: KernelSpec | None


def integrand_fk(k, sigma):
    """Evaluate f_k at points sigma (in units of the grid spacing).

    ``k`` has length d; ``sigma`` has shape (..., d).  Vanishes identically
    for |sigma|_inf >= max(k) + ... outside the overlap band, and everywhere
    once max(k) exceeds delta/h + 2 after kernel truncation.
    """
    k = np.asarray(k, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[-1] != k.shape[0]:
        raise ValueError("sigma last axis must match len(k)")
    const = float(np.prod(bspline_eval(3, k + 2.0)))
    minus = np.prod(bspline_eval(3, k + 2.0 - sigma), axis=-1)
    plus = np.prod(bspline_eval(3, k + 2.0 + sigma), axis=-1)
    return 2.0 * const - minus - plus


def integrand_fk_polar(k, r, angles, h=1.0):
    """f_k at physical radius r along the direction given by ``angles``.

    In 2D ``angles`` is the polar angle theta with direction
    (cos theta, sin theta).  In 3D ``angles`` is a pair (theta, phi) with
    direction (sin theta cos phi, sin theta sin phi, cos theta).  ``r`` and
    the angle arrays must broadcast together.
    """
    d = len(k)
    r = np.asarray(r, dtype=float)
    if d == 2:
        theta = np.asarray(angles, dtype=float)
        omega = np.stack(np.broadcast_arrays(np.cos(theta), np.sin(theta)), axis=-1)
    elif d == 3:
        theta, phi = (np.asarray(a, dtype=float) for a in angles)
        st = np.sin(theta)
        omega = np.stack(
            np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)),
            axis=-1,
        )
    else:
        raise ValueError("d must be 2 or 3")
    sigma = (r / h)[..., None] * omega
    return integrand_fk(k, sigma)


# Single-piece values of B3(j + 2 +/- w) for w in [0, 1]: _PLUS[j](w) is the
# + branch, _MINUS[j](w) the - branch, _CENTER[j] the value at w = 0.
_PLUS = {
    0: lambda w: 2.0 / 3.0 - w**2 + w**3 / 2.0,
    1: lambda w: (1.0 - w) ** 3 / 6.0,
    2: lambda w: np.zeros_like(w),
}
_MINUS = {
    0: lambda w: 2.0 / 3.0 - w**2 + w**3 / 2.0,
    1: lambda w: 1.0 / 6.0 + w / 2.0 + w**2 / 2.0 - w**3 / 2.0,
    2: lambda w: w**3 / 6.0,
}
_CENTER = {0: 2.0 / 3.0, 1: 1.0 / 6.0, 2: 0.0}


def closed_form_integrand_2d(k, r, theta):
    """Closed-form f_k(r, theta) in 2D for offsets with both components <= 2.

    Valid for 0 < r <= 1 (radii inside one grid cell, in units of h) and
    theta in [0, pi]; raises outside that domain.  The two offset components
    may be passed in either order; the smaller one is associated with the
    cosine axis.  Within each quadrant every spline factor stays on a single
    polynomial piece, which is what makes the expression closed-form.
    """
    if len(k) != 2:
        raise ValueError("k must have two components")
    a, b = sorted(int(v) for v in k)
    if a < 0 or b > 2:
        raise ValueError("closed form covers offset components in 0..2")
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r <= 0.0) or np.any(r > 1.0):
        raise ValueError("closed form requires 0 < r <= 1")
    if np.any(np.sin(theta) < -1e-15):
        raise ValueError("closed form requires theta in [0, pi]")
    u = r * np.cos(theta)
    v = np.abs(r * np.sin(theta))
    w = np.abs(u)
    same = _PLUS[a](w) * _PLUS[b](v) + _MINUS[a](w) * _MINUS[b](v)
    flipped = _MINUS[a](w) * _PLUS[b](v) + _PLUS[a](w) * _MINUS[b](v)
    return 2.0 * _CENTER[a] * _CENTER[b] - np.where(u >= 0.0, same, flipped)


# ------------------------------------------------------------ entry assembly

def _gauss_jacobi_radial(n, alpha, tmax):
    """Rule for int_0^tmax g(t) t^(1-alpha) dt, exact for deg(g) <= 2n-1."""
    x, w = roots_jacobi(n, 0.0, 1.0 - alpha)
    return 0.5 * tmax * (x + 1.0), w * (0.5 * tmax) ** (2.0 - alpha)


def _panel_gauss(n, a, b):
    x, w = roots_legendre(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _angular_rule(d, n):
    """Per-sector Gauss rule over the full unit sphere.

    Sectors are the 4 quadrants (2D) or 8 octants (3D), so every direction
    component keeps a fixed sign within a sector; returns directions (A, d)
    and weights (A,) with sum |S^{d-1}|.
    """
    if d == 2:
        thetas, weights = [], []
        for q in range(4):
            t, w = _panel_gauss(n, q * math.pi / 2.0, (q + 1) * math.pi / 2.0)
            thetas.append(t)
            weights.append(w)
        theta = np.concatenate(thetas)
        w = np.concatenate(weights)
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1), w
    th_nodes, th_w = [], []
    for half in range(2):
        t, w = _panel_gauss(n, half * math.pi / 2.0, (half + 1) * math.pi / 2.0)
        th_nodes.append(t)
        th_w.append(w)
    theta = np.concatenate(th_nodes)
    wth = np.concatenate(th_w)
    ph_nodes, ph_w = [], []
    for q in range(4):
        p, w = _panel_gauss(n, q * math.pi / 2.0, (q + 1) * math.pi / 2.0)
        ph_nodes.append(p)
        ph_w.append(w)
    phi = np.concatenate(ph_nodes)
    wph = np.concatenate(ph_w)
    st = np.sin(theta)
    omega = np.stack(
        [
            np.outer(st, np.cos(phi)).ravel(),
            np.outer(st, np.sin(phi)).ravel(),
            np.outer(np.cos(theta), np.ones_like(phi)).ravel(),
        ],
        axis=-1,
    )
    w = np.outer(wth * st, wph).ravel()
    return omega, w


def _check_offset(k, d):
    k = tuple(int(v) for v in k)
    if len(k) != d or any(v < 0 for v in k):
        raise ValueError(f"offset must be {d} nonnegative integers, got {k}")
    return k


def singular_part(k, kernel, h):
    """Entry contribution from radii r in (0, min(h, delta)).

    Per sign sector the integrand divided by t^2 is a polynomial of degree
    <= 3d - 2, so the fixed Gauss-Jacobi rule with weight t^(1-alpha) is
    exact in radius; angles use fixed Gauss panels per sector.
    """
    d = kernel.d
    k = _check_offset(k, d)
    h = float(h)
    if h <= 0.0:
        raise ValueError("h must be positive")
    tstar = min(1.0, kernel.delta / h)
    n_gj = (3 * d + 1) // 2 + 1
    t, wt = _gauss_jacobi_radial(n_gj, kernel.alpha, tstar)
    omega, wa = _angular_rule(d, _SINGULAR_ANGULAR)
    sigma = t[:, None, None] * omega[None, :, :]
    phi = integrand_fk(k, sigma) / t[:, None] ** 2
    total = float(np.einsum("t,a,ta->", wt, wa, phi))
    return 0.5 * kernel.c * h ** (d - kernel.alpha) * total


def regular_part(k, kernel, h, quad=None):
    """Entry contribution from radii r in (h, delta); zero when delta <= h."""
    d = kernel.d
    k = _check_offset(k, d)
    h = float(h)
    if h <= 0.0:
        raise ValueError("h must be positive")
    T = kernel.delta / h
    if T <= 1.0:
        return 0.0
    quad = quad if quad is not None else QuadConfig()
    if quad.radial_panels is RadialPanels.UNIT_SHELLS:
        edges = [float(j) for j in range(1, int(math.ceil(T)))] + [T]
    else:
        edges = [1.0, T]
    t_nodes, t_weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t, w = _panel_gauss(quad.n_radial, a, b)
        t_nodes.append(t)
        t_weights.append(w * t ** (-1.0 - kernel.alpha))
    t = np.concatenate(t_nodes)
    wt = np.concatenate(t_weights)
    omega, wa = _angular_rule(d, quad.n_angular)
    sigma = t[:, None, None] * omega[None, :, :]
    vals = integrand_fk(k, sigma)
    total = float(np.einsum("t,a,ta->", wt, wa, vals))
    return 0.5 * kernel.c * h ** (d - kernel.alpha) * total


def _band_width(n, ratio):
    return min(int(n), int(math.floor(ratio + 1e-12)) + 3)


def assemble_generating_tensor(d, N, h, kernel, quad=None, threads=None):
    """Assemble the band of stiffness entries for an N^d uniform grid.

    Entries are computed once per sorted offset (singular plus regular radial
    contributions) and mirrored over index permutations.  ``threads`` > 1
    maps the offset integrations over a thread pool; results are identical
    to the serial ones.
    """
    d = int(d)
    if kernel.d != d:
        raise ValueError("kernel dimension does not match d")
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    B = _band_width(N, kernel.delta / h)
    offsets = list(combinations_with_replacement(range(B), d))

    def entry(k):
        return singular_part(k, kernel, h) + regular_part(k, kernel, h, quad)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(entry, offsets))
    else:
        values = [entry(k) for k in offsets]
    entries = np.zeros((B,) * d)
    for k, v in zip(offsets, values):
        for perm in set(permutations(k)):
            entries[perm] = v
    return GeneratingTensor(d=d, band=B, entries=entries, h=float(h), kernel=kernel)


# ------------------------------------------------------- closed-form tables

def closed_form_table_2d(alpha, delta_over_h):
    """3x3 band of 2D entries for delta <= h, in closed form.

    The 2D entries do not depend on h separately, only on delta/h, so the
    table applies to any spacing.  Offsets with a component >= 3 vanish in
    this regime.
    """
    a = float(alpha)
    if not (-1.0 <= a < 2.0):
        raise ValueError("alpha must lie in [-1, 2)")
    r = float(delta_over_h)
    if not (0.0 < r <= 1.0):
        raise ValueError("closed-form table requires 0 < delta/h <= 1")
    pi = math.pi
    q = (a - 2.0) / 2.0
    t00 = q * (
        -(r**4) / (3 * pi * (a - 6))
        + 32 * r**3 / (15 * pi * (a - 5))
        - r**2 / (a - 4)
        - 64 * r / (9 * pi * (a - 3))
    ) + 8.0 / 3.0
    t10 = q * (
        2 * r**4 / (9 * pi * (a - 6))
        - 56 * r**3 / (45 * pi * (a - 5))
        + r**2 / (2 * (a - 4))
        + 40 * r / (27 * pi * (a - 3))
    ) - 1.0 / 3.0
    t11 = q * (
        -4 * r**4 / (27 * pi * (a - 6))
        + 32 * r**3 / (45 * pi * (a - 5))
        - r**2 / (4 * (a - 4))
        + 32 * r / (27 * pi * (a - 3))
    ) - 1.0 / 3.0
    t20 = q * (
        -(r**4) / (18 * pi * (a - 6))
        + 8 * r**3 / (45 * pi * (a - 5))
        - 16 * r / (27 * pi * (a - 3))
    )
    t21 = q * (
        r**4 / (27 * pi * (a - 6))
        - 4 * r**3 / (45 * pi * (a - 5))
        - 4 * r / (27 * pi * (a - 3))
    )
    t22 = -q * r**4 / (108 * pi * (a - 6))
    return np.array([[t00, t10, t20], [t10, t11, t21], [t20, t21, t22]])


def closed_form_table_3d(alpha, delta_over_h):
    """3x3x3 band of 3D entries for delta <= h, in closed form.

    Values are for unit spacing; entries scale like h, so multiply by h for
    a general grid.
    """
    a = float(alpha)
    if not (-1.0 <= a < 2.0):
        raise ValueError("alpha must lie in [-1, 2)")
    r = float(delta_over_h)
    if not (0.0 < r <= 1.0):
        raise ValueError("closed-form table requires 0 < delta/h <= 1")
    pi = math.pi
    t000 = 8.0 / 3.0 + (a - 2.0) / 2.0 * (
        -(r**7) / (160 * pi * (a - 9))
        + 8 * r**6 / (105 * pi * (a - 8))
        - 3 * r**5 / (32 * (a - 7))
        + 4 * (pi - 4) * r**4 / (35 * pi * (a - 6))
        + r**3 / (a - 5)
        - 8 * r**2 / (5 * (a - 4))
        - 2 * r / (a - 3)
    )
    t001 = (a - 2.0) * (
        r**7 / (480 * pi * (a - 9))
        - 22 * r**6 / (945 * pi * (a - 8))
        + 5 * r**5 / (192 * (a - 7))
        - (9 * pi - 26) * r**4 / (315 * pi * (a - 6))
        - 11 * r**3 / (72 * (a - 5))
        + r**2 / (5 * (a - 4))
        + r / (18 * (a - 3))
    )
    t011 = -1.0 / 6.0 + (a - 2.0) * (
        -(r**7) / (720 * pi * (a - 9))
        + 8 * r**6 / (567 * pi * (a - 8))
        - 11 * r**5 / (768 * (a - 7))
        + (27 * pi - 16) * r**4 / (1890 * pi * (a - 6))
        + r**3 / (144 * (a - 5))
        + 13 * r / (144 * (a - 3))
    )
    t111 = -1.0 / 12.0 + (a - 2.0) * (
        r**7 / (1080 * pi * (a - 9))
        - 8 * r**6 / (945 * pi * (a - 8))
        + r**5 / (128 * (a - 7))
        - (9 * pi + 32) * r**4 / (1260 * pi * (a - 6))
        + r**3 / (24 * (a - 5))
        - r**2 / (20 * (a - 4))
        + r / (24 * (a - 3))
    )
    t002 = (a - 2.0) * (
        -(r**7) / (1920 * pi * (a - 9))
        + 4 * r**6 / (945 * pi * (a - 8))
        - r**5 / (384 * (a - 7))
        - 8 * r**4 / (315 * pi * (a - 6))
        + r**3 / (36 * (a - 5))
        - r / (18 * (a - 3))
    )
    t012 = (a - 2.0) * (
        r**7 / (2880 * pi * (a - 9))
        - r**6 / (405 * pi * (a - 8))
        + r**5 / (768 * (a - 7))
        + r**4 / (189 * pi * (a - 6))
        - r**3 / (288 * (a - 5))
        - r / (72 * (a - 3))
    )
    t112 = (a - 2.0) * (
        -(r**7) / (4320 * pi * (a - 9))
        + 4 * r**6 / (2835 * pi * (a - 8))
        - r**5 / (1536 * (a - 7))
        + 4 * r**4 / (945 * pi * (a - 6))
        - r**3 / (288 * (a - 5))
        - r / (288 * (a - 3))
    )
    t022 = (a - 2.0) / 2.0 * (
        -(r**7) / (5760 * pi * (a - 9))
        + 2 * r**6 / (2835 * pi * (a - 8))
        - 4 * r**4 / (945 * pi * (a - 6))
    )
    t122 = (a - 2.0) / 2.0 * (
        r**7 / (8640 * pi * (a - 9))
        - 2 * r**6 / (5670 * pi * (a - 8))
        - 2 * r**4 / (1890 * pi * (a - 6))
    )
    t222 = -(a - 2.0) * r**7 / (69120 * pi * (a - 9))
    by_offset = {
        (0, 0, 0): t000,
        (0, 0, 1): t001,
        (0, 1, 1): t011,
        (1, 1, 1): t111,
        (0, 0, 2): t002,
        (0, 1, 2): t012,
        (1, 1, 2): t112,
        (0, 2, 2): t022,
        (1, 2, 2): t122,
        (2, 2, 2): t222,
    }
    out = np.empty((3, 3, 3))
    for idx in np.ndindex(3, 3, 3):
        out[idx] = by_offset[tuple(sorted(idx))]
    return out


def classical_generating_tensor(d, h):
    """Limiting (delta -> 0) entries: the local Laplacian stiffness band.

    These are the Kronecker sums of the standard second-difference and mass
    tridiagonals; entries vanish for any offset component >= 2.
    """
    d = int(d)
    h = float(h)
    if d == 2:
        entries = np.array([[8.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, -1.0 / 3.0]])
    elif d == 3:
        entries = np.zeros((2, 2, 2))
        entries[0, 0, 0] = 8.0 / 3.0 * h
        entries[0, 1, 1] = entries[1, 0, 1] = entries[1, 1, 0] = -h / 6.0
        entries[1, 1, 1] = -h / 12.0
    else:
        raise ValueError("d must be 2 or 3")
    return GeneratingTensor(d=d, band=2, entries=entries, h=h, kernel=None)


# ------------------------------------------------------------- binary cache

_MAGIC = b"NLGT1"


def save_tensor(path, tensor, n):
    """Write a tensor to the binary cache format.

    Layout: magic ``NLGT1``; little-endian u32 d, N, band; little-endian f64
    h, delta, alpha, c; then band^d float64 entries in column-major order.
    """
    if tensor.kernel is None:
        raise ValueError("only kernel-assembled tensors can be cached")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", tensor.d, int(n), tensor.band))
        fh.write(
            struct.pack(
                "<dddd",
                tensor.h,
                tensor.kernel.delta,
                tensor.kernel.alpha,
                tensor.kernel.c,
            )
        )
        fh.write(np.ascontiguousarray(tensor.entries, dtype="<f8").flatten(order="F").tobytes())


def load_tensor(path):
    """Read a cached tensor; returns (GeneratingTensor, N).

    The calibration policy is not stored -- the reconstructed kernel carries
    the explicit constant, which fully determines the operator.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != _MAGIC:
        raise ValueError("not a generating-tensor cache file")
    d, n, band = struct.unpack_from("<III", blob, 5)
    h, delta, alpha, c = struct.unpack_from("<dddd", blob, 17)
    count = band**d
    data = np.frombuffer(blob, dtype="<f8", count=count, offset=49)
    if data.size != count:
        raise ValueError("cache file truncated")
    entries = data.reshape((band,) * d, order="F").copy()
    kern = make_kernel(d, alpha, delta, normalization=Normalization.EXPLICIT, c=c)
    return GeneratingTensor(d=d, band=band, entries=entries, h=h, kernel=kern), n
