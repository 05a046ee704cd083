"""Tensor-product grids on a channel domain, with the discrete calculus
used everywhere else: trapezoid quadrature, second-order difference
stencils, boundary-face bookkeeping and symmetric/antisymmetric
extensions for reflection checks.

The domain is a channel ``[0, l] x [0, 1]^(d-1)``.  Its boundary splits
into the inflow face ``x1 = 0``, the outflow face ``x1 = l`` and the
lateral walls.  Boundary nodes shared by two faces are owned by exactly
one patch, with inflow taking precedence over outflow over walls.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Channel",
    "Face",
    "Grid",
    "diff",
    "diff2",
    "gradient",
    "divergence",
    "laplacian",
    "grad_div",
    "curl2d",
    "grad_matrix",
]


@dataclass(frozen=True)
class Channel:
    """Channel geometry: length ``l`` in the streamwise direction and unit
    cross-section in the remaining ``dim - 1`` directions."""

    length: float
    dim: int = 2

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise ValueError(f"channel length must be positive, got {self.length}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")

    @property
    def extents(self) -> tuple[float, ...]:
        return (self.length,) + (1.0,) * (self.dim - 1)

    @property
    def volume(self) -> float:
        return self.length

    @property
    def inflow_area(self) -> float:
        """Measure of the inflow face (equals the outflow face)."""
        return 1.0

    @property
    def wall_area(self) -> float:
        """Total measure of the lateral walls."""
        # Each of the 2*(dim-1) lateral faces has measure `length` (times the
        # remaining unit extents), e.g. 2*l for d=2 and 4*l for d=3.
        return 2 * (self.dim - 1) * self.length


@dataclass(frozen=True)
class Face:
    """One boundary face of the channel.

    ``axis``/``side`` locate it (side 0 is the low end of the axis),
    ``normal`` is the outward unit normal and ``patch`` is one of
    ``"in"``, ``"out"``, ``"walls"``.
    """

    name: str
    axis: int
    side: int
    normal: tuple[float, ...]
    patch: str

    @property
    def tangents(self) -> tuple[tuple[float, ...], ...]:
        """Unit tangent frame on the face (dim - 1 vectors).

        The first tangent of a wall face is the streamwise direction, so
        its first component is 1; on inflow/outflow the tangents have
        zero first component.
        """
        d = len(self.normal)
        axes = [a for a in range(d) if a != self.axis]
        vecs = []
        for a in axes:
            t = [0.0] * d
            t[a] = 1.0
            vecs.append(tuple(t))
        return tuple(vecs)


def _face_list(dim: int) -> tuple[Face, ...]:
    faces = [
        Face("in", 0, 0, (-1.0,) + (0.0,) * (dim - 1), "in"),
        Face("out", 0, 1, (1.0,) + (0.0,) * (dim - 1), "out"),
    ]
    if dim == 2:
        faces.append(Face("bottom", 1, 0, (0.0, -1.0), "walls"))
        faces.append(Face("top", 1, 1, (0.0, 1.0), "walls"))
    else:
        for axis, tag in ((1, "x2"), (2, "x3")):
            for side, suffix in ((0, "lo"), (1, "hi")):
                normal = [0.0] * dim
                normal[axis] = -1.0 if side == 0 else 1.0
                faces.append(Face(f"{tag}_{suffix}", axis, side, tuple(normal), "walls"))
    return tuple(faces)


class Grid:
    """Vertex-centered tensor grid with ``n[a] + 1`` nodes per axis.

    Spacings are uniform per axis, ``h[a] = extent[a] / n[a]``.  Fields
    live on nodes as arrays of shape :attr:`shape`; integration is the
    tensor-product trapezoid rule, which keeps boundary and volume
    quadrature consistent under the reflection arguments used in tests.
    """

    def __init__(self, channel: Channel, n: tuple[int, ...]):
        n = tuple(int(k) for k in n)
        if len(n) != channel.dim:
            raise ValueError(f"need {channel.dim} cell counts, got {n!r}")
        if any(k < 2 for k in n):
            raise ValueError(f"need at least 2 cells per axis, got {n!r}")
        self.channel = channel
        self.n = n
        self.h = tuple(ext / k for ext, k in zip(channel.extents, n))
        self.axes = tuple(
            np.linspace(0.0, ext, k + 1) for ext, k in zip(channel.extents, n)
        )
        self.faces = _face_list(channel.dim)
        self._faces_by_name = {f.name: f for f in self.faces}
        # Scratch space for factorization reuse (elliptic solvers key on
        # operator parameters; a fresh Grid starts cold).
        self.cache: dict = {}

    # -- basic queries ---------------------------------------------------

    @property
    def dim(self) -> int:
        return self.channel.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(k + 1 for k in self.n)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    def face(self, name: str) -> Face:
        try:
            return self._faces_by_name[name]
        except KeyError:
            raise KeyError(
                f"unknown face {name!r}; have {sorted(self._faces_by_name)}"
            ) from None

    def wall_faces(self) -> tuple[Face, ...]:
        return tuple(f for f in self.faces if f.patch == "walls")

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinate arrays of shape :attr:`shape` (ij indexing)."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.channel, tuple(factor * k for k in self.n))

    # -- quadrature ------------------------------------------------------

    @cached_property
    def axis_weights(self) -> tuple[np.ndarray, ...]:
        out = []
        for h, k in zip(self.h, self.n):
            w = np.full(k + 1, h)
            w[0] = w[-1] = h / 2
            out.append(w)
        return tuple(out)

    @cached_property
    def volume_weights(self) -> np.ndarray:
        w = self.axis_weights[0]
        for wa in self.axis_weights[1:]:
            w = np.multiply.outer(w, wa)
        return w

    def integrate(self, field: np.ndarray) -> float:
        """Trapezoid integral of a node field over the channel."""
        return float(np.sum(self.volume_weights * field))

    def face_slicer(self, face: Face | str) -> tuple:
        """Index tuple extracting the trace of a node field on a face."""
        f = self.face(face) if isinstance(face, str) else face
        idx: list = [slice(None)] * self.dim
        idx[f.axis] = 0 if f.side == 0 else -1
        return tuple(idx)

    def face_weights(self, face: Face | str) -> np.ndarray:
        f = self.face(face) if isinstance(face, str) else face
        axes = [a for a in range(self.dim) if a != f.axis]
        w = self.axis_weights[axes[0]]
        for a in axes[1:]:
            w = np.multiply.outer(w, self.axis_weights[a])
        return w

    def face_coords(self, face: Face | str) -> tuple[np.ndarray, ...]:
        """Full coordinate arrays restricted to the face (shape of the trace)."""
        f = self.face(face) if isinstance(face, str) else face
        sl = self.face_slicer(f)
        return tuple(c[sl] for c in self.coords)

    def integrate_face(self, face: Face | str, values: np.ndarray) -> float:
        return float(np.sum(self.face_weights(face) * values))

    def face_measure(self, face: Face | str) -> float:
        return self.integrate_face(face, np.asarray(1.0))

    def patch_measure(self, patch: str) -> float:
        return sum(self.face_measure(f) for f in self.faces if f.patch == patch)

    # -- boundary ownership ----------------------------------------------

    @cached_property
    def owner_masks(self) -> dict[str, np.ndarray]:
        """Partition of boundary nodes into patches.

        Priority in > out > walls: a node on several faces is owned by
        the highest-priority patch among them (e.g. channel corners on
        the inflow face belong to ``"in"``).
        """
        masks = {p: np.zeros(self.shape, dtype=bool) for p in ("in", "out", "walls")}
        claimed = np.zeros(self.shape, dtype=bool)
        for patch in ("in", "out", "walls"):
            for f in self.faces:
                if f.patch != patch:
                    continue
                m = np.zeros(self.shape, dtype=bool)
                m[self.face_slicer(f)] = True
                masks[patch] |= m & ~claimed
            claimed |= masks[patch]
        return masks

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        for f in self.faces:
            m[self.face_slicer(f)] = True
        return m

    # -- reflection helpers ----------------------------------------------

    def extend(self, field: np.ndarray, axis: int, parity: str) -> np.ndarray:
        """Extend a node field across the low end of ``axis`` by reflection.

        ``parity="even"`` mirrors values, ``parity="odd"`` mirrors with a
        sign flip (the shared node keeps its value, so odd extensions of
        data that do not vanish there are intentionally discontinuous).
        The result has ``2*n[axis] + 1`` nodes along ``axis`` and lives on
        the doubled channel.
        """
        field = np.asarray(field)
        mirror_src = [slice(None)] * field.ndim
        mirror_src[axis] = slice(field.shape[axis] - 1, 0, -1)
        mirrored = field[tuple(mirror_src)]
        if parity == "odd":
            mirrored = -mirrored
        elif parity != "even":
            raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
        return np.concatenate([mirrored, field], axis=axis)

    def doubled(self, axis: int = 0) -> "Grid":
        """Grid for the channel doubled across the low end of ``axis``."""
        if axis != 0:
            raise NotImplementedError("doubling is used across the inflow face only")
        n = list(self.n)
        n[0] *= 2
        return Grid(Channel(2 * self.channel.length, self.dim), tuple(n))


# -- difference stencils (second order, one-sided at the ends) -------------


def diff(field: np.ndarray, axis: int, h: float) -> np.ndarray:
    """First derivative along ``axis``: centered in the interior,
    second-order one-sided at the two boundary nodes."""
    f = np.asarray(field, dtype=float)
    out = np.empty_like(f)
    mid = [slice(None)] * f.ndim

    def at(i):
        s = list(mid)
        s[axis] = i
        return tuple(s)

    out[at(slice(1, -1))] = (f[at(slice(2, None))] - f[at(slice(None, -2))]) / (2 * h)
    out[at(0)] = (-3 * f[at(0)] + 4 * f[at(1)] - f[at(2)]) / (2 * h)
    out[at(-1)] = (3 * f[at(-1)] - 4 * f[at(-2)] + f[at(-3)]) / (2 * h)
    return out


def diff2(field: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second derivative along ``axis``: centered in the interior, and the
    four-point second-order one-sided formula at the two boundary nodes."""
    f = np.asarray(field, dtype=float)
    out = np.empty_like(f)
    mid = [slice(None)] * f.ndim

    def at(i):
        s = list(mid)
        s[axis] = i
        return tuple(s)

    out[at(slice(1, -1))] = (
        f[at(slice(2, None))] - 2 * f[at(slice(1, -1))] + f[at(slice(None, -2))]
    ) / h**2
    out[at(0)] = (2 * f[at(0)] - 5 * f[at(1)] + 4 * f[at(2)] - f[at(3)]) / h**2
    out[at(-1)] = (2 * f[at(-1)] - 5 * f[at(-2)] + 4 * f[at(-3)] - f[at(-4)]) / h**2
    return out


def gradient(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Stacked gradient, shape ``(dim,) + grid.shape``."""
    return np.stack([diff(field, a, grid.h[a]) for a in range(grid.dim)])


def divergence(vec: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence of a stacked vector field of shape ``(dim,) + grid.shape``."""
    out = diff(vec[0], 0, grid.h[0])
    for a in range(1, grid.dim):
        out += diff(vec[a], a, grid.h[a])
    return out


def laplacian(field: np.ndarray, grid: Grid) -> np.ndarray:
    out = diff2(field, 0, grid.h[0])
    for a in range(1, grid.dim):
        out += diff2(field, a, grid.h[a])
    return out


def grad_div(vec: np.ndarray, grid: Grid) -> np.ndarray:
    """Gradient of the divergence of a stacked vector field.

    The diagonal entries (same axis twice) are taken as direct second
    differences and the mixed entries as composed first differences; at
    interior nodes this is the compact stencil the vector solver
    assembles (3-point diagonal blocks, 4-corner cross terms).  Writing
    ``gradient(divergence(...))`` instead widens the diagonal blocks to
    5 points and the two forms disagree at O(h^2).
    """
    out = np.stack([diff2(vec[k], k, grid.h[k]) for k in range(grid.dim)])
    for k in range(grid.dim):
        for a in range(grid.dim):
            if a != k:
                out[k] += diff(diff(vec[a], a, grid.h[a]), k, grid.h[k])
    return out


def curl2d(vec: np.ndarray, grid: Grid) -> np.ndarray:
    """Scalar vorticity d(u2)/dx1 - d(u1)/dx2 of a planar field."""
    if grid.dim != 2:
        raise NotImplementedError("scalar curl is a planar diagnostic")
    return diff(vec[1], 0, grid.h[0]) - diff(vec[0], 1, grid.h[1])


def _diff_matrix_1d(m: int, h: float) -> sp.csr_matrix:
    """Matrix form of :func:`diff` on one axis with ``m`` nodes."""
    rows, cols, vals = [], [], []
    for i in range(1, m - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-1 / (2 * h), 1 / (2 * h)]
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += [-3 / (2 * h), 4 / (2 * h), -1 / (2 * h)]
    rows += [m - 1, m - 1, m - 1]
    cols += [m - 1, m - 2, m - 3]
    vals += [3 / (2 * h), -4 / (2 * h), 1 / (2 * h)]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def grad_matrix(grid: Grid, axis: int) -> sp.csr_matrix:
    """Sparse matrix applying :func:`diff` along ``axis`` to a flattened
    (C-order) node field.  Used where an operator form of the gradient is
    needed, e.g. the least-squares potential projection."""
    key = ("grad_matrix", axis)
    if key not in grid.cache:
        mats = [sp.identity(s, format="csr") for s in grid.shape]
        mats[axis] = _diff_matrix_1d(grid.shape[axis], grid.h[axis])
        op = mats[0]
        for m in mats[1:]:
            op = sp.kron(op, m, format="csr")
        grid.cache[key] = op
    return grid.cache[key]
