"""Problem data for the channel flow: volume force and the boundary
data of the slip, impermeability, inflow-density and heat conditions.

The constant background state ``v = (1, 0, ...), rho = 1, theta = T0``
satisfies the flow with the compatible data

    b_k = alpha * tau_k^(1),   d = n^(1),   rho_in = 1,   g = 0,   T1 = 0,

so the *perturbation content* of a data set is measured against exactly
these values; :func:`data_size` is zero iff the data is the background
data, and every solver path works with the differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import FlowParams
from .grid import Face, Grid
from .norms import lp_norm, trace_norm

__all__ = ["ProblemData", "data_size"]


@dataclass(frozen=True)
class ProblemData:
    """Data arrays on a fixed grid.

    Face entries are keyed by face name and shaped like the face trace;
    ``b`` holds one array per tangent direction of each face.
    """

    f: np.ndarray
    b: dict[str, tuple[np.ndarray, ...]]
    d: dict[str, np.ndarray]
    rho_in: np.ndarray
    g: dict[str, np.ndarray]
    T1: dict[str, np.ndarray]

    @classmethod
    def background(cls, grid: Grid, params: FlowParams) -> "ProblemData":
        """The data set whose solution is the unperturbed background."""
        shape = grid.shape

        def face_map(value_of):
            return {f.name: value_of(f) for f in grid.faces}

        def trace_shape(f: Face):
            return grid.face_coords(f)[0].shape

        return cls(
            f=np.zeros((grid.dim,) + shape),
            b=face_map(
                lambda f: tuple(
                    np.full(trace_shape(f), params.alpha * tau[0]) for tau in f.tangents
                )
            ),
            d=face_map(lambda f: np.full(trace_shape(f), f.normal[0])),
            rho_in=np.ones(trace_shape(grid.face("in"))),
            g=face_map(lambda f: np.zeros(trace_shape(f))),
            T1=face_map(lambda f: np.zeros(trace_shape(f))),
        )

    # -- perturbation views -------------------------------------------------

    def slip_defect(self, grid: Grid, face: Face | str, k: int, params: FlowParams) -> np.ndarray:
        f = grid.face(face) if isinstance(face, str) else face
        return self.b[f.name][k] - params.alpha * f.tangents[k][0]

    def normal_defect(self, grid: Grid, face: Face | str) -> np.ndarray:
        f = grid.face(face) if isinstance(face, str) else face
        return self.d[f.name] - f.normal[0]

    @property
    def sigma_in(self) -> np.ndarray:
        return self.rho_in - 1.0

    def scale_perturbation(self, s: float, grid: Grid, params: FlowParams) -> "ProblemData":
        """Scale the deviation from the background data by ``s``."""
        bg = ProblemData.background(grid, params)
        return ProblemData(
            f=s * self.f,
            b={
                name: tuple(
                    bgv + s * (v - bgv) for v, bgv in zip(vals, bg.b[name])
                )
                for name, vals in self.b.items()
            },
            d={name: bg.d[name] + s * (v - bg.d[name]) for name, v in self.d.items()},
            rho_in=1.0 + s * (self.rho_in - 1.0),
            g={name: s * v for name, v in self.g.items()},
            T1={name: s * v for name, v in self.T1.items()},
        )

    # -- validation ----------------------------------------------------------

    def validate(self, grid: Grid) -> None:
        """Shape and sign checks.

        The normal datum must be a genuine inflow/outflow pattern:
        negative on the inflow face, positive on the outflow face and
        identically zero on the impermeable walls.
        """
        if self.f.shape != (grid.dim,) + grid.shape:
            raise ValueError(
                f"force shape {self.f.shape} != {(grid.dim,) + grid.shape}"
            )
        for f in grid.faces:
            want = grid.face_coords(f)[0].shape
            for arrs, label in ((self.d, "d"), (self.g, "g"), (self.T1, "T1")):
                if f.name not in arrs:
                    raise ValueError(f"missing {label} data on face {f.name!r}")
                if np.asarray(arrs[f.name]).shape != want:
                    raise ValueError(
                        f"{label}[{f.name!r}] has shape "
                        f"{np.asarray(arrs[f.name]).shape}, expected {want}"
                    )
            if len(self.b.get(f.name, ())) != len(f.tangents):
                raise ValueError(
                    f"b[{f.name!r}] must carry {len(f.tangents)} tangential entries"
                )
        if np.any(self.d["in"] >= 0):
            raise ValueError("normal datum must be negative on the inflow face")
        if np.any(self.d["out"] <= 0):
            raise ValueError("normal datum must be positive on the outflow face")
        for f in grid.wall_faces():
            if np.any(self.d[f.name] != 0.0):
                raise ValueError(f"normal datum must vanish on wall face {f.name!r}")
        if np.any(self.rho_in <= 0):
            raise ValueError("inflow density must be positive")


def data_size(data: ProblemData, grid: Grid, params: FlowParams, p: float) -> float:
    """Aggregate size of the perturbation content of a data set.

    Volume force in ``L^p``, the inflow density deviation in the trace
    norm of the inflow face, and every boundary datum (measured against
    its background value) in boundary ``L^p`` plus tangential first
    derivatives.  Zero exactly for the background data.
    """
    total = lp_norm(data.f, grid, p)
    for face in grid.faces:
        for k in range(len(face.tangents)):
            total += trace_norm(data.slip_defect(grid, face, k, params), grid, face, p)
        total += trace_norm(data.normal_defect(grid, face), grid, face, p)
        total += trace_norm(data.g[face.name], grid, face, p)
        total += trace_norm(data.T1[face.name], grid, face, p)
    total += trace_norm(data.sigma_in, grid, "in", p)
    return total
