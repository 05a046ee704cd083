"""Sparse direct solvers for the elliptic blocks of the channel system.

Three operator families live here, all on the vertex-centered grid with
ghost-node elimination and second-order stencils:

* a scalar kernel  ``c0 w + c1 dw/dx1 - kappa Lap w``  with per-face
  Robin closures ``kappa dw/dn + L w = r`` (heat equations, and the
  ``(-Lap + 1)`` lift used for dual norms);
* the same kernel with pure Neumann flux data, made solvable by a
  symmetric mean-constraint (KKT) row whose multiplier *is* the
  compatibility projection of the data — it is reported, never hidden;
* a vector kernel  ``c1 du/dx1 - mu Lap u - beta grad div u``  with the
  normal component pinned on every face and tangential slip
  ``mu du_t/dn (outward) + alpha u_t = B`` imposed through ghosts.  With
  ``beta = lam`` this is the elasticity operator of the velocity lemma;
  with ``beta = lam + mu/3`` and ``c1 = 1`` it is the momentum block.

Factorizations are cached on the grid keyed by operator coefficients, so
iterating schemes pay assembly once.

The potential/solenoidal splitting is a weighted least-squares problem
in the *same* discrete gradient used by the norm layer, which makes the
two parts orthogonal to solver precision rather than to truncation
order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, grad_matrix

__all__ = [
    "ScalarOperator",
    "solve_robin_scalar",
    "solve_riesz_lift",
    "NeumannResult",
    "solve_neumann_poisson",
    "VectorOperator",
    "solve_lame",
    "HelmholtzResult",
    "helmholtz_decompose",
]


# ---------------------------------------------------------------------------
# scalar kernel
# ---------------------------------------------------------------------------


class ScalarOperator:
    """``c0 w + c1 dw/dx1 - kappa Lap w`` on a planar channel grid.

    ``L`` maps face names to Robin weights; the per-solve data supplies
    the right-hand sides ``r`` of ``kappa dw/dn + L w = r``.  Pure
    Neumann data (all L zero, c0 = c1 = 0) makes the operator singular;
    use :func:`solve_neumann_poisson` for that case.
    """

    def __init__(self, grid: Grid, *, c0: float, c1: float, kappa: float,
                 L: dict[str, float]):
        if grid.dim != 2:
            raise NotImplementedError("scalar kernel is implemented for planar grids")
        if kappa <= 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        self.grid = grid
        self.c0 = float(c0)
        self.c1 = float(c1)
        self.kappa = float(kappa)
        self.L = {f.name: float(L.get(f.name, 0.0)) for f in grid.faces}
        self._assemble()

    # Ghost elimination for a face along `axis` at the low/high end:
    #   low:  w_ghost = w_inner + (2h/kappa) (r - L w_face)
    #   high: w_ghost = w_inner + (2h/kappa) (r - L w_face)
    # (identical form; the sign difference sits in the normal direction).
    # Substituting into the centered Laplacian and, on axis 0, into the
    # centered convection stencil yields the matrix/right-hand-side
    # couplings coded below.

    def _assemble(self) -> None:
        g = self.grid
        n1, n2 = g.n
        h1, h2 = g.h
        N = g.num_nodes
        kap, c0, c1 = self.kappa, self.c0, self.c1

        def ix(i: int, j: int) -> int:
            return i * (n2 + 1) + j

        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []
        # rhs couplings: list of (node_row, face_name, trace_index, coeff)
        bc_coup: list[tuple[int, str, int, float]] = []

        def add(r: int, c: int, v: float) -> None:
            rows.append(r)
            cols.append(c)
            vals.append(v)

        L = self.L
        for i in range(n1 + 1):
            for j in range(n2 + 1):
                r = ix(i, j)
                add(r, r, c0)

                # --- axis 0: convection + x-part of the Laplacian
                if 0 < i < n1:
                    add(r, ix(i + 1, j), c1 / (2 * h1) - kap / h1**2)
                    add(r, ix(i - 1, j), -c1 / (2 * h1) - kap / h1**2)
                    add(r, r, 2 * kap / h1**2)
                elif i == 0:
                    add(r, ix(1, j), -2 * kap / h1**2)
                    add(r, r, 2 * kap / h1**2 + 2 * L["in"] / h1 + c1 * L["in"] / kap)
                    bc_coup.append((r, "in", j, 2 / h1 + c1 / kap))
                else:  # i == n1
                    add(r, ix(n1 - 1, j), -2 * kap / h1**2)
                    add(r, r, 2 * kap / h1**2 + 2 * L["out"] / h1 - c1 * L["out"] / kap)
                    bc_coup.append((r, "out", j, 2 / h1 - c1 / kap))

                # --- axis 1: y-part of the Laplacian
                if 0 < j < n2:
                    add(r, ix(i, j + 1), -kap / h2**2)
                    add(r, ix(i, j - 1), -kap / h2**2)
                    add(r, r, 2 * kap / h2**2)
                elif j == 0:
                    add(r, ix(i, 1), -2 * kap / h2**2)
                    add(r, r, 2 * kap / h2**2 + 2 * L["bottom"] / h2)
                    bc_coup.append((r, "bottom", i, 2 / h2))
                else:  # j == n2
                    add(r, ix(i, n2 - 1), -2 * kap / h2**2)
                    add(r, r, 2 * kap / h2**2 + 2 * L["top"] / h2)
                    bc_coup.append((r, "top", i, 2 / h2))

        self.matrix = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
        self._bc_coup = bc_coup
        self._lu = None

    def _factor(self):
        if self._lu is None:
            self._lu = spla.splu(self.matrix.tocsc())
        return self._lu

    def rhs_vector(self, volume_rhs: np.ndarray,
                   robin_data: dict[str, np.ndarray] | None = None) -> np.ndarray:
        b = np.asarray(volume_rhs, dtype=float).ravel().copy()
        if robin_data:
            for r, name, k, coeff in self._bc_coup:
                data = robin_data.get(name)
                if data is not None:
                    b[r] += coeff * data[k]
        return b

    def solve(self, volume_rhs: np.ndarray,
              robin_data: dict[str, np.ndarray] | None = None) -> np.ndarray:
        # With c0 = 0 and no Robin weight anywhere, constants are in the
        # kernel for *any* c1: the convection ghost coupling enters scaled
        # by L and the boundary data, so it cannot pin the mean either.
        if self.c0 == 0 and all(v == 0 for v in self.L.values()):
            raise ValueError("operator is singular (pure Neumann); "
                             "use solve_neumann_poisson")
        sol = self._factor().solve(self.rhs_vector(volume_rhs, robin_data))
        return sol.reshape(self.grid.shape)


def _scalar_operator(grid: Grid, *, c0: float, c1: float, kappa: float,
                     L: dict[str, float]) -> ScalarOperator:
    key = ("scalar", c0, c1, kappa, tuple(sorted(
        (f.name, float(L.get(f.name, 0.0))) for f in grid.faces)))
    if key not in grid.cache:
        grid.cache[key] = ScalarOperator(grid, c0=c0, c1=c1, kappa=kappa, L=L)
    return grid.cache[key]


def solve_robin_scalar(grid: Grid, volume_rhs: np.ndarray,
                       robin_data: dict[str, np.ndarray] | None, *,
                       kappa: float, L: float | dict[str, float],
                       convection: float = 0.0, c0: float = 0.0) -> np.ndarray:
    """Solve ``c0 w + convection dw/dx1 - kappa Lap w = rhs`` with
    ``kappa dw/dn + L w = r`` on every face (``r`` from ``robin_data``,
    missing faces mean zero)."""
    if not isinstance(L, dict):
        L = {f.name: L for f in grid.faces}
    op = _scalar_operator(grid, c0=c0, c1=convection, kappa=kappa, L=L)
    return op.solve(volume_rhs, robin_data)


def solve_riesz_lift(grid: Grid, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(-Lap + 1) r = rhs`` with zero flux; the first-order norm
    of ``r`` is the discrete dual-space size of ``rhs``."""
    return solve_robin_scalar(grid, rhs, None, kappa=1.0, L=0.0, c0=1.0)


# ---------------------------------------------------------------------------
# pure Neumann Poisson with compatibility projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeumannResult:
    """Solution of the mean-constrained Neumann problem.

    ``defect`` is the raw incompatibility ``int rhs + oint r`` of the
    supplied data; ``multiplier`` ( = defect / |Omega| ) is the constant
    the projection subtracts from the volume source to make the discrete
    problem solvable.  A large defect is a data problem upstream, which
    is why both numbers are surfaced instead of being absorbed silently.
    """

    field: np.ndarray
    multiplier: float
    defect: float
    mean: float


def solve_neumann_poisson(grid: Grid, volume_rhs: np.ndarray,
                          flux_data: dict[str, np.ndarray], *,
                          kappa: float = 1.0, mean: float = 0.0) -> NeumannResult:
    """Solve ``-kappa Lap w = rhs`` with ``kappa dw/dn = r`` and a
    prescribed mean.

    The trapezoid row scaling makes the ghost-eliminated matrix
    symmetric, so the bordered system

        [ W A   w ] [ u  ]   [ W b          ]
        [ w^T   0 ] [ m  ] = [ mean |Omega| ]

    solves the least-squares-compatible problem exactly; the multiplier
    ``m`` shifts the volume source by a constant.
    """
    key = ("neumann", kappa)
    if key not in grid.cache:
        op = _scalar_operator(grid, c0=0.0, c1=0.0, kappa=kappa,
                              L={f.name: 0.0 for f in grid.faces})
        w = grid.volume_weights.ravel()
        A = sp.diags(w) @ op.matrix
        K = sp.bmat([[A, sp.csr_matrix(w[:, None])],
                     [sp.csr_matrix(w[None, :]), None]], format="csc")
        grid.cache[key] = (op, spla.splu(K), w)
    op, lu, w = grid.cache[key]

    b = op.rhs_vector(volume_rhs, flux_data)
    rhs_full = np.concatenate([w * b, [mean * grid.channel.volume]])
    sol = lu.solve(rhs_full)
    field = sol[:-1].reshape(grid.shape)
    multiplier = float(sol[-1])

    flux_total = sum(
        grid.integrate_face(f, np.asarray(flux_data.get(f.name, 0.0)))
        if f.name in flux_data else 0.0
        for f in grid.faces
    )
    defect = float(grid.integrate(np.asarray(volume_rhs)) + flux_total)
    return NeumannResult(field=field, multiplier=multiplier, defect=defect,
                         mean=float(grid.integrate(field) / grid.channel.volume))


# ---------------------------------------------------------------------------
# vector kernel (elasticity / momentum block)
# ---------------------------------------------------------------------------


class VectorOperator:
    """``c1 du/dx1 - mu Lap u - beta grad div u`` with impermeable faces
    and tangential slip.

    Boundary closure, face by face (planar channel):

    * normal components are pinned to zero on their faces, corners on
      both;
    * the tangential component gets a ghost from the slip condition; the
      cross-derivative term of the stress drops there because the normal
      component vanishes identically *along* the face;
    * the mixed ``grad div`` stencil at a face needs the normal
      derivative of the tangential component one row in: by default it
      uses the second-order one-sided formula ("extrapolate").  The
      "reflect" mode replaces it at the inflow face with the
      antisymmetric-image value, which is what a flow continued oddly
      across that face would see; the doubling identity in the tests
      runs in that mode.
    """

    def __init__(self, grid: Grid, *, mu: float, beta: float, conv: float,
                 alpha: float, normal_ghost: str = "extrapolate"):
        if grid.dim != 2:
            raise NotImplementedError("vector kernel is implemented for planar grids")
        if normal_ghost not in ("extrapolate", "reflect"):
            raise ValueError(f"unknown normal_ghost mode {normal_ghost!r}")
        if mu <= 0:
            raise ValueError(f"mu must be positive, got {mu}")
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.grid = grid
        self.mu = float(mu)
        self.beta = float(beta)
        self.conv = float(conv)
        self.alpha = float(alpha)
        self.normal_ghost = normal_ghost
        self._assemble()

    def _assemble(self) -> None:
        g = self.grid
        n1, n2 = g.n
        h1, h2 = g.h
        N = g.num_nodes
        mu, beta, conv, alpha = self.mu, self.beta, self.conv, self.alpha

        def ix(c: int, i: int, j: int) -> int:
            return c * N + i * (n2 + 1) + j

        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []
        bc_coup: list[tuple[int, str, int, float]] = []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        def dy_oneside(c, i, j_face):
            """(node, coeff) pairs of d/dx2 of component c at a wall node."""
            if j_face == 0:
                return [(ix(c, i, 0), -3 / (2 * h2)), (ix(c, i, 1), 4 / (2 * h2)),
                        (ix(c, i, 2), -1 / (2 * h2))]
            return [(ix(c, i, n2), 3 / (2 * h2)), (ix(c, i, n2 - 1), -4 / (2 * h2)),
                    (ix(c, i, n2 - 2), 1 / (2 * h2))]

        def dx_at_end(c, i_face, j):
            """(node, coeff) pairs of d/dx1 of component c at an end node."""
            if self.normal_ghost == "reflect" and i_face == 0:
                # odd image of the tangential component across the inflow
                # face; the outflow face keeps the one-sided closure, which
                # is what the doubled reference problem uses there
                return [(ix(c, 1, j), 1 / h1)]
            if i_face == 0:
                return [(ix(c, 0, j), -3 / (2 * h1)), (ix(c, 1, j), 4 / (2 * h1)),
                        (ix(c, 2, j), -1 / (2 * h1))]
            return [(ix(c, n1, j), 3 / (2 * h1)), (ix(c, n1 - 1, j), -4 / (2 * h1)),
                    (ix(c, n1 - 2, j), 1 / (2 * h1))]

        # ---- component 1 rows -------------------------------------------
        for i in range(n1 + 1):
            for j in range(n2 + 1):
                r = ix(0, i, j)
                if i == 0 or i == n1:
                    add(r, r, 1.0)  # normal component pinned on in/out
                    continue
                # streamwise terms are centered for every remaining row
                add(r, ix(0, i + 1, j), conv / (2 * h1) - (mu + beta) / h1**2)
                add(r, ix(0, i - 1, j), -conv / (2 * h1) - (mu + beta) / h1**2)
                add(r, r, 2 * (mu + beta) / h1**2)
                if 0 < j < n2:
                    add(r, ix(0, i, j + 1), -mu / h2**2)
                    add(r, ix(0, i, j - 1), -mu / h2**2)
                    add(r, r, 2 * mu / h2**2)
                    # -beta d2(u2)/dx1 dx2, centered both ways
                    cmix = -beta / (4 * h1 * h2)
                    add(r, ix(1, i + 1, j + 1), cmix)
                    add(r, ix(1, i - 1, j - 1), cmix)
                    add(r, ix(1, i + 1, j - 1), -cmix)
                    add(r, ix(1, i - 1, j + 1), -cmix)
                else:
                    face = "bottom" if j == 0 else "top"
                    jin = 1 if j == 0 else n2 - 1
                    # slip ghost in the mu Lap part
                    add(r, ix(0, i, jin), -2 * mu / h2**2)
                    add(r, r, 2 * mu / h2**2 + 2 * alpha / h2)
                    bc_coup.append((r, face, i, 2 / h2))
                    # -beta d/dx1 (d u2/dx2), one-sided vertical derivative
                    for node, cf in dy_oneside(1, i + 1, j):
                        add(r, node, -beta * cf / (2 * h1))
                    for node, cf in dy_oneside(1, i - 1, j):
                        add(r, node, beta * cf / (2 * h1))

        # ---- component 2 rows -------------------------------------------
        for i in range(n1 + 1):
            for j in range(n2 + 1):
                r = ix(1, i, j)
                if j == 0 or j == n2:
                    add(r, r, 1.0)  # normal component pinned on the walls
                    continue
                # vertical terms are centered for every remaining row
                add(r, ix(1, i, j + 1), -(mu + beta) / h2**2)
                add(r, ix(1, i, j - 1), -(mu + beta) / h2**2)
                add(r, r, 2 * (mu + beta) / h2**2)
                if 0 < i < n1:
                    add(r, ix(1, i + 1, j), conv / (2 * h1) - mu / h1**2)
                    add(r, ix(1, i - 1, j), -conv / (2 * h1) - mu / h1**2)
                    add(r, r, 2 * mu / h1**2)
                    cmix = -beta / (4 * h1 * h2)
                    add(r, ix(0, i + 1, j + 1), cmix)
                    add(r, ix(0, i - 1, j - 1), cmix)
                    add(r, ix(0, i + 1, j - 1), -cmix)
                    add(r, ix(0, i - 1, j + 1), -cmix)
                else:
                    face = "in" if i == 0 else "out"
                    iin = 1 if i == 0 else n1 - 1
                    add(r, ix(1, iin, j), -2 * mu / h1**2)
                    add(r, r, 2 * mu / h1**2 + 2 * alpha / h1)
                    bc_coup.append((r, face, j, 2 / h1))
                    # convection through the slip ghost:
                    #   du2/dx1 = +-(alpha u2 - B)/mu  (+ at inflow, - at outflow)
                    sgn = 1.0 if i == 0 else -1.0
                    add(r, r, sgn * conv * alpha / mu)
                    bc_coup.append((r, face, j, sgn * conv / mu))
                    # -beta d/dx2 (d u1/dx1) with the mode-dependent stencil
                    for node, cf in dx_at_end(0, i, j + 1):
                        add(r, node, -beta * cf / (2 * h2))
                    for node, cf in dx_at_end(0, i, j - 1):
                        add(r, node, beta * cf / (2 * h2))

        self.matrix = sp.csr_matrix((vals, (rows, cols)), shape=(2 * N, 2 * N))
        self._bc_coup = bc_coup
        self._dirichlet1 = [(0, j) for j in range(n2 + 1)] + [(n1, j) for j in range(n2 + 1)]
        self._lu = None

    def _factor(self):
        if self._lu is None:
            self._lu = spla.splu(self.matrix.tocsc())
        return self._lu

    def solve(self, force: np.ndarray,
              slip_data: dict[str, np.ndarray]) -> np.ndarray:
        """Solve for the stacked velocity, shape ``(2,) + grid.shape``.

        ``slip_data[face]`` is the tangential datum B on that face; the
        normal components are held at zero.
        """
        g = self.grid
        N = g.num_nodes
        b = np.asarray(force, dtype=float).reshape(2, -1).copy()
        # Dirichlet rows carry no force
        b[0].reshape(g.shape)[0, :] = 0.0
        b[0].reshape(g.shape)[-1, :] = 0.0
        b[1].reshape(g.shape)[:, 0] = 0.0
        b[1].reshape(g.shape)[:, -1] = 0.0
        b = b.ravel()
        for r, name, k, coeff in self._bc_coup:
            data = slip_data.get(name)
            if data is not None:
                b[r] += coeff * data[k]
        u = self._factor().solve(b).reshape((2,) + g.shape)
        # pinned normal components are exact, not up to LU roundoff
        u[0][0, :] = 0.0
        u[0][-1, :] = 0.0
        u[1][:, 0] = 0.0
        u[1][:, -1] = 0.0
        return u


def solve_lame(grid: Grid, force: np.ndarray, slip_data: dict[str, np.ndarray], *,
               mu: float, lam: float, alpha: float, grad_div: float | None = None,
               convection: float = 0.0,
               normal_ghost: str = "extrapolate") -> np.ndarray:
    """Impermeable-slip solve of the elasticity/momentum operator.

    Defaults give the plain elasticity operator
    ``-mu Lap u - lam grad div u``; pass ``grad_div=lam + mu/3`` and
    ``convection=1`` for the momentum block of the linearized flow.
    """
    beta = lam if grad_div is None else grad_div
    key = ("vector", mu, beta, convection, alpha, normal_ghost)
    if key not in grid.cache:
        grid.cache[key] = VectorOperator(grid, mu=mu, beta=beta, conv=convection,
                                         alpha=alpha, normal_ghost=normal_ghost)
    return grid.cache[key].solve(force, slip_data)


# ---------------------------------------------------------------------------
# potential / solenoidal splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HelmholtzResult:
    phi: np.ndarray
    potential: np.ndarray
    residual: np.ndarray
    orthogonality: float

    @property
    def parts(self) -> tuple[np.ndarray, np.ndarray]:
        return self.potential, self.residual


def helmholtz_decompose(u: np.ndarray, grid: Grid) -> HelmholtzResult:
    """Split ``u = grad phi + A`` with ``A`` weighted-L2-orthogonal to
    every discrete gradient.

    phi solves the normal equations ``G^T W G phi = G^T W u`` (G is the
    stacked gradient matrix, W the trapezoid weights), pinned to zero
    mean through a bordered row.  Orthogonality then holds to
    factorization precision by construction, and is reported.
    """
    g = grid
    key = ("helmholtz",)
    if key not in g.cache:
        W = sp.diags(g.volume_weights.ravel())
        Gs = [grad_matrix(g, a) for a in range(g.dim)]
        M = sum(Ga.T @ W @ Ga for Ga in Gs).tocsr()
        w = g.volume_weights.ravel()
        K = sp.bmat([[M, sp.csr_matrix(w[:, None])],
                     [sp.csr_matrix(w[None, :]), None]], format="csc")
        g.cache[key] = (spla.splu(K), Gs, w)
    lu, Gs, w = g.cache[key]

    u = np.asarray(u, dtype=float)
    rhs = np.zeros(g.num_nodes + 1)
    W = g.volume_weights.ravel()
    for a, Ga in enumerate(Gs):
        rhs[:-1] += Ga.T @ (W * u[a].ravel())
    sol = lu.solve(rhs)
    phi = sol[:-1]
    potential = np.stack([(Ga @ phi).reshape(g.shape) for Ga in Gs])
    residual = u - potential
    orth = float(sum(
        np.sum(g.volume_weights * potential[a] * residual[a]) for a in range(g.dim)
    ))
    return HelmholtzResult(phi=phi.reshape(g.shape), potential=potential,
                           residual=residual, orthogonality=orth)
