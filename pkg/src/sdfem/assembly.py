"""Streamline-diffusion system assembly on P1 triangles.

The discrete bilinear form is

    a_sd(u, v) = eps*(grad u, grad v) + (b*u_x, v) + (c*u, v)
                 + sum_K (b*u_x + c*u, delta_K * b * v_x)_K

(the -eps*Lap u residual term vanishes on P1 elements), with the
stabilization parameter delta_K = cstar/N on the smooth and characteristic
regions and 0 on the outflow regions.  All matrix entries are exact
element integrals; only the load vector uses quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Region, ShishkinMesh
from .problem import ProblemSpec
from .quadrature import map_to_triangle, triangle_rule

DELTA_REGIONS = (Region.S, Region.Y)


@dataclass(frozen=True)
class StabilizationConfig:
    """Stabilization constant; delta_K = c_star / N on the delta regions."""

    c_star: float = 0.25

    def __post_init__(self):
        if self.c_star < 0:
            raise ValueError("c_star must be nonnegative")


def stabilization_delta(region: Region, n: int, config: StabilizationConfig) -> float:
    """delta on one region: c_star/N on S and Y, zero on X and XY."""
    if n < 6:
        raise ValueError(f"N must be at least 6, got {n}")
    return config.c_star / n if region in DELTA_REGIONS else 0.0


def element_deltas(mesh: ShishkinMesh, config: StabilizationConfig) -> np.ndarray:
    """Per-triangle stabilization parameter."""
    on = (mesh.tri_region == Region.S) | (mesh.tri_region == Region.Y)
    return np.where(on, config.c_star / mesh.n, 0.0)


class FEFunction:
    """Piecewise-linear function given by nodal values on a Shishkin mesh.

    Members of the homogeneous finite element space carry zeros on the
    boundary; interpolants of general fields keep their boundary values.
    """

    def __init__(self, mesh: ShishkinMesh, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_nodes,):
            raise ValueError(f"expected {mesh.n_nodes} nodal values, got {values.shape}")
        self.mesh = mesh
        self.values = values

    @classmethod
    def zeros(cls, mesh: ShishkinMesh) -> "FEFunction":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_interior(cls, mesh: ShishkinMesh, interior: np.ndarray) -> "FEFunction":
        vals = np.zeros(mesh.n_nodes)
        vals[mesh.interior_nodes] = interior
        return cls(mesh, vals)

    def interior(self) -> np.ndarray:
        return self.values[self.mesh.interior_nodes]

    @property
    def zero_on_boundary(self) -> bool:
        return bool(np.all(self.values[self.mesh.boundary_mask] == 0.0))

    def element_values(self) -> np.ndarray:
        """Vertex values per triangle, shape (T, 3)."""
        return self.values[self.mesh.tri_vertices]

    def element_gradients(self) -> np.ndarray:
        """Constant per-triangle gradient, shape (T, 2)."""
        return np.einsum("ta,tad->td", self.element_values(), self.mesh.tri_grad)

    def at_nodes(self, i, j) -> float:
        return float(self.values[self.mesh.node_id(i, j)])

    def __call__(self, x: float, y: float) -> float:
        """Point evaluation (locates the containing cell and triangle)."""
        m = self.mesh
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise ValueError(f"point ({x}, {y}) outside the unit square")
        i = min(int(np.searchsorted(m.x_coords, x, side="right")) - 1, m.n - 1)
        j = min(int(np.searchsorted(m.y_coords, y, side="right")) - 1, m.n - 1)
        i, j = max(i, 0), max(j, 0)
        x0, x1 = m.x_coords[i], m.x_coords[i + 1]
        y0, y1 = m.y_coords[j], m.y_coords[j + 1]
        xi = (x - x0) / (x1 - x0)
        eta = (y - y0) / (y1 - y0)
        t = 2 * (j * m.n + i) + (1 if xi + eta > 1.0 else 0)
        lam = _barycentric(m.tri_coords[t], x, y)
        return float(np.dot(lam, self.values[m.tri_vertices[t]]))


def _barycentric(coords: np.ndarray, x: float, y: float) -> np.ndarray:
    mat = np.vstack([coords.T, np.ones(3)])
    return np.linalg.solve(mat, np.array([x, y, 1.0]))


@dataclass(frozen=True)
class SparseSystem:
    """Assembled SDFEM system on interior degrees of freedom."""

    matrix: sp.csr_matrix
    load: np.ndarray
    mesh: ShishkinMesh
    problem: ProblemSpec
    config: StabilizationConfig

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.mesh.interior_nodes

    def dof_of_node(self, node: int) -> int:
        dof = int(self.mesh.node_to_dof[node])
        if dof < 0:
            raise ValueError(f"node {node} is a boundary node")
        return dof


def _check_pair(mesh: ShishkinMesh, problem: ProblemSpec) -> None:
    tr = mesh.transition
    if tr.epsilon != problem.epsilon or tr.beta != problem.beta:
        raise ValueError(
            "mesh was built for (epsilon, beta)="
            f"({tr.epsilon}, {tr.beta}) but problem has "
            f"({problem.epsilon}, {problem.beta})"
        )


def _local_matrices(mesh: ShishkinMesh, problem: ProblemSpec,
                    config: StabilizationConfig) -> np.ndarray:
    """Exact 3x3 element matrices loc[t, a, b] = a_sd(phi_b, phi_a)|_K."""
    area = mesh.tri_area
    gx = mesh.tri_grad[:, :, 0]           # (T, 3)
    gy = mesh.tri_grad[:, :, 1]
    delta = element_deltas(mesh, config)
    eps, b, c = problem.epsilon, problem.b, problem.c

    diff = eps * area[:, None, None] * (
        gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]
    )
    conv = b * (area / 3.0)[:, None, None] * gx[:, None, :] * np.ones((1, 3, 1))
    mass = c * (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    stab = delta[:, None, None] * (
        b * b * area[:, None, None] * gx[:, :, None] * gx[:, None, :]
        + c * b * (area / 3.0)[:, None, None] * gx[:, :, None] * np.ones((1, 1, 3))
    )
    return diff + conv + mass + stab


def _eval_field(fn, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    vals = np.asarray(fn(x, y), dtype=float)
    if vals.shape != x.shape:  # non-vectorized callable
        vals = np.vectorize(fn)(x, y)
    return vals


def assemble_load(mesh: ShishkinMesh, problem: ProblemSpec,
                  config: StabilizationConfig, quadrature_degree: int = 4) -> np.ndarray:
    """Load vector over all nodes: F[i] = (f, phi_i) + sum_K (f, delta*b*phi_i_x)_K."""
    rule = triangle_rule(quadrature_degree)
    pts = map_to_triangle(rule, mesh.tri_coords)      # (T, nq, 2)
    fvals = _eval_field(problem.f, pts[:, :, 0], pts[:, :, 1])
    delta = element_deltas(mesh, config)
    # (f, phi_a)_K = area * sum_q w_q f_q lam_q[a]
    base = np.einsum("tq,qa,q,t->ta", fvals, rule.points, rule.weights, mesh.tri_area)
    favg = np.einsum("tq,q,t->t", fvals, rule.weights, mesh.tri_area)
    stab = (delta * problem.b * favg)[:, None] * mesh.tri_grad[:, :, 0]
    load = np.zeros(mesh.n_nodes)
    np.add.at(load, mesh.tri_vertices, base + stab)
    return load


def assemble_system(mesh: ShishkinMesh, problem: ProblemSpec,
                    config: StabilizationConfig | None = None,
                    load_quadrature_degree: int = 4) -> SparseSystem:
    """Assemble matrix and load on interior nodes (Dirichlet rows eliminated)."""
    config = config or StabilizationConfig()
    _check_pair(mesh, problem)
    loc = _local_matrices(mesh, problem, config)

    rows = np.repeat(mesh.tri_vertices, 3, axis=1).ravel()
    cols = np.tile(mesh.tri_vertices, (1, 3)).ravel()
    full = sp.coo_matrix(
        (loc.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)
    ).tocsr()
    interior = mesh.interior_nodes
    matrix = full[interior][:, interior].tocsr()
    matrix.sum_duplicates()

    load = assemble_load(mesh, problem, config, load_quadrature_degree)[interior]
    return SparseSystem(matrix=matrix, load=load, mesh=mesh,
                        problem=problem, config=config)


def bilinear_apply(mesh: ShishkinMesh, problem: ProblemSpec,
                   config: StabilizationConfig, u: FEFunction, v: FEFunction) -> float:
    """a_sd(u, v) from exact per-element integrals.

    Works for any pair of piecewise linears on the mesh (boundary values
    need not vanish); consistent with the assembled matrix on interior
    nodal vectors.
    """
    if u.mesh is not mesh or v.mesh is not mesh:
        raise ValueError("u and v must live on the assembly mesh")
    area = mesh.tri_area
    delta = element_deltas(mesh, config)
    eps, b, c = problem.epsilon, problem.b, problem.c

    ul, vl = u.element_values(), v.element_values()
    ug, vg = u.element_gradients(), v.element_gradients()
    su, sv = ul.sum(axis=1), vl.sum(axis=1)

    diff = eps * area * (ug[:, 0] * vg[:, 0] + ug[:, 1] * vg[:, 1])
    conv = b * ug[:, 0] * (area / 3.0) * sv
    mass = c * (area / 12.0) * ((ul * vl).sum(axis=1) + su * sv)
    stab = delta * (b * b * ug[:, 0] * vg[:, 0] * area
                    + c * b * vg[:, 0] * (area / 3.0) * su)
    return float((diff + conv + mass + stab).sum())
