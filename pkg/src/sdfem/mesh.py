"""Shishkin triangular meshes on the unit square.

The mesh is tensor-product and piecewise uniform: the x direction splits
into a coarse band [0, 1-lambda_x] (N/2 intervals) and a fine band near
the outflow boundary x=1 (N/2 intervals); the y direction has fine bands
of width lambda_y along y=0 and y=1 (N/3 intervals each) around a coarse
middle band.  Every rectangular cell is cut along its north-west/south-east
diagonal into a lower-left triangle (kind 1) and an upper-right triangle
(kind 2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

RHO_DEFAULT = 2.5


class Region(enum.IntEnum):
    """Subdomain labels: smooth part, outflow layer, characteristic layers, corner."""

    S = 0
    X = 1
    Y = 2
    XY = 3

    @property
    def label(self) -> str:
        return _REGION_LABELS[self]


_REGION_LABELS = {Region.S: "s", Region.X: "x", Region.Y: "y", Region.XY: "xy"}
REGION_FROM_LABEL = {v: k for k, v in _REGION_LABELS.items()}


@dataclass(frozen=True)
class TransitionParams:
    """Mesh transition parameters and the inputs that produced them."""

    epsilon: float
    beta: float
    n: int
    rho: float
    lambda_x: float
    lambda_y: float
    capped_x: bool
    capped_y: bool


def transition_params(epsilon: float, beta: float, n: int, rho: float = RHO_DEFAULT,
                      strict: bool = True) -> TransitionParams:
    """Evaluate the transition parameters for an N-interval mesh.

    lambda_x = min(1/2, rho*(eps/beta)*ln N) and
    lambda_y = min(1/3, rho*sqrt(eps)*ln N), evaluated directly in double
    precision.  N must be a positive multiple of 6.  Strict mode enforces
    the eps <= 1/N regime and rejects capped min clauses, where the mesh
    degenerates to a uniform one.
    """
    if n < 6 or n % 6 != 0:
        raise ValueError(f"N must be a positive multiple of 6, got {n}")
    if epsilon <= 0 or beta <= 0:
        raise ValueError("epsilon and beta must be positive")
    log_n = np.log(float(n))
    raw_x = rho * (epsilon / beta) * log_n
    raw_y = rho * np.sqrt(epsilon) * log_n
    capped_x = raw_x >= 0.5
    capped_y = raw_y >= 1.0 / 3.0
    if strict:
        if epsilon > 1.0 / n:
            raise ValueError(
                f"strict mode requires epsilon <= 1/N (epsilon={epsilon}, N={n}); "
                "pass strict=False to explore outside the regime"
            )
        if capped_x or capped_y:
            raise ValueError(
                "strict mode rejects capped transition parameters "
                f"(lambda_x raw={raw_x:.6g}, lambda_y raw={raw_y:.6g})"
            )
    return TransitionParams(
        epsilon=epsilon, beta=beta, n=n, rho=rho,
        lambda_x=0.5 if capped_x else raw_x,
        lambda_y=1.0 / 3.0 if capped_y else raw_y,
        capped_x=bool(capped_x), capped_y=bool(capped_y),
    )


def classify_point(transition: TransitionParams, x: float, y: float) -> Region:
    """Subdomain of a point of the closed unit square.

    The four subdomains overlap on the transition lines; ties resolve to
    the refined side (X/XY for x = 1-lambda_x, Y/XY for y = lambda_y or
    y = 1-lambda_y), so barycenters, which never sit on a transition line,
    classify unambiguously.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"point ({x}, {y}) outside the unit square")
    in_x_layer = x >= 1.0 - transition.lambda_x
    in_y_layer = y <= transition.lambda_y or y >= 1.0 - transition.lambda_y
    if in_x_layer:
        return Region.XY if in_y_layer else Region.X
    return Region.Y if in_y_layer else Region.S


@dataclass(frozen=True)
class Triangle:
    """View of one element: kind 1 or 2, owning cell, vertex node ids, region."""

    index: int
    kind: int
    cell: tuple[int, int]
    vertices: tuple[int, int, int]
    region: Region
    coords: np.ndarray  # (3, 2)
    area: float


class ShishkinMesh:
    """Immutable triangulation; geometry is exposed as flat numpy arrays.

    Node (i, j) has id j*(N+1) + i.  Triangles are ordered cell by cell
    (j outer, i inner), kind 1 before kind 2, so element ids and assembly
    reductions are deterministic.
    """

    def __init__(self, transition: TransitionParams):
        n = transition.n
        self.transition = transition
        self.n = n
        lam_x, lam_y = transition.lambda_x, transition.lambda_y

        half, third = n // 2, n // 3
        # Per-band linspace: band endpoints are exact, interior points are
        # start + i*step (no cumulative drift).
        self.x_coords = np.concatenate([
            np.linspace(0.0, 1.0 - lam_x, half + 1),
            np.linspace(1.0 - lam_x, 1.0, half + 1)[1:],
        ])
        self.y_coords = np.concatenate([
            np.linspace(0.0, lam_y, third + 1),
            np.linspace(lam_y, 1.0 - lam_y, third + 1)[1:],
            np.linspace(1.0 - lam_y, 1.0, third + 1)[1:],
        ])
        # Nominal band widths (the h/H mesh sizes).
        self.coarse_hx = 2.0 * (1.0 - lam_x) / n
        self.fine_hx = 2.0 * lam_x / n
        self.coarse_hy = 3.0 * (1.0 - 2.0 * lam_y) / n
        self.fine_hy = 3.0 * lam_y / n

        self.n_nodes = (n + 1) ** 2
        self.n_triangles = 2 * n * n

        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        ii, jj = ii.T.ravel(), jj.T.ravel()  # j outer, i inner
        sw = jj * (n + 1) + ii
        se, nw, ne = sw + 1, sw + (n + 1), sw + (n + 2)

        verts = np.empty((2 * n * n, 3), dtype=np.int64)
        verts[0::2] = np.stack([sw, se, nw], axis=1)   # kind 1
        verts[1::2] = np.stack([nw, se, ne], axis=1)   # kind 2
        self.tri_vertices = verts
        self.tri_kind = np.tile(np.array([1, 2], dtype=np.int8), n * n)
        self.tri_cell = np.repeat(np.stack([ii, jj], axis=1), 2, axis=0)

        region = np.where(
            ii >= half,
            np.where((jj < third) | (jj >= 2 * third), Region.XY, Region.X),
            np.where((jj < third) | (jj >= 2 * third), Region.Y, Region.S),
        ).astype(np.int8)
        self.tri_region = np.repeat(region, 2)

        nodes_x = np.tile(self.x_coords, n + 1)
        nodes_y = np.repeat(self.y_coords, n + 1)
        self.node_coords = np.stack([nodes_x, nodes_y], axis=1)

        coords = self.node_coords[self.tri_vertices]  # (T, 3, 2)
        self.tri_coords = coords
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        self.tri_area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

        # Constant P1 basis gradients: grad phi_a = (dphi/dx, dphi/dy).
        grads = np.empty((self.n_triangles, 3, 2))
        two_a = 2.0 * self.tri_area
        for a in range(3):
            b_, c_ = (a + 1) % 3, (a + 2) % 3
            grads[:, a, 0] = (coords[:, b_, 1] - coords[:, c_, 1]) / two_a
            grads[:, a, 1] = (coords[:, c_, 0] - coords[:, b_, 0]) / two_a
        self.tri_grad = grads

        idx = np.arange(self.n_nodes)
        i_of = idx % (n + 1)
        j_of = idx // (n + 1)
        self.boundary_mask = (i_of == 0) | (i_of == n) | (j_of == 0) | (j_of == n)
        self.interior_nodes = idx[~self.boundary_mask]
        dof = np.full(self.n_nodes, -1, dtype=np.int64)
        dof[self.interior_nodes] = np.arange(self.interior_nodes.size)
        self.node_to_dof = dof

        for arr in (self.x_coords, self.y_coords, self.tri_vertices, self.tri_kind,
                    self.tri_cell, self.tri_region, self.node_coords, self.tri_coords,
                    self.tri_area, self.tri_grad, self.boundary_mask,
                    self.interior_nodes, self.node_to_dof):
            arr.setflags(write=False)

    def node_id(self, i: int, j: int) -> int:
        if not (0 <= i <= self.n and 0 <= j <= self.n):
            raise ValueError(f"node index ({i}, {j}) out of range for N={self.n}")
        return j * (self.n + 1) + i

    def node_ij(self, node: int) -> tuple[int, int]:
        return node % (self.n + 1), node // (self.n + 1)

    def cell_sizes(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-cell interval lengths (hx of column i, hy of row j)."""
        return np.diff(self.x_coords), np.diff(self.y_coords)

    def triangle(self, t: int) -> Triangle:
        return Triangle(
            index=t,
            kind=int(self.tri_kind[t]),
            cell=(int(self.tri_cell[t, 0]), int(self.tri_cell[t, 1])),
            vertices=tuple(int(v) for v in self.tri_vertices[t]),
            region=Region(int(self.tri_region[t])),
            coords=self.tri_coords[t],
            area=float(self.tri_area[t]),
        )

    def triangles(self):
        for t in range(self.n_triangles):
            yield self.triangle(t)


def build_mesh(n: int, transition: TransitionParams | None = None, *,
               epsilon: float | None = None, beta: float = 1.0,
               rho: float = RHO_DEFAULT, strict: bool = True) -> ShishkinMesh:
    """Construct the mesh for N intervals per direction.

    Either pass precomputed TransitionParams or the raw (epsilon, beta, rho)
    inputs.
    """
    if transition is None:
        if epsilon is None:
            raise ValueError("need either transition params or epsilon")
        transition = transition_params(epsilon, beta, n, rho, strict=strict)
    elif transition.n != n:
        raise ValueError(f"transition params built for N={transition.n}, mesh wants N={n}")
    return ShishkinMesh(transition)
