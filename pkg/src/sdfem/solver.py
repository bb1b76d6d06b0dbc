"""Direct and iterative solves for the SDFEM system and its adjoint.

The discrete Green's function at an interior node is obtained from the
transposed factorization of the same matrix, which keeps the discrete
duality a_sd(v, G) = v(x*) exact up to solver residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import FEFunction, SparseSystem

RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class SolveReport:
    residual_inf: float
    iterations: int
    method: str

    def check(self, rhs_scale: float) -> None:
        if not np.isfinite(self.residual_inf) or self.residual_inf > RESIDUAL_RTOL * (1.0 + rhs_scale):
            raise RuntimeError(
                f"solver residual {self.residual_inf:.3e} exceeds tolerance "
                f"({self.method}, {self.iterations} iterations)"
            )


class SystemSolver:
    """Holds one factorization; serves primal and transposed (Green) solves."""

    def __init__(self, system: SparseSystem, method: str = "direct"):
        if system.dimension < 1:
            raise ValueError("system has no interior degrees of freedom")
        if method not in ("direct", "iterative"):
            raise ValueError(f"unknown method {method!r}")
        self.system = system
        self.method = method
        self._csc = system.matrix.tocsc()
        self._lu = spla.splu(self._csc) if method == "direct" else None
        self._ilu = spla.spilu(self._csc, drop_tol=1e-6) if method == "iterative" else None

    def _solve_vec(self, rhs: np.ndarray, transpose: bool) -> tuple[np.ndarray, int]:
        if self.method == "direct":
            return self._lu.solve(rhs, trans="T" if transpose else "N"), 0
        mat = self._csc.T if transpose else self._csc
        prec_solve = (lambda r: self._ilu.solve(r, trans="T")) if transpose else self._ilu.solve
        prec = spla.LinearOperator(mat.shape, prec_solve)
        x, info = spla.bicgstab(mat, rhs, rtol=1e-12, atol=0.0, M=prec, maxiter=2000)
        if info != 0:
            raise RuntimeError(f"bicgstab failed to converge (info={info})")
        return x, int(info) if info > 0 else 1

    def _finish(self, rhs: np.ndarray, transpose: bool) -> tuple[FEFunction, SolveReport]:
        x, iters = self._solve_vec(rhs, transpose)
        mat = self.system.matrix.T if transpose else self.system.matrix
        residual = float(np.abs(mat @ x - rhs).max())
        report = SolveReport(residual_inf=residual, iterations=iters, method=self.method)
        report.check(float(np.abs(rhs).max()) if rhs.size else 0.0)
        return FEFunction.from_interior(self.system.mesh, x), report

    def solve(self) -> tuple[FEFunction, SolveReport]:
        return self._finish(self.system.load, transpose=False)

    def green(self, star_node: int) -> tuple[FEFunction, SolveReport]:
        dof = self.system.dof_of_node(star_node)  # rejects boundary nodes
        rhs = np.zeros(self.system.dimension)
        rhs[dof] = 1.0
        return self._finish(rhs, transpose=True)


def solve_system(system: SparseSystem, method: str = "direct") -> tuple[FEFunction, SolveReport]:
    """Solve a_sd(u, phi_i) = F[i] for the discrete solution."""
    return SystemSolver(system, method).solve()


def green_function(system: SparseSystem, star_node: int,
                   method: str = "direct") -> tuple[FEFunction, SolveReport]:
    """Discrete Green's function: solve A^T G = e_star for an interior node."""
    return SystemSolver(system, method).green(star_node)
