"""Stationary boundary density: (I - B) rho = rho0."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotConverged, SingularSystem

DIRECT_LIMIT = 50_000


@dataclass(frozen=True)
class SolveReport:
    method: str
    iterations: int
    residual: float
    wall_time: float

    def as_dict(self) -> dict:
        return {"method": self.method, "iterations": self.iterations, "residual": self.residual, "wall_time": self.wall_time}


def _as_matrix(B):
    return B.matrix if hasattr(B, "matrix") else sp.csr_matrix(B)


def _residual(B, rho, rho0) -> float:
    den = np.linalg.norm(rho0)
    r = rho - B @ rho - rho0
    return float(np.linalg.norm(r) / den) if den > 0 else float(np.linalg.norm(r))


def solve_stationary(
    B,
    rho0: np.ndarray,
    method: str = "auto",
    tol: float = 1e-10,
    max_iter: int = 2000,
    precondition: bool = False,
) -> tuple[np.ndarray, SolveReport]:
    """Solve (I - B) rho = rho0 with sparse LU ("direct") or BiCGStab ("iterative").

    The iterative route only touches B through matrix-vector products.
    """
    B = _as_matrix(B)
    rho0 = np.asarray(rho0, dtype=float)
    n = B.shape[0]
    if method == "auto":
        method = "direct" if n < DIRECT_LIMIT else "iterative"
    t0 = time.perf_counter()
    if not np.any(rho0):
        return np.zeros(n), SolveReport(method, 0, 0.0, 0.0)
    if method == "direct":
        A = (sp.identity(n, format="csc") - B.tocsc()).tocsc()
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularSystem(f"I - B is singular: {exc}") from exc
        piv = np.abs(lu.U.diagonal())
        if piv.size and piv.min() <= 1e-12 * max(piv.max(), 1.0):
            raise SingularSystem("I - B is numerically singular (spectral radius of B reaches 1)")
        rho = lu.solve(rho0)
        its = 1
    elif method == "iterative":
        op = spla.LinearOperator((n, n), matvec=lambda x: x - B @ x, dtype=float)
        M = None
        if precondition:
            dinv = 1.0 / (1.0 - B.diagonal())
            M = spla.LinearOperator((n, n), matvec=lambda x: dinv * x, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        rho, info = spla.bicgstab(op, rho0, rtol=0.5 * tol, atol=0.0, maxiter=max_iter, M=M, callback=cb)
        if info < 0 or (info == 0 and _residual(B, rho, rho0) > tol):
            # Krylov breakdown, common when the source excites a single direction
            method = "iterative-gmres"
            rho, info = spla.lgmres(op, rho0, rtol=0.5 * tol, atol=0.0, maxiter=max_iter, M=M, callback=cb)
        if info != 0:
            raise NotConverged(f"iterative solve stopped after {count[0]} iterations (info={info})")
        its = count[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(rho)):
        raise SingularSystem("solution is not finite")
    res = _residual(B, rho, rho0)
    if method == "direct" and res > max(tol, 1e-8):
        raise SingularSystem(f"direct solve residual {res:.3e}; system is ill-conditioned")
    if method.startswith("iterative") and res > tol * 1.0001:
        raise NotConverged(f"residual {res:.3e} above tolerance {tol:.1e}")
    return rho, SolveReport(method, its, res, time.perf_counter() - t0)


def neumann_partial(B, rho0: np.ndarray, n_terms: int) -> np.ndarray:
    """Sum_{k=0}^{n} B^k rho0."""
    if n_terms < 0:
        raise ValueError("n_terms must be >= 0")
    B = _as_matrix(B)
    term = np.asarray(rho0, dtype=float).copy()
    total = term.copy()
    for _ in range(n_terms):
        term = B @ term
        total += term
    return total
