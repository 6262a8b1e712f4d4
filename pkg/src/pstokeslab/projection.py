"""Discrete Helmholtz-Leray projection and Bogovskii operator.

The Helmholtz potential G_v solves the weak Neumann problem
(grad G, grad xi) = (v, grad xi) with zero-mean gauge, which with the
adjoint-pair operators becomes the linear system

    (A G + G A) = -div v,      A = D D^T,

solved exactly by diagonalising A once per grid (fast diagonalisation).
The projected field v - grad G is divergence-free and orthogonal to the
gradient part to machine precision.

The Bogovskii operator returns the minimal-gradient-energy right inverse
of the divergence: minimise ||grad w||^2 subject to div w = g, realised
as a KKT saddle system.  Two kernels need a gauge:

  * multipliers are defined up to constants (ker of the scalar gradient),
  * per-component checkerboard fields (-1)^(i+j) carry zero gradient
    energy and are divergence-free, so the minimiser is defined up to
    them.

Both are removed by rank-one/rank-two regularisation blocks, which pins
the solution with zero checkerboard content and a mean-free multiplier.
The saddle matrix is factorised once per grid (sparse LU) and reused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (
    Grid,
    ScalarField,
    TensorField,
    VectorField,
    div_tensor,
    div_vec_values,
    grad_scalar_values,
    lp_norm,
)

__all__ = [
    "HelmholtzProjector",
    "BogovskiiOperator",
    "HelmholtzParts",
    "SolverError",
    "MeanFreeError",
]


class SolverError(RuntimeError):
    """A linear solve failed to meet its residual tolerance."""


class MeanFreeError(ValueError):
    """Input to the Bogovskii operator is not discretely mean-free."""


@dataclass
class HelmholtzParts:
    div_free: VectorField
    gradient: VectorField
    potential: ScalarField


class HelmholtzProjector:
    """L^2-orthogonal splitting into divergence-free and gradient parts."""

    def __init__(self, grid: Grid, tol: float = 1e-10):
        self.grid = grid
        self.tol = tol
        A = grid.diff_1d @ grid.diff_1d.T
        lam, U = np.linalg.eigh(A)
        lam[0] = 0.0  # constant mode, exact kernel
        self._lam = lam
        self._U = U
        den = lam[:, None] + lam[None, :]
        den[0, 0] = 1.0
        self._den = den

    # -- array-level core ---------------------------------------------
    def solve_neumann(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (A G + G A) = rhs with zero-mean gauge; rhs mean-free."""
        U = self._U
        c = U.T @ rhs @ U
        c /= self._den
        c[0, 0] = 0.0
        return U @ c @ U.T

    def project_values(self, v: np.ndarray):
        D = self.grid.diff_1d
        G = self.solve_neumann(-div_vec_values(D, v))
        v_grad = grad_scalar_values(D, G)
        return v - v_grad, v_grad, G

    # -- field-level API ----------------------------------------------
    def leray_project(self, v: VectorField) -> HelmholtzParts:
        """Split v = div_free + gradient; potential has zero mean."""
        if v.grid != self.grid:
            raise ValueError("field lives on a different grid")
        if not np.all(np.isfinite(v.values)):
            raise ValueError("field contains non-finite entries")
        vd, vg, G = self.project_values(v.values)
        res = lp_norm(ScalarField(self.grid, div_vec_values(self.grid.diff_1d, vd)), 2)
        scale = lp_norm(v, 2)
        if res > self.tol * max(scale, 1.0):
            raise SolverError(
                f"projection divergence residual {res:.3e} exceeds tolerance"
            )
        return HelmholtzParts(
            VectorField(self.grid, vd),
            VectorField(self.grid, vg),
            ScalarField(self.grid, G),
        )

    def project(self, v: VectorField) -> VectorField:
        return self.leray_project(v).div_free

    def complement(self, v: VectorField) -> VectorField:
        return self.leray_project(v).gradient

    def project_div_S(self, S_field: TensorField) -> VectorField:
        """Divergence-free part of the tensor divergence (strong residual)."""
        return self.project(div_tensor(S_field))


def _checkerboard(n: int) -> np.ndarray:
    cb = (-1.0) ** np.add.outer(np.arange(n), np.arange(n))
    return (cb / np.linalg.norm(cb)).ravel()


class BogovskiiOperator:
    """Minimal-gradient-norm right inverse of the discrete divergence.

    The zero-trace condition at the physical walls is encoded by the
    odd-reflection stencils in both the objective and the constraint;
    the removed checkerboard component is the only gauge freedom.
    """

    def __init__(self, grid: Grid, tol: float = 1e-8):
        self.grid = grid
        self.tol = tol
        n = grid.n
        Ds = sp.csr_matrix(grid.diff_1d)
        eye = sp.identity(n, format="csr")
        DX = sp.kron(Ds, eye)
        DY = sp.kron(eye, Ds)
        Atil = DX.T @ DX + DY.T @ DY
        H = sp.block_diag([Atil, Atil])
        B = sp.hstack([DX, DY])
        cb = _checkerboard(n)
        C = np.zeros((2 * n * n, 2))
        C[: n * n, 0] = cb
        C[n * n :, 1] = cb
        scale_h = 4.0 / grid.h**2
        Creg = sp.csr_matrix(C * np.sqrt(scale_h))
        z = np.full((n * n, 1), 1.0 / n)
        Zreg = sp.csr_matrix(z * (2.0 / grid.h))
        kkt = sp.bmat(
            [[H + Creg @ Creg.T, B.T], [B, -Zreg @ Zreg.T]]
        ).tocsc()
        self._lu = spla.splu(kkt)
        self._nv = 2 * n * n

    def _solve(self, rhs_v: np.ndarray, rhs_g: np.ndarray):
        rhs = np.concatenate([rhs_v.ravel(), rhs_g.ravel()])
        sol = self._lu.solve(rhs)
        n = self.grid.n
        return sol[: self._nv].reshape(2, n, n), sol[self._nv :].reshape(n, n)

    def apply(self, g: ScalarField) -> VectorField:
        """Field w with div w = g, zero wall trace, minimal gradient energy."""
        if g.grid != self.grid:
            raise ValueError("field lives on a different grid")
        norm_g = lp_norm(g, 2)
        mean_g = abs(float(g.values.mean()))
        if mean_g > 1e-12 * max(norm_g, 1e-300):
            raise MeanFreeError(
                f"input must be mean-free: |mean| = {mean_g:.3e}, norm = {norm_g:.3e}"
            )
        w, _ = self._solve(np.zeros(self._nv), g.values)
        res = lp_norm(
            ScalarField(self.grid, div_vec_values(self.grid.diff_1d, w) - g.values), 2
        )
        if res > self.tol * max(norm_g, 1.0):
            raise SolverError(f"divergence residual {res:.3e} exceeds tolerance")
        return VectorField(self.grid, w)

    def adjoint_apply(self, v: VectorField) -> ScalarField:
        """Adjoint: mean-free scalar with <B* v, g> = <v, B g> for all g."""
        if v.grid != self.grid:
            raise ValueError("field lives on a different grid")
        _, mu = self._solve(v.values, np.zeros(self.grid.n**2))
        mu = mu - mu.mean()
        return ScalarField(self.grid, mu)

    # convenience aliases matching the operation names
    bogovskii_apply = apply
    bogovskii_adjoint_apply = adjoint_apply
