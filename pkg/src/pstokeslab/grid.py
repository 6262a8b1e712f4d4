"""Uniform cell-centred grid on the unit square and discrete calculus.

Nodes sit at cell centres ((i+1/2)h, (j+1/2)h), i,j = 0..n-1, h = 1/n, so
the flat quadrature weight h^2 integrates constants exactly.  Velocity
fields carry a homogeneous Dirichlet condition at the physical walls; it
enters the difference stencils through ghost nodes obtained by odd
reflection about the wall, u(-1) = -u(0).

All first-order operators derive from one 1-d matrix D (central
differences with the odd-reflection closure).  Adjoint pairs are built by
definition:

    grad_scalar := -div_vec^T        (scalar gradient)
    div_tensor  := -grad_vec^T       (row-wise tensor divergence)

so the discrete integration-by-parts identities hold to machine
precision, which the projection and pressure machinery relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "TensorField",
    "GridMismatchError",
    "sym_grad",
    "grad_vec",
    "div_vec",
    "grad_scalar",
    "div_tensor",
    "lp_norm",
    "l2_inner",
    "w12_norm",
    "apply_mask",
    "is_masked",
    "save_field",
    "load_field",
]


class GridMismatchError(ValueError):
    """Fields from different grids were combined."""


def _difference_matrix(n: int, h: float) -> np.ndarray:
    """Central differences with odd-reflection ghosts (zero wall trace)."""
    D = np.zeros((n, n))
    for k in range(1, n - 1):
        D[k, k - 1] = -0.5
        D[k, k + 1] = 0.5
    D[0, 0] = 0.5
    D[0, 1] = 0.5
    D[n - 1, n - 1] = -0.5
    D[n - 1, n - 2] = -0.5
    return D / h


class Grid:
    """Dyadic n x n cell-centred grid on the unit square."""

    def __init__(self, n: int):
        if n < 4 or (n & (n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 4, got {n}")
        self.n = int(n)
        self.diff_1d = _difference_matrix(self.n, self.h)
        mask = np.zeros((n, n), dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        self.boundary_mask = mask
        self.interior_mask = ~mask
        x = (np.arange(n) + 0.5) * self.h
        self.x, self.y = np.meshgrid(x, x, indexing="ij")

    @property
    def h(self) -> float:
        # derived, never stored independently
        return 1.0 / self.n

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n

    def __hash__(self):
        return hash(("Grid", self.n))

    def __repr__(self):
        return f"Grid(n={self.n})"

    # -- constructors -------------------------------------------------
    def scalar(self, values=None) -> "ScalarField":
        return ScalarField(self, self._alloc(values, (self.n, self.n)))

    def vector(self, values=None) -> "VectorField":
        return VectorField(self, self._alloc(values, (2, self.n, self.n)))

    def tensor(self, values=None) -> "TensorField":
        return TensorField(self, self._alloc(values, (2, 2, self.n, self.n)))

    def _alloc(self, values, shape):
        if values is None:
            return np.zeros(shape)
        values = np.asarray(values, dtype=float)
        if values.shape != shape:
            raise ValueError(f"expected shape {shape}, got {values.shape}")
        return values


@dataclass
class _Field:
    grid: Grid
    values: np.ndarray

    def copy(self):
        return type(self)(self.grid, self.values.copy())

    def __add__(self, other):
        _same_grid(self, other)
        return type(self)(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return type(self)(self.grid, self.values - other.values)

    def __mul__(self, c):
        return type(self)(self.grid, self.values * float(c))

    __rmul__ = __mul__


class ScalarField(_Field):
    pass


class VectorField(_Field):
    pass


class TensorField(_Field):
    pass


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError("fields live on different grids")
    return g


# ---------------------------------------------------------------------
# array kernels (hot path; Field wrappers below)
# ---------------------------------------------------------------------

def dx(D, q):
    return D @ q


def dy(D, q):
    return q @ D.T


def div_vec_values(D, v):
    return dx(D, v[0]) + dy(D, v[1])


def grad_scalar_values(D, q):
    # negative transpose of div_vec
    return np.stack([-(D.T @ q), -(q @ D)])


def grad_vec_values(D, v):
    return np.stack([np.stack([dx(D, v[i]), dy(D, v[i])]) for i in range(2)])


def sym_grad_values(D, v):
    g = grad_vec_values(D, v)
    off = 0.5 * (g[0, 1] + g[1, 0])
    return np.stack([
        np.stack([g[0, 0], off]),
        np.stack([off, g[1, 1]]),
    ])


def div_tensor_values(D, T):
    # negative transpose of grad_vec, acting row-wise
    return np.stack([-(D.T @ T[i, 0]) - (T[i, 1] @ D) for i in range(2)])


def curl_values(D, phi):
    """(d_y phi, -d_x phi); exactly divergence-free since dx and dy commute."""
    return np.stack([dy(D, phi), -dx(D, phi)])


def magnitude(values: np.ndarray) -> np.ndarray:
    """Nodewise Euclidean/Frobenius magnitude over component axes."""
    if values.ndim == 2:
        return np.abs(values)
    comp_axes = tuple(range(values.ndim - 2))
    return np.sqrt(np.sum(values**2, axis=comp_axes))


# ---------------------------------------------------------------------
# Field-level operations
# ---------------------------------------------------------------------

def sym_grad(v: VectorField) -> TensorField:
    """Symmetric gradient via central differences with odd reflection."""
    return TensorField(v.grid, sym_grad_values(v.grid.diff_1d, v.values))


def grad_vec(v: VectorField) -> TensorField:
    """Full (unsymmetrised) gradient, (grad v)[i][j] = d_j v_i."""
    return TensorField(v.grid, grad_vec_values(v.grid.diff_1d, v.values))


def div_vec(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, div_vec_values(v.grid.diff_1d, v.values))


def grad_scalar(q: ScalarField) -> VectorField:
    return VectorField(q.grid, grad_scalar_values(q.grid.diff_1d, q.values))


def div_tensor(T: TensorField) -> VectorField:
    return VectorField(T.grid, div_tensor_values(T.grid.diff_1d, T.values))


def lp_norm(f: _Field, r: float) -> float:
    """Quadrature-weighted L^r norm, (h^2 sum |.|^r)^(1/r); max for r=inf."""
    if r < 1.0:
        raise ValueError("exponent must satisfy r >= 1")
    mags = magnitude(f.values)
    if np.isinf(r):
        return float(mags.max(initial=0.0))
    return float((f.grid.cell_area * np.sum(mags**r)) ** (1.0 / r))


def l2_inner(a: _Field, b: _Field) -> float:
    g = _same_grid(a, b)
    return float(g.cell_area * np.sum(a.values * b.values))


def w12_norm(f: _Field) -> float:
    """Discrete W^{1,2} norm: (||f||^2 + ||grad f||^2)^(1/2)."""
    if isinstance(f, ScalarField):
        gv = grad_scalar(f)
    elif isinstance(f, VectorField):
        gv = grad_vec(f)
    else:
        raise TypeError("w12_norm defined for scalar and vector fields")
    return float(np.sqrt(lp_norm(f, 2) ** 2 + lp_norm(gv, 2) ** 2))


def apply_mask(v: VectorField) -> VectorField:
    """Zero the field on the boundary ring."""
    out = v.values.copy()
    out[:, v.grid.boundary_mask] = 0.0
    return VectorField(v.grid, out)


def is_masked(v: VectorField, tol: float = 0.0) -> bool:
    ring = np.abs(v.values[..., v.grid.boundary_mask]).max(initial=0.0)
    return ring <= tol


# ---------------------------------------------------------------------
# serialization: flat CSV, row-major, header "i,j,comp,value"
# ---------------------------------------------------------------------

def save_field(f: _Field, path):
    values = f.values
    n = f.grid.n
    ncomp = int(np.prod(values.shape[:-2], dtype=int))
    flat = values.reshape(ncomp, n, n)
    with open(path, "w") as fh:
        fh.write("i,j,comp,value\n")
        for i in range(n):
            for j in range(n):
                for c in range(ncomp):
                    fh.write(f"{i},{j},{c},{flat[c, i, j]:.17g}\n")


def load_field(grid: Grid, path):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    data = np.atleast_2d(data)
    ncomp = int(data[:, 2].max()) + 1
    flat = np.zeros((ncomp, grid.n, grid.n))
    ii = data[:, 0].astype(int)
    jj = data[:, 1].astype(int)
    cc = data[:, 2].astype(int)
    flat[cc, ii, jj] = data[:, 3]
    if ncomp == 1:
        return ScalarField(grid, flat[0])
    if ncomp == 2:
        return VectorField(grid, flat)
    if ncomp == 4:
        return TensorField(grid, flat.reshape(2, 2, grid.n, grid.n))
    raise ValueError(f"unsupported component count {ncomp}")
