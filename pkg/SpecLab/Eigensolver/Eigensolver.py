from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from SpecLab.Utility.Errors import ParameterRangeError, SolverFailure, SpacingMismatchError, ZeroVectorError

DEFAULT_TOL = 1e-8
DEFAULT_PADDING = 5
DEFAULT_DENSE_LIMIT = 400
CLUSTER_TOL = 1e-6
SPACING_TOL = 1e-9

#----------------------------------------------

@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Five-point (N=2) or seven-point (N=3) Dirichlet Laplacian on the interior nodes of a raster."""
    matrix: sparse.csr_matrix
    h: float
    dimension: int

    @property
    def size(self):
        return self.matrix.shape[0]

    def energy(self, u, v=None):
        """Discrete Dirichlet form uᵀAv·h^N."""
        v = u if v is None else v
        return float(u @ (self.matrix @ v)) * self.h ** self.dimension

    def inner(self, u, v=None):
        """Discrete L² product Σ u v h^N."""
        v = u if v is None else v
        return float(u @ v) * self.h ** self.dimension


def assemble(raster):
    """
    Builds the masked-grid Laplacian: 2N/h² on the diagonal and -1/h² between
    lattice neighbours that are both interior. Neighbours outside the mask are
    simply left out, which imposes the Dirichlet condition.
    """
    N, h, M = raster.dimension, raster.h, raster.size
    index = np.pad(raster.index, 1, constant_values=-1)
    rows = [np.arange(M)]
    cols = [np.arange(M)]
    data = [np.full(M, 2.0 * N / h ** 2)]
    for axis in range(N):
        lower = [slice(None)] * N
        upper = [slice(None)] * N
        lower[axis] = slice(None, -1)
        upper[axis] = slice(1, None)
        a = index[tuple(lower)]
        b = index[tuple(upper)]
        both = (a >= 0) & (b >= 0)
        p, q = a[both], b[both]
        rows += [p, q]
        cols += [q, p]
        data += [np.full(p.size, -1.0 / h ** 2)] * 2
    matrix = sparse.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(M, M))
    return SparseOperator(matrix, h, N)

#----------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """
    Lowest eigenpairs of a SparseOperator.

    eigenvectors has shape (M, k); column j has unit discrete L² norm and its
    largest-magnitude entry is positive.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    h: float
    dimension: int
    method: str
    block_size: int
    orthogonality_error: float

    @property
    def k(self):
        return len(self.eigenvalues)

    def function(self, j):
        """u_j for j = 1..k."""
        return self.eigenvectors[:, j - 1]


def _normalize(vectors, h, dimension):
    weight = h ** dimension
    vectors = vectors / np.sqrt(np.sum(vectors * vectors, axis=0) * weight)
    peak = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    return vectors * np.where(peak < 0, -1.0, 1.0)


def _residuals(op, values, vectors):
    r = op.matrix @ vectors - vectors * values
    return np.sqrt(np.sum(r * r, axis=0) * op.h ** op.dimension)


def lowest_eigenpairs(op, k, tol=DEFAULT_TOL, seed=0, padding=DEFAULT_PADDING,
                      dense_limit=DEFAULT_DENSE_LIMIT, maxiter=None):
    """
    The k algebraically smallest eigenpairs of op.

    Large operators go through ARPACK in shift-invert mode around 0 with a
    sparse LU factorization; a block of k+padding vectors keeps degenerate
    levels together. Small operators use a dense symmetric solver.

    Args:
        op (SparseOperator): the operator
        k (int): number of pairs, 1 <= k <= M
        tol (float): residual tolerance relative to λ_k
        seed (int): seed for the start vector
        padding (int): extra vectors in the Lanczos block
        dense_limit (int): largest M solved densely
        maxiter (int): ARPACK restart budget, None for its default

    Raises:
        SolverFailure: if the iteration does not converge or a residual exceeds tol·λ_k
    """
    M = op.size
    if not (1 <= k <= M):
        raise ParameterRangeError(f'k must be in 1..{M}, got {k}')
    if not tol > 0:
        raise ParameterRangeError(f'Tolerance must be positive, got {tol}')
    block = min(k + padding, M - 1)

    if M <= dense_limit or block <= k:
        method = 'dense'
        values, vectors = scipy.linalg.eigh(op.matrix.toarray(), subset_by_index=[0, k - 1])
    else:
        method = 'shift-invert'
        lu = splu(op.matrix.tocsc())
        inverse = LinearOperator((M, M), matvec=lu.solve, dtype=float)
        v0 = np.random.default_rng(seed).standard_normal(M)
        try:
            values, vectors = eigsh(op.matrix, k=block, sigma=0.0, which='LM', OPinv=inverse,
                                    v0=v0, tol=0, maxiter=maxiter)
        except ArpackNoConvergence as err:
            partial = _residuals(op, err.eigenvalues, err.eigenvectors) if len(err.eigenvalues) else np.array([])
            raise SolverFailure(f'Shift-invert Lanczos did not converge for k={k}, M={M}', partial) from err
        order = np.argsort(values)[:k]
        values, vectors = values[order], vectors[:, order]

    vectors = _normalize(vectors, op.h, op.dimension)
    residuals = _residuals(op, values, vectors)
    if np.any(residuals > tol * values[-1]):
        raise SolverFailure(f'Residuals {residuals.max():.3g} above {tol:g}*lambda_k', residuals)
    gram = vectors.T @ vectors * op.h ** op.dimension
    orthogonality = float(np.max(np.abs(gram - np.eye(k))))
    logging.info(f'{method} solve: M={M}, k={k}, block={block}, lambda_1={values[0]:.8g}')
    return SpectrumResult(values, vectors, residuals, op.h, op.dimension, method, block, orthogonality)

#----------------------------------------------

def rayleigh_quotient(raster, u, op=None):
    """
    uᵀAu / uᵀu; the h^N weights of the energy and the mass cancel.

    Raises:
        ZeroVectorError: if u vanishes identically
    """
    op = assemble(raster) if op is None else op
    u = np.asarray(u, dtype=float)
    mass = float(u @ u)
    if mass == 0.0:
        raise ZeroVectorError('Rayleigh quotient of the zero vector')
    return float(u @ (op.matrix @ u)) / mass


def extrapolate(coarse, fine):
    """
    Richardson step (4·λ_fine - λ_coarse)/3 for spacings h and h/2.

    Args:
        coarse (tuple): (h, λ) with λ a number or an array
        fine (tuple): (h/2, λ)

    Raises:
        SpacingMismatchError: unless the fine spacing is half the coarse one
    """
    (h_c, lam_c), (h_f, lam_f) = coarse, fine
    if abs(h_c - 2.0 * h_f) > SPACING_TOL * h_c:
        raise SpacingMismatchError(f'Fine spacing {h_f:g} is not half of {h_c:g}')
    return (4.0 * np.asarray(lam_f) - np.asarray(lam_c)) / 3.0


def cluster_eigenvalues(values, rel=CLUSTER_TOL):
    """Groups sorted eigenvalues within relative rel into (mean, multiplicity) pairs."""
    clusters = []
    for lam in np.sort(np.asarray(values, dtype=float)):
        if clusters and abs(lam - clusters[-1][-1]) <= rel * abs(lam):
            clusters[-1].append(lam)
        else:
            clusters.append([lam])
    return [(float(np.mean(c)), len(c)) for c in clusters]


def node_energy_density(raster, u):
    """
    Splits the discrete energy Σ_edges (Δu/h)² over interior nodes.

    An edge between two interior nodes gives half its energy to each end; an
    edge to an exterior node gives all of it to the interior end. The
    densities therefore sum to uᵀAu, so Σ e·h^N is the discrete energy.
    """
    N, h = raster.dimension, raster.h
    grid = np.pad(raster.to_grid(u), 1)
    mask = np.pad(raster.mask, 1)
    density = np.zeros(grid.shape)
    for axis in range(N):
        lower = [slice(None)] * N
        upper = [slice(None)] * N
        lower[axis] = slice(None, -1)
        upper[axis] = slice(1, None)
        lower, upper = tuple(lower), tuple(upper)
        edge = ((grid[upper] - grid[lower]) / h) ** 2
        both = mask[lower] & mask[upper]
        share = np.where(both, 0.5, 1.0) * edge
        density[lower] += np.where(mask[lower], share, 0.0)
        density[upper] += np.where(mask[upper], share, 0.0)
    return density[tuple(slice(1, -1) for _ in range(N))][raster.mask]

#==============================================================================

# how to use this module
if __name__ == '__main__':
    from SpecLab.Geometry import Geometry as geo
    logging.getLogger().setLevel(logging.INFO)
    square = geo.box_domain((0, 0), (1, 1), 'unit square')
    values = []
    for h in (1 / 64, 1 / 128):
        result = lowest_eigenpairs(assemble(geo.rasterize(square, h)), 1)
        values.append((h, result.eigenvalues[0]))
    print(f'extrapolated lambda_1 = {extrapolate(*values):.6f}, 2*pi^2 = {2 * np.pi ** 2:.6f}')
