"""Orthonormal polynomial bases, quadrature rules, and local L2 projections.

Everything is set up on the reference triangle That = {(x, y) : x, y >= 0,
x + y <= 1} and the reference edge [0, 1].  Physical bases are pullbacks
phi(x) = phihat(xhat) under the element's affine map, so the physical mass
matrix is det(B) times the identity and projections reduce to quadrature
moments on the reference element.

Edge bases are shifted Legendre polynomials, which gives the parity
psi_g(1 - t) = (-1)^g psi_g(t) used when two elements traverse a shared
face in opposite directions.
"""

import math

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import eval_jacobi, roots_jacobi, roots_legendre


def tri_monomial_powers(degree):
    """Exponent pairs (a, b) of x^a y^b with a + b <= degree, by total degree."""
    powers = []
    for d in range(degree + 1):
        for b in range(d + 1):
            powers.append((d - b, b))
    return np.array(powers, dtype=np.int64)


def tri_dim(degree):
    return (degree + 1) * (degree + 2) // 2


def _collapsed_coords(points):
    """Square coordinates (a, b) of triangle points, with the apex regularised."""
    pts = np.asarray(points, dtype=float)
    x = pts[..., 0]
    y = pts[..., 1]
    omy = 1.0 - y
    safe = np.where(np.abs(omy) > 1e-14, omy, 1.0)
    a = np.where(np.abs(omy) > 1e-14, 2.0 * x / safe - 1.0, -1.0)
    return a, 2.0 * y - 1.0, omy


def _jacobi_deriv(n, alpha, x):
    """d/dx P_n^(alpha,0)(x)."""
    if n == 0:
        return np.zeros_like(x)
    return 0.5 * (n + alpha + 1) * eval_jacobi(n - 1, alpha + 1.0, 1.0, x)


class ScalarBasis:
    """Orthonormal scalar polynomial basis on the reference triangle or edge.

    Parameters
    ----------
    degree : int
        Maximal total degree.
    shape : str
        "triangle" (dim = (degree+1)(degree+2)/2) or "edge" (dim = degree+1).

    The triangle basis is the Jacobi-polynomial construction on collapsed
    coordinates a = 2x/(1-y) - 1, b = 2y - 1,

        phi_{m,n} = sqrt(2 (2m+1) (m+n+1)) P_m(a) (1-y)^m P_n^(2m+1,0)(b),

    which is orthonormal in exact arithmetic (no Gram matrix to invert), so
    the discrete orthonormality defect stays at machine precision for any
    degree.  Members are ordered by total degree m+n, so every lower-degree
    basis is a prefix of the higher-degree ones; the first member is the
    constant sqrt(2).  The edge basis is sqrt(2g+1) P_g(2t - 1) on [0, 1].
    """

    def __init__(self, degree, shape="triangle"):
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        self.degree = degree
        self.shape = shape
        if shape == "triangle":
            self.mn = [(m, d - m) for d in range(degree + 1) for m in range(d + 1)]
            self.dim = len(self.mn)
        elif shape == "edge":
            self.dim = degree + 1
        else:
            raise ValueError("shape must be 'triangle' or 'edge'")

    def eval(self, points):
        """Basis values; (npts, dim)."""
        if self.shape == "edge":
            t = np.asarray(points, dtype=float)
            out = np.empty(t.shape + (self.dim,))
            for g in range(self.dim):
                coef = np.zeros(g + 1)
                coef[g] = math.sqrt(2 * g + 1)
                out[..., g] = npleg.legval(2.0 * t - 1.0, coef)
            return out
        a, b, omy = _collapsed_coords(points)
        out = np.empty(a.shape + (self.dim,))
        for i, (m, n) in enumerate(self.mn):
            norm = math.sqrt(2.0 * (2 * m + 1) * (m + n + 1))
            out[..., i] = (norm * eval_jacobi(m, 0.0, 0.0, a) * omy ** m
                           * eval_jacobi(n, 2 * m + 1.0, 0.0, b))
        return out

    def grad(self, points):
        """Gradients with respect to reference coordinates; (npts, dim, 2)."""
        if self.shape == "edge":
            t = np.asarray(points, dtype=float)
            out = np.empty(t.shape + (self.dim,))
            for g in range(self.dim):
                coef = np.zeros(g + 1)
                coef[g] = math.sqrt(2 * g + 1)
                out[..., g] = 2.0 * npleg.legval(2.0 * t - 1.0, npleg.legder(coef))
            return out
        a, b, omy = _collapsed_coords(points)
        out = np.empty(a.shape + (self.dim, 2))
        omy_pow = {}  # (1-y)^p with negative powers clamped (coefficient is 0 there)
        for i, (m, n) in enumerate(self.mn):
            norm = math.sqrt(2.0 * (2 * m + 1) * (m + n + 1))
            Pm = eval_jacobi(m, 0.0, 0.0, a)
            Pn = eval_jacobi(n, 2 * m + 1.0, 0.0, b)
            dPm = _jacobi_deriv(m, 0.0, a)
            dPn = _jacobi_deriv(n, 2 * m + 1.0, b)
            p = max(m - 1, 0)
            if p not in omy_pow:
                omy_pow[p] = omy ** p
            if m not in omy_pow:
                omy_pow[m] = omy ** m
            out[..., i, 0] = norm * 2.0 * dPm * omy_pow[p] * Pn
            out[..., i, 1] = norm * ((a + 1.0) * dPm * omy_pow[p] * Pn
                                     - m * omy_pow[p] * Pm * Pn
                                     + 2.0 * omy_pow[m] * Pm * dPn)
        return out


_BASIS_CACHE = {}


def scalar_basis(degree, shape="triangle"):
    """Cached ScalarBasis instances (they are immutable in practice)."""
    key = (degree, shape)
    if key not in _BASIS_CACHE:
        _BASIS_CACHE[key] = ScalarBasis(degree, shape)
    return _BASIS_CACHE[key]


class QuadratureRule:
    """Quadrature nodes and positive weights on a reference cell."""

    def __init__(self, points, weights):
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)

    @classmethod
    def triangle(cls, degree):
        """Rule exact for total degree `degree` on the reference triangle.

        A Duffy-type product rule: Gauss-Jacobi (weight 1 - s) in the first
        coordinate absorbs the Jacobian of the square-to-triangle map
        (x, y) = (s, t (1 - s)), Gauss-Legendre handles the second.
        """
        n = max(1, (degree + 2) // 2)
        xj, wj = roots_jacobi(n, 1.0, 0.0)
        s = 0.5 * (xj + 1.0)
        ws = 0.25 * wj
        xl, wl = roots_legendre(n)
        t = 0.5 * (xl + 1.0)
        wt = 0.5 * wl
        S, T = np.meshgrid(s, t, indexing="ij")
        pts = np.column_stack([S.ravel(), (T * (1.0 - S)).ravel()])
        w = np.outer(ws, wt).ravel()
        return cls(pts, w)

    @classmethod
    def edge(cls, degree):
        """Gauss-Legendre rule on [0, 1] exact for `degree`."""
        n = max(1, (degree + 2) // 2)
        x, w = roots_legendre(n)
        return cls(0.5 * (x + 1.0), 0.5 * w)


_QUAD_CACHE = {}


def quad_rule(degree, shape="triangle"):
    key = (degree, shape)
    if key not in _QUAD_CACHE:
        maker = QuadratureRule.triangle if shape == "triangle" else QuadratureRule.edge
        _QUAD_CACHE[key] = maker(degree)
    return _QUAD_CACHE[key]


# ----------------------------------------------------------------------
# local projections


def project_interior(mesh, elems, degree, f, quad_degree):
    """Coefficients of the elementwise L2 projection of f onto P_degree.

    Parameters
    ----------
    f : callable
        f(x, y) with array arguments, returning values of matching shape.

    Returns
    -------
    (len(elems), dim) array in the orthonormal pullback basis.
    """
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    quad = quad_rule(quad_degree, "triangle")
    basis = scalar_basis(degree, "triangle")
    pts = mesh.map_points(elems, quad.points)            # (E, Q, 2)
    vals = f(pts[..., 0], pts[..., 1])                   # (E, Q)
    phi = basis.eval(quad.points)                        # (Q, dim)
    return np.einsum("q,eq,qd->ed", quad.weights, vals, phi)


def eval_interior(mesh, elems, coeffs, ref_points):
    """Evaluate interior polynomials at reference points; (E, Q)."""
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    degree = _degree_from_tri_dim(coeffs.shape[-1])
    phi = scalar_basis(degree, "triangle").eval(ref_points)
    return np.einsum("ed,qd->eq", coeffs, phi)


def project_face(mesh, fids, degree, f, quad_degree):
    """Coefficients of the facewise L2 projection of f onto P_degree(e).

    Faces are parameterised from their lower-index vertex to the higher one.
    """
    fids = np.atleast_1d(np.asarray(fids, dtype=np.int64))
    quad = quad_rule(quad_degree, "edge")
    basis = scalar_basis(degree, "edge")
    pts = mesh.face_points(fids, quad.points)            # (F, Q, 2)
    vals = f(pts[..., 0], pts[..., 1])                   # (F, Q)
    psi = basis.eval(quad.points)                        # (Q, dim)
    return np.einsum("q,fq,qd->fd", quad.weights, vals, psi)


def eval_face(mesh, fids, coeffs, t):
    """Evaluate face polynomials at arc parameters t; (F, Q)."""
    psi = scalar_basis(coeffs.shape[-1] - 1, "edge").eval(np.asarray(t, dtype=float))
    return np.einsum("fd,qd->fq", coeffs, psi)


def _degree_from_tri_dim(dim):
    d = int(round((math.sqrt(8 * dim + 1) - 3) / 2))
    if tri_dim(d) != dim:
        raise ValueError("coefficient array does not match a triangle basis")
    return d


# ----------------------------------------------------------------------
# Raviart-Thomas utilities (used to verify the projection/gradient
# commuting identities, not in the solver itself)


class RtBasis:
    """Monomial basis of RT_j = [P_j]^2 + x Ptilde_j in local coordinates.

    Fields are expressed in centred, h-scaled coordinates xi = (x - c) / h;
    the spanned space is the same as with raw physical monomials, but the
    projection system stays well conditioned under mesh refinement.
    """

    def __init__(self, degree):
        self.degree = degree
        self.scalar_powers = tri_monomial_powers(degree)
        nj = len(self.scalar_powers)
        self.homog_powers = np.array(
            [(degree - b, b) for b in range(degree + 1)], dtype=np.int64)
        self.dim = 2 * nj + len(self.homog_powers)
        assert self.dim == (degree + 1) * (degree + 3)

    def eval(self, xi):
        """Field values at local points; (npts, dim, 2)."""
        xi = np.asarray(xi, dtype=float)
        q = len(xi)
        nj = len(self.scalar_powers)
        mono = (xi[:, 0:1] ** self.scalar_powers[:, 0]
                * xi[:, 1:2] ** self.scalar_powers[:, 1])        # (q, nj)
        hom = (xi[:, 0:1] ** self.homog_powers[:, 0]
               * xi[:, 1:2] ** self.homog_powers[:, 1])          # (q, j+1)
        out = np.zeros((q, self.dim, 2))
        out[:, :nj, 0] = mono
        out[:, nj:2 * nj, 1] = mono
        out[:, 2 * nj:, 0] = xi[:, 0:1] * hom
        out[:, 2 * nj:, 1] = xi[:, 1:2] * hom
        return out

    def div(self, xi):
        """Divergence with respect to the local coordinates; (npts, dim)."""
        xi = np.asarray(xi, dtype=float)
        q = len(xi)
        nj = len(self.scalar_powers)
        a = self.scalar_powers[:, 0]
        b = self.scalar_powers[:, 1]
        x = xi[:, 0:1]
        y = xi[:, 1:2]
        out = np.zeros((q, self.dim))
        out[:, :nj] = a * x ** np.maximum(a - 1, 0) * y ** b
        out[:, nj:2 * nj] = b * x ** a * y ** np.maximum(b - 1, 0)
        hom = (x ** self.homog_powers[:, 0] * y ** self.homog_powers[:, 1])
        out[:, 2 * nj:] = (self.degree + 2) * hom
        return out


class RtField:
    """A projected RT field on one element, in local coordinates."""

    def __init__(self, basis, elem, center, scale, coeffs):
        self.basis = basis
        self.elem = elem
        self.center = center
        self.scale = scale
        self.coeffs = coeffs

    def _local(self, pts):
        return (np.asarray(pts, dtype=float) - self.center) / self.scale

    def eval(self, pts):
        """Values at physical points; (npts, 2)."""
        vals = self.basis.eval(self._local(pts))
        return np.einsum("i,qid->qd", self.coeffs, vals)

    def div(self, pts):
        """Divergence at physical points; (npts,)."""
        d = self.basis.div(self._local(pts))
        return np.einsum("i,qi->q", self.coeffs, d) / self.scale


def rt_project(mesh, elem, degree, v, quad_degree=None):
    """Project a vector field into RT_degree on one element.

    The projection matches face-normal moments against P_degree on each of
    the three faces and, for degree >= 1, interior moments against
    [P_{degree-1}]^2.  `v` is called as v(x, y) -> (..., 2).
    """
    j = degree
    if quad_degree is None:
        quad_degree = 2 * j + 4
    basis = RtBasis(j)
    center = mesh.vertices[mesh.triangles[elem]].mean(axis=0)
    scale = mesh.h_K[elem]

    rows = np.zeros((basis.dim, basis.dim))
    rhs = np.zeros(basis.dim)
    edge_quad = quad_rule(quad_degree, "edge")
    edge_basis = scalar_basis(j, "edge")
    psi = edge_basis.eval(edge_quad.points)                      # (Q, j+1)
    r = 0
    for lf in range(3):
        fid = mesh.elem_faces[elem, lf]
        pts = mesh.face_points(np.array([fid]), edge_quad.points)[0]  # (Q, 2)
        n = mesh.elem_face_normal[elem, lf]
        wvals = basis.eval((pts - center) / scale)               # (Q, dim, 2)
        wn = wvals @ n                                           # (Q, dim)
        vn = np.asarray(v(pts[:, 0], pts[:, 1])) @ n             # (Q,)
        scale_f = mesh.elem_face_len[elem, lf]
        rows[r:r + j + 1] = scale_f * np.einsum("q,qg,qi->gi",
                                                edge_quad.weights, psi, wn)
        rhs[r:r + j + 1] = scale_f * np.einsum("q,qg,q->g",
                                               edge_quad.weights, psi, vn)
        r += j + 1
    if j >= 1:
        tri_quad = quad_rule(quad_degree, "triangle")
        chi = scalar_basis(j - 1, "triangle").eval(tri_quad.points)  # (Q, njm1)
        pts = mesh.map_points(np.array([elem]), tri_quad.points)[0]
        wvals = basis.eval((pts - center) / scale)
        vvals = np.asarray(v(pts[:, 0], pts[:, 1]))
        det = mesh.det_b[elem]
        for d in range(2):
            nb = chi.shape[1]
            rows[r:r + nb] = det * np.einsum("q,qb,qi->bi",
                                             tri_quad.weights, chi, wvals[:, :, d])
            rhs[r:r + nb] = det * np.einsum("q,qb,q->b",
                                            tri_quad.weights, chi, vvals[:, d])
            r += nb
    coeffs = np.linalg.solve(rows, rhs)
    return RtField(basis, elem, center, scale, coeffs)


def divergence_moment_check(mesh, elem, degree, v, div_v, quad_degree=None):
    """Residual of the divergence moment identity of the RT projection.

    For w = rt_project(v), the moments of div(w) against P_degree must equal
    those of div(v).  Returns the max moment residual divided by the size of
    the div(v) moments (or 1 if those vanish).
    """
    if quad_degree is None:
        quad_degree = 2 * degree + 6
    field = rt_project(mesh, elem, degree, v, quad_degree)
    quad = quad_rule(quad_degree, "triangle")
    chi = scalar_basis(degree, "triangle").eval(quad.points)
    pts = mesh.map_points(np.array([elem]), quad.points)[0]
    det = mesh.det_b[elem]
    mom_w = det * np.einsum("q,qb,q->b", quad.weights, chi, field.div(pts))
    mom_v = det * np.einsum("q,qb,q->b", quad.weights, chi,
                            np.asarray(div_v(pts[:, 0], pts[:, 1])))
    scale = max(np.abs(mom_v).max(), 1.0)
    return np.abs(mom_w - mom_v).max() / scale
