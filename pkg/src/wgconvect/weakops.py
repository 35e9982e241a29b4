"""Discrete weak gradient and weak divergence as local matrices.

A weak function on an element is a pair (interior polynomial, one trace
polynomial per face).  Its weak gradient of target degree r is the field in
[P_r(K)]^2 whose moments against every test field reproduce the
integration-by-parts formula

    (grad_w v, tau)_K = -(v0, div tau)_K + <vb, tau . n>_{dK},

and the weak divergence of a vector-valued weak function is defined the same
way with the roles of scalar/vector swapped.  Because all bases are
orthonormal pullbacks, both operators reduce to dense matrices built from a
handful of reference-element tables that only depend on the degrees, not on
the element: the geometry enters through inv(B)^T, det(B), face lengths,
outward normals, and the face-orientation flips.

Face-trace coefficients are always taken in the global face orientation
(from the face's lower-index vertex to the higher one); the orientation flip
relative to the element's own traversal is folded into the matrices using
the edge-basis parity psi_g(1 - t) = (-1)^g psi_g(t).
"""

from functools import lru_cache

import numpy as np

from . import polybasis as pb

# local edge lf of the reference triangle runs from vertex lf to vertex
# (lf + 1) % 3, with vertices (0,0), (1,0), (0,1)
_REF_EDGE = np.array([
    [[0.0, 0.0], [1.0, 0.0]],
    [[1.0, 0.0], [0.0, 1.0]],
    [[0.0, 1.0], [0.0, 0.0]],
])


def ref_edge_points(lf, s):
    """Reference coordinates along local edge lf at parameters s in [0, 1]."""
    a, b = _REF_EDGE[lf]
    s = np.asarray(s, dtype=float)
    return a + s[:, None] * (b - a)


def flip_signs(trace_degree):
    """Per-member sign picked up when a face is traversed backwards."""
    return (-1.0) ** np.arange(trace_degree + 1)


# ----------------------------------------------------------------------
# reference tables (geometry-independent, cached per degree tuple)


@lru_cache(maxsize=None)
def deriv_table(target_degree, interior_degree):
    """D[dp, a, b] = integral over That of d_dp(phi^r_a) phi^k_b."""
    quad = pb.quad_rule(target_degree + interior_degree, "triangle")
    gr = pb.scalar_basis(target_degree, "triangle").grad(quad.points)
    phi = pb.scalar_basis(interior_degree, "triangle").eval(quad.points)
    return np.einsum("q,qap,qb->pab", quad.weights, gr, phi)


@lru_cache(maxsize=None)
def edge_table(target_degree, trace_degree):
    """E[lf, a, g] = integral over [0,1] of phi^r_a(edge_lf(s)) psi_g(s)."""
    quad = pb.quad_rule(target_degree + trace_degree + 2, "edge")
    psi = pb.scalar_basis(trace_degree, "edge").eval(quad.points)
    tri = pb.scalar_basis(target_degree, "triangle")
    out = np.empty((3, tri.dim, trace_degree + 1))
    for lf in range(3):
        phi = tri.eval(ref_edge_points(lf, quad.points))
        out[lf] = np.einsum("q,qa,qg->ag", quad.weights, phi, psi)
    return out


@lru_cache(maxsize=None)
def conv_volume_table(degree):
    """T[a, b, g, dp] = integral of phi_a d_dp(phi_b) phi_g, all degree k."""
    quad = pb.quad_rule(3 * degree + 1, "triangle")
    basis = pb.scalar_basis(degree, "triangle")
    phi = basis.eval(quad.points)
    gr = basis.grad(quad.points)
    return np.einsum("q,qa,qbp,qg->abgp", quad.weights, phi, gr, phi)


@lru_cache(maxsize=None)
def conv_face_table(interior_degree, trace_degree):
    """F[lf, ap, b, gp] = integral of psi_ap(s) phi_b(edge_lf(s)) psi_gp(s)."""
    quad = pb.quad_rule(interior_degree + 2 * trace_degree + 2, "edge")
    psi = pb.scalar_basis(trace_degree, "edge").eval(quad.points)
    tri = pb.scalar_basis(interior_degree, "triangle")
    out = np.empty((3, trace_degree + 1, tri.dim, trace_degree + 1))
    for lf in range(3):
        phi = tri.eval(ref_edge_points(lf, quad.points))
        out[lf] = np.einsum("q,qa,qb,qg->abg", quad.weights, psi, phi, psi)
    return out


# ----------------------------------------------------------------------
# batched geometry-dependent blocks


def scalar_gradient_blocks(mesh, elems, interior_degree, trace_degree,
                           target_degree):
    """Weak-gradient coefficient maps for a batch of elements.

    Returns
    -------
    M_int : (E, 2, dim_r, dim_k)
        Applied to interior coefficients.
    M_face : (E, 3, 2, dim_r, l+1)
        Applied to global-orientation trace coefficients of each local face.

    The weak gradient of (v0, vb) has coefficients
    g[d, a] = sum_b M_int[d, a, b] v0[b] + sum_{lf, g} M_face[lf, d, a, g] vb[lf, g].
    """
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    D = deriv_table(target_degree, interior_degree)
    E = edge_table(target_degree, trace_degree)
    M_int = -np.einsum("edp,pab->edab", mesh.inv_bt[elems], D)
    fac = mesh.elem_face_len[elems] / mesh.det_b[elems][:, None]   # (E, 3)
    signs = flip_signs(trace_degree)
    FS = np.where(mesh.elem_face_flip[elems][:, :, None],
                  signs[None, None, :], 1.0)                       # (E, 3, l+1)
    M_face = np.einsum("el,eld,lag,elg->eldag", fac,
                       mesh.elem_face_normal[elems], E, FS)
    return M_int, M_face


class WeakGradientOperator:
    """Weak gradient on one element as dense coefficient matrices.

    M_int maps interior P_k coefficients to [P_r]^2 coefficients (flattened
    component-major, length 2*dim_r); M_face[lf] does the same for the trace
    coefficients of local face lf (global face orientation).
    """

    def __init__(self, elem, target_degree, M_int, M_face):
        self.elem = elem
        self.target_degree = target_degree
        self.M_int = M_int
        self.M_face = M_face

    def apply(self, interior, traces):
        """Gradient coefficients (2, dim_r) of the weak function."""
        out = self.M_int @ interior
        for lf in range(3):
            out = out + self.M_face[lf] @ traces[lf]
        dim_r = pb.tri_dim(self.target_degree)
        return out.reshape(2, dim_r)


class WeakDivergenceOperator:
    """Weak divergence of vector weak functions on one element.

    Interior coefficients are component-major (component 0 block then
    component 1); each face carries a full vector trace, also
    component-major, in the global face orientation.
    """

    def __init__(self, elem, target_degree, M_int, M_face):
        self.elem = elem
        self.target_degree = target_degree
        self.M_int = M_int
        self.M_face = M_face

    def apply(self, interior, traces):
        """Divergence coefficients (dim_r,) of the vector weak function."""
        out = self.M_int @ interior
        for lf in range(3):
            out = out + self.M_face[lf] @ traces[lf]
        return out


def build_weak_gradient(mesh, elem, interior_degree, trace_degree,
                        target_degree):
    M_int, M_face = scalar_gradient_blocks(mesh, [elem], interior_degree,
                                           trace_degree, target_degree)
    dim_r = pb.tri_dim(target_degree)
    dim_k = pb.tri_dim(interior_degree)
    return WeakGradientOperator(
        elem, target_degree,
        M_int[0].reshape(2 * dim_r, dim_k),
        [M_face[0, lf].reshape(2 * dim_r, trace_degree + 1) for lf in range(3)])


def build_weak_divergence(mesh, elem, interior_degree, trace_degree,
                          target_degree):
    M_int, M_face = scalar_gradient_blocks(mesh, [elem], interior_degree,
                                           trace_degree, target_degree)
    dim_r = pb.tri_dim(target_degree)
    dim_k = pb.tri_dim(interior_degree)
    nt = trace_degree + 1
    # div coefficients contract the component-d gradient block with the
    # component-d input; lay the inputs out component-major
    Mi = np.empty((dim_r, 2 * dim_k))
    Mi[:, :dim_k] = M_int[0, 0]
    Mi[:, dim_k:] = M_int[0, 1]
    Mf = []
    for lf in range(3):
        blk = np.empty((dim_r, 2 * nt))
        blk[:, :nt] = M_face[0, lf, 0]
        blk[:, nt:] = M_face[0, lf, 1]
        Mf.append(blk)
    return WeakDivergenceOperator(elem, target_degree, Mi, Mf)


class OperatorCache:
    """Memoised per-element weak operators for one mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        self._store = {}

    def gradient(self, elem, interior_degree, trace_degree, target_degree):
        key = ("grad", elem, interior_degree, trace_degree, target_degree)
        if key not in self._store:
            self._store[key] = build_weak_gradient(
                self.mesh, elem, interior_degree, trace_degree, target_degree)
        return self._store[key]

    def divergence(self, elem, interior_degree, trace_degree, target_degree):
        key = ("div", elem, interior_degree, trace_degree, target_degree)
        if key not in self._store:
            self._store[key] = build_weak_divergence(
                self.mesh, elem, interior_degree, trace_degree, target_degree)
        return self._store[key]


# ----------------------------------------------------------------------
# commuting-diagram verification


def commutativity_check(mesh, v, grad_v, interior_degree, trace_degree,
                        target_degree, kind="vector", quad_degree=None):
    """Max elementwise residual of the projection/weak-gradient commutation.

    For kind="vector" the interior slot holds the RT projection of v (its
    moments against P_k, which is all the weak gradient sees) and the trace
    slot the facewise projection; the weak gradient must reproduce the
    elementwise projection of grad v onto [P_m]^2 componentwise.  For
    kind="scalar" the interior slot is the plain elementwise projection.

    v(x, y) -> (..., 2) and grad_v(x, y) -> (..., 2, 2) with
    grad_v[..., i, d] = d_d v_i for vectors; scalars drop the i axis.
    """
    k, l, m = interior_degree, trace_degree, target_degree
    if quad_degree is None:
        quad_degree = 2 * k + 6
    ncomp = 2 if kind == "vector" else 1
    dim_m = pb.tri_dim(m)
    worst = 0.0
    for e in range(mesh.n_elems):
        op = build_weak_gradient(mesh, e, k, l, m)
        if kind == "vector":
            rt = pb.rt_project(mesh, e, k, v, quad_degree)
        resid2 = 0.0
        for i in range(ncomp):
            if kind == "vector":
                def fi(x, y, _i=i):
                    pts = np.column_stack([np.ravel(x), np.ravel(y)])
                    return rt.eval(pts)[:, _i].reshape(np.shape(x))

                def vi(x, y, _i=i):
                    return np.asarray(v(x, y))[..., _i]

                def gi(x, y, _i=i):
                    return np.asarray(grad_v(x, y))[..., _i, :]
            else:
                fi = vi = v

                def gi(x, y):
                    return np.asarray(grad_v(x, y))
            interior = pb.project_interior(mesh, [e], k, fi, quad_degree)[0]
            traces = [pb.project_face(mesh, [mesh.elem_faces[e, lf]], l, vi,
                                      quad_degree)[0] for lf in range(3)]
            got = op.apply(interior, traces)
            want = np.stack([
                pb.project_interior(mesh, [e], m,
                                    lambda x, y, d=d: gi(x, y)[..., d],
                                    quad_degree)[0]
                for d in range(2)])
            resid2 += np.sum((got - want) ** 2)
        worst = max(worst, np.sqrt(mesh.det_b[e] * resid2))
    return worst
