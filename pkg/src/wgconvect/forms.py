"""Element-local blocks of the coupled momentum/heat scheme.

Local degree-of-freedom layout used throughout (per element):

* scalar weak function (temperature, or one velocity component):
  ``[interior P_k coefficients | face 0 trace | face 1 trace | face 2 trace]``
  of length ``ns = dim P_k + 3 (l+1)``;
* velocity: component-major, two scalar layouts back to back (length 2 ns);
* pressure: ``[interior P_{k-1} | three P_k face traces]``.

Face-trace coefficients are always in the global face orientation.  Blocks
are returned dense; matrices are laid out ``M[test, trial]`` so a form value
is ``test_vec @ M @ trial_vec``.

The viscous and conduction blocks realize

    coef * [ (grad_w u, grad_w v)_K + h_K^{-1} <Q_b u0 - ub, Q_b v0 - vb>_dK ],

with the weak gradient of target degree m.  The convective blocks realize
the skew form built from the weak divergence of the product function
(interior u0 w0, trace ub wb): with

    B(u, v) = sum_i [ -(u0_i w0, grad v0_i)_K + <ub_i (wb . n), v0_i>_dK ]

the block is (B^T - B)/2, antisymmetric by construction, so the convective
energy of any field against itself vanishes identically.
"""

import numpy as np

from . import polybasis as pb
from . import weakops as wo
from .mesh import FLUID

VARIANTS = {"wg1": "WG-I", "wg2": "WG-II", "wg3": "WG-III",
            "wg-i": "WG-I", "wg-ii": "WG-II", "wg-iii": "WG-III"}


class MethodParams:
    """Polynomial degrees of the method.

    Parameters
    ----------
    degree : int
        Interior degree k >= 1 of velocity components and temperature
        (pressure interiors use k - 1 and pressure traces k).
    trace_degree : int
        Face degree l of velocity/temperature traces, k - 1 or k.
    grad_degree : int
        Target degree m of the weak gradient, k - 1 <= m <= l.
    """

    def __init__(self, degree, trace_degree=None, grad_degree=None,
                 variant=None):
        if trace_degree is None:
            trace_degree = degree
        if grad_degree is None:
            grad_degree = trace_degree
        if degree < 1:
            raise ValueError("degree must be at least 1")
        if trace_degree not in (degree - 1, degree):
            raise ValueError("trace_degree must be degree or degree - 1")
        if not degree - 1 <= grad_degree <= trace_degree:
            raise ValueError("grad_degree must lie in [degree-1, trace_degree]")
        self.degree = degree
        self.trace_degree = trace_degree
        self.grad_degree = grad_degree
        if variant is None:
            if trace_degree == degree:
                variant = "WG-I" if grad_degree == degree else "WG-II"
            else:
                variant = "WG-III"
        self.variant = variant

    @classmethod
    def from_variant(cls, label, degree):
        name = VARIANTS.get(str(label).lower())
        if name is None:
            raise ValueError("unknown method variant %r" % (label,))
        if name == "WG-I":
            return cls(degree, degree, degree, name)
        if name == "WG-II":
            return cls(degree, degree, degree - 1, name)
        return cls(degree, degree - 1, degree - 1, name)

    @property
    def interior_dim(self):
        return pb.tri_dim(self.degree)

    @property
    def trace_dim(self):
        return self.trace_degree + 1

    @property
    def scalar_size(self):
        return self.interior_dim + 3 * self.trace_dim

    @property
    def velocity_size(self):
        return 2 * self.scalar_size

    @property
    def pressure_interior_dim(self):
        return pb.tri_dim(self.degree - 1)

    @property
    def pressure_trace_dim(self):
        return self.degree + 1

    @property
    def pressure_size(self):
        return self.pressure_interior_dim + 3 * self.pressure_trace_dim

    def __repr__(self):
        return ("MethodParams(degree=%d, trace_degree=%d, grad_degree=%d, %s)"
                % (self.degree, self.trace_degree, self.grad_degree,
                   self.variant))


# ----------------------------------------------------------------------
# batched builders (the assembly path)


def gradient_matrix(mesh, elems, interior_degree, trace_degree, target_degree):
    """Weak gradient as one matrix per element, (E, 2*dim_r, ns) over the
    scalar local layout [interior | face traces]."""
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    M_int, M_face = wo.scalar_gradient_blocks(mesh, elems, interior_degree,
                                              trace_degree, target_degree)
    ne = len(elems)
    dim_r = pb.tri_dim(target_degree)
    dim_k = pb.tri_dim(interior_degree)
    nt = trace_degree + 1
    G = np.zeros((ne, 2 * dim_r, dim_k + 3 * nt))
    G[:, :, :dim_k] = M_int.reshape(ne, 2 * dim_r, dim_k)
    for lf in range(3):
        c0 = dim_k + lf * nt
        G[:, :, c0:c0 + nt] = M_face[:, lf].reshape(ne, 2 * dim_r, nt)
    return G


def face_projection_matrix(mesh, elems, interior_degree, trace_degree):
    """P[e, lf, g, b]: global-orientation face-projection coefficients of the
    interior basis, so (P @ v0 - vb) is the stabilization jump."""
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    E = wo.edge_table(interior_degree, trace_degree)       # (3, dim_k, l+1)
    signs = wo.flip_signs(trace_degree)
    FS = np.where(mesh.elem_face_flip[elems][:, :, None],
                  signs[None, None, :], 1.0)               # (E, 3, l+1)
    return np.einsum("elg,lbg->elgb", FS, E)


def scalar_laplacian_blocks(mesh, elems, params):
    """Weak-gradient mass plus h^-1 jump stabilization, (E, ns, ns)."""
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    k, l, m = params.degree, params.trace_degree, params.grad_degree
    G = gradient_matrix(mesh, elems, k, l, m)
    S = np.einsum("e,eia,eib->eab", mesh.det_b[elems], G, G)

    P = face_projection_matrix(mesh, elems, k, l)
    nk = params.interior_dim
    nt = params.trace_dim
    fac = mesh.elem_face_len[elems] / mesh.h_K[elems][:, None]   # (E, 3)
    # interior-interior, interior-trace, trace-trace pieces of the jump form
    S[:, :nk, :nk] += np.einsum("el,elga,elgb->eab", fac, P, P)
    for lf in range(3):
        c0 = nk + lf * nt
        cross = np.einsum("e,ega->eag", fac[:, lf], P[:, lf])
        S[:, :nk, c0:c0 + nt] -= cross
        S[:, c0:c0 + nt, :nk] -= np.swapaxes(cross, 1, 2)
        S[:, c0:c0 + nt, c0:c0 + nt] += fac[:, lf][:, None, None] * np.eye(nt)
    return S


def _blockdiag2(S):
    ne, ns, _ = S.shape
    out = np.zeros((ne, 2 * ns, 2 * ns))
    out[:, :ns, :ns] = S
    out[:, ns:, ns:] = S
    return out


def viscous_blocks(mesh, elems, params, pr):
    """Velocity-velocity momentum diffusion blocks, (E, 2ns, 2ns)."""
    return pr * _blockdiag2(scalar_laplacian_blocks(mesh, elems, params))


def conduction_blocks(mesh, elems, params, kappa):
    """Temperature-temperature blocks, (E, ns, ns)."""
    return kappa * scalar_laplacian_blocks(mesh, elems, params)


def pressure_blocks(mesh, elems, params):
    """(grad_w q, v0) coupling, (E, 2, nk, np): component d of the pressure
    weak gradient tested against the component-d interior velocity basis."""
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    k = params.degree
    Gq = gradient_matrix(mesh, elems, k - 1, k, k)          # (E, 2*nk, np)
    nk = params.interior_dim
    ne = len(elems)
    return (mesh.det_b[elems][:, None, None, None]
            * Gq.reshape(ne, 2, nk, params.pressure_size))


def buoyancy_factor(mesh, elems, pr, ra):
    """Coefficient of the identity coupling upward velocity to temperature."""
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    return pr * ra * mesh.det_b[elems]


def skew_convection_blocks(mesh, elems, params, w_interior, w_traces):
    """Skew transport blocks against a frozen advecting field, (E, ns, ns).

    Parameters
    ----------
    w_interior : (E, 2, nk)
        Interior coefficients of the advecting velocity on each element.
    w_traces : (E, 3, 2, l+1)
        Its global-orientation vector trace coefficients per local face.

    The same scalar block serves each velocity component and the
    temperature equation (the advected quantity's degrees match).
    """
    elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
    k, l = params.degree, params.trace_degree
    nk = params.interior_dim
    nt = params.trace_dim
    ns = params.scalar_size
    ne = len(elems)

    T = wo.conv_volume_table(k)                            # (a, b, g, p)
    W1 = np.einsum("edg,edp->epg", w_interior, mesh.inv_bt[elems])
    B = np.zeros((ne, ns, ns))
    B[:, :nk, :nk] = -np.einsum("e,epg,abgp->eab",
                                mesh.det_b[elems], W1, T)

    F = wo.conv_face_table(k, l)                           # (lf, ap, b, gp)
    signs = wo.flip_signs(l)
    FS = np.where(mesh.elem_face_flip[elems][:, :, None],
                  signs[None, None, :], 1.0)               # (E, 3, l+1)
    wn = np.einsum("eld,eldg->elg", mesh.elem_face_normal[elems], w_traces)
    for lf in range(3):
        r0 = nk + lf * nt
        rows = np.einsum("e,eg,ea,abg->eab",
                         mesh.elem_face_len[elems, lf],
                         wn[:, lf] * FS[:, lf], FS[:, lf], F[lf])
        B[:, r0:r0 + nt, :nk] = rows
    return 0.5 * (np.swapaxes(B, 1, 2) - B)


# ----------------------------------------------------------------------
# per-element reference interface


def _require_fluid(mesh, elem, what):
    if mesh.elem_subdomain[elem] != FLUID:
        raise ValueError("%s is only defined on fluid elements; element %d "
                         "is solid" % (what, elem))


def local_viscous(mesh, elem, params, pr):
    _require_fluid(mesh, elem, "the momentum diffusion block")
    return viscous_blocks(mesh, [elem], params, pr)[0]


def local_conduction(mesh, elem, params, kappa):
    return conduction_blocks(mesh, [elem], params, kappa)[0]


def local_pressure(mesh, elem, params):
    """Full velocity-rows by pressure-columns block (trace rows are zero)."""
    _require_fluid(mesh, elem, "the pressure coupling block")
    blk = pressure_blocks(mesh, [elem], params)[0]         # (2, nk, np)
    ns = params.scalar_size
    nk = params.interior_dim
    out = np.zeros((params.velocity_size, params.pressure_size))
    out[:nk] = blk[0]
    out[ns:ns + nk] = blk[1]
    return out


def local_buoyancy(mesh, elem, params, pr, ra):
    """Velocity-rows by temperature-interior block of Pr Ra (T0 j, v0)."""
    _require_fluid(mesh, elem, "the buoyancy block")
    nk = params.interior_dim
    ns = params.scalar_size
    out = np.zeros((params.velocity_size, nk))
    out[ns:ns + nk] = buoyancy_factor(mesh, [elem], pr, ra)[0] * np.eye(nk)
    return out


def local_convection(mesh, elem, params, w_interior, w_traces):
    """Velocity-velocity skew transport block, (2ns, 2ns)."""
    _require_fluid(mesh, elem, "the momentum transport block")
    S = skew_convection_blocks(mesh, [elem], params,
                               w_interior[None], w_traces[None])
    return _blockdiag2(S)[0]


def local_heat_convection(mesh, elem, params, w_interior, w_traces):
    """Temperature-temperature skew transport block, (ns, ns).

    On solid elements the advecting field is identically zero, so the block
    is zero regardless of the supplied coefficients.
    """
    if mesh.elem_subdomain[elem] != FLUID:
        ns = params.scalar_size
        return np.zeros((ns, ns))
    return skew_convection_blocks(mesh, [elem], params,
                                  w_interior[None], w_traces[None])[0]
