"""Norms, error measures, benchmark quantities, and field export.

The solved coefficient vector is wrapped in WgFields, which knows how to
evaluate the piecewise polynomials and their broken gradients.  Everything
else in this module is a pure function of (fields, mesh, params).
"""

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from . import forms
from . import polybasis as pb
from .mesh import INTERIOR_FLUID, OUTER


class WgFields:
    """Velocity, pressure, and temperature coefficients of one solution."""

    def __init__(self, mesh, params, dofmap, coeffs, multiplier=0.0):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (dofmap.n_dofs,):
            raise ValueError("coefficient vector has length %d, DOF map "
                             "holds %d" % (coeffs.size, dofmap.n_dofs))
        self.mesh = mesh
        self.params = params
        self.dofmap = dofmap
        self.coeffs = coeffs
        self.multiplier = float(multiplier)

    def copy_with(self, coeffs):
        return WgFields(self.mesh, self.params, self.dofmap, coeffs,
                        self.multiplier)

    # -- coefficient views ----------------------------------------------

    def u_interior(self):
        """(Ef, 2, nk) over mesh.fluid_elems."""
        return self.coeffs[self.dofmap.u_interior(self.mesh.fluid_elems)]

    def u_traces(self):
        """(Ff, 2, nt) over mesh.fluid_faces."""
        return self.coeffs[self.dofmap.u_trace(self.mesh.fluid_faces)]

    def p_interior(self):
        return self.coeffs[self.dofmap.p_interior(self.mesh.fluid_elems)]

    def t_interior(self):
        return self.coeffs[self.dofmap.t_interior(
            np.arange(self.mesh.n_elems))]

    def t_traces(self):
        return self.coeffs[self.dofmap.t_trace(np.arange(self.mesh.n_faces))]

    # -- pointwise evaluation (elems are raw element ids) ----------------

    def velocity_at(self, elems, ref_points):
        """(E, q, 2) values of the interior velocity polynomial."""
        phi = pb.scalar_basis(self.params.degree).eval(ref_points)
        ui = self.coeffs[self.dofmap.u_interior(elems)]
        return np.einsum("eda,qa->eqd", ui, phi)

    def velocity_gradient_at(self, elems, ref_points):
        """(E, q, 2, 2) broken gradient, [d, j] = du_d/dx_j."""
        gphi = pb.scalar_basis(self.params.degree).grad(ref_points)
        ui = self.coeffs[self.dofmap.u_interior(elems)]
        gx = np.einsum("ejk,qak->eqaj", self.mesh.inv_bt[elems], gphi)
        return np.einsum("eda,eqaj->eqdj", ui, gx)

    def pressure_at(self, elems, ref_points):
        phi = pb.scalar_basis(self.params.degree - 1).eval(ref_points)
        pi = self.coeffs[self.dofmap.p_interior(elems)]
        return np.einsum("ea,qa->eq", pi, phi)

    def temperature_at(self, elems, ref_points):
        phi = pb.scalar_basis(self.params.degree).eval(ref_points)
        ti = self.coeffs[self.dofmap.t_interior(elems)]
        return np.einsum("ea,qa->eq", ti, phi)

    def temperature_gradient_at(self, elems, ref_points):
        gphi = pb.scalar_basis(self.params.degree).grad(ref_points)
        ti = self.coeffs[self.dofmap.t_interior(elems)]
        gx = np.einsum("ejk,qak->eqaj", self.mesh.inv_bt[elems], gphi)
        return np.einsum("ea,eqaj->eqj", ti, gx)

    def _weak_gradient_at(self, elems, ref_points, interior, traces):
        """Reconstructed weak gradient of one scalar component, (E, q, 2)."""
        mesh, params = self.mesh, self.params
        G = forms.gradient_matrix(mesh, elems, params.degree,
                                  params.trace_degree, params.grad_degree)
        vec = np.concatenate([interior, traces.reshape(len(elems), -1)],
                             axis=1)
        g = np.einsum("eis,es->ei", G, vec).reshape(len(elems), 2, -1)
        phi = pb.scalar_basis(params.grad_degree).eval(ref_points)
        return np.einsum("eja,qa->eqj", g, phi)

    def velocity_weak_gradient_at(self, elems, ref_points):
        """(E, q, 2, 2) reconstructed weak gradient, [d, j] = d(u_d)/dx_j."""
        elems = np.asarray(elems, dtype=np.int64)
        nt = self.params.trace_dim
        ui = self.coeffs[self.dofmap.u_interior(elems)]
        tr = self.coeffs[self.dofmap.u_trace(
            self.mesh.elem_faces[elems].ravel())]
        tr = tr.reshape(len(elems), 3, 2, nt)
        out = np.empty((len(elems), len(ref_points), 2, 2))
        for d in range(2):
            out[:, :, d, :] = self._weak_gradient_at(
                elems, ref_points, ui[:, d, :], tr[:, :, d, :])
        return out

    def temperature_weak_gradient_at(self, elems, ref_points):
        """(E, q, 2) reconstructed weak gradient of the temperature."""
        elems = np.asarray(elems, dtype=np.int64)
        nt = self.params.trace_dim
        ti = self.coeffs[self.dofmap.t_interior(elems)]
        tr = self.coeffs[self.dofmap.t_trace(
            self.mesh.elem_faces[elems].ravel())]
        return self._weak_gradient_at(elems, ref_points, ti,
                                      tr.reshape(len(elems), 3, nt))


def interpolate_exact(mesh, params, dofmap, exact, quad_degree=None):
    """WG interpolant of a closed-form solution (interior and face L2
    projections componentwise).  Fixed DOFs keep their boundary values."""
    k, l = params.degree, params.trace_degree
    if quad_degree is None:
        quad_degree = 2 * k + 12
    coeffs = dofmap.fixed_values.copy()
    fe = mesh.fluid_elems
    ff = mesh.fluid_faces
    all_e = np.arange(mesh.n_elems)
    all_f = np.arange(mesh.n_faces)

    for d in range(2):
        comp = lambda x, y, d=d: exact.u(x, y)[..., d]
        coeffs[dofmap.u_interior(fe)[:, d, :]] = pb.project_interior(
            mesh, fe, k, comp, quad_degree)
        tr = pb.project_face(mesh, ff, l, comp, quad_degree)
        idx = dofmap.u_trace(ff)[:, d, :]
        free = ~dofmap.fixed_mask[idx]
        coeffs[idx[free]] = tr[free]
    coeffs[dofmap.p_interior(fe)] = pb.project_interior(
        mesh, fe, k - 1, exact.p, quad_degree)
    coeffs[dofmap.p_trace(ff)] = pb.project_face(
        mesh, ff, k, exact.p, quad_degree)
    coeffs[dofmap.t_interior(all_e)] = pb.project_interior(
        mesh, all_e, k, exact.T, quad_degree)
    tr = pb.project_face(mesh, all_f, l, exact.T, quad_degree)
    idx = dofmap.t_trace(all_f)
    free = ~dofmap.fixed_mask[idx]
    coeffs[idx[free]] = tr[free]
    return WgFields(mesh, params, dofmap, coeffs)


# ----------------------------------------------------------------------
# norms


def _scalar_triple_sq(mesh, elems, params, interior, traces):
    """Batched |||.|||^2 for scalar weak functions given (E, nk) interiors
    and (E, 3, nt) traces: weak-gradient energy plus scaled trace jumps."""
    k, l, m = params.degree, params.trace_degree, params.grad_degree
    nk, nt = params.interior_dim, params.trace_dim
    vec = np.concatenate([interior, traces.reshape(len(elems), 3 * nt)],
                         axis=1)
    G = forms.gradient_matrix(mesh, elems, k, l, m)
    g = np.einsum("eis,es->ei", G, vec)
    total = np.einsum("e,ei,ei->", mesh.det_b[elems], g, g)
    P = forms.face_projection_matrix(mesh, elems, k, l)
    jump = np.einsum("elgb,eb->elg", P, interior) - traces
    fac = mesh.elem_face_len[elems] / mesh.h_K[elems][:, None]
    total += np.einsum("el,elg,elg->", fac, jump, jump)
    return float(total)


def triple_norm(fields, kind):
    """Discrete energy norm of the velocity (fluid zone) or temperature
    (whole domain) part of a WgFields solution."""
    mesh, params, dm = fields.mesh, fields.params, fields.dofmap
    nt = params.trace_dim
    if kind == "velocity":
        elems = mesh.fluid_elems
        total = 0.0
        tr_all = fields.coeffs[dm.u_trace(mesh.elem_faces[elems].ravel())]
        tr_all = tr_all.reshape(len(elems), 3, 2, nt)
        ui = fields.coeffs[dm.u_interior(elems)]
        for d in range(2):
            total += _scalar_triple_sq(mesh, elems, params, ui[:, d, :],
                                       tr_all[:, :, d, :])
        return np.sqrt(total)
    if kind == "temperature":
        elems = np.arange(mesh.n_elems)
        ti = fields.coeffs[dm.t_interior(elems)]
        tr = fields.coeffs[dm.t_trace(mesh.elem_faces[elems].ravel())]
        return np.sqrt(_scalar_triple_sq(
            mesh, elems, params, ti, tr.reshape(len(elems), 3, nt)))
    raise ValueError("kind must be 'velocity' or 'temperature', got %r"
                     % (kind,))


def pressure_l2(fields):
    """L2 norm of the interior pressure over the fluid zone."""
    p = fields.p_interior()
    return float(np.sqrt(np.sum(
        fields.mesh.det_b[fields.mesh.fluid_elems][:, None] * p ** 2)))


# ----------------------------------------------------------------------
# error measurement


class ErrorReport:
    """Relative errors of one solve against a closed-form solution.

    grad_u and grad_t measure the broken gradient of the interior
    polynomials; grad_u_rec and grad_t_rec measure the reconstructed weak
    gradient, which can converge at a different rate when the gradient
    space is smaller than the interior space.
    """

    FIELDS = ("grad_u", "l2_u", "l2_p", "grad_t", "l2_t")

    def __init__(self, grad_u, l2_u, l2_p, grad_t, l2_t, div_h, h,
                 grad_u_rec=None, grad_t_rec=None):
        self.grad_u = grad_u
        self.l2_u = l2_u
        self.l2_p = l2_p
        self.grad_t = grad_t
        self.l2_t = l2_t
        self.div_h = div_h
        self.h = h
        self.grad_u_rec = grad_u_rec
        self.grad_t_rec = grad_t_rec

    def as_row(self):
        return [self.h, self.grad_u, self.l2_u, self.l2_p,
                self.grad_t, self.l2_t, self.div_h]

    def __repr__(self):
        return ("ErrorReport(grad_u=%.4e, l2_u=%.4e, l2_p=%.4e, "
                "grad_t=%.4e, l2_t=%.4e, div_h=%.2e)"
                % (self.grad_u, self.l2_u, self.l2_p, self.grad_t,
                   self.l2_t, self.div_h))


def error_report(fields, exact, quad_degree=None):
    """Relative L2 and broken-gradient errors against exact fields."""
    mesh, params = fields.mesh, fields.params
    if quad_degree is None:
        quad_degree = max(2 * params.degree + 4, 16)
    qr = pb.QuadratureRule.triangle(quad_degree)
    fe = mesh.fluid_elems
    all_e = np.arange(mesh.n_elems)

    def integ(elems, values_sq):
        return np.sum(mesh.det_b[elems][:, None] * qr.weights * values_sq)

    pts_f = mesh.map_points(fe, qr.points)
    xf, yf = pts_f[..., 0], pts_f[..., 1]
    pts_a = mesh.map_points(all_e, qr.points)
    xa, ya = pts_a[..., 0], pts_a[..., 1]

    ue = exact.u(xf, yf)
    ge = exact.grad_u(xf, yf)
    pe = exact.p(xf, yf)
    te = exact.T(xa, ya)
    gte = exact.grad_T(xa, ya)

    uh = fields.velocity_at(fe, qr.points)
    gh = fields.velocity_gradient_at(fe, qr.points)
    ph = fields.pressure_at(fe, qr.points)
    th = fields.temperature_at(all_e, qr.points)
    gth = fields.temperature_gradient_at(all_e, qr.points)

    gh_rec = fields.velocity_weak_gradient_at(fe, qr.points)
    gth_rec = fields.temperature_weak_gradient_at(all_e, qr.points)

    def rel(err_sq, ref_sq):
        return float(np.sqrt(err_sq / ref_sq)) if ref_sq > 0 else \
            float(np.sqrt(err_sq))

    gu_ref = integ(fe, np.sum(ge ** 2, axis=(-2, -1)))
    gt_ref = integ(all_e, np.sum(gte ** 2, axis=-1))
    grad_u = rel(integ(fe, np.sum((gh - ge) ** 2, axis=(-2, -1))), gu_ref)
    l2_u = rel(integ(fe, np.sum((uh - ue) ** 2, axis=-1)),
               integ(fe, np.sum(ue ** 2, axis=-1)))
    l2_p = rel(integ(fe, (ph - pe) ** 2), integ(fe, pe ** 2))
    grad_t = rel(integ(all_e, np.sum((gth - gte) ** 2, axis=-1)), gt_ref)
    l2_t = rel(integ(all_e, (th - te) ** 2), integ(all_e, te ** 2))
    grad_u_rec = rel(integ(fe, np.sum((gh_rec - ge) ** 2, axis=(-2, -1))),
                     gu_ref)
    grad_t_rec = rel(integ(all_e, np.sum((gth_rec - gte) ** 2, axis=-1)),
                     gt_ref)
    div_h, _ = divergence_diagnostic(fields)
    from .mesh import mesh_size
    return ErrorReport(grad_u, l2_u, l2_p, grad_t, l2_t, div_h,
                       mesh_size(mesh), grad_u_rec=grad_u_rec,
                       grad_t_rec=grad_t_rec)


def observed_order(errors):
    """Convergence rates log2(e_i / e_{i+1}) for errors on halving meshes."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1 or len(errors) < 2:
        raise ValueError("need at least two error values")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive to take rates")
    return np.log2(errors[:-1] / errors[1:])


def divergence_diagnostic(fields, quad_degree=None):
    """(max_K h_K^-1 ||div u0||_K, max_e integral of |[u0 . n]| per face).

    The jump scan covers interior fluid faces (two-sided) and fluid
    boundary faces, where the trace datum is zero.
    """
    mesh, params = fields.mesh, fields.params
    if quad_degree is None:
        quad_degree = 2 * params.degree + 2
    qr = pb.QuadratureRule.triangle(quad_degree)
    basis = pb.scalar_basis(params.degree)
    fe = mesh.fluid_elems
    ui = fields.coeffs[fields.dofmap.u_interior(fe)]
    gphi = basis.grad(qr.points)
    gx = np.einsum("ejk,qak->eqaj", mesh.inv_bt[fe], gphi)
    div = np.einsum("eda,eqad->eq", ui, gx)
    div_norm = np.sqrt(mesh.det_b[fe] * np.sum(qr.weights * div ** 2, axis=1))
    div_h = float(np.max(div_norm / mesh.h_K[fe])) if len(fe) else 0.0

    eq = pb.QuadratureRule.edge(2 * params.degree + 2)
    worst = 0.0
    for f in mesh.fluid_faces:
        tag = mesh.face_tag[f]
        pts = mesh.face_points(np.array([f]), eq.points)[0]
        n = mesh.normals[f]
        sides = []
        for e in mesh.face_elems[f]:
            if e < 0 or not mesh.is_fluid[e]:
                continue
            ref = (pts - mesh.elem_origin[e]) @ mesh.inv_bt[e]
            phi = basis.eval(ref)
            ue = fields.coeffs[fields.dofmap.u_interior([e])][0]
            sides.append(np.einsum("da,qa,d->q", ue, phi, n))
        if tag == INTERIOR_FLUID and len(sides) == 2:
            jump = sides[0] - sides[1]
        elif len(sides) == 1:
            jump = sides[0]          # boundary datum is zero
        else:
            continue
        worst = max(worst, float(mesh.h_e[f] * np.sum(eq.weights
                                                      * np.abs(jump))))
    return div_h, worst


# ----------------------------------------------------------------------
# cavity benchmark quantities


class CavityReport:
    """Benchmark numbers for the differentially heated cavity."""

    def __init__(self, u1_max, u2_max, nu_bar, nu_max, nu_min, nu_volume):
        self.u1_max = u1_max
        self.u2_max = u2_max
        self.nu_bar = nu_bar
        self.nu_max = nu_max
        self.nu_min = nu_min
        self.nu_volume = nu_volume

    def __repr__(self):
        return ("CavityReport(u1_max=%.4f, u2_max=%.4f, nu_bar=%.4f, "
                "nu_max=%.4f, nu_min=%.4f)" % (
                    self.u1_max, self.u2_max, self.nu_bar, self.nu_max,
                    self.nu_min))


def _segment_in_triangle(verts, axis, value):
    """Intersection of the line {x_axis = value} with a closed triangle,
    as an interval along the other axis (lo, hi), or None."""
    other = 1 - axis
    crossings = []
    for i in range(3):
        a, b = verts[i], verts[(i + 1) % 3]
        fa, fb = a[axis] - value, b[axis] - value
        if abs(fa) < 1e-13:
            crossings.append(a[other])
        if fa * fb < 0:
            t = fa / (fa - fb)
            crossings.append(a[other] + t * (b[other] - a[other]))
    if not crossings:
        return None
    return min(crossings), max(crossings)


def _midplane_extremum(fields, axis, value, component, n_samples=12):
    """Largest |u_component| along the line {x_axis = value} through the
    fluid zone, sampling every crossed element (both sides of shared
    edges)."""
    mesh = fields.mesh
    nodes = 0.5 * (1.0 + np.cos(np.pi * np.arange(n_samples) /
                                (n_samples - 1)))
    best = None
    for e in mesh.fluid_elems:
        verts = mesh.vertices[mesh.triangles[e]]
        span = _segment_in_triangle(verts, axis, value)
        if span is None:
            continue
        lo, hi = span
        other = lo + (hi - lo) * nodes if hi > lo else np.array([lo])
        pts = np.empty((len(other), 2))
        pts[:, axis] = value
        pts[:, 1 - axis] = other
        ref = (pts - mesh.elem_origin[e]) @ mesh.inv_bt[e]
        vals = fields.velocity_at([e], ref)[0, :, component]
        cand = float(np.max(np.abs(vals)))
        best = cand if best is None else max(best, cand)
    if best is None:
        raise ValueError("no fluid element crosses the requested mid-plane")
    return best


def _hot_wall_faces(mesh):
    """Outer fluid faces on the left (heated) wall, with their elements."""
    wall_of = mesh.face_wall()
    faces = [f for f in mesh.fluid_faces
             if mesh.face_tag[f] == OUTER and wall_of[f] == "left"]
    if not faces:
        raise ValueError("the mesh has no fluid faces on the left wall")
    return np.asarray(faces)


def _wall_nusselt(fields, faces, t):
    """-dT0/dx of the wall element's polynomial at face points t."""
    mesh = fields.mesh
    out = []
    for f in faces:
        e = mesh.face_elems[f, 0]
        pts = mesh.face_points(np.array([f]), t)[0]
        ref = (pts - mesh.elem_origin[e]) @ mesh.inv_bt[e]
        g = fields.temperature_gradient_at([e], ref)[0]
        out.append(-g[:, 0])
    return np.asarray(out)         # (faces, len(t))


def cavity_report(fields, n_samples=12, quad_degree=None):
    """Mid-plane velocity extrema and hot-wall Nusselt numbers.

    nu_bar integrates the local wall Nusselt over the hot wall; nu_volume
    is the cavity-average alternative (u1*T - dT/dx integrated over the
    fluid zone), reported alongside.
    """
    mesh, params = fields.mesh, fields.params
    if quad_degree is None:
        quad_degree = 2 * params.degree + 4
    x0, x1, y0, y1 = mesh.fluid_rect
    u1_max = _midplane_extremum(fields, 0, 0.5 * (x0 + x1), 0, n_samples)
    u2_max = _midplane_extremum(fields, 1, 0.5 * (y0 + y1), 1, n_samples)

    faces = _hot_wall_faces(mesh)
    gx, gw = np.polynomial.legendre.leggauss((quad_degree + 2) // 2)
    tq = 0.5 * (gx + 1.0)
    nu_q = _wall_nusselt(fields, faces, tq)
    nu_bar = float(np.sum(mesh.h_e[faces][:, None] * 0.5 * gw * nu_q))
    nu_bar /= (y1 - y0)

    cheb = 0.5 * (1.0 + np.cos(np.pi * np.arange(n_samples) /
                               (n_samples - 1)))
    nu_s = _wall_nusselt(fields, faces, cheb)
    nu_max = float(np.max(nu_s))
    nu_min = float(np.min(nu_s))

    qr = pb.QuadratureRule.triangle(quad_degree)
    fe = mesh.fluid_elems
    uh = fields.velocity_at(fe, qr.points)
    th = fields.temperature_at(fe, qr.points)
    gth = fields.temperature_gradient_at(fe, qr.points)
    dens = uh[..., 0] * th - gth[..., 0]
    nu_volume = float(np.sum(mesh.det_b[fe][:, None] * qr.weights * dens))
    nu_volume /= (x1 - x0) * (y1 - y0)
    return CavityReport(u1_max, u2_max, nu_bar, nu_max, nu_min, nu_volume)


# ----------------------------------------------------------------------
# stream function


def stream_function(fields, quad_degree=None):
    """Continuous-P1 stream function of the fluid velocity at mesh vertices.

    Solves -laplace(psi) = curl u_h0 (broken vorticity) with psi = 0 on the
    fluid boundary; vertices outside the fluid zone carry 0.
    """
    mesh, params = fields.mesh, fields.params
    if quad_degree is None:
        quad_degree = 2 * params.degree + 2
    fe = mesh.fluid_elems
    tri = mesh.triangles[fe]
    verts = mesh.vertices

    # P1 stiffness on each fluid triangle: the gradient of hat_i is
    # perp(opposite edge) / (2 area)
    v0, v1, v2 = (verts[tri[:, i]] for i in range(3))
    area = 0.5 * mesh.det_b[fe]
    opp = np.stack([v2 - v1, v0 - v2, v1 - v0], axis=1)     # (E, 3, 2)
    perp = np.stack([-opp[..., 1], opp[..., 0]], axis=-1)
    # orient: perp must point toward vertex i; CCW triangles make this hold
    grads = perp / (2.0 * area)[:, None, None]
    K_el = np.einsum("e,eid,ejd->eij", area, grads, grads)

    qr = pb.QuadratureRule.triangle(quad_degree)
    lam = np.column_stack([1.0 - qr.points.sum(axis=1),
                           qr.points[:, 0], qr.points[:, 1]])
    gu = fields.velocity_gradient_at(fe, qr.points)
    vort = gu[..., 1, 0] - gu[..., 0, 1]
    F_el = np.einsum("e,q,eq,qi->ei", mesh.det_b[fe], qr.weights, vort, lam)

    rows = np.repeat(tri[:, :, None], 3, axis=2)
    cols = np.repeat(tri[:, None, :], 3, axis=1)
    nv = mesh.n_vertices
    K = sps.coo_matrix((K_el.ravel(), (rows.ravel(), cols.ravel())),
                       shape=(nv, nv)).tocsr()
    F = np.zeros(nv)
    np.add.at(F, tri.ravel(), F_el.ravel())

    fluid_verts = np.unique(tri)
    bound = np.unique(mesh.faces[mesh.vel_dirichlet_mask].ravel())
    free = np.setdiff1d(fluid_verts, bound)
    psi = np.zeros(nv)
    if len(free):
        Kff = K[free][:, free].tocsc()
        psi[free] = spla.spsolve(Kff, F[free])
    return psi


# ----------------------------------------------------------------------
# export


def _vertex_averages(fields):
    """Per-vertex averages of the adjacent interior polynomials.

    Returns dict of arrays over mesh vertices: u1, u2 and p averaged over
    adjacent fluid elements (0 where none), T over all adjacent elements.
    """
    mesh = fields.mesh
    nv = mesh.n_vertices
    ref_corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    sums = {name: np.zeros(nv) for name in ("u1", "u2", "p", "T")}
    cnt_f = np.zeros(nv)
    cnt_a = np.zeros(nv)

    all_e = np.arange(mesh.n_elems)
    tvals = fields.temperature_at(all_e, ref_corners)      # (E, 3)
    np.add.at(sums["T"], mesh.triangles.ravel(), tvals.ravel())
    np.add.at(cnt_a, mesh.triangles.ravel(), 1.0)

    fe = mesh.fluid_elems
    if len(fe):
        uvals = fields.velocity_at(fe, ref_corners)        # (Ef, 3, 2)
        pvals = fields.pressure_at(fe, ref_corners)
        ids = mesh.triangles[fe].ravel()
        np.add.at(sums["u1"], ids, uvals[..., 0].ravel())
        np.add.at(sums["u2"], ids, uvals[..., 1].ravel())
        np.add.at(sums["p"], ids, pvals.ravel())
        np.add.at(cnt_f, ids, 1.0)

    out = {}
    out["T"] = sums["T"] / np.maximum(cnt_a, 1.0)
    for name in ("u1", "u2", "p"):
        out[name] = sums[name] / np.maximum(cnt_f, 1.0)
    return out


def export_fields(fields, path):
    """Legacy-VTK ASCII dump of vertex-sampled fields (u1, u2, p, T, psi)."""
    mesh = fields.mesh
    data = _vertex_averages(fields)
    data["psi"] = stream_function(fields)
    try:
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write("stationary natural convection fields\n")
            fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            fh.write("POINTS %d double\n" % mesh.n_vertices)
            for x, y in mesh.vertices:
                fh.write("%.17g %.17g 0\n" % (x, y))
            fh.write("CELLS %d %d\n" % (mesh.n_elems, 4 * mesh.n_elems))
            for tri in mesh.triangles:
                fh.write("3 %d %d %d\n" % tuple(tri))
            fh.write("CELL_TYPES %d\n" % mesh.n_elems)
            fh.write("5\n" * mesh.n_elems)
            fh.write("POINT_DATA %d\n" % mesh.n_vertices)
            for name in ("u1", "u2", "p", "T", "psi"):
                fh.write("SCALARS %s double 1\nLOOKUP_TABLE default\n"
                         % name)
                for v in data[name]:
                    fh.write("%.17g\n" % v)
    except OSError as err:
        raise OSError("cannot write field export to %s: %s" % (path, err))
    return path


def write_convergence_csv(reports, path):
    """CSV of error reports plus observed orders, one row per mesh."""
    cols = ErrorReport.FIELDS
    with open(path, "w") as fh:
        fh.write("h," + ",".join(cols) + ","
                 + ",".join("order_" + c for c in cols) + ",div_h\n")
        for i, rep in enumerate(reports):
            row = ["%.17g" % rep.h]
            row += ["%.17g" % getattr(rep, c) for c in cols]
            for c in cols:
                if i == 0:
                    row.append("")
                else:
                    prev = getattr(reports[i - 1], c)
                    row.append("%.3f" % np.log2(prev / getattr(rep, c)))
            row.append("%.3e" % rep.div_h)
            fh.write(",".join(row) + "\n")
    return path


def write_cavity_csv(entries, path):
    """CSV of cavity reports; entries are (label, CavityReport) pairs."""
    with open(path, "w") as fh:
        fh.write("case,u1_max,u2_max,nu_bar,nu_max,nu_min,nu_volume\n")
        for label, rep in entries:
            fh.write("%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n"
                     % (label, rep.u1_max, rep.u2_max, rep.nu_bar,
                        rep.nu_max, rep.nu_min, rep.nu_volume))
    return path
