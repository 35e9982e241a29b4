"""Global degrees of freedom, assembly of one linearized step, and solves.

Global coefficient layout (all DOFs, fixed ones included), in blocks:

    [ velocity interiors (fluid elements, component-major)
    | velocity traces    (fluid-adjacent faces, component-major)
    | pressure interiors (fluid elements)
    | pressure traces    (fluid-adjacent faces)
    | temperature interiors (all elements)
    | temperature traces (all faces) ]

plus one trailing scalar multiplier enforcing the zero mean of the interior
pressure over the fluid zone; the multiplier lives only in the reduced
(free-DOF) system, at index n_free.

Each linearized step freezes the advecting velocity w and solves

    a(u,v) + c(w;u,v) + b(v,p) - b(u,q) - d(T,v) = (f, v0)
    abar(T,s) + cbar(w;T,s) = (g, s0)

for (u, p, T) simultaneously; Dirichlet data is lifted to the right-hand
side.  The temperature rows do not involve (u, p), so the coupled matrix is
block triangular in that ordering, but it is assembled and solved as one
sparse system.
"""

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from . import forms
from . import polybasis as pb
from .mesh import FLUID, OUTER


class DofMap:
    """Index bookkeeping plus per-DOF fixed/free status.

    Velocity traces on the fluid boundary (outer fluid walls and the
    fluid-solid interface) are fixed to zero at construction; temperature
    conditions are applied afterwards by apply_nonhomogeneous_dirichlet.
    """

    def __init__(self, mesh, params):
        self.mesh = mesh
        self.params = params
        k, l = params.degree, params.trace_degree
        nk, nt = params.interior_dim, params.trace_dim
        nkm1, ntp = params.pressure_interior_dim, params.pressure_trace_dim

        self.n_fluid_elems = len(mesh.fluid_elems)
        self.n_fluid_faces = len(mesh.fluid_faces)
        self.elem_fluid_pos = np.full(mesh.n_elems, -1, dtype=np.int64)
        self.elem_fluid_pos[mesh.fluid_elems] = np.arange(self.n_fluid_elems)
        self.face_fluid_pos = np.full(mesh.n_faces, -1, dtype=np.int64)
        self.face_fluid_pos[mesh.fluid_faces] = np.arange(self.n_fluid_faces)

        sizes = [
            ("u_int", 2 * nk * self.n_fluid_elems),
            ("u_tr", 2 * nt * self.n_fluid_faces),
            ("p_int", nkm1 * self.n_fluid_elems),
            ("p_tr", ntp * self.n_fluid_faces),
            ("t_int", nk * mesh.n_elems),
            ("t_tr", nt * mesh.n_faces),
        ]
        self.offset = {}
        pos = 0
        for name, size in sizes:
            self.offset[name] = pos
            pos += size
        self.n_dofs = pos

        self.fixed_mask = np.zeros(self.n_dofs, dtype=bool)
        self.fixed_values = np.zeros(self.n_dofs)
        vel_faces = np.flatnonzero(mesh.vel_dirichlet_mask)
        self.fixed_mask[self.u_trace(vel_faces).ravel()] = True
        self._rebuild()

    def _rebuild(self):
        self.free_index = np.full(self.n_dofs, -1, dtype=np.int64)
        free = ~self.fixed_mask
        self.n_free = int(np.sum(free))
        self.free_index[free] = np.arange(self.n_free)
        self.free_dofs = np.flatnonzero(free)

    # -- index helpers (vectorized over elements/faces) -----------------

    def u_interior(self, elems):
        """(E, 2, nk) global indices; elements must be fluid."""
        nk = self.params.interior_dim
        fe = self.elem_fluid_pos[np.atleast_1d(elems)]
        if np.any(fe < 0):
            raise ValueError("velocity DOFs requested on a solid element")
        base = self.offset["u_int"] + 2 * nk * fe
        return (base[:, None, None] + nk * np.arange(2)[None, :, None]
                + np.arange(nk)[None, None, :])

    def u_trace(self, faces):
        nt = self.params.trace_dim
        ff = self.face_fluid_pos[np.atleast_1d(faces)]
        if np.any(ff < 0):
            raise ValueError("velocity trace DOFs requested on a solid face")
        base = self.offset["u_tr"] + 2 * nt * ff
        return (base[:, None, None] + nt * np.arange(2)[None, :, None]
                + np.arange(nt)[None, None, :])

    def p_interior(self, elems):
        nkm1 = self.params.pressure_interior_dim
        fe = self.elem_fluid_pos[np.atleast_1d(elems)]
        return self.offset["p_int"] + nkm1 * fe[:, None] + np.arange(nkm1)

    def p_trace(self, faces):
        ntp = self.params.pressure_trace_dim
        ff = self.face_fluid_pos[np.atleast_1d(faces)]
        return self.offset["p_tr"] + ntp * ff[:, None] + np.arange(ntp)

    def t_interior(self, elems):
        nk = self.params.interior_dim
        elems = np.atleast_1d(elems)
        return self.offset["t_int"] + nk * elems[:, None] + np.arange(nk)

    def t_trace(self, faces):
        nt = self.params.trace_dim
        faces = np.atleast_1d(faces)
        return self.offset["t_tr"] + nt * faces[:, None] + np.arange(nt)

    # -- local layouts matching the forms module ------------------------

    def velocity_local(self, elems):
        """(E, 2 ns) indices in the component-major local velocity layout."""
        nk, nt = self.params.interior_dim, self.params.trace_dim
        ns = self.params.scalar_size
        elems = np.atleast_1d(elems)
        ui = self.u_interior(elems)                     # (E, 2, nk)
        ut = self.u_trace(self.mesh.elem_faces[elems].ravel()).reshape(
            len(elems), 3, 2, nt)
        out = np.empty((len(elems), 2, ns), dtype=np.int64)
        out[:, :, :nk] = ui
        for lf in range(3):
            out[:, :, nk + lf * nt: nk + (lf + 1) * nt] = ut[:, lf]
        return out.reshape(len(elems), 2 * ns)

    def scalar_local(self, elems):
        """(E, ns) temperature-layout indices, valid on every element."""
        nk, nt = self.params.interior_dim, self.params.trace_dim
        elems = np.atleast_1d(elems)
        ti = self.t_interior(elems)
        tt = self.t_trace(self.mesh.elem_faces[elems].ravel()).reshape(
            len(elems), 3, nt)
        out = np.empty((len(elems), self.params.scalar_size), dtype=np.int64)
        out[:, :nk] = ti
        for lf in range(3):
            out[:, nk + lf * nt: nk + (lf + 1) * nt] = tt[:, lf]
        return out

    def pressure_local(self, elems):
        nkm1 = self.params.pressure_interior_dim
        ntp = self.params.pressure_trace_dim
        elems = np.atleast_1d(elems)
        pi = self.p_interior(elems)
        pt = self.p_trace(self.mesh.elem_faces[elems].ravel()).reshape(
            len(elems), 3, ntp)
        out = np.empty((len(elems), self.params.pressure_size), dtype=np.int64)
        out[:, :nkm1] = pi
        for lf in range(3):
            out[:, nkm1 + lf * ntp: nkm1 + (lf + 1) * ntp] = pt[:, lf]
        return out

    def interior_dofs_of_element(self, elem):
        """All interior DOFs of one element (the statically condensable set)."""
        ids = [self.t_interior([elem]).ravel()]
        if self.mesh.elem_subdomain[elem] == FLUID:
            ids = [self.u_interior([elem]).ravel(),
                   self.p_interior([elem]).ravel()] + ids
        return np.concatenate(ids)


def apply_nonhomogeneous_dirichlet(dofmap, problem, quad_degree=None):
    """Fix temperature traces on Dirichlet walls to face-projected data.

    Insulated walls stay free.  Returns the updated dofmap.
    """
    mesh = dofmap.mesh
    l = dofmap.params.trace_degree
    if quad_degree is None:
        quad_degree = 2 * dofmap.params.degree + 4
    wall_of = mesh.face_wall()
    outer = np.flatnonzero(mesh.face_tag == OUTER)
    unassigned = [int(f) for f in outer if wall_of[f] == ""]
    if unassigned:
        raise ValueError("boundary faces %s lie on no wall" % unassigned)
    missing = sorted(set(wall_of[outer]) - set(problem.temp_bc))
    if missing:
        raise ValueError("walls %s carry neither temperature data nor an "
                         "insulation flag" % missing)
    for wall, (kind, _) in problem.temp_bc.items():
        faces = outer[wall_of[outer] == wall]
        if kind == "insulated" or len(faces) == 0:
            continue
        data = problem.temp_dirichlet_fn(wall)
        coeffs = pb.project_face(mesh, faces, l, data, quad_degree)
        idx = dofmap.t_trace(faces)
        dofmap.fixed_mask[idx.ravel()] = True
        dofmap.fixed_values[idx.ravel()] = coeffs.ravel()
    dofmap._rebuild()
    return dofmap


class GlobalSystem:
    """One assembled linear step over the free DOFs plus the multiplier.

    border_index/ground_index mark the mean-pressure multiplier row and a
    pressure DOF that can ground the constant mode; solve_sparse uses them
    to factor around the dense constraint row (see _solve_bordered).
    """

    def __init__(self, matrix, rhs, dofmap, border_index=None,
                 ground_index=None):
        self.matrix = matrix
        self.rhs = rhs
        self.dofmap = dofmap
        self.border_index = border_index
        self.ground_index = ground_index

    @property
    def dim(self):
        return self.dofmap.n_free + 1

    def expand(self, x):
        """Scatter a reduced solution to the full coefficient vector.

        Returns (full_coefficients, multiplier_value).
        """
        dm = self.dofmap
        full = dm.fixed_values.copy()
        full[dm.free_dofs] = x[:dm.n_free]
        return full, float(x[dm.n_free])

    def dump(self, path):
        """Coordinate-format text dump (row col value per line)."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write("%d %d %d\n" % (coo.shape[0], coo.shape[1], coo.nnz))
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write("%d %d %.17g\n" % (r, c, v))


class StepAssembler:
    """Assembles Oseen steps, reusing everything that does not depend on the
    frozen advecting field (diffusion, pressure coupling, buoyancy,
    conduction, forcing moments, the mean-pressure row)."""

    def __init__(self, mesh, params, problem, dofmap=None):
        self.mesh = mesh
        self.params = params
        self.problem = problem
        if dofmap is None:
            dofmap = apply_nonhomogeneous_dirichlet(DofMap(mesh, params),
                                                    problem)
        self.dofmap = dofmap
        self._build_static()

    def _build_static(self):
        mesh, params, problem = self.mesh, self.params, self.problem
        dm = self.dofmap
        fe = mesh.fluid_elems
        all_e = np.arange(mesh.n_elems)
        nk = params.interior_dim

        rows, cols, vals = [], [], []

        def add(block_rows, block_cols, block_vals):
            rows.append(block_rows.ravel())
            cols.append(block_cols.ravel())
            vals.append(block_vals.ravel())

        vloc = dm.velocity_local(fe)                     # (Ef, 2ns)
        sloc = dm.scalar_local(all_e)                    # (E, ns)
        ploc = dm.pressure_local(fe)                     # (Ef, np)

        A = forms.viscous_blocks(mesh, fe, params, problem.pr)
        add(np.repeat(vloc[:, :, None], vloc.shape[1], axis=2),
            np.repeat(vloc[:, None, :], vloc.shape[1], axis=1), A)

        B = forms.pressure_blocks(mesh, fe, params)      # (Ef, 2, nk, np)
        ui = dm.u_interior(fe)                           # (Ef, 2, nk)
        r_b = np.broadcast_to(ui[:, :, :, None], B.shape)
        c_b = np.broadcast_to(ploc[:, None, None, :], B.shape)
        add(r_b, c_b, B)                                 # + b(v, p)
        add(c_b, r_b, -B)                                # - b(u, q)

        fac = forms.buoyancy_factor(mesh, fe, problem.pr, problem.ra)
        ti_f = dm.t_interior(fe)                         # (Ef, nk)
        diag = np.broadcast_to(fac[:, None], (len(fe), nk))
        add(ui[:, 1, :], ti_f, -diag)                    # - d(T, v)

        C = forms.conduction_blocks(mesh, all_e, params, problem.kappa)
        add(np.repeat(sloc[:, :, None], sloc.shape[1], axis=2),
            np.repeat(sloc[:, None, :], sloc.shape[1], axis=1), C)

        self._static_rows = np.concatenate(rows)
        self._static_cols = np.concatenate(cols)
        self._static_vals = np.concatenate(vals)

        rhs = np.zeros(dm.n_dofs)
        qd = max(2 * params.degree + 2,
                 problem.forcing_degree + params.degree)
        fmom = np.stack([
            pb.project_interior(mesh, fe, params.degree,
                                lambda x, y, d=d: problem.f(x, y)[..., d], qd)
            for d in range(2)], axis=1)                  # (Ef, 2, nk)
        rhs[ui.ravel()] += (mesh.det_b[fe][:, None, None] * fmom).ravel()
        gmom = pb.project_interior(mesh, all_e, params.degree, problem.g, qd)
        rhs[dm.t_interior(all_e).ravel()] += (
            mesh.det_b[all_e][:, None] * gmom).ravel()
        self._static_rhs = rhs

        # mean-pressure constraint: integral of p0 over the fluid zone
        self._constraint_dofs = dm.p_interior(fe)[:, 0]
        self._constraint_vals = mesh.det_b[fe] / np.sqrt(2.0)

        self._vloc = vloc
        self._sloc = sloc

    def _convection_triplets(self, w_full):
        mesh, params = self.mesh, self.params
        dm = self.dofmap
        fe = mesh.fluid_elems
        nk, nt = params.interior_dim, params.trace_dim
        ns = params.scalar_size

        w_int = w_full[dm.u_interior(fe)]                # (Ef, 2, nk)
        w_tr = w_full[dm.u_trace(mesh.elem_faces[fe].ravel())].reshape(
            len(fe), 3, 2, nt)
        S = forms.skew_convection_blocks(mesh, fe, params, w_int, w_tr)

        rows, cols, vals = [], [], []
        vloc2 = self._vloc.reshape(len(fe), 2, ns)
        for c in range(2):                               # momentum transport
            loc = vloc2[:, c, :]
            rows.append(np.repeat(loc[:, :, None], ns, axis=2).ravel())
            cols.append(np.repeat(loc[:, None, :], ns, axis=1).ravel())
            vals.append(S.ravel())
        # the same skew block advects the temperature on fluid elements
        sloc_f = self._sloc[fe]
        rows.append(np.repeat(sloc_f[:, :, None], ns, axis=2).ravel())
        cols.append(np.repeat(sloc_f[:, None, :], ns, axis=1).ravel())
        vals.append(S.ravel())
        return (np.concatenate(rows), np.concatenate(cols),
                np.concatenate(vals))

    def assemble(self, w_prev=None):
        """Assemble the step with frozen advecting field w_prev (full-layout
        coefficients; None means zero, i.e. a Stokes-like step)."""
        dm = self.dofmap
        if w_prev is None:
            w_full = np.zeros(dm.n_dofs)
        else:
            w_prev = np.asarray(w_prev, dtype=float)
            if w_prev.shape != (dm.n_dofs,):
                raise ValueError(
                    "w_prev has length %d but the DOF map holds %d"
                    % (w_prev.size, dm.n_dofs))
            vel_fixed = dm.fixed_mask.copy()
            vel_fixed[dm.offset["p_int"]:] = False
            if np.any(w_prev[vel_fixed] != 0.0):
                raise ValueError("w_prev must vanish at fixed velocity DOFs")
            w_full = w_prev

        rows = self._static_rows
        cols = self._static_cols
        vals = self._static_vals
        if w_prev is not None and np.any(w_full):
            cr, cc, cv = self._convection_triplets(w_full)
            rows = np.concatenate([rows, cr])
            cols = np.concatenate([cols, cc])
            vals = np.concatenate([vals, cv])

        free = dm.free_index
        n = dm.n_free
        rhs = self._static_rhs[dm.free_dofs].copy()

        r_free = free[rows]
        c_free = free[cols]
        keep_row = r_free >= 0
        lift = keep_row & (c_free < 0)
        np.subtract.at(rhs, r_free[lift],
                       vals[lift] * dm.fixed_values[cols[lift]])
        keep = keep_row & (c_free >= 0)

        con_r = free[self._constraint_dofs]
        mat = sps.coo_matrix(
            (np.concatenate([vals[keep], self._constraint_vals,
                             self._constraint_vals]),
             (np.concatenate([r_free[keep], np.full(len(con_r), n), con_r]),
              np.concatenate([c_free[keep], con_r, np.full(len(con_r), n)]))),
            shape=(n + 1, n + 1)).tocsr()
        return GlobalSystem(mat, np.append(rhs, 0.0), dm,
                            border_index=n, ground_index=int(con_r[0]))


def assemble_oseen_step(mesh, params, problem, w_prev=None, dofmap=None):
    """One-shot assembly of a linearized step (see StepAssembler)."""
    return StepAssembler(mesh, params, problem, dofmap).assemble(w_prev)


def _solve_bordered(mat, rhs, n, q, beta=1.0):
    """Solve a system whose row/column n is dense (the mean constraint).

    Clears row/column n, puts 1 at (n, n) and beta at (q, q) to ground the
    constant-pressure mode, factors that sparse matrix, and restores the
    difference as a rank-3 correction (Woodbury).  Returns None when the
    correction system degenerates; the caller then falls back to a plain
    factorization.
    """
    coo = mat.tocoo()
    keep = (coo.row != n) & (coo.col != n)
    size = mat.shape[0]
    grounded = sps.coo_matrix(
        (np.concatenate([coo.data[keep], [1.0, beta]]),
         (np.concatenate([coo.row[keep], [n, q]]),
          np.concatenate([coo.col[keep], [n, q]]))),
        shape=mat.shape).tocsc()
    try:
        lu = spla.splu(grounded)
    except RuntimeError:
        return None
    col = np.asarray(mat[:, n].todense()).ravel()
    row = np.asarray(mat[n].todense()).ravel()
    diag = col[n]
    U = np.zeros((size, 3))
    U[:, 0] = col
    U[n, 1] = 1.0
    U[q, 2] = 1.0
    W = np.zeros((size, 3))
    W[n, 0] = 1.0
    W[:, 1] = row
    W[n, 1] -= diag + 1.0
    W[q, 2] = -beta
    Z = lu.solve(U)
    small = np.eye(3) + W.T @ Z
    y = lu.solve(rhs)
    try:
        corr = np.linalg.solve(small, W.T @ y)
    except np.linalg.LinAlgError:
        return None
    return y - Z @ corr


def solve_sparse(system, factor=None):
    """Direct sparse solve with a residual guarantee.

    Returns the solution of system.matrix @ x = system.rhs; raises with the
    factorization diagnostic if the matrix is singular, and raises if the
    relative residual exceeds 1e-10.  Systems carrying a mean-constraint
    border are solved through _solve_bordered (same answer, much less
    factorization fill); the residual check always runs against the
    original matrix, and failures fall back to the plain factorization.
    """
    bnorm = np.linalg.norm(system.rhs)
    floor = max(bnorm, 1.0)
    n = getattr(system, "border_index", None)
    q = getattr(system, "ground_index", None)
    if factor is None and n is not None and q is not None and n != q:
        x = _solve_bordered(system.matrix, system.rhs, n, q)
        if x is not None:
            resid = np.linalg.norm(system.matrix @ x - system.rhs)
            if resid <= 1e-10 * floor:
                return x
    mat = system.matrix.tocsc()
    try:
        lu = factor if factor is not None else spla.splu(mat)
        x = lu.solve(system.rhs)
    except RuntimeError as err:
        raise RuntimeError("sparse factorization failed (%s); the system is "
                           "singular or near-singular" % err) from err
    resid = np.linalg.norm(system.matrix @ x - system.rhs)
    if resid > 1e-10 * floor:
        raise RuntimeError("direct solve residual %.3e exceeds the 1e-10 "
                           "contract (rhs norm %.3e)" % (resid, bnorm))
    return x


# ----------------------------------------------------------------------
# static condensation


class CondensedSystem:
    """Schur complement of a step onto trace DOFs plus the multiplier."""

    def __init__(self, matrix, rhs, retained, recovery, dofmap,
                 border_index=None, ground_index=None):
        self.matrix = matrix
        self.rhs = rhs
        self.retained = retained          # free-system indices kept
        self._recovery = recovery         # per element: (ids, lu, A_it, cols)
        self.dofmap = dofmap
        self.border_index = border_index
        self.ground_index = ground_index

    def recover(self, xt):
        """Full free-DOF solution (plus multiplier) from the trace solution."""
        n = self.dofmap.n_free + 1
        x = np.zeros(n)
        x[self.retained] = xt
        for ids, inv, a_it, cols, b_i in self._recovery:
            x[ids] = inv @ (b_i - a_it @ x[cols])
        return x


def condense(system, dofmap):
    """Eliminate all element-interior DOFs from an assembled step.

    Interiors only couple within their own element, so the Schur complement
    is exact and elementwise.  Returns a CondensedSystem whose matrix runs
    over the retained DOFs (traces and the multiplier, in ascending
    free-index order).
    """
    mesh = dofmap.mesh
    n = dofmap.n_free + 1
    interior = np.zeros(n, dtype=bool)
    elem_ids = []
    for e in range(mesh.n_elems):
        ids = dofmap.free_index[dofmap.interior_dofs_of_element(e)]
        if np.any(ids < 0):
            raise AssertionError("interior DOFs must never be fixed")
        elem_ids.append(ids)
        interior[ids] = True
    retained = np.flatnonzero(~interior)
    ret_pos = np.full(n, -1, dtype=np.int64)
    ret_pos[retained] = np.arange(len(retained))

    A = system.matrix.tocsr()
    rhs_t = system.rhs[retained].copy()
    S_rows, S_cols, S_vals = [], [], []
    recovery = []
    A_csc = system.matrix.tocsc()

    for e, ids in enumerate(elem_ids):
        block = A[ids]                                 # (ni, n) sparse
        sub = block.tocoo()
        col_ids = np.unique(sub.col)
        own = np.isin(col_ids, ids)
        ext_cols = col_ids[~own]
        dense = np.asarray(block[:, col_ids].todense())
        pos = {int(c): i for i, c in enumerate(col_ids)}
        Aii = np.zeros((len(ids), len(ids)))
        for i, c in enumerate(ids):
            if int(c) in pos:               # absent means structurally zero
                Aii[:, i] = dense[:, pos[int(c)]]
        Ait = dense[:, [pos[int(c)] for c in ext_cols]]
        try:
            inv = np.linalg.inv(Aii)
        except np.linalg.LinAlgError:
            raise ValueError("interior block of element %d is singular; "
                             "check the element geometry and degrees" % e)
        gap = np.max(np.abs(Aii @ inv - np.eye(len(ids))))
        if not np.isfinite(gap) or gap > 1e-6:
            raise ValueError("interior block of element %d is numerically "
                             "singular (inverse defect %.2e)" % (e, gap))
        b_i = system.rhs[ids]
        X = inv @ Ait                                  # (ni, next)
        # rows of retained equations that touch this element's interiors
        Ati = A_csc[:, ids].tocoo()      # columns renumbered to 0..ni-1
        t_mask = ret_pos[Ati.row] >= 0
        t_entries = sps.coo_matrix(
            (Ati.data[t_mask], (ret_pos[Ati.row[t_mask]], Ati.col[t_mask])),
            shape=(len(retained), len(ids))).tocsr()
        contrib = t_entries @ X                        # sparse x dense
        contrib = np.asarray(contrib)
        nz_rows = np.flatnonzero(np.abs(contrib).sum(axis=1))
        for r in nz_rows:
            S_rows.append(np.full(len(ext_cols), r))
            S_cols.append(ret_pos[ext_cols])
            S_vals.append(-contrib[r])
        rhs_t -= np.asarray(t_entries @ (inv @ b_i)).ravel()
        recovery.append((ids, inv, Ait, ext_cols, b_i))

    S_tt = A[retained][:, retained]
    if S_rows:
        S_fill = sps.coo_matrix(
            (np.concatenate(S_vals),
             (np.concatenate(S_rows), np.concatenate(S_cols))),
            shape=S_tt.shape)
        S = (S_tt + S_fill).tocsr()
    else:
        S = S_tt.tocsr()
    border = int(ret_pos[dofmap.n_free])        # multiplier is never interior
    p0 = int(dofmap.free_index[dofmap.offset["p_tr"]])
    ground = int(ret_pos[p0]) if p0 >= 0 else -1
    return CondensedSystem(S, rhs_t, retained, recovery, dofmap,
                           border_index=border if border >= 0 else None,
                           ground_index=ground if ground >= 0 else None)


# ----------------------------------------------------------------------
# saddle-point sanity


def pressure_schur_smallest(mesh, params, problem):
    """Two smallest generalized eigenvalues of the pressure Schur block.

    The block is B A^-1 B^T over free pressure DOFs, measured against the
    discrete pressure norm (interior L2 plus weak-gradient seminorm).  The
    smallest eigenvalue is the known constant-pressure null mode (should be
    ~0); the second is the squared inf-sup constant, which must not collapse
    under refinement.
    """
    dm = apply_nonhomogeneous_dirichlet(DofMap(mesh, params), problem)
    system = StepAssembler(mesh, params, problem, dm).assemble(None)
    A = system.matrix.tocsr()

    fe = mesh.fluid_elems
    u_dofs = np.concatenate([
        dm.free_index[dm.u_interior(fe).ravel()],
        dm.free_index[dm.u_trace(mesh.fluid_faces).ravel()]])
    u_dofs = np.unique(u_dofs[u_dofs >= 0])
    p_dofs = np.unique(np.concatenate([
        dm.free_index[dm.p_interior(fe).ravel()],
        dm.free_index[dm.p_trace(mesh.fluid_faces).ravel()]]))

    Auu = A[u_dofs][:, u_dofs].tocsc()
    Bpu = A[p_dofs][:, u_dofs].tocsr()
    lu = spla.splu(Auu)
    rhsm = np.asarray(Bpu.todense()).T                  # (nu, np)
    S = Bpu @ lu.solve(rhsm)

    # pressure norm Gram matrix in the same DOF order: interior L2 mass plus
    # the h-scaled weak-gradient seminorm (the scaling that makes the inf-sup
    # constant mesh-uniform)
    k = params.degree
    ploc = dm.pressure_local(fe)
    G = forms.gradient_matrix(mesh, fe, k - 1, k, k)
    wgt = mesh.det_b[fe] * mesh.h_K[fe] ** 2
    N_el = np.einsum("e,eia,eib->eab", wgt, G, G)
    nkm1 = params.pressure_interior_dim
    N_el[:, :nkm1, :nkm1] += mesh.det_b[fe][:, None, None] * np.eye(nkm1)
    rowsN = np.repeat(ploc[:, :, None], ploc.shape[1], axis=2).ravel()
    colsN = np.repeat(ploc[:, None, :], ploc.shape[1], axis=1).ravel()
    Nfull = sps.coo_matrix(
        (N_el.ravel(), (dm.free_index[rowsN], dm.free_index[colsN])),
        shape=(dm.n_free, dm.n_free)).tocsr()
    N = np.asarray(Nfull[p_dofs][:, p_dofs].todense())

    import scipy.linalg as sla
    vals = sla.eigh((S + S.T) / 2, N, eigvals_only=True,
                    subset_by_index=[0, 1])
    return float(vals[0]), float(vals[1])
