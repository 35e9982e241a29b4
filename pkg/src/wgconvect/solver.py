"""Fixed-point iteration for the coupled flow-temperature system.

Each pass freezes the advecting velocity at the previous iterate, assembles
the linearized step, and solves it; the loop stops when the energy norms of
the velocity and temperature increments fall below the tolerance relative
to the current field scale.

The plain iteration contracts quickly at moderate Rayleigh numbers but
slows down near Ra ~ 1e4 and settles into a cycle near Ra ~ 1e5, where it
never converges.  `relaxation="aitken"` turns on dynamic relaxation of the
fixed-point update (the vector Aitken rule): the next advecting field is
`w + omega * (solve(w) - w)` with `omega` re-estimated every iteration from
the last two update residuals.  That keeps the fixed point and the
diagnostics unchanged while restoring convergence at high Rayleigh numbers;
ramped runs should use it.
"""

import time

import numpy as np

from . import linsys
from . import postproc

# clip range for the dynamic relaxation factor: the lower bound keeps a
# stalled estimate from freezing the iteration, the upper bound keeps one
# noisy residual pair from catapulting the iterate
AITKEN_MIN = 0.05
AITKEN_MAX = 10.0


class TraceRow:
    """Increment norms of one iteration (seconds is wall time, which is
    informational and excluded from trace equality)."""

    __slots__ = ("iteration", "du", "dt", "dp", "seconds")

    def __init__(self, iteration, du, dt, dp, seconds):
        self.iteration = iteration
        self.du = du
        self.dt = dt
        self.dp = dp
        self.seconds = seconds

    def as_tuple(self):
        return (self.iteration, self.du, self.dt, self.dp)

    def __repr__(self):
        return ("TraceRow(n=%d, du=%.3e, dt=%.3e, dp=%.3e, %.3fs)"
                % (self.iteration, self.du, self.dt, self.dp, self.seconds))


class OseenState:
    """Outcome of a fixed-point run: final fields plus the full trace."""

    def __init__(self, fields, previous_velocity, trace, tol, max_iter,
                 converged):
        self.fields = fields
        self.previous_velocity = previous_velocity
        self.trace = trace
        self.tol = tol
        self.max_iter = max_iter
        self.converged = converged

    @property
    def iterations(self):
        return len(self.trace)

    @property
    def du_norm(self):
        return self.trace[-1].du if self.trace else 0.0

    @property
    def dt_norm(self):
        return self.trace[-1].dt if self.trace else 0.0

    @property
    def dp_norm(self):
        return self.trace[-1].dp if self.trace else 0.0

    def __repr__(self):
        word = "converged" if self.converged else "NOT converged"
        return ("OseenState(%s in %d iterations, du=%.3e, dt=%.3e)"
                % (word, self.iterations, self.du_norm, self.dt_norm))


def _coeffs_of(initial_velocity, dofmap):
    if initial_velocity is None:
        return None
    if isinstance(initial_velocity, postproc.WgFields):
        vec = initial_velocity.coeffs
    else:
        vec = np.asarray(initial_velocity, dtype=float)
    if vec.shape != (dofmap.n_dofs,):
        raise ValueError("initial velocity has length %d, DOF map holds %d"
                         % (vec.size, dofmap.n_dofs))
    # only the velocity part seeds the iteration
    out = np.zeros(dofmap.n_dofs)
    stop = dofmap.offset["p_int"]
    out[:stop] = vec[:stop]
    return out


def oseen_solve(mesh, params, problem, tol=1e-9, max_iter=100,
                initial_velocity=None, use_condensation=False,
                relaxation=None):
    """Iterate linearized steps to a fixed point.

    Returns (fields, state); state.converged is False when max_iter ran out
    (the trace is still populated, nothing is raised).  relaxation is None
    for the plain iteration or "aitken" for dynamically relaxed updates;
    either way the returned fields are an exact solve output, so the
    divergence invariants hold whenever the linear solves do.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if relaxation not in (None, "aitken"):
        raise ValueError("relaxation must be None or 'aitken', got %r"
                         % (relaxation,))
    asm = linsys.StepAssembler(mesh, params, problem)
    dm = asm.dofmap
    w = _coeffs_of(initial_velocity, dm)
    prev = w if w is not None else np.zeros(dm.n_dofs)

    trace = []
    fields = None
    converged = False
    omega = 1.0
    r_prev = None
    for n in range(1, max_iter + 1):
        t0 = time.perf_counter()
        system = asm.assemble(w)
        try:
            if use_condensation:
                cond = linsys.condense(system, dm)
                x = cond.recover(linsys.solve_sparse(cond))
            else:
                x = linsys.solve_sparse(system)
        except (RuntimeError, ValueError) as err:
            raise RuntimeError("linear solve failed at iteration %d: %s"
                               % (n, err)) from err
        full, lam = system.expand(x)
        fields = postproc.WgFields(mesh, params, dm, full, lam)
        diff = fields.copy_with(full - prev)
        du = postproc.triple_norm(diff, "velocity")
        dt = postproc.triple_norm(diff, "temperature")
        dp = postproc.pressure_l2(diff)
        trace.append(TraceRow(n, du, dt, dp, time.perf_counter() - t0))
        scale = max(postproc.triple_norm(fields, "velocity")
                    + postproc.triple_norm(fields, "temperature"), 1e-14)
        prev = full
        if relaxation == "aitken":
            base = w if w is not None else np.zeros(dm.n_dofs)
            r = full - base
            if r_prev is not None:
                dr = r - r_prev
                denom = float(dr @ dr)
                if denom > 0.0:
                    omega = -omega * float(r_prev @ dr) / denom
                    omega = min(max(omega, AITKEN_MIN), AITKEN_MAX)
            w = base + omega * r
            r_prev = r
        else:
            w = full
        if du + dt <= tol * scale:
            converged = True
            break
    state = OseenState(fields, prev, trace, tol, max_iter, converged)
    return fields, state


def ramp_rayleigh(mesh, params, problem, targets, tol=1e-9, max_iter=100,
                  use_condensation=False, relaxation=None):
    """Solve a sequence of increasing Rayleigh numbers, warm-starting each
    stage from the previous solution.

    Returns (final fields, list of per-stage OseenState).  A stage that
    fails to converge raises, naming the stage.  relaxation is forwarded to
    every stage; pass "aitken" for targets at or beyond 1e4, where the
    plain iteration stalls.
    """
    targets = [float(t) for t in targets]
    if not targets:
        raise ValueError("the Rayleigh ramp is empty")
    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError("ramp targets must be strictly increasing")
    fields = None
    states = []
    for i, ra in enumerate(targets):
        stage = problem.with_rayleigh(ra)
        fields, state = oseen_solve(
            mesh, params, stage, tol=tol, max_iter=max_iter,
            initial_velocity=fields, use_condensation=use_condensation,
            relaxation=relaxation)
        states.append(state)
        if not state.converged:
            raise RuntimeError(
                "ramp stage %d (Ra=%g) did not converge within %d "
                "iterations (last increments du=%.3e, dt=%.3e)"
                % (i, ra, max_iter, state.du_norm, state.dt_norm))
    return fields, states


def write_trace_csv(trace, path):
    """CSV emitter for a convergence trace."""
    with open(path, "w") as fh:
        fh.write("iteration,velocity_increment,temperature_increment,"
                 "pressure_increment,seconds\n")
        for row in trace:
            fh.write("%d,%.17g,%.17g,%.17g,%.6f\n"
                     % (row.iteration, row.du, row.dt, row.dp, row.seconds))
    return path
