import numpy as np
import pytest

from wgconvect import forms
from wgconvect import linsys
from wgconvect import postproc
from wgconvect import problems
from wgconvect import solver
from wgconvect.mesh import build_structured_mesh


def manufactured_setup(nx, ny, degree=1, variant="wg1"):
    prob = problems.manufactured_convection()
    mesh = build_structured_mesh(nx, ny, prob.domain, prob.fluid_rect)
    params = forms.MethodParams.from_variant(variant, degree)
    return prob, mesh, params


def cavity_setup(n, ra, degree=1):
    prob = problems.cavity(ra)
    mesh = build_structured_mesh(n, n, prob.domain, prob.fluid_rect)
    params = forms.MethodParams.from_variant("wg1", degree)
    return prob, mesh, params


def zero_data_problem():
    return problems.ProblemSpec(
        pr=1.0, ra=10.0, kappa=1.0,
        domain=(-1.0, 1.0, 0.0, 1.0), fluid_rect=(0.0, 1.0, 0.0, 1.0),
        f=lambda x, y: np.zeros(np.shape(x) + (2,)),
        g=lambda x, y: np.zeros(np.shape(x)),
        temp_bc={w: ("dirichlet", "0") for w in
                 ("left", "right", "bottom", "top")},
        name="zero-data")


# ------------------------------------------------------------ fixed point


def test_zero_data_converges_to_zero_in_one_iteration():
    prob = zero_data_problem()
    mesh = build_structured_mesh(4, 2, prob.domain, prob.fluid_rect)
    params = forms.MethodParams.from_variant("wg1", 1)
    fields, state = solver.oseen_solve(mesh, params, prob)
    assert state.converged
    assert state.iterations == 1
    assert np.max(np.abs(fields.coeffs)) < 1e-12


def test_manufactured_iteration_contracts():
    prob, mesh, params = manufactured_setup(8, 4)
    fields, state = solver.oseen_solve(mesh, params, prob, tol=1e-10)
    assert state.converged
    assert state.iterations <= 15
    du = [row.du for row in state.trace]
    dt = [row.dt for row in state.trace]
    # the tail of the fixed-point iteration must contract
    for seq in (du, dt):
        for a, b in zip(seq[-3:], seq[-2:]):
            assert b < a


def test_trace_is_deterministic_across_reruns():
    prob, mesh, params = manufactured_setup(4, 2)
    _, s1 = solver.oseen_solve(mesh, params, prob, tol=1e-10)
    _, s2 = solver.oseen_solve(mesh, params, prob, tol=1e-10)
    assert [r.as_tuple() for r in s1.trace] == [r.as_tuple() for r in
                                                s2.trace]


def test_max_iter_exhaustion_reports_not_converged():
    prob, mesh, params = manufactured_setup(4, 2)
    fields, state = solver.oseen_solve(mesh, params, prob, tol=1e-14,
                                       max_iter=2)
    assert not state.converged
    assert state.iterations == 2
    assert fields is not None


def test_condensed_solve_matches_direct():
    prob, mesh, params = manufactured_setup(8, 4)
    f_direct, s_direct = solver.oseen_solve(mesh, params, prob, tol=1e-10)
    f_cond, s_cond = solver.oseen_solve(mesh, params, prob, tol=1e-10,
                                        use_condensation=True)
    assert s_direct.iterations == s_cond.iterations
    scale = np.max(np.abs(f_direct.coeffs))
    assert np.max(np.abs(f_direct.coeffs - f_cond.coeffs)) < 1e-9 * scale


def test_interpolant_warm_start_does_not_iterate_longer():
    prob, mesh, params = manufactured_setup(8, 4)
    dm = linsys.DofMap(mesh, params)
    seed = postproc.interpolate_exact(mesh, params, dm, prob.exact)
    _, cold = solver.oseen_solve(mesh, params, prob, tol=1e-9)
    _, warm = solver.oseen_solve(mesh, params, prob, tol=1e-9,
                                 initial_velocity=seed)
    assert warm.converged
    assert warm.iterations <= cold.iterations


def test_bad_arguments_rejected():
    prob, mesh, params = manufactured_setup(4, 2)
    with pytest.raises(ValueError):
        solver.oseen_solve(mesh, params, prob, tol=0.0)
    with pytest.raises(ValueError):
        solver.oseen_solve(mesh, params, prob, max_iter=0)
    with pytest.raises(ValueError):
        solver.oseen_solve(mesh, params, prob,
                           initial_velocity=np.zeros(3))
    with pytest.raises(ValueError):
        solver.oseen_solve(mesh, params, prob, relaxation="newton")


def test_linear_solve_failure_names_the_iteration(monkeypatch):
    prob, mesh, params = manufactured_setup(4, 2)

    def boom(system, factor=None):
        raise RuntimeError("factorization exploded")

    monkeypatch.setattr(linsys, "solve_sparse", boom)
    with pytest.raises(RuntimeError, match="iteration 1"):
        solver.oseen_solve(mesh, params, prob)


# ---------------------------------------------------------------- ramping


def test_ramp_validates_targets():
    prob, mesh, params = cavity_setup(4, 1e3)
    with pytest.raises(ValueError):
        solver.ramp_rayleigh(mesh, params, prob, [])
    with pytest.raises(ValueError):
        solver.ramp_rayleigh(mesh, params, prob, [1e3, 1e2])


def test_single_stage_ramp_equals_plain_solve():
    prob, mesh, params = cavity_setup(6, 1e3)
    f_plain, s_plain = solver.oseen_solve(mesh, params, prob, tol=1e-9)
    f_ramp, states = solver.ramp_rayleigh(mesh, params, prob, [1e3],
                                          tol=1e-9)
    assert len(states) == 1
    assert np.array_equal(f_plain.coeffs, f_ramp.coeffs)
    assert [r.as_tuple() for r in states[0].trace] \
        == [r.as_tuple() for r in s_plain.trace]


def test_two_stage_ramp_warm_starts_the_second_stage():
    prob, mesh, params = cavity_setup(6, 1e3)
    _, cold = solver.oseen_solve(mesh, params, prob, tol=1e-9)
    _, states = solver.ramp_rayleigh(mesh, params, prob, [1e2, 1e3],
                                     tol=1e-9)
    assert all(s.converged for s in states)
    assert states[-1].iterations <= cold.iterations


def test_ramp_failure_names_the_stage():
    prob, mesh, params = cavity_setup(4, 1e3)
    with pytest.raises(RuntimeError, match="stage 0"):
        solver.ramp_rayleigh(mesh, params, prob, [1e3], tol=1e-14,
                             max_iter=2)


def test_ramp_rejects_manufactured_forcing():
    prob, mesh, params = manufactured_setup(4, 2)
    with pytest.raises(ValueError):
        solver.ramp_rayleigh(mesh, params, prob, [10.0, 100.0])


# ------------------------------------------------------------- relaxation


def test_relaxed_iteration_converges_where_plain_stalls():
    # at Ra = 1e4 the plain fixed point contracts at roughly 0.89 per
    # iteration, far too slowly for a 30-iteration budget; the dynamically
    # relaxed update converges well inside it from the same warm start
    prob, mesh, params = cavity_setup(8, 1e3)
    warm, _ = solver.oseen_solve(mesh, params, prob, tol=1e-9)
    hot = prob.with_rayleigh(1e4)
    _, plain = solver.oseen_solve(mesh, params, hot, tol=1e-9, max_iter=30,
                                  initial_velocity=warm)
    assert not plain.converged
    fields, relaxed = solver.oseen_solve(mesh, params, hot, tol=1e-9,
                                         max_iter=30, initial_velocity=warm,
                                         relaxation="aitken")
    assert relaxed.converged
    assert relaxed.iterations <= 30
    # the returned fields are a solve output, so the divergence invariants
    # survive the relaxed update
    div, jump = postproc.divergence_diagnostic(fields)
    assert div < 1e-10
    assert jump < 1e-10


def test_relaxed_ramp_reaches_high_rayleigh():
    prob, mesh, params = cavity_setup(8, 1e4)
    fields, states = solver.ramp_rayleigh(mesh, params, prob, [1e3, 1e4],
                                          tol=1e-9, relaxation="aitken")
    assert all(s.converged for s in states)
    rep = postproc.cavity_report(fields)
    assert np.isfinite(rep.nu_bar) and rep.nu_bar > 1.0


# ------------------------------------------------------------------ trace


def test_trace_csv_roundtrip(tmp_path):
    trace = [solver.TraceRow(1, 0.5, 0.25, 0.125, 0.01),
             solver.TraceRow(2, 0.05, 0.025, 0.0125, 0.02)]
    path = tmp_path / "trace.csv"
    solver.write_trace_csv(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ("iteration,velocity_increment,"
                        "temperature_increment,pressure_increment,seconds")
    parts = lines[1].split(",")
    assert int(parts[0]) == 1
    assert [float(v) for v in parts[1:4]] == [0.5, 0.25, 0.125]


def test_state_properties_reflect_last_row():
    trace = [solver.TraceRow(1, 0.5, 0.25, 0.125, 0.0),
             solver.TraceRow(2, 0.05, 0.025, 0.0125, 0.0)]
    state = solver.OseenState(None, None, trace, 1e-9, 100, True)
    assert state.iterations == 2
    assert state.du_norm == 0.05
    assert state.dt_norm == 0.025
    assert state.dp_norm == 0.0125
    assert "converged" in repr(state)
