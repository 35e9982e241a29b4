"""Command-line driver for convergence studies, cavity benchmarks, and
one-off solves.

Three subcommands share one option vocabulary: `converge` runs a problem
with a known exact solution over a halving mesh sequence and tabulates
errors and orders, `cavity` runs the buoyancy-driven cavity benchmark with
an optional Rayleigh ramp, and `solve` runs one mesh from a problem config
file.  All numeric tables are printed with 5 significant digits; the CSV
files carry full precision.  Exit status is 0 only if every solve converged
and the divergence and mean-pressure invariants hold.
"""

import argparse
import os
import sys

# thread count for the BLAS backing numpy/scipy; must be set before the
# numeric stack loads, so this runs at import time of the entry module
_threads = os.environ.get("WGCONVECT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import numpy as np

from . import forms
from . import polybasis as pb
from . import postproc
from . import problems
from . import solver
from .mesh import build_structured_mesh

DIV_TOL = 1e-10
MEAN_P_TOL = 1e-9


def _parse_mesh(text):
    try:
        nx, ny = text.lower().split("x")
        nx, ny = int(nx), int(ny)
    except ValueError:
        raise ValueError("mesh must look like 8x4, got %r" % text)
    if nx < 1 or ny < 1:
        raise ValueError("mesh cells must be positive, got %r" % text)
    return nx, ny


def _parse_mesh_sequence(text):
    meshes = [_parse_mesh(t) for t in text.split(",") if t]
    if len(meshes) < 2:
        raise ValueError("a convergence study needs at least two meshes")
    for (ax, ay), (bx, by) in zip(meshes, meshes[1:]):
        if (bx, by) != (2 * ax, 2 * ay):
            raise ValueError("mesh sequence must halve h at every step; "
                             "%dx%d does not refine %dx%d"
                             % (bx, by, ax, ay))
    return meshes


def _load_problem(args):
    """Problem plus method/solver settings, flags overriding the config."""
    method, sopts = {}, {}
    if args.config:
        problem, method, sopts = problems.load_config(args.config)
    elif args.problem == "manufactured":
        problem = problems.manufactured_convection()
    elif args.problem == "cavity":
        problem = problems.cavity(args.ra)
    elif args.problem is None:
        raise ValueError("provide --config or --problem")
    else:
        raise ValueError("unknown problem %r; built-ins are "
                         "'manufactured' and 'cavity'" % args.problem)
    if args.degree is not None:
        method["degree"] = args.degree
    if args.variant is not None:
        method["variant"] = args.variant
    if args.tol is not None:
        sopts["tol"] = args.tol
    if args.max_iter is not None:
        sopts["max_iter"] = args.max_iter
    method.setdefault("degree", 1)
    method.setdefault("variant", "wg1")
    sopts.setdefault("tol", 1e-9)
    sopts.setdefault("max_iter", 100)
    params = forms.MethodParams.from_variant(method["variant"],
                                             method["degree"])
    return problem, params, sopts


def _mean_pressure(fields):
    mesh = fields.mesh
    qr = pb.QuadratureRule.triangle(max(fields.params.degree - 1, 1))
    vals = fields.pressure_at(mesh.fluid_elems, qr.points)
    return float(np.sum(mesh.det_b[mesh.fluid_elems][:, None]
                        * qr.weights * vals))


def _check_invariants(fields):
    """(ok, message) for the divergence and mean-pressure contracts."""
    div_h, jump = postproc.divergence_diagnostic(fields)
    mean_p = _mean_pressure(fields)
    scale = max(postproc.pressure_l2(fields), 1.0)
    ok = div_h <= DIV_TOL and jump <= DIV_TOL \
        and abs(mean_p) <= MEAN_P_TOL * scale
    msg = ("divergence %.3e, face jump %.3e, mean pressure %.3e -> %s"
           % (div_h, jump, mean_p, "PASS" if ok else "FAIL"))
    return ok, msg


def _solve_case(mesh, params, problem, sopts, condense):
    """One solve honoring the solver options; a config-declared Rayleigh
    ramp runs relaxed and reports its final stage."""
    targets = sopts.get("ramp")
    if targets:
        fields, states = solver.ramp_rayleigh(
            mesh, params, problem, targets, tol=sopts["tol"],
            max_iter=sopts["max_iter"], use_condensation=condense,
            relaxation="aitken")
        return fields, states[-1]
    fields, state = solver.oseen_solve(
        mesh, params, problem, tol=sopts["tol"], max_iter=sopts["max_iter"],
        use_condensation=condense)
    return fields, state


def _print_convergence_table(meshes, reports):
    names = postproc.ErrorReport.FIELDS
    head = "mesh      " + "".join("%-18s" % n for n in names) + "div_h"
    print(head)
    prev = None
    for (nx, ny), rep in zip(meshes, reports):
        cells = []
        for n in names:
            err = getattr(rep, n)
            if prev is None:
                cells.append("%.4E (-)   " % err)
            else:
                order = np.log2(getattr(prev, n) / err)
                cells.append("%.4E (%.2f)" % (err, order))
        print("%-10s%s %.1E" % ("%dx%d" % (nx, ny), " ".join(cells),
                                rep.div_h))
        prev = rep


def cmd_converge(args):
    problem, params, sopts = _load_problem(args)
    if problem.exact is None:
        raise ValueError("a convergence study needs a problem with an "
                         "exact solution; the config defines none")
    meshes = _parse_mesh_sequence(args.meshes)
    os.makedirs(args.outdir, exist_ok=True)

    reports = []
    ok = True
    for nx, ny in meshes:
        mesh = build_structured_mesh(nx, ny, problem.domain,
                                     problem.fluid_rect)
        fields, state = _solve_case(mesh, params, problem, sopts,
                                    args.condense)
        inv_ok, msg = _check_invariants(fields)
        print("%dx%d: %s in %d iterations; %s"
              % (nx, ny, "converged" if state.converged else "NOT converged",
                 state.iterations, msg))
        ok = ok and state.converged and inv_ok
        reports.append(postproc.error_report(fields, problem.exact))

    print()
    _print_convergence_table(meshes, reports)
    csv = os.path.join(args.outdir, "convergence.csv")
    postproc.write_convergence_csv(reports, csv)
    print("\nwrote %s" % csv)
    return 0 if ok else 1


def _default_ramp(ra):
    targets = []
    t = 1e3
    while t < ra:
        targets.append(t)
        t *= 10.0
    targets.append(ra)
    return targets


def cmd_cavity(args):
    args.problem = "cavity"
    args.config = None
    problem, params, sopts = _load_problem(args)
    nx, ny = _parse_mesh(args.mesh)
    mesh = build_structured_mesh(nx, ny, problem.domain, problem.fluid_rect)
    os.makedirs(args.outdir, exist_ok=True)

    # high Rayleigh numbers default to the ramp: the plain cold-start
    # iteration stops contracting somewhere above Ra = 1e3
    ramping = (args.ramp or problem.ra > 1e3) and problem.ra > 0
    if ramping:
        targets = sopts.get("ramp") or _default_ramp(problem.ra)
        fields, states = solver.ramp_rayleigh(
            mesh, params, problem, targets, tol=sopts["tol"],
            max_iter=sopts["max_iter"], use_condensation=args.condense,
            relaxation="aitken")
        state = states[-1]
        for ra, st in zip(targets, states):
            print("Ra=%g: converged in %d iterations" % (ra, st.iterations))
    else:
        fields, state = _solve_case(mesh, params, problem, sopts,
                                    args.condense)
        print("Ra=%g: %s in %d iterations"
              % (problem.ra, "converged" if state.converged else
                 "NOT converged", state.iterations))

    inv_ok, msg = _check_invariants(fields)
    print(msg)
    rep = postproc.cavity_report(fields)
    for name in ("u1_max", "u2_max", "nu_bar", "nu_max", "nu_min",
                 "nu_volume"):
        print("%-10s %.5g" % (name, getattr(rep, name)))

    label = "ra%g-%s-k%d-%dx%d" % (problem.ra, params.variant,
                                   params.degree, nx, ny)
    postproc.write_cavity_csv([(label, rep)],
                              os.path.join(args.outdir, "cavity.csv"))
    solver.write_trace_csv(state.trace,
                           os.path.join(args.outdir, "trace.csv"))
    postproc.export_fields(fields, os.path.join(args.outdir, "fields.vtk"))
    print("wrote %s" % os.path.join(args.outdir, "cavity.csv"))
    return 0 if state.converged and inv_ok else 1


def cmd_solve(args):
    problem, params, sopts = _load_problem(args)
    nx, ny = _parse_mesh(args.mesh)
    mesh = build_structured_mesh(nx, ny, problem.domain, problem.fluid_rect)
    os.makedirs(args.outdir, exist_ok=True)

    fields, state = _solve_case(mesh, params, problem, sopts, args.condense)
    print("%s in %d iterations"
          % ("converged" if state.converged else "NOT converged",
             state.iterations))
    inv_ok, msg = _check_invariants(fields)
    print(msg)

    if problem.exact is not None:
        rep = postproc.error_report(fields, problem.exact)
        for name in postproc.ErrorReport.FIELDS:
            print("%-10s %.5g" % (name, getattr(rep, name)))
        postproc.write_convergence_csv(
            [rep], os.path.join(args.outdir, "errors.csv"))

    solver.write_trace_csv(state.trace,
                           os.path.join(args.outdir, "trace.csv"))
    path = postproc.export_fields(fields,
                                  os.path.join(args.outdir, "fields.vtk"))
    print("wrote %s" % path)
    return 0 if state.converged and inv_ok else 1


def _add_common(sub):
    sub.add_argument("-k", "--degree", type=int, default=None,
                     help="polynomial degree of the interior spaces")
    sub.add_argument("--variant", choices=("wg1", "wg2", "wg3"),
                     default=None, help="trace/gradient degree pairing")
    sub.add_argument("--tol", type=float, default=None,
                     help="fixed-point relative tolerance")
    sub.add_argument("--max-iter", type=int, default=None,
                     help="fixed-point iteration cap")
    sub.add_argument("--condense", action="store_true",
                     help="solve the statically condensed trace system")
    sub.add_argument("-o", "--outdir", default="out",
                     help="directory for CSV/VTK artifacts")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="wgconvect",
        description="Weak Galerkin solver for stationary natural "
                    "convection with exactly divergence-free velocity.",
        epilog="Set WGCONVECT_THREADS to pin the BLAS thread count.")
    sub = ap.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("converge",
                          help="error table over a halving mesh sequence")
    _add_common(conv)
    conv.add_argument("--problem", default="manufactured",
                      help="built-in problem name (default: manufactured)")
    conv.add_argument("--config", default=None,
                      help="problem config file (must define exact fields)")
    conv.add_argument("--meshes", default="8x4,16x8,32x16,64x32",
                      help="comma-separated cell counts, e.g. 8x4,16x8")
    conv.set_defaults(func=cmd_converge)

    cav = sub.add_parser("cavity", help="buoyancy-driven cavity benchmark")
    _add_common(cav)
    cav.add_argument("--ra", type=float, default=1e3,
                     help="Rayleigh number")
    cav.add_argument("--mesh", default="40x40", help="cell counts, NxM")
    cav.add_argument("--ramp", action="store_true",
                     help="force the decade-by-decade Rayleigh ramp "
                          "(automatic for Ra > 1e3); ramp stages run with "
                          "dynamic relaxation")
    cav.set_defaults(func=cmd_cavity)

    sol = sub.add_parser("solve", help="one solve from a problem config")
    _add_common(sol)
    sol.add_argument("--problem", default=None,
                     help="built-in problem name (manufactured or cavity)")
    sol.add_argument("--config", default=None, help="problem config file")
    sol.add_argument("--ra", type=float, default=1e3,
                     help="Rayleigh number for --problem cavity")
    sol.add_argument("--mesh", default="16x8", help="cell counts, NxM")
    sol.set_defaults(func=cmd_solve)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    except RuntimeError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
