"""Built-in problem definitions and the config-file loader.

A problem couples the stationary momentum/continuity equations on the fluid
rectangle with heat transport on the whole domain:

    -Pr Lap(u) + div(u x u) + grad p - Pr Ra j T = f,   div u = 0   (fluid)
    -kappa Lap(T) + div(u T) = g                                    (domain)

with u = 0 on the fluid boundary, u extended by zero outside the fluid zone,
and per-wall temperature conditions (Dirichlet or insulated).  Exact
solutions carry their fields symbolically; the matching forcings are derived
by symbolic differentiation and cross-checked against an independent
numerical differentiation (Chebyshev fits along axis-parallel lines, which
are exact for polynomial data).
"""

import configparser

import numpy as np
import sympy as sp
from numpy.polynomial import chebyshev as cheb

from .mesh import WALLS

_X, _Y = sp.symbols("x y")


def _lambdify(expr):
    fn = sp.lambdify((_X, _Y), expr, "numpy")

    def wrapped(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = fn(x, y)
        shape = np.broadcast_shapes(x.shape, y.shape)
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    return wrapped


def _cheb_derivative(fn, center, along, order, half_width=0.4, npts=24):
    """Derivative of fn along one axis by Chebyshev fitting.

    Fits a degree npts-2 Chebyshev series to fn on a 1D window through
    `center` and differentiates the fit; exact (to rounding) for polynomial
    fields, spectrally accurate otherwise.
    """
    x0, y0 = center
    nodes = np.cos(np.pi * (2 * np.arange(npts) + 1) / (2 * npts))
    if along == 0:
        xs, ys = x0 + half_width * nodes, np.full(npts, y0)
        lo, hi = x0 - half_width, x0 + half_width
    else:
        xs, ys = np.full(npts, x0), y0 + half_width * nodes
        lo, hi = y0 - half_width, y0 + half_width
    vals = fn(xs, ys)
    t = nodes  # nodes already live on [-1, 1]
    coef = cheb.chebfit(t, vals, npts - 2)
    for _ in range(order):
        coef = cheb.chebder(coef, scl=2.0 / (hi - lo))
    return cheb.chebval(0.0, coef)


class ExactSolution:
    """Closed-form (u, p, T) with the forcing the equations require.

    Expressions may be sympy objects or strings in x and y.
    """

    def __init__(self, u1, u2, p, T, pr, ra, kappa, fluid_rect):
        self.exprs = {name: sp.sympify(e) for name, e in
                      [("u1", u1), ("u2", u2), ("p", p), ("T", T)]}
        self.fluid_rect = tuple(float(c) for c in fluid_rect)
        e = self.exprs
        lap = lambda w: sp.diff(w, _X, 2) + sp.diff(w, _Y, 2)
        conv = [sp.diff(e["u1"] * e[ui], _X) + sp.diff(e["u2"] * e[ui], _Y)
                for ui in ("u1", "u2")]
        f1 = -pr * lap(e["u1"]) + conv[0] + sp.diff(e["p"], _X)
        f2 = -pr * lap(e["u2"]) + conv[1] + sp.diff(e["p"], _Y) - pr * ra * e["T"]
        g_fluid = (-kappa * lap(e["T"]) + sp.diff(e["u1"] * e["T"], _X)
                   + sp.diff(e["u2"] * e["T"], _Y))
        g_solid = -kappa * lap(e["T"])
        self.forcing_degree = int(max(
            sp.total_degree(sp.expand(w)) for w in (f1, f2, g_fluid, g_solid)))

        self._u1 = _lambdify(e["u1"])
        self._u2 = _lambdify(e["u2"])
        self._p = _lambdify(e["p"])
        self._T = _lambdify(e["T"])
        self._du = [[_lambdify(sp.diff(e[ui], v)) for v in (_X, _Y)]
                    for ui in ("u1", "u2")]
        self._dT = [_lambdify(sp.diff(e["T"], v)) for v in (_X, _Y)]
        self._dp = [_lambdify(sp.diff(e["p"], v)) for v in (_X, _Y)]
        self._f1 = _lambdify(f1)
        self._f2 = _lambdify(f2)
        self._g_fluid = _lambdify(g_fluid)
        self._g_solid = _lambdify(g_solid)
        self._pr, self._ra, self._kappa = pr, ra, kappa

    def _in_fluid(self, x, y):
        x0, x1, y0, y1 = self.fluid_rect
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)

    def u(self, x, y):
        return np.stack([self._u1(x, y), self._u2(x, y)], axis=-1)

    def grad_u(self, x, y):
        return np.stack([
            np.stack([self._du[i][d](x, y) for d in range(2)], axis=-1)
            for i in range(2)], axis=-2)

    def p(self, x, y):
        return self._p(x, y)

    def grad_p(self, x, y):
        return np.stack([self._dp[0](x, y), self._dp[1](x, y)], axis=-1)

    def T(self, x, y):
        return self._T(x, y)

    def grad_T(self, x, y):
        return np.stack([self._dT[0](x, y), self._dT[1](x, y)], axis=-1)

    def f(self, x, y):
        return np.stack([self._f1(x, y), self._f2(x, y)], axis=-1)

    def g(self, x, y):
        return np.where(self._in_fluid(np.asarray(x, dtype=float),
                                       np.asarray(y, dtype=float)),
                        self._g_fluid(x, y), self._g_solid(x, y))

    # -- consistency checks -------------------------------------------

    def divergence_residual(self, n=100, seed=0):
        """Max |div u| over n random points of the fluid rectangle."""
        rng = np.random.default_rng(seed)
        x0, x1, y0, y1 = self.fluid_rect
        xs = rng.uniform(x0, x1, n)
        ys = rng.uniform(y0, y1, n)
        div = self._du[0][0](xs, ys) + self._du[1][1](xs, ys)
        return float(np.abs(div).max())

    def forcing_residual(self, n=20, seed=1):
        """Max relative gap between the stored forcing and the equations with
        all derivatives recomputed numerically."""
        rng = np.random.default_rng(seed)
        x0, x1, y0, y1 = self.fluid_rect
        pr, ra, kappa = self._pr, self._ra, self._kappa
        worst, scale = 0.0, 1.0
        for _ in range(n):
            c = (rng.uniform(x0, x1), rng.uniform(y0, y1))
            lap_u = [sum(_cheb_derivative(f, c, d, 2) for d in range(2))
                     for f in (self._u1, self._u2)]
            conv = [sum(_cheb_derivative(
                        lambda x, y, i=i, d=d: (self._u1, self._u2)[d](x, y)
                        * (self._u1, self._u2)[i](x, y), c, d, 1)
                        for d in range(2)) for i in range(2)]
            gp = [_cheb_derivative(self._p, c, d, 1) for d in range(2)]
            Tval = self._T(*c)
            want = np.array([
                -pr * lap_u[0] + conv[0] + gp[0],
                -pr * lap_u[1] + conv[1] + gp[1] - pr * ra * Tval])
            got = self.f(*c)
            lap_T = sum(_cheb_derivative(self._T, c, d, 2) for d in range(2))
            conv_T = sum(_cheb_derivative(
                lambda x, y, d=d: (self._u1, self._u2)[d](x, y) * self._T(x, y),
                c, d, 1) for d in range(2))
            want_g = -kappa * lap_T + conv_T
            got_g = self._g_fluid(*c)
            worst = max(worst, np.abs(got - want).max(), abs(got_g - want_g))
            scale = max(scale, np.abs(got).max(), abs(got_g))
        return worst / scale


class ProblemSpec:
    """One complete problem: physics, geometry, forcing, boundary data.

    temp_bc maps each wall name to ("dirichlet", expression-string) or
    ("insulated", None).  Velocity is zero-Dirichlet on the whole fluid
    boundary; the scheme supports nothing else.
    """

    def __init__(self, pr, ra, kappa, domain, fluid_rect, f, g, temp_bc,
                 exact=None, forcing_degree=0, name=""):
        if not pr > 0:
            raise ValueError("Pr must be positive")
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        if ra < 0:
            raise ValueError("Ra must be nonnegative")
        missing = [w for w in WALLS if w not in temp_bc]
        if missing:
            raise ValueError("missing temperature condition on wall(s): %s"
                             % ", ".join(missing))
        for wall, (kind, _) in temp_bc.items():
            if kind not in ("dirichlet", "insulated"):
                raise ValueError("unknown condition %r on wall %s"
                                 % (kind, wall))
        self.pr = float(pr)
        self.ra = float(ra)
        self.kappa = float(kappa)
        self.domain = tuple(float(c) for c in domain)
        self.fluid_rect = tuple(float(c) for c in fluid_rect)
        self.f = f
        self.g = g
        self.temp_bc = dict(temp_bc)
        self.exact = exact
        self.forcing_degree = forcing_degree
        self.name = name
        if exact is not None:
            div = exact.divergence_residual()
            if div > 1e-12:
                raise ValueError("exact velocity is not divergence-free "
                                 "(residual %.2e)" % div)
            resid = exact.forcing_residual()
            if resid > 1e-8:
                raise ValueError("stored forcing is inconsistent with the "
                                 "exact fields (residual %.2e)" % resid)

    def with_rayleigh(self, ra):
        """Copy of this problem at a different Rayleigh number.

        Only valid for problems whose forcing does not depend on Ra (zero
        forcing); used by the ramping driver.
        """
        if self.exact is not None:
            raise ValueError("cannot retarget Ra with a manufactured forcing")
        return ProblemSpec(self.pr, ra, self.kappa, self.domain,
                           self.fluid_rect, self.f, self.g, self.temp_bc,
                           forcing_degree=self.forcing_degree, name=self.name)

    def temp_dirichlet_fn(self, wall):
        kind, expr = self.temp_bc[wall]
        if kind != "dirichlet":
            raise ValueError("wall %s is not Dirichlet" % wall)
        return _lambdify(sp.sympify(expr))


def _zero_vector(x, y):
    shape = np.broadcast_shapes(np.shape(x), np.shape(y))
    return np.zeros(shape + (2,))


def _zero_scalar(x, y):
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))


MANUFACTURED_FIELDS = {
    "u1": "-x**2*(x-1)**2*y*(y-1)*(2*y-1)",
    "u2": "y**2*(y-1)**2*x*(x-1)*(2*x-1)",
    "p": "x**6 - y**6",
    "T": "(x-1)*(x+1)*y*(y-1)",
}


def manufactured_convection():
    """Manufactured fluid/solid benchmark on [-1,1]x[0,1] with fluid [0,1]^2.

    The velocity derives from a stream function (hence exactly divergence
    free), vanishes on the fluid boundary, and the temperature vanishes on
    the outer boundary; Pr = kappa = 1, Ra = 10.
    """
    pr, ra, kappa = 1.0, 10.0, 1.0
    fluid = (0.0, 1.0, 0.0, 1.0)
    exact = ExactSolution(MANUFACTURED_FIELDS["u1"], MANUFACTURED_FIELDS["u2"],
                          MANUFACTURED_FIELDS["p"], MANUFACTURED_FIELDS["T"],
                          pr, ra, kappa, fluid)
    temp_bc = {w: ("dirichlet", "0") for w in WALLS}
    return ProblemSpec(pr, ra, kappa, (-1.0, 1.0, 0.0, 1.0), fluid,
                       exact.f, exact.g, temp_bc, exact=exact,
                       forcing_degree=exact.forcing_degree,
                       name="manufactured")


def cavity(ra):
    """Buoyancy-driven cavity on the unit square.

    No forcing; velocity zero on all walls; hot wall T = 1 at x = 0, cold
    wall T = 0 at x = 1, horizontal walls insulated; Pr = 0.71, kappa = 1.
    """
    unit = (0.0, 1.0, 0.0, 1.0)
    temp_bc = {
        "left": ("dirichlet", "1"),
        "right": ("dirichlet", "0"),
        "bottom": ("insulated", None),
        "top": ("insulated", None),
    }
    return ProblemSpec(0.71, ra, 1.0, unit, unit, _zero_vector, _zero_scalar,
                       temp_bc, name="cavity")


# ----------------------------------------------------------------------
# config files


def _parse_rect(text):
    parts = [float(t) for t in text.replace(",", " ").split()]
    if len(parts) != 4:
        raise ValueError("rectangle needs four numbers, got %r" % text)
    return tuple(parts)


def load_config(path):
    """Read a problem (plus method/solver settings) from an INI file.

    Returns (ProblemSpec, method: dict, solver: dict).  If an [exact]
    section provides u1, u2, p, T the forcing is derived from it; otherwise
    the forcing is zero.
    """
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)

    phys = cp["physics"]
    pr = phys.getfloat("pr")
    ra = phys.getfloat("ra")
    kappa = phys.getfloat("kappa", 1.0)

    dom = cp["domain"]
    rect = _parse_rect(dom.get("rect"))
    fluid_rect = _parse_rect(dom.get("fluid_rect", dom.get("rect")))

    temp_bc = {}
    bc = cp["bc"] if cp.has_section("bc") else {}
    for wall in WALLS:
        raw = bc.get(wall, "dirichlet 0").strip()
        if raw == "insulated":
            temp_bc[wall] = ("insulated", None)
        elif raw.startswith("dirichlet"):
            expr = raw[len("dirichlet"):].strip() or "0"
            temp_bc[wall] = ("dirichlet", expr)
        else:
            raise ValueError("wall %s: expected 'insulated' or "
                             "'dirichlet <expr>', got %r" % (wall, raw))

    exact = None
    if cp.has_section("exact"):
        ex = cp["exact"]
        exact = ExactSolution(ex["u1"], ex["u2"], ex["p"], ex["T"],
                              pr, ra, kappa, fluid_rect)
        f, g = exact.f, exact.g
        forcing_degree = exact.forcing_degree
    else:
        f, g = _zero_vector, _zero_scalar
        forcing_degree = 0

    problem = ProblemSpec(pr, ra, kappa, rect, fluid_rect, f, g, temp_bc,
                          exact=exact, forcing_degree=forcing_degree,
                          name=cp.get("problem", "name", fallback=""))

    method = {}
    if cp.has_section("method"):
        m = cp["method"]
        if "k" in m:
            method["degree"] = m.getint("k")
        if "variant" in m:
            method["variant"] = m.get("variant")

    solver = {}
    if cp.has_section("solver"):
        s = cp["solver"]
        if "tol" in s:
            solver["tol"] = s.getfloat("tol")
        if "max_iter" in s:
            solver["max_iter"] = s.getint("max_iter")
        if "ramp" in s:
            solver["ramp"] = [float(t) for t in
                              s.get("ramp").replace(",", " ").split()]
    return problem, method, solver


def write_config(path, problem, method=None, solver=None):
    """Serialise a problem (and optional settings) to the INI schema."""
    cp = configparser.ConfigParser()
    cp["physics"] = {"pr": repr(problem.pr), "ra": repr(problem.ra),
                     "kappa": repr(problem.kappa)}
    cp["domain"] = {
        "rect": " ".join(repr(c) for c in problem.domain),
        "fluid_rect": " ".join(repr(c) for c in problem.fluid_rect),
    }
    cp["bc"] = {}
    for wall in WALLS:
        kind, expr = problem.temp_bc[wall]
        cp["bc"][wall] = "insulated" if kind == "insulated" else (
            "dirichlet %s" % expr)
    if problem.exact is not None:
        cp["exact"] = {k: str(v) for k, v in problem.exact.exprs.items()}
    if problem.name:
        cp["problem"] = {"name": problem.name}
    if method:
        cp["method"] = {("k" if key == "degree" else key): str(val)
                        for key, val in method.items()}
    if solver:
        sec = {}
        for key, val in solver.items():
            sec[key] = (" ".join(repr(v) for v in val)
                        if isinstance(val, (list, tuple)) else repr(val))
        cp["solver"] = sec
    with open(path, "w") as fh:
        cp.write(fh)
