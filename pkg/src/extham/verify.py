"""Numeric verification: seeded bracket-residual sampling, Hamiltonian flow
integration with drift reports, and the momentum-degree structural check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from .extension import ExtendedSystem
from .mechanics import CanonicalChart, PhasePoint, poisson_bracket
from .symexpr import EvaluationError, Expr, Symbol, momentum_degree, normalize

DEFAULT_RESIDUAL_TOL = 1e-9
EXACT_ATTEMPT_TERM_LIMIT = 6000


class VerifyError(EvaluationError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    """Seeded sampling plan: per-symbol intervals and parameter bindings."""

    seed: int = 42
    n_points: int = 1000
    box: dict = field(default_factory=dict, hash=False)
    params: dict = field(default_factory=dict, hash=False)
    tol: float = DEFAULT_RESIDUAL_TOL
    try_exact: bool | None = None  # None = auto by expression size

    def interval(self, name: str):
        for key, iv in self.box.items():
            if (key.name if isinstance(key, Symbol) else str(key)) == name:
                return iv
        return None


@dataclass(frozen=True)
class ResidualStats:
    max_abs: float
    mean_abs: float
    scale: float
    tier: str  # "exact" | "heuristic"
    passed: bool
    threshold: float
    n_points: int
    seed: int

    @property
    def normalized_max(self) -> float:
        if self.scale == 0.0:
            return 0.0
        return self.max_abs / self.scale


def _point_streams(seed: int, n_points: int):
    # split one master seed into independent per-point streams so that
    # parallel and serial evaluation orders agree
    return np.random.SeedSequence(seed).spawn(n_points)


def _draw_point(stream, names, intervals):
    rng = np.random.default_rng(stream)
    return [rng.uniform(*intervals[n]) for n in names]


def bracket_residual(
    H: Expr, K: Expr, chart: CanonicalChart, cfg: SamplerConfig
) -> ResidualStats:
    """Sample {H, K} over seeded random points.

    The bracket is evaluated as its 2*dim natural summands
    dH/dq * dK/dp and -dH/dp * dK/dq, kept unexpanded; the residual scale is
    the max over points of the sum of |summand|, which guards against zeros
    that are merely numerical cancellation.  Tier "exact" means the bracket
    normalizes to the zero expression.
    """
    params = {
        (k.name if isinstance(k, Symbol) else str(k)): float(v)
        for k, v in cfg.params.items()
    }
    h = sp.sympify(H)
    k = sp.sympify(K)
    bound = {sp.Symbol(name): sp.Float(v) for name, v in params.items()}
    terms = []
    for q, p in chart.all_pairs:
        for a, b, sign in ((q.sym, p.sym, 1), (p.sym, q.sym, -1)):
            t = sign * sp.diff(h, a) * sp.diff(k, b)
            if t != 0:
                t = t.subs(bound)
                if t != 0:
                    terms.append(t)

    attempt_exact = cfg.try_exact
    if attempt_exact is None:
        attempt_exact = sum(sp.count_ops(t) for t in terms) <= EXACT_ATTEMPT_TERM_LIMIT
    if attempt_exact and normalize(poisson_bracket(H, K, chart, normal=False)) == 0:
        return ResidualStats(
            max_abs=0.0,
            mean_abs=0.0,
            scale=0.0,
            tier="exact",
            passed=True,
            threshold=cfg.tol,
            n_points=cfg.n_points,
            seed=cfg.seed,
        )

    if not terms:
        # bracket expanded to zero structurally without normalization
        return ResidualStats(0.0, 0.0, 0.0, "exact", True, cfg.tol, cfg.n_points, cfg.seed)

    free = sorted({s.name for t in terms for s in t.free_symbols})
    intervals = {}
    for name in free:
        iv = cfg.interval(name)
        if iv is None:
            raise VerifyError(f"no sampling interval for symbol {name!r}")
        intervals[name] = (float(iv[0]), float(iv[1]))
    fns = sp.lambdify([sp.Symbol(n) for n in free], terms, modules="math")

    max_abs = 0.0
    total = 0.0
    scale = 0.0
    for stream in _point_streams(cfg.seed, cfg.n_points):
        point = _draw_point(stream, free, intervals)
        vals = fns(*point)
        s = sum(abs(float(v)) for v in vals)
        r = abs(sum(float(v) for v in vals))
        max_abs = max(max_abs, r)
        total += r
        scale = max(scale, s)
    mean_abs = total / cfg.n_points
    passed = scale > 0 and (max_abs / scale) < cfg.tol
    return ResidualStats(
        max_abs=max_abs,
        mean_abs=mean_abs,
        scale=scale,
        tier="heuristic",
        passed=passed,
        threshold=cfg.tol,
        n_points=cfg.n_points,
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# flow integration


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    t_end: float = 50.0
    max_steps: int = 10_000_000
    n_samples: int = 400

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise VerifyError("tolerances must be positive")


@dataclass
class Trajectory:
    chart: CanonicalChart
    names: list
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim)
    params: dict


def integrate_flow(
    H: Expr, x0: PhasePoint, cfg: IntegratorConfig, params: dict | None = None
) -> Trajectory:
    """Integrate Hamilton's equations with an adaptive Dormand-Prince scheme."""
    chart = x0.chart
    params = {
        (k.name if isinstance(k, Symbol) else str(k)): float(v)
        for k, v in (params or {}).items()
    }
    h = sp.sympify(H).subs({sp.Symbol(k): sp.Float(v) for k, v in params.items()})
    names = [s.name for s in chart.symbols]
    missing = sorted(s.name for s in h.free_symbols if s.name not in names)
    if missing:
        raise VerifyError(f"unbound parameters in Hamiltonian: {missing}")
    syms = [sp.Symbol(n) for n in names]
    rhs_exprs = []
    for q, p in chart.all_pairs:
        rhs_exprs.append((q.name, sp.diff(h, p.sym)))
        rhs_exprs.append((p.name, -sp.diff(h, q.sym)))
    order = {name: i for i, name in enumerate(names)}
    vec = [None] * len(names)
    for name, e in rhs_exprs:
        vec[order[name]] = e
    rhs = sp.lambdify(syms, vec, modules="math")

    def f(t, y):
        return np.asarray(rhs(*y), dtype=float).ravel()

    y0 = [float(x0.values[s] if s in x0.values else x0.values[s.name]) for s in chart.symbols]
    times = np.linspace(0.0, cfg.t_end, cfg.n_samples)
    sol = solve_ivp(
        f,
        (0.0, cfg.t_end),
        y0,
        method="DOP853",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        t_eval=times,
        dense_output=False,
    )
    if not sol.success:
        raise VerifyError(f"integration failed: {sol.message}")
    return Trajectory(
        chart=chart, names=names, times=times, states=sol.y.T.copy(), params=params
    )


DRIFT_FLOOR = 1e-12


@dataclass
class DriftReport:
    quantities: list  # (name, initial value, max relative drift)
    accepted: bool


def drift_report(traj: Trajectory, quantities, tol: float = 1e-6) -> DriftReport:
    """Max relative drift |Q(t) - Q(0)| / max(|Q(0)|, floor) per quantity."""
    syms = [sp.Symbol(n) for n in traj.names]
    rows = []
    ok = True
    for name, expr in quantities:
        e = sp.sympify(expr).subs(
            {sp.Symbol(k): sp.Float(v) for k, v in traj.params.items()}
        )
        fn = sp.lambdify(syms, e, modules="math")
        vals = np.array([fn(*state) for state in traj.states], dtype=float)
        q0 = vals[0]
        drift = float(np.max(np.abs(vals - q0)) / max(abs(q0), DRIFT_FLOOR))
        rows.append((name, float(q0), drift))
        ok = ok and drift < tol
    return DriftReport(quantities=rows, accepted=ok)


def degree_check(ext: ExtendedSystem) -> bool:
    """True iff the momentum degree of K equals mu + nu."""
    return momentum_degree(ext.K, ext.chart.momenta) == ext.mu + ext.nu
