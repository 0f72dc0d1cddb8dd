"""Numerical studies that check the solver's building blocks against theory.

Four studies:

* ``truncation_study`` — refinement rates of the long-stencil operators on
  smooth periodic functions with known derivatives.
* ``symbol_bound_study`` — the mode-wise defect of the fourth-order Laplacian
  symbol against the exact symbol: bounded by a uniform constant times
  h^4 k^6, and one-signed.
* ``inequality_study`` — randomized checks of the discrete norm inequalities
  the energy estimates rest on.
* ``convergence_study`` — the full time-stepper refinement study against the
  closed-form reference solution.

Each study returns a report object with a deterministic ``to_csv``; repeated
runs with the same inputs produce byte-identical text.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Sequence

import numpy as np

from .grid import Field, GridSpec, field_from_fn, norm_l2, norm_linf, norm_lp
from .io import fmt17
from .operators import d1_long, grad_norm_sq_long, grad_norm_sq_std, laplace_long, laplace_std
from .psd import PsdConfig, SolveStats
from .rng import unit_floats
from .scheme import (
    SchemeParams,
    ghost_init,
    manufactured_solution,
    manufactured_source_stencil,
    step,
)
from .spectral import hminus1_norm, make_plan

__all__ = [
    "RefinementRow",
    "RefinementReport",
    "TruncationCase",
    "TRUNCATION_CASES",
    "truncation_study",
    "SymbolBoundReport",
    "symbol_bound_study",
    "InequalityReport",
    "inequality_study",
    "random_trig_field",
    "convergence_study",
]


# ---------------------------------------------------------------------------
# refinement reports


@dataclass(frozen=True)
class RefinementRow:
    h: float
    error_l2: float
    error_linf: float
    rate_l2: float | None  # log2(e(h) / e(h/2)) against the previous row
    rate_linf: float | None


@dataclass
class RefinementReport:
    """Rows of a halving study plus least-squares slopes over all rows."""

    test_name: str
    parameters: dict
    rows: list[RefinementRow] = dataclass_field(default_factory=list)
    # per-level solver iteration statistics (convergence_study only)
    solve_stats: dict[int, list[SolveStats]] | None = None

    def regression_slopes(self) -> tuple[float, float]:
        """Least-squares slope of log2(error) vs log2(1/h), both norms."""
        if len(self.rows) < 2:
            raise ValueError("need at least 2 rows for a regression slope")
        x = np.log2([1.0 / r.h for r in self.rows])
        s2 = -np.polyfit(x, np.log2([r.error_l2 for r in self.rows]), 1)[0]
        si = -np.polyfit(x, np.log2([r.error_linf for r in self.rows]), 1)[0]
        return float(s2), float(si)

    def finest_rates(self, n_pairs: int = 2) -> list[tuple[float, float]]:
        """(rate_l2, rate_linf) of the last ``n_pairs`` consecutive pairs."""
        pairs = [(r.rate_l2, r.rate_linf) for r in self.rows if r.rate_l2 is not None]
        return pairs[-n_pairs:]

    def to_csv(self) -> str:
        lines = ["h,error_l2,rate_l2,error_linf,rate_linf"]
        for r in self.rows:
            lines.append(
                f"{fmt17(r.h)},{fmt17(r.error_l2)},"
                f"{fmt17(r.rate_l2) if r.rate_l2 is not None else ''},"
                f"{fmt17(r.error_linf)},"
                f"{fmt17(r.rate_linf) if r.rate_linf is not None else ''}"
            )
        s2, si = self.regression_slopes()
        lines.append(f"regression,,{fmt17(s2)},,{fmt17(si)}")
        return "\n".join(lines) + "\n"


def _rows_from_errors(levels: Sequence[tuple[float, float, float]]) -> list[RefinementRow]:
    rows: list[RefinementRow] = []
    prev: tuple[float, float] | None = None
    for h, e2, einf in levels:
        if prev is None:
            rows.append(RefinementRow(h, e2, einf, None, None))
        else:
            rows.append(
                RefinementRow(h, e2, einf, math.log2(prev[0] / e2), math.log2(prev[1] / einf))
            )
        prev = (e2, einf)
    return rows


# ---------------------------------------------------------------------------
# truncation study


@dataclass(frozen=True)
class TruncationCase:
    """A smooth periodic test function with one analytically-known derivative.

    ``kind`` selects the operator under test: "laplace" compares
    ``laplace_long`` against the analytic Laplacian, "d1" compares ``d1_long``
    along axis 0 against the analytic first derivative.
    """

    name: str
    dim: int
    kind: str  # "laplace" | "d1"
    f: Callable[..., np.ndarray]
    reference: Callable[..., np.ndarray]


def _builtin_cases(L: float) -> dict[str, TruncationCase]:
    a = 2.0 * math.pi / L

    def sin_x(x):
        return np.sin(a * x)

    cases = {
        "sin_x": TruncationCase(
            "sin_x", 1, "laplace", sin_x, lambda x: -(a**2) * np.sin(a * x)
        ),
        "sin_x_d1": TruncationCase(
            "sin_x_d1", 1, "d1", sin_x, lambda x: a * np.cos(a * x)
        ),
        "mode_product": TruncationCase(
            "mode_product",
            2,
            "laplace",
            lambda x, y: np.sin(a * x) * np.cos(2 * a * y),
            lambda x, y: -5.0 * a**2 * np.sin(a * x) * np.cos(2 * a * y),
        ),
        "exp_sin": TruncationCase(
            "exp_sin",
            2,
            "laplace",
            lambda x, y: np.exp(np.sin(a * x)) * np.cos(a * y),
            lambda x, y: a**2
            * (np.cos(a * x) ** 2 - np.sin(a * x) - 1.0)
            * np.exp(np.sin(a * x))
            * np.cos(a * y),
        ),
        "exp_sin_d1": TruncationCase(
            "exp_sin_d1",
            1,
            "d1",
            lambda x: np.exp(np.sin(a * x)),
            lambda x: a * np.cos(a * x) * np.exp(np.sin(a * x)),
        ),
    }
    return cases


TRUNCATION_CASES = tuple(_builtin_cases(1.0))


def truncation_study(
    case: TruncationCase | str,
    m_list: Sequence[int] = (32, 64, 128, 256),
    L: float = 1.0,
) -> RefinementReport:
    """Defect of the long-stencil operator against the analytic derivative.

    For each m: tau = (discrete op applied to sampled f) - (sampled analytic
    value); reports both norms of tau and the halving rates.
    """
    if isinstance(case, str):
        try:
            case = _builtin_cases(L)[case]
        except KeyError:
            raise ValueError(f"unknown truncation case {case!r}; "
                             f"built-ins: {sorted(TRUNCATION_CASES)}") from None
    if len(m_list) < 2:
        raise ValueError("need at least 2 grid levels for a refinement study")
    levels = []
    for m in m_list:
        grid = GridSpec(L=L, m=m, dim=case.dim)
        f = field_from_fn(grid, case.f)
        ref = field_from_fn(grid, case.reference)
        if case.kind == "laplace":
            tau = Field(grid, laplace_long(f).values - ref.values)
        elif case.kind == "d1":
            tau = Field(grid, d1_long(f, axis=0).values - ref.values)
        else:
            raise ValueError(f"unknown case kind {case.kind!r}")
        levels.append((grid.h, norm_l2(tau), norm_linf(tau)))
    return RefinementReport(
        test_name=f"truncation:{case.name}",
        parameters={"L": L, "dim": case.dim, "kind": case.kind, "m_list": tuple(m_list)},
        rows=_rows_from_errors(levels),
    )


# ---------------------------------------------------------------------------
# symbol bound study


@dataclass
class SymbolBoundReport:
    L: float
    rows: list[tuple[int, float, float]]  # (m, R, min_defect)

    def max_ratio(self) -> float:
        return max(r for _, r, _ in self.rows)

    def min_defect(self) -> float:
        return min(d for _, _, d in self.rows)

    def to_csv(self) -> str:
        lines = ["m,ratio_max,defect_min"]
        for m, r, d in self.rows:
            lines.append(f"{m},{fmt17(r)},{fmt17(d)}")
        return "\n".join(lines) + "\n"


def symbol_bound_study(L: float, m_list: Sequence[int]) -> SymbolBoundReport:
    """Mode-wise comparison of the fourth-order symbol with the exact -k^2.

    For each grid size reports R(m) = max_k |lambda_long(k) + k_phys^2| /
    (h^4 k_phys^6) over 1 <= k <= m/2 (bounded uniformly in m) and the
    minimum of the defect lambda_long(k) + k_phys^2 (which is one-signed:
    the discrete symbol never overshoots the exact one).
    """
    rows = []
    for m in m_list:
        if m < 8:
            raise ValueError("symbol study needs m >= 8")
        grid = GridSpec(L=L, m=m)
        plan = make_plan(grid)
        k = np.arange(1, m // 2 + 1)
        k_phys_sq = (2.0 * np.pi * k / L) ** 2
        defect = plan.lambda_long[k] + k_phys_sq
        ratio = defect / (grid.h**4 * k_phys_sq**3)
        rows.append((m, float(np.max(ratio)), float(np.min(defect))))
    return SymbolBoundReport(L=L, rows=rows)


# ---------------------------------------------------------------------------
# inequality study


def random_trig_field(
    grid: GridSpec, seed: int, index: int, mean_zero: bool = True
) -> Field:
    """Seeded random band-limited field (modes up to m/4, Gaussian weights).

    Built by spectrally truncating a white Gaussian field, which leaves exact
    trig polynomials smooth enough to sit well inside every regularity class
    the inequalities assume.  ``index`` selects a disjoint slice of the
    splitmix64 stream so trials are independent but reproducible.
    """
    n = grid.m ** grid.dim
    u = unit_floats(seed, 2 * n, start=2 * n * index)
    # Box-Muller; shift u1 into (0, 1] so the log is finite
    z = np.sqrt(-2.0 * np.log(1.0 - u[:n])) * np.cos(2.0 * np.pi * u[n:])
    white = z.reshape(grid.shape)
    spec = np.fft.fftn(white)
    freq = np.fft.fftfreq(grid.m, d=1.0 / grid.m)
    keep_1d = np.abs(freq) <= grid.m // 4
    keep = keep_1d if grid.dim == 1 else np.outer(keep_1d, keep_1d)
    spec = np.where(keep, spec, 0.0)
    if mean_zero:
        spec[(0,) * grid.dim] = 0.0
    return Field(grid, np.real(np.fft.ifftn(spec)))


@dataclass
class InequalityReport:
    grid_m: int
    n_trials: int
    # per-trial slacks/ratios, index-aligned
    slack_interpolation: list[float]
    slack_operator_order: list[float]
    embedding_ratio: list[float]
    violations: int

    def to_csv(self) -> str:
        lines = ["trial,slack_interpolation,slack_operator_order,embedding_ratio"]
        for i in range(self.n_trials):
            lines.append(
                f"{i},{fmt17(self.slack_interpolation[i])},"
                f"{fmt17(self.slack_operator_order[i])},{fmt17(self.embedding_ratio[i])}"
            )
        return "\n".join(lines) + "\n"


def inequality_study(grid: GridSpec, n_trials: int, rng_seed: int) -> InequalityReport:
    """Randomized check of the three norm inequalities the analysis uses.

    Per trial records the slack (left-over margin, nonnegative when the
    inequality holds) of

    * the interpolation bound  |f|_2^2 <= |f|_-1 * |grad4 f|_2   on a
      mean-zero field,
    * the operator-order bound |lap2 f|_2 <= |lap4 f|_2          on a
      general field,

    and the Sobolev-embedding ratio |f|_6 / (|f|_2 + |grad f|_2), which is
    asserted bounded (across resolutions), not below any particular value.
    A violation is a slack below -1e-12 times the scale of its left side.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    plan = make_plan(grid)
    slack_i: list[float] = []
    slack_o: list[float] = []
    ratios: list[float] = []
    violations = 0
    for i in range(n_trials):
        f0 = random_trig_field(grid, rng_seed, 2 * i, mean_zero=True)
        l2sq = norm_l2(f0) ** 2
        lhs = hminus1_norm(plan, f0) * math.sqrt(grad_norm_sq_long(f0))
        s = lhs - l2sq
        slack_i.append(s)
        if s < -1e-12 * l2sq:
            violations += 1

        g = random_trig_field(grid, rng_seed, 2 * i + 1, mean_zero=False)
        lap4 = norm_l2(laplace_long(g))
        lap2 = norm_l2(laplace_std(g))
        s = lap4 - lap2
        slack_o.append(s)
        if s < -1e-12 * lap4:
            violations += 1

        ratios.append(norm_lp(f0, 6) / (norm_l2(f0) + math.sqrt(grad_norm_sq_std(f0))))
    return InequalityReport(
        grid_m=grid.m,
        n_trials=n_trials,
        slack_interpolation=slack_i,
        slack_operator_order=slack_o,
        embedding_ratio=ratios,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# time-stepper convergence study


def convergence_study(
    m_list: Sequence[int] = (16, 32, 64, 128),
    L: float = 3.2,
    eps: float = 0.1,
    T: float = 0.32,
    dt_factor: float = 0.25,
    A: float = 1.0 / 16.0,
    solver_cfg: PsdConfig | None = None,
) -> RefinementReport:
    """Refinement study of the full scheme against the reference solution.

    Each level runs to T with dt = dt_factor * h^2 (quadratic refinement
    path), forced by the stencil-built source so the sampled reference field
    solves the space-discretized equation exactly and the measured error
    isolates the time stepper; errors are sampled at the cell centers at the
    final time.  dt_factor = 1/4 keeps every level's error within a small
    multiple of the scheme's asymptotic constant (the reference state sits in
    the anti-diffusive band, so time-truncation noise is amplified by a
    resolution-independent factor; see ``manufactured_source_stencil``).

    The report carries per-level ``solve_stats`` so solver behavior over the
    run is inspectable.
    """
    if len(m_list) < 2:
        raise ValueError("need at least 2 grid levels for a refinement study")
    solver_cfg = solver_cfg or PsdConfig()
    exact = manufactured_solution(L)
    levels = []
    stats: dict[int, list[SolveStats]] = {}
    t_begin = time.perf_counter()
    for m in m_list:
        grid = GridSpec(L=L, m=m)
        dt = dt_factor * grid.h**2
        n_steps = round(T / dt)
        params = SchemeParams(eps=eps, dt=dt, A=A)
        plan = make_plan(grid)
        source = manufactured_source_stencil(eps, grid)
        phi0 = field_from_fn(grid, lambda x, y: exact(x, y, 0.0))
        state = ghost_init(phi0, params, source=source)
        level_stats: list[SolveStats] = []
        for _ in range(n_steps):
            state, diag = step(state, params, plan, solver_cfg=solver_cfg, source=source)
            level_stats.append(diag.solve)
        ref = field_from_fn(grid, lambda x, y: exact(x, y, state.t))
        err = Field(grid, state.phi_curr.values - ref.values)
        levels.append((grid.h, norm_l2(err), norm_linf(err)))
        stats[m] = level_stats
    return RefinementReport(
        test_name="convergence:reference_solution",
        parameters={
            "L": L,
            "eps": eps,
            "T": T,
            "dt_factor": dt_factor,
            "A": A,
            "m_list": tuple(m_list),
            "runtime_s": round(time.perf_counter() - t_begin, 3),
        },
        rows=_rows_from_errors(levels),
        solve_stats=stats,
    )
