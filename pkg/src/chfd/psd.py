"""Preconditioned steepest descent for the implicit update.

Each iteration projects the raw residual onto the mean-zero subspace, applies
the inverse of a constant-coefficient preconditioner (diagonal in Fourier
space, see :func:`chfd.spectral.precondition_solve`) to get a search
direction, and then minimizes the strictly convex one-dimensional restriction
of the objective exactly: its derivative along the direction is the cubic

    q(alpha) = c0 + c1 alpha + c2 alpha^2 + c3 alpha^3,

with c1 > 0 and c3 >= 0, and q is strictly increasing, so the step size is
the unique real root.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import scheme as _scheme
from .grid import Field, inner_l2, norm_l2
from .operators import grad_norm_sq_long, laplace_long
from .spectral import SpectralPlan, _inv_sigma, _irfft, _quad, _rfft, hminus1_norm

__all__ = [
    "PsdConfig",
    "SolveStats",
    "SolverError",
    "LineSearchCubic",
    "residual",
    "search_direction",
    "line_search_cubic",
    "line_search",
    "solve",
]


class SolverError(RuntimeError):
    """Raised when the iteration does not reach the residual tolerance."""

    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class PsdConfig:
    tol_rel: float = 1e-10
    # Absolute floor for the stopping test.  None picks a near-machine floor,
    # 1e-15 * (1 + |rhs|_2).  Keep this tight: the per-step residual left by
    # the solver acts like a forcing on the time stepper, and for states
    # inside the spinodal band the unstable modes amplify it by e^{sigma*T},
    # so a loose absolute tolerance puts a dt-independent floor under any
    # convergence study long before the scheme's own accuracy limit.
    tol_abs: float | None = None
    max_iter: int = 200
    init_guess: str = "extrapolated"  # or "previous"
    precond_power: int = 1
    track_objective: bool = True

    def __post_init__(self) -> None:
        if self.init_guess not in ("extrapolated", "previous"):
            raise ValueError(f"unknown init_guess {self.init_guess!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveStats:
    """Iteration count plus per-iterate residual norms (and objective values)."""

    iterations: int
    residuals: list[float]
    alphas: list[float] = field(default_factory=list)
    objectives: list[float] | None = None

    @property
    def residual_ratios(self) -> list[float]:
        return [b / a for a, b in zip(self.residuals, self.residuals[1:]) if a > 0.0]


@dataclass(frozen=True)
class LineSearchCubic:
    """Derivative of the objective along a fixed search direction."""

    c0: float
    c1: float
    c2: float
    c3: float

    def __call__(self, alpha: float) -> float:
        return self.c0 + alpha * (self.c1 + alpha * (self.c2 + alpha * self.c3))

    def derivative(self, alpha: float) -> float:
        return self.c1 + alpha * (2.0 * self.c2 + 3.0 * alpha * self.c3)

    def root(self) -> float:
        """Unique real root, via safeguarded Newton in an expanding bracket."""
        c0, c1 = self.c0, self.c1
        if c1 <= 0.0:
            raise ValueError(f"cubic is not increasing at the origin (c1 = {c1})")
        if self.c2 == 0.0 and self.c3 == 0.0:
            return -c0 / c1
        if c0 == 0.0:
            return 0.0
        tol = 1e-12 * abs(c0) + 1e-30
        # bracket the sign change starting from the Newton guess at 0
        guess = abs(c0 / c1)
        if c0 < 0.0:
            lo, hi = 0.0, max(guess, 1e-300)
            for _ in range(200):
                if self(hi) >= 0.0:
                    break
                lo, hi = hi, 2.0 * hi
            else:  # pragma: no cover - c3 > 0 guarantees a sign change
                raise ValueError("line-search bracketing failed")
        else:
            lo, hi = -max(guess, 1e-300), 0.0
            for _ in range(200):
                if self(lo) <= 0.0:
                    break
                lo, hi = 2.0 * lo, lo
            else:  # pragma: no cover
                raise ValueError("line-search bracketing failed")
        alpha = min(max(-c0 / c1, lo), hi)
        for _ in range(200):
            q = self(alpha)
            if abs(q) <= tol:
                return alpha
            if q > 0.0:
                hi = alpha
            else:
                lo = alpha
            dq = self.derivative(alpha)
            nxt = alpha - q / dq if dq > 0.0 else 0.5 * (lo + hi)
            if not (lo < nxt < hi):
                nxt = 0.5 * (lo + hi)
            if nxt == alpha:
                break
            alpha = nxt
        return alpha


def residual(
    state: _scheme.StepState,
    params: _scheme.SchemeParams,
    phi: Field,
    rhs: Field,
    plan: SpectralPlan,
) -> Field:
    """Mean-zero projection of f - N[phi]."""
    r = rhs.values - _scheme.apply_N(state, params, phi, plan).values
    return Field(phi.grid, r - r.mean())


def search_direction(
    plan: SpectralPlan, r: Field, params: _scheme.SchemeParams, precond_power: int = 1
) -> Field:
    """Preconditioned residual; mean-zero like r."""
    from .spectral import precondition_solve

    return precondition_solve(plan, r, params.dt, params.eps, params.A, precond_power)


def line_search_cubic(
    state: _scheme.StepState,
    params: _scheme.SchemeParams,
    phi: Field,
    d: Field,
    rhs: Field,
    plan: SpectralPlan,
) -> LineSearchCubic:
    """Coefficients of q(alpha) = (N[phi + alpha d] - f, d), assembled from public operators."""
    if norm_l2(d) == 0.0:
        raise ValueError("line search needs a nonzero direction")
    dt = params.dt
    c0 = inner_l2(_scheme.apply_N(state, params, phi, plan), d) - inner_l2(rhs, d)
    hd = phi.grid.h**phi.grid.dim
    c1 = (
        1.5 * hminus1_norm(plan, d) ** 2
        + 3.0 * dt * hd * float(np.sum((phi.values * d.values) ** 2))
        + dt * (params.A * dt + params.eps**2) * inner_l2(d, Field(d.grid, -laplace_long(d).values))
    )
    dv = d.values
    c2 = 3.0 * dt * hd * float(np.sum(phi.values * (dv * dv * dv)))
    c3 = dt * hd * float(np.sum((dv * dv) * (dv * dv)))
    return LineSearchCubic(c0, c1, c2, c3)


def line_search(
    state: _scheme.StepState,
    params: _scheme.SchemeParams,
    phi: Field,
    d: Field,
    rhs: Field,
    plan: SpectralPlan,
) -> float:
    """Exact minimizer of the objective along d."""
    return line_search_cubic(state, params, phi, d, rhs, plan).root()


def solve(
    state: _scheme.StepState,
    params: _scheme.SchemeParams,
    rhs: Field,
    plan: SpectralPlan,
    cfg: PsdConfig | None = None,
) -> tuple[Field, SolveStats]:
    """Minimize the update objective on the mass hyperplane.

    Stops when |P0(f - N[phi])|_2 <= tol_abs + tol_rel * |P0 f|_2.  Raises
    :class:`SolverError` (carrying the residual history) on non-convergence.

    The loop fuses the building blocks for speed: the inverse-Laplacian solve
    needed by N also yields the objective, and the line-search coefficients
    c1 are read off the search direction's spectrum.  Tests pin this path
    against the public residual/objective_F/line_search implementations.
    """
    if cfg is None:
        cfg = PsdConfig()
    grid = state.phi_curr.grid
    if rhs.grid != grid:
        raise ValueError("rhs grid does not match state grid")
    dt, eps, A = params.dt, params.eps, params.A
    hd = grid.h**grid.dim

    if cfg.init_guess == "extrapolated":
        phi = 2.0 * state.phi_curr.values - state.phi_prev.values
    else:
        phi = state.phi_curr.values.copy()

    fvals = rhs.values
    f0 = fvals - fvals.mean()
    tol_abs = cfg.tol_abs if cfg.tol_abs is not None else 1e-15 * (1.0 + norm_l2(rhs))
    tol = tol_abs + cfg.tol_rel * float(np.sqrt(hd * np.sum(f0 * f0)))

    inv_sigma = _inv_sigma(plan, dt, eps, A, cfg.precond_power)
    visc = dt * (A * dt + eps**2)
    residuals: list[float] = []
    alphas: list[float] = []
    objectives: list[float] | None = [] if cfg.track_objective else None

    for it in range(cfg.max_iter + 1):
        N, B, TB = _scheme._n_parts(state, params, phi, plan)
        r = fvals - N
        r -= r.mean()
        rnorm = float(np.sqrt(hd * np.sum(r * r)))
        residuals.append(rnorm)
        if objectives is not None:
            phi2 = phi * phi  # integer-power ufuncs are ~60x slower here
            Fval = (
                hd * float(np.sum(B * TB)) / 3.0
                + 0.25 * dt * hd * float(np.sum(phi2 * phi2))
                + 0.5 * visc * grad_norm_sq_long(Field(grid, phi))
                - hd * float(np.sum(fvals * phi))
            )
            objectives.append(Fval)
        if rnorm <= tol:
            return Field(grid, phi), SolveStats(it, residuals, alphas, objectives)
        if it == cfg.max_iter:
            break
        rhat = _rfft(plan, r)
        dhat = rhat * inv_sigma
        d = _irfft(plan, dhat)
        pd = phi * d
        d2 = d * d
        cubic = LineSearchCubic(
            c0=hd * float(np.sum((N - fvals) * d)),
            c1=(
                1.5 * _quad(plan, dhat, plan.inv_Lambda)
                + 3.0 * dt * hd * float(np.sum(pd * pd))
                + visc * _quad(plan, dhat, plan.Lambda_long)
            ),
            c2=3.0 * dt * hd * float(np.sum(pd * d2)),
            c3=dt * hd * float(np.sum(d2 * d2)),
        )
        alpha = cubic.root()
        alphas.append(alpha)
        phi = phi + alpha * d

    raise SolverError(
        f"no convergence in {cfg.max_iter} iterations "
        f"(last residual {residuals[-1]:.3e}, tolerance {tol:.3e})",
        residuals,
    )
