"""Power-law fitting for error scaling curves.

Fits Err(N) = err_inf + k * N^alpha by a coarse grid over err_inf with a
closed-form log-space least squares for (log k, alpha) at each candidate,
followed by a full three-parameter Levenberg-Marquardt refinement from
the best one or two grid points. A variable-projection stage (1-D search
over alpha with the linear subproblem solved exactly) competes with the
refinement on near-flat curves whose geometry the transformed space
represents poorly. The loss is always measured in raw percent space; the
log-space solve is only the initializer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import ScalingCurve, ScaleVariable
from .errors import (
    ArgumentError,
    ComparisonUnavailableError,
    InsufficientDataError,
    ValidationError,
)
from .laws import NormalizedPowerLaw, PowerLaw

_GRID_SIZE = 200
_GRID_MARGIN = 1e-6
_MAX_ITERATIONS = 200
_STEP_TOLERANCE = 1e-10
# Per-component cap on one LM step in transformed space. Without it a
# near-flat direction (tiny Jacobian column) invites a huge step that can
# still lower the loss yet lands where the logistic transform saturates,
# permanently killing that direction.
_MAX_STEP = 3.0
# Hard box on transformed parameters. sigma'(12) ~ 6e-6, so every search
# direction keeps a workable derivative everywhere in the box; the price
# is that natural parameters stop ~6e-6 sigmoid-units short of their
# boundary, far inside every fitting tolerance. A wider box lets an
# overshooting step park err_inf in a numerically dead zone it can take
# thousands of iterations to leave.
_U_LIMIT = 12.0

# Parameter box, enforced through logistic transforms during refinement.
_LOG_K_LO = math.log(1e-12)
_LOG_K_HI = math.log(1e12)
_LOG_NEG_ALPHA_LO = math.log(1e-3)
_LOG_NEG_ALPHA_HI = math.log(10.0)


@dataclass(frozen=True)
class FitResult:
    """A fitted power law plus goodness-of-fit bookkeeping."""

    law: PowerLaw
    sse: float
    per_point_residuals: tuple[float, ...]
    converged: bool

    def __post_init__(self) -> None:
        if self.sse < 0:
            raise ValidationError("sse must be non-negative")
        total = sum(r * r for r in self.per_point_residuals)
        if abs(total - self.sse) > 1e-9 * max(self.sse, 1e-300):
            raise ValidationError(
                f"sse {self.sse} does not match residuals (sum of squares {total})"
            )


@dataclass(frozen=True)
class FitInfeasible:
    """Structured report for a curve with nothing to fit (no crash)."""

    reason: str
    label: str = ""


def _sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def _logit(p: float) -> float:
    # The clamp keeps starting points out of the sigmoid's saturated zone
    # so every search direction begins with a usable derivative.
    p = min(max(p, 1e-4), 1.0 - 1e-4)
    return math.log(p / (1.0 - p))


def _ols_lines(
    x: np.ndarray, y: np.ndarray, keep: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise OLS slope/intercept of y on x over the kept columns.

    y is (m, n); keep is a boolean (m, n) mask with >= 2 True per row and
    at least two distinct x among them.
    """
    cnt = keep.sum(axis=1)
    xs = np.where(keep, x[None, :], 0.0)
    ys = np.where(keep, y, 0.0)
    mx = xs.sum(axis=1) / cnt
    my = ys.sum(axis=1) / cnt
    sxx = (np.where(keep, (x[None, :] - mx[:, None]) ** 2, 0.0)).sum(axis=1)
    sxy = (
        np.where(keep, (x[None, :] - mx[:, None]) * (y - my[:, None]), 0.0)
    ).sum(axis=1)
    slope = sxy / sxx
    return slope, my - slope * mx


def _best_triple(
    e: np.ndarray, alpha: np.ndarray, log_k: np.ndarray, x: np.ndarray, errors: np.ndarray
) -> tuple[float, float, float]:
    """Pick the (err_inf, log k, alpha) row with the lowest raw-percent SSE."""
    alpha = np.clip(alpha, -10.0 + 1e-9, -1e-3)
    log_k = np.clip(log_k, _LOG_K_LO + 1e-9, _LOG_K_HI - 1e-9)
    pred = e[:, None] + np.exp(log_k[:, None] + alpha[:, None] * x[None, :])
    sse = ((errors[None, :] - pred) ** 2).sum(axis=1)
    best = int(np.argmin(sse))
    return float(e[best]), float(log_k[best]), float(alpha[best])


def _grid_starts(
    values: np.ndarray, errors: np.ndarray
) -> list[tuple[float, float, float]]:
    """Refinement starting points from the err_inf candidate grid.

    At each candidate, (log k, alpha) come from ordinary least squares of
    log(err - err_inf) on log(value); candidates are ranked by raw-percent
    sum of squared residuals and the winner becomes a start. When the curve
    has >= 4 points a second start is ranked the same way from trimmed
    lines: the same OLS with each candidate's single worst log-space
    residual dropped. A candidate within one grid step of min(err) turns
    the last log point into an extreme outlier that drags the full-OLS
    slope into a wrong local basin the refinement cannot leave; the
    trimmed line lands on the correct side of that basin boundary.
    """
    top = float(errors.min()) - _GRID_MARGIN
    grid = np.linspace(0.0, top, _GRID_SIZE) if top > 0 else np.array([0.0])

    x = np.log(values)
    resid = errors[None, :] - grid[:, None]  # strictly positive by construction
    y = np.log(resid)
    all_keep = np.ones_like(y, dtype=bool)
    alpha, log_k = _ols_lines(x, y, all_keep)
    starts = [_best_triple(grid, alpha, log_k, x, errors)]

    if len(values) >= 4:
        line_resid = np.abs(y - (log_k[:, None] + alpha[:, None] * x[None, :]))
        keep = all_keep.copy()
        keep[np.arange(len(grid)), np.argmax(line_resid, axis=1)] = False
        alpha_t, log_k_t = _ols_lines(x, y, keep)
        trimmed = _best_triple(grid, alpha_t, log_k_t, x, errors)
        if trimmed != starts[0]:
            starts.append(trimmed)
    return starts


def _profile_solve(
    values: np.ndarray, errors: np.ndarray, alpha: float, cap: float
) -> tuple[float, float, float] | None:
    """Exact min over (err_inf, k) of the raw SSE at a fixed alpha.

    The model is linear in (err_inf, k) once alpha is fixed, so the
    constrained optimum (err_inf in [0, cap], k in the usual box) is the
    best of the unconstrained solve and its clamped KKT corners. Returns
    (sse, err_inf, k), or None when value^alpha degenerates.
    """
    t = np.exp(alpha * np.log(values))
    stt = float(t @ t)
    if not np.all(np.isfinite(t)) or stt <= 0.0:
        return None
    n = float(len(values))
    st = float(t.sum())
    se = float(errors.sum())
    set_ = float(errors @ t)
    cands = [(0.0, set_ / stt), (cap, (set_ - cap * st) / stt)]
    det = n * stt - st * st
    if det > 0:
        cands.append(((se * stt - set_ * st) / det, (n * set_ - st * se) / det))
        cands.append(((se - 1e-12 * st) / n, 1e-12))
    best: tuple[float, float, float] | None = None
    for e_raw, k_raw in cands:
        e = min(max(e_raw, 0.0), cap)
        k = min(max(k_raw, 1e-12), 1e12)
        if not (math.isfinite(e) and math.isfinite(k)):
            continue
        r = errors - e - k * t
        s = float(r @ r)
        if best is None or s < best[0]:
            best = (s, e, k)
    return best


def _profile_start(
    values: np.ndarray, errors: np.ndarray
) -> tuple[tuple[float, float, float], bool] | None:
    """Variable-projection start: 1-D search on the exact alpha profile.

    Scans log(-alpha) over its full box with the (err_inf, k) subproblem
    solved in closed form at each point, then shrinks a golden-section
    bracket around the best sample. This sidesteps the transformed-space
    geometry entirely, which matters for near-flat curves whose err_inf
    sits closer to min(err) than the logistic box can represent. Returns
    ((err_inf, log k, alpha), converged) or None if every sample
    degenerated.
    """
    cap = float(errors.min())
    us = np.linspace(_LOG_NEG_ALPHA_LO, _LOG_NEG_ALPHA_HI, 481)
    best_i = -1
    best: tuple[float, float, float] | None = None
    for i, u_ in enumerate(us):
        r = _profile_solve(values, errors, -math.exp(u_), cap)
        if r is not None and (best is None or r[0] < best[0]):
            best, best_i = r, i
    if best is None:
        return None

    def f(u_: float) -> float:
        r = _profile_solve(values, errors, -math.exp(u_), cap)
        return math.inf if r is None else r[0]

    lo = float(us[max(best_i - 1, 0)])
    hi = float(us[min(best_i + 1, len(us) - 1)])
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a_, b_ = lo + (1.0 - inv_phi) * (hi - lo), lo + inv_phi * (hi - lo)
    fa, fb = f(a_), f(b_)
    for _ in range(_MAX_ITERATIONS):
        if hi - lo < 1e-12:
            break
        if fa <= fb:
            hi, b_, fb = b_, a_, fa
            a_ = lo + (1.0 - inv_phi) * (hi - lo)
            fa = f(a_)
        else:
            lo, a_, fa = a_, b_, fb
            b_ = lo + inv_phi * (hi - lo)
            fb = f(b_)
    converged = bool(hi - lo < 1e-12)
    u_star = 0.5 * (lo + hi)
    alpha = -math.exp(u_star)
    r = _profile_solve(values, errors, alpha, cap)
    if r is None or r[0] > best[0]:
        alpha = -math.exp(float(us[best_i]))
        r = best
    _, err_inf, k = r
    return (err_inf, math.log(k), alpha), converged


def _unpack(u: np.ndarray, err_cap: float) -> tuple[float, float, float]:
    """Map unconstrained LM parameters to (err_inf, log k, alpha)."""
    s = _sigmoid(u)
    err_inf = err_cap * float(s[0])
    log_k = _LOG_K_LO + (_LOG_K_HI - _LOG_K_LO) * float(s[1])
    alpha = -math.exp(
        _LOG_NEG_ALPHA_LO + (_LOG_NEG_ALPHA_HI - _LOG_NEG_ALPHA_LO) * float(s[2])
    )
    return err_inf, log_k, alpha


def _pack(err_inf: float, log_k: float, alpha: float, err_cap: float) -> np.ndarray:
    return np.array(
        [
            _logit(err_inf / err_cap),
            _logit((log_k - _LOG_K_LO) / (_LOG_K_HI - _LOG_K_LO)),
            _logit(
                (math.log(-alpha) - _LOG_NEG_ALPHA_LO)
                / (_LOG_NEG_ALPHA_HI - _LOG_NEG_ALPHA_LO)
            ),
        ]
    )


def _refine(
    values: np.ndarray, errors: np.ndarray, start: tuple[float, float, float]
) -> tuple[tuple[float, float, float], bool]:
    """Levenberg-Marquardt in transformed space, raw-percent loss.

    Convergence means the relative change of every natural parameter
    (err_inf, k, alpha) produced by a step fell below 1e-10 within 200
    iterations. A rejected step also counts once the change it would have
    produced is negligible: that covers both the perfect-fit case and a
    parameter resting against its box edge.
    """
    err_cap = float(errors.min())
    log_v = np.log(values)
    u = _pack(*start, err_cap)

    def model(u_: np.ndarray) -> np.ndarray:
        err_inf, log_k, alpha = _unpack(u_, err_cap)
        return err_inf + np.exp(log_k + alpha * log_v)

    def natural_change_small(u_before: np.ndarray, u_after: np.ndarray) -> bool:
        p = np.array(_unpack(u_before, err_cap))
        q = np.array(_unpack(u_after, err_cap))
        return bool(
            np.all(np.abs(q - p) <= _STEP_TOLERANCE * (np.abs(p) + _STEP_TOLERANCE))
        )

    residual = errors - model(u)
    sse = float(residual @ residual)
    lam = 1e-3
    converged = False

    for _ in range(_MAX_ITERATIONS):
        err_inf, log_k, alpha = _unpack(u, err_cap)
        s = _sigmoid(u)
        ds = s * (1.0 - s)
        term = np.exp(log_k + alpha * log_v)  # reducible part k * v^alpha
        jac = np.empty((len(values), 3))
        jac[:, 0] = err_cap * ds[0]
        jac[:, 1] = term * (_LOG_K_HI - _LOG_K_LO) * ds[1]
        jac[:, 2] = term * log_v * alpha * (_LOG_NEG_ALPHA_HI - _LOG_NEG_ALPHA_LO) * ds[2]

        # Solve the damped normal equations with columns scaled to unit
        # norm. Algebraically this equals Marquardt's diag(JtJ) damping,
        # but it stays numerically meaningful when one column is orders
        # of magnitude smaller (a parameter hugging its box edge).
        col = np.sqrt((jac * jac).sum(axis=0))
        col[col <= 0] = 1.0
        jac_s = jac / col
        jtj_s = jac_s.T @ jac_s
        jtr_s = jac_s.T @ residual

        accepted = False
        entry_candidate: np.ndarray | None = None
        candidate = u
        while lam <= 1e12:
            try:
                delta = np.linalg.solve(jtj_s + lam * np.eye(3), jtr_s) / col
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            delta = np.clip(delta, -_MAX_STEP, _MAX_STEP)
            candidate = np.clip(u + delta, -_U_LIMIT, _U_LIMIT)
            if entry_candidate is None:
                entry_candidate = candidate
            cand_residual = errors - model(candidate)
            cand_sse = float(cand_residual @ cand_residual)
            if cand_sse < sse:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = entry_candidate is not None and natural_change_small(
                u, entry_candidate
            )
            break
        if natural_change_small(u, candidate):
            u, residual, sse = candidate, cand_residual, cand_sse
            converged = True
            break
        u, residual, sse = candidate, cand_residual, cand_sse
        lam = max(lam / 10.0, 1e-15)

    err_inf, log_k, alpha = _unpack(u, err_cap)
    return (err_inf, math.exp(log_k), alpha), converged


def fit_power_law(curve: ScalingCurve) -> FitResult | FitInfeasible:
    """Fit err_inf + k * value^alpha to a scaling curve in raw percent space.

    Returns FitInfeasible (not an exception) when the curve shows no
    decreasing trend, mirroring fitting "when possible" only.
    """
    n = len(curve.values)
    if n < 3:
        raise InsufficientDataError(f"power-law fit needs at least 3 points, got {n}")
    errors = np.asarray(curve.errors, dtype=np.float64)
    values = np.asarray(curve.values, dtype=np.float64)
    if np.any(errors <= 0.0):
        bad = int(np.argmax(errors <= 0.0))
        raise ValidationError(
            f"fit requires error rates in (0, 100]; point {bad} has {errors[bad]}"
        )
    if errors[-1] >= errors[0]:
        return FitInfeasible(
            reason=(
                "no decreasing trend: error at the largest value "
                f"({errors[-1]:g}) is not below the smallest ({errors[0]:g})"
            ),
            label=curve.label,
        )

    # Each start yields two candidate triples, the refinement's end point
    # and the start itself (a refinement that went nowhere must not worsen
    # its own start). The variable-projection stage competes on the same
    # terms with its own convergence flag. Lowest raw SSE wins.
    candidates: list[tuple[tuple[float, float, float], bool]] = []
    for start in _grid_starts(values, errors):
        refined, converged = _refine(values, errors, start)
        candidates.append((refined, converged))
        candidates.append(((start[0], math.exp(start[1]), start[2]), converged))
    polished = _profile_start(values, errors)
    if polished is not None:
        start, converged = polished
        candidates.append(((start[0], math.exp(start[1]), start[2]), converged))
        refined, refine_converged = _refine(values, errors, start)
        candidates.append((refined, refine_converged))

    best_law: PowerLaw | None = None
    best_residuals: np.ndarray | None = None
    best_sse = math.inf
    best_converged = False
    for (err_inf, k, alpha), converged in candidates:
        law = PowerLaw(err_inf=err_inf, k=k, alpha=alpha, variable=curve.variable)
        residuals = errors - (law.err_inf + law.k * values**law.alpha)
        sse = float(residuals @ residuals)
        if sse < best_sse:
            best_law, best_residuals, best_sse = law, residuals, sse
            best_converged = converged

    assert best_law is not None and best_residuals is not None
    return FitResult(
        law=best_law,
        sse=best_sse,
        per_point_residuals=tuple(float(r) for r in best_residuals),
        converged=best_converged,
    )


def predict_error(law: PowerLaw | NormalizedPowerLaw, value: float) -> float:
    """Evaluate a law at one scale value; decreasing in value, floor err_inf."""
    if not (value > 0) or not math.isfinite(value):
        raise ArgumentError(f"scale value must be a positive real, got {value}")
    if isinstance(law, NormalizedPowerLaw):
        return law.err_inf + (value / law.scale) ** law.alpha
    return law.err_inf + law.k * value**law.alpha


def convergence_point(law: PowerLaw | NormalizedPowerLaw, epsilon: float) -> float:
    """Scale at which the reducible error first reaches epsilon percent.

    Solves k * N^alpha = epsilon: N* = (epsilon/k)^(1/alpha). For a
    normalized law the same point is scale * epsilon^(1/alpha), which is
    exact at epsilon = 1.
    """
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise ArgumentError(f"epsilon must be a positive percent, got {epsilon}")
    if isinstance(law, NormalizedPowerLaw):
        return law.scale * epsilon ** (1.0 / law.alpha)
    return (epsilon / law.k) ** (1.0 / law.alpha)


@dataclass(frozen=True)
class ConvergenceComparison:
    """Which of two fitted curves reaches epsilon reducible error sooner."""

    alpha_a: float
    alpha_b: float
    point_a: float
    point_b: float
    epsilon: float
    faster: str  # "a", "b", or "tie"


def compare_convergence(
    a: FitResult, b: FitResult, epsilon: float
) -> ConvergenceComparison:
    """Compare convergence points of two fits; smaller N*(epsilon) is faster."""
    for name, fit in (("a", a), ("b", b)):
        if not fit.converged:
            raise ComparisonUnavailableError(
                f"fit {name} did not converge; comparison unavailable"
            )
    if a.law.variable is not b.law.variable:
        raise ComparisonUnavailableError(
            "fits scale different variables "
            f"({a.law.variable.value} vs {b.law.variable.value})"
        )
    point_a = convergence_point(a.law, epsilon)
    point_b = convergence_point(b.law, epsilon)
    if point_a < point_b:
        faster = "a"
    elif point_b < point_a:
        faster = "b"
    else:
        faster = "tie"
    return ConvergenceComparison(
        alpha_a=a.law.alpha,
        alpha_b=b.law.alpha,
        point_a=point_a,
        point_b=point_b,
        epsilon=epsilon,
        faster=faster,
    )
