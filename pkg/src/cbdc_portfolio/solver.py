"""Damped Newton solver and brute-force lattice oracle for the portfolio problem.

The objective is strictly concave on the feasible interior (an open convex
polytope), so the Newton iteration on the first-order conditions with an
Armijo backtracking line search converges to the unique optimum from any
feasible start.  Liquid holdings never corner for positive liquidity
weights (marginal liquidity utility blows up at zero), but the risky
holding can: a strong enough liquidity motive drives it to its
nonnegativity floor.  When the floor blocks the Newton direction the
solver pins that holding and re-solves the reduced problem, releasing the
pin if its gradient turns positive at the reduced optimum — a miniature
active-set method whose pin/release decisions are self-correcting under
strict concavity.  The lattice oracle exists to cross-check the solver:
it exhaustively evaluates expected utility on a regular grid and never
relies on derivatives.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InfeasibleModelError, ParameterError
from .model import (
    HOLDING_FLOOR,
    AgentKind,
    Allocation,
    Economy,
    ModelInstance,
    _branches,
    active_assets,
    allocation_vector,
    expected_utility,
    utility_gradient,
    utility_hessian,
    vector_allocation,
)

ARMIJO_SLOPE = 1e-4


@dataclass(frozen=True)
class SolverConfig:
    """Newton solver controls.

    ``tol_residual`` is an absolute max-norm bound on the FOC residuals.
    Extreme liquidity weights (gamma well above ~1e3) push first-period
    consumption toward zero, which raises the residual's floating-point
    noise floor above the default tolerance; pass a commensurately looser
    tolerance for such instances.
    """

    tol_residual: float = 1e-10
    max_iters: int = 200
    backtrack_factor: float = 0.5
    min_step: float = 1e-14
    init_fraction: float = 0.25

    def __post_init__(self):
        if not self.tol_residual > 0.0:
            raise ParameterError(f"tol_residual must be > 0, got {self.tol_residual}")
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ParameterError(
                f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}"
            )
        if not self.min_step > 0.0:
            raise ParameterError(f"min_step must be > 0, got {self.min_step}")
        if not 0.0 < self.init_fraction < 1.0:
            raise ParameterError(
                f"init_fraction must lie in (0, 1), got {self.init_fraction}"
            )


@dataclass(frozen=True)
class Solution:
    """A solved portfolio problem.

    ``residual_norm`` is the max-norm of the first-order conditions,
    except that a holding resting on its nonnegativity floor contributes
    only the positive part of its gradient (the negative part is the
    constraint's multiplier, not an unmet optimality condition).
    """

    alloc: Allocation
    residual_norm: float
    iterations: int
    converged: bool
    utility: float


def _worst_coef(instance: ModelInstance, assets: tuple[str, ...]) -> np.ndarray:
    """Per-asset gross return in the worst joint outcome."""
    r = instance.returns
    coefs = {"risky": r.r_risky_low, "deposits": r.r_deposit, "cbdc": r.r_cbdc}
    return np.array([coefs[name] for name in assets])


def _is_feasible(instance: ModelInstance, assets: tuple[str, ...], x: np.ndarray) -> bool:
    if not np.all(x >= HOLDING_FLOOR):
        return False
    if not instance.endowment - x.sum() > 0.0:
        return False
    worst = _worst_coef(instance, assets) @ x + instance.income.s_min
    return worst > 0.0


def _initial_point(
    instance: ModelInstance, agent: AgentKind, config: SolverConfig
) -> np.ndarray:
    """A strictly feasible starting point, or InfeasibleModelError.

    Tries an equal split of ``init_fraction * endowment`` per asset, then
    walks geometrically toward an anchor that concentrates wealth in the
    asset with the best worst-case return; the anchor construction doubles
    as the nonemptiness check for the feasible interior.
    """
    assets = active_assets(agent, instance.economy)
    y = instance.endowment
    x0 = np.full(len(assets), config.init_fraction * y)
    if _is_feasible(instance, assets, x0):
        return x0

    worst = _worst_coef(instance, assets)
    best = int(np.argmax(worst))
    eta = 1e-3 * y
    c1_min = 1e-3 * y
    side = worst @ np.full(len(assets), eta) - worst[best] * eta
    bulk_max = y - c1_min - eta * (len(assets) - 1)
    bulk_min = max(0.0, (-instance.income.s_min - side) / worst[best])
    if bulk_min >= bulk_max:
        raise InfeasibleModelError(
            "feasible interior is empty: worst-case wealth cannot be made positive "
            f"(requires {bulk_min:.6g} in '{assets[best]}' but at most {bulk_max:.6g} fits)"
        )
    anchor = np.full(len(assets), eta)
    anchor[best] = 0.5 * (bulk_min + bulk_max)

    t = 0.0
    for _ in range(64):
        x = (1.0 - t) * x0 + t * anchor
        if _is_feasible(instance, assets, x):
            return x
        t = 0.5 * (1.0 + t)
    return anchor


def solve(
    instance: ModelInstance,
    agent: AgentKind,
    config: SolverConfig | None = None,
    warm_start: Allocation | None = None,
) -> Solution:
    """Maximize expected utility over the agent's active holdings.

    With a zero CBDC weight in the with-CBDC economy the liquidity
    aggregate ignores CBDC and the optimum is the pre-CBDC corner, so the
    problem is dispatched to the reduced pre-CBDC system and reported with
    a zero CBDC holding; the residual norm then refers to the reduced
    system.  A holding driven to its nonnegativity floor (in practice the
    risky one, under a dominant liquidity motive) is pinned there and the
    remaining holdings re-optimized; see the module docstring.

    Raises ConvergenceError (with the last iterate attached) if the
    residual tolerance is not met, and InfeasibleModelError if no strictly
    feasible interior point exists.
    """
    config = config or SolverConfig()

    if instance.economy is Economy.WITH_CBDC and instance.prefs.lam == 0.0:
        reduced = dataclasses.replace(instance, economy=Economy.PRE_CBDC)
        inner = solve(reduced, agent, config, warm_start)
        reduced_assets = active_assets(agent, Economy.PRE_CBDC)
        alloc = vector_allocation(
            instance,
            agent,
            active_assets(agent, instance.economy),
            np.append(allocation_vector(inner.alloc, reduced_assets), 0.0),
        )
        return Solution(
            alloc=alloc,
            residual_norm=inner.residual_norm,
            iterations=inner.iterations,
            converged=inner.converged,
            utility=expected_utility(instance, agent, alloc),
        )

    assets = active_assets(agent, instance.economy)
    x = None
    if warm_start is not None:
        candidate = allocation_vector(warm_start, assets)
        if _is_feasible(instance, assets, candidate):
            x = candidate
    if x is None:
        x = _initial_point(instance, agent, config)

    alloc = vector_allocation(instance, agent, assets, x)
    grad = utility_gradient(instance, agent, alloc)
    iterations = 0
    pinned: set[int] = set()

    # Each pass either settles the current active set or changes it; a
    # changed set never repeats under strict concavity, so a small fixed
    # budget of passes suffices for <= 3 holdings.
    for _ in range(2 * len(assets) + 3):
        x, alloc, grad, iterations, blocked = _newton_free(
            instance, agent, assets, x, alloc, grad, pinned, config, iterations
        )
        if blocked is not None:
            pinned.add(blocked)
            x = x.copy()
            x[blocked] = HOLDING_FLOOR
            alloc = vector_allocation(instance, agent, assets, x)
            grad = utility_gradient(instance, agent, alloc)
            continue
        release = {j for j in pinned if grad[j] > config.tol_residual}
        if release:
            pinned -= release
            continue
        return Solution(
            alloc=alloc,
            residual_norm=_kkt_residual(grad, pinned),
            iterations=iterations,
            converged=True,
            utility=expected_utility(instance, agent, alloc),
        )
    raise ConvergenceError(
        "active set of floored holdings failed to settle",
        last=_unconverged(instance, agent, alloc, grad, iterations, pinned),
    )


def _newton_free(
    instance: ModelInstance,
    agent: AgentKind,
    assets: tuple[str, ...],
    x: np.ndarray,
    alloc: Allocation,
    grad: np.ndarray,
    pinned: set[int],
    config: SolverConfig,
    iterations: int,
):
    """Damped Newton over the holdings not pinned at the floor.

    The merit function is the residual 2-norm on the free coordinates:
    along the Newton direction its derivative at the current point is
    minus twice its value (the Hessian is negative definite everywhere on
    the feasible interior), so Armijo backtracking on the residual always
    admits a step and, unlike a utility-based test, stays meaningful in
    floating point all the way down to tight tolerances.  Returns the
    updated ``(x, alloc, grad, iterations, blocked)`` where ``blocked``
    is the index of a holding whose floor blocks the direction, or None
    once the free residuals meet tolerance.
    """
    idx = np.array([i for i in range(len(assets)) if i not in pinned], dtype=int)
    if idx.size == 0:
        return x, alloc, grad, iterations, None

    while float(np.max(np.abs(grad[idx]))) > config.tol_residual:
        if iterations >= config.max_iters:
            raise ConvergenceError(
                f"no convergence after {config.max_iters} iterations "
                f"(residual {np.max(np.abs(grad[idx])):.3e})",
                last=_unconverged(instance, agent, alloc, grad, iterations, pinned),
            )
        hess = utility_hessian(instance, agent, alloc)
        try:
            step_free = np.linalg.solve(-hess[np.ix_(idx, idx)], grad[idx])
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(
                f"singular Hessian at iteration {iterations}; "
                "the optimum may be non-unique (e.g. no liquidity weight "
                "with equal deposit and CBDC returns)",
                last=_unconverged(instance, agent, alloc, grad, iterations, pinned),
            ) from exc
        step = np.zeros_like(x)
        step[idx] = step_free

        blocked = _blocking_bound(x, step, idx)
        if blocked is not None:
            return x, alloc, grad, iterations, blocked

        merit = float(np.linalg.norm(grad[idx]))
        accepted = False
        alpha = 1.0
        while alpha >= config.min_step:
            trial = x + alpha * step
            if _is_feasible(instance, assets, trial):
                trial_alloc = vector_allocation(instance, agent, assets, trial)
                trial_grad = utility_gradient(instance, agent, trial_alloc)
                if np.linalg.norm(trial_grad[idx]) <= (1.0 - ARMIJO_SLOPE * alpha) * merit:
                    x, alloc, grad = trial, trial_alloc, trial_grad
                    accepted = True
                    break
            alpha *= config.backtrack_factor
        if not accepted:
            raise ConvergenceError(
                f"line search stalled at iteration {iterations} "
                f"(residual {np.max(np.abs(grad[idx])):.3e})",
                last=_unconverged(instance, agent, alloc, grad, iterations, pinned),
            )
        iterations += 1

    return x, alloc, grad, iterations, None


def _blocking_bound(x: np.ndarray, step: np.ndarray, idx: np.ndarray) -> int | None:
    """Index whose nonnegativity floor caps the step below 1e-9, else None."""
    blocked = None
    cap = 1e-9
    for j in idx:
        if step[j] < 0.0:
            ratio = (x[j] - HOLDING_FLOOR) / -step[j]
            if ratio < cap:
                blocked, cap = int(j), ratio
    return blocked


def _kkt_residual(grad: np.ndarray, pinned: set[int]) -> float:
    return float(
        max(
            max(0.0, g) if j in pinned else abs(g)
            for j, g in enumerate(grad)
        )
    )


def _unconverged(instance, agent, alloc, grad, iterations, pinned=frozenset()) -> Solution:
    return Solution(
        alloc=alloc,
        residual_norm=_kkt_residual(grad, pinned),
        iterations=iterations,
        converged=False,
        utility=expected_utility(instance, agent, alloc),
    )


def _lattice_utility(
    instance: ModelInstance, agent: AgentKind, coords: list[np.ndarray]
) -> np.ndarray:
    """Expected utility on broadcast holding arrays, -inf where infeasible.

    Vectorized mirror of model.expected_utility; consistency between the
    two is covered by tests.
    """
    assets = active_assets(agent, instance.economy)
    prefs = instance.prefs
    c1 = instance.endowment - sum(coords)
    worst = sum(w * c for w, c in zip(_worst_coef(instance, assets), coords))
    worst = worst + instance.income.s_min
    mask = (c1 > 0.0) & (worst > 0.0)
    c1 = np.where(mask, c1, 1.0)

    weights, returns, eps = _branches(instance, agent, assets)
    utility = np.log(c1)
    for k in range(len(weights)):
        wealth = sum(returns[k, i] * coords[i] for i in range(len(assets)))
        utility = utility + prefs.beta * weights[k] * np.log(np.where(mask, wealth + eps[k], 1.0))

    if prefs.gamma != 0.0:
        d = coords[assets.index("deposits")]
        if instance.economy is Economy.PRE_CBDC or prefs.lam == 0.0:
            z = d
        else:
            e = 1.0 - prefs.sigma
            m = coords[assets.index("cbdc")]
            z = (d**e + prefs.lam * m**e) ** (1.0 / e)
        utility = utility + prefs.gamma * np.log(z)

    return np.where(mask, utility, -np.inf)


def grid_oracle(
    instance: ModelInstance, agent: AgentKind, points_per_dim: int
) -> Allocation:
    """Argmax of expected utility over a regular lattice of holdings.

    Each active holding ranges over cell midpoints (k + 1/2) * y / P for
    k = 0..P-1; infeasible points are excluded and ties break to the
    first point in row-major lattice order.  Exhaustive and derivative
    free, so it serves as an oracle for the Newton solver.
    """
    if points_per_dim < 10:
        raise ParameterError(f"points_per_dim must be >= 10, got {points_per_dim}")
    assets = active_assets(agent, instance.economy)
    y = instance.endowment
    vals = (np.arange(points_per_dim) + 0.5) * (y / points_per_dim)

    best_utility = -np.inf
    best_x: np.ndarray | None = None
    ndim = len(assets)
    if ndim == 1:
        utility = _lattice_utility(instance, agent, [vals])
        idx = int(np.argmax(utility))
        if np.isfinite(utility[idx]):
            best_utility, best_x = utility[idx], np.array([vals[idx]])
    else:
        # Chunk over the first axis to bound memory on 3-d lattices.
        tail = [vals.reshape((points_per_dim,) + (1,) * (ndim - 2 - i)) for i in range(ndim - 1)]
        for first in vals:
            utility = _lattice_utility(
                instance, agent, [np.asarray(first)] + tail
            )
            idx = int(np.argmax(utility))
            value = float(utility.reshape(-1)[idx])
            if value > best_utility:
                rest = np.unravel_index(idx, utility.shape)
                best_utility = value
                best_x = np.array([first] + [vals[i] for i in rest])

    if best_x is None or not np.isfinite(best_utility):
        raise InfeasibleModelError("no feasible point on the holdings lattice")
    return vector_allocation(instance, agent, assets, best_x)


def solve_path(
    instances: list[ModelInstance],
    agent: AgentKind,
    config: SolverConfig | None = None,
    warm_start: Allocation | None = None,
    collect_errors: bool = False,
) -> list[Solution | ConvergenceError | InfeasibleModelError]:
    """Solve a sequence of instances, warm-starting each from the last.

    By default solver errors propagate annotated with the failing index.
    With ``collect_errors=True`` a failed point is recorded in place as
    the caught exception and the path continues from the most recent
    success, which is what the comparative-statics sweeps want.
    """
    solutions: list[Solution | ConvergenceError | InfeasibleModelError] = []
    warm = warm_start
    for i, instance in enumerate(instances):
        try:
            sol = solve(instance, agent, config, warm)
        except (ConvergenceError, InfeasibleModelError) as exc:
            exc.args = (f"path index {i}: {exc.args[0]}",) + exc.args[1:]
            if not collect_errors:
                raise
            solutions.append(exc)
            continue
        solutions.append(sol)
        warm = sol.alloc
    return solutions
