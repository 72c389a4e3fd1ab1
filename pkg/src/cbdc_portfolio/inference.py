"""Panel logit estimation: pooled quas(i)-likelihood with clustered errors.

The participation regressions are binary-outcome panel fits estimated by
iteratively reweighted least squares under an independence working
correlation, with household-clustered sandwich covariance.  Two design
families are supported: the policy dummy interacted with the literacy
score as a single slope, or interacted with one dummy per score level.
The module also owns the panel CSV schema, the synthetic-panel generator
used by the recovery studies, and the one-sided Wald comparison applied
to fitted coefficient pairs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.special import expit, xlog1py, xlogy
from scipy.stats import norm

from .errors import (
    EstimationError,
    ParameterError,
    RankDeficiencyError,
    SchemaError,
    SeparationError,
)

LITERACY_LEVELS = (0, 1, 2, 3)

#: Iteratively reweighted least squares stops once the largest
#: coefficient update falls below this.
COEF_TOL = 1e-10

MAX_ITERATIONS = 100

#: A coefficient beyond this on the log-odds scale is treated as a
#: diverging likelihood, i.e. (quasi-)complete separation.
SEPARATION_BOUND = 30.0

#: Columns every panel CSV must lead with; remaining columns are
#: controls, with an optional trailing ``weight``.
REQUIRED_PANEL_COLUMNS = ("household_id", "year", "outcome", "literacy_score")

#: Default coefficient vector for synthetic panels.  Control draws are
#: independent standard normals regardless of name; the names mirror the
#: documented default control set.
DEFAULT_SYNTH_TRUTH: dict[str, float] = {
    "const": -2.0,
    "policy": 0.10,
    "policy_x_score": 0.14,
    "score_1": 0.30,
    "score_2": 0.50,
    "score_3": 0.70,
    "age": 0.05,
    "age_squared": -0.03,
    "married": -0.20,
    "female": 0.10,
    "high_risk_aversion": -0.15,
}

DEFAULT_LITERACY_DISTRIBUTION = (0.25, 0.25, 0.25, 0.25)


def logit_link(p: float) -> float:
    """Log-odds of a probability strictly inside (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"logit_link requires 0 < p < 1, got {p}")
    return math.log(p / (1.0 - p))


def inverse_link(z: float) -> float:
    """Probability implied by a log-odds value."""
    return float(expit(z))


def odds_change(coefficient: float) -> float:
    """Multiplicative change in the odds minus one, exp(b) - 1."""
    if not math.isfinite(coefficient):
        raise ParameterError(f"odds_change requires a finite coefficient, got {coefficient}")
    return math.expm1(coefficient)


class SpecKind(enum.Enum):
    """How the policy dummy interacts with the literacy score."""

    LINEAR_SCORE = "linear"
    SCORE_DUMMIES = "dummies"


@dataclass(frozen=True)
class Specification:
    """Design choice for a participation fit.

    ``control_names`` selects a subset of the panel's controls; ``None``
    uses all of them.  ``include_time_fe`` adds the policy dummy's main
    effect.  Score level 0 is always the omitted baseline.
    """

    kind: SpecKind
    include_time_fe: bool = True
    control_names: tuple[str, ...] | None = None


@dataclass(frozen=True)
class PanelData:
    """Two-wave household panel with a binary participation outcome.

    ``controls`` is observation-by-column and may be empty.  ``weight``
    is optional and enters the estimating equations multiplicatively.
    Each household appears at most once per wave, in at most two waves,
    with a literacy score that is constant across its rows.
    """

    household_id: np.ndarray
    year: np.ndarray
    outcome: np.ndarray
    literacy_score: np.ndarray
    controls: np.ndarray
    control_names: tuple[str, ...] = ()
    weight: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "household_id", np.asarray(self.household_id))
        object.__setattr__(self, "year", np.asarray(self.year, dtype=int))
        object.__setattr__(self, "outcome", np.asarray(self.outcome, dtype=float))
        object.__setattr__(
            self, "literacy_score", np.asarray(self.literacy_score, dtype=int)
        )
        controls = np.asarray(self.controls, dtype=float)
        if controls.size == 0:
            controls = controls.reshape(len(self.household_id), 0)
        if controls.ndim != 2:
            raise ParameterError("controls must be a 2-d observation-by-column array")
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "control_names", tuple(self.control_names))
        if self.weight is not None:
            object.__setattr__(self, "weight", np.asarray(self.weight, dtype=float))
        self._validate()

    def _validate(self) -> None:
        n = len(self.household_id)
        if n == 0:
            raise ParameterError("panel has no observations")
        for name in ("year", "outcome", "literacy_score"):
            if len(getattr(self, name)) != n:
                raise ParameterError(f"{name} length differs from household_id length")
        if self.controls.shape[0] != n:
            raise ParameterError("controls row count differs from household_id length")
        if self.controls.shape[1] != len(self.control_names):
            raise ParameterError("control_names length differs from controls columns")
        if not np.all(np.isfinite(self.outcome)):
            raise ParameterError("outcome contains missing or non-finite values")
        if not np.all(np.isfinite(self.controls)):
            raise ParameterError("controls contain missing or non-finite values")
        if not np.all((self.outcome == 0.0) | (self.outcome == 1.0)):
            raise ParameterError("outcome must be binary (0 or 1)")
        if not np.all(np.isin(self.literacy_score, LITERACY_LEVELS)):
            raise ParameterError("literacy_score must lie in 0..3")
        if self.weight is not None:
            if len(self.weight) != n:
                raise ParameterError("weight length differs from household_id length")
            if not np.all(np.isfinite(self.weight)) or np.any(self.weight <= 0.0):
                raise ParameterError("weights must be finite and strictly positive")
        if len(np.unique(self.year)) > 2:
            raise ParameterError("panel spans more than two waves")
        _, codes = np.unique(self.household_id, return_inverse=True)
        if np.bincount(codes).max() > 2:
            raise ParameterError("a household appears in more than two waves")
        order = np.argsort(codes, kind="stable")
        same = codes[order][1:] == codes[order][:-1]
        if np.any(same & (self.year[order][1:] == self.year[order][:-1])):
            raise ParameterError("a household appears twice in the same wave")
        if np.any(same & (self.literacy_score[order][1:] != self.literacy_score[order][:-1])):
            raise ParameterError("literacy_score varies within a household")

    @property
    def n_obs(self) -> int:
        return len(self.household_id)

    @property
    def n_households(self) -> int:
        return len(np.unique(self.household_id))

    def policy_indicator(self) -> np.ndarray:
        """1.0 in the later wave, 0.0 otherwise (all-zero for one wave)."""
        years = np.unique(self.year)
        if len(years) < 2:
            return np.zeros(self.n_obs)
        return (self.year == years.max()).astype(float)


def build_design(panel: PanelData, spec: Specification) -> tuple[np.ndarray, tuple[str, ...]]:
    """Design matrix and column names for a participation fit.

    Column order: constant, policy dummy (when requested), the policy ×
    literacy interaction(s), literacy level dummies, then controls.
    """
    policy = panel.policy_indicator()
    columns: list[np.ndarray] = [np.ones(panel.n_obs)]
    names: list[str] = ["const"]
    if spec.include_time_fe:
        columns.append(policy)
        names.append("policy")
    score = panel.literacy_score.astype(float)
    if spec.kind is SpecKind.LINEAR_SCORE:
        columns.append(policy * score)
        names.append("policy_x_score")
    else:
        for level in LITERACY_LEVELS[1:]:
            columns.append(policy * (panel.literacy_score == level))
            names.append(f"policy_x_score_{level}")
    for level in LITERACY_LEVELS[1:]:
        columns.append((panel.literacy_score == level).astype(float))
        names.append(f"score_{level}")
    if spec.control_names is None:
        selected = panel.control_names
    else:
        missing = [c for c in spec.control_names if c not in panel.control_names]
        if missing:
            raise ParameterError(f"controls not present in the panel: {', '.join(missing)}")
        selected = spec.control_names
    for control in selected:
        columns.append(panel.controls[:, panel.control_names.index(control)])
        names.append(control)
    return np.column_stack(columns), tuple(names)


@dataclass(frozen=True)
class FitResult:
    """A fitted participation model.

    ``robust_covariance`` is the household-clustered sandwich estimator,
    symmetrized; ``log_quasi_likelihood`` is the pooled binomial
    quasi-likelihood at the estimate.
    """

    names: tuple[str, ...]
    estimates: np.ndarray
    robust_covariance: np.ndarray
    n_households: int
    n_obs: int
    iterations: int
    converged: bool
    log_quasi_likelihood: float

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ParameterError(
                f"no coefficient named {name!r}; available: {', '.join(self.names)}"
            ) from None

    def coefficient(self, name: str) -> float:
        return float(self.estimates[self._index(name)])

    def robust_se(self, name: str) -> float:
        return float(math.sqrt(self.robust_covariance[self._index(name), self._index(name)]))

    @property
    def coefficients(self) -> dict[str, float]:
        return {name: float(value) for name, value in zip(self.names, self.estimates)}


def log_quasi_likelihood(
    outcome: np.ndarray,
    design: np.ndarray,
    coefficients: np.ndarray,
    weights: np.ndarray | None = None,
) -> float:
    """Pooled binomial quasi-likelihood at an arbitrary coefficient vector."""
    outcome = np.asarray(outcome, dtype=float)
    mu = expit(np.asarray(design, dtype=float) @ np.asarray(coefficients, dtype=float))
    contributions = xlogy(outcome, mu) + xlog1py(1.0 - outcome, -mu)
    if weights is not None:
        contributions = np.asarray(weights, dtype=float) * contributions
    return float(np.sum(contributions))


def _check_rank(design: np.ndarray, names: tuple[str, ...]) -> None:
    # Pivoted QR: the trailing pivots past the numerical rank name the
    # columns that are linear combinations of the others.
    _, r, pivot = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size and diag[0] > 0.0 else 1.0
    tol = max(design.shape) * np.finfo(float).eps * scale
    rank = int(np.sum(diag > tol))
    if rank < design.shape[1]:
        offending = tuple(names[j] for j in sorted(pivot[rank:]))
        raise RankDeficiencyError(
            f"design matrix is rank deficient; dependent columns: {', '.join(offending)}",
            columns=offending,
        )


def fit_logit(
    outcome: np.ndarray,
    design: np.ndarray,
    cluster_ids: np.ndarray,
    names: tuple[str, ...],
    weights: np.ndarray | None = None,
    *,
    tol: float = COEF_TOL,
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """Quasi-likelihood logit on an explicit design matrix.

    Iteratively reweighted least squares under an independence working
    correlation; the reported covariance is the cluster-robust sandwich
    (bread = inverse information, meat = outer products of per-cluster
    score sums).  Raises :class:`RankDeficiencyError` on collinear
    designs and :class:`SeparationError` when a coefficient diverges.
    """
    outcome = np.asarray(outcome, dtype=float)
    design = np.asarray(design, dtype=float)
    cluster_ids = np.asarray(cluster_ids)
    names = tuple(names)
    n_obs, n_coef = design.shape
    if len(names) != n_coef:
        raise ParameterError("names length differs from design column count")
    if len(outcome) != n_obs or len(cluster_ids) != n_obs:
        raise ParameterError("outcome, design and cluster_ids disagree on length")
    base_weight = np.ones(n_obs) if weights is None else np.asarray(weights, dtype=float)
    _check_rank(np.sqrt(base_weight)[:, None] * design, names)

    beta = np.zeros(n_coef)
    converged = False
    iterations = 0
    tiny = np.finfo(float).tiny
    for iterations in range(1, max_iterations + 1):
        eta = design @ beta
        mu = expit(eta)
        variance = np.maximum(mu * (1.0 - mu), tiny)
        working = eta + (outcome - mu) / variance
        root_w = np.sqrt(base_weight * variance)
        new_beta, *_ = np.linalg.lstsq(root_w[:, None] * design, root_w * working, rcond=None)
        worst = int(np.argmax(np.abs(new_beta)))
        if abs(new_beta[worst]) > SEPARATION_BOUND:
            raise SeparationError(
                f"coefficient on {names[worst]!r} diverged beyond ±{SEPARATION_BOUND:g}; "
                "the outcome is (quasi-)separated along that column",
                column=names[worst],
            )
        step = np.max(np.abs(new_beta - beta))
        beta = new_beta
        if step < tol * (1.0 + np.max(np.abs(beta))):
            converged = True
            break

    mu = expit(design @ beta)
    info_weight = base_weight * np.maximum(mu * (1.0 - mu), tiny)
    information = design.T @ (info_weight[:, None] * design)
    try:
        bread = np.linalg.inv(information)
    except np.linalg.LinAlgError:
        raise EstimationError("information matrix is singular at the optimum") from None
    score_rows = (base_weight * (outcome - mu))[:, None] * design
    clusters, codes = np.unique(cluster_ids, return_inverse=True)
    cluster_scores = np.zeros((len(clusters), n_coef))
    np.add.at(cluster_scores, codes, score_rows)
    meat = cluster_scores.T @ cluster_scores
    covariance = bread @ meat @ bread
    covariance = 0.5 * (covariance + covariance.T)
    return FitResult(
        names=names,
        estimates=beta,
        robust_covariance=covariance,
        n_households=len(clusters),
        n_obs=n_obs,
        iterations=iterations,
        converged=converged,
        log_quasi_likelihood=log_quasi_likelihood(outcome, design, beta, base_weight),
    )


def fit(panel: PanelData, spec: Specification) -> FitResult:
    """Fit a participation specification on a panel.

    Households are the clusters; the panel's weight column, when
    present, multiplies the estimating equations.
    """
    design, names = build_design(panel, spec)
    return fit_logit(panel.outcome, design, panel.household_id, names, panel.weight)


def wald_one_sided(fit_result: FitResult, coef_i: str, coef_j: str) -> tuple[float, float]:
    """One-sided Wald comparison of two fitted coefficients.

    Tests b_i > b_j: z = (b_i - b_j) / se(b_i - b_j) with the contrast
    variance taken from the robust covariance, p = 1 - Phi(z).
    """
    i = fit_result._index(coef_i)
    j = fit_result._index(coef_j)
    cov = fit_result.robust_covariance
    variance = cov[i, i] + cov[j, j] - 2.0 * cov[i, j]
    if not variance > 0.0:
        raise EstimationError(
            f"contrast {coef_i} - {coef_j} has nonpositive variance estimate {variance:.3e}"
        )
    z = float((fit_result.estimates[i] - fit_result.estimates[j]) / math.sqrt(variance))
    return z, float(norm.sf(z))


#: Coefficient names with model-defined columns; anything else in a
#: truth vector is drawn as a standard-normal control of that name.
_STRUCTURAL_NAMES = frozenset(
    ["const", "policy", "policy_x_score"]
    + [f"policy_x_score_{level}" for level in LITERACY_LEVELS[1:]]
    + [f"score_{level}" for level in LITERACY_LEVELS[1:]]
)


def synth_panel(
    truth: dict[str, float] | None = None,
    n_households: int = 5000,
    literacy_distribution: tuple[float, float, float, float] = DEFAULT_LITERACY_DISTRIBUTION,
    seed: int = 0,
) -> PanelData:
    """Two-wave synthetic panel drawn from a known logit model.

    Households draw a literacy level from ``literacy_distribution`` and
    appear in both waves with the policy dummy active in the second.
    Controls (the non-structural names in ``truth``) are independent
    standard normals per observation.  Deterministic given ``seed``:
    draws occur in the order literacy, controls, outcomes.
    """
    if truth is None:
        truth = DEFAULT_SYNTH_TRUTH
    if n_households < 1:
        raise ParameterError("n_households must be at least 1")
    distribution = np.asarray(literacy_distribution, dtype=float)
    if distribution.shape != (4,) or np.any(distribution < 0.0):
        raise ParameterError("literacy_distribution must be 4 nonnegative probabilities")
    if not math.isclose(float(distribution.sum()), 1.0, rel_tol=0.0, abs_tol=1e-9):
        raise ParameterError("literacy_distribution must sum to 1")
    if "policy_x_score" in truth and any(
        f"policy_x_score_{level}" in truth for level in LITERACY_LEVELS[1:]
    ):
        raise ParameterError("truth mixes the linear and per-level interaction forms")

    rng = np.random.default_rng(seed)
    literacy = rng.choice(len(LITERACY_LEVELS), size=n_households, p=distribution)
    n_obs = 2 * n_households
    household_id = np.repeat(np.arange(n_households), 2)
    year = np.tile([1, 2], n_households)
    policy = (year == 2).astype(float)
    score = literacy[household_id].astype(float)

    control_names = tuple(name for name in truth if name not in _STRUCTURAL_NAMES)
    controls = rng.standard_normal((n_obs, len(control_names)))

    eta = np.zeros(n_obs)
    for name, coefficient in truth.items():
        if name == "const":
            column = np.ones(n_obs)
        elif name == "policy":
            column = policy
        elif name == "policy_x_score":
            column = policy * score
        elif name.startswith("policy_x_score_"):
            column = policy * (score == float(name.rsplit("_", 1)[1]))
        elif name.startswith("score_") and name in _STRUCTURAL_NAMES:
            column = (score == float(name.rsplit("_", 1)[1])).astype(float)
        else:
            column = controls[:, control_names.index(name)]
        eta += coefficient * column
    outcome = (rng.random(n_obs) < expit(eta)).astype(float)
    return PanelData(
        household_id=household_id,
        year=year,
        outcome=outcome,
        literacy_score=literacy[household_id],
        controls=controls,
        control_names=control_names,
    )


def read_panel_csv(path) -> PanelData:
    """Parse a panel CSV into :class:`PanelData`.

    Expected header: ``household_id,year,outcome,literacy_score``
    followed by control columns and an optional ``weight``.  Missing or
    non-numeric values are rejected, never imputed.
    """
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise SchemaError("panel CSV is empty") from None
    if frame.shape[0] == 0:
        raise SchemaError("panel CSV has a header but no rows")
    for column in REQUIRED_PANEL_COLUMNS:
        if column not in frame.columns:
            raise SchemaError(f"panel CSV is missing required column '{column}'")
    extras = [c for c in frame.columns if c not in REQUIRED_PANEL_COLUMNS]
    weight = None
    if "weight" in extras:
        extras.remove("weight")
        weight = _numeric_column(frame, "weight")
    numeric = {
        column: _numeric_column(frame, column)
        for column in ("year", "outcome", "literacy_score", *extras)
    }
    if frame["household_id"].isna().any():
        raise SchemaError("column 'household_id' contains missing values")
    controls = (
        np.column_stack([numeric[c] for c in extras])
        if extras
        else np.empty((frame.shape[0], 0))
    )
    try:
        return PanelData(
            household_id=frame["household_id"].to_numpy(),
            year=numeric["year"],
            outcome=numeric["outcome"],
            literacy_score=numeric["literacy_score"],
            controls=controls,
            control_names=tuple(extras),
            weight=weight,
        )
    except ParameterError as exc:
        raise SchemaError(f"panel CSV violates the panel schema: {exc}") from exc


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    if raw.isna().any():
        raise SchemaError(f"column '{column}' contains missing values")
    values = pd.to_numeric(raw, errors="coerce")
    if values.isna().any():
        raise SchemaError(f"column '{column}' contains non-numeric values")
    return values.to_numpy(dtype=float)
