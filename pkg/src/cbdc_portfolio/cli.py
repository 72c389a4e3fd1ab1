"""Command line front door.

Subcommands: ``calibrate`` (binomial lattice and binned returns),
``solve`` (all four agent/economy problems at the configured income),
``sweep`` (comparative statics over income or the CBDC return),
``estimate`` (panel logit on a CSV), and ``synth`` (synthetic panel
generation).  Configuration is a flat ``key=value`` file with block
prefixes; omitted keys fall back to the default calibration.  Numbers
are serialized with 12 significant digits so identical inputs produce
byte-identical CSVs.

Exit codes: 0 success, 2 config/schema error, 3 infeasible model,
4 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    DEFAULT_CBDC_RETURN_GRID,
    SweepRecord,
    _record,
    sweep_cbdc_return,
    sweep_deterministic,
    sweep_stochastic,
)
from .calibration import (
    DEFAULT_ANNUAL_MARKET,
    DEFAULT_GAMMA,
    AnnualMarket,
    annualize_rate,
    bin_returns,
    binomial_outcomes,
    default_preferences,
    default_returns,
    equity_premium,
)
from .errors import (
    ConvergenceError,
    EstimationError,
    FeasibilityError,
    InfeasibleModelError,
    ModelError,
    ParameterError,
    SchemaError,
)
from .inference import (
    DEFAULT_LITERACY_DISTRIBUTION,
    DEFAULT_SYNTH_TRUTH,
    PanelData,
    Specification,
    SpecKind,
    fit,
    odds_change,
    read_panel_csv,
    synth_panel,
    wald_one_sided,
)
from .model import (
    AgentKind,
    Economy,
    IncomeProcess,
    ModelInstance,
    Preferences,
    ReturnStructure,
)
from .solver import SolverConfig, solve

SWEEP_COLUMNS = (
    "sweep_parameter",
    "agent",
    "economy",
    "a",
    "d",
    "m",
    "c1",
    "liquid_cbdc_share",
    "portfolio_cbdc_share",
    "p_eps",
    "converged",
)

CALIBRATION_COLUMNS = ("n", "probability", "compounded_return")

ESTIMATE_COLUMNS = ("name", "estimate", "robust_se", "odds_change")

_XLABELS = {
    "deterministic": "certain second-period income",
    "stochastic": "worst-case second-period income",
    "cbdc-return": "CBDC gross return",
}

_PAIRINGS = (
    (AgentKind.HFL, Economy.PRE_CBDC),
    (AgentKind.HFL, Economy.WITH_CBDC),
    (AgentKind.LFL, Economy.PRE_CBDC),
    (AgentKind.LFL, Economy.WITH_CBDC),
)


@dataclass(frozen=True)
class RunConfig:
    """Typed view of a config file, defaults filled in."""

    endowment: float
    prefs: Preferences
    returns: ReturnStructure
    period_years: int
    annual: AnnualMarket
    split_after: int
    truncate_at: int
    income: IncomeProcess
    deterministic_grid: tuple[float, ...]
    stochastic_grid: tuple[float, ...]
    stochastic_s_max: float
    target_mean: float
    cbdc_return_grid: tuple[float, ...]
    solver: SolverConfig
    out_dir: str
    plot: bool
    synth_n_households: int
    synth_seed: int
    literacy_distribution: tuple[float, float, float, float]
    truth: dict[str, float]

    def instance(self, economy: Economy = Economy.WITH_CBDC) -> ModelInstance:
        return ModelInstance(
            endowment=self.endowment,
            prefs=self.prefs,
            returns=self.returns,
            income=self.income,
            economy=economy,
        )


def _parse_bool(raw: str) -> bool:
    if raw not in ("true", "false"):
        raise ValueError(f"expected true or false, got {raw!r}")
    return raw == "true"


#: Every accepted config key with its parser; synth.truth.<name> keys
#: are matched by prefix instead.
_KEY_PARSERS = {
    "calibration.y": float,
    "calibration.beta": float,
    "calibration.r_deposit": float,
    "calibration.r_cbdc": float,
    "calibration.r_risky_high": float,
    "calibration.r_risky_low": float,
    "calibration.p_high": float,
    "calibration.gamma": float,
    "calibration.lambda": float,
    "calibration.sigma": float,
    "calibration.period_years": int,
    "annual.r_risky_high": float,
    "annual.r_risky_low": float,
    "annual.p_high": float,
    "annual.r_deposit": float,
    "annual.split_after": int,
    "annual.truncate_at": int,
    "income.s": float,
    "income.s_max": float,
    "income.s_min": float,
    "income.p_eps": float,
    "sweep.s_start": float,
    "sweep.s_stop": float,
    "sweep.s_points": int,
    "sweep.s_min_start": float,
    "sweep.s_min_stop": float,
    "sweep.s_min_points": int,
    "sweep.s_max": float,
    "sweep.target_mean": float,
    "sweep.r_cbdc_start": float,
    "sweep.r_cbdc_stop": float,
    "sweep.r_cbdc_points": int,
    "solver.tol_residual": float,
    "solver.max_iters": int,
    "output.directory": str,
    "output.plot": _parse_bool,
    "synth.n_households": int,
    "synth.seed": int,
    "synth.literacy_p0": float,
    "synth.literacy_p1": float,
    "synth.literacy_p2": float,
    "synth.literacy_p3": float,
}

_TRUTH_PREFIX = "synth.truth."


def _read_key_values(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read config file {path}: {exc}") from exc
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise SchemaError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in raw:
            raise SchemaError(f"{path}:{lineno}: duplicate config key '{key}'")
        raw[key] = value.strip()
    return raw


def load_config(path: str | None) -> RunConfig:
    """Parse a config file (or pure defaults when ``path`` is None).

    Unknown keys are rejected, and every model-type invariant is
    enforced here rather than at first use.
    """
    raw = _read_key_values(path) if path is not None else {}
    values: dict[str, object] = {}
    truth: dict[str, float] = {}
    for key, raw_value in raw.items():
        if key.startswith(_TRUTH_PREFIX):
            name = key[len(_TRUTH_PREFIX) :]
            if not name:
                raise SchemaError(f"empty coefficient name in config key '{key}'")
            parser = float
        elif key in _KEY_PARSERS:
            name = key
            parser = _KEY_PARSERS[key]
        else:
            raise SchemaError(f"unknown config key '{key}'")
        try:
            parsed = parser(raw_value)
        except ValueError as exc:
            raise SchemaError(f"invalid value for '{key}': {exc}") from exc
        if key.startswith(_TRUTH_PREFIX):
            truth[name] = parsed
        else:
            values[name] = parsed

    def get(key: str, default):
        return values.get(key, default)

    base_prefs = default_preferences(gamma=get("calibration.gamma", DEFAULT_GAMMA))
    prefs = Preferences(
        beta=get("calibration.beta", base_prefs.beta),
        gamma=base_prefs.gamma,
        lam=get("calibration.lambda", base_prefs.lam),
        sigma=get("calibration.sigma", base_prefs.sigma),
    )
    base_returns = default_returns()
    returns = ReturnStructure(
        r_deposit=get("calibration.r_deposit", base_returns.r_deposit),
        r_cbdc=get("calibration.r_cbdc", base_returns.r_cbdc),
        r_risky_high=get("calibration.r_risky_high", base_returns.r_risky_high),
        r_risky_low=get("calibration.r_risky_low", base_returns.r_risky_low),
        p_high=get("calibration.p_high", base_returns.p_high),
    )
    period_years = get("calibration.period_years", DEFAULT_ANNUAL_MARKET.period_years)
    annual = AnnualMarket(
        r_risky_high_annual=get("annual.r_risky_high", DEFAULT_ANNUAL_MARKET.r_risky_high_annual),
        r_risky_low_annual=get("annual.r_risky_low", DEFAULT_ANNUAL_MARKET.r_risky_low_annual),
        p_high_annual=get("annual.p_high", DEFAULT_ANNUAL_MARKET.p_high_annual),
        r_deposit_annual=get("annual.r_deposit", DEFAULT_ANNUAL_MARKET.r_deposit_annual),
        period_years=period_years,
    )

    income = _income_from(values)
    solver = SolverConfig(
        tol_residual=get("solver.tol_residual", SolverConfig.tol_residual),
        max_iters=get("solver.max_iters", SolverConfig.max_iters),
    )
    literacy = tuple(
        get(f"synth.literacy_p{level}", DEFAULT_LITERACY_DISTRIBUTION[level])
        for level in range(4)
    )
    return RunConfig(
        endowment=get("calibration.y", 1.0),
        prefs=prefs,
        returns=returns,
        period_years=period_years,
        annual=annual,
        split_after=get("annual.split_after", 2),
        truncate_at=get("annual.truncate_at", 5),
        income=income,
        deterministic_grid=_grid(values, "sweep.s_start", "sweep.s_stop", "sweep.s_points", (0.0, 1.25, 50)),
        stochastic_grid=_grid(
            values, "sweep.s_min_start", "sweep.s_min_stop", "sweep.s_min_points", (0.9, -0.9, 50)
        ),
        stochastic_s_max=get("sweep.s_max", 1.25),
        target_mean=get("sweep.target_mean", 1.0),
        cbdc_return_grid=_grid(
            values, "sweep.r_cbdc_start", "sweep.r_cbdc_stop", "sweep.r_cbdc_points", None
        )
        or DEFAULT_CBDC_RETURN_GRID,
        solver=solver,
        out_dir=get("output.directory", "out"),
        plot=get("output.plot", False),
        synth_n_households=get("synth.n_households", 5000),
        synth_seed=get("synth.seed", 0),
        literacy_distribution=literacy,
        truth=truth or dict(DEFAULT_SYNTH_TRUTH),
    )


def _income_from(values: dict[str, object]) -> IncomeProcess:
    triple = ("income.s_max", "income.s_min", "income.p_eps")
    given = [key for key in triple if key in values]
    if given and "income.s" in values:
        raise SchemaError("income.s conflicts with the income.s_max/s_min/p_eps triple")
    if given and len(given) != 3:
        missing = sorted(set(triple) - set(given))
        raise SchemaError(f"stochastic income needs all three keys; missing {', '.join(missing)}")
    if given:
        return IncomeProcess(
            s_max=values["income.s_max"],
            s_min=values["income.s_min"],
            p_eps=values["income.p_eps"],
        )
    s = values.get("income.s", 1.0)
    return IncomeProcess(s_max=s, s_min=s, p_eps=1.0)


def _grid(values: dict[str, object], start_key: str, stop_key: str, points_key: str, default):
    keys = (start_key, stop_key, points_key)
    given = [key for key in keys if key in values]
    if not given:
        if default is None:
            return None
        start, stop, points = default
        return tuple(np.linspace(start, stop, points))
    if len(given) != 3:
        missing = sorted(set(keys) - set(given))
        raise SchemaError(f"grid needs all of {', '.join(keys)}; missing {', '.join(missing)}")
    points = values[points_key]
    if points < 1:
        raise SchemaError(f"{points_key} must be at least 1, got {points}")
    if points == 1:
        return (float(values[start_key]),)
    return tuple(np.linspace(values[start_key], values[stop_key], points))


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def _write_csv(path: Path, columns: tuple[str, ...], rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _sweep_row(record: SweepRecord) -> list[str]:
    alloc = record.alloc
    return [
        _format_value(record.sweep_parameter),
        record.agent.value,
        record.economy.value,
        _format_value(alloc.risky if alloc else None),
        _format_value(alloc.deposits if alloc else None),
        _format_value(alloc.cbdc if alloc else None),
        _format_value(alloc.consumption1 if alloc else None),
        _format_value(record.liquid_cbdc_share),
        _format_value(record.portfolio_cbdc_share),
        _format_value(record.p_eps_used),
        _format_value(record.converged),
    ]


def _write_sweep_csv(path: Path, records: list[SweepRecord]) -> None:
    _write_csv(path, SWEEP_COLUMNS, [_sweep_row(record) for record in records])


def _out_dir(args, config: RunConfig) -> Path:
    out = Path(args.out if args.out is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_calibrate(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    rows = binomial_outcomes(config.annual)
    observable = [row for row in rows if row.probability > 0.0]
    _write_csv(
        out / "calibration.csv",
        CALIBRATION_COLUMNS,
        [
            [str(row.n_crisis_years), _format_value(row.probability), _format_value(row.compounded_return)]
            for row in observable
        ],
    )
    lines = []
    tail_mass = sum(row.probability for row in rows if row.n_crisis_years > config.split_after)
    if tail_mass > 0.0:
        p_a, r_high, r_low = bin_returns(rows, config.split_after, config.truncate_at)
        lines += [f"p_a={_format_value(p_a)}", f"r_high={_format_value(r_high)}", f"r_low={_format_value(r_low)}"]
    lines += [
        f"equity_premium={_format_value(equity_premium(config.annual))}",
        f"r_deposit_annual={_format_value(annualize_rate(config.returns.r_deposit, config.period_years))}",
        f"r_cbdc_annual={_format_value(annualize_rate(config.returns.r_cbdc, config.period_years))}",
    ]
    print("\n".join(lines))
    return 0


def _solve_records(config: RunConfig) -> list[SweepRecord]:
    records = []
    parameter = config.income.s_min
    for agent, economy in _PAIRINGS:
        instance = config.instance(economy)
        try:
            outcome = solve(instance, agent, config.solver)
        except (ConvergenceError, InfeasibleModelError) as exc:
            outcome = exc
        records.append(_record(parameter, agent, economy, outcome, config.income.p_eps))
    return records


def cmd_solve(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    records = _solve_records(config)
    _write_sweep_csv(out / "solution.csv", records)
    if not any(record.converged for record in records):
        print("error: no agent/economy problem is feasible", file=sys.stderr)
        return 3
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    base = config.instance()
    if args.which == "deterministic":
        records = sweep_deterministic(
            base, list(config.deterministic_grid), config.solver, jobs=args.jobs
        )
    elif args.which == "stochastic":
        records = sweep_stochastic(
            base,
            list(config.stochastic_grid),
            s_max=config.stochastic_s_max,
            target_mean=config.target_mean,
            config=config.solver,
            jobs=args.jobs,
        )
    else:
        records = sweep_cbdc_return(
            base,
            list(config.cbdc_return_grid),
            scenario=config.income,
            config=config.solver,
            jobs=args.jobs,
        )
    stem = f"sweep_{args.which.replace('-', '_')}"
    csv_path = out / f"{stem}.csv"
    _write_sweep_csv(csv_path, records)
    if not any(record.converged for record in records):
        print("error: every grid point is infeasible", file=sys.stderr)
        return 3
    if args.plot or config.plot:
        from .plots import render_sweep_svg

        render_sweep_svg(csv_path, out / f"{stem}.svg", xlabel=_XLABELS[args.which])
    return 0


def cmd_estimate(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    panel = read_panel_csv(args.panel)
    kind = SpecKind.LINEAR_SCORE if args.spec == "linear" else SpecKind.SCORE_DUMMIES
    result = fit(panel, Specification(kind=kind))
    if not result.converged:
        raise EstimationError(
            f"fit did not converge within {result.iterations} iterations"
        )
    _write_csv(
        out / "estimates.csv",
        ESTIMATE_COLUMNS,
        [
            [
                name,
                _format_value(result.coefficient(name)),
                _format_value(result.robust_se(name)),
                _format_value(odds_change(result.coefficient(name))),
            ]
            for name in result.names
        ],
    )
    if args.wald is not None:
        high, low = args.wald
        z, p = wald_one_sided(result, high, low)
        print(f"one-sided wald {high} > {low}: z={z:.4f} p={p:.3f}")
    return 0


def cmd_synth(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    seed = args.seed if args.seed is not None else config.synth_seed
    panel = synth_panel(
        truth=config.truth,
        n_households=config.synth_n_households,
        literacy_distribution=config.literacy_distribution,
        seed=seed,
    )
    _write_panel_csv(out / "panel.csv", panel)
    return 0


def _write_panel_csv(path: Path, panel: PanelData) -> None:
    columns = ("household_id", "year", "outcome", "literacy_score", *panel.control_names)
    rows = []
    for i in range(panel.n_obs):
        rows.append(
            [
                str(panel.household_id[i]),
                str(int(panel.year[i])),
                str(int(panel.outcome[i])),
                str(int(panel.literacy_score[i])),
                *(_format_value(value) for value in panel.controls[i]),
            ]
        )
    _write_csv(path, columns, rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbdc-portfolio",
        description="Two-period CBDC portfolio model: calibration, solving, sweeps, and panel inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file", default=None)
        p.add_argument("--out", help="output directory (default from config)", default=None)

    p_cal = sub.add_parser("calibrate", help="binomial return lattice and binned calibration")
    common(p_cal)
    p_cal.set_defaults(func=cmd_calibrate)

    p_solve = sub.add_parser("solve", help="solve all four agent/economy problems")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="comparative-statics sweep")
    p_sweep.add_argument("which", choices=("deterministic", "stochastic", "cbdc-return"))
    common(p_sweep)
    p_sweep.add_argument("--plot", action="store_true", help="render an SVG next to the CSV")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel solver processes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_est = sub.add_parser("estimate", help="panel logit with clustered errors")
    p_est.add_argument("panel", help="panel CSV path")
    common(p_est)
    p_est.add_argument("--spec", choices=("linear", "dummies"), default="linear")
    p_est.add_argument(
        "--wald",
        nargs=2,
        metavar=("NAME", "NAME"),
        default=None,
        help="print the one-sided Wald comparison of two coefficients",
    )
    p_est.set_defaults(func=cmd_estimate)

    p_synth = sub.add_parser("synth", help="generate a synthetic two-wave panel")
    common(p_synth)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ParameterError, FeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ModelError as exc:
        # Remaining failures are estimation or solver breakdowns.
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
