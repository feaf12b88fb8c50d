"""Command-line front end.

Subcommands: ``rule``, ``modulus``, ``max-regret``, ``estimate``,
``simulate``, ``sensitivity`` and ``lower-bound``. JSON goes to ``--out`` or
standard output; errors are reported as JSON on standard error with exit
code 2 (invalid input) or 3 (numerical failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import estimators, preprocessing, regret, rules
from .core import Dataset, PolicySpec, a_star, prepare
from .errors import (
    BadRow,
    EmptyFile,
    MinimaxPolicyError,
    MissingColumn,
    NotApplicable,
    SolverError,
    ValidationError,
)
from .modulus import ModulusPoint
from .providers import RDLipschitzProvider

SCHEMA = 1
EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
COLUMNS = ("x", "d", "y", "sigma")


def parse_dataset_csv(path) -> Dataset:
    """Read ``x,d,y[,sigma]`` with a header row.

    A file without a ``sigma`` column yields a dataset with ``sigma=None``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyFile(f"{path} is empty") from None
    if not any(header):
        raise EmptyFile(f"{path} has no header")
    for col in ("x", "d", "y"):
        if col not in header:
            raise MissingColumn(f"missing column {col!r}")
    has_sigma = "sigma" in header
    pos = {c: header.index(c) for c in COLUMNS if c in header}
    cols = {c: [] for c in pos}
    for line, row in enumerate(reader, start=2):
        if not row or all(not v.strip() for v in row):
            continue
        if len(row) != len(header):
            raise BadRow(line, f"expected {len(header)} fields, got {len(row)}")
        for c, j in pos.items():
            try:
                v = float(row[j])
            except ValueError:
                raise BadRow(line, f"non-numeric {c!r}") from None
            if not math.isfinite(v):
                raise BadRow(line, f"non-finite {c!r}")
            cols[c].append(v)
        if cols["d"][-1] not in (0.0, 1.0):
            raise BadRow(line, "d must be 0 or 1")
        if has_sigma and not cols["sigma"][-1] > 0:
            raise BadRow(line, "sigma must be positive")
    if not cols["x"]:
        raise EmptyFile(f"{path} has no data rows")
    return Dataset(cols["x"], cols["d"], cols["y"], cols["sigma"] if has_sigma else None)


def parse_grid(spec: str) -> list[float]:
    """Parse ``"a:b:step"`` into the inclusive lattice ``a, a+step, ..., <= b``."""
    try:
        a, b, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ValidationError(f"grid must look like a:b:step, got {spec!r}") from None
    if not step > 0 or b < a:
        raise ValidationError("grid needs step > 0 and b >= a")
    k = int(math.floor((b - a) / step + 1e-9))
    return [round(a + i * step, 12) for i in range(k + 1)]


@dataclass
class RunConfig:
    command: str
    data_path: str | None = None
    c0: float | None = None
    c1: float | None = None
    cost: float = 0.0
    lipschitz_c: float | None = None
    c_grid: list | None = None
    seed: int | None = None
    degree: int = 1
    neighbors: int = 3
    bandwidth: float | None = None
    draws: int = 100_000
    out: str | None = None
    eps_grid: list = field(default_factory=lambda: parse_grid("0:1:0.05"))
    estimator: str = "mse"
    rule_path: str | None = None
    aggregate_duplicates: bool = False

    def __post_init__(self):
        if self.c_grid is not None:
            if len(self.c_grid) == 0 or any(b <= a for a, b in zip(self.c_grid, self.c_grid[1:])):
                raise ValidationError("c_grid must be nonempty and strictly increasing")


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _emit_json(payload: dict, out):
    # repr of a double is the shortest string that round-trips exactly
    text = json.dumps(_clean({"schema": SCHEMA, **payload}), indent=2, allow_nan=False)
    _write(text + "\n", out)


def _emit_csv(header, rows, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if (isinstance(v, float) and not math.isfinite(v)) else (repr(v) if isinstance(v, float) else v)
                    for v in r])
    _write(buf.getvalue(), out)


def _write(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _require(cfg, *names):
    for n in names:
        if getattr(cfg, n) is None:
            raise ValidationError(f"--{n.replace('_', '-').replace('lipschitz-c', 'lipschitz')} is required")


def _load(cfg):
    _require(cfg, "data_path", "c0", "c1")
    ds = parse_dataset_csv(cfg.data_path)
    if not ds.has_sigma:
        ds = preprocessing.nn_variance(ds, cfg.neighbors)
    return ds


def _problem(cfg, ds, c=None):
    c = cfg.lipschitz_c if c is None else c
    if c is None:
        raise ValidationError("--lipschitz is required")
    return prepare(ds, PolicySpec(cfg.c0, cfg.c1, cfg.cost, c), aggregate_duplicates=cfg.aggregate_duplicates)


def _rule_payload(problem, rule, seed):
    raw_y = problem.y + problem.spec.cost * problem.d
    dec = rules.decide(rule, problem.y, seed)
    try:
        c_star = rules.cost_threshold(problem, raw_y, rule)
    except NotApplicable:
        c_star = None
    try:
        level = rules.equivalent_test_level(rule)
    except NotApplicable:
        level = None
    out = {
        "kind": rule.kind,
        "sigma_star": rule.sigma_star,
        "epsilon_star": rule.epsilon_star,
        "minimax_risk": rule.minimax_risk,
        "noise_sd": rule.noise_sd,
        "weights": rule.raw_weights,
        "provider_id": rule.provider_id,
        "prob_policy1": dec.prob_policy1,
        "cost_threshold": c_star,
        "equivalent_test_level": level,
        "lipschitz_c": problem.lipschitz_c,
        "c0": problem.spec.c0,
        "c1": problem.spec.c1,
        "cost": problem.spec.cost,
    }
    if seed is not None:
        out["action"] = dec.action
    return out


def _cmd_rule(cfg):
    p = _problem(cfg, _load(cfg))
    rule = rules.build_rule(RDLipschitzProvider(p))
    _emit_json({"command": "rule", **_rule_payload(p, rule, cfg.seed)}, cfg.out)


def _cmd_modulus(cfg):
    p = _problem(cfg, _load(cfg))
    prov = RDLipschitzProvider(p)
    rows = [(e, prov.omega(e), prov.omega_prime(e)) for e in cfg.eps_grid]
    _emit_csv(("epsilon", "omega", "omega_prime"), rows, cfg.out)


def _report(rep, **extra):
    return {"rule_id": rep.rule_id, "max_regret": rep.max_regret, "unbounded": rep.unbounded,
            "argmax_epsilon": rep.argmax_epsilon, **extra}


def _cmd_max_regret(cfg):
    p = _problem(cfg, _load(cfg))
    prov = RDLipschitzProvider(p)
    rule = rules.build_rule(prov)
    reports = [_report(regret.max_regret(p, rule), analytic=rule.minimax_risk)]
    makers = [
        ("mse", lambda: estimators.minimax_mse_estimator(prov)),
        ("mse_constant_effect", lambda: estimators.minimax_mse_estimator(prov, constant_effect=True)),
        (f"polynomial_{cfg.degree}", lambda: estimators.polynomial_wls_estimator(p, cfg.degree)),
    ]
    for label, make in makers:
        try:
            est = make()
        except MinimaxPolicyError as exc:
            reports.append({"rule_id": label, "max_regret": None, "error": f"{type(exc).__name__}: {exc}"})
            continue
        rep = regret.max_regret(p, rules.plugin_rule(est.raw_weights, label))
        reports.append(_report(rep))
    _emit_json({"command": "max-regret", "lipschitz_c": p.lipschitz_c, "reports": reports}, cfg.out)


def _cmd_estimate(cfg):
    p = _problem(cfg, _load(cfg))
    prov = RDLipschitzProvider(p)
    if cfg.estimator == "mse":
        est = estimators.minimax_mse_estimator(prov)
    elif cfg.estimator == "mse-constant":
        est = estimators.minimax_mse_estimator(prov, constant_effect=True)
    elif cfg.estimator == "polynomial":
        est = estimators.polynomial_wls_estimator(p, cfg.degree)
    else:
        raise ValidationError(f"unknown estimator {cfg.estimator!r}")
    _emit_json({
        "command": "estimate", "label": est.label, "estimate": est.estimate(p.y),
        "weights": est.raw_weights, "epsilon": est.epsilon, "max_bias": est.max_bias, "sd": est.sd,
    }, cfg.out)


def _cmd_simulate(cfg):
    p = _problem(cfg, _load(cfg))
    prov = RDLipschitzProvider(p)
    minimax = rules.build_rule(prov)
    if cfg.rule_path:
        with open(cfg.rule_path, encoding="utf-8") as fh:
            data = json.load(fh)
        data.setdefault("raw_weights", data.get("weights"))
        rule = rules.DecisionRule.from_dict(data)
        if rule.raw_weights.size != p.n:
            raise ValidationError("rule weights do not match the dataset")
    else:
        rule = minimax
    point: ModulusPoint = prov.point(minimax.epsilon_star)
    truth = regret.truth_from_point(p, point)
    seed = 0 if cfg.seed is None else cfg.seed
    mc = regret.monte_carlo_regret(rule, truth, p.sigma, cfg.draws, seed)
    dec = rules.decide(rule, p.y, cfg.seed)
    out = {
        "command": "simulate", "regret": mc.regret, "se": mc.se, "analytic": minimax.minimax_risk,
        "draws": cfg.draws, "seed": seed, "epsilon": point.epsilon, "welfare": truth.welfare,
        "prob_policy1": dec.prob_policy1,
    }
    if cfg.seed is not None:
        out["action"] = dec.action
    _emit_json(out, cfg.out)


def _cmd_sensitivity(cfg):
    ds = _load(cfg)
    grid = cfg.c_grid
    if grid is None:
        raise ValidationError("--c-grid is required")

    def row(c):
        p = _problem(cfg, ds, c)
        rule = rules.build_rule(RDLipschitzProvider(p))
        pay = _rule_payload(p, rule, None)
        cs = pay["cost_threshold"]
        return (c, rule.sigma_star, rule.epsilon_star, rule.kind, pay["prob_policy1"], rule.minimax_risk,
                math.nan if cs is None else cs)

    rows = regret.parallel_map(row, grid)
    _emit_csv(("lipschitz_c", "sigma_star", "epsilon_star", "kind", "prob_policy1", "minimax_risk",
               "cost_threshold"), rows, cfg.out)


def _cmd_lower_bound(cfg):
    _require(cfg, "data_path", "c0")
    ds = parse_dataset_csv(cfg.data_path)
    grid = preprocessing.default_grid(ds, cfg.c0)
    slopes = preprocessing.local_slopes(ds, cfg.c0, grid, cfg.bandwidth)
    _emit_json({
        "command": "lower-bound", "lower_bound": float(np.max(np.abs(slopes))), "grid": grid, "slopes": slopes,
        "bandwidth": cfg.bandwidth,
        "warning": "maximum over noisy local slopes; biased upward, no correction applied",
    }, cfg.out)


COMMANDS = {
    "rule": _cmd_rule,
    "modulus": _cmd_modulus,
    "max-regret": _cmd_max_regret,
    "estimate": _cmd_estimate,
    "simulate": _cmd_simulate,
    "sensitivity": _cmd_sensitivity,
    "lower-bound": _cmd_lower_bound,
}


def run(config: RunConfig) -> int:
    """Execute one subcommand; returns the process exit code."""
    try:
        COMMANDS[config.command](config)
    except ValidationError as exc:
        _error(exc, EXIT_INVALID)
        return EXIT_INVALID
    except SolverError as exc:
        _error(exc, EXIT_SOLVER)
        return EXIT_SOLVER
    except OSError as exc:
        _error(exc, EXIT_INVALID)
        return EXIT_INVALID
    return EXIT_OK


def _error(exc, code):
    payload = {"schema": SCHEMA, "error": type(exc).__name__, "message": str(exc), "exit_code": code}
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    sys.stderr.write(json.dumps(payload) + "\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="minimax-policy", description="Minimax regret rules for changing an eligibility cutoff.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--data", dest="data_path", required=True, help="CSV with columns x,d,y[,sigma]")
        sp.add_argument("--c0", type=float, required=True, help="status-quo cutoff")
        sp.add_argument("--c1", type=float, help="proposed cutoff, below c0")
        sp.add_argument("--cost", type=float, default=0.0)
        sp.add_argument("--lipschitz", dest="lipschitz_c", type=float)
        sp.add_argument("--c-grid", dest="c_grid", type=parse_grid, help='Lipschitz grid "a:b:step"')
        sp.add_argument("--eps-grid", dest="eps_grid", type=parse_grid, default=parse_grid("0:1:0.05"))
        sp.add_argument("--degree", type=int, default=1)
        sp.add_argument("--neighbors", type=int, default=3)
        sp.add_argument("--bandwidth", type=float)
        sp.add_argument("--draws", type=int, default=100_000)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--estimator", choices=("mse", "mse-constant", "polynomial"), default="mse")
        sp.add_argument("--rule", dest="rule_path", help="rule JSON from the rule subcommand")
        sp.add_argument("--aggregate-duplicates", action="store_true")
        sp.add_argument("--out")
    return parser


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = RunConfig(**vars(ns))
    except ValidationError as exc:
        _error(exc, EXIT_INVALID)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
