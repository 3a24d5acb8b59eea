"""Command-line front end: scenario ingestion, sweep drivers, reports.

Exit codes: 0 success, 2 input/validation error, 3 size-cap refusal.
CSV output uses '.' decimals and 12 significant digits so golden files
are stable across platforms. Scenario files are flat ``key: value``
text with a mandatory ``schema_version`` field; command-line flags
override scenario values.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import dynamics as dyn
from . import kelly as kl
from . import queue_stability as qs
from . import wardrop as wd
from .errors import DomainError, SizeCapError
from .partitions import Partition, PayoffVector, enumerate_partitions, enumerate_two_partitions, parse_partition

SCHEMA_VERSION = "1"


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _exits(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SizeCapError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except DomainError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def load_scenario(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if ":" not in line:
                    raise DomainError(f"{path}:{lineno}: expected 'key: value', got {line!r}")
                key, _, val = line.partition(":")
                values[key.strip()] = val.strip()
    except OSError as exc:
        raise DomainError(f"cannot read scenario file {path}: {exc}") from None
    if values.get("schema_version") != SCHEMA_VERSION:
        raise DomainError(
            f"scenario {path} must declare 'schema_version: {SCHEMA_VERSION}'"
        )
    return values


class Options:
    """Flag values merged over scenario-file values."""

    def __init__(self, scenario: str | None, flags: dict):
        self.scenario = load_scenario(scenario) if scenario else {}
        self.flags = flags

    def get(self, key: str, default=None, cast=None):
        val = self.flags.get(key)
        if val is None:
            val = self.scenario.get(key)
        if val is None:
            return default
        return cast(val) if cast else val


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in str(text).replace(",", " ").split()]
    except ValueError:
        raise DomainError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_ints(text: str) -> list[int]:
    vals = _parse_floats(text)
    if any(v != int(v) for v in vals):
        raise DomainError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _parse_grid(text: str) -> list[float]:
    parts = str(text).split(":")
    if len(parts) not in (3, 4):
        raise DomainError(f"grid must be lo:hi:points[:log|lin], got {text!r}")
    lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
    kind = parts[3] if len(parts) == 4 else "lin"
    if pts < 1:
        raise DomainError(f"grid needs at least one point, got {text!r}")
    if kind == "log":
        if lo <= 0 or hi <= 0:
            raise DomainError(f"log grid needs positive endpoints: {text!r}")
        return [float(v) for v in np.logspace(np.log10(lo), np.log10(hi), pts)]
    if kind != "lin":
        raise DomainError(f"grid kind must be log or lin, got {kind!r}")
    return [float(v) for v in np.linspace(lo, hi, pts)]


def _payoff_rule(spec_text: str) -> qs.PayoffRule:
    if spec_text == "proportional":
        return qs.PayoffRule.proportional()
    if spec_text == "shapley":
        return qs.PayoffRule.shapley()
    if spec_text.startswith("file:"):
        path = spec_text[5:]
        try:
            with open(path, "r", encoding="utf-8") as fh:
                body = fh.read().strip()
        except OSError as exc:
            raise DomainError(f"cannot read payoff file {path}: {exc}") from None
        if body.startswith("["):
            vals = [float(v) for v in json.loads(body)]
        else:
            vals = _parse_floats(body)
        return qs.PayoffRule.explicit(PayoffVector.of(vals))
    raise DomainError(f"payoff must be proportional, shapley or file:PATH, got {spec_text!r}")


def _emit(rows: list[dict], columns: list[str], out: str | None, fmt: str) -> None:
    if fmt == "json":
        text = json.dumps(rows, indent=2)
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [
                    _fmt(row[c]) if isinstance(row[c], float) else row[c]
                    for c in columns
                ]
            )
        text = buf.getvalue()
    else:
        raise DomainError(f"format must be csv or json, got {fmt!r}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _queue_system(opt: Options) -> wd.QueueSystem:
    servers = opt.get("servers", cast=_parse_ints)
    lam = opt.get("lambda", cast=float)
    if servers is None or lam is None:
        raise DomainError("queue scenarios need --servers and --lambda")
    return wd.QueueSystem.of(servers, lam, opt.get("mu", 1.0, float))


def _kelly_system(opt: Options) -> kl.KellySystem:
    influence = opt.get("influence", cast=_parse_floats)
    if influence is None:
        raise DomainError("kelly scenarios need --influence")
    return kl.KellySystem.of(
        influence, opt.get("eta", None, float), opt.get("gamma", 1.0, float)
    )


def _witness_text(w) -> str:
    if w is None:
        return ""
    return f"{w.coalition.format()}|{w.kind}|{_fmt(w.anticipated_rate)}|{_fmt(w.prevailing_worth)}"


@click.group()
def main() -> None:
    """Coalition-formation game analysis for queueing and resource-sharing games."""


_common = [
    click.option("--scenario", default=None, help="scenario file; flags override it"),
    click.option("--out", default=None, help="output path (default stdout)"),
    click.option("--format", "fmt", default=None, help="csv or json"),
]


def _with_common(fn):
    for deco in reversed(_common):
        fn = deco(fn)
    return fn


@main.command("we")
@click.option("--servers", default=None)
@click.option("--lambda", "lam", default=None)
@click.option("--mu", default=None)
@click.option("--partition", "partition_text", default=None)
@_with_common
@_exits
def cmd_we(servers, lam, mu, partition_text, scenario, out, fmt) -> None:
    """Wardrop split of the market across a partition's coalitions."""
    opt = Options(scenario, {"servers": servers, "lambda": lam, "mu": mu,
                             "partition": partition_text, "out": out, "format": fmt})
    sys_q = _queue_system(opt)
    text = opt.get("partition")
    p = parse_partition(text, sys_q.n) if text else Partition.grand(sys_q.n)
    split = wd.solve_we(sys_q, p)
    rows = [
        {
            "partition": p.format(),
            "coalition": c.format(),
            "rate": float(r),
            "blocking": float(split.common_blocking),
        }
        for c, r in zip(p.coalitions, split.rates)
    ]
    _emit(rows, ["partition", "coalition", "rate", "blocking"], opt.get("out"), opt.get("format", "csv"))


def _queue_stability_rows(sys_q, partitions, rule, payoff_rule) -> list[dict]:
    rows = []
    for p in partitions:
        report = qs.stability_report(sys_q, p, rule, payoff_rule)
        w = report["witness"]
        rows.append(
            {
                "partition": report["partition"],
                "rule": rule,
                "payoff_rule": report["payoff_rule"],
                "stable": str(report["verdict"] == "stable").lower(),
                "witness": ""
                if w is None
                else f"{w['coalition']}|{w['kind']}|{_fmt(w['anticipated'])}|{_fmt(w['prevailing'])}",
            }
        )
    return rows


def _kelly_stability_rows(sys_k, partitions, rule) -> list[dict]:
    rows = []
    for p in partitions:
        verdict = kl.u_stable(sys_k, p) if rule == "ustable" else kl.c_stable(sys_k, p)
        rows.append(
            {
                "partition": p.format(),
                "rule": rule,
                "payoff_rule": "shapley",
                "stable": str(verdict.stable).lower(),
                "witness": _witness_text(verdict.witness),
            }
        )
    return rows


@main.command("stability")
@click.option("--servers", default=None)
@click.option("--lambda", "lam", default=None)
@click.option("--mu", default=None)
@click.option("--influence", default=None)
@click.option("--eta", default=None)
@click.option("--gamma", default=None)
@click.option("--rule", default=None, help="gbpa, rbpa, rbia, ustable or cstable")
@click.option("--payoff", default=None, help="proportional, shapley or file:PATH")
@click.option("--partition", "partition_text", default=None, help="single partition (default: all)")
@_with_common
@_exits
def cmd_stability(servers, lam, mu, influence, eta, gamma, rule, payoff,
                  partition_text, scenario, out, fmt) -> None:
    """Per-partition stability verdicts for either game."""
    opt = Options(scenario, {
        "servers": servers, "lambda": lam, "mu": mu, "influence": influence,
        "eta": eta, "gamma": gamma, "rule": rule, "payoff": payoff,
        "partition": partition_text, "out": out, "format": fmt,
    })
    rule_name = opt.get("rule")
    if rule_name is None:
        raise DomainError("--rule is required")
    columns = ["partition", "rule", "payoff_rule", "stable", "witness"]
    if rule_name in qs.RULES:
        sys_q = _queue_system(opt)
        text = opt.get("partition")
        parts = [parse_partition(text, sys_q.n)] if text else list(enumerate_partitions(sys_q.n))
        payoff_rule = _payoff_rule(opt.get("payoff", "proportional"))
        rows = _queue_stability_rows(sys_q, parts, rule_name, payoff_rule)
    elif rule_name in ("ustable", "cstable"):
        sys_k = _kelly_system(opt)
        text = opt.get("partition")
        parts = [parse_partition(text, sys_k.n)] if text else list(enumerate_partitions(sys_k.n))
        rows = _kelly_stability_rows(sys_k, parts, rule_name)
    else:
        raise DomainError(f"unknown rule {rule_name!r}")
    _emit(rows, columns, opt.get("out"), opt.get("format", "csv"))


def _lambda_cell(args) -> list[dict]:
    servers, mu, lam = args
    sys_q = wd.QueueSystem.of(servers, lam, mu)
    rows = []
    for p in enumerate_two_partitions(sys_q.n):
        rows.append(
            {
                "lambda": float(lam),
                "partition": p.format(),
                "stable": str(qs.rbia_stable_partition(sys_q, p)).lower(),
            }
        )
    return rows


def _delta_cell(args) -> list[dict]:
    base, alpha, gamma, delta = args
    influence = [base - a * delta for a in alpha]
    if any(v <= 0 for v in influence):
        raise DomainError(f"delta={delta} drives an influence factor nonpositive")
    sys_k = kl.KellySystem.of(influence, None, gamma)
    return _kelly_axis_rows(sys_k, "delta", delta)


def _eta_cell(args) -> list[dict]:
    influence, gamma, eta = args
    sys_k = kl.KellySystem.of(influence, eta, gamma)
    return _kelly_axis_rows(sys_k, "eta", eta)


def _kelly_axis_rows(sys_k, axis, value) -> list[dict]:
    rows = []
    for p in enumerate_partitions(sys_k.n):
        shares = kl.shapley_within(sys_k, p).shares
        row = {
            axis: float(value),
            "partition": p.format(),
            "u_stable": str(kl.u_stable(sys_k, p).stable).lower(),
            "c_stable": str(kl.c_stable(sys_k, p).stable).lower(),
        }
        for i, s in enumerate(shares, start=1):
            row[f"share_{i}"] = float(s)
        rows.append(row)
    return rows


def _run_cells(cells, worker, jobs: int) -> list[list[dict]]:
    if jobs <= 1 or len(cells) <= 1:
        return [worker(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, cells))


@main.command("sweep")
@click.option("--axis", default=None, help="lambda, delta, eta or psi")
@click.option("--grid", default=None, help="lo:hi:points[:log|lin]")
@click.option("--servers", default=None)
@click.option("--lambda", "lam", default=None)
@click.option("--mu", default=None)
@click.option("--influence", default=None)
@click.option("--influence-base", "influence_base", default=None)
@click.option("--alpha", default=None)
@click.option("--eta", default=None)
@click.option("--gamma", default=None)
@click.option("--jobs", default=None)
@_with_common
@_exits
def cmd_sweep(axis, grid, servers, lam, mu, influence, influence_base, alpha,
              eta, gamma, jobs, scenario, out, fmt) -> None:
    """Long-format sweeps over lambda, delta, eta, or the duopoly size k."""
    opt = Options(scenario, {
        "axis": axis, "grid": grid, "servers": servers, "lambda": lam, "mu": mu,
        "influence": influence, "influence_base": influence_base, "alpha": alpha,
        "eta": eta, "gamma": gamma, "jobs": jobs, "out": out, "format": fmt,
    })
    axis_name = opt.get("axis")
    n_jobs = opt.get("jobs", os.cpu_count() or 1, int)
    fmt_eff = opt.get("format", "csv")
    if axis_name == "lambda":
        servers_v = opt.get("servers", cast=_parse_ints)
        if servers_v is None:
            raise DomainError("lambda sweep needs --servers")
        grid_v = _parse_grid(opt.get("grid", "1e-3:1e4:20:log"))
        mu_v = opt.get("mu", 1.0, float)
        cells = [(tuple(servers_v), mu_v, lam_v) for lam_v in grid_v]
        rows = [r for cell in _run_cells(cells, _lambda_cell, n_jobs) for r in cell]
        _emit(rows, ["lambda", "partition", "stable"], opt.get("out"), fmt_eff)
    elif axis_name == "delta":
        base = opt.get("influence_base", 20.0, float)
        alpha_v = opt.get("alpha", cast=_parse_floats)
        if alpha_v is None:
            raise DomainError("delta sweep needs --alpha")
        grid_v = _parse_grid(opt.get("grid", "0.1:0.4:301:lin"))
        gamma_v = opt.get("gamma", 1.0, float)
        cells = [(base, tuple(alpha_v), gamma_v, d) for d in grid_v]
        rows = [r for cell in _run_cells(cells, _delta_cell, n_jobs) for r in cell]
        cols = ["delta", "partition", "u_stable", "c_stable"] + [
            f"share_{i}" for i in range(1, len(alpha_v) + 1)
        ]
        _emit(rows, cols, opt.get("out"), fmt_eff)
    elif axis_name == "eta":
        influence_v = opt.get("influence", cast=_parse_floats)
        if influence_v is None:
            raise DomainError("eta sweep needs --influence")
        grid_v = _parse_grid(opt.get("grid", "0.1:3:2901:lin"))  # step 0.001
        gamma_v = opt.get("gamma", 1.0, float)
        cells = [(tuple(influence_v), gamma_v, e) for e in grid_v]
        rows = [r for cell in _run_cells(cells, _eta_cell, n_jobs) for r in cell]
        cols = ["eta", "partition", "u_stable", "c_stable"] + [
            f"share_{i}" for i in range(1, len(influence_v) + 1)
        ]
        _emit(rows, cols, opt.get("out"), fmt_eff)
    elif axis_name == "psi":
        sys_q = _queue_system(opt)
        total = sys_q.total_servers
        rows = []
        for k in range((total + 1) // 2, total):
            val = wd.psi(sys_q, k)
            rows.append({"k": k, "psi": val, "psi_over_lambda": val / sys_q.lambda_total})
        _emit(rows, ["k", "psi", "psi_over_lambda"], opt.get("out"), fmt_eff)
    else:
        raise DomainError(f"axis must be lambda, delta, eta or psi, got {axis_name!r}")


def _trace_jsonl(trace: dyn.Trace, initial) -> str:
    lines = [
        json.dumps(
            {
                "step": 0,
                "partition": initial.partition.format(),
                "witness": None,
                "payoffs": list(initial.payoff.shares),
            }
        )
    ]
    for i, st in enumerate(trace.steps, start=1):
        nxt = trace.terminal if i == len(trace.steps) else trace.steps[i].config
        lines.append(
            json.dumps(
                {
                    "step": i,
                    "partition": nxt.partition.format(),
                    "witness": {
                        "coalition": st.witness.coalition.format(),
                        "kind": st.witness.kind,
                        "anticipated": st.witness.anticipated_rate,
                        "prevailing": st.witness.prevailing_worth,
                    },
                    "payoffs": list(nxt.payoff.shares),
                }
            )
        )
    return "\n".join(lines) + "\n"


@main.command("dynamics")
@click.option("--servers", default=None)
@click.option("--lambda", "lam", default=None)
@click.option("--mu", default=None)
@click.option("--rule", default=None)
@click.option("--seed", default=None)
@click.option("--runs", default=None)
@click.option("--max-steps", "max_steps", default=None)
@click.option("--payoff", default=None)
@click.option("--initial-partition", "initial_text", default=None)
@click.option("--trace-dir", "trace_dir", default=None)
@click.option("--replay", default=None, help="trace file to reproduce byte-identically")
@_with_common
@_exits
def cmd_dynamics(servers, lam, mu, rule, seed, runs, max_steps, payoff,
                 initial_text, trace_dir, replay, scenario, out, fmt) -> None:
    """Seeded random blocking dynamics; JSONL traces plus a summary."""
    opt = Options(scenario, {
        "servers": servers, "lambda": lam, "mu": mu, "rule": rule, "seed": seed,
        "runs": runs, "max_steps": max_steps, "payoff": payoff,
        "initial_partition": initial_text, "trace_dir": trace_dir,
        "out": out, "format": fmt,
    })
    sys_q = _queue_system(opt)
    rule_name = opt.get("rule", "rbia")
    seed0 = opt.get("seed", 1, int)
    n_runs = opt.get("runs", 1, int)
    steps_cap = opt.get("max_steps", None, int)
    text = opt.get("initial_partition")
    p0 = parse_partition(text, sys_q.n) if text else Partition.singletons(sys_q.n)
    payoff_rule = _payoff_rule(opt.get("payoff", "proportional"))
    initial = qs.make_configuration(sys_q, p0, payoff_rule)

    def run_one(seed_val: int) -> tuple[dyn.Trace, str]:
        dc = (
            dyn.DynamicsConfig(rule_name, seed_val, steps_cap)
            if steps_cap
            else dyn.DynamicsConfig.default_steps(rule_name, seed_val, sys_q.n)
        )
        trace = dyn.run(sys_q, initial, dc)
        return trace, _trace_jsonl(trace, initial)

    if replay:
        with open(replay, "r", encoding="utf-8") as fh:
            recorded = fh.read()
        _, regenerated = run_one(seed0)
        if regenerated != recorded:
            click.echo("replay mismatch: trace differs from recorded file", err=True)
            sys.exit(1)
        click.echo("replay ok")
        return

    rows = []
    tdir = opt.get("trace_dir")
    if tdir:
        os.makedirs(tdir, exist_ok=True)
    for i in range(n_runs):
        seed_val = seed0 + i
        trace, jsonl = run_one(seed_val)
        if tdir:
            with open(os.path.join(tdir, f"trace_{seed_val}.jsonl"), "w", encoding="utf-8") as fh:
                fh.write(jsonl)
        rows.append(
            {
                "seed": seed_val,
                "steps": len(trace.steps),
                "absorbed": str(trace.absorbed).lower(),
                "terminal": trace.terminal.partition.format(),
            }
        )
    _emit(rows, ["seed", "steps", "absorbed", "terminal"], opt.get("out"), opt.get("format", "csv"))


@main.command("kelly-ne")
@click.option("--influence", default=None)
@click.option("--eta", default=None)
@click.option("--gamma", default=None)
@click.option("--partition", "partition_text", default=None)
@_with_common
@_exits
def cmd_kelly_ne(influence, eta, gamma, partition_text, scenario, out, fmt) -> None:
    """NE utilities, actions, Shapley and spectral shares for one partition."""
    opt = Options(scenario, {
        "influence": influence, "eta": eta, "gamma": gamma,
        "partition": partition_text, "out": out, "format": fmt,
    })
    sys_k = _kelly_system(opt)
    text = opt.get("partition")
    p = parse_partition(text, sys_k.n) if text else Partition.grand(sys_k.n)
    outcome = kl.rsg_ne(sys_k, p)
    shares = kl.shapley_within(sys_k, p)
    spectral = kl.spectral_shares(sys_k, p)
    rows = []
    for c, u, a in zip(p.coalitions, outcome.coalition_utilities, outcome.aggregate_actions):
        rows.append(
            {
                "partition": p.format(),
                "coalition": c.format(),
                "utility": float(u),
                "aggregate_action": float(a),
                "significant_count": outcome.significant_count,
                "shapley": " ".join(_fmt(shares.agent(i)) for i in c),
                "spectral": " ".join(_fmt(spectral[i - 1]) for i in c),
            }
        )
    if opt.get("format", "csv") == "json":
        payload = [
            {
                "partition": p.format(),
                "coalitions": rows,
                "shapley": list(shares.shares),
                "spectral": list(spectral),
                "adamant_utility": outcome.adamant_utility,
            }
        ]
        _emit(payload, [], opt.get("out"), "json")
    else:
        _emit(
            rows,
            ["partition", "coalition", "utility", "aggregate_action", "significant_count", "shapley", "spectral"],
            opt.get("out"),
            "csv",
        )


@main.command("kelly-stability")
@click.option("--influence", default=None)
@click.option("--eta", default=None)
@click.option("--gamma", default=None)
@click.option("--rule", default=None, help="ustable, cstable or both (default)")
@_with_common
@_exits
def cmd_kelly_stability(influence, eta, gamma, rule, scenario, out, fmt) -> None:
    """U-/C-stability verdicts for every partition."""
    opt = Options(scenario, {
        "influence": influence, "eta": eta, "gamma": gamma, "rule": rule,
        "out": out, "format": fmt,
    })
    sys_k = _kelly_system(opt)
    which = opt.get("rule", "both")
    rows = []
    for p in enumerate_partitions(sys_k.n):
        row = {"partition": p.format(), "class": kl.partition_class(sys_k, p)}
        if which in ("ustable", "both"):
            row["u_stable"] = str(kl.u_stable(sys_k, p).stable).lower()
        if which in ("cstable", "both"):
            row["c_stable"] = str(kl.c_stable(sys_k, p).stable).lower()
        rows.append(row)
    cols = ["partition", "class"]
    if which in ("ustable", "both"):
        cols.append("u_stable")
    if which in ("cstable", "both"):
        cols.append("c_stable")
    _emit(rows, cols, opt.get("out"), opt.get("format", "csv"))


@main.command("report")
@click.option("--scenario", required=True)
@click.option("--out", default=None)
@click.option("--format", "fmt", default=None)
@_exits
def cmd_report(scenario, out, fmt) -> None:
    """Run the analysis named in a scenario file; JSON by default."""
    values = load_scenario(scenario)
    analysis = values.get("analysis")
    dispatch = {
        "we": cmd_we,
        "stability": cmd_stability,
        "sweep": cmd_sweep,
        "dynamics": cmd_dynamics,
        "kelly-ne": cmd_kelly_ne,
        "kelly-stability": cmd_kelly_stability,
    }
    if analysis not in dispatch:
        raise DomainError(f"scenario analysis must be one of {sorted(dispatch)}, got {analysis!r}")
    args = ["--scenario", scenario]
    if out:
        args += ["--out", out]
    args += ["--format", fmt or values.get("format", "json")]
    dispatch[analysis].main(args=args, standalone_mode=True)


if __name__ == "__main__":
    main()
