"""Scenario runner: config parsing, flow orchestration, artifact output.

A scenario is one JSON config file with the flat schema
"sasaki-scenario-v1" (see ScenarioConfig).  Running it builds the model
geometry, integrates the flow with the selected monitors, and writes one
CSV per monitor, a JSON report with verdicts and a checksum manifest, and
(optionally) one SVG per time series.  Output is bitwise deterministic
given the config and seed.

Exit codes: 0 all verdicts pass, 2 assertion failure, 3 config error,
4 runtime error.
"""

import json
import math
import os
import sys

import click
import numpy as np

from . import entropy as ent
from . import flow_engine as fe
from . import positivity as pos
from . import quotient_geom as qg
from . import serialize as ser
from .errors import ConfigInvalid, RunFailed, SchemaMismatch, SrflabError
from .profile_geom import ProfileGeometry

CONFIG_SCHEMA = "sasaki-scenario-v1"
GEOMETRIES = ("round_sphere", "football", "chart_torus")
MONITORS = ("entropy", "positivity", "quotient", "scalar_evolution",
            "gradient_bounds", "reeb_family")


class ScenarioConfig:
    """Validated flat scenario description.

    Fields: name, geometry {kind + parameters}, N, dt_policy ("cfl"),
    t_end, tau0, monitors, output_dir, seed, checkpoint_cadence, svg.
    """

    def __init__(self, raw):
        def need(field, typ):
            if field not in raw:
                raise ConfigInvalid("%s: missing" % field)
            v = raw[field]
            if typ is float and isinstance(v, int):
                v = float(v)
            if not isinstance(v, typ):
                raise ConfigInvalid("%s: expected %s" % (field, typ.__name__))
            return v

        if raw.get("schema") != CONFIG_SCHEMA:
            raise ConfigInvalid("schema: expected %r" % CONFIG_SCHEMA)
        self.name = need("name", str)
        geo = need("geometry", dict)
        self.kind = geo.get("kind")
        if self.kind not in GEOMETRIES:
            raise ConfigInvalid("geometry.kind: one of %s" % (GEOMETRIES,))
        if self.kind == "football":
            self.p = geo.get("p")
            self.q = geo.get("q")
            for label, v in (("p", self.p), ("q", self.q)):
                if not isinstance(v, int) or v < 1:
                    raise ConfigInvalid(
                        "geometry.%s: positive integer required" % label)
            if math.gcd(self.p, self.q) != 1:
                raise ConfigInvalid("geometry.p,q: must be coprime")
        else:
            self.n = geo.get("n")
            if not isinstance(self.n, int) or self.n < 1:
                raise ConfigInvalid("geometry.n: positive integer required")
        self.N = need("N", int)
        if self.N < 32:
            raise ConfigInvalid("N: must be >= 32")
        self.t_end = need("t_end", float)
        if not self.t_end > 0.0:
            raise ConfigInvalid("t_end: must be positive")
        self.tau0 = float(raw.get("tau0", 2.0))
        if not self.tau0 > 0.0:
            raise ConfigInvalid("tau0: must be positive")
        self.dt_policy = raw.get("dt_policy", "cfl")
        if self.dt_policy != "cfl":
            raise ConfigInvalid("dt_policy: only 'cfl' is supported")
        monitors = need("monitors", list)
        if not monitors:
            raise ConfigInvalid("monitors: must be nonempty")
        for m in monitors:
            if m not in MONITORS:
                raise ConfigInvalid("monitors: unknown monitor %r" % m)
        if self.kind == "chart_torus" and set(monitors) != {"entropy"}:
            raise ConfigInvalid(
                "monitors: chart_torus supports only the entropy monitor")
        self.monitors = list(monitors)
        self.output_dir = need("output_dir", str)
        self.seed = int(raw.get("seed", 0))
        self.checkpoint_cadence = float(raw.get("checkpoint_cadence", 0.5))
        if not self.checkpoint_cadence > 0.0:
            raise ConfigInvalid("checkpoint_cadence: must be positive")
        self.svg = bool(raw.get("svg", False))


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid("file: %s" % exc)
    except ValueError as exc:
        raise ConfigInvalid("file: not valid JSON (%s)" % exc)
    if not isinstance(raw, dict):
        raise ConfigInvalid("file: top level must be an object")
    return ScenarioConfig(raw)


def build_geometry(config):
    if config.kind == "football":
        return ProfileGeometry.football(config.p, config.q, config.N)
    if config.kind == "round_sphere":
        if config.n != 1:
            raise ConfigInvalid(
                "geometry.n: flow scenarios support n = 1 only")
        return ProfileGeometry.round_fixed_point(config.N)
    return ent.TorusChartGeometry(M=config.N)


# ---------------------------------------------------------------------------
# monitor tables: each returns (header, rows, verdicts)
# ---------------------------------------------------------------------------

def _entropy_table(traj, config):
    rows = ent.entropy_series(traj, tau0=config.tau0)
    header = ("t", "tau", "W", "mu", "EL_residual", "dWdt_numeric",
              "dWdt_formula", "soliton_term", "hessian_term")
    table = [[r[k] for k in header] for r in rows]
    dw = [r["dWdt_numeric"] for r in rows]
    mu = [r["mu"] for r in rows]
    verdicts = {
        "entropy_W_nondecreasing": min(dw) >= -1e-6,
        "entropy_mu_nondecreasing":
            all(b - a >= -2e-6 for a, b in zip(mu, mu[1:])),
    }
    return header, table, verdicts


def _positivity_table(traj, config):
    header = ("t", "min_bisectional", "argmin_mu",
              "soliton_einstein_residual", "soliton_holo_residual")
    table = []
    for k, t in enumerate(traj.times):
        geom = traj.geometry_at(k)
        K = geom.gauss_K()
        j = int(np.argmin(K))
        e, h = pos.soliton_residual(geom)
        table.append([t, float(K[j]), float(traj.mu[j]), e, h])
    ok = True
    try:
        rep = pos.positivity_monitor(traj)
        ok = bool(rep["stays_nonnegative"]) or not rep["initially_nonnegative"]
    except SrflabError:
        ok = False
    return header, table, {"positivity_preserved": ok}


def _quotient_table(traj, config):
    header = ("t", "gauss_bonnet_residual", "volume", "vol_ratio_small_r")
    table = []
    worst_gb = 0.0
    worst_ratio = 0.0
    for k, t in enumerate(traj.times):
        model = qg.QuotientModel.from_profile(traj.geometry_at(k))
        gb = model.gauss_bonnet_residual()
        row = qg.volume_ratio_table(model, [traj.mu_max / 16.0])[0]
        table.append([t, gb, model.volume, row["ratio"]])
        worst_gb = max(worst_gb, abs(gb))
        worst_ratio = max(worst_ratio, abs(row["ratio"] - 4.0))
    return header, table, {
        "quotient_gauss_bonnet": worst_gb < 1e-6,
        "quotient_volume_ratio": worst_ratio < 0.2,
    }


def _scalar_table(traj, config):
    header = ("t", "scalar_residual", "Rt_min")
    table = []
    for k in range(1, len(traj.times) - 1):
        res = fe.scalar_evolution_residual(traj, k)
        rt = float(np.min(traj.geometry_at(k).R_transverse()))
        table.append([traj.times[k], res, rt])
    violation = fe.min_scalar_violation(traj)
    return header, table, {"scalar_comparison_bound": violation < 1e-2}


def _gradient_table(traj, config):
    header = fe.MONITOR_COLUMNS
    table = [list(row) for row in traj.monitor]
    finite = all(all(np.isfinite(v) for v in row) for row in table)
    return header, table, {"gradient_bounds_finite": finite}


def _reeb_table(traj, config):
    base = (config.p, config.q) if config.kind == "football" else (1, 1)
    members = [(base[0] * m + 1, base[1] * m) for m in (2, 4, 8)]
    rows = fe.reeb_family_experiment(base, members,
                                     t_end=min(config.t_end, 5.0),
                                     N=max(64, config.N // 2))
    header = ("ratio", "initial_distance", "sup_deviation", "stability_ratio")
    table = [[r["ratio"], r["initial_distance"], r["sup_deviation"],
              r["stability_ratio"]] for r in rows]
    sup = [r["sup_deviation"] for r in rows]
    return header, table, {
        "reeb_family_deviation_decreasing":
            all(b <= a * (1.0 + 1e-9) for a, b in zip(sup, sup[1:])),
    }


_MONITOR_TABLES = {
    "entropy": _entropy_table,
    "positivity": _positivity_table,
    "quotient": _quotient_table,
    "scalar_evolution": _scalar_table,
    "gradient_bounds": _gradient_table,
    "reeb_family": _reeb_table,
}


def _torus_entropy_table(geom, config):
    """Static entropy series on the flat comparison chart."""
    rep = ent.mu_minimize(geom, config.tau0, tol=1e-8)
    w = ent.W_eval(geom, np.zeros(geom.shape), tau=config.tau0).W_value
    header = ("t", "W_zero_potential", "mu", "EL_residual")
    nsteps = int(round(config.t_end / config.checkpoint_cadence))
    table = [[k * config.checkpoint_cadence, w, rep.mu_estimate,
              rep.euler_lagrange_residual]
             for k in range(nsteps + 1)]
    verdicts = {"entropy_minimizer_converged":
                rep.euler_lagrange_residual < 1e-6}
    return header, table, verdicts


# ---------------------------------------------------------------------------
# run and compare
# ---------------------------------------------------------------------------

def _series_svgs(outdir, name, header, table):
    paths = []
    if len(table) < 2:
        return paths
    xs = [row[0] for row in table]
    for c, col in enumerate(header[1:], start=1):
        path = os.path.join(outdir, "%s_%s.svg" % (name, col))
        ser.write_svg_series(path, xs, [row[c] for row in table],
                             "%s: %s" % (name, col), xlabel=header[0])
        paths.append(path)
    return paths


def run_scenario(config):
    """Execute one scenario; returns the report dict (also written out)."""
    os.makedirs(config.output_dir, exist_ok=True)
    geom = build_geometry(config)
    summary = {}
    monitor_files = {}
    verdicts = {}
    files = []
    if config.kind == "chart_torus":
        tables = {"entropy": _torus_entropy_table(geom, config)}
        summary["phi_inf"] = 0.0
    else:
        state = fe.FlowState(geom, tau0=config.tau0)
        try:
            traj = fe.run(state, config.t_end,
                          checkpoint_dt=config.checkpoint_cadence)
        except SrflabError as exc:
            raise RunFailed("flow aborted: %s" % exc)
        tables = {m: _MONITOR_TABLES[m](traj, config)
                  for m in config.monitors}
        summary["phi_inf"] = float(np.max(np.abs(state.phi)))
        summary["volume"] = state.volume
        summary["t_final"] = state.t
        e, h = pos.soliton_residual(traj.geometry_at(-1))
        summary["soliton_einstein_residual"] = e
        summary["soliton_holo_residual"] = h
    for name in config.monitors:
        header, table, v = tables[name]
        path = os.path.join(config.output_dir, "%s.csv" % name)
        ser.write_csv(path, header, table)
        monitor_files[name] = os.path.basename(path)
        files.append(path)
        verdicts.update(v)
        if table:
            last = table[-1]
            summary["%s_final" % name] = {h: last[c]
                                          for c, h in enumerate(header)}
        if config.svg:
            files.extend(_series_svgs(config.output_dir, name, header, table))
    report = {
        "name": config.name,
        "geometry": config.kind,
        "N": config.N,
        "seed": config.seed,
        "t_end": config.t_end,
        "monitors": sorted(config.monitors),
        "monitor_files": monitor_files,
        "summary": summary,
        "verdicts": verdicts,
        "status": "pass" if all(verdicts.values()) else "fail",
        "manifest": {os.path.basename(f): ser.file_checksum(f)
                     for f in files},
    }
    ser.write_report(os.path.join(config.output_dir, "report.json"), report)
    return report


def compare_reports(path_a, path_b):
    """Per-series max deviation between two runs of the same scenario."""
    a = ser.read_report(path_a)
    b = ser.read_report(path_b)
    if a["name"] != b["name"]:
        raise SchemaMismatch("scenario names differ: %r vs %r"
                             % (a["name"], b["name"]))
    if a["monitors"] != b["monitors"]:
        raise SchemaMismatch("monitor sets differ: %r vs %r"
                             % (a["monitors"], b["monitors"]))
    diff = {}
    for name in a["monitors"]:
        ha, rows_a = ser.read_csv(os.path.join(
            os.path.dirname(path_a), a["monitor_files"][name]))
        hb, rows_b = ser.read_csv(os.path.join(
            os.path.dirname(path_b), b["monitor_files"][name]))
        if ha != hb:
            raise SchemaMismatch("monitor %s: headers differ" % name)
        cols = {}
        for c, col in enumerate(ha):
            va = [row[c] for row in rows_a]
            vb = [row[c] for row in rows_b]
            k = min(len(va), len(vb))
            cols[col] = max((abs(x - y) for x, y in
                             zip(va[:k], vb[:k])), default=0.0)
        diff[name] = cols
    return diff


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

@click.group()
def main():
    """Numerical laboratory for transverse Kahler geometry flows."""


@main.command("validate")
@click.argument("config_path", type=click.Path())
def validate_cmd(config_path):
    """Check a scenario config without running it."""
    try:
        cfg = load_config(config_path)
    except ConfigInvalid as exc:
        click.echo("invalid: %s" % exc, err=True)
        sys.exit(3)
    click.echo("ok: scenario %r (%s, N=%d)" % (cfg.name, cfg.kind, cfg.N))
    sys.exit(0)


@main.command("run")
@click.argument("config_path", type=click.Path())
def run_cmd(config_path):
    """Run a scenario and write its artifacts."""
    try:
        cfg = load_config(config_path)
    except ConfigInvalid as exc:
        click.echo("invalid: %s" % exc, err=True)
        sys.exit(3)
    out = os.environ.get("OUTPUT_DIR")
    if out:
        cfg.output_dir = out
    try:
        report = run_scenario(cfg)
    except RunFailed as exc:
        click.echo("runtime error: %s" % exc, err=True)
        sys.exit(4)
    for name, ok in sorted(report["verdicts"].items()):
        click.echo("%s %s" % ("PASS" if ok else "FAIL", name))
    click.echo("report: %s" % os.path.join(cfg.output_dir, "report.json"))
    sys.exit(0 if report["status"] == "pass" else 2)


@main.command("compare")
@click.argument("report_a", type=click.Path())
@click.argument("report_b", type=click.Path())
def compare_cmd(report_a, report_b):
    """Per-series max deviations between two run reports."""
    try:
        diff = compare_reports(report_a, report_b)
    except SchemaMismatch as exc:
        click.echo("schema mismatch: %s" % exc, err=True)
        sys.exit(3)
    for name, cols in sorted(diff.items()):
        for col, d in sorted(cols.items()):
            click.echo("%s,%s,%s" % (name, col, ser.fmt(d)))
    sys.exit(0)


@main.group("oracle")
def oracle_group():
    """Independent cross-check data generators."""


@oracle_group.command("soliton")
@click.option("--p", type=int, required=True)
@click.option("--q", type=int, required=True)
@click.option("--points", type=int, default=257, show_default=True)
@click.option("--output", "-o", type=click.Path(), default=None,
              help="CSV destination (default stdout).")
def oracle_soliton_cmd(p, q, points, output):
    """Shoot the 1D soliton profile ODE and emit (mu, psi) samples."""
    if p < 1 or q < 1 or math.gcd(p, q) != 1:
        click.echo("invalid: p, q must be positive coprime integers",
                   err=True)
        sys.exit(3)
    mu = np.linspace(0.0, 1.0 / p + 1.0 / q, points)
    try:
        psi = pos.soliton_shoot(p, q, mu)
    except SrflabError as exc:
        click.echo("runtime error: %s" % exc, err=True)
        sys.exit(4)
    rows = [[float(m), float(v)] for m, v in zip(mu, psi)]
    if output:
        ser.write_csv(output, ("mu", "psi"), rows)
        click.echo("wrote %s" % output)
    else:
        click.echo("mu,psi")
        for m, v in rows:
            click.echo("%s,%s" % (ser.fmt(m), ser.fmt(v)))
    sys.exit(0)
