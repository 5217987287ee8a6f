"""Experiment configs, seeded runs and horizon sweeps, summary and report CSVs.

Config files are INI-style: ``[section]`` headers with ``key = value`` lines
where every value is a JSON literal (numbers, strings, booleans, arrays).
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ._jit import backend_name
from .algorithms import AlgorithmSpec, run
from .core import Instance, RunTrace, fmt_float
from .environments import Environment, EnvironmentSpec, PlanSpec, generate_plan, meta_threshold
from .oracles import ErrorSchedule, OracleReport, minimizer_regret_terms, oracle_report, realized_regrets, regret_bound

log = logging.getLogger(__name__)

THREADS_ENV = "PLANPACE_THREADS"
REQUIRED = ("instance", "plan", "environment", "algorithm")


class ConfigError(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class RunFailure(RuntimeError):
    pass


# ------------------------------------------------------------------ config


@dataclass
class ExperimentConfig:
    T: int
    K: int
    m: int
    rho: float
    plan: PlanSpec
    env: dict
    algorithm: AlgorithmSpec
    meta_mode: str  # "auto", "on" or "off"
    name: str
    delta: float = 0.05
    delta_P: float = 0.05
    seeds: list = field(default_factory=lambda: [0])
    horizons: list = field(default_factory=list)
    out_dir: str = "out"
    dump_traces: bool = False
    eps: float = 0.0
    source: str = ""

    def environment_spec(self, T: int) -> EnvironmentSpec:
        kw = dict(self.env)
        fr = kw.pop("boundary_fractions", None)
        if fr is not None:
            kw["boundaries"] = tuple(max(1, int(round(f * T))) for f in fr)
        return EnvironmentSpec(**kw)

    def instance(self, T: int) -> Instance:
        plan = generate_plan(self.plan, T, self.m, self.rho * T)
        return Instance.from_plan(plan, self.K)


def _line_index(text: str):
    """Map ``(section, key)`` to the 1-based line where it is defined."""
    idx, sec = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        mt = re.match(r"\[([^\]]+)\]", s)
        if mt:
            sec = mt.group(1).strip().lower()
            idx[(sec, None)] = n
        elif sec and "=" in s and not s.startswith(("#", ";")):
            idx[(sec, s.split("=", 1)[0].strip().lower())] = n
    return idx


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    return parse_config(text, str(path))


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    lines = _line_index(text)
    for sec in REQUIRED:
        if not cp.has_section(sec):
            raise ConfigError(f"{source}: missing [{sec}] section")

    def where(sec, key):
        n = lines.get((sec, key))
        return f"{source}:{n}" if n else source

    def section(sec):
        out = {}
        if not cp.has_section(sec):
            return out
        for key, raw in cp.items(sec):
            try:
                out[key] = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{where(sec, key)}: [{sec}] {key} = {raw!r} is not a JSON value ({exc.msg})") from exc
        return out

    def need(d, sec, key, kind=None):
        if key not in d:
            raise ConfigError(f"{where(sec, None)}: [{sec}] is missing '{key}'")
        v = d[key]
        if kind is not None and (not isinstance(v, kind) or isinstance(v, bool)):
            raise ConfigError(f"{where(sec, key)}: [{sec}] {key} has the wrong type ({type(v).__name__})")
        return v

    inst = section("instance")
    T = need(inst, "instance", "t", int)
    K = need(inst, "instance", "k", int)
    m = need(inst, "instance", "m", int)
    if "rho" in inst:
        rho = float(need(inst, "instance", "rho", (int, float)))
    elif "b" in inst:
        rho = float(need(inst, "instance", "b", (int, float))) / T
    else:
        raise ConfigError(f"{where('instance', None)}: [instance] needs 'B' or 'rho'")

    pl = section("plan")
    kind = pl.pop("kind", "uniform")
    params = pl.pop("params", {})
    params.update(pl)
    try:
        plan = PlanSpec(kind, params)
    except ValueError as exc:
        raise ConfigError(f"{where('plan', 'kind')}: {exc}") from exc

    env = section("environment")
    env_kw = {
        "reward_means": need(env, "environment", "reward_means", list),
        "cost_means": need(env, "environment", "cost_means", list),
    }
    for key in ("kind", "noise", "spread", "shared_noise", "seed"):
        if key in env:
            env_kw[key] = env[key]
    if "boundaries" in env:
        env_kw["boundaries"] = tuple(env["boundaries"])
    if "boundary_fractions" in env:
        env_kw["boundary_fractions"] = tuple(env["boundary_fractions"])
    unknown = set(env) - set(env_kw) - {"boundaries"}
    if unknown:
        raise ConfigError(f"{where('environment', None)}: unknown keys {sorted(unknown)} in [environment]")

    alg = section("algorithm")
    meta = alg.pop("meta", "auto")
    if meta not in ("auto", True, False):
        raise ConfigError(f"{where('algorithm', 'meta')}: meta must be \"auto\", true or false")
    meta_mode = {"auto": "auto", True: "on", False: "off"}[meta]
    delta = float(alg.pop("delta", 0.05))
    delta_P = float(alg.pop("delta_p", 0.05))
    for nm, v in (("delta", delta), ("delta_P", delta_P)):
        if not 0 < v < 1:
            raise ConfigError(f"{where('algorithm', nm.lower())}: {nm} must lie in (0, 1), got {v}")
    name = alg.pop("name", None)
    keymap = {f.name.lower(): f.name for f in fields(AlgorithmSpec)}
    spec_kw = {}
    for key, v in alg.items():
        if key not in keymap:
            raise ConfigError(f"{where('algorithm', key)}: unknown key '{key}' in [algorithm]")
        spec_kw[keymap[key]] = v
    try:
        spec = AlgorithmSpec(**spec_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where('algorithm', None)}: {exc}") from exc
    if spec.meta_rescale and meta_mode == "off":
        raise ConfigError(f"{where('algorithm', 'meta')}: meta_rescale conflicts with meta = false")
    if spec.meta_rescale:
        meta_mode = "on"

    runs = section("runs")
    if "seeds" in runs:
        seeds = [int(s) for s in need(runs, "runs", "seeds", list)]
    else:
        seeds = list(range(int(runs.get("num_seeds", 1))))
    horizons = [int(h) for h in runs.get("horizons", [T])]
    if not seeds or not horizons or min(horizons) < 1:
        raise ConfigError(f"{where('runs', None)}: need at least one seed and positive horizons")

    out = section("output")
    orc = section("oracle")
    cfg = ExperimentConfig(
        T=T, K=K, m=m, rho=rho, plan=plan, env=env_kw, algorithm=spec, meta_mode=meta_mode,
        name=name or spec.setting.lower(), delta=delta, delta_P=delta_P, seeds=seeds,
        horizons=horizons, out_dir=str(out.get("directory", "out")),
        dump_traces=bool(out.get("dump_traces", False)), eps=float(orc.get("eps", 0.0)), source=source,
    )
    # surface shape problems now rather than inside a worker
    try:
        for h in horizons:
            es = cfg.environment_spec(h)
            if (es.num_arms, es.num_resources) != (K, m):
                raise ConfigError(
                    f"{where('environment', None)}: means describe K={es.num_arms}, m={es.num_resources}; "
                    f"[instance] says K={K}, m={m}"
                )
            cfg.instance(h)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return cfg


# ------------------------------------------------------------------- runs


SUMMARY_FIELDS = (
    "algorithm", "setting", "T", "seed", "total_reward", "opt_dynamic", "opt_static",
    "dynamic_regret", "static_regret", "tau", "theoretical_bound", "rho_min_used", "meta_applied",
)
META_FIELDS = (
    "T", "seed", "backend", "dual_kind", "radius", "grad_bound", "dual_eta", "primal_kind",
    "primal_eta", "meta_applied", "void_skip", "masked_rounds", "clamp_events",
)


@dataclass
class SummaryRow:
    algorithm: str
    setting: str
    T: int
    seed: int
    total_reward: float
    opt_dynamic: float
    opt_static: float
    dynamic_regret: float
    static_regret: float
    tau: int
    theoretical_bound: float
    rho_min_used: float
    meta_applied: bool

    def csv_cells(self):
        out = []
        for k in SUMMARY_FIELDS:
            v = getattr(self, k)
            if isinstance(v, bool):
                out.append("true" if v else "false")
            elif isinstance(v, float):
                out.append(fmt_float(v))
            else:
                out.append(str(v))
        return out


def resolve_spec(cfg: ExperimentConfig, inst: Instance) -> AlgorithmSpec:
    """Apply the auto-meta rule: meta when ``rho_min <= rho / T^{1/4}``."""
    spec = cfg.algorithm
    if cfg.meta_mode == "on":
        use = True
    elif cfg.meta_mode == "off" or spec.void_skip:
        use = False
    else:
        use = inst.rho_min <= meta_threshold(inst.horizon, inst.rho)
        if use:
            log.info("rho_min=%g <= rho/T^(1/4)=%g at T=%d: meta-procedure applied",
                     inst.rho_min, meta_threshold(inst.horizon, inst.rho), inst.horizon)
    d = asdict(spec)
    d["meta_rescale"] = use
    return AlgorithmSpec(**d)


def theoretical_bound(cfg: ExperimentConfig, inst: Instance, spec: AlgorithmSpec, rho_min_used: float) -> float:
    R_D, R_P = minimizer_regret_terms(spec.setting, inst.horizon, inst.num_arms, inst.num_resources,
                                      spec.dual_kind, cfg.delta_P, spec.grad_bound)
    return regret_bound(spec.setting, spec.meta_rescale, inst.horizon, inst.rho, rho_min_used,
                        R_D, R_P, cfg.delta, cfg.delta_P)


def oracle_for(cfg: ExperimentConfig, T: int) -> OracleReport:
    inst = cfg.instance(T)
    env = Environment(cfg.environment_spec(T), T)
    errs = ErrorSchedule.constant(cfg.m, T, cfg.eps) if cfg.eps > 0 else None
    return oracle_report(env.mean_profile(), inst.plan, errs)


def check_trace(trace: RunTrace, budget: float):
    """Hard invariants every run must satisfy; raises RunFailure otherwise."""
    spend = trace.cumulative_spend()
    if np.any(spend > budget):
        raise RunFailure("cumulative spend exceeded the budget")
    start = trace.start_budgets()
    gate = np.any(start < 1.0, axis=1)
    if np.any(gate & ~trace.forced_void):
        raise RunFailure("a round was played with some remaining budget below 1")
    lam = trace.lambdas
    if np.any(lam < 0) or np.any(lam.sum(axis=1) > trace.radius + 1e-9):
        raise RunFailure("a dual vector left the l1 ball")


def run_one(cfg: ExperimentConfig, T: int, seed: int, report: OracleReport):
    """Execute one (horizon, seed) run. Returns ``(SummaryRow, metadata dict, trace)``."""
    inst = cfg.instance(T)
    spec = resolve_spec(cfg, inst)
    env = Environment(cfg.environment_spec(T), T, run_seed=seed)
    trace = run(inst, env, spec)
    check_trace(trace, inst.budget)
    dyn, sta = realized_regrets(trace, report)
    used = float(trace.meta.get("rho_min_used", inst.rho_min))
    row = SummaryRow(
        algorithm=cfg.name, setting=spec.setting, T=T, seed=seed, total_reward=trace.total_reward,
        opt_dynamic=report.opt_dynamic, opt_static=report.opt_static, dynamic_regret=dyn,
        static_regret=sta, tau=trace.tau, theoretical_bound=theoretical_bound(cfg, inst, spec, used),
        rho_min_used=used, meta_applied=bool(trace.meta.get("meta_applied", False)),
    )
    G = spec.grad_bound if spec.grad_bound is not None else math.sqrt(inst.num_resources)
    meta = {
        "T": T, "seed": seed, "backend": backend_name(), "dual_kind": spec.dual_kind,
        "radius": trace.radius, "grad_bound": G if spec.dual_kind == "euclidean" else "",
        "dual_eta": spec.dual_eta if spec.dual_eta is not None else "default",
        "primal_kind": spec.primal_kind or "", "primal_eta": trace.meta.get("primal_eta", ""),
        "meta_applied": row.meta_applied, "void_skip": trace.meta.get("void_skip", False),
        "masked_rounds": trace.meta.get("masked_rounds", 0), "clamp_events": trace.meta.get("clamp_events", 0),
    }
    return row, meta, trace


def _job(args):
    cfg, T, seed, report = args
    row, meta, trace = run_one(cfg, T, seed, report)
    text = trace.to_csv() if cfg.dump_traces else None
    return row, meta, text


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
    return max(1, min(n, n_jobs))


def execute(cfg: ExperimentConfig, strict: bool = False):
    """Run every (horizon, seed) pair; results sorted by ``(T, seed)``."""
    if strict:
        cfg.algorithm = AlgorithmSpec(**dict(asdict(cfg.algorithm), strict=True))
    reports = {T: oracle_for(cfg, T) for T in sorted(set(cfg.horizons))}
    jobs = [(cfg, T, s, reports[T]) for T in sorted(set(cfg.horizons)) for s in sorted(set(cfg.seeds))]
    n = worker_count(len(jobs))
    if n == 1:
        results = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_job, jobs))
    results.sort(key=lambda r: (r[0].T, r[0].seed))
    return results


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for r in rows:
        w.writerow(r.csv_cells())
    return buf.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def metadata_csv(metas) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(META_FIELDS)
    for m in metas:
        w.writerow([_cell(m[k]) for k in META_FIELDS])
    return buf.getvalue()


def write_outputs(cfg: ExperimentConfig, results, out_dir=None) -> Path:
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r for r, _, _ in results]
    (out / "summary.csv").write_text(summary_csv(rows), encoding="utf-8")
    (out / "run_metadata.csv").write_text(metadata_csv([m for _, m, _ in results]), encoding="utf-8")
    if cfg.dump_traces:
        tdir = out / "traces"
        tdir.mkdir(exist_ok=True)
        for row, _, text in results:
            (tdir / f"trace_T{row.T}_seed{row.seed}.csv").write_text(text, encoding="utf-8")
    return out


def oracle_csv(cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "opt_dynamic", "opt_static", "opt_dynamic_eps", "opt_static_eps"])
    for T in sorted(set(cfg.horizons)):
        rep = oracle_for(cfg, T)
        # without error terms the relaxed baselines coincide with the plain ones
        de = rep.opt_dynamic_eps if rep.opt_dynamic_eps is not None else rep.opt_dynamic
        se = rep.opt_static_eps if rep.opt_static_eps is not None else rep.opt_static
        w.writerow([T, fmt_float(rep.opt_dynamic), fmt_float(rep.opt_static), fmt_float(de), fmt_float(se)])
    return buf.getvalue()


# ----------------------------------------------------------------- report


AGG_FIELDS = (
    "algorithm", "setting", "T", "n", "regret_kind", "median_regret", "q25_regret", "q75_regret",
    "iqr_regret", "median_bound_ratio", "sublinearity_ratio",
)


@dataclass
class ReportResult:
    csv_text: str
    groups: dict
    skipped: int


def _read_summaries(directory: Path):
    files = sorted(directory.rglob("summary*.csv"))
    rows, skipped = [], 0
    for path in files:
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                try:
                    rows.append({
                        "algorithm": rec["algorithm"],
                        "setting": rec["setting"],
                        "T": int(rec["T"]),
                        "seed": int(rec["seed"]),
                        "dynamic_regret": float(rec["dynamic_regret"]),
                        "static_regret": float(rec["static_regret"]),
                        "theoretical_bound": float(rec["theoretical_bound"]),
                    })
                except (KeyError, TypeError, ValueError):
                    skipped += 1
    return files, rows, skipped


def sweep_report(directory) -> ReportResult:
    directory = Path(directory)
    files, rows, skipped = _read_summaries(directory)
    if not files or not rows:
        raise EmptyInput(f"no usable summary rows under {directory}")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["algorithm"], r["setting"], r["T"]), []).append(r)
    medians = {}
    table = []
    for key in sorted(groups):
        alg, setting, T = key
        kind = "dynamic_regret" if setting == "ORA" else "static_regret"
        reg = np.array([r[kind] for r in groups[key]])
        bnd = np.array([r["theoretical_bound"] for r in groups[key]])
        q25, med, q75 = np.percentile(reg, [25, 50, 75])
        medians[key] = med
        ratio = float(np.median(reg / bnd)) if np.all(bnd > 0) else float("nan")
        table.append([alg, setting, T, len(reg), kind, float(med), float(q25), float(q75), float(q75 - q25), ratio])
    for rec in table:
        other = medians.get((rec[0], rec[1], 4 * rec[2]))
        rec.append(other / rec[5] if other is not None and rec[5] != 0 else float("nan"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_FIELDS)
    for rec in table:
        w.writerow([_cell(v) for v in rec])
    return ReportResult(buf.getvalue(), {k: medians[k] for k in medians}, skipped)


def svg_chart(medians: dict, width: int = 480, height: int = 320) -> str:
    """Log-log line chart of median regret against T, one line per algorithm."""
    series: dict = {}
    for (alg, setting, T), med in sorted(medians.items()):
        if med > 0:
            series.setdefault(f"{alg} ({setting})", []).append((T, med))
    pad = 48
    pts = [p for s in series.values() for p in s]
    if not pts:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"></svg>\n'
    lx = [math.log10(t) for t, _ in pts]
    ly = [math.log10(v) for _, v in pts]
    x0, x1 = min(lx), max(lx) if max(lx) > min(lx) else min(lx) + 1
    y0, y1 = min(ly), max(ly) if max(ly) > min(ly) else min(ly) + 1

    def sx(t):
        return pad + (math.log10(t) - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (math.log10(v) - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle">T (log)</text>',
        f'<text x="14" y="{height / 2:.0f}" transform="rotate(-90 14 {height / 2:.0f})" text-anchor="middle">median regret (log)</text>',
    ]
    for n, (label, s) in enumerate(sorted(series.items())):
        col = colors[n % len(colors)]
        path = " ".join(f"{sx(t):.1f},{sy(v):.1f}" for t, v in s)
        parts.append(f'<polyline fill="none" stroke="{col}" stroke-width="2" points="{path}"/>')
        for t, v in s:
            parts.append(f'<circle cx="{sx(t):.1f}" cy="{sy(v):.1f}" r="3" fill="{col}"/>')
        parts.append(f'<text x="{pad + 8}" y="{pad + 14 * (n + 1)}" fill="{col}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
