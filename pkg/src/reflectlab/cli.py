"""Scenario runner: ``reflectlab run <scenario> --param k=v`` or ``reflectlab run --config file.json``.

Every scenario declares a parameter schema (its defaults).  A run writes
``<output_path>/report.json`` plus scenario CSVs.  The exit status is 0
exactly when every verdict is true.

Runs are deterministic.  BLAS is pinned to one thread, and the internal
worker pool (capped by ``REFLECTLAB_THREADS``) maps in a fixed order.
Wall-clock time is only recorded when ``--timing`` is given, so reports from
identical configs are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import ConfigError, IoError, ReflectLabError, ScenarioError

# ---------------------------------------------------------------------------
# config and report


_CONFIG_KEYS = {"scenario", "parameters", "seed", "output_path"}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str = "reflectlab-out"

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "scenario" not in data:
            raise ConfigError("config needs a 'scenario'")
        if data["scenario"] not in SCENARIOS:
            raise ConfigError(f"unknown scenario {data['scenario']!r}; choose from {sorted(SCENARIOS)}")
        schema = SCENARIOS[data["scenario"]][0]
        # parameters may be nested under "parameters" or given inline
        inline = {k: v for k, v in data.items() if k not in _CONFIG_KEYS}
        unknown = set(inline) - set(schema)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed must be an integer")
        params = data.get("parameters", {})
        if not isinstance(params, dict):
            raise ConfigError("parameters must be an object")
        params = {**inline, **params}
        _resolve(schema, params)
        return cls(str(data["scenario"]), dict(params), seed, str(data.get("output_path", "reflectlab-out")))


@dataclass
class Report:
    scenario: str
    parameters: dict
    metrics: dict
    verdicts: dict
    artifacts: list
    runtime_ms: float | None
    tool_version: str

    @property
    def passed(self):
        return all(self.verdicts.values())

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def summary_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value"])
        for k in sorted(self.metrics):
            w.writerow([k, repr(self.metrics[k])])
        return buf.getvalue()


def emit(report, fmt, path):
    """Write ``report`` as ``json`` or ``csv-summary`` to ``path``."""
    path = Path(path)
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv-summary":
        text = report.summary_csv()
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


# ---------------------------------------------------------------------------
# helpers


def _threads():
    raw = os.environ.get("REFLECTLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"REFLECTLAB_THREADS must be an integer, got {raw!r}") from None


def pmap(fn, items):
    """Order-preserving map on a worker pool capped by ``REFLECTLAB_THREADS``."""
    items = list(items)
    n = _threads()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _f(x):
    """JSON-safe float."""
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _coerce(name, value, default):
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                return value.lower() in ("1", "true", "yes")
            return bool(value)
        if isinstance(default, int):
            v = float(value)
            if v != int(v):
                raise ValueError
            return int(v)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = [p.strip() for p in value.split(",") if p.strip()]
            if not isinstance(value, list):
                value = [value]
            proto = default[0] if default else value[0] if value else 0.0
            return [_coerce(name, v, proto) for v in value]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"parameter {name!r}: cannot interpret {value!r}") from None


def _resolve(schema, given):
    unknown = set(given) - set(schema)
    if unknown:
        raise ConfigError(f"unknown parameters: {sorted(unknown)}; allowed: {sorted(schema)}")
    out = dict(schema)
    for k, v in given.items():
        out[k] = _coerce(k, v, schema[k])
    return out


# ---------------------------------------------------------------------------
# scenarios


def _sl2_positivity(p, seed):
    from .oskernel import BasisFunctionSet, psd_report
    from .sl2series import jform

    basis = BasisFunctionSet.default(p["bumps"], p["lo"], p["hi"], p["width"], p["order"])

    def one(s):
        F = jform(s, basis)
        lo, hi, _ = psd_report(F)
        return s, lo, hi, F.eigenvalues

    rows = pmap(one, p["s"])
    metrics, verdicts, table = {}, {}, []
    for s, lo, hi, ev in rows:
        metrics[f"eig_min[s={s}]"] = _f(lo)
        metrics[f"eig_max[s={s}]"] = _f(hi)
        verdicts[f"psd[s={s}]"] = bool(lo >= -p["tol"] * hi)
        table += [[s, k, _f(e)] for k, e in enumerate(ev)]
    return metrics, verdicts, {"eigenvalues.csv": (["s", "index", "eigenvalue"], table)}


def _sl2_contraction(p, seed):
    from . import sl2core as core
    from .sl2series import contraction_norm

    rng = np.random.default_rng(seed)
    gs = [core.random_semigroup_element(rng, p["t_max"]) for _ in range(p["count"])]
    norms = pmap(lambda g: contraction_norm(g, p["s"]).gamma_norm, gs)
    w = core.h_t(p["witness_t"]) @ core.exp_lie(core.q(p["witness_eps"], 0.0))
    wn = contraction_norm(w, p["s"]).gamma_norm
    metrics = {"gamma_norm_max": _f(max(norms)), "witness_gamma_norm": _f(wn)}
    verdicts = {
        "contraction": bool(max(norms) <= 1 + p["tol"]),
        "sharpness_witness": bool(wn >= 0.99),
    }
    rows = [[k, g.a, g.b, g.c, g.d, _f(n)] for k, (g, n) in enumerate(zip(gs, norms))]
    return metrics, verdicts, {"gamma_norms.csv": (["k", "a", "b", "c", "d", "gamma_norm"], rows)}


_CONE = {"2X0": ("q", 1.0, 0.0), "q11": ("q", 1.0, 1.0), "q1m1": ("q", 1.0, -1.0), "0": ("q", 0.0, 0.0)}


def _cone_element(name):
    from . import sl2core as core

    if name not in _CONE:
        raise ConfigError(f"unknown cone element {name!r}; choose from {sorted(_CONE)}")
    _, r, s = _CONE[name]
    return core.q(r, s)


def _sl2_dual_spectrum(p, seed):
    from .sl2series import dual_spectrum

    cases = [(s, y) for s in p["s"] for y in p["Y"]]
    for _, y in cases:
        _cone_element(y)
    specs = pmap(lambda c: dual_spectrum(_cone_element(c[1]), c[0], delta=p["delta"]), cases)
    metrics, verdicts, rows = {}, {}, []
    for (s, y), sp in zip(cases, specs):
        key = f"[s={s},Y={y}]"
        metrics["lambda_max" + key] = _f(sp.max)
        metrics["richardson_gap" + key] = _f(sp.gap)
        verdicts["nonpositive" + key] = bool(sp.max <= p["tol"])
        verdicts["richardson" + key] = bool(sp.gap <= p["gap_tol"])
        rows += [[s, y, k, _f(v)] for k, v in enumerate(sp.eigenvalues)]
    return metrics, verdicts, {"spectra.csv": (["s", "Y", "index", "lambda"], rows)}


def _sl2_identities(p, seed):
    from . import sl2core as core
    from .sl2series import kernel_identity_check, selfadjoint_residual, semigroup_law_residual

    rng = np.random.default_rng(seed)
    ts = np.arange(-10.0, 10.0 + 1e-9, p["t_step"])
    tanh_err = max(abs(core.zeta(core.h_t(t)) - math.tanh(t)) for t in ts)
    pairs = rng.uniform(-0.99, 0.99, size=(p["pairs"], 2))
    kid = kernel_identity_check(p["s"], pairs)
    gpairs = [(core.exp_lie(core.random_cone_element(rng)), core.exp_lie(core.random_cone_element(rng)))
              for _ in range(p["law_pairs"])]
    law = pmap(lambda g: semigroup_law_residual(g[0], g[1], p["s"]), gpairs)
    sa = selfadjoint_residual(core.exp_lie(core.q(1.0, 0.0)), p["s"])
    metrics = {"tanh_max_err": _f(tanh_err), "kernel_identity_residual": _f(kid),
               "semigroup_law_residual": _f(max(law)), "selfadjoint_residual": _f(sa)}
    verdicts = {"tanh": bool(tanh_err <= 1e-12), "kernel_identity": bool(kid <= 1e-12),
                "semigroup_law": bool(max(law) <= 1e-6), "selfadjoint": bool(sa <= 1e-8)}
    return metrics, verdicts, {}


def _kernels_bergman(p, seed):
    from .oskernel import bergman_gram, psd_report

    rng = np.random.default_rng(seed)
    rows, agree = [], True
    for lam in p["lambdas"]:
        for trial in range(p["trials"]):
            n = int(rng.integers(2, p["max_points"] + 1))
            r = np.sqrt(rng.uniform(0, 0.9 ** 2, n))
            z = r * np.exp(2j * math.pi * rng.uniform(size=n))
            lo, hi, verdict = psd_report(bergman_gram(z, lam))
            if lam >= 0 and verdict == "indefinite":
                agree = False
            rows.append([lam, trial, n, _f(lo), _f(hi), verdict])
    neg_found = any(r[5] == "indefinite" for r in rows if r[0] < 0)
    metrics = {"trials": len(rows), "indefinite_for_negative_lambda": int(sum(r[5] == "indefinite" for r in rows if r[0] < 0))}
    verdicts = {"psd_for_nonnegative_lambda": agree, "indefinite_witness_for_negative_lambda": bool(neg_found or not any(l < 0 for l in p["lambdas"]))}
    return metrics, verdicts, {"bergman.csv": (["lambda", "trial", "points", "eig_min", "eig_max", "verdict"], rows)}


def _cayley_table(p, seed):
    from .oskernel import cayley_table

    rows = cayley_table(range(1, p["n_max"] + 1))
    ok = all(L >= R for _, R, L in rows)
    return {"rows": len(rows)}, {"lpos_ge_R": ok}, {"cayley.csv": (["space", "R", "L_pos"], [list(r) for r in rows])}


def _phillips(p, seed):
    from .osquotient import FiniteReflectionSpace, phillips_subspace

    rng = np.random.default_rng(seed)
    spaces = [FiniteReflectionSpace.random(rng, p["max_points"]) for _ in range(p["trials"])]
    spaces += [FiniteReflectionSpace.random(rng, p["max_points"], fixed_fraction=0.0) for _ in range(5)]
    rows, psd, dims, free_zero = [], True, True, True
    for k, sp in enumerate(spaces):
        res = phillips_subspace(sp)
        ok_psd = res.jform.eig_min >= 0.0
        psd &= ok_psd
        dims &= res.quotient_dim == len(res.M0)
        if not res.M0:
            free_zero &= res.quotient_dim == 0
        rows.append([k, sp.point_count, len(res.M0), len(res.A), res.quotient_dim, ok_psd])
    return ({"spaces": len(spaces)},
            {"psd_exact": bool(psd), "quotient_dim_equals_M0": bool(dims), "fixed_point_free_zero": bool(free_zero)},
            {"phillips.csv": (["k", "points", "M0", "A", "quotient_dim", "psd"], rows)})


def _heisenberg_rp(p, seed):
    from .heisenberg import ProductTestFunction, load_or_build_table, rp_form_direct, rp_form_reduced

    table = load_or_build_table(p["cache_dir"] or None)
    rng = np.random.default_rng(seed)
    fs = [ProductTestFunction.random(rng) for _ in range(p["trials"])]
    vals = pmap(lambda f: (rp_form_direct(f, table, p["order"]), rp_form_reduced(f, p["order"])), fs)
    rel = [abs(d - r) / max(abs(d), 1e-300) for d, r in vals]
    reduced_min = min(r for _, r in vals)
    metrics = {"max_rel_gap": _f(max(rel)), "reduced_min": _f(reduced_min)}
    verdicts = {"reduced_nonnegative": bool(reduced_min >= 0), "direct_matches_reduced": bool(max(rel) <= 1e-4)}
    rows = [[k, _f(d), _f(r)] for k, (d, r) in enumerate(vals)]
    return metrics, verdicts, {"rp_forms.csv": (["k", "direct", "reduced"], rows)}


def _heisenberg_uncorrelate(p, seed):
    from .heisenberg import hardy_positivity_probe, random_invariant_subspace, uncorrelate

    rng = np.random.default_rng(seed)
    models = [random_invariant_subspace(rng, K=p["K"]) for _ in range(p["trials"])]
    res = pmap(lambda m: uncorrelate(m[1], 1.0, m[0], beta_grid=(1.0, 0.7)).residual, models)
    hardy = hardy_positivity_probe(lambda t: 1.0, lambda t: 1.0, p["hardy_trials"], rng=np.random.default_rng(seed))
    metrics = {"max_residual": _f(max(res)), "hardy_min": _f(hardy)}
    verdicts = {"uncorrelated": bool(max(res) <= 1e-8), "hardy_indefinite": bool(hardy < 0)}
    rows = [[k, m[1].shape[1], _f(r)] for k, (m, r) in enumerate(zip(models, res))]
    return metrics, verdicts, {"uncorrelate.csv": (["k", "dim_K0", "residual"], rows)}


def _axb_qfield(p, seed):
    from .axb import q_from_mu, qfield_residuals, qjq_trace

    rng = np.random.default_rng(seed)
    mus = np.abs(rng.normal(size=p["count"])) * rng.exponential(size=p["count"]) + 1j * rng.normal(scale=3, size=p["count"])
    worst, tr_ok = 0.0, True
    for mu in mus:
        Q = q_from_mu(mu)
        worst = max(worst, *qfield_residuals(Q).values())
        tr = qjq_trace(Q)
        tr_ok &= tr >= 0 and abs(tr - 2 * mu.real / (1 + abs(mu) ** 2)) <= 1e-12
    return {"max_identity_residual": _f(worst)}, {"qfield_identities": bool(worst <= 1e-12), "trace_formula": bool(tr_ok)}, {}


def _axb_escape(p, seed):
    from .axb import escape_time, escape_time_closed_form

    metrics, verdicts, rows = {}, {}, []
    for E in p["E"]:
        fwd = escape_time(E, p["x0"], +1)
        rows.append([E, "+inf", fwd.status, _f(fwd.value) if fwd.value is not None else ""])
        if E >= 0:
            err = abs(fwd.value - escape_time_closed_form(E, p["x0"])) if fwd.value is not None else math.inf
            metrics[f"forward_err[E={E}]"] = _f(err)
            verdicts[f"finite_forward[E={E}]"] = bool(fwd.status == "FINITE" and err <= 1e-8)
        if E > 0:
            back = escape_time(E, p["x0"], -1)
            slope_err = abs(back.slope * math.sqrt(E) - 1.0) if back.slope is not None else math.inf
            metrics[f"backward_slope[E={E}]"] = _f(back.slope) if back.slope is not None else "nan"
            verdicts[f"diverges_backward[E={E}]"] = bool(back.status == "DIVERGES" and slope_err <= 0.01)
            rows.append([E, "-inf", back.status, ""])
    return metrics, verdicts, {"escape.csv": (["E", "direction", "status", "value"], rows)}


def _axb_deficiency(p, seed):
    from .axb import deficiency_probe

    z = complex(p["z"].replace("i", "j")) if isinstance(p["z"], str) else complex(p["z"])
    runs = {
        "base": deficiency_probe(z, p["X"]),
        "extended": deficiency_probe(z, p["X"] + 5),
        "refined": deficiency_probe(z, p["X"], rtol=1e-10),
        "conjugate": deficiency_probe(z.conjugate(), p["X"]),
        "control": deficiency_probe(z, p["X"], potential=False),
    }
    expected = {"+inf": "limit_circle", "-inf": "limit_point"}
    verdicts = {
        "expected_ends": runs["base"].per_end == expected,
        "stable_under_extension": runs["extended"].per_end == runs["base"].per_end,
        "stable_under_refinement": runs["refined"].per_end == runs["base"].per_end,
        "conjugate_symmetry": runs["conjugate"].per_end == runs["base"].per_end,
        "control_count_zero": runs["control"].count_L2 == 0,
    }
    metrics = {f"count_L2[{k}]": r.count_L2 for k, r in runs.items()}
    rows = [[k, r.per_end["+inf"], r.per_end["-inf"], r.count_L2] for k, r in runs.items()]
    return metrics, verdicts, {"deficiency.csv": (["run", "plus_inf", "minus_inf", "count_L2"], rows)}


def _axb_nogo(p, seed):
    from .axb import XGrid, nogo_dichotomy

    rows = nogo_dichotomy(b_samples=tuple(p["b"]), grid=XGrid(p["x_lo"], p["x_hi"], p["N"]))
    metrics = {}
    for r in rows:
        metrics[f"violation[{r.name}]"] = _f(r.violation)
        metrics[f"form_margin[{r.name}]"] = _f(r.form_margin)
    verdicts = {"dichotomy": all(r.consistent for r in rows)}
    table = [[r.name, _f(r.violation), _f(r.form_margin), _f(r.form_norm), r.consistent] for r in rows]
    return metrics, verdicts, {"nogo.csv": (["lambda", "violation", "form_margin", "form_norm", "consistent"], table)}


SCENARIOS = {
    "sl2-positivity": ({"s": [0.5], "bumps": 12, "lo": -0.8, "hi": 0.8, "width": 0.15, "order": 80, "tol": 1e-9}, _sl2_positivity),
    "sl2-contraction": ({"s": 0.5, "count": 20, "t_max": 1.5, "witness_t": 0.8, "witness_eps": 1e-3, "tol": 1e-6}, _sl2_contraction),
    "sl2-dual-spectrum": ({"s": [0.25, 0.5, 0.75], "Y": ["2X0", "q11"], "delta": 1e-8, "tol": 1e-6, "gap_tol": 1e-4}, _sl2_dual_spectrum),
    "sl2-identities": ({"s": 0.5, "t_step": 0.25, "pairs": 1000, "law_pairs": 10}, _sl2_identities),
    "kernels-bergman": ({"lambdas": [-2.0, -0.5, 0.0, 0.5, 1.0, 2.5], "trials": 20, "max_points": 8}, _kernels_bergman),
    "cayley-table": ({"n_max": 8}, _cayley_table),
    "phillips": ({"trials": 50, "max_points": 32}, _phillips),
    "heisenberg-rp": ({"trials": 10, "order": 48, "cache_dir": ""}, _heisenberg_rp),
    "heisenberg-uncorrelate": ({"trials": 20, "K": 64, "hardy_trials": 200}, _heisenberg_uncorrelate),
    "axb-qfield": ({"count": 1000}, _axb_qfield),
    "axb-escape": ({"E": [0.0, 1.0, 4.0], "x0": 0.0}, _axb_escape),
    "axb-deficiency": ({"z": "1i", "X": 20.0}, _axb_deficiency),
    "axb-nogo": ({"b": [0.5, 1.0, 2.0], "x_lo": -4.0, "x_hi": 2.0, "N": 128}, _axb_nogo),
}


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def run(config, timing=False):
    if config.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {config.scenario!r}; choose from {sorted(SCENARIOS)}")
    schema, fn = SCENARIOS[config.scenario]
    params = _resolve(schema, config.parameters)
    start = time.perf_counter()
    try:
        with threadpool_limits(1):
            metrics, verdicts, tables = fn(params, config.seed)
    except ReflectLabError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ScenarioError(f"{config.scenario}: {type(exc).__name__}: {exc}") from exc
    elapsed = (time.perf_counter() - start) * 1e3
    out = Path(config.output_path)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for name, (header, rows) in sorted(tables.items()):
        _write_csv(out / name, header, rows)
        artifacts.append(name)
    report = Report(
        scenario=config.scenario,
        parameters={"seed": config.seed, **params},
        metrics=metrics,
        verdicts={k: bool(v) for k, v in verdicts.items()},
        artifacts=artifacts + ["summary.csv"],
        runtime_ms=round(elapsed, 3) if timing else None,
        tool_version=__version__,
    )
    emit(report, "csv-summary", out / "summary.csv")
    emit(report, "json", out / "report.json")
    return report


# ---------------------------------------------------------------------------
# entry point


def _parse_param(text):
    if "=" not in text:
        raise ConfigError(f"--param expects k=v, got {text!r}")
    k, v = text.split("=", 1)
    try:
        val = json.loads(v)
    except json.JSONDecodeError:
        val = v
    return k.strip(), val


def build_parser():
    ap = argparse.ArgumentParser(prog="reflectlab", description="Reflection-positivity numerical laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("scenario", nargs="?", help="scenario name (omit with --config)")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--param", action="append", default=[], help="parameter override k=v (repeatable)")
    r.add_argument("--seed", type=int)
    r.add_argument("--output", help="output directory")
    r.add_argument("--timing", action="store_true", help="record runtime_ms in the report")
    sub.add_parser("list", help="list scenarios and their parameters")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, (schema, _) in SCENARIOS.items():
            print(f"{name}: {json.dumps(schema, sort_keys=True)}")
        return 0
    try:
        if args.config:
            data = json.loads(Path(args.config).read_text())
            if args.scenario and args.scenario != data.get("scenario"):
                raise ConfigError("scenario argument conflicts with config file")
        elif args.scenario:
            data = {"scenario": args.scenario}
        else:
            raise ConfigError("give a scenario name or --config")
        params = dict(data.get("parameters", {}))
        params.update(dict(_parse_param(p) for p in args.param))
        data["parameters"] = params
        if args.seed is not None:
            data["seed"] = args.seed
        if args.output:
            data["output_path"] = args.output
        report = run(ScenarioConfig.from_dict(data), timing=args.timing)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, IoError, OSError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 3
    for k in sorted(report.verdicts):
        print(f"{'PASS' if report.verdicts[k] else 'FAIL'} {k}")
    print(f"report: {Path(data.get('output_path', 'reflectlab-out')) / 'report.json'}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
