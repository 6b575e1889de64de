"""Command line front end: ``contact-split solve|sweep|validate|report|gen``.

Configuration files are flat sectioned ``key = value`` text; see
``docs/config.md``.  Exit codes: 0 converged / passed, 1 validation failure,
2 diverged, 3 iteration limit, 4 configuration or input error, 5 solve
failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg, problems
from .driver import (CONVERGED, DIVERGED, LINEAR_SOLVE_FAILURE, MAX_ITER, SolverConfig, read_trace_csv,
                     run_fixed_point, write_trace_csv)
from .exceptions import ConfigError, ContactSplitError, InsufficientTrace
from .metrics import accuracy_report, convergence_order
from .oracle import brute_force_kkt, solve_saddle_point_active_set
from .problem import load_bundle, save_bundle
from .updates import make_update, uzawa_upper_bound

log = logging.getLogger("contact_split")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGED = 2
EXIT_MAX_ITER = 3
EXIT_CONFIG = 4
EXIT_SOLVE = 5

STATUS_EXIT = {CONVERGED: EXIT_OK, DIVERGED: EXIT_DIVERGED, MAX_ITER: EXIT_MAX_ITER,
               LINEAR_SOLVE_FAILURE: EXIT_SOLVE}

SEED_ENV = "CONTACT_SPLIT_SEED"

SECTIONS = {
    "problem": None,  # generator keywords are free-form
    "solver": {"update", "param", "param_unit", "k_n", "accel", "placement", "tol", "max_iter",
               "restart_rule", "seed"},
    "output": {"dir", "trace", "summary", "accuracy", "oracle", "solution"},
    "sweep": {"updates", "accels", "params", "param_unit", "placement", "jobs", "output", "timing", "tol",
              "max_iter", "restart_rule"},
    "validate": {"oracles", "max_e_force", "max_e_disp", "instances", "report"},
}

GENERATORS = {
    "spring_chain": problems.gen_spring_chain,
    "hertz": problems.gen_hertz,
    "multibody": problems.gen_multibody,
    "random": problems.gen_random,
}


# -- configuration -------------------------------------------------------------

@dataclass
class Entry:
    value: str
    line: int


@dataclass
class Config:
    path: Path | None
    sections: dict = field(default_factory=dict)

    def has(self, section, key=None):
        if section not in self.sections:
            return False
        return key is None or key in self.sections[section]

    def raw(self, section, key, default=None):
        e = self.sections.get(section, {}).get(key)
        return default if e is None else e.value

    def line(self, section, key):
        e = self.sections.get(section, {}).get(key)
        return None if e is None else e.line

    def get(self, section, key, cast=str, default=None):
        e = self.sections.get(section, {}).get(key)
        if e is None:
            return default
        try:
            return cast(e.value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key}: cannot read {e.value!r} ({exc})", e.line) from None

    def get_list(self, section, key, cast=str):
        e = self.sections.get(section, {}).get(key)
        if e is None:
            return None
        items = [s.strip() for s in e.value.split(",") if s.strip()]
        try:
            return [cast(s) for s in items]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key}: cannot read {e.value!r} ({exc})", e.line) from None

    def resolve(self, path):
        p = Path(path)
        if not p.is_absolute() and self.path is not None:
            p = self.path.parent / p
        return p


def _strip_comment(line):
    stripped = line.strip()
    if stripped.startswith(("#", ";")):
        return ""
    for marker in (" #", "\t#"):
        i = line.find(marker)
        if i >= 0:
            line = line[:i]
    return line.strip()


def parse_config(text, path=None):
    """Parse configuration text; raises :class:`ConfigError` with the line number."""
    cfg = Config(Path(path) if path is not None else None)
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in cfg.sections:
                raise ConfigError(f"section [{section}] repeated", lineno)
            cfg.sections[section] = {}
            continue
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        allowed = SECTIONS[section]
        if allowed is not None and key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in cfg.sections[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        cfg.sections[section][key] = Entry(value.strip(), lineno)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path)


def _scalar(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    return text


def resolve_seed(cfg=None):
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    if cfg is not None:
        return cfg.get("solver", "seed", int, linalg.DEFAULT_SEED)
    return linalg.DEFAULT_SEED


def build_problem(cfg, seed):
    """Problem from ``[problem] bundle = dir`` or ``[problem] generator = name``."""
    if not cfg.has("problem"):
        raise ConfigError("missing [problem] section")
    section = cfg.sections["problem"]
    if "bundle" in section:
        path = cfg.resolve(section["bundle"].value)
        try:
            return load_bundle(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load bundle {path}: {exc}", section["bundle"].line) from None
    if "generator" not in section:
        raise ConfigError("[problem] needs 'bundle' or 'generator'")
    name = section["generator"].value
    if name not in GENERATORS:
        raise ConfigError(f"unknown generator {name!r}; expected one of {sorted(GENERATORS)}",
                          section["generator"].line)
    kwargs = {k: _scalar(e.value) for k, e in section.items() if k != "generator"}
    if name == "random":
        kwargs.setdefault("seed", seed)
    try:
        out = GENERATORS[name](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"generator {name!r}: {exc}", section["generator"].line) from None
    except ValueError as exc:
        raise ConfigError(f"generator {name!r}: {exc}", section["generator"].line) from None
    return out[0] if isinstance(out, tuple) else out


def _param_values(cfg, section, key, problem, seed, unit_key="param_unit"):
    values = cfg.get_list(section, key, float) if key == "params" else [cfg.get(section, key, float)]
    if values is None or values == [None]:
        raise ConfigError(f"[{section}] {key} is required")
    unit = cfg.get(section, unit_key, str, "absolute").lower()
    if unit == "bound":
        bound = uzawa_upper_bound(problem.K, seed=seed)
        values = [v * bound for v in values]
    elif unit != "absolute":
        raise ConfigError(f"[{section}] {unit_key} must be 'absolute' or 'bound'", cfg.line(section, unit_key))
    return values


def solver_config(cfg, problem, seed, section="solver", update=None, accel=None, param=None):
    update = update or cfg.get(section, "update", str, "uzawa")
    accel = accel or cfg.get(section, "accel", str, "none")
    if param is None:
        param = _param_values(cfg, section, "param", problem, seed)[0]
    try:
        return SolverConfig(
            update=make_update(update, param, k_n=cfg.get(section, "k_n", float)),
            scheme=accel,
            placement=cfg.get(section, "placement", str),
            tol=cfg.get(section, "tol", float, 1e-12),
            max_iter=cfg.get(section, "max_iter", int, 500_000),
            restart_rule=cfg.get(section, "restart_rule", str, "as_written"),
        )
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _reference(problem, kind):
    if kind in (None, "", "none"):
        return None
    if kind == "active_set":
        return solve_saddle_point_active_set(problem)
    if kind == "brute_force":
        return brute_force_kkt(problem)
    raise ConfigError(f"unknown oracle {kind!r}; expected none, active_set or brute_force")


def _errors(problem, report, ref):
    """Relative force / displacement errors, absolute when the reference is zero."""
    f_ref = problem.contact_forces(ref.lam)
    f = problem.contact_forces(report.lam)
    nf = np.linalg.norm(f_ref)
    e_force = float(np.linalg.norm(f - f_ref) / nf) if nf > 0 else float(np.linalg.norm(f))
    nu = np.linalg.norm(ref.U)
    e_disp = float(np.linalg.norm(report.U - ref.U) / nu) if nu > 0 else float(np.linalg.norm(report.U))
    if not np.all(np.isfinite(report.U)):
        e_disp = math.inf
    return e_force, e_disp


def _write_kv(path, items):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n")


# -- commands ---------------------------------------------------------------------

def cmd_solve(config_path):
    cfg = load_config(config_path)
    seed = resolve_seed(cfg)
    problem = build_problem(cfg, seed)
    scfg = solver_config(cfg, problem, seed)
    out_dir = cfg.resolve(cfg.get("output", "dir", str, "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_fixed_point(problem, scfg)

    summary = {"seed": seed, "update": type(scfg.update).__name__, "param": float(scfg.update.parameter),
               "accel": scfg.scheme, "placement": scfg.placement, "tol": float(scfg.tol),
               "max_iter": scfg.max_iter}
    summary.update(report.summary())
    _write_kv(out_dir / cfg.get("output", "summary", str, "summary.txt"), summary)
    write_trace_csv(report, out_dir / cfg.get("output", "trace", str, "trace.csv"))
    sol = out_dir / cfg.get("output", "solution", str, "solution")
    sol.mkdir(parents=True, exist_ok=True)
    linalg.write_vec(sol / "lambda.vec", report.lam)
    linalg.write_vec(sol / "U.vec", report.U)

    ref = _reference(problem, cfg.get("output", "oracle", str, "none"))
    acc = accuracy_report(problem, report, None if ref is None else ref.U, None if ref is None else ref.lam)
    (out_dir / cfg.get("output", "accuracy", str, "accuracy.txt")).write_text(acc.to_text())
    for k, v in summary.items():
        print(f"{k} = {v}")
    return STATUS_EXIT[report.status]


SWEEP_COLUMNS = ("update", "accel", "placement", "param", "status", "iterations", "e_force", "e_disp",
                 "effective_gap", "complementarity", "convergence_order", "seed")


def _sweep_grid(cfg, problem, seed):
    if not cfg.has("sweep"):
        raise ConfigError("missing [sweep] section")
    updates = cfg.get_list("sweep", "updates") or [cfg.get("solver", "update", str, "uzawa")]
    accels = cfg.get_list("sweep", "accels") or [cfg.get("solver", "accel", str, "none")]
    params = cfg.get_list("sweep", "params", float)
    if not params or not updates or not accels:
        raise ConfigError("sweep grid is empty", cfg.line("sweep", "params"))
    unit = cfg.get("sweep", "param_unit", str, "absolute").lower()
    if unit == "bound":
        bound = uzawa_upper_bound(problem.K, seed=seed)
        params = [p * bound for p in params]
    elif unit != "absolute":
        raise ConfigError("[sweep] param_unit must be 'absolute' or 'bound'", cfg.line("sweep", "param_unit"))
    grid, seen = [], set()
    for point in itertools.product(updates, accels, params):
        key = (point[0].lower(), point[1].lower(), point[2])
        if key in seen:
            log.warning("duplicate sweep point %s ignored", key)
            continue
        seen.add(key)
        grid.append(key)
    return grid


def cmd_sweep(config_path):
    cfg = load_config(config_path)
    seed = resolve_seed(cfg)
    problem = build_problem(cfg, seed)
    grid = _sweep_grid(cfg, problem, seed)
    jobs = cfg.get("sweep", "jobs", int, 1)
    timing = cfg.get("sweep", "timing", _scalar, False) is True
    section = "sweep"
    configs = []
    for update, accel, param in grid:
        try:
            configs.append(SolverConfig(
                update=make_update(update, param, k_n=cfg.get("solver", "k_n", float)),
                scheme=accel,
                placement=cfg.get(section, "placement", str),
                tol=cfg.get(section, "tol", float, cfg.get("solver", "tol", float, 1e-12)),
                max_iter=cfg.get(section, "max_iter", int, cfg.get("solver", "max_iter", int, 500_000)),
                restart_rule=cfg.get(section, "restart_rule", str, "as_written"),
            ))
        except ValueError as exc:
            raise ConfigError(f"[sweep] {exc}") from None
    ref = solve_saddle_point_active_set(problem)
    fact = linalg.factorize(problem.K)

    def run(scfg):
        rep = run_fixed_point(problem, scfg, factorization=fact)
        e_force, e_disp = _errors(problem, rep, ref)
        try:
            p = convergence_order(rep.trace["r"])
        except InsufficientTrace:
            p = math.nan
        acc = accuracy_report(problem, rep)
        row = [scfg.update.__class__.__name__, scfg.scheme, scfg.placement, repr(float(scfg.update.parameter)),
               rep.status, rep.iterations, repr(e_force), repr(e_disp), repr(acc.effective_gap_max),
               repr(acc.complementarity_max), repr(p), seed]
        if timing:
            row.append(repr(rep.first_iteration_time))
            row.append(repr(rep.mean_iteration_time))
        return row

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, configs))
    else:
        rows = [run(c) for c in configs]
    out = cfg.resolve(cfg.get("sweep", "output", str, "sweep.csv"))
    out.parent.mkdir(parents=True, exist_ok=True)
    header = list(SWEEP_COLUMNS)
    if timing:
        # concurrent rows share the machine, so their timings are not reproducible
        suffix = "_nondeterministic" if jobs > 1 else ""
        header += [f"first_iteration_time_s{suffix}", f"mean_iteration_time_s{suffix}"]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{len(rows)} rows written to {out}")
    return EXIT_OK


def cmd_validate(config_path):
    cfg = load_config(config_path)
    seed = resolve_seed(cfg)
    oracles = cfg.get_list("validate", "oracles") or ["brute_force", "active_set"]
    max_f = cfg.get("validate", "max_e_force", float, 1e-8)
    max_u = cfg.get("validate", "max_e_disp", float, 1e-8)
    instances = cfg.get("validate", "instances", int, 1)
    lines, ok = [], True
    for k in range(instances):
        problem = build_problem(cfg, seed + k)
        scfg = solver_config(cfg, problem, seed)
        rep = run_fixed_point(problem, scfg)
        for name in oracles:
            if name == "brute_force" and problem.n_pairs > 20:
                lines.append(f"instance {k}: brute_force skipped ({problem.n_pairs} pairs)")
                continue
            ref = _reference(problem, name)
            e_force, e_disp = _errors(problem, rep, ref)
            passed = e_force <= max_f and e_disp <= max_u
            ok &= passed
            lines.append(f"instance {k}: oracle={name} status={rep.status} iterations={rep.iterations} "
                         f"e_force={e_force!r} e_disp={e_disp!r} {'PASS' if passed else 'FAIL'}")
    lines.append(f"result = {'PASS' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    target = cfg.get("validate", "report", str)
    if target:
        path = cfg.resolve(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_VALIDATION


_RESIDUAL_SCRIPT = '''"""Relative change of the multipliers against the iteration number."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

curves = defaultdict(lambda: ([], []))
with open({data!r}, newline="") as fh:
    for row in csv.DictReader(fh):
        x, y = curves[row["key"]]
        x.append(int(float(row["iter"])))
        y.append(float(row[{column!r}]))

fig, ax = plt.subplots()
for key, (x, y) in curves.items():
    ax.semilogy(x, y, label=key)
ax.set_xlabel("iteration")
ax.set_ylabel({ylabel!r})
ax.legend()
fig.savefig({figure!r})
'''

_BAR_SCRIPT = '''"""Iteration counts per run."""
import csv

import matplotlib.pyplot as plt

labels, counts = [], []
with open({data!r}, newline="") as fh:
    for row in csv.DictReader(fh):
        labels.append(row["key"])
        counts.append(int(float(row["iterations"])))

fig, ax = plt.subplots()
ax.bar(range(len(counts)), counts)
ax.set_xticks(range(len(counts)))
ax.set_xticklabels(labels, rotation=45, ha="right")
ax.set_ylabel("iterations")
ax.set_yscale("log")
fig.tight_layout()
fig.savefig({figure!r})
'''


def _read_csv_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return header, rows


def cmd_report(paths, out_dir, keys=None):
    """Tidy the given trace or sweep CSVs into one data file and emit
    matplotlib scripts that plot them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if keys and len(keys) != len(paths):
        raise ConfigError("--key must be given once per input file")
    keys = keys or [Path(p).stem for p in paths]
    traces, sweeps = [], []
    for key, path in zip(keys, paths):
        try:
            header, _ = _read_csv_rows(path)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if "iter" in header or "r" in header:
            try:
                read_trace_csv(path)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            traces.append((key, path))
        elif "iterations" in header:
            sweeps.append((key, path))
        else:
            raise ConfigError(f"{path}: missing column(s): need iter and r (trace) or iterations (sweep)")
    written = []
    if traces:
        data = out_dir / "traces_tidy.csv"
        columns = None
        with open(data, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for key, path in traces:
                header, rows = _read_csv_rows(path)
                if columns is None:
                    columns = header
                    w.writerow(["key"] + columns)
                idx = [header.index(c) if c in header else None for c in columns]
                for row in rows:
                    w.writerow([key] + [row[i] if i is not None else "" for i in idx])
        written.append(data)
        script = out_dir / "plot_residual.py"
        script.write_text(_RESIDUAL_SCRIPT.format(data=str(data), column="r", ylabel="convergence criterion r",
                                                  figure=str(out_dir / "residual.png")))
        written.append(script)
        if "effective_gap" in columns:
            script = out_dir / "plot_effective_gap.py"
            script.write_text(_RESIDUAL_SCRIPT.format(data=str(data), column="effective_gap",
                                                      ylabel="effective gap", figure=str(out_dir / "effective_gap.png")))
            written.append(script)
    if sweeps:
        data = out_dir / "sweeps_tidy.csv"
        with open(data, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            columns = None
            for key, path in sweeps:
                header, rows = _read_csv_rows(path)
                if columns is None:
                    columns = header
                    w.writerow(["key", "source"] + columns)
                for row in rows:
                    rec = dict(zip(header, row))
                    label = "/".join(rec.get(c, "") for c in ("update", "accel", "param")).strip("/") or key
                    w.writerow([label, key] + [rec.get(c, "") for c in columns])
        written.append(data)
        script = out_dir / "plot_iterations.py"
        script.write_text(_BAR_SCRIPT.format(data=str(data), figure=str(out_dir / "iterations.png")))
        written.append(script)
    for p in written:
        print(p)
    return EXIT_OK


def cmd_gen(generator, out_dir, assignments, seed):
    if generator not in GENERATORS:
        raise ConfigError(f"unknown generator {generator!r}; expected one of {sorted(GENERATORS)}")
    kwargs = {}
    for item in assignments:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"expected key=value, got {item!r}")
        kwargs[key.strip()] = _scalar(value.strip())
    if generator == "random":
        kwargs.setdefault("seed", seed)
    try:
        out = GENERATORS[generator](**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"generator {generator!r}: {exc}") from None
    problem = out[0] if isinstance(out, tuple) else out
    save_bundle(problem, out_dir)
    print(f"N = {problem.n_dof}, N_lambda = {problem.n_pairs} written to {out_dir}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="contact-split", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("solve", "run one solve"), ("sweep", "run a parameter sweep"),
                       ("validate", "compare against reference solutions")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
    p = sub.add_parser("report", help="emit plot scripts from trace or sweep CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("-o", "--out", default="report")
    p.add_argument("-k", "--key", action="append", help="curve label per input file (default: file stem)")
    p = sub.add_parser("gen", help="write a generated problem bundle")
    p.add_argument("generator", choices=sorted(GENERATORS))
    p.add_argument("out")
    p.add_argument("params", nargs="*", metavar="key=value")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args.config)
        if args.command == "sweep":
            return cmd_sweep(args.config)
        if args.command == "validate":
            return cmd_validate(args.config)
        if args.command == "report":
            return cmd_report(args.csv, args.out, args.key)
        return cmd_gen(args.generator, args.out, args.params, resolve_seed())
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContactSplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
