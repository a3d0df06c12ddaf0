"""Command-line harness: ``diligent {gen,train,baseline,verify,report}``.

Exit codes: 0 success, 1 a verification check failed, 2 bad parameters,
3 unknown method, 4 checkpoint mismatch, 5 report schema error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .baselines import (
    METHODS,
    BaselineConfig,
    UnknownMethodError,
    rows_csv,
    run_baseline,
    summarize,
    summary_csv,
)
from .core import EngineConfig, ParameterError
from .engine import clopper_pearson, simulate_success_lemma
from .learners import CheckpointMismatchError, load_checkpoint, save_checkpoint
from .problems import FAMILIES, Task, instance_to_text
from .train import StageRegressionError, TrainConfig, evaluate, make_models, stage_report_csv, train_full
from .verify import LEMMAS, verify_all

EXIT_VERIFY = 1
EXIT_PARAM = 2
EXIT_METHOD = 3
EXIT_CHECKPOINT = 4
EXIT_SCHEMA = 5


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "drift"
    n: int = 8
    components: int | None = None
    task_seed: int = 0
    method: str = "diligent"
    paths: int = 2000
    trials: int = 500
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)

    def validate(self) -> "ExperimentConfig":
        if self.family not in FAMILIES or self.family == "mult":
            raise ParameterError("family must be one of drift, graph, boosted-drift, boosted-graph")
        if self.method != "diligent" and self.method not in METHODS:
            raise UnknownMethodError(f"unknown method {self.method!r}")
        if self.paths < 1 or self.trials < 1:
            raise ParameterError("paths and trials must be positive")
        # raises ParameterError on bad gamma/delta
        EngineConfig.create(self.train.gamma, self.train.delta, 5)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def task(self) -> Task:
        return Task(self.family, self.n, self.components, self.task_seed)


def _coerce(cls, section: dict):
    kinds = {f.name: f.type for f in fields(cls)}
    out = {}
    for key, raw in section.items():
        name = key.replace("-", "_")
        if name not in kinds:
            raise ParameterError(f"unknown config key {key!r} for {cls.__name__}")
        t = str(kinds[name])
        try:
            if raw.strip().lower() in ("none", ""):
                out[name] = None
            elif "bool" in t:
                out[name] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif "int" in t and "float" not in t:
                out[name] = int(raw)
            elif "float" in t:
                out[name] = float(raw)
            else:
                out[name] = raw.strip()
        except ValueError as exc:
            raise ParameterError(f"bad value for {key}: {raw!r}") from exc
    return out


def load_config(path: str | None) -> ExperimentConfig:
    """INI file with sections [experiment], [engine], [train], [baseline]."""
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ParameterError(f"cannot read config {path}")
    unknown = set(cp.sections()) - {"experiment", "engine", "train", "baseline"}
    if unknown:
        raise ParameterError(f"unknown config sections {sorted(unknown)}")
    exp = {k: v for k, v in cp["experiment"].items()} if cp.has_section("experiment") else {}
    top = _coerce(ExperimentConfig, {k: v for k, v in exp.items()})
    tr = {}
    if cp.has_section("engine"):
        tr.update(cp["engine"])
    if cp.has_section("train"):
        tr.update(cp["train"])
    train = replace(cfg.train, **_coerce(TrainConfig, tr))
    base = replace(cfg.baseline, **_coerce(BaselineConfig, dict(cp["baseline"]))) if cp.has_section("baseline") else cfg.baseline
    return replace(cfg, train=train, baseline=base, **top)


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    top = {}
    for name in ("family", "n", "components", "method", "paths", "trials", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            top[name] = v
    cfg = replace(cfg, **top)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed),
                      baseline=replace(cfg.baseline, seed=args.seed))
    return cfg


def _header(cfg_hash: str) -> str:
    return f"# artifact {__version__} config {cfg_hash}\n"


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text)
    return p


# ------------------------------------------------------------------ commands


def cmd_gen(args) -> int:
    cfg = _apply_flags(load_config(args.config), args).validate()
    task = cfg.task()
    lines = [instance_to_text(task.instance(cfg.seed + i)) for i in range(args.count)]
    p = _write(Path(args.out), "instances.jsonl", "".join(lines))
    print(p)
    return 0


def _golden(task: Task, cfg: ExperimentConfig):
    # training seeds and evaluation seeds never overlap
    return task.instances(range(cfg.seed * 10**7, cfg.seed * 10**7 + cfg.paths))


def _eval_instances(task: Task, cfg: ExperimentConfig):
    base = 5 * 10**8 + cfg.seed * 10**6
    return task.instances(range(base, base + cfg.trials))


def cmd_train(args) -> int:
    cfg = _apply_flags(load_config(args.config), args)
    cfg = replace(cfg, method="diligent").validate()
    task = cfg.task()
    out = Path(args.out)
    t0 = time.perf_counter()
    if args.checkpoint:
        T_max = task.golden_length + 2
        gen, clf = make_models(task, cfg.train, T_max)
        load_checkpoint(args.checkpoint, gen, clf, cfg.to_dict())
        from .train import CurriculumState
        state = CurriculumState(task, cfg.train, cfg.train.engine_config(T_max), gen, clf)
    else:
        log = (lambda m: print(f"stage t={m.t} heldout={m.heldout_solve:.3f}", file=sys.stderr)) if args.verbose else None
        state = train_full(task, _golden(task, cfg), cfg.train, log=log)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out / "checkpoint.npz", state.generator, state.classifier, cfg.to_dict())
        _write(out, "stages.csv", _header(cfg.hash) + stage_report_csv(state, wall_time=False))
    train_time = time.perf_counter() - t0
    t1 = time.perf_counter()
    res = evaluate(state, _eval_instances(task, cfg), seed=cfg.seed, workers=args.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "family", "n", "seed", "solved", "nodesVisited", "backtrackLeaves"))
    for seed, ok, nodes, leaves in res.rows:
        w.writerow(("diligent", task.family, task.n, seed, int(ok), nodes, leaves))
    _write(out, "trials.csv", _header(cfg.hash) + buf.getvalue())
    lo, hi = clopper_pearson(res.solved, res.trials)
    summary = {
        "artifact": __version__, "config_hash": cfg.hash, "config": cfg.to_dict(),
        "method": "diligent", "family": task.family, "n": task.n, "trials": res.trials,
        "solved": res.solved, "solveRate": res.solve_rate, "ci99": [lo, hi],
        "nodesVisited": res.mean_nodes, "backtrackLeaves": res.mean_backtracks,
        "wallTime": {"train": train_time, "eval": time.perf_counter() - t1},
        "stages": [asdict(m) for m in state.history],
    }
    _write(out, "summary.json", json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    row = ("diligent", task.family, task.n, res.trials, f"{res.solve_rate:.6f}",
           f"{res.mean_nodes:.1f}", f"{train_time + summary['wallTime']['eval']:.3f}")
    _write(out, "summary.csv", ",".join(("method", "family", "n", "trials", "solveRate",
                                          "nodesVisited", "wallTime")) + "\n" + ",".join(map(str, row)) + "\n")
    print(json.dumps({"solveRate": res.solve_rate, "trials": res.trials, "out": str(out)}))
    return 0


def cmd_baseline(args) -> int:
    cfg = _apply_flags(load_config(args.config), args).validate()
    if cfg.method == "diligent":
        raise UnknownMethodError("use the train subcommand for the diligent learner")
    task = cfg.task()
    out = Path(args.out)
    results = run_baseline(cfg.method, task, _golden(task, cfg), _eval_instances(task, cfg),
                           cfg.baseline, node_budget=args.node_budget)
    _write(out, "trials.csv", _header(cfg.hash) + rows_csv(cfg.method, task, results))
    s = summarize(cfg.method, task, results)
    _write(out, "summary.csv", summary_csv([s]))
    summary = {"artifact": __version__, "config_hash": cfg.hash, "config": cfg.to_dict(),
               **asdict(s), "ci99": [s.lower99, s.upper99]}
    _write(out, "summary.json", json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    print(json.dumps({"method": cfg.method, "solveRate": s.solve_rate, "out": str(out)}))
    return 0


def _success_lemma_record(seed: int) -> dict:
    config = EngineConfig.create(0.5, 0.1, 5, seed=seed)
    st = simulate_success_lemma(config, 10_000, seed=seed)
    return {"lemma": "success-lemma", "parameters": {"gamma": 0.5, "delta": 0.1, "T_max": 5,
                                                      "trials": st.trials},
            "measured": {"success_rate": st.success_rate, "lower99": st.lower99,
                         "max_backtrack_leaves": st.max_backtrack_leaves},
            "bound": {"success": st.bound, "leaves": st.leaf_bound}, "pass": bool(st.passes)}


def cmd_verify(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.lemma == "success-lemma":
        records = [_success_lemma_record(seed)]
    else:
        records = [r.to_json() for r in verify_all(args.lemma, seed=seed)]
    text = "".join(json.dumps(r, sort_keys=True, default=str) + "\n" for r in records)
    sys.stdout.write(text)
    if args.out:
        _write(Path(args.out), "verify.jsonl", text)
    return 0 if all(r["pass"] for r in records) else EXIT_VERIFY


REPORT_COLUMNS = ["method", "family", "n", "trials", "solveRate", "nodesVisited", "wallTime"]


def read_summary_csv(path) -> list[dict]:
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    rows = list(csv.DictReader(lines))
    head = next(csv.reader(lines[:1]))
    if head[:6] != REPORT_COLUMNS[:6]:
        raise SchemaError(f"{path}: columns {head} do not match {REPORT_COLUMNS}")
    if not rows:
        raise SchemaError(f"{path}: no rows")
    return rows


def report_table(paths) -> str:
    rows = []
    for p in paths:
        rows += read_summary_csv(p)
    out = io.StringIO()
    out.write(f"{'method':<10} {'family':<14} {'n':>3} {'trials':>6} {'solve':>7} {'99% CI':>17} {'nodes':>9}\n")
    for r in rows:
        k = round(float(r["solveRate"]) * int(r["trials"]))
        lo, hi = clopper_pearson(k, int(r["trials"]))
        out.write(f"{r['method']:<10} {r['family']:<14} {int(r['n']):>3} {int(r['trials']):>6} "
                  f"{float(r['solveRate']):>7.3f} [{lo:.3f}, {hi:.3f}] {float(r['nodesVisited']):>9.1f}\n")
    fams = {}
    for r in rows:
        fams.setdefault((r["family"], r["n"]), {})[r["method"]] = float(r["solveRate"])
    for (fam, n), by in sorted(fams.items()):
        if "diligent" in by and len(by) > 1:
            best = max(v for m, v in by.items() if m != "diligent")
            out.write(f"gap {fam} n={n}: diligent - best baseline = {by['diligent'] - best:+.3f}\n")
    return out.getvalue()


def report_chart(paths, target) -> None:
    try:
        import matplotlib
    except ImportError:
        raise ParameterError("--chart needs matplotlib (pip install 'artifact[plot]')") from None
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    rows = []
    for p in paths:
        rows += read_summary_csv(p)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    series = {}
    for r in rows:
        series.setdefault((r["method"], r["family"]), []).append((int(r["n"]), float(r["nodesVisited"])))
    for (m, f), pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{m} / {f}")
    ax.set_xlabel("n")
    ax.set_ylabel("nodes visited")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(target, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_report(args) -> int:
    text = report_table(args.csv)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        _write(out, "report.txt", text)
        if args.chart:
            report_chart(args.csv, out / "nodes.svg")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diligent", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="INI file with [experiment], [engine], [train], [baseline]")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", required=out_required)

    def problem(sp):
        sp.add_argument("--family", choices=[f for f in FAMILIES if f != "mult"])
        sp.add_argument("--n", type=int)
        sp.add_argument("--components", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--paths", type=int)

    g = sub.add_parser("gen", help="write generated instances as JSON lines")
    common(g)
    problem(g)
    g.add_argument("--count", type=int, default=10)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the diligent learner and evaluate it")
    common(t)
    problem(t)
    t.add_argument("--checkpoint", help="evaluate a saved checkpoint instead of training")
    t.add_argument("-v", "--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("baseline", help="run one reference method")
    common(b)
    problem(b)
    b.add_argument("--method", required=True)
    b.add_argument("--node-budget", type=int)
    b.set_defaults(func=cmd_baseline)

    v = sub.add_parser("verify", help="numerical checks, one JSON record per check")
    common(v, out_required=False)
    v.add_argument("--lemma", choices=sorted(LEMMAS) + ["success-lemma"])
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="compare summary CSVs")
    r.add_argument("csv", nargs="+")
    r.add_argument("--out")
    r.add_argument("--chart", action="store_true", help="also write nodes.svg")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownMethodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_METHOD
    except CheckpointMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ParameterError, StageRegressionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
