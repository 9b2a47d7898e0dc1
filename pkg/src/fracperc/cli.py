"""Command-line front end.

Every artifact starts with the resolved configuration (``# key=value``
lines for text, text chunks for PNG, comments for PGM); binary trees get a
``config.ini`` next to them.  Exit status: 0 success, 1 task error, 2 bad
configuration or arguments.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import arithmetic, branching, conditions, projection, render, slices, sumset
from .intervals import IntervalUnion
from .config import TASKS, ConfigError, ExperimentConfig, load_config, parse_floats
from .model import homogeneous
from .rng import trial_seeds
from .serialize import deserialize_tree, serialize_tree
from .tree import sample_many, sample_realization


class TaskError(Exception):
    pass


class Artifacts:
    """Writes files under one directory, each tagged with the config echo."""

    def __init__(self, out: Path, cfg: ExperimentConfig):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.written: list[Path] = []

    def text(self, name: str, body: str) -> Path:
        path = self.out / name
        path.write_text(self.cfg.echo_header() + body)
        self.written.append(path)
        return path

    def record(self, name: str, rec: dict[str, str]) -> Path:
        return self.text(name, "".join(f"{k}={v}\n" for k, v in rec.items()))

    def raster(self, stem: str, img: np.ndarray) -> Path:
        path = render.write_raster(img, self.out / f"{stem}.{self.cfg.raster}", self.cfg.echo())
        self.written.append(path)
        return path

    def tree(self, name: str, tree) -> Path:
        path = self.out / name
        path.write_bytes(serialize_tree(tree))
        (self.out / "config.ini").write_text(self.cfg.to_ini())
        self.written += [path, self.out / "config.ini"]
        return path


def _pmap(fn, items, workers: int):
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _chunks(seq, size):
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def _sample(cfg: ExperimentConfig, depth: int):
    seeds = trial_seeds(cfg.seed, cfg.trials)
    parts = _pmap(lambda s: sample_many(cfg.spec, depth, s), _chunks(seeds, 64), cfg.workers)
    return [t for part in parts for t in part]


def _depths(cfg: ExperimentConfig, default_lo: int = 1) -> list[int]:
    return cfg.depths or list(range(default_lo, cfg.depth + 1))


def _alpha(text: str) -> float:
    text = text.strip()
    if text.startswith("pi/"):
        return math.pi / float(text[3:])
    return float(text)


def task_analyze(cfg: ExperimentConfig, art: Artifacts) -> None:
    spec = cfg.spec
    rec = {"spec": str(spec)}
    ext = branching.extinction_probability(spec)
    dim = branching.dimension_formula(spec)
    rec.update(extinction_q=f"{ext.q:.12g}", singleton=str(ext.singleton).lower(),
               dimension=f"{dim.value:.12g}", extinct=str(dim.extinct).lower())
    if spec.d == 1:
        q = parse_floats(cfg.task["q"]) if "q" in cfg.task else list(spec.p)
        prof = arithmetic.gamma_profile(spec.p, q)
        rec.update(prof.as_record())
        order = int(cfg.task.get("order", "1"))
        inter = arithmetic.difference_interval_decision(spec.p, q, order)
        meas = arithmetic.difference_measure_decision(spec.p, order)
        rec["interval_verdict"] = inter.verdict
        rec["measure_verdict"] = meas.verdict
        for i, c in enumerate(inter.caveats + meas.caveats):
            rec[f"caveat_{i}"] = c
        if "reported_shifted" in cfg.task and "reported_zero" in cfg.task:
            cmp = arithmetic.compare_reported_coefficients(
                spec.p, float(cfg.task["reported_shifted"]), float(cfg.task["reported_zero"]))
            rec.update({f"check_{k}": v for k, v in cmp.items()})
    elif spec.d == 2:
        cd = int(cfg.task["crossing_depth"]) if "crossing_depth" in cfg.task else None
        trials = cfg.trials if cd is not None else 0
        rec.update({f"stage_{k}": v for k, v in
                    branching.classify_dm_stage(spec, cd, trials, cfg.seed).as_record().items()})
    art.record("report.txt", rec)
    for k in ("Gamma", "interval_verdict", "measure_verdict", "stage_stage", "extinction_q", "dimension"):
        if k in rec:
            print(f"{k}={rec[k]}")


def task_simulate(cfg: ExperimentConfig, art: Artifacts) -> None:
    trees = _sample(cfg, cfg.depth)
    rows = ["trial,seed,level,count\n"]
    for i, t in enumerate(trees):
        rows += [f"{i},{t.seed},{n},{t.count(n)}\n" for n in range(cfg.depth + 1)]
    art.text("counts.csv", "".join(rows))
    first = trees[0]
    art.tree("tree.fpt", first)
    _render_tree(first, cfg.depth, art, "E")
    survived = sum(t.survives() for t in trees)
    print(f"trials={len(trees)} surviving={survived} first_count={first.count(cfg.depth)}")


def _render_tree(tree, n: int, art: Artifacts, stem: str) -> None:
    if tree.d == 2:
        art.raster(f"{stem}_{n}", render.cells_raster(tree.cells(n), n, tree.M))
    elif tree.d == 1:
        h = float(tree.M) ** -n
        x = tree.cells(n)[:, 0].astype(float) * h
        art.raster(f"{stem}_{n}", render.union_strip(IntervalUnion.from_arrays(x, x + h), 0.0, 1.0,
                                                     tree.M ** n))


def task_project(cfg: ExperimentConfig, art: Artifacts) -> None:
    if cfg.spec.d != 2:
        raise TaskError("projections need a planar model")
    kind = projection.parse_kind(cfg.task.get("kind", "orthogonal:0.7"))
    trees = _sample(cfg, cfg.depth)
    n = cfg.depth
    u = projection.project_level(trees[0], n, kind)
    art.text("projection.txt", f"# kind={kind.describe()}\n" + u.to_text())
    lo, hi = kind.range()
    art.raster(f"projection_{n}", render.union_strip(u, lo, hi, cfg.spec.M ** n))
    alive = [t for t in trees if t.survives()]
    first = int(cfg.task.get("first_level", "1"))
    levels = list(range(first, n + 1))
    if alive and len(levels) >= 4:
        counts = _pmap(lambda t: projection.box_counts_union(
            projection.project_level(t, n, kind), lo, cfg.spec.M, levels), alive, cfg.workers)
        est = projection.box_dimension_estimate(np.array(counts), levels, cfg.spec.M)
        art.text("dimension.csv", f"# slope={est.slope!r} stderr={est.stderr!r} surviving={len(alive)}\n"
                 "level,geometric_mean_count\n" + est.table())
        print(f"slope={est.slope:.6g} surviving={len(alive)}")
    if "J" in cfg.task:
        a, b = parse_floats(cfg.task["J"])
        per = projection.interval_persistence(cfg.spec, kind, (a, b), n, cfg.trials, cfg.seed)
        art.text("persistence.csv", "depth,frequency,survival\n" + "".join(
            f"{d},{f:.6g},{s:.6g}\n" for d, f, s in zip(per.depths, per.frequency, per.survival)))


def task_check(cfg: ExperimentConfig, art: Artifacts) -> None:
    spec = cfg.spec
    if spec.d != 2:
        raise TaskError("direction certificates need a planar model")
    r_max = int(cfg.task.get("r_max", "6"))
    grid = int(cfg.task.get("grid", "64"))
    ell = float(cfg.task.get("ell", "0.05"))
    if "range" in cfg.task:
        lo, hi = (_alpha(x) for x in cfg.task["range"].split(","))
        cover = conditions.certify_all_directions(spec, lo, hi, r_max, ell, grid)
        art.text("cover.csv", cover.as_table())
        rec = {"certified": str(cover.ok).lower(), "pieces": str(len(cover.pieces)),
               "covered_to": repr(cover.covered_to)}
        if not cover.ok:
            rec["failed_at"] = repr(cover.failed_at)
        art.record("report.txt", rec)
        print("certified" if cover.ok else f"no witness at alpha={cover.failed_at!r}")
        return
    alpha = _alpha(cfg.task.get("alpha", "pi/4"))
    b = conditions.check_condition_B(alpha, conditions.chord_function(alpha), spec)
    rec = {"alpha": repr(alpha), "condition_B_epsilon": repr(b.epsilon), "condition_B": str(b.ok).lower()}
    wit = conditions.search_condition_A(alpha, spec, r_max, grid)
    if wit is None:
        rec["condition_A"] = "no witness within budget"
    else:
        rec.update({f"A_{k}": v for k, v in wit.as_record().items()})
    art.record("report.txt", rec)
    print(f"condition_B={rec['condition_B']} condition_A={'found' if wit else 'none'}")


def task_slice(cfg: ExperimentConfig, art: Artifacts) -> None:
    depths = _depths(cfg, 1)
    eps = _alpha(cfg.task.get("eps", "pi/8"))
    rep = slices.max_slice_growth(cfg.spec, depths, eps, cfg.trials, cfg.seed, cfg.workers)
    art.text("slices.csv", rep.table())
    rec = {"exponent": repr(rep.exponent), "linear_slope": repr(rep.linear_slope),
           "surviving": str(rep.surviving), "lambda_fraction": repr(rep.lambda_fraction()),
           "transparent": str(rep.transparent).lower()}
    for i, note in enumerate(rep.notes):
        rec[f"note_{i}"] = note
    art.record("report.txt", rec)
    print(f"exponent={rep.exponent:.4g} surviving={rep.surviving}")


def task_sumset(cfg: ExperimentConfig, art: Artifacts) -> None:
    b = tuple(parse_floats(cfg.task.get("b", "1,1,1")))
    M = cfg.spec.M
    if "factors" in cfg.task:
        specs = tuple(homogeneous(1, M, x) for x in parse_floats(cfg.task["factors"]))
    elif cfg.spec.d == 1:
        specs = (cfg.spec,) * len(b)
    else:
        raise TaskError("sumset needs a one-dimensional model or task.factors")
    conf = sumset.SumsetConfig(specs, b, cfg.depth)
    art.record("verdicts.txt", sumset.condition_check_product(conf).as_record()
               if all(s.is_homogeneous for s in specs) else {"note": "inhomogeneous factors"})
    trial = None
    if "J" in cfg.task:
        J = tuple(parse_floats(cfg.task["J"]))
        trial = sumset.sum_interval_trial(conf, J, _depths(cfg, 1), cfg.trials, cfg.seed)
    chosen = None
    for trees in sumset.sample_factors(conf, cfg.depth, cfg.trials, cfg.seed):
        if all(t.survives() for t in trees):
            chosen = trees
            break
    if chosen is None:
        art.text("sumset.csv", "# no trial with all factors surviving\n")
        print("no surviving trial")
        return
    rep = sumset.sumset_report(conf, chosen, trial)
    art.text("sumset.csv", rep.table())
    art.text("sumset_intervals.txt", sumset.sumset_approximation(chosen, b, cfg.depth).to_text())
    print(f"rows={len(rep.rows)}")


def task_render(cfg: ExperimentConfig, art: Artifacts) -> None:
    if "tree" in cfg.task:
        try:
            tree = deserialize_tree(Path(cfg.task["tree"]).read_bytes())
        except OSError as exc:
            raise TaskError(str(exc)) from exc
    else:
        tree = sample_realization(cfg.spec, cfg.depth, cfg.seed)
    n = int(cfg.task.get("level", str(tree.depth)))
    if not 0 <= n <= tree.depth:
        raise TaskError(f"level {n} outside 0..{tree.depth}")
    _render_tree(tree, n, art, "E")
    if "kind" in cfg.task and tree.d == 2:
        kind = projection.parse_kind(cfg.task["kind"])
        lo, hi = kind.range()
        art.raster(f"projection_{n}", render.union_strip(projection.project_level(tree, n, kind),
                                                         lo, hi, tree.M ** n))
    print(f"rendered level {n}")


RUNNERS = {
    "analyze": task_analyze, "simulate": task_simulate, "project": task_project,
    "check": task_check, "slice": task_slice, "sumset": task_sumset, "render": task_render,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracperc", description="Fractal percolation experiments.")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", type=Path, help="INI file with [model], [run], [task]")
    ap.add_argument("--out", type=Path, default=Path("fracperc-out"), help="artifact directory")
    ap.add_argument("--d", dest="model_d", metavar="D", help="dimension")
    ap.add_argument("--M", dest="model_M", metavar="M", help="subdivisions per axis")
    ap.add_argument("--p", dest="model_p", metavar="P", help="one value or a comma-separated vector")
    ap.add_argument("--preset", dest="model_preset", metavar="PRESET", help='"homogeneous P" or "carpet P Q"')
    ap.add_argument("--depth", dest="run_depth", metavar="N")
    ap.add_argument("--depths", dest="run_depths", metavar="LIST", help="a..b or a comma list")
    ap.add_argument("--trials", dest="run_trials", metavar="T")
    ap.add_argument("--seed", dest="run_seed", metavar="S")
    ap.add_argument("--workers", dest="run_workers", metavar="W",
                    help="threads; never changes the output")
    ap.add_argument("--raster", dest="run_raster", choices=("png", "pgm"))
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override any config field, e.g. task.alpha=0.5")
    return ap


def _overrides(args) -> list[tuple[str, str, str]]:
    out = []
    for name, value in vars(args).items():
        if value is None:
            continue
        for sec in ("model", "run"):
            if name.startswith(sec + "_"):
                out.append((sec, name[len(sec) + 1:], str(value)))
    for item in args.set:
        key, sep, value = item.partition("=")
        sec, dot, field_ = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out.append((sec, field_, value))
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text = args.config.read_text() if args.config else None
        cfg = load_config(text, _overrides(args))
        cfg.raw.setdefault("task", {})["name"] = args.task
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        RUNNERS[args.task](cfg, Artifacts(args.out, cfg))
    except (TaskError, ValueError, RuntimeError) as exc:
        print(f"task error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
