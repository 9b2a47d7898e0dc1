"""Acceptance suite: ten end-to-end criteria at their stated tolerances.

Each ``criterion_N`` returns ``(ok, detail)``.  Under pytest every criterion
prints one ``PASS``/``FAIL`` line (outside output capture) and then asserts.
Run directly with ``python3 tests/test_acceptance.py`` to print all ten
lines without pytest.
"""
from __future__ import annotations

import math
import sys
import time
from fractions import Fraction
from pathlib import Path
import tempfile

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (brute_D_n, brute_hyperplane_count, brute_slice_count,  # noqa: E402
                     polynomial_fixed_point)

from fracperc.arithmetic import (NO_INTERVAL_AS, POSITIVE_MEASURE_AS,  # noqa: E402
                                 compare_reported_coefficients, difference_interval_decision,
                                 difference_measure_decision, empirical_difference_set,
                                 gamma_profile)
from fracperc.branching import (classify_dm_stage, dimension_formula,  # noqa: E402
                                extinction_frequency, extinction_probability)
from fracperc.cli import main as cli_main  # noqa: E402
from fracperc.conditions import (certify_all_directions, check_condition_B,  # noqa: E402
                                 chord_function, enumerate_D_n, grid_recheck, search_condition_A)
from fracperc.model import carpet, homogeneous, validate_spec  # noqa: E402
from fracperc.projection import box_counts_cells, box_dimension_estimate  # noqa: E402
from fracperc.rng import trial_seeds  # noqa: E402
from fracperc.slices import (Line, count_slice, dimension_preservation_check,  # noqa: E402
                             max_slice_growth)
from fracperc.sumset import hyperplane_cell_count, sumset_approximation  # noqa: E402
from fracperc.tree import sample_many, sample_realization  # noqa: E402

PALIS = (0.52, 0.5, 0.72)


def criterion_1():
    t0 = time.perf_counter()
    prof = gamma_profile(PALIS, PALIS)
    inter = difference_interval_decision(PALIS, PALIS)
    meas = difference_measure_decision(PALIS)
    check = compare_reported_coefficients(PALIS, 0.941, 1.0388)
    elapsed = time.perf_counter() - t0
    ok = (abs(prof.Gamma - 1.0272) <= 1e-3 and inter.verdict == NO_INTERVAL_AS
          and meas.verdict == POSITIVE_MEASURE_AS and check["shifted_mismatch"] == "true"
          and elapsed < 1.0)
    log = ",".join(f"{k}={v}" for k, v in check.items())
    return ok, (f"Gamma={prof.Gamma:.6f} verdicts=({inter.verdict},{meas.verdict}) "
                f"time={elapsed:.3f}s coefficients[{log}]")


def criterion_2(trials: int = 160):
    spec = homogeneous(2, 3, 0.2)
    depth = 8
    target = math.log(1.8) / math.log(3)
    alive = [t for t in sample_many(spec, depth, trial_seeds(2, trials)) if t.survives()]
    levels = list(range(2, depth + 1))
    counts = np.array([box_counts_cells(t.cells(depth), depth, 3, levels) for t in alive])
    plane = box_dimension_estimate(counts, levels, 3)
    proj = dimension_preservation_check(spec, [math.pi / 4], depth, trials, seed=2).rows[0]
    ok = (len(alive) >= 100 and abs(plane.slope - target) <= 0.15
          and abs(proj.estimate - target) <= 0.15
          and dimension_formula(spec).value == pytest.approx(target))
    return ok, (f"surviving={len(alive)} box_slope={plane.slope:.4f} "
                f"projection_slope={proj.estimate:.4f} target={target:.4f}")


def criterion_3():
    spec = homogeneous(2, 2, 0.3)
    q = extinction_probability(spec).q
    oracle = polynomial_fixed_point([0.3] * 4)
    freq = extinction_frequency(spec, 30, 10_000, seed=3)
    ok = abs(q - oracle) <= 1e-8 and abs(freq - q) <= 0.02
    return ok, f"q={q:.10f} oracle={oracle:.10f} mc_frequency={freq:.4f}"


def criterion_4():
    got = {p: classify_dm_stage(homogeneous(2, 3, p)) for p in (0.10, 0.20, 0.40)}
    stages_ok = ([got[p].stage for p in (0.10, 0.20, 0.40)] == ["I", "II", "IV-or-higher"]
                 and got[0.40].interval_flag and not got[0.20].interval_flag)
    at = classify_dm_stage(carpet(0.5)).interval_flag
    above = classify_dm_stage(carpet(math.nextafter(0.5, 1.0))).interval_flag
    below = classify_dm_stage(carpet(math.nextafter(0.5, 0.0))).interval_flag
    ok = stages_ok and not at and above and not below
    return ok, (f"stages={[got[p].stage for p in (0.10, 0.20, 0.40)]} "
                f"carpet_flag(below,at,above)=({below},{at},{above})")


def criterion_5():
    t0 = time.perf_counter()
    alpha = math.pi / 4
    good = check_condition_B(alpha, chord_function(alpha), homogeneous(2, 2, 0.6))
    bad = check_condition_B(alpha, chord_function(alpha), homogeneous(2, 2, 0.5))
    elapsed = time.perf_counter() - t0
    ok = good.ok and good.epsilon >= 0.2 - 1e-9 and not bad.ok and elapsed < 1.0
    return ok, f"epsilon(0.6)={good.epsilon:.12f} ok(0.5)={bad.ok} time={elapsed:.3f}s"


def criterion_6():
    specs = [homogeneous(2, 3, 0.75), homogeneous(2, 3, 0.9), homogeneous(2, 3, 1.0), carpet(0.8, 0.5),
             homogeneous(2, 2, 0.8)]
    checked, worst = 0, math.inf
    for spec in specs:
        for alpha in np.linspace(0.1, math.pi / 2 - 0.1, 9):
            wit = search_condition_A(float(alpha), spec)
            if wit is None:
                continue
            low, _ = grid_recheck(wit, spec, npts=10_000)
            worst = min(worst, low - 2.0)
            checked += 1
    cover = certify_all_directions(homogeneous(2, 3, 0.75), 0.1, math.pi / 2 - 0.1)
    for piece in cover.pieces:
        low, _ = grid_recheck(piece.witness, homogeneous(2, 3, 0.75), npts=10_000)
        worst = min(worst, low - 2.0)
        checked += 1
    fail = certify_all_directions(homogeneous(2, 3, 0.3), 0.1, math.pi / 2 - 0.1)
    ok = worst >= -1e-9 and cover.ok and not fail.ok and fail.failed_at is not None
    return ok, (f"witnesses_rechecked={checked} worst_grid_margin={worst:.3g} "
                f"cover(0.75)={cover.ok} pieces={len(cover.pieces)} "
                f"cover(0.3)={fail.ok} failed_at={fail.failed_at}")


def criterion_7(trials: int = 110):
    rep = max_slice_growth(homogeneous(2, 3, 1 / 3), range(4, 10), math.pi / 8, trials, seed=7)
    frac = rep.lambda_fraction(1.0)
    ok = rep.surviving >= 100 and rep.exponent < 1.3 and frac >= 0.5
    return ok, (f"surviving={rep.surviving} max_counts={rep.max_counts} exponent={rep.exponent:.3f} "
                f"lambda_fraction={frac:.3f} ratio_spread={rep.ratio_spread:.2f}")


def criterion_8(instances: int = 100):
    rng = np.random.default_rng(8)
    mism = {"D_n": 0, "slice": 0, "hyperplane": 0}
    levels = [0.0, 0.3, 0.6, 1.0]
    for i in range(instances):
        n = i % 4
        p = [float(rng.choice(levels)) for _ in range(4)]
        spec = validate_spec(2, 2, p)
        alpha = float(rng.uniform(0.02, math.pi / 2 - 0.02))
        a, b = sorted(rng.uniform(0, 1, 2))
        x = float(rng.uniform(0, 1))
        if enumerate_D_n(x, (float(a), float(b)), alpha, n, spec) != brute_D_n(x, (a, b), alpha, n, p, 2):
            mism["D_n"] += 1

        tree = sample_realization(homogeneous(2, 2, float(rng.choice([0.5, 0.8, 1.0]))), 3, i)
        ns = 1 + i % 3
        if i % 2:
            # through two lattice corners, so corner contacts are exercised
            side = 2 ** ns
            pts = rng.integers(0, side + 1, (2, 2))
            if (pts[0] == pts[1]).all():
                pts[1] = (pts[0] + 1) % (side + 1)
            line = Line.through(*[(Fraction(int(u), side), Fraction(int(v), side)) for u, v in pts])
        else:
            line = Line(*(Fraction(int(v), 16) for v in rng.integers(-32, 33, 3)))
            if line.a == 0 and line.b == 0:
                line = Line(Fraction(1), Fraction(1), line.c)
        if count_slice(tree, ns, line) != brute_slice_count(tree, ns, line.a, line.b, line.c):
            mism["slice"] += 1

        d = 2 + i % 2
        trees = [sample_realization(homogeneous(1, 2, float(rng.choice([0.5, 0.8, 1.0]))), 3, 100 * i + k)
                 for k in range(d)]
        nh = i % 4
        av = Fraction(int(rng.integers(0, d * 2 ** nh + 1)), 2 ** nh) if i % 2 else \
            Fraction(int(rng.integers(-8, 8 * d + 9)), 8 * 3)
        if hyperplane_cell_count(trees, nh, av) != brute_hyperplane_count(trees, nh, av):
            mism["hyperplane"] += 1
    ok = not any(mism.values())
    return ok, f"instances={instances} mismatches={mism}"


def criterion_9(instances: int = 50):
    rng = np.random.default_rng(9)
    bad = 0
    for i in range(instances):
        M = int(rng.choice([2, 3, 4]))
        spec = homogeneous(1, M, float(rng.uniform(0.3, 1.0)))
        depth = int(rng.integers(1, 7))
        t1 = sample_realization(spec, depth, 2 * i)
        t2 = sample_realization(spec, depth, 2 * i + 1)
        shared = rng.random() < 0.3
        if shared:
            t2 = t1
        for n in range(depth + 1):
            u = sumset_approximation((t2, t1), (1, -1), n)
            v = empirical_difference_set(t1, t2, n).union
            if not (np.array_equal(u.lo, v.lo) and np.array_equal(u.hi, v.hi)):
                bad += 1
                break
    return bad == 0, f"instances={instances} differing={bad}"


CLI_RUNS = [
    ["analyze", "--p", "0.4", "--set", "task.crossing_depth=3", "--trials", "8"],
    ["analyze", "--d", "1", "--M", "3", "--p", "0.52,0.5,0.72"],
    ["simulate", "--p", "0.6", "--depth", "4", "--trials", "40"],
    ["project", "--p", "0.5", "--depth", "5", "--trials", "12", "--set", "task.J=0.4,0.5"],
    ["check", "--p", "0.75", "--set", "task.range=0.3,0.6"],
    ["slice", "--p", "0.3333333333333333", "--depths", "2..5", "--trials", "16"],
    ["sumset", "--d", "1", "--p", "0.5", "--depth", "4", "--trials", "30", "--set", "task.J=1.45,1.55"],
    ["render", "--p", "0.7", "--depth", "3", "--set", "task.kind=radial:2,0.5"],
]


def _files(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def criterion_10():
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        for j, args in enumerate(CLI_RUNS):
            outs = []
            for k, workers in enumerate(("1", "1", "4")):
                out = Path(tmp) / f"{j}-{k}"
                code = cli_main(args + ["--seed", "31", "--workers", workers, "--out", str(out)])
                outs.append((code, _files(out)))
            if not (outs[0] == outs[1] == outs[2] and outs[0][0] == 0 and outs[0][1]):
                differing.append(args[0])
    return not differing, f"tasks={len(CLI_RUNS)} differing={differing}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10]


def _report(k: int, ok: bool, detail: str) -> str:
    return f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + _report(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for k, fn in enumerate(CRITERIA, start=1):
        ok, detail = fn()
        print(_report(k, ok, detail), flush=True)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
