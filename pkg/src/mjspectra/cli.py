"""Command-line entry point: ``mjspectra <pipeline> --config FILE [--out DIR] [--jobs N]``.

Exit codes: 0 when every assertion of the pipeline passes, 2 for a config
error, 3 for a numerical failure or a failed assertion. Each run writes a
deterministic ``summary.json`` (config, versions, assertions, results), a
``timing.json`` with wall times, and CSV/JSON artifacts stamped with the
config hash. Sweeps write one sub-directory per axis value plus ``index.json``.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import PIPELINES, RunConfig, liouville_form, load_config, validate, with_value
from .errors import ConfigError, MJSpectraError, NumericalFailure
from .io import write_csv, write_json


def _versions() -> dict:
    import scipy

    from ._accel import BACKEND
    out = {"mjspectra": __version__, "python": platform.python_version(), "numpy": np.__version__,
           "scipy": scipy.__version__, "backend": BACKEND}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:
        out["numba"] = None
    return out


def _pmap(fn, items, jobs: int) -> list:
    """Ordered map, in a process pool when ``jobs > 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        futs = [pool.submit(fn, *it) for it in items]
        return [f.result() for f in futs]


class _Run:
    """Collects assertions, results and stage timings for one pipeline run."""

    def __init__(self, rc: RunConfig, out: Path, jobs: int):
        self.rc, self.out, self.jobs = rc, out, jobs
        self.assertions: dict[str, dict] = {}
        self.results: dict = {}
        self.files: list[str] = []
        self.timing: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except NumericalFailure as exc:
            if not getattr(exc, "stage", None):
                exc.stage = name
            raise
        finally:
            self.timing[name] = self.timing.get(name, 0.0) + time.perf_counter() - t0

    def check(self, name: str, passed: bool, value=None, tolerance=None):
        self.assertions[name] = {"passed": bool(passed), "value": value, "tolerance": tolerance}

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    @property
    def hash(self) -> str:
        return self.rc.hash


def _tag(h: float) -> str:
    return f"h{h:.6g}"


# --- pipelines ---------------------------------------------------------------

def _trace(run: _Run):
    from .flow import Section, integrate, poincare, rotation_number
    rc, p = run.rc, run.rc.params
    pt = np.array(p["x"] + p["p"], dtype=float)
    with run.stage("integrate"):
        traj = integrate(rc.model, pt, p["T"], p["tol"])
    traj.to_csv(run.path("trajectory.csv"), run.hash)
    st = traj.stats
    run.results.update({"steps": st["steps"], "rejected": st["rejected"], "energy_drift": st["energy_drift"]})
    run.check("energy_drift", traj.within_budget, st["energy_drift"], st["drift_budget"])
    if p["section"] is not None:
        s = p["section"]
        sec = Section(s["index"], s["level"], s["direction"])
        with run.stage("poincare"):
            sm = poincare(rc.model, sec, pt, s["n_returns"], tol=min(p["tol"], 1e-11))
        sm.to_csv(run.path("section.csv"), run.hash)
        run.results["section_residual"] = sm.residual
        run.check("section_residual", sm.residual <= 1e-10, sm.residual, 1e-10)
        if s["n_returns"] >= 100:
            rho, err = rotation_number(sm.points[:, 0])
            run.results["rotation_number"] = {"value": rho, "stderr": err}


def _coincidence_one(modelH, modelG, y, T, tol):
    from .mj import orbit_coincidence
    r = orbit_coincidence(modelH, modelG, y, T, tol)
    return [*y, r.distance, r.t_span, r.tau_span]


def _mjverify(run: _Run):
    from .action_angle import DiophantineParams, kam_membership, torus_chart
    from .mj import conjugacy_on_chart, random_points_on_level, verify_det_identity, verify_frequency_rescale
    rc, p = run.rc, run.rc.params
    c = p["coincidence"]
    rng = np.random.default_rng(rc.seed)
    with run.stage("coincidence"):
        pts = random_points_on_level(rc.model, p["energy"], c["n_points"], rng)
        rows = _pmap(_coincidence_one, [(rc.model, rc.model_G, y, c["T"], c["tol"]) for y in pts], run.jobs)
    rows = [[j, *r] for j, r in enumerate(rows)]
    write_csv(run.path("coincidence.csv"), ["j", "x1", "x2", "p1", "p2", "distance", "t_span", "tau_span"],
              rows, run.hash)
    dmax = max(r[5] for r in rows)
    run.results["max_distance"] = dmax
    run.check("orbit_coincidence", dmax <= c["max_distance"], dmax, c["max_distance"])
    t = p["torus"]
    if t is None:
        return
    L = liouville_form(rc.model_G, "model_G")
    with run.stage("torus"):
        chart = torus_chart(L, t["E"], t["c"])
        kam = kam_membership(chart.omega, DiophantineParams(**t["kam"]))
    run.results["omega_tilde"] = chart.omega.tolist()
    run.results["kam"] = kam.to_dict()
    run.check("diophantine", kam.passed, kam.score, t["kam"]["dioph_c"])
    with run.stage("conjugacy"):
        conj = conjugacy_on_chart(rc.model, rc.model_G, chart, grid=t["grid"], K_max=t["K_max"])
        det = verify_det_identity(conj.data)
    conj.data.to_json(run.path("conjugacy.json"), run.hash)
    run.results.update({"average_G": conj.data.average, "cohomological_residual": conj.data.residual,
                        "det_defect": det})
    run.check("det_identity", det <= t["det_tol"], det, t["det_tol"])
    with run.stage("frequency"):
        meas, pred, rel = verify_frequency_rescale(rc.model, rc.model_G, chart, t["T"], t["tol"], t["grid"])
    run.results.update({"omega_measured": meas.tolist(), "omega_predicted": pred.tolist(), "frequency_rel_err": rel})
    run.check("frequency_rescale", rel <= t["freq_tol"], rel, t["freq_tol"])


def _actions(run: _Run):
    from .action_angle import ATLAS_COLUMNS, DiophantineParams, atlas
    p = run.rc.params
    L = liouville_form(run.rc.model)
    with run.stage("atlas"):
        rows = atlas(L, p["E"], p["c"], DiophantineParams(**p["kam"]), with_ikam=p["ikam"])
    write_csv(run.path("atlas.csv"), ATLAS_COLUMNS, rows, run.hash)
    run.results["tori"] = len(rows)
    run.check("atlas_nonempty", len(rows) > 0, len(rows), 1)


def _predict(L, h, q):
    from .bsm import center_params, predict_spectrum
    maslov = tuple(q["maslov_index"]) if q["maslov_index"] is not None else None
    params = center_params(L, q["E"], q["c"], h, q["delta"], q["C0"], maslov)
    return predict_spectrum(L, params, (q["E"], q["c"]))


def _quantize(run: _Run):
    p = run.rc.params
    L = liouville_form(run.rc.model)
    per_h = {}
    for h in p["h"]:
        with run.stage(f"bsm_{_tag(h)}"):
            pred = _predict(L, h, p)
        pred.to_csv(run.path(f"bsm_{_tag(h)}.csv"), run.hash)
        per_h[str(h)] = {"points": len(pred.points), "dropped": len(pred.dropped), "C1": pred.C1}
        run.check(f"lattice_nonempty_{_tag(h)}", len(pred.points) > 0, len(pred.points), 1)
    run.results["per_h"] = per_h


def _window(L, h, E, hw, o, keep=False):
    from .oracle import assemble, auto_cutoff, solve_window
    M = o["M"] if o["M"] is not None else auto_cutoff(L, h, E + hw, o["pad"])
    prob = assemble(L, h, M)
    w = solve_window(prob, E, hw, method=o["method"], keep_vectors=keep, delta=o["delta"])
    return w, M


def _oracle_one(L, h, o):
    hw = o["C1"] * h ** o["delta"]
    return _window(L, h, o["E"], hw, o)


def _oracle(run: _Run):
    p = run.rc.params
    L = liouville_form(run.rc.model)
    with run.stage("solve"):
        res = _pmap(_oracle_one, [(L, h, p) for h in p["h"]], run.jobs)
    per_h = {}
    for h, (w, M) in zip(p["h"], res):
        w.to_csv(run.path(f"window_{_tag(h)}.csv"), run.hash)
        per_h[str(h)] = {"count": w.count, "M": M, "residual": w.residual, "method": w.method,
                         "halfwidth": w.halfwidth}
        run.check(f"residual_{_tag(h)}", w.residual <= 1e-8, w.residual, 1e-8)
    run.results["per_h"] = per_h


def _compare_one(L, h, q, o, margin):
    from .oracle import match_spectra
    pred = _predict(L, h, q)
    E = pred.energies
    hw = (1.0 + margin) * float(np.max(np.abs(E - o["E"]))) + 1e-9 if len(E) else o["C1"] * h ** o["delta"]
    w, M = _window(L, h, o["E"], hw, o)
    return pred, w, M, match_spectra(E, w)


def slope_fit(hs, errs) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def _compare(run: _Run):
    p = run.rc.params
    q, o = p["quantize"], p["oracle"]
    L = liouville_form(run.rc.model)
    with run.stage("compare"):
        res = _pmap(_compare_one, [(L, h, q, o, p["margin"]) for h in q["h"]], run.jobs)
    per_h, hs, errs = {}, [], []
    for h, (pred, w, M, rep) in zip(q["h"], res):
        pred.to_csv(run.path(f"bsm_{_tag(h)}.csv"), run.hash)
        w.to_csv(run.path(f"window_{_tag(h)}.csv"), run.hash)
        write_json(run.path(f"match_{_tag(h)}.json"), rep.to_dict(pred.energies, w.eigenvalues), run.hash)
        per_h[str(h)] = {"predictions": len(pred.points), "eigenvalues": w.count, "M": M,
                         "max_error": rep.max_error, "unmatched_predicted": rep.unmatched_predicted,
                         "C1_effective": pred.C1, "method": w.method}
        run.check(f"all_matched_{_tag(h)}", rep.unmatched_predicted == 0 and len(pred.points) > 0,
                  rep.unmatched_predicted, 0)
        hs.append(h)
        errs.append(rep.max_error)
    run.results["per_h"] = per_h
    run.results["max_error"] = max(errs)
    if len(hs) >= 2 and min(errs) > 1e-13:
        s = slope_fit(hs, errs)
        run.results["slope"] = s
        run.check("slope", s >= p["slope_min"], s, p["slope_min"])


def _gaps(run: _Run):
    from .oracle import gap_statistics
    p = run.rc.params
    L = liouville_form(run.rc.model)
    with run.stage("solve"):
        res = _pmap(_oracle_one, [(L, h, p) for h in p["h"]], run.jobs)
    per_h = {}
    for h, (w, M) in zip(p["h"], res):
        thr = p["threshold_const"] * h ** p["threshold_power"]
        g = gap_statistics(w, thr)
        w.to_csv(run.path(f"window_{_tag(h)}.csv"), run.hash)
        write_json(run.path(f"gaps_{_tag(h)}.json"), g.to_dict(), run.hash)
        per_h[str(h)] = {"count": w.count, "fraction": g.fraction, "threshold": thr, "M": M}
    order = sorted(p["h"], reverse=True)
    fr = [per_h[str(h)]["fraction"] for h in order]
    run.results["per_h"] = per_h
    run.results["trend"] = {"h": order, "fraction": fr}
    mono = all(b >= a for a, b in zip(fr, fr[1:]))
    run.check("nondecreasing", mono, fr, None)
    run.check("final_fraction", fr[-1] > p["min_fraction"], fr[-1], p["min_fraction"])


def _resonant_c(L, E, c0, ratio: Fraction) -> float:
    from scipy.optimize import newton

    from .action_angle import torus_chart

    def f(c):
        w = torus_chart(L, E, c, method="quadrature").omega
        return w[1] / w[0] - float(ratio)
    return float(newton(f, c0, x1=c0 + 1e-3, tol=1e-14, maxiter=60))


def _larmor(run: _Run):
    from .action_angle import torus_chart
    from .larmor import ReducedModel, fiber_frequency, reduced_spectrum, reeb_components
    rc, p = run.rc, run.rc.params
    if p["profile"] is not None:
        red = ReducedModel(0.0, p["profile"], True, 0)
    else:
        t = p["torus"]
        L = liouville_form(rc.model_G, "model_G")
        ratio = Fraction(*t["ratio"]) if t["ratio"] is not None else None
        c = t["c"]
        with run.stage("torus"):
            if t["solve_c"]:
                if ratio is None:
                    raise ConfigError("larmor.torus.ratio: required when solve_c is true")
                c = _resonant_c(L, t["E"], c, ratio)
            chart = torus_chart(L, t["E"], c, method="quadrature")
            red = fiber_frequency(rc.model, rc.model_G, chart, ratio, p["grid"])
        run.results["torus"] = {"E": t["E"], "c": c, "omega_tilde": chart.omega.tolist(),
                                "transform": [list(r) for r in red.transform]}
    write_csv(run.path("profile.csv"), ["psi2", "omega1"], red.profile_rows(), run.hash)
    with run.stage("reeb"):
        reeb = reeb_components(red.omega1)
    write_json(run.path("reeb.json"), reeb.to_dict(), run.hash)
    with run.stage("spectrum"):
        ladders = reduced_spectrum(red, p["h"], p["delta"], p["k1"], p["M"], p["count"])
    rows = [[k, n, lam] for k, lad in sorted(ladders.items()) for n, lam in enumerate(lad)]
    write_csv(run.path("ladders.csv"), ["k1", "n", "lambda"], rows, run.hash)
    wmin = float(red.omega1.grid_min())
    run.results.update({"omega1_min": wmin, "k1": sorted(ladders), "reeb": reeb.to_dict()})
    if wmin > 0 and len(ladders) > 1:
        ks = sorted(ladders)
        mono = all(np.all(ladders[b] >= ladders[a] - 1e-12) for a, b in zip(ks, ks[1:]))
        run.check("ladders_monotone_in_k1", mono, None, None)


def _katok(run: _Run):
    from .katok import katok_report
    p = run.rc.params
    with run.stage("katok"):
        rep = katok_report(p["alpha"], p["latitudes"], p["period_tol"], p["angle_tol"], p["det_tol"])
    write_json(run.path("katok_report.json"), rep.to_dict(), run.hash)
    write_csv(run.path("defects.csv"), ["q2", "defect"], rep.mj_defects, run.hash)
    tol = rep.tolerances
    values = {"periods": (max(rep.period_defects), tol["period"]), "angles": (max(rep.angle_defects), tol["angle"]),
              "det": (max(rep.det_defects), tol["det"]), "moduli": (rep.moduli_defect, tol["det"])}
    for k, v in rep.passed.items():
        run.check(k, v, *values[k])
    run.results.update({"periods": rep.periods, "angles": rep.angles, "period_defects": rep.period_defects,
                        "angle_defects": rep.angle_defects, "det_defects": rep.det_defects})
    eq = [d for q, d in rep.mj_defects if q == 0.0]
    if eq:
        run.check("equator_parallel", eq[0] <= 1e-10, eq[0], 1e-10)


_PIPELINES = {"trace": _trace, "mjverify": _mjverify, "actions": _actions, "quantize": _quantize,
              "oracle": _oracle, "compare": _compare, "gaps": _gaps, "larmor": _larmor, "katok": _katok}


# --- orchestration ---------------------------------------------------------------

def run(rc: RunConfig, out: Path, jobs: int = 1) -> int:
    """Execute one validated run; returns the exit code."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(yaml.safe_dump(rc.raw, sort_keys=True))
    r = _Run(rc, out, jobs)
    t0 = time.perf_counter()
    status, error, stage = "ok", None, None
    try:
        _PIPELINES[rc.pipeline](r)
    except ConfigError as exc:
        status, error = "config_error", str(exc)
    except NumericalFailure as exc:
        status, error, stage = "numerical_failure", f"{type(exc).__name__}: {exc}", getattr(exc, "stage", None)
    passed = status == "ok" and all(a["passed"] for a in r.assertions.values())
    summary = {"pipeline": rc.pipeline, "config": rc.raw, "config_hash": rc.hash, "seed": rc.seed,
               "versions": _versions(), "status": status, "error": error, "failed_stage": stage,
               "assertions": r.assertions, "passed": passed, "results": r.results, "files": sorted(r.files)}
    write_json(out / "summary.json", summary)
    write_json(out / "timing.json", {"wall_time_s": time.perf_counter() - t0, "stages": r.timing}, rc.hash)
    if status == "config_error":
        print(f"config error: {error}", file=sys.stderr)
        return 2
    if status != "ok":
        print(f"numerical failure in stage {stage!r}: {error}", file=sys.stderr)
        return 3
    for name, a in r.assertions.items():
        print(f"{'PASS' if a['passed'] else 'FAIL'} {name}: value={a['value']} tolerance={a['tolerance']}")
    return 0 if passed else 3


def _sweep_one(pipeline: str, raw: dict, out: str, jobs: int) -> int:
    try:
        return run(validate(pipeline, raw), Path(out), jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MJSpectraError as exc:   # isolate unexpected failures of a single point
        print(f"run failed: {exc}", file=sys.stderr)
        return 3


def sweep(rc: RunConfig, out: Path, jobs: int = 1) -> int:
    """One run per axis value (``run_000`` ...), merged into ``index.json`` in axis order."""
    par, values = rc.sweep
    base = {k: v for k, v in rc.raw.items() if k != "sweep"}
    out.mkdir(parents=True, exist_ok=True)
    items = [(rc.pipeline, with_value(base, par, v), str(out / f"run_{i:03d}"), 1) for i, v in enumerate(values)]
    codes = _pmap(_sweep_one, items, jobs)
    runs = []
    for i, (v, code) in enumerate(zip(values, codes)):
        entry = {"index": i, "value": v, "exit_code": code, "dir": f"run_{i:03d}"}
        sp = out / entry["dir"] / "summary.json"
        if sp.exists():
            s = json.loads(sp.read_text())
            entry.update({"passed": s["passed"], "status": s["status"], "results": s["results"]})
        runs.append(entry)
    index = {"pipeline": rc.pipeline, "parameter": par, "values": values, "config_hash": rc.hash, "runs": runs}
    errs = [r.get("results", {}).get("max_error") for r in runs]
    if rc.pipeline == "compare" and par.endswith(".h") and len(values) >= 2 and all(
            isinstance(e, float) and e > 1e-13 for e in errs):
        index["slope"] = slope_fit([float(v if not isinstance(v, list) else v[0]) for v in values], errs)
    write_json(out / "index.json", index)
    return max(codes) if codes else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mjspectra", description=__doc__.split("\n")[0])
    ap.add_argument("pipeline", choices=PIPELINES)
    ap.add_argument("--config", required=True, help="YAML config file")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps and h lists")
    args = ap.parse_args(argv)
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        rc = validate(args.pipeline, load_config(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    if rc.sweep is not None:
        return sweep(rc, out, args.jobs)
    return run(rc, out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
