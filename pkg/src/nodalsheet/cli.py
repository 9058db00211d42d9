"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 statistical-acceptance failure.  Every command writes a manifest.json
next to its artifacts, including on failure.  All randomness flows from
--seed; without it a seed is drawn from entropy and recorded.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys

import numpy as np

from . import experiments as ex
from . import kacrice, models, nodal, reporting, sampler, sheet

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_STATISTICAL = 4

_NUMERICAL_ERRORS = (
    sampler.EmbeddingNotPSDError,
    kacrice.DegenerateJointError,
    kacrice.NonPositiveGamma2Error,
    kacrice.QuadratureError,
    reporting.ReportValueError,
    FloatingPointError,
)


def _parse_ab(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity", "oo"):
        return math.inf
    return float(text)


def _parse_grid_spec(text: str) -> np.ndarray:
    """start:stop:step grid specification."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise reporting.ConfigError(f"bad grid spec {text!r}, want start:stop:step") from exc
    if step <= 0 or stop < start:
        raise reporting.ConfigError(f"bad grid spec {text!r}")
    n = int(round((stop - start) / step)) + 1
    return start + step * np.arange(n)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nodal-sheet",
        description="Nodal-measure simulation lab for stationary Gaussian fields",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=True, reps=False, partition=False):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out-dir", default=None)
        sp.add_argument("--model", default=None, choices=list(models.BUILTIN_MODELS))
        sp.add_argument("--dim", type=int, default=None, choices=[1, 2])
        if grid:
            sp.add_argument("--R", type=float, default=None)
            sp.add_argument("--h", type=float, default=None)
        if partition:
            sp.add_argument("--m", type=int, default=None)
        if reps:
            sp.add_argument("-N", "--reps", type=int, default=None)
            sp.add_argument("--workers", type=int, default=None)
            sp.add_argument("--self-test", action="store_true",
                            help="replace xi_R by true Brownian-sheet input")

    sp = sub.add_parser("simulate-field", help="dump one field sample as binary")
    common(sp)
    sp.add_argument("--out", default="field.bin")
    sp.add_argument("--spectral", type=int, default=0, metavar="M",
                    help="use the M-wave spectral sampler instead of embedding")

    sp = sub.add_parser("nodal-field", help="extract xi_R, dump CSV and heatmap")
    common(sp, partition=True)

    sp = sub.add_parser("gamma2", help="Kac densities and the variance constant")
    common(sp, grid=False)
    sp.add_argument("--r-max", type=float, default=None)

    sp = sub.add_parser("clt-test", help="fdd CLT experiment")
    common(sp, reps=True, partition=True)
    sp.add_argument("--heatmap-reps", type=int, default=0, metavar="K",
                    help="also render xi heatmaps for the first K replications")

    sp = sub.add_parser("sup-test", help="sup law over Yeh curves")
    common(sp, reps=True, partition=True)
    sp.add_argument("--a", type=_parse_ab, default=math.inf)
    sp.add_argument("--b", type=_parse_ab, default=math.inf)
    sp.add_argument("--sheet-n", type=int, default=None)

    sp = sub.add_parser("moment-scan", help="adjacent-rectangle moment scaling")
    common(sp, reps=True, partition=True)
    sp.add_argument("--levels", type=int, default=None)

    sp = sub.add_parser("sheet-sample", help="dump one Brownian sheet sample")
    common(sp, grid=False)
    sp.add_argument("--n", type=int, default=256)

    sp = sub.add_parser("sheet-sup", help="empirical sup CDF of sheet samples")
    common(sp, grid=False)
    sp.add_argument("--n", type=int, default=1024)
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--a", type=_parse_ab, default=math.inf)
    sp.add_argument("--b", type=_parse_ab, default=math.inf)
    sp.add_argument("--exact-curve", action="store_true",
                    help="sample the exact curve restriction law instead of a lattice")

    sp = sub.add_parser("yeh", help="closed-form sup distribution H(a,b,lambda)")
    sp.add_argument("--a", type=_parse_ab, required=True)
    sp.add_argument("--b", type=_parse_ab, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--lambda-grid", dest="lambda_grid", default=None,
                    metavar="START:STOP:STEP")
    sp.add_argument("--out-dir", default=None)

    sp = sub.add_parser("repro-figures", help="reproduce the illustration figures")
    common(sp, grid=False)
    sp.add_argument("--which", choices=["fig1", "fig2", "fig3"], required=True)
    sp.add_argument("--R", type=float, default=None,
                    help="restrict fig2 to one row (default rows 20, 50, 80)")

    return p


def _file_cfg(args) -> dict:
    cfg = getattr(args, "config", None)
    return reporting.parse_config_file(cfg) if cfg else {}


def _resolve_seed(args, fcfg) -> int:
    seed = reporting.resolve_option(args.seed, fcfg, "experiment.seed", None, int)
    if seed is None:
        seed = secrets.randbits(63)
    return int(seed)


def _resolve(args, fcfg, attr, key, default, cast):
    return reporting.resolve_option(getattr(args, attr, None), fcfg, key, default, cast)


def _experiment_config(args, fcfg, experiment: str, seed: int) -> ex.ExperimentConfig:
    d = _resolve(args, fcfg, "dim", "model.dim", 2, int)
    defaults_m = {1: 200, 2: 100}
    cfg = ex.ExperimentConfig(
        experiment=experiment,
        model=_resolve(args, fcfg, "model", "model.name", "bargmann-fock", str),
        d=d,
        R=_resolve(args, fcfg, "R", "grid.R", 20.0, float),
        h=_resolve(args, fcfg, "h", "grid.h", 0.05, float),
        m=_resolve(args, fcfg, "m", "grid.m", defaults_m[d], int),
        n_reps=_resolve(args, fcfg, "reps", "experiment.N", 200, int),
        base_seed=seed,
        workers=_resolve(args, fcfg, "workers", "experiment.workers", 0, int),
        self_test=bool(getattr(args, "self_test", False)),
    )
    return cfg


def _emit_report(report, out_dir, manifest) -> int:
    paths = reporting.write_report(report, out_dir)
    manifest.artifacts += list(paths.values())
    for q in report.quantities:
        marker = "PASS" if q.passed else "FAIL"
        print(f"[{marker}] {q.name}: estimate={q.estimate:.6g} "
              f"reference={q.reference:.6g} se={q.se:.3g}")
    return EXIT_OK if report.passed else EXIT_STATISTICAL


def cmd_simulate_field(args, fcfg, seed, out_dir, manifest) -> int:
    model_name = _resolve(args, fcfg, "model", "model.name", "bargmann-fock", str)
    d = _resolve(args, fcfg, "dim", "model.dim", 2, int)
    R = _resolve(args, fcfg, "R", "grid.R", 20.0, float)
    h = _resolve(args, fcfg, "h", "grid.h", 0.05, float)
    model = models.make_model(model_name, d)
    grid = sampler.GridSpec.regular(d, R, h)
    if args.spectral > 0:
        fs = sampler.sample_field_spectral(model, grid, args.spectral, seed)
    else:
        plan = sampler.plan_embedding(model, grid)
        fs = sampler.sample_field(plan, seed)
    out = os.path.join(out_dir, args.out)
    sampler.write_field(fs, out)
    manifest.artifacts.append(out)
    print(f"wrote {out} (n={grid.n}, d={d}, seed={seed})")
    return EXIT_OK


def cmd_nodal_field(args, fcfg, seed, out_dir, manifest) -> int:
    model_name = _resolve(args, fcfg, "model", "model.name", "bargmann-fock", str)
    d = _resolve(args, fcfg, "dim", "model.dim", 2, int)
    R = _resolve(args, fcfg, "R", "grid.R", 20.0, float)
    h = _resolve(args, fcfg, "h", "grid.h", 0.05, float)
    m = _resolve(args, fcfg, "m", "grid.m", 100 if d == 2 else 200, int)
    model = models.make_model(model_name, d)
    grid = sampler.GridSpec.regular(d, R, h)
    plan = sampler.plan_embedding(model, grid)
    fs = sampler.sample_field(plan, seed)
    inc = nodal.nodal_cells(fs, m)
    r1 = kacrice.rho1(model)
    g2 = kacrice.gamma2_cached(model).gamma2
    xi = nodal.center_and_rescale(inc, r1, g2, grid.R)
    csv_path = os.path.join(out_dir, "xi.csv")
    reporting.write_xi_csv(xi.values, csv_path)
    manifest.artifacts.append(csv_path)
    if d == 2:
        png = os.path.join(out_dir, "xi_heatmap.png")
        reporting.render_heatmap(xi.values, png)
        manifest.artifacts += [png, png + ".json"]
    print(f"xi(1,..,1) = {xi.corner():.6f} (rho1={r1:.6f}, gamma2={g2:.6f})")
    return EXIT_OK


def cmd_gamma2(args, fcfg, seed, out_dir, manifest) -> int:
    model_name = _resolve(args, fcfg, "model", "model.name", "bargmann-fock", str)
    d = _resolve(args, fcfg, "dim", "model.dim", 2, int)
    model = models.make_model(model_name, d)
    res = kacrice.gamma2(model, r_max=args.r_max)
    profile = kacrice.radial_profile(model, r_max=res.r_max)
    csv_path = os.path.join(out_dir, "radial_profile.csv")
    reporting.write_radial_profile_csv(profile, csv_path)
    summary = {
        "rho1": kacrice.rho1(model),
        "gamma2": res.gamma2,
        "integral_F2": res.integral_F2,
        "rho1_term": res.rho1_term,
        "r_max": res.r_max,
        "quad_error": res.quad_error,
    }
    json_path = os.path.join(out_dir, "gamma2.json")
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.artifacts += [csv_path, json_path]
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_clt_test(args, fcfg, seed, out_dir, manifest) -> int:
    cfg = _experiment_config(args, fcfg, "clt", seed)
    d = cfg.d
    if d == 2:
        cfg.t_points = ((1.0, 1.0), (0.5, 0.5))
        cfg.cov_pairs = (((0.5, 1.0), (1.0, 0.5)), ((0.5, 0.5), (1.0, 1.0)))
        cfg.phi_names = ("coscos",)
    else:
        cfg.t_points = ((1.0,), (0.5,))
        cfg.cov_pairs = (((0.5,), (1.0,)),)
        cfg.phi_names = ("cospix",)
    report = ex.run_clt_experiment(cfg)
    if args.heatmap_reps > 0 and d == 2:
        _render_rep_heatmaps(cfg, args.heatmap_reps, out_dir, manifest)
    return _emit_report(report, out_dir, manifest)


def _render_rep_heatmaps(cfg, count, out_dir, manifest) -> None:
    """Re-derive the first replications by seed and render their xi fields."""
    model = models.make_model(cfg.model, cfg.d)
    grid = sampler.GridSpec.regular(cfg.d, cfg.R, cfg.h)
    plan = sampler.plan_embedding(model, grid)
    r1 = kacrice.rho1(model)
    g2 = kacrice.gamma2_cached(model).gamma2
    rep = 0
    pair = 0
    while rep < count:
        seed = sampler.derive_seed(cfg.base_seed, pair)
        for values in sampler.sample_field_pair(plan, seed):
            if rep >= count:
                break
            fs = sampler.FieldSample(grid=grid, values=values, seed=seed,
                                     model_name=model.name)
            xi = nodal.center_and_rescale(nodal.nodal_cells(fs, cfg.m),
                                          r1, g2, grid.R)
            png = os.path.join(out_dir, f"xi_heatmap_{rep}.png")
            reporting.render_heatmap(xi.values, png)
            manifest.artifacts += [png, png + ".json"]
            rep += 1
        pair += 1


def cmd_sup_test(args, fcfg, seed, out_dir, manifest) -> int:
    cfg = _experiment_config(args, fcfg, "sup", seed)
    cfg.curves = ((args.a, args.b),)
    if args.sheet_n:
        cfg.sheet_n = args.sheet_n
    report = ex.run_sup_experiment(cfg)
    # CDF artifact for the first curve
    lam_grid = np.linspace(0.0, 3.0, 61)
    sups = np.array([v for _, _, name, v in report.samples if name.startswith("sup")])
    if sups.size:
        emp = np.searchsorted(np.sort(sups), lam_grid, side="right") / sups.size
        theo = sheet.yeh_H(args.a, args.b, lam_grid)
        cdf_path = os.path.join(out_dir, "sup_cdf.csv")
        reporting.write_cdf_csv(lam_grid, emp, theo, cdf_path)
        manifest.artifacts.append(cdf_path)
    return _emit_report(report, out_dir, manifest)


def cmd_moment_scan(args, fcfg, seed, out_dir, manifest) -> int:
    cfg = _experiment_config(args, fcfg, "moment-scan", seed)
    if args.levels:
        cfg.rect_levels = args.levels
    report = ex.run_moment_scan(cfg)
    return _emit_report(report, out_dir, manifest)


def cmd_sheet_sample(args, fcfg, seed, out_dir, manifest) -> int:
    d = _resolve(args, fcfg, "dim", "model.dim", 2, int)
    sh = sheet.sample_sheet(args.n, d, seed)
    csv_path = os.path.join(out_dir, "sheet.csv")
    reporting.write_xi_csv(sh.values, csv_path)
    manifest.artifacts.append(csv_path)
    if d == 2:
        png = os.path.join(out_dir, "sheet_heatmap.png")
        reporting.render_heatmap(sh.values, png)
        manifest.artifacts += [png, png + ".json"]
    print(f"W(1,..,1) = {float(sh.values[(-1,) * d]):.6f}")
    return EXIT_OK


def cmd_sheet_sup(args, fcfg, seed, out_dir, manifest) -> int:
    curve = sheet.CurveSpec(args.a, args.b)
    sups = np.empty(args.samples)
    if args.exact_curve:
        sups = sheet.curve_sup_samples(curve, args.n, args.samples, seed)
    else:
        for i in range(args.samples):
            sh = sheet.sample_sheet(args.n, 2, sampler.derive_seed(seed, i))
            sups[i] = sheet.sup_on_curve(sh.values, curve)
    lam_grid = np.linspace(0.0, 3.0, 121)
    emp = np.searchsorted(np.sort(sups), lam_grid, side="right") / sups.size
    theo = sheet.yeh_H(args.a, args.b, lam_grid)
    cdf_path = os.path.join(out_dir, "sup_cdf.csv")
    reporting.write_cdf_csv(lam_grid, emp, theo, cdf_path)
    manifest.artifacts.append(cdf_path)
    dist = float(np.max(np.abs(emp - theo)))
    print(f"sup-distance to H({args.a:g},{args.b:g},.) on the grid: {dist:.4f}")
    return EXIT_OK


def cmd_yeh(args, fcfg, seed, out_dir, manifest) -> int:
    if args.lam is None and args.lambda_grid is None:
        raise reporting.ConfigError("yeh needs --lambda or --lambda-grid")
    if args.lam is not None:
        h = sheet.yeh_H(args.a, args.b, args.lam)
        print(f"H({args.a:g},{args.b:g},{args.lam:g}) = {h:.12f}")
        return EXIT_OK
    lams = _parse_grid_spec(args.lambda_grid)
    hs = sheet.yeh_H(args.a, args.b, lams)
    path = os.path.join(out_dir, "yeh.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("lambda,H\n")
        for lam, h in zip(lams, hs):
            fh.write(f"{lam!r},{h!r}\n")
    manifest.artifacts.append(path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_repro_figures(args, fcfg, seed, out_dir, manifest) -> int:
    model = models.make_model("bargmann-fock", 2)
    if args.which == "fig1":
        sh = sheet.sample_sheet(512, 2, seed)
        png = os.path.join(out_dir, "fig1_sheet_heatmap.png")
        reporting.render_heatmap(sh.values, png)
        csv_path = os.path.join(out_dir, "fig1_sheet_surface.csv")
        reporting.write_xi_csv(sh.values, csv_path)
        manifest.artifacts += [png, png + ".json", csv_path]
        return EXIT_OK
    if args.which == "fig2":
        rows = [args.R] if args.R else [20.0, 50.0, 80.0]
        r1 = kacrice.rho1(model)
        g2 = kacrice.gamma2_cached(model).gamma2
        for R in rows:
            grid = sampler.GridSpec.regular(2, R, 0.05)
            plan = sampler.plan_embedding(model, grid)
            fs = sampler.sample_field(plan, sampler.derive_seed(seed, int(R)))
            m = max(40, int(round(R)))
            while (grid.n - 1) % m:
                m += 1
            inc = nodal.nodal_length_cells(fs, m)
            xi = nodal.center_and_rescale(inc, r1, g2, grid.R)
            tag = f"R{int(R)}"
            field_png = os.path.join(out_dir, f"fig2_{tag}_field.png")
            xi_png = os.path.join(out_dir, f"fig2_{tag}_xi.png")
            xi_csv = os.path.join(out_dir, f"fig2_{tag}_xi_surface.csv")
            reporting.render_heatmap(fs.values[::2, ::2], field_png)
            reporting.render_heatmap(xi.values, xi_png)
            reporting.write_xi_csv(xi.values, xi_csv)
            manifest.artifacts += [field_png, field_png + ".json",
                                   xi_png, xi_png + ".json", xi_csv]
        return EXIT_OK
    # fig3: the polygonal curves L(a,b)
    for a, b, tag in ((2.0, 3.0, "a2_b3"), (math.inf, 3.0, "ainf_b3"),
                      (2.0, math.inf, "a2_binf")):
        curve = sheet.CurveSpec(a, b)
        path = os.path.join(out_dir, f"fig3_curve_{tag}.csv")
        reporting.write_curve_csv(curve, path)
        manifest.artifacts.append(path)
    return EXIT_OK


_COMMANDS = {
    "simulate-field": cmd_simulate_field,
    "nodal-field": cmd_nodal_field,
    "gamma2": cmd_gamma2,
    "clt-test": cmd_clt_test,
    "sup-test": cmd_sup_test,
    "moment-scan": cmd_moment_scan,
    "sheet-sample": cmd_sheet_sample,
    "sheet-sup": cmd_sheet_sup,
    "yeh": cmd_yeh,
    "repro-figures": cmd_repro_figures,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        fcfg = _file_cfg(args)
        seed = _resolve_seed(args, fcfg) if hasattr(args, "seed") else 0
    except (reporting.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = getattr(args, "out_dir", None) or "."
    os.makedirs(out_dir, exist_ok=True)
    manifest = reporting.RunManifest(
        command=args.command,
        config={k: v for k, v in sorted(vars(args).items()) if k != "config"},
        base_seed=seed,
        started=reporting.utc_now(),
    )
    manifest.config = _jsonable(manifest.config)
    try:
        code = _COMMANDS[args.command](args, fcfg, seed, out_dir, manifest)
    except reporting.ConfigError as exc:
        manifest.error = str(exc)
        code = EXIT_CONFIG
        print(f"config error: {exc}", file=sys.stderr)
    except _NUMERICAL_ERRORS as exc:
        manifest.error = f"{type(exc).__name__}: {exc}"
        code = EXIT_NUMERICAL
        print(f"numerical failure: {exc}", file=sys.stderr)
    except ValueError as exc:
        manifest.error = f"{type(exc).__name__}: {exc}"
        code = EXIT_CONFIG
        print(f"config error: {exc}", file=sys.stderr)
    finally:
        manifest.finished = reporting.utc_now()
        manifest.write(out_dir)
    return code


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
