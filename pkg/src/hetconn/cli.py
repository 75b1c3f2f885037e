"""Command line front end: configs in, run directories out.

Every run writes a manifest.json carrying the embedded config, library
versions, every tolerance used, headline results, and sha256 checksums of
the emitted artifacts; CSV/TSV artifacts are plain text with %.17g floats
so reruns with the same config and seed are bit-identical.  Exit codes:
0 success, 2 solver stall, 3 config error, 4 checksum or schema failure
(verify), 5 failing equipartition (verify).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .counterexample import (
    CounterexampleWeight,
    DivergentTailError,
    crossing_lower_bound,
    nonexistence_report,
)
from .double_connection import (
    DoubleOptions,
    assemble_and_verify,
    audit_translation_speed,
    planar_effective_space,
    sin_example_space,
    solve_asymmetric,
    solve_symmetric,
)
from .geodesic import SolverOptions, minimize_k_length, remove_sigma_loops
from .heteroclinic import reparam_equipartition, verify_connection
from .potentials import (
    check_sti,
    double_well,
    make_weight,
    planar_two_well,
    refine_wells,
    triple_well,
)
from .regularity import second_difference_bound, uniform_bounds_audit

EXIT_OK = 0
EXIT_STALL = 2
EXIT_CONFIG = 3
EXIT_CHECKSUM = 4
EXIT_EQUIPARTITION = 5

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"config field 'schema_version' must be {SCHEMA_VERSION}, got {version!r}"
        )
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config field '{key}' is missing")
    return cfg[key]


def _build_potential(spec) -> object:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("config field 'potential' needs a 'name'")
    name = spec["name"]
    if name == "double_well":
        return double_well()
    if name == "triple_well":
        return triple_well()
    if name == "planar_two_well":
        return planar_two_well(
            beta=float(spec.get("beta", 1.0)), kappa=float(spec.get("kappa", 1.0))
        )
    raise ConfigError(f"unknown potential '{name}'")


def _write_text(path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _versions() -> dict:
    import scipy

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "hetconn": __version__,
    }


def _finish_manifest(out_dir, manifest, artifacts, t_start) -> None:
    manifest["artifacts"] = {
        name: _sha256(os.path.join(out_dir, name)) for name in artifacts
    }
    manifest["runtime_seconds"] = time.time() - t_start
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_table(path, delimiter=","):
    """(comments, column names, data array) from one of our CSV/TSV files."""
    comments, header, rows = [], None, []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line)
            elif header is None:
                header = line.split(delimiter)
            else:
                rows.append([float(v) for v in line.split(delimiter)])
    if header is None:
        raise ValueError(f"{path} has no header row")
    return comments, header, np.asarray(rows, dtype=float)


# ---------------------------------------------------------------------------
# connect


def cmd_connect(cfg: dict, out_dir: str, seed: int, verbose: bool) -> int:
    t_start = time.time()
    p = _build_potential(_require(cfg, "potential"))
    wells_raw = _require(cfg, "wells")
    try:
        wells = [np.atleast_1d(np.asarray(v, dtype=float)) for v in wells_raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'wells' is malformed: {exc}") from exc
    if len(wells) != 2:
        raise ConfigError("config field 'wells' must list exactly two points")
    if cfg.get("refine_wells", True):
        wells = list(refine_wells(p, wells))
    solver_cfg = cfg.get("solver", {})
    opts = SolverOptions(
        n_nodes=int(solver_cfg.get("n_nodes", 401)),
        max_iters=int(solver_cfg.get("max_iters", 2000)),
        grad_tol=float(solver_cfg.get("grad_tol", 1e-8)),
        via_points=tuple(
            np.asarray(v, dtype=float) for v in solver_cfg.get("via_points", [])
        ),
    )
    wspace = make_weight(p)
    curve, value, trace = minimize_k_length(wspace, wells[0], wells[1], opts)
    if verbose:
        print(f"descent: {trace.status} after {trace.n_iters} iterations, "
              f"k_length {value:.12g}")
    if trace.status == "stall":
        print("solver stalled before reaching the gradient tolerance",
              file=sys.stderr)
        return EXIT_STALL
    curve = remove_sigma_loops(curve, wspace)
    rep_cfg = cfg.get("reparam", {})
    conn = reparam_equipartition(
        curve,
        wspace,
        n_samples=int(rep_cfg.get("n_samples", 2001)),
        t_max=float(rep_cfg.get("t_max", 10.0)),
        resample=int(rep_cfg.get("resample", 4 * opts.n_nodes)),
        resample_eps=float(rep_cfg.get("resample_eps", 1e-9)),
    )
    report = verify_connection(conn, potential_like=p, wspace=wspace)
    sd = second_difference_bound(conn.curve, p.hessian_lower_bound)
    bounds = uniform_bounds_audit(conn.curve, wspace)
    warnings = []
    if len(p.wells) > 2:
        sti = check_sti(p, wells[0], wells[1])
        if not sti.ok:
            warnings.append(
                "strict triangle inequality margin "
                f"{sti.min_margin:.3g} at a third well; the minimizer may "
                "pass through it and split"
            )
    os.makedirs(out_dir, exist_ok=True)
    n_comp = conn.curve.nodes.shape[1]
    comp_names = ",".join(f"u{j + 1}" for j in range(n_comp))
    head = [
        f"# action={_fmt(conn.action)} dK={_fmt(conn.dk_value)} "
        f"defect={_fmt(conn.equipartition_defect)} window={_fmt(conn.window)}",
        "t," + comp_names,
    ]
    rows = [
        _fmt(t) + "," + ",".join(_fmt(v) for v in node)
        for t, node in zip(conn.curve.times, conn.curve.nodes)
    ]
    _write_text(os.path.join(out_dir, "curve.csv"), head + rows)
    _write_text(
        os.path.join(out_dir, "plot_components.tsv"),
        ["t\t" + comp_names.replace(",", "\t")]
        + ["\t".join([_fmt(t)] + [_fmt(v) for v in node])
           for t, node in zip(conn.curve.times, conn.curve.nodes)],
    )
    mids = 0.5 * (conn.curve.times[:-1] + conn.curve.times[1:])
    _write_text(
        os.path.join(out_dir, "plot_defect.tsv"),
        ["t\tequipartition_defect"]
        + ["\t".join([_fmt(t), _fmt(d)])
           for t, d in zip(mids, bounds.equip_profile)],
    )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "connect",
        "config": cfg,
        "seed": seed,
        "versions": _versions(),
        "tolerances": {
            "grad_tol": opts.grad_tol,
            "weight_floor": opts.weight_floor,
            "defect_tol": float(cfg.get("defect_tol", 1e-3)),
            "sti_margin_tol": 1e-3,
            "second_difference_constant": sd.c_constant,
        },
        "results": {
            "action": conn.action,
            "dk_value": conn.dk_value,
            "equipartition_defect": conn.equipartition_defect,
            "window": conn.window,
            "k_length_value": value,
            "solver_status": trace.status,
            "solver_iters": trace.n_iters,
            "action_gap": report.action_gap,
            "el_residual": report.el_residual,
            "second_difference_lhs": sd.lhs,
            "second_difference_rhs": sd.rhs,
            "second_difference_c_fitted": sd.c_fitted,
            "max_speed": bounds.max_speed,
            "max_w": bounds.max_w,
        },
        "warnings": warnings,
    }
    _finish_manifest(
        out_dir, manifest, ["curve.csv", "plot_components.tsv", "plot_defect.tsv"],
        t_start,
    )
    if verbose:
        print(f"wrote {out_dir}: action {conn.action:.9g}, "
              f"defect {conn.equipartition_defect:.3g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# double


def _build_double_space(cfg: dict):
    example = _require(cfg, "example")
    if example == "sin":
        return sin_example_space(m=int(cfg.get("m", 257)))
    if example == "planar":
        return planar_effective_space(
            beta=float(cfg.get("beta", 1.0)),
            kappa=float(cfg.get("kappa", 1.0)),
            s_max=float(cfg.get("s_max", 8.0)),
            m=int(cfg.get("m", 401)),
            symmetry=cfg.get("symmetry", "odd_first"),
            quotient=cfg.get("quotient", "none"),
        )
    raise ConfigError(f"unknown double example '{example}'")


def cmd_double(cfg: dict, out_dir: str, seed: int, mode: str | None,
               verbose: bool) -> int:
    t_start = time.time()
    mode = mode or cfg.get("mode", "sym")
    if mode not in ("sym", "asym"):
        raise ConfigError(f"mode must be 'sym' or 'asym', got {mode!r}")
    if mode == "asym" and cfg.get("quotient") != "translations":
        raise ConfigError(
            "config field 'quotient' must be 'translations' for mode=asym"
        )
    space = _build_double_space(cfg)
    opts_cfg = dict(cfg.get("opts", {}))
    allowed = set(DoubleOptions.__dataclass_fields__)
    unknown = set(opts_cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown opts keys: {sorted(unknown)}")
    opts = DoubleOptions(**opts_cfg)
    if verbose:
        print(f"solving {cfg['example']} example, mode={mode}")
    result = (
        solve_asymmetric(space, opts) if mode == "asym"
        else solve_symmetric(space, opts)
    )
    report = assemble_and_verify(result)
    if result.diagnostics.get("solver_status") == "stall":
        print("path descent stalled before the gradient tolerance",
              file=sys.stderr)
        return EXIT_STALL
    os.makedirs(out_dir, exist_ok=True)
    m, p_out, n = result.u.shape
    comp_names = ",".join(f"u{j + 1}" for j in range(n))
    head = [
        f"# energy={_fmt(result.energy)} residual_max={_fmt(report.residual_max)} "
        f"c_minus={_fmt(result.c_minus)} c_plus={_fmt(result.c_plus)}",
        "x1,x2," + comp_names,
    ]
    rows = []
    for i in range(m):
        for k in range(p_out):
            rows.append(
                _fmt(result.x1[i]) + "," + _fmt(result.x2[k]) + ","
                + ",".join(_fmt(v) for v in result.u[i, k])
            )
    _write_text(os.path.join(out_dir, "u.csv"), head + rows)
    artifacts = ["u.csv", "boundary_convergence.tsv"]
    gaps = []
    for k in range(p_out):
        col = space.grid_function(result.u[:, k, :])
        gaps.append((result.x2[k],
                     col.distance_l2(space.z_minus),
                     col.distance_l2(space.z_plus)))
    _write_text(
        os.path.join(out_dir, "boundary_convergence.tsv"),
        ["x2\tgap_minus_l2\tgap_plus_l2"]
        + ["\t".join(_fmt(v) for v in row) for row in gaps],
    )
    results = {
        "energy": result.energy,
        "energy_direct": report.energy_direct,
        "energy_path": report.energy_path,
        "residual_max": report.residual_max,
        "residual_l2": report.residual_l2,
        "equip_defect": report.equip_defect,
        "x2_gap_minus_l2": report.x2_gap_minus_l2,
        "x2_gap_plus_l2": report.x2_gap_plus_l2,
        "x1_funnel_violation": report.x1_funnel_violation,
        "c_minus": result.c_minus,
        "c_plus": result.c_plus,
        "outer_lk": list(result.diagnostics["outer_lk"]),
        "solver_status": result.diagnostics["solver_status"],
        "window": result.diagnostics["window"],
    }
    if mode == "asym":
        speed = audit_translation_speed(result)
        results["m_total_variation"] = result.diagnostics["m_total_variation"]
        results["translation_speed_c_fit"] = speed.c_fit
        results["translation_speed_max_ratio"] = speed.max_ratio
        _write_text(
            os.path.join(out_dir, "m_track.csv"),
            ["x2,m"]
            + [_fmt(t) + "," + _fmt(mv)
               for t, mv in zip(result.x2, result.m_track)],
        )
        artifacts.append("m_track.csv")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "double",
        "config": cfg,
        "mode": mode,
        "seed": seed,
        "versions": _versions(),
        "tolerances": {
            "defect_tol": float(cfg.get("defect_tol", 5e-2)),
            "residual_tol": float(cfg.get("residual_tol", 5e-2)),
            "eps0": opts.eps0,
            "c_frac": opts.c_frac,
            "inner_tol": opts.inner_tol,
            "polish_gtol": opts.polish_gtol,
            "residual_margin_cells": report.interior_margin,
            "energy_two_ways_rel": 1e-6,
        },
        "results": results,
        "warnings": [],
    }
    _finish_manifest(out_dir, manifest, artifacts, t_start)
    if verbose:
        print(f"wrote {out_dir}: energy {result.energy:.9g}, "
              f"residual {report.residual_max:.3g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# counterexample


def cmd_counterexample(cfg: dict, out_dir: str, seed: int, verbose: bool) -> int:
    t_start = time.time()
    gcfg = cfg.get("g", {"type": "power", "p": 2.0})
    if not isinstance(gcfg, dict) or gcfg.get("type") != "power":
        raise ConfigError("config field 'g' supports {'type': 'power', 'p': >1}")
    try:
        w = CounterexampleWeight(power=float(gcfg.get("p", 2.0)))
    except DivergentTailError as exc:
        raise ConfigError(str(exc)) from exc
    radii = tuple(float(r) for r in cfg.get("radii", (4.0, 8.0, 16.0, 32.0, 64.0)))
    report = nonexistence_report(
        w,
        radii=radii,
        n_leg=int(cfg.get("n_leg", 48)),
        max_iters=int(cfg.get("max_iters", 300)),
        n_candidates=int(cfg.get("n_max", 12)),
    )
    os.makedirs(out_dir, exist_ok=True)
    _write_text(
        os.path.join(out_dir, "candidates.tsv"),
        ["n\tx_n\tcandidate_length"]
        + ["\t".join([str(int(n)), _fmt(2.0 ** int(n)), _fmt(val)])
           for n, val in zip(report.candidate_ns, report.candidate_lengths)],
    )
    _write_text(
        os.path.join(out_dir, "boxed.tsv"),
        ["radius\tbest_length\tcrossing_bound"]
        + ["\t".join([_fmt(r), _fmt(length), _fmt(bound)])
           for r, length, bound in zip(report.radii, report.best_lengths,
                                       report.bounds)],
    )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "counterexample",
        "config": cfg,
        "seed": seed,
        "versions": _versions(),
        "tolerances": {
            "bound_slack": 1e-6,
            "candidate_tail_tol": 1e-2,
        },
        "results": {
            "g_infinity": w.g_infinity,
            "infimum": report.infimum,
            "final_candidate": float(report.candidate_lengths[-1]),
            "candidates_strictly_decreasing": bool(
                np.all(np.diff(report.candidate_lengths) < 0.0)
            ),
            "boxed_strictly_decreasing": report.strictly_decreasing,
            "boxed_above_bound": bool(
                np.all(report.best_lengths >= report.bounds - 1e-6)
            ),
            "statuses": report.statuses,
            "conclusion": report.conclusion,
        },
        "warnings": [
            "the bump is C^1 only at |y| = 1 (second derivative jumps); the "
            "construction tolerates this and the report notes it"
        ],
    }
    _finish_manifest(out_dir, manifest, ["candidates.tsv", "boxed.tsv"], t_start)
    if verbose:
        print(f"wrote {out_dir}: final candidate "
              f"{report.candidate_lengths[-1]:.6g} vs infimum {report.infimum:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _verify_connect(run_dir: str, manifest: dict, verbose: bool) -> int:
    comments, header, data = _read_table(os.path.join(run_dir, "curve.csv"))
    p = _build_potential(manifest["config"]["potential"])
    wspace = make_weight(p)
    times = data[:, 0]
    nodes = data[:, 1:]
    dts = np.diff(times)
    diffs = np.diff(nodes, axis=0)
    lens = np.sqrt(np.sum(wspace.space.coord_weights * diffs * diffs, axis=1))
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    kv = wspace.weight_at(mids)
    defect = float(np.max(np.abs(0.5 * (lens / dts) ** 2 - 0.5 * kv * kv)))
    tol = manifest["tolerances"]["defect_tol"]
    if verbose or defect > tol:
        print(f"equipartition defect {defect:.6g} (tolerance {tol:g})")
    if defect > tol:
        return EXIT_EQUIPARTITION
    lam = p.hessian_lower_bound
    from .metric import SampledCurve

    sd = second_difference_bound(SampledCurve(times=times, nodes=nodes), lam)
    if verbose:
        print(f"second-difference audit: lhs {sd.lhs:.6g} <= rhs {sd.rhs:.6g}: "
              f"{'ok' if sd.passed else 'FAIL'}")
    return EXIT_OK


def _verify_double(run_dir: str, manifest: dict, verbose: bool) -> int:
    comments, header, data = _read_table(os.path.join(run_dir, "u.csv"))
    space = _build_double_space(manifest["config"])
    x1 = np.unique(data[:, 0])
    x2 = np.unique(data[:, 1])
    n = data.shape[1] - 2
    u = data[:, 2:].reshape(x1.size, x2.size, n)
    dt = float(x2[1] - x2[0])
    h = space.h
    w1 = np.full(x1.size, h)
    w1[0] *= 0.5
    w1[-1] *= 0.5
    defect = 0.0
    for k in range(x2.size - 1):
        mid = 0.5 * (u[:, k, :] + u[:, k + 1, :])
        kinetic = 0.5 * np.sum(w1[:, None] * ((u[:, k + 1, :] - u[:, k, :]) / dt) ** 2)
        defect = max(defect, abs(kinetic - space.effective_potential(mid)))
    tol = manifest["tolerances"]["defect_tol"]
    if verbose or defect > tol:
        print(f"x2 equipartition defect {defect:.6g} (tolerance {tol:g})")
    if defect > tol:
        return EXIT_EQUIPARTITION
    return EXIT_OK


def _verify_counterexample(run_dir: str, manifest: dict, verbose: bool) -> int:
    _, _, cand = _read_table(os.path.join(run_dir, "candidates.tsv"), "\t")
    _, _, boxed = _read_table(os.path.join(run_dir, "boxed.tsv"), "\t")
    ok = bool(np.all(np.diff(cand[:, 2]) < 0.0))
    ok &= bool(np.all(boxed[:, 1] >= boxed[:, 2] - 1e-6))
    if verbose or not ok:
        print(f"counterexample invariants {'hold' if ok else 'VIOLATED'}")
    return EXIT_OK if ok else EXIT_EQUIPARTITION


def cmd_verify(run_dir: str, verbose: bool) -> int:
    manifest_path = os.path.join(run_dir, "manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot load manifest: {exc}", file=sys.stderr)
        return EXIT_CHECKSUM
    required = {"schema_version", "kind", "config", "artifacts", "results",
                "tolerances"}
    missing = required - set(manifest)
    if missing or manifest.get("schema_version") != SCHEMA_VERSION:
        print(f"manifest schema invalid (missing {sorted(missing)})",
              file=sys.stderr)
        return EXIT_CHECKSUM
    for name, expected in manifest["artifacts"].items():
        path = os.path.join(run_dir, name)
        if not os.path.exists(path):
            print(f"artifact {name} is missing", file=sys.stderr)
            return EXIT_CHECKSUM
        actual = _sha256(path)
        if actual != expected:
            print(f"artifact {name} checksum mismatch", file=sys.stderr)
            return EXIT_CHECKSUM
    if verbose:
        print(f"checksums ok for {len(manifest['artifacts'])} artifacts")
    kind = manifest["kind"]
    try:
        if kind == "connect":
            return _verify_connect(run_dir, manifest, verbose)
        if kind == "double":
            return _verify_double(run_dir, manifest, verbose)
        if kind == "counterexample":
            return _verify_counterexample(run_dir, manifest, verbose)
    except (OSError, ValueError) as exc:
        print(f"verification failed to re-run: {exc}", file=sys.stderr)
        return EXIT_CHECKSUM
    print(f"unknown run kind {kind!r}", file=sys.stderr)
    return EXIT_CHECKSUM


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hetconn",
        description="minimal-action connections in weighted metric spaces",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a JSON config")
    common.add_argument("--out", help="run directory for artifacts")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--mode", choices=("sym", "asym"),
                        help="double-connection mode (overrides config)")
    common.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("connect", parents=[common],
                   help="1D minimal connection between two wells")
    sub.add_parser("double", parents=[common],
                   help="2D field from a minimal path of 1D profiles")
    sub.add_parser("counterexample", parents=[common],
                   help="nonexistence demonstration for a vanishing-tail weight")
    verify = sub.add_parser("verify", parents=[common],
                            help="re-check a run directory")
    verify.add_argument("run_dir", nargs="?", help="run directory to verify")
    args = parser.parse_args(argv)
    os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    os.environ.setdefault("OPENBLAS_NUM_THREADS", str(args.threads))
    np.random.seed(args.seed)
    try:
        if args.command == "verify":
            run_dir = args.run_dir or args.out
            if not run_dir:
                print("verify needs a run directory (positional or --out)",
                      file=sys.stderr)
                return EXIT_CONFIG
            return cmd_verify(run_dir, args.verbose)
        if not args.config:
            print("--config is required", file=sys.stderr)
            return EXIT_CONFIG
        cfg = _load_config(args.config)
        out_dir = args.out or f"run_{args.command}"
        if args.command == "connect":
            return cmd_connect(cfg, out_dir, args.seed, args.verbose)
        if args.command == "double":
            return cmd_double(cfg, out_dir, args.seed, args.mode, args.verbose)
        if args.command == "counterexample":
            return cmd_counterexample(cfg, out_dir, args.seed, args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable command dispatch")


if __name__ == "__main__":
    sys.exit(main())
