"""Command-line front-end: JSON in, JSON/CSV out, exit code 0 iff every stage passes.

Each report echoes its full configuration, including the input
documents, so ``replay`` can rerun it without the original files and
compare bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time

import numpy as np

from .blender import HorizontalDisk, certify_blender, disk_intersect
from .boxes import Box
from .cycles import (
    CycleScenario, MixingScenario, default_cycle_scenario, default_mixing_scenario, verify_cycle, verify_mixing,
)
from .fiber import DomainEscape, SkewProduct
from .ifs import IFS, covering_check, hutchinson_attractor_run
from .invariant_graph import graph_error, graph_points
from .symbolic import words

# provenance of numeric fields: constant (from the input), measured (observed on orbits), bound (analytic)
PROVENANCE = {
    "constant": ["alpha", "nu", "budget", "delta", "delta_max", "lam", "beta", "beta_cs", "beta_cu", "lam_cs",
                 "lam_cu", "gamma", "gamma_hat_inv", "nu_alpha", "C", "C_psi", "disk_C", "tol", "resolution",
                 "depth", "seed", "n", "m", "k", "horizon", "pairs", "graph_depth", "holder_allowance"],
    "measured": ["margin", "min_margin", "backward_margin", "forward_margin", "cu_margin", "z_pulled_margin",
                 "last_step", "iterations", "V_measured", "A_extent", "measured_C", "graph_distance", "radius",
                 "x_image_margin", "y_image_margin", "fraction", "reached", "worst_length", "n0", "n0_max",
                 "witnessed", "local_gap_cs", "local_gap_cu", "cells"],
    "bound": ["lebesgue_lower_bound", "L", "V_bound", "V_radius", "pad", "error", "error_bound"],
}


class CliError(Exception):
    pass


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


def _numeric_fields(obj, out: set):
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                out.add(k)
            elif isinstance(v, list) and v and all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in v):
                out.add(k)
            _numeric_fields(v, out)
    elif isinstance(obj, list):
        for v in obj:
            _numeric_fields(v, out)


def provenance_of(result) -> dict:
    fields: set = set()
    _numeric_fields(result, fields)
    lookup = {name: tag for tag, names in PROVENANCE.items() for name in names}
    return {f: lookup.get(f, "measured") for f in sorted(fields)}


def dumps(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_atomic(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def parse_box(text: str) -> Box:
    try:
        return Box.parse(text)
    except ValueError as exc:
        raise CliError(f"--B {text!r}: {exc}") from None


def _skew(cfg: dict) -> SkewProduct:
    doc = dict(cfg["skew"])
    if cfg.get("nu") is not None:
        doc["nu"] = cfg["nu"]
    if cfg.get("alpha") is not None:
        doc["alpha"] = cfg["alpha"]
    try:
        return SkewProduct.from_dict(doc, check=False)
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"skew-product: {exc}") from None


def _check_config(cfg: dict):
    nu, alpha = cfg.get("nu"), cfg.get("alpha")
    if nu is not None and not 0 < nu < 1:
        raise CliError("--nu must lie in (0, 1)")
    if alpha is not None and not 0 < alpha <= 1:
        raise CliError("--alpha must lie in (0, 1]")
    if cfg.get("depth") is not None and cfg["depth"] < 1:
        raise CliError("--depth must be at least 1")
    if cfg.get("resolution", 1) < 1:
        raise CliError("--resolution must be at least 1")


# commands ---------------------------------------------------------------------


def run_attractor(cfg: dict) -> tuple[bool, dict]:
    phi = _skew(cfg)
    res = hutchinson_attractor_run(IFS.from_skew(phi), cfg["tol"], cfg["resolution"])
    threshold = cfg["tol"] * (1 - phi.beta) / phi.beta
    ok = res.last_step <= threshold
    boxes = [[b.lo.tolist(), b.hi.tolist()] for b in res.boxset.boxes()]
    return ok, {"iterations": res.iterations, "last_step": res.last_step, "tol": cfg["tol"], "boxes": boxes,
                "error_bound": cfg["tol"] + 2.0 ** -cfg["resolution"]}


def run_cover(cfg: dict) -> tuple[bool, dict]:
    phi = _skew(cfg)
    cert = covering_check(IFS.from_skew(phi), parse_box(cfg["B"]), cfg["resolution"], cfg["budget"])
    return cert.verified, cert.to_dict()


def run_graph(cfg: dict) -> tuple[bool, list]:
    phi = _skew(cfg)
    if not phi.beta < 1:
        raise CliError(f"invariant-graph needs contracting fibers (beta = {phi.beta})")
    d = cfg["words"]
    pts = graph_points(phi, d)
    err = graph_error(phi, d)
    rows = [["".join(str(s) + "," for s in w).rstrip(","), *p.tolist(), err] for w, p in zip(words(phi.k, d), pts)]
    return True, rows


def run_blender(cfg: dict) -> tuple[bool, dict]:
    phi = _skew(cfg)
    try:
        cert = certify_blender(phi, parse_box(cfg["B"]), cfg["budget"], cfg["disks"], cfg["depth"],
                               cfg["perturbations"], cfg["seed"], r=cfg["resolution"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return cert.passed, cert.to_dict()


def run_disk(cfg: dict) -> tuple[bool, dict]:
    phi = _skew(cfg)
    B = parse_box(cfg["B"])
    cover = covering_check(IFS.from_skew(phi), B, cfg["resolution"], cfg["budget"])
    try:
        H = HorizontalDisk.from_dict(cfg["disk"], phi.k, phi.nu)
        res = disk_intersect(phi, B, cover, H, cfg["depth"])
    except (ValueError, DomainEscape) as exc:
        return False, {"covering": cover.to_dict(), "success": False, "reason": str(exc)}
    out = res.to_dict()
    out.update(covering=cover.to_dict(), laws_hold=res.laws_hold, min_margin=res.min_margin)
    return res.success and res.laws_hold, out


def run_cycle(cfg: dict) -> tuple[bool, dict]:
    try:
        sc = CycleScenario.from_dict(cfg["scenario"])
        rep = verify_cycle(sc, cfg["budget"], cfg["depth"], cfg["perturbations"], cfg["seed"], cfg["resolution"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return rep.passed, rep.to_dict()


def run_mixing(cfg: dict) -> tuple[bool, dict]:
    try:
        sc = MixingScenario.from_dict(cfg["scenario"])
        rep = verify_mixing(sc, cfg["budget"], cfg["pairs"], cfg["horizon"], cfg["perturbations"], cfg["seed"],
                            cfg["r_cells"], cfg.get("n0_limit"))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return rep.passed, rep.to_dict()


RUNNERS = {
    "attractor": run_attractor, "cover-check": run_cover, "invariant-graph": run_graph,
    "blender-certify": run_blender, "disk-intersect": run_disk, "cycle-check": run_cycle,
    "mixing-check": run_mixing,
}


def render(cfg: dict) -> tuple[bool, str]:
    """Run a configuration and return (passed, report text)."""
    _check_config(cfg)
    ok, result = RUNNERS[cfg["command"]](cfg)
    if cfg["command"] == "invariant-graph":
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(_jsonable(cfg), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        dim = len(result[0]) - 2 if result else 0
        w.writerow(["past_word"] + [f"g{j}" for j in range(dim)] + ["error_bound"])
        for row in result:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return ok, buf.getvalue()
    report = {"config": cfg, "passed": bool(ok), "result": result, "provenance": provenance_of(_jsonable(result))}
    return ok, dumps(report)


def read_report_config(path: str) -> tuple[dict, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None
    if text.startswith("# config: "):
        head = text.split("\n", 1)[0][len("# config: "):]
        try:
            return json.loads(head), text
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}:1:{exc.colno + 10}: {exc.msg}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "config" not in doc:
        raise CliError(f"{path}: not a report (no config field)")
    return doc["config"], text


def replay(path: str) -> tuple[bool, str]:
    cfg, original = read_report_config(path)
    if cfg.get("command") not in RUNNERS:
        raise CliError(f"{path}: unknown command {cfg.get('command')!r}")
    ok, text = render(cfg)
    same = text == original
    orig_pass = None
    if not original.startswith("# config: "):
        orig_pass = json.loads(original).get("passed")
    summary = {"replayed": path, "byte_identical": same, "passed": ok, "original_passed": orig_pass}
    return same, dumps(summary)


# argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symblender", description="Symbolic blender computations.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    p.add_argument("--resolution", type=int, default=10, help="dyadic resolution exponent r")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    sub = p.add_subparsers(dest="command", required=True)

    def skewed(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--skew", required=True, help="skew-product JSON")
        return s

    s = skewed("attractor", "Hutchinson attractor as a box cover")
    s.add_argument("--tol", type=float, default=1e-3)
    s = skewed("cover-check", "certified covering check")
    s.add_argument("--B", required=True)
    s.add_argument("--budget", type=float, default=0.0)
    s = skewed("invariant-graph", "invariant graph values over past words (CSV)")
    s.add_argument("--words", type=int, default=6, help="past word length")
    s = skewed("blender-certify", "covering plus disk battery under perturbations")
    s.add_argument("--B", required=True)
    s.add_argument("--budget", type=float, default=0.005)
    s.add_argument("--depth", type=int, default=30)
    s.add_argument("--disks", type=int, default=20)
    s.add_argument("--perturbations", type=int, default=5)
    s = skewed("disk-intersect", "run the disk-intersection algorithm on one disk")
    s.add_argument("--B", required=True)
    s.add_argument("--disk", required=True, help="disk JSON {zeta, z, alpha, C, delta, kind}")
    s.add_argument("--budget", type=float, default=0.0)
    s.add_argument("--depth", type=int, default=30)
    s = sub.add_parser("cycle-check", help="verify a symbolic cycle scenario")
    s.add_argument("--scenario", default=None, help="scenario JSON (packaged default if omitted)")
    s.add_argument("--budget", type=float, default=0.005)
    s.add_argument("--depth", type=int, default=30)
    s.add_argument("--perturbations", type=int, default=20)
    s = sub.add_parser("mixing-check", help="verify robust topological mixing")
    s.add_argument("--scenario", default=None, help="scenario JSON (packaged default if omitted)")
    s.add_argument("--budget", type=float, default=0.005)
    s.add_argument("--pairs", type=int, default=100)
    s.add_argument("--horizon", type=int, default=40)
    s.add_argument("--perturbations", type=int, default=20)
    s.add_argument("--cells", type=int, default=5, dest="r_cells", help="fiber cell exponent for pairs and density")
    s.add_argument("--n0-limit", type=int, default=None, dest="n0_limit")
    s = sub.add_parser("replay", help="rerun a report and compare bytes")
    s.add_argument("report")
    return p


def config_from_args(a) -> dict:
    cfg = {k: v for k, v in vars(a).items() if k not in ("out", "skew", "scenario", "disk", "report")}
    if a.command in ("attractor", "cover-check", "invariant-graph", "blender-certify", "disk-intersect"):
        cfg["skew"] = load_json(a.skew)
    if a.command == "disk-intersect":
        cfg["disk"] = load_json(a.disk)
    if a.command == "cycle-check":
        cfg["scenario"] = load_json(a.scenario) if a.scenario else default_cycle_scenario().to_dict()
    if a.command == "mixing-check":
        cfg["scenario"] = load_json(a.scenario) if a.scenario else default_mixing_scenario().to_dict()
    return cfg


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if a.command == "replay":
            ok, text = replay(a.report)
        else:
            ok, text = render(config_from_args(a))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_atomic(a.out, text)
    print(f"{a.command}: {'pass' if ok else 'fail'} ({time.perf_counter() - t0:.2f} s)", file=sys.stderr)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
