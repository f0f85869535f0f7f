"""Command-line front end.

Model files
-----------
Plain ``key = value`` lines.  Blank lines and anything after ``#`` are
ignored.  Top-level keys are ``c`` (alias ``mu``), ``sigma``, ``q``,
``delta`` and ``S``.  Each ``[jump]`` header opens a new exponential jump
phase that takes ``lambda`` (intensity) and ``p`` (rate)::

    c = 2
    sigma = 1
    q = 4
    delta = 1.8
    S = 0.05

    [jump]
    lambda = 1
    p = 0.5

A ``.json`` file with the same top-level keys and ``"jumps": [{"lambda": ..,
"p": ..}, ...]`` is accepted too.

Outputs
-------
``scan``    CSV ``b,A_S,theta_S,g_S,r_S``
``verify``  CSV ``x,V,V1,V2,hjb_residual``
``solve``, ``simulate`` and ``compare`` write JSON.  CSV numbers carry nine
significant digits; JSON keeps full precision so ``check`` can rebuild the
barrier from the stored roots.

Exit status is 0 on success, 1 for invalid input and 2 for numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfig, ModelError, NumericalError, ValidationError, BracketFailure
from .levy_model import LevyModel, validate_assumptions
from .scale import ScalePair, boundary_values, build_scale_pair
from .simulate import SimConfig, compare_strategies, simulate_batch, simulate_paths, summarize
from .threshold import scan as scan_rows
from .threshold import solve_threshold
from .value import build_value, generator_residual, hjb_verify, value_derivatives

COMMANDS = ("solve", "scan", "verify", "simulate", "compare", "check")
SCAN_HEADER = ("b", "A_S", "theta_S", "g_S", "r_S")
VERIFY_HEADER = ("x", "V", "V1", "V2", "hjb_residual")
PATH_HEADER = ("path_id", "ruin_time", "class", "discounted_dividends")
SAMPLE_X = (0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0)
CHECK_TOL = 1e-10
VERIFY_SPAN = 10.0

_TOP_KEYS = {"c": "c", "mu": "c", "sigma": "sigma", "q": "q", "delta": "delta", "s": "S"}


def _number(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InvalidConfig(f"{where}: {text!r} is not a number") from None


def parse_model_text(text: str, source: str = "<config>") -> LevyModel:
    top: dict[str, float] = {}
    jumps: list[dict[str, float]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("["):
            if line.lower() != "[jump]":
                raise InvalidConfig(f"{where}: unknown section {line}")
            jumps.append({})
            section = jumps[-1]
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise InvalidConfig(f"{where}: expected 'key = value'")
        key = key.strip()
        value = _number(val.strip(), where)
        if section is None:
            name = _TOP_KEYS.get(key.lower())
            if name is None:
                raise InvalidConfig(f"{where}: unknown key {key!r}")
            if name in top:
                raise InvalidConfig(f"{where}: {key!r} given twice")
            top[name] = value
        else:
            k = key.lower()
            if k not in ("lambda", "p"):
                raise InvalidConfig(f"{where}: jump sections take 'lambda' and 'p', got {key!r}")
            if k in section:
                raise InvalidConfig(f"{where}: {key!r} given twice in one jump section")
            section[k] = value
    return _model_from_mapping(top, jumps, source)


def _model_from_mapping(top: dict, jumps: list[dict], source: str) -> LevyModel:
    missing = [k for k in ("c", "sigma", "q", "delta", "S") if k not in top]
    if missing:
        raise InvalidConfig(f"{source}: missing key(s) {', '.join(missing)}")
    phases = []
    for i, j in enumerate(jumps):
        if set(j) != {"lambda", "p"}:
            raise InvalidConfig(f"{source}: jump #{i + 1} needs exactly 'lambda' and 'p'")
        phases.append((float(j["lambda"]), float(j["p"])))
    return LevyModel(
        c=float(top["c"]),
        sigma=float(top["sigma"]),
        jumps=tuple(phases),
        q=float(top["q"]),
        delta=float(top["delta"]),
        S=float(top["S"]),
    )


def parse_model_json(data: dict, source: str = "<json>") -> LevyModel:
    if not isinstance(data, dict):
        raise InvalidConfig(f"{source}: expected a JSON object")
    top = {}
    for key, value in data.items():
        if key == "jumps":
            continue
        name = _TOP_KEYS.get(key.lower())
        if name is None:
            raise InvalidConfig(f"{source}: unknown key {key!r}")
        top[name] = value
    jumps = data.get("jumps", [])
    if not isinstance(jumps, list) or not all(isinstance(j, dict) for j in jumps):
        raise InvalidConfig(f"{source}: 'jumps' must be a list of objects")
    return _model_from_mapping(top, jumps, source)


def load_model(path: str | Path) -> LevyModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read model file {path}: {exc.strerror}") from None
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: invalid JSON ({exc})") from None
        return parse_model_json(data, str(path))
    return parse_model_text(text, str(path))


def model_to_dict(m: LevyModel) -> dict:
    return {
        "c": m.c,
        "sigma": m.sigma,
        "q": m.q,
        "delta": m.delta,
        "S": m.S,
        "jumps": [{"lambda": lam, "p": p} for lam, p in m.jumps],
    }


def _clean(obj):
    """Make ``obj`` strict-JSON safe: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


@dataclass
class RunConfig:
    command: str
    model_path: str
    output_path: str | None = None
    b_min: float = 0.0
    b_max: float | None = None
    steps: int | None = None
    paths: int = 100_000
    dt: float = 1e-3
    seed: int = 12345
    x0: float = 1.0
    thresholds: list[float] = field(default_factory=list)
    barrier: float | None = None
    workers: int = 1
    no_bridge: bool = False
    path_csv: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise InvalidConfig(f"unknown command {self.command!r}")
        if not Path(self.model_path).is_file():
            raise InvalidConfig(f"file not found: {self.model_path}")
        if self.b_min < 0:
            raise InvalidConfig("--b-min must be non-negative")
        if self.b_max is not None and self.b_max <= self.b_min:
            raise InvalidConfig("--b-max must exceed --b-min")
        if self.steps is not None and self.steps < 2:
            raise InvalidConfig("--steps must be at least 2")
        if self.barrier is not None and self.barrier < 0:
            raise InvalidConfig("--barrier must be non-negative")


@contextmanager
def _sink(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_json(obj, path: str | None):
    with _sink(path) as fh:
        json.dump(_clean(obj), fh, indent=2, allow_nan=False, ensure_ascii=False)
        fh.write("\n")


def _write_csv(header, rows, path: str | None):
    with _sink(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _prepare(m: LevyModel):
    report = validate_assumptions(m)
    if not report.ok:
        raise ModelError("model assumption violated: " + "; ".join(report.messages))
    sp = build_scale_pair(m)
    return report, sp


def solve_document(m: LevyModel) -> dict:
    report, sp = _prepare(m)
    bv = boundary_values(sp, m, check=True)
    sol = solve_threshold(sp, m)
    vf = build_value(sp, m, sol.b_star)
    samples = []
    for x in sorted(set(SAMPLE_X) | {sol.b_star}):
        v1, v2 = value_derivatives(vf, x)
        samples.append({"x": x, "V": vf(x), "V1": v1, "V2": v2})
    return {
        "model": model_to_dict(m),
        "assumptions": report.as_dict(),
        "scale": {**sp.as_dict(), "boundary_values": list(bv)},
        "threshold": sol.as_dict(),
        "b_star": sol.b_star,
        "A_at_b": sol.A_at_b,
        "value_samples": samples,
    }


def check_document(doc: dict, tol: float = CHECK_TOL) -> tuple[float, float]:
    """Rebuild the barrier from the roots stored in a solve document.

    Returns ``(stored, recomputed)``; raises when they differ by more than ``tol``.
    """
    try:
        m = parse_model_json(doc["model"], "solution.model")
        s = doc["scale"]
        sp = ScalePair.from_roots(s["roots_X"], s["residues_X"], s["roots_Y"], s["residues_Y"])
        stored = float(doc["threshold"]["b_star"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"not a solution document: {exc}") from None
    again = solve_threshold(sp, m, diagnostics=False).b_star
    if abs(again - stored) > tol:
        raise BracketFailure(f"stored b*={stored!r} but the stored roots give {again!r}")
    return stored, again


def _cmd_solve(cfg: RunConfig):
    _write_json(solve_document(load_model(cfg.model_path)), cfg.output_path)


def _cmd_check(cfg: RunConfig):
    try:
        doc = json.loads(Path(cfg.model_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{cfg.model_path}: invalid JSON ({exc})") from None
    stored, again = check_document(doc)
    print(f"b_star stored {_fmt(stored)} recomputed {_fmt(again)} diff {abs(stored - again):.3g}: ok", file=sys.stderr)


def _cmd_scan(cfg: RunConfig):
    m = load_model(cfg.model_path)
    _, sp = _prepare(m)
    b_max = 0.5 if cfg.b_max is None else cfg.b_max
    steps = 200 if cfg.steps is None else cfg.steps
    _write_csv(SCAN_HEADER, scan_rows(sp, m, np.linspace(cfg.b_min, b_max, steps)), cfg.output_path)


def _cmd_verify(cfg: RunConfig):
    m = load_model(cfg.model_path)
    _, sp = _prepare(m)
    b = solve_threshold(sp, m, diagnostics=False).b_star if cfg.barrier is None else cfg.barrier
    vf = build_value(sp, m, b)
    hi = b + VERIFY_SPAN if cfg.b_max is None else cfg.b_max
    lo = cfg.b_min if cfg.b_min > 0 else hi * 1e-6
    grid = np.linspace(lo, hi, 400 if cfg.steps is None else cfg.steps)
    report = hjb_verify(vf, grid)
    rows = []
    for x in grid:
        v1, v2 = value_derivatives(vf, x)
        rows.append((x, vf(x), v1, v2, generator_residual(vf, x)))
    _write_csv(VERIFY_HEADER, rows, cfg.output_path)
    status = "PASS" if report.ok else "FAIL"
    print(
        f"HJB {status} at b={_fmt(b)}: {len(report.gradient_violations)} gradient and "
        f"{len(report.generator_violations)} generator violation(s) on {grid.size} points",
        file=sys.stderr,
    )
    report.raise_if_failed()


def _sim_config(cfg: RunConfig, b: float) -> SimConfig:
    return SimConfig(
        x0=cfg.x0,
        b=b,
        n_paths=cfg.paths,
        dt=cfg.dt,
        seed=cfg.seed,
        bridge_correction=not cfg.no_bridge,
        workers=cfg.workers,
    )


def _cmd_simulate(cfg: RunConfig):
    m = load_model(cfg.model_path)
    _, sp = _prepare(m)
    b = solve_threshold(sp, m, diagnostics=False).b_star if cfg.barrier is None else cfg.barrier
    scfg = _sim_config(cfg, b)
    paths = simulate_paths(m, scfg)
    out = summarize(paths, m.S)
    doc = {"model": model_to_dict(m), "x0": cfg.x0, "b": b, "dt": cfg.dt, "seed": cfg.seed}
    doc["analytic_value"] = build_value(sp, m, b)(cfg.x0)
    doc["outcome"] = out.as_dict()
    _write_json(doc, cfg.output_path)
    if cfg.path_csv:
        rows = zip(range(paths.klass.size), paths.ruin_time, paths.klass, paths.dividends)
        _write_csv(PATH_HEADER, rows, cfg.path_csv)


def _cmd_compare(cfg: RunConfig):
    m = load_model(cfg.model_path)
    _, sp = _prepare(m)
    b_star = solve_threshold(sp, m, diagnostics=False).b_star
    ths = cfg.thresholds or [0.0, b_star, b_star + 0.5, b_star + 2.0, 0.5 * b_star]
    ref = b_star if cfg.barrier is None else cfg.barrier
    cmp = compare_strategies(m, cfg.x0, ths, _sim_config(cfg, ref), reference=ref)
    doc = {"model": model_to_dict(m), "x0": cfg.x0, "b_star": b_star, **cmp.as_dict(), "ranking": cmp.ranking}
    _write_json(doc, cfg.output_path)


_DISPATCH = {
    "solve": _cmd_solve,
    "scan": _cmd_scan,
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "check": _cmd_check,
}


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
        _DISPATCH[cfg.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors, so they share exit status 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _threshold_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad threshold list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="creepdiv", description="Optimal threshold dividends with a creeping reward at ruin.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="model file (key-value text or .json); for check, a solve JSON")
    ap.add_argument("--out", help="output file (default stdout)")
    ap.add_argument("--b-min", type=float, default=0.0)
    ap.add_argument("--b-max", type=float)
    ap.add_argument("--steps", type=int, help="grid points for scan (200) and verify (400)")
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--x0", type=float, default=1.0)
    ap.add_argument("--thresholds", type=_threshold_list, default=[])
    ap.add_argument("--barrier", type=float, help="use this barrier instead of the optimal one")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--no-bridge", action="store_true", help="disable the Brownian-bridge creeping test")
    ap.add_argument("--path-csv", help="simulate: also dump per-path results here")
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=ns.command,
        model_path=ns.config,
        output_path=ns.out,
        b_min=ns.b_min,
        b_max=ns.b_max,
        steps=ns.steps,
        paths=ns.paths,
        dt=ns.dt,
        seed=ns.seed,
        x0=ns.x0,
        thresholds=ns.thresholds,
        barrier=ns.barrier,
        workers=ns.workers,
        no_bridge=ns.no_bridge,
        path_csv=ns.path_csv,
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
