"""Command-line front end.

    skaffine [--tol-scale S] [--jobs N] check   --config run.json
    skaffine [--tol-scale S] [--jobs N] realize --config run.json
    skaffine info --config run.json [--base 0,1]

Config (JSON, unknown keys rejected)::

    {
      "m": 1,
      "F": "z1^3/6",
      "base": [[0, 1]],                      # [re, im] per complex axis
      "plan": {"kind": "grid", "x": [-1, 1, 5], "v": [0.5, 2, 5]},
      # or {"kind": "random", "count": 50, "seed": 0, "box": {"x": [-1, 1], "v": [0.5, 2]}}
      # ranges may also be given per complex axis: "x": [[-1, 1, 5], [0, 1, 5]]
      "tolerances": {"conjugacy": 1e-6},     # optional overrides
      "out": {"report": "r.json", "csv": "s.csv", "obj": "s.obj"},
      "path_policy": "strict"                # or "crossing" (realize only)
    }

Exit status: 0 all residuals within tolerance; 1 some residual exceeds its
tolerance; 2 bad config or prepotential; 3 more than half of the plan is
degenerate (or, for ``info``, a degenerate base point); 4 output not writable.

``check`` screens plan nodes before evaluating residuals: a node within
``screen_margin`` (a ``tolerances`` key, default 0.1) of the degenerate locus,
measured by the smallest |eigenvalue| of Im Hess F relative to
``1 + ||Hess F||``, is excluded and counts towards the exit-3 rule.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, sphere
from .dsl import DomainError, ParseError, Prepotential
from .numerics import DegenerateError, FDConfig, signature
from .point import sk_point

__all__ = [
    "ConfigError", "RunConfig", "load_config", "parse_config", "plan_points",
    "default_tolerances", "run_check", "run_realize", "run_info", "main",
    "CLOSED_FORM", "FD_BASED",
]

CLOSED_FORM = (
    "lagrangian", "hermitian", "monge_ampere", "constancy_detG", "constancy_omega",
    "constancy_volume", "torsion_nabla", "torsion_nablaJ",
)
FD_BASED = (
    "conjugacy", "nabla_omega", "d_nabla_J", "nijenhuis", "curvature_nabla",
    "curvature_nablaJ", "shape", "shape_lambda",
)
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_IO = 0, 1, 2, 3, 4

_KEYS = {"m", "F", "base", "plan", "tolerances", "out", "path_policy"}
_REQUIRED = {"m", "F", "base", "plan"}


class ConfigError(ValueError):
    pass


def default_tolerances(scale: float = 1.0) -> dict[str, float]:
    tol = {k: 1e-9 for k in CLOSED_FORM}
    tol.update({k: 1e-5 for k in FD_BASED})
    return {k: v * scale for k, v in tol.items()}


@dataclass
class RunConfig:
    m: int
    F_text: str
    base: np.ndarray
    plan: dict
    tolerances: dict = field(default_factory=dict)
    out: dict = field(default_factory=dict)
    path_policy: str = "strict"
    raw: dict = field(default_factory=dict)

    @property
    def F(self) -> Prepotential:
        return Prepotential.from_text(self.F_text, self.m)


def _ranges(spec, m: int, width: int, what: str) -> list[tuple]:
    if not isinstance(spec, list) or not spec:
        raise ConfigError(f"{what} must be a list")
    per_axis = spec if isinstance(spec[0], list) else [spec] * m
    if len(per_axis) != m or any(not isinstance(r, list) or len(r) != width for r in per_axis):
        raise ConfigError(f"{what} needs {width} numbers (or one such list per complex axis)")
    try:
        out = [tuple(float(a) for a in r) for r in per_axis]
    except (TypeError, ValueError):
        raise ConfigError(f"{what} entries must be numbers") from None
    for r in out:
        if not r[1] > r[0]:
            raise ConfigError(f"{what}: need hi > lo")
        if width == 3 and (r[2] != int(r[2]) or r[2] < 2):
            raise ConfigError(f"{what}: resolution must be an integer >= 2")
    return out


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = _REQUIRED - set(raw)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    m = raw["m"]
    if not isinstance(m, int) or isinstance(m, bool) or not 1 <= m <= 4:
        raise ConfigError("m must be an integer in 1..4")
    if not isinstance(raw["F"], str):
        raise ConfigError("F must be a string")
    try:
        Prepotential.from_text(raw["F"], m)
    except ParseError as exc:
        raise ConfigError(f"prepotential: {exc}") from None
    base = raw["base"]
    if not isinstance(base, list) or len(base) != m or any(not isinstance(b, list) or len(b) != 2 for b in base):
        raise ConfigError("base must be a list of m [re, im] pairs")
    base = np.array([complex(float(a), float(b)) for a, b in base])
    plan = raw["plan"]
    if not isinstance(plan, dict) or plan.get("kind") not in ("grid", "random"):
        raise ConfigError('plan.kind must be "grid" or "random"')
    if plan["kind"] == "grid":
        if set(plan) != {"kind", "x", "v"}:
            raise ConfigError("grid plan keys are kind, x, v")
        _ranges(plan["x"], m, 3, "plan.x")
        _ranges(plan["v"], m, 3, "plan.v")
    else:
        if set(plan) != {"kind", "count", "seed", "box"}:
            raise ConfigError("random plan keys are kind, count, seed, box")
        if not isinstance(plan["count"], int) or plan["count"] < 1:
            raise ConfigError("plan.count must be a positive integer")
        if not isinstance(plan["seed"], int):
            raise ConfigError("plan.seed must be an integer")
        box = plan["box"]
        if not isinstance(box, dict) or set(box) != {"x", "v"}:
            raise ConfigError("plan.box needs keys x and v")
        _ranges(box["x"], m, 2, "plan.box.x")
        _ranges(box["v"], m, 2, "plan.box.v")
    tolerances = raw.get("tolerances", {})
    known = set(CLOSED_FORM) | set(FD_BASED) | {"screen_margin"}
    if not isinstance(tolerances, dict) or set(tolerances) - known:
        raise ConfigError(f"unknown tolerance names: {sorted(set(tolerances) - known)}")
    out = raw.get("out", {})
    if not isinstance(out, dict) or set(out) - {"report", "csv", "obj"}:
        raise ConfigError("out may only contain report, csv, obj")
    policy = raw.get("path_policy", "strict")
    if policy not in ("strict", "crossing"):
        raise ConfigError('path_policy must be "strict" or "crossing"')
    return RunConfig(m=m, F_text=raw["F"], base=base, plan=plan,
                     tolerances={k: float(v) for k, v in tolerances.items()},
                     out=out, path_policy=policy, raw=raw)


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return parse_config(raw)


def grid_spec(cfg: RunConfig) -> sphere.GridSpec:
    return sphere.GridSpec(_ranges(cfg.plan["x"], cfg.m, 3, "x"), _ranges(cfg.plan["v"], cfg.m, 3, "v"))


def plan_points(cfg: RunConfig) -> list[np.ndarray]:
    """Plan nodes in deterministic order (grid index order, or RNG order)."""
    m = cfg.m
    if cfg.plan["kind"] == "grid":
        grid = grid_spec(cfg)
        return [grid.node(idx)[:m] + 1j * grid.node(idx)[m:] for idx in np.ndindex(*grid.shape)]
    rng = np.random.default_rng(cfg.plan["seed"])
    bx = _ranges(cfg.plan["box"]["x"], m, 2, "x")
    bv = _ranges(cfg.plan["box"]["v"], m, 2, "v")
    lo = np.array([r[0] for r in bx + bv])
    hi = np.array([r[1] for r in bx + bv])
    pts = rng.uniform(lo, hi, size=(cfg.plan["count"], 2 * m))
    return [row[:m] + 1j * row[m:] for row in pts]


def _tolerances(cfg: RunConfig, tol_scale: float) -> dict[str, float]:
    tol = default_tolerances()
    tol.update({k: v for k, v in cfg.tolerances.items() if k != "screen_margin"})
    return {k: v * tol_scale for k, v in tol.items()}


SCREEN_MARGIN = 0.1


def screened(p, margin: float = SCREEN_MARGIN) -> bool:
    """Keep a node for residual checks: nondegenerate with a margin.

    The smallest ``|eig Im Hess F|`` must exceed ``margin * (1 + ||Hess F||_inf)``;
    ``margin = 0`` keeps every node that passes the plain nondegeneracy test.
    """
    if not p.nondegenerate:
        return False
    smallest = float(np.min(np.abs(np.linalg.eigvalsh(p.B))))
    return smallest > margin * (1.0 + np.linalg.norm(p.jet.hess, np.inf))


def _write(path, text: str):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _IOFailure(str(exc)) from None


class _IOFailure(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite(x):
    return x if x is not None and math.isfinite(x) else None


def run_check(cfg: RunConfig, tol_scale: float = 1.0, jobs: int = 1,
              fd: FDConfig = FDConfig()) -> tuple[dict, int]:
    """Screen the plan for degeneracy, run every residual, and write the JSON report."""
    F = cfg.F
    tol = _tolerances(cfg, tol_scale)
    zs = plan_points(cfg)
    points = [sk_point(F, z) for z in zs]
    margin = cfg.tolerances.get("screen_margin", SCREEN_MARGIN)
    good = [p for p in points if screened(p, margin)]
    counts = {
        "plan": len(points),
        "nondegenerate": len(good),
        "degenerate": sum(not p.nondegenerate for p in points),
        "near_degenerate": sum(p.nondegenerate for p in points) - len(good),
        "screen_margin": margin,
    }
    report = {
        "config": cfg.raw,
        "counts": counts,
        "fd": {"base_step": fd.base_step, "levels": fd.levels},
        "residuals": {},
    }
    if (counts["plan"] - len(good)) * 2 > counts["plan"]:
        report["status"] = "degenerate"
        report["message"] = "more than half of the sample plan is (near-)degenerate (det Im Hess F ~ 0)"
        code = EXIT_DEGENERATE
    else:
        rr = core.residual_sweep(F, [p.z for p in good], "fd", fd, tol, jobs)
        rr.update({"monge_ampere": max(sphere.ma_residual(p) for p in good)})
        if len(good) >= 2:
            c1, c2, c3 = sphere.constancy_certificates(good)
            rr.update({"constancy_detG": c1, "constancy_omega": c2, "constancy_volume": c3})
        report["residuals"] = {k: {**v, "max": _finite(v["max"])} for k, v in rr.to_dict().items()}
        report["status"] = "pass" if rr.ok else "fail"
        code = EXIT_OK if rr.ok else EXIT_FAIL
    if cfg.out.get("report"):
        _write(cfg.out["report"], _dump(report))
    return report, code


def _fmt(x: float) -> str:
    return "%.17g" % x


def csv_header(m: int) -> list[str]:
    cols = ["sample_index"]
    for i in range(1, m + 1):
        cols += [f"re_z{i}", f"im_z{i}"]
    cols += [f"x{i}" for i in range(1, m + 1)] + [f"y{i}" for i in range(1, m + 1)]
    cols += ["u", "detG"]
    n = 2 * m
    cols += [f"g_{a}{b}" if n < 10 else f"g_{a}_{b}" for a in range(1, n + 1) for b in range(a, n + 1)]
    return cols + ["flags"]


def csv_rows(samples, ma_tol: float) -> list[str]:
    rows = []
    for s in samples:
        vals = [str(s.index)]
        for zi in s.z:
            vals += [_fmt(zi.real), _fmt(zi.imag)]
        vals += [_fmt(v) for v in s.x] + [_fmt(v) for v in s.y] + [_fmt(s.u), _fmt(s.detG)]
        iu = np.triu_indices(s.G.shape[0])
        vals += [_fmt(v) for v in s.G[iu]]
        vals.append(str(1 if abs(s.detG - 1) > ma_tol else 0))  # bit 0: Monge-Ampere residual over tolerance
        rows.append(",".join(vals))
    return rows


def obj_text(imm: sphere.Immersion) -> str:
    """Wavefront OBJ of the graph ``(x, y, u)``; two triangles per complete grid cell."""
    nx, nv = imm.shape
    vid = {}
    lines = []
    for k, s in enumerate(imm.samples):
        vid[s.index] = k + 1
        lines.append(f"v {_fmt(s.x[0])} {_fmt(s.y[0])} {_fmt(s.u)}")
    for i in range(nx - 1):
        for j in range(nv - 1):
            corners = [i * nv + j, (i + 1) * nv + j, (i + 1) * nv + j + 1, i * nv + j + 1]
            if all(c in vid for c in corners):
                a, b, c, d = (vid[c] for c in corners)
                lines.append(f"f {a} {b} {c}")
                lines.append(f"f {a} {c} {d}")
    return "\n".join(lines) + "\n"


def _realize_random(F, cfg: RunConfig) -> sphere.Immersion:
    samples, skipped = [], {}
    strict = cfg.path_policy == "strict"
    for k, z in enumerate(plan_points(cfg)):
        p = sk_point(F, z, order=2)
        if not p.nondegenerate:
            skipped[k] = "degenerate"
            continue
        try:
            u = sphere.potential_u(p, cfg.base, strict=strict)
        except DomainError:
            skipped[k] = "unreachable"
            continue
        samples.append(sphere._sample(p, k, u))
    return sphere.Immersion(samples=samples, skipped=skipped, shape=(cfg.plan["count"],))


def run_realize(cfg: RunConfig, tol_scale: float = 1.0) -> tuple[dict, int]:
    """Write the immersion samples as CSV, and an OBJ mesh for ``m = 1`` grid plans."""
    F = cfg.F
    tol = _tolerances(cfg, tol_scale)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if cfg.plan["kind"] == "grid":
            imm = sphere.immerse(F, grid_spec(cfg), cfg.base, cfg.path_policy)
        else:
            imm = _realize_random(F, cfg)
    total = len(imm.samples) + len(imm.skipped)
    degenerate = sum(1 for r in imm.skipped.values() if r == "degenerate")
    report = {
        "config": cfg.raw,
        "counts": {"plan": total, "samples": len(imm.samples), "degenerate": degenerate,
                   "unreachable": len(imm.skipped) - degenerate},
        "warnings": [f"node {k} skipped: {r}" for k, r in imm.skipped.items()],
        "notes": [],
        "files": {},
    }
    if degenerate * 2 > total:
        report["status"] = "degenerate"
        code = EXIT_DEGENERATE
    else:
        ma = max((abs(s.detG - 1) for s in imm.samples), default=0.0)
        report["monge_ampere"] = {"max": ma, "tolerance": tol["monge_ampere"], "pass": ma <= tol["monge_ampere"]}
        report["status"] = "pass" if ma <= tol["monge_ampere"] else "fail"
        code = EXIT_OK if ma <= tol["monge_ampere"] else EXIT_FAIL
        if not cfg.out.get("csv"):
            raise ConfigError("realize needs out.csv")
        text = "\n".join([",".join(csv_header(cfg.m))] + csv_rows(imm.samples, tol["monge_ampere"])) + "\n"
        _write(cfg.out["csv"], text)
        report["files"]["csv"] = cfg.out["csv"]
        if cfg.m == 1 and cfg.plan["kind"] == "grid":
            if cfg.out.get("obj"):
                _write(cfg.out["obj"], obj_text(imm))
                report["files"]["obj"] = cfg.out["obj"]
            else:
                report["notes"].append("no out.obj given; mesh not written")
        elif cfg.m != 1:
            report["notes"].append(f"m = {cfg.m}: CSV only, OBJ meshes are written for m = 1")
        else:
            report["notes"].append("random plan: CSV only, OBJ meshes need a grid plan")
    if cfg.out.get("report"):
        _write(cfg.out["report"], _dump(report))
    return report, code


def run_info(cfg: RunConfig, base=None, fd: FDConfig = FDConfig()) -> tuple[dict, int]:
    """Signatures, curvature and congruence applicability at the base point."""
    F = cfg.F
    base = cfg.base if base is None else np.atleast_1d(np.asarray(base, dtype=complex))
    p = sk_point(F, base)
    info = {"m": cfg.m, "F": cfg.F_text, "base": [[float(b.real), float(b.imag)] for b in base]}
    if not p.nondegenerate:
        info["error"] = "degenerate base point"
        return info, EXIT_DEGENERATE
    info["signature_B"] = list(p.sigB)
    info["signature_G"] = list(signature(sphere.metric_G(p)))
    scalar, gauss = core.levi_civita_curvature(p, fd)
    info["scalar_curvature"] = scalar
    info["nondegenerate"] = True
    if gauss is not None:
        info["gauss_curvature"] = gauss
    cong = sphere.paraboloid_congruence(F, base)
    info["paraboloid_congruence"] = {"applicable": cong.applicable, "message": cong.message}
    return info, EXIT_OK


def _parse_base(text: str, m: int) -> np.ndarray:
    vals = [float(t) for t in text.split(",")]
    if len(vals) != 2 * m:
        raise ConfigError(f"--base needs {2 * m} comma-separated reals (re, im per axis)")
    return np.array([complex(vals[2 * k], vals[2 * k + 1]) for k in range(m)])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="skaffine", description=__doc__.splitlines()[0])
    parser.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for residual sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check", "realize", "info"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        if name == "info":
            sp.add_argument("--base", help="re1,im1,re2,im2,...")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.command == "check":
            report, code = run_check(cfg, args.tol_scale, max(1, args.jobs))
            if not cfg.out.get("report"):
                sys.stdout.write(_dump(report))
            else:
                print(f"{report['status']}: report written to {cfg.out['report']}")
        elif args.command == "realize":
            report, code = run_realize(cfg, args.tol_scale)
            print(f"{report['status']}: {report['counts']['samples']} samples, "
                  f"{len(report['warnings'])} warning(s)")
            for note in report["notes"]:
                print(f"note: {note}")
        else:
            base = _parse_base(args.base, cfg.m) if args.base else None
            info, code = run_info(cfg, base)
            for k, v in info.items():
                print(f"{k}: {v}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _IOFailure as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, DegenerateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    return code


if __name__ == "__main__":
    sys.exit(main())
