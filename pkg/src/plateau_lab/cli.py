"""Command line entry point: ``plateau-lab <command> [options]``.

Scenes are JSON files (or built-in fixtures named ``fixture:NAME``).  Reports
are JSON, traces CSV and meshes OFF; every artifact carries format version 1
and is written atomically.
"""

from __future__ import annotations

import os

_threads = os.environ.get("PLATEAU_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import csv  # noqa: E402
import io  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402
import tempfile  # noqa: E402
from dataclasses import dataclass, field  # noqa: E402
from fractions import Fraction  # noqa: E402
from pathlib import Path  # noqa: E402
from typing import Callable  # noqa: E402

import jsonschema  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .complex_core import CubicalComplex, build_grid  # noqa: E402
from .covering import Sphere, excluded_radii, intersection_reduction  # noqa: E402
from .energy import (  # noqa: E402
    Integrand,
    almgren_to_david,
    check_axiom_i,
    check_axiom_ii,
    hemisphere,
    oscillation_epsilon,
    plane_disk,
)
from .fixtures import (  # noqa: E402
    DiskTentacle,
    block_scene,
    diagonal_scene,
    ring_film_scene,
    two_point_scene,
)
from .homology import homology, mayer_vietoris_check  # noqa: E402
from .solver import MinimizationRun, Mode, minimize, refinement_study  # noqa: E402
from .spanning import Scene, is_nakauchi_competitor, is_reifenberg_competitor  # noqa: E402

__all__ = [
    "SceneError",
    "ExperimentConfig",
    "SCENE_SCHEMA",
    "parse_scene",
    "serialize_scene",
    "fixture_scene",
    "write_off",
    "run",
    "main",
]

COMMANDS = ("check", "minimize", "refine", "lemma24", "energy-audit", "sphere")


class SceneError(ValueError):
    pass


_cell = {"type": "array", "minItems": 1}
SCENE_SCHEMA = {
    "type": "object",
    "required": ["grid", "gamma", "competitor", "d"],
    "properties": {
        "format": {"const": 1},
        "grid": {
            "type": "object",
            "required": ["kind", "cells"],
            "properties": {
                "kind": {"enum": ["cubical", "simplicial"]},
                "n": {"type": "integer", "minimum": 1},
                "side": {"type": ["string", "number"]},
                "origin": {"type": "array", "items": {"type": ["string", "number"]}},
                "cells": {"type": "array", "items": _cell},
            },
        },
        "gamma": {"type": "array", "items": _cell},
        "competitor": {"type": "array", "items": _cell},
        "d": {"type": "integer", "minimum": 1},
        "coefficients": {"type": "string"},
        "L": {
            "oneOf": [
                {"const": "all"},
                {"type": "array", "items": {"type": "array", "items": {"type": ["integer", "string"]}}},
            ]
        },
        "confine": {"type": "array", "items": _cell},
        "integrand": {
            "type": "object",
            "required": ["i"],
            "properties": {"i": {"type": "string"}, "j": {"type": "string"}, "Lam": {"type": "number", "minimum": 1}},
        },
    },
}


def _json_path(path) -> str:
    out = "$"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _load_scene_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise SceneError(f"scene file {str(path)!r} does not exist")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    errors = sorted(jsonschema.Draft202012Validator(SCENE_SCHEMA).iter_errors(obj), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        raise SceneError(f"schema violation: {e.message} at {_json_path(e.path)}")
    return obj


def parse_scene(path) -> Scene:
    """Validated scene from a JSON file; every L generator must be a cycle of Γ."""
    obj = _load_scene_json(path)
    try:
        return Scene.from_json(obj)
    except (ValueError, KeyError, TypeError) as exc:
        raise SceneError(str(exc)) from None


def _scene_integrand(path) -> dict | None:
    return _load_scene_json(path).get("integrand")


def serialize_scene(scene: Scene, integrand: Integrand | None = None) -> str:
    obj = scene.to_json()
    if integrand is not None:
        src = integrand.to_json()
        obj["integrand"] = {"i": src["i"], "j": src["j"], "Lam": src["Lam"]}
    return json.dumps(obj, indent=1, sort_keys=True, default=str) + "\n"


def _whole_block(side) -> Scene:
    sc = block_scene(side=side)
    return sc.with_competitor(sc.grid.subcomplex(sc.grid.cells_of_dim(2)))


_FIXTURES: dict[str, tuple[Callable, Fraction]] = {
    "two-point": (lambda s: two_point_scene(s, "straight"), Fraction(1, 8)),
    "two-point-detour": (lambda s: two_point_scene(s, "detour"), Fraction(1, 8)),
    "block": (lambda s: block_scene(side=s), Fraction(1, 4)),
    "block-whole": (_whole_block, Fraction(1, 4)),
    "diagonal": (diagonal_scene, Fraction(1, 2)),
    "ring-film": (ring_film_scene, Fraction(1, 2)),
    "disk": (lambda s: DiskTentacle().scene(s), Fraction(1, 2)),
}


def fixture_scene(name: str, side=None) -> Scene:
    if name not in _FIXTURES:
        raise SceneError(f"unknown fixture {name!r}; known: {', '.join(sorted(_FIXTURES))}")
    factory, default = _FIXTURES[name]
    return factory(Fraction(side) if side is not None else default)


def write_off(scene: Scene) -> str:
    """OFF mesh of the d-cells of the competitor (edges as 2-gons, squares as quads)."""
    K, d = scene.grid, scene.d
    cells = scene.competitor.cells_of_dim(d)
    corners = []
    for cell in cells:
        lo, _ = K.cell_box(cell)
        s = float(K.side)
        axes = cell[1]
        if d == 1:
            offs = [(), (axes[0],)]
        elif d == 2:
            offs = [(), (axes[0],), (axes[0], axes[1]), (axes[1],)]
        else:
            offs = [()]
        pts = []
        for off in offs:
            p = lo.copy()
            for a in off:
                p[a] += s
            pts.append(tuple(float(v) for v in p))
        corners.append(pts)
    verts = sorted({p for pts in corners for p in pts})
    index = {p: i for i, p in enumerate(verts)}
    lines = ["OFF", f"# format 1 d={d}", f"{len(verts)} {len(corners)} 0"]
    for p in verts:
        q = list(p) + [0.0] * (3 - len(p))
        lines.append(" ".join(repr(v) for v in q[: max(3, len(p))]))
    for pts in corners:
        lines.append(" ".join([str(len(pts))] + [str(index[p]) for p in pts]))
    return "\n".join(lines) + "\n"


# --- configuration and commands ----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    command: str
    scene: str | None = None
    seed: int = 0
    budget: int = 5000
    side: Fraction | None = None
    mode: str = "free"
    out: Path | None = None
    tolerances: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.mode not in ("free", "fixed"):
            raise ValueError("mode must be free or fixed")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=str) + "\n"


def _load(cfg: ExperimentConfig) -> tuple[Scene, dict | None]:
    if not cfg.scene:
        raise SceneError("--scene is required for this command")
    if cfg.scene.startswith("fixture:"):
        return fixture_scene(cfg.scene.split(":", 1)[1], cfg.side), None
    return parse_scene(cfg.scene), _scene_integrand(cfg.scene)


def _integrand(cfg: ExperimentConfig, n: int, d: int, from_scene: dict | None) -> Integrand:
    expr = cfg.extra.get("integrand")
    if expr:
        return Integrand.from_expressions(expr, cfg.extra.get("j"), n=n, d=d, Lam=float(cfg.extra.get("lam") or 1.0))
    if from_scene:
        return Integrand.from_expressions(from_scene["i"], from_scene.get("j"), n=n, d=d, Lam=float(from_scene.get("Lam", 1.0)))
    return Integrand.constant(1.0, n=n, d=d)


def _cmd_check(cfg: ExperimentConfig, files: dict) -> dict:
    sc, _ = _load(cfg)
    k = sc.d - 1
    return {
        "command": "check",
        "d": sc.d,
        "coefficients": str(sc.G),
        "reifenberg": is_reifenberg_competitor(sc),
        "nakauchi": is_nakauchi_competitor(sc),
        "mayer_vietoris": mayer_vietoris_check(sc.competitor, sc.gamma, k, sc.G),
        "homology": {
            "gamma": homology(sc.gamma, k, sc.G).group_string(),
            "competitor": homology(sc.competitor, k, sc.G).group_string(),
            "union": homology(sc.union, k, sc.G).group_string(),
        },
        "L_generators": len(sc.L_cycles),
    }


def _trace_csv(run: MinimizationRun) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "energy", "move", "cells"])
    for i, t in enumerate(run.trace):
        w.writerow([i, repr(t.energy), t.move or "start", len(t.scene.competitor.cells_of_dim(t.scene.d))])
    return buf.getvalue()


def _cmd_minimize(cfg: ExperimentConfig, files: dict) -> dict:
    sc, isrc = _load(cfg)
    ig = _integrand(cfg, sc.grid.n, sc.d, isrc)
    run = MinimizationRun(sc, Mode(cfg.mode), ig)
    best = minimize(run, cfg.budget, cfg.seed)
    files["trace.csv"] = _trace_csv(run)
    files["final.off"] = write_off(best)
    every = int(cfg.extra.get("off_every") or 0)
    if every > 0:
        for i, t in enumerate(run.trace):
            if i % every == 0:
                files[f"iterate_{i:04d}.off"] = write_off(t.scene)
    files["final_scene.json"] = serialize_scene(best)
    return {
        "command": "minimize",
        "mode": cfg.mode,
        "seed": cfg.seed,
        "budget": cfg.budget,
        "initial_energy": run.trace[0].energy,
        "energy": run.best_energy,
        "accepted": run.accepted,
        "evaluated": run.evaluated,
        "cells": len(best.competitor.cells_of_dim(best.d)),
        "reifenberg": is_reifenberg_competitor(best),
    }


def _cmd_refine(cfg: ExperimentConfig, files: dict) -> dict:
    if not cfg.scene or not cfg.scene.startswith("fixture:"):
        raise SceneError("refine needs a fixture scene (fixture:NAME)")
    name = cfg.scene.split(":", 1)[1]
    fixture_scene(name)  # validates the name
    finest = cfg.side or Fraction(1, 8)
    sides = [Fraction(1, 2)]
    while sides[-1] > finest:
        sides.append(sides[-1] / 2)
    if sides[-1] != finest:
        raise ValueError("--side must be 1/2^k for refine")
    probe = fixture_scene(name, sides[0])
    ig = _integrand(cfg, probe.grid.n, probe.d, None)
    study = refinement_study(lambda s: fixture_scene(name, s), ig, sides, Mode(cfg.mode), cfg.budget, cfg.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["side", "energy"])
    for s, e in zip(study.sides, study.minima):
        w.writerow([str(s), repr(e)])
    files["refine.csv"] = buf.getvalue()
    files["finest.off"] = write_off(study.runs[-1].best)
    nonincreasing = all(b <= a for a, b in zip(study.minima, study.minima[1:]))
    return {
        "command": "refine",
        "sides": [str(s) for s in study.sides],
        "minima": study.minima,
        "nonincreasing": nonincreasing,
    }


def _cmd_lemma24(cfg: ExperimentConfig, files: dict) -> dict:
    from .lemma24 import run_lemma24

    k = int(cfg.extra.get("k") or 8)
    rep = run_lemma24(DiskTentacle(k=k), seed=cfg.seed)
    return {"command": "lemma24", "k": k, **rep.to_json()}


def _cmd_energy_audit(cfg: ExperimentConfig, files: dict) -> dict:
    n = int(cfg.extra.get("n") or 3)
    d = int(cfg.extra.get("d") or 2)
    isrc = None
    if cfg.scene:
        sc, isrc = _load(cfg)
        n, d = sc.grid.n, sc.d
    ig = _integrand(cfg, n, d, isrc)
    c = float(cfg.extra.get("c") or 1.0)
    K = build_grid([(0, 1)] * n, Fraction(1, 4))
    cells = K.subcomplex([c_ for c_ in K.cells_of_dim(d) if c_[1] == tuple(range(d))])
    fixtures = [cells]
    V = np.eye(n)[:, :d]
    if d <= 2:
        fixtures.append(plane_disk(np.full(n, 0.5), V, 0.25))
    ax1 = check_axiom_i(ig, fixtures)
    report = {
        "command": "energy-audit",
        "n": n,
        "d": d,
        "axiom_i": {"ok": ax1.ok, "worst_ratio": ax1.worst_ratio},
        "oscillation": {},
        "almgren_to_david": [],
    }
    x0 = np.zeros(n)
    if d < n and d <= 2:
        e = np.zeros(n)
        e[-1] = 1.0

        def f(U):
            return U @ V.T + np.sum(U * U, axis=1)[:, None] * e

        def df(U):
            return V[None] + 2 * e[None, :, None] * U[:, None, :]

        ratios, verdict = check_axiom_ii(ig, x0, V, f, df, r0=0.1, levels=7)
        report["axiom_ii"] = {
            "consistent": verdict.consistent,
            "ratios": ratios.tolist(),
            "sandwich_ok": all(verdict.sandwich_ok),
        }
    for r in (0.4, 0.2, 0.1, 0.05):
        report["oscillation"][repr(r)] = oscillation_epsilon(ig, r, x0, seed=cfg.seed)
    if (n, d) == (3, 2):
        fx = [("cap", 0.1, hemisphere(0.1)), ("cap", 0.05, hemisphere(0.05)), ("disk", 0.1, plane_disk(x0, V, 0.1))]
        for name, r, S in fx:
            entry = {"fixture": name, "r": r}
            try:
                res = almgren_to_david(ig, c, x0, r, V, S, projection_certified=True, seed=cfg.seed)
                entry.update(lhs=res.lhs, rhs=res.rhs, slack=res.slack, epsilon=res.epsilon, surrogate=res.surrogate)
            except ValueError as exc:
                entry["error"] = str(exc)
            report["almgren_to_david"].append(entry)
    return report


def _floats(text: str) -> list[float]:
    return [float(Fraction(v)) for v in text.split(",")]


def _cmd_sphere(cfg: ExperimentConfig, files: dict) -> dict:
    ex = cfg.extra
    if not (ex.get("center") and ex.get("radius") and ex.get("point")):
        raise ValueError("sphere needs --center, --radius and --point")
    center = np.array(_floats(ex["center"]))
    radius = float(Fraction(ex["radius"]))
    if ex.get("basis"):
        S = Sphere.in_plane(center, radius, np.array([_floats(row) for row in ex["basis"].split(";")]).T)
    else:
        S = Sphere.round(center, radius)
    x = np.array(_floats(ex["point"]))
    out = {"command": "sphere", "sphere": S.to_json(), "excluded_radii": sorted(excluded_radii(S, x))}
    if ex.get("r"):
        out["reduction"] = intersection_reduction(S, x, float(Fraction(ex["r"]))).to_json()
    return out


_HANDLERS = {
    "check": _cmd_check,
    "minimize": _cmd_minimize,
    "refine": _cmd_refine,
    "lemma24": _cmd_lemma24,
    "energy-audit": _cmd_energy_audit,
    "sphere": _cmd_sphere,
}


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Execute a command; prints the JSON report (or an error JSON) and returns the exit status."""
    stdout = stdout or sys.stdout
    files: dict = {}
    try:
        report = {"format": 1, **_HANDLERS[cfg.command](cfg, files)}
        code = 0
    except Exception as exc:  # reported as machine-readable JSON
        report = {"format": 1, "command": cfg.command, "error": {"type": type(exc).__name__, "message": str(exc)}}
        code = 2
    text = _dumps(report)
    if cfg.out is not None:
        for name, body in sorted(files.items()):
            _atomic_write(Path(cfg.out) / name, body)
        _atomic_write(Path(cfg.out) / ("report.json" if code == 0 else "error.json"), text)
    stdout.write(text)
    return code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plateau-lab", description="Homological spanning and Plateau experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scene", help="scene JSON file or fixture:NAME")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=5000, help="move evaluations for minimize/refine")
    p.add_argument("--side", type=Fraction, help="grid side (fixtures) or finest side (refine)")
    p.add_argument("--mode", choices=("free", "fixed"), default="free")
    p.add_argument("--out", type=Path, help="output directory for artifacts")
    p.add_argument("--integrand", help="expression for i (see README)")
    p.add_argument("--j", help="expression for j (defaults to i)")
    p.add_argument("--lam", help="bound Lambda of the integrand")
    p.add_argument("--n", type=int, help="ambient dimension for energy-audit")
    p.add_argument("--d", type=int, help="dimension for energy-audit")
    p.add_argument("--c", help="ellipticity constant for energy-audit")
    p.add_argument("--k", type=int, help="tentacle index for lemma24")
    p.add_argument("--off-every", type=int, default=0, help="write every N-th iterate as OFF")
    p.add_argument("--center")
    p.add_argument("--radius")
    p.add_argument("--point")
    p.add_argument("--basis", help="plane directions 'a,b,c;d,e,f' for a lower-dimensional sphere")
    p.add_argument("--r", help="radius for intersection_reduction")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    extra = {
        k: getattr(args, k)
        for k in ("integrand", "j", "lam", "n", "d", "c", "k", "off_every", "center", "radius", "point", "basis", "r")
    }
    try:
        cfg = ExperimentConfig(
            args.command, args.scene, args.seed, args.budget, args.side, args.mode, args.out, extra=extra
        )
    except ValueError as exc:
        sys.stdout.write(_dumps({"format": 1, "error": {"type": "ValueError", "message": str(exc)}}))
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
