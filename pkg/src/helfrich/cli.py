"""Command-line front end: ``helfrich analyze | correct | minimize | replace``.

Parameters come from an optional JSON config file (``schema_version`` 1) and
are overridden by command-line flags.  The merged configuration is validated
before the output directory is created; every output file is written
atomically and deterministically (sorted keys, ``repr`` floats, no
timestamps).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .biharmonic import replace_patch
from .correction import curvature_drift_bound, pick_fields, solve_correction
from .curvature import gauss_bonnet_total, helfrich_energy, willmore_energy
from .diagnostics import diameter_check, vertex_diagnostics_csv
from .errors import (
    DegenerateConstraintsError,
    HelfrichError,
    MultiSheetError,
    NotAGraphError,
    OutOfRadiusError,
)
from .mesh import Constraints, area, atomic_write_text, enclosed_volume, genus, load_mesh, save_mesh
from .minimize import OptimizerState, descend, el_residual, restore_constraints
from .varifold import current_rep, volume_via_current

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COMMANDS = ("analyze", "correct", "minimize", "replace")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_FOUND = 2
EXIT_OUT_OF_RADIUS = 3
EXIT_DEGENERATE = 4
EXIT_STATIONARY = 5
EXIT_NOT_GRAPH = 6


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """All parameters of one run; round-trips through :meth:`to_dict` / :meth:`from_dict`."""

    command: str
    mesh: str
    out: str
    seed: int = 0
    h0: float = 0.0
    area0: float | None = None
    vol0: float | None = None
    max_steps: int = 200
    step_tol: float = 1e-7
    energy_tol: float = 1e-9
    correction_tol: float = 1e-10
    guarantee: bool = True
    degree: int = 4
    grid_resolution: int = 64
    eps0: float = 1.0
    rho: float = 0.3
    center: list | None = None
    patch_radius: float = 0.4
    sigma: float | None = None
    grid_n: int = 65
    chain_correction: bool = False
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version!r}")
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.mesh:
            raise ConfigError("no input mesh given")
        if not self.out:
            raise ConfigError("no output directory given")
        for name in ("step_tol", "energy_tol", "correction_tol", "eps0", "rho", "patch_radius"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not (isinstance(self.max_steps, int) and self.max_steps >= 0):
            raise ConfigError("max_steps must be a nonnegative integer")
        if not (isinstance(self.degree, int) and self.degree >= 1):
            raise ConfigError("degree must be a positive integer")
        if self.grid_resolution < 32:
            raise ConfigError("grid_resolution must be at least 32")
        if self.grid_n < 9:
            raise ConfigError("grid_n must be at least 9")
        if self.center is not None and len(self.center) != 3:
            raise ConfigError("center must have three coordinates")
        if self.command == "replace" and self.center is None:
            raise ConfigError("replace needs --center")
        if (self.area0 is None) != (self.vol0 is None):
            raise ConfigError("give both area0 and vol0 or neither")
        if self.area0 is not None and not self.area0 > 0:
            raise ConfigError("area0 must be positive")
        if self.vol0 is not None and (self.vol0 == 0 or not math.isfinite(self.vol0)):
            raise ConfigError("vol0 must be a nonzero real number")


def _dump(d: dict) -> str:
    return json.dumps(d, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _targets(cfg: RunConfig, mesh) -> Constraints:
    if cfg.area0 is None:
        return Constraints.of(mesh, cfg.h0)
    return Constraints(cfg.area0, cfg.vol0, cfg.h0)


def _prepare_out(cfg: RunConfig) -> Path:
    """Create the output directory and record the resolved configuration in it."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config.json", cfg.to_json())
    return out


# -- commands -----------------------------------------------------------------


def cmd_analyze(cfg: RunConfig) -> int:
    mesh = load_mesh(cfg.mesh)
    out = _prepare_out(cfg)
    chi = mesh.euler_characteristic
    gb = gauss_bonnet_total(mesh)
    rep = {
        "n_vertices": mesh.n_vertices,
        "n_faces": mesh.n_faces,
        "area": area(mesh),
        "vol_divergence": enclosed_volume(mesh),
        "vol_current": volume_via_current(current_rep(mesh, cfg.grid_resolution)),
        "willmore": willmore_energy(mesh),
        "helfrich": helfrich_energy(mesh, cfg.h0),
        "h0": cfg.h0,
        "genus": genus(mesh),
        "euler_characteristic": chi,
        "gauss_bonnet_total": gb,
        "gauss_bonnet_error": gb - 2 * math.pi * chi,
        "diameter_ratio": diameter_check(mesh),
        "el_residual": el_residual(mesh, cfg.h0),
    }
    atomic_write_text(out / "analysis.json", _dump(rep))
    atomic_write_text(out / "diagnostics.csv", vertex_diagnostics_csv(mesh, cfg.eps0, cfg.rho))
    return EXIT_OK


def cmd_correct(cfg: RunConfig) -> int:
    mesh = load_mesh(cfg.mesh)
    tg = _targets(cfg, mesh)
    pair = pick_fields(mesh)
    res = solve_correction(mesh, pair, tg, tol=cfg.correction_tol, guarantee=cfg.guarantee)
    s, t, new = res
    rep = dataclasses.asdict(res.report)
    rep.pop("residual_history")
    rep["area0"], rep["vol0"] = tg.area0, tg.vol0
    rep["relative_residual_area"] = rep["residual_area"] / tg.area0
    rep["relative_residual_vol"] = rep["residual_vol"] / abs(tg.vol0)
    rep["bump_radius"] = pair.field_x.radius
    if res.report.trust_radius > 0:
        rep["curvature_drift"] = curvature_drift_bound(mesh, pair, res.report.trust_radius,
                                                       seed=cfg.seed)
    out = _prepare_out(cfg)
    save_mesh(new, out / "corrected.off")
    atomic_write_text(out / "correction.json", _dump(rep))
    return EXIT_OK


def cmd_minimize(cfg: RunConfig) -> int:
    mesh = load_mesh(cfg.mesh)
    tg = _targets(cfg, mesh)
    start = restore_constraints(mesh, tg, degree=cfg.degree)
    st = descend(OptimizerState(start, tg), max_steps=cfg.max_steps, step_tol=cfg.step_tol,
                 energy_tol=cfg.energy_tol, correction_tol=cfg.correction_tol,
                 guarantee=cfg.guarantee, degree=cfg.degree)
    out = _prepare_out(cfg)
    save_mesh(st.mesh, out / "final.off")
    st.save_log(out / "run_log.csv")
    extra = {
        "el_residual": el_residual(st.mesh, cfg.h0),
        "el_residual_start": el_residual(mesh, cfg.h0),
        "willmore": willmore_energy(st.mesh),
        "h0": cfg.h0,
        "area0": tg.area0,
        "vol0": tg.vol0,
    }
    atomic_write_text(out / "summary.json", st.summary_json(extra))
    if st.stop_reason == "stalled":
        print("stationary: line search stalled", file=sys.stderr)
        return EXIT_STATIONARY
    return EXIT_OK


def cmd_replace(cfg: RunConfig) -> int:
    mesh = load_mesh(cfg.mesh)
    center = np.asarray(cfg.center, dtype=float)
    new, rep = replace_patch(mesh, center, cfg.patch_radius, grid_n=cfg.grid_n,
                             sigma=cfg.sigma, h0=cfg.h0)
    report = dict(rep.__dict__)
    if cfg.chain_correction:
        tg = _targets(cfg, mesh)
        pair = pick_fields(new, protected_region=(center, cfg.patch_radius))
        res = solve_correction(new, pair, tg, tol=cfg.correction_tol, guarantee=cfg.guarantee)
        new = res[2]
        corr = dataclasses.asdict(res.report)
        corr.pop("residual_history")
        report["correction"] = corr
    out = _prepare_out(cfg)
    save_mesh(new, out / "replaced.off")
    atomic_write_text(out / "delta_report.json", _dump(report))
    return EXIT_OK


HANDLERS = {"analyze": cmd_analyze, "correct": cmd_correct,
            "minimize": cmd_minimize, "replace": cmd_replace}


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--mesh", help="input mesh (.off or .obj)")
    g.add_argument("--out", help="output directory")
    g.add_argument("--config", help="JSON config file (schema_version 1)")
    g.add_argument("--seed", type=int)
    g.add_argument("--h0", type=float, help="spontaneous curvature")
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="helfrich", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="curvature, volume and diagnostics")
    a.add_argument("--grid-resolution", type=int, dest="grid_resolution")
    a.add_argument("--eps0", type=float)
    a.add_argument("--rho", type=float)

    def targets(sp):
        sp.add_argument("--area0", type=float)
        sp.add_argument("--vol0", type=float)
        sp.add_argument("--correction-tol", type=float, dest="correction_tol")
        sp.add_argument("--no-guarantee", action="store_false", dest="guarantee", default=None,
                        help="skip the guaranteed-radius precondition")

    c = sub.add_parser("correct", parents=[common], help="restore area and volume")
    targets(c)

    m = sub.add_parser("minimize", parents=[common], help="constrained Helfrich descent")
    targets(m)
    m.add_argument("--max-steps", type=int, dest="max_steps")
    m.add_argument("--step-tol", type=float, dest="step_tol")
    m.add_argument("--energy-tol", type=float, dest="energy_tol")
    m.add_argument("--degree", type=int)

    r = sub.add_parser("replace", parents=[common], help="biharmonic patch replacement")
    targets(r)
    r.add_argument("--center", type=float, nargs=3)
    r.add_argument("--patch-radius", type=float, dest="patch_radius")
    r.add_argument("--sigma", type=float)
    r.add_argument("--grid-n", type=int, dest="grid_n")
    r.add_argument("--chain-correction", action="store_true", dest="chain_correction",
                   default=None)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge config file and flags (flags win) into a validated :class:`RunConfig`."""
    d: dict = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {d.get('schema_version')!r}")
        if d.get("command", args.command) != args.command:
            raise ConfigError(f"config is for command {d['command']!r}, not {args.command!r}")
    d["command"] = args.command
    skip = {"command", "config", "verbose"}
    for k, v in vars(args).items():
        if k not in skip and v is not None:
            d[k] = v
    d.setdefault("mesh", "")
    d.setdefault("out", "")
    return RunConfig.from_dict(d)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, HelfrichError, TypeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not Path(cfg.mesh).is_file():
        print(f"error: input mesh not found: {cfg.mesh}", file=sys.stderr)
        return EXIT_NOT_FOUND
    try:
        return HANDLERS[cfg.command](cfg)
    except OutOfRadiusError as exc:
        print(f"error: target outside the guaranteed radius: {exc}", file=sys.stderr)
        return EXIT_OUT_OF_RADIUS
    except DegenerateConstraintsError as exc:
        print(f"error: degenerate constraints: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (NotAGraphError, MultiSheetError) as exc:
        print(f"error: patch is not a single-sheet graph: {exc}", file=sys.stderr)
        return EXIT_NOT_GRAPH
    except HelfrichError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
