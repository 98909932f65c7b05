"""Command-line entry point and the end-to-end segmentation pipeline.

Every subcommand reads an optional TOML config (flat key = value), lets
command-line flags override it, and writes the fully resolved config next
to its outputs.  Paths are taken relative to ``--workdir``.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from . import __version__
from .errors import (BacktrackingError, ConfigError, DomainError, NonConvergenceError, StageError,
                     ThinningError, UnclaimedPointError)
from .grid import TWO_PI, Field, GridSpec, load_field, save_field

log = logging.getLogger("dcsnakes")

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3


# -- configuration ------------------------------------------------------------------

@dataclass
class PipelineConfig:
    """All pipeline parameters.  Zero means "derive from ``width``" where noted."""

    # lifting
    n_orientations: int = 12
    overlap: int = 4
    filter_size: int = 33
    cutoff: float = 0.8
    inflection: float = 0.5
    log_transform: bool = False
    # structure width in pixels; sets the component smoothing, scan radius and crop margin
    width: float = 12.0
    # component stage
    comp_sigma_s: float = 0.0           # 0: 0.75 width
    comp_sigma_a: float = 2 * TWO_PI / 48
    comp_lambda: float = 50.0
    comp_p: float = 3.0
    threshold: float = 0.5
    # tracking cost
    sigma_s: float = 2.0
    sigma_a: float = 4 * TWO_PI / 48
    lam: float = 100.0
    p: float = 1.0
    # metric of the ball kernel and grouping
    g11: float = 0.2
    g22: float = 1.0
    g33: float = 7.0
    low: float = 0.1
    # tracking and switching
    xi: float = float(np.sqrt(0.2 / 7.0))
    alpha: float = 3 * TWO_PI / 48
    model: str = "dc"
    eikonal_tol: float = 1e-5
    eikonal_max_iters: int = 0          # 0: solver default
    # spatial snakes
    scan_radius: float = 0.0            # 0: 1.5 width
    edge_scales: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    gamma: float = 0.5
    min_spatial: int = 3
    margin: float = 0.0                 # 0: width
    workers: int = 1

    def validate(self):
        if self.model not in ("dc", "dproj"):
            raise ConfigError(f"model must be 'dc' or 'dproj', got {self.model!r}")
        if self.width <= 0:
            raise ConfigError("width must be positive")
        if self.xi <= 0 or self.alpha <= 0:
            raise ConfigError("xi and alpha must be positive")
        if min(self.g11, self.g22, self.g33) <= 0:
            raise ConfigError("metric entries must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def resolved(self) -> "PipelineConfig":
        """Copy with every derived (zero) entry filled in."""
        w = self.width
        return replace(self,
                       comp_sigma_s=self.comp_sigma_s or 0.75 * w,
                       scan_radius=self.scan_radius or 1.5 * w,
                       margin=self.margin or w,
                       edge_scales=[float(s) for s in self.edge_scales]).validate()

    @property
    def metric(self) -> tuple:
        return (self.g11, self.g22, self.g33)

    @property
    def solver_kw(self) -> dict:
        kw = {"tol": self.eikonal_tol}
        if self.eikonal_max_iters > 0:
            kw["max_iters"] = int(self.eikonal_max_iters)
        return kw

    def to_toml(self) -> str:
        return tomli_w.dumps(asdict(self))


CONFIG_FIELDS = {f.name: f for f in fields(PipelineConfig)}
# flag names that differ from the field names
FLAG_NAMES = {"lam": "lambda", "p": "p"}


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    data = {}
    if path is not None:
        try:
            data = tomli.loads(Path(path).read_text())
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        unknown = set(data) - set(CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = PipelineConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    # light type coercion so TOML ints work for float fields
    for name, f in CONFIG_FIELDS.items():
        v = getattr(cfg, name)
        if f.type == "float" and isinstance(v, int) and not isinstance(v, bool):
            setattr(cfg, name, float(v))
        elif f.type == "int" and isinstance(v, float) and v.is_integer():
            setattr(cfg, name, int(v))
    return cfg.validate()


# -- pipeline -----------------------------------------------------------------------

@dataclass
class PipelineResult:
    contours: list                   # CompletedContour
    config: PipelineConfig
    stats: dict
    stages: dict = field(default_factory=dict)


def _stage(name, fn, *args, component=None, **kw):
    try:
        return fn(*args, **kw)
    except (ConfigError, StageError):
        raise
    except (NonConvergenceError, BacktrackingError, ThinningError, UnclaimedPointError, DomainError,
            ValueError, RuntimeError) as exc:
        raise StageError(name, str(exc), component) from exc


def lift_image(image: np.ndarray, cfg: PipelineConfig):
    from .liftscore import build_cake_wavelets, lift, log_rescale

    f = log_rescale(image) if cfg.log_transform else np.asarray(image, float)
    stack = build_cake_wavelets(cfg.filter_size, cfg.n_orientations, cfg.overlap, cfg.cutoff, cfg.inflection)
    return lift(f, stack), stack


def component_measure(U: np.ndarray, cfg: PipelineConfig):
    from .costfield import line_measure

    return line_measure(U, cfg.comp_sigma_s or 0.75 * cfg.width, cfg.comp_sigma_a)


def tracking_cost(U: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    from .costfield import CostParams, cost_from_measure, line_measure

    params = CostParams(cfg.lam, cfg.p, cfg.sigma_s, cfg.sigma_a)
    return cost_from_measure(line_measure(U, params.sigma_s, params.sigma_a), params)


def run_pipeline(config: PipelineConfig, image: np.ndarray, dump_dir=None) -> PipelineResult:
    """Lift, label components, split initial contours, refine and complete.

    With ``config.model == 'dproj'`` only the gap tracking changes: gaps are
    closed with d_proj on the ungrouped cost.  If ``dump_dir`` is given one
    artifact per step is written there.
    """
    from .costfield import connected_components, group_cost
    from .snakes import initial_contours, segment_contours

    cfg = config.resolved()
    image = np.asarray(image, float)
    if image.ndim != 2:
        raise ConfigError("pipeline expects a 2D grayscale image")
    U, _ = _stage("lift", lift_image, image, cfg)
    V = _stage("components", component_measure, U, cfg)
    labeling = _stage("components", connected_components, V, cfg.threshold, cfg.metric)
    if labeling.n == 0:
        raise StageError("components", "no structure above threshold")
    inits = _stage("initial-contours", initial_contours, labeling, V)
    C = _stage("cost", tracking_cost, U, cfg)
    if cfg.model == "dc":
        costs = _stage("group-cost", group_cost, C, labeling, cfg.metric, cfg.low)
    else:
        costs = C
    seg = _stage("segment", segment_contours, inits, U, costs, cfg.xi, alpha=cfg.alpha,
                 radius=cfg.scan_radius, scales=tuple(cfg.edge_scales), gamma=cfg.gamma, model=cfg.model,
                 margin=cfg.margin, min_spatial=cfg.min_spatial, solver_kw=cfg.solver_kw,
                 workers=cfg.workers)
    stages = {"score": U, "measure": V, "labels": labeling, "initial": inits, "cost": C, "costs": costs,
              "segmentation": seg}
    if dump_dir is not None:
        dump_stages(Path(dump_dir), image, stages, cfg)
    return PipelineResult(seg.contours, cfg, seg.stats, stages)


def dump_stages(out: Path, image, stages: dict, cfg: PipelineConfig):
    """One artifact per pipeline step, numbered in pipeline order."""
    from . import plots
    from .costfield import GroupedCost

    out.mkdir(parents=True, exist_ok=True)
    U, V, lab = stages["score"], stages["measure"], stages["labels"]
    g = GridSpec(*V.shape)
    save_field(out / "1_score.field", Field(g, U.astype(np.complex64)))
    plots.plot_field_projection(out / "1_score.png", np.abs(U), "max |U| over theta")
    save_field(out / "2_measure.field", Field(g, V))
    save_field(out / "2_labels.field", Field(g, lab.labels.astype(float)))
    plots.plot_labels(out / "2_components.png", lab.projection())
    write_contours_csv(out / "3_initial.csv", [i.curve.points for i in stages["initial"]],
                       [i.component for i in stages["initial"]])
    seg = stages["segmentation"]
    rows = []
    for c, (init, segs) in enumerate(zip(seg.initial, seg.segments)):
        for s in segs:
            for i in s.indices:
                rows.append(f"{c + 1},{init.component},{int(i)},{s.mode}")
    (out / "4_split.csv").write_text("contour,component,index,mode\n" + "\n".join(rows) + "\n")
    plots.plot_segments(out / "4_split.png", image, seg.initial, seg.segments)
    costs = stages["costs"]
    cdir = out / "4a_costs"
    cdir.mkdir(exist_ok=True)
    if isinstance(costs, GroupedCost):
        for i, Ci in enumerate(costs.costs):
            save_field(cdir / f"cost_{i + 1}.field", Field(g, Ci))
        manifest = {"n": costs.n, "iterations": costs.iterations, "stalled": costs.stalled,
                    "files": [f"cost_{i + 1}.field" for i in range(costs.n)]}
    else:
        save_field(cdir / "cost.field", Field(g, costs))
        manifest = {"n": 1, "files": ["cost.field"], "grouped": False}
    (cdir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    write_contours_csv(out / "4b_refined.csv", [c.points[c.modes == 0] for c in seg.contours],
                       [c.component for c in seg.contours])
    write_contours_csv(out / "5_contours.csv", [c.points for c in seg.contours],
                       [c.component for c in seg.contours], [c.modes for c in seg.contours])


def write_contours_csv(path, contours, components=None, modes=None):
    """structure, component, index, x, y, theta[, mode]; structures numbered from 1."""
    head = "structure,component,index,x,y,theta" + (",mode" if modes is not None else "")
    lines = [head]
    for s, pts in enumerate(contours):
        comp = components[s] if components is not None else s + 1
        pts = np.asarray(pts, float).reshape(-1, 3)
        for i, (x, y, t) in enumerate(pts):
            row = f"{s + 1},{comp},{i},{x:.4f},{y:.4f},{t:.5f}"
            if modes is not None:
                row += f",{int(modes[s][i])}"
            lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def render_overlay(image: np.ndarray, contours, path=None) -> np.ndarray:
    """Image with one coloured closed polyline per contour; optionally saved as PNG."""
    from . import plots

    rgb = plots.overlay_raster(image, [np.asarray(c)[:, :2] for c in contours])
    if path is not None:
        from PIL import Image

        Image.fromarray(rgb).save(path)
    return rgb


# -- argument parsing -------------------------------------------------------------------

def _parse_point(s: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in s.split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad point {s!r}") from exc
    if v.size != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,theta, got {s!r}")
    return v


def _parse_floats(s: str) -> list:
    try:
        return [float(t) for t in s.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad list {s!r}") from exc


def _add_config_flags(p: argparse.ArgumentParser):
    grp = p.add_argument_group("pipeline parameters (override the config file)")
    for name, f in CONFIG_FIELDS.items():
        flag = "--" + FLAG_NAMES.get(name, name).replace("_", "-")
        if f.type == "bool":
            grp.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
        elif name == "edge_scales":
            grp.add_argument(flag, dest=name, type=_parse_floats, default=None, metavar="S1,S2,...")
        elif name == "model":
            grp.add_argument(flag, dest=name, choices=("dc", "dproj"), default=None)
        else:
            grp.add_argument(flag, dest=name, type=int if f.type == "int" else float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dcsnakes", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workdir", default=".", help="base directory for relative paths")
    common.add_argument("--config", help="TOML file with pipeline parameters")
    common.add_argument("--out", default="out", help="output directory (relative to workdir)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_, cfg=True):
        p = sub.add_parser(name, parents=[common], help=help_)
        if cfg:
            _add_config_flags(p)
        return p

    p = add("synth", "generate a synthetic scene with ground truth", cfg=False)
    p.add_argument("--preset", required=True, help="cd{8,12,16}-h{5,15,25,40}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stem", default="scene")

    p = add("lift", "orientation score of an image")
    p.add_argument("--image", required=True)

    for name, h in (("cost", "tracking cost from an image or score"),
                    ("components", "connected components of the line measure")):
        p = add(name, h)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--image")
        src.add_argument("--score", help="score field written by 'lift'")

    p = add("group-cost", "connected-component-informed costs")
    p.add_argument("--cost", required=True, help="cost field")
    p.add_argument("--labels", required=True, help="label field written by 'components'")

    p = add("track", "geodesic between two points")
    p.add_argument("--cost", help="cost field; omit for C = 1 on --grid")
    p.add_argument("--grid", type=lambda s: [int(t) for t in s.split(",")], default=None,
                   metavar="NX,NY,NTHETA")
    p.add_argument("--source", type=_parse_point, required=True, metavar="X,Y,THETA")
    p.add_argument("--sink", type=_parse_point, required=True, metavar="X,Y,THETA")

    p = add("segment", "full segmentation pipeline")
    p.add_argument("--image", required=True)
    p.add_argument("--gt", help="ground-truth contour CSV; adds eval outputs")
    p.add_argument("--dump-stages", action="store_true")

    p = add("spheres", "distance spheres around the origin")
    p.add_argument("--radii", type=_parse_floats, default=[0.5, 1.0, 2.0, np.pi])
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--ntheta", type=int, default=32)
    p.add_argument("--scale", type=float, default=10.0, help="pixels per spatial unit")

    p = add("cone", "sample the cusp-free cone of d_proj")
    p.add_argument("--radii", type=_parse_floats, default=[1.0, 2.0, 3.0, 4.0])
    p.add_argument("--angles", type=int, default=16)
    p.add_argument("--thetas", type=int, default=8)
    p.add_argument("--n", type=int, default=96)
    p.add_argument("--ntheta", type=int, default=32)
    p.add_argument("--scale", type=float, default=8.0)

    p = add("eval", "MASD and Hausdorff against ground truth", cfg=False)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--image", help="background for the comparison figure")
    return ap


# -- subcommands ---------------------------------------------------------------------------

class _Ctx:
    def __init__(self, args):
        self.args = args
        self.base = Path(args.workdir)
        self.out = self.path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = None
        if args.command not in ("synth", "eval"):
            ov = {k: getattr(args, k, None) for k in CONFIG_FIELDS}
            self.cfg = load_config(self.path(args.config) if args.config else None, ov).resolved()
            (self.out / "config.resolved.toml").write_text(self.cfg.to_toml())

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def input(self, p) -> Path:
        q = self.path(p)
        if not q.exists():
            raise ConfigError(f"input {q} does not exist")
        return q


def _load_score(ctx, args):
    from .synthgen import load_image

    if getattr(args, "score", None):
        return load_field(ctx.input(args.score)).values.astype(complex)
    U, _ = _stage("lift", lift_image, load_image(ctx.input(args.image)), ctx.cfg)
    return U


def cmd_synth(ctx, args):
    from .synthgen import generate, preset, write_scene

    paths = write_scene(generate(preset(args.preset, args.seed)), ctx.out, args.stem)
    print(json.dumps(paths, indent=2))


def cmd_lift(ctx, args):
    from . import plots
    from .synthgen import load_image

    U, _ = _stage("lift", lift_image, load_image(ctx.input(args.image)), ctx.cfg)
    save_field(ctx.out / "score.field", Field(GridSpec(*U.shape), U.astype(np.complex64)))
    plots.plot_field_projection(ctx.out / "score.png", np.abs(U), "max |U| over theta")


def cmd_cost(ctx, args):
    from . import plots

    C = _stage("cost", tracking_cost, _load_score(ctx, args), ctx.cfg)
    save_field(ctx.out / "cost.field", Field(GridSpec(*C.shape), C))
    plots.plot_field_projection(ctx.out / "cost.png", C, "min C over theta", reduce="min", cmap="gray")


def cmd_components(ctx, args):
    from . import plots
    from .costfield import connected_components

    cfg = ctx.cfg
    V = _stage("components", component_measure, _load_score(ctx, args), cfg)
    lab = _stage("components", connected_components, V, cfg.threshold, cfg.metric)
    g = GridSpec(*V.shape)
    save_field(ctx.out / "measure.field", Field(g, V))
    save_field(ctx.out / "labels.field", Field(g, lab.labels.astype(float)))
    plots.plot_labels(ctx.out / "components.png", lab.projection())
    (ctx.out / "components.json").write_text(json.dumps({"n": lab.n, "sizes": lab.sizes.tolist()}, indent=2))


def cmd_group_cost(ctx, args):
    from . import plots
    from .costfield import ComponentLabeling, group_cost

    C = load_field(ctx.input(args.cost)).values.astype(float)
    lab_v = np.rint(load_field(ctx.input(args.labels)).values).astype(np.int32)
    n = int(lab_v.max())
    lab = ComponentLabeling(lab_v, n, np.bincount(lab_v.ravel(), minlength=n + 1)[1:])
    G = _stage("group-cost", group_cost, C, lab, ctx.cfg.metric, ctx.cfg.low)
    g = GridSpec(*C.shape)
    for i, Ci in enumerate(G.costs):
        save_field(ctx.out / f"cost_{i + 1}.field", Field(g, Ci))
    manifest = {"n": G.n, "iterations": G.iterations, "stalled": G.stalled,
                "files": [f"cost_{i + 1}.field" for i in range(G.n)]}
    (ctx.out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    owner = G.claimed.max(axis=2)
    plots.plot_labels(ctx.out / "claimed.png", owner, "claimed low-cost voxels")


def cmd_track(ctx, args):
    from . import plots
    from .analysis import write_json
    from .tracking import distance_dc, distance_proj

    cfg = ctx.cfg
    if args.cost:
        C = load_field(ctx.input(args.cost)).values.astype(float)
        grid = GridSpec(*C.shape)
    else:
        if not args.grid or len(args.grid) != 3:
            raise ConfigError("track needs --cost or --grid NX,NY,NTHETA")
        grid = GridSpec(*args.grid)
        C = np.ones(grid.shape)
    for name, p in (("source", args.source), ("sink", args.sink)):
        if not grid.contains(p):
            raise ConfigError(f"{name} {tuple(p)} outside the grid")
    fn = distance_dc if cfg.model == "dc" else distance_proj
    tr = _stage("track", fn, C, args.source, args.sink, cfg.xi, grid, solver_kw=cfg.solver_kw)
    pts = tr.curve.points
    write_contours_csv(ctx.out / "track.csv", [pts])
    write_json(ctx.out / "track.json", {
        "model": tr.model, "distance": tr.distance, "instance": list(tr.instance), "maxwell": tr.maxwell,
        "cusps": list(map(int, tr.cusps)),
        "instances": {f"{int(a)}{int(b)}": v for (a, b), v in tr.instances.items()}})
    plots.plot_track(ctx.out / "track.png", C, pts, f"{tr.model} = {tr.distance:.4g}")


def cmd_segment(ctx, args):
    from . import plots
    from .analysis import evaluate, write_json
    from .synthgen import load_contours_csv, load_image

    image = load_image(ctx.input(args.image))
    dump = ctx.out / "stages" if args.dump_stages else None
    res = run_pipeline(ctx.cfg, image, dump)
    cs = res.contours
    write_contours_csv(ctx.out / "contours.csv", [c.points for c in cs], [c.component for c in cs],
                       [c.modes for c in cs])
    render_overlay(image, [c.points for c in cs], ctx.out / "overlay.png")
    summary = {"stats": res.stats}
    if args.gt:
        gt = load_contours_csv(ctx.input(args.gt))
        pred = {i + 1: c.points[:, :2] for i, c in enumerate(cs)}
        ev = evaluate(pred, gt)
        write_json(ctx.out / "eval.json", ev)
        _write_eval_csv(ctx.out / "eval.csv", ev)
        plots.plot_eval(ctx.out / "eval.png", image, pred, gt)
        summary["eval"] = {"median_masd": ev["median_masd"], "max_hausdorff": ev["max_hausdorff"]}
    write_json(ctx.out / "summary.json", summary)
    print(json.dumps(summary, indent=2, default=float))


def _write_eval_csv(path, ev):
    lines = ["gt,pred,masd,hausdorff"]
    for r in ev["structures"]:
        lines.append(f"{r['gt']},{'' if r['pred'] is None else r['pred']},{r['masd']:.6g},{r['hausdorff']:.6g}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_spheres(ctx, args):
    from . import plots
    from .analysis import collision_radius, sphere_fields, sphere_mesh, write_json, write_obj

    cfg = ctx.cfg
    sf = _stage("spheres", sphere_fields, cfg.model, cfg.xi, args.n, args.ntheta, args.scale, **cfg.solver_kw)
    meshes = sphere_mesh(sf, args.radii)
    write_obj(ctx.out / "spheres.obj", meshes)
    R, where = collision_radius(sf)
    write_json(ctx.out / "spheres.json", {
        "model": cfg.model, "xi": cfg.xi, "collision_radius": R, "collision_point": list(where),
        "meshes": [{"radius": m.radius, "tag": m.tag, "vertices": len(m.vertices), "faces": len(m.faces)}
                   for m in meshes]})
    plots.plot_sphere_slices(ctx.out / "spheres.png", sf, args.radii)
    print(f"collision radius {R:.4f}")


def cmd_cone(ctx, args):
    from . import plots
    from .analysis import cone_endpoints, cone_sample, write_json, write_rows_csv

    cfg = ctx.cfg
    ang = np.arange(args.angles) * TWO_PI / args.angles
    ths = np.arange(args.thetas) * np.pi / args.thetas
    ends = cone_endpoints(args.radii, ang, ths)
    rows = _stage("cone", cone_sample, cfg.xi, ends, args.n, args.ntheta, args.scale, **cfg.solver_kw)
    write_rows_csv(ctx.out / "cone.csv", rows)
    inside = [r for r in rows if r["member"]]
    write_json(ctx.out / "cone.json", {
        "endpoints": len(rows), "in_cone": len(inside),
        "consistent": sum(bool(r["consistent"]) for r in inside),
        "dc_ge_dproj_outside": sum(r["dc"] >= r["dproj"] for r in rows if not r["member"])})
    plots.plot_cone(ctx.out / "cone.png", rows)


def cmd_eval(ctx, args):
    from . import plots
    from .analysis import evaluate, load_pred_csv, write_json
    from .synthgen import load_contours_csv, load_image

    pred = load_pred_csv(ctx.input(args.pred))
    gt = load_contours_csv(ctx.input(args.gt))
    ev = evaluate(pred, gt)
    write_json(ctx.out / "eval.json", ev)
    _write_eval_csv(ctx.out / "eval.csv", ev)
    if args.image:
        plots.plot_eval(ctx.out / "eval.png", load_image(ctx.input(args.image)), pred, gt)
    print(json.dumps({"median_masd": ev["median_masd"], "max_hausdorff": ev["max_hausdorff"]}))


COMMANDS = {"synth": cmd_synth, "lift": cmd_lift, "cost": cmd_cost, "components": cmd_components,
            "group-cost": cmd_group_cost, "track": cmd_track, "segment": cmd_segment,
            "spheres": cmd_spheres, "cone": cmd_cone, "eval": cmd_eval}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        ctx = _Ctx(args)
        COMMANDS[args.command](ctx, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (NonConvergenceError, BacktrackingError, ThinningError, UnclaimedPointError, DomainError) as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
