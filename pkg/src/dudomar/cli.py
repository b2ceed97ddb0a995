"""Command-line front end: ``simulate``, ``correct`` and ``eval``.

Configs are INI files; ``--dump-defaults`` prints every key with its
default value. A simulation directory holds one ``case_NN`` folder per
metal mask. Exit codes: 0 ok, 1 compute error, 2 I/O or config error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import io
from .baselines import dilate_trace, li_correct, nmar_correct
from .dualdomain import SolverConfig, SolverDivergenceError, run, run_degraded
from .grids import MU_WATER, Image, ImageGrid, SinoKind, Sinogram, Unit
from .metrics import psnr, ssim, write_report
from .prior import PriorConfig, build_prior
from .projector import FilterKind, ProjectionGeometry, RampFilter
from .prox import Domain, ProxKind, ProxOperator
from .simulate import MetalSpec, SpectrumConfig, compute_metal_trace, make_phantom, simulate_artifacts
from .suite import body_phantom, implant_masks

EXIT_OK, EXIT_COMPUTE, EXIT_IO = 0, 1, 2
METHODS = ("li", "nmar", "dual", "dual-degraded")

SIMULATE_DEFAULTS = {
    "geometry": {"size": "128", "pixel_size": "0.3", "n_views": "180", "n_bins": "auto"},
    "phantom": {"kind": "Body", "path": "", "discs": ""},
    "metal": {"masks": "", "builtin": "", "metal_hu": "8000.0"},
    "spectrum": {"kind": "default", "photon_count": "2e4"},
    "simulation": {"seed": "0", "filter": "SheppLoganWindow", "cutoff": "1.0"},
}

CORRECT_DEFAULTS = {
    "correct": {"trace_dilation": "1", "filter": "SheppLoganWindow", "cutoff": "1.0"},
    "prior": {"sigma": "1.5", "k": "3", "seed": "0", "weights": "", "y_tilde": ""},
    "solver": {"n_stages": "10", "alpha": "0.5", "eta1": "1.0", "eta2": "1.0", "auto_stepsize": "yes",
               "prox_s": "Identity", "prox_x": "TVDenoise:0.001:30"},
}


class ConfigError(ValueError):
    pass


class Config:
    """Typed access to an INI file layered over defaults; errors name the key."""

    def __init__(self, defaults: dict, path=None):
        self.parser = configparser.ConfigParser()
        self.parser.read_dict(defaults)
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise FileNotFoundError(f"config file not found: {path}")
            try:
                self.parser.read(path)
            except configparser.Error as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
            for section in self.parser.sections():
                if section not in defaults:
                    raise ConfigError(f"unknown section [{section}]")
                for key in self.parser[section]:
                    if key not in defaults[section]:
                        raise ConfigError(f"unknown key [{section}] {key}")

    def str(self, section, key) -> str:
        return self.parser.get(section, key).strip()

    def _typed(self, section, key, cast, check=None, what="value"):
        raw = self.str(section, key)
        try:
            value = cast(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {what}") from None
        if check is not None and not check(value):
            raise ConfigError(f"[{section}] {key} = {raw!r} is out of range")
        return value

    def int(self, section, key, check=None) -> int:
        return self._typed(section, key, int, check, "integer")

    def float(self, section, key, check=None) -> float:
        return self._typed(section, key, float, check, "number")

    def bool(self, section, key) -> bool:
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"[{section}] {key} is not a boolean") from None

    def path(self, section, key) -> Path | None:
        raw = self.str(section, key)
        return Path(raw) if raw else None


def dump_defaults(defaults: dict) -> str:
    parser = configparser.ConfigParser()
    parser.read_dict(defaults)
    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in parser[section].items()]
        lines.append("")
    return "\n".join(lines)


def _filter(cfg: Config, section: str) -> RampFilter:
    name = cfg.str(section, "filter")
    try:
        kind = FilterKind(name)
    except ValueError:
        choices = ", ".join(k.value for k in FilterKind)
        raise ConfigError(f"[{section}] filter = {name!r}; choose one of {choices}") from None
    return RampFilter(kind, cfg.float(section, "cutoff", lambda c: 0 < c <= 1))


def parse_prox(text: str, domain: Domain, key: str) -> ProxOperator:
    """``Identity``, ``SoftThreshold:s``, ``TVDenoise:s[:iters]`` or ``BoxClamp:lo:hi``."""
    parts = [p.strip() for p in text.split(":")]
    try:
        kind = ProxKind(parts[0])
        args = [float(p) for p in parts[1:]]
        if kind is ProxKind.IDENTITY and not args:
            return ProxOperator.identity(domain)
        if kind is ProxKind.SOFT_THRESHOLD and len(args) == 1:
            return ProxOperator.soft_threshold(args[0], domain)
        if kind is ProxKind.TV and len(args) in (1, 2):
            return ProxOperator.tv(args[0], int(args[1]) if len(args) == 2 else 50, domain)
        if kind is ProxKind.BOX_CLAMP and len(args) == 2:
            return ProxOperator.clamp(args[0], args[1], domain)
    except ValueError as exc:
        raise ConfigError(f"[solver] {key} = {text!r}: {exc}") from None
    raise ConfigError(f"[solver] {key} = {text!r} has the wrong number of arguments")


# ---------------------------------------------------------------- simulate

def _geometry(cfg: Config) -> ProjectionGeometry:
    size = cfg.int("geometry", "size", lambda v: v >= 4)
    grid = ImageGrid(size, size, cfg.float("geometry", "pixel_size", lambda v: v > 0))
    n_views = cfg.int("geometry", "n_views", lambda v: v >= 1)
    n_bins = cfg.str("geometry", "n_bins")
    nb = None if n_bins == "auto" else cfg.int("geometry", "n_bins", lambda v: v >= 1)
    try:
        return ProjectionGeometry.parallel(grid, n_views, nb)
    except ValueError as exc:
        raise ConfigError(f"[geometry] n_bins: {exc}") from None


def _phantom(cfg: Config, grid: ImageGrid) -> Image:
    kind = cfg.str("phantom", "kind")
    if kind == "Body":
        return body_phantom(grid)
    if kind == "SheppLogan":
        return make_phantom(kind, grid)
    if kind == "Discs":
        raw = cfg.str("phantom", "discs")
        try:
            discs = [tuple(float(v) for v in d.split()) for d in raw.split(",") if d.strip()]
        except ValueError:
            raise ConfigError(f"[phantom] discs = {raw!r}; expected 'x0 y0 r hu, ...'") from None
        if any(len(d) != 4 for d in discs):
            raise ConfigError("[phantom] discs entries need four numbers: x0 y0 r hu")
        return make_phantom(kind, grid, discs)
    if kind == "FromFile":
        path = cfg.path("phantom", "path")
        if path is None:
            raise ConfigError("[phantom] path is required for kind FromFile")
        try:
            return make_phantom(kind, grid, path)
        except ValueError as exc:
            raise ConfigError(f"[phantom] path {path}: {exc}") from None
    raise ConfigError(f"[phantom] kind = {kind!r}; choose Body, SheppLogan, Discs or FromFile")


def _masks(cfg: Config, grid: ImageGrid) -> list[Image]:
    masks = []
    raw = cfg.str("metal", "masks")
    for item in (p.strip() for p in raw.split(",")):
        if not item:
            continue
        path = Path(item)
        if not path.exists() and not path.with_suffix(".raw").exists():
            raise FileNotFoundError(f"[metal] masks: mask file not found: {path}")
        m = io.load_mask(path, grid.pixel_size)
        if m.grid.shape != grid.shape:
            raise ConfigError(f"[metal] masks: {path} is {m.grid.shape}, expected {grid.shape}")
        masks.append(m)
    builtin = cfg.str("metal", "builtin")
    if builtin:
        bundled = implant_masks(grid)
        try:
            idx = _index_list(builtin)
        except ValueError:
            raise ConfigError(f"[metal] builtin = {builtin!r}; expected indices like '0-9' or '0,3'") from None
        if any(not 0 <= i < len(bundled) for i in idx):
            raise ConfigError(f"[metal] builtin indices must lie in 0..{len(bundled) - 1}")
        masks += [bundled[i] for i in idx]
    return masks or [Image.full(grid, 0.0, Unit.BINARY)]


def _index_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-")
            out += list(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _spectrum(cfg: Config) -> SpectrumConfig:
    kind = cfg.str("spectrum", "kind")
    count = cfg.float("spectrum", "photon_count", lambda v: v >= 0)
    if kind == "default":
        return SpectrumConfig.default(count)
    if kind == "mono":
        return SpectrumConfig.monochromatic(count)
    raise ConfigError(f"[spectrum] kind = {kind!r}; choose default or mono")


def _simulate_case(job):
    index, out, clean, mask, metal_hu, spectrum, geom, seed, filt = job
    metal = MetalSpec(mask, metal_hu)
    sim = simulate_artifacts(clean, metal, spectrum, geom, seed=(seed, index), filt=filt)
    tr = compute_metal_trace(metal, geom)
    case = Path(out) / f"case_{index:02d}"
    io.save_image(case / "x_gt", sim.x_gt)
    io.save_image(case / "mask", mask)
    io.save_sinogram(case / "y", sim.y)
    io.save_sinogram(case / "y_gt", sim.y_gt)
    io.save_image(case / "x_ma", sim.x_ma)
    io.save_sinogram(case / "trace", tr)
    for name, img in (("x_gt", sim.x_gt), ("x_ma", sim.x_ma)):
        io.save_png16(case / "preview" / f"{name}.png", img.values)
    meta = {
        "case_id": index,
        "metal_size_px": metal.size,
        "seed": [seed, index],
        "image_shape": list(geom.image_grid.shape),
        "pixel_size": geom.image_grid.pixel_size,
        "n_bins": geom.sino_grid.n_bins,
        "n_views": geom.sino_grid.n_views,
        "bin_spacing": geom.sino_grid.bin_spacing,
    }
    (case / "case.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return case


def cmd_simulate(config_path, out_dir, jobs: int = 1) -> list[Path]:
    cfg = Config(SIMULATE_DEFAULTS, config_path)
    geom = _geometry(cfg)
    clean = _phantom(cfg, geom.image_grid)
    masks = _masks(cfg, geom.image_grid)
    spectrum = _spectrum(cfg)
    seed = cfg.int("simulation", "seed", lambda v: v >= 0)
    metal_hu = cfg.float("metal", "metal_hu")
    filt = _filter(cfg, "simulation")
    jobs_list = [(i, str(out_dir), clean, m, metal_hu, spectrum, geom, seed, filt) for i, m in enumerate(masks)]
    return _map(_simulate_case, jobs_list, jobs)


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- correct

def case_dirs(root) -> list[Path]:
    """Case folders under ``root``, or ``root`` itself when it is a case."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"input directory not found: {root}")
    if (root / "case.json").exists():
        return [root]
    cases = sorted(p for p in root.iterdir() if p.is_dir() and (p / "case.json").exists())
    if not cases:
        raise FileNotFoundError(f"no case directories (with case.json) under {root}")
    return cases


def _case_geometry(case: Path) -> ProjectionGeometry:
    meta = json.loads((case / "case.json").read_text())
    h, w = meta["image_shape"]
    grid = ImageGrid(h, w, meta["pixel_size"])
    return ProjectionGeometry.parallel(grid, meta["n_views"], meta["n_bins"])


def _solver(cfg: Config) -> SolverConfig:
    try:
        return SolverConfig(
            n_stages=cfg.int("solver", "n_stages", lambda v: v >= 0),
            eta1=cfg.float("solver", "eta1", lambda v: v > 0),
            eta2=cfg.float("solver", "eta2", lambda v: v > 0),
            alpha=cfg.float("solver", "alpha", lambda v: v >= 0),
            prox_s=parse_prox(cfg.str("solver", "prox_s"), Domain.SINOGRAM, "prox_s"),
            prox_x=parse_prox(cfg.str("solver", "prox_x"), Domain.IMAGE, "prox_x"),
            auto_stepsize=cfg.bool("solver", "auto_stepsize"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from None


def _prior_inputs(cfg: Config, geom: ProjectionGeometry):
    weights = None
    wpath = cfg.path("prior", "weights")
    if wpath is not None:
        w = io.load_image(wpath, unit=Unit.WEIGHT, pixel_size=geom.image_grid.pixel_size)
        if w.grid != geom.image_grid:
            raise ConfigError(f"[prior] weights: {wpath} does not match the image grid")
        weights = w
    prior = PriorConfig(sigma=cfg.float("prior", "sigma", lambda v: v >= 0), k=cfg.int("prior", "k"),
                        seed=cfg.int("prior", "seed"), weights=weights)
    y_tilde = None
    ypath = cfg.path("prior", "y_tilde")
    if ypath is not None:
        y_tilde = io.load_sinogram(ypath)
        if y_tilde.grid.shape != geom.sino_grid.shape:
            raise ConfigError(f"[prior] y_tilde: {ypath} does not match the sinogram grid")
        y_tilde = Sinogram(geom.sino_grid, y_tilde.values)
    return prior, y_tilde


def _correct_case(job):
    method, case, out, config_path = job
    cfg = Config(CORRECT_DEFAULTS, config_path)
    geom = _case_geometry(case)
    filt = _filter(cfg, "correct")
    dilation = cfg.int("correct", "trace_dilation", lambda v: v >= 0)
    solver = _solver(cfg)
    prior, y_tilde = _prior_inputs(cfg, geom)

    y = Sinogram(geom.sino_grid, io.load_sinogram(case / "y").values)
    tr = Sinogram(geom.sino_grid, io.load_sinogram(case / "trace").values, SinoKind.TRACE)
    mask = io.load_image(case / "mask", Unit.BINARY, geom.image_grid.pixel_size)
    tr = dilate_trace(tr, dilation)
    y_li, x_li = li_correct(y, tr, geom, filt)
    out = Path(out)
    lines = []
    if method == "li":
        y_out, x_out = y_li, x_li
    elif method == "nmar":
        if y_tilde is None:
            _, y_tilde = build_prior(x_li, geom, prior, mask)
        y_out, x_out = nmar_correct(y, tr, x_li, geom, filt=filt, y_tilde=y_tilde)
    else:
        if method == "dual":
            if y_tilde is None:
                _, y_tilde = build_prior(x_li, geom, prior, mask)
            trace = run(y, tr, y_tilde, solver, geom, init=(y_li, x_li))
        else:
            trace = run_degraded(y, tr, solver, geom, init=(y_li, x_li))
        x_gt = io.load_image(case / "x_gt", Unit.HU, geom.image_grid.pixel_size) \
            if io.field_exists(case / "x_gt") else None
        trace.save(out / "stages", x_gt, mask)
        y_out, x_out = trace.final.s, trace.final_image_hu(MU_WATER)
        lines.append(f"{case.name}: final objective {trace.final.objective:.6e}")
        lines.append(f"{case.name}: trace residuals " + " ".join(f"{r:.6e}" for r in trace.trace_residuals))
    io.save_sinogram(out / "y_corr", y_out)
    io.save_image(out / "x_corr", x_out)
    io.save_png16(out / "preview" / "x_corr.png", x_out.values)
    (out / "case.json").write_text((case / "case.json").read_text())
    (out / "method.txt").write_text(method + "\n")
    return lines


def cmd_correct(method: str, input_dir, out_dir, config_path=None, jobs: int = 1) -> list[str]:
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose one of {', '.join(METHODS)}")
    Config(CORRECT_DEFAULTS, config_path)  # validate before any compute
    cases = case_dirs(input_dir)
    single = len(cases) == 1 and cases[0] == Path(input_dir)
    jobs_list = [(method, c, Path(out_dir) if single else Path(out_dir) / c.name, config_path) for c in cases]
    return [line for lines in _map(_correct_case, jobs_list, jobs) for line in lines]


# ---------------------------------------------------------------- eval

def _result_image(rdir: Path, case_name: str, single: bool, field: str | None = None) -> Path:
    base = rdir if single else rdir / case_name
    if field:
        return base / field
    for name in ("x_corr", "x_ma"):
        if io.field_exists(base / name):
            return base / name
    return base / "x_corr"


def cmd_eval(gt_dir, result_dirs, out_csv, groups=None, labels=None, field=None) -> Path:
    """Score result images against ``x_gt``; ``field`` overrides the x_corr / x_ma lookup."""
    gt_cases = case_dirs(gt_dir)
    single = len(gt_cases) == 1 and gt_cases[0] == Path(gt_dir)
    missing = []
    plan = []
    for k, rdir in enumerate(map(Path, result_dirs)):
        tags = [rdir / "method.txt", rdir / gt_cases[0].name / "method.txt"]
        if labels:
            label = labels[k]
        elif any(t.exists() for t in tags):
            label = next(t for t in tags if t.exists()).read_text().strip()
        else:
            label = rdir.name
        for case in gt_cases:
            img = _result_image(rdir, case.name, single, field)
            if not io.field_exists(img):
                missing.append(str(img))
            plan.append((label, case, img))
    for case in gt_cases:
        for name in ("x_gt", "mask"):
            if not io.field_exists(case / name):
                missing.append(str(case / name))
    if missing:
        raise FileNotFoundError("missing files: " + ", ".join(sorted(set(missing))))
    rows = []
    for label, case, img_path in plan:
        meta = json.loads((case / "case.json").read_text())
        gt = io.load_image(case / "x_gt", Unit.HU)
        mask = io.load_image(case / "mask", Unit.BINARY, gt.grid.pixel_size)
        img = io.load_image(img_path, Unit.HU, gt.grid.pixel_size)
        if img.grid != gt.grid:
            raise ValueError(f"{img_path} is {img.grid.shape}, ground truth is {gt.grid.shape}")
        rows.append((int(meta["case_id"]), int(meta["metal_size_px"]), label,
                     psnr(img, gt, exclude_mask=mask if mask.values.any() else None), ssim(img, gt)))
    return write_report(out_csv, rows, groups)


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dudomar", description="Dual-domain metal artifact reduction pipeline.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize metal-corrupted cases")
    s.add_argument("config", nargs="?", help="INI config file")
    s.add_argument("out_dir", nargs="?", help="output directory")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--dump-defaults", action="store_true", help="print the default config and exit")

    c = sub.add_parser("correct", help="run a correction method on simulated cases")
    c.add_argument("method", nargs="?", choices=METHODS)
    c.add_argument("input_dir", nargs="?")
    c.add_argument("out_dir", nargs="?")
    c.add_argument("--config", help="INI config file")
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--dump-defaults", action="store_true", help="print the default config and exit")

    e = sub.add_parser("eval", help="PSNR/SSIM report against ground truth")
    e.add_argument("gt_dir")
    e.add_argument("result_dirs", nargs="+")
    e.add_argument("--out", required=True, help="CSV path")
    e.add_argument("--groups", type=int, default=None, help="adjacent sizes per summary group")
    e.add_argument("--labels", help="comma-separated method labels, one per result directory")
    e.add_argument("--field", help="image to score in each result case (default: x_corr, else x_ma)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            if args.dump_defaults:
                print(dump_defaults(SIMULATE_DEFAULTS), end="")
                return EXIT_OK
            if not (args.config and args.out_dir):
                parser.error("simulate needs CONFIG and OUT_DIR")
            for case in cmd_simulate(args.config, args.out_dir, args.jobs):
                print(case)
        elif args.command == "correct":
            if args.dump_defaults:
                print(dump_defaults(CORRECT_DEFAULTS), end="")
                return EXIT_OK
            if not (args.method and args.input_dir and args.out_dir):
                parser.error("correct needs METHOD, INPUT_DIR and OUT_DIR")
            for line in cmd_correct(args.method, args.input_dir, args.out_dir, args.config, args.jobs):
                print(line)
        else:
            labels = args.labels.split(",") if args.labels else None
            if labels and len(labels) != len(args.result_dirs):
                raise ConfigError("--labels needs one label per result directory")
            print(cmd_eval(args.gt_dir, args.result_dirs, args.out, args.groups, labels, args.field))
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverDivergenceError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
