"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 a verification
or reproduction assertion failed.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize
from .detection import ScanResult, add_poisson_noise
from .engine import run_scan
from .grid import GridError
from .oracles import ScanAnalysisError, fringe_period, peak_separation
from .optics import SamplingError
from .pump import pump_intensity_scan
from .scanfile import write_scan
from .verify import report, run_suite

MODE_ALIASES = {"fixed": "fixed-signal", "fixed-signal": "fixed-signal", "fixed-idler": "fixed-idler",
                "same": "same", "opposite": "opposite"}
LEAKAGE_WARN = 1e-6
RATIO_TOL = 0.03


def builtin_config(name: str) -> ExperimentConfig:
    text = resources.files("spdc_imaging").joinpath("configs", f"{name}.cfg").read_text()
    return parse_config(text)


def _load(args, default: str | None = None) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif default:
        cfg = builtin_config(default)
    else:
        raise ConfigError("--config is required for this command")
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _announce(cfg: ExperimentConfig) -> None:
    how = "auto" if cfg.dx_auto else "given"
    print(f"grid: n={cfg.n} dx={cfg.dx * 1e6:.4g} um ({how}), span {cfg.n * cfg.dx * 1e3:.4g} mm")
    g = cfg.geometry
    if g.f is not None:
        print(f"geometry: O={g.O:.6g} m I={g.I:.6g} m f={g.f:.6g} m m={g.m:.6g} "
              f"({'on' if g.is_imaging() else 'off'} the imaging condition)")
    else:
        print(f"geometry: no lens, z1={g.z1:.6g} m z={g.z:.6g} m")


def _pump(cfg: ExperimentConfig) -> ScanResult:
    res = pump_intensity_scan(cfg.pump, cfg.geometry, cfg.grid, cfg.positions, cfg.slit_width, cfg.bandlimit)
    if cfg.noise_enabled:
        res.rates = add_poisson_noise(res.rates, cfg.mean_counts, cfg.seed)
        res.normalization = f"poisson counts, mean_counts={cfg.mean_counts:g} at peak"
    return res


def _coincidence(cfg: ExperimentConfig, mode: str, workers: int) -> ScanResult:
    res = run_scan(cfg.scan_config(mode), cfg.experiment(), workers=workers)
    leak = res.meta.get("window_leakage", 0.0)
    if leak > LEAKAGE_WARN:
        print(f"warning: {mode} scan changes by {leak:.2e} of peak when the momentum "
              "acceptance is narrowed; refine the grid", file=sys.stderr)
    return res


def _write(out: Path, name: str, res: ScanResult, cfg: ExperimentConfig) -> Path:
    path = write_scan(out / name, res, serialize(cfg, resolved=True))
    print(f"wrote {path}")
    return path


# -------------------------------------------------------------- commands


def cmd_pump_scan(args) -> int:
    cfg = _load(args)
    _announce(cfg)
    _write(Path(args.out), "pump_scan.txt", _pump(cfg), cfg)
    return 0


def cmd_coincidence_scan(args) -> int:
    cfg = _load(args)
    mode = MODE_ALIASES[args.mode] if args.mode else cfg.mode
    cfg = cfg.with_overrides(mode=mode)
    _announce(cfg)
    _write(Path(args.out), f"coincidence_{mode}.txt", _coincidence(cfg, mode, args.workers), cfg)
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args) if args.config else None
    if cfg is not None:
        _announce(cfg)
    checks = run_suite(cfg, seed=args.seed or 0)
    text = report(checks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify_report.txt").write_text(text)
    print(text, end="")
    return 2 if any(c.passed is False for c in checks) else 0


def _ratio_line(name: str, value: float, target: float) -> tuple[str, bool]:
    ok = abs(value / target - 1) <= RATIO_TOL
    return f"{name}: {value:.4f} (expected {target:g} +/- 3%) {'PASS' if ok else 'FAIL'}", ok


def _reproduce(args, default: str, measure, label: str, unit_scale: float) -> int:
    cfg = _load(args, default)
    if default == "fig3" and not cfg.geometry.is_imaging():
        raise ConfigError("reproduce-fig3 needs a lens geometry on the imaging condition (set z = auto)")
    if default == "fig2" and cfg.geometry.f is not None:
        raise ConfigError("reproduce-fig2 models the lens-free geometry; remove f from the config")
    _announce(cfg)
    out = Path(args.out)
    scans = {"pump": _pump(cfg)}
    for mode in ("fixed-signal", "same"):
        scans[mode] = _coincidence(cfg.with_overrides(mode=mode), mode, args.workers)
    for key, res in scans.items():
        _write(out, f"{default}_{key}.txt", res, cfg.with_overrides(mode=key if key != "pump" else cfg.mode))
    try:
        values = {k: measure(v) for k, v in scans.items()}
    except ScanAnalysisError as exc:
        text = f"FAIL: could not measure the scans: {exc}\n"
        (out / f"{default}_summary.txt").write_text(text)
        print(text, end="")
        return 2
    lines = [f"{label} {k}: {v * unit_scale:.5g} mm" for k, v in values.items()]
    ok = True
    for key, target in (("same", 1.0), ("fixed-signal", 2.0)):
        line, good = _ratio_line(f"ratio {key} / pump", values[key] / values["pump"], target)
        lines.append(line)
        ok &= good
    text = "\n".join(lines) + "\n"
    (out / f"{default}_summary.txt").write_text(text)
    print(text, end="")
    return 0 if ok else 2


def cmd_fig2(args) -> int:
    return _reproduce(args, "fig2", fringe_period, "fringe period", 1e3)


def cmd_fig3(args) -> int:
    return _reproduce(args, "fig3", peak_separation, "peak separation", 1e3)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spdc-imaging", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment config file")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--seed", type=int, default=None, help="override the noise seed")
        sp.add_argument("--workers", type=int, default=1, help="threads for coincidence sums")

    sp = sub.add_parser("pump-scan", help="pump intensity at the detector plane")
    common(sp)
    sp.set_defaults(func=cmd_pump_scan)
    sp = sub.add_parser("coincidence-scan", help="coincidence scan in one detector mode")
    common(sp)
    sp.add_argument("--mode", choices=sorted(MODE_ALIASES), default=None)
    sp.set_defaults(func=cmd_coincidence_scan)
    sp = sub.add_parser("verify", help="run the invariant suite and write a report")
    common(sp, config_required=False)
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("reproduce-fig2", help="lens-free fringe transfer: pump, fixed and same scans")
    common(sp, config_required=False)
    sp.set_defaults(func=cmd_fig2)
    sp = sub.add_parser("reproduce-fig3", help="coincidence imaging: pump, fixed and same scans")
    common(sp, config_required=False)
    sp.set_defaults(func=cmd_fig3)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ConfigError, SamplingError, GridError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
