"""Command-line entry point: ``zenotunnel {bands,decay,zeno,antizeno,sweep}``.

Every output is a CSV whose ``#`` header embeds the full configuration, the
package version and run diagnostics; :func:`zenotunnel.config.load_config`
accepts such a file directly.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, bands
from .config import BEGIN_MARK, END_MARK, PRESETS, RunConfig, load_config, load_preset
from .core import bloch_period
from .errors import ConfigError, FitError, NumericalError, ScheduleError
from .experiment import SurvivalCurve, interruption_sweep, make_ensemble, survival_curve

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
BAND_Q_POINTS = 101


def fmt(x) -> str:
    return f"{float(x):.12g}"


def resolve_basis(cfg: RunConfig, params) -> int:
    if cfg.numerics.basis_N is not None:
        return cfg.numerics.basis_N
    a = params.units.to_dimless(cfg.schedule.a_tunnel, "acceleration")
    return bands.choose_basis_size(params.depth_dimless, a, 1e-10)


def _header(cfg: RunConfig, command: str, extra: dict) -> list[str]:
    lines = [f"# zenotunnel {__version__} {command}", f"# {BEGIN_MARK}"]
    lines += [f"# {ln}" if ln else "#" for ln in cfg.to_text().splitlines()]
    lines.append(f"# {END_MARK}")
    lines += [f"# {k} = {v}" for k, v in extra.items()]
    return lines


def _write(path: Path, header: list[str], columns: list[str], rows) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(header) + "\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _fit_summary(curve: SurvivalCurve, params, a_tunnel: float) -> dict:
    out = {}
    t_min = 3.0 * bloch_period(params, a_tunnel)
    try:
        fit = analysis.fit_exponential_tail(curve, t_min)
        out.update(fit_t_min_us=fmt(t_min * 1e6), fit_rate_per_s=fmt(fit.rate),
                   fit_amplitude=fmt(fit.amplitude), fit_residual_rms=fmt(fit.residual_rms))
    except FitError as exc:
        out["fit"] = f"skipped ({exc})"
    if len(curve) >= 2:
        rate = analysis.effective_rate(curve)
        out["effective_rate_per_s"] = "inf" if math.isinf(rate) else fmt(rate)
    try:
        out["short_time_exponent"] = fmt(analysis.short_time_exponent(curve))
    except FitError as exc:
        out["short_time_exponent"] = f"skipped ({exc})"
    return out


def _curve_rows(curve: SurvivalCurve):
    for t, s, r in zip(curve.t_tunnel, curve.survival, curve.raw_survival):
        yield [fmt(t * 1e6), fmt(s), fmt(r), str(curve.n_ensemble)]


CURVE_COLUMNS = ["t_tunnel_us", "survival", "raw_survival", "n_ensemble"]


class Context:
    def __init__(self, cfg: RunConfig, out_dir: Path, threads: int):
        self.cfg = cfg
        self.out = out_dir
        self.threads = threads
        self.params = cfg.lattice_params()
        self.N = resolve_basis(cfg, self.params)
        self.evo = cfg.evolution_config()
        self.ensemble = make_ensemble(cfg.numerics.ensemble_count,
                                      cfg.numerics.ensemble_sampling)
        self.plan = cfg.plan()

    def run_kwargs(self):
        return dict(threads=self.threads, observable=self.cfg.numerics.observable,
                    response_tau=self.cfg.numerics.response_tau_us * 1e-6)

    def base_meta(self) -> dict:
        p = self.params
        return {
            "basis_N": self.N,
            "depth_dimless": fmt(p.depth_dimless),
            "recoil_freq_hz": fmt(p.recoil_freq),
            "v_rec_m_s": fmt(p.v_rec),
            "tau_b_tunnel_us": fmt(bloch_period(p, self.cfg.schedule.a_tunnel) * 1e6),
            "tau_b_interr_us": fmt(bloch_period(p, self.cfg.schedule.a_interr) * 1e6),
        }

    def curve(self, family, label):
        return survival_curve(self.ensemble, family, self.cfg.t_tunnel, self.params, self.evo,
                              self.N, label=label, **self.run_kwargs())

    def write_curve(self, name, command, curve):
        meta = self.base_meta() | {"label": curve.label,
                                   "normalization": fmt(curve.normalization)}
        meta |= _fit_summary(curve, self.params, self.cfg.schedule.a_tunnel)
        if curve.t_effective is not None:
            meta["t_effective_us"] = " ".join(fmt(t * 1e6) for t in curve.t_effective)
        return _write(self.out / name, _header(self.cfg, command, meta), CURVE_COLUMNS,
                      _curve_rows(curve))


def cmd_bands(ctx: Context) -> list[Path]:
    q = np.linspace(-1.0, 1.0, BAND_Q_POINTS)
    depth = ctx.params.depth_dimless
    rows = []
    for qi in q:
        e = bands.solve_bands(qi, depth, ctx.N).energies
        rows.append([fmt(qi), fmt(e[0]), fmt(e[1]), fmt(e[2])])
    meta = {"basis_N": ctx.N, "depth_dimless": fmt(depth), "energy_unit": "E_rec",
            "q_unit": "hbar*k_L"}
    return [_write(ctx.out / "bands.csv", _header(ctx.cfg, "bands", meta),
                   ["q", "E_band0", "E_band1", "E_band2"], rows)]


def cmd_decay(ctx: Context) -> list[Path]:
    curve = ctx.curve(ctx.plan.uninterrupted, "uninterrupted")
    return [ctx.write_curve("decay.csv", "decay", curve)]


def _paired(ctx: Context, command: str) -> list[Path]:
    t_interr = ctx.cfg.schedule.t_interr_us * 1e-6
    family = ctx.plan.interrupted(t_interr, max(ctx.cfg.t_tunnel))
    inter = ctx.curve(family, f"interrupted t_interr={ctx.cfg.schedule.t_interr_us:g}us")
    ref = ctx.curve(ctx.plan.uninterrupted, "uninterrupted")
    return [ctx.write_curve(f"{command}_interrupted.csv", command, inter),
            ctx.write_curve(f"{command}_reference.csv", command, ref)]


def cmd_zeno(ctx: Context) -> list[Path]:
    return _paired(ctx, "zeno")


def cmd_antizeno(ctx: Context) -> list[Path]:
    return _paired(ctx, "antizeno")


def cmd_interruption_sweep(ctx: Context, t_interr_us=None) -> list[Path]:
    durations = tuple(t_interr_us) if t_interr_us else ctx.cfg.sweep.t_interr_us
    if not durations:
        raise ConfigError("sweep needs interruption durations: [sweep] t_interr_us or --t-interr")
    curves = interruption_sweep(ctx.ensemble, ctx.plan, [t * 1e-6 for t in durations],
                                ctx.cfg.t_tunnel, ctx.evo, ctx.N, **ctx.run_kwargs())
    columns = ["t_tunnel_us"]
    for t in durations:
        columns += [f"survival_{t:g}us", f"raw_survival_{t:g}us"]
    columns.append("n_ensemble")
    rows = []
    for i, t in enumerate(curves[0].t_tunnel):
        row = [fmt(t * 1e6)]
        for c in curves:
            row += [fmt(c.survival[i]), fmt(c.raw_survival[i])]
        row.append(str(ctx.ensemble.count))
        rows.append(row)
    meta = ctx.base_meta() | {"t_interr_us": " ".join(f"{t:g}" for t in durations)}
    meta |= {f"normalization_{t:g}us": fmt(c.normalization) for t, c in zip(durations, curves)}
    return [_write(ctx.out / "sweep.csv", _header(ctx.cfg, "sweep", meta), columns, rows)]


COMMANDS = {
    "bands": cmd_bands,
    "decay": cmd_decay,
    "zeno": cmd_zeno,
    "antizeno": cmd_antizeno,
    "sweep": cmd_interruption_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="zenotunnel",
        description="Tunnelling decay of atoms in an accelerated optical lattice, "
                    "with and without repeated interruptions.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="configuration file (or a result CSV)")
        src.add_argument("--preset", choices=PRESETS, help="built-in parameter set")
        sp.add_argument("--out", type=Path, help="output directory (overrides [output])")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            sp.add_argument("--t-interr", type=float, nargs="+", metavar="US",
                            help="interruption durations in microseconds")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_preset(args.preset) if args.preset else load_config(args.config)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = args.out if args.out is not None else Path(cfg.output.directory)
        ctx = Context(cfg, out, args.threads)
        if args.command == "sweep":
            paths = cmd_interruption_sweep(ctx, args.t_interr)
        else:
            paths = COMMANDS[args.command](ctx)
    except (ConfigError, ScheduleError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
