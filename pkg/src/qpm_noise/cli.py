"""``qpm-noise`` command-line front end.

Every subcommand writing to ``--out FILE`` also writes ``FILE.manifest.json``
recording the parameters, seed, tool version and SHA-256 digests of inputs
and outputs. Failures exit non-zero with a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_CONFIG, load_config
from .dispersion import data_dir
from .errors import ConfigError
from .poling_mc import ErrorKind, ErrorModel, pedestal_estimate
from .qpm_core import ALL_GEOMETRIES, ProcessGeometry
from .solver import ScanWindow, find_peaks
from .spectra import (
    DetectedPeak,
    VoigtComponent,
    assign_orders,
    detect_peaks,
    fit_voigt_sum,
    infer_period,
    read_trace,
    format_trace,
    spdc_peaks_in,
    synthesize_spectrum,
)

PEAK_COLUMNS = ["geometry", "m", "lambda_s_nm", "lambda_i_nm", "bw_ghz", "bw_pm", "dldT_pm_per_K", "rel_weight", "extrapolated"]


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, code=2)


def _fail(kind, message, violations=None, code=1):
    doc = {"error": kind, "message": message}
    if violations:
        doc["violations"] = violations
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    sys.exit(code)


# --- argument parsing helpers ---------------------------------------------

def _range(text, n=2):
    parts = text.split(":")
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"expected {n} colon-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numeric: {text!r}") from None


def _window(text):
    lo, hi = _range(text)
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError(f"window needs 0 < lo < hi, got {text!r}")
    return lo, hi


def _orders(text):
    lo, hi = _range(text)
    if lo != int(lo) or hi != int(hi) or lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"orders need integers 1 <= lo <= hi, got {text!r}")
    return int(lo), int(hi)


def _dk_grid(text):
    start, stop, step = _range(text, 3)
    if step <= 0 or stop <= start or start < 0:
        raise argparse.ArgumentTypeError(f"dk grid needs 0 <= start < stop and step > 0, got {text!r}")
    n = int(round((stop - start) / step)) + 1
    return start + step * np.arange(n)


def _geometries(text):
    try:
        return tuple(ProcessGeometry.parse(g) for g in text.split(",") if g.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(kind=float, allow_zero=False):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a {kind.__name__}: {text!r}") from None
        if v < 0 or (v == 0 and not allow_zero):
            raise argparse.ArgumentTypeError(f"must be {'>=' if allow_zero else '>'} 0, got {text!r}")
        return v
    return conv


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _fix_sign_args(argv):
    # "--geometries -+,+-" would be read as an option; glue the value on
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--geometries", "--geometry"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


# --- output helpers -------------------------------------------------------

def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, (np.ndarray, tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (ProcessGeometry, ErrorKind)):
        return v.value
    if isinstance(v, np.generic):
        return v.item()
    return v


def _emit(args, text, inputs=()):
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.write_text(text)
    params = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func", "out", "command")}
    manifest = {
        "tool": "qpm-noise",
        "version": __version__,
        "subcommand": args.command,
        "config": params.pop("config", None),
        "seed": params.pop("seed", None),
        "parameters": params,
        "inputs": {str(p): _digest(p) for p in inputs if p is not None and Path(p).exists()},
        "outputs": {out.name: _digest(out)},
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _config_path(args):
    if args.config is not None:
        return args.config
    return str(data_dir() / DEFAULT_CONFIG)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(v):
    return f"{v:.10g}"


# --- subcommands ----------------------------------------------------------

def cmd_predict(args):
    cfg = load_config(_config_path(args))
    win = ScanWindow(args.window[0], args.window[1], args.geometries, args.orders, args.tol, args.grid_step_nm)
    peaks = find_peaks(cfg, win, workers=args.threads)
    rows = [
        [p.geometry.value, p.order, _g(p.signal_nm), _g(p.idler_nm), _g(p.bandwidth_ghz), _g(p.bandwidth_pm),
         _g(p.dlambda_dT_pm_per_k), _g(p.rel_weight), int(p.extrapolated)]
        for p in peaks
    ]
    _emit(args, _csv_text(PEAK_COLUMNS, rows), [_config_path(args)])


def cmd_pedestal(args):
    cfg = load_config(_config_path(args))
    duty = cfg.duty_cycle if args.duty_cycle is None else args.duty_cycle
    model = ErrorModel(cfg.domain_length_um, duty, args.sigma_um, ErrorKind(args.kind))
    res = pedestal_estimate(model, cfg.length_mm, args.trials, args.dk_grid, seed=args.seed, workers=args.threads, backend=args.backend)
    rows = [[_g(k), _g(m), _g(s), _g(i)] for k, m, s, i in zip(res.dk, res.mean, res.std, res.ideal)]
    _emit(args, _csv_text(["dk_rad_per_um", "mean", "std", "ideal"], rows), [_config_path(args)])


def cmd_fit_raman(args):
    trace = read_trace(args.trace)
    fit = fit_voigt_sum(trace, args.components, baseline=args.baseline, window=args.window)
    pump = args.pump_nm
    if pump is None:
        pump = load_config(_config_path(args)).pump_nm
    doc = fit.to_dict(pump_nm=pump)
    doc["pump_nm"] = pump
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n", [args.trace])


def cmd_detect(args):
    trace = read_trace(args.trace)
    peaks = detect_peaks(trace, prominence=args.prominence, min_width_nm=args.min_width_nm)
    rows = [[_g(p.center_nm), _g(p.height), _g(p.fwhm_nm), _g(p.prominence)] for p in peaks]
    _emit(args, _csv_text(["center_nm", "height", "fwhm_nm", "prominence"], rows), [args.trace])


def _read_peaks(path):
    with open(path) as fh:
        rows = list(csv.DictReader(row for row in fh if not row.startswith("#")))
    if not rows:
        return []
    key = "center_nm" if "center_nm" in rows[0] else "lambda_s_nm" if "lambda_s_nm" in rows[0] else None
    if key is None:
        raise UsageError(f"{path}: need a center_nm or lambda_s_nm column")
    out = []
    for r in rows:
        def num(name):
            return float(r[name]) if r.get(name) not in (None, "") else float("nan")
        out.append(DetectedPeak(float(r[key]), num("height"), num("fwhm_nm"), num("prominence")))
    return out


def cmd_assign(args):
    cfg = load_config(_config_path(args))
    peaks = _read_peaks(args.peaks)
    result = assign_orders(peaks, cfg, args.geometries, args.tolerance_nm, args.orders)
    doc = {"tolerance_nm": args.tolerance_nm, "assignments": [a.to_dict() for a in result]}
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n", [_config_path(args), args.peaks])


def cmd_infer_period(args):
    cfg = load_config(_config_path(args))
    if (args.centers is None) == (args.peaks is None):
        raise UsageError("give exactly one of --centers or --peaks")
    centers = args.centers if args.centers is not None else [p.center_nm for p in _read_peaks(args.peaks)]
    est = infer_period(centers, cfg, args.geometry, orders=args.orders)
    doc = {
        "geometry": args.geometry.value,
        "centers_nm": centers,
        "orders": args.orders,
        "period_um": est.period_um,
        "std_um": est.std_um,
        "period_ref_um": est.period_ref_um,
        "pair_periods_um": list(est.pair_periods),
        "consistent": est.consistent,
        "temperature_c": cfg.temperature_c,
    }
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n", [_config_path(args), args.peaks])


def cmd_synth(args):
    cfg = load_config(_config_path(args))
    if args.duty_cycle is not None:
        cfg = replace(cfg, duty_cycle=args.duty_cycle)
    lo, hi = args.window
    peaks = []
    if args.geometries:
        peaks = spdc_peaks_in(cfg, lo, hi, args.geometries, args.orders, workers=args.threads)
    pedestal = args.pedestal_level
    if args.pedestal_csv is not None:
        data = np.loadtxt(args.pedestal_csv, delimiter=",", skiprows=1)
        pedestal = (data[:, 0], data[:, 1] * args.pedestal_scale)
    raman = []
    if args.raman is not None:
        doc = json.loads(Path(args.raman).read_text())
        raman = [VoigtComponent(c["center"], c["gamma"], c["sigma"], c["amplitude"]) for c in doc["components"]]
    trace = synthesize_spectrum(
        cfg, (lo, hi), args.resolution_nm, peaks=peaks, pedestal=pedestal, raman=raman,
        peak_scale=args.peak_scale, step_nm=args.step_nm, calibration=args.calibrate,
    )
    _emit(args, format_trace(trace), [_config_path(args), args.pedestal_csv, args.raman])


def _calibration(text):
    try:
        value, at = text.split("@")
        return float(value), float(at)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected VALUE@NM, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    common.add_argument("--threads", type=_positive(int), default=os.cpu_count() or 1, help="worker threads (default: all cores)")
    common.add_argument("--out", default=None, help="output file; a .manifest.json is written next to it")

    cfg_arg = argparse.ArgumentParser(add_help=False)
    cfg_arg.add_argument("--config", default=None, help="crystal config JSON (default: bundled ppKTP converter)")

    p = _Parser(prog="qpm-noise", description="Noise-spectrum prediction and analysis for QPM frequency converters.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("predict", parents=[common, cfg_arg], help="list phase-matched SPDC peaks")
    s.add_argument("--window", type=_window, default=(1470.0, 1620.0), help="signal window lo:hi in nm")
    s.add_argument("--geometries", type=_geometries, default=ALL_GEOMETRIES, help="comma list of --,-+,+-,++")
    s.add_argument("--orders", type=_orders, default=(1, 50), help="order range lo:hi")
    s.add_argument("--grid-step-nm", type=_positive(), default=0.05)
    s.add_argument("--tol", type=_positive(), default=1e-6, help="root tolerance in rad/um")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("pedestal", parents=[common, cfg_arg], help="Monte-Carlo poling-error pedestal")
    s.add_argument("--sigma-um", type=_positive(allow_zero=True), required=True, help="boundary jitter std in um")
    s.add_argument("--trials", type=_positive(int), default=1000)
    s.add_argument("--dk-grid", type=_dk_grid, default="0:2.0:0.001", help="start:stop:step in rad/um")
    s.add_argument("--kind", choices=[k.value for k in ErrorKind], default=ErrorKind.JITTER.value)
    s.add_argument("--duty-cycle", type=float, default=None, help="override the config duty cycle")
    s.add_argument("--backend", choices=["compiled", "python"], default=None)
    s.set_defaults(func=cmd_pedestal)

    s = sub.add_parser("fit-raman", parents=[common, cfg_arg], help="fit a sum of Voigt lines to a trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--components", type=_positive(int), required=True)
    s.add_argument("--window", type=_window, default=None)
    s.add_argument("--baseline", choices=["linear", "constant", "none"], default="linear")
    s.add_argument("--pump-nm", type=_positive(), default=None, help="pump wavelength for Raman shifts (default: from config)")
    s.set_defaults(func=cmd_fit_raman)

    s = sub.add_parser("detect", parents=[common], help="detect peaks in a trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--prominence", type=_positive(allow_zero=True), default=0.0)
    s.add_argument("--min-width-nm", type=_positive(allow_zero=True), default=0.0)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("assign", parents=[common, cfg_arg], help="assign detected peaks to QPM orders")
    s.add_argument("--peaks", required=True, help="CSV with a center_nm (or lambda_s_nm) column")
    s.add_argument("--geometries", type=_geometries, default=ALL_GEOMETRIES)
    s.add_argument("--tolerance-nm", type=_positive(), default=2.0)
    s.add_argument("--orders", type=_orders, default=(1, 60))
    s.set_defaults(func=cmd_assign)

    s = sub.add_parser("infer-period", parents=[common, cfg_arg], help="poling period from peak spacing")
    s.add_argument("--centers", type=_floats, default=None, help="comma-separated peak centers in nm")
    s.add_argument("--peaks", default=None, help="CSV with a center_nm column")
    s.add_argument("--geometry", type=ProcessGeometry.parse, required=True)
    s.add_argument("--orders", type=_ints, default=None, help="orders of the peaks, if not consecutive")
    s.set_defaults(func=cmd_infer_period)

    s = sub.add_parser("synth", parents=[common, cfg_arg], help="synthesize a model noise spectrum")
    s.add_argument("--window", type=_window, default=(1470.0, 1620.0))
    s.add_argument("--resolution-nm", type=_positive(), default=1.82)
    s.add_argument("--step-nm", type=_positive(), default=None)
    s.add_argument("--geometries", type=_geometries, default=(ProcessGeometry.CO_COUNTER, ProcessGeometry.COUNTER_CO))
    s.add_argument("--orders", type=_orders, default=(1, 60))
    s.add_argument("--duty-cycle", type=float, default=None)
    s.add_argument("--peak-scale", type=_positive(), default=1.0)
    s.add_argument("--pedestal-level", type=_positive(allow_zero=True), default=None)
    s.add_argument("--pedestal-csv", default=None, help="output of the pedestal subcommand")
    s.add_argument("--pedestal-scale", type=_positive(), default=1.0)
    s.add_argument("--raman", default=None, help="Voigt JSON from fit-raman")
    s.add_argument("--calibrate", type=_calibration, default=None, help="VALUE@NM anchor for absolute units")
    s.set_defaults(func=cmd_synth)
    return p


def run(argv=None):
    """Parse ``argv`` and execute; returns the process exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_fix_sign_args(argv))
    if getattr(args, "duty_cycle", None) is not None and not 0 < args.duty_cycle < 1:
        _fail("UsageError", f"--duty-cycle must be in (0, 1), got {args.duty_cycle}", code=2)
    try:
        args.func(args)
    except ConfigError as exc:
        _fail("ConfigError", str(exc), exc.violations)
    except UsageError as exc:
        _fail("UsageError", str(exc), code=2)
    except (ValueError, OSError) as exc:
        _fail(type(exc).__name__, str(exc))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
