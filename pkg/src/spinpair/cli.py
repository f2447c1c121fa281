"""spinpair command line: simulate -> analyze -> extract, plus sweep and oracle-compare.

Exit codes: 0 success, 2 configuration or parse error, 3 I/O error,
4 analysis failure.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, validate
from . import config as config_mod
from .constants import CONSTANTS, mhz_to_rad_per_us
from .datafiles import DataFormatError, atomic_write, config_hash, dumps, read_record, write_record
from .errors import InconsistentMeasurementError, InvalidInputError, SpinPairError
from .fitting import LorentzianPeak, decay_from_maxima, fit_lorentzians
from .gfactor import AngleSeries, axial_g, fit_anisotropy, g_factor, resonance_field
from .nutation import CouplingRegime, nutation_curve, oracle_deviation, rabi_frequency
from .quantum import PulseSpec, SpinPairParams, rabi_transient_oracle
from .records import Measured, TransientRecord, default_tau_grid
from .spectral import (RabiComponentTable, decay_width_consistency,
                       detuning_to_field, extract_components, fft_magnitude,
                       fit_spectrum_peaks, kappa_ratio, larmor_detuning, noise_floor_sigma)
from .synth import OscComponent, noise_for_snr, synthesize_sweep, transient_model

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_ANALYSIS = 0, 2, 3, 4


class AnalysisFailure(SpinPairError):
    pass


# ------------------------------------------------------------------ helpers

def _measured(m):
    return None if m is None else {"value": m[0], "sigma": m[1]}


def _load_config(args):
    if args.config:
        cfg = config_mod.load(args.config)
    else:
        cfg = validate({})
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _out_dir(args, cfg):
    return Path(args.out or cfg.get("output_dir") or ".")


def _ext(fmt):
    return ".json" if fmt == "json" else ".csv"


def _safe(label):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in str(label))


def _sidecar(cfg, **extra):
    side = {"seed": cfg["seed"], "config_sha256": config_hash(cfg),
            "generator_version": __version__}
    side.update(extra)
    return side


# ------------------------------------------------------------------ simulate

def _pair_params(pair):
    pair = pair or validate({"transient": {"pair": {}}})["transient"]["pair"]
    g_b = pair["g_b"]
    if pair["larmor_split_MHz"] is not None:
        g_b = pair["g_a"] - pair["larmor_split_MHz"] / (CONSTANTS.mhz_per_mt_per_g * pair["B0_mT"])
    return SpinPairParams(pair["g_a"], g_b, mhz_to_rad_per_us(pair["J_MHz"]),
                          mhz_to_rad_per_us(pair["Dd_MHz"]), pair["B0_mT"])


def _levels(tr):
    levels = tr["levels"] or [{"label": "B1", "b1_mT": 0.1}]
    out = []
    for i, lv in enumerate(levels):
        if lv["b1_mT"] is None:
            raise ConfigError(f"transient.levels[{i}].b1_mT is required")
        if lv["b1_mT"] < 0:
            raise ConfigError(f"transient.levels[{i}].b1_mT must be nonnegative")
        out.append((lv["label"] or f"level{i}", float(lv["b1_mT"])))
    if len({lab for lab, _ in out}) != len(out):
        raise ConfigError("transient.levels labels must be unique")
    return out


def simulate_transients(cfg):
    """Noisy transient records for every configured B1 level."""
    tr = cfg["transient"]
    grid = default_tau_grid(tr["tau_stop_ns"], tr["tau_step_ns"], tr["tau_start_ns"])
    records = []
    for i, (label, b1) in enumerate(_levels(tr)):
        source = tr["source"]
        if source == "oracle":
            params = _pair_params(tr["pair"])
            pulse = PulseSpec(b1, params.omega_a + mhz_to_rad_per_us(tr["carrier_offset_MHz"]))
            q = rabi_transient_oracle(params, pulse, grid).q
        elif source == "analytic":
            q = nutation_curve(CouplingRegime(tr["regime"]), b1, tr["g"], grid).q
        else:
            comps = tr["components"]
            if not comps:
                raise ConfigError("transient.components is required for source 'components'")
            oscs = [OscComponent(
                        float(rabi_frequency(c["kappa"], b1, c["g"],
                                             mhz_to_rad_per_us(c["detuning_MHz"]))),
                        c["amplitude_au"],
                        math.inf if c["decay_ns"] is None else c["decay_ns"],
                        c["phase_rad"])
                    for c in comps]
            q = transient_model(oscs, grid)
        sigma = tr["noise_sigma_au"]
        if tr["snr"] is not None and np.any(q != 0):
            sigma = noise_for_snr(q, tr["snr"])
        if sigma < 0:
            raise ConfigError("transient.noise_sigma_au must be nonnegative")
        if sigma > 0:
            q = q + np.random.default_rng([cfg["seed"], i]).normal(0.0, sigma, grid.size)
        meta = {"source": source, "b1_label": label, "b1_mT": b1, "noise_sigma_au": sigma}
        records.append(TransientRecord(grid, q, meta))
    return records


def _sweep_cfg(cfg):
    sw = cfg["sweep"]
    if sw is None:
        raise ConfigError("configuration has no 'sweep' section")
    angles = sw["angles_deg"] or []
    if not sw["peaks"]:
        raise ConfigError("sweep.peaks is required")
    peaks = []
    for i, pk in enumerate(sw["peaks"]):
        if pk["g_par"] is None:
            raise ConfigError(f"sweep.peaks[{i}].g_par is required")
        # a missing g_perp means an isotropic line; the config itself stays untouched
        peaks.append(dict(pk, g_perp=pk["g_par"] if pk["g_perp"] is None else pk["g_perp"]))
    return dict(sw, peaks=peaks), angles


def simulate_sweeps(cfg):
    sw, angles = _sweep_cfg(cfg)
    if not angles:
        raise ConfigError("sweep.angles_deg is required")
    omega = mhz_to_rad_per_us(sw["carrier_MHz"])
    centers = [resonance_field(axial_g(a, p["g_par"], p["g_perp"]), omega)
               for a in angles for p in sw["peaks"]]
    pad = 15 * max(p["hwhm_mT"] for p in sw["peaks"])
    lo = sw["b0_start_mT"] if sw["b0_start_mT"] is not None else min(centers) - pad
    hi = sw["b0_stop_mT"] if sw["b0_stop_mT"] is not None else max(centers) + pad
    grid = lo + sw["b0_step_mT"] * np.arange(int(round((hi - lo) / sw["b0_step_mT"])) + 1)
    records = []
    for j, a in enumerate(angles):
        peaks = [LorentzianPeak(float(resonance_field(axial_g(a, p["g_par"], p["g_perp"]), omega)),
                                p["hwhm_mT"], p["amplitude_au"]) for p in sw["peaks"]]
        rec = synthesize_sweep(peaks, grid, sw["noise_sigma_au"], seed=[cfg["seed"], 1000 + j],
                               angle_deg=a, omega_carrier=omega)
        rec.meta["seed"] = cfg["seed"]
        records.append(rec)
    return records


def cmd_simulate(args, cfg):
    if cfg["transient"] is None and cfg["sweep"] is None:
        raise ConfigError("nothing to simulate: add a 'transient' or 'sweep' section")
    out = _out_dir(args, cfg)
    written = []
    if cfg["transient"] is not None:
        for rec in simulate_transients(cfg):
            path = out / f"transient_{_safe(rec.meta['b1_label'])}{_ext(args.format)}"
            written += write_record(rec, path, args.format, _sidecar(cfg))
    if cfg["sweep"] is not None:
        for rec in simulate_sweeps(cfg):
            path = out / f"sweep_{rec.meta['angle_deg']:g}deg{_ext(args.format)}"
            written += write_record(rec, path, args.format, _sidecar(cfg))
    for p in written:
        print(p)
    return EXIT_OK


# ------------------------------------------------------------------ analyze

def _peak_dict(pk):
    return {"center_MHz": _measured((pk.center, pk.center_err)),
            "hwhm_MHz": _measured((pk.hwhm, pk.hwhm_err)),
            "amplitude_au": _measured((pk.amplitude, pk.amplitude_err))}


def _decay_dict(rep):
    return {"status": rep.status, "decay_time_ns": _measured(rep.decay_time),
            "amplitude_au": _measured(rep.amplitude), "n_maxima": len(rep.maxima),
            "reason": rep.reason}


def cmd_analyze(args, cfg):
    if not args.files:
        raise ConfigError("analyze needs at least one transient file")
    an = cfg["analysis"] or validate({"analysis": {}})["analysis"]
    records = []
    for f in args.files:
        rec = read_record(f)
        if not isinstance(rec, TransientRecord):
            raise DataFormatError(f"{f}: not a transient file")
        if not rec.is_uniform():
            raise DataFormatError(f"{f}: tau grid is not uniform")
        records.append(rec)
    labels = [r.meta.get("b1_label") or Path(f).stem for r, f in zip(records, args.files)]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate B1 labels among inputs: {labels}")
    scales = [r.meta.get("b1_mT") for r in records]
    out = _out_dir(args, cfg)
    spectra = []
    for rec, label, f in zip(records, labels, args.files):
        sp = fft_magnitude(rec, an["window"], an["zero_pad_factor"])
        sp.meta["b1_label"] = label
        write_record(sp, out / f"spectrum_{_safe(label)}{_ext(args.format)}", args.format,
                     _sidecar(cfg, source_file=Path(f).name))
        spectra.append(sp)
    band = tuple(an["band_MHz"]) if an["band_MHz"] else None
    k = an["k_peaks"]
    report = {"inputs": [Path(f).name for f in args.files], "labels": labels,
              "analysis": an, "table": None, "levels": []}
    try:
        if k == 2:
            table = extract_components(spectra, labels, scales, band)
            report["table"] = table.to_dict()
        level_peaks = [fit_spectrum_peaks(sp, k, band) for sp in spectra]
    except SpinPairError as exc:
        raise AnalysisFailure(f"{exc}; spectra written to {out}") from exc
    for rec, sp, label, peaks in zip(records, spectra, labels, level_peaks):
        noise = noise_floor_sigma(sp) if sp.meta["window"] == "rectangular" else 0.0
        rep = decay_from_maxima(rec.tau_ns, rec.q, peaks[0].center, noise)
        report["levels"].append({"b1_label": label, "b1_mT": rec.meta.get("b1_mT"),
                                 "noise_sigma_au": noise,
                                 "fitted_peaks": [_peak_dict(p) for p in peaks],
                                 "decay": _decay_dict(rep)})
    path = out / "components.json"
    atomic_write(path, dumps(report))
    print(path)
    for lv in report["levels"]:
        centers = ", ".join(f"{p['center_MHz']['value']:.4g}" for p in lv["fitted_peaks"])
        print(f"{lv['b1_label']}: peaks at {centers} MHz; {lv['decay']['status']}")
    return EXIT_OK


# ------------------------------------------------------------------ extract

def _guard(fn):
    try:
        return fn()
    except InconsistentMeasurementError as exc:
        return {"error": str(exc), "n_sigma": exc.n_sigma}
    except InvalidInputError as exc:
        return {"error": str(exc)}


def extract_report(doc, xi=None, g=2.008, n_sigma=1.0):
    """Physics report (detuning, kappa ratio, width consistency) from an analyze report."""
    if not doc.get("table"):
        raise ConfigError("component table missing (analyze with k_peaks = 2)")
    table = RabiComponentTable.from_dict(doc["table"])
    if len(table) != 2:
        raise ConfigError(f"need a table with two B1 levels, got {len(table)}")
    e = sorted(table.entries, key=lambda r: (r.b1_scale is None, r.b1_scale or 0))
    if xi is None:
        if e[0].b1_scale and e[1].b1_scale:
            xi = e[1].b1_scale / e[0].b1_scale
        else:
            raise ConfigError("xi not given and B1 amplitudes missing from the table")
    report = {"xi": xi, "g": g, "levels": [r.b1_label for r in e], "detuning": {},
              "kappa_ratio": None, "consistency": []}
    for comp in ("L", "H"):
        def one(comp=comp):
            d = larmor_detuning(getattr(e[0], f"omega_{comp}"), getattr(e[1], f"omega_{comp}"), xi)
            return {"MHz": _measured(d), "mT": _measured(detuning_to_field(d, g))}
        report["detuning"][comp] = _guard(one)
    report["kappa_ratio"] = _guard(
        lambda: _measured(kappa_ratio(RabiComponentTable([e[0], e[1]]))))
    decays = {lv["b1_label"]: lv["decay"] for lv in doc.get("levels", [])}
    for r in e:
        dec = decays.get(r.b1_label)
        entry = {"b1_label": r.b1_label}
        if not dec or dec["status"] != "decay":
            entry["status"] = "no decay detected"
        else:
            T = Measured(dec["decay_time_ns"]["value"], dec["decay_time_ns"]["sigma"])
            rep = decay_width_consistency(T, r.width_L, n_sigma)
            entry.update(status="compared", expected_width_MHz=_measured(rep.expected_width),
                         width_L_MHz=_measured(rep.width), discrepancy_sigma=rep.discrepancy,
                         agrees=rep.agrees)
        report["consistency"].append(entry)
    return report


def cmd_extract(args, cfg):
    an = cfg["analysis"] or validate({"analysis": {}})["analysis"]
    try:
        doc = json.loads(Path(args.table).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{args.table}: line {exc.lineno}: {exc.msg}") from exc
    xi = args.xi if args.xi is not None else an["xi"]
    g = args.g if args.g is not None else an["g"]
    try:
        report = extract_report(doc, xi, g, an["consistency_sigma"])
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{args.table}: malformed component table ({exc})") from exc
    path = _out_dir(args, cfg) / "physics.json"
    atomic_write(path, dumps(report))
    print(path)
    for comp, d in report["detuning"].items():
        if "error" in d:
            print(f"detuning {comp}: {d['error']}")
        else:
            print(f"detuning {comp}: {d['MHz']['value']:.4g} +- {d['MHz']['sigma']:.2g} MHz "
                  f"({d['mT']['value']:.4g} +- {d['mT']['sigma']:.2g} mT)")
    kr = report["kappa_ratio"]
    print("kappa_H/kappa_L: " + (kr["error"] if "error" in kr
                                 else f"{kr['value']:.4g} +- {kr['sigma']:.2g}"))
    return EXIT_OK


# ------------------------------------------------------------------ sweep

def sweep_report(records, sw):
    """Per-angle Lorentzian fits, g series per peak and the anisotropy verdicts.

    Peaks are numbered by fitted amplitude at each angle, strongest first.
    """
    angles = [r.meta["angle_deg"] for r in records]
    if len(set(angles)) < 3:
        raise ConfigError(f"need at least 3 distinct angles for a verdict, got {len(set(angles))}")
    k = len(sw["peaks"])
    omega = mhz_to_rad_per_us(sw["carrier_MHz"])
    per_angle, g_vals = [], [[] for _ in range(k)]
    for rec in records:
        try:
            _, peaks = fit_lorentzians(rec.b0_mT, rec.q, k)
        except SpinPairError as exc:
            raise AnalysisFailure(f"angle {rec.meta['angle_deg']}: {exc}") from exc
        peaks = sorted(peaks, key=lambda p: -p.amplitude)
        rows = []
        for i, pk in enumerate(peaks):
            g = g_factor(omega, pk.center)
            sg = g * pk.center_err / pk.center
            g_vals[i].append((g, sg))
            rows.append({"peak": i + 1, "center_mT": _measured((pk.center, pk.center_err)),
                         "hwhm_mT": _measured((pk.hwhm, pk.hwhm_err)),
                         "amplitude_au": _measured((pk.amplitude, pk.amplitude_err)),
                         "g": _measured((g, sg))})
        per_angle.append({"angle_deg": rec.meta["angle_deg"], "peaks": rows})
    verdicts = []
    for i in range(k):
        gs = np.array(g_vals[i])
        try:
            fit = fit_anisotropy(AngleSeries(angles, gs[:, 0], gs[:, 1]), sw["threshold_sigma"])
        except SpinPairError as exc:
            raise AnalysisFailure(f"peak {i + 1}: {exc}") from exc
        verdicts.append({"peak": i + 1, "g_par": _measured(fit.g_par),
                         "g_perp": _measured(fit.g_perp),
                         "difference": _measured(fit.difference),
                         "effect_size": fit.effect_size, "verdict": fit.verdict})
    return {"carrier_MHz": sw["carrier_MHz"], "angles_deg": angles, "fits": per_angle,
            "anisotropy": verdicts}


def cmd_sweep(args, cfg):
    sw, angles = _sweep_cfg(cfg)
    if len(set(angles)) < 3:
        raise ConfigError(f"sweep.angles_deg needs at least 3 distinct angles, got {len(set(angles))}")
    records = simulate_sweeps(cfg)
    out = _out_dir(args, cfg)
    for rec in records:
        write_record(rec, out / f"sweep_{rec.meta['angle_deg']:g}deg{_ext(args.format)}",
                     args.format, _sidecar(cfg))
    report = sweep_report(records, sw)
    path = out / "anisotropy.json"
    atomic_write(path, dumps(report))
    print(path)
    for v in report["anisotropy"]:
        d = v["difference"]
        print(f"peak {v['peak']}: g_par - g_perp = {d['value']:.3g} +- {d['sigma']:.2g} -> {v['verdict']}")
    return EXIT_OK


# ------------------------------------------------------------------ oracle-compare

def cmd_oracle_compare(args, cfg):
    oc = cfg["oracle_compare"] or validate({"oracle_compare": {}})["oracle_compare"]
    tr = cfg["transient"] or {}
    pair = dict(tr.get("pair") or validate({"transient": {"pair": {}}})["transient"]["pair"])
    pair.update(J_MHz=0.0, Dd_MHz=0.0, larmor_split_MHz=oc["separation_MHz"])
    params = _pair_params(pair)
    taus = np.linspace(0.0, oc["tau_stop_ns"], oc["n_tau"])
    dev, scale, analytic, oracle = oracle_deviation(params, oc["b1_mT"], taus,
                                                   oc["n_samples"], oc["span"])
    result = {"max_relative_deviation": dev, "amplitude_scale": scale, "tau_ns": taus,
              "analytic": analytic, "oracle": oracle, "settings": oc}
    if args.out:
        path = Path(args.out) / "oracle_compare.json"
        atomic_write(path, dumps(result))
    print(f"max relative deviation: {dev:.6g}")
    return EXIT_OK


# ------------------------------------------------------------------ entry point

COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "extract": cmd_extract,
    "sweep": cmd_sweep,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="data file format")
    parser = argparse.ArgumentParser(prog="spinpair", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write synthetic transients and sweeps")
    p = sub.add_parser("analyze", parents=[common], help="FFT, component table and decay report")
    p.add_argument("files", nargs="*", help="transient files, one per B1 level")
    p = sub.add_parser("extract", parents=[common], help="detuning, kappa ratio, width check")
    p.add_argument("table", help="components.json written by analyze")
    p.add_argument("--xi", type=float, help="B1 ratio between the two levels")
    p.add_argument("--g", type=float, help="g factor for the field conversion")
    sub.add_parser("sweep", parents=[common], help="angle-resolved fits and anisotropy verdicts")
    sub.add_parser("oracle-compare", parents=[common],
                   help="max deviation of the analytic transient from the ensemble oracle")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, DataFormatError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SpinPairError as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
