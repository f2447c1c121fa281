"""Run configuration: a strict JSON document with unit-suffixed keys.

Unknown keys are rejected with the key path and the line it appears on.
Every section is optional; absent keys take the defaults below.
"""

import copy
import json
import re

from .errors import SpinPairError


class ConfigError(SpinPairError, ValueError):
    """Invalid configuration document."""


_NUM = (int, float)

# key -> (type(s), default). Nested dicts are sub-schemas, lists of dicts use a
# one-element list holding the item schema.
PAIR = {
    "g_a": (_NUM, 2.008),
    "g_b": (_NUM, 2.008),
    "J_MHz": (_NUM, 0.0),
    "Dd_MHz": (_NUM, 0.0),
    "B0_mT": (_NUM, 350.0),
    "larmor_split_MHz": (_NUM, None),  # if given, g_b is set from it
}

LEVEL = {
    "label": (str, None),
    "b1_mT": (_NUM, None),
}

COMPONENT = {
    "kappa": (_NUM, 0.5),
    "g": (_NUM, 2.008),
    "detuning_MHz": (_NUM, 0.0),
    "amplitude_au": (_NUM, 1.0),
    "decay_ns": (_NUM, None),
    "phase_rad": (_NUM, 0.0),
}

TRANSIENT = {
    "source": (str, "components"),
    "tau_start_ns": (_NUM, 0.0),
    "tau_stop_ns": (_NUM, 800.0),
    "tau_step_ns": (_NUM, 2.0),
    "noise_sigma_au": (_NUM, 0.0),
    "snr": (_NUM, None),
    "levels": ([LEVEL], None),
    "pair": (PAIR, None),
    "carrier_offset_MHz": (_NUM, 0.0),
    "regime": (str, "weak"),
    "g": (_NUM, 2.008),
    "components": ([COMPONENT], None),
}

SWEEP_PEAK = {
    "g_par": (_NUM, None),
    "g_perp": (_NUM, None),
    "hwhm_mT": (_NUM, 0.1),
    "amplitude_au": (_NUM, 1.0),
}

SWEEP = {
    "carrier_MHz": (_NUM, 9700.0),
    "b0_start_mT": (_NUM, None),
    "b0_stop_mT": (_NUM, None),
    "b0_step_mT": (_NUM, 0.01),
    "angles_deg": ([_NUM], None),
    "noise_sigma_au": (_NUM, 0.0),
    "peaks": ([SWEEP_PEAK], None),
    "threshold_sigma": (_NUM, 2.0),
}

ANALYSIS = {
    "window": (str, "rectangular"),
    "zero_pad_factor": (int, 4),
    "k_peaks": (int, 2),
    "band_MHz": ([_NUM], None),
    "xi": (_NUM, None),
    "g": (_NUM, 2.008),
    "consistency_sigma": (_NUM, 1.0),
}

ORACLE_COMPARE = {
    "b1_mT": (_NUM, 0.3558),  # g gamma b1 / 2pi = 10 MHz at g = 2.008
    "n_tau": (int, 50),
    "tau_stop_ns": (_NUM, 800.0),
    "n_samples": (int, 401),
    "span": (_NUM, 20.0),
    "separation_MHz": (_NUM, 2000.0),
}

SCHEMA = {
    "seed": (int, 0),
    "output_dir": (str, None),
    "transient": (TRANSIENT, None),
    "sweep": (SWEEP, None),
    "analysis": (ANALYSIS, None),
    "oracle_compare": (ORACLE_COMPARE, None),
}

_CHOICES = {
    "transient.source": ("oracle", "analytic", "components"),
    "transient.regime": ("weak", "strong", "strong_small_b1"),
    "analysis.window": ("rectangular", "hann"),
}


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(path, text):
    key = path.rsplit(".", 1)[-1].split("[")[0]
    line = _line_of(text, key)
    return f"{path} (line {line})" if line else path


def _check(value, schema, path, text):
    if isinstance(schema, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{_where(path, text)}: expected an object")
        out = {}
        for k, v in value.items():
            sub = f"{path}.{k}" if path else k
            if k not in schema:
                raise ConfigError(f"{_where(sub, text)}: unknown key {k!r}")
            out[k] = _check(v, schema[k][0], sub, text)
        for k, (kind, default) in schema.items():
            if k not in out:
                out[k] = copy.deepcopy(default) if not isinstance(kind, dict) else None
        return out
    if isinstance(schema, list):
        if not isinstance(value, list):
            raise ConfigError(f"{_where(path, text)}: expected a list")
        return [_check(v, schema[0], f"{path}[{i}]", text) for i, v in enumerate(value)]
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, schema):
        raise ConfigError(f"{_where(path, text)}: expected {_type_name(schema)}, got {value!r}")
    if path in _CHOICES and value not in _CHOICES[path]:
        raise ConfigError(f"{_where(path, text)}: {value!r} not one of {_CHOICES[path]}")
    return value


def _type_name(t):
    if t is _NUM:
        return "a number"
    return {int: "an integer", str: "a string"}.get(t, str(t))


def validate(doc, text=None):
    """Check ``doc`` against the schema and fill in defaults."""
    return _check(doc, SCHEMA, "", text)


def loads(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return validate(doc, text)


def load(path):
    with open(path) as fh:
        text = fh.read()
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
