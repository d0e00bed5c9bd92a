"""Run configuration: an INI-style key/value file with nested sections.

Example::

    [run]
    kind = flow
    T = 0.1
    safety = 0.5
    snapshot_every = 10
    output = flat_static

    [geometry]
    chart = slab
    n = 2
    N0 = 17
    Nt = 17

    [initial]
    family = flat

    [boundary]
    gamma = induced
    eta = induced

Per-side overrides go in ``[boundary.lower]`` / ``[boundary.upper]``.  Only
names from the built-in catalogues are accepted; no expressions are
evaluated.
"""
import configparser
from dataclasses import dataclass, field
import hashlib
import math

import numpy as np

from .data import WARP_PROFILES

RUN_KINDS = ("flow", "rotsym")
CHARTS = ("slab", "ball", "radial")
FAMILIES = ("flat", "warped", "hemisphere", "round_sphere", "random", "snapshot")
GAMMA_RULES = ("induced", "scaled")
ETA_RULES = ("induced", "constant", "linear", "compatible")
BACKGROUNDS = ("frozen", "bump")
CHART_FAMILIES = {"slab": ("flat", "warped", "random", "snapshot"),
                  "ball": ("flat", "hemisphere", "round_sphere", "random", "snapshot"),
                  "radial": ("flat", "hemisphere")}

# section -> key -> (type, default); default None means required
SCHEMA = {
    "run": {"kind": (str, "flow"), "T": (float, None), "safety": (float, 0.5),
            "snapshot_every": (int, 0), "snapshot_times": (list, ""),
            "snapshot_levels": (int, 0), "output": (str, "run"), "rng_seed": (int, 0),
            "rm_stop": (float, math.inf)},
    "geometry": {"chart": (str, "slab"), "n": (int, None), "N0": (int, None),
                 "Nt": (int, 3), "L": (float, 1.0), "dtheta": (float, 3e-3)},
    "initial": {"family": (str, "flat"), "profile": (str, "cosh"),
                "amplitude": (float, 0.5), "path": (str, ""), "modes": (int, 2)},
    "boundary": {"gamma": (str, "induced"), "gamma_rate": (float, 0.0),
                 "eta": (str, "induced"), "eta_value": (float, 0.0),
                 "eta_rate": (float, 0.0)},
    "background": {"kind": (str, "frozen"), "amplitude": (float, 0.0)},
}
SIDE_SECTIONS = ("boundary.lower", "boundary.upper", "boundary.outer")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _fmt(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _convert(kind, text, where, problems):
    text = text.strip()
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is list:
            return [float(s) for s in text.replace(";", ",").split(",") if s.strip()]
        return text
    except ValueError:
        problems.append(f"{where}: cannot parse {text!r} as {kind.__name__}")
        return None


@dataclass
class RunConfig:
    sections: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.sections[key]

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def boundary(self, side):
        """Boundary settings for a side, with per-side overrides applied."""
        out = dict(self.sections["boundary"])
        out.update(self.sections.get(f"boundary.{side}", {}))
        return out

    @property
    def kind(self):
        return self.sections["run"]["kind"]

    def canonical(self):
        return serialize(self)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def with_resolution(self, N0, Nt=None):
        """Copy with a different grid size (used by the convergence harness)."""
        sec = {k: dict(v) for k, v in self.sections.items()}
        sec["geometry"]["N0"] = int(N0)
        if Nt is not None:
            sec["geometry"]["Nt"] = int(Nt)
        return RunConfig(sec)


def parse(text):
    """Parse configuration text; raises :class:`ConfigError` listing every problem."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    problems = []
    sections = {}
    for name in cp.sections():
        if name not in SCHEMA and name not in SIDE_SECTIONS:
            problems.append(f"unknown section [{name}]")
    for name, keys in SCHEMA.items():
        raw = cp[name] if cp.has_section(name) else {}
        out = {}
        for key in raw:
            if key not in keys:
                problems.append(f"[{name}] unknown key {key!r}")
        for key, (kind, default) in keys.items():
            if key in raw:
                out[key] = _convert(kind, raw[key], f"[{name}] {key}", problems)
            elif default is None:
                problems.append(f"[{name}] missing required key {key!r}")
            else:
                out[key] = default if kind is not list else _convert(
                    list, default, name, problems)
        sections[name] = out
    for name in SIDE_SECTIONS:
        if cp.has_section(name):
            keys = SCHEMA["boundary"]
            out = {}
            for key in cp[name]:
                if key not in keys:
                    problems.append(f"[{name}] unknown key {key!r}")
                    continue
                out[key] = _convert(keys[key][0], cp[name][key], f"[{name}] {key}", problems)
            sections[name] = out
    cfg = RunConfig(sections)
    if not problems:
        problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def load(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    return parse(text)


def serialize(cfg):
    """Canonical text: sections and keys in schema order, values normalised."""
    lines = []
    names = list(SCHEMA) + [s for s in SIDE_SECTIONS if s in cfg.sections]
    for name in names:
        sec = cfg.sections.get(name, {})
        if not sec:
            continue
        lines.append(f"[{name}]")
        order = list(SCHEMA["boundary"] if name.startswith("boundary.") else SCHEMA[name])
        for key in order:
            if key in sec:
                lines.append(f"{key} = {_fmt(sec[key])}")
        lines.append("")
    return "\n".join(lines)


def validate(cfg):
    """List of violations; empty when the configuration is usable."""
    p = []
    run, geo, ini = cfg["run"], cfg["geometry"], cfg["initial"]
    if run["kind"] not in RUN_KINDS:
        p.append(f"[run] kind must be one of {RUN_KINDS}")
    if not run["T"] > 0:
        p.append("[run] T must be positive")
    if not 0 < run["safety"] <= 1:
        p.append("[run] safety must lie in (0, 1]")
    if run["snapshot_every"] < 0 or run["snapshot_levels"] < 0:
        p.append("[run] snapshot cadence must be non-negative")
    if any(not 0 < s <= run["T"] for s in run["snapshot_times"]):
        p.append("[run] snapshot_times must lie in (0, T]")
    if not run["rm_stop"] > 0:
        p.append("[run] rm_stop must be positive")
    if geo["chart"] not in CHARTS:
        p.append(f"[geometry] chart must be one of {CHARTS}")
    if run["kind"] == "rotsym" and geo["chart"] != "radial":
        p.append("[geometry] rotsym runs need chart = radial")
    if run["kind"] == "flow" and geo["chart"] == "radial":
        p.append("[geometry] flow runs need a slab or ball chart")
    nmin = 2 if run["kind"] == "rotsym" else 1
    if geo["n"] < nmin:
        p.append(f"[geometry] n must be >= {nmin}")
    if geo["N0"] < 4:
        p.append("[geometry] N0 must be >= 4")
    if geo["chart"] == "slab" and geo["Nt"] < 3:
        p.append("[geometry] Nt must be >= 3")
    if not geo["L"] > 0 or not geo["dtheta"] > 0:
        p.append("[geometry] L and dtheta must be positive")
    if ini["family"] not in FAMILIES:
        p.append(f"[initial] family must be one of {FAMILIES}")
    allowed = CHART_FAMILIES.get(geo["chart"], FAMILIES)
    if ini["family"] in FAMILIES and ini["family"] not in allowed:
        p.append(f"[initial] family {ini['family']!r} is not available on "
                 f"{geo['chart']} charts (choose from {allowed})")
    if ini["family"] == "warped" and ini["profile"] not in WARP_PROFILES:
        p.append(f"[initial] profile must be one of {sorted(WARP_PROFILES)}")
    if ini["family"] == "snapshot" and not ini["path"]:
        p.append("[initial] snapshot family needs a path")
    for name in ["boundary"] + [s for s in SIDE_SECTIONS if s in cfg.sections]:
        b = cfg.sections[name]
        if "gamma" in b and b["gamma"] not in GAMMA_RULES:
            p.append(f"[{name}] gamma must be one of {GAMMA_RULES}")
        if "eta" in b and b["eta"] not in ETA_RULES:
            p.append(f"[{name}] eta must be one of {ETA_RULES}")
        rate = b.get("gamma_rate", cfg["boundary"]["gamma_rate"])
        if 1 + rate * run["T"] <= 0:
            p.append(f"[{name}] gamma scaling 1 + gamma_rate T must stay positive")
    if cfg["background"]["kind"] not in BACKGROUNDS:
        p.append(f"[background] kind must be one of {BACKGROUNDS}")
    return p


def snapshot_schedule(cfg):
    """Explicit snapshot times, including dyadic levels T 2^-k if requested."""
    T = cfg["run"]["T"]
    times = set(cfg["run"]["snapshot_times"])
    levels = cfg["run"]["snapshot_levels"]
    times.update(T * 2.0 ** (-k) for k in range(levels + 1) if levels)
    return tuple(sorted(times))


def rng(cfg):
    return np.random.default_rng(cfg["run"]["rng_seed"])
