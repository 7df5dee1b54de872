"""Run configuration: a YAML document with units in the key names.

Powers are ``*_watt`` or ``*_db`` (10 log10 of a linear power gain), angles
``*_deg``, frequencies ``*_hz``. Unknown keys are rejected and every error
names the offending field and, where the document provides it, the line.
"""
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import yaml

from .detection import PROTOCOLS, DetectionSpec
from .numerics import db_to_lin
from .scenario import Interferer, Scenario

__all__ = [
    "ConfigError", "RadarThreshold", "SCASettings", "OutputSettings",
    "RunConfig", "parse_config", "load_config", "dump_config",
    "default_config_text", "MODES",
]

MODES = ("conventional", "iqscc")
OUTPUT_FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid or malformed configuration document."""


@dataclass(frozen=True)
class RadarThreshold:
    """Per-mode radar threshold: a direct value or a detection requirement."""

    rho_s_db: Optional[float] = None
    detection: Optional[DetectionSpec] = None

    def rho_s(self):
        if self.rho_s_db is not None:
            return db_to_lin(self.rho_s_db)
        from .sca import derive_rho_s
        return derive_rho_s(self.detection)


@dataclass(frozen=True)
class SCASettings:
    tol: float = 1e-4
    max_iters: int = 50
    solver: str = "CLARABEL"


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "out"
    formats: tuple = OUTPUT_FORMATS


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    radar: dict                       # mode -> RadarThreshold
    sca: SCASettings = field(default_factory=SCASettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    seed: int = 0

    def with_seed(self, seed):
        from dataclasses import replace
        return replace(self, seed=int(seed), scenario=replace(self.scenario, rng_seed=int(seed)))


# key -> (Scenario field, converter); None converter means pass through
_SCENARIO_KEYS = {
    "n_tx": ("n_tx", int),
    "n_rx": ("n_rx", int),
    "bs_power_max_watt": ("bs_power_max", float),
    "ul_power_max_watt": ("ul_power_max", float),
    "noise_power_watt": ("noise_power", float),
    "target_angle_deg": ("target_angle", float),
    "target_reflectivity_db": ("target_reflectivity", db_to_lin),
    "si_power_db": ("si_power", db_to_lin),
    "dl_angle_deg": ("dl_angle", float),
    "dl_pathloss_db": ("dl_pathloss", db_to_lin),
    "ul_angle_deg": ("ul_angle", float),
    "ul_pathloss_db": ("ul_pathloss", db_to_lin),
}
_SCENARIO_REQUIRED = ("n_tx", "n_rx", "bs_power_max_watt", "ul_power_max_watt",
                      "noise_power_watt")
_INTERFERER_KEYS = ("angle_deg", "gain_db", "phase_deg")
_DETECTION_KEYS = ("protocol", "pd_min", "pf_max", "K", "frequency_hz",
                   "temperature_k", "eta_db", "n_q")
_TOP_KEYS = ("seed", "scenario", "radar", "sca", "output")


def _line_index(text):
    """Map key paths to 1-based line numbers using the YAML node tree."""
    index = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                index[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                index[path + (i,)] = v.start_mark.line + 1
                walk(v, path + (i,))

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return index
    if root is not None:
        walk(root, ())
    return index


class _Ctx:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, msg):
        where = ".".join(str(p) for p in path)
        line = self.lines.get(tuple(path))
        loc = " (line %d)" % line if line else ""
        raise ConfigError("%s%s: %s" % (where or "<root>", loc, msg))

    def mapping(self, obj, path, allowed):
        if obj is None:
            obj = {}
        if not isinstance(obj, dict):
            self.fail(path, "expected a mapping")
        for key in obj:
            if key not in allowed:
                self.fail(tuple(path) + (key,), "unknown key %r" % (key,))
        return obj

    def number(self, obj, path, kind=float):
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            self.fail(path, "expected a number, got %r" % (obj,))
        if kind is int:
            if int(obj) != obj:
                self.fail(path, "expected an integer, got %r" % (obj,))
            return int(obj)
        val = float(obj)
        if math.isnan(val) or val == math.inf:
            self.fail(path, "must be a finite number or -inf")
        return val


def _parse_scenario(ctx, obj, seed):
    path = ("scenario",)
    obj = ctx.mapping(obj, path, tuple(_SCENARIO_KEYS) + ("interferers",))
    for key in _SCENARIO_REQUIRED:
        if key not in obj:
            ctx.fail(path + (key,), "required field missing")
    kwargs = {}
    for key, (name, conv) in _SCENARIO_KEYS.items():
        if key in obj:
            raw = ctx.number(obj[key], path + (key,), int if conv is int else float)
            kwargs[name] = conv(raw)
    if "interferers" in obj:
        items = obj["interferers"] or []
        if not isinstance(items, list):
            ctx.fail(path + ("interferers",), "expected a list")
        its = []
        for i, it in enumerate(items):
            ipath = path + ("interferers", i)
            it = ctx.mapping(it, ipath, _INTERFERER_KEYS)
            for key in ("angle_deg", "gain_db"):
                if key not in it:
                    ctx.fail(ipath + (key,), "required field missing")
            ang = ctx.number(it["angle_deg"], ipath + ("angle_deg",))
            mag = math.sqrt(db_to_lin(ctx.number(it["gain_db"], ipath + ("gain_db",))))
            phase = math.radians(ctx.number(it.get("phase_deg", 0.0), ipath + ("phase_deg",)))
            amp = mag if phase == 0.0 else complex(mag * math.cos(phase), mag * math.sin(phase))
            its.append(Interferer(angle=ang, amplitude=amp))
        kwargs["interferers"] = tuple(its)
    try:
        return Scenario(rng_seed=seed, **kwargs)
    except ValueError as exc:
        ctx.fail(path, str(exc))


def _parse_detection(ctx, obj, path):
    obj = ctx.mapping(obj, path, _DETECTION_KEYS)
    for key in ("pd_min", "pf_max"):
        if key not in obj:
            ctx.fail(path + (key,), "required field missing")
    protocol = obj.get("protocol", "CS")
    if protocol not in PROTOCOLS:
        ctx.fail(path + ("protocol",), "must be one of %s" % (PROTOCOLS,))
    kwargs = dict(
        pd_min=ctx.number(obj["pd_min"], path + ("pd_min",)),
        pf_max=ctx.number(obj["pf_max"], path + ("pf_max",)),
        K=ctx.number(obj.get("K", 1), path + ("K",), int),
        protocol=protocol,
        frequency=ctx.number(obj.get("frequency_hz", 24e9), path + ("frequency_hz",)),
        temperature=ctx.number(obj.get("temperature_k", 293.0), path + ("temperature_k",)),
        eta=db_to_lin(ctx.number(obj.get("eta_db", -110.0), path + ("eta_db",))),
    )
    if obj.get("n_q") is not None:
        kwargs["n_q"] = ctx.number(obj["n_q"], path + ("n_q",))
    try:
        return DetectionSpec(**kwargs)
    except ValueError as exc:
        ctx.fail(path, str(exc))


def _parse_radar(ctx, obj):
    path = ("radar",)
    obj = ctx.mapping(obj, path, MODES)
    out = {}
    for mode in MODES:
        if mode not in obj:
            ctx.fail(path + (mode,), "required field missing")
        mpath = path + (mode,)
        m = ctx.mapping(obj[mode], mpath, ("rho_s_db", "detection"))
        if ("rho_s_db" in m) == ("detection" in m):
            ctx.fail(mpath, "give exactly one of rho_s_db or detection")
        if "rho_s_db" in m:
            out[mode] = RadarThreshold(rho_s_db=ctx.number(m["rho_s_db"], mpath + ("rho_s_db",)))
        else:
            out[mode] = RadarThreshold(detection=_parse_detection(ctx, m["detection"],
                                                                  mpath + ("detection",)))
    return out


def _parse_sca(ctx, obj):
    path = ("sca",)
    obj = ctx.mapping(obj, path, ("tol", "max_iters", "solver"))
    tol = ctx.number(obj.get("tol", 1e-4), path + ("tol",))
    iters = ctx.number(obj.get("max_iters", 50), path + ("max_iters",), int)
    solver = obj.get("solver", "CLARABEL")
    if not tol > 0:
        ctx.fail(path + ("tol",), "must be > 0")
    if iters < 1:
        ctx.fail(path + ("max_iters",), "must be >= 1")
    if not isinstance(solver, str):
        ctx.fail(path + ("solver",), "expected a solver name")
    return SCASettings(tol=tol, max_iters=iters, solver=solver.upper())


def _parse_output(ctx, obj):
    path = ("output",)
    obj = ctx.mapping(obj, path, ("directory", "formats"))
    directory = obj.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        ctx.fail(path + ("directory",), "expected a path")
    formats = obj.get("formats", list(OUTPUT_FORMATS))
    if not isinstance(formats, list) or any(f not in OUTPUT_FORMATS for f in formats):
        ctx.fail(path + ("formats",), "formats must be a subset of %s" % (OUTPUT_FORMATS,))
    return OutputSettings(directory=directory, formats=tuple(formats))


def parse_config(text):
    """Parse and validate a YAML configuration document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = " at line %d, column %d" % (mark.line + 1, mark.column + 1) if mark else ""
        raise ConfigError("YAML parse error%s: %s" % (loc, getattr(exc, "problem", exc))) from None
    ctx = _Ctx(_line_index(text))
    doc = ctx.mapping(doc, (), _TOP_KEYS)
    seed = ctx.number(doc.get("seed", 0), ("seed",), int)
    if seed < 0:
        ctx.fail(("seed",), "must be >= 0")
    if "scenario" not in doc:
        ctx.fail(("scenario",), "required block missing")
    scenario = _parse_scenario(ctx, doc["scenario"], seed)
    if "radar" not in doc:
        ctx.fail(("radar",), "required block missing")
    return RunConfig(
        scenario=scenario,
        radar=_parse_radar(ctx, doc["radar"]),
        sca=_parse_sca(ctx, doc.get("sca")),
        output=_parse_output(ctx, doc.get("output")),
        seed=seed,
    )


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc.strerror)) from None
    return parse_config(text)


def _db(x):
    return float(round(10.0 * math.log10(x), 10))


def _canonical(cfg):
    s = cfg.scenario
    its = []
    for it in s.interferers:
        amp = complex(it.amplitude)
        its.append({"angle_deg": float(it.angle), "gain_db": _db(abs(amp) ** 2),
                    "phase_deg": float(round(math.degrees(math.atan2(amp.imag, amp.real)), 10))})
    scen = {
        "n_tx": s.n_tx, "n_rx": s.n_rx,
        "bs_power_max_watt": float(s.bs_power_max),
        "ul_power_max_watt": float(s.ul_power_max),
        "noise_power_watt": float(s.noise_power),
        "target_angle_deg": float(s.target_angle),
        "target_reflectivity_db": _db(s.target_reflectivity),
        "si_power_db": _db(s.si_power) if s.si_power > 0 else -math.inf,
        "dl_angle_deg": float(s.dl_angle), "dl_pathloss_db": _db(s.dl_pathloss),
        "ul_angle_deg": float(s.ul_angle), "ul_pathloss_db": _db(s.ul_pathloss),
        "interferers": its,
    }
    radar = {}
    for mode in MODES:
        th = cfg.radar[mode]
        if th.rho_s_db is not None:
            radar[mode] = {"rho_s_db": float(th.rho_s_db)}
        else:
            d = th.detection
            det = {"protocol": d.protocol, "pd_min": float(d.pd_min), "pf_max": float(d.pf_max),
                   "K": int(d.K), "frequency_hz": float(d.frequency),
                   "temperature_k": float(d.temperature), "eta_db": _db(d.eta)}
            if d.n_q is not None:
                det["n_q"] = float(d.n_q)
            radar[mode] = {"detection": det}
    return {
        "seed": cfg.seed,
        "scenario": scen,
        "radar": radar,
        "sca": {"tol": float(cfg.sca.tol), "max_iters": cfg.sca.max_iters, "solver": cfg.sca.solver},
        "output": {"directory": cfg.output.directory, "formats": list(cfg.output.formats)},
    }


def dump_config(cfg):
    """Canonical YAML text; ``parse_config(dump_config(c))`` reproduces ``c``."""
    return yaml.safe_dump(_canonical(cfg), sort_keys=False, default_flow_style=False)


def default_config_text():
    """Text of the shipped campaign configuration."""
    return resources.files("iqscc").joinpath("configs/campaign.yaml").read_text(encoding="utf-8")
