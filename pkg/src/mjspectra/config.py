"""Run configuration: YAML loading, validation with field paths, sweeps.

Every numeric parameter is validated before any computation starts; a bad
value raises :class:`ConfigError` naming its dotted path (``quantize.delta``).
Defaults equal the tolerances quoted in the module docstrings.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .io import config_hash
from .models import HamiltonianModel, JacobiMetric, Liouville, Mechanical, model_from_config

PIPELINES = ("trace", "mjverify", "actions", "quantize", "oracle", "compare", "gaps", "larmor", "katok")
_MISSING = object()


def load_config(path) -> dict:
    """Parse a YAML (or JSON) config file into a mapping."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc.strerror})") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: not valid YAML ({exc})") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    return raw


class _Reader:
    """Typed access to a nested mapping with dotted error paths."""

    def __init__(self, raw: dict):
        self.raw = raw

    def get(self, path: str, default=_MISSING):
        node = self.raw
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is _MISSING:
                    raise ConfigError(f"{path}: required field missing")
                return default
            node = node[part]
        return node

    def number(self, path, default=_MISSING, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
        v = self.get(path, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {v!r}")
        if integer and int(v) != v:
            raise ConfigError(f"{path}: expected an integer, got {v!r}")
        v = int(v) if integer else float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{path}: must be finite")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ConfigError(f"{path}: {v} must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise ConfigError(f"{path}: {v} must be {'<' if hi_open else '<='} {hi}")
        return v

    def numbers(self, path, default=_MISSING, length=None, nonempty=True, **kw):
        v = self.get(path, default)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            v = [v]
        if not isinstance(v, (list, tuple)):
            raise ConfigError(f"{path}: expected a list of numbers, got {v!r}")
        if length is not None and len(v) != length:
            raise ConfigError(f"{path}: expected {length} values, got {len(v)}")
        if nonempty and not v:
            raise ConfigError(f"{path}: list must not be empty")
        return [_checked(path, i, x, kw) for i, x in enumerate(v)]

    def choice(self, path, options, default=_MISSING):
        v = self.get(path, default)
        if v not in options:
            raise ConfigError(f"{path}: {v!r} not one of {list(options)}")
        return v

    def flag(self, path, default=_MISSING):
        v = self.get(path, default)
        if not isinstance(v, bool):
            raise ConfigError(f"{path}: expected true/false, got {v!r}")
        return v


def _checked(path, i, x, kw):
    try:
        return _Reader({"x": x}).number("x", **kw)
    except ConfigError as exc:
        raise ConfigError(f"{path}[{i}]{str(exc)[1:]}") from None


def _range_or_list(rd: _Reader, path: str, default, **kw) -> list[float]:
    """A list, or ``{start, stop, num}`` expanded to an evenly spaced list."""
    v = rd.get(path, default)
    if isinstance(v, dict):
        sub = _Reader(v)
        a = sub.number("start")
        b = sub.number("stop")
        n = sub.number("num", lo=1, integer=True)
        vals = [a + (b - a) * j / max(n - 1, 1) for j in range(n)]
        return [_checked(path, i, x, kw) for i, x in enumerate(vals)]
    return rd.numbers(path, v, **kw)


def _model(rd: _Reader, path: str, default=_MISSING) -> HamiltonianModel | None:
    spec = rd.get(path, default)
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected a mapping")
    try:
        return model_from_config(spec)
    except ConfigError as exc:
        # model_from_config reports paths relative to "model"
        msg = str(exc)
        raise ConfigError(path + msg[len("model"):] if msg.startswith("model") else f"{path}: {msg}") from None


def liouville_form(model: HamiltonianModel, path: str = "model") -> Liouville:
    if isinstance(model, Liouville):
        return model
    if isinstance(model, JacobiMetric):
        return model.as_liouville()
    raise ConfigError(f"{path}.variant: this pipeline needs a Liouville (or Jacobi) model, got {model.variant}")


def _dioph(rd: _Reader, base: str) -> dict:
    return {"dioph_c": rd.number(f"{base}.dioph_c", 0.1, lo=0.0, lo_open=True),
            "sigma": rd.number(f"{base}.sigma", 1.5, lo=1.0, lo_open=True),
            "K_max": rd.number(f"{base}.K_max", 50, lo=1, integer=True)}


# --- per-pipeline schemas ------------------------------------------------------

def _trace(rd):
    p = {"x": rd.numbers("trace.x", length=2), "p": rd.numbers("trace.p", length=2),
         "T": rd.number("trace.T", lo=0.0, lo_open=True),
         "tol": rd.number("trace.tol", 1e-10, lo=1e-13, hi=1e-6),
         "section": None}
    if rd.get("trace.section", None) is not None:
        p["section"] = {"index": rd.choice("trace.section.index", (0, 1), 0),
                        "level": rd.number("trace.section.level", 0.0),
                        "direction": rd.choice("trace.section.direction", (1, -1), 1),
                        "n_returns": rd.number("trace.section.n_returns", 200, lo=1, integer=True)}
    return p


def _mjverify(rd):
    return {"energy": rd.number("mjverify.energy", 1.0),
            "coincidence": {"n_points": rd.number("mjverify.coincidence.n_points", 20, lo=1, integer=True),
                            "T": rd.number("mjverify.coincidence.T", 20.0, lo=0.0, lo_open=True),
                            "tol": rd.number("mjverify.coincidence.tol", 1e-11, lo=1e-13, hi=1e-6),
                            "max_distance": rd.number("mjverify.coincidence.max_distance", 1e-5, lo=0.0)},
            "torus": None if rd.get("mjverify.torus", None) is None else {
                "E": rd.number("mjverify.torus.E", 1.0, lo=0.0, lo_open=True),
                "c": rd.number("mjverify.torus.c"),
                "grid": rd.number("mjverify.torus.grid", 64, lo=8, integer=True),
                "K_max": rd.number("mjverify.torus.K_max", 64, lo=1, integer=True),
                "T": rd.number("mjverify.torus.T", 2000.0, lo=0.0, lo_open=True),
                "tol": rd.number("mjverify.torus.tol", 1e-11, lo=1e-13, hi=1e-6),
                "freq_tol": rd.number("mjverify.torus.freq_tol", 1e-4, lo=0.0),
                "det_tol": rd.number("mjverify.torus.det_tol", 1e-8, lo=0.0),
                "kam": _dioph(rd, "mjverify.torus.kam")}}


def _actions(rd):
    return {"E": _range_or_list(rd, "actions.E", _MISSING, lo=0.0, lo_open=True),
            "c": _range_or_list(rd, "actions.c", _MISSING),
            "ikam": rd.flag("actions.ikam", True),
            "kam": _dioph(rd, "actions.kam")}


def _quantize(rd):
    m = rd.get("quantize.maslov_index", None)
    if m is not None:
        m = [int(x) for x in rd.numbers("quantize.maslov_index", length=2, integer=True, lo=0)]
    return {"h": rd.numbers("quantize.h", lo=0.0, hi=0.5, lo_open=True),
            "delta": rd.number("quantize.delta", 0.5, lo=0.0, hi=1.0, lo_open=True),
            "C0": rd.number("quantize.C0", 1.0, lo=0.0, lo_open=True),
            "maslov_index": m,
            "E": rd.number("quantize.torus.E", 1.0, lo=0.0, lo_open=True),
            "c": rd.number("quantize.torus.c")}


def _oracle(rd, section="oracle", need_h=True):
    s = section
    return {"h": rd.numbers(f"{s}.h", lo=0.0, hi=0.5, lo_open=True) if need_h else None,
            "E": rd.number(f"{s}.E", 1.0, lo=0.0, lo_open=True),
            "delta": rd.number(f"{s}.delta", 0.5, lo=0.0, hi=1.0, lo_open=True),
            "C1": rd.number(f"{s}.C1", 0.2, lo=0.0, lo_open=True),
            "M": None if rd.get(f"{s}.M", None) is None else rd.number(f"{s}.M", lo=8, integer=True),
            "pad": rd.number(f"{s}.pad", 24, lo=0, integer=True),
            "method": rd.choice(f"{s}.method", ("auto", "dense", "shift-invert"), "auto")}


def _compare(rd):
    q = _quantize(rd)
    o = _oracle(rd, "oracle", need_h=False)
    return {"quantize": q, "oracle": o, "slope_min": rd.number("compare.slope_min", 1.8),
            "margin": rd.number("compare.margin", 0.05, lo=0.0)}


def _gaps(rd):
    o = _oracle(rd, "gaps")
    o["threshold_power"] = rd.number("gaps.threshold_power", 3.0, lo=0.0, lo_open=True)
    o["threshold_const"] = rd.number("gaps.threshold_const", 1.0, lo=0.0, lo_open=True)
    o["min_fraction"] = rd.number("gaps.min_fraction", 0.5, lo=0.0, hi=1.0)
    return o


def _larmor(rd):
    p = {"h": rd.number("larmor.h", lo=0.0, hi=0.5, lo_open=True),
         "delta": rd.number("larmor.delta", 0.5, lo=0.0, hi=1.0, lo_open=True),
         "k1": None if rd.get("larmor.k1", None) is None else rd.numbers("larmor.k1"),
         "M": rd.number("larmor.M", 128, lo=64, integer=True),
         "count": rd.number("larmor.count", 20, lo=1, integer=True),
         "grid": rd.number("larmor.grid", 64, lo=8, integer=True),
         "profile": None, "torus": None}
    prof = rd.get("larmor.profile", None)
    if prof is not None:
        from .trig import TrigSeries
        try:
            p["profile"] = TrigSeries.from_dict(prof)
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"larmor.profile: {exc}") from None
    elif rd.get("larmor.torus", None) is not None:
        ratio = rd.get("larmor.torus.ratio", None)
        if ratio is not None:
            ratio = rd.numbers("larmor.torus.ratio", length=2, integer=True)
            if ratio[1] <= 0:
                raise ConfigError("larmor.torus.ratio: denominator must be positive")
        p["torus"] = {"E": rd.number("larmor.torus.E", 1.0, lo=0.0, lo_open=True),
                      "c": rd.number("larmor.torus.c"),
                      "ratio": ratio,
                      "solve_c": rd.flag("larmor.torus.solve_c", False)}
    else:
        raise ConfigError("larmor: give either 'profile' or 'torus'")
    return p


def _katok(rd):
    return {"alpha": rd.number("katok.alpha", lo=-1.0, hi=1.0, lo_open=True, hi_open=True),
            "latitudes": _range_or_list(rd, "katok.latitudes", {"start": -1.2, "stop": 1.2, "num": 25},
                                        lo=-(0.5 * math.pi - 0.1), hi=0.5 * math.pi - 0.1),
            "period_tol": rd.number("katok.period_tol", 1e-6, lo=0.0),
            "angle_tol": rd.number("katok.angle_tol", 1e-4, lo=0.0),
            "det_tol": rd.number("katok.det_tol", 1e-6, lo=0.0)}


_SCHEMAS = {"trace": _trace, "mjverify": _mjverify, "actions": _actions, "quantize": _quantize,
            "oracle": _oracle, "compare": _compare, "gaps": _gaps, "larmor": _larmor, "katok": _katok}
_NEEDS_MODEL = {"trace", "mjverify", "actions", "quantize", "oracle", "compare", "gaps"}


@dataclass
class RunConfig:
    pipeline: str
    raw: dict
    params: dict
    model: HamiltonianModel | None = None
    model_G: HamiltonianModel | None = None
    seed: int = 0
    hash: str = ""
    sweep: tuple[str, list] | None = field(default=None)


def validate(pipeline: str, raw: dict) -> RunConfig:
    """Check every field of ``raw`` needed by ``pipeline``.

    Raises
    ------
    ConfigError
    """
    if pipeline not in PIPELINES:
        raise ConfigError(f"pipeline: unknown {pipeline!r}; choose one of {', '.join(PIPELINES)}")
    declared = raw.get("pipeline")
    if declared is not None and declared != pipeline:
        raise ConfigError(f"pipeline: config declares {declared!r} but {pipeline!r} was requested")
    rd = _Reader(raw)
    seed = rd.number("seed", 0, lo=0, integer=True)
    sweep = None
    if rd.get("sweep", None) is not None:
        par = rd.get("sweep.parameter")
        if not isinstance(par, str) or not par:
            raise ConfigError("sweep.parameter: expected a dotted field path")
        vals = rd.get("sweep.values")
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.values: axis must be a non-empty list")
        # every point of the axis must validate before anything runs
        for v in vals:
            validate(pipeline, with_value({k: w for k, w in raw.items() if k != "sweep"}, par, v))
        sweep = (par, list(vals))
    model = _model(rd, "model") if pipeline in _NEEDS_MODEL or "model" in raw else None
    model_G = _model(rd, "model_G", None)
    if pipeline == "mjverify" and model_G is None:
        if not isinstance(model, Mechanical):
            raise ConfigError("model_G: required unless model is a mechanical system (its Jacobi metric is used)")
        model_G = JacobiMetric(model, rd.number("mjverify.energy", 1.0))
    if pipeline in ("actions", "quantize", "oracle", "compare", "gaps"):
        liouville_form(model)
    params = _SCHEMAS[pipeline](rd) if sweep is None else {}
    if pipeline == "larmor" and sweep is None and params["torus"] is not None:
        if model is None:
            raise ConfigError("model: larmor.torus needs the H model")
        if model_G is None:
            if not isinstance(model, Mechanical):
                raise ConfigError("model_G: required unless model is a mechanical system")
            model_G = JacobiMetric(model, 1.0)
    return RunConfig(pipeline, raw, params, model, model_G, seed, config_hash(raw), sweep)


def with_value(raw: dict, path: str, value) -> dict:
    """Deep copy of ``raw`` with the dotted ``path`` set to ``value``."""
    out = copy.deepcopy(raw)
    node = out
    parts = path.split(".")
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value
    return out
