"""Run configuration: flat INI sections, strictly typed, unknown keys rejected."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from typing import Any, Callable

from .errors import ParseError, ValidationError

COMMANDS = ("construct", "verify", "scan-theorem1", "scan-theorem2", "scan-extremal", "laplace-demo")


def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_complex(z: complex) -> str:
    z = complex(z)
    return f"{_fmt_float(z.real)}{'+' if z.imag >= 0 or math.isnan(z.imag) else '-'}{_fmt_float(abs(z.imag))}j"


def _parse_complex(text: str) -> complex:
    return complex(text.replace(" ", ""))


@dataclass(frozen=True)
class Field:
    kind: str  # str, int, float, complex, complex_list
    default: Any = None
    choices: tuple | None = None
    check: Callable[[Any], str | None] | None = None

    def parse(self, text: str):
        text = text.strip()
        if self.kind == "str":
            v = text
        elif self.kind == "int":
            f = float(text)
            if f != int(f):
                raise ValueError(f"expected an integer, got {text!r}")
            v = int(f)
        elif self.kind == "float":
            v = float(text)
        elif self.kind == "complex":
            v = _parse_complex(text)
        elif self.kind == "complex_list":
            v = tuple(_parse_complex(p) for p in text.split(",") if p.strip())
        else:  # pragma: no cover
            raise AssertionError(self.kind)
        return v

    def emit(self, v) -> str:
        if self.kind == "str":
            return str(v)
        if self.kind == "int":
            return str(int(v))
        if self.kind == "float":
            return _fmt_float(v)
        if self.kind == "complex":
            return _fmt_complex(v)
        return ", ".join(_fmt_complex(z) for z in v)


def positive(name):
    return lambda v: None if v > 0 else f"{name} must be positive"


def nonneg(name):
    return lambda v: None if v >= 0 else f"{name} must be non-negative"


def at_least(name, lo):
    return lambda v: None if v >= lo else f"{name} must be at least {lo}"


def _eps_check(v):
    return None if v >= 0 else "epsilon must be non-negative"


SCHEMA: dict[str, dict[str, Field]] = {
    "run": {
        "command": Field("str", None, COMMANDS),
        "seed": Field("int", 0, check=nonneg("seed")),
    },
    "region": {
        "shape": Field("str", "segment", ("segment", "disk", "rectangle", "polygon")),
        "a": Field("complex", 0j),
        "b": Field("complex", 1 + 0j),
        "n": Field("int", 11, check=at_least("n", 1)),
        "center": Field("complex", 0j),
        "radius": Field("float", 1.0, check=positive("radius")),
        "rings": Field("int", 4, check=at_least("rings", 1)),
        "x0": Field("float", 0.0),
        "x1": Field("float", 1.0),
        "y0": Field("float", 0.0),
        "y1": Field("float", 1.0),
        "vertices": Field("complex_list", ()),
    },
    "target": {
        "kind": Field("str", "laplace_form", ("zero", "polynomial", "laplace_form")),
        "coefficients": Field("complex_list", ()),
        "constant": Field("complex", 0j),
    },
    "kernel": {
        "kind": Field("str", "inverse", ("inverse", "scaled_constant", "csv")),
        "value": Field("complex", 1 + 0j),
        "path": Field("str", ""),
        "A": Field("float", 1.0, check=positive("A")),
        "B": Field("float", 2.0, check=positive("B")),
        "points": Field("int", 4097, check=at_least("points", 3)),
        "smoothing_width": Field("float", 0.0, check=nonneg("smoothing_width")),
    },
    "construct": {
        "delta": Field("float", 0.1, check=positive("delta")),
        "epsilon": Field("float", 0.7, check=positive("epsilon")),
        "C": Field("complex", 0j),
        "rule": Field("str", "apdef", ("apdef", "recursive", "both")),
        "pmax": Field("float", 1e7, check=positive("pmax")),
        "lambda_grid": Field("int", 257, check=at_least("lambda_grid", 2)),
        "tail_tol": Field("float", 1e-3, check=positive("tail_tol")),
        "lipschitz": Field("float", -1.0),
        "check_points": Field("complex_list", (0j, 1j, 0.5 + 0.5j)),
        "quad_tol": Field("float", 1e-8, check=positive("quad_tol")),
        "sample_checks": Field("int", 10000, check=nonneg("sample_checks")),
    },
    "scan": {
        "delta": Field("float", 0.05, check=positive("delta")),
        "epsilon": Field("float", 0.75, check=_eps_check),
        "C": Field("complex", 0j),
        "T": Field("float", 1e5, check=positive("T")),
        "step": Field("float", 0.05, check=positive("step")),
        "delta_window": Field("float", 0.5, check=positive("delta_window")),
    },
    "laplace": {
        "mode": Field("str", "mollified", ("mollified", "fit")),
        "eps1": Field("float", 0.1, check=positive("eps1")),
        "order": Field("int", -1),
        "epsilon": Field("float", 0.05, check=positive("epsilon")),
        "max_degree": Field("int", 12, check=nonneg("max_degree")),
        "quad_tol": Field("float", 1e-10, check=positive("quad_tol")),
        "truncate_tol": Field("float", 2e-6, check=positive("truncate_tol")),
        "points": Field("int", 4097, check=at_least("points", 3)),
        "x_lo": Field("float", 0.05, check=positive("x_lo")),
        "x_hi": Field("float", 1.0, check=positive("x_hi")),
        "samples": Field("int", 20, check=at_least("samples", 1)),
    },
    "limits": {
        "max_primes": Field("int", 10**8, check=positive("max_primes")),
        "height_budget": Field("float", 1e6, check=positive("height_budget")),
        "threads": Field("int", 1, check=at_least("threads", 1)),
        "max_points": Field("int", 10**7, check=positive("max_points")),
    },
    "output": {
        "dir": Field("str", ""),
        "records": Field("str", "all", ("all", "hits", "none")),
        "plot_stride": Field("int", 1, check=at_least("plot_stride", 1)),
    },
}


class RunConfig:
    """Resolved configuration: every key of every section, typed."""

    def __init__(self, values: dict[str, dict[str, Any]]):
        self._v = {sec: dict(values.get(sec, {})) for sec in SCHEMA}
        for sec, fields in SCHEMA.items():
            for key, fd in fields.items():
                self._v[sec].setdefault(key, fd.default)

    def __getitem__(self, section: str) -> dict:
        return dict(self._v[section])

    def get(self, section: str, key: str):
        return self._v[section][key]

    @property
    def command(self) -> str:
        return self._v["run"]["command"]

    def replace(self, section: str, **kw) -> "RunConfig":
        v = {s: dict(d) for s, d in self._v.items()}
        for k, val in kw.items():
            if k not in SCHEMA[section]:
                raise ValidationError(f"unknown key {section}.{k}", field=f"{section}.{k}")
            v[section][k] = val
        out = RunConfig(v)
        validate(out)
        return out

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.emit() == other.emit()

    def __hash__(self):
        return hash(self.emit())

    def emit(self) -> str:
        """Canonical INI text; parse_config(emit()) reproduces this config."""
        lines = []
        for sec, fields in SCHEMA.items():
            lines.append(f"[{sec}]")
            for key, fd in fields.items():
                lines.append(f"{key} = {fd.emit(self._v[sec][key])}")
            lines.append("")
        return "\n".join(lines)

    def __repr__(self):
        return f"RunConfig(command={self.command!r})"


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    cur = None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip()
            if key is None and cur == section:
                return i
            continue
        if key is not None and cur == section and "=" in s:
            if s.split("=", 1)[0].strip() == key:
                return i
    return None


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse INI text. ``command`` (from the command line) fills or must match run.command."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ParseError("key outside any section", line=e.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as e:
        raise ParseError(str(e).split(":")[-1].strip() or "duplicate entry",
                         line=getattr(e, "lineno", None)) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ParseError("malformed line", line=line) from None
    values: dict[str, dict[str, Any]] = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ParseError(f"unknown section [{sec}]", line=_line_of(text, sec))
        values[sec] = {}
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ParseError(f"unknown key {key!r} in [{sec}]", line=_line_of(text, sec, key),
                                 field=f"{sec}.{key}")
            fd = SCHEMA[sec][key]
            try:
                values[sec][key] = fd.parse(raw)
            except ValueError as e:
                raise ParseError(f"cannot read {raw!r} as {fd.kind}: {e}",
                                 line=_line_of(text, sec, key), field=f"{sec}.{key}") from None
    if command is not None:
        given = values.get("run", {}).get("command")
        if given is not None and given != command:
            raise ValidationError(f"config is for command {given!r}, not {command!r}",
                                  field="run.command")
        values.setdefault("run", {})["command"] = command
    cfg = RunConfig(values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    for sec, fields in SCHEMA.items():
        for key, fd in fields.items():
            v = cfg.get(sec, key)
            if v is None:
                if sec == "run" and key == "command":
                    raise ValidationError("run.command is required", field="run.command")
                continue
            if isinstance(v, float) and not math.isfinite(v):
                raise ValidationError(f"{key} must be finite", field=f"{sec}.{key}")
            if fd.choices is not None and v not in fd.choices:
                raise ValidationError(f"{key} must be one of {', '.join(fd.choices)}",
                                      field=f"{sec}.{key}")
            if fd.check is not None:
                msg = fd.check(v)
                if msg:
                    raise ValidationError(msg, field=f"{sec}.{key}")
    k = cfg["kernel"]
    if k["A"] >= k["B"]:
        raise ValidationError("kernel A must be smaller than B", field="kernel.B")
    if k["kind"] == "csv" and not k["path"]:
        raise ValidationError("kernel path is required for kind = csv", field="kernel.path")
    r = cfg["region"]
    if r["shape"] == "polygon" and len(r["vertices"]) < 3:
        raise ValidationError("polygon needs at least 3 vertices", field="region.vertices")
    if r["shape"] == "rectangle" and (r["x0"] >= r["x1"] or r["y0"] >= r["y1"]):
        raise ValidationError("rectangle needs x0 < x1 and y0 < y1", field="region.x1")
    t = cfg["target"]
    if t["kind"] == "polynomial" and not t["coefficients"]:
        raise ValidationError("polynomial target needs coefficients", field="target.coefficients")
    lp = cfg["laplace"]
    if lp["x_lo"] >= lp["x_hi"]:
        raise ValidationError("laplace x_lo must be smaller than x_hi", field="laplace.x_hi")
    sc = cfg["scan"]
    if cfg.command == "scan-extremal" and sc["step"] > sc["delta_window"] / 10 * (1 + 1e-12):
        raise ValidationError("scan step must not exceed delta_window/10", field="scan.step")
    if cfg.command in ("scan-theorem1", "scan-theorem2", "scan-extremal"):
        if sc["T"] / sc["step"] > cfg.get("limits", "max_points"):
            raise ValidationError("T/step exceeds limits.max_points", field="scan.T")
        if sc["T"] > cfg.get("limits", "height_budget"):
            raise ValidationError("scan horizon T exceeds limits.height_budget", field="scan.T")
