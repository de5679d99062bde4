"""Run configuration and its key-value text format.

Grammar, one entry per line::

    # comment
    [model]                      # optional section header
    alpha = {constant: 0.5}      # key inside the current section
    noise.mode = space_independent   # or a fully dotted key anywhere

Field values are ``{constant: v}``, ``{cosine: base, amp, mode}`` (meaning
``base + amp cos(mode pi x)``) or ``{file: path}`` naming a whitespace
separated list of per-cell values.  Unknown keys are errors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .model import ModelParams, SystemState, constant_field, cosine_field, validate_params
from .noise import CoefficientFamily, NoiseSpec
from .spatial import Grid
from .stepper import StepConfig


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class AnalysisConfig:
    window_frac: float = 0.5
    eps_slope: float = 0.01
    eps_perm: float = 0.01
    p: float = 0.5
    # extra constant initial infected levels for permanence checks
    perm_i0: tuple[float, ...] = ()
    ic_ratio: float = 2.0

    def __post_init__(self):
        if not 0 <= self.window_frac < 1:
            raise ValueError(f"window_frac must lie in [0, 1), got {self.window_frac!r}")
        if not 0 < self.p < 1:
            raise ValueError(f"p must lie in (0, 1), got {self.p!r}")
        if self.eps_slope < 0 or self.eps_perm < 0:
            raise ValueError("classification thresholds must be >= 0")
        if not self.ic_ratio >= 1:
            raise ValueError(f"ic_ratio must be >= 1, got {self.ic_ratio!r}")


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    step: StepConfig
    horizon: float
    params: ModelParams
    noise: NoiseSpec
    s0: np.ndarray
    i0: np.ndarray
    seed: int = 0
    n_paths: int = 100
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self):
        validate_params(self.params, self.grid)
        for name in ("s0", "i0"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (self.grid.n,):
                raise ValueError(f"size mismatch: {name} has shape {v.shape}, grid has {self.grid.n} cells")
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
            object.__setattr__(self, name, v)
        if not self.horizon >= self.step.dt:
            raise ValueError(f"horizon {self.horizon!r} must be at least dt {self.step.dt!r}")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")

    def initial_state(self) -> SystemState:
        return SystemState(self.s0, self.i0, 0.0)

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


# key -> (kind, default); a default of ... marks a required key
_SCHEMA = {
    "grid.n": ("int", 128),
    "time.dt": ("float", 1e-3),
    "time.horizon": ("float", ...),
    "time.record_every": ("int", 10),
    "model.lambda": ("field", ...),
    "model.mu1": ("field", ...),
    "model.mu2": ("field", ...),
    "model.alpha": ("field", ...),
    "model.k1": ("float", ...),
    "model.k2": ("float", ...),
    "noise.mode": ("word", ...),
    "noise.family": ("word", None),
    "noise.a": ("float", None),
    "noise.q": ("float", None),
    "noise.r": ("float", None),
    "noise.K": ("int", None),
    "noise.sigma1": ("float", 0.0),
    "noise.sigma2": ("float", 0.0),
    "noise.tail_tol": ("float", 1e-6),
    "init.S0": ("field", ...),
    "init.I0": ("field", ...),
    "mc.seed": ("int", 0),
    "mc.n_paths": ("int", 100),
    "analysis.window_frac": ("float", 0.5),
    "analysis.eps_slope": ("float", 0.01),
    "analysis.eps_perm": ("float", 0.01),
    "analysis.p": ("float", 0.5),
    "analysis.perm_I0": ("floats", ()),
    "analysis.ic_ratio": ("float", 2.0),
}

_FIELD_RE = re.compile(r"^\{\s*(\w+)\s*:\s*(.*?)\s*\}$")


def _number(text: str, line: int, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", line) from None


def _parse_value(kind: str, text: str, line: int, key: str, base_dir: Path | None):
    if kind == "float":
        return _number(text, line, key)
    if kind == "int":
        v = _number(text, line, key)
        if not np.isfinite(v) or v != int(v):
            raise ConfigError(f"{key}: expected an integer, got {text!r}", line)
        return int(v)
    if kind == "word":
        if not re.fullmatch(r"[A-Za-z_][\w-]*", text):
            raise ConfigError(f"{key}: expected a name, got {text!r}", line)
        return text
    if kind == "floats":
        return tuple(_number(t.strip(), line, key) for t in text.strip("[]").split(",") if t.strip())
    m = _FIELD_RE.match(text)
    if not m:
        raise ConfigError(f"{key}: expected {{constant: v}}, {{cosine: base, amp, mode}} "
                          f"or {{file: path}}, got {text!r}", line)
    form, args = m.group(1), m.group(2)
    if form == "constant":
        return ("constant", _number(args, line, key))
    if form == "cosine":
        parts = [a.strip() for a in args.strip("[]").split(",")]
        if len(parts) != 3:
            raise ConfigError(f"{key}: cosine profile needs base, amp, mode", line)
        return ("cosine", *(_number(a, line, key) for a in parts))
    if form == "file":
        path = Path(args)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            values = np.loadtxt(path, dtype=float, ndmin=1).ravel()
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot read field file {str(path)!r}: {exc}", line) from None
        return ("file", values)
    raise ConfigError(f"{key}: unknown field form {form!r}", line)


def _build_field(spec, grid: Grid, key: str, line: int) -> np.ndarray:
    if spec[0] == "constant":
        values = constant_field(grid, spec[1])
    elif spec[0] == "cosine":
        base, amp, mode = spec[1:]
        values = cosine_field(grid, base, amp, mode)
    else:
        values = spec[1]
        if values.shape != (grid.n,):
            raise ConfigError(f"size mismatch: {key} file holds {values.size} values, grid has {grid.n} cells", line)
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"{key}: NaN or infinite value", line)
    if np.any(values < 0):
        what = "negative rate" if key.startswith("model.") else "negative initial density"
        raise ConfigError(f"{what} in {key}", line)
    return values


def parse_config(text: str, base_dir=None) -> RunConfig:
    """Parse and validate a configuration; raises :class:`ConfigError`."""
    base_dir = None if base_dir is None else Path(base_dir)
    raw: dict[str, tuple[object, int]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*(\w+)\s*\]", line)
        if m:
            section = m.group(1)
            continue
        if "=" not in line:
            raise ConfigError(f"syntax error: expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not value:
            raise ConfigError(f"syntax error: missing value for {key!r}", lineno)
        if "." not in key and section is not None:
            key = f"{section}.{key}"
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first set on line {raw[key][1]})", lineno)
        raw[key] = (_parse_value(_SCHEMA[key][0], value, lineno, key, base_dir), lineno)

    values, lines = {}, {}
    for key, (kind, default) in _SCHEMA.items():
        if key in raw:
            values[key], lines[key] = raw[key]
        elif default is ...:
            raise ConfigError(f"missing required key {key!r}")
        else:
            values[key], lines[key] = default, None

    def guarded(keys, build):
        try:
            return build()
        except ConfigError:
            raise
        except ValueError as exc:
            line = next((lines[k] for k in keys if lines.get(k) is not None), None)
            raise ConfigError(str(exc), line) from None

    grid = guarded(["grid.n"], lambda: Grid(values["grid.n"]))
    fields = {k: _build_field(values[k], grid, k, lines[k])
              for k in ("model.lambda", "model.mu1", "model.mu2", "model.alpha", "init.S0", "init.I0")}
    step = guarded(["time.dt", "time.record_every"],
                   lambda: StepConfig(values["time.dt"], values["time.record_every"]))
    params = guarded(["model.k1", "model.k2"], lambda: validate_params(ModelParams(
        fields["model.lambda"], fields["model.mu1"], fields["model.mu2"], fields["model.alpha"],
        values["model.k1"], values["model.k2"]), grid))
    noise = _build_noise(values, lines, guarded)
    analysis = guarded([k for k in lines if k.startswith("analysis.")], lambda: AnalysisConfig(
        values["analysis.window_frac"], values["analysis.eps_slope"], values["analysis.eps_perm"],
        values["analysis.p"], values["analysis.perm_I0"], values["analysis.ic_ratio"]))
    return guarded(["time.horizon", "mc.n_paths", "mc.seed"], lambda: RunConfig(
        grid, step, values["time.horizon"], params, noise, fields["init.S0"], fields["init.I0"],
        values["mc.seed"], values["mc.n_paths"], analysis))


def _build_noise(values, lines, guarded) -> NoiseSpec:
    mode = values["noise.mode"]
    kl_keys = ("noise.family", "noise.a", "noise.q", "noise.r", "noise.K")
    if mode in ("none", "zero"):
        return NoiseSpec.zero()
    if mode == "space_independent":
        for k in kl_keys:
            if lines[k] is not None:
                raise ConfigError(f"{k} does not apply to space_independent noise", lines[k])
        return guarded(["noise.sigma1", "noise.sigma2"], lambda: NoiseSpec.space_independent(
            values["noise.sigma1"], values["noise.sigma2"]))
    if mode != "kl":
        raise ConfigError(f"noise.mode must be kl, space_independent or none; got {mode!r}",
                          lines["noise.mode"])
    family = values["noise.family"]
    rate_key = {"geometric": "noise.q", "polynomial": "noise.r"}.get(family)
    if rate_key is None:
        raise ConfigError(f"noise.family must be geometric or polynomial; got {family!r}",
                          lines["noise.family"])
    for k in ("noise.a", rate_key, "noise.K"):
        if values[k] is None:
            raise ConfigError(f"missing required key {k!r} for {family} noise")
    other = "noise.r" if rate_key == "noise.q" else "noise.q"
    if lines[other] is not None:
        raise ConfigError(f"{other} does not apply to the {family} family", lines[other])
    fam = guarded([rate_key, "noise.a"],
                  lambda: CoefficientFamily(family, values["noise.a"], values[rate_key]))
    return guarded(["noise.K", "noise.tail_tol"], lambda: NoiseSpec.kl(
        fam, K=values["noise.K"], tail_tol=values["noise.tail_tol"]))
