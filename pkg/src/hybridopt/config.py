"""Run configuration: flat ``key = value`` files with ``#`` comments."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: str = "annulus_twostate"
    h_target: float = 0.1
    k_shape: int = 400
    k_homog: int = 1
    k_final_homog: int = 30
    tau0: float = 1.0
    reinit_every: int = 5
    volume_tol: float = 0.01
    out_dir: str = "out"
    dump_fields: bool = True
    dump_every: int = 50

    def __post_init__(self):
        if self.k_shape < 0:
            raise ConfigError("k_shape must be >= 0")
        for name in ("k_homog", "reinit_every", "dump_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.k_final_homog < 0:
            raise ConfigError("k_final_homog must be >= 0")
        if not self.tau0 > 0.0:
            raise ConfigError("tau0 must be positive")
        if not 0.0 < self.volume_tol < 0.1:
            raise ConfigError("volume_tol must lie in (0, 0.1)")
        if not self.h_target > 0.0:
            raise ConfigError("h_target must be positive")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_PARSERS = {"int": int, "float": float, "str": str, "bool": _parse_bool}


def parse_config(text: str) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[types[key]](value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def format_config(cfg: RunConfig) -> str:
    out = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        out.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(out) + "\n"
