"""Run configuration as a flat, auditable key = value text format.

Every tunable of every subsystem appears under a dotted key so a config dump
fully pins an experiment. Parsing is strict: unknown keys and malformed
values are errors, and parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .channel import ChannelConfig
from .dqn.agent import TrainConfig
from .env import EnvConfig
from .scenario import RoadConfig
from .worlds import WorkloadConfig


@dataclass(frozen=True)
class RunConfig:
    road: RoadConfig = field(default_factory=RoadConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    seed: int = 0
    eval_episodes: int = 200
    # sweep axes: safety payload size in multiples of 300 bytes, deadline in slots
    size_multipliers: tuple[int, ...] = (2, 4, 6, 8, 10)
    deadline_sweep_slots: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
    swap_max_iters: int = 1000

    def workload_at(self, slice2_bytes: int | None = None, deadline: int | None = None) -> WorkloadConfig:
        return dataclasses.replace(
            self.workload,
            slice2_bytes=self.workload.slice2_bytes if slice2_bytes is None else slice2_bytes,
            deadline_len_slots=self.workload.deadline_len_slots if deadline is None else deadline,
        )


_SECTIONS = ("road", "channel", "env", "train", "workload", "run")


def _section_obj(cfg: RunConfig, section: str):
    if section == "run":
        return cfg
    return getattr(cfg, section)


def _run_fields() -> list[dataclasses.Field]:
    skip = {"road", "channel", "env", "train", "workload"}
    return [f for f in dataclasses.fields(RunConfig) if f.name not in skip]


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    lines = ["# iovslice run configuration (key = value, '#' comments)"]
    for section in _SECTIONS:
        obj = _section_obj(cfg, section)
        fields = _run_fields() if section == "run" else dataclasses.fields(obj)
        lines.append("")
        for f in fields:
            lines.append(f"{section}.{f.name} = {_format_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def _parse_scalar(text: str, typ) -> object:
    text = text.strip()
    if typ is float:
        return float(text)
    if typ is int:
        return int(text)
    if typ is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if typ is str:
        return text
    raise ValueError(f"unsupported config field type {typ!r}")


def _parse_value(text: str, f: dataclasses.Field) -> object:
    # Field annotations are strings (postponed evaluation), matched by name.
    text = text.strip()
    typ = f.type
    name = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    if name.startswith("float | None") or name.startswith("Optional[float]"):
        return None if text == "auto" else float(text)
    if name.startswith("tuple[int"):
        if not text:
            raise ValueError("empty tuple value")
        return tuple(int(v) for v in text.split(","))
    if name.startswith("tuple[float") or name == "tuple":
        return tuple(float(v) for v in text.split(","))
    if name == "float":
        return _parse_scalar(text, float)
    if name == "int":
        return _parse_scalar(text, int)
    if name == "bool":
        return _parse_scalar(text, bool)
    if name == "str":
        return _parse_scalar(text, str)
    raise ValueError(f"config field {f.name}: unsupported type {name!r}")


def parse_config(text: str) -> RunConfig:
    by_section: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    field_maps = {
        "road": {f.name: f for f in dataclasses.fields(RoadConfig)},
        "channel": {f.name: f for f in dataclasses.fields(ChannelConfig)},
        "env": {f.name: f for f in dataclasses.fields(EnvConfig)},
        "train": {f.name: f for f in dataclasses.fields(TrainConfig)},
        "workload": {f.name: f for f in dataclasses.fields(WorkloadConfig)},
        "run": {f.name: f for f in _run_fields()},
    }
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ValueError(f"line {lineno}: key {key!r} is missing its section prefix")
        section, name = key.split(".", 1)
        if section not in field_maps or name not in field_maps[section]:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        by_section[section][name] = _parse_value(value, field_maps[section][name])
    return RunConfig(
        road=RoadConfig(**by_section["road"]),
        channel=ChannelConfig(**by_section["channel"]),
        env=EnvConfig(**by_section["env"]),
        train=TrainConfig(**by_section["train"]),
        workload=WorkloadConfig(**by_section["workload"]),
        **by_section["run"],
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text())
