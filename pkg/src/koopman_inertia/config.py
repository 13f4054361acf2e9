"""Run configuration stored as a flat ``dotted.key = value`` text file.

The defaults reproduce the bus-16 study case end to end.  A manifest written
by ``write_manifest`` holds every effective parameter, so feeding it back via
``--config`` repeats the run exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid_model import BUILTIN_NETWORKS, CASES, DEFAULT_LOADING, FaultScenario
from .kmd import DEFAULT_KEEP, DEFAULT_ORDER, DEFAULT_STRIDE, DecompositionSettings
from .simulator import DEFAULT_DT

# dotted key -> RunConfig attribute
KEYS = {
    "network.source": "network",
    "network.loading": "loading",
    "fault.case": "case",
    "fault.bus": "bus",
    "fault.trip": "trip",
    "fault.cycles": "cycles",
    "integration.dt": "dt",
    "integration.t_end": "t_end",
    "sampling.rate_hz": "sample_hz",
    "kmd.order": "order",
    "kmd.stride": "stride",
    "kmd.keep": "keep",
    "kmd.energy_eps": "energy_eps",
    "estimate.window": "window",
    "estimate.sweep": "sweep",
    "estimate.leave_one_out": "leave_one_out",
    "output.dir": "out",
    "run.jobs": "jobs",
}
_NONE = "none"


def parse_trip(text: str) -> tuple[int, int]:
    parts = str(text).replace(" ", "").split("-")
    if len(parts) != 2:
        raise ConfigError(f"branch must be written A-B, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"branch must be written A-B, got {text!r}") from None


def parse_sweep(text: str) -> tuple[float, ...]:
    """``lo:hi:step`` with both ends included."""
    try:
        lo, hi, step = (float(p) for p in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"sweep must be lo:hi:step, got {text!r}") from None
    if not (lo > 0 and hi >= lo and step > 0):
        raise ConfigError(f"sweep needs 0 < lo <= hi and step > 0, got {text!r}")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(float(lo + k * step) for k in range(n))


@dataclass
class RunConfig:
    network: str = "ieee39"
    loading: float = DEFAULT_LOADING
    case: str = "i"
    bus: int | None = None
    trip: str | None = None
    cycles: float | None = None
    dt: float = DEFAULT_DT
    t_end: float = 13.0
    sample_hz: float = 60.0
    order: int = DEFAULT_ORDER
    stride: int = DEFAULT_STRIDE
    keep: int | None = DEFAULT_KEEP
    energy_eps: float | None = None
    window: float = 10.0
    sweep: str = "2:12:2"
    leave_one_out: bool = False
    out: str = "results"
    jobs: int = 1
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    def validate(self) -> "RunConfig":
        for name in ("loading", "dt", "t_end", "sample_hz", "window"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("order", "stride", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.keep is not None and self.keep < 1:
            raise ConfigError("keep must be at least 1")
        if self.energy_eps is not None and self.energy_eps < 0:
            raise ConfigError("energy_eps must be non-negative")
        if self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r} (choose from {sorted(CASES)})")
        if self.cycles is not None and not self.cycles > 0:
            raise ConfigError("cycles must be positive")
        if self.trip is not None:
            parse_trip(self.trip)
        parse_sweep(self.sweep)
        if self.network not in BUILTIN_NETWORKS and not self.network_path().is_file():
            raise ConfigError(f"network file not found: {self.network}")
        return self

    def network_path(self) -> Path:
        p = Path(self.network)
        return p if p.is_absolute() else self.base_dir / p

    def network_source(self):
        return self.network if self.network in BUILTIN_NETWORKS else self.network_path()

    def scenario(self) -> FaultScenario:
        base = CASES[self.case]
        return FaultScenario(
            bus=base.bus if self.bus is None else self.bus,
            trip=base.trip if self.trip is None else parse_trip(self.trip),
            cycles=base.cycles if self.cycles is None else self.cycles,
        )

    @property
    def period(self) -> float:
        return 1.0 / self.sample_hz

    @property
    def windows(self) -> tuple[float, ...]:
        return parse_sweep(self.sweep)

    def settings(self) -> DecompositionSettings:
        keep = None if self.energy_eps is not None else self.keep
        return DecompositionSettings(self.order, self.stride, keep, self.energy_eps)

    def updated(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        if changes.get("energy_eps") is not None and "keep" not in changes:
            changes["keep"] = None
        return dataclasses.replace(self, **changes).validate()


def _convert(attr: str, text: str):
    ftype = {f.name: f.type for f in dataclasses.fields(RunConfig)}[attr]
    text = text.strip()
    if text.lower() == _NONE:
        if "None" not in str(ftype):
            raise ConfigError(f"{attr} cannot be none")
        return None
    try:
        if "bool" in str(ftype):
            if text.lower() not in ("true", "false"):
                raise ValueError
            return text.lower() == "true"
        if "int" in str(ftype) and "float" not in str(ftype):
            return int(text)
        if "float" in str(ftype):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {attr}") from None
    return text


def parse_config(text: str, base_dir: Path = Path(".")) -> RunConfig:
    values = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[KEYS[key]] = _convert(KEYS[key], val)
    return RunConfig(base_dir=base_dir, **values).validate()


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)


def _render(value) -> str:
    if value is None:
        return _NONE
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_manifest(cfg: RunConfig) -> str:
    lines = []
    for key, attr in KEYS.items():
        value = getattr(cfg, attr)
        if attr == "network" and cfg.network not in BUILTIN_NETWORKS:
            value = str(cfg.network_path().resolve())
        lines.append(f"{key} = {_render(value)}")
    return "\n".join(lines) + "\n"


def write_manifest(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(render_manifest(cfg))
