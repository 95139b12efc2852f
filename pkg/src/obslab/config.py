"""Experiment configuration: TOML ingestion with strict validation.

Configs are TOML files with a top-level ``kind`` plus nested sections. The
loader is strict: unknown keys and sections are rejected, every violated
constraint is reported with its full ``section.key`` path, and omitted keys
take the documented defaults. All settings are echoed into the run manifest
so every output is reproducible from its files alone.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .measures import MARGIN_NORMALIZATIONS

__all__ = ["ExperimentConfig", "load_config", "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = (
    "sweep_noise",
    "sweep_depth",
    "sweep_width",
    "sweep_levels",
    "verify_theorem",
    "measures_report",
)

_INIT_KINDS = ("orthogonal", "gaussian", "zero")
_L1_KINDS = ("entrywise", "induced")


@dataclass(frozen=True)
class BaseSettings:
    n: int = 10
    a_scale: float = 0.9


@dataclass(frozen=True)
class FamilySettings:
    d_noise: int = 100
    train_levels: int = 1
    test_levels: int = 50


@dataclass(frozen=True)
class SweepArms:
    """Arm values for the sweep selected by ``kind``; others are ignored."""

    d_noise: tuple[int, ...] = (50, 100, 200, 400)
    depths: tuple[int, ...] = (1, 2, 4)
    widths: tuple[int, ...] = (25, 50, 100, 200)
    train_levels: tuple[int, ...] = (1, 2, 5, 10)


@dataclass(frozen=True)
class PolicySettings:
    depth: int = 1
    width: int = 100
    init_kind: str = "orthogonal"
    init_scale: float = 0.3
    step_size: float = 1e-4
    max_steps: int = 20000
    grad_tol: float = 1e-6
    log_interval: int = 500


@dataclass(frozen=True)
class TheoremSettings:
    n: tuple[int, ...] = (5,)
    p: tuple[int, ...] = (50,)
    m: tuple[int, ...] = (1, 2, 5, 10)
    psi: tuple[float, ...] = (0.0, 1.0)
    trials: int = 500


@dataclass(frozen=True)
class MeasuresSettings:
    stack_path: str | None = None
    records_path: str | None = None
    normalization: str = "spectral_l1"
    l1_kind: str = "entrywise"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    master_seed: int = 1
    trials: int = 10
    base: BaseSettings = field(default_factory=BaseSettings)
    family: FamilySettings = field(default_factory=FamilySettings)
    sweep: SweepArms = field(default_factory=SweepArms)
    policy: PolicySettings = field(default_factory=PolicySettings)
    theorem: TheoremSettings = field(default_factory=TheoremSettings)
    measures: MeasuresSettings = field(default_factory=MeasuresSettings)
    output_dir: str = "runs"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["output"] = {"dir": d.pop("output_dir")}
        return d


class _Section:
    """Tracks consumed keys so leftovers can be reported precisely."""

    def __init__(self, name: str, data: dict):
        self.name = name
        self.data = dict(data)

    def _label(self, key: str) -> str:
        return f"{self.name}.{key}" if self.name else key

    def take_int(self, key, default, minimum=None, maximum=None) -> int:
        value = self.data.pop(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{self._label(key)}: expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise ConfigError(f"{self._label(key)}: must be >= {minimum}, got {value}")
        if maximum is not None and value > maximum:
            raise ConfigError(f"{self._label(key)}: must be <= {maximum}, got {value}")
        return value

    def take_float(self, key, default, minimum=None, strict_min=None) -> float:
        value = self.data.pop(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{self._label(key)}: expected a number, got {value!r}")
        value = float(value)
        if minimum is not None and value < minimum:
            raise ConfigError(f"{self._label(key)}: must be >= {minimum}, got {value}")
        if strict_min is not None and value <= strict_min:
            raise ConfigError(f"{self._label(key)}: must be > {strict_min}, got {value}")
        return value

    def take_choice(self, key, default, choices) -> str:
        value = self.data.pop(key, default)
        if value not in choices:
            raise ConfigError(
                f"{self._label(key)}: expected one of {list(choices)}, got {value!r}"
            )
        return value

    def take_str(self, key, default) -> str | None:
        value = self.data.pop(key, default)
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{self._label(key)}: expected a string, got {value!r}")
        return value

    def take_int_list(self, key, default, minimum=1) -> tuple[int, ...]:
        value = self.data.pop(key, None)
        if value is None:
            return tuple(default)
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{self._label(key)}: expected a nonempty list")
        out = []
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, int):
                raise ConfigError(f"{self._label(key)}[{i}]: expected an integer, got {item!r}")
            if item < minimum:
                raise ConfigError(f"{self._label(key)}[{i}]: must be >= {minimum}, got {item}")
            out.append(item)
        return tuple(out)

    def take_float_list(self, key, default, minimum=0.0) -> tuple[float, ...]:
        value = self.data.pop(key, None)
        if value is None:
            return tuple(default)
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{self._label(key)}: expected a nonempty list")
        out = []
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(f"{self._label(key)}[{i}]: expected a number, got {item!r}")
            if float(item) < minimum:
                raise ConfigError(f"{self._label(key)}[{i}]: must be >= {minimum}, got {item}")
            out.append(float(item))
        return tuple(out)

    def take_section(self, key) -> dict:
        value = self.data.pop(key, {})
        if not isinstance(value, dict):
            raise ConfigError(f"{self._label(key)}: expected a section (TOML table)")
        return value

    def finish(self) -> None:
        if self.data:
            key = sorted(self.data)[0]
            raise ConfigError(f"unknown key {self._label(key)!r}")


def _parse_config(raw: dict) -> ExperimentConfig:
    top = _Section("", raw)
    kind = top.take_choice("kind", None, EXPERIMENT_KINDS)
    master_seed = top.take_int("master_seed", 1, minimum=0)
    trials = top.take_int("trials", 10, minimum=1)

    sec = _Section("base", top.take_section("base"))
    base = BaseSettings(
        n=sec.take_int("n", 10, minimum=1),
        a_scale=sec.take_float("a_scale", 0.9, minimum=0.0),
    )
    sec.finish()

    sec = _Section("family", top.take_section("family"))
    family = FamilySettings(
        d_noise=sec.take_int("d_noise", 100, minimum=1),
        train_levels=sec.take_int("train_levels", 1, minimum=1),
        test_levels=sec.take_int("test_levels", 50, minimum=1),
    )
    sec.finish()

    defaults = SweepArms()
    sec = _Section("sweep", top.take_section("sweep"))
    sweep = SweepArms(
        d_noise=sec.take_int_list("d_noise", defaults.d_noise),
        depths=sec.take_int_list("depths", defaults.depths),
        widths=sec.take_int_list("widths", defaults.widths),
        train_levels=sec.take_int_list("train_levels", defaults.train_levels),
    )
    sec.finish()

    sec = _Section("policy", top.take_section("policy"))
    policy = PolicySettings(
        depth=sec.take_int("depth", 1, minimum=1),
        width=sec.take_int("width", 100, minimum=1),
        init_kind=sec.take_choice("init_kind", "orthogonal", _INIT_KINDS),
        init_scale=sec.take_float("init_scale", 0.3, minimum=0.0),
        step_size=sec.take_float("step_size", 1e-4, strict_min=0.0),
        max_steps=sec.take_int("max_steps", 20000, minimum=1),
        grad_tol=sec.take_float("grad_tol", 1e-6, minimum=0.0),
        log_interval=sec.take_int("log_interval", 500, minimum=1),
    )
    sec.finish()

    td = TheoremSettings()
    sec = _Section("theorem", top.take_section("theorem"))
    theorem = TheoremSettings(
        n=sec.take_int_list("n", td.n),
        p=sec.take_int_list("p", td.p),
        m=sec.take_int_list("m", td.m),
        psi=sec.take_float_list("psi", td.psi),
        trials=sec.take_int("trials", td.trials, minimum=2),
    )
    sec.finish()

    sec = _Section("measures", top.take_section("measures"))
    measures = MeasuresSettings(
        stack_path=sec.take_str("stack_path", None),
        records_path=sec.take_str("records_path", None),
        normalization=sec.take_choice("normalization", "spectral_l1",
                                      MARGIN_NORMALIZATIONS),
        l1_kind=sec.take_choice("l1_kind", "entrywise", _L1_KINDS),
    )
    sec.finish()

    sec = _Section("output", top.take_section("output"))
    output_dir = sec.take_str("dir", "runs")
    sec.finish()

    top.finish()

    cfg = ExperimentConfig(
        kind=kind, master_seed=master_seed, trials=trials, base=base,
        family=family, sweep=sweep, policy=policy, theorem=theorem,
        measures=measures, output_dir=output_dir,
    )
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: ExperimentConfig) -> None:
    n = cfg.base.n
    if cfg.family.d_noise < n:
        raise ConfigError(
            f"family.d_noise: must be >= base.n={n}, got {cfg.family.d_noise}"
        )
    if cfg.kind == "sweep_noise":
        for i, d in enumerate(cfg.sweep.d_noise):
            if d < n:
                raise ConfigError(
                    f"sweep.d_noise[{i}]: must be >= base.n={n}, got {d}"
                )
    if cfg.kind == "verify_theorem":
        for tn in cfg.theorem.n:
            for tp in cfg.theorem.p:
                if tp % tn != 0:
                    raise ConfigError(
                        f"theorem.p: {tp} is not a multiple of theorem.n={tn}"
                    )
                for tm in cfg.theorem.m:
                    if tm > tp // tn:
                        raise ConfigError(
                            f"theorem.m: {tm} exceeds p/n={tp // tn} for n={tn}, p={tp}"
                        )
    if cfg.kind == "measures_report" and not cfg.measures.stack_path:
        raise ConfigError("measures.stack_path: required for measures_report")


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment config (strict: unknown keys fail)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
    try:
        return _parse_config(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
