"""
Run Configuration Files
Flat ``key=value`` text whose keys are the ModelConfig / TrainConfig field
names (``synth_*`` keys set the synthetic generator)
"""

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import config
from src.data.synthetic import SynthSpec
from src.model.transference import ModelConfig
from src.training.trainer import TrainConfig

logger = logging.getLogger(__name__)

SYNTH_PREFIX = "synth_"
EXTRA_KEYS = {"bpe_merges": int}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class ConfigError(ValueError):
    """Malformed config line, unknown key or unparsable value"""


def _field_types() -> Dict[str, type]:
    types: Dict[str, type] = {}
    for cls in (ModelConfig, TrainConfig):
        for item in fields(cls):
            types[item.name] = item.type
    for item in fields(SynthSpec):
        types[SYNTH_PREFIX + item.name] = item.type
    types.update(EXTRA_KEYS)
    return types


def valid_keys() -> List[str]:
    return sorted(_field_types())


def _convert(key: str, raw: str, kind: type):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, object]:
    """
    Parse ``key=value`` lines. Blank lines and ``#`` comments are skipped;
    unknown and repeated keys are errors.
    """
    types = _field_types()
    values: Dict[str, object] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{number}: expected key=value, got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in types:
            raise ConfigError(f"{source}:{number}: unknown key {key!r}; valid keys: "
                              f"{', '.join(valid_keys())}")
        if key in values:
            raise ConfigError(f"{source}:{number}: key {key!r} set twice")
        values[key] = _convert(key, raw, types[key])
    return values


def parse_overrides(overrides: Iterable[str]) -> Dict[str, object]:
    """``--set key=value`` items; later items win"""
    values: Dict[str, object] = {}
    for item in overrides:
        parsed = parse_config_text(item, source="--set")
        if not parsed:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        values.update(parsed)
    return values


@dataclass
class RunConfig:
    """Effective settings of one CLI run"""
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)
    bpe_merges: int = config.BPE_NUM_MERGES
    source: str = ""

    @classmethod
    def from_values(cls, values: Dict[str, object], source: str = "") -> "RunConfig":
        synth = {k[len(SYNTH_PREFIX):]: v for k, v in values.items() if k.startswith(SYNTH_PREFIX)}
        plain = {k: v for k, v in values.items() if not k.startswith(SYNTH_PREFIX)}
        if "seed" in plain and "synth_seed" not in values:
            synth["seed"] = plain["seed"]
        return cls(model=ModelConfig.from_dict(plain), train=TrainConfig.from_dict(plain),
                   synth=SynthSpec(**synth),
                   bpe_merges=int(plain.get("bpe_merges", config.BPE_NUM_MERGES)),
                   source=source)

    def to_text(self) -> str:
        lines = [f"# effective configuration ({self.source or 'defaults'})"]
        for key, value in sorted(self.values().items()):
            if isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def values(self) -> Dict[str, object]:
        merged: Dict[str, object] = {}
        merged.update(self.model.to_dict())
        merged.update(self.train.to_dict())
        merged.update({SYNTH_PREFIX + k: v for k, v in self.synth.to_dict().items()})
        merged["bpe_merges"] = self.bpe_merges
        return merged


def resolve_config_path(path: Union[str, Path]) -> Path:
    """As given, else relative to the APE_CONFIG_DIR directory"""
    candidate = Path(path)
    if candidate.exists():
        return candidate
    fallback = config.CONFIG_DIR / candidate
    if not candidate.is_absolute() and fallback.exists():
        return fallback
    raise FileNotFoundError(f"config file not found: {candidate}")


def load_run_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = (),
                    seed: Optional[int] = None) -> RunConfig:
    """
    File values, then ``--set`` overrides, then ``--seed``.

    ``max_len`` and ``seed`` are shared keys: they set both the model and
    the training configuration.
    """
    values: Dict[str, object] = {}
    source = "defaults"
    if path is not None:
        resolved = resolve_config_path(path)
        values.update(parse_config_text(resolved.read_text(encoding="utf-8"), str(resolved)))
        source = str(resolved)
    values.update(parse_overrides(overrides))
    if seed is not None:
        values["seed"] = seed
    run_config = RunConfig.from_values(values, source)
    try:
        run_config.model.validate()
        run_config.train.validate()
        run_config.synth.validate()
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    logger.debug("Effective config from %s: %s", source, run_config.values())
    return run_config
