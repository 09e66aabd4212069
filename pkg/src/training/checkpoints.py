"""
Checkpoints
Save / load parameter snapshots, pick the best ones by a dev metric and
average them into a single model
"""

import io
import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.model.transference import ModelConfig, TransferenceModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = "APECKPT-1"
HEADER_KEY = "__header__"

# Fixed zip entry timestamp so identical checkpoints are identical files
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)

RANKING_METRICS = {"dev_bleu": True, "dev_loss": False}  # metric -> higher is better


class FingerprintMismatchError(ValueError):
    """Checkpoint and configuration (or two checkpoints) disagree on model shape"""


@dataclass
class Checkpoint:
    """Named parameter arrays plus the training state they were saved at"""
    params: Dict[str, np.ndarray]
    step: int
    model_config: Dict
    fingerprint: str
    dev_loss: Optional[float] = None
    dev_bleu: Optional[float] = None
    extra: Dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: TransferenceModel, step: int,
                   dev_loss: Optional[float] = None, dev_bleu: Optional[float] = None,
                   **extra) -> "Checkpoint":
        return cls(params=model.state_dict(), step=step,
                   model_config=model.config.to_dict(),
                   fingerprint=model.config.fingerprint(),
                   dev_loss=dev_loss, dev_bleu=dev_bleu, extra=dict(extra))

    def header(self) -> Dict:
        return {
            "format": FORMAT_VERSION,
            "fingerprint": self.fingerprint,
            "step": self.step,
            "dev_loss": self.dev_loss,
            "dev_bleu": self.dev_bleu,
            "model_config": self.model_config,
            "extra": self.extra,
        }

    def metric(self, name: str) -> Optional[float]:
        if name not in RANKING_METRICS:
            raise ValueError(f"unknown checkpoint metric {name!r}; expected one of {list(RANKING_METRICS)}")
        return getattr(self, name)


def _npy_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, np.asarray(array, order="C"), allow_pickle=False)
    return buffer.getvalue()


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    """
    Write an .npz container: a JSON header entry followed by one entry per
    parameter in sorted name order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(checkpoint.header(), sort_keys=True)
    entries = [(HEADER_KEY, np.array(header))]
    entries += [(name, checkpoint.params[name]) for name in sorted(checkpoint.params)]

    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
        for name, array in entries:
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_DATE)
            info.external_attr = 0o644 << 16
            archive.writestr(info, _npy_bytes(array))
    logger.debug("Saved checkpoint step %d to %s", checkpoint.step, path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        if HEADER_KEY not in data.files:
            raise ValueError(f"{path}: missing checkpoint header")
        header = json.loads(str(data[HEADER_KEY]))
        if header.get("format") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint format {header.get('format')!r}")
        params = {name: data[name] for name in data.files if name != HEADER_KEY}
    return Checkpoint(params=params, step=header["step"], model_config=header["model_config"],
                      fingerprint=header["fingerprint"], dev_loss=header["dev_loss"],
                      dev_bleu=header["dev_bleu"], extra=header.get("extra", {}))


def check_fingerprint(checkpoint: Checkpoint, model_config: ModelConfig):
    expected = model_config.fingerprint()
    if checkpoint.fingerprint != expected:
        raise FingerprintMismatchError(
            f"checkpoint fingerprint {checkpoint.fingerprint} (step {checkpoint.step}) does not "
            f"match configuration fingerprint {expected}")


def apply_checkpoint(model: TransferenceModel, checkpoint: Checkpoint) -> TransferenceModel:
    """Load checkpoint parameters into ``model`` after a fingerprint check"""
    check_fingerprint(checkpoint, model.config)
    model.load_state(checkpoint.params)
    return model


def model_from_checkpoint(checkpoint: Checkpoint) -> TransferenceModel:
    model_config = ModelConfig.from_dict(checkpoint.model_config)
    return apply_checkpoint(TransferenceModel(model_config), checkpoint)


def load_model(path: Union[str, Path]) -> TransferenceModel:
    return model_from_checkpoint(load_checkpoint(path))


def _require_same_fingerprint(checkpoints: Sequence[Checkpoint]):
    fingerprints = sorted({ckpt.fingerprint for ckpt in checkpoints})
    if len(fingerprints) > 1:
        raise FingerprintMismatchError(f"checkpoints come from different configurations: {fingerprints}")


def select_best(checkpoints: Sequence[Checkpoint], k: int,
                metric: str = "dev_bleu") -> List[Checkpoint]:
    """
    The ``k`` best checkpoints, best first.

    Checkpoints without the metric rank last; ties keep the earlier step first.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(checkpoints):
        raise ValueError(f"asked for {k} best checkpoints but only {len(checkpoints)} are available")
    _require_same_fingerprint(checkpoints)
    higher_is_better = RANKING_METRICS.get(metric)
    if higher_is_better is None:
        raise ValueError(f"unknown checkpoint metric {metric!r}; expected one of {list(RANKING_METRICS)}")

    def rank_key(ckpt: Checkpoint):
        value = ckpt.metric(metric)
        if value is None or np.isnan(value):
            return (1, 0.0, ckpt.step)
        return (0, -value if higher_is_better else value, ckpt.step)

    return sorted(checkpoints, key=rank_key)[:k]


def average_checkpoints(checkpoints: Sequence[Checkpoint]) -> Checkpoint:
    """
    Per-parameter arithmetic mean.

    Values are sorted across checkpoints before averaging, so the result
    does not depend on argument order, and averaging identical checkpoints
    returns their parameters bit for bit.
    """
    if not checkpoints:
        raise ValueError("cannot average an empty checkpoint list")
    _require_same_fingerprint(checkpoints)
    names = set(checkpoints[0].params)
    for ckpt in checkpoints[1:]:
        if set(ckpt.params) != names:
            raise ValueError(f"checkpoint at step {ckpt.step} has different parameter names")

    averaged = {}
    for name in sorted(names):
        stack = np.sort(np.stack([ckpt.params[name] for ckpt in checkpoints]), axis=0)
        base = stack[0]
        averaged[name] = (base + (stack - base).mean(axis=0)).astype(base.dtype, copy=False)

    first = checkpoints[0]
    logger.info("Averaged %d checkpoints (steps %s)", len(checkpoints),
                ", ".join(str(c.step) for c in checkpoints))
    return Checkpoint(params=averaged, step=max(c.step for c in checkpoints),
                      model_config=first.model_config, fingerprint=first.fingerprint,
                      extra={"averaged_steps": sorted(c.step for c in checkpoints)})


def list_checkpoints(directory: Union[str, Path]) -> List[Path]:
    """Checkpoint files in ``directory`` ordered by the step in their name"""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"checkpoint directory not found: {directory}")
    return sorted(directory.glob("step_*.npz"))
