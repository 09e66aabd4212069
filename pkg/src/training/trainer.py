"""
Training Loop
Generic training, fine-tuning from a checkpoint, periodic dev evaluation
and checkpoint writing
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

import config
from src.data.examples import Batch, TripletExample
from src.model.transference import ModelConfig, TransferenceModel
from src.tensor import ComputationRecord
from src.training.batching import make_batches
from src.training.checkpoints import Checkpoint, apply_checkpoint, check_fingerprint, save_checkpoint
from src.training.optimizer import Adam
from src.training.schedule import noam_lr

logger = logging.getLogger(__name__)

METRIC_LOG_COLUMNS = ["step", "lr", "train_loss", "dev_loss", "dev_bleu"]
METRIC_LOG_NAME = "metrics.tsv"


class TrainingDivergedError(RuntimeError):
    """Loss became NaN or infinite"""

    def __init__(self, step: int, loss: float):
        super().__init__(f"training diverged at step {step} (loss={loss})")
        self.step = step
        self.loss = loss


@dataclass
class TrainConfig:
    """Optimization settings; field names double as run-config keys"""
    warmup_steps: int = config.WARMUP_STEPS
    token_budget: int = config.TOKEN_BUDGET
    max_len: int = config.MAX_LEN
    max_steps: int = config.MAX_STEPS
    max_epochs: int = config.MAX_EPOCHS
    seed: int = config.SEED
    eval_interval: int = config.EVAL_INTERVAL
    dev_decode_limit: int = config.DEV_DECODE_LIMIT
    adam_beta1: float = config.ADAM_BETAS[0]
    adam_beta2: float = config.ADAM_BETAS[1]
    adam_eps: float = config.ADAM_EPS
    label_smoothing: float = config.LABEL_SMOOTHING
    lr_scale: float = config.LR_SCALE
    accumulation: int = config.ACCUMULATION
    continue_schedule: bool = False
    show_progress: bool = True

    def validate(self) -> "TrainConfig":
        if self.warmup_steps < 1:
            raise ValueError(f"warmup_steps must be >= 1, got {self.warmup_steps}")
        if self.token_budget < self.max_len + 1:
            raise ValueError(f"token_budget {self.token_budget} is below the longest admissible "
                             f"sequence ({self.max_len + 1} target tokens)")
        if self.max_steps < 0 or self.max_epochs < 1:
            raise ValueError("max_steps must be >= 0 and max_epochs >= 1")
        if self.eval_interval < 1:
            raise ValueError(f"eval_interval must be >= 1, got {self.eval_interval}")
        if self.accumulation < 1:
            raise ValueError(f"accumulation must be >= 1, got {self.accumulation}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError(f"label_smoothing must be in [0, 1), got {self.label_smoothing}")
        return self

    @property
    def betas(self):
        return (self.adam_beta1, self.adam_beta2)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known})


@dataclass
class TrainResult:
    model: TransferenceModel
    checkpoints: List[Checkpoint] = field(default_factory=list)
    checkpoint_paths: List[Path] = field(default_factory=list)
    metric_log: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=METRIC_LOG_COLUMNS))
    final_step: int = 0


def train_step(model: TransferenceModel, optimizer: Adam, batches: Sequence[Batch], lr: float,
               rng: Optional[np.random.Generator], label_smoothing: float, step: int) -> float:
    """
    One optimizer update over one or more accumulated batches.

    Every batch loss is divided by the target-token count of the whole
    step, so splitting a batch in two and accumulating gives the same
    gradient as the unsplit batch.

    Returns:
        Per-token training loss of the step
    """
    total_tokens = sum(batch.target_tokens for batch in batches)
    model.zero_grads()
    step_loss = 0.0
    for batch in batches:
        with ComputationRecord() as record:
            loss = model.forward_loss(batch, train=True, rng=rng,
                                      label_smoothing=label_smoothing, normalizer=total_tokens)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(step, value)
            record.backward(loss)
        step_loss += value
    optimizer.step(lr)
    return step_loss


def dev_loss(model: TransferenceModel, dev: Sequence[TripletExample], token_budget: int,
             max_len: int) -> float:
    """Token-weighted cross-entropy over the dev set (no smoothing, no dropout)"""
    total, tokens = 0.0, 0
    for batch in make_batches(dev, token_budget, max_len, epoch_seed=0):
        count = batch.target_tokens
        total += model.forward_loss(batch).item() * count
        tokens += count
    return total / tokens if tokens else float("nan")


def dev_bleu(model: TransferenceModel, dev: Sequence[TripletExample], limit: int,
             merge_table=None) -> float:
    """Corpus BLEU of greedy output on the first ``limit`` dev triplets"""
    from src.decoding.beam_search import greedy_decode
    from src.evaluation.metrics import bleu_corpus
    from src.tokenizer.bpe import words_from_ids

    subset = [ex for ex in list(dev)[:limit] if ex.longest_side <= model.config.max_len]
    if not subset:
        return float("nan")

    hyps = [words_from_ids(greedy_decode(model, ex.src, ex.mt), merge_table) for ex in subset]
    refs = [words_from_ids(ex.pe, merge_table) for ex in subset]
    return bleu_corpus(hyps, refs).score


class Trainer:
    """Runs the optimization loop for one model"""

    def __init__(self, model: TransferenceModel, train_config: TrainConfig,
                 merge_table=None, output_dir: Optional[Union[str, Path]] = None):
        self.model = model
        self.config = train_config.validate()
        if self.config.max_len > model.config.max_len:
            raise ValueError(f"training max_len {self.config.max_len} exceeds the model "
                             f"limit {model.config.max_len}")
        self.merge_table = merge_table
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.optimizer = Adam(model.parameters(), self.config.betas, self.config.adam_eps)
        self.rng = np.random.default_rng(self.config.seed)
        self.rows: List[Dict] = []

    def _check_vocabulary(self, corpus: Sequence[TripletExample], name: str):
        vocab = self.model.config.vocab_size
        for i, ex in enumerate(corpus):
            for side in (ex.src, ex.mt, ex.pe):
                if side and (max(side) >= vocab or min(side) < 0):
                    raise ValueError(f"vocabulary mismatch: {name} triplet {i} has ids outside "
                                     f"the model vocabulary of size {vocab}")

    def _accumulated(self, corpus: Sequence[TripletExample], epoch: int):
        group: List[Batch] = []
        epoch_seed = self.config.seed + epoch
        for batch in make_batches(corpus, self.config.token_budget, self.config.max_len, epoch_seed):
            group.append(batch)
            if len(group) == self.config.accumulation:
                yield group
                group = []
        if group:
            yield group

    def evaluate(self, dev: Sequence[TripletExample]) -> Dict[str, float]:
        if not dev:
            return {"dev_loss": float("nan"), "dev_bleu": float("nan")}
        return {
            "dev_loss": dev_loss(self.model, dev, self.config.token_budget, self.config.max_len),
            "dev_bleu": dev_bleu(self.model, dev, self.config.dev_decode_limit, self.merge_table),
        }

    def _write_metric_log(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=METRIC_LOG_COLUMNS)
        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            frame.to_csv(self.output_dir / METRIC_LOG_NAME, sep="\t", index=False,
                         float_format="%.6g", na_rep="nan")
        return frame

    def train(self, corpus: Sequence[TripletExample], dev: Sequence[TripletExample] = (),
              start_step: int = 0) -> TrainResult:
        """
        Optimize for ``max_steps`` updates (or ``max_epochs`` passes).

        Args:
            corpus: encoded training triplets
            dev: encoded dev triplets; evaluated at step 0 and every interval
            start_step: schedule offset (continued fine-tuning)

        Returns:
            TrainResult with the checkpoint series and the metric log
        """
        cfg = self.config
        self._check_vocabulary(corpus, "training")
        self._check_vocabulary(dev, "dev")
        result = TrainResult(model=self.model, final_step=start_step)

        initial = self.evaluate(dev)
        self.rows.append({"step": start_step, "lr": 0.0, "train_loss": float("nan"), **initial})
        logger.info("Step %d: dev_loss=%.4f dev_bleu=%.2f", start_step,
                    initial["dev_loss"], initial["dev_bleu"])

        local_step = 0
        window: List[float] = []
        progress = tqdm(total=cfg.max_steps, desc="Training", unit="step",
                        disable=not cfg.show_progress)
        for epoch in range(cfg.max_epochs):
            if local_step >= cfg.max_steps:
                break
            for group in self._accumulated(corpus, epoch):
                if local_step >= cfg.max_steps:
                    break
                local_step += 1
                step = start_step + local_step
                lr = noam_lr(step, self.model.config.d_model, cfg.warmup_steps, cfg.lr_scale)
                loss = train_step(self.model, self.optimizer, group, lr, self.rng,
                                  cfg.label_smoothing, step)
                window.append(loss)
                progress.update(1)
                progress.set_postfix(loss=f"{loss:.4f}", lr=f"{lr:.2e}")

                if local_step % cfg.eval_interval == 0 or local_step == cfg.max_steps:
                    self._checkpoint(result, step, lr, window, dev)
                    window = []
        progress.close()

        if window:
            step = start_step + local_step
            lr = noam_lr(step, self.model.config.d_model, cfg.warmup_steps, cfg.lr_scale)
            self._checkpoint(result, step, lr, window, dev)

        result.final_step = start_step + local_step
        result.metric_log = self._write_metric_log()
        return result

    def _checkpoint(self, result: TrainResult, step: int, lr: float,
                    window: List[float], dev: Sequence[TripletExample]):
        metrics = self.evaluate(dev)
        train_loss = float(np.mean(window)) if window else float("nan")
        self.rows.append({"step": step, "lr": lr, "train_loss": train_loss, **metrics})
        logger.info("Step %d: lr=%.3e train_loss=%.4f dev_loss=%.4f dev_bleu=%.2f",
                    step, lr, train_loss, metrics["dev_loss"], metrics["dev_bleu"])

        def finite(value):
            return None if value is None or math.isnan(value) else float(value)

        checkpoint = Checkpoint.from_model(self.model, step, dev_loss=finite(metrics["dev_loss"]),
                                           dev_bleu=finite(metrics["dev_bleu"]))
        result.checkpoints.append(checkpoint)
        if self.output_dir is not None:
            path = save_checkpoint(checkpoint, self.output_dir / f"step_{step:06d}.npz")
            result.checkpoint_paths.append(path)
            self._write_metric_log()


def train(model: TransferenceModel, corpus: Sequence[TripletExample],
          dev_corpus: Sequence[TripletExample], train_config: TrainConfig,
          merge_table=None, output_dir: Optional[Union[str, Path]] = None) -> TrainResult:
    return Trainer(model, train_config, merge_table, output_dir).train(corpus, dev_corpus)


def fine_tune(checkpoint: Checkpoint, corpus_subset: Sequence[TripletExample],
              train_config: TrainConfig, model_config: Optional[ModelConfig] = None,
              dev_corpus: Sequence[TripletExample] = (), merge_table=None,
              output_dir: Optional[Union[str, Path]] = None) -> TrainResult:
    """
    Continue training a saved model on in-domain data.

    The learning-rate schedule restarts at step 1 unless
    ``train_config.continue_schedule`` is set, in which case it picks up at
    the checkpoint's step. Optimizer moments always start fresh.

    Args:
        checkpoint: generic model to start from
        corpus_subset: in-domain training triplets
        train_config: optimization settings for this run
        model_config: current configuration; must match the checkpoint's
            fingerprint (defaults to the checkpoint's own configuration)
    """
    model_config = model_config or ModelConfig.from_dict(checkpoint.model_config)
    check_fingerprint(checkpoint, model_config)
    model = apply_checkpoint(TransferenceModel(model_config), checkpoint)
    start_step = checkpoint.step if train_config.continue_schedule else 0
    logger.info("Fine-tuning from step %d checkpoint (%s schedule)", checkpoint.step,
                "continued" if train_config.continue_schedule else "fresh")
    return Trainer(model, train_config, merge_table, output_dir).train(
        corpus_subset, dev_corpus, start_step=start_step)
