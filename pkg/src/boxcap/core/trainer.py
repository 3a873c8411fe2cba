"""
Training loops for boxcap.

Pre-training mixes caption generation (CG) and caption matching (CM) batches in
a fixed cycle; fine-tuning uses CG batches only. Every random choice of a step
is drawn from streams derived from (seed, step), so a run resumed from a
checkpoint continues exactly as the uninterrupted run would have.
"""

import logging
from pathlib import Path

import numpy as np
import torch
from tqdm import tqdm

from ..model.batching import BatchBuilder, Sample
from ..model.net import cg_loss, cm_loss
from ..utils.constants import Tasks
from ..utils.errors import CheckpointError, DatasetError, NonFiniteError
from ..utils.helpers import ensure_directory_exists
from .checkpoint import check_shapes, load_checkpoint, save_checkpoint
from .curriculum import CurriculumState, make_cm_sample
from .hooks import LossLogPlugin, ProgressLogPlugin, create_plugin_manager

logger = logging.getLogger(__name__)

PRETRAIN = "pretrain"
FINETUNE = "finetune"

MODEL_FILE = "model.pt"
LOSS_LOG_FILE = "loss_log.csv"
VOCAB_FILE = "vocab.txt"

# Stream tags for np.random.default_rng([seed, tag, index])
_ORDER_STREAM = 0
_CM_STREAM = 1
_TORCH_STREAM = 2


def task_for_step(step, stage=PRETRAIN, cg_per_cm=3):
    """
    Task of a 1-based step.

    Pre-training repeats ``cg_per_cm`` CG steps followed by one CM step;
    fine-tuning is CG only.
    """
    if stage == FINETUNE:
        return Tasks.CG
    return Tasks.CM if step % (cg_per_cm + 1) == 0 else Tasks.CG


def learning_rate_at(step, base, warmup):
    """Linear warm-up to ``base`` over ``warmup`` steps, then constant."""
    if warmup <= 0:
        return base
    return base * min(step / warmup, 1.0)


def checkpoint_name(step):
    return f"checkpoint_step{step:07d}.pt"


class Trainer:
    """
    Runs one training stage and writes checkpoints and the loss log.

    Args:
        model (BoxCaptioner): Model to train in place
        vocab (Vocabulary): Vocabulary of the model
        dataset (iterable): Training cards
        config (TrainConfig): Optimisation and curriculum settings
        out_dir (str or Path): Directory for checkpoints, loss log and vocabulary
        stage (str): PRETRAIN or FINETUNE
        resume_from (str or Path): Checkpoint of an interrupted run of this stage
        plugins (iterable): Extra pluggy plugins
    """

    def __init__(
        self,
        model,
        vocab,
        dataset,
        config,
        out_dir,
        stage=PRETRAIN,
        resume_from=None,
        plugins=(),
    ):
        if stage not in (PRETRAIN, FINETUNE):
            raise ValueError(f"unknown stage '{stage}'")
        self.cards = list(dataset)
        if not self.cards:
            raise DatasetError("cannot train on an empty dataset")
        if any(len(card.items) < 2 for card in self.cards):
            raise DatasetError("every training card needs at least two captions")

        self.model = model
        self.vocab = vocab
        self.config = config
        self.stage = stage
        self.out_dir = ensure_directory_exists(out_dir)
        self.builder = BatchBuilder(vocab, model.config)
        self.optimizer = torch.optim.Adam(
            model.parameters(),
            lr=config.learning_rate,
            weight_decay=config.weight_decay,
        )
        self.pairs = [
            (c, b) for c, card in enumerate(self.cards) for b in range(len(card.items))
        ]
        self._orders = {}
        self.step = 0
        self.last_checkpoint = None

        if resume_from is not None:
            self._resume(resume_from)

        vocab.save(self.out_dir / VOCAB_FILE)
        self.loss_log = LossLogPlugin(
            self.out_dir / LOSS_LOG_FILE, append=resume_from is not None
        )
        self.plugins = create_plugin_manager(
            [self.loss_log, ProgressLogPlugin(config.log_every), *plugins]
        )

    def _resume(self, path):
        container = load_checkpoint(path)
        if container["stage"] != self.stage:
            raise CheckpointError(
                f"cannot resume {self.stage} from a {container['stage']} checkpoint"
            )
        check_shapes(self.model, container["state_dict"])
        self.model.load_state_dict(container["state_dict"])
        if container["optimizer"] is not None:
            self.optimizer.load_state_dict(container["optimizer"])
        rng = container.get("rng") or {}
        if "torch" in rng:
            torch.set_rng_state(rng["torch"])
        self.step = container["step"]
        self.last_checkpoint = Path(path)
        logger.info("Resuming %s at step %d from %s", self.stage, self.step, path)

    def _order(self, epoch):
        order = self._orders.get(epoch)
        if order is None:
            rng = np.random.default_rng([self.config.seed, _ORDER_STREAM, epoch])
            order = rng.permutation(len(self.pairs))
            self._orders = {epoch: order}
        return order

    def samples_for_step(self, step):
        """(card, box) samples of a step; consecutive steps walk shuffled epochs."""
        size = self.config.batch_size
        samples = []
        for position in range((step - 1) * size, step * size):
            epoch, offset = divmod(position, len(self.pairs))
            card_index, box_index = self.pairs[int(self._order(epoch)[offset])]
            samples.append(Sample(self.cards[card_index], box_index))
        return samples

    def _matching_samples(self, step, samples):
        rng = np.random.default_rng([self.config.seed, _CM_STREAM, step])
        state = CurriculumState(
            step_num=step,
            replace_prob=self.config.replace_prob,
            strategy=self.config.cm_strategy,
            levels=self.config.levels(),
        )
        # In-batch cards supply Level-I captions
        pool = list({id(s.card): s.card for s in samples}.values())
        if len(pool) < 2:
            pool = self.cards
        matched = []
        for sample in samples:
            caption, label, level = make_cm_sample(
                sample.card, sample.box_index, pool, rng, state
            )
            matched.append(Sample(sample.card, sample.box_index, caption, label, level))
        return matched

    def train_step(self, step, task):
        """
        One optimizer step.

        Returns:
            float: The loss before the update
        """
        seed = np.random.default_rng([self.config.seed, _TORCH_STREAM, step])
        torch.manual_seed(int(seed.integers(2**62)))

        samples = self.samples_for_step(step)
        matching = task == Tasks.CM
        if matching:
            samples = self._matching_samples(step, samples)
        batch = self.builder.build(samples)

        self.model.train()
        output = self.model(batch, matching=matching)
        if matching:
            loss = cm_loss(output.scores, batch.labels)
        else:
            loss = cg_loss(output.logits, batch.targets, batch.target_mask)
        if not torch.isfinite(loss):
            raise NonFiniteError(f"non-finite {task} loss at step {step}")

        self.optimizer.zero_grad()
        loss.backward()
        if self.config.grad_clip > 0:
            parameters = self.model.parameters()
            torch.nn.utils.clip_grad_norm_(parameters, self.config.grad_clip)
        self.optimizer.step()
        return float(loss.item())

    def save(self, path):
        """Write a checkpoint of the current state."""
        path = save_checkpoint(
            path,
            self.model,
            self.vocab,
            train_config=self.config,
            step=self.step,
            stage=self.stage,
            optimizer=self.optimizer,
            rng={"seed": self.config.seed, "torch": torch.get_rng_state()},
        )
        self.last_checkpoint = path
        return path

    def run(self):
        """
        Train up to ``config.total_steps``.

        Returns:
            Path: The final checkpoint
        """
        cfg = self.config
        hook = self.plugins.hook
        steps = range(self.step + 1, cfg.total_steps + 1)
        try:
            for step in tqdm(
                steps, desc=self.stage, unit="step", disable=not cfg.progress
            ):
                task = task_for_step(step, self.stage, cfg.cg_per_cm)
                lr = learning_rate_at(step, cfg.learning_rate, cfg.warmup_steps)
                for group in self.optimizer.param_groups:
                    group["lr"] = lr
                loss = self.train_step(step, task)
                self.step = step
                hook.boxcap_step_end(step=step, task=task, loss=loss, lr=lr)
                interval = cfg.checkpoint_interval
                if interval and step % interval == 0 and step < cfg.total_steps:
                    path = self.save(self.out_dir / checkpoint_name(step))
                    hook.boxcap_checkpoint(step=step, path=path)
        except NonFiniteError as e:
            logger.error("%s; last good checkpoint: %s", e, self.last_checkpoint)
            self.loss_log.close()
            raise NonFiniteError(f"{e}; last good checkpoint: {self.last_checkpoint}")

        final = self.save(self.out_dir / MODEL_FILE)
        hook.boxcap_train_end(step=self.step, path=final)
        return final


def pretrain(model, vocab, dataset, config, out_dir, **kwargs):
    """
    Pre-train with the CG/CM cycle.

    Returns:
        Path: The final checkpoint
    """
    return Trainer(model, vocab, dataset, config, out_dir, PRETRAIN, **kwargs).run()


def finetune(model, vocab, dataset, config, out_dir, **kwargs):
    """
    Fine-tune with CG batches only.

    Returns:
        Path: The final checkpoint
    """
    return Trainer(model, vocab, dataset, config, out_dir, FINETUNE, **kwargs).run()
