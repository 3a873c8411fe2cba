"""
Training event hooks for boxcap.

The trainer announces its progress through a pluggy plugin manager. Built-in
plugins write the loss log and the periodic progress lines; callers may
register their own.
"""

import csv
import logging
from pathlib import Path

import pluggy

logger = logging.getLogger(__name__)

PROJECT_NAME = "boxcap"

hookspec = pluggy.HookspecMarker(PROJECT_NAME)
hookimpl = pluggy.HookimplMarker(PROJECT_NAME)

LOSS_LOG_HEADER = ("step", "task", "loss", "lr")


class TrainerSpec:
    """Hook specifications called by the trainer."""

    @hookspec
    def boxcap_step_end(self, step, task, loss, lr):
        """Called after every optimizer step."""

    @hookspec
    def boxcap_checkpoint(self, step, path):
        """Called after a checkpoint has been written."""

    @hookspec
    def boxcap_train_end(self, step, path):
        """Called once the final checkpoint has been written."""


class LossLogPlugin:
    """Writes one ``step,task,loss,lr`` row per step."""

    def __init__(self, path, append=False):
        self.path = Path(path)
        exists = append and self.path.exists()
        mode = "a" if exists else "w"
        self._handle = open(self.path, mode, newline="", encoding="utf-8")
        self._writer = csv.writer(self._handle, lineterminator="\n")
        if not exists:
            self._writer.writerow(LOSS_LOG_HEADER)

    @hookimpl
    def boxcap_step_end(self, step, task, loss, lr):
        self._writer.writerow([step, task, f"{loss:.8f}", f"{lr:.8g}"])

    @hookimpl
    def boxcap_checkpoint(self, step, path):
        self._handle.flush()

    @hookimpl
    def boxcap_train_end(self, step, path):
        self.close()

    def close(self):
        if not self._handle.closed:
            self._handle.close()


class ProgressLogPlugin:
    """Logs the mean loss of each task every ``every`` steps."""

    def __init__(self, every=100):
        self.every = max(1, every)
        self._sums = {}

    @hookimpl
    def boxcap_step_end(self, step, task, loss, lr):
        total, count = self._sums.get(task, (0.0, 0))
        self._sums[task] = (total + loss, count + 1)
        if step % self.every == 0:
            means = ", ".join(
                f"{name} {total / count:.4f}"
                for name, (total, count) in self._sums.items()
            )
            logger.info("step %d lr %.2e loss %s", step, lr, means)
            self._sums = {}

    @hookimpl
    def boxcap_checkpoint(self, step, path):
        logger.info("Saved checkpoint at step %d to %s", step, path)

    @hookimpl
    def boxcap_train_end(self, step, path):
        logger.info("Training finished at step %d; model written to %s", step, path)


def create_plugin_manager(plugins=()):
    """
    Plugin manager with the trainer hook specifications.

    Args:
        plugins (iterable): Plugin objects to register

    Returns:
        pluggy.PluginManager: The manager
    """
    manager = pluggy.PluginManager(PROJECT_NAME)
    manager.add_hookspecs(TrainerSpec)
    for plugin in plugins:
        manager.register(plugin)
    return manager
