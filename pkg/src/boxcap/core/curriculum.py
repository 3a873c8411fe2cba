"""
Caption-matching curriculum for boxcap.

Builds negative captions at three difficulty levels and schedules how often
each level is drawn over the course of training.
"""

import logging
from dataclasses import dataclass, field

from ..model.encoders import select_neighbors
from ..utils.constants import Levels

logger = logging.getLogger(__name__)

# p3 reaches 1 at step DIFFICULTY_HORIZON ** 1.5
DIFFICULTY_HORIZON = 5000.0
MAX_RESAMPLES = 10


def schedule(step_num):
    """
    Level probabilities (p1, p2, p3) at a training step.

    p1 = min(1, 2 * step^-0.2) and p3 = min(1, step * 5000^-1.5); when
    p1 + p3 > 1, p1 is shrunk to 1 - p3. p2 takes the rest.

    Args:
        step_num (int): Training step, at least 1

    Returns:
        tuple: (p1, p2, p3), non-negative and summing to 1
    """
    if step_num < 1:
        raise ValueError(f"step_num must be at least 1, got {step_num}")
    p1 = min(1.0, 2.0 * step_num**-0.2)
    p3 = min(1.0, step_num * DIFFICULTY_HORIZON**-1.5)
    if p1 + p3 > 1.0:
        return _fill((1.0 - p3, 0.0, p3), 0)
    return _fill((p1, max(0.0, 1.0 - p1 - p3), p3), 1)


def _fill(probs, slot):
    """Move the rounding residue into probs[slot] so the sum is exactly 1."""
    probs = list(probs)
    for attempt in range(8):
        residue = 1.0 - sum(probs)
        if residue == 0.0:
            break
        step = residue if attempt < 4 else residue / 2
        probs[slot] = min(1.0, max(0.0, probs[slot] + step))
    return tuple(probs)


def schedule_table(max_step, every=1):
    """
    Rows (step, p1, p2, p3) for plotting the schedule.

    Step 1, every multiple of ``every`` and ``max_step`` are included.

    Args:
        max_step (int): Last step, at least 1
        every (int): Row spacing

    Returns:
        list: Tuples in ascending step order
    """
    if max_step < 1:
        raise ValueError(f"max_step must be at least 1, got {max_step}")
    if every < 1:
        raise ValueError(f"every must be at least 1, got {every}")
    steps = {1, max_step}
    steps.update(range(every, max_step + 1, every))
    return [(step, *schedule(step)) for step in sorted(steps)]


@dataclass
class CurriculumState:
    """Training step plus the settings that turn it into level probabilities."""

    step_num: int = 1
    replace_prob: float = 0.6
    strategy: str = "progressive"
    levels: tuple = field(default_factory=lambda: tuple(Levels.get_levels()))

    @property
    def probabilities(self):
        """(p1, p2, p3) before restricting to the enabled levels."""
        if self.strategy == "fixed":
            return Levels.FIXED_PROBS
        return schedule(self.step_num)

    def level_probabilities(self):
        """
        Probabilities over the enabled levels, renormalised.

        Returns:
            list: (level, probability) pairs
        """
        weights = dict(zip(Levels.get_levels(), self.probabilities))
        chosen = [(level, weights[level]) for level in self.levels]
        total = sum(p for _, p in chosen)
        if total <= 0.0:
            return [(level, 1.0 / len(chosen)) for level, _ in chosen]
        return [(level, p / total) for level, p in chosen]


def _other_card_caption(card, target, pool, rng):
    others = [other for other in pool if other is not card]
    if not others:
        return None
    for _ in range(MAX_RESAMPLES):
        other = others[int(rng.integers(len(others)))]
        caption = other.captions[int(rng.integers(len(other.captions)))]
        if caption != target:
            return caption
    return None


def _same_card_caption(card, box_index, target, rng):
    candidates = [j for j in range(len(card.items)) if j != box_index]
    for _ in range(MAX_RESAMPLES):
        caption = card.captions[candidates[int(rng.integers(len(candidates)))]]
        if caption != target:
            return caption
    return None


def _neighbor_caption(card, box_index, target, rng):
    neighbors = [j for j in select_neighbors(card.boxes, box_index) if j is not None]
    neighbors = [j for j in neighbors if card.captions[j] != target]
    if not neighbors:
        return None
    return card.captions[neighbors[int(rng.integers(len(neighbors)))]]


def replacement_caption(level, card, box_index, pool, rng):
    """
    Negative caption of a level, with the documented fallbacks.

    Level III falls back to Level II when no neighbour offers a different
    caption; Level II falls back to Level I after repeated collisions with the
    ground truth.

    Returns:
        tuple: (caption or None, level actually used)
    """
    target = card.captions[box_index]
    if level == Levels.III:
        caption = _neighbor_caption(card, box_index, target, rng)
        if caption is not None:
            return caption, Levels.III
        logger.debug("Level III fell back to Level II for box %d", box_index)
        level = Levels.II
    if level == Levels.II:
        caption = _same_card_caption(card, box_index, target, rng)
        if caption is not None:
            return caption, Levels.II
        logger.debug("Level II fell back to Level I for box %d", box_index)
    return _other_card_caption(card, target, pool, rng), Levels.I


def make_cm_sample(card, box_index, pool, rng, state):
    """
    Draw a caption-matching example for one box.

    With probability 1 - replace_prob the ground truth is kept (label 1);
    otherwise a level is drawn from the curriculum and its replacement caption
    is used (label 0).

    Args:
        card (Card): Card of the box, with at least two captions
        box_index (int): Box to caption
        pool (list): Cards that supply Level-I captions
        rng (numpy.random.Generator): Random stream
        state (CurriculumState): Step and strategy

    Returns:
        tuple: (caption, label, level tag or None for positives)
    """
    target = card.captions[box_index]
    if rng.random() >= state.replace_prob:
        return target, 1.0, None

    levels = state.level_probabilities()
    index = int(rng.choice(len(levels), p=[p for _, p in levels]))
    caption, level = replacement_caption(levels[index][0], card, box_index, pool, rng)
    if caption is None:
        logger.debug("No negative available for box %d; keeping a positive", box_index)
        return target, 1.0, None
    return caption, 0.0, level
