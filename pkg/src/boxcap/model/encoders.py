"""
Context encoders for boxcap.

Embeds the three context modalities into a common d-dimensional space: the
image as a k x k grid with spatial and segment embeddings, the text box as a
single neighbour-enhanced location token, and the product info as word,
position and segment embeddings.
"""

import math

import numpy as np
import torch
import torch.nn as nn

from ..utils.constants import NeighborModes, Segments
from ..utils.helpers import layout_seed


def box_to_grid(box, k):
    """
    Map both corners of a box onto the k x k grid.

    Each coordinate c maps to min(floor(c * k), k - 1).

    Args:
        box (TextBox): Normalized box
        k (int): Grid size

    Returns:
        tuple: ((x_i, y_i), (x_j, y_j)) for the top-left and bottom-right corners
    """

    def to_index(value):
        return min(int(math.floor(value * k)), k - 1)

    return (
        (to_index(box.x_min), to_index(box.y_min)),
        (to_index(box.x_max), to_index(box.y_max)),
    )


def _grid_row(box, k):
    (xi, yi), (xj, yj) = box_to_grid(box, k)
    return [xi, yi, xj, yj]


def _center_distance(a, b):
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def _split_neighbors(boxes, i):
    """Indices before and after box i in layout order, each sorted nearest first."""
    if not 0 <= i < len(boxes):
        raise IndexError(f"box index {i} out of range for {len(boxes)} boxes")
    key_i = (boxes[i].top_left_sum, i)
    previous, following = [], []
    for j, box in enumerate(boxes):
        if j == i:
            continue
        bucket = previous if (box.top_left_sum, j) < key_i else following
        bucket.append((_center_distance(box, boxes[i]), j))
    previous.sort()
    following.sort()
    return [j for _, j in previous], [j for _, j in following]


def select_neighbors(boxes, i):
    """
    Nearest previous and nearest next box of box i.

    A box is previous when its top-left sum is smaller (equal sums: smaller list
    index first); nearest means smallest centre distance, ties to the smaller
    list index.

    Args:
        boxes (list): TextBoxes of the layout
        i (int): Index of the current box

    Returns:
        tuple: (previous index or None, next index or None)
    """
    previous, following = _split_neighbors(boxes, i)
    return (
        previous[0] if previous else None,
        following[0] if following else None,
    )


def _random_locations(boxes, i, k, count):
    rng = np.random.default_rng(
        layout_seed([v for box in boxes for v in box.as_list()] + [i])
    )
    rows = []
    for _ in range(count):
        xs = np.sort(rng.integers(0, k, size=2))
        ys = np.sort(rng.integers(0, k, size=2))
        rows.append([int(xs[0]), int(ys[0]), int(xs[1]), int(ys[1])])
    return rows


def neighbor_context(boxes, i, k, mode=NeighborModes.TOP1):
    """
    Grid indices of the current box and its context locations.

    Args:
        boxes (list): TextBoxes of the layout
        i (int): Index of the current box
        k (int): Grid size
        mode (str): One of NeighborModes

    Returns:
        tuple: (current row [xi, yi, xj, yj], context rows, presence flags); the
        context has NeighborModes.context_slots(mode) rows, absent slots are zeros
    """
    slots = NeighborModes.context_slots(mode)
    current = _grid_row(boxes[i], k)
    rows = [[0, 0, 0, 0]] * slots
    present = [False] * slots

    if mode == NeighborModes.TOP1:
        chosen = list(select_neighbors(boxes, i))
    elif mode == NeighborModes.TOP2:
        previous, following = _split_neighbors(boxes, i)
        chosen = (previous[:2] + [None] * 2)[:2] + (following[:2] + [None] * 2)[:2]
    elif mode == NeighborModes.RANDOM2:
        return current, _random_locations(boxes, i, k, slots), [True] * slots
    elif mode == NeighborModes.NONE:
        chosen = [None] * slots
    else:
        raise ValueError(f"unknown neighbour mode '{mode}'")

    for slot, j in enumerate(chosen):
        if j is not None:
            rows[slot] = _grid_row(boxes[j], k)
            present[slot] = True
    return current, rows, present


class VisualBackbone(nn.Module):
    """
    Small trainable convolutional backbone producing a k x k grid of d-vectors.

    Two strided convolutions, adaptive average pooling to k x k and a 1x1
    projection to the model width.
    """

    def __init__(self, width, grid, channels=32):
        super().__init__()
        self.grid = grid
        self.features = nn.Sequential(
            nn.Conv2d(3, channels, kernel_size=3, stride=2, padding=1),
            nn.GELU(),
            nn.Conv2d(channels, channels, kernel_size=3, stride=2, padding=1),
            nn.GELU(),
            nn.AdaptiveAvgPool2d((grid, grid)),
        )
        self.project = nn.Conv2d(channels, width, kernel_size=1)

    def forward(self, images):
        """
        Extract grid features.

        Args:
            images (torch.Tensor): B x 3 x H x W

        Returns:
            torch.Tensor: B x k^2 x d in row-major cell order
        """
        height, width = images.shape[-2:]
        if height < self.grid or width < self.grid:
            raise ValueError(
                f"image {height}x{width} is smaller than the "
                f"{self.grid}x{self.grid} grid"
            )
        grid = self.project(self.features(images))
        return grid.flatten(2).transpose(1, 2)


class ContextEncoder(nn.Module):
    """
    Embeds image, location and product info, plus the caption tokens.

    Holds every embedding table of the model: the spatial tables Emb_h/Emb_v
    (shared by image cells and box corners), the segment table, the position
    table, the word embedding W_e, the null-neighbour vector and the location
    projections W1/W2.
    """

    def __init__(self, config):
        super().__init__()
        d = config.width
        k = config.grid
        half = d // 2
        self.config = config

        self.backbone = VisualBackbone(d, k, config.backbone_channels)
        self.emb_h = nn.Embedding(k, half)
        self.emb_v = nn.Embedding(k, half)
        self.segment = nn.Embedding(Segments.COUNT, d)
        positions = max(config.max_info_len, config.max_caption_len)
        self.position = nn.Embedding(positions, d)
        self.word = nn.Embedding(config.vocab_size, d)
        self.e_null = nn.Parameter(torch.zeros(2 * d))

        slots = NeighborModes.context_slots(config.neighbor_mode)
        self.w1 = nn.Linear(slots * 2 * d, half, bias=False)
        self.w2 = nn.Linear(2 * d, half, bias=False)

        # Learned stand-ins for ablated modalities: image, location, info
        self.placeholders = nn.Parameter(torch.zeros(3, d))

        cells = torch.arange(k * k)
        self.register_buffer("cell_x", cells % k, persistent=False)
        self.register_buffer("cell_y", cells // k, persistent=False)

        self.reset_parameters()

    def reset_parameters(self):
        for table in (self.emb_h, self.emb_v, self.segment, self.position, self.word):
            nn.init.normal_(table.weight, std=0.02)
        for linear in (self.w1, self.w2):
            nn.init.normal_(linear.weight, std=0.02)
        nn.init.normal_(self.e_null, std=0.02)
        nn.init.normal_(self.placeholders, std=0.02)

    def _segment(self, segment_id):
        return self.segment.weight[segment_id]

    def visual_backbone(self, images):
        return self.backbone(images)

    def encode_image(self, grid):
        """
        Add spatial and segment embeddings to grid features.

        Args:
            grid (torch.Tensor): B x k^2 x d appearance features

        Returns:
            torch.Tensor: B x k^2 x d image tokens
        """
        if not self.config.use_image:
            grid = self.placeholders[0].expand_as(grid)
        spatial = torch.cat([self.emb_h(self.cell_x), self.emb_v(self.cell_y)], dim=-1)
        return grid + spatial + self._segment(Segments.IMAGE)

    def corner_embedding(self, rows):
        """[Emb_h(x_i); Emb_v(y_i); Emb_h(x_j); Emb_v(y_j)] for (..., 4) grid rows."""
        return torch.cat(
            [
                self.emb_h(rows[..., 0]),
                self.emb_v(rows[..., 1]),
                self.emb_h(rows[..., 2]),
                self.emb_v(rows[..., 3]),
            ],
            dim=-1,
        )

    def encode_location(self, current, context, present):
        """
        Neighbour-enhanced location token.

        Args:
            current (torch.Tensor): B x 4 grid rows of the current box
            context (torch.Tensor): B x S x 4 grid rows of the context boxes
            present (torch.Tensor): B x S flags; absent slots use e_null

        Returns:
            torch.Tensor: B x d location tokens
        """
        e_cur = self.corner_embedding(current)
        e_ctx = self.corner_embedding(context)
        e_ctx = torch.where(present.unsqueeze(-1), e_ctx, self.e_null.expand_as(e_ctx))
        location = torch.cat([self.w1(e_ctx.flatten(1)), self.w2(e_cur)], dim=-1)
        if not self.config.use_location:
            location = self.placeholders[1].expand_as(location)
        return location + self._segment(Segments.LOCATION)

    def encode_info(self, ids):
        """
        Product info tokens: W_e x_i + PE_i + SE_x.

        Args:
            ids (torch.Tensor): B x K token ids

        Returns:
            torch.Tensor: B x K x d
        """
        words = self.word(ids)
        if not self.config.use_info:
            words = self.placeholders[2].expand_as(words)
        positions = self.position.weight[: ids.shape[1]]
        return words + positions + self._segment(Segments.INFO)

    def encode_caption(self, ids):
        """Caption tokens: W_e y_t + PE_t + SE_cap, positions restarting at 0."""
        positions = self.position.weight[: ids.shape[1]]
        return self.word(ids) + positions + self._segment(Segments.CAPTION)

    def forward(self, images, current, context, present, info_ids):
        """
        Encode the full context sequence image -> location -> info.

        Returns:
            torch.Tensor: B x (k^2 + 1 + K) x d
        """
        image = self.encode_image(self.visual_backbone(images))
        location = self.encode_location(current, context, present).unsqueeze(1)
        info = self.encode_info(info_ids)
        return torch.cat([image, location, info], dim=1)
