"""
Tests for the image, location and product info encoders.
"""
import math

import numpy as np
import pytest
import torch

from boxcap.core.config import ModelConfig
from boxcap.data.cards import TextBox
from boxcap.model.encoders import (
    ContextEncoder,
    box_to_grid,
    neighbor_context,
    select_neighbors,
)
from boxcap.utils.constants import NeighborModes, Segments


def _encoder(**overrides):
    torch.manual_seed(0)
    values = {"width": 32, "heads": 2, "grid": 8, "vocab_size": 12, "backbone_channels": 4}
    values.update(overrides)
    encoder = ContextEncoder(ModelConfig(**values))
    encoder.eval()
    return encoder


def _rows(boxes, i, k=8, mode=NeighborModes.TOP1):
    current, context, present = neighbor_context(boxes, i, k, mode)
    return (
        torch.tensor([current]),
        torch.tensor([context]),
        torch.tensor([present]),
    )


DIAGONAL = [
    TextBox(0.0, 0.0, 0.2, 0.2),
    TextBox(0.4, 0.4, 0.6, 0.6),
    TextBox(0.8, 0.8, 1.0, 1.0),
]


def test_box_to_grid():
    """Test the floor-and-clamp corner mapping."""
    assert box_to_grid(TextBox(0.0, 0.0, 1.0, 1.0), 8) == ((0, 0), (7, 7))
    assert box_to_grid(TextBox(0.5, 0.25, 0.75, 0.5), 8) == ((4, 2), (6, 4))
    assert box_to_grid(TextBox(0.124, 0.124, 0.126, 0.126), 8) == ((0, 0), (1, 1))


def test_box_to_grid_is_monotone():
    rng = np.random.default_rng(1)
    values = np.sort(rng.random(200))
    indices = [box_to_grid(TextBox(0.0, 0.0, max(v, 1e-6), 1.0), 8)[1][0] for v in values]
    assert indices == sorted(indices)
    assert all(0 <= i < 8 for i in indices)


def test_select_neighbors_examples():
    """Test the previous/next neighbours on small layouts."""
    assert select_neighbors(DIAGONAL, 1) == (0, 2)
    assert select_neighbors([TextBox(0.1, 0.1, 0.3, 0.2)], 0) == (None, None)

    # Smallest top-left sum: no previous, the nearer of the others is next
    boxes = [
        TextBox(0.7, 0.7, 0.9, 0.8),
        TextBox(0.0, 0.0, 0.2, 0.1),
        TextBox(0.3, 0.1, 0.5, 0.2),
    ]
    assert select_neighbors(boxes, 1) == (None, 2)


def test_select_neighbors_ties():
    """Test that equal sums and equal distances resolve by list index."""
    boxes = [
        TextBox(0.2, 0.0, 0.4, 0.1),
        TextBox(0.0, 0.2, 0.2, 0.3),
        TextBox(0.1, 0.1, 0.3, 0.2),
    ]
    # All three boxes share a top-left sum
    assert select_neighbors(boxes, 0) == (None, 2)
    assert select_neighbors(boxes, 1) == (0, 2)


def _brute_force_neighbors(boxes, i):
    sums = [box.top_left_sum for box in boxes]
    previous, following = [], []
    for j in range(len(boxes)):
        if j == i:
            continue
        if sums[j] < sums[i] or (sums[j] == sums[i] and j < i):
            previous.append(j)
        else:
            following.append(j)

    def nearest(candidates):
        if not candidates:
            return None
        return min(
            candidates, key=lambda j: (math.dist(boxes[j].center, boxes[i].center), j)
        )

    return nearest(previous), nearest(following)


def test_select_neighbors_matches_brute_force():
    """Test agreement with exhaustive search on 1000 random layouts."""
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        boxes = []
        for _ in range(int(rng.integers(1, 9))):
            x0, y0 = (int(v) for v in rng.integers(0, 10, size=2))
            x1 = int(rng.integers(x0 + 1, 11))
            y1 = int(rng.integers(y0 + 1, 11))
            boxes.append(TextBox(x0 / 10, y0 / 10, x1 / 10, y1 / 10))
        for i in range(len(boxes)):
            assert select_neighbors(boxes, i) == _brute_force_neighbors(boxes, i)


def test_select_neighbors_index_range():
    with pytest.raises(IndexError):
        select_neighbors(DIAGONAL, 3)


def test_neighbor_context_modes():
    """Test slot counts and presence flags of every neighbour mode."""
    current, rows, present = neighbor_context(DIAGONAL, 0, 8, NeighborModes.TOP1)
    assert current == [0, 0, 1, 1]
    assert present == [False, True]
    assert rows[0] == [0, 0, 0, 0]

    _, rows, present = neighbor_context(DIAGONAL, 1, 8, NeighborModes.TOP2)
    assert len(rows) == 4
    assert present == [True, False, True, False]

    _, rows, present = neighbor_context(DIAGONAL, 1, 8, NeighborModes.NONE)
    assert present == [False, False]

    first = neighbor_context(DIAGONAL, 1, 8, NeighborModes.RANDOM2)
    second = neighbor_context(DIAGONAL, 1, 8, NeighborModes.RANDOM2)
    assert first == second
    assert first[2] == [True, True]
    for xi, yi, xj, yj in first[1]:
        assert 0 <= xi <= xj < 8 and 0 <= yi <= yj < 8

    with pytest.raises(ValueError):
        neighbor_context(DIAGONAL, 1, 8, "nearest")


def test_visual_backbone():
    """Test grid size, determinism and finiteness of the image features."""
    encoder = _encoder()
    images = torch.rand(1, 3, 64, 64)
    with torch.no_grad():
        features = encoder.visual_backbone(images)
        again = encoder.visual_backbone(images.clone())
        zeros = encoder.visual_backbone(torch.zeros(1, 3, 64, 64))
    assert features.shape == (1, 64, 32)
    assert torch.equal(features, again)
    assert torch.isfinite(zeros).all()

    with pytest.raises(ValueError):
        encoder.visual_backbone(torch.rand(1, 3, 4, 64))


def test_encode_image_spatial_embedding():
    """Test that zero features and segment leave the concatenated cell embedding."""
    encoder = _encoder()
    with torch.no_grad():
        encoder.segment.weight[Segments.IMAGE].zero_()
        tokens = encoder.encode_image(torch.zeros(1, 64, 32))[0]
        expected = torch.cat([encoder.emb_h.weight[3], encoder.emb_v.weight[2]])
    assert tokens.shape == (64, 32)
    # Cell 19 is column 3 of row 2
    assert torch.equal(tokens[19], expected)
    # Cells 0 and 8 share column 0
    assert torch.equal(tokens[0, :16], tokens[8, :16])
    assert not torch.equal(tokens[0, 16:], tokens[8, 16:])


def test_encode_image_shape_at_width_128():
    encoder = _encoder(width=128, heads=4)
    with torch.no_grad():
        tokens = encoder.encode_image(encoder.visual_backbone(torch.rand(2, 3, 64, 64)))
    assert tokens.shape == (2, 64, 128)


def test_encode_location_shapes():
    """Test the projection shapes forced by the model width."""
    encoder = _encoder(width=128, heads=4)
    current, context, present = _rows(DIAGONAL, 1)
    assert encoder.corner_embedding(current).shape == (1, 256)
    assert encoder.w1.in_features == 512 and encoder.w1.out_features == 64
    assert encoder.w2.in_features == 256 and encoder.w2.out_features == 64
    with torch.no_grad():
        location = encoder.encode_location(current, context, present)
    assert location.shape == (1, 128)

    wide = _encoder(width=128, heads=4, neighbor_mode=NeighborModes.TOP2)
    assert wide.w1.in_features == 1024


def test_encode_location_zero_projection():
    """Test that W1 = 0 and SE_l = 0 zero the neighbour half of l."""
    encoder = _encoder()
    with torch.no_grad():
        encoder.w1.weight.zero_()
        encoder.segment.weight[Segments.LOCATION].zero_()
        location = encoder.encode_location(*_rows(DIAGONAL, 1))
    assert torch.all(location[0, :16] == 0)
    assert not torch.all(location[0, 16:] == 0)


def test_encode_location_null_neighbors():
    """Test that a box without neighbours encodes finitely and deterministically."""
    encoder = _encoder()
    single = [TextBox(0.1, 0.1, 0.6, 0.3)]
    with torch.no_grad():
        first = encoder.encode_location(*_rows(single, 0))
        second = encoder.encode_location(*_rows(single, 0))
    assert torch.isfinite(first).all()
    assert torch.equal(first, second)


def test_location_ignores_neighbor_within_same_cells():
    """Test that moving a neighbour inside its grid cells leaves l unchanged."""
    encoder = _encoder()
    moved = [TextBox(0.01, 0.01, 0.2, 0.2)] + DIAGONAL[1:]
    assert neighbor_context(DIAGONAL, 1, 8) == neighbor_context(moved, 1, 8)
    with torch.no_grad():
        before = encoder.encode_location(*_rows(DIAGONAL, 1))
        after = encoder.encode_location(*_rows(moved, 1))
    assert torch.equal(before, after)


def test_encode_info():
    """Test empty info, shapes and the pure word lookup."""
    encoder = _encoder()
    with torch.no_grad():
        empty = encoder.encode_info(torch.zeros(1, 0, dtype=torch.long))
        tokens = encoder.encode_info(torch.tensor([[5, 6, 7]]))
        encoder.position.weight.zero_()
        encoder.segment.weight[Segments.INFO].zero_()
        same = encoder.encode_info(torch.tensor([[5, 5]]))
    assert empty.shape == (1, 0, 32)
    assert tokens.shape == (1, 3, 32)
    assert torch.equal(same[0, 0], same[0, 1])
    assert torch.equal(same[0, 0], encoder.word.weight[5])


def test_removing_neighbor_changes_only_location():
    """Test that dropping a neighbour box changes only the location token."""
    encoder = _encoder()
    boxes = DIAGONAL + [TextBox(0.0, 0.7, 0.3, 0.8)]
    target = 1
    removed = select_neighbors(boxes, target)[1]
    remaining = [box for j, box in enumerate(boxes) if j != removed]
    new_target = remaining.index(boxes[target])

    images = torch.rand(1, 3, 64, 64)
    info = torch.tensor([[5, 6, 7]])
    with torch.no_grad():
        full = encoder(images, *_rows(boxes, target), info)
        reduced = encoder(images, *_rows(remaining, new_target), info)
    location = 64
    assert torch.equal(full[:, :location], reduced[:, :location])
    assert torch.equal(full[:, location + 1 :], reduced[:, location + 1 :])
    assert not torch.equal(full[:, location], reduced[:, location])
