"""
Tests for the attention mask, the captioning transformer and its losses.
"""
import dataclasses
import math

import numpy as np
import pytest
import torch

from boxcap.core.config import ModelConfig
from boxcap.data.cards import Card, TextBox
from boxcap.data.vocab import Vocabulary
from boxcap.model.batching import BatchBuilder, Sample
from boxcap.model.net import BoxCaptioner, build_attention_mask, cg_loss, cm_loss
from boxcap.utils.constants import SpecialTokens
from boxcap.utils.errors import NonFiniteError


def _card_batch(model, vocab, cards, count=6):
    builder = BatchBuilder(vocab, model.config)
    samples = [Sample(card, i) for card in cards for i in range(len(card.items))]
    return builder.build(samples[:count])


def test_attention_mask_example():
    """Test the 3 + 2 prefix mask row by row."""
    mask = build_attention_mask(3, 2)
    expected = torch.tensor(
        [
            [1, 1, 1, 0, 0],
            [1, 1, 1, 0, 0],
            [1, 1, 1, 0, 0],
            [1, 1, 1, 1, 0],
            [1, 1, 1, 1, 1],
        ],
        dtype=torch.bool,
    )
    assert torch.equal(mask, expected)


def test_attention_mask_without_caption():
    assert torch.all(build_attention_mask(4, 0))


def test_attention_mask_bidirectional_caption():
    mask = build_attention_mask(2, 3, bidirectional_caption=True)
    assert torch.all(mask[2:])
    assert not torch.any(mask[:2, 2:])


def test_attention_mask_properties():
    """Test causality and the context and pad isolation on random shapes."""
    rng = np.random.default_rng(50)
    for _ in range(50):
        context = int(rng.integers(1, 12))
        caption = int(rng.integers(0, 9))
        total = context + caption
        valid = torch.from_numpy(rng.random((2, total)) < 0.8)
        mask = build_attention_mask(context, caption, valid)
        assert mask.shape == (2, total, total)
        # Context rows never see caption columns
        assert not torch.any(mask[:, :context, context:])
        # Caption rows never see later caption columns
        for t in range(caption):
            assert not torch.any(mask[:, context + t, context + t + 1 :])
        # Padded positions neither attend nor are attended
        for row in range(2):
            padded = ~valid[row]
            assert not torch.any(mask[row][padded])
            assert not torch.any(mask[row][:, padded])
        # Valid rows see every valid earlier position
        plain = build_attention_mask(context, caption)
        assert torch.equal(mask, plain & valid.unsqueeze(2) & valid.unsqueeze(1))


def test_forward_shapes(model, vocab, cards):
    """Test logits B x T_max x V and scores in (0, 1)."""
    batch = _card_batch(model, vocab, cards)
    with torch.no_grad():
        output = model(batch)
    assert output.logits.shape == (6, model.config.max_caption_len, len(vocab))
    assert output.scores.shape == (6,)
    assert torch.all((output.scores > 0) & (output.scores < 1))


def test_forward_is_permutation_equivariant(model, vocab, cards):
    batch = _card_batch(model, vocab, cards)
    order = [3, 0, 5, 1, 4, 2]
    with torch.no_grad():
        output = model(batch)
        permuted = model(batch.index_select(order))
    assert torch.allclose(permuted.logits, output.logits[order], atol=1e-5)
    assert torch.allclose(permuted.scores, output.scores[order], atol=1e-6)


def test_future_tokens_do_not_change_logits(model, vocab, cards):
    """Test that changing caption token t + 1 leaves logits at steps <= t unchanged."""
    batch = _card_batch(model, vocab, cards, count=1)
    length = int(batch.caption_valid[0].sum())
    assert length >= 3
    t = 1
    changed = batch.caption_ids.clone()
    changed[0, t + 1] = vocab.unk_id if changed[0, t + 1] != vocab.unk_id else vocab.sep_id
    with torch.no_grad():
        original = model(batch).logits
        perturbed = model(dataclasses.replace(batch, caption_ids=changed)).logits
    assert torch.allclose(original[0, : t + 1], perturbed[0, : t + 1], atol=1e-6)
    assert not torch.equal(original[0, t + 1], perturbed[0, t + 1])


def test_generation_score_ignores_caption(model, vocab, cards):
    """Test that the SOS score depends on the context only under the causal mask."""
    batch = _card_batch(model, vocab, cards, count=2)
    changed = batch.caption_ids.clone()
    changed[:, 1:] = vocab.unk_id
    replaced = dataclasses.replace(batch, caption_ids=changed)
    with torch.no_grad():
        causal = model(batch).scores
        causal_changed = model(replaced).scores
        matching = model(batch, matching=True).scores
        matching_changed = model(replaced, matching=True).scores
    assert torch.allclose(causal, causal_changed, atol=1e-6)
    assert not torch.equal(matching, matching_changed)


def test_padding_is_inert(model, vocab, cards):
    """Test that pad content and extra pad columns leave real positions unchanged."""
    batch = _card_batch(model, vocab, cards, count=3)
    info = batch.info_ids.clone()
    info[~batch.info_valid] = vocab.unk_id
    captions = batch.caption_ids.clone()
    captions[~batch.caption_valid] = vocab.unk_id

    extra = 3
    longer = dataclasses.replace(
        batch,
        caption_ids=torch.cat(
            [batch.caption_ids, torch.zeros(3, extra, dtype=torch.long)], dim=1
        ),
        caption_valid=torch.cat(
            [batch.caption_valid, torch.zeros(3, extra, dtype=torch.bool)], dim=1
        ),
    )
    with torch.no_grad():
        output = model(batch)
        noisy = model(dataclasses.replace(batch, info_ids=info, caption_ids=captions))
        padded = model(longer)

    valid = batch.caption_valid
    assert torch.allclose(output.logits[valid], noisy.logits[valid], atol=1e-5)
    assert torch.allclose(output.scores, noisy.scores, atol=1e-6)
    width = batch.caption_ids.shape[1]
    assert torch.allclose(output.logits[valid], padded.logits[:, :width][valid], atol=1e-5)


def test_non_finite_activations_fail_fast(model, vocab, cards):
    batch = _card_batch(model, vocab, cards, count=2)
    with torch.no_grad():
        model.encoder.word.weight.fill_(float("nan"))
    with pytest.raises(NonFiniteError, match="non-finite"):
        model(batch)


def test_cg_loss_examples():
    """Test uniform, perfect and hand-computed caption-generation losses."""
    targets = torch.tensor([[1, 2, 3]])
    mask = torch.ones(1, 3, dtype=torch.bool)
    uniform = cg_loss(torch.zeros(1, 3, 20), targets, mask)
    assert abs(uniform.item() - math.log(20)) < 1e-6

    perfect = torch.nn.functional.one_hot(targets, 20).float() * 100.0
    assert cg_loss(perfect, targets, mask).item() < 1e-6

    probs = torch.tensor(
        [[[0.5, 1 / 6, 1 / 6, 1 / 6], [0.25, 0.25, 0.25, 0.25]]], dtype=torch.float64
    )
    loss = cg_loss(torch.log(probs), torch.tensor([[0, 0]]), torch.ones(1, 2))
    assert abs(loss.item() - (-(math.log(0.5) + math.log(0.25)) / 2)) < 1e-9
    assert abs(loss.item() - 1.0397) < 1e-4


def test_cg_loss_averages_per_sample():
    """Test that every sample with targets weighs the same regardless of length."""
    logits = torch.zeros(2, 3, 4)
    logits[0, 0, 1] = 5.0
    targets = torch.tensor([[1, 0, 0], [2, 2, 2]])
    mask = torch.tensor([[True, False, False], [True, True, True]])
    nll_first = -torch.log_softmax(logits[0, 0], dim=-1)[1]
    expected = (nll_first + math.log(4)) / 2
    assert torch.allclose(cg_loss(logits, targets, mask), expected)

    # Rows without targets are skipped
    empty_row = torch.tensor([[True, False, False], [False, False, False]])
    assert torch.allclose(cg_loss(logits, targets, empty_row), nll_first)


def test_cg_loss_all_padded():
    with pytest.raises(ValueError):
        cg_loss(torch.zeros(2, 3, 5), torch.zeros(2, 3, dtype=torch.long), torch.zeros(2, 3))


def test_cm_loss_examples():
    """Test the binary cross-entropy at the documented scores."""
    half = torch.tensor([0.5, 0.5])
    assert abs(cm_loss(half, torch.tensor([0.0, 1.0])).item() - math.log(2)) < 1e-6
    assert abs(cm_loss(torch.tensor([0.9]), torch.tensor([1.0])).item() - 0.10536) < 1e-5
    assert abs(cm_loss(torch.tensor([0.9]), torch.tensor([0.0])).item() - 2.3026) < 1e-4


def test_cm_loss_clips_scores():
    loss = cm_loss(torch.tensor([0.0], dtype=torch.float64), torch.tensor([1.0]))
    assert torch.isfinite(loss)
    assert abs(loss.item() + math.log(1e-7)) < 1e-6


def _gradient_check_setup():
    tokens = [f"t{i}" for i in range(15)]
    vocab = Vocabulary(SpecialTokens.get_tokens() + tokens)
    rng = np.random.default_rng(0)
    card = Card(
        image=rng.random((16, 16, 3)).astype(np.float32),
        info="t9 t10 [SEP] t11",
        items=[
            (TextBox(0.0, 0.0, 0.5, 0.25), "t0 t1 t2"),
            (TextBox(0.25, 0.375, 0.75, 0.5), "t3 t4"),
            (TextBox(0.5, 0.75, 1.0, 1.0), "t5 t6 t7 t8"),
        ],
        category=0,
        card_id="grad",
    )
    config = ModelConfig(
        layers=1,
        width=16,
        heads=2,
        grid=4,
        vocab_size=len(vocab),
        max_caption_len=6,
        max_info_len=8,
        dropout=0.0,
        backbone_channels=4,
    )
    assert config.vocab_size == 20
    torch.manual_seed(0)
    model = BoxCaptioner(config).double()
    builder = BatchBuilder(vocab, config)

    def as_double(batch):
        return dataclasses.replace(
            batch, images=batch.images.double(), labels=batch.labels.double()
        )

    generation = as_double(builder.build([Sample(card, i) for i in range(3)]))
    matching = as_double(
        builder.build(
            [
                Sample(card, 0),
                Sample(card, 1, caption=card.captions[2], label=0.0),
                Sample(card, 2),
            ]
        )
    )

    def loss_fn():
        logits = model(generation).logits
        scores = model(matching, matching=True).scores
        return cg_loss(logits, generation.targets, generation.target_mask) + cm_loss(
            scores, matching.labels
        )

    return model, loss_fn


def test_gradient_check():
    """Test analytic against central-difference gradients in double precision."""
    model, loss_fn = _gradient_check_setup()
    model.zero_grad()
    loss_fn().backward()

    rng = np.random.default_rng(1)
    step = 1e-5
    worst = 0.0
    for name, param in model.named_parameters():
        flat = param.data.view(-1)
        grad = param.grad.view(-1) if param.grad is not None else torch.zeros_like(flat)
        picks = {int(grad.abs().argmax())}
        picks.update(int(i) for i in rng.integers(0, flat.numel(), size=2))
        for index in sorted(picks):
            original = flat[index].item()
            with torch.no_grad():
                flat[index] = original + step
                plus = loss_fn().item()
                flat[index] = original - step
                minus = loss_fn().item()
                flat[index] = original
            numeric = (plus - minus) / (2 * step)
            analytic = grad[index].item()
            error = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-4)
            assert error < 1e-4, f"{name}[{index}]: {analytic} vs {numeric}"
            worst = max(worst, error)
    assert worst < 1e-4
