"""
Captioning transformer for boxcap.

A single transformer stack used as encoder and decoder (prefix LM): context
tokens attend to each other bidirectionally, caption tokens attend to the whole
context and causally to earlier caption tokens. The CG head reads every caption
position, the CM head reads the SOS position.
"""

import logging
import math
from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..utils.errors import NonFiniteError
from .encoders import ContextEncoder

logger = logging.getLogger(__name__)

CM_EPSILON = 1e-7


def build_attention_mask(
    context_len, caption_len, valid=None, bidirectional_caption=False
):
    """
    Boolean prefix-LM attention mask; True means "may attend".

    Context rows see every context column and no caption column. Caption row t
    sees the context and caption columns <= t, or the whole caption segment when
    ``bidirectional_caption`` is set (caption-matching batches). Padded
    positions attend to nothing and are attended by nothing.

    Args:
        context_len (int): Number of context positions
        caption_len (int): Number of caption positions
        valid (torch.Tensor): Optional B x N flags of non-pad positions
        bidirectional_caption (bool): Let caption rows see the full caption

    Returns:
        torch.Tensor: N x N, or B x N x N when ``valid`` is given
    """
    total = context_len + caption_len
    mask = torch.zeros(total, total, dtype=torch.bool)
    mask[:, :context_len] = True
    mask[:context_len, context_len:] = False
    if caption_len:
        caption = torch.ones(caption_len, caption_len, dtype=torch.bool)
        if not bidirectional_caption:
            caption = torch.tril(caption)
        mask[context_len:, context_len:] = caption
    if valid is None:
        return mask
    valid = valid.to(torch.bool)
    return mask.unsqueeze(0) & valid.unsqueeze(2) & valid.unsqueeze(1)


class MultiHeadAttention(nn.Module):
    """Multi-head self-attention honouring a boolean mask."""

    def __init__(self, width, heads, dropout):
        super().__init__()
        self.heads = heads
        self.head_dim = width // heads
        self.qkv = nn.Linear(width, 3 * width)
        self.out = nn.Linear(width, width)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, mask):
        batch, length, width = x.shape
        q, k, v = self.qkv(x).split(width, dim=-1)

        def heads(t):
            return t.view(batch, length, self.heads, self.head_dim).transpose(1, 2)

        q, k, v = heads(q), heads(k), heads(v)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        allowed = mask.unsqueeze(1)
        scores = scores.masked_fill(~allowed, torch.finfo(scores.dtype).min)
        # Rows with nothing to attend to (padding) produce zeros
        weights = F.softmax(scores, dim=-1) * allowed.any(-1, keepdim=True)
        context = self.dropout(weights) @ v
        context = context.transpose(1, 2).reshape(batch, length, width)
        return self.out(context)


class TransformerBlock(nn.Module):
    """Pre-norm residual block: attention then a GELU feed-forward of width 4d."""

    def __init__(self, width, heads, ffn_mult, dropout):
        super().__init__()
        self.norm_attn = nn.LayerNorm(width)
        self.attn = MultiHeadAttention(width, heads, dropout)
        self.norm_ffn = nn.LayerNorm(width)
        self.ffn = nn.Sequential(
            nn.Linear(width, ffn_mult * width),
            nn.GELU(),
            nn.Linear(ffn_mult * width, width),
        )
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, mask):
        x = x + self.dropout(self.attn(self.norm_attn(x), mask))
        return x + self.dropout(self.ffn(self.norm_ffn(x)))


class CaptionOutput(NamedTuple):
    """Token logits at caption positions and the caption-matching score."""

    logits: torch.Tensor
    scores: torch.Tensor


def _check_finite(tensor, where):
    if not torch.isfinite(tensor).all():
        bad = (~torch.isfinite(tensor)).sum().item()
        raise NonFiniteError(f"{bad} non-finite values in {where}")


class BoxCaptioner(nn.Module):
    """
    Unified multimodal transformer with caption-generation and caption-matching heads.

    The input sequence is [image (k^2) | location (1) | info (K) | SOS + caption].
    """

    def __init__(self, config):
        super().__init__()
        self.config = config
        self.encoder = ContextEncoder(config)
        self.layers = nn.ModuleList(
            TransformerBlock(
                config.width, config.heads, config.ffn_mult, config.dropout
            )
            for _ in range(config.layers)
        )
        self.norm = nn.LayerNorm(config.width)
        self.cg_head = nn.Linear(config.width, config.vocab_size)
        self.cm_head = nn.Linear(config.width, 1)
        self._init_linear()
        if config.tie_weights:
            self.cg_head.weight = self.encoder.word.weight

    def _init_linear(self):
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.normal_(module.weight, std=0.02)
                if module.bias is not None:
                    nn.init.zeros_(module.bias)

    @property
    def context_len(self):
        return self.config.grid**2 + 1 + self.config.max_info_len

    def encode_context(self, batch):
        """
        Embed the context part of a batch.

        Returns:
            tuple: (B x C x d context tokens, B x C validity flags)
        """
        context = self.encoder(
            batch.images,
            batch.location,
            batch.neighbors,
            batch.neighbors_present,
            batch.info_ids,
        )
        fixed = torch.ones(
            batch.info_valid.shape[0],
            self.config.grid**2 + 1,
            dtype=torch.bool,
            device=batch.info_valid.device,
        )
        return context, torch.cat([fixed, batch.info_valid], dim=1)

    def decode(
        self, context, context_valid, caption_ids, caption_valid, matching=False
    ):
        """
        Run the transformer over context plus caption tokens.

        Args:
            context (torch.Tensor): B x C x d context tokens
            context_valid (torch.Tensor): B x C flags
            caption_ids (torch.Tensor): B x T ids starting with SOS
            caption_valid (torch.Tensor): B x T flags
            matching (bool): Bidirectional caption segment for caption matching

        Returns:
            CaptionOutput: B x T x V logits and B scores in (0, 1)
        """
        captions = self.encoder.encode_caption(caption_ids)
        x = torch.cat([context, captions], dim=1)
        valid = torch.cat([context_valid, caption_valid.to(torch.bool)], dim=1)
        mask = build_attention_mask(
            context.shape[1], captions.shape[1], valid, bidirectional_caption=matching
        ).to(x.device)

        _check_finite(x, "input embeddings")
        for index, layer in enumerate(self.layers):
            x = layer(x, mask)
            _check_finite(x, f"transformer layer {index}")
        x = self.norm(x)

        states = x[:, context.shape[1] :]
        logits = self.cg_head(states)
        scores = torch.sigmoid(self.cm_head(states[:, 0])).squeeze(-1)
        return CaptionOutput(logits=logits, scores=scores)

    def forward(self, batch, matching=False):
        """
        Score a MultimodalBatch.

        Args:
            batch (MultimodalBatch): Assembled samples
            matching (bool): Use the caption-matching mask

        Returns:
            CaptionOutput: logits B x T x V and scores B
        """
        context, context_valid = self.encode_context(batch)
        return self.decode(
            context, context_valid, batch.caption_ids, batch.caption_valid, matching
        )


def cg_loss(logits, targets, target_mask):
    """
    Caption-generation loss.

    Mean negative log-likelihood over the non-pad steps of each sample, then
    mean over samples that have at least one such step.

    Args:
        logits (torch.Tensor): B x T x V
        targets (torch.Tensor): B x T ids
        target_mask (torch.Tensor): B x T flags, True at real targets

    Returns:
        torch.Tensor: Scalar loss
    """
    mask = target_mask.to(logits.dtype)
    counts = mask.sum(dim=1)
    if not bool((counts > 0).any()):
        raise ValueError("every target position is padded")
    nll = F.cross_entropy(logits.transpose(1, 2), targets, reduction="none")
    per_sample = (nll * mask).sum(dim=1) / counts.clamp(min=1.0)
    return per_sample[counts > 0].mean()


def cm_loss(scores, labels):
    """
    Caption-matching binary cross-entropy, scores clipped to [eps, 1 - eps].

    Args:
        scores (torch.Tensor): B scores in (0, 1)
        labels (torch.Tensor): B labels in {0, 1}

    Returns:
        torch.Tensor: Scalar loss
    """
    s = scores.clamp(CM_EPSILON, 1.0 - CM_EPSILON)
    labels = labels.to(s.dtype)
    return F.binary_cross_entropy(s, labels)
