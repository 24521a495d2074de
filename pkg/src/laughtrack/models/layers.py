"""Pooling and fusion layers shared by the three heads.

All functions operate on batched tensors. ``mask`` marks valid frames with
True; padding never contributes to any output.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F


def masked_mean(x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """(B, T, D) frames -> (B, D) mean over valid frames; all-padding rows give zeros."""
    m = mask.to(x.dtype).unsqueeze(-1)
    return (x * m).sum(-2) / m.sum(-2).clamp_min(1.0)


def adaptive_pool(x: torch.Tensor, size: int) -> torch.Tensor:
    """Average (B, D) into (B, size) slots with torch's adaptive window rule."""
    return F.adaptive_avg_pool1d(x.unsqueeze(1), size).squeeze(1)


def pool2d_to(x: torch.Tensor, mask: torch.Tensor, size: int) -> torch.Tensor:
    """Pool a (B, T, D) feature matrix to (B, size): masked mean over frames, then adaptive over dims."""
    return adaptive_pool(masked_mean(x, mask), size)


def relu(x: torch.Tensor) -> torch.Tensor:
    return torch.relu(x)


def concat(*parts: torch.Tensor) -> torch.Tensor:
    return torch.cat(parts, dim=-1)
