"""Training loss."""

import torch


def charbonnier(pred: torch.Tensor, target: torch.Tensor,
                epsilon: float = 1e-8) -> torch.Tensor:
    """Mean of sqrt(diff^2 + eps^2) over every element; smooth L1 surrogate."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    d = pred - target
    return torch.sqrt(d * d + epsilon * epsilon).mean()
