"""Change-score prediction and the composite training loss."""

import torch

__all__ = ["predicted_change", "composite_loss"]


def predicted_change(model, gt_batch: torch.Tensor, hr_batch: torch.Tensor) -> torch.Tensor:
    """(1 - cosine(embed(gt), embed(hr))) / 2 per pair, in [0, 1].

    Both batches pass through the same shared-weight backbone. The result
    is differentiable with respect to the inputs and the model weights.
    """
    if gt_batch.shape != hr_batch.shape:
        raise ValueError(
            f"batch shape mismatch: {tuple(gt_batch.shape)} vs {tuple(hr_batch.shape)}"
        )
    e_gt = model(gt_batch)
    e_hr = model(hr_batch)
    cos = torch.nn.functional.cosine_similarity(e_gt, e_hr, dim=1)
    return (1.0 - cos) / 2.0


def composite_loss(l_ori, gt_batch: torch.Tensor, hr_batch: torch.Tensor,
                   model, alpha: float) -> torch.Tensor:
    """l_ori + alpha * mean predicted change score of the batch.

    ``l_ori`` is whatever loss the caller already computed for its own
    objective; the change-score term pulls the restored images toward
    semantic agreement with their ground truths.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    l_hlf = predicted_change(model, gt_batch, hr_batch).mean()
    return l_ori + alpha * l_hlf
