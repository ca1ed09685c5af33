"""Gradient steps and checkpoint archives."""

from __future__ import annotations

import logging
import os
from typing import Any, Callable, Dict, Iterable, Optional

import torch

logger = logging.getLogger(__name__)

DEFAULT_LR = 2e-4
ADAM_BETAS = (0.9, 0.999)


class NonFiniteLossError(RuntimeError):
    """Raised when a training loss turns NaN/inf; carries the per-term values."""

    def __init__(self, message: str, terms: Optional[Dict[str, float]] = None):
        super().__init__(message)
        self.terms = dict(terms or {})


def make_optimizer(params: Iterable[torch.nn.Parameter], lr: float = DEFAULT_LR) -> torch.optim.Optimizer:
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    return torch.optim.Adam(params, lr=lr, betas=ADAM_BETAS)


def _total(out: Any) -> torch.Tensor:
    return out.total if hasattr(out, "total") else out


def grad_step(batch: Any, optimizer: torch.optim.Optimizer, loss_fn: Callable[[Any], Any]) -> Any:
    """One descent step on `loss_fn(batch)`; returns whatever the loss function returned.

    The step is skipped and NonFiniteLossError raised when the loss is not finite.
    """
    optimizer.zero_grad(set_to_none=True)
    out = loss_fn(batch)
    total = _total(out)
    if not torch.isfinite(total).all():
        terms = {k: float(v) for k, v in getattr(out, "terms", {}).items()}
        logger.error("Non-finite loss total=%s terms=%s", float(total), terms)
        raise NonFiniteLossError(f"non-finite loss {float(total)}", terms)
    total.backward()
    optimizer.step()
    return out


# ---------------------------------------------------------------- checkpoints
def save_checkpoint(path: str, payload: Dict[str, Any]) -> None:
    """Write the archive through a temp file so a crash never leaves a torn checkpoint."""
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    tmp = path + ".tmp"
    torch.save(payload, tmp)
    os.replace(tmp, path)
    logger.info("Checkpoint written %s epoch=%s", path, payload.get("epoch"))


def load_checkpoint(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return torch.load(path, map_location="cpu", weights_only=False)
