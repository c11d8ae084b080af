"""
End-to-end training of the unrolled networks.

The measurement operator is learned with the rest of the network: every
batch is sensed through the current W_phi, so y = W_phi x is part of the
recorded graph.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from .checkpoint import Checkpoint, checkpoint_from_model, save_checkpoint
from .errors import DataError, DimensionError, NumericError, ParameterError
from .models import EpochRecord, LossKind, TrainConfig
from .nets import AmpNetParams, forward, init_params
from .optim import Adam
from .tensor import Mode, Tape, Tensor, add, backward, charbonnier, dense, mse, scale

log = logging.getLogger(__name__)

EVAL_BATCH = 256


def loss_recon(x_hat: Tensor, x: Tensor, eps: float = 1e-3,
               kind: LossKind = LossKind.CHARBONNIER) -> Tensor:
    if kind == LossKind.MSE:
        return mse(x_hat, x)
    return charbonnier(x_hat, x, eps)


def loss_ortho(residuals: Sequence[Tensor]) -> Tensor:
    """Sum of the per-stage symmetry residuals."""
    if not residuals:
        raise ParameterError("loss_ortho needs at least one stage residual")
    total = residuals[0]
    for residual in residuals[1:]:
        total = add(total, residual)
    return total


def loss_total(l_r: Tensor, l_o: Optional[Tensor], lambda_o: float) -> Tensor:
    """L_R + lambda_o L_O; with lambda_o = 0 the symmetry term is not part of the graph."""
    if lambda_o == 0 or l_o is None:
        return l_r
    return add(l_r, scale(l_o, lambda_o))


@dataclass
class TrainResult:
    params: AmpNetParams
    optimizer: Adam
    checkpoint: Checkpoint
    history: List[EpochRecord] = field(default_factory=list)
    initial_loss: Optional[EpochRecord] = None
    final_loss: Optional[EpochRecord] = None


def _losses(params: AmpNetParams, blocks: np.ndarray, config: TrainConfig, mode: Mode):
    x = Tensor(blocks)
    y = dense(x, params.w_phi)
    result = forward(params, y, mode, with_symmetry=True, eps=config.eps_charb)
    l_r = loss_recon(result.x, x, config.eps_charb, config.loss)
    l_o = loss_ortho(result.sym_residuals) if result.sym_residuals else None
    return loss_total(l_r, l_o, config.lambda_o), l_r, l_o


def train_step(params: AmpNetParams, optimizer: Adam, blocks: np.ndarray, config: TrainConfig):
    """One Adam step on a batch; returns the (total, recon, ortho) loss values."""
    with Tape() as tape:
        total, l_r, l_o = _losses(params, blocks, config, Mode.TRAIN)
    if not np.isfinite(total.data).all():
        raise NumericError(f"non-finite training loss {total.item()}")
    backward(total, tape, params.params())
    optimizer.step()
    return total.item(), l_r.item(), (l_o.item() if l_o is not None else 0.0)


def evaluate_losses(params: AmpNetParams, blocks: np.ndarray, config: TrainConfig,
                    epoch: int = 0) -> EpochRecord:
    """Eval-mode losses over all blocks, averaged per batch weighted by batch size."""
    sums = np.zeros(3)
    for start in range(0, len(blocks), EVAL_BATCH):
        batch = blocks[start:start + EVAL_BATCH]
        total, l_r, l_o = _losses(params, batch, config, Mode.EVAL)
        sums += len(batch) * np.array([total.item(), l_r.item(), l_o.item() if l_o is not None else 0.0])
    total, recon, ortho = sums / len(blocks)
    return EpochRecord(epoch=epoch, total=total, recon=recon, ortho=ortho)


def mean_symmetry_residual(params: AmpNetParams, blocks: np.ndarray, eps: float = 1e-3) -> float:
    """Average eval-mode symmetry residual over stages."""
    y = dense(Tensor(blocks), params.w_phi)
    residuals = forward(params, y, Mode.EVAL, with_symmetry=True, eps=eps).sym_residuals
    if not residuals:
        raise ParameterError("network has no stages")
    return float(np.mean([r.item() for r in residuals]))


def _save_diagnostic(params, optimizer, config, epoch, history, checkpoint_path) -> None:
    if checkpoint_path is None:
        return
    diagnostic = Path(checkpoint_path).with_suffix(".diverged.ampck")
    save_checkpoint(checkpoint_from_model(params, optimizer, config, epoch, history), diagnostic)
    log.error("non-finite training state at epoch %d, diagnostic checkpoint written to %s", epoch, diagnostic)


def train(config: TrainConfig, blocks: np.ndarray, params: Optional[AmpNetParams] = None,
          optimizer: Optional[Adam] = None, checkpoint_path: Optional[Path] = None,
          on_epoch: Optional[Callable[[EpochRecord], None]] = None) -> TrainResult:
    blocks = np.asarray(blocks, dtype=np.float64)
    n = config.net.n_p
    if blocks.ndim != 2 or blocks.shape[0] == 0:
        raise DataError("training corpus is empty")
    if blocks.shape[1] != n:
        raise DimensionError(f"training blocks have {blocks.shape[1]} pixels, network expects {n}")
    if blocks.shape[0] < config.batch_size:
        raise DataError(f"corpus has {blocks.shape[0]} blocks, fewer than batch size {config.batch_size}")

    params = params or init_params(config.net)
    optimizer = optimizer or Adam(params.params(), lr=config.lr)
    rng = np.random.default_rng([config.seed, 7])
    history: List[EpochRecord] = []
    initial = evaluate_losses(params, blocks, config)
    log.info("initial loss %.6f (recon %.6f, ortho %.6f)", initial.total, initial.recon, initial.ortho)

    count = blocks.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(count)
        sums = np.zeros(3)
        try:
            for start in range(0, count, config.batch_size):
                batch = blocks[order[start:start + config.batch_size]]
                sums += len(batch) * np.array(train_step(params, optimizer, batch, config))
        except NumericError:
            _save_diagnostic(params, optimizer, config, epoch, history, checkpoint_path)
            raise
        total, recon, ortho = sums / count
        record = EpochRecord(epoch=epoch, total=total, recon=recon, ortho=ortho)
        history.append(record)
        log.info("epoch %d/%d  L_total %.6f  L_R %.6f  L_O %.6f",
                 epoch, config.epochs, total, recon, ortho)
        if on_epoch is not None:
            on_epoch(record)

        if not math.isfinite(total):
            _save_diagnostic(params, optimizer, config, epoch, history, checkpoint_path)
            raise NumericError(f"training loss became non-finite at epoch {epoch}")
        if checkpoint_path is not None and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_from_model(params, optimizer, config, epoch, history), checkpoint_path)

    checkpoint = checkpoint_from_model(params, optimizer, config, config.epochs, history)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint, checkpoint_path)
    final = evaluate_losses(params, blocks, config, epoch=config.epochs)
    return TrainResult(params, optimizer, checkpoint, history, initial, final)
