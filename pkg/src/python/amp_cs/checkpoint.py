"""
Checkpoint files (.ampck).

Layout, all integers little-endian:

    magic      8 bytes  b"AMPCK\\x00\\r\\n"
    version    u32
    header_len u64
    header     UTF-8 JSON CheckpointManifest
    payload    float64 ('<f8') tensors at the offsets the manifest lists

Tensor names carry a prefix: param/, buffer/, adam_m/ or adam_v/.
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from .errors import CheckpointError
from .models import CHECKPOINT_VERSION, CheckpointManifest, EpochRecord, NetConfig, TensorEntry, TrainConfig
from .nets import AmpNetParams, init_params
from .optim import Adam
from .tensor import DTYPE

log = logging.getLogger(__name__)

MAGIC = b"AMPCK\x00\r\n"
_PREAMBLE = struct.Struct("<8sIQ")
_FLOAT = np.dtype("<f8")

PARAM_PREFIX = "param/"
BUFFER_PREFIX = "buffer/"


@dataclass
class Checkpoint:
    manifest: CheckpointManifest
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)


def checkpoint_from_model(params: AmpNetParams, optimizer: Optional[Adam] = None,
                          train_config: Optional[TrainConfig] = None, epoch: int = 0,
                          history: Iterable[EpochRecord] = ()) -> Checkpoint:
    tensors: Dict[str, np.ndarray] = {}
    for name, param in params.named_params().items():
        tensors[PARAM_PREFIX + name] = param.data.copy()
    for name, buffer in params.named_buffers().items():
        tensors[BUFFER_PREFIX + name] = buffer.copy()
    if optimizer is not None:
        tensors.update({name: array.copy() for name, array in optimizer.state_arrays().items()})
    manifest = CheckpointManifest(kind=params.config.kind, net=params.config, train=train_config,
                                  epoch=epoch, adam_step=optimizer.t if optimizer else 0,
                                  history=list(history))
    return Checkpoint(manifest, tensors)


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> Path:
    path = Path(path)
    entries = []
    offset = 0
    chunks = []
    for name in sorted(checkpoint.tensors):
        array = np.ascontiguousarray(checkpoint.tensors[name], dtype=_FLOAT)
        entries.append(TensorEntry(name=name, shape=array.shape, offset=offset))
        chunks.append(array.tobytes())
        offset += array.nbytes
    manifest = checkpoint.manifest.model_copy(update={"tensors": entries, "version": CHECKPOINT_VERSION})
    header = manifest.model_dump_json().encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, CHECKPOINT_VERSION, len(header)))
        f.write(header)
        for chunk in chunks:
            f.write(chunk)
    log.info("saved checkpoint %s (%d tensors)", path, len(entries))
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}", defect="NOT_FOUND") from None
    if len(data) < _PREAMBLE.size:
        raise CheckpointError(f"{path}: file too short for a checkpoint", defect="TRUNCATED")
    magic, version, header_len = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}", defect="BAD_MAGIC")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {CHECKPOINT_VERSION}",
                              defect="VERSION_MISMATCH")
    start = _PREAMBLE.size
    if len(data) < start + header_len:
        raise CheckpointError(f"{path}: truncated header", defect="TRUNCATED")
    try:
        manifest = CheckpointManifest.model_validate_json(data[start:start + header_len])
    except (ValidationError, UnicodeDecodeError) as e:
        raise CheckpointError(f"{path}: invalid manifest: {e}", defect="BAD_HEADER") from None

    payload = memoryview(data)[start + header_len:]
    tensors: Dict[str, np.ndarray] = {}
    for entry in manifest.tensors:
        count = int(np.prod(entry.shape, dtype=np.int64))
        end = entry.offset + count * _FLOAT.itemsize
        if end > len(payload):
            raise CheckpointError(f"{path}: payload truncated at tensor {entry.name}", defect="TRUNCATED")
        tensors[entry.name] = np.frombuffer(payload, dtype=_FLOAT, count=count,
                                            offset=entry.offset).reshape(entry.shape).copy()
    return Checkpoint(manifest, tensors)


def _split(tensors: Dict[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    return {name[len(prefix):]: array for name, array in tensors.items() if name.startswith(prefix)}


def restore_model(checkpoint: Checkpoint, net_config: Optional[NetConfig] = None,
                  lr: Optional[float] = None) -> Tuple[AmpNetParams, Adam]:
    """
    Rebuild the network described by net_config (the stored config when
    omitted) and fill it from the checkpoint. Every expected tensor must be
    present with its shape, and no stored tensor may be left over.
    """
    config = net_config or checkpoint.manifest.net
    params = init_params(config)
    named = params.named_params()
    buffers = params.named_buffers()
    stored_params = _split(checkpoint.tensors, PARAM_PREFIX)
    stored_buffers = _split(checkpoint.tensors, BUFFER_PREFIX)

    for expected, stored, kind in ((named, stored_params, "parameter"), (buffers, stored_buffers, "buffer")):
        missing = sorted(set(expected) - set(stored))
        if missing:
            raise CheckpointError(f"checkpoint lacks {kind} tensor(s): {', '.join(missing[:5])}",
                                  defect="MISSING_TENSOR")
        unknown = sorted(set(stored) - set(expected))
        if unknown:
            raise CheckpointError(f"checkpoint has unknown {kind} tensor(s): {', '.join(unknown[:5])}",
                                  defect="UNKNOWN_TENSOR")
        for name, target in expected.items():
            target_shape = target.shape
            if stored[name].shape != target_shape:
                raise CheckpointError(f"tensor {name} has shape {stored[name].shape}, expected {target_shape}",
                                      defect="SHAPE_MISMATCH")

    for name, param in named.items():
        param.data[...] = stored_params[name].astype(DTYPE)
    params.load_buffers(stored_buffers)

    train = checkpoint.manifest.train
    optimizer = Adam(params.params(), lr=lr or (train.lr if train else 1e-4))
    moments = {name: array for name, array in checkpoint.tensors.items()
               if name.startswith(("adam_m/", "adam_v/"))}
    if moments:
        expected_moments = set(optimizer.state_arrays())
        if set(moments) != expected_moments:
            raise CheckpointError("optimizer moments do not match the trainable parameters",
                                  defect="MISSING_TENSOR" if expected_moments - set(moments) else "UNKNOWN_TENSOR")
        optimizer.load_state(checkpoint.manifest.adam_step, moments)
    return params, optimizer
