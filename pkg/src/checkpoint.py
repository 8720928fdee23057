"""
Binary checkpoint container.

    magic      8 bytes  b"AFFCKPT\\0"
    version    u32
    header     u64 length + UTF-8 JSON (sorted keys): config, epoch, step, rng, history
    count      u32
    records    u32 name length, name, u32 rank, u64 extents, little-endian float64 values

Record names are prefixed with "param/", "adam_m/" or "adam_v/". All
integers are little-endian.
"""

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from typing import Any, BinaryIO, Dict, List, Optional

import numpy as np

from .errors import CheckpointError, CheckpointVersionError, ConfigMismatchError, TruncatedCheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"AFFCKPT\0"
FORMAT_VERSION = 1
SECTIONS = ("param", "adam_m", "adam_v")


@dataclass
class TrainingState:
    """Everything needed to continue training bit-exactly"""
    model_config: Dict[str, Any]
    train_config: Dict[str, Any]
    epoch: int  # number of completed epochs
    step: int   # Adam step counter
    rng_state: Dict[str, Any]
    params: Dict[str, np.ndarray]
    adam_m: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: Dict[str, np.ndarray] = field(default_factory=dict)
    history: List[Dict[str, float]] = field(default_factory=list)


def _write_record(f: BinaryIO, name: str, array: np.ndarray):
    encoded = name.encode("utf-8")
    array = np.asarray(array, dtype='<f8')
    f.write(struct.pack("<I", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<I", array.ndim))
    f.write(struct.pack(f"<{array.ndim}Q", *array.shape))
    f.write(np.ascontiguousarray(array).tobytes())


def save_checkpoint(state: TrainingState, path: str):
    header = {
        "model_config": state.model_config,
        "train_config": state.train_config,
        "epoch": state.epoch,
        "step": state.step,
        "rng_state": state.rng_state,
        "history": state.history,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    records = [(f"{section}/{name}", array)
               for section, arrays in zip(SECTIONS, (state.params, state.adam_m, state.adam_v))
               for name, array in arrays.items()]

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = path + ".tmp"
    with open(tmp_path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        f.write(struct.pack("<I", len(records)))
        for name, array in records:
            _write_record(f, name, array)
    os.replace(tmp_path, path)
    logger.debug("Checkpoint written to %s (epoch %d)", path, state.epoch)


class _Reader:
    def __init__(self, f: BinaryIO, path: str):
        self.f = f
        self.path = path

    def read(self, size: int) -> bytes:
        data = self.f.read(size)
        if len(data) != size:
            raise TruncatedCheckpointError(f"{self.path}: file ends {size - len(data)} bytes early")
        return data

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def load_checkpoint(path: str, expected_model_config: Optional[Dict[str, Any]] = None) -> TrainingState:
    """Read a checkpoint; with `expected_model_config`, refuse one built for another architecture"""
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint {path} not found")
    with open(path, "rb") as f:
        reader = _Reader(f, path)
        if reader.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        (version,) = reader.unpack("<I")
        if version != FORMAT_VERSION:
            raise CheckpointVersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
        (header_length,) = reader.unpack("<Q")
        try:
            header = json.loads(reader.read(header_length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: corrupt header ({e})")

        sections: Dict[str, Dict[str, np.ndarray]] = {section: {} for section in SECTIONS}
        (count,) = reader.unpack("<I")
        for _ in range(count):
            (name_length,) = reader.unpack("<I")
            name = reader.read(name_length).decode("utf-8")
            (rank,) = reader.unpack("<I")
            shape = reader.unpack(f"<{rank}Q") if rank else ()
            values = np.frombuffer(reader.read(8 * int(np.prod(shape, dtype=np.int64))), dtype='<f8')
            section, _, key = name.partition("/")
            if section not in sections:
                raise CheckpointError(f"{path}: unknown record {name!r}")
            sections[section][key] = values.reshape(shape).astype(np.float64)
        if f.read(1):
            raise CheckpointError(f"{path}: unexpected data after the last record")

    if expected_model_config is not None and header["model_config"] != expected_model_config:
        differing = sorted(k for k in set(header["model_config"]) | set(expected_model_config)
                           if header["model_config"].get(k) != expected_model_config.get(k))
        raise ConfigMismatchError(f"{path}: model config differs in {', '.join(differing)}")

    return TrainingState(
        model_config=header["model_config"],
        train_config=header["train_config"],
        epoch=header["epoch"],
        step=header["step"],
        rng_state=header["rng_state"],
        params=sections["param"],
        adam_m=sections["adam_m"],
        adam_v=sections["adam_v"],
        history=header["history"],
    )
