"""
TNSR Binary Tensor and Mask Files

Layout (all little-endian):
    offset 0   4 bytes    magic "TNSR"
    offset 4   1 byte     version: 0x01 tensor, 0x02 mask
    offset 5   uint32     ndim
    offset 9   uint64[ndim] dims
    then       payload    float64 per entry (tensor) or one 0x00/0x01 byte (mask),
                          first index varying fastest

Reading is strict: every malformed field is reported with its byte offset.
"""
import math
import struct
from pathlib import Path
from typing import List, Sequence, Tuple, Union
import logging

import numpy as np
from pydantic import ValidationError

from src.errors import TensorFormatError
from src.etl.models import MASK_VERSION, TENSOR_VERSION, TNSR_MAGIC, TensorFileHeader
from src.math.tensor import DenseTensor, ObservationMask

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Element counts beyond this cannot be addressed by a uint64 byte offset.
MAX_ELEMENTS = 2 ** 60

_PAYLOAD_DTYPE = {TENSOR_VERSION: np.dtype("<f8"), MASK_VERSION: np.dtype("u1")}
_KIND = {TENSOR_VERSION: "tensor", MASK_VERSION: "mask"}


def _pack_header(version: int, dims: Sequence[int]) -> bytes:
    header = TensorFileHeader(version=version, dims=tuple(int(d) for d in dims))
    return (
        header.magic
        + struct.pack("<B", header.version)
        + struct.pack("<I", header.ndim)
        + struct.pack(f"<{header.ndim}Q", *header.dims)
    )


def _parse_header(raw: bytes, path: str) -> TensorFileHeader:
    if len(raw) < 9:
        raise TensorFormatError(f"file too short for a TNSR header ({len(raw)} bytes)", path, len(raw))
    if raw[:4] != TNSR_MAGIC:
        raise TensorFormatError(f"bad magic {raw[:4]!r}, expected {TNSR_MAGIC!r}", path, 0)

    version = raw[4]
    if version not in _KIND:
        raise TensorFormatError(f"unsupported version byte 0x{version:02x}", path, 4)

    (ndim,) = struct.unpack_from("<I", raw, 5)
    if ndim < 1:
        raise TensorFormatError("ndim must be >= 1", path, 5)
    if len(raw) < 9 + 8 * ndim:
        raise TensorFormatError(f"truncated header: {ndim} dims need {9 + 8 * ndim} bytes", path, len(raw))

    dims = struct.unpack_from(f"<{ndim}Q", raw, 9)
    for i, d in enumerate(dims):
        if d < 1:
            raise TensorFormatError(f"dim {i + 1} is {d}, must be >= 1", path, 9 + 8 * i)
    if math.prod(dims) > MAX_ELEMENTS:
        raise TensorFormatError(f"dimension overflow: {dims} has {math.prod(dims)} elements", path, 9)

    try:
        return TensorFileHeader(version=version, dims=dims)
    except ValidationError as e:
        raise TensorFormatError(str(e), path, 0) from e


def _read_payload(path: PathLike, expected_version: int) -> Tuple[TensorFileHeader, np.ndarray]:
    path = str(path)
    raw = Path(path).read_bytes()
    header = _parse_header(raw, path)
    if header.version != expected_version:
        raise TensorFormatError(
            f"expected a {_KIND[expected_version]} file (version 0x{expected_version:02x}), "
            f"found a {_KIND[header.version]} file (version 0x{header.version:02x})",
            path, 4,
        )

    dtype = _PAYLOAD_DTYPE[expected_version]
    start = header.nbytes
    needed = header.element_count * dtype.itemsize
    available = len(raw) - start
    if available < needed:
        raise TensorFormatError(f"truncated payload: need {needed} bytes, found {available}", path, len(raw))
    if available > needed:
        raise TensorFormatError(f"{available - needed} trailing bytes after payload", path, start + needed)

    payload = np.frombuffer(raw, dtype=dtype, count=header.element_count, offset=start)
    return header, payload


def read_header(path: PathLike) -> TensorFileHeader:
    path = str(path)
    with open(path, "rb") as f:
        head = f.read(9)
        if len(head) >= 9:
            (ndim,) = struct.unpack_from("<I", head, 5)
            head += f.read(8 * ndim)
    return _parse_header(head, path)


def write_tensor(path: PathLike, t: DenseTensor):
    with open(path, "wb") as f:
        f.write(_pack_header(TENSOR_VERSION, t.shape))
        f.write(t.data.astype("<f8").tobytes())
    logger.debug(f"Wrote tensor {t.shape} to {path}")


def read_tensor(path: PathLike) -> DenseTensor:
    header, payload = _read_payload(path, TENSOR_VERSION)
    logger.debug(f"Read tensor {header.dims} from {path}")
    return DenseTensor.from_flat(header.dims, payload.astype(np.float64))


def write_mask(path: PathLike, mask: ObservationMask):
    with open(path, "wb") as f:
        f.write(_pack_header(MASK_VERSION, mask.shape))
        f.write(mask.observed.ravel(order="F").astype(np.uint8).tobytes())
    logger.debug(f"Wrote mask {mask.shape} ({mask.count} observed) to {path}")


def read_mask(path: PathLike) -> ObservationMask:
    header, payload = _read_payload(path, MASK_VERSION)
    bad = np.flatnonzero(payload > 1)
    if bad.size:
        first = int(bad[0])
        raise TensorFormatError(
            f"mask byte 0x{int(payload[first]):02x} is neither 0x00 nor 0x01",
            str(path), header.nbytes + first,
        )
    observed = payload.astype(bool).reshape(header.dims, order="F")
    return ObservationMask(observed)


def read_mask_index_list(path: PathLike, shape: Sequence[int]) -> ObservationMask:
    """
    Mask from a text file of 1-based multi-indices, one per line, comma-separated.

    Blank lines and lines starting with '#' are skipped; repeated indices are allowed.
    """
    path = str(path)
    shape = tuple(int(s) for s in shape)
    observed = np.zeros(shape, dtype=bool, order="F")
    indices: List[Tuple[int, ...]] = []

    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                idx = tuple(int(part) for part in text.split(","))
            except ValueError:
                raise TensorFormatError(f"line {lineno}: cannot parse index '{text}'", path) from None
            if len(idx) != len(shape):
                raise TensorFormatError(
                    f"line {lineno}: index has {len(idx)} components, tensor has {len(shape)} modes", path
                )
            for i, extent in zip(idx, shape):
                if not 1 <= i <= extent:
                    raise TensorFormatError(f"line {lineno}: index {idx} out of range for shape {shape}", path)
            indices.append(tuple(i - 1 for i in idx))

    if indices:
        observed[tuple(np.array(indices).T)] = True
    logger.info(f"Imported {len(indices)} indices ({int(observed.sum())} distinct) from {path}")
    return ObservationMask(observed)
