"""Named-tensor binary container used for checkpoints and embedding files.

Layout (all integers little-endian)::

    magic      4 bytes  b"NXTD"
    version    u32      1
    config_len u32      length of the config text in bytes
    config     UTF-8    flat TOML text (ModelConfig keys, optional [meta] table)
    n_tensors  u32
    n_tensors x entry:
        name_len u16, name UTF-8, rank u8, shape u32 x rank, offset u64
    zero padding up to a 4-byte boundary
    payload    float32 little-endian, tensors back to back in table order

``offset`` is absolute from the start of the file.
"""

import hashlib
import struct
from collections import OrderedDict

import numpy as np
import tomli

from .model import Model, ModelConfig, param_shapes

MAGIC = b"NXTD"
VERSION = 1
ALIGN = 4
_F32 = np.dtype("<f4")


class CheckpointError(ValueError):
    """Base class for container load failures."""


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedError(CheckpointError):
    pass


class BoundsError(CheckpointError):
    pass


class NameSetMismatchError(CheckpointError):
    pass


# ---------------------------------------------------------------------------
# config text


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def config_to_toml(config: ModelConfig, meta=None):
    lines = [f"{k} = {_toml_value(v)}" for k, v in config.to_dict().items()]
    if meta:
        lines += ["", "[meta]"] + [f"{k} = {_toml_value(v)}" for k, v in meta.items()]
    return "\n".join(lines) + "\n"


def parse_config_text(text):
    """Return ``(ModelConfig, meta dict)`` from flat TOML text."""
    data = tomli.loads(text)
    meta = data.pop("meta", {})
    return ModelConfig.from_dict(data), meta


def load_config(path):
    with open(path, "rb") as f:
        data = tomli.load(f)
    data.pop("meta", None)
    return ModelConfig.from_dict(data)


def config_hash(config: ModelConfig):
    return hashlib.sha256(config_to_toml(config).encode()).hexdigest()


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# container


def write_container(path, config_text, tensors):
    """Write ``tensors`` (name -> array) with ``config_text`` to ``path``."""
    cfg = config_text.encode("utf-8")
    arrays = [(name, np.array(a, dtype=_F32, order="C")) for name, a in tensors.items()]
    table_size = 0
    for name, a in arrays:
        table_size += 2 + len(name.encode("utf-8")) + 1 + 4 * a.ndim + 8
    header_size = 4 + 4 + 4 + len(cfg) + 4 + table_size
    payload_start = -(-header_size // ALIGN) * ALIGN

    head = bytearray()
    head += MAGIC
    head += struct.pack("<II", VERSION, len(cfg))
    head += cfg
    head += struct.pack("<I", len(arrays))
    offset = payload_start
    for name, a in arrays:
        raw = name.encode("utf-8")
        head += struct.pack("<H", len(raw)) + raw
        head += struct.pack("<B", a.ndim)
        head += struct.pack(f"<{a.ndim}I", *a.shape)
        head += struct.pack("<Q", offset)
        offset += a.nbytes
    head += b"\0" * (payload_start - len(head))
    with open(path, "wb") as f:
        f.write(head)
        for _, a in arrays:
            f.write(a.tobytes())


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise TruncatedError(f"header ends early at byte {self.pos}")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out

    def bytes(self, n):
        if self.pos + n > len(self.buf):
            raise TruncatedError(f"header ends early at byte {self.pos}")
        out = bytes(self.buf[self.pos:self.pos + n])
        self.pos += n
        return out


def read_container(path):
    """Return ``(config_text, OrderedDict name -> float32 array)``."""
    with open(path, "rb") as f:
        buf = f.read()
    r = _Reader(buf)
    if buf[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {buf[:4]!r}, expected {MAGIC!r}")
    r.pos = 4
    (version,) = r.take("<I")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    (cfg_len,) = r.take("<I")
    try:
        config_text = r.bytes(cfg_len).decode("utf-8")
    except UnicodeDecodeError as e:
        raise CheckpointError(f"{path}: config text is not UTF-8") from e
    (n,) = r.take("<I")
    entries = []
    names = set()
    for _ in range(n):
        (name_len,) = r.take("<H")
        try:
            name = r.bytes(name_len).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"{path}: tensor name is not UTF-8") from e
        if name in names:
            raise CheckpointError(f"{path}: duplicate tensor name {name!r}")
        names.add(name)
        (rank,) = r.take("<B")
        shape = r.take(f"<{rank}I")
        (offset,) = r.take("<Q")
        entries.append((name, shape, offset))

    payload_start = -(-r.pos // ALIGN) * ALIGN
    spans = []
    for name, shape, offset in entries:
        nbytes = int(np.prod(shape, dtype=np.int64)) * _F32.itemsize
        if offset % ALIGN or offset < payload_start:
            raise BoundsError(f"{path}: tensor {name!r} has invalid offset {offset}")
        spans.append((offset, offset + nbytes, name))
    contiguous = True
    expect = payload_start
    for start, end, _ in spans:
        contiguous &= start == expect
        expect = end
    for start, end, name in sorted(spans):
        if end > len(buf):
            if contiguous:
                raise TruncatedError(f"{path}: payload truncated at tensor {name!r}")
            raise BoundsError(f"{path}: tensor {name!r} extends past end of file")
    ordered = sorted(spans)
    for (s0, e0, n0), (s1, _, n1) in zip(ordered, ordered[1:]):
        if s1 < e0:
            raise BoundsError(f"{path}: tensors {n0!r} and {n1!r} overlap")

    tensors = OrderedDict()
    for (name, shape, _), (start, end, _) in zip(entries, spans):
        arr = np.frombuffer(buf, dtype=_F32, count=(end - start) // 4, offset=start)
        tensors[name] = arr.reshape(shape).astype(np.float32)
    return config_text, tensors


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: Model, path, meta=None):
    write_container(path, config_to_toml(model.config, meta), model.params)


def load_checkpoint(path, with_meta=False):
    config_text, tensors = read_container(path)
    try:
        config, meta = parse_config_text(config_text)
    except (tomli.TOMLDecodeError, ValueError, TypeError) as e:
        raise CheckpointError(f"{path}: invalid config section ({e})") from e
    expected = param_shapes(config)
    got = {k: tuple(v.shape) for k, v in tensors.items()}
    if got != dict(expected):
        missing = sorted(set(expected) - set(got))
        extra = sorted(set(got) - set(expected))
        wrong = sorted(k for k in set(got) & set(expected) if got[k] != expected[k])
        raise NameSetMismatchError(
            f"{path}: tensors do not match config: missing={missing[:3]} "
            f"extra={extra[:3]} wrong_shape={wrong[:3]}"
        )
    model = Model(config, tensors)
    return (model, meta) if with_meta else model


def save_embeddings(path, embeddings, config: ModelConfig, meta=None):
    meta = dict(meta or {})
    meta.setdefault("kind", "embeddings")
    write_container(path, config_to_toml(config, meta), embeddings)


def load_embeddings(path):
    """Return an OrderedDict utterance id -> embedding vector."""
    _, tensors = read_container(path)
    return tensors
