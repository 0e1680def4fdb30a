# -*- coding: utf-8 -*-
"""Parameter checkpoint file

    magic "EMCK" | version u32 | manifest length u32 | msgpack manifest
    | parameter count u32 | per parameter: name length u32, utf-8 name,
    rank u32, dims u32 * rank, little-endian f64 data
"""

import collections
import struct

import msgpack
import numpy as np

from . import utils

MAGIC = b"EMCK"
VERSION = 1


class BufferReader(object):
    """Sequential little-endian reader that reports the failing offset"""

    def __init__(self, buffer, what):
        self._buffer = buffer
        self._offset = 0
        self._what = what

    @property
    def offset(self):
        return self._offset

    def remaining(self):
        return len(self._buffer) - self._offset

    def read(self, size):
        if self._offset + size > len(self._buffer):
            raise utils.FormatError(
                "Truncated %s: need %d bytes, %d left"
                % (self._what, size, self.remaining()),
                self._offset,
            )
        data = self._buffer[self._offset : self._offset + size]
        self._offset += size
        return data

    def read_u32(self):
        return struct.unpack("<I", self.read(4))[0]

    def read_u32s(self, count):
        return struct.unpack("<%dI" % count, self.read(4 * count))

    def read_array(self, dtype, count):
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.read(itemsize * count), dtype=dtype)


class Checkpoint(object):
    """Named parameters plus a manifest"""

    def __init__(self, params, manifest=None):
        self._params = collections.OrderedDict(params)
        self._manifest = dict(manifest or {})

    @property
    def params(self):
        return self._params

    @property
    def manifest(self):
        return self._manifest

    def serialize(self):
        buffer = MAGIC + struct.pack("<I", VERSION)
        manifest = msgpack.dumps(self._manifest)
        buffer += struct.pack("<I", len(manifest)) + manifest
        buffer += struct.pack("<I", len(self._params))
        for name, value in self._params.items():
            value = np.asarray(value, dtype="<f8")
            encoded = name.encode("utf-8")
            buffer += struct.pack("<I", len(encoded)) + encoded
            buffer += struct.pack("<I", value.ndim)
            buffer += struct.pack("<%dI" % value.ndim, *value.shape)
            buffer += value.tobytes(order="C")
        return buffer

    @staticmethod
    def unserialize_from(buffer):
        reader = BufferReader(buffer, "checkpoint")
        if reader.read(4) != MAGIC:
            raise utils.FormatError("Invalid checkpoint magic", 0)
        version = reader.read_u32()
        if version != VERSION:
            raise utils.FormatError(
                "Unsupported checkpoint version %d" % version, reader.offset - 4
            )
        manifest_size = reader.read_u32()
        offset = reader.offset
        try:
            manifest = msgpack.loads(reader.read(manifest_size))
        except ValueError as ex:
            raise utils.FormatError("Invalid checkpoint manifest: %s" % ex, offset)
        params = collections.OrderedDict()
        for _ in range(reader.read_u32()):
            name_size = reader.read_u32()
            offset = reader.offset
            try:
                name = reader.read(name_size).decode("utf-8")
            except UnicodeDecodeError:
                raise utils.FormatError("Invalid parameter name", offset)
            rank = reader.read_u32()
            dims = reader.read_u32s(rank)
            count = int(np.prod(dims)) if dims else 1
            params[name] = (
                reader.read_array("<f8", count).astype(np.float64).reshape(dims)
            )
        if reader.remaining():
            raise utils.FormatError(
                "%d trailing bytes in checkpoint" % reader.remaining(), reader.offset
            )
        return Checkpoint(params, manifest)


def save_checkpoint(path, params, manifest=None):
    buffer = Checkpoint(params, manifest).serialize()
    with open(path, "wb") as fp:
        fp.write(buffer)
    utils.logger.debug(
        "[Checkpoint] Saved %d parameters to %s" % (len(params), path)
    )


def load_checkpoint(path):
    with open(path, "rb") as fp:
        checkpoint = Checkpoint.unserialize_from(fp.read())
    return checkpoint.manifest, checkpoint.params
