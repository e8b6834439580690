"""Little-endian binary container shared by all artifact files.

Layout::

    magic     4 bytes (e.g. b"QSHT")
    version   u16
    header    u32 length + UTF-8 ``key=value`` lines
    blocks    u32 count, then per block: u16 name length, name,
              u64 byte length, raw bytes

Blocks are opaque byte strings; callers define their dtype and shape through
header keys.  Reading and re-writing a file reproduces it byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

VERSION = 1


class FormatError(ValueError):
    pass


@dataclass
class Container:
    magic: bytes
    meta: dict[str, str] = field(default_factory=dict)
    blocks: dict[str, bytes] = field(default_factory=dict)
    version: int = VERSION

    def to_bytes(self) -> bytes:
        if len(self.magic) != 4:
            raise FormatError("magic must be 4 bytes")
        lines = []
        for key, value in self.meta.items():
            key, value = str(key), str(value)
            if "=" in key or "\n" in key or "\n" in value:
                raise FormatError(f"metadata entry {key!r} cannot be encoded")
            lines.append(f"{key}={value}\n")
        header = "".join(lines).encode("utf-8")
        out = [self.magic, struct.pack("<H", self.version), struct.pack("<I", len(header)), header]
        out.append(struct.pack("<I", len(self.blocks)))
        for name, payload in self.blocks.items():
            raw_name = name.encode("utf-8")
            out += [struct.pack("<H", len(raw_name)), raw_name, struct.pack("<Q", len(payload)), bytes(payload)]
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes, magic: bytes | None = None) -> "Container":
        view = memoryview(data)
        if len(view) < 10:
            raise FormatError("truncated container")
        found = bytes(view[:4])
        if magic is not None and found != magic:
            raise FormatError(f"expected magic {magic!r}, found {found!r}")
        (version,) = struct.unpack_from("<H", view, 4)
        (hlen,) = struct.unpack_from("<I", view, 6)
        pos = 10
        header = bytes(view[pos : pos + hlen]).decode("utf-8")
        pos += hlen
        meta = {}
        for line in header.splitlines():
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"bad header line {line!r}")
            meta[key] = value
        (nblocks,) = struct.unpack_from("<I", view, pos)
        pos += 4
        blocks = {}
        for _ in range(nblocks):
            (nlen,) = struct.unpack_from("<H", view, pos)
            pos += 2
            name = bytes(view[pos : pos + nlen]).decode("utf-8")
            pos += nlen
            (size,) = struct.unpack_from("<Q", view, pos)
            pos += 8
            if pos + size > len(view):
                raise FormatError(f"block {name!r} truncated")
            blocks[name] = bytes(view[pos : pos + size])
            pos += size
        if pos != len(view):
            raise FormatError("trailing bytes after last block")
        return cls(found, meta, blocks, version)

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path, magic: bytes | None = None) -> "Container":
        return cls.from_bytes(Path(path).read_bytes(), magic)
