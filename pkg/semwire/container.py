#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
container module

SMC1 layout: magic b'SMC1', then entries of
(tag: 3 ASCII bytes, length: uint32 little-endian, body: length bytes)
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import json
import struct
import logging
from typing import Any, Dict, List, NamedTuple, Iterable, Optional

from .core import ContainerError, IoError

logger = logging.getLogger(__name__)

MAGIC = b'SMC1'
HEADER = struct.Struct('<3sI')
MAX_BODY = 2**32 - 1


class Tags:
        seg = 'SEG'
        edg = 'EDG'
        cap = 'CAP'
        jpg = 'JPG'
        msk = 'MSK'
        met = 'MET'

KNOWN_TAGS = (Tags.seg, Tags.edg, Tags.cap, Tags.jpg, Tags.msk, Tags.met)


class Entry(NamedTuple):
        """
        one container entry; opaque entries carry unrecognized tags read from a stream
        """
        tag: str
        body: bytes
        opaque: bool = False

        @property
        def size(self) -> int:
                return HEADER.size + len(self.body)


def write_container(entries: Iterable[Entry]) -> bytes:
        """
        this function serializes entries into an SMC1 byte string
        """
        chunks = [MAGIC]
        for entry in entries:
            tag = entry.tag
            if not isinstance(tag, str) or len(tag) != 3 or not tag.isascii():
                raise ContainerError(f'tag must be 3 ASCII characters, got {tag!r}')
            if tag not in KNOWN_TAGS and not entry.opaque:
                raise ContainerError(f'unknown tag {tag!r}. valid choices: {", ".join(KNOWN_TAGS)}')
            body = bytes(entry.body)
            if len(body) == 0:
                raise ContainerError(f'entry {tag} has an empty body')
            if len(body) > MAX_BODY:
                raise ContainerError(f'entry {tag} exceeds the 32-bit length field')
            chunks.append(HEADER.pack(tag.encode('ascii'), len(body)))
            chunks.append(body)
        return b''.join(chunks)


def read_container(data: bytes) -> List[Entry]:
        """
        this function parses an SMC1 byte string; unknown tags are kept as opaque entries
        """
        data = bytes(data)
        if data[:len(MAGIC)] != MAGIC:
            raise ContainerError(f'bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}')
        entries: List[Entry] = []
        pos = len(MAGIC)
        while pos < len(data):
            if len(data) - pos < HEADER.size:
                raise ContainerError(f'truncated entry header at offset {pos}')
            raw_tag, length = HEADER.unpack_from(data, pos)
            pos += HEADER.size
            try:
                tag = raw_tag.decode('ascii')
            except UnicodeDecodeError as err:
                raise ContainerError(f'non-ASCII tag at offset {pos - HEADER.size}') from err
            if length == 0:
                raise ContainerError(f'entry {tag} has an empty body')
            if len(data) - pos < length:
                raise ContainerError(f'entry {tag} truncated: {length} bytes announced, ' \
                                     f'{len(data) - pos} available')
            opaque = tag not in KNOWN_TAGS
            if opaque:
                logger.warning('container holds unknown tag %r (%d bytes), kept opaque', tag, length)
            entries.append(Entry(tag, data[pos:pos + length], opaque))
            pos += length
        return entries


class PayloadContainer(object):
        """
        this class wraps an ordered entry list and its exact serialized size
        """
        __slots__ = ('entries',)

        def __init__(self, entries: Iterable[Entry]) -> None:
                self.entries = tuple(entries)

        @classmethod
        def from_bytes(cls, data: bytes) -> 'PayloadContainer':
                return cls(read_container(data))

        @classmethod
        def from_file(cls, path: str) -> 'PayloadContainer':
                try:
                    with open(path, 'rb') as handle:
                        return cls.from_bytes(handle.read())
                except OSError as err:
                    raise IoError(f'cannot read container {path}: {err}') from err

        def to_bytes(self) -> bytes:
                return write_container(self.entries)

        def to_file(self, path: str) -> int:
                """
                write the container, return the number of bytes on disk
                """
                data = self.to_bytes()
                try:
                    with open(path, 'wb') as handle:
                        handle.write(data)
                except OSError as err:
                    raise IoError(f'cannot write container {path}: {err}') from err
                return len(data)

        @property
        def tags(self) -> List[str]:
                return [entry.tag for entry in self.entries]

        def get(self, tag: str) -> Optional[bytes]:
                """
                body of the first entry with the given tag
                """
                for entry in self.entries:
                    if entry.tag == tag:
                        return entry.body
                return None

        def require(self, tag: str) -> bytes:
                body = self.get(tag)
                if body is None:
                    raise ContainerError(f'container lacks a {tag} entry (has: {", ".join(self.tags) or "none"})')
                return body

        @property
        def total_bytes(self) -> int:
                return len(MAGIC) + sum(entry.size for entry in self.entries)

        @property
        def overhead(self) -> int:
                """
                magic plus per-entry headers
                """
                return len(MAGIC) + HEADER.size * len(self.entries)

        def entry_sizes(self) -> Dict[str, int]:
                """
                body bytes per tag
                """
                sizes: Dict[str, int] = {}
                for entry in self.entries:
                    sizes[entry.tag] = sizes.get(entry.tag, 0) + len(entry.body)
                return sizes

        def __eq__(self, other: object) -> bool:
                if not isinstance(other, PayloadContainer):
                    return NotImplemented
                return self.entries == other.entries


def make_meta(**fields: Any) -> bytes:
        """
        this function serializes MET metadata as canonical (sorted, compact) JSON
        """
        return json.dumps(fields, sort_keys=True, separators=(',', ':')).encode('utf-8')


def parse_meta(body: bytes) -> Dict[str, Any]:
        try:
            meta = json.loads(body.decode('utf-8'))
        except (UnicodeDecodeError, ValueError) as err:
            raise ContainerError(f'MET entry is not valid UTF-8 JSON: {err}') from err
        if not isinstance(meta, dict):
            raise ContainerError('MET entry must be a JSON object')
        return meta
