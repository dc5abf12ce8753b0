"""Binary index file (``TMX1``).

Layout, all integers little-endian::

    b"TMX1"
    version u32 | n_docs u64 | ds u32 | V u32 | alpha f64 | beta f64 | gamma f64
    n_docs x (u32 length, UTF-8 doc_id)
    n_docs x (2*ds + V) f64 matrix, row-major
    vocabulary:  n_docs u64 | count u32 | count x (u32 length, UTF-8 term, u64 df)
    entities:    n_docs u64 | count u32 | count x (u32 length, UTF-8 entity, u64 df)
    fingerprints: count u32 | count x (key, value) length-prefixed UTF-8 strings
    CRC32 u32 of every preceding byte

The encoder profile fingerprint is stored under the ``encoder`` key.
"""

from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

import numpy as np

from trimodal.entities import EntityCatalog
from trimodal.fusion import FusionConfig, HybridIndex
from trimodal.lexical import Vocabulary

MAGIC = b"TMX1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<IQIIddd")
_MIN_SIZE = len(MAGIC) + _HEADER.size + 4


class IndexFileError(Exception):
    code = "E_FORMAT"


class IndexTruncatedError(IndexFileError):
    code = "E_TRUNCATED"


class IndexChecksumError(IndexFileError):
    code = "E_CHECKSUM"


class IndexVersionError(IndexFileError):
    code = "E_VERSION"


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _pack_counts(n_docs: int, keys: tuple[str, ...], dfs: tuple[int, ...]) -> bytes:
    parts = [struct.pack("<QI", n_docs, len(keys))]
    for key, df in zip(keys, dfs):
        parts.append(_pack_str(key))
        parts.append(struct.pack("<Q", df))
    return b"".join(parts)


def index_to_bytes(index: HybridIndex) -> bytes:
    cfg = index.config
    parts = [
        MAGIC,
        _HEADER.pack(
            FORMAT_VERSION, len(index), index.ds, index.vocabulary.dim,
            cfg.alpha, cfg.beta, cfg.gamma,
        ),
    ]
    parts.extend(_pack_str(d) for d in index.doc_ids)
    parts.append(np.ascontiguousarray(index.matrix, dtype="<f8").tobytes())
    voc, cat = index.vocabulary, index.catalog
    parts.append(_pack_counts(voc.n_docs, voc.terms, voc.df))
    parts.append(_pack_counts(cat.n_docs, cat.entities, cat.df))
    fps = {"encoder": index.encoder_profile, **index.fingerprints}
    parts.append(struct.pack("<I", len(fps)))
    for key in sorted(fps):
        parts.append(_pack_str(key) + _pack_str(fps[key]))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_index(index: HybridIndex, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(index_to_bytes(index))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, buf: bytes) -> None:
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise IndexFileError("index file is internally inconsistent (section overruns file)")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        st = struct.Struct(fmt)
        return st.unpack(self.take(st.size))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")

    def counts(self) -> tuple[int, tuple[str, ...], tuple[int, ...]]:
        n_docs, count = self.unpack("<QI")
        keys, dfs = [], []
        for _ in range(count):
            keys.append(self.string())
            dfs.append(self.unpack("<Q")[0])
        return n_docs, tuple(keys), tuple(dfs)


def index_from_bytes(data: bytes) -> HybridIndex:
    if len(data) < _MIN_SIZE:
        raise IndexTruncatedError(f"index file too short ({len(data)} bytes)")
    if data[:4] != MAGIC:
        raise IndexFileError("not a TMX1 index file (bad magic)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise IndexChecksumError("index file checksum mismatch (truncated or corrupted)")
    rd = _Reader(body)
    rd.take(4)
    version, n_docs, ds, v, alpha, beta, gamma = rd.unpack(_HEADER.format)
    if version != FORMAT_VERSION:
        raise IndexVersionError(f"index format version {version}, this build reads {FORMAT_VERSION}")
    doc_ids = tuple(rd.string() for _ in range(n_docs))
    width = 2 * ds + v
    matrix = np.frombuffer(rd.take(8 * n_docs * width), dtype="<f8").reshape(n_docs, width).copy()
    vocab = Vocabulary(*_reorder(rd.counts()))
    catalog = EntityCatalog(*_reorder(rd.counts()))
    (n_fp,) = rd.unpack("<I")
    fps = {}
    for _ in range(n_fp):
        key = rd.string()
        fps[key] = rd.string()
    if rd.pos != len(body):
        raise IndexFileError("trailing bytes after fingerprint section")
    encoder = fps.pop("encoder", "")
    return HybridIndex(
        doc_ids=doc_ids,
        matrix=matrix,
        config=FusionConfig(alpha, beta, gamma),
        vocabulary=vocab,
        catalog=catalog,
        encoder_profile=encoder,
        ds=ds,
        fingerprints=fps,
    )


def _reorder(section: tuple[int, tuple[str, ...], tuple[int, ...]]):
    n_docs, keys, dfs = section
    return keys, dfs, n_docs


def load_index(path: str | Path) -> HybridIndex:
    return index_from_bytes(Path(path).read_bytes())
