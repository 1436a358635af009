"""Binary containers for parameters, PCC bundles and forward-pass outputs.

Layout of every container::

    magic      4 bytes
    version    u32 little-endian
    hdr_len    u32 little-endian
    header     hdr_len bytes of canonical JSON (sorted keys, no whitespace)
    payload    arrays back to back, little-endian, C order

The header lists each array's name, dtype and shape in payload order and
carries a CRC-32 of the payload, so truncation and bit flips are detected.
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .complex import ProteinCC, incidence, outer_neighborhoods
from .errors import CorruptBlob, VersionMismatch
from .features import FeatureBundle
from .tcpnet import ModelConfig, ModelParams, init_params, rebuild_params

PARAMS_MAGIC = b"TCPN"
PARAMS_VERSION = 1
BUNDLE_MAGIC = b"PCC1"
BUNDLE_VERSION = 1
OUTPUT_MAGIC = b"TCPE"
OUTPUT_VERSION = 1

_PREFIX = struct.Struct("<4sII")
_DTYPES = {"<f8", "<f4", "<i8"}


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True,
                      allow_nan=False).encode("ascii")


def pack(magic: bytes, version: int, meta: dict, arrays) -> bytes:
    """Serialize ``meta`` and a sequence of ``(name, array)`` pairs."""
    specs, chunks = [], []
    for name, a in arrays:
        a = np.asarray(a)
        le = a.dtype.newbyteorder("<")
        if le.str not in _DTYPES:
            raise TypeError(f"unsupported dtype {a.dtype} for {name}")
        chunks.append(np.ascontiguousarray(a, dtype=le).tobytes())
        specs.append({"name": name, "dtype": le.str, "shape": list(a.shape)})
    payload = b"".join(chunks)
    header = canonical_json({"arrays": specs, "crc32": zlib.crc32(payload), "meta": meta})
    return _PREFIX.pack(magic, version, len(header)) + header + payload


def unpack(data: bytes, magic: bytes, version: int):
    """Inverse of ``pack``; returns ``(meta, [(name, array), ...])``."""
    if len(data) < _PREFIX.size:
        raise CorruptBlob(f"blob too short ({len(data)} bytes)")
    got_magic, got_version, hdr_len = _PREFIX.unpack_from(data)
    if got_magic != magic:
        raise CorruptBlob(f"bad magic {got_magic!r}, expected {magic!r}")
    if got_version != version:
        raise VersionMismatch(
            f"{magic.decode()} format version {got_version} is not supported "
            f"(this build reads version {version})")
    start = _PREFIX.size + hdr_len
    if len(data) < start:
        raise CorruptBlob("blob truncated inside the header")
    try:
        header = json.loads(data[_PREFIX.size:start].decode("ascii"))
        specs, crc, meta = header["arrays"], header["crc32"], header["meta"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise CorruptBlob(f"unreadable header: {exc}") from None
    payload = data[start:]
    arrays, offset = [], 0
    for spec in specs:
        try:
            dtype = np.dtype(spec["dtype"])
            shape = tuple(int(x) for x in spec["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptBlob(f"bad array spec {spec!r}: {exc}") from None
        if spec["dtype"] not in _DTYPES or any(x < 0 for x in shape):
            raise CorruptBlob(f"bad array spec {spec!r}")
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(payload):
            raise CorruptBlob(f"blob truncated in array {spec['name']!r}")
        a = np.frombuffer(payload, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset)
        arrays.append((spec["name"], a.reshape(shape).astype(dtype.newbyteorder("="))))
        offset += nbytes
    if offset != len(payload):
        raise CorruptBlob(f"{len(payload) - offset} trailing bytes after the last array")
    if zlib.crc32(payload) != crc:
        raise CorruptBlob("payload checksum mismatch")
    return meta, arrays


def atomic_write(path, data: bytes):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        return source.read()
    with open(source, "rb") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# Model parameters
# ---------------------------------------------------------------------------

def params_to_bytes(params: ModelParams) -> bytes:
    meta = {"config": params.config.to_dict(), "dtype": np.dtype(params.dtype).str}
    return pack(PARAMS_MAGIC, PARAMS_VERSION, meta, params.named_arrays())


def params_from_bytes(data: bytes) -> ModelParams:
    meta, arrays = unpack(data, PARAMS_MAGIC, PARAMS_VERSION)
    try:
        config = ModelConfig.from_dict(meta["config"])
        template = init_params(config)
    except Exception as exc:
        raise CorruptBlob(f"bad parameter config: {exc}") from None
    expected = template.named_arrays()
    if [n for n, _ in expected] != [n for n, _ in arrays]:
        raise CorruptBlob("parameter array names do not match the config")
    for (name, want), (_, got) in zip(expected, arrays):
        if want.shape != got.shape:
            raise CorruptBlob(f"{name}: shape {got.shape}, config implies {want.shape}")
    return rebuild_params(template, [a for _, a in arrays])


def save_params(params: ModelParams, target=None) -> Optional[bytes]:
    """Write to a path or binary file object; with no target return the bytes."""
    data = params_to_bytes(params)
    if target is None:
        return data
    if hasattr(target, "write"):
        target.write(data)
    else:
        atomic_write(target, data)
    return None


def load_params(source) -> ModelParams:
    """Read from a path, a binary file object or raw bytes."""
    return params_from_bytes(_read_bytes(source))


# ---------------------------------------------------------------------------
# PCC bundles
# ---------------------------------------------------------------------------

MATRICES = ("B01", "B10", "B20", "B21", "N_outer", "N_outer_in_t", "N_bridging")


def _matrix_triplets(m) -> np.ndarray:
    coo = m.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return np.stack([coo.row[order], coo.col[order], coo.data[order]], axis=1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class PccBundle:
    """A featurized complex: header, per-rank features, matrices as triplets, cell lists."""

    header: dict
    features: tuple  # FeatureBundle per rank
    edges: np.ndarray
    cells: tuple
    coords: np.ndarray
    matrices: dict  # name -> (nnz, 3) int64 triplets

    @classmethod
    def build(cls, cc: ProteinCC, features, source_id="", sequence_withheld=False,
              sse_source="assigned", knn=None, min_sse=None) -> "PccBundle":
        outer, inn, bridging = outer_neighborhoods(cc)
        mats = {
            "B01": incidence(cc, 0, 1), "B10": incidence(cc, 1, 0),
            "B20": incidence(cc, 2, 0), "B21": incidence(cc, 2, 1),
            "N_outer": outer, "N_outer_in_t": inn, "N_bridging": bridging,
        }
        header = {
            "format_version": BUNDLE_VERSION,
            "source_id": source_id,
            "counts": [cc.num_nodes, cc.num_edges, cc.num_sse, 1],
            "scalar_widths": [b.widths[0] for b in features],
            "vector_widths": [b.widths[1] for b in features],
            "sse_labels": list(cc.sse_labels),
            "sequence_withheld": bool(sequence_withheld),
            "sse_source": sse_source,
            "knn": knn,
            "min_sse": min_sse,
            "dtype": np.dtype(features[0].scalars.dtype).str,
        }
        return cls(header, tuple(features), np.asarray(cc.edges), tuple(cc.sse_cells),
                   np.asarray(cc.coords), {k: _matrix_triplets(v) for k, v in mats.items()})

    def to_cc(self) -> ProteinCC:
        return ProteinCC(self.header["counts"][0], self.edges, self.cells,
                         tuple(self.header["sse_labels"]), self.coords)

    def named_arrays(self):
        out = [("edges", self.edges), ("coords", self.coords)]
        sizes = np.array([len(c) for c in self.cells], dtype=np.int64)
        members = np.concatenate(self.cells) if self.cells else np.zeros(0, dtype=np.int64)
        out += [("cell_sizes", sizes), ("cell_members", members.astype(np.int64))]
        for b in self.features:
            out += [(f"scalars{b.rank}", b.scalars), (f"vectors{b.rank}", b.vectors)]
        out += [(name, self.matrices[name]) for name in MATRICES]
        return out

    def to_bytes(self) -> bytes:
        return pack(BUNDLE_MAGIC, BUNDLE_VERSION, self.header, self.named_arrays())

    @classmethod
    def from_bytes(cls, data: bytes) -> "PccBundle":
        header, arrays = unpack(data, BUNDLE_MAGIC, BUNDLE_VERSION)
        a = dict(arrays)
        try:
            sizes = a["cell_sizes"]
            bounds = np.concatenate([[0], np.cumsum(sizes)])
            cells = tuple(a["cell_members"][bounds[k]:bounds[k + 1]] for k in range(len(sizes)))
            feats = tuple(FeatureBundle(r, a[f"scalars{r}"], a[f"vectors{r}"]) for r in range(4))
            bundle = cls(header, feats, a["edges"], cells, a["coords"],
                         {name: a[name] for name in MATRICES})
        except (KeyError, ValueError) as exc:
            raise CorruptBlob(f"incomplete bundle: {exc}") from None
        widths = [list(b.widths) for b in feats]
        if [w[0] for w in widths] != header.get("scalar_widths") or \
                [w[1] for w in widths] != header.get("vector_widths"):
            raise CorruptBlob("header widths disagree with the stored arrays")
        return bundle

    def write(self, path):
        atomic_write(path, self.to_bytes())

    @classmethod
    def read(cls, source) -> "PccBundle":
        return cls.from_bytes(_read_bytes(source))


# ---------------------------------------------------------------------------
# Forward outputs
# ---------------------------------------------------------------------------

def format_real(x) -> str:
    """17 significant digits: enough to round-trip any IEEE double."""
    return format(float(x), ".17g")


def outputs_to_text(final_emb, readout_vec, mode: str) -> str:
    """Canonical text: a section line per array followed by one real per line."""
    lines = [f"readout {mode} {len(readout_vec)}"]
    lines += [format_real(x) for x in np.ravel(readout_vec)]
    for b in final_emb:
        for kind, a in (("scalars", b.scalars), ("vectors", b.vectors)):
            lines.append(f"rank{b.rank}.{kind} " + " ".join(str(d) for d in a.shape))
            lines += [format_real(x) for x in a.ravel()]
    return "\n".join(lines) + "\n"


def outputs_to_bytes(final_emb, readout_vec, mode: str) -> bytes:
    arrays = [("readout", np.asarray(readout_vec))]
    for b in final_emb:
        arrays += [(f"rank{b.rank}.scalars", b.scalars), (f"rank{b.rank}.vectors", b.vectors)]
    return pack(OUTPUT_MAGIC, OUTPUT_VERSION, {"readout": mode}, arrays)


def outputs_from_bytes(data: bytes):
    meta, arrays = unpack(data, OUTPUT_MAGIC, OUTPUT_VERSION)
    return meta, dict(arrays)
