"""Binary containers for symbols and sector operators, each with a JSON manifest.

A symbol container is a sequence of components, each a little-endian header
(n, rank, N, degree, flags) followed by the row-major complex128 fibers at xi0 = +1 and
xi0 = -1. Flags: bit 0 self-adjoint, bit 1 the component had equatorial values. Callables
are not stored, so a loaded symbol has neither equatorial values nor a scalar form.
"""

import hashlib
import json
import logging
import os
import struct
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, HeisenbergError
from .nilmanifold_lab import NilmanifoldModel, SectorOperator
from .symbol_algebra import HomogeneousSymbol, SymbolExpansion, as_expansion, compressed_indices

logger = logging.getLogger(__name__)

MAGIC = b"HSYM"
SECTOR_MAGIC = b"HSEC"
VERSION = 1
HEADER = struct.Struct("<iiiii")
PREAMBLE = struct.Struct("<4sHH")

FLAG_SELF_ADJOINT = 1
FLAG_EQUATOR = 2


def _paths(stem: str) -> Tuple[str, str]:
    base = stem[:-4] if stem.endswith(".bin") else stem
    return base + ".bin", base + ".json"


def _digest(path: str) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()


def save_symbol(symbol: Union[HomogeneousSymbol, SymbolExpansion], stem: str) -> Tuple[str, str]:
    """Write <stem>.bin and <stem>.json; returns both paths."""
    expansion = as_expansion(symbol) if isinstance(symbol, HomogeneousSymbol) else symbol
    if not expansion.components:
        raise HeisenbergError("cannot save an empty expansion")
    bin_path, json_path = _paths(stem)
    os.makedirs(os.path.dirname(bin_path) or ".", exist_ok=True)
    entries = []
    with open(bin_path, "wb") as handle:
        handle.write(PREAMBLE.pack(MAGIC, VERSION, len(expansion.components)))
        for c in expansion.components:
            flags = (FLAG_SELF_ADJOINT if c.self_adjoint else 0) | (FLAG_EQUATOR if c.abelian_trace is not None else 0)
            offset = handle.tell()
            handle.write(HEADER.pack(c.n, c.rank, c.cutoff, c.degree, flags))
            for fiber in c.fibers():
                handle.write(np.ascontiguousarray(fiber, dtype="<c16").tobytes())
            entries.append({
                "degree": c.degree,
                "n": c.n,
                "rank": c.rank,
                "cutoff": c.cutoff,
                "self_adjoint": bool(c.self_adjoint),
                "has_equator": c.abelian_trace is not None,
                "offset": offset,
                "bytes": handle.tell() - offset,
            })
    manifest = {
        "format": "heisenberg-symbol",
        "version": VERSION,
        "truncation_degree": expansion.truncation_degree,
        "components": entries,
        "sha256": _digest(bin_path),
    }
    with open(json_path, "w") as f:
        json.dump(manifest, f, indent=4)
    logger.info("saved %d components to %s", len(entries), bin_path)
    return bin_path, json_path


def restrict_cutoff(symbol: HomogeneousSymbol, cutoff: int) -> HomogeneousSymbol:
    """Keep the first `cutoff` Hermite levels per mode."""
    if cutoff == symbol.cutoff:
        return symbol
    if cutoff > symbol.cutoff:
        raise DimensionMismatch(f"cannot raise the Hermite cutoff from {symbol.cutoff} to {cutoff}", cutoff)
    keep = compressed_indices(symbol.n, cutoff, symbol.cutoff - cutoff, symbol.rank)
    fibers = [f[np.ix_(keep, keep)] for f in symbol.fibers()]
    return HomogeneousSymbol(symbol.degree, symbol.rank, symbol.n, cutoff, fibers[0], fibers[1],
                             self_adjoint=symbol.self_adjoint)


def load_symbol(stem: str, cutoff: Optional[int] = None, verify: bool = True) -> SymbolExpansion:
    """Read a container written by save_symbol, optionally restricted to a smaller cutoff."""
    bin_path, json_path = _paths(stem)
    with open(json_path, "r") as f:
        manifest = json.load(f)
    if manifest.get("format") != "heisenberg-symbol":
        raise HeisenbergError(f"{json_path} is not a symbol manifest")
    if verify and manifest.get("sha256") != _digest(bin_path):
        raise HeisenbergError(f"{bin_path} does not match its manifest checksum")
    components = []
    with open(bin_path, "rb") as handle:
        magic, version, count = PREAMBLE.unpack(handle.read(PREAMBLE.size))
        if magic != MAGIC or version != VERSION:
            raise HeisenbergError(f"{bin_path} has an unknown header {magic!r} v{version}")
        if count != len(manifest["components"]):
            raise HeisenbergError("container and manifest disagree on the component count", count)
        for _ in range(count):
            n, rank, N, degree, flags = HEADER.unpack(handle.read(HEADER.size))
            size = rank * N ** n
            fibers = []
            for _ in range(2):
                raw = handle.read(16 * size * size)
                if len(raw) != 16 * size * size:
                    raise HeisenbergError(f"{bin_path} is truncated")
                fibers.append(np.frombuffer(raw, dtype="<c16").reshape(size, size).copy())
            symbol = HomogeneousSymbol(degree, rank, n, N, fibers[0], fibers[1],
                                       self_adjoint=bool(flags & FLAG_SELF_ADJOINT))
            components.append(restrict_cutoff(symbol, cutoff) if cutoff is not None else symbol)
    return SymbolExpansion(tuple(components), manifest.get("truncation_degree"))


def save_sector_operator(op: SectorOperator, stem: str) -> Tuple[str, str]:
    """Write the abelian block then the nonzero sectors, with a JSON index of offsets."""
    bin_path, json_path = _paths(stem)
    os.makedirs(os.path.dirname(bin_path) or ".", exist_ok=True)
    index = []
    with open(bin_path, "wb") as handle:
        handle.write(PREAMBLE.pack(SECTOR_MAGIC, VERSION, 0))
        for m in [0] + op.model.sectors.tolist():
            block = op.sector(m)
            index.append({"sector": m, "offset": handle.tell(), "shape": list(block.shape)})
            handle.write(np.ascontiguousarray(block, dtype="<c16").tobytes())
    manifest = {
        "format": "heisenberg-sectors",
        "version": VERSION,
        "model": op.model.as_dict(),
        "rank": op.rank,
        "symbol_tag": op.symbol_tag,
        "sectors": index,
        "sha256": _digest(bin_path),
    }
    with open(json_path, "w") as f:
        json.dump(manifest, f, indent=4)
    return bin_path, json_path


def load_sector_operator(stem: str) -> SectorOperator:
    bin_path, json_path = _paths(stem)
    with open(json_path, "r") as f:
        manifest = json.load(f)
    if manifest.get("format") != "heisenberg-sectors":
        raise HeisenbergError(f"{json_path} is not a sector manifest")
    spec = manifest["model"]
    model = NilmanifoldModel(float(spec["period"]), int(spec["M"]), int(spec["N"]), int(spec["K"]))
    with open(bin_path, "rb") as handle:
        data = handle.read()
    blocks = {}
    for entry in manifest["sectors"]:
        rows, cols = entry["shape"]
        start = entry["offset"]
        blocks[entry["sector"]] = np.frombuffer(data[start:start + 16 * rows * cols],
                                                dtype="<c16").reshape(rows, cols).copy()
    stacked = np.stack([blocks[m] for m in model.sectors.tolist()])
    return SectorOperator(model, int(manifest["rank"]), stacked, blocks[0], manifest.get("symbol_tag"))
