"""File formats: truth tables, parity specs, verdicts and transcripts."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .oracles import ENUMERATION_LIMIT, ParitySpec, TruthTableOracle


def write_truth_table(path, table: np.ndarray, n: int) -> None:
    """One JSON header line ``{"n": n}`` followed by 2^n bits, little-endian within each byte."""
    table = np.asarray(table, dtype=np.uint8)
    if table.size != 1 << n:
        raise ValueError(f"table has {table.size} entries, expected 2^{n}")
    with open(path, "wb") as fh:
        fh.write(json.dumps({"n": n}).encode() + b"\n")
        fh.write(np.packbits(table & 1, bitorder="little").tobytes())


def read_truth_table(path) -> tuple[int, np.ndarray]:
    raw = Path(path).read_bytes()
    header, _, body = raw.partition(b"\n")
    n = int(json.loads(header)["n"])
    if not 0 <= n <= ENUMERATION_LIMIT:
        raise ValueError(f"truth-table files are limited to n <= {ENUMERATION_LIMIT}")
    size = 1 << n
    if len(body) < -(-size // 8):
        raise ValueError("truth-table body is truncated")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), bitorder="little")[:size]
    return n, bits


def load_oracle(path) -> TruthTableOracle:
    n, table = read_truth_table(path)
    return TruthTableOracle(n, table)


def dump_parity(spec: ParitySpec) -> str:
    return json.dumps(spec.to_json())


def load_parity(text: str) -> ParitySpec:
    return ParitySpec.from_json(json.loads(text))
