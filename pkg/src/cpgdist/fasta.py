"""Two-record FASTA alignments (``>left`` / ``>right``)."""

from __future__ import annotations

import json

from .kernels import ANCESTOR
from .simulator import AlignedPair, encode


class FastaError(ValueError):
    pass


def write_fasta(pair: AlignedPair, path, width: int = 0) -> None:
    """Write ``pair``; ``width > 0`` wraps sequence lines."""
    with open(path, "w") as fh:
        for name, seq in zip(("left", "right"), pair.strings()):
            fh.write(f">{name}\n")
            if width > 0:
                for k in range(0, len(seq), width):
                    fh.write(seq[k:k + width] + "\n")
            else:
                fh.write(seq + "\n")


def read_fasta(path, mode: str = ANCESTOR) -> AlignedPair:
    records = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(">"):
                records.append([line[1:].strip(), []])
            elif not records:
                raise FastaError(f"{path}:{lineno}: sequence data before the first header")
            else:
                records[-1][1].append(line)
    if len(records) != 2:
        raise FastaError(f"{path}: expected exactly 2 records, found {len(records)}")
    left, right = ("".join(chunks) for _, chunks in records)
    if len(left) != len(right):
        raise FastaError(f"{path}: sequences differ in length ({len(left)} vs {len(right)})")
    try:
        return AlignedPair(encode(left), encode(right), mode)
    except ValueError as err:
        raise FastaError(f"{path}: {err}") from None


def write_metadata(path, **fields) -> None:
    """One JSON line next to an alignment."""
    with open(path, "w") as fh:
        fh.write(json.dumps(fields, sort_keys=True) + "\n")


def read_metadata(path) -> dict:
    with open(path) as fh:
        return json.loads(fh.readline())
