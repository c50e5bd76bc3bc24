"""Text streams for the CSV artifacts (spike rasters, weights, drives, SIC tables).

Readers sniff the gzip magic so recorded drives may be stored compressed;
writers compress when the path ends in ``.gz``.
"""
from __future__ import annotations

import csv
import gzip
import io
import os
from contextlib import ExitStack, contextmanager
from typing import BinaryIO, ContextManager, Iterator, Sequence, TextIO

GZIP_MAGIC = b"\x1f\x8b"


@contextmanager
def open_text_stream(binary_stream: BinaryIO, encoding: str = "utf-8") -> Iterator[TextIO]:
    """Decode ``binary_stream``, transparently gunzipping it; closes it on exit."""
    with ExitStack() as stack:
        stack.callback(_safe_close, binary_stream)
        buffered = io.BufferedReader(binary_stream)
        stack.callback(_safe_close, buffered)
        source: BinaryIO = buffered
        if buffered.peek(2)[:2] == GZIP_MAGIC:
            source = gzip.GzipFile(fileobj=buffered)
        text = io.TextIOWrapper(source, encoding=encoding, newline="")
        stack.callback(_safe_close, text)
        yield text


def open_text(path: str, *, encoding: str = "utf-8") -> ContextManager[TextIO]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")
    return open_text_stream(open(path, "rb"), encoding=encoding)


def iter_csv_dicts(path: str, expected_header: Sequence[str], *, encoding: str = "utf-8") -> Iterator[dict[str, str]]:
    with open_text(path, encoding=encoding) as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != tuple(expected_header):
            raise ValueError(
                f"Unexpected header in {path}: {reader.fieldnames}, expected {list(expected_header)}"
            )
        yield from reader


def write_csv(path: str, header: Sequence[str], rows, *, encoding: str = "utf-8") -> str:
    """Write ``rows`` under ``header``; I/O failures name the path."""
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        if path.endswith(".gz"):
            # mtime pinned so reruns are byte-identical
            raw = gzip.GzipFile(path, "wb", mtime=0)
            handle = io.TextIOWrapper(raw, encoding=encoding, newline="")
        else:
            handle = open(path, "w", encoding=encoding, newline="")
        with handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"Failed to write {path}: {exc}") from exc
    return path


def _safe_close(obj) -> None:
    try:
        obj.close()
    except Exception:
        pass
