"""Small shared helpers."""
from __future__ import annotations

from contextlib import nullcontext


def open_output(path_or_file):
    """Context manager yielding a writable text stream.

    Accepts a filesystem path or an already-open file-like object (which is
    not closed on exit), so reports can go to files or stdout alike.
    """
    if hasattr(path_or_file, "write"):
        return nullcontext(path_or_file)
    return open(path_or_file, "w", newline="\n")
