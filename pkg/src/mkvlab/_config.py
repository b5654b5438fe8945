"""Process-wide knobs: worker thread count for the interaction kernels.

Results are bit-identical for every thread count (each particle's
accumulation runs entirely inside one worker), so this is purely a speed
setting.
"""

from __future__ import annotations

import os


def _from_env() -> int:
    raw = os.environ.get("MKVLAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


_num_threads = _from_env()


def get_num_threads() -> int:
    return _num_threads


def set_num_threads(n: int) -> None:
    global _num_threads
    _num_threads = max(1, int(n))
