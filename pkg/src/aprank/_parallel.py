"""Worker-count setting and an order-preserving block map.

Work is always split into the same fixed blocks regardless of the worker
count, and block results are combined in block order, so results do not
depend on how many threads ran them.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_threads = None


def get_threads():
    if _threads is not None:
        return _threads
    env = os.environ.get("APRANK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def set_threads(count):
    global _threads
    if count is not None and count < 1:
        raise ValueError(f"thread count must be >= 1, got {count}")
    _threads = count


def block_map(fn, blocks):
    """Apply ``fn`` to each item of ``blocks`` and return results in order."""
    blocks = list(blocks)
    workers = min(get_threads(), len(blocks))
    if workers <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, blocks))
