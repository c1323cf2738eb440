"""Order-preserving process-pool map.

Results come back in task order whatever the worker count, and a large
shared object (usually the estimator) is shipped once per worker instead of
once per task.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

_shared = None


def _init(shared):
    global _shared
    _shared = shared


def _call(args):
    fn, task = args
    return fn(_shared, task)


def pmap(fn, tasks, workers: int = 1, shared=None) -> list:
    """``[fn(shared, t) for t in tasks]``, optionally on ``workers`` processes."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(shared, t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init, initargs=(shared,)) as ex:
        return list(ex.map(_call, [(fn, t) for t in tasks], chunksize=max(1, len(tasks) // (4 * workers))))
