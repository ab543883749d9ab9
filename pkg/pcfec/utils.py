"""Iteration helpers shared by the simulator and the CLI."""

import sys
import typing


T = typing.TypeVar("T")


def drain(
        items: typing.Iterable[T],
        progress: bool = False,
        label: str = "",
        stop: typing.Optional[typing.Callable[[T], bool]] = None
) -> int:
    """Pull items until `items` runs out or `stop(item)` holds, and return how
    many were pulled, the stopping item included.

    `stop` is asked only once the producer has yielded, so a generator that
    updates shared tallies before each yield can be stopped on them. With
    `progress`, write `label`, then a dot per item (the running count every
    tenth) to stderr."""
    count = 0
    if progress and label:
        sys.stderr.write(label + " ")
    try:
        for item in items:
            count += 1
            if progress:
                sys.stderr.write(str(count) if count % 10 == 0 else ".")
                sys.stderr.flush()
            if stop is not None and stop(item):
                break
    finally:
        if progress:
            sys.stderr.write("\n")
            sys.stderr.flush()
    return count


def frange(start: float, stop: float, step: float) -> typing.List[float]:
    """Inclusive arithmetic range, rounded to suppress float drift."""
    if step <= 0:
        raise ValueError("step must be positive, got {}".format(step))
    values = []
    i = 0
    while start + i * step <= stop + step * 1e-9:
        values.append(round(start + i * step, 10))
        i += 1
    return values
