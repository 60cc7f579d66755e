"""First-fit spectrum assignment over bitmask availability vectors.

Availability is an int bitmask: bit ``i`` set means slot ``i`` is free.
A channel needs the same contiguous block on every fiber it crosses, so the
multi-fiber variant works on the AND of the per-fiber masks.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Iterable, NamedTuple

if TYPE_CHECKING:
    from .topology import Fiber, NetworkState


class SlotInterval(NamedTuple):
    start: int
    length: int


def mask_from_bools(bits: Iterable[bool]) -> int:
    mask = 0
    for i, free in enumerate(bits):
        if free:
            mask |= 1 << i
    return mask


def interval_mask(interval: tuple[int, int]) -> int:
    start, length = interval
    return ((1 << length) - 1) << start


def has_run(mask: int, width: int) -> bool:
    """True if the mask contains a run of ``width`` consecutive set bits."""
    m = mask
    for _ in range(width - 1):
        m &= m >> 1
        if not m:
            return False
    return bool(m)


def first_fit(availability: int | Iterable[bool], width: int) -> SlotInterval | None:
    """Lowest-start interval of ``width`` free slots, or None.

    ``availability`` is either a bitmask or a sequence of booleans
    (True = free).
    """
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    mask = availability if isinstance(availability, int) else mask_from_bools(availability)
    runs = mask
    for _ in range(width - 1):
        runs &= runs >> 1
        if not runs:
            return None
    start = (runs & -runs).bit_length() - 1
    return SlotInterval(start, width)


def segment_first_fit(
    state: "NetworkState", fibers: Iterable["Fiber"], width: int
) -> SlotInterval | None:
    """First fit on the joint availability of all fibers of one segment.

    The same interval is returned for every fiber, which is what keeps a
    lightpath's spectrum continuous end to end.
    """
    fibers = list(fibers)
    if not fibers:
        raise ValueError("segment needs at least one fiber")
    joint = state.full_mask
    for fiber in fibers:
        joint &= state.fiber_free[fiber]
    return first_fit(joint, width)
