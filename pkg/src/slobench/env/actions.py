"""The 6 x 3 x 6 streaming configuration grid."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

from slobench.errors import DomainError

STREAMS = (1, 2, 5, 10, 15, 20)
RESOLUTIONS = (180, 360, 720)
FPS = (5, 10, 15, 20, 25, 30)

GRID_SHAPE = (len(STREAMS), len(RESOLUTIONS), len(FPS))
N_ACTIONS = GRID_SHAPE[0] * GRID_SHAPE[1] * GRID_SHAPE[2]


@dataclass(frozen=True, order=True)
class StreamConfig:
    """One streaming configuration; ordering is lexicographic (streams, resolution, fps)."""

    streams: int
    resolution: int
    fps: int

    def __post_init__(self):
        if self.streams not in STREAMS:
            raise DomainError(f"streams={self.streams} not in {STREAMS}")
        if self.resolution not in RESOLUTIONS:
            raise DomainError(f"resolution={self.resolution} not in {RESOLUTIONS}")
        if self.fps not in FPS:
            raise DomainError(f"fps={self.fps} not in {FPS}")

    @property
    def grid_index(self) -> tuple[int, int, int]:
        return (STREAMS.index(self.streams), RESOLUTIONS.index(self.resolution), FPS.index(self.fps))

    @property
    def index(self) -> int:
        i, j, k = self.grid_index
        return (i * GRID_SHAPE[1] + j) * GRID_SHAPE[2] + k

    @classmethod
    def from_index(cls, index: int) -> "StreamConfig":
        return _actions()[_check_index(index)]

    @classmethod
    def from_grid(cls, i: int, j: int, k: int) -> "StreamConfig":
        return cls(STREAMS[i], RESOLUTIONS[j], FPS[k])

    def __str__(self):
        return f"{self.streams}x{self.resolution}p@{self.fps}"


def _check_index(index) -> int:
    index = int(index)
    if not 0 <= index < N_ACTIONS:
        raise DomainError(f"action index {index} outside [0, {N_ACTIONS})")
    return index


@lru_cache(maxsize=None)
def _actions() -> tuple[StreamConfig, ...]:
    return tuple(StreamConfig(s, r, f) for s, r, f in product(STREAMS, RESOLUTIONS, FPS))


def enumerate_actions() -> list[StreamConfig]:
    """All 108 configurations in their stable total order (index i <-> element i)."""
    return list(_actions())


def corner_configs() -> list[StreamConfig]:
    """The 8 extreme points {1,20} x {180,720} x {5,30}, in index order."""
    return [c for c in _actions()
            if c.streams in (STREAMS[0], STREAMS[-1])
            and c.resolution in (RESOLUTIONS[0], RESOLUTIONS[-1])
            and c.fps in (FPS[0], FPS[-1])]


CORNER_INDICES = tuple(c.index for c in corner_configs())
