"""TileTrack: a grid racing task scored by unique track tiles visited.

The track is a closed loop of 40-80 cells on a 24x24 grid. The agent sits on
a track cell with a heading; ``forward`` moves one cell along the heading if
that cell is track, otherwise the agent stays put. Landing on a not yet
visited tile scores +1 and resets the idle counter. An episode ends when 95%
of the tiles have been visited, after 20 steps without a new tile, or at the
step cap.

Observations stack the last four 3-channel frames (track, visited, agent)
cropped to a 9x9 window centered on the agent: shape ``(12, 9, 9)``. The
agent channel marks the agent cell and the cell it is facing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..rng import derive_substream

FORWARD, TURN_LEFT, TURN_RIGHT, NOOP = range(4)
ACTIONS = ("forward", "turn_left", "turn_right", "noop")
N_ACTIONS = 4

# N, E, S, W as (dx, dy) with y growing downwards
HEADINGS = ((0, -1), (1, 0), (0, 1), (-1, 0))

IDLE_LIMIT = 20
COMPLETION = 0.95
DEFAULT_CAP = 1000
WINDOW = 9
FRAME_STACK = 4
MIN_TILES, MAX_TILES = 40, 80

_SEARCH_BUDGET = 4000
_RETRIES = 8


def _neighbors(cell):
    x, y = cell
    return [(x + dx, y + dy) for dx, dy in HEADINGS]


def rectangle_loop(width: int = 24, height: int = 24) -> list[tuple[int, int]]:
    """Fallback track: perimeter of a 14x12 rectangle (48 tiles), clockwise."""
    w, h = 14, 12
    x0, y0 = (width - w) // 2, (height - h) // 2
    top = [(x0 + i, y0) for i in range(w)]
    right = [(x0 + w - 1, y0 + j) for j in range(1, h)]
    bottom = [(x0 + i, y0 + h - 1) for i in range(w - 2, -1, -1)]
    left = [(x0, y0 + j) for j in range(h - 2, 0, -1)]
    return top + right + bottom + left


def _search_loop(stream, width: int, height: int, margin: int = 1):
    """Randomized depth-first search for a thin self-avoiding loop, or None."""
    sx = margin + stream.randbelow(width - 2 * margin)
    sy = margin + stream.randbelow(height - 2 * margin)
    start = (sx, sy)
    path = [start]
    on_path = {start}
    # each frame: remaining candidate moves from path[-1]
    stack = []
    budget = _SEARCH_BUDGET

    def inside(c):
        return margin <= c[0] < width - margin and margin <= c[1] < height - margin

    def candidates():
        head = path[-1]
        out = []
        for c in _neighbors(head):
            if c in on_path or not inside(c):
                continue
            # remaining steps must still be able to return next to the start
            dist = abs(c[0] - sx) + abs(c[1] - sy)
            if dist - 1 > MAX_TILES - len(path) - 1:
                continue
            # thin corridor: the new cell touches only the current head, plus the
            # start when it closes the loop
            touches = [n for n in _neighbors(c) if n in on_path and n != head]
            if touches and not (touches == [start] and len(path) + 1 >= MIN_TILES):
                continue
            out.append(c)
        # shuffle deterministically
        for i in range(len(out) - 1, 0, -1):
            j = stream.randbelow(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    stack.append(candidates())
    while stack and budget > 0:
        budget -= 1
        if not stack[-1]:
            stack.pop()
            on_path.discard(path.pop())
            continue
        c = stack[-1].pop()
        path.append(c)
        on_path.add(c)
        if len(path) >= MIN_TILES and start in _neighbors(c) and len(path) > 3:
            return path
        if len(path) >= MAX_TILES:
            on_path.discard(path.pop())
            continue
        stack.append(candidates())
    return None


def generate_track(seed: int, width: int = 24, height: int = 24) -> tuple[list[tuple[int, int]], bool]:
    """Loop of track cells for ``seed``; the flag is True when the fallback was used."""
    for attempt in range(_RETRIES):
        track = _search_loop(derive_substream(seed, [attempt]), width, height)
        if track is not None:
            return track, False
    return rectangle_loop(width, height), True


def crop(grid: np.ndarray, cx: int, cy: int, size: int = WINDOW) -> np.ndarray:
    """``size x size`` window of ``grid`` centered on ``(cx, cy)``; zeros outside."""
    r = size // 2
    out = np.zeros((size, size), dtype=grid.dtype)
    h, w = grid.shape
    x0, x1 = max(cx - r, 0), min(cx + r + 1, w)
    y0, y1 = max(cy - r, 0), min(cy + r + 1, h)
    out[y0 - (cy - r): y1 - (cy - r), x0 - (cx - r): x1 - (cx - r)] = grid[y0:y1, x0:x1]
    return out


class StepAfterDone(RuntimeError):
    pass


@dataclass
class TileTrack:
    seed: int
    width: int = 24
    height: int = 24
    cap: int = DEFAULT_CAP
    track: list = field(init=False)
    fallback: bool = field(init=False)

    def __post_init__(self):
        self.track, self.fallback = generate_track(self.seed, self.width, self.height)
        self.tile_index = {c: i for i, c in enumerate(self.track)}
        self.track_grid = np.zeros((self.height, self.width), dtype=np.float32)
        for x, y in self.track:
            self.track_grid[y, x] = 1.0
        self.goal = math.ceil(COMPLETION * len(self.track))
        self.reset()

    @property
    def n_tiles(self) -> int:
        return len(self.track)

    def reset(self) -> np.ndarray:
        self.visited = np.zeros((self.height, self.width), dtype=np.float32)
        self.agent = 0
        x0, y0 = self.track[0]
        x1, y1 = self.track[1]
        self.heading = HEADINGS.index((x1 - x0, y1 - y0))
        self.steps_since_new_tile = 0
        self.total_steps = 0
        self.score = 0
        self.done = False
        frame = self._frame()
        self.frames = [frame] * FRAME_STACK
        return self.observation()

    def _frame(self) -> np.ndarray:
        x, y = self.track[self.agent]
        agent = np.zeros_like(self.track_grid)
        agent[y, x] = 1.0
        dx, dy = HEADINGS[self.heading]
        if 0 <= x + dx < self.width and 0 <= y + dy < self.height:
            agent[y + dy, x + dx] = 1.0
        return np.stack([crop(g, x, y) for g in (self.track_grid, self.visited, agent)])

    def observation(self) -> np.ndarray:
        return np.concatenate(self.frames, axis=0)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise StepAfterDone("episode is over")
        if action not in (FORWARD, TURN_LEFT, TURN_RIGHT, NOOP):
            raise ValueError(f"invalid action {action!r}")
        reward = 0.0
        if action == TURN_LEFT:
            self.heading = (self.heading - 1) % 4
        elif action == TURN_RIGHT:
            self.heading = (self.heading + 1) % 4
        elif action == FORWARD:
            x, y = self.track[self.agent]
            dx, dy = HEADINGS[self.heading]
            nxt = self.tile_index.get((x + dx, y + dy))
            if nxt is not None:
                self.agent = nxt
                nx, ny = self.track[nxt]
                if not self.visited[ny, nx]:
                    self.visited[ny, nx] = 1.0
                    reward = 1.0
        self.total_steps += 1
        if reward:
            self.score += 1
            self.steps_since_new_tile = 0
        else:
            self.steps_since_new_tile += 1
        self.done = (self.score >= self.goal or self.steps_since_new_tile >= IDLE_LIMIT
                     or self.total_steps >= self.cap)
        self.frames = self.frames[1:] + [self._frame()]
        return self.observation(), reward, self.done
