"""Two deterministic desk-scale environments behind one reset/step surface.

GridNav is a rectangular grass/water grid with a single start and goal; the
observation is the flattened cell index. TrackSim is a kinematic lane-keeping
simulator on an oval track whose dense reward pays speed along the lane and
penalizes lateral offset and damage; the observation stacks the four most
recent feature frames.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class StepResult(NamedTuple):
    obs: object
    reward: float
    done: bool
    info: dict


# ---------------------------------------------------------------- gridworld

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
GRID_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
GRID_ACTION_NAMES = ("Up", "Down", "Left", "Right")

DEFAULT_GRID = (
    "S....H",
    ".WWWW.",
    "......",
)


class ConfigError(Exception):
    """Invalid map, config file, or mismatched run inputs."""


@dataclass(frozen=True)
class GridMap:
    rows: tuple
    gamma: float = 0.95

    def __post_init__(self):
        if not self.rows:
            raise ConfigError("empty grid map")
        width = len(self.rows[0])
        if any(len(r) != width for r in self.rows):
            raise ConfigError("grid map is not rectangular")
        cells = "".join(self.rows)
        if set(cells) - set("SH.W"):
            raise ConfigError(f"grid map has unknown cells: {set(cells) - set('SH.W')}")
        if cells.count("S") != 1 or cells.count("H") != 1:
            raise ConfigError("grid map needs exactly one S and one H")

    @property
    def height(self):
        return len(self.rows)

    @property
    def width(self):
        return len(self.rows[0])

    def cell(self, r, c):
        return self.rows[r][c]

    def find(self, ch):
        for r, row in enumerate(self.rows):
            c = row.find(ch)
            if c >= 0:
                return r, c
        raise ConfigError(f"cell {ch!r} not present")

    @classmethod
    def from_text(cls, text, gamma=0.95):
        rows = tuple(line for line in text.splitlines() if line.strip())
        return cls(rows=rows, gamma=gamma)

    @classmethod
    def from_file(cls, path, gamma=0.95):
        with open(path) as f:
            return cls.from_text(f.read(), gamma=gamma)


def default_grid_map(gamma=0.95):
    return GridMap(rows=DEFAULT_GRID, gamma=gamma)


class GridNav:
    """Deterministic four-move gridworld; reward 1 at the goal, else 0.

    Walking into water ends the episode with no reward. Off-grid moves are
    no-ops. Observations are flattened cell indices row*width + col.
    """

    env_id = "gridnav"
    n_actions = 4

    def __init__(self, grid_map=None, max_steps=100):
        self.map = grid_map or default_grid_map()
        self.max_steps = max_steps
        self.n_states = self.map.height * self.map.width
        self.gamma = self.map.gamma
        self._pos = None
        self._steps = 0
        self._done = True

    def obs_of(self, r, c):
        return r * self.map.width + c

    def reset(self, rng=None):
        self._pos = self.map.find("S")
        self._steps = 0
        self._done = False
        return self.obs_of(*self._pos)

    def step(self, action):
        if self._done:
            raise RuntimeError("step() called on a finished episode; reset() first")
        if action not in GRID_MOVES:
            raise ValueError(f"bad action {action}")
        dr, dc = GRID_MOVES[action]
        r, c = self._pos
        nr, nc = r + dr, c + dc
        if not (0 <= nr < self.map.height and 0 <= nc < self.map.width):
            nr, nc = r, c
        self._pos = (nr, nc)
        self._steps += 1
        cell = self.map.cell(nr, nc)
        reward = 1.0 if cell == "H" else 0.0
        done = cell in "HW" or self._steps >= self.max_steps
        self._done = done
        return StepResult(self.obs_of(nr, nc), reward, done, {})


# --------------------------------------------------------------- track sim

@dataclass
class VehicleState:
    p: float = 0.0      # progress along the centerline, wrapped to [0, L)
    d: float = 0.0      # signed lateral offset from the lane center
    theta: float = 0.0  # heading relative to the lane direction, [-pi, pi)
    v: float = 0.0      # speed


@dataclass(frozen=True)
class TrackGeometry:
    straight: float = 100.0
    radius: float = 30.0
    w_half: float = 2.0
    v_max: float = 20.0
    v_init: float = 1.0
    dt: float = 0.2
    steer_step: float = 0.1
    accel_step: float = 1.0
    max_steps: int = 500

    @property
    def arc(self):
        return math.pi * self.radius

    @property
    def length(self):
        return 2.0 * self.straight + 2.0 * self.arc

    def curvature(self, p):
        p = p % self.length
        if p < self.straight:
            return 0.0
        if p < self.straight + self.arc:
            return 1.0 / self.radius
        if p < 2.0 * self.straight + self.arc:
            return 0.0
        return 1.0 / self.radius


def wrap_angle(theta):
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def decode_track_action(action):
    """Action index 0..8 -> (steer, accel), steering-major ordering."""
    if not 0 <= action < 9:
        raise ValueError(f"bad action {action}")
    steer = action // 3 - 1
    accel = 1 - action % 3
    return steer, accel


class TrackSim:
    """Kinematic lane keeping on an oval of two straights and two arcs.

    The per-step reward is (1 - damage) * (cos(theta) - sin(theta) -
    |d|/w_half) * v, with -10 on damage; damage means leaving the lane
    (|d| > w_half) and ends the episode, as does the 500-step cap. The
    speed2 variant replaces the lane term with v^2 but keeps the damage
    terminal. Observations concatenate the current feature frame with the
    three prior frames.
    """

    env_id = "tracksim"
    n_actions = 9
    frame_dim = 7

    def __init__(self, geometry=None, frame_stack=4, reward_mode="lane", abs_sin=False):
        if reward_mode not in ("lane", "speed2"):
            raise ConfigError(f"unknown reward_mode {reward_mode!r}")
        self.geom = geometry or TrackGeometry()
        self.frame_stack = frame_stack
        self.reward_mode = reward_mode
        self.abs_sin = abs_sin
        self.gamma = 0.99
        self.state = VehicleState()
        self._frames = []
        self._steps = 0
        self._done = True

    @property
    def obs_dim(self):
        return self.frame_dim * self.frame_stack

    def _frame(self):
        g = self.geom
        s = self.state
        look = [g.curvature(s.p), g.curvature(s.p + 10.0), g.curvature(s.p + 25.0)]
        return np.array([
            math.sin(s.theta),
            math.cos(s.theta),
            s.d / g.w_half,
            s.v / g.v_max,
            30.0 * look[0],
            30.0 * look[1],
            30.0 * look[2],
        ])

    def _observe(self):
        # current frame followed by the prior frames, oldest first
        return np.concatenate([self._frame()] + self._frames)

    def reset(self, rng=None):
        g = self.geom
        self.state = VehicleState(p=0.0, d=0.0, theta=0.0, v=g.v_init)
        self._steps = 0
        self._done = False
        cur = self._frame()
        self._frames = [cur.copy() for _ in range(self.frame_stack - 1)]
        return self._observe()

    def lane_reward(self, damaged):
        s = self.state
        if damaged:
            return -10.0
        lane_ratio = abs(s.d) / self.geom.w_half
        lateral = abs(math.sin(s.theta)) if self.abs_sin else math.sin(s.theta)
        return (math.cos(s.theta) - lateral - lane_ratio) * s.v

    def speed2_reward(self, damaged):
        return -10.0 if damaged else self.state.v ** 2

    def step(self, action):
        if self._done:
            raise RuntimeError("step() called on a finished episode; reset() first")
        steer, accel = decode_track_action(action)
        g = self.geom
        s = self.state
        pre_frame = self._frame()
        prev_p = s.p
        s.v = min(max(s.v + accel * g.accel_step, 0.0), g.v_max)
        s.theta = wrap_angle(s.theta + steer * g.steer_step
                             - g.curvature(s.p) * s.v * math.cos(s.theta) * g.dt)
        s.p = (s.p + s.v * math.cos(s.theta) * g.dt) % g.length
        s.d = s.d + s.v * math.sin(s.theta) * g.dt
        self._steps += 1

        damaged = abs(s.d) > g.w_half
        if self.reward_mode == "speed2":
            reward = self.speed2_reward(damaged)
        else:
            reward = self.lane_reward(damaged)
        done = damaged or self._steps >= g.max_steps
        self._done = done

        self._frames = self._frames[1:] + [pre_frame]
        progress = (s.p - prev_p) % g.length
        return StepResult(self._observe(), reward, done,
                          {"damage": damaged, "progress": progress})


def make_env(env_id, **kwargs):
    if env_id == "gridnav":
        return GridNav(**kwargs)
    if env_id == "tracksim":
        return TrackSim(**kwargs)
    raise ConfigError(f"unknown environment id {env_id!r}")
