"""The balanced continuous-time random walk on a T-graph.

From a vertex v the walk jumps to the two endpoints v+ and v- of the unique
segment containing v in its interior, with rates 1/|v+ - v| and 1/|v- - v|;
the rates make every coordinate a martingale.

Randomness: each walker owns the stream Philox(key=seed).jumped(walker_id)
and consumes two uniforms per jump (cf. _engine).  Window extension never
touches the stream, so extending does not perturb generated randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .construction import (
    DegenerateGraphError,
    Params,
    TGraphWindow,
    build_window,
)
from .lattice import BLACK, HexCoord

EXTEND_MARGIN = 3  # rebuild when the walk is this close to the window edge
EXTEND_FACTOR = 1.5


class WindowExhausted(Exception):
    """A jump target fell outside the window's resolved region."""


@dataclass(frozen=True)
class WalkState:
    vertex: HexCoord  # black coordinates of the current vertex v(b)
    position: complex
    time: float


@dataclass(frozen=True)
class JumpOptions:
    plus_vertex: HexCoord
    plus_position: complex
    rate_plus: float
    minus_vertex: HexCoord
    minus_position: complex
    rate_minus: float

    @property
    def total_rate(self) -> float:
        return self.rate_plus + self.rate_minus


@dataclass
class Trajectory:
    params: Params
    x0: HexCoord
    seed: int
    horizon: float
    jump_times: np.ndarray  # increasing, starting after 0
    states: list  # WalkState at time 0 and after each jump

    @property
    def final_position(self) -> complex:
        return self.states[-1].position

    def position_at(self, t: float) -> complex:
        if t < 0 or t > self.horizon + 1e-12:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.states[k].position

    def to_csv(self, path) -> None:
        """Write (time, m, n, x, y) rows for the initial state and each jump."""
        with open(path, "w") as fh:
            fh.write("time,m,n,x,y\n")
            for st in self.states:
                fh.write(
                    f"{st.time!r},{st.vertex.m},{st.vertex.n},"
                    f"{st.position.real!r},{st.position.imag!r}\n"
                )


def jump_rates(state: WalkState, window: TGraphWindow) -> JumpOptions:
    """Rates and targets of the two jumps available from a walk state."""
    seg = window.segments.get(state.vertex)
    if seg is None:
        raise WindowExhausted(f"vertex {state.vertex!r} outside window")
    v = seg.interior
    d_minus = abs(seg.p1 - v)
    d_plus = abs(seg.p2 - v)
    if min(d_plus, d_minus) < 1e-12:
        raise DegenerateGraphError(
            f"vertex {state.vertex!r} sits at a segment endpoint (margin "
            f"{min(d_plus, d_minus):.3e}); non-generic lambda"
        )
    lo_dual, hi_dual = seg.endpoint_duals
    minus_vertex = window.owner_of(lo_dual)
    plus_vertex = window.owner_of(hi_dual)
    if minus_vertex is None or plus_vertex is None:
        raise WindowExhausted(f"jump target of {state.vertex!r} unresolved in window")
    return JumpOptions(
        plus_vertex=plus_vertex,
        plus_position=seg.p2,
        rate_plus=1.0 / d_plus,
        minus_vertex=minus_vertex,
        minus_position=seg.p1,
        rate_minus=1.0 / d_minus,
    )


def step(state: WalkState, window: TGraphWindow, rng) -> WalkState:
    """One jump of the walk; consumes exactly two uniforms from rng."""
    opts = jump_rates(state, window)  # resolve targets before touching rng
    u1, u2 = rng.random(2)
    wait = -math.log1p(-u1) / opts.total_rate
    if u2 < opts.rate_plus / opts.total_rate:
        return WalkState(opts.plus_vertex, opts.plus_position, state.time + wait)
    return WalkState(opts.minus_vertex, opts.minus_position, state.time + wait)


def _needs_extension(window: TGraphWindow, vertex: HexCoord) -> bool:
    return max(abs(vertex.m), abs(vertex.n)) > window.radius - EXTEND_MARGIN


def simulate(
    params: Params,
    x0: HexCoord,
    horizon: float,
    seed: int,
    initial_radius: Optional[int] = None,
) -> Trajectory:
    """Walk from the vertex of black coordinates x0 up to the time horizon.

    The window is rebuilt at 1.5x radius whenever the walk comes within
    3 lattice units of its edge; the stream of uniforms is independent of
    the window, so the trajectory law does not depend on the initial radius.
    """
    if x0.color != BLACK:
        raise ValueError("x0 must be a black-vertex coordinate")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    radius = max(8, max(abs(x0.m), abs(x0.n)) + EXTEND_MARGIN + 2)
    if initial_radius is not None:
        radius = max(initial_radius, max(abs(x0.m), abs(x0.n)) + EXTEND_MARGIN + 1)
    window = build_window(params, radius)
    rng = np.random.Generator(np.random.Philox(key=seed))
    state = WalkState(x0, window.vmap[x0], 0.0)
    states = [state]
    jump_times = []
    while True:
        while _needs_extension(window, state.vertex):
            radius = int(math.ceil(radius * EXTEND_FACTOR))
            window = build_window(params, radius)
        opts = jump_rates(state, window)
        u1, u2 = rng.random(2)
        wait = -math.log1p(-u1) / opts.total_rate
        if state.time + wait >= horizon:
            break
        if u2 < opts.rate_plus / opts.total_rate:
            state = WalkState(opts.plus_vertex, opts.plus_position, state.time + wait)
        else:
            state = WalkState(opts.minus_vertex, opts.minus_position, state.time + wait)
        states.append(state)
        jump_times.append(state.time)
    return Trajectory(
        params=params,
        x0=x0,
        seed=seed,
        horizon=horizon,
        jump_times=np.asarray(jump_times),
        states=states,
    )


def skeleton(traj: Trajectory, dt: float = 1.0) -> np.ndarray:
    """Positions of the walk at times 0, dt, 2dt, ... up to the horizon."""
    times = np.arange(0.0, traj.horizon + dt * 1e-9, dt)
    idx = np.searchsorted(traj.jump_times, times, side="right")
    pos = np.array([st.position for st in traj.states])
    return pos[idx]
