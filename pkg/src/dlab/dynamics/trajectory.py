from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ..spectral.grid import Field, Grid


@dataclass(eq=False)
class Trajectory:
    """Snapshots of the v-component on a uniform time grid.

    ``states`` has shape (len(times), *grid.shape); it is stored read-only.
    """

    grid: Grid
    times: np.ndarray
    states: np.ndarray
    dt: float
    metadata: dict = dc_field(default_factory=dict)
    adaptive: bool = False

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=np.complex128)
        if times.ndim != 1 or states.shape != (len(times),) + self.grid.shape:
            raise ValueError("states must have shape (len(times), *grid.shape)")
        if len(times) > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise ValueError("times must be strictly increasing")
            if not self.adaptive and np.max(np.abs(steps - steps[0])) > 1e-6 * steps[0]:
                raise ValueError("snapshot spacing is not uniform; pass adaptive=True to allow it")
        times.setflags(write=False)
        states.setflags(write=False)
        self.times = times
        self.states = states

    def __len__(self) -> int:
        return len(self.times)

    @property
    def snapshot_step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def state(self, index: int) -> Field:
        return Field(self.grid, self.states[index])

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        scale = max(self.snapshot_step, 1.0)
        if abs(self.times[i] - t) > tol * scale:
            raise ValueError(f"time {t} is not a snapshot time (nearest {self.times[i]})")
        return i

    def window(self, start: int, stop: int) -> "Trajectory":
        """Snapshots start..stop inclusive."""
        return Trajectory(
            self.grid, self.times[start : stop + 1], self.states[start : stop + 1], self.dt, dict(self.metadata), self.adaptive
        )

    def scaled(self, c: complex) -> "Trajectory":
        return Trajectory(self.grid, self.times, c * self.states, self.dt, dict(self.metadata), self.adaptive)

    @classmethod
    def constant(cls, field: Field, times) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        states = np.broadcast_to(field.values, (len(times),) + field.grid.shape)
        dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
        return cls(field.grid, times, np.array(states), dt)
