"""Per-run reporting shared by the 2D and 3D solvers and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class SolveReport:
    """Outcome of one alternating solve.

    residual_history holds the relative residual after each sweep; timings
    maps phase names to accumulated wall-clock seconds.
    """

    residual_history: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    final_rank: object = None
    converged: bool = False
    iterations: int = 0
    stop_reason: str = ""
    config_echo: dict | None = None

    def add_time(self, phase: str, seconds: float):
        self.timings[phase] = self.timings.get(phase, 0.0) + seconds

    def as_dict(self) -> dict:
        return {
            "residual_history": [float(r) for r in self.residual_history],
            "timings": {k: float(v) for k, v in self.timings.items()},
            "final_rank": self.final_rank,
            "converged": self.converged,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "config": self.config_echo,
        }
