"""Benchmark obstacle problems."""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .assembly import MethodConfig


@dataclass(frozen=True)
class ProblemSpec:
    """An obstacle problem together with the adaptive-loop settings.

    ``g`` is the Dirichlet boundary value (``None`` means zero); ``exact`` is
    the exact solution when known.
    """

    name: str
    bounds: tuple
    cells: tuple
    f: Callable
    chi: Callable
    g: Optional[Callable] = None
    exact: Optional[Callable] = None
    cfg: MethodConfig = field(default_factory=MethodConfig)
    gamma: float = 0.4
    max_dofs: Optional[int] = None
    max_iters: int = 40
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("marking parameter must lie in (0, 1]")
        if self.max_dofs is None:
            object.__setattr__(self, "max_dofs", 50_000 if self.cfg.degree == 1 else 100_000)
        self.check_boundary_compatibility()

    def check_boundary_compatibility(self, n=64):
        """Obstacle must lie below the boundary data on the boundary."""
        xmin, xmax, ymin, ymax = self.bounds
        t = np.linspace(0.0, 1.0, n + 1)
        xs = np.concatenate([xmin + (xmax - xmin) * t, xmin + (xmax - xmin) * t,
                             np.full_like(t, xmin), np.full_like(t, xmax)])
        ys = np.concatenate([np.full_like(t, ymin), np.full_like(t, ymax),
                             ymin + (ymax - ymin) * t, ymin + (ymax - ymin) * t])
        chi = np.broadcast_to(self.chi(xs, ys), xs.shape)
        gv = np.zeros_like(xs) if self.g is None else np.broadcast_to(self.g(xs, ys), xs.shape)
        if np.any(chi > gv + 1e-12):
            raise ValueError("obstacle exceeds the boundary data on the boundary")

    def with_config(self, **kwargs):
        return replace(self, **kwargs)


def _const(value):
    def fn(x, y):
        return np.full(np.shape(x), float(value))
    return fn


def example1_exact(x, y):
    r2 = np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2
    r = np.sqrt(np.maximum(r2, 1.0))
    return np.where(r2 >= 1.0, 0.5 * r2 - np.log(r) - 0.5, 0.0)


def example2_obstacle(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 10.0 - 6.0 * (x * x - 1.0) ** 2 - 20.0 * y * y


def builtin_example(example, f_variant=-15, cfg=None, **kwargs):
    """Problem definitions for the two benchmark examples.

    Example 1: ``chi = 0``, ``f = -2`` on ``(-3/2, 3/2)^2`` with a radially
    symmetric exact solution, used also as Dirichlet data.
    Example 2: a two-hill obstacle on ``(-2, 2) x (-1, 1)``, ``f`` in
    ``{0, -15}``, homogeneous boundary data, exact solution unknown.
    """
    cfg = cfg or MethodConfig()
    if example == 1:
        return ProblemSpec("example1", (-1.5, 1.5, -1.5, 1.5), (4, 4), _const(-2.0), _const(0.0),
                           g=example1_exact, exact=example1_exact, cfg=cfg,
                           params={"example": 1}, **kwargs)
    if example == 2:
        if f_variant not in (0, -15):
            raise ValueError("example 2 load must be 0 or -15")
        return ProblemSpec(f"example2_f{f_variant}", (-2.0, 2.0, -1.0, 1.0), (4, 2),
                           _const(f_variant), example2_obstacle, cfg=cfg,
                           params={"example": 2, "f_variant": f_variant}, **kwargs)
    raise ValueError(f"unknown example {example!r}")
