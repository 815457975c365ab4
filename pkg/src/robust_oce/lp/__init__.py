"""Dense LP model and bounded-variable simplex (compiled kernel with numpy fallback)."""

from .simplex import (
    DEFAULT_KERNEL,
    KERNELS,
    LinearProgram,
    LpError,
    LpSolution,
    LpStatus,
    SimplexSolver,
    solve,
)

__all__ = [
    "DEFAULT_KERNEL",
    "KERNELS",
    "LinearProgram",
    "LpError",
    "LpSolution",
    "LpStatus",
    "SimplexSolver",
    "solve",
]
