"""Piecewise-linear additive value model.

Each criterion scale is split into equal-length subintervals. An alternative
is encoded as a characteristic vector v so that its comprehensive value is
the dot product u.v, where u collects the non-negative marginal-value
increments of all criteria and sums to one. Cost criteria are handled by
reflecting the performance onto the gain orientation before encoding.

Also provides the stick-breaking bijection between the open simplex and an
unconstrained real vector, used by the gradient-based sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import COST, Problem


@dataclass(frozen=True)
class PiecewiseConfig:
    """Number of equal-length subintervals per criterion."""

    gamma_m: dict[str, int]

    def __post_init__(self):
        for cid, g in self.gamma_m.items():
            if g < 1:
                raise ValueError(f"criterion {cid}: subinterval count must be >= 1")

    @classmethod
    def shared(cls, problem: Problem, gamma: int) -> "PiecewiseConfig":
        return cls({c.id: gamma for c in problem.criteria})

    def total_dim(self, problem: Problem) -> int:
        return sum(self.gamma_m[c.id] for c in problem.criteria)

    def block_slices(self, problem: Problem) -> list[slice]:
        """Per-criterion slices into the concatenated parameter vector."""
        out, start = [], 0
        for c in problem.criteria:
            g = self.gamma_m[c.id]
            out.append(slice(start, start + g))
            start += g
        return out


def _segment_vector(g: float, lo: float, hi: float, gamma: int) -> np.ndarray:
    """Entries of one criterion block for a gain-oriented performance g.

    Entry t is 1 if g lies above the t-th knot, the fractional position
    within segment t if g falls inside it, and 0 below. A performance at a
    knot belongs to the left-closed segment; both branches agree there.
    """
    knots = lo + (hi - lo) * np.arange(gamma + 1) / gamma
    v = np.empty(gamma)
    for t in range(1, gamma + 1):
        x_prev, x_t = knots[t - 1], knots[t]
        if g > x_t:
            v[t - 1] = 1.0
        elif g >= x_prev:
            v[t - 1] = (g - x_prev) / (x_t - x_prev)
        else:
            v[t - 1] = 0.0
    return v


def characteristic_vector(
    problem: Problem, config: PiecewiseConfig, alt: str
) -> np.ndarray:
    """Concatenated per-criterion characteristic blocks for one alternative."""
    row = problem.performances[problem.alt_index(alt)]
    blocks = []
    for g, c in zip(row, problem.criteria):
        if not (c.scale_min <= g <= c.scale_max):
            raise ValueError(f"performance {g} outside scale of criterion {c.id}")
        if c.direction == COST:
            g = c.scale_min + c.scale_max - g
        blocks.append(_segment_vector(g, c.scale_min, c.scale_max, config.gamma_m[c.id]))
    return np.concatenate(blocks)


def characteristic_matrix(problem: Problem, config: PiecewiseConfig) -> np.ndarray:
    """N x gamma matrix stacking characteristic vectors of all alternatives."""
    return np.stack(
        [characteristic_vector(problem, config, a.id) for a in problem.alternatives]
    )


def comprehensive_value(u: np.ndarray, v: np.ndarray) -> float:
    if u.shape != v.shape:
        raise ValueError("parameter and characteristic vectors differ in length")
    return float(np.dot(u, v))


def value_difference(u: np.ndarray, v_a: np.ndarray, v_b: np.ndarray) -> float:
    return abs(float(np.dot(u, v_a - v_b)))


def marginal_difference(
    u: np.ndarray,
    v_a: np.ndarray,
    v_b: np.ndarray,
    block: slice,
) -> float:
    return abs(float(np.dot(u[block], v_a[block] - v_b[block])))


# ---------------------------------------------------------------------------
# Stick-breaking transform between the open simplex and R^(gamma-1)


def from_unconstrained(z: np.ndarray) -> tuple[np.ndarray, float]:
    """Map an unconstrained vector to the open simplex.

    Returns (u, log_jacobian) where log_jacobian is the log absolute
    determinant of the map z -> u (dropping the dependent last coordinate).
    z = 0 maps to the uniform simplex point.
    """
    z = np.asarray(z, dtype=float)
    n = z.size + 1
    u = np.empty(n)
    remaining = 1.0
    log_jac = 0.0
    for i in range(n - 1):
        # Offset centers the transform: z = 0 gives the uniform point.
        w = 1.0 / (1.0 + np.exp(-(z[i] - np.log(n - 1 - i))))
        u[i] = remaining * w
        log_jac += np.log(w) + np.log1p(-w) + np.log(remaining)
        remaining *= 1.0 - w
    u[n - 1] = remaining
    return u, float(log_jac)


def to_unconstrained(u: np.ndarray) -> np.ndarray:
    """Inverse of :func:`from_unconstrained`; u must be strictly interior."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise ValueError("simplex vector must be strictly positive")
    n = u.size
    z = np.empty(n - 1)
    remaining = 1.0
    for i in range(n - 1):
        w = u[i] / remaining
        z[i] = np.log(w) - np.log1p(-w) + np.log(n - 1 - i)
        remaining -= u[i]
    return z


def simplex_chain_grad(z: np.ndarray, grad_u: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. u back through the stick-breaking map,
    adding the gradient of the transform's log-Jacobian."""
    z = np.asarray(z, dtype=float)
    n = z.size + 1
    u, _ = from_unconstrained(z)
    w = np.empty(n - 1)
    remaining = 1.0
    for i in range(n - 1):
        w[i] = u[i] / remaining
        remaining -= u[i]
    gu_u = grad_u * u
    # suffix[i] = sum_{j > i} grad_u[j] * u[j]
    suffix = np.cumsum(gu_u[::-1])[::-1][1:]
    rstick = np.concatenate([[1.0], 1.0 - np.cumsum(u[:-1])])[: n - 1]
    grad_z = grad_u[:-1] * rstick * w * (1.0 - w) - w * suffix
    # d/dz of the log-Jacobian of the transform
    grad_z += 1.0 - (n - np.arange(n - 1)) * w
    return grad_z
