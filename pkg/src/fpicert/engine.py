"""Run fixed-point iterations and measure empirical contraction behavior.

The engine is agnostic about where operators come from: anything with
``evaluate``, ``dimension`` and ``alpha`` attributes can be iterated.
Distances to the fixed-point set are supplied by a fixed-set description
object exposing ``distance(x)`` (see :mod:`fpicert.analysis`).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyFixedSet, NonFinite, TooShort

STOP_RESIDUAL = "residual_tol"
STOP_MAX_ITERS = "max_iters"


@dataclass
class IterationTrace:
    """Iterates of one fixed-point run with per-step residuals.

    ``dist_to_fix`` is filled only when a fixed-set description was
    available; ``distance_source`` records whether those distances came
    from the piecewise description (``"pieces"``) or from the converged
    limit point (``"limit"``, an upper bound on the true distance).
    """

    iterates: np.ndarray
    residuals: np.ndarray
    limit: np.ndarray
    stop_reason: str
    dist_to_fix: np.ndarray | None = None
    distance_source: str | None = None
    aux: dict = field(default_factory=dict)

    @property
    def num_steps(self):
        return len(self.residuals)


def iterate(F, x0, residual_tol=1e-10, max_iters=200_000, fixset=None):
    """Apply ``x <- F(x)`` until the residual ``||F(x) - x||`` drops to
    ``residual_tol`` or ``max_iters`` steps have been taken.

    Raises ``NonFinite`` if an iterate leaves the floating-point range,
    which signals a bug in the operator rather than expected behavior.
    """
    if residual_tol <= 0:
        raise ValueError("residual_tol must be positive")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (F.dimension,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({F.dimension},)")
    iterates = [x.copy()]
    residuals = []
    stop = STOP_MAX_ITERS
    for _ in range(max_iters):
        x_next = F.evaluate(x)
        if not np.all(np.isfinite(x_next)):
            raise NonFinite("iterate left the finite range")
        r = float(np.linalg.norm(x_next - x))
        residuals.append(r)
        iterates.append(np.asarray(x_next, dtype=float).copy())
        x = x_next
        if r <= residual_tol:
            stop = STOP_RESIDUAL
            break
    trace = IterationTrace(
        iterates=np.asarray(iterates),
        residuals=np.asarray(residuals),
        limit=x.copy(),
        stop_reason=stop,
    )
    if fixset is not None:
        trace.dist_to_fix = np.asarray([fixset.distance(z) for z in trace.iterates])
        trace.distance_source = getattr(fixset, "source", "pieces")
    return trace


@dataclass(frozen=True)
class EmpiricalRates:
    """Sampled estimates of the tightest contraction factor and
    error-bound constant near the fixed-point set.

    Both numbers are maxima over a finite sample, hence lower bounds on
    the true suprema; reports must label them as sampled.
    """

    rho_tilde: float
    k_tilde: float
    sample_radius: float
    sample_count: int
    seed: int


def estimate_rates(F, fixset, R, samples=200, seed=0):
    """Sample points with ``dist(x, fixed set) <= R`` and measure the
    worst-case ratios ``dist(F(x), S)/dist(x, S)`` and
    ``dist(x, S)/||F(x) - x||``.

    Points are drawn as ``representative + r * direction`` with uniform
    direction and radius ``r`` uniform on (0, R].  Samples that land on
    the fixed set itself are excluded.  Deterministic for a given seed.
    """
    if fixset is None or getattr(fixset, "representative", None) is None:
        raise EmptyFixedSet("estimate_rates needs a nonempty fixed-point set")
    if R <= 0:
        raise ValueError("R must be positive")
    rng = np.random.default_rng(seed)
    center = np.asarray(fixset.representative, dtype=float)
    n = center.shape[0]
    rho_max = 0.0
    k_max = 0.0
    used = 0
    for _ in range(samples):
        direction = rng.standard_normal(n)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            continue
        x = center + (R * rng.uniform(0.0, 1.0)) * direction / norm
        d_x = fixset.distance(x)
        if d_x <= 1e-14 * (1.0 + np.linalg.norm(x)):
            continue
        fx = F.evaluate(x)
        residual = float(np.linalg.norm(fx - x))
        d_fx = fixset.distance(fx)
        rho_max = max(rho_max, d_fx / d_x)
        if residual > 0.0:
            k_max = max(k_max, d_x / residual)
        else:
            k_max = np.inf
        used += 1
    if used == 0:
        raise EmptyFixedSet("all samples landed on the fixed-point set")
    return EmpiricalRates(rho_tilde=rho_max, k_tilde=k_max,
                          sample_radius=float(R), sample_count=used,
                          seed=int(seed))


def fit_asymptotic_rate(trace, tail_fraction=0.25):
    """Geometric-mean residual contraction over the final stretch of a
    trace.

    Uses the last ``ceil(tail_fraction * num_steps)`` residuals; requires
    at least 10 of them to be positive (``TooShort`` otherwise).  A zero
    residual inside the window means the iteration reached a fixed point
    exactly, and the fitted rate is 0.0.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    r = np.asarray(trace.residuals, dtype=float)
    window = r[max(0, len(r) - int(np.ceil(tail_fraction * len(r)))):]
    positive = window[window > 0.0]
    if positive.size < 10:
        raise TooShort(f"only {positive.size} positive residuals in the tail")
    if np.any(window == 0.0):
        return 0.0
    ratios = np.log(window[1:]) - np.log(window[:-1])
    return float(np.exp(ratios.mean()))
