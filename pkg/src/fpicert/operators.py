"""Fixed-point operators for the supported first-order algorithms.

Each factory returns a :class:`FixedPointOperator` carrying the smallest
averaging parameter alpha for which the map is known to be alpha-averaged
(alpha = 1 marks a merely nonexpansive map, which the rate machinery
refuses).  Operators keep a provenance record with the exact problem data
used to build them, so the analysis layer can reconstruct their
piecewise-affine form instead of probing them as black boxes.
"""

from dataclasses import dataclass, field

import numpy as np

from .engine import IterationTrace, STOP_MAX_ITERS
from .errors import SingularSubproblem, StepTooLarge
from .linalg import lambda_max_psd
from .prox import QUADRATIC, prox
from .polyhedra import Polyhedron, project_polyhedron


@dataclass(frozen=True)
class Provenance:
    """Which algorithm and problem data produced an operator."""

    algorithm: str
    params: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FixedPointOperator:
    """An evaluable self-map of R^n with its averaging parameter.

    ``alpha`` in (0, 1) means the operator is alpha-averaged; alpha = 1
    flags a nonexpansive-only map (``averaged`` False).
    """

    dimension: int
    alpha: float
    evaluate: callable
    provenance: Provenance
    averaged: bool = True

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PrimalExtraction:
    """Map recovering an optimizer of the source problem from a fixed point."""

    map: callable

    def __call__(self, w):
        return self.map(np.asarray(w, dtype=float))


def compose_alpha(a1, a2):
    """Averaging parameter of the composition of an a1- and an
    a2-averaged operator; an isometric factor enters as a = 0."""
    if a1 == 0.0:
        return a2
    if a2 == 0.0:
        return a1
    return (a1 + a2 - 2.0 * a1 * a2) / (1.0 - a1 * a2)


def _gradient_data(f):
    if f.kind != QUADRATIC:
        raise ValueError("gradient steps are only available for the "
                         "quadratic kind")
    return f.data["Q"], f.data["c"]


def _gd_alpha(lam, lmax):
    """Smallest alpha making the step x - lam*grad alpha-averaged: the
    gradient of an L-smooth convex function is (1/L)-cocoercive, so the
    step is averaged exactly when lam*L/2 < 1."""
    if lmax <= 0.0:
        return 0.0  # translation: averaged for every alpha in (0, 1)
    if lam >= 2.0 / lmax:
        raise StepTooLarge(f"lambda = {lam} >= 2/lambda_max = {2.0 / lmax}")
    return lam * lmax / 2.0


def make_gd(f, lam):
    """Gradient-descent map ``x - lam * (Q x + c)`` for quadratic f."""
    Q, c = _gradient_data(f)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    lmax = lambda_max_psd(Q)
    alpha = _gd_alpha(lam, lmax)
    averaged = alpha > 0.0
    prov = Provenance("gd", {"lambda": lam}, {"f": f})
    return FixedPointOperator(
        dimension=f.dimension,
        alpha=alpha if averaged else 1.0,
        evaluate=lambda x: x - lam * (Q @ x + c),
        provenance=prov,
        averaged=averaged,
    )


def make_proximal_point(f, gamma):
    """Proximal-point map ``prox(f, gamma, .)``; 1/2-averaged."""
    prov = Provenance("prox", {"gamma": gamma}, {"f": f})
    return FixedPointOperator(
        dimension=f.dimension,
        alpha=0.5,
        evaluate=lambda x: prox(f, gamma, x),
        provenance=prov,
    )


def make_gradient_projection(f, S, lam):
    """Projected-gradient map ``proj_S(x - lam * grad f(x))``."""
    Q, c = _gradient_data(f)
    if not isinstance(S, Polyhedron):
        raise TypeError("S must be a Polyhedron")
    if S.dim != f.dimension:
        raise ValueError("S and f live in different spaces")
    alpha = compose_alpha(_gd_alpha(lam, lambda_max_psd(Q)), 0.5)
    prov = Provenance("gp", {"lambda": lam}, {"f": f, "S": S})
    return FixedPointOperator(
        dimension=f.dimension,
        alpha=alpha,
        evaluate=lambda x: project_polyhedron(S, x - lam * (Q @ x + c)),
        provenance=prov,
    )


def make_proximal_gradient(f, g, lam, gamma):
    """Proximal-gradient map ``prox(g, gamma, x - lam * grad f(x))``."""
    Q, c = _gradient_data(f)
    if g.dimension != f.dimension:
        raise ValueError("f and g live in different spaces")
    alpha = compose_alpha(_gd_alpha(lam, lambda_max_psd(Q)), 0.5)
    prov = Provenance("pg", {"lambda": lam, "gamma": gamma}, {"f": f, "g": g})
    return FixedPointOperator(
        dimension=f.dimension,
        alpha=alpha,
        evaluate=lambda x: prox(g, gamma, x - lam * (Q @ x + c)),
        provenance=prov,
    )


def _dr_evaluate(f, g, gamma, alpha):
    two_alpha = 2.0 * alpha

    def evaluate(w):
        p = prox(f, gamma, w)
        q = prox(g, gamma, 2.0 * p - w)
        return w + two_alpha * (q - p)

    return evaluate


def make_dr(f, g, gamma, alpha):
    """Douglas-Rachford map ``(1-a) w + a ref(g) o ref(f) (w)`` together
    with the extraction ``w -> prox(f, gamma, w)`` that recovers a
    minimizer of f + g from any fixed point."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if f.dimension != g.dimension:
        raise ValueError("f and g live in different spaces")
    prov = Provenance("dr", {"gamma": gamma, "alpha": alpha}, {"f": f, "g": g})
    op = FixedPointOperator(
        dimension=f.dimension,
        alpha=alpha,
        evaluate=_dr_evaluate(f, g, gamma, alpha),
        provenance=prov,
    )
    return op, PrimalExtraction(lambda w: prox(f, gamma, w))


def make_pr(f, g, gamma):
    """Peaceman-Rachford map ``ref(g) o ref(f)``: the alpha = 1 limit of
    Douglas-Rachford.  Nonexpansive but not averaged, so no rate
    certificate applies; its fixed points coincide with DR's."""
    prov = Provenance("pr", {"gamma": gamma}, {"f": f, "g": g})
    return FixedPointOperator(
        dimension=f.dimension,
        alpha=1.0,
        evaluate=_dr_evaluate(f, g, gamma, 1.0),
        provenance=prov,
        averaged=False,
    )


def make_admm_xy_split(f, g, rho):
    """Consensus-split ADMM map for ``min f(x) + g(y)`` subject to
    ``x = y``, as an operator on the scaled dual variable:
    ``w -> (1/rho) F_DR(rho w)`` with the DR map built at gamma = rho,
    alpha = 1/2.  Extraction recovers the primal optimizer via
    ``w -> prox(f, rho, rho w)``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    dr_eval = _dr_evaluate(f, g, rho, 0.5)
    prov = Provenance("admm", {"rho": rho}, {"f": f, "g": g})
    op = FixedPointOperator(
        dimension=f.dimension,
        alpha=0.5,
        evaluate=lambda w: dr_eval(rho * w) / rho,
        provenance=prov,
    )
    return op, PrimalExtraction(lambda w: prox(f, rho, rho * w))


def run_admm_direct(f, g, rho, y0=None, w0=None, iters=100):
    """Direct alternating-direction iteration for ``min f(x) + g(y)``
    subject to ``x = y``, returning the scaled-dual trace.

    Updates (penalty 1/rho, so both block updates are prox maps at scale
    rho; the x-block is a linear solve for quadratic f):

        y_{k+1} = prox(g, rho, x_k + u_k)
        x_{k+1} = prox(f, rho, y_{k+1} - u_k)
        u_{k+1} = u_k + x_{k+1} - y_{k+1}

    The reported dual variable is ``w_k = (x_k - u_k) / rho``, which
    follows exactly the operator from :func:`make_admm_xy_split`.  When
    ``y0`` is omitted the start is made consistent
    (``x_0 = prox(f, rho, rho w_0)``) so the match holds from step 0;
    an arbitrary ``y0`` becomes consistent after one iteration.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    n = f.dimension
    w0 = np.zeros(n) if w0 is None else np.asarray(w0, dtype=float)
    try:
        x = prox(f, rho, rho * w0) if y0 is None else np.asarray(y0, dtype=float).copy()
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rho*Q+I is SPD
        raise SingularSubproblem(str(exc)) from exc
    u = x - rho * w0
    xs, ys, ws = [x.copy()], [x.copy()], [w0.copy()]
    residuals = []
    for _ in range(iters):
        y = prox(g, rho, x + u)
        try:
            x = prox(f, rho, y - u)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise SingularSubproblem(str(exc)) from exc
        u = u + x - y
        w = (x - u) / rho
        residuals.append(float(np.linalg.norm(w - ws[-1])))
        xs.append(x.copy())
        ys.append(y.copy())
        ws.append(w.copy())
    return IterationTrace(
        iterates=np.asarray(ws),
        residuals=np.asarray(residuals),
        limit=ws[-1].copy(),
        stop_reason=STOP_MAX_ITERS,
        aux={"x": np.asarray(xs), "y": np.asarray(ys)},
    )
