"""Piecewise-affine decomposition of the splitting residual map on
linear and quadratic programs, with the certified quantities built on it:
per-piece relative Hoffman bounds, the operator-level error-bound
constant, an exact description of the fixed-point set, and distances
to it.

The residual map ``x - F(x)`` of the Douglas-Rachford operator on
``min c'x (+ 0.5 x'Qx)  s.t.  A x <= b`` is affine on each region

    P_J = X_J + A_J^T R_+^{|J|},      X_J = {x in X : A_J x = b_J},

indexed by the active sets J with independent rows and nonempty face.
``enumerate_pieces_lp`` / ``enumerate_pieces_qp`` produce every such
piece (desk scale: the row count is capped), and the remaining functions
consume them.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import EmptyFixedSet, Infeasible, NoFixedPoints, TooLarge
from .linalg import row_space_basis, spectral_summary
from .polyhedra import (Polyhedron, affine_rows, face_feasible_point,
                        find_feasible_point, intersect, project_polyhedron)

#: Hard cap on constraint rows for active-set enumeration.
MAX_ENUM_ROWS = 16

#: Residual tolerance certifying a point as a zero of an affine map.
ZERO_CERT_TOL = 1e-8

#: Slack for region-membership tests.
REGION_TOL = 1e-9


@dataclass(frozen=True)
class ActiveSetPiece:
    """One affine piece ``x -> M x - v`` of a residual map, valid on the
    region of points whose projection onto X lands on the face with
    active set ``active``.

    ``region`` is the explicit inequality description of that region;
    membership is equivalently certified by nonnegative face multipliers
    plus feasibility of the face projection, which is what ``contains``
    evaluates.
    """

    active: tuple
    M: np.ndarray
    v: np.ndarray
    region: Polyhedron
    hoffman_bound: float
    sigma_min_plus: float
    # face-projection data: proj(x) = proj_matrix @ x + proj_offset,
    # multipliers s(x) = mult_matrix @ x - mult_rhs
    proj_matrix: np.ndarray
    proj_offset: np.ndarray
    mult_matrix: np.ndarray
    mult_rhs: np.ndarray
    source: Polyhedron

    @property
    def dim(self):
        return self.M.shape[1]

    def residual(self, x):
        return self.M @ x - self.v

    def face_projection(self, x):
        return self.proj_matrix @ x + self.proj_offset

    def multipliers(self, x):
        return self.mult_matrix @ x - self.mult_rhs

    def contains(self, x, tol=REGION_TOL):
        x = np.asarray(x, dtype=float)
        scale = 1.0 + float(np.linalg.norm(x))
        if self.active:
            if self.multipliers(x).min() < -tol * scale:
                return False
        return self.source.contains(self.face_projection(x), tol * scale)


def hoffman_bound_piece(piece):
    """Upper bound ``1 / sigma_min_plus(M)`` on the Hoffman constant of
    the piece's affine map relative to its region; 0.0 for the zero map
    (whose region consists entirely of zeros whenever it is used)."""
    return piece.hoffman_bound


def _bound_from_sigma(sigma_min_plus):
    return 0.0 if sigma_min_plus == 0.0 else 1.0 / sigma_min_plus


def _face_projection_data(A, b, J):
    """Pseudoinverse-based projection data for the face with active set J."""
    AJ = A[list(J)]
    bJ = b[list(J)]
    gram = AJ @ AJ.T
    gram_inv = np.linalg.inv(gram)
    Ad = AJ.T @ gram_inv          # pseudoinverse of AJ (full row rank)
    D = Ad @ AJ                   # orthogonal projector onto Range(AJ^T)
    return AJ, bJ, Ad, D, gram_inv


def _region_polyhedron(X, J, D, Ad_bJ, mult_matrix, mult_rhs):
    if not J:
        return X
    n = X.dim
    C1 = X.A @ (np.eye(n) - D)
    d1 = X.b - X.A @ Ad_bJ
    keep = np.abs(C1).max(axis=1) > 1e-12
    rows = [C1[keep], -mult_matrix]
    rhs = [d1[keep], -mult_rhs]
    return Polyhedron(np.vstack(rows), np.concatenate(rhs))


def _enumerate_faces(X, budget_rows=MAX_ENUM_ROWS):
    """Active sets J with rank(A_J^T) = |J| and a nonempty face X_J.

    Face nonemptiness is decided with a witness cache (any stored feasible
    point hitting ``A_J x = b_J`` certifies the face) plus empty-subset
    pruning, falling back to a feasibility LP.
    """
    m, n = X.num_rows, X.dim
    if m > budget_rows:
        raise TooLarge(f"{m} rows exceed the enumeration budget of "
                       f"{budget_rows}")
    seed_point = find_feasible_point(X)
    if seed_point is None:
        raise Infeasible("the constraint polyhedron is empty")
    witnesses = [seed_point]
    empties = []
    scale = 1.0 + float(np.abs(X.b).max(initial=0.0))
    faces = [()]
    for k in range(1, min(m, n) + 1):
        for J in combinations(range(m), k):
            Jset = frozenset(J)
            if any(e <= Jset for e in empties):
                continue
            AJ = X.A[list(J)]
            if np.linalg.matrix_rank(AJ.T, tol=1e-10 * max(1.0, np.abs(AJ).max())) < k:
                continue
            bJ = X.b[list(J)]
            hit = any(np.abs(AJ @ w - bJ).max() <= 1e-9 * scale for w in witnesses)
            if not hit:
                w = face_feasible_point(X, J)
                if w is None:
                    empties.append(Jset)
                    continue
                witnesses.append(w)
            faces.append(J)
    return faces


def _build_piece(X, J, M, v):
    n = X.dim
    if J:
        AJ, bJ, Ad, D, gram_inv = _face_projection_data(X.A, X.b, J)
        mult_matrix = gram_inv @ AJ
        mult_rhs = gram_inv @ bJ
        proj_matrix = np.eye(n) - D
        proj_offset = Ad @ bJ
        region = _region_polyhedron(X, J, D, proj_offset, mult_matrix, mult_rhs)
    else:
        mult_matrix = np.zeros((0, n))
        mult_rhs = np.zeros(0)
        proj_matrix = np.eye(n)
        proj_offset = np.zeros(n)
        region = X
    sigma = spectral_summary(M).sigma_min_plus
    return ActiveSetPiece(
        active=tuple(J), M=M, v=v, region=region,
        hoffman_bound=_bound_from_sigma(sigma), sigma_min_plus=sigma,
        proj_matrix=proj_matrix, proj_offset=proj_offset,
        mult_matrix=mult_matrix, mult_rhs=mult_rhs, source=X,
    )


def enumerate_pieces_lp(X, c, gamma, alpha):
    """Pieces of the residual map of the Douglas-Rachford operator
    ``(1-2a) x + 2a proj_X(x) - 2a g c`` for ``min c'x s.t. x in X``:
    on each region, ``M = 2a pinv(A_J) A_J`` and ``v = 2a (pinv(A_J) b_J
    - g c)``."""
    c = np.asarray(c, dtype=float)
    n = X.dim
    pieces = []
    for J in _enumerate_faces(X):
        if J:
            AJ, bJ, Ad, D, _ = _face_projection_data(X.A, X.b, J)
            M = 2.0 * alpha * D
            v = 2.0 * alpha * (Ad @ bJ - gamma * c)
        else:
            M = np.zeros((n, n))
            v = -2.0 * alpha * gamma * c
        pieces.append(_build_piece(X, J, M, v))
    return pieces


def enumerate_pieces_qp(X, Q, c, gamma, alpha):
    """Pieces of the residual map of the Douglas-Rachford operator for
    ``min 0.5 x'Qx + c'x s.t. x in X``: with ``W = inv(g Q + I)`` and
    ``D = pinv(A_J) A_J``,

        M = 2a (I - D - W (I - 2 D)),
        v = 2a (W (2 pinv(A_J) b_J - g c) - pinv(A_J) b_J).
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = X.dim
    W = np.linalg.solve(gamma * Q + np.eye(n), np.eye(n))
    pieces = []
    for J in _enumerate_faces(X):
        if J:
            AJ, bJ, Ad, D, _ = _face_projection_data(X.A, X.b, J)
            pjb = Ad @ bJ
        else:
            D = np.zeros((n, n))
            pjb = np.zeros(n)
        M = 2.0 * alpha * (np.eye(n) - D - W @ (np.eye(n) - 2.0 * D))
        v = 2.0 * alpha * (W @ (2.0 * pjb - gamma * c) - pjb)
        pieces.append(_build_piece(X, J, M, v))
    return pieces


@dataclass(frozen=True)
class FixedSetPiece:
    """One certified piece of the fixed-point set: the affine zero set
    ``{x : B x = e}`` (orthonormal rows B) intersected with the region of
    its source piece."""

    basis: np.ndarray
    rhs: np.ndarray
    poly: Polyhedron
    witness: np.ndarray
    source_piece: ActiveSetPiece | None = None

    def affine_projection(self, x):
        if self.basis.shape[0] == 0:
            return np.asarray(x, dtype=float)
        return x - self.basis.T @ (self.basis @ x - self.rhs)

    def distance(self, x, tol=REGION_TOL):
        """Distance from x to (affine set) intersect (region).

        The affine projection is exact whenever it lands inside the
        region; otherwise fall back to a polyhedral projection onto the
        intersection (affine rows encoded as paired inequalities).
        """
        x = np.asarray(x, dtype=float)
        z = self.affine_projection(x)
        inside = (self.source_piece.contains(z, tol)
                  if self.source_piece is not None
                  else self.poly.contains(z, tol))
        if inside:
            return float(np.linalg.norm(x - z))
        return float(np.linalg.norm(x - project_polyhedron(self.poly, x)))


@dataclass(frozen=True)
class FixedPointSetDescription:
    """Union of certified fixed-set pieces with one representative point.

    ``source`` is ``"pieces"`` when built from the piecewise analysis and
    ``"limit"`` when the set is approximated by a single converged point
    (distances are then upper bounds only, ``exact`` False).
    """

    pieces: tuple
    representative: np.ndarray
    dim: int
    source: str = "pieces"
    exact: bool = True

    def distance(self, x):
        """Distance to the union of pieces.

        Each piece's affine distance is a lower bound on its true
        distance, so pieces are visited in ascending affine-distance
        order and the scan stops once the bound passes the best value
        found; the polyhedral projection only runs for the survivors.
        """
        x = np.asarray(x, dtype=float)
        lowers = []
        for p in self.pieces:
            z = p.affine_projection(x)
            lowers.append((float(np.linalg.norm(x - z)), z, p))
        lowers.sort(key=lambda item: item[0])
        best = np.inf
        for lower, z, p in lowers:
            if lower >= best:
                break
            inside = (p.source_piece.contains(z)
                      if p.source_piece is not None else p.poly.contains(z))
            if inside:
                best = min(best, lower)
            else:
                best = min(best, float(np.linalg.norm(
                    x - project_polyhedron(p.poly, x))))
        return best


def point_fixed_set(x, exact=True, source="pieces"):
    """Fixed-set description for the singleton {x} (or, with
    ``exact=False``, for a converged limit used as a distance proxy)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    piece = FixedSetPiece(basis=np.eye(n), rhs=x.copy(),
                          poly=affine_rows(np.eye(n), x), witness=x.copy())
    return FixedPointSetDescription(pieces=(piece,), representative=x.copy(),
                                    dim=n, source=source, exact=exact)


def fixed_point_set(pieces):
    """Certified description of the zero set of a piecewise-affine
    residual map.

    For each piece the least-norm solution of ``M x = v`` is projected
    onto (zero set) intersect (region); the piece enters the description
    only if that projection exists and its residual under the affine map
    stays below ``ZERO_CERT_TOL``.  Raises ``NoFixedPoints`` when every
    intersection is empty.
    """
    certified = []
    for piece in pieces:
        M, v = piece.M, piece.v
        scale = 1.0 + float(np.linalg.norm(v))
        x0, *_ = np.linalg.lstsq(M, v, rcond=None)
        if np.linalg.norm(M @ x0 - v) > ZERO_CERT_TOL * scale:
            continue  # M x = v has no solution at all
        B = row_space_basis(M)
        if B.shape[0]:
            inter = intersect(piece.region, affine_rows(B, B @ x0))
        else:
            inter = piece.region
        if B.shape[0] == piece.dim:
            # zero set is the single point x0: membership decides directly
            if not piece.contains(x0, ZERO_CERT_TOL):
                continue
            z = x0
        else:
            if piece.contains(x0, ZERO_CERT_TOL):
                z = x0
            else:
                try:
                    z = project_polyhedron(inter, x0)
                except Infeasible:
                    continue
        if np.linalg.norm(M @ z - v) > ZERO_CERT_TOL * (1.0 + np.linalg.norm(z)):
            continue
        certified.append(FixedSetPiece(basis=B, rhs=B @ x0 if B.shape[0] else np.zeros(0),
                                       poly=inter, witness=z, source_piece=piece))
    if not certified:
        raise NoFixedPoints("no piece region meets the zero set of its "
                            "affine map (the problem has no optimum)")
    rep = certified[0].witness
    return FixedPointSetDescription(pieces=tuple(certified),
                                    representative=rep.copy(),
                                    dim=rep.shape[0])


def distance_to_fixed_points(fixset, x):
    """Euclidean distance from x to the union of certified pieces."""
    if fixset is None or not fixset.pieces:
        raise EmptyFixedSet("empty fixed-point set description")
    return fixset.distance(np.asarray(x, dtype=float))


def error_bound_constant(pieces, fixset):
    """Operator-level error-bound constant: the largest per-piece
    Hoffman bound among pieces whose region meets the fixed-point set.

    A region meets the fixed-point set exactly when the piece's own zero
    set does (pieces agree on overlaps), so the certified pieces of
    ``fixset`` identify the relevant maximum.
    """
    if fixset is None or not fixset.pieces:
        raise EmptyFixedSet("error-bound constant needs a nonempty "
                            "fixed-point set")
    bounds = [p.source_piece.hoffman_bound for p in fixset.pieces
              if p.source_piece is not None]
    if not bounds:
        raise EmptyFixedSet("fixed-point set has no associated pieces")
    return max(bounds)


@dataclass(frozen=True)
class ScaledFixedSet:
    """Distance proxy for an operator conjugated by scaling:
    if T(w) = F(s w)/s then dist(w, Fix T) = dist(s w, Fix F)/s."""

    inner: FixedPointSetDescription
    scale: float

    @property
    def representative(self):
        return self.inner.representative / self.scale

    @property
    def source(self):
        return self.inner.source

    @property
    def exact(self):
        return self.inner.exact

    @property
    def pieces(self):
        return self.inner.pieces

    def distance(self, x):
        return self.inner.distance(self.scale * np.asarray(x, dtype=float)) / self.scale


def estimate_min_residual(piece, samples=64, seed=0, scale=5.0):
    """Sampled lower-bound estimate of ``inf ||M x - v||`` over the
    region of a piece (used to report the radius on which the error
    bound is in force for pieces that miss the fixed-point set).

    The infimum itself is a structured polyhedral problem we do not
    solve exactly; the returned value is labeled as sampled wherever it
    is surfaced.
    """
    rng = np.random.default_rng(seed)
    n = piece.dim
    best = np.inf
    for _ in range(samples):
        u = scale * rng.standard_normal(n)
        x = project_polyhedron(piece.region, u)
        best = min(best, float(np.linalg.norm(piece.residual(x))))
    return best
