"""Uncertainty-set representations with membership, projection, support and
probability-guarantee semantics.

Kinds: box, ball, ball-with-box, budgeted (l1-and-box), polyhedral, CLT slab,
scenario hull. Values are immutable; construct through the factory functions
which check the invariants (nonempty, budget range, boundedness flag).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import polytope
from .distributions import chi2_quantile, normal_quantile


@dataclass(frozen=True)
class GuaranteeReport:
    epsilon: float
    assumptions: tuple[str, ...]


class UnsupportedSetOperation(Exception):
    pass


@dataclass(frozen=True)
class Box:
    """Axis-aligned box lo <= z <= hi (symmetric radius boxes are the common
    case; interval boxes appear as split-scheme subsets and projections)."""
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    relaxed_projection: bool = False

    kind = "box"

    @property
    def dim(self) -> int:
        return len(self.lo)

    def nominal(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        z = _asdim(z, self.dim)
        return bool(np.all(z >= np.asarray(self.lo) - tol)
                    and np.all(z <= np.asarray(self.hi) + tol))

    def support(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        z = np.where(v > 0, hi, np.where(v < 0, lo, np.clip(0.0, lo, hi)))
        return float(v @ z), z

    def coordinate_range(self, i: int) -> tuple[float, float]:
        return self.lo[i], self.hi[i]

    def to_polyhedral_rows(self) -> tuple[np.ndarray, np.ndarray]:
        L = self.dim
        D = np.vstack([np.eye(L), -np.eye(L)])
        q = np.concatenate([-np.asarray(self.lo), np.asarray(self.hi)])
        return D, q


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    kind = "ball"

    @property
    def dim(self) -> int:
        return len(self.center)

    def nominal(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        z = _asdim(z, self.dim)
        return bool(np.linalg.norm(z - self.nominal()) <= self.radius + tol)

    def support(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return float(v @ self.nominal()), self.nominal()
        z = self.nominal() + self.radius * v / nv
        return float(v @ z), z

    def coordinate_range(self, i: int) -> tuple[float, float]:
        return self.center[i] - self.radius, self.center[i] + self.radius


@dataclass(frozen=True)
class BallBox:
    """Ball of radius omega intersected with the unit box (origin-centered)."""
    omega: float
    dim_: int

    kind = "ball_box"

    @property
    def dim(self) -> int:
        return self.dim_

    def nominal(self) -> np.ndarray:
        return np.zeros(self.dim_)

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        z = _asdim(z, self.dim_)
        return bool(np.linalg.norm(z) <= self.omega + tol
                    and np.max(np.abs(z)) <= 1.0 + tol)

    def support(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        z = _ball_box_maximizer(np.asarray(v, dtype=float), self.omega)
        return float(v @ z), z

    def coordinate_range(self, i: int) -> tuple[float, float]:
        r = min(1.0, self.omega)
        return -r, r


@dataclass(frozen=True)
class Budgeted:
    """||z||_1 <= gamma intersected with the unit box."""
    gamma: float
    dim_: int

    kind = "budgeted"

    @property
    def dim(self) -> int:
        return self.dim_

    def nominal(self) -> np.ndarray:
        return np.zeros(self.dim_)

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        z = _asdim(z, self.dim_)
        return bool(np.sum(np.abs(z)) <= self.gamma + tol
                    and np.max(np.abs(z)) <= 1.0 + tol)

    def support(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        v = np.asarray(v, dtype=float)
        order = np.argsort(-np.abs(v), kind="stable")
        z = np.zeros(self.dim_)
        budget = self.gamma
        for j in order:
            if budget <= 0 or v[j] == 0.0:
                break
            step = min(1.0, budget)
            z[j] = math.copysign(step, v[j])
            budget -= step
        return float(v @ z), z

    def coordinate_range(self, i: int) -> tuple[float, float]:
        r = min(1.0, self.gamma)
        return -r, r

    def to_polyhedral_rows(self) -> tuple[np.ndarray, np.ndarray]:
        L = self.dim_
        signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * L))).T.reshape(-1, L)
        D = np.vstack([-signs, np.eye(L), -np.eye(L)])
        q = np.concatenate([np.full(signs.shape[0], self.gamma),
                            np.ones(L), np.ones(L)])
        return D, q


@dataclass(frozen=True)
class Polyhedral:
    """{z : D z + q >= 0}; boundedness checked at construction."""
    D: tuple[tuple[float, ...], ...]
    q: tuple[float, ...]
    bounded: bool = True
    nominal_point: tuple[float, ...] = ()
    relaxed_projection: bool = False

    kind = "polyhedral"

    @property
    def dim(self) -> int:
        return len(self.D[0])

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.D, dtype=float), np.asarray(self.q, dtype=float)

    def nominal(self) -> np.ndarray:
        return np.asarray(self.nominal_point, dtype=float)

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        z = _asdim(z, self.dim)
        D, q = self.matrices()
        scale = 1.0 + np.abs(q) + np.abs(D) @ np.abs(z)
        return bool(np.all(D @ z + q >= -tol * scale))

    def support(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        D, q = self.matrices()
        status, val, z = polytope.support_lp(D, q, np.asarray(v, dtype=float))
        if status != "optimal":
            raise UnsupportedSetOperation(
                f"support LP over polyhedral set is {status}")
        return float(val), z

    def coordinate_range(self, i: int) -> tuple[float, float]:
        e = np.zeros(self.dim)
        e[i] = 1.0
        hi = self.support(e)[0]
        lo = -self.support(-e)[0]
        return lo, hi

    def to_polyhedral_rows(self) -> tuple[np.ndarray, np.ndarray]:
        return self.matrices()


@dataclass(frozen=True)
class CLTSet:
    """|sum(z) - L*mu| <= rho*sqrt(L)*sigma intersected with a mandatory box."""
    mu: float
    sigma: float
    rho: float
    box: Box

    kind = "clt"

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def half_width(self) -> float:
        return self.rho * math.sqrt(self.dim) * self.sigma

    def nominal(self) -> np.ndarray:
        z = np.full(self.dim, self.mu)
        if self.contains(z):
            return z
        D, q = self.to_polyhedral_rows()
        pt = polytope.chebyshev_point(D, q)
        if pt is None:
            raise ValueError("CLT set is empty")
        return pt

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        z = _asdim(z, self.dim)
        slab = abs(float(np.sum(z)) - self.dim * self.mu) <= self.half_width + tol
        return slab and self.box.contains(z, tol)

    def support(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        D, q = self.to_polyhedral_rows()
        status, val, z = polytope.support_lp(D, q, np.asarray(v, dtype=float))
        if status != "optimal":
            raise UnsupportedSetOperation(f"CLT support LP is {status}")
        return float(val), z

    def coordinate_range(self, i: int) -> tuple[float, float]:
        e = np.zeros(self.dim)
        e[i] = 1.0
        return -self.support(-e)[0], self.support(e)[0]

    def to_polyhedral_rows(self) -> tuple[np.ndarray, np.ndarray]:
        L = self.dim
        Db, qb = self.box.to_polyhedral_rows()
        ones = np.ones((1, L))
        D = np.vstack([-ones, ones, Db])
        t = self.half_width
        q = np.concatenate([[L * self.mu + t], [t - L * self.mu], qb])
        return D, q


@dataclass(frozen=True)
class ScenarioHull:
    """Convex hull of finitely many points, stored as the point list;
    worst cases maximize over the points."""
    points: tuple[tuple[float, ...], ...]

    kind = "scenario_hull"

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def pts(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def nominal(self) -> np.ndarray:
        return self.pts().mean(axis=0)

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        z = _asdim(z, self.dim)
        P = self.pts()
        if any(np.linalg.norm(z - p) <= tol for p in P):
            return True
        return _in_hull(P, z, tol)

    def support(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        P = self.pts()
        vals = P @ np.asarray(v, dtype=float)
        i = int(np.argmax(vals))
        return float(vals[i]), P[i]

    def coordinate_range(self, i: int) -> tuple[float, float]:
        col = self.pts()[:, i]
        return float(col.min()), float(col.max())


UncertaintySet = Box | Ball | BallBox | Budgeted | Polyhedral | CLTSet | ScenarioHull


# ---------------------------------------------------------------- factories

def box(radius, dim: int | None = None, lo=None, hi=None) -> Box:
    """Symmetric box |z_i| <= radius_i, or an interval box via lo/hi."""
    if lo is not None or hi is not None:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box needs lo <= hi elementwise")
        return Box(tuple(lo), tuple(hi))
    r = np.asarray(radius, dtype=float)
    if r.ndim == 0:
        if dim is None:
            raise ValueError("scalar radius needs dim")
        r = np.full(dim, float(r))
    if np.any(r < 0):
        raise ValueError("box radius must be nonnegative")
    return Box(tuple(-r), tuple(r))


def ball(center, radius: float) -> Ball:
    if radius < 0:
        raise ValueError("ball radius must be nonnegative")
    c = np.asarray(center, dtype=float)
    return Ball(tuple(c), float(radius))


def ball_box(omega: float, dim: int) -> BallBox:
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    return BallBox(float(omega), dim)


def budgeted(gamma: float, dim: int) -> Budgeted:
    if not 0.0 <= gamma <= dim:
        raise ValueError(f"budget must satisfy 0 <= gamma <= {dim}")
    return Budgeted(float(gamma), dim)


def polyhedral(D, q) -> Polyhedral:
    D = np.asarray(D, dtype=float)
    q = np.asarray(q, dtype=float)
    if D.ndim != 2 or q.shape != (D.shape[0],):
        raise ValueError("need D (m x L) and q (m,)")
    pt = polytope.chebyshev_point(D, q)
    if pt is None:
        raise ValueError("polyhedral set is empty")
    bounded = True
    L = D.shape[1]
    for i in range(L):
        e = np.zeros(L)
        e[i] = 1.0
        for d in (e, -e):
            status, _, _ = polytope.support_lp(D, q, d)
            if status == "unbounded":
                bounded = False
    return Polyhedral(tuple(map(tuple, D)), tuple(q), bounded=bounded,
                      nominal_point=tuple(pt))


def clt_set(dim: int, mu: float, sigma: float, rho: float, box_set: Box) -> CLTSet:
    """Central-limit slab |sum z - L mu| <= rho sqrt(L) sigma, intersected with
    a mandatory finite box (the bare slab is unbounded for L > 1)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if box_set.dim != dim:
        raise ValueError("box dimension mismatch")
    if not all(math.isfinite(v) for v in box_set.lo + box_set.hi):
        raise ValueError("CLT set requires a finite box")
    s = CLTSet(float(mu), float(sigma), float(rho), box_set)
    s.nominal()  # nonempty check
    return s


def scenario_hull(points) -> ScenarioHull:
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("need a nonempty list of points")
    return ScenarioHull(tuple(map(tuple, P)))


# --------------------------------------------------------------- operations

def contains(s: UncertaintySet, z, tol: float = 1e-9) -> bool:
    return s.contains(np.asarray(z, dtype=float), tol)


def support(s: UncertaintySet, v) -> tuple[float, np.ndarray]:
    """max_z in S of v'z and a maximizer."""
    return s.support(np.asarray(v, dtype=float))


def nominal_point(s: UncertaintySet) -> np.ndarray:
    return s.nominal()


def project(s: UncertaintySet, indices) -> UncertaintySet:
    """Exact projection onto the listed coordinates for the closed-form kinds;
    Fourier-Motzkin for polyhedral/CLT up to dim 8, beyond that a bounding box
    marked `relaxed_projection`."""
    idx = list(indices)
    if not idx or any(i < 0 or i >= s.dim for i in idx):
        raise ValueError("indices must be nonempty and within the set dimension")
    if isinstance(s, Box):
        return Box(tuple(s.lo[i] for i in idx), tuple(s.hi[i] for i in idx),
                   relaxed_projection=s.relaxed_projection)
    if isinstance(s, Ball):
        return Ball(tuple(s.center[i] for i in idx), s.radius)
    if isinstance(s, BallBox):
        return BallBox(s.omega, len(idx))
    if isinstance(s, Budgeted):
        return Budgeted(min(s.gamma, float(len(idx))), len(idx))
    if isinstance(s, ScenarioHull):
        return ScenarioHull(tuple(tuple(p[i] for i in idx) for p in s.points))
    if isinstance(s, (Polyhedral, CLTSet)):
        D, q = s.to_polyhedral_rows()
        if s.dim <= 8:
            Dp, qp = polytope.fourier_motzkin(D, q, idx)
            pt = polytope.chebyshev_point(Dp, qp) if Dp.shape[0] else None
            bounded = s.bounded if isinstance(s, Polyhedral) else True
            return Polyhedral(tuple(map(tuple, Dp)), tuple(qp), bounded=bounded,
                              nominal_point=tuple(pt) if pt is not None else
                              tuple(np.asarray(s.nominal())[idx]))
        los, his = [], []
        for i in idx:
            lo, hi = s.coordinate_range(i)
            los.append(lo)
            his.append(hi)
        return Box(tuple(los), tuple(his), relaxed_projection=True)
    raise UnsupportedSetOperation(f"project not defined for {type(s)}")


def epsilon_bound(s: UncertaintySet) -> GuaranteeReport:
    """Constraint-violation probability bound carried by the set, with the
    assumptions under which it holds."""
    assumptions = ("components bounded: ||z||_inf <= 1", "zero mean",
                   "independent components")
    if isinstance(s, BallBox):
        return GuaranteeReport(math.exp(-s.omega ** 2 / 2.0), assumptions)
    if isinstance(s, Budgeted):
        return GuaranteeReport(math.exp(-s.gamma ** 2 / (2.0 * s.dim)),
                               assumptions)
    raise UnsupportedSetOperation(
        "probability bound available for ball-box and budgeted sets only")


def radius_for_chance(epsilon: float, dim: int, mode: str = "correct-z") -> float:
    """Ellipsoid radius for a chance guarantee at level epsilon.

    mode "correct-z" returns the normal quantile z_{1-eps} (the radius that
    actually makes the affine chance constraint hold); "naive-chi2" returns
    sqrt of the chi-square quantile (the radius of the set that merely contains
    the parameter w.p. 1-eps). The two coincide only in dimension 1.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must be in (0, 0.5)")
    if mode == "correct-z":
        return normal_quantile(1.0 - epsilon)
    if mode == "naive-chi2":
        return math.sqrt(chi2_quantile(1.0 - epsilon, dim))
    raise ValueError(f"unknown mode {mode}")


# ----------------------------------------------------------------- helpers

def _asdim(z: np.ndarray, L: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (L,):
        raise ValueError(f"expected a {L}-vector, got shape {z.shape}")
    return z


def _ball_box_maximizer(v: np.ndarray, omega: float) -> np.ndarray:
    """argmax v'z over ||z||_2 <= omega, ||z||_inf <= 1: the maximizer is
    clip(t v, +-1) with t set so the l2 budget is exactly met; between clip
    breakpoints t = 1/|v_j| the squared norm is k + t^2 S2, solved per segment."""
    L = v.shape[0]
    if omega <= 0.0:
        return np.zeros(L)
    nz = np.nonzero(v)[0]
    if nz.size == 0:
        return np.zeros(L)
    if nz.size <= omega ** 2:
        return np.sign(v)
    absv = np.abs(v)
    order = nz[np.argsort(absv[nz])[::-1]]  # largest |v| clips first
    k = 0
    S2 = float(np.sum(absv[nz] ** 2))
    for j in order:
        t_break = 1.0 / absv[j]
        t_star = math.sqrt(max(omega ** 2 - k, 0.0) / S2) if S2 > 0 else math.inf
        if t_star <= t_break + 1e-15:
            return np.clip(t_star * v, -1.0, 1.0)
        k += 1
        S2 -= absv[j] ** 2
    return np.sign(v)


def _in_hull(P: np.ndarray, z: np.ndarray, tol: float) -> bool:
    """Feasibility LP: z = sum w_i p_i, sum w = 1, w >= 0."""
    from .solver import (DeterministicMILP, LinearRow, Objective, Variable,
                         solve_lp)
    n, L = P.shape
    names = [f"w{i}" for i in range(n)]
    rows = [LinearRow({names[i]: float(P[i, l]) for i in range(n)}, "==",
                      float(z[l])) for l in range(L)]
    rows.append(LinearRow({nm: 1.0 for nm in names}, "==", 1.0))
    p = DeterministicMILP(
        variables=tuple(Variable(nm, 0.0, 1.0) for nm in names),
        objective=Objective("min", {}),
        rows=tuple(rows),
    )
    return solve_lp(p).is_optimal
