"""Small polytope utilities shared by the set, reformulation and test code:
support LPs, Chebyshev points, vertex enumeration, Fourier-Motzkin projection.
All of it is desk-scale (L up to ~8)."""

from __future__ import annotations

import itertools

import numpy as np

from .solver import INF, DeterministicMILP, LinearRow, Objective, Variable, solve_lp


def support_lp(D: np.ndarray, q: np.ndarray, direction: np.ndarray):
    """max direction'z over {D z + q >= 0}. Returns (status, value, argmax)."""
    m, L = D.shape
    names = [f"z{i}" for i in range(L)]
    p = DeterministicMILP(
        variables=tuple(Variable(nm, -INF, INF) for nm in names),
        objective=Objective("max", {nm: float(direction[i])
                                    for i, nm in enumerate(names)}),
        rows=tuple(LinearRow({nm: float(D[r, i]) for i, nm in enumerate(names)
                              if D[r, i] != 0.0}, ">=", float(-q[r]))
                   for r in range(m)),
    )
    res = solve_lp(p)
    if res.is_optimal:
        z = np.array([res.values[nm] for nm in names])
        return "optimal", res.objective, z
    return res.status, None, None


def chebyshev_point(D: np.ndarray, q: np.ndarray) -> np.ndarray | None:
    """A point well inside {Dz + q >= 0} (Chebyshev center with radius capped
    so unbounded sets still solve). None if empty."""
    m, L = D.shape
    norms = np.linalg.norm(D, axis=1)
    names = [f"z{i}" for i in range(L)]
    rows = []
    for r in range(m):
        coeffs = {nm: float(D[r, i]) for i, nm in enumerate(names) if D[r, i] != 0.0}
        coeffs["rad"] = float(-norms[r])
        rows.append(LinearRow(coeffs, ">=", float(-q[r])))
    p = DeterministicMILP(
        variables=tuple([Variable(nm, -INF, INF) for nm in names]
                        + [Variable("rad", 0.0, 1e6)]),
        objective=Objective("max", {"rad": 1.0}),
        rows=tuple(rows),
    )
    res = solve_lp(p)
    if not res.is_optimal:
        return None
    return np.array([res.values[nm] for nm in names])


def enumerate_vertices(D: np.ndarray, q: np.ndarray, tol: float = 1e-9) -> list[np.ndarray]:
    """Vertices of the polytope {Dz + q >= 0} by active-set enumeration.
    Exponential in L; intended for L <= ~6."""
    m, L = D.shape
    verts: list[np.ndarray] = []
    for comb in itertools.combinations(range(m), L):
        M = D[list(comb), :]
        if abs(np.linalg.det(M)) < tol:
            continue
        z = np.linalg.solve(M, -q[list(comb)])
        if np.all(D @ z + q >= -1e-8 * (1.0 + np.abs(q))):
            if not any(np.allclose(z, v, atol=1e-8) for v in verts):
                verts.append(z)
    return verts


def fourier_motzkin(D: np.ndarray, q: np.ndarray, keep: list[int]):
    """Project {Dz + q >= 0} onto the coordinates in `keep` by eliminating the
    others one at a time. Returns (D', q') over the kept coordinates, in the
    order given."""
    L = D.shape[1]
    elim = [i for i in range(L) if i not in keep]
    rows = [np.concatenate([D[r], [q[r]]]) for r in range(D.shape[0])]
    for j in elim:
        pos, neg, zero = [], [], []
        for row in rows:
            if row[j] > 1e-12:
                pos.append(row / row[j])
            elif row[j] < -1e-12:
                neg.append(row / -row[j])
            else:
                zero.append(row)
        new_rows = list(zero)
        for rp in pos:
            for rn in neg:
                new_rows.append(rp + rn)
        rows = _dedupe_rows(new_rows, j_zeroed=j)
    cols = keep + [L]
    out = np.array([[row[c] for c in cols] for row in rows]) if rows else \
        np.zeros((0, len(keep) + 1))
    return out[:, :-1], out[:, -1]


def _dedupe_rows(rows: list[np.ndarray], j_zeroed: int) -> list[np.ndarray]:
    seen = {}
    for row in rows:
        r = row.copy()
        r[j_zeroed] = 0.0
        nrm = np.max(np.abs(r[:-1]))
        if nrm < 1e-12:
            continue  # 0 >= -q: an always-true (or detectably empty) row
        r = r / nrm
        key = tuple(np.round(r, 10))
        if key not in seen:
            seen[key] = r
    return list(seen.values())
