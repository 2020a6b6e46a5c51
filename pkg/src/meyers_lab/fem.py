"""P1 finite elements: stiffness assembly, loads, solves, reconstruction.

Sign convention: the weak problem is  integral(A grad u . grad v) = -<f, v>
for all piecewise-linear v vanishing on the boundary, so the assembled system
is K u = b with b[x] = -<f, phi_x>. The induced vertex operator satisfies
apply_Lh(solve(system)) == -f_h with f_h(x) = <f, phi_x> / m(x), m the graph
vertex measure of the mesh.

Quadrature: one-point (barycenter) rule for the coefficient matrix, exact for
per-triangle-constant A; three-point vertex rule for scalar loads; edge
midpoint rule (degree 2) for divergence-form loads; six-point degree-4 rule
for L^p norms of reconstructions (exact only for even integer p, the small
quadrature error elsewhere is dominated by the effects under study).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import reference
from .graph import WeightedGraph, from_triangulation
from .mesh import Triangulation
from .spaces import VertexFunction, _edge_laplacian


class FemError(ValueError):
    """Assembly or solve failure."""


# six-point Dunavant rule, degree 4, barycentric coordinates and weights
_Q4_A = 0.445948490915965
_Q4_B = 0.091576213509771
_Q4_BARY = np.array(
    [
        [1 - 2 * _Q4_A, _Q4_A, _Q4_A],
        [_Q4_A, 1 - 2 * _Q4_A, _Q4_A],
        [_Q4_A, _Q4_A, 1 - 2 * _Q4_A],
        [1 - 2 * _Q4_B, _Q4_B, _Q4_B],
        [_Q4_B, 1 - 2 * _Q4_B, _Q4_B],
        [_Q4_B, _Q4_B, 1 - 2 * _Q4_B],
    ]
)
_Q4_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)

_MID_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


@dataclass
class CoefficientField:
    """Matrix coefficient x -> A(x), with declared ellipticity and bound."""

    matrix: Callable[[np.ndarray], np.ndarray]  # (k, 2) -> (k, 2, 2)
    ellipticity: float
    bound: float
    kind: str

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.matrix(np.atleast_2d(np.asarray(points, dtype=float)))

    def validate(self, points, seed: int = 0, slack: float = 1e-9) -> None:
        """Spot-check A xi . xi >= c |xi|^2 and the entry bound on a sample."""
        rng = np.random.default_rng(seed)
        a = self(points)
        xi = rng.standard_normal((len(a), 2))
        quad = np.einsum("kij,ki,kj->k", a, xi, xi)
        norms = np.einsum("ki,ki->k", xi, xi)
        if np.any(quad < (self.ellipticity - slack) * norms):
            raise FemError(f"ellipticity check failed for kind {self.kind!r}")
        if np.any(np.abs(a) > self.bound + slack):
            raise FemError(f"bound check failed for kind {self.kind!r}")


def constant_field(matrix) -> CoefficientField:
    m = np.asarray(matrix, dtype=float)
    if m.shape == ():
        m = float(m) * np.eye(2)
    sym = 0.5 * (m + m.T)
    c = float(np.linalg.eigvalsh(sym).min())
    if c <= 0:
        raise FemError("constant matrix is not elliptic")
    return CoefficientField(
        lambda pts, m=m: np.broadcast_to(m, (len(pts), 2, 2)).copy(),
        ellipticity=c, bound=float(np.abs(m).max()), kind="constant",
    )


def identity_field() -> CoefficientField:
    return constant_field(np.eye(2))


def checkerboard_field(a1: float, a2: float, center=(0.5, 0.5)) -> CoefficientField:
    """Scalar coefficient jumping between a1 and a2 across quadrants."""
    if min(a1, a2) <= 0:
        raise FemError("checkerboard values must be positive")
    cx, cy = center

    def matrix(pts):
        s = (pts[:, 0] - cx) * (pts[:, 1] - cy) >= 0
        vals = np.where(s, a1, a2)
        return vals[:, None, None] * np.eye(2)

    return CoefficientField(matrix, ellipticity=float(min(a1, a2)),
                            bound=float(max(a1, a2)), kind="checkerboard")


def meyers_field(eps: float) -> CoefficientField:
    """Radial eigenvalue 1, tangential eps^2; uniformly elliptic but with
    unbounded-gradient solutions beyond the critical exponent 2/(1-eps)."""
    if not 0 < eps < 1:
        raise FemError("eps must lie in (0, 1)")
    return CoefficientField(
        lambda pts: reference.radial_tangential_matrix(pts, eps),
        ellipticity=eps * eps, bound=1.0, kind=f"meyers({eps})",
    )


def smooth_field() -> CoefficientField:
    def matrix(pts):
        vals = 1.0 + 0.5 * np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
        return vals[:, None, None] * np.eye(2)

    return CoefficientField(matrix, ellipticity=0.5, bound=1.5, kind="smooth")


def coefficient_field(kind: str, **params) -> CoefficientField:
    """Builder dispatch: constant(M) | checkerboard(a1, a2) | meyers(eps) | smooth."""
    if kind == "constant":
        return constant_field(params.get("matrix", np.eye(2)))
    if kind == "checkerboard":
        return checkerboard_field(params["a1"], params["a2"],
                                  params.get("center", (0.5, 0.5)))
    if kind == "meyers":
        return meyers_field(params["eps"])
    if kind == "smooth":
        return smooth_field()
    raise FemError(f"unknown coefficient kind {kind!r}")


@dataclass
class MeyersProblem:
    field: CoefficientField
    eps: float
    p_c: float
    u_exact: Callable
    grad_exact: Callable
    f: Callable


def meyers_problem(eps: float) -> MeyersProblem:
    return MeyersProblem(
        field=meyers_field(eps), eps=eps, p_c=2.0 / (1.0 - eps),
        u_exact=lambda pts: reference.singular_solution(pts, eps),
        grad_exact=lambda pts: reference.singular_gradient(pts, eps),
        f=lambda pts: reference.singular_load(pts, eps),
    )


def _p1_gradients(tri: Triangulation):
    """Constant barycentric gradients and areas, vectorized over triangles."""
    p = tri.points[tri.triangles]  # (m, 3, 2)
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    grads = np.empty((len(p), 3, 2))
    grads[:, 0, 0] = b[:, 1] - c[:, 1]
    grads[:, 0, 1] = c[:, 0] - b[:, 0]
    grads[:, 1, 0] = c[:, 1] - a[:, 1]
    grads[:, 1, 1] = a[:, 0] - c[:, 0]
    grads[:, 2, 0] = a[:, 1] - b[:, 1]
    grads[:, 2, 1] = b[:, 0] - a[:, 0]
    grads /= area2[:, None, None]
    return grads, 0.5 * area2


class P1System:
    """Assembled stiffness on the zero-boundary space of a triangulation."""

    def __init__(self, tri: Triangulation, field: CoefficientField,
                 K: sp.csr_matrix, graph: WeightedGraph):
        self.tri = tri
        self.field = field
        self.K = K
        self.graph = graph
        self.interior = tri.interior_vertices()
        self.index_of = np.full(tri.n_vertices, -1, dtype=np.int64)
        self.index_of[self.interior] = np.arange(len(self.interior))
        self.m_interior = graph.m[self.interior]
        self.b = None

    def coercivity(self) -> float:
        """Smallest eigenvalue of the symmetric part; positive iff coercive."""
        ksym = 0.5 * (self.K + self.K.T)
        if self.K.shape[0] <= 1200:
            return float(np.linalg.eigvalsh(ksym.toarray()).min())
        val = spla.eigsh(ksym, k=1, which="SA", return_eigenvectors=False)
        return float(val[0])

    def export_matrix_text(self) -> str:
        """Matrix-market style sparse dump of the stiffness block."""
        coo = self.K.tocoo()
        lines = ["%%MatrixMarket matrix coordinate real general",
                 f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}"]
        order = np.lexsort((coo.col, coo.row))
        for i in order:
            lines.append(f"{coo.row[i] + 1} {coo.col[i] + 1} {float(coo.data[i])!r}")
        return "\n".join(lines) + "\n"


def assemble(tri: Triangulation, field: CoefficientField,
             validate: bool = True) -> P1System:
    """Stiffness K[x][y] = integral(A grad phi_y . grad phi_x), interior rows.

    A is sampled at barycenters (exact for per-triangle-constant A).
    """
    grads, areas = _p1_gradients(tri)
    bary = tri.points[tri.triangles].mean(axis=1)
    a_vals = field(bary)
    if validate:
        field.validate(bary)
    # local matrices: K_loc[t, i, j] = area_t * (A grad_j) . grad_i
    agrad = np.einsum("tab,tjb->tja", a_vals, grads)
    k_loc = np.einsum("tia,tja->tij", grads, agrad) * areas[:, None, None]

    tris = tri.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    full = sp.coo_matrix((k_loc.ravel(), (rows, cols)),
                         shape=(tri.n_vertices, tri.n_vertices)).tocsr()
    interior = tri.interior_vertices()
    K = full[interior][:, interior].tocsr()
    return P1System(tri, field, K, from_triangulation(tri))


def load(system: P1System, f) -> np.ndarray:
    """Load vector b[x] = -<f, phi_x> over interior vertices.

    ``f`` is a callable on points, an array of vertex samples, or a
    divergence-form pair ("div", F1, F2) with <div F, phi> = -int F . grad phi.
    """
    tri = system.tri
    if isinstance(f, tuple) and len(f) == 3 and f[0] == "div":
        _, f1, f2 = f
        grads, areas = _p1_gradients(tri)
        pts = np.einsum("qk,tkd->tqd", _MID_BARY, tri.points[tri.triangles])
        flat = pts.reshape(-1, 2)
        fbar = np.stack([np.asarray(f1(flat)), np.asarray(f2(flat))], axis=-1)
        fbar = fbar.reshape(len(tri.triangles), 3, 2).mean(axis=1)
        # <div F, phi_x> = -sum_T area * F_T . grad phi_x ; b = -<f, phi>
        contrib = np.einsum("td,tid->ti", fbar, grads) * areas[:, None]
        b_full = np.zeros(tri.n_vertices)
        np.add.at(b_full, tri.triangles.ravel(), contrib.ravel())
    else:
        if callable(f):
            samples = np.asarray(f(tri.points), dtype=float)
            samples = np.broadcast_to(samples, (tri.n_vertices,))
        else:
            samples = np.asarray(f, dtype=float)
            if samples.shape != (tri.n_vertices,):
                raise FemError("vertex samples must cover every vertex")
        lumped = np.zeros(tri.n_vertices)
        np.add.at(lumped, tri.triangles.ravel(),
                  np.repeat(system.tri.areas / 3.0, 3))
        b_full = -samples * lumped
    system.b = b_full[system.interior]
    return system.b


def f_h(system: P1System) -> VertexFunction:
    """Vertex data f_h(x) = <f, phi_x> / m(x) on the interior, zero on the boundary."""
    if system.b is None:
        raise FemError("no load assembled")
    vals = np.zeros(system.tri.n_vertices)
    vals[system.interior] = -system.b / system.m_interior
    return VertexFunction(system.graph, vals)


@dataclass
class SolveResult:
    u: VertexFunction
    residual: float


def solve(system: P1System, rtol: float = 1e-10, method: str = "direct") -> SolveResult:
    """Solve K u = b: sparse direct factorization by default, or a
    preconditioned iterative solve for nonsymmetric systems. The relative
    residual is checked against ``rtol`` and reported."""
    if system.b is None:
        raise FemError("no load assembled")
    K = system.K.tocsc()
    if method == "direct":
        u_int = spla.spsolve(K, system.b)
    elif method == "iterative":
        ilu = spla.spilu(K, drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(K.shape, ilu.solve)
        u_int, info = spla.lgmres(K, system.b, M=M, rtol=rtol / 10, maxiter=2000)
        if info != 0:
            rel = float(np.linalg.norm(K @ u_int - system.b)
                        / max(np.linalg.norm(system.b), 1e-300))
            raise FemError(f"iterative solve stalled at residual {rel:.3e}")
    else:
        raise FemError(f"unknown solve method {method!r}")
    res = np.linalg.norm(system.K @ u_int - system.b)
    scale = np.linalg.norm(system.b)
    rel = float(res / scale) if scale > 0 else float(res)
    if scale > 0 and rel > rtol:
        raise FemError(f"solve residual {rel:.3e} exceeds {rtol:.1e}")
    vals = np.zeros(system.tri.n_vertices)
    vals[system.interior] = u_int
    return SolveResult(VertexFunction(system.graph, vals), rel)


def apply_Lh(system: P1System, u) -> VertexFunction:
    """Vertex operator x -> (K u)[x] / m(x); solve output maps to -f_h."""
    vals = u.values if isinstance(u, VertexFunction) else np.asarray(u, dtype=float)
    out = np.zeros(system.tri.n_vertices)
    out[system.interior] = (system.K @ vals[system.interior]) / system.m_interior
    return VertexFunction(system.graph, out)


class P1Field:
    """Continuous piecewise-linear field with point evaluation and norms."""

    def __init__(self, tri: Triangulation, values):
        self.tri = tri
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (tri.n_vertices,):
            raise FemError("one value per mesh vertex required")
        self._grads, self._areas = _p1_gradients(tri)
        self.tri_gradients = np.einsum(
            "ti,tid->td", self.values[tri.triangles], self._grads
        )
        self._locator = None

    # -- evaluation --------------------------------------------------------
    def _build_locator(self):
        cell = max(self.tri.h, 1e-300)
        table: dict[tuple[int, int], list[int]] = {}
        pts = self.tri.points
        for t, tri_ix in enumerate(self.tri.triangles):
            q = pts[tri_ix]
            lo, hi = q.min(axis=0), q.max(axis=0)
            for gx in range(int(lo[0] // cell), int(hi[0] // cell) + 1):
                for gy in range(int(lo[1] // cell), int(hi[1] // cell) + 1):
                    table.setdefault((gx, gy), []).append(t)
        self._locator = (cell, table)

    def __call__(self, points) -> np.ndarray:
        if self._locator is None:
            self._build_locator()
        cell, table = self._locator
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), np.nan)
        corners = self.tri.points[self.tri.triangles]
        for i, p in enumerate(pts):
            for t in table.get((int(p[0] // cell), int(p[1] // cell)), ()):
                a, b, c = corners[t]
                d = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1])
                l1 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / d
                l2 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / d
                l3 = 1.0 - l1 - l2
                if min(l1, l2, l3) >= -1e-12:
                    v = self.values[self.tri.triangles[t]]
                    out[i] = l1 * v[0] + l2 * v[1] + l3 * v[2]
                    break
        if np.any(np.isnan(out)):
            raise FemError("point outside the mesh")
        return out

    # -- norms --------------------------------------------------------------
    def _quad_values(self):
        return np.einsum("qk,tk->tq", _Q4_BARY, self.values[self.tri.triangles])

    def _quad_points(self):
        return np.einsum("qk,tkd->tqd", _Q4_BARY, self.tri.points[self.tri.triangles])

    def lp_norm(self, p: float) -> float:
        if np.isinf(p):
            return float(np.abs(self.values).max())
        vals = np.abs(self._quad_values()) ** p
        return float(((vals @ _Q4_W) @ self._areas) ** (1.0 / p))

    def grad_lp_norm(self, p: float) -> float:
        mags = np.hypot(self.tri_gradients[:, 0], self.tri_gradients[:, 1])
        if np.isinf(p):
            return float(mags.max())
        return float((self._areas @ mags**p) ** (1.0 / p))

    def w1p_norm(self, p: float) -> float:
        return self.lp_norm(p) + self.grad_lp_norm(p)

    def lp_error(self, exact, p: float) -> float:
        pts = self._quad_points()
        diff = np.abs(self._quad_values() - exact(pts.reshape(-1, 2)).reshape(pts.shape[:2]))
        return float((((diff**p) @ _Q4_W) @ self._areas) ** (1.0 / p))

    def grad_lp_error(self, grad_exact, p: float) -> float:
        pts = self._quad_points()
        ge = grad_exact(pts.reshape(-1, 2)).reshape(pts.shape[0], pts.shape[1], 2)
        diff = ge - self.tri_gradients[:, None, :]
        mags = np.hypot(diff[..., 0], diff[..., 1])
        return float((((mags**p) @ _Q4_W) @ self._areas) ** (1.0 / p))

    def w1p_error(self, exact, grad_exact, p: float) -> float:
        return self.lp_error(exact, p) + self.grad_lp_error(grad_exact, p)

    def holder_seminorm(self, eta: float, include_midpoints: bool = True,
                        point_cap: int = 8000, block: int = 512) -> float:
        """Euclidean Holder seminorm over vertices (plus edge midpoints when
        the point budget allows); for P1 fields the vertex sup is the working
        assumption, audited separately."""
        pts = self.tri.points
        vals = self.values
        if include_midpoints:
            e = self.tri.edge_array
            if len(pts) + len(e) <= point_cap:
                pts = np.vstack([pts, 0.5 * (pts[e[:, 0]] + pts[e[:, 1]])])
                vals = np.concatenate([vals, 0.5 * (vals[e[:, 0]] + vals[e[:, 1]])])
        best = 0.0
        for s in range(0, len(pts), block):
            chunk = slice(s, min(s + block, len(pts)))
            d = np.hypot(pts[chunk, None, 0] - pts[None, :, 0],
                         pts[chunk, None, 1] - pts[None, :, 1])
            num = np.abs(vals[chunk, None] - vals[None, :])
            with np.errstate(divide="ignore", invalid="ignore"):
                r = num / d**eta
            r[~np.isfinite(r)] = 0.0
            best = max(best, float(r.max()))
        return best

    def holder_norm(self, eta: float) -> float:
        return float(np.abs(self.values).max()) + self.holder_seminorm(eta)

    def holder_audit(self, eta: float, n_pairs: int = 20000, seed: int = 0) -> float:
        """Random intra-triangle pairs; returns the sampled seminorm."""
        rng = np.random.default_rng(seed)
        t1 = rng.integers(0, self.tri.n_triangles, n_pairs)
        t2 = rng.integers(0, self.tri.n_triangles, n_pairs)

        def sample(ts):
            lam = rng.dirichlet(np.ones(3), len(ts))
            pts = np.einsum("nk,nkd->nd", lam, self.tri.points[self.tri.triangles[ts]])
            vals = np.einsum("nk,nk->n", lam, self.values[self.tri.triangles[ts]])
            return pts, vals

        p1, v1 = sample(t1)
        p2, v2 = sample(t2)
        d = np.hypot(*(p1 - p2).T)
        ok = d > 0
        return float((np.abs(v1 - v2)[ok] / d[ok] ** eta).max())

    def export_csv(self) -> str:
        lines = ["vertex_id,x,y,u"]
        for i, ((x, y), u) in enumerate(zip(self.tri.points, self.values)):
            lines.append(f"{i},{float(x)!r},{float(y)!r},{float(u)!r}")
        return "\n".join(lines) + "\n"


def reconstruct(tri: Triangulation, u) -> P1Field:
    """Piecewise-linear interpolant of vertex values (zero-boundary enforced
    only through the values themselves)."""
    vals = u.values if isinstance(u, VertexFunction) else u
    return P1Field(tri, vals)


def w12_inverse_bound(system: P1System) -> float:
    """Smallest singular value of the stiffness in the Hilbertian
    W^{1,2}-to-dual sense; its stability across refinements mirrors the
    h-independence of the inverse operator."""
    g = system.graph
    act = system.interior
    G = (sp.diags(g.m) + _edge_laplacian(g)).tocsr()[act][:, act].toarray()
    import scipy.linalg as la

    L = la.cholesky(G, lower=True)
    Kd = system.K.toarray()
    mid = la.solve_triangular(L, la.solve_triangular(L, Kd.T, lower=True).T, lower=True)
    return float(np.linalg.svd(mid, compute_uv=False).min())
