import math

import numpy as np
import pytest

from meyers_lab import (FemError, VertexFunction, apply_Lh, assemble,
                        checkerboard_field, coefficient_field, constant_field,
                        dual_norm, f_h, from_triangulation, identity_field,
                        load, lp_norm, meyers_field, meyers_problem,
                        reconstruct, refine_red, solve, triangulate,
                        w12_inverse_bound)
from meyers_lab import reference


def dense_stiffness_oracle(tri, field, n_sub=12):
    """Independent assembly: subdivision quadrature and explicitly solved
    nodal basis coefficients, all-pairs dense accumulation."""
    n = tri.n_vertices
    K = np.zeros((n, n))
    for t, (ia, ib, ic) in enumerate(map(tuple, tri.triangles)):
        corners = tri.points[[ia, ib, ic]]
        # phi_i(x, y) = a + b x + c y with phi_i(corner_j) = delta_ij
        V = np.column_stack([np.ones(3), corners])
        coeffs = np.linalg.solve(V, np.eye(3))  # columns per basis function
        grads = coeffs[1:, :].T  # (3, 2) constant gradients
        # subdivision quadrature over the triangle for the coefficient matrix
        pts = []
        w = []
        for i in range(n_sub):
            for j in range(n_sub - i):
                l1 = (i + 1 / 3) / n_sub
                l2 = (j + 1 / 3) / n_sub
                pts.append(l1 * corners[0] + l2 * corners[1]
                           + (1 - l1 - l2) * corners[2])
                w.append(1.0)
        pts = np.array(pts)
        a_avg = np.tensordot(np.ones(len(pts)) / len(pts), field(pts), axes=1)
        area = float(tri.areas[t])
        for i, gi in enumerate(grads):
            for j, gj in enumerate(grads):
                K[[ia, ib, ic][i], [ia, ib, ic][j]] += area * gi @ (a_avg @ gj)
    return K


class TestAssemble:
    def test_center_diagonal_is_four(self, coarse_square_mesh):
        sys = assemble(coarse_square_mesh, identity_field())
        assert sys.K.shape == (1, 1)
        assert sys.K[0, 0] == pytest.approx(4.0)

    def test_against_dense_oracle(self, coarse_square_mesh):
        tri = refine_red(coarse_square_mesh)
        field = checkerboard_field(1.0, 4.0)
        sys = assemble(tri, field)
        oracle = dense_stiffness_oracle(tri, field)
        interior = tri.interior_vertices()
        assert np.allclose(sys.K.toarray(), oracle[np.ix_(interior, interior)],
                           atol=1e-12)

    def test_linearity_in_coefficient(self, coarse_square_mesh):
        tri = refine_red(coarse_square_mesh)
        k1 = assemble(tri, identity_field()).K.toarray()
        k2 = assemble(tri, constant_field(2.0 * np.eye(2))).K.toarray()
        assert np.allclose(k2, 2.0 * k1, atol=1e-13)

    def test_constant_skew_part_annihilates(self, coarse_square_mesh):
        # the rotated gradient is divergence free, so a constant antisymmetric
        # part contributes nothing against interior basis functions: only the
        # symmetric part of a constant coefficient reaches the stiffness
        tri = refine_red(coarse_square_mesh)
        a = np.array([[1.0, 1.0], [0.0, 1.0]])
        field = constant_field(a)
        assert field.ellipticity == pytest.approx(0.5)
        k_full = assemble(tri, field).K.toarray()
        k_sym = assemble(tri, constant_field(0.5 * (a + a.T))).K.toarray()
        assert np.allclose(k_full, k_sym, atol=1e-13)
        assert np.allclose(k_full, k_full.T, atol=1e-13)

    def test_nonsymmetric_coefficient(self, coarse_square_mesh):
        # a variable antisymmetric part does break the symmetry of K
        from meyers_lab import CoefficientField

        tri = refine_red(coarse_square_mesh)

        def matrix(pts):
            out = np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy()
            out[:, 0, 1] += pts[:, 0]
            out[:, 1, 0] -= pts[:, 0]
            return out

        field = CoefficientField(matrix, ellipticity=1.0, bound=2.0,
                                 kind="constant")
        sys = assemble(tri, field)
        K = sys.K.toarray()
        assert np.abs(K - K.T).max() > 1e-10
        sym_eigs = np.linalg.eigvalsh(0.5 * (K + K.T))
        assert sym_eigs.min() > 0
        assert sys.coercivity() == pytest.approx(sym_eigs.min())

    def test_sparsity_matches_adjacency(self, coarse_square_mesh):
        tri = refine_red(refine_red(coarse_square_mesh))
        sys = assemble(tri, identity_field())
        g = sys.graph
        interior = set(sys.interior.tolist())
        allowed = {(i, i) for i in range(len(sys.interior))}
        for u, v in zip(g.edge_u, g.edge_v):
            if int(u) in interior and int(v) in interior:
                iu, iv = sys.index_of[u], sys.index_of[v]
                allowed.add((iu, iv))
                allowed.add((iv, iu))
        coo = sys.K.tocoo()
        assert {(int(r), int(c)) for r, c in zip(coo.row, coo.col)} <= allowed


class TestLoad:
    def test_zero(self, coarse_square_mesh):
        sys = assemble(coarse_square_mesh, identity_field())
        b = load(sys, lambda pts: np.zeros(len(pts)))
        assert np.all(b == 0)

    def test_unit_load_lumped_areas(self, coarse_square_mesh):
        tri = refine_red(coarse_square_mesh)
        sys = assemble(tri, identity_field())
        b = load(sys, lambda pts: np.ones(len(pts)))
        for row, x in enumerate(sys.interior):
            touching = tri.areas[(tri.triangles == x).any(axis=1)]
            assert b[row] == pytest.approx(-touching.sum() / 3.0)

    def test_divergence_form_constant_field(self, coarse_square_mesh):
        tri = refine_red(coarse_square_mesh)
        sys = assemble(tri, identity_field())
        b = load(sys, ("div", lambda p: np.ones(len(p)), lambda p: np.zeros(len(p))))
        assert np.allclose(b, 0.0, atol=1e-14)

    def test_vertex_samples(self, coarse_square_mesh):
        sys = assemble(coarse_square_mesh, identity_field())
        b1 = load(sys, np.ones(coarse_square_mesh.n_vertices))
        b2 = load(sys, lambda pts: np.ones(len(pts)))
        assert np.allclose(b1, b2)


class TestSolve:
    def test_zero_load_zero_solution(self, coarse_square_mesh):
        sys = assemble(coarse_square_mesh, identity_field())
        load(sys, lambda pts: np.zeros(len(pts)))
        res = solve(sys)
        assert np.all(res.u.values == 0)

    def test_torsion_center_value(self, unit_square):
        tri = triangulate(unit_square, 2.0**-5)
        sys = assemble(tri, identity_field())
        load(sys, lambda pts: -np.ones(len(pts)))
        res = solve(sys)
        center = reconstruct(tri, res.u)([(0.5, 0.5)])[0]
        assert center == pytest.approx(reference.torsion_center_value(), abs=2e-3)
        assert res.residual <= 1e-10

    def test_iterative_matches_direct(self, coarse_square_mesh):
        tri = refine_red(refine_red(coarse_square_mesh))
        sys = assemble(tri, checkerboard_field(1.0, 4.0))
        load(sys, lambda pts: np.ones(len(pts)))
        u_direct = solve(sys, method="direct").u.values
        u_iter = solve(sys, method="iterative").u.values
        assert np.abs(u_direct - u_iter).max() <= 1e-9 * np.abs(u_direct).max()
        with pytest.raises(FemError, match="unknown solve method"):
            solve(sys, method="bogus")

    def test_galerkin_orthogonality(self, coarse_square_mesh):
        tri = refine_red(refine_red(coarse_square_mesh))
        sys = assemble(tri, checkerboard_field(1.0, 4.0))
        b = load(sys, lambda pts: np.ones(len(pts)))
        res = solve(sys)
        rng = np.random.default_rng(4)
        u_int = res.u.values[sys.interior]
        for _ in range(10):
            v = rng.standard_normal(len(sys.interior))
            # Q_h(u, v) + <f, R_h v> = v' K u - v' b = 0
            resid = v @ (sys.K @ u_int) - v @ b
            assert abs(resid) <= 1e-9 * max(abs(v @ b), 1.0)


class TestApplyLh:
    def test_zero(self, coarse_square_mesh):
        sys = assemble(coarse_square_mesh, identity_field())
        out = apply_Lh(sys, np.zeros(coarse_square_mesh.n_vertices))
        assert np.all(out.values == 0)

    def test_solved_system_gives_minus_fh(self, coarse_square_mesh):
        tri = refine_red(refine_red(coarse_square_mesh))
        sys = assemble(tri, checkerboard_field(1.0, 4.0))
        load(sys, lambda pts: np.ones(len(pts)))
        res = solve(sys)
        lhs = apply_Lh(sys, res.u).values
        rhs = -f_h(sys).values
        assert np.abs(lhs - rhs).max() <= 1e-9 * np.abs(rhs).max()

    def test_indicator_diagonal(self, coarse_square_mesh):
        sys = assemble(coarse_square_mesh, identity_field())
        g = sys.graph
        x = sys.interior[0]
        e = np.zeros(coarse_square_mesh.n_vertices)
        e[x] = 1.0
        out = apply_Lh(sys, e)
        assert out.values[x] * g.m[x] == pytest.approx(sys.K[0, 0])


class TestReconstruct:
    def test_nodal_interpolation(self, coarse_square_mesh):
        rng = np.random.default_rng(8)
        vals = rng.standard_normal(coarse_square_mesh.n_vertices)
        fld = reconstruct(coarse_square_mesh, vals)
        got = fld(coarse_square_mesh.points)
        assert np.allclose(got, vals, atol=1e-12)

    def test_indicator_energy_matches_stiffness(self, coarse_square_mesh):
        sys = assemble(coarse_square_mesh, identity_field())
        x = sys.interior[0]
        e = np.zeros(coarse_square_mesh.n_vertices)
        e[x] = 1.0
        fld = reconstruct(coarse_square_mesh, e)
        assert fld.grad_lp_norm(2.0) ** 2 == pytest.approx(sys.K[0, 0])

    def test_quadrature_exact_for_squares(self, coarse_square_mesh):
        # |x|^2 integrates exactly under the degree-4 rule
        tri = refine_red(coarse_square_mesh)
        fld = reconstruct(tri, tri.points[:, 0])
        assert fld.lp_norm(2.0) == pytest.approx(math.sqrt(1.0 / 3.0))
        assert fld.grad_lp_norm(2.0) == pytest.approx(1.0)

    def test_holder_audit_close_to_vertex_sup(self, coarse_square_mesh):
        tri = refine_red(refine_red(coarse_square_mesh))
        sys = assemble(tri, identity_field())
        load(sys, lambda pts: -np.ones(len(pts)))
        fld = reconstruct(tri, solve(sys).u)
        eta = 1.0 - 2.0 / 2.2
        semin = fld.holder_seminorm(eta)
        audit = fld.holder_audit(eta, n_pairs=20000, seed=0)
        assert audit <= semin * 1.01

    def test_norm_equivalence_brackets(self, coarse_square_mesh):
        from meyers_lab import gradient_length, holder_norm

        tri4 = refine_red(coarse_square_mesh)
        tri5 = refine_red(tri4)
        rng = np.random.default_rng(12)
        brackets = []
        for tri in (tri4, tri5):
            g = from_triangulation(tri)
            lo = np.full(3, np.inf)
            hi = np.zeros(3)
            for _ in range(20):
                vals = np.zeros(g.n)
                vals[g.interior] = rng.standard_normal(len(g.interior))
                f = VertexFunction(g, vals)
                fld = reconstruct(tri, vals)
                r = np.array([
                    lp_norm(f, 2.2) / fld.lp_norm(2.2),
                    lp_norm(gradient_length(f), 2.2) / fld.grad_lp_norm(2.2),
                    holder_norm(f, 0.5) / fld.holder_norm(0.5),
                ])
                lo = np.minimum(lo, r)
                hi = np.maximum(hi, r)
            brackets.append((lo, hi))
        (lo4, hi4), (lo5, hi5) = brackets
        assert np.all(lo5 / lo4 < 1.5) and np.all(lo4 / lo5 < 1.5)
        assert np.all(hi5 / hi4 < 1.5) and np.all(hi4 / hi5 < 1.5)

    def test_point_outside_mesh(self, coarse_square_mesh):
        fld = reconstruct(coarse_square_mesh, np.zeros(9))
        with pytest.raises(FemError):
            fld([(3.0, 3.0)])


class TestCoefficientBuilders:
    def test_dispatch(self):
        assert coefficient_field("constant").kind == "constant"
        assert coefficient_field("checkerboard", a1=1, a2=4).kind == "checkerboard"
        assert coefficient_field("meyers", eps=0.5).kind == "meyers(0.5)"
        assert coefficient_field("smooth").kind == "smooth"

    def test_meyers_requires_unit_interval(self):
        with pytest.raises(FemError):
            meyers_field(0.0)
        with pytest.raises(FemError):
            meyers_field(1.0)

    def test_meyers_eigenvalues(self):
        field = meyers_field(0.5)
        assert field.ellipticity == pytest.approx(0.25)
        assert field.bound == pytest.approx(1.0)
        pts = np.array([[0.3, 0.1], [-0.5, 0.4]])
        for a in field(pts):
            eig = np.linalg.eigvalsh(0.5 * (a + a.T))
            assert eig.min() == pytest.approx(0.25, abs=1e-12)
            assert eig.max() == pytest.approx(1.0, abs=1e-12)
        at_origin = field(np.zeros((1, 2)))[0]
        assert np.allclose(at_origin, 0.25 * np.eye(2))

    def test_annihilation_oracle_second_order(self):
        # div(A grad u) vanishes where the cutoff is inactive; finite
        # differences of the exact flux shrink at second order
        eps = 0.5
        prob = meyers_problem(eps)

        def fd_divergence(h):
            xs = np.arange(0.06, 0.17, h)  # keep r + h below the cutoff radius 1/4
            pts = np.array([(x, y) for x in xs for y in xs])
            def flux(p):
                a = reference.radial_tangential_matrix(p, eps)
                gr = reference.singular_gradient(p, eps)
                return np.einsum("kij,kj->ki", a, gr)
            ex = np.array([1.0, 0.0])
            ey = np.array([0.0, 1.0])
            div = ((flux(pts + h * ex)[:, 0] - flux(pts - h * ex)[:, 0])
                   + (flux(pts + h * ey)[:, 1] - flux(pts - h * ey)[:, 1])) / (2 * h)
            return np.abs(div).max()

        r1, r2 = fd_divergence(1e-3), fd_divergence(5e-4)
        assert r1 / r2 == pytest.approx(4.0, rel=0.2)

    def test_singular_load_zero_in_core(self):
        prob = meyers_problem(0.5)
        pts = np.array([[0.1, 0.05], [-0.2, 0.1], [0.0, 0.0]])
        assert np.all(prob.f(pts) == 0.0)

    def test_gradient_integrability_threshold(self):
        # integral of r^{(eps-1)p + 1} near zero converges iff p < p_c
        eps, p_c = 0.5, 4.0
        for p, finite in ((3.5, True), (4.5, False)):
            deltas = np.array([1e-2, 1e-4, 1e-6])
            vals = []
            for d in deltas:
                r = np.geomspace(d, 1.0, 4000)
                y = r ** ((eps - 1) * p + 1)
                vals.append(float(np.sum(np.diff(r) * 0.5 * (y[1:] + y[:-1]))))
            growth = vals[-1] / vals[0]
            assert (growth < 1.5) if finite else (growth > 5.0)

    def test_validation_catches_wrong_declaration(self, coarse_square_mesh):
        from meyers_lab import CoefficientField

        bad = CoefficientField(lambda pts: np.broadcast_to(np.eye(2), (len(pts), 2, 2)),
                               ellipticity=5.0, bound=1.0, kind="constant")
        with pytest.raises(FemError, match="ellipticity"):
            assemble(coarse_square_mesh, bad)


class TestOperatorNormSurrogates:
    def test_w12_inverse_bound_stable(self, coarse_square_mesh):
        tri = coarse_square_mesh
        vals = []
        for _ in range(3):
            tri = refine_red(tri)
            sys = assemble(tri, checkerboard_field(1.0, 4.0))
            vals.append(w12_inverse_bound(sys))
        assert max(vals) / min(vals) < 2.0

    def test_estimate_chain_dual_bound(self, unit_square):
        # data-transfer control: dual norm of f_h bounded through the L2 norm
        # of f, stably in h
        tri = triangulate(unit_square, 2.0**-2)
        consts = []
        for _ in range(3):
            sys = assemble(tri, identity_field())
            load(sys, lambda pts: np.ones(len(pts)))
            fh = f_h(sys)
            val = dual_norm(fh, 2.2, mode="ascent").value
            consts.append(val / 1.0)  # ||f||_{L2} = 1 on the unit square
            tri = refine_red(tri)
        assert max(consts) / min(consts) < 2.0

    def test_export_surfaces(self, coarse_square_mesh):
        sys = assemble(coarse_square_mesh, identity_field())
        text = sys.export_matrix_text()
        assert text.startswith("%%MatrixMarket")
        load(sys, lambda pts: -np.ones(len(pts)))
        fld = reconstruct(coarse_square_mesh, solve(sys).u)
        csv = fld.export_csv()
        assert csv.splitlines()[0] == "vertex_id,x,y,u"
        assert len(csv.splitlines()) == coarse_square_mesh.n_vertices + 1
