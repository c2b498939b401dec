import numpy as np
import pytest
import scipy.fft
import scipy.sparse as sp

from conftest import poisson_hierarchy, poisson_matrix
from saltflow.constitutive import FlowParameters
from saltflow.discretization import (
    CoefficientFields,
    TransportProblem,
    assemble_jacobian,
    assemble_residual,
    initial_state,
    pack_state,
    unpack_state,
)
from saltflow.errors import KrylovError, NewtonError
from saltflow.grid import BoxDomain, DirichletPatch, build_grid
from saltflow.solvers import (
    ILU0,
    LinearSolverConfig,
    MgHierarchy,
    NewtonConfig,
    bicgstab,
    ilu0_smoother,
    mg_vcycle,
    newton_solve,
)

YEAR = 3.1536e7


class TestILU0:
    def test_diagonal_matrix_exact(self):
        rng = np.random.default_rng(0)
        d = rng.uniform(0.5, 2.0, size=20)
        M = ilu0_smoother(sp.diags(d).tocsr())
        b = rng.standard_normal(20)
        assert np.allclose(M.solve(b), b / d, rtol=1e-14)

    def test_tridiagonal_is_exact_lu(self):
        # no fill is needed for a banded matrix: one smoothing step solves
        n = 30
        A = sp.diags([-1.0, 2.5, -1.0], [-1, 0, 1], shape=(n, n)).tocsr()
        M = ilu0_smoother(A)
        rng = np.random.default_rng(1)
        b = rng.standard_normal(n)
        x = M.smooth(np.zeros(n), b, sweeps=1)
        assert np.allclose(A @ x, b, atol=1e-12)

    def test_smoothing_factor_on_laplacian(self):
        # high-frequency sine-mode damping per sweep, 17x17 vertices
        domain = BoxDomain((0.0, 0.0), (1.0, 1.0))
        grid = build_grid(domain, (17, 17), 1, None)[0]
        A = poisson_matrix(grid)
        M = ilu0_smoother(A)
        nx, ny = grid.n
        inner = (nx - 2, ny - 2)

        def hf_energy(e):
            field = e.reshape(grid.n, order="F")[1:-1, 1:-1]
            modes = scipy.fft.dstn(field, type=1, norm="ortho")
            kx, ky = np.meshgrid(np.arange(1, inner[0] + 1), np.arange(1, inner[1] + 1),
                                 indexing="ij")
            high = (kx > inner[0] // 2) | (ky > inner[1] // 2)
            return np.sqrt(np.sum(modes[high] ** 2))

        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(5):
            e = rng.standard_normal(grid.n_vertices)
            e[grid.tags != 0] = 0.0
            before = hf_energy(e)
            e_new = e - M.solve(A @ e)
            worst = max(worst, hf_energy(e_new) / before)
        assert worst <= 0.5

    def test_zero_pivot_shift(self, caplog):
        # explicit structural zero on the diagonal
        A = sp.csr_matrix((np.array([0.0, 1.0, 1.0, 1.0]),
                           (np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1]))),
                          shape=(2, 2))
        with caplog.at_level("WARNING", logger="saltflow.solvers"):
            M = ILU0(A)
        assert any("zero pivot" in rec.message for rec in caplog.records)
        assert np.all(np.isfinite(M.solve(np.ones(2))))


class TestBicgstab:
    def test_identity_one_iteration(self):
        b = np.arange(1.0, 6.0)
        x, iters = bicgstab(lambda v: v, None, b, LinearSolverConfig())
        assert iters == 1
        assert np.allclose(x, b, rtol=1e-12)

    def test_diagonal_system_matches_dense_oracle(self):
        n = 200
        d = np.arange(1.0, n + 1.0)
        rng = np.random.default_rng(5)
        b = rng.standard_normal(n)
        cfg = LinearSolverConfig(krylov_tol_rel=1e-10, krylov_max_iter=2000)
        x, _ = bicgstab(lambda v: d * v, None, b, cfg)
        assert np.linalg.norm(x - b / d) <= 1e-8 * np.linalg.norm(b / d)

    def test_zero_rhs(self):
        x, iters = bicgstab(lambda v: v, None, np.zeros(4), LinearSolverConfig())
        assert iters == 0 and np.all(x == 0.0)

    def test_laplacian_with_mg_preconditioner(self):
        cfg = LinearSolverConfig(krylov_tol_rel=1e-8)
        grids, matrices, mg = poisson_hierarchy(3, 5, cfg)  # 33x33 finest
        A = matrices[0]
        rng = np.random.default_rng(7)
        b = rng.standard_normal(A.shape[0])
        b[grids[0].tags != 0] = 0.0
        x, iters = bicgstab(lambda v: A @ v, mg.apply, b, cfg)
        assert iters <= 10
        assert np.linalg.norm(b - A @ x) <= 1e-8 * np.linalg.norm(b)

    def test_residual_monotone_over_five_iteration_windows(self):
        cfg = LinearSolverConfig(krylov_tol_rel=1e-12, krylov_max_iter=400)
        grids, matrices, mg = poisson_hierarchy(3, 4, cfg)
        A = matrices[0]
        rng = np.random.default_rng(11)
        b = rng.standard_normal(A.shape[0])
        b[grids[0].tags != 0] = 0.0
        hist = []
        bicgstab(lambda v: A @ v, mg.apply, b, cfg,
                 callback=lambda k, res: hist.append(res))
        for k in range(len(hist) - 5):
            assert hist[k + 5] < hist[k]

    def test_max_iter_raises_with_best_iterate(self):
        cfg = LinearSolverConfig(krylov_tol_rel=1e-14, krylov_max_iter=3)
        n = 50
        A = sp.diags(np.arange(1.0, n + 1.0)).tocsr()
        rng = np.random.default_rng(13)
        b = rng.standard_normal(n)
        with pytest.raises(KrylovError) as err:
            bicgstab(lambda v: A @ v, None, b, cfg)
        assert err.value.x is not None
        assert len(err.value.residuals) >= 2


class TestMgVcycle:
    def test_zero_rhs_fixed_point(self):
        cfg = LinearSolverConfig()
        _, _, mg = poisson_hierarchy(3, 3, cfg)
        x = mg_vcycle(mg, np.zeros(mg.matrices[0].shape[0]))
        assert np.all(x == 0.0)

    def test_poisson_contraction_factor(self):
        # error contraction per V(1,1) cycle on a 65x65 grid
        cfg = LinearSolverConfig(mg_pre_smooth=1, mg_post_smooth=1)
        grids, matrices, mg = poisson_hierarchy(3, 6, cfg)
        A = matrices[0]
        rng = np.random.default_rng(17)
        b = rng.standard_normal(A.shape[0])
        b[grids[0].tags != 0] = 0.0
        x_star = sp.linalg.spsolve(A.tocsc(), b)
        x = np.zeros_like(b)
        errs = [np.linalg.norm(x - x_star)]
        for _ in range(6):
            x = mg_vcycle(mg, b, x)
            errs.append(np.linalg.norm(x - x_star))
        factors = [errs[k + 1] / errs[k] for k in range(2, 6)]
        assert max(factors) <= 0.2

    def test_grid_independent_iteration_counts(self):
        # BiCGStab + V(1,1)-ILU(0) on 33^2 vs 129^2: iterations within 3
        cfg = LinearSolverConfig(krylov_tol_rel=1e-8)
        counts = {}
        for levels, label in ((5, 33), (7, 129)):
            grids, matrices, mg = poisson_hierarchy(3, levels, cfg)
            A = matrices[0]
            rng = np.random.default_rng(23)
            b = rng.standard_normal(A.shape[0])
            b[grids[0].tags != 0] = 0.0
            _, iters = bicgstab(lambda v: A @ v, mg.apply, b, cfg)
            counts[label] = iters
        assert abs(counts[129] - counts[33]) <= 3

    def test_missing_levels_rejected(self):
        cfg = LinearSolverConfig()
        _, matrices, _ = poisson_hierarchy(3, 3, cfg)
        with pytest.raises(ValueError):
            MgHierarchy(matrices, [], cfg)


def _coupled_problem(n_coarse=(5, 3), levels=2):
    params = FlowParameters()
    domain = BoxDomain((0.0, 0.0), (600.0, 150.0))
    patch = DirichletPatch("rectangle", lo=(150.0,), hi=(450.0,))
    grid = build_grid(domain, n_coarse, levels, patch)[0]
    n = grid.n_vertices
    coeff = CoefficientFields(np.full(n, 0.1), np.full(n, params.K_mean))
    return TransportProblem.from_grid(grid, coeff, params)


class TestNewton:
    def test_scalar_quadratic_tail(self):
        history = []

        def residual(x):
            history.append(float(x[0]))
            return x * x - 4.0

        def jacobian(x):
            return np.array([[2.0 * x[0]]])

        x, report = newton_solve(residual, jacobian, np.array([3.0]),
                                 NewtonConfig(tol_abs=1e-14, tol_rel=1e-14),
                                 LinearSolverConfig())
        assert x[0] == pytest.approx(2.0, abs=1e-12)
        errors = [abs(v - 2.0) for v in dict.fromkeys(history) if abs(v - 2.0) > 1e-14]
        ratios = [errors[k + 1] / errors[k] ** 2 for k in range(1, len(errors) - 1)]
        assert all(r < 1.0 for r in ratios)  # quadratic convergence tail

    def test_linear_residual_single_iteration(self):
        rng = np.random.default_rng(2)
        A = sp.csr_matrix(np.diag(rng.uniform(1, 2, size=10)) + 0.1 * np.eye(10, k=1))
        b = rng.standard_normal(10)
        x, report = newton_solve(lambda x: A @ x - b, lambda x: A,
                                 np.zeros(10),
                                 NewtonConfig(tol_rel=1e-10), LinearSolverConfig())
        assert report.iterations == 1
        assert np.linalg.norm(A @ x - b) <= 1e-8 * np.linalg.norm(b)

    def test_nonconvergence_raises_with_history(self):
        def residual(x):
            return np.array([1.0 + x[0] ** 2])  # no root

        with pytest.raises(NewtonError) as err:
            newton_solve(residual, lambda x: np.array([[2.0 * x[0]]]),
                         np.array([1.0]), NewtonConfig(max_iter=5),
                         LinearSolverConfig())
        assert len(err.value.report.residual_norms) >= 1

    def test_coupled_step_converges_quickly(self):
        problem = _coupled_problem(n_coarse=(5, 3), levels=3)
        assert problem.grid.n == (17, 9)
        state0 = initial_state(problem)
        dt = 0.005 * YEAR

        def residual(x):
            return assemble_residual(problem, unpack_state(x, dt), state0, dt)

        def jacobian(x):
            return assemble_jacobian(problem, unpack_state(x, dt), dt)

        x, report = newton_solve(residual, jacobian, pack_state(state0),
                                 NewtonConfig(tol_rel=1e-8, max_iter=12),
                                 LinearSolverConfig())
        assert report.converged
        assert report.iterations <= 8
        state1 = unpack_state(x, dt)
        assert state1.c.min() >= -1e-10 and state1.c.max() <= 1.0 + 1e-10

    def test_analytic_and_fd_jacobian_agree(self):
        problem = _coupled_problem(n_coarse=(4, 3), levels=1)
        state0 = initial_state(problem)
        dt = 0.005 * YEAR
        x0 = pack_state(state0)

        def residual(x):
            return assemble_residual(problem, unpack_state(x, dt), state0, dt)

        def fd_jacobian(x):
            n = len(x)
            J = np.empty((n, n))
            scale = np.where(np.arange(n) % 2 == 0, 1e-7, 1e-1)
            for j in range(n):
                xp, xm = x.copy(), x.copy()
                xp[j] += scale[j]
                xm[j] -= scale[j]
                J[:, j] = (residual(xp) - residual(xm)) / (2 * scale[j])
            return J

        cfg = NewtonConfig(tol_rel=1e-10, max_iter=15)
        lin = LinearSolverConfig()
        xa, _ = newton_solve(residual,
                             lambda x: assemble_jacobian(problem, unpack_state(x, dt), dt),
                             x0, cfg, lin)
        xf, _ = newton_solve(residual, fd_jacobian, x0, cfg, lin)
        scale = np.linalg.norm(xa)
        assert np.linalg.norm(xa - xf) <= 1e-8 * scale

    def test_deterministic_history(self):
        problem = _coupled_problem()
        state0 = initial_state(problem)
        dt = 0.005 * YEAR

        def run():
            x, report = newton_solve(
                lambda x: assemble_residual(problem, unpack_state(x, dt), state0, dt),
                lambda x: assemble_jacobian(problem, unpack_state(x, dt), dt),
                pack_state(state0), NewtonConfig(tol_rel=1e-8), LinearSolverConfig())
            return x, report

        x1, rep1 = run()
        x2, rep2 = run()
        assert np.array_equal(x1, x2)
        assert rep1.residual_norms == rep2.residual_norms
