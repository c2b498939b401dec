import numpy as np
import pytest

from saltflow.discretization import assemble_residual
from saltflow.grid import build_grid
from saltflow.mms import (
    build_mms,
    exact_state,
    mms_problem,
    spatial_convergence,
    temporal_convergence,
)


@pytest.fixture(scope="module")
def ms():
    return build_mms()


class TestManufacturedProblem:
    def test_truncation_error_shrinks_quadratically(self, ms):
        # residual of the exact steady solution is the FV truncation
        # error: interior rows scale like O(h^2) relative to the dual
        # volume under grid doubling
        norms = []
        for grid in build_grid(ms.domain, (13, 7), 2, None):
            problem = mms_problem(ms, grid)
            state = exact_state(ms, grid, 0.0)
            r = assemble_residual(problem, state, state, np.inf)
            free = ~problem.dirichlet_c_mask
            V = grid.dual_volumes()
            norms.append(np.linalg.norm((r[0::2] / V)[free]) / np.sqrt(free.sum()))
        order = np.log2(norms[1] / norms[0])  # grids came finest-first
        assert order >= 1.5

    def test_boundary_rows_are_exact(self, ms):
        grid = build_grid(ms.domain, (13, 7), 1, None)[0]
        problem = mms_problem(ms, grid)
        state = exact_state(ms, grid, 0.0)
        r = assemble_residual(problem, state, state, np.inf)
        boundary = problem.dirichlet_c_mask
        assert np.max(np.abs(r[0::2][boundary])) == 0.0
        assert np.max(np.abs(r[1::2][boundary])) == 0.0


class TestConvergenceOrders:
    def test_spatial_second_order(self, ms):
        _, errors, orders = spatial_convergence(ms)
        assert len(orders) == 2   # two grid doublings
        assert all(o >= 1.8 for o in orders), f"observed spatial orders {orders}"
        assert all(e2 < e1 for e1, e2 in zip(errors, errors[1:]))

    def test_temporal_first_order(self, ms):
        _, diffs, orders = temporal_convergence(ms)
        assert len(orders) >= 2   # two dt halvings
        assert all(o >= 0.9 for o in orders), f"observed temporal orders {orders}"
        assert all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
