import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaflow.directions import make_global_directions
from deltaflow.errors import SingularSystem
from deltaflow.meshes import quad_grid, unit_square
from deltaflow.solve import neumann_partial, solve_stationary
from deltaflow.sources import LineSource, coordinate_selector, project_line_source
from deltaflow.transfer import UniformRule, assemble, discretize

MU = math.pi / 2


def parallel_wall_system(mu=MU, L=4, h=1.0):
    disc = discretize(unit_square(mu=mu), make_global_directions(L), h)
    B = assemble(disc)
    rho0 = project_line_source(LineSource(coordinate_selector(x=0)), disc)
    return disc, B, rho0


def test_parallel_wall_geometric_series(square_l4):
    disc, B, rho0 = parallel_wall_system()
    rho, rep = solve_stationary(B, rho0, "direct")
    left, right = disc.block(0, 3).offset, disc.block(0, 1).offset
    q = math.exp(-MU)
    assert rho[left] == pytest.approx(1 / (1 - q * q), rel=1e-14)
    assert rho[right] == pytest.approx(q / (1 - q * q), rel=1e-14)
    assert rep.residual <= 1e-10


def test_zero_operator_returns_source():
    rho0 = np.arange(5.0)
    rho, _ = solve_stationary(sp.csr_matrix((5, 5)), rho0, "direct")
    np.testing.assert_array_equal(rho, rho0)
    rho, _ = solve_stationary(sp.csr_matrix((5, 5)), rho0, "iterative")
    np.testing.assert_allclose(rho, rho0)


def test_lossless_closed_domain_is_singular():
    disc, B, rho0 = parallel_wall_system(mu=0.0)
    with pytest.raises(SingularSystem):
        solve_stationary(B, rho0, "direct")


def test_neumann_partial_terms():
    disc, B, rho0 = parallel_wall_system()
    np.testing.assert_array_equal(neumann_partial(B, rho0, 0), rho0)
    one = neumann_partial(B, rho0, 1)
    np.testing.assert_allclose(one, rho0 + B.matrix @ rho0)
    assert one[disc.block(0, 1).offset] == pytest.approx(math.exp(-MU))
    rho, _ = solve_stationary(B, rho0)
    np.testing.assert_allclose(neumann_partial(B, rho0, 60), rho, rtol=1e-12)


@settings(max_examples=10)
@given(st.integers(5, 40), st.floats(0.05, 1.0), st.floats(0.0, 0.6))
def test_direct_and_iterative_agree(L, mu, r):
    md = quad_grid(3, mu=mu)
    disc = discretize(md, make_global_directions(L, offset=True), 0.1)
    B = assemble(disc, UniformRule(reflection=r, transmission=1 - r))
    rho0 = project_line_source(LineSource(coordinate_selector(x=0), theta0=0.1), disc)
    a, ra = solve_stationary(B, rho0, "direct")
    b, rb = solve_stationary(B, rho0, "iterative")
    assert ra.residual <= 1e-10 and rb.residual <= 1e-10
    np.testing.assert_allclose(b, a, rtol=1e-8, atol=1e-8 * np.abs(a).max())
    # the Neumann series approaches the solution from below
    prev = rho0
    for n in (1, 3, 9):
        cur = neumann_partial(B, rho0, n)
        assert np.all(cur >= prev - 1e-15)
        assert np.all(cur <= a * (1 + 1e-9) + 1e-15)
        prev = cur
