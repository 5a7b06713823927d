import numpy as np
import pytest

from mstl import glm, solitons
from mstl.domain import (
    BoundState,
    InconsistentDataError,
    RhoGrid,
    ScatteringData,
    SpaceGrid,
    ValidationError,
)


def soliton_kernel(tau=1.0, weight=2.0, m=1, direction=None):
    proj = np.eye(m, dtype=complex)
    if direction is not None:
        v = np.asarray(direction, dtype=complex)
        v = v / np.linalg.norm(v)
        proj = np.outer(v, v.conj())
    u = np.linspace(-4.0, 30.0, 18)
    return glm.GLMKernelFunction(
        side="right", u_grid=u, R=np.zeros((18, m, m), complex),
        states=((tau, weight * proj),),
    )


def test_fourier_kernel_zero(soliton_data):
    zero = ScatteringData(side="right", rho_grid=soliton_data.rho_grid,
                          S=np.zeros_like(soliton_data.S))
    u = np.linspace(-5, 5, 41)
    assert np.abs(glm.fourier_kernel(zero, u)).max() == 0.0


def test_fourier_kernel_single_pole():
    # S(rho) = c / (rho - i a) has transform i c exp(-a u) on u > 0
    rg = RhoGrid(40.0, 2048)
    a, c = 1.0, 0.01
    s = (c / (rg.nodes - 1j * a))[:, None, None]
    data = ScatteringData(side="right", rho_grid=rg, S=s)
    u = np.array([0.5, 1.0, 2.0])
    r = glm.fourier_kernel(data, u)[:, 0, 0]
    expect = 1j * c * np.exp(-a * u)
    # window truncation bounds the quadrature error by ~ c / (pi rho_max u)
    assert np.abs(r - expect).max() < 1.5e-4


def test_fourier_kernel_hermitian_and_oracle(box_setup, box_forward):
    _, _, rho_grid = box_setup
    u = np.arange(-6.0, 6.0, 0.05)
    r = glm.fourier_kernel(box_forward.j_plus, u)
    assert np.abs(r - r.conj().transpose(0, 2, 1)).max() < 1e-12
    # dense-quadrature oracle: same integral on a twice-refined spectral grid
    rg2 = RhoGrid(rho_grid.rho_max, 2 * rho_grid.n_half)
    nodes = rg2.nodes
    from tests.conftest import box_oracle

    a_or, b_or = box_oracle(nodes)
    s_plus = -np.conj(b_or) / np.conj(a_or[::-1])
    dense = (rg2.step / (2 * np.pi)) * np.tensordot(
        np.exp(1j * np.outer(u, nodes)), s_plus[:, None, None], axes=(1, 0)
    )
    assert np.abs(r - dense).max() < 1e-4


def test_assemble_M_pure_bound_state(soliton_data):
    u = np.arange(-2.0, 25.0, 0.1)
    kern = glm.assemble_M(soliton_data, u)
    expect = 2.0 * np.exp(-u)
    assert np.abs(kern(u)[:, 0, 0] - expect).max() < 1e-12
    assert np.abs(kern.derivative(u)[:, 0, 0] + expect).max() < 1e-12


def test_assemble_M_without_states_is_fourier(bump_forward):
    u = np.arange(-4.0, 4.0, 0.1)
    kern = glm.assemble_M(bump_forward.j_plus, u)
    assert np.allclose(kern(u), glm.fourier_kernel(bump_forward.j_plus, u))


def test_kernel_decay_integrals(soliton_data):
    u = np.arange(-2.0, 25.0, 0.05)
    kern = glm.assemble_M(soliton_data, u)
    i0, i1 = kern.decay_integrals()
    # M = 2 exp(-u): int_0^inf ||M|| = 2, int (1+u) ||M'|| = 4
    assert i0 == pytest.approx(2.0, rel=1e-3)
    assert i1 == pytest.approx(4.0, rel=1e-2)


def test_mirrored_kernel():
    u = np.arange(-3.0, 10.0, 0.5)
    left = glm.GLMKernelFunction(
        side="left", u_grid=u, R=np.exp(u)[:, None, None] + 0j,
        states=((1.0, np.array([[2.0 + 0j]])),),
    )
    mir = left.mirrored()
    probe = np.array([-1.3, 0.4, 2.0])
    assert np.abs(mir(probe) - left(-probe)).max() < 1e-12


def test_gregory_weights_integrate_exactly():
    n, du = 41, 0.1
    w = glm.gregory_weights(n, du)
    xs = du * np.arange(n)
    assert np.sum(w) == pytest.approx(xs[-1])
    for p in (1, 2, 3):
        assert np.sum(w * xs**p) == pytest.approx(xs[-1] ** (p + 1) / (p + 1), rel=1e-10)


def test_solve_zero_kernel():
    kern = glm.GLMKernelFunction(side="right", u_grid=np.linspace(-1, 10, 12),
                                 R=np.zeros((12, 1, 1), complex), states=())
    row = glm.solve_glm_nystrom(kern, 0.0, 0.05 * np.arange(100))
    assert np.abs(row.K).max() == 0.0
    assert row.sigma_min_est == 1.0


def test_solve_soliton_row():
    kern = soliton_kernel()
    y = 0.05 * np.arange(int(25 / 0.05) + 1)
    row = glm.solve_glm_nystrom(kern, 0.0, y)
    assert np.abs(row.diag[0, 0] + 1.0) < 1e-5
    assert np.abs(row.K[:, 0, 0] + np.exp(-y)).max() < 1e-5
    assert row.residual < 1e-10
    # estimated smallest singular value against the exact spectrum
    sw = np.sqrt(row.weights)
    mat = np.eye(len(y)) + (sw[:, None] * kern(y[:, None] + y[None, :])[:, :, 0, 0]) * sw[None, :]
    exact = float(np.linalg.eigvalsh(mat).min())
    assert 0.2 * exact <= row.sigma_min_est <= 5.0 * exact
    assert row.sigma_min_est >= 1e-6


def test_solve_rank_one_matrix_case():
    kern = soliton_kernel(m=2, direction=[1.0, 1.0])
    y = 0.05 * np.arange(int(25 / 0.05) + 1)
    row = glm.solve_glm_nystrom(kern, 0.0, y)
    proj = np.full((2, 2), 0.5)
    assert np.abs(row.diag + proj).max() < 1e-5


def test_separable_equals_nystrom():
    states = [(1.0, np.array([[2.0 + 0j]]))]
    kern = soliton_kernel()
    x, du = 0.3, 0.0125
    y = x + du * np.arange(int(28 / du) + 1)
    row = glm.solve_glm_nystrom(kern, x, y)
    grid = SpaceGrid(x, du, len(y))
    tk, _ = solitons.separable_glm_solve(states, "right", grid)
    # closed form K(x, y) = L(x) exp(-tau y): compare the whole row
    ell = tk.diag[0][0, 0] * np.exp(x)
    assert np.abs(row.K[:, 0, 0] - ell * np.exp(-y)).max() < 1e-8


def test_residual_probe_off_nodes():
    kern = soliton_kernel()
    y = 0.05 * np.arange(int(25 / 0.05) + 1)
    row = glm.solve_glm_nystrom(kern, 0.0, y)
    probe = np.array([0.513, 1.777, 3.404])
    # bounded by the linear-interpolation error of K between Nystrom nodes
    assert glm.glm_residual_probe(kern, row, probe) < 5e-3


def test_transform_kernel_and_recover():
    kern = soliton_kernel()
    xs = np.arange(0.0, 4.0 + 1e-9, 0.05)
    tk = glm.solve_transform_kernel(kern, xs, 0.05)
    expect_diag = -2.0 * np.exp(-2 * xs) / (1 + np.exp(-2 * xs))
    assert np.abs(tk.diag[:, 0, 0] - expect_diag).max() < 1e-5
    rec = glm.recover_potential(tk)
    assert rec.trusted == "right"
    exact = -2.0 / np.cosh(xs) ** 2
    err = np.abs(rec.potential.values[:, 0, 0] - exact)
    # boundary nodes fall back to one-sided second-order differences
    assert err[2:-2].max() < 1e-3
    assert err.max() < 5e-3
    assert rec.hermiticity_defect < 1e-8


def test_potential_value_pointwise():
    kern = soliton_kernel()
    y = 0.05 * np.arange(int(26 / 0.05) + 1)
    q, sigma, residual = glm.potential_value_at(kern, 0.0, y)
    assert abs(q[0, 0] + 2.0) < 1e-5
    assert sigma > 1e-6 and residual < 1e-10


def test_invert_zero_data():
    rg = RhoGrid(8.0, 32)
    data = ScatteringData(side="right", rho_grid=rg, S=np.zeros((rg.n, 1, 1), complex))
    grid = SpaceGrid.from_bounds(-4.0, 4.0, 0.05)
    out = glm.invert(data, grid=grid)
    assert np.abs(out.potential.values).max() <= 1e-10


def test_invert_one_soliton_quick(soliton_data):
    grid = SpaceGrid.from_bounds(-6.0, 6.0, 0.04)
    out = glm.invert(soliton_data, grid=grid, du=0.12)
    exact = -2.0 / np.cosh(grid.xs) ** 2
    assert np.abs(out.potential.values[:, 0, 0] - exact).max() < 1e-3
    assert out.overlap_gap < 1e-3


def test_invert_requires_left_data_for_matrix_reflection(bump_forward):
    with pytest.raises(ValidationError, match="left scattering data"):
        glm.invert(bump_forward.j_plus, grid=SpaceGrid.from_bounds(-4.0, 4.0, 0.05))


def test_invert_flags_inconsistent_sides(soliton_data):
    # a wrong left weight makes the two reconstructions disagree at the origin
    bad_left = ScatteringData(
        side="left", rho_grid=soliton_data.rho_grid, S=np.zeros_like(soliton_data.S),
        bound_states=(BoundState(tau=1.0, weight=np.array([[50.0 + 0j]]), side="left"),),
    )
    grid = SpaceGrid.from_bounds(-5.0, 5.0, 0.05)
    with pytest.raises(InconsistentDataError):
        glm.invert(soliton_data, bad_left, grid=grid, du=0.15)


def test_roundtrip_matrix_with_reflection_and_bound_state():
    # reflection and a bound state in one 2x2 potential: the kernel mixes the
    # Fourier part with the bound-state exponentials on both sides
    from mstl import forward

    grid = SpaceGrid.from_bounds(-8.0, 8.0, 0.04)
    v = np.array([1.0, 0.5j])
    v = v / np.linalg.norm(v)
    proj = np.outer(v, v.conj())

    def profile(x):
        bump = 0.6 * np.exp(-((x - 0.8) ** 2) / 0.8) * np.array([[1.0, 0.3], [0.3, 0.5]])
        return bump - 1.8 / np.cosh(1.2 * (x + 0.5)) ** 2 * proj

    from mstl.domain import SampledPotential

    q = SampledPotential.from_profile(grid, profile)
    fwd = forward.full_forward(q, RhoGrid(30.0, 512), 5.0)
    assert len(fwd.j_plus.taus) == 1
    out = glm.invert(fwd.j_plus, fwd.j_minus, grid=grid)
    diff = np.abs(out.potential.values - q.values).max(axis=(1, 2))
    ref = np.abs(q.values).max(axis=(1, 2))
    rel = np.trapezoid(diff, dx=grid.dx) / np.trapezoid(ref, dx=grid.dx)
    assert rel <= 5e-3


def test_roundtrip_box(box_setup, box_forward):
    grid, box, _ = box_setup
    # the step edges put spectral content out to the window edge; the solve
    # grid du must resolve it (Nyquist pi/du above the effective bandwidth)
    out = glm.invert(box_forward.j_plus, box_forward.j_minus, grid=grid, du=0.04)
    diff = np.abs(out.potential.values - box.values).max(axis=(1, 2))
    ref = np.abs(box.values).max(axis=(1, 2))
    rel = np.trapezoid(diff, dx=grid.dx) / np.trapezoid(ref, dx=grid.dx)
    assert rel <= 0.02
