"""Reflectionless potentials in closed form.

With zero reflection the GLM kernel is a finite sum of exponentials, so the
integral equation collapses to one small block system per x (the separable
solve) and the scattering side of the problem is carried by a rational
unitary factor

    U(rho) = (I + 2 rho_N / (rho - rho_N) P_N) ... (I + 2 rho_1 / (rho - rho_1) P_1),

a product of Blaschke-type factors built from orthogonal projectors P_k, with
rho_k = i tau_k.  The projectors are chosen recursively so the residue of U
at each pole is an invertible multiple of the corresponding weight matrix;
D(rho) = U(rho)^{-1} is then the transmission denominator of the constructed
potential and is available in closed form (each factor inverts rationally).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mstl.domain import (
    EIG_CUTOFF_REL,
    NumericsError,
    SampledPotential,
    SpaceGrid,
    ValidationError,
    hermitian_pseudo_inverse,
    matrix_operator_norm,
    psd_margin,
)

_LOG_CLIP = 460.0  # exp stays finite and the saturated limit is exact to roundoff


@dataclass(frozen=True)
class ProjectorChain:
    """Ordered Blaschke factors (tau_k, P_k); factor k = 1 is applied first."""

    taus: tuple
    projectors: tuple

    @property
    def m(self) -> int:
        return self.projectors[0].shape[0]

    def __len__(self) -> int:
        return len(self.taus)


def _kernel_basis(n: np.ndarray, cutoff: float = EIG_CUTOFF_REL) -> np.ndarray:
    """Orthonormal basis of the null space of a Hermitian PSD matrix."""
    w, v = np.linalg.eigh(0.5 * (n + n.conj().T))
    thresh = cutoff * max(float(np.abs(w).max(initial=0.0)), 0.0)
    return v[:, np.abs(w) <= thresh]


def build_projector_chain(states) -> ProjectorChain:
    """Choose the projectors so each residue is C_k N_k with invertible C_k.

    ``states`` is a sequence of (tau, weight) with distinct positive taus and
    Hermitian PSD weights.  I - P_1 projects onto Ker N_1; for k > 1,
    I - P_k projects onto the image of Ker N_k under the partial product of
    the earlier factors at rho_k (orthonormalized before projecting).
    """
    taus = [float(t) for t, _ in states]
    weights = [np.asarray(n, dtype=complex) for _, n in states]
    if not taus:
        raise ValidationError("at least one bound state is required")
    m = weights[0].shape[0]
    if min(t for t in taus) <= 0:
        raise ValidationError("taus must be positive")
    gaps = [abs(a - b) for i, a in enumerate(taus) for b in taus[i + 1 :]]
    if gaps and min(gaps) < 1e-8 * max(taus):
        raise ValidationError("taus must be distinct")
    for n in weights:
        if psd_margin(n) < -1e-8 * (1.0 + matrix_operator_norm(n)):
            raise ValidationError("weights must be Hermitian positive semidefinite")

    projectors: list[np.ndarray] = []
    eye = np.eye(m, dtype=complex)
    for k in range(len(taus)):
        ker = _kernel_basis(weights[k])
        if ker.shape[1] == 0:
            projectors.append(eye.copy())
            continue
        # partial product of the earlier factors at rho_k, factor 1 rightmost
        v_k = eye
        for j in range(k - 1, -1, -1):
            c = 2.0 * taus[j] / (taus[k] - taus[j])
            v_k = v_k @ (eye + c * projectors[j])
        image = v_k @ ker
        onb, _ = np.linalg.qr(image)
        projectors.append(eye - onb @ onb.conj().T)

    chain = ProjectorChain(taus=tuple(taus), projectors=tuple(projectors))
    for k, (tau, n) in enumerate(zip(taus, weights)):
        res = _residue_of_chain(chain, k)
        pinv_n = hermitian_pseudo_inverse(n)
        proj_rows = res @ pinv_n @ n
        defect = matrix_operator_norm(res - proj_rows)
        if defect > 1e-8 * (1.0 + matrix_operator_norm(res)):
            raise NumericsError(
                f"residue at tau = {tau:g} is not a multiple of the weight (defect {defect:.3e})"
            )
    return chain


def _residue_of_chain(chain: ProjectorChain, k: int) -> np.ndarray:
    """Residue of U at rho_k from the factored form."""
    taus, projectors = chain.taus, chain.projectors
    m = chain.m
    eye = np.eye(m, dtype=complex)
    left = eye
    for j in range(len(taus) - 1, k, -1):
        c = 2.0 * taus[j] / (taus[k] - taus[j])
        left = left @ (eye + c * projectors[j])
    right = eye
    for j in range(k - 1, -1, -1):
        c = 2.0 * taus[j] / (taus[k] - taus[j])
        right = right @ (eye + c * projectors[j])
    return left @ (2j * taus[k] * projectors[k]) @ right


def residues_of_U(chain: ProjectorChain):
    """[(tau_k, Res U at i tau_k)] in chain order; these are the R_k^+ values."""
    return [(chain.taus[k], _residue_of_chain(chain, k)) for k in range(len(chain))]


def evaluate_U(chain: ProjectorChain, rho) -> np.ndarray:
    """The unitary factor at one or many spectral points (poles excluded)."""
    rho = np.asarray(rho, dtype=complex)
    scalar = rho.ndim == 0
    z = np.atleast_1d(rho)
    for tau in chain.taus:
        if np.any(np.abs(z - 1j * tau) < 1e-12):
            raise ValidationError(f"evaluation at the pole rho = {tau:g}i")
    m = chain.m
    eye = np.eye(m, dtype=complex)
    out = np.broadcast_to(eye, z.shape + (m, m)).copy()
    for k in range(len(chain) - 1, -1, -1):
        c = (2j * chain.taus[k]) / (z - 1j * chain.taus[k])
        factor = eye + c[:, None, None] * chain.projectors[k]
        out = out @ factor
    return out[0] if scalar else out


def reflectionless_D(chain: ProjectorChain):
    """Evaluator for D(rho) = U(rho)^{-1} in closed form.

    Each factor inverts rationally, (I + 2 rho_k/(rho - rho_k) P)^{-1}
    = I - 2 rho_k/(rho + rho_k) P, so D is analytic in the upper half-plane
    with det D vanishing exactly at the i tau_k.
    """
    m = chain.m
    eye = np.eye(m, dtype=complex)

    def d_of(rho):
        rho = np.asarray(rho, dtype=complex)
        scalar = rho.ndim == 0
        z = np.atleast_1d(rho)
        out = np.broadcast_to(eye, z.shape + (m, m)).copy()
        for k in range(len(chain)):
            c = (-2j * chain.taus[k]) / (z + 1j * chain.taus[k])
            out = out @ (eye + c[:, None, None] * chain.projectors[k])
        return out[0] if scalar else out

    return d_of


# ---------------------------------------------------------------------------
# separable GLM solve


def _solve_states_at(taus, weights, log_scales, x: float, m: int):
    """Kernel diagonal value and x-derivative at one point, in closed form.

    Works in the frame translated to the evaluation point, so only shifted
    log-weights s_k - 2 tau_k x enter; clipping them at +460 realizes the
    saturated limit of fully developed states without overflow.
    """
    n = len(taus)
    eye_m = np.eye(m, dtype=complex)
    exps = np.array([min(s - 2.0 * t * x, _LOG_CLIP) for s, t in zip(log_scales, taus)])
    scaled = [np.exp(e) * w for e, w in zip(exps, weights)]

    size = n * m
    g = np.zeros((size, size), dtype=complex)
    dg = np.zeros((size, size), dtype=complex)
    b = np.zeros((m, size), dtype=complex)
    db = np.zeros((m, size), dtype=complex)
    for k in range(n):
        cols = slice(k * m, (k + 1) * m)
        b[:, cols] = scaled[k]
        db[:, cols] = -2.0 * taus[k] * scaled[k]
        for j in range(n):
            rows = slice(j * m, (j + 1) * m)
            g[rows, cols] = scaled[k] / (taus[j] + taus[k])
            dg[rows, cols] = -2.0 * taus[k] * scaled[k] / (taus[j] + taus[k])
    a = np.eye(size, dtype=complex) + g

    try:
        lu = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"separable system singular at x = {x:g}: {exc}") from exc
    ell = -b @ lu
    dell = (-db - ell @ dg) @ lu

    # in the translated frame the y-basis is constant at the origin, so the
    # diagonal and its derivative are plain block sums
    diag = np.zeros((m, m), dtype=complex)
    ddiag = np.zeros((m, m), dtype=complex)
    for k in range(n):
        cols = slice(k * m, (k + 1) * m)
        diag += ell[:, cols]
        ddiag += dell[:, cols]
    return diag, ddiag


def separable_potential_values(states, xs, log_scales=None, side: str = "right"):
    """Q and the kernel diagonal at arbitrary points, by the closed-form solve.

    ``states`` is a sequence of (tau, weight); optional ``log_scales`` carry
    weight factors exp(s_k) in log form (the KdV flow grows them fast).
    Returns (q, diag) arrays of shape (len(xs), m, m).
    """
    taus = [float(t) for t, _ in states]
    weights = [np.asarray(n, dtype=complex) for _, n in states]
    if log_scales is None:
        log_scales = [0.0] * len(taus)
    m = weights[0].shape[0]
    xs = np.asarray(xs, dtype=float)
    solve_xs = -xs[::-1] if side == "left" else xs

    q = np.empty((xs.size, m, m), dtype=complex)
    diag = np.empty_like(q)
    for i, x in enumerate(solve_xs):
        d, dd = _solve_states_at(taus, weights, log_scales, float(x), m)
        q[i] = -2.0 * dd
        diag[i] = d
    if side == "left":
        q = q[::-1]
        diag = diag[::-1]
    q = 0.5 * (q + q.conj().transpose(0, 2, 1))
    return q, diag


def separable_glm_solve(states, side: str, x_grid: SpaceGrid, log_scales=None):
    """Exact reflectionless solve: transformation-kernel diagonal and potential.

    The potential is sampled at nodes and cell midpoints from the closed-form
    expression, so downstream propagation sees it at full accuracy.
    Returns (TransformKernel, SampledPotential).
    """
    from mstl.glm import TransformKernel

    if side not in ("right", "left"):
        raise ValidationError(f"unknown side {side!r}")
    q_nodes, diag = separable_potential_values(states, x_grid.xs, log_scales, side)
    q_cells, _ = separable_potential_values(states, x_grid.midpoints, log_scales, side)
    potential = SampledPotential(x_grid, q_nodes, cell_values=q_cells)
    kern = TransformKernel(
        side="plus" if side == "right" else "minus",
        xs=x_grid.xs,
        diag=diag,
        sigma_min_est=float("nan"),
        residual_max=0.0,
    )
    return kern, potential


def soliton_center(tau: float, weight: float) -> float:
    """Scalar one-soliton center: ln(c / (2 tau)) / (2 tau) for weight c."""
    return float(np.log(weight / (2.0 * tau)) / (2.0 * tau))
