"""Spinor transport along zero-energy orbits.

The amplitude of the leading kernel carries a unitary factor solving

    U'(t) = -(i/2) (alpha . grad V)(gamma(t)) / V(gamma(t)) U(t),   U(0) = 1,

along the connecting orbit gamma.  The generator is anti-hermitian, so U
stays unitary up to integrator error; we monitor the defect and only fall
back to a polar projection when it exceeds a reporting threshold.

In 1D the generator is proportional to the single alpha matrix and the
solution collapses to a rotation by the half-log phase

    theta = int V'(gamma)/(2 V(gamma)) dt,

which has the closed form (arcsin V(left end) - arcsin V(right end)) / 2,
independent of traversal direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .clifford import DomainError, projector
from .geoflow import NumericalError, OdeOpts


@dataclass(frozen=True)
class TransportResult:
    u_matrix: np.ndarray
    unitarity_defect: float
    projected: bool
    theta: float | None


def solve_spinor_transport(model, rep, traj, opts=None, project_tol=1e-9):
    """Integrate the transport equation along a trajectory, returning U(tau).

    unitarity_defect is the Frobenius norm of U*U - 1 before any repair;
    a polar projection is applied only when it exceeds project_tol.
    """
    opts = (opts or OdeOpts()).tightened()
    n = rep.dstar

    def rhs(t, y):
        u = y.reshape(n, n)
        x = traj.position(t)
        v, grad, _ = model.evaluate(x)
        gen = rep.alpha_dot(grad) * (-0.5j / v)
        return (gen @ u).ravel()

    y0 = np.eye(n, dtype=complex).ravel()
    sol = solve_ivp(rhs, (0.0, traj.tau), y0, **opts.solver_kwargs())
    if not sol.success:
        raise NumericalError(f"spinor transport failed: {sol.message}")
    u_end = sol.y[:, -1].reshape(n, n)

    defect = float(np.linalg.norm(u_end.conj().T @ u_end - np.eye(n)))
    projected = False
    if defect > project_tol:
        # polar factor: closest unitary in Frobenius norm
        w, _, vh = np.linalg.svd(u_end)
        u_end = w @ vh
        projected = True

    theta = traj.theta_end if traj.has_theta else None
    return TransportResult(u_matrix=u_end, unitarity_defect=defect,
                           projected=projected, theta=theta)


def theta_1d(model, a, b):
    """Closed-form 1D half-log phase between two points.

    Equals (arcsin V(left) - arcsin V(right)) / 2 with left/right the
    smaller/larger coordinate; traversal direction does not enter.
    """
    if model.dim != 1:
        raise DomainError("the closed-form phase is 1D only")
    lo, hi = (a, b) if a <= b else (b, a)
    v_lo = model.value(np.atleast_1d(np.asarray(lo, dtype=float)))
    v_hi = model.value(np.atleast_1d(np.asarray(hi, dtype=float)))
    return 0.5 * (math.asin(v_lo) - math.asin(v_hi))


def rotation_1d(rep, theta):
    """U = cos(theta) 1 - i sin(theta) alpha_1, the 1D transport in closed form."""
    if rep.dstar != 2:
        raise DomainError("closed-form rotation applies to the 1D representation")
    return math.cos(theta) * np.eye(2, dtype=complex) - 1j * math.sin(theta) * rep.alphas[0]


def transport_matrix(model, rep, geo, u_matrix):
    """Projected amplitude matrix M = (-V(y)) U(tau) P_plus(i omega(0)).

    Returns (M, residual) where residual checks the equivalent left-side
    form M = (-V(x)) P_plus(i omega(tau)) alpha_0 M, a structural identity
    of the transported projector; both are relative Frobenius quantities.
    """
    p0 = geo.p0
    p_end = geo.trajectory.p_end
    proj_start = projector(rep, 1j * p0)
    m = (-model.value(geo.y_star)) * (u_matrix @ proj_start.lambda_plus)
    proj_end = projector(rep, 1j * p_end)
    left = (-model.value(geo.x_star)) * (proj_end.lambda_plus @ rep.alpha0 @ m)
    scale = max(float(np.linalg.norm(m)), 1e-300)
    residual = float(np.linalg.norm(m - left)) / scale
    return m, residual
