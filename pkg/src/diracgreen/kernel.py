"""Leading small-h Green kernel assembly and the constant-potential check.

The off-diagonal Green kernel of alpha . (-i h grad) + alpha_0 + V decays
like exp(-d_A(x,y)/h) with d_A the conformal distance; the leading matrix
amplitude is assembled here from four independently computed pieces: the
distance, the exponential-map Jacobian determinant, the spinor transport
unitary, and the spectral projection at the arrival momentum.

For constant potential the kernel is an exact Bessel-type expression in
closed form, which makes it the natural end-to-end validation target: the
ratio of the exact kernel to the assembled leading term must tend to 1
linearly in h.  The modified Bessel functions are evaluated in-house at the
three half-integer-or-integer orders that occur (1/2, 1, 3/2), with an
independent quadrature oracle for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from .clifford import DomainError, negate_rep
from .geoflow import (ConjugatePointError, NumericalError, OdeOpts, ShootOpts,
                      shoot_geodesic)
from .potential import make_potential
from .transport import (TransportResult, rotation_1d, solve_spinor_transport,
                        transport_matrix)

_EULER_GAMMA = 0.57721566490153286060651209008240243

# ascending series below this point, Steed continued fraction above; the
# series terms (rho^2/4)^k/(k!)^2 are all <= 1 here so no cancellation
_BESSEL_SPLIT = 2.0


def _bessel_k01_series(rho):
    """K_0 and K_1 by the ascending series, reliable for rho <= 2."""
    q = 0.25 * rho * rho
    log_half = math.log(0.5 * rho)
    # psi(1), psi(2) and the running factorial weights at k = 0
    psi_a = -_EULER_GAMMA
    psi_b = 1.0 - _EULER_GAMMA
    term0 = 1.0          # q^k / (k!)^2
    term1 = 1.0          # q^k / (k! (k+1)!)
    i0 = 0.0
    i1 = 0.0
    k0_sum = 0.0
    k1_sum = 0.0
    for k in range(0, 60):
        i0 += term0
        i1 += term1
        k0_sum += term0 * (psi_a + _EULER_GAMMA)     # = term0 * H_k
        k1_sum += term1 * (psi_a + psi_b)
        if term0 < 1e-20 and k > 3:
            break
        psi_a = psi_b
        psi_b += 1.0 / (k + 2)
        term0 *= q / ((k + 1) * (k + 1))
        term1 *= q / ((k + 1) * (k + 2))
    i1 *= 0.5 * rho
    k0 = -(log_half + _EULER_GAMMA) * i0 + k0_sum
    k1 = log_half * i1 + 1.0 / rho - 0.25 * rho * k1_sum
    return k0, k1


def _bessel_k01_steed(rho, eps=1e-16, max_iter=10000):
    """K_0 and K_1 by Steed's continued fraction, reliable for rho > 2."""
    b = 2.0 * (1.0 + rho)
    d = 1.0 / b
    h = delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, max_iter + 1):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) <= eps:
            break
    else:
        raise NumericalError("continued fraction for K_0, K_1 did not converge")
    h = a1 * h
    k0 = math.sqrt(math.pi / (2.0 * rho)) * math.exp(-rho) / s
    k1 = k0 * (rho + 0.5 - h) / rho
    return k0, k1


def _bessel_k01(rho):
    if rho <= _BESSEL_SPLIT:
        return _bessel_k01_series(rho)
    return _bessel_k01_steed(rho)


_BESSEL_ORDERS = (0.0, 0.5, 1.0, 1.5)


def bessel_K(nu, rho):
    """Modified Bessel K_nu(rho) for nu in {0, 1/2, 1, 3/2}, rho > 0."""
    rho = float(rho)
    if rho <= 0.0:
        raise DomainError(f"bessel_K requires rho > 0, got {rho}")
    if nu == 0.5:
        return math.sqrt(math.pi / (2.0 * rho)) * math.exp(-rho)
    if nu == 1.5:
        return math.sqrt(math.pi / (2.0 * rho)) * math.exp(-rho) * (1.0 + 1.0 / rho)
    if nu == 0.0:
        return _bessel_k01(rho)[0]
    if nu == 1.0:
        return _bessel_k01(rho)[1]
    raise DomainError(f"unsupported order {nu}; supported: {_BESSEL_ORDERS}")


def bessel_K_prime(nu, rho):
    """d/drho K_nu(rho) via K_nu' = -(K_(nu-1) + K_(nu+1))/2 and recurrences."""
    rho = float(rho)
    if rho <= 0.0:
        raise DomainError(f"bessel_K_prime requires rho > 0, got {rho}")
    if nu == 0.5:
        return -0.5 * (bessel_K(0.5, rho) + bessel_K(1.5, rho))
    if nu == 1.0:
        k0, k1 = _bessel_k01(rho)
        return -k0 - k1 / rho
    if nu == 1.5:
        return -bessel_K(0.5, rho) - 1.5 * bessel_K(1.5, rho) / rho
    if nu == 0.0:
        return -_bessel_k01(rho)[1]
    raise DomainError(f"unsupported order {nu}; supported: {_BESSEL_ORDERS}")


def bessel_K_oracle(nu, rho):
    """Independent quadrature int_0^inf exp(-rho cosh t) cosh(nu t) dt.

    The integrand is scaled by exp(rho) so it is O(1) and the absolute
    quadrature tolerance stays meaningful for large rho.
    """
    rho = float(rho)
    if rho <= 0.0:
        raise DomainError(f"bessel_K_oracle requires rho > 0, got {rho}")
    # past t_max the scaled integrand underflows to zero
    t_max = math.acosh(1.0 + 760.0 / rho)

    def integrand(t):
        return math.exp(rho * (1.0 - math.cosh(t))) * math.cosh(nu * t)

    val, _ = quad(integrand, 0.0, t_max, epsabs=1e-15, epsrel=1e-13, limit=400)
    return float(val) * math.exp(-rho)


def constant_V_exact(rep, e_value, x, y, h):
    """Exact Green kernel G(x, y; h) for constant potential E, d in {1, 2, 3}.

    G = (1-E^2)^(d/4) (2 pi)^(-d/2) h^(-d) (r/h)^(1-d/2)
        { -i (alpha.u) K'_(d/2)(kr/h)
          + (alpha_0 - E + i h (d/2-1)(alpha.u)/r) K_(d/2)(kr/h)/k },

    with k = sqrt(1-E^2), r = |x-y|, u the unit vector from y to x.
    """
    d = rep.dim
    if d not in (1, 2, 3):
        raise DomainError("constant-potential closed form covers d in {1, 2, 3}")
    e_value = float(e_value)
    if not -1.0 < e_value < 1.0:
        raise DomainError(f"constant level must satisfy |E| < 1, got {e_value}")
    if h <= 0.0:
        raise DomainError(f"h must be positive, got {h}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    sep = x - y
    r = float(np.linalg.norm(sep))
    if r == 0.0:
        raise DomainError("the kernel diverges on the diagonal; x and y must differ")
    u_hat = sep / r
    kappa = math.sqrt(1.0 - e_value * e_value)
    rho = kappa * r / h
    nu = d / 2.0
    k_val = bessel_K(nu, rho)
    k_der = bessel_K_prime(nu, rho)
    alpha_u = rep.alpha_dot(u_hat)
    eye = np.eye(rep.dstar)
    mat = (-1j * alpha_u * k_der
           + (rep.alpha0 - e_value * eye + 1j * h * (nu - 1.0) * alpha_u / r)
           * (k_val / kappa))
    scale = ((1.0 - e_value * e_value) ** (d / 4.0)
             * (2.0 * math.pi) ** (-d / 2.0) * h ** (-d) * (r / h) ** (1.0 - d / 2.0))
    return scale * mat


@dataclass(frozen=True)
class KernelEstimate:
    """Leading kernel G(x, y; h) ~ prefactor * amplitude."""

    matrix: np.ndarray
    h: float
    agmon: float
    prefactor: float
    amplitude: np.ndarray
    transport: TransportResult | None
    left_identity_residual: float


def _prefactor(dim, v_x, v_y, dep, agmon, h):
    conf = ((1.0 - v_x * v_x) ** ((dim - 2) / 4.0)
            * (1.0 - v_y * v_y) ** ((dim - 2) / 4.0))
    tail = (2.0 * math.pi * agmon / h) ** (-(dim - 1) / 2.0)
    return conf / math.sqrt(dep) * math.exp(-agmon / h) * tail / h ** dim


def leading_kernel_multid(model, rep, geo, h, transport=None, opts=None):
    """Assemble the leading kernel at a solved connection, d >= 2."""
    if model.dim < 2 or rep.dim != model.dim:
        raise DomainError("multi-d assembly needs matching dimension >= 2")
    if h <= 0.0:
        raise DomainError(f"h must be positive, got {h}")
    if geo.conjugate_flag or geo.det_exp_prime is None:
        raise ConjugatePointError(
            "refusing to assemble the kernel at near-conjugate endpoints")
    if transport is None:
        transport = solve_spinor_transport(model, rep, geo.trajectory, opts)
    amplitude, left_res = transport_matrix(model, rep, geo, transport.u_matrix)
    pref = _prefactor(model.dim, model.value(geo.x_star), model.value(geo.y_star),
                      geo.det_exp_prime, geo.agmon, h)
    return KernelEstimate(matrix=pref * amplitude, h=float(h), agmon=geo.agmon,
                          prefactor=pref, amplitude=amplitude, transport=transport,
                          left_identity_residual=left_res)


def leading_kernel_1d(model, rep, x, y, h, geo=None, opts=None, shoot_opts=None):
    """Leading kernel in 1D, with the transport in rotation closed form."""
    if model.dim != 1 or rep.dim != 1:
        raise DomainError("leading_kernel_1d needs a 1D model and representation")
    if h <= 0.0:
        raise DomainError(f"h must be positive, got {h}")
    if geo is None:
        geo = shoot_geodesic(model, np.atleast_1d(float(y)), np.atleast_1d(float(x)),
                             opts, shoot_opts)
    theta = geo.trajectory.theta_end
    u_rot = rotation_1d(rep, theta)
    transport = TransportResult(u_matrix=u_rot, unitarity_defect=0.0,
                                projected=False, theta=theta)
    amplitude, left_res = transport_matrix(model, rep, geo, u_rot)
    pref = _prefactor(1, model.value(geo.x_star), model.value(geo.y_star),
                      1.0, geo.agmon, h)
    return KernelEstimate(matrix=pref * amplitude, h=float(h), agmon=geo.agmon,
                          prefactor=pref, amplitude=amplitude, transport=transport,
                          left_identity_residual=left_res)


def _negated_model(model):
    params = dict(model.params)
    if model.kind == "constant":
        params["value"] = -params["value"]
    elif model.kind in ("bump_well", "cosine_well"):
        params["base"] = -params["base"]
        params["depth"] = -params["depth"]
    else:
        params["base"] = -params["base"]
        params["amp"] = -params["amp"]
    return make_potential(model.dim, model.kind, params,
                          window=model.window, box_half=model.box_half)


def positive_potential_kernel(model, rep, x, y, h, opts=None, shoot_opts=None):
    """Leading kernel for a potential inside the upper gap, V in (0, 1).

    Flipping the signs of the representation and the potential turns the
    operator into minus a lower-gap operator, so its kernel is minus the
    standard assembly on (-V) with the negated matrices.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if model.value(y) <= 0.0 or model.value(x) <= 0.0:
        raise DomainError("positive_potential_kernel expects V > 0 at the endpoints")
    neg_model = _negated_model(model)
    neg_rep = negate_rep(rep)
    if model.dim == 1:
        est = leading_kernel_1d(neg_model, neg_rep, x[0], y[0], h,
                                opts=opts, shoot_opts=shoot_opts)
    else:
        geo = shoot_geodesic(neg_model, y, x, opts, shoot_opts)
        est = leading_kernel_multid(neg_model, neg_rep, geo, h, opts=opts)
    return replace(est, matrix=-est.matrix, amplitude=-est.amplitude)


@dataclass(frozen=True)
class RatioSweep:
    """Exact-over-leading scalar ratios across an h sweep."""

    e_value: float
    r: float
    agmon: float
    det_exp_prime: float
    h_list: tuple
    ratios: tuple
    deviations: tuple
    estimates: tuple
    slope: float
    intercept: float


def ratio_sweep(rep, e_value, x, y, h_list, opts=None, shoot_opts=None):
    """Compare the exact constant-potential kernel with the full assembly.

    The leading term is produced by the complete pipeline (shoot, Jacobi
    determinant, transport) on a constant model, never by the closed form.
    The scalar ratio is the Frobenius projection

        R(h) = <G_lead, G_exact> / <G_lead, G_lead>,

    and |R - 1| is fitted with a log-log line whose slope estimates the
    order of the first correction.
    """
    d = rep.dim
    e_value = float(e_value)
    if not -1.0 < e_value < 0.0:
        raise DomainError(f"the sweep needs a gap level E in (-1, 0), got {e_value}")
    h_list = [float(h) for h in h_list]
    if len(h_list) < 2:
        raise DomainError("need at least two h values to fit a slope")
    if any(h <= 0.0 for h in h_list):
        raise DomainError("all h values must be positive")
    model = make_potential(d, "constant", {"value": e_value})
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    geo = shoot_geodesic(model, y, x, opts, shoot_opts)
    transport = None
    if d >= 2:
        transport = solve_spinor_transport(model, rep, geo.trajectory, opts)

    ratios = []
    deviations = []
    estimates = []
    for h in h_list:
        if d == 1:
            lead = leading_kernel_1d(model, rep, x[0], y[0], h, geo=geo)
        else:
            lead = leading_kernel_multid(model, rep, geo, h, transport=transport)
        exact = constant_V_exact(rep, e_value, x, y, h)
        norm2 = float(np.vdot(lead.matrix, lead.matrix).real)
        exact_norm = float(np.linalg.norm(exact))
        if math.sqrt(norm2) < 1e-14 * exact_norm:
            raise NumericalError(
                f"degenerate leading kernel at h = {h}: no scalar ratio")
        ratio = complex(np.vdot(lead.matrix, exact)) / norm2
        ratios.append(ratio)
        deviations.append(abs(ratio - 1.0))
        estimates.append(lead)

    r = float(np.linalg.norm(x - y))
    if all(dev > 0.0 for dev in deviations):
        coeffs = np.polyfit(np.log(h_list), np.log(deviations), 1)
        slope, intercept = float(coeffs[0]), float(coeffs[1])
    else:
        slope, intercept = 0.0, 0.0
    return RatioSweep(e_value=e_value, r=r, agmon=geo.agmon,
                      det_exp_prime=1.0 if d == 1 else geo.det_exp_prime,
                      h_list=tuple(h_list), ratios=tuple(ratios),
                      deviations=tuple(deviations), estimates=tuple(estimates),
                      slope=slope, intercept=intercept)
