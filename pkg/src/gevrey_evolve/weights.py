"""Phase-weight ingredients: smooth cutoffs, spatial weights, time weight.

The spatial weights are integrals of decaying coefficients against a smooth
window,

    lam2(x, xi) = M2 w(xi/h) * integral_0^x <y>^-sigma  psi(<y>/<xi>_h^2) dy,
    lam1(x, xi) = M1 w(xi/h) <xi>_h^-1
                  * integral_0^x <y>^-sigma/2 psi(<y>/<xi>_h^2) dy,

where psi is an even C^inf window equal to 1 on [0, 1/2] and 0 beyond 1,
and w is a smooth sign selector vanishing for |xi| <= h and saturating at
-sgn(d_xi a3) beyond R_a3 h.  Both cutoffs are built from the normalized
antiderivative of the classical bump exp(-1/(1-u^2)) (order-2 Gevrey),
represented once as a Chebyshev series so evaluation is vectorized, smooth
and reproducible.

The weight integrals split into an exact hypergeometric antiderivative on
the region where psi == 1 plus Gauss-Legendre panels across the window
roll-off; the quadrature budget is well below 1e-10 absolute.

The time weight solves k' + C1 k + C2 = 0 in closed form and must stay
positive on the horizon; C1, C2 are measured constants fed back by the
positivity module.
"""

from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from scipy import special

from .errors import ConfigurationError, ParameterError
from .grid import bracket_h

# ----------------------------------------------------------------------
# smooth step from the classical bump, as a Chebyshev series
# ----------------------------------------------------------------------

_STEP_DEGREE = 360


def _build_step_series():
    deg = _STEP_DEGREE
    nodes = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        vals = np.where(np.abs(nodes) < 1.0,
                        np.exp(-1.0 / np.maximum(1.0 - nodes ** 2, 1e-300)), 0.0)
    coef = _cheb.chebfit(nodes, vals, deg)
    integral = _cheb.chebint(coef, lbnd=-1.0)
    total = _cheb.chebval(1.0, integral)
    return integral / total


_STEP_SERIES = _build_step_series()
_STEP_DERIVS = [_STEP_SERIES]
for _ in range(3):
    _STEP_DERIVS.append(_cheb.chebder(_STEP_DERIVS[-1]))


def smooth_step(u, derivative=0):
    """Monotone C^inf step: 0 for u <= -1, 1 for u >= 1 (Gevrey order 2)."""
    u = np.asarray(u, dtype=float)
    inside = np.clip(u, -1.0, 1.0)
    out = _cheb.chebval(inside, _STEP_DERIVS[derivative])
    if derivative == 0:
        return np.where(u <= -1.0, 0.0, np.where(u >= 1.0, 1.0, out))
    return np.where((np.abs(u) >= 1.0), 0.0, out)


def cutoff_psi(y, derivative=0):
    """Even window: 1 for |y| <= 1/2, 0 for |y| >= 1, smooth in between.

    With derivative=k returns d^k psi / dy^k; the window rolls off on
    1/2 < |y| < 1 through the rescaled smooth step S(4|y| - 3).
    """
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    if derivative == 0:
        return 1.0 - smooth_step(4.0 * a - 3.0)
    val = -(4.0 ** derivative) * smooth_step(4.0 * a - 3.0, derivative=derivative)
    if derivative % 2 == 0:
        return val
    sgn = np.where(y < 0.0, -1.0, 1.0)
    return val * sgn


# ----------------------------------------------------------------------
# weight parameters
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class WeightParams:
    """All tunable constants of the conjugation phase.

    domain_cap is the <x> scale of the periodic box; the weight integrand is
    rolled off smoothly before the seam so that spatial derivatives of the
    phase stay periodic-smooth (infinite by default: no roll-off)."""

    M2: float
    M1: float
    h: float
    k0: float
    sigma: float
    theta: float
    C1: float = 0.0
    C2: float = 0.0
    mu: float = 2.0           # Gevrey order of the cutoffs (fixed by build)
    R_a3: float = 2.0
    domain_cap: float = float("inf")

    def __post_init__(self):
        if self.h < 1.0:
            raise ParameterError(f"h must be >= 1, got {self.h}")
        if self.M2 < 0 or self.M1 < 0 or self.k0 <= 0:
            raise ParameterError("M2, M1 must be >= 0 and k0 > 0")
        if not (0.5 < self.sigma < 1.0):
            raise ConfigurationError(f"sigma must lie in (1/2, 1), got {self.sigma}")
        if not 2.0 * (1.0 - self.sigma) < 1.0 / self.theta:
            raise ConfigurationError(
                f"need 2(1-sigma) < 1/theta: sigma={self.sigma}, theta={self.theta}")
        if self.R_a3 <= 1.0:
            raise ConfigurationError("R_a3 must exceed 1 (smooth sign transition)")

    def with_ode_constants(self, C1, C2):
        return replace(self, C1=float(C1), C2=float(C2))


# ----------------------------------------------------------------------
# sign selector w(xi/h)
# ----------------------------------------------------------------------

def sign_weight(xi, t, p, params: WeightParams):
    """w(xi/h): 0 for |xi| <= h, -sgn(d_xi a3(t, xi)) for |xi| > R_a3 h,
    smooth monotone transition on the annulus in between."""
    xi = np.asarray(xi, dtype=float)
    s = np.abs(xi) / params.h
    R = params.R_a3
    ramp = smooth_step((2.0 * s - (1.0 + R)) / (R - 1.0))
    d = np.asarray(p.a3.dxi(t, 0.0, xi), dtype=float)
    d = np.broadcast_to(d, np.broadcast(d, xi).shape)
    xib = np.broadcast_to(xi, d.shape)
    act = np.abs(xib) > params.h
    for side in (xib > 0, xib < 0):
        sg = np.sign(d[act & side])
        sg = sg[sg != 0]
        if sg.size and not np.all(sg == sg[0]):
            raise ConfigurationError(
                "sign of d_xi a3 changes beyond |xi| = h; R_a3 too small")
    return -np.sign(d) * np.broadcast_to(ramp, d.shape)


# ----------------------------------------------------------------------
# windowed decay integrals
# ----------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_PANELS = 48
_DOMAIN_LO = 0.70   # roll-off of the weight integrand starts here (x <x> / D)
_DOMAIN_HI = 0.92   # and completes here, before the periodic seam


def plateau(u, lo, hi, derivative=0):
    """Smooth descent from 1 to 0 across [lo, hi] (1 below lo, 0 above hi)."""
    u = np.asarray(u, dtype=float)
    if not np.isfinite(hi):
        return np.ones_like(u) if derivative == 0 else np.zeros_like(u)
    arg = (2.0 * u - (lo + hi)) / (hi - lo)
    val = smooth_step(arg, derivative=derivative) * (2.0 / (hi - lo)) ** derivative
    return (1.0 - val) if derivative == 0 else -val


def domain_window(u, D, derivative=0):
    """Smooth plateau in u = <y>: 1 for u <= 0.7 D, 0 for u >= 0.92 D.

    Keeps the phase weights constant near the periodic seam so that their
    spatial derivatives stay periodic-smooth.  D = inf disables it.
    """
    if not np.isfinite(D):
        u = np.asarray(u, dtype=float)
        return np.ones_like(u) if derivative == 0 else np.zeros_like(u)
    return plateau(u, _DOMAIN_LO * D, _DOMAIN_HI * D, derivative=derivative)


def decay_antiderivative(x, s):
    """integral_0^x <y>^-s dy, exact via the Gauss hypergeometric function."""
    x = np.asarray(x, dtype=float)
    return x * special.hyp2f1(0.5, s / 2.0, 1.5, -np.square(x))


def _gl_panels(starts, stops, s, cap, D):
    """Gauss-Legendre integral of the full windowed integrand on [starts, stops]."""
    mid = 0.5 * (starts + stops)[..., None]
    rad = 0.5 * (stops - starts)[..., None]
    nodes = mid + rad * _GL_NODES
    byn = np.sqrt(1.0 + nodes ** 2)
    vals = byn ** (-s) * cutoff_psi(byn / cap) * domain_window(byn, D)
    return rad[..., 0] * (vals @ _GL_WEIGHTS)


def _bracket_to_y(u):
    """Positive y with <y> = u (0 when u <= 1)."""
    return np.sqrt(u * u - 1.0) if u > 1.0 else 0.0


def windowed_decay_integral(x, s, cap, D=float("inf")):
    """integral_0^x <y>^-s psi(<y>/cap) chi_dom(<y>) dy, scalar window size."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    a = np.abs(np.atleast_1d(x).astype(float))
    u_pure = min(0.5 * cap, _DOMAIN_LO * D)
    u_end = min(cap, _DOMAIN_HI * D)
    y_pure = _bracket_to_y(u_pure)
    y_end = _bracket_to_y(u_end)
    out = decay_antiderivative(np.minimum(a, y_pure), s)
    if y_end > y_pure:
        ends = np.minimum(a, y_end)
        need = ends > y_pure
        if np.any(need):
            bounds = np.linspace(y_pure, y_end, _PANELS + 1)
            section = _gl_panels(bounds[:-1], bounds[1:], s, cap, D)
            cum = np.concatenate(([0.0], np.cumsum(section)))
            e = ends[need]
            ip = np.clip(np.searchsorted(bounds, e, side="right") - 1, 0, _PANELS - 1)
            partial = _gl_panels(bounds[ip], e, s, cap, D)
            out[need] += cum[ip] + partial
    signed = np.where(np.atleast_1d(x) < 0.0, -out, out)
    return float(signed[0]) if scalar else signed.reshape(np.shape(x))


def _windowed_over_caps(x, s, cap, D):
    """Windowed integral, broadcasting over x and (possibly varying) cap."""
    x = np.asarray(x, dtype=float)
    cap = np.asarray(cap, dtype=float)
    if cap.ndim == 0:
        return windowed_decay_integral(x, s, float(cap), D)
    shape = np.broadcast(x, cap).shape
    xb = np.broadcast_to(x, shape)
    cb = np.broadcast_to(cap, shape)
    out = np.empty(shape, dtype=float)
    for c in np.unique(cb):
        m = cb == c
        out[m] = windowed_decay_integral(xb[m], s, float(c), D)
    return out


def lambda2(x, xi, t, p, params: WeightParams):
    """Order-two phase weight; vanishes for |xi| <= h and at x = 0."""
    w = sign_weight(xi, t, p, params)
    cap = np.square(bracket_h(xi, params.h))
    return params.M2 * w * _windowed_over_caps(x, params.sigma, cap,
                                               params.domain_cap)


def lambda1(x, xi, t, p, params: WeightParams):
    """Order-one phase weight with an extra <xi>_h^-1 damping."""
    w = sign_weight(xi, t, p, params)
    b = bracket_h(xi, params.h)
    return params.M1 * (w / b) * _windowed_over_caps(x, params.sigma / 2.0,
                                                     np.square(b),
                                                     params.domain_cap)


def lambda_x_derivative(x, xi, t, p, params: WeightParams, which=2, order=1):
    """Closed-form d^order/dx^order of lambda2 (which=2) or lambda1 (which=1)
    for order in 1..3, from the fundamental theorem of calculus."""
    if order not in (1, 2, 3):
        raise ParameterError("analytic x-derivatives available for orders 1..3")
    x = np.asarray(x, dtype=float)
    b = bracket_h(xi, params.h)
    cap = np.square(b)
    D = params.domain_cap
    s = params.sigma if which == 2 else params.sigma / 2.0
    pref = params.M2 if which == 2 else params.M1 / b
    w = sign_weight(xi, t, p, params)
    bx = np.sqrt(1.0 + x * x)
    dbx = x / bx
    d2bx = 1.0 / bx ** 3
    # G(x) = <x>^-s chi_dom(<x>) and its x-derivatives
    chi0 = domain_window(bx, D)
    chi1 = domain_window(bx, D, 1)
    chi2 = domain_window(bx, D, 2)
    gs = bx ** (-s)
    dgs = -s * x * bx ** (-s - 2.0)
    d2gs = -s * bx ** (-s - 2.0) + s * (s + 2.0) * x * x * bx ** (-s - 4.0)
    g = gs * chi0
    dg = dgs * chi0 + gs * chi1 * dbx
    d2g = (d2gs * chi0 + 2.0 * dgs * chi1 * dbx
           + gs * (chi2 * dbx ** 2 + chi1 * d2bx))
    u = bx / cap
    psi0 = cutoff_psi(u)
    psi1 = cutoff_psi(u, 1)
    psi2 = cutoff_psi(u, 2)
    if order == 1:
        val = g * psi0
    elif order == 2:
        val = dg * psi0 + g * psi1 * dbx / cap
    else:
        val = (d2g * psi0 + 2.0 * dg * psi1 * dbx / cap
               + g * (psi2 * dbx ** 2 / cap ** 2 + psi1 * d2bx / cap))
    return pref * w * val


# ----------------------------------------------------------------------
# time weight and total phase
# ----------------------------------------------------------------------

def k_of_t(t, params: WeightParams):
    """Closed-form solution of k' + C1 k + C2 = 0 with k(0) = k0."""
    t = np.asarray(t, dtype=float)
    C1, C2, k0 = params.C1, params.C2, params.k0
    if C1 == 0.0:
        val = k0 - C2 * t
    else:
        val = np.exp(-C1 * t) * k0 + C2 * np.expm1(-C1 * t) / C1
    if np.any(val <= 0.0):
        raise ParameterError(
            "time weight k(t) reaches zero inside the horizon; increase h "
            "(which shrinks C2) or k0")
    return val


def k_prime(t, params: WeightParams):
    """k'(t) = -(C1 k(t) + C2); non-positive when C1, C2, k >= 0."""
    return -(params.C1 * k_of_t(t, params) + params.C2)


def total_phase(t, x, xi, p, params: WeightParams):
    """k(t) <xi>_h^{1/theta} + lambda2 + lambda1."""
    b = bracket_h(xi, params.h)
    return (k_of_t(t, params) * b ** (1.0 / params.theta)
            + lambda2(x, xi, t, p, params) + lambda1(x, xi, t, p, params))
