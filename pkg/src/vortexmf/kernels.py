"""Interaction kernels: evaluation, regularization, admissibility.

Families
--------
``biot_savart``   K(x) = x_perp / (2 pi |x|^2),  x_perp = (-x2, x1), d = 2.
``power_law``     K(x) = +- x / |x|^alpha, alpha in (1, 2), d in {2, 3}.
``zero``          K identically 0.

Regularizations: ``blob`` replaces |x|^2 by |x|^2 + delta^2 (and the
power-law denominator by (|x|^2 + delta^2)^(alpha/2)); ``mollified`` is the
convolution with a Gaussian of width epsilon followed by a smooth radial
cutoff that is 1 inside radius 1/epsilon and 0 outside 2/epsilon.

A periodic domain mode evaluates the lattice-periodized kernel through a
screened Fourier table plus an analytic local part, consistent with the
spectral solver's mean-free inversion (the k = 0 mode carries no velocity).
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, hyp1f1

from .errors import DomainMismatch, SingularEvaluation, UnsupportedFamily

FAMILIES = ("biot_savart", "power_law", "zero")
REGULARIZATIONS = ("none", "blob", "mollified")
DOMAINS = ("free_space", "periodic")

#: screen width of the periodic Ewald split, in units of the grid spacing
_SCREEN_CELLS = 4.0
#: refinement factor of the periodic lookup table relative to the mode grid
_TABLE_REFINE = 4


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of an interaction kernel.

    ``alpha``/``sign`` apply to power_law only; ``delta`` to blob;
    ``epsilon`` to mollified; ``half_width``/``mode_cutoff`` to periodic.
    """

    family: str
    regularization: str = "none"
    domain: str = "free_space"
    alpha: float = 0.0
    sign: str = "repulsive"
    delta: float = 0.0
    epsilon: float = 0.0
    half_width: float = 0.0
    mode_cutoff: int = 0
    dim: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.regularization not in REGULARIZATIONS:
            raise ValueError(f"unknown regularization {self.regularization!r}")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.family == "power_law":
            if not 1.0 < self.alpha < 2.0:
                raise ValueError("power_law alpha must lie strictly in (1, 2)")
            if self.sign not in ("attractive", "repulsive"):
                raise ValueError(f"unknown power_law sign {self.sign!r}")
            if self.dim not in (2, 3):
                raise ValueError("power_law supports dim 2 or 3")
        if self.family == "biot_savart" and self.dim != 2:
            raise ValueError("biot_savart is two-dimensional")
        if self.regularization == "blob" and not self.delta > 0.0:
            raise ValueError("blob regularization requires delta > 0")
        if self.regularization == "mollified" and not self.epsilon > 0.0:
            raise ValueError("mollified regularization requires epsilon > 0")
        if self.domain == "periodic":
            if not self.half_width > 0.0:
                raise ValueError("periodic domain requires half_width > 0")
            if self.mode_cutoff < 4 or self.mode_cutoff % 2:
                raise ValueError("periodic mode_cutoff must be even and >= 4")
            if self.family == "power_law":
                raise UnsupportedFamily(
                    "periodic evaluation is defined for biot_savart and zero only")

    @property
    def is_singular(self):
        return self.family != "zero" and self.regularization == "none"


def biot_savart(regularization="none", delta=0.0, epsilon=0.0,
                domain="free_space", half_width=0.0, mode_cutoff=0):
    return KernelSpec("biot_savart", regularization, domain, delta=delta,
                      epsilon=epsilon, half_width=half_width,
                      mode_cutoff=mode_cutoff)


def power_law(alpha, sign="repulsive", regularization="none", delta=0.0,
              epsilon=0.0, dim=2):
    return KernelSpec("power_law", regularization, alpha=alpha, sign=sign,
                      delta=delta, epsilon=epsilon, dim=dim)


def zero_kernel(dim=2):
    return KernelSpec("zero", dim=dim)


# ---------------------------------------------------------------------------
# smooth radial cutoff chi_R: 1 on |x| <= R, 0 on |x| >= 2R, C^inf between


def _smooth_bump(t):
    # e^{-1/t} for t > 0, extended by 0; building block of the partition
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def radial_cutoff(r, radius):
    """C^inf cutoff in the radial variable: 1 for r <= radius, 0 beyond 2*radius."""
    r = np.asarray(r, dtype=float)
    tau = r / radius
    up = _smooth_bump(2.0 - tau)
    down = _smooth_bump(tau - 1.0)
    with np.errstate(invalid="ignore"):
        chi = np.where(tau <= 1.0, 1.0, np.where(tau >= 2.0, 0.0, up / (up + down)))
    return chi


# ---------------------------------------------------------------------------
# free-space evaluation


def _perp(x):
    out = np.empty_like(x)
    out[..., 0] = -x[..., 1]
    out[..., 1] = x[..., 0]
    return out


def _gauss_vortex_velocity(x, r2, width2):
    """Velocity of a unit-circulation Gaussian vortex: the Biot-Savart kernel
    convolved with a centered Gaussian of covariance width2 * I."""
    safe = np.maximum(r2, 1e-300)
    amp = -np.expm1(-r2 / (2.0 * width2)) / (2.0 * math.pi * safe)
    # r -> 0 limit: 1 / (4 pi width2)
    amp = np.where(r2 == 0.0, 1.0 / (4.0 * math.pi * width2), amp)
    return _perp(x) * amp[..., None]


def _power_law_mollified_radial(r, alpha, eps, dim):
    """Radial factor m'(r)/r of grad(phi * rho_eps) for phi = r^(2-alpha)/(2-alpha).

    Uses E|x + eps Z|^(2-alpha) = (2 eps^2)^((2-alpha)/2)
    * Gamma((d+2-alpha)/2)/Gamma(d/2) * 1F1(-(2-alpha)/2; d/2; -r^2/(2 eps^2)).
    """
    beta = (2.0 - alpha) / 2.0
    a = -beta
    b = dim / 2.0
    z = -(r * r) / (2.0 * eps * eps)
    pref = (2.0 * eps * eps) ** beta * math.exp(
        gammaln((dim + 2.0 - alpha) / 2.0) - gammaln(dim / 2.0))
    # d/dz 1F1(a;b;z) = (a/b) 1F1(a+1;b+1;z); dz/dr = -r/eps^2
    dm_over_r = pref * (a / b) * hyp1f1(a + 1.0, b + 1.0, z) * (-1.0 / (eps * eps))
    return dm_over_r / (2.0 - alpha)


def _eval_free(spec, x, out_of_core_ok=True):
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)

    if spec.family == "zero":
        return np.zeros_like(x)

    if spec.family == "biot_savart":
        if spec.regularization == "none":
            if np.any(r2 == 0.0):
                raise SingularEvaluation("Biot-Savart kernel evaluated at x = 0")
            return _perp(x) / (2.0 * math.pi * r2[..., None])
        if spec.regularization == "blob":
            return _perp(x) / (2.0 * math.pi * (r2 + spec.delta ** 2)[..., None])
        # mollified: Gaussian vortex velocity, then the radial cutoff at 1/eps
        u = _gauss_vortex_velocity(x, r2, spec.epsilon ** 2)
        chi = radial_cutoff(np.sqrt(r2), 1.0 / spec.epsilon)
        return u * chi[..., None]

    # power_law
    s = -1.0 if spec.sign == "attractive" else 1.0
    if spec.regularization == "none":
        if np.any(r2 == 0.0):
            raise SingularEvaluation("power-law kernel evaluated at x = 0")
        return s * x * r2[..., None] ** (-spec.alpha / 2.0)
    if spec.regularization == "blob":
        return s * x * (r2 + spec.delta ** 2)[..., None] ** (-spec.alpha / 2.0)
    r = np.sqrt(r2)
    radial = _power_law_mollified_radial(r, spec.alpha, spec.epsilon, spec.dim)
    chi = radial_cutoff(r, 1.0 / spec.epsilon)
    return s * x * (radial * chi)[..., None]


# ---------------------------------------------------------------------------
# periodic evaluation: screened Fourier table + analytic local part


@lru_cache(maxsize=8)
def _periodic_table(L, M):
    """Refined-grid table of the smooth (screened) periodic velocity field.

    The kernel splits as K_per = local + S_per with S_per the periodic
    velocity of a Gaussian vortex of width sigma ~ 4 grid cells.  S_per has
    a rapidly decaying spectrum and is tabulated exactly; the local part
    K_free - S_free is analytic and negligible at image distances.
    """
    sigma = _SCREEN_CELLS * (2.0 * L / M)
    mt = M * _TABLE_REFINE
    k1 = 2.0 * math.pi * np.fft.fftfreq(M, d=2.0 * L / M)
    kx, ky = np.meshgrid(k1, k1, indexing="ij")
    k2 = kx * kx + ky * ky
    mask = k2 > 0
    k2safe = np.where(mask, k2, 1.0)
    screen = np.exp(-sigma * sigma * k2 / 4.0) * mask
    # numpy forward transform uses e^{-ik.x}; the symbol of grad_perp
    # (-Delta)^{-1} in that convention is -i k_perp / |k|^2
    fx = np.zeros((mt, mt), dtype=complex)
    fy = np.zeros((mt, mt), dtype=complex)
    modes = np.fft.fftfreq(M, d=1.0 / M).astype(int) % mt
    ix, iy = np.meshgrid(modes, modes, indexing="ij")
    fx[ix, iy] = -1j * (-ky) / k2safe * screen
    fy[ix, iy] = -1j * kx / k2safe * screen
    norm = mt * mt / (4.0 * L * L)
    # table is indexed over [0, 2L)^2; the x in [-L, L) lookup wraps modulo 2L
    sx = np.ascontiguousarray(np.real(np.fft.ifft2(fx)) * norm)
    sy = np.ascontiguousarray(np.real(np.fft.ifft2(fy)) * norm)
    return sx, sy, sigma, mt


def _bilinear(table, fx, fy, mt):
    i0 = np.floor(fx).astype(np.int64) % mt
    j0 = np.floor(fy).astype(np.int64) % mt
    i1 = (i0 + 1) % mt
    j1 = (j0 + 1) % mt
    tx = fx - np.floor(fx)
    ty = fy - np.floor(fy)
    return ((1 - tx) * (1 - ty) * table[i0, j0] + tx * (1 - ty) * table[i1, j0]
            + (1 - tx) * ty * table[i0, j1] + tx * ty * table[i1, j1])


def _eval_periodic(spec, x):
    x = np.asarray(x, dtype=float)
    L = spec.half_width
    if np.any(x < -L) or np.any(x >= L):
        raise DomainMismatch(f"point outside [-{L}, {L})^2")
    if spec.family == "zero":
        return np.zeros_like(x)

    sx, sy, sigma, mt = _periodic_table(spec.half_width, spec.mode_cutoff)
    ht = 2.0 * L / mt
    fx = np.mod(x[..., 0], 2.0 * L) / ht
    fy = np.mod(x[..., 1], 2.0 * L) / ht
    u = np.empty_like(x)
    u[..., 0] = _bilinear(sx, fx, fy, mt)
    u[..., 1] = _bilinear(sy, fx, fy, mt)

    # local part = regularized free kernel minus the screen vortex velocity
    r2 = np.sum(x * x, axis=-1)
    free = _eval_free(spec, x)
    u += free - _gauss_vortex_velocity(x, r2, sigma * sigma / 2.0)
    return u


def evaluate(spec, x):
    """Evaluate K(x).  ``x`` has shape (..., d); the result matches it.

    Raises SingularEvaluation at x = 0 for unregularized singular families
    and DomainMismatch for periodic specs fed points outside the box.
    """
    if spec.domain == "periodic":
        return _eval_periodic(spec, x)
    return _eval_free(spec, x)


def decay_radius(spec, tol):
    """Radius beyond which |K| < tol, from the analytic envelopes."""
    if spec.family == "zero":
        return 0.0
    if spec.family == "biot_savart":
        r = 1.0 / (2.0 * math.pi * tol)
    else:
        r = tol ** (-1.0 / (spec.alpha - 1.0))
    if spec.regularization == "mollified":
        r = min(r, 2.0 / spec.epsilon)
    return r


# ---------------------------------------------------------------------------
# Fourier multiplier of the periodic velocity map


def periodic_multiplier(half_width, modes):
    """Multiplier table of grad_perp (-Delta)^{-1} on the [-L, L)^2 grid.

    Entry at wavevector k is i * k_perp / |k|^2 (in the e^{+ik.x} transform
    convention; conjugate it for numpy's fft layout), and the zero vector at
    k = 0 by the mean-free convention.  Shape (modes, modes, 2), indexed in
    numpy fft mode order.
    """
    if modes < 4 or modes % 2:
        raise ValueError("modes must be even and >= 4")
    k1 = 2.0 * math.pi * np.fft.fftfreq(modes, d=2.0 * half_width / modes)
    kx, ky = np.meshgrid(k1, k1, indexing="ij")
    k2 = kx * kx + ky * ky
    k2safe = np.where(k2 > 0, k2, 1.0)
    table = np.zeros((modes, modes, 2), dtype=complex)
    table[..., 0] = 1j * (-ky) / k2safe * (k2 > 0)
    table[..., 1] = 1j * kx / k2safe * (k2 > 0)
    return table


# ---------------------------------------------------------------------------
# admissibility under the split-kernel integrability condition


@dataclass(frozen=True)
class AdmissibilityReport:
    family: str
    r: float
    p1: float
    q1: float
    p2: float
    q2: float
    satisfied: bool
    margin: float
    split: str

    def to_dict(self):
        def enc(v):
            return "inf" if v == math.inf else v
        return {"family": self.family, "r": enc(self.r), "p1": enc(self.p1),
                "q1": enc(self.q1), "p2": enc(self.p2), "q2": enc(self.q2),
                "satisfied": self.satisfied, "margin": enc(self.margin)}


def admissibility_report(spec, r):
    """Feasibility witness for the two-part kernel condition at exponent r.

    The kernel is split at |x| = 1 into a near and a far piece.  The piece
    assigned to the first slot must have its divergence integrable too and
    obeys d/p1 + 2/q1 + 2/r < 2; the second slot obeys d/p2 + 2/q2 + 1/r < 1
    (both strict here since autonomous kernels take q = inf).  The report
    carries one feasible witness, not the whole feasible region; ``margin``
    is the slack of the binding inequality at the witness.
    """
    if not r > 1.0:
        raise ValueError("r must lie in (1, inf]")
    inv_r = 0.0 if r == math.inf else 1.0 / r
    d = spec.dim

    if spec.family == "zero":
        return AdmissibilityReport("zero", r, math.inf, math.inf, math.inf,
                                   math.inf, True, math.inf,
                                   "zero kernel: both parts vanish")

    if spec.regularization != "none":
        # bounded kernels sit wholly in the second slot with p2 = q2 = inf
        margin = 1.0 - inv_r
        return AdmissibilityReport(spec.family, r, math.inf, math.inf,
                                   math.inf, math.inf, margin > 0.0, margin,
                                   "regularized kernel is globally bounded; "
                                   "far slot holds all of K")

    if spec.family == "biot_savart":
        # near part (|K| ~ |x|^-1, divergence-free) -> slot 1 with p1 < 2;
        # far part bounded -> slot 2 with p2 = q2 = inf.
        lo, hi = 0.5, 1.0 - inv_r  # feasible interval for 1/p1
        split = ("near |x|<=1 in slot 1 (div K = 0), far |x|>1 bounded in "
                 "slot 2")
        if hi > lo:
            ip1 = 0.5 * (lo + hi)
            p1 = 1.0 / ip1
            margin_near = 2.0 - d * ip1 - 2.0 * inv_r
            margin = min(margin_near, 1.0 - inv_r)
            return AdmissibilityReport("biot_savart", r, p1, math.inf,
                                       math.inf, math.inf, True, margin, split)
        # infeasible: report the integrability boundary p1 = 2
        margin = 2.0 - d * lo - 2.0 * inv_r  # = 1 - 2/r at d = 2
        return AdmissibilityReport("biot_savart", r, 2.0, math.inf, math.inf,
                                   math.inf, False, margin, split)

    if spec.family == "power_law":
        # near part (|K| ~ |x|^{1-alpha}) -> slot 2, which needs no
        # divergence control; far part bounded with bounded divergence
        # -> slot 1 at p1 = q1 = inf.
        alpha = spec.alpha
        lo, hi = (alpha - 1.0) / d, (1.0 - inv_r) / d  # interval for 1/p2
        split = ("near |x|<=1 in slot 2 (no divergence control needed), far "
                 "|x|>1 bounded with bounded divergence in slot 1")
        if hi > lo:
            ip2 = 0.5 * (lo + hi)
            p2 = 1.0 / ip2
            margin_near = 1.0 - inv_r - d * ip2
            margin = min(margin_near, 2.0 - 2.0 * inv_r)
            return AdmissibilityReport("power_law", r, math.inf, math.inf,
                                       p2, math.inf, True, margin, split)
        margin = 1.0 - inv_r - (alpha - 1.0)  # = 2 - alpha - 1/r
        return AdmissibilityReport("power_law", r, math.inf, math.inf,
                                   d / (alpha - 1.0), math.inf, False, margin,
                                   split)

    raise UnsupportedFamily(f"no analytic norm formulas for {spec.family!r}")
