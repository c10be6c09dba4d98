"""Quantized spectra and eigenfunctions of ``l . p_R`` on line-section intervals.

On an interval ``(a, b)`` of length ``L`` with imaginary extension parameters
``lambda_-`` at ``a`` and ``lambda_+`` at ``b`` the eigenvalues form the ladder

    k_n = pi n / L + theta,   exp(2 i theta L) = (1+l+)(1-l-) / ((1-l+)(1+l-)),

and the doubled-space eigenfunctions are

    Phi_n(s) = (e^{iks} + sigma e^{-iks}, e^{iks} - sigma e^{-iks}) / (2 sqrt(L)),
    sigma = e^{2ika} (1 - l-) / (1 + l-).

A physical state ``psi`` is embedded as ``(psi, psi)/sqrt(2)``, so its
coefficient is ``c_n = <Phi_n|psi> = (2L)^{-1/2} int e^{-i k_n s} psi(s) ds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .geometry import Interval, LineSection

DEGENERACY_TOL = 1e-9


def _check_lambda(lam, name):
    lam = complex(lam)
    if abs(lam.real) > 1e-14 or not math.isfinite(lam.imag):
        raise ValidationError(f"{name} = {lam} is not purely imaginary")
    return complex(0.0, lam.imag)


def mobius_ratio(lambda_minus, lambda_plus):
    """Unit-modulus ratio fixing the ladder offset."""
    lm = _check_lambda(lambda_minus, "lambda_minus")
    lp = _check_lambda(lambda_plus, "lambda_plus")
    return (1 + lp) * (1 - lm) / ((1 - lp) * (1 + lm))


def theta_offset(lambda_minus, lambda_plus, L):
    """Offset ``theta`` in ``[0, pi/L)`` with ``exp(2 i theta L)`` = Mobius ratio."""
    if not L > 0:
        raise ValueError(f"interval length must be positive, got {L}")
    ratio = mobius_ratio(lambda_minus, lambda_plus)
    phase = math.atan2(ratio.imag, ratio.real) % (2 * math.pi)
    theta = phase / (2 * L)
    if theta >= math.pi / L:  # guards the 2pi rounding edge
        theta -= math.pi / L
    return theta


def _as_interval(interval):
    if isinstance(interval, Interval):
        return interval
    a, b, lm, lp = interval
    return Interval(float(a), float(b), complex(lm), complex(lp))


@dataclass(frozen=True)
class SpectrumLadder:
    theta: float
    L: float
    lambda_minus: complex
    lambda_plus: complex
    n_min: int
    n_max: int

    @property
    def n(self):
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def k(self):
        return math.pi * self.n / self.L + self.theta

    @property
    def spacing(self):
        return math.pi / self.L

    def residual(self):
        """Max |exp(2 i k_n L) - ratio| over the ladder."""
        ratio = mobius_ratio(self.lambda_minus, self.lambda_plus)
        return float(np.max(np.abs(np.exp(2j * self.k * self.L) - ratio)))


def spectrum(interval, n_min, n_max) -> SpectrumLadder:
    """Eigenvalue ladder ``k_n`` for ``n_min <= n <= n_max`` on one interval."""
    if n_min > n_max:
        raise ValueError("n_min must not exceed n_max")
    iv = _as_interval(interval)
    theta = theta_offset(iv.lambda_minus, iv.lambda_plus, iv.length)
    return SpectrumLadder(theta, iv.length, iv.lambda_minus, iv.lambda_plus, int(n_min), int(n_max))


@dataclass(frozen=True)
class MomentumMode:
    interval: Interval
    n: int
    k: float
    sigma: complex
    anchor: float | None = None
    theta: float | None = None  # ladder offset; recovered from k when absent

    @property
    def L(self):
        return self.interval.length

    def _waves(self, s):
        """(e^{iks}, sigma e^{-iks}) evaluated relative to ``x_minus``.

        The pi n (s - x_minus) / L part is reduced mod 2 pi before the
        exponential, so the endpoint conditions hold to rounding level even
        when k L or k x_minus is large.
        """
        iv = self.interval
        th = self.k - math.pi * self.n / self.L if self.theta is None else self.theta
        t = s - iv.x_minus
        e = np.exp(1j * (math.pi * np.mod(self.n * (t / self.L), 2.0) + th * t))
        lm = iv.lambda_minus
        base = np.exp(1j * self.k * iv.x_minus)
        return base * e, base * ((1 - lm) / (1 + lm)) * np.conj(e)

    @property
    def norm_const(self):
        return 1.0 / (2.0 * math.sqrt(self.L))

    def components(self, s):
        """(Phi_e, Phi_o) at line coordinates ``s``; zero outside the interval."""
        s = np.asarray(s, dtype=float)
        inside = (s >= self.interval.x_minus) & (s <= self.interval.x_plus)
        ep, em = self._waves(s)
        c = self.norm_const * inside
        return c * (ep + em), c * (ep - em)

    def plus(self, s):
        """Physical-sector amplitude (Phi_e + Phi_o)/sqrt(2) = e^{iks}/sqrt(2L)."""
        s = np.asarray(s, dtype=float)
        inside = (s >= self.interval.x_minus) & (s <= self.interval.x_plus)
        return inside * np.exp(1j * self.k * s) / math.sqrt(2 * self.L)

    def derivative(self, s):
        """(Phi_e', Phi_o') at ``s`` (analytic, unmasked)."""
        ep, em = self._waves(np.asarray(s, dtype=float))
        ep, em = 1j * self.k * ep, -1j * self.k * em
        return self.norm_const * (ep + em), self.norm_const * (ep - em)

    def bc_residual(self):
        """|Phi_o - lambda Phi_e| at both endpoints (analytic evaluation)."""
        iv = self.interval
        e, o = self.components(np.array([iv.x_minus, iv.x_plus]))
        return (abs(o[0] - iv.lambda_minus * e[0]), abs(o[1] - iv.lambda_plus * e[1]))


def build_mode(interval, n, anchor=None) -> MomentumMode:
    """Normalized eigenmode ``n`` on an interval (sigma anchored at ``x_minus``)."""
    iv = _as_interval(interval)
    lm = _check_lambda(iv.lambda_minus, "lambda_minus")
    assert abs(1 + lm) > 0  # imaginary lambda never equals -1
    theta = theta_offset(lm, iv.lambda_plus, iv.length)
    k = math.pi * n / iv.length + theta
    sigma = np.exp(2j * k * iv.x_minus) * (1 - lm) / (1 + lm)
    return MomentumMode(iv, int(n), k, complex(sigma), anchor, theta)


# ----------------------------------------------------------------------------
# Projections


def _gauss(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return a + 0.5 * (b - a) * (x + 1), 0.5 * (b - a) * w


def _components_of(state, s):
    """Evaluate a line function: scalar => physical embedding, tuple => (e, o)."""
    val = state(s)
    if isinstance(val, tuple):
        return val
    val = np.asarray(val) / math.sqrt(2)
    return val, val


def project(state, mode: MomentumMode, n_quad=1000, support=None):
    """Doubled-space inner product ``<Phi|psi>`` along the mode's interval.

    ``state`` maps line coordinates to a physical scalar ``psi`` (embedded as
    ``psi/sqrt(2)`` in both components) or to a tuple ``(psi_e, psi_o)``.
    """
    iv = mode.interval
    if support is not None:
        lo, hi = support
        if iv.x_minus < lo - 1e-12 or iv.x_plus > hi + 1e-12:
            raise DomainError("mode interval lies outside the state's support")
    s, w = _gauss(iv.x_minus, iv.x_plus, n_quad)
    pe, po = mode.components(s)
    se, so = _components_of(state, s)
    return complex(np.sum(w * (np.conj(pe) * se + np.conj(po) * so)))


def coefficients(f, interval, n_min, n_max, n_quad=None):
    """Coefficients ``c_n`` of a physical line function for ``n_min..n_max``."""
    iv = _as_interval(interval)
    lad = spectrum(iv, n_min, n_max)
    if n_quad is None:
        n_quad = max(128, 2 * max(abs(n_min), abs(n_max)) + 64)
    s, w = _gauss(iv.x_minus, iv.x_plus, n_quad)
    fs = np.asarray(f(s), dtype=complex)
    phase = np.exp(-1j * np.outer(lad.k, s))
    return lad, (phase @ (w * fs)) / math.sqrt(2 * iv.length)


@dataclass(frozen=True)
class ModeMatrices:
    """Gram and momentum matrices of consecutive modes on one interval."""

    n: np.ndarray
    gram: np.ndarray
    momentum: np.ndarray

    @property
    def gram_deviation(self):
        return float(np.max(np.abs(self.gram - np.eye(len(self.n)))))

    @property
    def hermiticity_deviation(self):
        return float(np.max(np.abs(self.momentum - self.momentum.conj().T)))


def mode_matrices(interval, n_min, n_max, n_quad=1000) -> ModeMatrices:
    """``<Phi_m|Phi_n>`` and ``<Phi_m| -i sigma_1 d/ds |Phi_n>`` by Gauss quadrature."""
    iv = _as_interval(interval)
    s, w = _gauss(iv.x_minus, iv.x_plus, n_quad)
    ns = np.arange(n_min, n_max + 1)
    modes = [build_mode(iv, n) for n in ns]
    E = np.array([m.components(s)[0] for m in modes])
    O = np.array([m.components(s)[1] for m in modes])
    dE = np.array([m.derivative(s)[0] for m in modes])
    dO = np.array([m.derivative(s)[1] for m in modes])
    gram = (E.conj() * w) @ E.T + (O.conj() * w) @ O.T
    mom = (E.conj() * w) @ (-1j * dO).T + (O.conj() * w) @ (-1j * dE).T
    return ModeMatrices(ns, gram, mom)


# ----------------------------------------------------------------------------
# Spectral sums with asymptotic tails


@dataclass(frozen=True)
class LineSpectralSum:
    """``sum_n k_n conj(c_n[f]) c_n[g]`` on one interval.

    ``raw`` is the truncated sum over ``|n| <= n_modes``; ``tail`` is the
    asymptotic estimate of the omitted terms; ``value = raw + tail``.
    """

    value: complex
    raw: complex
    tail: complex
    n_modes: int


def _endpoint_derivatives(f, a, b, order, deg):
    cheb = np.polynomial.Chebyshev.interpolate(lambda s: np.asarray(f(s), dtype=complex),
                                               deg, domain=[a, b])
    out_a, out_b = [], []
    p = cheb
    for _ in range(order + 1):
        out_a.append(complex(p(a)))
        out_b.append(complex(p(b)))
        p = p.deriv()
    return np.array(out_a), np.array(out_b)


def _asymptotic_coeffs(da, db, k, n, omega):
    """Integration-by-parts expansion of int_a^b e^{-iks} f ds without e^{-ika}."""
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    ik = 1j * k
    total = np.zeros_like(k, dtype=complex)
    for j in range(len(da)):
        total += (da[j] - sign * omega * db[j]) / ik ** (j + 1)
    return total


def spectral_bilinear(f, g, interval, n_modes=64, n_quad=None, tail=True,
                      tail_terms=4, tail_cutoff=1 << 14, cheb_deg=96) -> LineSpectralSum:
    """Spectral sum ``sum_n k_n conj(c_n[f]) c_n[g]`` for physical line functions.

    Coefficients for ``|n| <= n_modes`` come from Gauss-Legendre quadrature.
    With ``tail=True`` the remaining terms are summed from the
    integration-by-parts expansion of the coefficients (endpoint derivatives
    from a Chebyshev interpolant) up to ``tail_cutoff`` plus a closed-form
    remainder beyond it.
    """
    iv = _as_interval(interval)
    L = iv.length
    lad, cf = coefficients(f, iv, -n_modes, n_modes, n_quad)
    cg = cf if g is f else coefficients(g, iv, -n_modes, n_modes, n_quad)[1]
    raw = complex(np.sum(lad.k * np.conj(cf) * cg))
    if not tail:
        return LineSpectralSum(raw, raw, 0j, n_modes)

    theta = lad.theta
    omega = np.exp(-1j * theta * L)
    a, b = iv.x_minus, iv.x_plus
    fa, fb = _endpoint_derivatives(f, a, b, tail_terms - 1, cheb_deg)
    ga, gb = (fa, fb) if g is f else _endpoint_derivatives(g, a, b, tail_terms - 1, cheb_deg)
    n = np.concatenate([np.arange(n_modes + 1, tail_cutoff + 1),
                        -np.arange(n_modes + 1, tail_cutoff + 1)])
    k = math.pi * n / L + theta
    If = _asymptotic_coeffs(fa, fb, k, n, omega)
    Ig = _asymptotic_coeffs(ga, gb, k, n, omega)
    t = np.sum(k * np.conj(If) * Ig) / (2 * L)

    # remainder |n| > cutoff: leading 1/k and 1/k^2 behaviour per parity
    rem = 0j
    for parity in (1.0, -1.0):
        A0f, A1f = fa[0] - parity * omega * fb[0], fa[1] - parity * omega * fb[1]
        A0g, A1g = ga[0] - parity * omega * gb[0], ga[1] - parity * omega * gb[1]
        P = np.conj(A0f) * A0g
        Q = 1j * (np.conj(A1f) * A0g - np.conj(A0f) * A1g)
        half = 0.5 / (tail_cutoff + 0.5)  # ~ sum over one parity of 1/n^2
        rem += (-2 * theta * P + 2 * Q) * (L / math.pi) ** 2 * half
    t += rem / (2 * L)
    return LineSpectralSum(raw + t, raw, complex(t), n_modes)


# ----------------------------------------------------------------------------
# Non-convex sections


@dataclass(frozen=True)
class UnionSpectrum:
    modes: tuple  # (interval id, MomentumMode)
    degeneracies: tuple  # ((i, n), (j, m)) with |k_i,n - k_j,m| < tol, i < j

    @property
    def degenerate(self):
        return bool(self.degeneracies)

    def eigenvalues(self):
        return np.array([m.k for _, m in self.modes])


def union_spectrum(section: LineSection, n_min, n_max, tol=DEGENERACY_TOL) -> UnionSpectrum:
    """Modes of every interval of a section; each mode lives on one interval."""
    entries = []
    for i, iv in enumerate(section.intervals):
        for n in range(n_min, n_max + 1):
            entries.append((i, build_mode(iv, n, section.anchor)))
    degs = []
    if len(section.intervals) > 1:
        ids = np.array([i for i, _ in entries])
        ks = np.array([m.k for _, m in entries])
        ns = np.array([m.n for _, m in entries])
        close = np.abs(ks[:, None] - ks[None, :]) < tol
        close &= ids[:, None] < ids[None, :]
        for p, q in zip(*np.nonzero(close)):
            degs.append(((int(ids[p]), int(ns[p])), (int(ids[q]), int(ns[q]))))
    return UnionSpectrum(tuple(entries), tuple(degs))


# ----------------------------------------------------------------------------
# Poisson boundary sums


def _weights(n, N, fejer):
    return 1.0 - np.abs(n) / (N + 1.0) if fejer else np.ones_like(n, dtype=float)


def poisson_boundary_sum(f, interval, N=128, endpoint="minus", fejer=True, n_quad=None):
    """Fejer-averaged ``sum_n <psi|Phi_n> Phi_{n,+}^*(x_e)`` at an endpoint.

    Converges to ``conj(psi(x_e)) / 2`` for a smooth physical ``psi``.
    """
    iv = _as_interval(interval)
    xe = iv.x_minus if endpoint == "minus" else iv.x_plus
    lad, c = coefficients(f, iv, -N, N, n_quad)
    w = _weights(lad.n, N, fejer)
    return complex(np.sum(w * np.conj(c) * np.exp(-1j * lad.k * xe)) / math.sqrt(2 * iv.length))


def poisson_kernel_sum(f, interval, N=64, endpoint="minus", fejer=True, n_quad=None):
    """``(1/L) sum_n int f(x) e^{i k_n (x - x_e)} dx`` over the ladder; tends to f(x_e)."""
    iv = _as_interval(interval)
    xe = iv.x_minus if endpoint == "minus" else iv.x_plus
    lad = spectrum(iv, -N, N)
    if n_quad is None:
        n_quad = max(128, 2 * N + 64)
    s, wq = _gauss(iv.x_minus, iv.x_plus, n_quad)
    fs = np.asarray(f(s), dtype=complex)
    terms = np.exp(1j * np.outer(lad.k, s - xe)) @ (wq * fs)
    return complex(np.sum(_weights(lad.n, N, fejer) * terms) / iv.length)
