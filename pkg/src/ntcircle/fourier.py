"""Spectral representation of real functions on the circle R/Z.

Values live on the uniform dyadic grid theta_j = j/N and coefficients in
the truncated Fourier basis k = -N/2+1 .. N/2.  Storage is real-to-complex
(numpy rfft, normalized so c_0 is the mean); the signed index range above
is the logical view, recovered with FourierCoeffs.full().

Nyquist convention: the k = N/2 bin holds the real amplitude of the
cos(pi*N*theta) mode, the only representative of the +-N/2 pair that the
grid can see.  On the nodes this mode is an eigenvector of the shift by
delta with eigenvalue cos(pi*N*delta), and shift() implements exactly
that, so the algebraic identities behind the cohomological solvers hold
on the grid for every representable input, Nyquist content included.
Odd spectral operations (derivative) send the bin to zero.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import MalformedCoefficientsError, SmallDivisorError

_HERMITIAN_TOL = 1e-10
_DIVISOR_FLOOR = 1e-13


def _check_size(n: int) -> None:
    if n < 8 or (n & (n - 1)) != 0:
        raise ValueError(f"grid size must be a power of two >= 8, got {n}")


@lru_cache(maxsize=64)
def grid(n: int) -> np.ndarray:
    """Nodes theta_j = j/n as a read-only array."""
    _check_size(n)
    g = np.arange(n) / n
    g.setflags(write=False)
    return g


@lru_cache(maxsize=64)
def _wavenumbers(n: int) -> np.ndarray:
    k = np.arange(n // 2 + 1, dtype=float)
    k.setflags(write=False)
    return k


class PeriodicScalar:
    """Real 1-periodic function sampled on the dyadic grid of size n.

    Immutable; arithmetic is pointwise and requires matching grids.
    Non-finite samples are rejected so solver blow-ups surface early.
    """

    __slots__ = ("values", "n")

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        _check_size(v.size)
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "n", v.size)

    def __setattr__(self, name, value):
        raise AttributeError("PeriodicScalar is immutable")

    @classmethod
    def zeros(cls, n: int) -> "PeriodicScalar":
        _check_size(n)
        return cls(np.zeros(n))

    def _other_values(self, other):
        if isinstance(other, PeriodicScalar):
            if other.n != self.n:
                raise ValueError(f"grid mismatch: {self.n} vs {other.n}")
            return other.values
        return other

    def __add__(self, other):
        return PeriodicScalar(self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other):
        return PeriodicScalar(self.values - self._other_values(other))

    def __rsub__(self, other):
        return PeriodicScalar(self._other_values(other) - self.values)

    def __mul__(self, other):
        return PeriodicScalar(self.values * self._other_values(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return PeriodicScalar(self.values / self._other_values(other))

    def __neg__(self):
        return PeriodicScalar(-self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self):
        return f"PeriodicScalar(n={self.n}, sup={self.sup():.3e})"


class FourierCoeffs:
    """Coefficients of a real function, rfft half-spectrum storage."""

    __slots__ = ("half", "n")

    def __init__(self, half, n: int):
        _check_size(n)
        h = np.asarray(half, dtype=complex)
        if h.size != n // 2 + 1:
            raise ValueError("half-spectrum length must be n//2 + 1")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "half", h)
        object.__setattr__(self, "n", n)

    def __setattr__(self, name, value):
        raise AttributeError("FourierCoeffs is immutable")

    @classmethod
    def from_full(cls, full) -> "FourierCoeffs":
        """Build from the logical view indexed k = -n/2+1 .. n/2.

        The data must describe a real function: c_{-k} = conj(c_k) with
        c_0 and c_{n/2} real, up to 1e-10 relative to the largest entry.
        """
        c = np.asarray(full, dtype=complex)
        n = c.size
        _check_size(n)
        zero = n // 2 - 1  # position of k = 0
        scale = max(1.0, float(np.max(np.abs(c))))
        pos = c[zero + 1 : n - 1]          # k = 1 .. n/2-1
        neg = c[zero - 1 :: -1]            # k = -1 .. -(n/2-1)
        residue = 0.0
        if pos.size:
            residue = float(np.max(np.abs(pos - np.conj(neg)))) / 2.0
        residue = max(residue, abs(c[zero].imag), abs(c[-1].imag))
        if residue > _HERMITIAN_TOL * scale:
            raise MalformedCoefficientsError(
                f"coefficients are not conjugate-symmetric: residue "
                f"{residue:.3e} exceeds {_HERMITIAN_TOL:.0e} * {scale:.3e}"
            )
        half = np.empty(n // 2 + 1, dtype=complex)
        half[0] = c[zero].real
        half[1:-1] = (pos + np.conj(neg)) / 2.0
        half[-1] = c[-1].real
        return cls(half, n)

    def full(self) -> np.ndarray:
        """Logical coefficient view, k = -n/2+1 .. n/2."""
        n = self.n
        c = np.empty(n, dtype=complex)
        zero = n // 2 - 1
        c[zero : n] = self.half[: n // 2 + 1]
        c[:zero] = np.conj(self.half[n // 2 - 1 : 0 : -1])
        return c

    def coeff(self, k: int) -> complex:
        if not -self.n // 2 + 1 <= k <= self.n // 2:
            raise ValueError(f"mode {k} not represented on grid {self.n}")
        if k >= 0:
            return complex(self.half[k])
        return complex(np.conj(self.half[-k]))


def analyze(u: PeriodicScalar) -> FourierCoeffs:
    """Forward transform, normalized so coeff(0) is the mean."""
    half = np.fft.rfft(u.values) / u.n
    return FourierCoeffs(half, u.n)


def synthesize(c: FourierCoeffs) -> PeriodicScalar:
    """Inverse transform back to grid samples."""
    return PeriodicScalar(np.fft.irfft(c.half * c.n, c.n))


def average(u: PeriodicScalar) -> float:
    """Mean value, identical to coeff(0)."""
    return float(np.mean(u.values))


def _shift_half(half: np.ndarray, n: int, delta: float) -> np.ndarray:
    k = _wavenumbers(n)
    phase = np.exp(2j * np.pi * k * delta)
    out = half * phase
    # the Nyquist pair collapses to a cos mode; on the nodes a shift
    # scales it by cos(pi*n*delta) and keeps it real
    out[-1] = half[-1].real * np.cos(np.pi * n * delta)
    return out


def shift(u: PeriodicScalar, delta: float) -> PeriodicScalar:
    """Samples of theta -> u(theta + delta)."""
    half = np.fft.rfft(u.values) / u.n
    return PeriodicScalar(np.fft.irfft(_shift_half(half, u.n, delta) * u.n, u.n))


def derivative(u: PeriodicScalar) -> PeriodicScalar:
    """Spectral d/dtheta; the Nyquist bin is annihilated (odd operator)."""
    half = np.fft.rfft(u.values) / u.n
    k = _wavenumbers(u.n)
    dh = half * (2j * np.pi * k)
    dh[-1] = 0.0
    return PeriodicScalar(np.fft.irfft(dh * u.n, u.n))


def _solve_linear_shift(
    eta: PeriodicScalar, lam: float, rho: float, omega: float
) -> PeriodicScalar:
    """Solve lam*xi(theta) - rho*xi(theta+omega) = eta(theta) mode by mode.

    Divisors lam - rho*e(k*omega) stay away from zero when |lam| != |rho|.
    The Nyquist bin uses the grid eigenvalue cos(pi*n*omega) of the shift,
    which makes the identity exact on the nodes; that divisor can in
    principle degenerate, which is reported as a small-divisor failure.
    """
    n = eta.n
    half = np.fft.rfft(eta.values) / n
    k = _wavenumbers(n)
    div = lam - rho * np.exp(2j * np.pi * k * omega)
    nyq = lam - rho * np.cos(np.pi * n * omega)
    if abs(nyq) < _DIVISOR_FLOOR:
        raise SmallDivisorError(n // 2, abs(nyq))
    out = half / div
    out[-1] = half[-1].real / nyq
    return PeriodicScalar(np.fft.irfft(out * n, n))


def solve_contractive(
    eta: PeriodicScalar, sigma: float, omega: float
) -> PeriodicScalar:
    """Solve sigma*xi(theta) - xi(theta + omega) = eta(theta).

    Requires |sigma| < 1; then every divisor satisfies
    |sigma - e(k*omega)| >= 1 - |sigma| and the problem is uniformly
    well posed, with no small-divisor mechanism.
    """
    if abs(sigma) >= 1.0:
        raise ValueError(f"need |sigma| < 1, got {sigma}")
    return _solve_linear_shift(eta, sigma, 1.0, omega)


def solve_small_divisor(
    eta: PeriodicScalar, omega: float
) -> tuple[PeriodicScalar, float]:
    """Solve xi(theta) - xi(theta + omega) = eta(theta) - <eta>.

    Returns the zero-average solution together with <eta>, the exact
    obstruction.  Fails if any represented mode has a divisor
    |1 - e(k*omega)| below 1e-13, reporting the offending k.
    """
    n = eta.n
    half = np.fft.rfft(eta.values) / n
    k = _wavenumbers(n)
    div = 1.0 - np.exp(2j * np.pi * k * omega)
    mags = np.abs(div[1:-1])
    nyq = 1.0 - np.cos(np.pi * n * omega)
    worst = int(np.argmin(mags)) + 1 if mags.size else n // 2
    worst_mag = mags[worst - 1] if mags.size else abs(nyq)
    if abs(nyq) < worst_mag:
        worst, worst_mag = n // 2, abs(nyq)
    if worst_mag < _DIVISOR_FLOOR:
        raise SmallDivisorError(worst, float(worst_mag))
    out = np.empty_like(half)
    out[0] = 0.0
    out[1:-1] = half[1:-1] / div[1:-1]
    out[-1] = half[-1].real / nyq
    mean = float(half[0].real)
    return PeriodicScalar(np.fft.irfft(out * n, n)), mean


def tail_fraction(u: PeriodicScalar, band: float) -> float:
    """l1 mass fraction of the modes with |k| > (1 - band)*(n/2).

    Gauges how close the representation is to spectral exhaustion; 0 for
    well-resolved data, approaching 1 when the tail carries everything.
    """
    if not 0.0 < band < 1.0:
        raise ValueError(f"band must lie in (0, 1), got {band}")
    n = u.n
    half = np.abs(np.fft.rfft(u.values)) / n
    weights = np.full(n // 2 + 1, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    mass = weights * half
    total = float(np.sum(mass))
    if total == 0.0:
        return 0.0
    cutoff = (1.0 - band) * (n / 2.0)
    k = _wavenumbers(n)
    return float(np.sum(mass[k > cutoff])) / total


def resample(u: PeriodicScalar, n_new: int) -> PeriodicScalar:
    """Spectral interpolation onto a finer or coarser dyadic grid.

    Refining splits the Nyquist amplitude into the +-n/2 pair it stands
    for; coarsening folds that pair back, so refine-then-coarsen is the
    identity.  Modes beyond the new band are dropped.
    """
    _check_size(n_new)
    n = u.n
    if n_new == n:
        return PeriodicScalar(u.values)
    half = np.fft.rfft(u.values) / n
    out = np.zeros(n_new // 2 + 1, dtype=complex)
    if n_new > n:
        out[: n // 2] = half[: n // 2]
        out[n // 2] = half[n // 2].real / 2.0
    else:
        out[: n_new // 2] = half[: n_new // 2]
        out[-1] = 2.0 * half[n_new // 2].real
    return PeriodicScalar(np.fft.irfft(out * n_new, n_new))


def dealias(u: PeriodicScalar) -> PeriodicScalar:
    """Zero all modes with |k| > n/3 (the classical 1/3 truncation).

    Applied to pointwise products and compositions so that quadratic
    nonlinearities cannot fold spurious energy back into retained modes.
    """
    n = u.n
    half = np.fft.rfft(u.values)
    half[n // 3 + 1 :] = 0.0
    return PeriodicScalar(np.fft.irfft(half, n))
