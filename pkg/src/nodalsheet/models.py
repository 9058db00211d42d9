"""Stationary covariance models for the Gaussian fields sampled downstream.

Each model bundles a unit-variance covariance function, its spectral
density, the matrix of second spectral moments, and (for the isotropic
built-ins) closed-form radial derivatives used by the pair-density code.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

BUILTIN_MODELS = ("bargmann-fock", "large-band", "synthetic-test")

# radius below which the large-band Bessel form switches to its Taylor series
_LB_SERIES_RADIUS = 1e-4


@dataclass(frozen=True)
class CovarianceModel:
    """A stationary, unit-variance covariance/spectral pair.

    covariance and spectral_density accept arrays whose last axis has
    length d (a bare scalar/array is accepted when d == 1) and return the
    corresponding values.  Models are immutable and safe to share across
    workers.
    """

    name: str
    d: int
    k: int
    covariance: Callable[[np.ndarray], np.ndarray]
    spectral_density: Optional[Callable[[np.ndarray], np.ndarray]]
    spectral_moment_matrix: np.ndarray
    h2_decay_note: str
    # radial_derivatives(r) -> (rho, rho', rho'') for isotropic models
    radial_derivatives: Optional[Callable[[np.ndarray], tuple]] = None
    # spectral_sampler(rng, M) -> (M, d) frequencies drawn from the
    # normalized spectral measure (used by the superposition sampler)
    spectral_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    # deterministic test function (synthetic-test only): field_func(*coords)
    field_func: Optional[Callable] = None

    def __post_init__(self):
        lam = np.asarray(self.spectral_moment_matrix, dtype=float)
        if lam.shape != (self.d, self.d):
            raise ValueError(f"spectral_moment_matrix must be {self.d}x{self.d}")
        if not np.allclose(lam, lam.T):
            raise ValueError("spectral_moment_matrix must be symmetric")
        if np.linalg.eigvalsh(lam).min() <= 0:
            raise ValueError("spectral_moment_matrix must be positive definite")

    @property
    def is_random_field(self) -> bool:
        return self.field_func is None

    def covariance_at(self, lags) -> np.ndarray:
        """Evaluate the covariance at lag vectors (last axis = d)."""
        x = _as_lags(lags, self.d)
        return np.asarray(self.covariance(x))


def _as_lags(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., np.newaxis]
    if x.shape[-1] != d:
        raise ValueError(f"lag vectors must have last axis of length {d}")
    return x


def _bargmann_fock(d: int) -> CovarianceModel:
    def cov(x):
        x = _as_lags(x, d)
        return np.exp(-np.sum(x * x, axis=-1))

    def sdens(lam):
        lam = _as_lags(lam, d)
        return (4.0 * np.pi) ** (-d / 2.0) * np.exp(-0.25 * np.sum(lam * lam, axis=-1))

    def radial(r):
        r = np.asarray(r, dtype=float)
        e = np.exp(-r * r)
        return e, -2.0 * r * e, (4.0 * r * r - 2.0) * e

    def sampler(rng, M):
        # spectral measure is N(0, 2 I_d)
        return rng.normal(scale=np.sqrt(2.0), size=(M, d))

    return CovarianceModel(
        name="bargmann-fock",
        d=d,
        k=1,
        covariance=cov,
        spectral_density=sdens,
        spectral_moment_matrix=2.0 * np.eye(d),
        h2_decay_note=(
            "Gaussian covariance exp(-|x|^2): the covariance and all its "
            "derivatives decay super-exponentially, so any square-integrable "
            "envelope works as the admissible decay bound."
        ),
        radial_derivatives=radial,
        spectral_sampler=sampler,
    )


def _large_band(d: int) -> CovarianceModel:
    if d != 2:
        raise ValueError("large-band model is only provided for d=2")

    def radial(r):
        r = np.asarray(r, dtype=float)
        small = np.abs(r) < _LB_SERIES_RADIUS
        rs = np.where(small, 1.0, r)
        j1 = special.j1(rs)
        j2 = special.jv(2, rs)
        j3 = special.jv(3, rs)
        rho = 2.0 * j1 / rs
        d1 = -2.0 * j2 / rs
        d2 = -(j1 - j3) / rs + 2.0 * j2 / rs**2
        r2 = r * r
        rho = np.where(small, 1.0 - r2 / 8.0 + r2 * r2 / 192.0, rho)
        d1 = np.where(small, -r / 4.0 + r * r2 / 48.0, d1)
        d2 = np.where(small, -0.25 + r2 / 16.0, d2)
        return rho, d1, d2

    def cov(x):
        x = _as_lags(x, d)
        r = np.sqrt(np.sum(x * x, axis=-1))
        return radial(r)[0]

    def sdens(lam):
        lam = _as_lags(lam, d)
        inside = np.sum(lam * lam, axis=-1) <= 1.0
        return np.where(inside, 1.0 / np.pi, 0.0)

    def sampler(rng, M):
        # uniform draws from the unit disc
        rad = np.sqrt(rng.random(M))
        th = rng.random(M) * 2.0 * np.pi
        return np.column_stack([rad * np.cos(th), rad * np.sin(th)])

    return CovarianceModel(
        name="large-band",
        d=d,
        k=1,
        covariance=cov,
        spectral_density=sdens,
        spectral_moment_matrix=0.25 * np.eye(d),
        h2_decay_note=(
            "Bessel-type covariance 2 J1(r)/r: decays like r^(-3/2), which "
            "is square-integrable in the radial variable but too slow for "
            "machine-zero torus padding; embeddings rely on the clip policy."
        ),
        radial_derivatives=radial,
        spectral_sampler=sampler,
    )


def _synthetic(d: int, field_func, covariance, spectral_moment_matrix) -> CovarianceModel:
    if covariance is None:
        def covariance(x):  # grid delta: white-noise-like on any lattice
            x = _as_lags(x, d)
            return np.where(np.sum(x * x, axis=-1) == 0.0, 1.0, 0.0)

    lam = np.eye(d) if spectral_moment_matrix is None else np.asarray(spectral_moment_matrix, float)
    return CovarianceModel(
        name="synthetic-test",
        d=d,
        k=d if d == 1 else 1,
        covariance=covariance,
        spectral_density=None,
        spectral_moment_matrix=lam,
        h2_decay_note="synthetic test model; no decay claim",
        field_func=field_func,
    )


def make_model(
    name: str,
    d: int,
    *,
    field_func=None,
    covariance=None,
    spectral_moment_matrix=None,
) -> CovarianceModel:
    """Build a covariance model by name.

    name must be one of "bargmann-fock", "large-band" (d=2 only) or
    "synthetic-test".  The synthetic model wraps a caller-provided
    deterministic function (not a random field) so that the nodal-geometry
    code can be exercised against known answers; its covariance defaults
    to a grid delta.
    """
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension d={d}; expected 1 or 2")
    if name == "bargmann-fock":
        return _bargmann_fock(d)
    if name == "large-band":
        return _large_band(d)
    if name == "synthetic-test":
        return _synthetic(d, field_func, covariance, spectral_moment_matrix)
    raise ValueError(f"unknown model {name!r}; expected one of {BUILTIN_MODELS}")


def spectral_moments(model: CovarianceModel) -> np.ndarray:
    """Return the second spectral moment matrix -Hess r(0)."""
    lam = np.array(model.spectral_moment_matrix, dtype=float, copy=True)
    if np.linalg.eigvalsh(lam).min() <= 0:
        raise ValueError("spectral moment matrix is not positive definite")
    return lam
