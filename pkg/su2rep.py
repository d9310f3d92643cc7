"""SU(2) irreducible representations on homogeneous polynomials.

V_k is the space of degree-k homogeneous polynomials in (Q1, Q2), carried
as coefficient vectors in the orthonormal basis

    e_a = sqrt((k+1)/(2*pi) * C(k, a)) * Q1**a * Q2**(k-a),   a = 0..k.

The label a corresponds to the magnetic quantum number m = k/2 - a. Group
elements act by substitution, (g . s)[p] = s[g^-1 p].
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Optional, Union

import numpy as np
from scipy.special import gammaln, xlogy

logger = logging.getLogger(__name__)


class RepresentationError(ValueError):
    """Raised for invalid levels, indices, vectors or group elements."""


# Tolerances for group-element validation and for the realness check on
# d-matrix entries.
UNITARY_TOL = 1e-12
UNIT_NORM_TOL = 1e-10
IMAG_TOL = 1e-10

MagneticNumber = Union[int, float, Fraction]


@dataclass(frozen=True)
class RepLevel:
    """Tensor power k (twice the spin)."""
    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)):
            raise RepresentationError(f"k must be an integer, got {self.k!r}")
        if self.k < 0:
            raise RepresentationError(f"k must be >= 0, got {self.k}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def dim(self) -> int:
        return self.k + 1

    @property
    def j(self) -> float:
        return self.k / 2


@dataclass(frozen=True, eq=False)
class RepVector:
    """A vector of V_k in the e_a basis.

    The coefficient array is copied and frozen on construction.
    """
    level: RepLevel
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex).reshape(-1)
        if coeffs.shape[0] != self.level.dim:
            raise RepresentationError(
                f"expected {self.level.dim} coefficients for k={self.level.k}, "
                f"got {coeffs.shape[0]}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def scaled(self, factor: complex) -> "RepVector":
        return RepVector(self.level, factor * self.coeffs)

    def allclose(self, other: "RepVector", atol: float = 1e-10) -> bool:
        _require_same_level(self, other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs), initial=0.0) <= atol)


@dataclass(frozen=True, eq=False)
class SU2Element:
    """A 2x2 special unitary matrix."""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise RepresentationError(f"SU(2) element must be 2x2, got shape {m.shape}")
        unitary_defect = np.max(np.abs(m @ m.conj().T - np.eye(2)))
        if unitary_defect > UNITARY_TOL:
            raise RepresentationError(f"matrix is not unitary (defect {unitary_defect:.3e})")
        det_defect = abs(np.linalg.det(m) - 1.0)
        if det_defect > UNITARY_TOL:
            raise RepresentationError(f"determinant is not 1 (defect {det_defect:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "SU2Element":
        return cls(np.eye(2, dtype=complex))

    @classmethod
    def rotation_z(cls, angle: float) -> "SU2Element":
        """U_z(angle) = diag(e^{i angle/2}, e^{-i angle/2}), covering R_z(angle)."""
        half = 0.5 * angle
        return cls(np.diag([np.exp(1j * half), np.exp(-1j * half)]))

    @classmethod
    def rotation_y(cls, angle: float) -> "SU2Element":
        """U_y(angle), covering the active rotation R_y(angle)."""
        c, s = np.cos(0.5 * angle), np.sin(0.5 * angle)
        return cls(np.array([[c, s], [-s, c]], dtype=complex))

    @classmethod
    def random(cls, rng: Optional[np.random.Generator] = None) -> "SU2Element":
        """Haar-random element from a normalised Gaussian quaternion."""
        rng = rng if rng is not None else np.random.default_rng()
        x = rng.normal(size=4)
        x /= np.linalg.norm(x)
        a = x[0] + 1j * x[3]
        b = x[2] + 1j * x[1]
        return cls(np.array([[a, -np.conj(b)], [b, np.conj(a)]]))

    def inverse(self) -> "SU2Element":
        return SU2Element(self.matrix.conj().T)

    def __matmul__(self, other: "SU2Element") -> "SU2Element":
        if not isinstance(other, SU2Element):
            return NotImplemented
        return SU2Element(self.matrix @ other.matrix)

    def apply(self, q: Any) -> np.ndarray:
        """Apply to spinors of shape (..., 2); HopfPoint-like objects accepted."""
        return as_spinor(q) @ self.matrix.T

    def rotation_matrix(self) -> np.ndarray:
        """The SO(3) rotation covered by this element under the Hopf projection."""
        columns = []
        for basis_spinor in _AXIS_SPINORS:
            columns.append(_project(self.apply(basis_spinor)))
        return np.column_stack(columns)


def _project(q: np.ndarray) -> np.ndarray:
    w = 2.0 * q[..., 0] * np.conj(q[..., 1])
    z = np.abs(q[..., 1]) ** 2 - np.abs(q[..., 0]) ** 2
    return np.stack([w.real, w.imag, z], axis=-1)


# Spinors projecting onto the x, y and z unit vectors.
_AXIS_SPINORS = (
    np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    np.array([1j, 1.0], dtype=complex) / np.sqrt(2.0),
    np.array([0.0, 1.0], dtype=complex),
)


def as_spinor(q: Any) -> np.ndarray:
    """Coerce a HopfPoint (anything with ``.vector``) or array to complex (..., 2)."""
    arr = np.asarray(getattr(q, "vector", q), dtype=complex)
    if arr.shape[-1:] != (2,):
        raise RepresentationError(f"spinor must have trailing dimension 2, got {arr.shape}")
    return arr


# ── basis normalisation ──

@lru_cache(maxsize=64)
def _log_norms(k: int) -> np.ndarray:
    a = np.arange(k + 1)
    log_binom = gammaln(k + 1) - gammaln(a + 1) - gammaln(k - a + 1)
    out = 0.5 * (np.log((k + 1) / (2.0 * np.pi)) + log_binom)
    out.setflags(write=False)
    return out


def _check_index(level: RepLevel, a: int) -> int:
    if isinstance(a, bool) or not isinstance(a, (int, np.integer)):
        raise RepresentationError(f"basis index must be an integer, got {a!r}")
    if not 0 <= a <= level.k:
        raise RepresentationError(f"basis index {a} out of range 0..{level.k}")
    return int(a)


def basis_norm_coeff(level: RepLevel, a: int) -> float:
    """sqrt((k+1)/(2*pi) * C(k, a)), evaluated through log-gamma."""
    a = _check_index(level, a)
    return float(np.exp(_log_norms(level.k)[a]))


def basis_vector(level: RepLevel, a: int) -> RepVector:
    a = _check_index(level, a)
    coeffs = np.zeros(level.dim, dtype=complex)
    coeffs[a] = 1.0
    return RepVector(level, coeffs)


def random_vector(level: RepLevel, rng: np.random.Generator, normalize: bool = True) -> RepVector:
    coeffs = rng.normal(size=level.dim) + 1j * rng.normal(size=level.dim)
    if normalize:
        coeffs /= np.linalg.norm(coeffs)
    return RepVector(level, coeffs)


def monomial_table(q: Any, k: int) -> np.ndarray:
    """Normalised monomials e_a[q] for spinors q of shape (..., 2).

    Returns an array of shape (..., k+1). Powers are combined with the
    basis norms in log space so large k neither overflows nor underflows
    prematurely; 0**0 is taken as 1.
    """
    q = as_spinor(q)
    a = np.arange(k + 1)
    q1 = q[..., 0][..., None]
    q2 = q[..., 1][..., None]
    log_mag = _log_norms(k) + xlogy(a, np.abs(q1)) + xlogy(k - a, np.abs(q2))
    phase = a * np.angle(q1) + (k - a) * np.angle(q2)
    return np.exp(log_mag + 1j * phase)


# ── sections and inner products ──

def _require_same_level(v: RepVector, w: RepVector) -> None:
    if v.level.k != w.level.k:
        raise RepresentationError(f"level mismatch: k={v.level.k} vs k={w.level.k}")


def evaluate_section(v: RepVector, p: Any) -> complex:
    """Evaluate s[p] = sum_a v_a e_a[p] at a unit spinor p.

    Raises:
        RepresentationError: if p is not a unit vector of C^2.
    """
    q = as_spinor(p)
    if q.shape != (2,):
        raise RepresentationError(f"expected a single spinor, got shape {q.shape}")
    norm_defect = abs(np.linalg.norm(q) - 1.0)
    if norm_defect > UNIT_NORM_TOL:
        raise RepresentationError(f"point is not unit-norm (defect {norm_defect:.3e})")
    return complex(monomial_table(q, v.level.k) @ v.coeffs)


def evaluate_sections(v: RepVector, q: Any) -> np.ndarray:
    """Vectorised evaluate_section over spinors of shape (..., 2), unchecked."""
    return monomial_table(q, v.level.k) @ v.coeffs


def rep_inner(v: RepVector, w: RepVector) -> complex:
    """<v, w>, antilinear in v."""
    _require_same_level(v, w)
    return complex(np.vdot(v.coeffs, w.coeffs))


# ── group action ──

def representation_matrix(g: SU2Element, level: RepLevel) -> np.ndarray:
    """Matrix of v -> g . v in the e_a basis.

    The substitution Q -> g^-1 Q is applied one linear factor at a time:
    e_a at degree n is Q1 (or Q2) times a basis vector at degree n-1, so
    each column at degree n is the image of a degree-(n-1) column times
    the substituted linear form, renormalised. Every step only combines
    same-phase terms of unit-norm columns, which keeps round-off at the
    level of k * eps even where the closed binomial sum cancels badly.
    """
    if not isinstance(g, SU2Element):
        raise RepresentationError(f"expected an SU2Element, got {type(g).__name__}")
    inv = g.inverse().matrix
    A, B = inv[0, 0], inv[0, 1]
    C, D = inv[1, 0], inv[1, 1]

    mat = np.ones((1, 1), dtype=complex)
    for n in range(1, level.k + 1):
        new = np.zeros((n + 1, n + 1), dtype=complex)
        r = np.arange(n)
        rows = r[:, None]
        cols = np.arange(1, n + 1)[None, :]
        # columns a >= 1: e_a = sqrt((n+1)/a) * Q1 * e_{a-1}
        new[1:, 1:] += A * np.sqrt((rows + 1) / cols) * mat
        new[:-1, 1:] += B * np.sqrt((n - rows) / cols) * mat
        # column 0: e_0 = sqrt((n+1)/n) * Q2 * e_0
        new[1:, 0] += C * np.sqrt((r + 1) / n) * mat[:, 0]
        new[:-1, 0] += D * np.sqrt((n - r) / n) * mat[:, 0]
        mat = new
    return mat


def act(g: SU2Element, v: RepVector) -> RepVector:
    """(g . v)[p] = v[g^-1 p]."""
    return RepVector(v.level, representation_matrix(g, v.level) @ v.coeffs)


def magnetic_numbers(level: RepLevel) -> np.ndarray:
    """m = k/2 - a for a = 0..k."""
    return level.k / 2.0 - np.arange(level.dim)


def jz_apply(v: RepVector) -> RepVector:
    """J_z e_a = (k/2 - a) e_a."""
    return RepVector(v.level, magnetic_numbers(v.level) * v.coeffs)


# ── magnetic quantum numbers and the d-matrix ──

def magnetic_index(level: RepLevel, m: MagneticNumber) -> int:
    """Map a half-integer m to the basis index a = k/2 - m.

    Raises:
        RepresentationError: if 2m is not an integer, k - 2m is odd, or
            |m| > k/2.
    """
    twice = 2.0 * float(m)
    twice_m = int(round(twice))
    if abs(twice - twice_m) > 1e-9:
        raise RepresentationError(f"m={m} is not a half-integer")
    if (level.k - twice_m) % 2:
        raise RepresentationError(f"m={m} has the wrong integrality for j={level.j}")
    if abs(twice_m) > level.k:
        raise RepresentationError(f"m={m} outside -{level.j}..{level.j}")
    return (level.k - twice_m) // 2


def magnetic_number(level: RepLevel, a: int) -> float:
    a = _check_index(level, a)
    return level.k / 2.0 - a


def _real_part_checked(values: np.ndarray, what: str) -> np.ndarray:
    imag = float(np.max(np.abs(np.imag(values)), initial=0.0))
    if imag > IMAG_TOL:
        raise RepresentationError(f"{what} has imaginary part {imag:.3e}")
    return np.real(values)


def wigner_d_matrix(level: RepLevel, beta: float) -> np.ndarray:
    """Real d-matrix of U_y(beta), rows/columns indexed by a = k/2 - m."""
    mat = representation_matrix(SU2Element.rotation_y(beta), level)
    return _real_part_checked(mat, f"d-matrix at beta={beta}")


def wigner_d_exact(level: RepLevel, m2: MagneticNumber, m1: MagneticNumber, beta: float) -> float:
    """d^j_{m2 m1}(beta) = <j m2| U_y(beta) |j m1>."""
    a2 = magnetic_index(level, m2)
    a1 = magnetic_index(level, m1)
    mat = representation_matrix(SU2Element.rotation_y(beta), level)
    value = _real_part_checked(np.asarray(mat[a2, a1]), f"d^{level.j}_{m2},{m1}")
    return float(value)
