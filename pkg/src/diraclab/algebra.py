"""Exact 4x4 Dirac/Pauli matrix algebra.

Everything operating on light-like frequencies lives here: the principal
symbol p(tau, xi) = -tau*I - alpha.xi and its co-symbol tau*I - alpha.xi,
explicit kernel bases on the light cone, the rank-2 projectors
(1 -+ alpha.xi0)/2, a scaling-and-squaring matrix exponential used as the
brute-force transport oracle, the closed-form free propagator
exp(-i t (alpha.xi + beta)), and the affine coset-intersection solver.

Complex 4-vectors ("spinors") are plain numpy arrays of shape (4,).  Because
several downstream maps are only real-linear (they involve conjugates), this
module also provides the realification helpers mapping C^4 <-> R^8 and
complex matrices to their 8x8 real representations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, NoIntersectionError

# ---------------------------------------------------------------------------
# Generator matrices (exact integer / +-i entries)
# ---------------------------------------------------------------------------

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA = (SIGMA1, SIGMA2, SIGMA3)

ZERO2 = np.zeros((2, 2), dtype=complex)


def _off_diag(s):
    return np.block([[ZERO2, s], [s, ZERO2]])


ALPHA1 = _off_diag(SIGMA1)
ALPHA2 = _off_diag(SIGMA2)
ALPHA3 = _off_diag(SIGMA3)
ALPHA = (ALPHA1, ALPHA2, ALPHA3)
# stacked (3, 4, 4) for einsum contractions against frequency arrays
ALPHA_STACK = np.stack(ALPHA)

BETA = np.block([[I2, ZERO2], [ZERO2, -I2]])
BETA_DIAG = np.array([1.0, 1.0, -1.0, -1.0])

LIGHTLIKE_TOL = 1e-12


def alpha_dot(xi) -> np.ndarray:
    """alpha . xi = sum_j xi_j alpha_j for xi of shape (..., 3); returns (..., 4, 4)."""
    xi = np.asarray(xi, dtype=float)
    return np.einsum("...k,kij->...ij", xi, ALPHA_STACK)


# ---------------------------------------------------------------------------
# Covectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Covector:
    """Frequency covector (tau, xi) with xi in R^3."""

    tau: float
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float).reshape(3))

    @property
    def is_lightlike(self) -> bool:
        xi2 = float(self.xi @ self.xi)
        return xi2 > 0.0 and abs(self.tau**2 - xi2) <= LIGHTLIKE_TOL * max(1.0, xi2)

    @property
    def is_future(self) -> bool:
        return self.tau > 0.0

    def require_lightlike(self):
        if not self.is_lightlike:
            raise GeometryError(
                f"covector (tau={self.tau}, xi={self.xi}) is not lightlike"
            )


def principal_symbol(eta: Covector) -> np.ndarray:
    """p(tau, xi) = -tau*I - alpha.xi, singular exactly on the light cone."""
    return -eta.tau * I4 - alpha_dot(eta.xi)


def cosymbol(eta: Covector) -> np.ndarray:
    """tau*I - alpha.xi.

    Multiplying against the principal symbol scalarizes it:
    cosymbol(eta) @ principal_symbol(eta) = (|xi|^2 - tau^2) * I, which
    vanishes identically on the light cone.
    """
    return eta.tau * I4 - alpha_dot(eta.xi)


@dataclass(frozen=True)
class KernelBasis:
    """Two spinors spanning the complex 2-dimensional kernel of p(tau, xi)."""

    v_a: np.ndarray
    v_b: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """4x2 complex matrix with the basis vectors as columns."""
        return np.stack([self.v_a, self.v_b], axis=1)

    @property
    def real_matrix(self) -> np.ndarray:
        """8x4 real matrix whose columns realify (v_a, i v_a, v_b, i v_b)."""
        cols = [self.v_a, 1j * self.v_a, self.v_b, 1j * self.v_b]
        return np.stack([realify(c) for c in cols], axis=1)

    def orthonormalized(self) -> "KernelBasis":
        q, _ = np.linalg.qr(self.matrix)
        return KernelBasis(q[:, 0], q[:, 1])


def kernel_basis(eta: Covector) -> KernelBasis:
    """Kernel of p(tau, xi) on the light cone, in closed form.

    Returns exactly span{(xi3, xi1+i xi2, -tau, 0), (-xi1+i xi2, xi3, 0, tau)},
    unnormalized.  The two vectors are independent whenever tau != 0, which
    holds on the light cone since xi != 0.
    """
    eta.require_lightlike()
    x1, x2, x3 = eta.xi
    t = eta.tau
    v_a = np.array([x3, x1 + 1j * x2, -t, 0.0], dtype=complex)
    v_b = np.array([-x1 + 1j * x2, x3, 0.0, t], dtype=complex)
    return KernelBasis(v_a, v_b)


def light_projector(xi0) -> np.ndarray:
    """Orthogonal projector (1 - alpha.xi0)/2 onto ker(1 + alpha.xi0), |xi0| = 1."""
    xi0 = np.asarray(xi0, dtype=float).reshape(3)
    if abs(np.linalg.norm(xi0) - 1.0) > 1e-10:
        raise GeometryError(f"xi0 must be a unit vector, got |xi0|={np.linalg.norm(xi0)}")
    return 0.5 * (I4 - alpha_dot(xi0))


# ---------------------------------------------------------------------------
# Matrix exponentials
# ---------------------------------------------------------------------------


def matrix_exponential(a: np.ndarray, s: float = 1.0) -> np.ndarray:
    """exp(s*a) by scaling-and-squaring with a Taylor series.

    Terms are accumulated until they fall below 1e-16 of the running sum;
    this routine is the accuracy oracle for constant-coefficient transport,
    so it favors precision over speed.  Works for any square matrix, real or
    complex.
    """
    a = np.asarray(a)
    m = s * a.astype(complex if np.iscomplexobj(a) else float)
    nrm = np.linalg.norm(m, np.inf)
    squarings = max(0, int(np.ceil(np.log2(nrm / 0.5))) if nrm > 0.5 else 0)
    m = m / (2**squarings)
    n = m.shape[0]
    out = np.eye(n, dtype=m.dtype)
    term = np.eye(n, dtype=m.dtype)
    for k in range(1, 60):
        term = term @ m / k
        out = out + term
        if np.linalg.norm(term, np.inf) < 1e-16 * max(1.0, np.linalg.norm(out, np.inf)):
            break
    for _ in range(squarings):
        out = out @ out
    return out


def free_propagator(xi, t: float) -> np.ndarray:
    """exp(-i t (alpha.xi + beta)) in closed form.

    (alpha.xi + beta)^2 = (1 + |xi|^2) I by the anticommutation relations, so
    with lam = sqrt(1 + |xi|^2) the exponential is
    cos(t lam) I - i sin(t lam)/lam (alpha.xi + beta).  Unitary for real t.
    Accepts xi of shape (..., 3) and returns (..., 4, 4).
    """
    xi = np.asarray(xi, dtype=float)
    h = alpha_dot(xi) + BETA
    lam = np.sqrt(1.0 + np.sum(xi * xi, axis=-1))
    c = np.cos(t * lam)[..., None, None]
    s = (np.sin(t * lam) / lam)[..., None, None]
    return c * np.broadcast_to(I4, h.shape) - 1j * s * h


# ---------------------------------------------------------------------------
# Coset intersection (affine version of the transversality lemma)
# ---------------------------------------------------------------------------


def coset_intersect(v1, basis1: KernelBasis, v2, basis2: KernelBasis,
                    tol: float = 1e-10) -> np.ndarray:
    """Unique w in (v1 + span basis1) ^ (v2 + span basis2).

    Solves the stacked 4x4 complex system [B1 | -B2] (a; b) = v2 - v1 by SVD
    so rank deficiency (overlapping spans) is detected gracefully instead of
    amplifying noise through an explicit inverse.
    """
    v1 = np.asarray(v1, dtype=complex).reshape(4)
    v2 = np.asarray(v2, dtype=complex).reshape(4)
    stacked = np.hstack([basis1.matrix, -basis2.matrix])
    u, sv, vh = np.linalg.svd(stacked)
    scale = sv[0] if sv[0] > 0 else 1.0
    if sv[-1] <= 1e-10 * scale:
        # spans overlap: either infinitely many solutions or none
        rhs = v2 - v1
        coeffs, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
        resid = np.linalg.norm(stacked @ coeffs - rhs)
        if resid > tol * (1.0 + np.linalg.norm(rhs)):
            raise NoIntersectionError(
                f"cosets do not intersect (residual {resid:.3e})"
            )
        raise GeometryError("kernel spans intersect nontrivially; no unique point")
    coeffs = vh.conj().T @ ((u.conj().T @ (v2 - v1)) / sv)
    w = v1 + basis1.matrix @ coeffs[:2]
    w_check = v2 + basis2.matrix @ coeffs[2:]
    resid = np.linalg.norm(w - w_check)
    if resid > tol * (1.0 + np.linalg.norm(w)):
        raise NoIntersectionError(f"coset memberships inconsistent ({resid:.3e})")
    return w


# ---------------------------------------------------------------------------
# Realification helpers: C^4 <-> R^8
# ---------------------------------------------------------------------------

# multiplication by i in realified coordinates
COMPLEX_STRUCTURE = np.block(
    [[np.zeros((4, 4)), -np.eye(4)], [np.eye(4), np.zeros((4, 4))]]
)


def realify(z) -> np.ndarray:
    """C^4 vector (or batch (..., 4)) -> stacked (Re, Im) of shape (..., 8)."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def unrealify(r) -> np.ndarray:
    """Inverse of realify: (..., 8) real -> (..., 4) complex."""
    r = np.asarray(r, dtype=float)
    return r[..., :4] + 1j * r[..., 4:]


def realify_matrix(m) -> np.ndarray:
    """8x8 real representation of a complex-linear map on C^4."""
    m = np.asarray(m, dtype=complex)
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def real_linear_matrix(apply_fn) -> np.ndarray:
    """8x8 real matrix of an arbitrary real-linear map on C^4.

    ``apply_fn`` maps a complex 4-vector to a complex 4-vector and need only
    be additive over real scalars (conjugations allowed).
    """
    cols = np.empty((8, 8))
    for k in range(4):
        e = np.zeros(4, dtype=complex)
        e[k] = 1.0
        cols[:, k] = realify(apply_fn(e))
        cols[:, 4 + k] = realify(apply_fn(1j * e))
    return cols


def is_complex_linear(m8: np.ndarray, tol: float = 1e-10) -> bool:
    """True when an 8x8 realified operator commutes with multiplication by i."""
    comm = m8 @ COMPLEX_STRUCTURE - COMPLEX_STRUCTURE @ m8
    return np.linalg.norm(comm) <= tol * max(1.0, np.linalg.norm(m8))


def complexify_matrix(m8: np.ndarray) -> np.ndarray:
    """Recover the 4x4 complex matrix from a complex-linear 8x8 realification."""
    return m8[:4, :4] + 1j * m8[4:, :4]
