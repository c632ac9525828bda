"""
Dense symmetric linear algebra used by the solvers: spectral decomposition, LDL without pivoting,
shifted inverses, integer powers, base-(1+eps) exponentials and randomized extreme-eigenvalue estimates.
All functions are pure and return re-symmetrized float64 arrays.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from packsdp.src.errors import ConvergenceFailure, InvalidMatrix, MatrixOverflow, NotPSD, ShiftInSpectrum

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-8
ZERO_PIVOT_TOL = 1e-10
LDL_TOL_ROUNDS = 4
# log of the largest finite float64
LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)

Side = Literal["f_minus", "minus_f"]
FMINUS: Side = "f_minus"
MINUSF: Side = "minus_f"


@dataclass(frozen=True)
class SpectralDecomp:
    eigenvalues: np.ndarray  # ascending
    basis: np.ndarray  # columns are eigenvectors

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> np.ndarray:
        return symmetrize((self.basis * self.eigenvalues) @ self.basis.T)


@dataclass(frozen=True)
class LdlFactors:
    L: np.ndarray
    D: np.ndarray
    zero_mask: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return symmetrize((self.L * self.D) @ self.L.T)


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def as_symmetric(M, name: str = "matrix") -> np.ndarray:
    """Validate a square, finite, symmetric input and return a symmetrized float64 copy."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidMatrix(f"{name}: expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix(f"{name}: non-finite entries")
    scale = 1.0 + float(np.max(np.abs(A)))
    asym = float(np.max(np.abs(A - A.T)))
    if asym > SYMMETRY_TOL * scale:
        raise InvalidMatrix(f"{name}: not symmetric (max |A - A^T| = {asym:.3e})")
    return symmetrize(A)


def inner(A: np.ndarray, B: np.ndarray) -> float:
    """Trace inner product A • B for symmetric arguments."""
    return float(np.einsum("ij,ij->", A, B))


def eig_sym(M) -> SpectralDecomp:
    A = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix("eig_sym: non-finite entries")
    w, V = np.linalg.eigh(symmetrize(A))
    return SpectralDecomp(eigenvalues=w, basis=V)


def lambda_min(M) -> float:
    return float(np.linalg.eigvalsh(symmetrize(np.asarray(M, dtype=np.float64)))[0])


def lambda_max(M) -> float:
    return float(np.linalg.eigvalsh(symmetrize(np.asarray(M, dtype=np.float64)))[-1])


def _eliminate(A: np.ndarray, pivot_tol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = A.shape[0]
    L = np.eye(n)
    D = np.zeros(n)
    raw = np.zeros(n)
    zero = np.zeros(n, dtype=bool)
    for k in range(n):
        d = A[k, k] - float(np.dot(L[k, :k] ** 2, D[:k]))
        raw[k] = d
        if d <= pivot_tol:
            zero[k] = True
            continue
        D[k] = d
        if k + 1 < n:
            accum = L[k + 1 :, :k] @ (L[k, :k] * D[:k])
            L[k + 1 :, k] = (A[k + 1 :, k] - accum) / d
    return L, D, zero, raw


def ldl(M) -> LdlFactors:
    """
    M = L diag(D) L^T for symmetric PSD M, no pivoting.
    A pivot is zero when d <= 1e-10 max(D); zero_mask records it, D is 0 there and so is its column of L
    below the diagonal. For PSD input max(D) <= max diag(M), so elimination starts from that bound and is
    repeated with the tolerance taken from the computed D until no masked pivot lies between the two.
    """
    A = as_symmetric(M, "ldl input")
    lmin = lambda_min(A)
    if lmin < -PSD_TOL:
        raise NotPSD(f"ldl: matrix is indefinite (lambda_min={lmin:.3e})")
    n = A.shape[0]
    tol = ZERO_PIVOT_TOL * max(float(np.max(np.diag(A))), 0.0) if n else 0.0
    for _ in range(LDL_TOL_ROUNDS):
        L, D, zero, raw = _eliminate(A, tol)
        d_tol = ZERO_PIVOT_TOL * (float(np.max(D)) if n else 0.0)
        if d_tol >= tol or not np.any(zero & (raw > d_tol)):
            break
        tol = d_tol
    return LdlFactors(L=L, D=D, zero_mask=zero)


def shifted_inverse(F, theta: float, side: Side = FMINUS) -> np.ndarray:
    """(F - theta I)^{-1} for side f_minus, (theta I - F)^{-1} for side minus_f, via Cholesky of the shift."""
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    if side == FMINUS:
        S = F - theta * np.eye(n)
    elif side == MINUSF:
        S = theta * np.eye(n) - F
    else:
        raise ValueError(f"Unknown side: {side}")
    try:
        chol = np.linalg.cholesky(symmetrize(S))
    except np.linalg.LinAlgError as e:
        raise ShiftInSpectrum(f"shift theta={theta:.6e} is not strictly outside the spectrum ({side})") from e
    chol_inv = np.linalg.solve(chol, np.eye(n))
    return symmetrize(chol_inv.T @ chol_inv)


def matrix_power_int(M, k: int) -> np.ndarray:
    """M^k by repeated squaring."""
    if k < 1:
        raise ValueError(f"matrix_power_int: k must be >= 1, got {k}")
    base = symmetrize(np.asarray(M, dtype=np.float64))
    result = None
    while k:
        if k & 1:
            result = base if result is None else symmetrize(result @ base)
        k >>= 1
        if k:
            base = symmetrize(base @ base)
    return result


def exp_base(M, base: float, shift: float = 0.0) -> np.ndarray:
    """base^(M - shift I) through the eigendecomposition."""
    if base <= 1.0:
        raise ValueError(f"exp_base: base must exceed 1, got {base}")
    dec = eig_sym(M)
    exponents = (dec.eigenvalues - shift) * math.log(base)
    if float(np.max(exponents)) > LOG_FLOAT_MAX:
        raise MatrixOverflow(
            f"exp_base: base^lambda_max overflows (exponent {float(np.max(exponents)):.1f} > {LOG_FLOAT_MAX:.1f})"
        )
    return symmetrize((dec.basis * np.exp(exponents)) @ dec.basis.T)


def power_iteration_cap(n: int, gamma: float) -> int:
    return 10 * max(1, math.ceil(math.log(n) / math.sqrt(gamma)))


def lanczos_extreme(M, gamma: float, seed: int, power: int | None = None) -> tuple[float, np.ndarray]:
    """
    Randomized estimate of lambda_max(M) for PSD M: power iteration on (M / ||M||_F)^power from a Gaussian
    start, power defaulting to n. Returns (v^T M v, v) with v a unit vector.
    Stops once the Rayleigh quotient moves by less than gamma/100 relative; raises ConvergenceFailure at the cap.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"lanczos_extreme: gamma must lie in (0, 1), got {gamma}")
    A = symmetrize(np.asarray(M, dtype=np.float64))
    n = A.shape[0]
    norm = float(np.linalg.norm(A, "fro"))
    if norm == 0.0:
        e1 = np.zeros(n)
        e1[0] = 1.0
        return 0.0, e1
    if n == 1:
        return float(A[0, 0]), np.ones(1)
    p = n if power is None else power
    B = matrix_power_int(A / norm, p)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    value = float(v @ A @ v)
    cap = power_iteration_cap(n, gamma)
    for it in range(1, cap + 1):
        w = B @ v
        wn = float(np.linalg.norm(w))
        if wn == 0.0 or not math.isfinite(wn):
            raise ConvergenceFailure(f"lanczos_extreme: iterate vanished after {it} steps")
        v = w / wn
        new_value = float(v @ A @ v)
        if it > 1 and abs(new_value - value) <= 0.01 * gamma * abs(new_value):
            return new_value, v
        value = new_value
    raise ConvergenceFailure(f"lanczos_extreme: no convergence within {cap} iterations (n={n}, gamma={gamma})")


def extreme_eigenvalue(M, gamma: float, seed: int, power: int | None = None) -> float:
    """lanczos_extreme with the exact eigendecomposition as fallback."""
    try:
        value, _ = lanczos_extreme(M, gamma, seed, power)
        return value
    except ConvergenceFailure as e:
        logger.warning("%s; falling back to eigendecomposition", e)
        return lambda_max(M)
