"""Transport operators and relative energies between positive definite functions.

For two functions C and D both strict over an index family S, the transport
operator sends the C-realization vector of each index to the D-realization
vector of the same index.  Its squared operator norm is the largest
generalized eigenvalue of the pencil (G_D, G_C) over S; we call that number
the relative energy of the pair.  Energies are at least 1, equal 1 exactly
when the two functions agree on S, grow when S grows, and are
submultiplicative along triples, which is what makes them usable as a
transport cost when gluing functions over graphs.

Full-ball energies use S = B_r x [d] and therefore read entries of length up
to 2r: callers hold functions on Ball(R) and may request any r with 2r <= R.
Stage energies use the two one-vector enlargements X_g and X_e of the stage
core (indexed by the clique K_g, never by a ball: translated index sets have
identical Grams) and report the larger of the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, FreePDError, NotStrictError, ParameterError
from .hilbert import build_partial_space
from .pdcore import DEFAULT_TOL, PDFunction, gram_indexed
from .words import ball

__all__ = [
    "EnergyReport",
    "relative_energy",
    "partial_relative_energy",
    "energy_schedule",
    "perturbation_bound_check",
]

# Above this condition number of G_C the Cholesky-whitening route loses too
# many digits; we switch to the symmetric-definite pencil solver instead.
COND_LIMIT = 1e8

RAYLEIGH_TOL = 1e-8


@dataclass(frozen=True)
class EnergyReport:
    """Outcome of one relative-energy computation.

    energy is the squared operator norm of the transport operator; the
    achieving vector (coordinates over ``indices``) attains it as a Rayleigh
    quotient, which is re-verified before the report is returned.
    restriction records which index family was used: "full" for a ball,
    "X_g" or "X_e" for the stage enlargements.
    """

    energy: float
    achieving_vector: np.ndarray
    restriction: str
    indices: tuple


def _strictness(G: np.ndarray, tol: float, what: str) -> np.ndarray:
    lam = scipy.linalg.eigvalsh(G)
    if lam[0] <= tol * G.shape[0]:
        raise NotStrictError(
            f"{what} is not strictly positive (min eigenvalue {lam[0]:.3e})"
        )
    return lam


def _top_generalized_eig(G_C, G_D, tol: float):
    """Largest lambda with G_D x = lambda G_C x, and a unit achieving x.

    The pencil is solved against the difference G_D - G_C and the result
    shifted back by one: the eigenvectors agree, equal Grams give exactly
    one, and the near-one energies this package lives on lose no digits to
    the identity part.  Whitening by the Cholesky factor of G_C is the
    primary route; badly conditioned bases fall back to the LAPACK
    symmetric-definite solver.  The returned pair is certified by its
    Rayleigh quotient.
    """
    lam_c = _strictness(G_C, tol, "the base Gram matrix")
    cond = lam_c[-1] / lam_c[0]
    if cond <= COND_LIMIT:
        L = scipy.linalg.cholesky(G_C, lower=True)
        A = scipy.linalg.solve_triangular(L, G_D - G_C, lower=True)
        W = scipy.linalg.solve_triangular(L, A.conj().T, lower=True).conj().T
        W = 0.5 * (W + W.conj().T)
        vals, vecs = scipy.linalg.eigh(W)
        energy = 1.0 + float(vals[-1])
        x = scipy.linalg.solve_triangular(L.conj().T, vecs[:, -1], lower=False)
    else:  # pragma: no cover - exercised only by near-degenerate bases
        vals, vecs = scipy.linalg.eigh(G_D - G_C, G_C)
        energy = 1.0 + float(vals[-1])
        x = vecs[:, -1]
    x = x / np.linalg.norm(x)
    num = float(np.real(x.conj() @ G_D @ x))
    den = float(np.real(x.conj() @ G_C @ x))
    rayleigh = num / den
    if abs(rayleigh - energy) > RAYLEIGH_TOL * max(1.0, abs(energy)):
        raise FreePDError(
            f"achieving vector fails its Rayleigh certificate: "
            f"{rayleigh!r} vs {energy!r}"
        )
    return energy, x


def _ball_pairs(r: int, d: int) -> list:
    return [(w, j) for w in ball(r) for j in range(1, d + 1)]


def relative_energy(
    C: PDFunction, D: PDFunction, r: int | None = None, tol: float = DEFAULT_TOL
) -> EnergyReport:
    """Relative energy of (C, D) over the index set B_r x [d].

    Both functions must live on the same Ball(R) domain with 2r <= R, since
    the Gram matrices read entries of length up to 2r.  When r is omitted
    the largest admissible radius R // 2 is used.  Both restrictions to the
    index set must be strictly positive.
    """
    if C.domain.kind != "ball" or D.domain.kind != "ball":
        raise DomainError("relative_energy expects two ball functions")
    if C.d != D.d or C.domain != D.domain:
        raise DomainError("relative_energy needs matching domains and dimension")
    R = C.domain.r
    r = R // 2 if r is None else int(r)
    if r < 0 or 2 * r > R:
        raise ParameterError(
            f"Gram over B_{r} reads entries on B_{2 * r}, but data stops at B_{R}"
        )
    pairs = _ball_pairs(r, C.d)
    G_C = gram_indexed(C, pairs)
    G_D = gram_indexed(D, pairs)
    _strictness(G_D, tol, "the comparison Gram matrix")
    energy, x = _top_generalized_eig(G_C, G_D, tol)
    return EnergyReport(energy, x, "full", tuple(pairs))


def partial_relative_energy(
    C: PDFunction, D: PDFunction, tol: float = DEFAULT_TOL
) -> EnergyReport:
    """Relative energy of two stage-partial functions on the same stage.

    The transport operator of a stage acts on the two enlargements X_g and
    X_e of the core; the energy is the larger of the two squared norms, and
    the report says which side achieved it (ties go to X_g).
    """
    if C.domain.kind != "partial" or D.domain.kind != "partial":
        raise DomainError("partial_relative_energy expects stage-partial functions")
    if C.d != D.d or C.domain != D.domain:
        raise DomainError("partial_relative_energy needs one common stage")
    sC = build_partial_space(C)
    sD = build_partial_space(D)
    idx = sC.indices
    core = list(idx.P)
    sides = (
        ("X_g", core + [(idx.g, idx.j)], sC.x_g_gram, sD.x_g_gram),
        ("X_e", core + [((), idx.k)], sC.x_e_gram, sD.x_e_gram),
    )
    best = None
    for label, pairs, gc, gd in sides:
        _strictness(gd, tol, f"the comparison Gram on {label}")
        energy, x = _top_generalized_eig(gc, gd, tol)
        if best is None or energy > best.energy:
            best = EnergyReport(energy, x, label, tuple(pairs))
    return best


def energy_schedule(
    C: PDFunction, D: PDFunction, radii=None, tol: float = DEFAULT_TOL
) -> list:
    """Relative energies along an increasing list of radii.

    The resulting energies are nondecreasing: each index set contains the
    previous one, so the sup defining the energy can only grow.  All radii
    must satisfy 2r <= R for the common Ball(R) domain.
    """
    if C.domain.kind != "ball" or C.domain != D.domain:
        raise DomainError("energy_schedule expects two functions on one ball")
    if radii is None:
        radii = list(range(C.domain.r // 2 + 1))
    radii = [int(r) for r in radii]
    if not radii:
        raise ParameterError("no radii requested")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be strictly increasing")
    return [relative_energy(C, D, r=r, tol=tol) for r in radii]


def perturbation_bound_check(L, M, sigma: float) -> bool:
    """Whether the l1 perturbation premise implies the transport-norm bound.

    With eta = sigma / (2 ||L^{-1}||_op^2): if ||L*L - M*M||_1 <= eta then
    both coordinate-change operators M L^{-1} and L M^{-1} must have
    operator norm at most 1 + sigma.  Returns True when the premise fails
    (nothing to check) or when it holds and the bound does too.
    """
    L = np.asarray(L, dtype=complex)
    M = np.asarray(M, dtype=complex)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or M.shape != L.shape:
        raise ParameterError("perturbation_bound_check needs two square matrices")
    if not sigma > 0:
        raise ParameterError("sigma must be positive")
    smin = np.linalg.svd(L, compute_uv=False)[-1]
    if smin <= 0:
        raise ParameterError("L must be invertible")
    eta = sigma / (2.0 * (1.0 / smin) ** 2)
    gap = float(np.abs(L.conj().T @ L - M.conj().T @ M).sum())
    if gap > eta:
        return True
    try:
        t_forward = np.linalg.norm(M @ np.linalg.inv(L), 2)
        t_backward = np.linalg.norm(L @ np.linalg.inv(M), 2)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - premise forbids it
        raise ParameterError(f"singular matrix in transport norms: {exc}") from exc
    return max(t_forward, t_backward) <= 1.0 + sigma
