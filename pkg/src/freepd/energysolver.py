"""Energy-controlled extension of families of positive definite functions.

A configuration is a family of strict functions sitting on the vertices of a
small directed graph, either a tree with edges pointing toward a root or a
single directed cycle.  The solver extends every member from its data ball to
a larger ball, one Szego parameter at a time, while keeping each edge's
relative energy close to where it started.  Three ingredients make that work:

* make_singular nudges the family (four strategic entries plus a slight
  mixing toward the point mass) so that the kernels of the per-function
  coordinate maps meet trivially.  This yields a coercivity certificate
  kappa^2 theta^2 / (2 - 2 |zeta|^2), which grows without bound as a
  parameter approaches the rim and therefore pins minimizers inside the disk.
* energy_gradient gives exact directional derivatives of the completed-stage
  energy in either of its two parameters, from the coefficients alpha, alpha'
  of the norm-achieving vector against the residual directions S, S' (and
  beta, beta' after transport).  Only the products alpha conj(alpha') and
  beta conj(beta') enter, so the phase ambiguity of the achiever is harmless.
* solve_edge and solve_cycle_params run projected gradient descent with
  Armijo backtracking on one parameter (tree edge, the target parameter being
  already fixed) or jointly on all cycle parameters.

The driver solve_configuration walks the extension stages in shortlex order,
budgets a sigma per stage, converts it into an l1 perturbation allowance
through the transport perturbation bound, and records everything it consumed
in a SolverReport.  Within a stage the tree edges are independent once the
parent parameters are known; the implementation processes them sequentially
from the root outward, which is the same dependency order.

Conventions: stage functions are partial-domain PDFunctions; a configuration
of radius r carries data on Ball(2r) so that its edge energies over the index
set B_r x [d] are computable, matching the transport module's convention.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import pdcore
from .errors import (
    BudgetError,
    DegenerateAchieverError,
    DomainError,
    FormatError,
    FreePDError,
    NotStrictError,
    ParameterError,
    SingularizationError,
    SolveError,
)
from .extend import DELTA_MIN, SzegoParameter, extend_entry
from .hilbert import build_partial_space, ortho_matrices, residual_data
from .pdcore import (
    DEFAULT_TOL,
    Domain,
    PDFunction,
    canonical_rep,
    check_pd,
    l1_distance,
    mix_with_delta,
    restrict_to_ball,
)
from .transport import COND_LIMIT, partial_relative_energy, relative_energy
from .words import inverse, mul, next_novel, word_to_str

__all__ = [
    "Configuration",
    "SingularityCertificate",
    "ExtensionComponents",
    "SolverReport",
    "stage_energy",
    "extension_components",
    "energy_gradient",
    "coordinate_rows",
    "make_singular",
    "solve_edge",
    "solve_cycle_params",
    "solve_configuration",
    "encost_report",
    "configuration_from_dict",
]

# Relative separation demanded of the top two pencil eigenvalues before the
# achiever (and hence the gradient) is trusted.
GAP_TOL = 1e-8

# Acceptance ratio sigma_min / sigma_max for the 2x2 projection matrix W'.
DET_TOL = 1e-6

# Acceptance ratio lambda_min / lambda_max for the pairwise kernel-separation
# matrices A_l* A_l + A_m* A_m.
PAIR_TOL = 1e-8

# Number of candidate mixing weights per function.
S_GRID = 32

# The four-entry perturbation needs |g| at this length or longer, so that the
# touched words g1^-1 g, g2^-1 g, g1^-1, g2^-1 are pairwise distinct interior
# levels.
MIN_SINGULAR_LENGTH = 5

ARMIJO_STEP = 0.1
ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
MAX_ITER = 10_000

# Parameters are projected onto this closed disk, strictly inside the rim.
RIM = 1.0 - DELTA_MIN


# ---------------------------------------------------------------------------
# Completed-stage pencils and their achievers
# ---------------------------------------------------------------------------


def _zval(z) -> complex:
    if isinstance(z, SzegoParameter):
        return z.value
    return SzegoParameter(z).value


def _stage_of(C: PDFunction):
    if C.domain.kind != "partial":
        raise DomainError("stage operations need partial-domain functions")
    return (C.domain.g, C.domain.j, C.domain.k)


def _pair_data(C: PDFunction, D: PDFunction, tol: float):
    if C.d != D.d:
        raise DomainError("the two functions have different dimensions")
    if _stage_of(C) != _stage_of(D):
        raise DomainError("the two functions sit at different stages")
    spC = build_partial_space(C)
    spD = build_partial_space(D)
    return spC, residual_data(spC), spD, residual_data(spD)


def _filled(space, rd, zeta: complex) -> np.ndarray:
    """The stage Gram with the working corner set to zeta * n_g * n_e + cross."""
    G = np.array(space.gram)
    m = space.core_size
    value = zeta * (rd.n_g * rd.n_e) + rd.cross
    G[m, m + 1] = value
    G[m + 1, m] = np.conj(value)
    return G


def _pencil(G_C: np.ndarray, G_D: np.ndarray, tol: float):
    """All generalized eigenvalues of (G_D, G_C) plus the top achiever.

    The achiever is returned in base coordinates, scaled so its squared norm
    x* G_C x is one, with its largest coordinate rotated to the positive real
    axis so repeated calls agree.  The pencil is solved against G_D - G_C and
    shifted back by one (same eigenvectors, exact at equal Grams, no digits
    lost to the identity part near one).  Badly conditioned G_C falls back
    from Cholesky whitening to the symmetric-definite LAPACK driver.
    """
    lam = scipy.linalg.eigvalsh(G_C)
    if lam[0] <= tol * G_C.shape[0]:
        raise NotStrictError(
            f"stage Gram is not strictly positive (min eigenvalue {lam[0]:.3e})"
        )
    if lam[-1] / lam[0] <= COND_LIMIT:
        L = scipy.linalg.cholesky(G_C, lower=True)
        A = scipy.linalg.solve_triangular(L, G_D - G_C, lower=True)
        W = scipy.linalg.solve_triangular(L, A.conj().T, lower=True).conj().T
        W = 0.5 * (W + W.conj().T)
        vals, vecs = scipy.linalg.eigh(W)
        x = scipy.linalg.solve_triangular(L.conj().T, vecs[:, -1], lower=False)
    else:  # pragma: no cover - only near-degenerate bases come here
        vals, vecs = scipy.linalg.eigh(G_D - G_C, G_C)
        x = vecs[:, -1]
    vals = vals + 1.0
    x = x / math.sqrt(float(np.real(np.conj(x) @ G_C @ x)))
    i = int(np.argmax(np.abs(x)))
    x = x * (np.conj(x[i]) / abs(x[i]))
    top = float(vals[-1])
    rayleigh = float(np.real(np.conj(x) @ G_D @ x))
    if abs(rayleigh - top) > 1e-8 * max(1.0, abs(top)):
        raise FreePDError(
            f"achiever fails its Rayleigh certificate: {rayleigh!r} vs {top!r}"
        )
    return vals, x


def _coord_product(vals, x, m: int):
    """Top energy and conj(x[m]) * x[m+1] of the achiever, degeneracy-aware.

    When the whole spectrum collapses to one point the two completed Grams
    are proportional, every vector achieves the energy, and the symmetric
    derivative of the energy vanishes in every direction; that case reports
    a zero product.  A collapse of the top two eigenvalues only leaves the
    achiever genuinely ill defined and raises instead.
    """
    top = float(vals[-1])
    spread = GAP_TOL * max(abs(top), 1.0)
    if top - float(vals[0]) <= spread:
        return top, None
    if len(vals) > 1 and top - float(vals[-2]) <= spread:
        raise DegenerateAchieverError(
            f"top eigenvalues {top!r} and {float(vals[-2])!r} are too close "
            "for a well-defined achiever"
        )
    return top, complex(np.conj(x[m]) * x[m + 1])


def stage_energy(C: PDFunction, D: PDFunction, zeta, mu,
                 tol: float = DEFAULT_TOL) -> float:
    """Relative energy of the one-step extensions C^zeta, D^mu.

    Both functions must sit at the same stage (g, j, k); the undefined corner
    of each stage Gram is filled from its own residual data and the returned
    number is the top generalized eigenvalue of the completed pencil.
    """
    spC, rdC, spD, rdD = _pair_data(C, D, tol)
    G_C = _filled(spC, rdC, _zval(zeta))
    G_D = _filled(spD, rdD, _zval(mu))
    vals, _ = _pencil(G_C, G_D, tol)
    return float(vals[-1])


@dataclass(frozen=True)
class ExtensionComponents:
    """Achiever coefficients against the residual directions.

    The norm-achieving vector of the completed-stage pencil decomposes as
    x = alpha S + alpha' S' + (core part) on the source side; its transport
    image decomposes as beta T + beta' T' + (core part) on the target side.
    Individually the four scalars carry the achiever's arbitrary phase, but
    the two products below do not, and they are all the gradients need.
    """

    alpha: complex
    alpha_prime: complex
    beta: complex
    beta_prime: complex
    energy: float

    @property
    def alpha_pair(self) -> complex:
        return self.alpha * np.conj(self.alpha_prime)

    @property
    def beta_pair(self) -> complex:
        return self.beta * np.conj(self.beta_prime)


def extension_components(C: PDFunction, D: PDFunction, zeta, mu,
                         tol: float = DEFAULT_TOL) -> ExtensionComponents:
    """Achiever components of the pair (C^zeta, D^mu).

    The canonical coordinate of the achiever at (g, j) is alpha / n_g and at
    (e, k) is alpha' / n_e, with n the source-side residual norms; transport
    preserves canonical coordinates, so the target-side scalars are the same
    coordinates rescaled by the target residual norms.  Requires the top
    generalized eigenvalue to be simple to within GAP_TOL relative.
    """
    spC, rdC, spD, rdD = _pair_data(C, D, tol)
    G_C = _filled(spC, rdC, _zval(zeta))
    G_D = _filled(spD, rdD, _zval(mu))
    vals, x = _pencil(G_C, G_D, tol)
    m = spC.core_size
    top, product = _coord_product(vals, x, m)
    if product is None:
        return ExtensionComponents(0j, 0j, 0j, 0j, energy=top)
    c_g = np.conj(x[m])
    c_e = np.conj(x[m + 1])
    return ExtensionComponents(
        alpha=complex(c_g * rdC.n_g),
        alpha_prime=complex(c_e * rdC.n_e),
        beta=complex(c_g * rdD.n_g),
        beta_prime=complex(c_e * rdD.n_e),
        energy=top,
    )


def energy_gradient(C: PDFunction, D: PDFunction, zeta, mu, side: str,
                    varsigma, tol: float = DEFAULT_TOL) -> float:
    """Directional derivative of zeta/mu -> energy(C^zeta, D^mu).

    side selects which parameter moves; varsigma is the unit direction in
    which it moves.  The value is -2 e Re(varsigma alpha conj(alpha')) on the
    zeta side and +2 Re(varsigma beta conj(beta')) on the mu side, with the
    components taken from the (unique) norm achiever.
    """
    if side not in ("zeta", "mu"):
        raise ParameterError(f"side must be 'zeta' or 'mu', got {side!r}")
    s = complex(varsigma)
    if not np.isfinite(s.real) or not np.isfinite(s.imag) or abs(abs(s) - 1.0) > 1e-9:
        raise ParameterError("the direction must be a unit complex number")
    comps = extension_components(C, D, zeta, mu, tol=tol)
    if side == "zeta":
        return float(-2.0 * comps.energy * np.real(s * comps.alpha_pair))
    return float(2.0 * np.real(s * comps.beta_pair))


# ---------------------------------------------------------------------------
# Singularity-inducing perturbations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingularityCertificate:
    """Coercivity data for a perturbed pair.

    kappa is the smaller of the two functions' minimal orthogonalized core
    norms; theta is the kernel-separation constant: any unit vector killed by
    one function's coordinate rows is moved by the other's with norm at least
    theta.  Together they force the pair energy above
    kappa^2 theta^2 / (2 - 2 |zeta|^2), which blows up toward the rim.
    """

    kappa: float
    theta: float

    def bound(self, zeta) -> float:
        z = _zval(zeta)
        return (self.kappa * self.theta) ** 2 / (2.0 - 2.0 * abs(z) ** 2)


def coordinate_rows(C: PDFunction, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Core rows of the canonical-to-orthogonal coordinate change at a stage.

    Row i (over the stage core) of the returned matrix gives, for each of the
    len(P) + 2 canonical stage vectors, its coefficient on the i-th
    unnormalized Gram-Schmidt vector of the core.  Those coefficients are
    inner products against core combinations only, so the undefined corner of
    the stage Gram never enters.
    """
    sp = build_partial_space(C)
    m = sp.core_size
    n = m + 2
    if m == 0:
        return np.zeros((0, n), dtype=complex)
    Gm, Nm = ortho_matrices(np.array(sp.core_gram), tol)
    norms = 1.0 / np.abs(np.diag(Nm))
    # column i of Gm holds the conjugated coefficients of the i-th orthogonal
    # vector, so (stage Gram)[:, :m] @ Gm has <y_q, z_i> at [q, i]
    cross = sp.gram[:, :m] @ Gm
    A = (cross / (norms ** 2)).T
    if np.isnan(A).any():
        raise FreePDError("coordinate rows touched an undefined entry")
    return A


def _l1_ball_sample(rng, n: int, radius: float) -> np.ndarray:
    """A random point of the complex l1 ball of the given radius."""
    rho = radius * float(rng.uniform()) ** (1.0 / (2 * n))
    moduli = rng.dirichlet(np.full(n, 2.0)) * rho
    phases = np.exp(2j * np.pi * rng.uniform(size=n))
    return moduli * phases


def _bump_entries(C: PDFunction, slots, lam: np.ndarray) -> PDFunction:
    """Add lam[i] to the scalar C(word_i)_{row_i, 1} for the four slots."""
    new = {w: np.array(a) for w, a in C.canonical_items()}
    for (word, row), dv in zip(slots, lam):
        c = canonical_rep(word)
        if c == word:
            new[c][row - 1, 0] += dv
        else:
            new[c][0, row - 1] += np.conj(dv)
    return PDFunction(C.d, C.domain, new)


def _wprime_ratio(C: PDFunction, g1, g2, j: int, k: int) -> float:
    """Singular-value ratio of the 2x2 restricted projection matrix W'.

    W' maps span{Theta(g)_j, Theta(e)_k} into span{Theta(g1)_1, Theta(g2)_1}
    written in the latter's (non-orthogonal) basis; its entries are affine in
    the four perturbed scalars, which is what makes the rejection sampling
    succeed almost surely.
    """
    g = C.domain.g
    GV = pdcore.gram_indexed(C, [(g1, 1), (g2, 1)])
    X = np.array(
        [
            [C.scalar(mul(inverse(g1), g), j, 1), C.scalar(inverse(g1), k, 1)],
            [C.scalar(mul(inverse(g2), g), j, 1), C.scalar(inverse(g2), k, 1)],
        ],
        dtype=complex,
    )
    W = scipy.linalg.solve(GV, X)
    sv = np.linalg.svd(W, compute_uv=False)
    if sv[0] <= 0.0:
        return 0.0
    return float(sv[-1] / sv[0])


def _min_core_norm(C: PDFunction, tol: float) -> float:
    sp = build_partial_space(C)
    if sp.core_size == 0:
        return np.inf
    _, Nm = ortho_matrices(np.array(sp.core_gram), tol)
    return float(np.min(1.0 / np.abs(np.diag(Nm))))


def _pairs_separated(rows) -> bool:
    for l in range(len(rows)):
        for m in range(l + 1, len(rows)):
            H = rows[l].conj().T @ rows[l] + rows[m].conj().T @ rows[m]
            w = scipy.linalg.eigvalsh(H)
            if w[0] < PAIR_TOL * max(w[-1], 0.0):
                return False
    return True


def make_singular(family, eta: float, seed=0, tol: float = DEFAULT_TOL,
                  max_tries: int = 400):
    """Perturb a stage family into one with trivially intersecting kernels.

    Two moves, both small in the l1 metric: first each member gets four of
    its interior entries shifted (the correlations of the working vectors
    with Theta(g1)_1 and Theta(g2)_1, where g1, g2 are the length-1 and
    length-2 prefixes of g) until the restricted projection W' is invertible;
    the unperturbed candidate is tried first, then random draws from the l1
    ball of radius eta/4.  Second, each member is mixed slightly toward the
    point mass with a staggered grid of weights until every pair of
    coordinate-row matrices has jointly trivial kernel.

    Returns (new_family, certificates) where certificates maps each position
    pair (l, m), l < m, to its SingularityCertificate.  The total l1 drift of
    each member stays at or below eta.  Requires |g| >= 5 and strict inputs.
    """
    fam = list(family)
    if not fam:
        raise ParameterError("make_singular needs at least one function")
    if not (isinstance(eta, (int, float)) and math.isfinite(eta) and eta > 0):
        raise ParameterError("eta must be a positive real number")
    stage = _stage_of(fam[0])
    d = fam[0].d
    for C in fam:
        if C.d != d or _stage_of(C) != stage:
            raise DomainError("family members sit at different stages")
    g, j, k = stage
    if len(g) < MIN_SINGULAR_LENGTH:
        raise ParameterError(
            f"the level must have length at least {MIN_SINGULAR_LENGTH}, "
            f"got {len(g)}"
        )
    for idx, C in enumerate(fam):
        if check_pd(C, tol).status != "strict":
            raise NotStrictError(f"family member {idx} is not strict")

    rng = np.random.default_rng(seed)
    g1, g2 = g[:1], g[:2]
    slots = (
        (mul(inverse(g1), g), j),
        (mul(inverse(g2), g), j),
        (inverse(g1), k),
        (inverse(g2), k),
    )

    primed = []
    for idx, C in enumerate(fam):
        accepted = None
        for attempt in range(max_tries):
            if attempt == 0:
                lam = np.zeros(4, dtype=complex)
            else:
                lam = _l1_ball_sample(rng, 4, eta / 4.0)
            cand = _bump_entries(C, slots, lam)
            if _wprime_ratio(cand, g1, g2, j, k) < DET_TOL:
                continue
            if check_pd(cand, tol).status != "strict":
                continue
            accepted = cand
            break
        if accepted is None:
            raise SingularizationError(
                f"no admissible four-entry perturbation for member {idx} "
                f"within {max_tries} samples"
            )
        primed.append(accepted)

    n_fam = len(primed)
    point_mass = pdcore.delta(d, primed[0].domain)
    nus = [max(1.0, l1_distance(Cp, point_mass)) for Cp in primed]
    mixed = rows = None
    for offset in range(S_GRID):
        weights = [
            eta / (2.0 * (((i + offset) % S_GRID) + 1) * S_GRID * nus[i])
            for i in range(n_fam)
        ]
        trial = [mix_with_delta(Cp, s) for Cp, s in zip(primed, weights)]
        trial_rows = [coordinate_rows(Dm, tol) for Dm in trial]
        if _pairs_separated(trial_rows):
            mixed, rows = trial, trial_rows
            break
    if mixed is None:
        raise SingularizationError(
            "no mixing offset separated the kernels of the coordinate rows"
        )

    kernels = [scipy.linalg.null_space(A) for A in rows]
    core_mins = [_min_core_norm(Dm, tol) for Dm in mixed]
    certificates = {}
    for l in range(n_fam):
        for m in range(l + 1, n_fam):
            theta = min(
                float(np.linalg.svd(rows[l] @ kernels[m], compute_uv=False)[-1]),
                float(np.linalg.svd(rows[m] @ kernels[l], compute_uv=False)[-1]),
            )
            if theta <= 0.0:
                raise SingularizationError(
                    f"kernel separation collapsed for the pair ({l}, {m})"
                )
            certificates[(l, m)] = SingularityCertificate(
                kappa=float(min(core_mins[l], core_mins[m])), theta=theta
            )
    return mixed, certificates


# ---------------------------------------------------------------------------
# Parameter optimization
# ---------------------------------------------------------------------------


def _project(z: complex) -> complex:
    a = abs(z)
    if a <= RIM:
        return z
    return z * (RIM / a)


def _unit(rng) -> complex:
    z = complex(rng.standard_normal(), rng.standard_normal())
    return z / abs(z) if z else 1.0 + 0j


GRAD_TOL = 1e-6

# Cycle polish target for the achiever coupling products |alpha alpha'|.
PAIR_STOP = 5e-6

# Upper bound on chain-initialization rounds before the joint refinement.
CHAIN_ROUNDS = 24


def _solve_edge_impl(C, D, mu, tol_edge, max_iter, seed, inits, tol,
                     grad_tol=GRAD_TOL):
    spC, rdC, spD, rdD = _pair_data(C, D, tol)
    mu_v = _zval(mu)
    G_D = _filled(spD, rdD, mu_v)
    base = partial_relative_energy(C, D, tol=tol).energy
    target = base + tol_edge
    rng = np.random.default_rng(seed)
    m = spC.core_size
    scale = rdC.n_g * rdC.n_e

    def value(z):
        # candidate points near the rim can push the pencil past what the
        # eigensolver certifies; such a candidate is never a keeper, so any
        # evaluation failure just reads as an infinite energy
        try:
            vals, _ = _pencil(_filled(spC, rdC, z), G_D, tol)
        except FreePDError:
            return np.inf
        return float(vals[-1])

    def value_and_pair(z):
        vals, x = _pencil(_filled(spC, rdC, z), G_D, tol)
        top, product = _coord_product(vals, x, m)
        return top, (0j if product is None else product * scale)

    def newton_candidate(z, v0):
        # one root-finding step on the gradient field: the coupling dies at
        # an interior minimum, so once the energy target is in hand this
        # drives |grad| to the stationarity tolerance quadratically where
        # plain descent crawls (gradient scale ~ energy can be huge)
        h = 1e-6 * max(1.0, abs(z))
        try:
            vs = []
            for w in (z + h, z - h, z + 1j * h, z - 1j * h):
                e_w, pair_w = value_and_pair(_project(w))
                vs.append(-2.0 * e_w * np.conj(pair_w))
        except FreePDError:
            return None
        dvx = (vs[0] - vs[1]) / (2.0 * h)
        dvy = (vs[2] - vs[3]) / (2.0 * h)
        J = np.array([[dvx.real, dvy.real], [dvx.imag, dvy.imag]])
        try:
            delta = np.linalg.solve(J, -np.array([v0.real, v0.imag]))
        except np.linalg.LinAlgError:
            return None
        return _project(z + complex(delta[0], delta[1]))

    best_z, best_e = 0j, np.inf
    used = 0
    for init in inits:
        z = _project(complex(init))
        bumps = 0
        while used < max_iter:
            used += 1
            try:
                e, pair = value_and_pair(z)
            except DegenerateAchieverError:
                if best_e <= target:
                    return SzegoParameter(best_z), best_e, used
                if bumps >= 8:
                    break
                bumps += 1
                z = _project(z + 1e-7 * _unit(rng))
                continue
            except FreePDError:
                # the iterate itself became uncertifiable (an init handed in
                # from a previous sweep can sit essentially on the rim)
                if best_e <= target:
                    return SzegoParameter(best_z), best_e, used
                if bumps >= 8:
                    break
                bumps += 1
                z = _project(0.99 * z)
                continue
            if e < best_e:
                best_e, best_z = e, z
            grad = -2.0 * e * np.conj(pair)
            gnorm = abs(grad)
            # the descent stops only where the energy target is met and the
            # point is stationary to within grad_tol in every direction
            if e <= target and gnorm <= grad_tol:
                return SzegoParameter(z), e, used
            if e <= target and np.isfinite(grad_tol):
                cand = newton_candidate(z, grad)
                if cand is not None:
                    try:
                        e_c, pair_c = value_and_pair(cand)
                    except FreePDError:
                        e_c, pair_c = np.inf, 0j
                    if e_c <= target and abs(2.0 * e_c * pair_c) <= 0.7 * gnorm:
                        z = cand
                        continue
            if gnorm <= 1e-14 * max(1.0, e):
                # numerically stationary yet above the target: a spurious
                # critical point or a flat spot; nudge like the degenerate case
                if bumps >= 8:
                    break
                bumps += 1
                z = _project(z + 1e-7 * _unit(rng))
                continue
            step = ARMIJO_STEP
            moved = False
            gsq = gnorm * gnorm
            while step >= 1e-18:
                candidate = _project(z - step * grad)
                if value(candidate) <= e - ARMIJO_SLOPE * step * gsq:
                    z = candidate
                    moved = True
                    break
                step *= ARMIJO_SHRINK
            if not moved:
                if e <= target:
                    # machine precision exhausted with the energy in hand
                    return SzegoParameter(z), e, used
                if bumps >= 8:
                    break
                bumps += 1
                z = _project(z + 1e-7 * _unit(rng))
        if used >= max_iter:
            break
    raise SolveError(
        f"edge solve stalled at energy {best_e!r} against target {target!r} "
        f"after {used} iterations",
        best=SzegoParameter(best_z),
        value=best_e,
    )


def solve_edge(C: PDFunction, D: PDFunction, mu, certificate=None,
               tol_edge: float = 1e-6, max_iter: int = MAX_ITER, seed=0,
               inits=(0j,), tol: float = DEFAULT_TOL) -> SzegoParameter:
    """Choose zeta minimizing the energy of (C^zeta, D^mu).

    Projected gradient descent with Armijo backtracking, started from each
    value in inits in turn, terminating as soon as the energy is within
    tol_edge of the partial (pre-extension) energy of the pair, which is a
    lower bound for every zeta.  A certificate from make_singular guarantees
    an interior minimizer at exactly the partial energy; it is accepted here
    for provenance but the projection onto |zeta| <= 1 - 1e-6 already keeps
    iterates compact.  Exceeding max_iter raises a SolveError carrying the
    best parameter seen.
    """
    zeta, _, _ = _solve_edge_impl(C, D, mu, tol_edge, max_iter, seed, inits, tol)
    return zeta


def _solve_cycle_impl(family, base_energies, tol_edge, max_iter, seed, tol):
    fam = list(family)
    n_fam = len(fam)
    if n_fam < 2:
        raise ParameterError("a cycle needs at least two functions")
    data = []
    for i in range(n_fam):
        spC, rdC, spD, rdD = _pair_data(fam[i], fam[(i + 1) % n_fam], tol)
        data.append((spC, rdC, spD, rdD))
    if base_energies is None:
        base = [
            partial_relative_energy(fam[i], fam[(i + 1) % n_fam], tol=tol).energy
            for i in range(n_fam)
        ]
    else:
        base = [float(b) for b in base_energies]
        if len(base) != n_fam:
            raise ParameterError("need one base energy per edge")
    rng = np.random.default_rng(seed)

    def edge_value(i, zc, zd):
        spC, rdC, spD, rdD = data[i]
        try:
            vals, _ = _pencil(_filled(spC, rdC, zc), _filled(spD, rdD, zd), tol)
        except FreePDError:
            return np.inf
        return float(vals[-1])

    def f_value(zs):
        total = 0.0
        for i in range(n_fam):
            e = edge_value(i, zs[i], zs[(i + 1) % n_fam])
            if not np.isfinite(e):
                return np.inf
            total += (e - base[i]) ** 2
        return total

    def residuals_jacobian(zs):
        # each zs[i] enters edge i as the source parameter and edge i-1 as
        # the target parameter; the same achiever products give both the
        # residuals and their exact Jacobian over the 2N real coordinates
        res = np.zeros(n_fam)
        energies = np.zeros(n_fam)
        pairs = np.zeros(n_fam, dtype=complex)
        J = np.zeros((n_fam, 2 * n_fam))
        for i in range(n_fam):
            spC, rdC, spD, rdD = data[i]
            vals, x = _pencil(
                _filled(spC, rdC, zs[i]),
                _filled(spD, rdD, zs[(i + 1) % n_fam]),
                tol,
            )
            m = spC.core_size
            try:
                top, coord = _coord_product(vals, x, m)
            except DegenerateAchieverError as exc:
                exc.edge = i
                raise
            coord = 0j if coord is None else coord
            alpha_pair = coord * (rdC.n_g * rdC.n_e)
            beta_pair = coord * (rdD.n_g * rdD.n_e)
            energies[i] = top
            res[i] = top - base[i]
            pairs[i] = alpha_pair
            src = -2.0 * top * alpha_pair
            tgt = 2.0 * beta_pair
            J[i, 2 * i] = np.real(src)
            J[i, 2 * i + 1] = np.real(1j * src)
            t = (i + 1) % n_fam
            J[i, 2 * t] = np.real(tgt)
            J[i, 2 * t + 1] = np.real(1j * tgt)
        return res, J, energies, pairs

    def pack(zs):
        u = np.empty(2 * n_fam)
        u[0::2], u[1::2] = zs.real, zs.imag
        return u

    def unpack(u):
        return np.array([_project(complex(a, b)) for a, b in zip(u[0::2], u[1::2])])

    zs = np.zeros(n_fam, dtype=complex)
    target = n_fam * tol_edge * tol_edge
    best_zs, best_f = zs.copy(), f_value(zs)
    used = 0
    # Chain phase: walk the cycle backwards re-solving each source parameter
    # against the freshest target.  When the family is close to constant the
    # loop map is a near-identity contraction, so the sweep iterates creep
    # toward the joint solution geometrically; estimating the dominant
    # multiplier from successive differences lets us extrapolate straight to
    # the limit instead of crawling there.  The one-dimensional edge solver
    # also copes with the near-degenerate achievers that flatten the joint
    # Jacobian close to the zero set.
    history = [zs.copy()]
    chain_tol = tol_edge * 1e-2
    for _ in range(CHAIN_ROUNDS):
        if best_f <= target or used >= max_iter // 2:
            break
        for n in range(n_fam - 1, -1, -1):
            budget = max(1, min(400, max_iter // 2 - used))
            try:
                zeta, _, it = _solve_edge_impl(
                    fam[n], fam[(n + 1) % n_fam], zs[(n + 1) % n_fam],
                    chain_tol, budget, seed, (zs[n],), tol, grad_tol=np.inf)
            except SolveError as exc:
                zeta, it = exc.best, budget
            zs[n] = zeta.value
            used += it
        f = f_value(zs)
        if f < best_f:
            best_f, best_zs = f, zs.copy()
        history.append(zs.copy())
        if len(history) < 3:
            continue
        d1 = history[-2] - history[-3]
        d2 = history[-1] - history[-2]
        den = complex(np.vdot(d1, d1))
        lam = complex(np.vdot(d1, d2) / den) if abs(den) > 0 else 1.0 + 0j
        if abs(lam) < 0.999 and abs(1.0 - lam) > 1e-12:
            jump = np.array(
                [_project(z) for z in history[-1] + d2 * lam / (1.0 - lam)])
            fj = f_value(jump)
            if fj < best_f:
                best_f, best_zs = fj, jump.copy()
            if fj < f:
                zs = jump
                history = [zs.copy()]
    # Levenberg-Marquardt on the residual vector: the objective is a smooth
    # zero-residual least-squares problem at the solutions this routine is
    # used on, so damped Gauss-Newton steps converge quadratically where
    # plain gradient descent crawls
    zs = best_zs.copy()
    bumps = 0
    damping = 1e-3
    satisfied = False
    polish = 0
    while used < max_iter:
        used += 1
        try:
            res, J, energies, pairs = residuals_jacobian(zs)
        except DegenerateAchieverError as exc:
            if satisfied or bumps >= 8:
                break
            bumps += 1
            i = getattr(exc, "edge", 0)
            zs[i] = _project(zs[i] + 1e-7 * _unit(rng))
            continue
        f = float(res @ res)
        if f < best_f:
            best_f, best_zs = f, zs.copy()
        grad = 2.0 * (J.T @ res)
        gnorm = float(np.linalg.norm(grad))
        satisfied = f <= target or gnorm <= 1e-8
        if satisfied:
            # converged in the declared sense; keep polishing briefly so the
            # achiever couplings collapse along with the residuals, which is
            # what an exact minimizer looks like
            polish += 1
            if polish > 60 or float(np.max(np.abs(pairs))) <= PAIR_STOP:
                return _params(zs), f, used, energies
        H = J.T @ J
        moved = False
        for _ in range(40):
            try:
                step = np.linalg.solve(H + damping * np.eye(2 * n_fam), J.T @ res)
            except np.linalg.LinAlgError:  # pragma: no cover
                damping *= 10.0
                continue
            cand = unpack(pack(zs) - step)
            if f_value(cand) < f:
                zs = cand
                damping = max(damping * 0.3, 1e-12)
                moved = True
                break
            damping *= 10.0
        if not moved:
            if satisfied or bumps >= 8:
                break
            bumps += 1
            zs = np.array([_project(z + 1e-7 * _unit(rng)) for z in zs])
    if satisfied or best_f <= target:
        pick = best_zs if best_f <= target else zs
        energies = np.array(
            [edge_value(i, pick[i], pick[(i + 1) % n_fam]) for i in range(n_fam)]
        )
        fv = float(np.sum((energies - np.array(base)) ** 2))
        return _params(pick), fv, used, energies
    raise SolveError(
        f"cycle solve stalled at objective {best_f!r} after {used} iterations",
        best=_params(best_zs),
        value=best_f,
    )


def _params(zs) -> list:
    return [SzegoParameter(complex(z)) for z in zs]


def solve_cycle_params(family, base_energies=None, tol_edge: float = 1e-6,
                       max_iter: int = MAX_ITER, seed=0,
                       tol: float = DEFAULT_TOL) -> list:
    """Joint parameters zeta_1..zeta_N for a directed cycle of stage functions.

    Minimizes the sum of squared deviations of the edge energies
    energy(D_n^{zeta_n}, D_{n+1}^{zeta_{n+1}}) from the base energies (the
    partial pair energies when not supplied) by damped Gauss-Newton steps
    projected onto the parameter disk, with the exact per-edge derivatives;
    each parameter appears in two edge terms, once per side.  Terminates
    when the objective falls below N * tol_edge^2 or the gradient norm
    below 1e-8.
    """
    params, _, _, _ = _solve_cycle_impl(family, base_energies, tol_edge,
                                        max_iter, seed, tol)
    return params


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Configuration:
    """A family of strict functions on the vertices of a directed graph.

    shape is "tree" (every edge points toward the root) or "cycle" (one
    directed cycle through all vertices).  A configuration of radius r
    carries data on Ball(2r), so that the edge energies over B_r x [d] are
    computable; this is checked, as is strictness of every member and the
    declared graph shape.
    """

    shape: str
    r: int
    d: int
    vertices: tuple
    edges: tuple
    functions: dict
    root: str | None = None

    def __post_init__(self):
        if self.shape not in ("tree", "cycle"):
            raise ParameterError(f"unknown shape {self.shape!r}")
        if isinstance(self.r, bool) or not isinstance(self.r, int) or self.r < 0:
            raise ParameterError("the radius must be a nonnegative integer")
        if not self.vertices:
            raise ParameterError("a configuration needs at least one vertex")
        if len(set(self.vertices)) != len(self.vertices):
            raise ParameterError("vertex names must be distinct")
        vset = set(self.vertices)
        seen = set()
        for edge in self.edges:
            if len(edge) != 2 or edge[0] not in vset or edge[1] not in vset:
                raise ParameterError(f"edge {edge!r} has an unknown endpoint")
            if edge[0] == edge[1]:
                raise ParameterError(f"self-loop at {edge[0]!r}")
            if edge in seen:
                raise ParameterError(f"duplicate edge {edge!r}")
            seen.add(edge)
        if set(self.functions) != vset:
            raise ParameterError("functions must be given exactly on the vertices")
        want = Domain.ball(2 * self.r)
        for v in self.vertices:
            C = self.functions[v]
            if not isinstance(C, PDFunction) or C.d != self.d:
                raise ParameterError(f"vertex {v!r} needs a PDFunction with d={self.d}")
            if C.domain != want:
                raise DomainError(
                    f"vertex {v!r} must carry data on Ball({2 * self.r}) "
                    f"(radius-r configurations hold doubled-radius data)"
                )
            if check_pd(C).status != "strict":
                raise NotStrictError(f"the function at vertex {v!r} is not strict")
        if self.shape == "tree":
            if self.root not in vset:
                raise ParameterError("a tree configuration needs a root vertex")
            self._tree_order()
        else:
            if self.root is not None:
                raise ParameterError("a cycle configuration takes no root")
            self._cycle_order()

    def _tree_order(self):
        """Vertices in parent-first order plus the parent map; validates shape."""
        parent = {}
        for v, w in self.edges:
            if v == self.root:
                raise ParameterError("the root must have no outgoing edge")
            if v in parent:
                raise ParameterError(f"vertex {v!r} has two outgoing edges")
            parent[v] = w
        for v in self.vertices:
            if v != self.root and v not in parent:
                raise ParameterError(f"vertex {v!r} has no path toward the root")
        children = {}
        for v, w in parent.items():
            children.setdefault(w, []).append(v)
        order = [self.root]
        i = 0
        while i < len(order):
            order.extend(sorted(children.get(order[i], ())))
            i += 1
        if len(order) != len(self.vertices):
            raise ParameterError("the edges do not form a tree toward the root")
        return order, parent

    def _cycle_order(self):
        """Vertices in cycle order starting from the first; validates shape."""
        if len(self.vertices) < 2:
            raise ParameterError("a cycle needs at least two vertices")
        succ = {}
        indeg = Counter()
        for v, w in self.edges:
            if v in succ:
                raise ParameterError(f"vertex {v!r} has two outgoing edges")
            succ[v] = w
            indeg[w] += 1
        for v in self.vertices:
            if v not in succ or indeg[v] != 1:
                raise ParameterError(
                    f"vertex {v!r} must have exactly one outgoing and one "
                    "incoming edge"
                )
        order = [self.vertices[0]]
        while True:
            nxt = succ[order[-1]]
            if nxt == order[0]:
                break
            if nxt in order:  # pragma: no cover - guarded by degree checks
                raise ParameterError("the edges do not form a single cycle")
            order.append(nxt)
        if len(order) != len(self.vertices):
            raise ParameterError("the edges do not form a single cycle")
        return order


def configuration_from_dict(obj, functions) -> Configuration:
    """Build a Configuration from its JSON dictionary form.

    The JSON form references functions by name through the "vertices"
    mapping; the caller resolves those references (file paths, usually) and
    passes the loaded functions keyed by vertex name.
    """
    if not isinstance(obj, dict):
        raise FormatError("configuration", "the configuration must be an object")
    for key in ("shape", "r", "d", "vertices", "edges"):
        if key not in obj:
            raise FormatError(key, f"missing configuration field {key!r}")
    allowed = {"shape", "r", "d", "vertices", "edges", "root"}
    for key in obj:
        if key not in allowed:
            raise FormatError(key, f"unknown configuration field {key!r}")
    if not isinstance(obj["vertices"], dict) or not obj["vertices"]:
        raise FormatError("vertices", "vertices must map names to function sources")
    if not isinstance(obj["edges"], list):
        raise FormatError("edges", "edges must be a list of [from, to] pairs")
    names = tuple(str(v) for v in obj["vertices"])
    edges = []
    for item in obj["edges"]:
        if not isinstance(item, list) or len(item) != 2:
            raise FormatError("edges", f"bad edge entry {item!r}")
        edges.append((str(item[0]), str(item[1])))
    shape = obj["shape"]
    if shape not in ("tree", "cycle"):
        raise FormatError("shape", f"shape must be 'tree' or 'cycle', got {shape!r}")
    r, d = obj["r"], obj["d"]
    if isinstance(r, bool) or not isinstance(r, int):
        raise FormatError("r", "r must be an integer")
    if isinstance(d, bool) or not isinstance(d, int):
        raise FormatError("d", "d must be an integer")
    root = obj.get("root")
    if root is not None:
        root = str(root)
    missing = [v for v in names if v not in functions]
    if missing:
        raise FormatError("vertices", f"no function supplied for {missing[0]!r}")
    return Configuration(
        shape=shape,
        r=r,
        d=d,
        vertices=names,
        edges=tuple(edges),
        functions={v: functions[v] for v in names},
        root=root,
    )


# ---------------------------------------------------------------------------
# The stage-by-stage driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverReport:
    """What an extension run consumed and achieved.

    energies_before holds the edge energies of the input functions over
    B_r x [d]; energies_after those of the outputs over B_{R//2} x [d].
    encost is max over edges of (after - 1) / (before - 1) with 0/0 read as
    one.  stage_records carries one dictionary per extension stage: the
    stage, its sigma and l1 budgets, the realized l1 drift, per-edge
    energies before and after solving, the chosen parameters, iteration
    counts, and any slack consumed by a capped edge solve.  The restriction
    fields compare each output, cut back to the data ball, against the
    original function: l1 distance and two-sided relative energy.
    """

    edges: tuple
    energies_before: dict
    energies_after: dict
    encost: float
    sigma_consumed: tuple
    stage_records: tuple
    restriction_drift: dict
    restriction_energy: dict
    iterations_total: int

    def to_dict(self) -> dict:
        def _edge_key(edge):
            return f"{edge[0]}->{edge[1]}"

        def _complex(z):
            return [float(np.real(z)), float(np.imag(z))]

        records = []
        for rec in self.stage_records:
            g, j, k = rec["stage"]
            records.append(
                {
                    "stage": [word_to_str(g), j, k],
                    "sigma": rec["sigma"],
                    "eta": rec["eta"],
                    "drift": rec["drift"],
                    "before": {_edge_key(e): x for e, x in rec["before"].items()},
                    "after": {_edge_key(e): x for e, x in rec["after"].items()},
                    "zetas": {v: _complex(z) for v, z in rec["zetas"].items()},
                    "iterations": rec["iterations"],
                    "slack": rec["slack"],
                }
            )
        return {
            "edges": [_edge_key(e) for e in self.edges],
            "energies_before": {_edge_key(e): x for e, x in self.energies_before.items()},
            "energies_after": {_edge_key(e): x for e, x in self.energies_after.items()},
            "encost": self.encost,
            "sigma_consumed": list(self.sigma_consumed),
            "stages": records,
            "restriction_drift": dict(self.restriction_drift),
            "restriction_energy": dict(self.restriction_energy),
            "iterations_total": self.iterations_total,
        }


def _stage_list(r2: int, R: int, d: int) -> list:
    stages = []
    g = next_novel((3,) * r2)
    while len(g) <= R:
        for j in range(1, d + 1):
            for k in range(1, d + 1):
                stages.append((g, j, k))
        g = next_novel(g)
    return stages


def _eta_budget(family, eta_prime: float, tol: float) -> float:
    """Function-l1 allowance keeping two-sided stage energies under 1+eta_prime.

    The transport perturbation bound controls operator norms: a Gram-level l1
    shift of at most s / (2 ||L^-1||^2) keeps both transport norms under
    1 + s, hence energies under (1 + s)^2 = 1 + eta_prime for
    s = sqrt(1 + eta_prime) - 1.  Gram entries repeat function entries, so
    the allowance is further divided by the largest multiplicity of any
    oriented entry across the stage restriction Grams.
    """
    s = math.sqrt(1.0 + eta_prime) - 1.0
    budget = np.inf
    mult = 1
    for C in family:
        sp = build_partial_space(C)
        m = sp.core_size
        pairs = list(sp.indices.Q)
        for G, last in ((sp.x_g_gram, m), (sp.x_e_gram, m + 1)):
            lam = scipy.linalg.eigvalsh(G)
            if lam[0] <= tol * G.shape[0]:
                raise NotStrictError("a stage restriction Gram lost strictness")
            budget = min(budget, s * float(lam[0]) / 2.0)
            sub = pairs[:m] + [pairs[last]]
            counts = Counter(
                (mul(inverse(w2), w1), c1, c2)
                for (w1, c1) in sub
                for (w2, c2) in sub
            )
            mult = max(mult, max(counts.values()))
    return float(budget / mult)


def solve_configuration(config: Configuration, R: int, eps: float,
                        sigma_schedule=None, tol_edge: float = 1e-6,
                        max_iter: int = MAX_ITER, seed=0,
                        tol: float = DEFAULT_TOL):
    """Extend every vertex function to Ball(R) with controlled edge energies.

    Walks the extension stages beyond the data ball in shortlex times
    coordinate order.  Each stage consumes a sigma from the schedule (default
    geometric, eps/4 * 2^-t): on long enough levels the family is first made
    singular within an l1 allowance derived from sigma through the transport
    perturbation bound (verified a posteriori and retried smaller if needed),
    then the parameters are chosen by per-edge descent from the root outward
    (trees) or one joint cycle descent.  Short levels skip the perturbation,
    start the descent from several initial points, and may absorb a capped
    solve into the stage's sigma slack.

    Returns (extensions, report): the extensions on Ball(R) keyed by vertex,
    and a SolverReport with per-stage and per-edge records.
    """
    if not isinstance(config, Configuration):
        raise ParameterError("solve_configuration needs a Configuration")
    r2 = 2 * config.r
    if isinstance(R, bool) or not isinstance(R, int) or R < r2:
        raise ParameterError(f"the target radius must be an integer >= {r2}")
    if not (isinstance(eps, (int, float)) and math.isfinite(eps) and eps > 0):
        raise ParameterError("eps must be a positive real number")
    if sigma_schedule is not None:
        sigma_schedule = [float(s) for s in sigma_schedule]
        if any(not (s > 0 and math.isfinite(s)) for s in sigma_schedule):
            raise ParameterError("sigma_schedule must be positive throughout")

    verts = config.vertices
    pos = {v: i for i, v in enumerate(verts)}
    if config.shape == "tree":
        order, parent = config._tree_order()
        edge_seq = [(v, parent[v]) for v in order[1:]]
        cyc = None
    else:
        cyc = config._cycle_order()
        edge_seq = [(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))]

    rng = np.random.default_rng(seed)
    stages = _stage_list(r2, R, config.d)
    cur = {}
    for v in verts:
        C = config.functions[v]
        cur[v] = PDFunction(
            config.d,
            Domain.partial(next_novel((3,) * r2), 1, 1),
            dict(C.canonical_items()),
        )

    records = []
    sigmas = []
    iterations_total = 0
    for t, (g, j, k) in enumerate(stages):
        if sigma_schedule is None:
            sigma_t = eps / 4.0 * 2.0 ** (-t)
        elif t < len(sigma_schedule):
            sigma_t = sigma_schedule[t]
        else:
            raise BudgetError(
                f"sigma schedule exhausted at stage ({word_to_str(g)}, {j}, {k})"
            )
        stage_name = f"({word_to_str(g)}, {j}, {k})"
        pe = {
            e: partial_relative_energy(cur[e[0]], cur[e[1]], tol=tol).energy
            for e in edge_seq
        }
        emax = max(pe.values())

        eta_func = 0.0
        drift = 0.0
        certs = {}
        if len(g) >= MIN_SINGULAR_LENGTH:
            eta_prime = math.sqrt(1.0 + sigma_t / emax) - 1.0
            eta_func = _eta_budget([cur[v] for v in verts], eta_prime, tol)
            placed = None
            for _ in range(6):
                fam, certs = make_singular(
                    [cur[v] for v in verts],
                    eta_func,
                    seed=int(rng.integers(2 ** 31)),
                    tol=tol,
                )
                trial = dict(zip(verts, fam))
                ok = True
                for v in verts:
                    forward = partial_relative_energy(cur[v], trial[v], tol=tol).energy
                    backward = partial_relative_energy(trial[v], cur[v], tol=tol).energy
                    if max(forward, backward) > 1.0 + eta_prime * (1.0 + 1e-9):
                        ok = False
                        break
                if ok:
                    placed = trial
                    break
                eta_func /= 4.0
            if placed is None:
                raise SolveError(
                    f"stage {stage_name}: the singular perturbation kept "
                    "overshooting its energy allowance"
                )
            drift = max(l1_distance(placed[v], cur[v]) for v in verts)
            work = placed
        else:
            work = dict(cur)

        ppe = {
            e: partial_relative_energy(work[e[0]], work[e[1]], tol=tol).energy
            for e in edge_seq
        }
        slack_allowance = max(tol_edge, sigma_t / (4.0 * max(1, len(edge_seq))))
        slack_used = 0.0
        iters = 0
        if config.shape == "tree":
            zetas = {config.root: 0j}
            for v, w in edge_seq:
                cert = certs.get((min(pos[v], pos[w]), max(pos[v], pos[w])))
                inits = (0j,) if cert is not None else (0j, zetas[w])
                try:
                    zv, _, it = _solve_edge_impl(
                        work[v], work[w], zetas[w], tol_edge, max_iter,
                        int(rng.integers(2 ** 31)), inits, tol,
                    )
                except SolveError as exc:
                    if exc.value is not None and exc.value <= ppe[(v, w)] + slack_allowance:
                        zv, it = exc.best, max_iter
                        slack_used = max(slack_used, exc.value - ppe[(v, w)])
                    else:
                        raise SolveError(
                            f"stage {stage_name}, edge {v}->{w}: {exc}",
                            best=exc.best,
                            value=exc.value,
                        ) from exc
                zetas[v] = zv.value
                iters += it
        else:
            try:
                params, _, it, _ = _solve_cycle_impl(
                    [work[v] for v in cyc], [ppe[e] for e in edge_seq],
                    tol_edge, max_iter, int(rng.integers(2 ** 31)), tol,
                )
            except SolveError as exc:
                ok = False
                if isinstance(exc.best, list):
                    trial = {v: p.value for v, p in zip(cyc, exc.best)}
                    after = {
                        e: stage_energy(work[e[0]], work[e[1]], trial[e[0]],
                                        trial[e[1]], tol=tol)
                        for e in edge_seq
                    }
                    if all(after[e] <= ppe[e] + slack_allowance for e in edge_seq):
                        params, it = exc.best, max_iter
                        slack_used = max(after[e] - ppe[e] for e in edge_seq)
                        ok = True
                if not ok:
                    raise SolveError(
                        f"stage {stage_name}: {exc}", best=exc.best, value=exc.value
                    ) from exc
            zetas = {v: p.value for v, p in zip(cyc, params)}
            iters += it

        after = {
            e: stage_energy(work[e[0]], work[e[1]], zetas[e[0]], zetas[e[1]], tol=tol)
            for e in edge_seq
        }
        for v in verts:
            cur[v] = extend_entry(work[v], zetas[v], tol=tol)
        sigmas.append(sigma_t)
        iterations_total += iters
        records.append(
            {
                "stage": (g, j, k),
                "sigma": sigma_t,
                "eta": eta_func,
                "drift": drift,
                "before": pe,
                "after": after,
                "zetas": dict(zetas),
                "iterations": iters,
                "slack": slack_used,
            }
        )

    outputs = {}
    for v in verts:
        entries = {w: a for w, a in cur[v].canonical_items() if len(w) <= R}
        outputs[v] = PDFunction(config.d, Domain.ball(R), entries)

    energies_before = {
        e: relative_energy(config.functions[e[0]], config.functions[e[1]],
                           r=config.r, tol=tol).energy
        for e in edge_seq
    }
    energies_after = {
        e: relative_energy(outputs[e[0]], outputs[e[1]], r=R // 2, tol=tol).energy
        for e in edge_seq
    }
    restriction_drift = {}
    restriction_energy = {}
    for v in verts:
        cut = restrict_to_ball(outputs[v], r2)
        restriction_drift[v] = l1_distance(cut, config.functions[v])
        forward = relative_energy(config.functions[v], cut, r=config.r, tol=tol).energy
        backward = relative_energy(cut, config.functions[v], r=config.r, tol=tol).energy
        restriction_energy[v] = max(forward, backward)
    report = SolverReport(
        edges=tuple(edge_seq),
        energies_before=energies_before,
        energies_after=energies_after,
        encost=_encost(energies_before, energies_after),
        sigma_consumed=tuple(sigmas),
        stage_records=tuple(records),
        restriction_drift=restriction_drift,
        restriction_energy=restriction_energy,
        iterations_total=iterations_total,
    )
    return outputs, report


def _encost(before: dict, after: dict) -> float:
    worst = 1.0
    for e, b in before.items():
        num = after[e] - 1.0
        den = b - 1.0
        if den < 1e-10:
            contribution = 1.0 if num < 1e-10 else np.inf
        else:
            contribution = num / den
        worst = max(worst, contribution)
    return float(worst)


def encost_report(config: Configuration, extensions, eps: float,
                  tol: float = DEFAULT_TOL) -> float:
    """Extension energy cost of a set of extensions against a configuration.

    M is the largest, over the edges, of (energy of the extended pair over
    B_{R//2} minus one) divided by (energy of the original pair over B_r
    minus one); a denominator under 1e-10 contributes one when the numerator
    is also under 1e-10 and +inf otherwise.  Every extension must restrict
    back to within 1 + eps of its original in two-sided relative energy;
    violations are reported per vertex.
    """
    if not isinstance(config, Configuration):
        raise ParameterError("encost_report needs a Configuration")
    if set(extensions) != set(config.vertices):
        raise ParameterError("extensions must be keyed exactly by the vertices")
    r2 = 2 * config.r
    domains = {extensions[v].domain for v in config.vertices}
    if len(domains) != 1 or next(iter(domains)).kind != "ball":
        raise DomainError("extensions must share one common ball domain")
    R = next(iter(domains)).r
    if R < r2:
        raise DomainError(f"extensions must cover the data ball Ball({r2})")
    bad = []
    for v in config.vertices:
        cut = restrict_to_ball(extensions[v], r2)
        forward = relative_energy(config.functions[v], cut, r=config.r, tol=tol).energy
        backward = relative_energy(cut, config.functions[v], r=config.r, tol=tol).energy
        if max(forward, backward) > 1.0 + eps:
            bad.append((v, max(forward, backward)))
    if bad:
        listing = ", ".join(f"{v!r} at {x:.6g}" for v, x in bad)
        raise ParameterError(
            f"restriction energies exceed 1 + eps for: {listing}"
        )
    if config.shape == "tree":
        order, parent = config._tree_order()
        edge_seq = [(v, parent[v]) for v in order[1:]]
    else:
        cyc = config._cycle_order()
        edge_seq = [(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))]
    before = {
        e: relative_energy(config.functions[e[0]], config.functions[e[1]],
                           r=config.r, tol=tol).energy
        for e in edge_seq
    }
    after = {
        e: relative_energy(extensions[e[0]], extensions[e[1]], r=R // 2,
                           tol=tol).energy
        for e in edge_seq
    }
    return _encost(before, after)
