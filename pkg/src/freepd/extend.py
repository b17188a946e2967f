"""One-parameter extension of partially defined positive definite functions.

Each undefined stage (g, j, k) leaves a single unknown Gram inner product.
Writing the two working vectors as (projection onto the known span) plus
(orthogonal residual), the admissible values form a closed disk

    center = <p Theta(g)_j, p Theta(e)_k>,    radius = n_g * n_e,

and the choice is parametrized by a point zeta of the closed unit disk via
value = zeta * radius + center.  We keep |zeta| <= 1 - DELTA_MIN so every
step stays strictly inside, which preserves strictness of the extended
function and keeps later stages nondegenerate.

extend_entry performs one such step and advances the stage bookkeeping;
extend_ball drives the walk over all novel levels up to a target radius.
The zeta = 0 choice at every stage is the central (maximal entropy)
extension, which on two letters reproduces the multiplicative values
C(uv) = C(u) C(v) along reduced products.

toeplitz_step is the rank-one classical analogue: one Schur step extending
a finite positive definite Toeplitz sequence, used as an independent check
that the group walk restricted to powers of a single letter agrees with
the circle case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DomainError, NotStrictError, ParameterError
from .hilbert import build_partial_space, residual_data, residual_from_gram
from .pdcore import DEFAULT_TOL, Domain, PDFunction
from .words import next_novel, word_to_str

__all__ = [
    "DELTA_MIN",
    "SzegoParameter",
    "ParameterPolicy",
    "central_policy",
    "constant_policy",
    "legal_disk",
    "extend_entry",
    "extend_ball",
    "central_extension",
    "toeplitz_step",
]

# Safety margin keeping parameters off the degenerate rim of the unit disk.
DELTA_MIN = 1e-6


@dataclass(frozen=True)
class SzegoParameter:
    """A point of the open unit disk selecting one extension of a stage.

    Values with |zeta| > 1 - DELTA_MIN are rejected: on the rim the extended
    function is only semidefinite and the residuals of later stages collapse.
    """

    value: complex

    def __post_init__(self):
        try:
            v = complex(self.value)
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"not a complex number: {self.value!r}") from exc
        if not np.isfinite(v.real) or not np.isfinite(v.imag):
            raise ParameterError("szego parameter must be finite")
        if abs(v) > 1.0 - DELTA_MIN:
            raise ParameterError(
                f"|zeta| = {abs(v):.9f} reaches the degenerate rim "
                f"(allowed at most {1.0 - DELTA_MIN})"
            )
        object.__setattr__(self, "value", v)


def _as_zeta(z) -> SzegoParameter:
    if isinstance(z, SzegoParameter):
        return z
    return SzegoParameter(z)


@dataclass(frozen=True)
class ParameterPolicy:
    """A rule choosing the parameter for each stage of an extension walk.

    ``rule(stage, current, context)`` receives the stage coordinates
    (g, j, k), the partially defined function built so far, and a context
    dict with the legal disk of the stage under ``"disk"`` (center, radius)
    and the raw residual data under ``"residuals"``.  It returns a
    SzegoParameter or anything complex() accepts.  Any exception it raises,
    and any out-of-disk value, aborts the walk with the stage identified.
    """

    rule: Callable
    name: str = "custom"


def central_policy() -> ParameterPolicy:
    """Always pick the disk center (zeta = 0)."""
    return ParameterPolicy(lambda stage, current, context: 0j, name="central")


def constant_policy(z) -> ParameterPolicy:
    """Use the same parameter at every stage."""
    zeta = _as_zeta(z)
    return ParameterPolicy(
        lambda stage, current, context: zeta, name=f"constant({zeta.value})"
    )


def legal_disk(C: PDFunction, tol: float = DEFAULT_TOL) -> tuple:
    """The disk of values completing the current stage positively.

    Returns (center, radius).  Values v with |v - center| < radius give
    strictly positive definite one-step extensions, the boundary circle
    gives semidefinite ones, everything outside fails.  Both |center| <= 1
    and 0 <= radius <= 1 hold since all working vectors are unit vectors.
    """
    rd = residual_data(build_partial_space(C), tol=tol)
    return complex(rd.cross), float(rd.n_g * rd.n_e)


def _write_and_advance(C: PDFunction, rd, zeta: SzegoParameter) -> PDFunction:
    """Fill the working slot with zeta's value and move to the next stage."""
    dom = C.domain
    d = C.d
    value = zeta.value * (rd.n_g * rd.n_e) + rd.cross
    top = np.array(C._entries[dom.g])
    top[dom.j - 1, dom.k - 1] = value
    entries = dict(C.canonical_items())
    entries[dom.g] = top
    if (dom.j, dom.k) == (d, d):
        # Level complete; the value at the inverse is forced by symmetry and
        # lives in the same stored matrix.  Skip ahead to the next novel
        # level, whose top matrix starts out fully undefined.
        new_dom = Domain.partial(next_novel(dom.g), 1, 1)
    elif dom.k < d:
        new_dom = Domain.partial(dom.g, dom.j, dom.k + 1)
    else:
        new_dom = Domain.partial(dom.g, dom.j + 1, 1)
    return PDFunction(d, new_dom, entries)


def extend_entry(C: PDFunction, zeta, tol: float = DEFAULT_TOL) -> PDFunction:
    """One extension step at the current stage of a partial function.

    The output lives on the successor stage and restricts to C exactly.
    Strictness is inherited: |zeta| < 1 puts the new value in the open
    disk, so every Gram matrix of the output stays strictly positive.
    """
    if C.domain.kind != "partial":
        raise DomainError("extend_entry needs a partially defined function")
    z = _as_zeta(zeta)
    rd = residual_data(build_partial_space(C), tol=tol)
    return _write_and_advance(C, rd, z)


def _policy_step(C: PDFunction, policy: ParameterPolicy, tol: float) -> PDFunction:
    dom = C.domain
    rd = residual_data(build_partial_space(C), tol=tol)
    context = {"disk": (complex(rd.cross), float(rd.n_g * rd.n_e)), "residuals": rd}
    try:
        z = _as_zeta(policy.rule((dom.g, dom.j, dom.k), C, context))
    except Exception as exc:
        raise ParameterError(
            f"policy '{policy.name}' failed at stage "
            f"({word_to_str(dom.g)}, {dom.j}, {dom.k}): {exc}"
        ) from exc
    return _write_and_advance(C, rd, z)


def extend_ball(
    C: PDFunction,
    R: int,
    policy: ParameterPolicy | None = None,
    keep: str = "ball",
    tol: float = DEFAULT_TOL,
) -> PDFunction:
    """Extend a function on Ball(r) to Ball(R) stage by stage.

    Novel levels of B_R are visited in shortlex order, all d*d coordinates
    of each in row-major order; non-novel levels are mirrors and need no
    choice.  The walk is deterministic given the policy, and the output
    restricted to B_r equals C bitwise.

    keep="ball" labels the output with the Ball(R) domain; keep="prefix"
    returns the same data on the prefix domain of the last word of B_R,
    convenient when the result feeds further stagewise work.
    """
    if C.domain.kind != "ball":
        raise DomainError("extend_ball starts from a fully specified ball")
    if keep not in ("ball", "prefix"):
        raise ParameterError(f"unknown output form {keep!r}")
    R = int(R)
    r = C.domain.r
    if R < r:
        raise ParameterError(f"target radius {R} is below the source radius {r}")
    if policy is None:
        policy = central_policy()
    if R > r:
        cur = PDFunction(
            C.d,
            Domain.partial(next_novel((3,) * r), 1, 1),
            dict(C.canonical_items()),
        )
        while len(cur.domain.g) <= R:
            cur = _policy_step(cur, policy, tol)
        entries = {w: a for w, a in cur.canonical_items() if len(w) <= R}
    else:
        entries = dict(C.canonical_items())
    dom = Domain.ball(R) if keep == "ball" else Domain.prefix((3,) * R)
    return PDFunction(C.d, dom, entries)


def central_extension(C: PDFunction, R: int, tol: float = DEFAULT_TOL) -> PDFunction:
    """The zeta = 0 extension of a ball function out to radius R."""
    return extend_ball(C, R, policy=central_policy(), tol=tol)


def toeplitz_step(seq, zeta, tol: float = DEFAULT_TOL) -> complex:
    """One Schur extension step for a scalar positive definite sequence.

    seq = (c_0, ..., c_N) with c_0 = 1 must have a strictly positive
    Toeplitz matrix T[i, j] = c_{i-j} (negative indices by conjugation).
    Returns the value c_{N+1} = zeta * |(1-p)Phi_{N+1}| * |(1-p)Phi_0|
                                + <p Phi_{N+1}, p Phi_0>,
    with p the projection onto span(Phi_1, ..., Phi_N).  The same residual
    routine as the group walk is used, on the Gram matrix ordered
    (Phi_1, ..., Phi_N, Phi_{N+1}, Phi_0) with the unknown corner masked.
    """
    c = np.asarray(seq, dtype=complex).ravel()
    if c.size == 0:
        raise ParameterError("the sequence must contain at least c_0")
    if abs(c[0] - 1.0) > 1e-12:
        raise ParameterError(f"c_0 must equal 1, got {c[0]}")
    z = _as_zeta(zeta)
    N = c.size - 1
    T = scipy.linalg.toeplitz(c)
    lam = scipy.linalg.eigvalsh(T)
    if lam[0] <= tol * c.size:
        raise NotStrictError(
            f"the Toeplitz matrix is not strictly positive (min eig {lam[0]:.3e})"
        )

    def val(m: int) -> complex:
        return c[m] if m >= 0 else np.conj(c[-m])

    order = list(range(1, N + 1)) + [N + 1, 0]
    G = np.empty((N + 2, N + 2), dtype=complex)
    for p, ip in enumerate(order):
        for q, iq in enumerate(order):
            diff = ip - iq
            if abs(diff) == N + 1:
                G[p, q] = complex("nan")
            else:
                G[p, q] = val(diff)
    rd = residual_from_gram(G, core_size=N, tol=tol)
    return complex(z.value * (rd.n_g * rd.n_e) + rd.cross)
