"""Shared fixtures-by-hand for the test modules."""

import numpy as np

from freepd.pdcore import Domain, PDFunction
from freepd.words import index_set, is_novel, shortlex_key


def embed_toeplitz(c, n_target):
    """A d = 1 partial function holding a Toeplitz sequence on powers of a.

    c = (c_0=1, c_1, ..., c_m) becomes C(a^k) = c_k; every other novel level
    up to the stage boundary is set to zero.  The returned function sits at
    stage (a^{n_target}, 1, 1) ready for one extension step, which only ever
    reads inner products among powers of a.
    """
    m = len(c) - 1
    if n_target != m + 1:
        raise ValueError("the stage must sit one past the end of the sequence")
    g = (0,) * n_target
    dom = Domain.partial(g, 1, 1)
    entries = {}
    for w in index_set(g).prefixes:
        if w == () or w == g or not is_novel(w):
            continue
        if set(w) == {0}:
            entries[w] = [[c[len(w)]]]
        else:
            entries[w] = [[0.0]]
    return PDFunction(1, dom, entries)


def letter_weights_function(ca, cb, r=1):
    """The d = 1 ball function with C(a) = ca, C(b) = cb (r = 1 only)."""
    assert r == 1
    return PDFunction(1, Domain.ball(1), {"a": [[ca]], "b": [[cb]]})


def sorted_novel(words_iter):
    return sorted((w for w in words_iter if is_novel(w)), key=shortlex_key)


def random_unit_complex(rng):
    phi = rng.uniform(0.0, 2.0 * np.pi)
    return complex(np.cos(phi), np.sin(phi))


def random_search_energy(G_C, G_D, seed=0, rounds=10, per_round=10_000):
    """Derivative-free maximization of the Rayleigh ratio x*G_D x / x*G_C x.

    Ten shrinking-neighborhood rounds spend the sample budget; no
    eigensolver is involved, so this is an independent check of the
    generalized-eigenvalue route.
    """
    rng = np.random.default_rng(seed)
    n = G_C.shape[0]
    best_x, best_v = None, -np.inf
    radius = 1.0
    for _ in range(rounds):
        Z = rng.normal(size=(per_round, n)) + 1j * rng.normal(size=(per_round, n))
        if best_x is not None:
            Z = best_x[None, :] + radius * Z
            radius *= 0.5
        num = np.einsum("ij,jk,ik->i", Z.conj(), G_D, Z).real
        den = np.einsum("ij,jk,ik->i", Z.conj(), G_C, Z).real
        vals = num / den
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v = float(vals[i])
            best_x = Z[i] / np.linalg.norm(Z[i])
    return best_v


def seeded_rim_policy(seed, spread=0.45, cap=0.9):
    """A stage-parameter policy drawing independent values inside |z| <= cap."""
    from freepd.extend import ParameterPolicy

    r = np.random.default_rng(seed)

    def rule(stage, current, context):
        z = spread * (r.standard_normal() + 1j * r.standard_normal()) / np.sqrt(2)
        a = abs(z)
        return z if a <= cap else z * cap / a

    return ParameterPolicy(rule, name="seeded")


def stage_function(seed, gs="aaaaa", d=1):
    """A random strict d-dim function restricted to the stage (gs, 1, 1).

    Built by extending a radius-2 random function out to |gs| with a seeded
    policy, so different seeds give genuinely different boundary behavior,
    then cutting back to the single stage of interest.
    """
    from freepd.extend import extend_ball
    from freepd.pdcore import random_nspd, restrict_to_stage

    C2 = random_nspd(2, d, seed=seed)
    C_full = extend_ball(C2, len(gs), policy=seeded_rim_policy(seed + 1000))
    return restrict_to_stage(C_full, gs, 1, 1)


def mix_functions(A, B, weight):
    """Entrywise convex mix of two functions on the same domain."""
    from freepd.pdcore import PDFunction

    Bd = dict(B.canonical_items())
    entries = {
        w: (1.0 - weight) * np.array(arr) + weight * np.array(Bd[w])
        for w, arr in A.canonical_items()
    }
    return PDFunction(A.d, A.domain, entries)


def girth_permutation(n, min_len, rng):
    """A permutation of range(n) whose cycles all have length >= min_len.

    Shuffled vertices are chopped into blocks of length min_len..2*min_len
    (the tail is absorbed into the last block) and each block becomes one
    cycle.
    """
    verts = list(rng.permutation(n))
    perm = [0] * n
    i = 0
    while i < n:
        take = int(rng.integers(min_len, 2 * min_len + 1))
        if n - i - take < min_len:
            take = n - i
        block = verts[i:i + take]
        for j, v in enumerate(block):
            perm[v] = block[(j + 1) % len(block)]
        i += take
    return tuple(perm)


def random_labeled_graph(n, R, seed, connected=True):
    """A seeded valid surgery input: both permutations have girth >= 4R.

    When connected is set the seed is bumped until the union of the two
    edge sets is weakly connected, so directed-reachability conditions are
    meaningful.
    """
    from freepd.surgery import LabeledGraph

    for attempt in range(64):
        rng = np.random.default_rng(seed + 1000 * attempt)
        g = LabeledGraph(
            n,
            girth_permutation(n, 4 * R, rng),
            girth_permutation(n, 4 * R, rng),
        )
        if not connected or _weakly_connected(g):
            return g
    raise RuntimeError(f"no connected instance near seed {seed}")


def _weakly_connected(g):
    seen = {0}
    stack = [0]
    inv_a = {w: v for v, w in enumerate(g.perm_a)}
    inv_b = {w: v for v, w in enumerate(g.perm_b)}
    while stack:
        v = stack.pop()
        for w in (g.perm_a[v], g.perm_b[v], inv_a[v], inv_b[v]):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == g.n
