"""Reduced words in the rank-2 free group, shortlex order, and clique geometry.

Words are stored as tuples of letter codes 0..3 standing for a, b, a^-1, b^-1
in that fixed order; the empty tuple is the identity e.  All functions accept
and return reduced words only (reduction happens on construction), so tuples
double as canonical dictionary keys.

The generalized Cayley graph at level g has vertex set the whole group and an
edge between distinct h, l whenever l^-1 h lies in the symmetric index set I_g.
Everything downstream (positive definiteness checks, extension stages) reduces
to cliques of these graphs, so the combinatorics here is deliberately small,
exhaustively tested, and free of numerical content.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import WordError

LETTER_CHARS = "abAB"
_CHAR_TO_LETTER = {c: i for i, c in enumerate(LETTER_CHARS)}

Word = tuple  # tuple of ints in 0..3


def inv_letter(x: int) -> int:
    return (x + 2) % 4


def reduce_word(letters) -> Word:
    """Free reduction: cancel adjacent mutually-inverse letters, stack style."""
    out = []
    for x in letters:
        if out and out[-1] == inv_letter(x):
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def inverse(w: Word) -> Word:
    return tuple(inv_letter(x) for x in reversed(w))


def mul(u: Word, v: Word) -> Word:
    """Product of two reduced words (cancellation only at the junction)."""
    i = len(u)
    j = 0
    while i > 0 and j < len(v) and u[i - 1] == inv_letter(v[j]):
        i -= 1
        j += 1
    return u[:i] + v[j:]


def word_from_str(text: str) -> Word:
    """Parse the text encoding: letters a, b, A, B concatenated; "e" is the identity."""
    if text == "e":
        return ()
    if not text:
        raise WordError("empty word text; the identity is written 'e'")
    try:
        letters = tuple(_CHAR_TO_LETTER[c] for c in text)
    except KeyError as exc:
        raise WordError(f"illegal letter {exc.args[0]!r} in word {text!r}") from None
    if reduce_word(letters) != letters:
        raise WordError(f"word {text!r} is not reduced")
    return letters


def word_to_str(w: Word) -> str:
    return "".join(LETTER_CHARS[x] for x in w) if w else "e"


def shortlex_key(w: Word):
    return (len(w), w)


def shortlex_compare(u: Word, v: Word) -> int:
    ku, kv = shortlex_key(u), shortlex_key(v)
    return -1 if ku < kv else (0 if ku == kv else 1)


# Letters allowed after a given letter (anything but its inverse), ascending.
_ALLOWED_AFTER = {None: (0, 1, 2, 3)}
for _x in range(4):
    _ALLOWED_AFTER[_x] = tuple(y for y in range(4) if y != inv_letter(_x))


def successor(w: Word) -> Word:
    """The next reduced word in shortlex order (odometer with a varying alphabet)."""
    letters = list(w)
    # Try to bump some position, rightmost first; positions to its right are
    # refilled with the smallest letter the reducedness constraint allows.
    for i in range(len(letters) - 1, -1, -1):
        prev = letters[i - 1] if i > 0 else None
        allowed = _ALLOWED_AFTER[prev]
        larger = [y for y in allowed if y > letters[i]]
        if larger:
            letters[i] = larger[0]
            for j in range(i + 1, len(letters)):
                letters[j] = _ALLOWED_AFTER[letters[j - 1]][0]
            return tuple(letters)
    # Carried past the front: the first word of the next length is a, aa, aaa, ...
    return (0,) * (len(w) + 1)


def predecessor(w: Word) -> Word:
    """The previous reduced word in shortlex order; the identity has none."""
    if not w:
        raise WordError("the identity has no shortlex predecessor")
    letters = list(w)
    for i in range(len(letters) - 1, -1, -1):
        prev = letters[i - 1] if i > 0 else None
        allowed = _ALLOWED_AFTER[prev]
        smaller = [y for y in allowed if y < letters[i]]
        if smaller:
            letters[i] = smaller[-1]
            # Refill the suffix with the largest allowed letters.
            for j in range(i + 1, len(letters)):
                letters[j] = _ALLOWED_AFTER[letters[j - 1]][-1]
            return tuple(letters)
    # w is the least word of its length (a^n); the predecessor is the greatest
    # word one letter shorter, which is (b^-1)^(n-1).
    return (3,) * (len(w) - 1)


@lru_cache(maxsize=None)
def ball(r: int) -> tuple:
    """All reduced words of length <= r, in shortlex order."""
    if r < 0:
        raise WordError("radius must be nonnegative")
    words = [()]
    frontier = [()]
    for _ in range(r):
        nxt = []
        for w in frontier:
            prev = w[-1] if w else None
            for y in _ALLOWED_AFTER[prev]:
                nxt.append(w + (y,))
        words.extend(nxt)
        frontier = nxt
    return tuple(words)


def ball_size(r: int) -> int:
    return 1 if r == 0 else 2 * 3 ** r - 1


@dataclass(frozen=True)
class IndexSet:
    """The symmetric set I_g of all h with h or h^-1 shortlex-preceding g."""

    origin: Word
    prefixes: tuple  # all h with h <= g, in shortlex order
    members: frozenset

    def __contains__(self, w: Word) -> bool:
        return w in self.members


@lru_cache(maxsize=None)
def index_set(g: Word) -> IndexSet:
    prefixes = []
    w = ()
    while True:
        prefixes.append(w)
        if w == g:
            break
        w = successor(w)
        if len(w) > len(g) + 1:  # pragma: no cover - guards a malformed g
            raise WordError(f"{word_to_str(g)!r} never reached; is it reduced?")
    members = set(prefixes)
    members.update(inverse(h) for h in prefixes)
    return IndexSet(origin=g, prefixes=tuple(prefixes), members=frozenset(members))


def adjacent(h: Word, l: Word, iset: IndexSet) -> bool:
    """Edge test in the generalized Cayley graph at iset.origin."""
    return h != l and mul(inverse(l), h) in iset.members


def is_novel(g: Word) -> bool:
    """Whether level g adds a new edge, i.e. g strictly precedes its inverse.

    When g^-1 precedes g, the pair {g, g^-1} already entered the index set at
    level g^-1, so I_g = I_{g_up} and the level-g graph equals the previous
    one.  Such levels carry no clique of their own and no extension stage:
    the value at g is forced by Hermitian symmetry.
    """
    return g != () and shortlex_key(g) < shortlex_key(inverse(g))


def next_novel(w: Word) -> Word:
    """The first novel word strictly after w in shortlex order.

    Extension walks visit novel levels only, so the stage after completing
    level g starts here rather than at successor(g).  Novel words make up
    half of every sphere, so the loop below takes at most a few steps.
    """
    g = successor(w)
    while not is_novel(g):
        g = successor(g)
    return g


@dataclass(frozen=True)
class Clique:
    level: Word
    vertices: tuple  # shortlex order


def clique(g: Word) -> Clique:
    """The unique maximal clique K_g containing the edge (e, g).

    Defined for novel g only (see is_novel): at a non-novel level the graph
    is unchanged and the unique-maximal-clique property genuinely fails
    (e.g. two maximal cliques contain the edge (e, b·a^-1)).

    Computed as {e, g} together with the common neighborhood of e and g:
    h is kept when both h and g^-1 h lie in I_g.  Uniqueness of the maximal
    clique through (e, g) forces this set to be a clique, but that is a
    theorem about the group, not about this code, so we assert pairwise
    adjacency before returning.
    """
    if not g:
        raise WordError("K_g is defined for g != e only")
    if not is_novel(g):
        raise WordError(
            f"level {word_to_str(g)} adds no new edge (its inverse precedes it); "
            "K_g is defined for novel levels only"
        )
    iset = index_set(g)
    g_inv = inverse(g)
    members = [(), g]
    for h in iset.members:
        if h == () or h == g:
            continue
        if mul(g_inv, h) in iset.members:
            members.append(h)
    members.sort(key=shortlex_key)
    for i, h in enumerate(members):
        for l in members[i + 1:]:
            if not adjacent(h, l, iset):
                raise WordError(
                    f"common neighborhood of (e, {word_to_str(g)}) is not a clique: "
                    f"({word_to_str(h)}, {word_to_str(l)}) not adjacent"
                )
    return Clique(level=g, vertices=tuple(members))


def maximal_cliques(vertices, iset: IndexSet):
    """All maximal cliques of the induced subgraph on ``vertices`` (Bron-Kerbosch).

    Small inputs only; used as the brute-force oracle against ``clique`` and by
    the brute-force positive definiteness mode.
    """
    verts = list(vertices)
    nbrs = {
        v: {w for w in verts if w != v and adjacent(v, w, iset)} for v in verts
    }
    out = []

    def expand(r, p, x):
        if not p and not x:
            out.append(frozenset(r))
            return
        pivot = max(p | x, key=lambda v: len(nbrs[v] & p))
        for v in list(p - nbrs[pivot]):
            expand(r | {v}, p & nbrs[v], x & nbrs[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(verts), set())
    return out


def predecessor_clique(g: Word):
    """The shortlex-least level h at which K_g minus its top works, with a translate.

    Returns (h, t) where K_g \\ {g} is a clique in the level-h graph and
    K_g \\ {g} is contained in t * K_h.  Scans h upward from a; both conditions
    are required, and existence is a theorem we simply rely on (bounded scan).
    """
    kg = clique(g)
    rest = [v for v in kg.vertices if v != g]
    h = (0,)
    # The scan cannot need to pass g itself: K_g \ {g} is a clique at level g's
    # predecessor already. Cap generously and fail loudly if exceeded.  Only
    # novel levels are visited: a non-novel level has the same graph as some
    # earlier one, so it can never be the least level, and K_h needs novelty.
    for _ in range(4 * len(index_set(g).prefixes) + 8):
        if not is_novel(h):
            h = successor(h)
            continue
        iset_h = index_set(h)
        ok = all(
            adjacent(u, v, iset_h) for i, u in enumerate(rest) for v in rest[i + 1:]
        )
        if ok:
            kh = clique(h).vertices
            kh_inv = [inverse(x) for x in kh]
            candidates = [mul(rest[0], x) for x in kh_inv] if rest else [()]
            for t in sorted(set(candidates), key=shortlex_key):
                t_inv = inverse(t)
                if all(mul(t_inv, v) in kh for v in rest):
                    return h, t
        h = successor(h)
    raise WordError(
        f"no translate level found for {word_to_str(g)}"
    )  # pragma: no cover - contradicts the containment theorem
