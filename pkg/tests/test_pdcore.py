"""Function storage, Gram assembly, positivity verdicts, realizations.

Hand-computed oracles come first; randomized checks are seeded loops so a
failure always reproduces.
"""

import numpy as np
import pytest

from freepd import pdcore
from freepd.errors import (
    DomainError,
    FormatError,
    MissingEntryError,
    NotPositiveError,
    ParameterError,
    WordError,
)
from freepd.pdcore import (
    Domain,
    PDFunction,
    check_pd,
    delta,
    function_from_dict,
    function_to_dict,
    gram,
    gram_indexed,
    l1_distance,
    load_function,
    mix_with_delta,
    random_nspd,
    realize,
    restrict_to_ball,
    save_function,
    stage_pairs,
)
from freepd.words import ball, clique, inverse, mul, word_from_str

W = word_from_str


def test_gram_of_delta_is_identity():
    for d in (1, 2):
        C = delta(d, Domain.prefix("aa"))
        E = clique(W("aa")).vertices
        G = gram(C, E)
        assert np.array_equal(G, np.eye(3 * d))


def test_gram_two_point_hand_example():
    c = 0.3 - 0.4j
    C = PDFunction(1, Domain.prefix("a"), {"a": c})
    G = gram(C, ["e", "a"])
    assert np.array_equal(G, np.array([[1, np.conj(c)], [c, 1]]))
    # reversing the list transposes the off-diagonal block
    G2 = gram(C, ["a", "e"])
    assert np.array_equal(G2, np.array([[1, c], [np.conj(c), 1]]))


def test_gram_missing_entry_names_the_canonical_word():
    C = PDFunction(1, Domain.ball(1), {"a": 0.2, "b": 0.1})
    with pytest.raises(MissingEntryError) as err:
        gram(C, ["e", "a", "aa"])
    assert err.value.word == "aa"


def test_gram_indexed_rejects_bad_coordinates():
    C = delta(1, Domain.ball(1))
    with pytest.raises(ParameterError):
        gram_indexed(C, [((), 0)])


def test_constructor_canonicalizes_and_mirrors():
    c = 0.25 + 0.5j
    C = PDFunction(1, Domain.prefix("a"), {"A": c})
    assert C.scalar("a", 1, 1) == np.conj(c)
    assert C.scalar("A", 1, 1) == c

    m = np.array([[0.1, 0.2 + 0.3j], [-0.4j, 0.5]])
    D = PDFunction(2, Domain.prefix("a"), {"a": m})
    assert np.array_equal(D.entry("A"), m.conj().T)
    assert D.scalar("A", 2, 1) == np.conj(m[0, 1])


def test_constructor_rejects_bad_input():
    with pytest.raises(DomainError):
        PDFunction(1, Domain.prefix("a"), {"a": 0.5, "A": 0.4})
    with pytest.raises(DomainError):
        PDFunction(1, Domain.prefix("a"), {"a": 0.5, "e": 2.0})
    with pytest.raises(DomainError):
        PDFunction(1, Domain.prefix("a"), {"a": 0.5, "b": 0.1})
    with pytest.raises(MissingEntryError):
        PDFunction(1, Domain.ball(1), {"a": 0.5})
    with pytest.raises(ParameterError):
        PDFunction(2, Domain.prefix("a"), {"a": 0.5})
    with pytest.raises(ParameterError):
        PDFunction(0, Domain.ball(0), {})
    with pytest.raises(WordError):
        Domain.partial("bA", 1, 1)  # that level adds no edge


def test_check_pd_hand_examples():
    for d in (1, 2):
        v = check_pd(delta(d, Domain.ball(2)))
        assert v.status == "strict"
        assert v.min_eigenvalue == pytest.approx(1.0)

    ones = PDFunction(1, Domain.ball(1), {"a": 1.0, "b": 1.0})
    v = check_pd(ones)
    assert v.status == "semidefinite"
    assert abs(v.min_eigenvalue) < 1e-12

    bad = PDFunction(1, Domain.prefix("a"), {"a": 2.0})
    v = check_pd(bad)
    assert v.status == "not_pd"
    assert v.witness_words() == (W("e"), W("a"))
    G = gram_indexed(bad, v.witness_indices)
    alpha = v.witness_vector
    quad = (alpha.conj() @ G @ alpha).real
    assert quad == pytest.approx(-1.0, abs=1e-12)
    assert quad < 0


def test_check_pd_clique_and_brute_modes_agree():
    rng = np.random.default_rng(42)
    for trial in range(12):
        r = int(rng.integers(1, 3))
        d = int(rng.integers(1, 3))
        margin = float(rng.uniform(0.05, 0.9))
        C = random_nspd(r, d, seed=1000 + trial, margin=margin)
        assert check_pd(C).status == "strict"
        assert check_pd(C, brute_force=True).status == "strict"

        # break positivity by inflating one entry far beyond modulus 1
        entries = {w: np.array(a) for w, a in C.canonical_items()}
        wbad = list(entries)[int(rng.integers(0, len(entries)))]
        entries[wbad][0, 0] += 3.0
        broken = PDFunction(d, C.domain, entries)
        assert check_pd(broken).status == "not_pd"
        assert check_pd(broken, brute_force=True).status == "not_pd"


def test_pd_entries_bounded_by_one_on_random_instances():
    for seed in range(5):
        C = random_nspd(2, 2, seed=seed, margin=0.02)
        for _, arr in C.canonical_items():
            assert np.max(np.abs(arr)) <= 1 + 1e-10


def test_check_pd_stable_under_margin_mixing():
    C = random_nspd(2, 2, seed=7, margin=0.02)
    base = check_pd(C)
    assert base.status == "strict"
    for s in (0.1, 0.5, 1.0):
        v = check_pd(mix_with_delta(C, s))
        assert v.status == "strict"
        assert v.min_eigenvalue >= base.min_eigenvalue - 1e-12


def test_check_pd_partial_domain():
    # the domain at level aa is the full symmetric set I_aa, so b is in it too
    dom = Domain.partial("aa", 1, 1)
    C = PDFunction(1, dom, {"a": 0.6, "b": 0.1})
    assert check_pd(C).status == "strict"

    flat = PDFunction(1, dom, {"a": 1.0, "b": 0.0})
    assert check_pd(flat).status == "semidefinite"

    bad = PDFunction(1, dom, {"a": 2.0, "b": 0.0})
    assert check_pd(bad).status == "not_pd"


def test_partial_domain_scalar_access_and_masks():
    dom = Domain.partial("aa", 2, 1)
    top = np.array([[0.1 + 0.2j, -0.3j], [np.nan, np.nan]], dtype=complex)
    zero = np.zeros((2, 2))
    C = PDFunction(
        2, dom, {"a": np.array([[0.2, 0.0], [0.1j, 0.15]]), "b": zero, "aa": top}
    )
    assert C.scalar("aa", 1, 2) == -0.3j
    assert C.scalar("AA", 2, 1) == np.conj(-0.3j)
    assert not C.defined("aa", 2, 1)
    with pytest.raises(MissingEntryError):
        C.scalar("aa", 2, 1)
    with pytest.raises(MissingEntryError):
        C.entry("aa")

    # a defined slot may not hold NaN, an undefined one must
    with pytest.raises(MissingEntryError):
        PDFunction(2, dom, {"a": zero, "b": zero, "aa": np.full((2, 2), np.nan)})
    with pytest.raises(DomainError):
        PDFunction(2, dom, {"a": zero, "b": zero, "aa": np.zeros((2, 2))})

    # stage (1, 1) may omit the top level entirely
    D = PDFunction(2, Domain.partial("aa", 1, 1), {"a": zero, "b": zero})
    assert not D.defined("aa", 1, 1)
    assert check_pd(D).status == "strict"


def test_stage_pairs_bookkeeping():
    e, a, aa = W("e"), W("a"), W("aa")
    P, Q = stage_pairs("aa", 1, 1, 1)
    assert P == ((a, 1),)
    assert Q == ((a, 1), (aa, 1), (e, 1))

    P2, Q2 = stage_pairs("aa", 2, 2, 1)
    assert P2 == ((a, 1), (a, 2), (aa, 1))
    assert Q2 == P2 + ((aa, 2), (e, 1))

    b, bA, bb = W("b"), W("bA"), W("bb")
    P3, _ = stage_pairs("bb", 1, 1, 1)
    assert P3 == ((b, 1), (bA, 1))

    with pytest.raises(WordError):
        stage_pairs("bA", 1, 1, 1)
    with pytest.raises(ParameterError):
        stage_pairs("aa", 1, 2, 1)


def test_realize_identity_and_rank_deficient():
    R = realize(delta(2, Domain.ball(2)))
    assert R.factors.shape == (10, 10)
    assert np.allclose(R.factors @ R.factors.conj().T, np.eye(10), atol=1e-12)

    ones = PDFunction(1, Domain.ball(2), {w: 1.0 for w in ("a", "b", "aa", "ab", "aB", "ba", "bb", "Ab")})
    R1 = realize(ones)
    assert R1.factors.shape[1] == 1  # rank one
    for row in R1.factors:
        assert np.allclose(row, R1.factors[0], atol=1e-12)
    assert R1.reconstruction_error <= 1e-10 * np.max(np.abs(R1.gram))


def test_realize_roundtrip_on_random_instances():
    # realization over B_r needs data on Ball(2r)
    for r, d in ((1, 1), (1, 2), (2, 1)):
        for seed in range(34 if r == 1 else 33):
            C = random_nspd(2 * r, d, seed=seed, margin=0.1)
            R = realize(C)
            assert R.reconstruction_error <= 1e-10 * np.max(np.abs(R.gram))
            v1 = R.vector(W("a"), 1)
            v2 = R.vector(W("e"), d)
            ip = np.sum(v1 * np.conj(v2))
            assert ip == pytest.approx(C.scalar(W("a"), 1, d), abs=1e-10)


def test_realize_prefix_domain_and_failures():
    src = random_nspd(2, 1, seed=11, margin=0.2)
    entries = {w: src.entry(w) for w in (W("a"), W("b"), W("aa"), W("ab"))}
    C = PDFunction(1, Domain.prefix("ab"), entries)
    R = realize(C)
    assert R.indices == ((W("e"), 1), (W("a"), 1), (W("ab"), 1))
    assert R.reconstruction_error <= 1e-10

    with pytest.raises(NotPositiveError):
        realize(PDFunction(1, Domain.prefix("a"), {"a": 2.0}))
    with pytest.raises(DomainError):
        realize(delta(1, Domain.partial("aa", 1, 1)))


def test_random_nspd_contract():
    assert random_nspd(2, 2, seed=3, margin=1.0) == delta(2, Domain.ball(2))

    C1 = random_nspd(2, 2, seed=9, margin=0.3)
    C2 = random_nspd(2, 2, seed=9, margin=0.3)
    assert C1 == C2
    a1 = dict(C1.canonical_items())[W("ab")]
    a2 = dict(C2.canonical_items())[W("ab")]
    assert a1.tobytes() == a2.tobytes()
    assert random_nspd(2, 2, seed=10, margin=0.3) != C1

    v = check_pd(C1)
    assert v.status == "strict"
    assert v.min_eigenvalue >= 0.3 / 2

    with pytest.raises(ParameterError):
        random_nspd(1, 1, margin=0.0)
    with pytest.raises(ParameterError):
        random_nspd(1, 1, margin=1.5)


def test_l1_distance_examples():
    C = PDFunction(1, Domain.ball(1), {"a": 0.1, "b": 0.05})
    D = PDFunction(1, Domain.ball(1), {"a": 0.2, "b": 0.05})
    assert l1_distance(C, C) == 0.0
    assert l1_distance(C, D) == pytest.approx(0.2)  # both a and a^-1 count
    assert l1_distance(C, D) == l1_distance(D, C)

    E0 = PDFunction(1, Domain.ball(0), {})
    assert l1_distance(E0, E0) == 0.0

    with pytest.raises(DomainError):
        l1_distance(C, E0)
    with pytest.raises(DomainError):
        l1_distance(C, delta(2, Domain.ball(1)))


def test_restrict_and_mix():
    C = random_nspd(2, 2, seed=4, margin=0.15)
    C1 = restrict_to_ball(C, 1)
    assert C1.domain == Domain.ball(1)
    assert np.array_equal(C1.entry("a"), C.entry("a"))
    with pytest.raises(DomainError):
        restrict_to_ball(PDFunction(1, Domain.prefix("a"), {"a": 0.1}), 0)
    with pytest.raises(ParameterError):
        restrict_to_ball(C, 3)
    with pytest.raises(ParameterError):
        mix_with_delta(C, 1.2)
    assert l1_distance(mix_with_delta(C, 0.0), C) == 0.0


def test_json_roundtrip(tmp_path):
    partial_top = np.array([[0.05 - 0.1j, 0.2j], [np.nan, np.nan]], dtype=complex)
    cases = [
        random_nspd(2, 1, seed=1, margin=0.2),
        random_nspd(1, 2, seed=2, margin=0.5),
        PDFunction(1, Domain.prefix("ab"), {"a": 0.1j, "b": -0.2, "aa": 0.05, "ab": 0.0}),
        PDFunction(2, Domain.partial("aa", 2, 1),
                   {"a": np.array([[0.2, 0.1], [0.0, -0.1j]]),
                    "b": np.zeros((2, 2)), "aa": partial_top}),
    ]
    for i, C in enumerate(cases):
        path = tmp_path / f"f{i}.json"
        save_function(C, path)
        assert load_function(path) == C

    path1, path2 = tmp_path / "s1.json", tmp_path / "s2.json"
    save_function(cases[0], path1)
    save_function(cases[0], path2)
    assert path1.read_bytes() == path2.read_bytes()


def test_json_malformed_inputs(tmp_path):
    def dump(C):
        return function_to_dict(C)

    base = dump(PDFunction(1, Domain.ball(1), {"a": 0.1, "b": 0.2}))

    def expect(obj, key):
        with pytest.raises(FormatError) as err:
            function_from_dict(obj)
        assert err.value.key == key

    missing_d = dict(base)
    del missing_d["d"]
    expect(missing_d, "d")

    bad_kind = dict(base, domain={"kind": "disk"})
    expect(bad_kind, "domain.kind")

    bad_r = dict(base, domain={"kind": "ball", "r": -1})
    expect(bad_r, "domain.r")

    extra = dict(base, comment="hi")
    expect(extra, "$.comment")

    bad_word = dict(base, entries=dict(base["entries"], ax=[[[0.0, 0.0]]]))
    expect(bad_word, "entries.ax")

    outside = dict(base, entries=dict(base["entries"], aa=[[[0.0, 0.0]]]))
    expect(outside, "entries.aa")

    bad_shape = dict(base, entries=dict(base["entries"], a=[[[0.0, 0.0], [0.0, 0.0]]]))
    expect(bad_shape, "entries.a")

    inconsistent = dict(base, entries=dict(base["entries"], A=[[[0.9, 0.0]]]))
    expect(inconsistent, "entries.A")

    consistent = dict(
        base, entries=dict(base["entries"], A=[[[0.1, -0.0]]])
    )
    assert function_from_dict(consistent).scalar("a", 1, 1) == 0.1

    short = dict(base, entries={"a": [[[0.1, 0.0]]]})
    expect(short, "entries.b")

    bad_e = dict(base, entries=dict(base["entries"], e=[[[0.5, 0.0]]]))
    expect(bad_e, "entries.e")

    # partial masks: null exactly beyond the stage position
    pd_dom = {"kind": "partial", "g": "aa", "j": 1, "k": 1}
    zero1 = [[[0.0, 0.0]]]
    part = {"d": 1, "domain": pd_dom,
            "entries": {"a": [[[0.1, 0.0]]], "b": zero1, "aa": [[None]]}}
    assert function_from_dict(part).defined("aa", 1, 1) is False
    bad_null = {"d": 1, "domain": pd_dom, "entries": {"a": [[None]], "b": zero1}}
    expect(bad_null, "entries.a")
    beyond = {"d": 1, "domain": pd_dom,
              "entries": {"a": [[[0.1, 0.0]]], "b": zero1, "aa": [[[0.2, 0.0]]]}}
    expect(beyond, "entries.aa")

    stage_dom = {"kind": "partial", "g": "aa", "j": 2, "k": 1}
    expect({"d": 1, "domain": stage_dom,
            "entries": {"a": [[[0.1, 0.0]]], "b": zero1}}, "domain.j")

    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    with pytest.raises(FormatError) as err:
        load_function(junk)
    assert err.value.key == "$"


def test_check_pd_of_loaded_equals_original(tmp_path):
    C = random_nspd(2, 2, seed=21, margin=0.08)
    path = tmp_path / "c.json"
    save_function(C, path)
    D = load_function(path)
    assert check_pd(D).status == "strict"
    assert l1_distance(C, D) == 0.0
