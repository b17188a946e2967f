import numpy as np
import pytest
import scipy.linalg

from freepd.errors import DomainError, NotStrictError, ParameterError
from freepd.extend import (
    DELTA_MIN,
    ParameterPolicy,
    SzegoParameter,
    central_extension,
    central_policy,
    constant_policy,
    extend_ball,
    extend_entry,
    legal_disk,
    toeplitz_step,
)
from freepd.pdcore import (
    Domain,
    PDFunction,
    check_pd,
    delta,
    gram_indexed,
    random_nspd,
    restrict_to_ball,
    restrict_to_stage,
    stage_pairs,
)
from freepd.words import is_novel, next_novel, word_from_str
from helpers import embed_toeplitz, letter_weights_function


def test_szego_parameter_validation():
    assert SzegoParameter(0).value == 0j
    assert SzegoParameter(0.5 - 0.2j).value == 0.5 - 0.2j
    assert abs(SzegoParameter((1 - DELTA_MIN) * 1j).value) <= 1 - DELTA_MIN
    for bad in (1.0, -1.0, 1 - 1e-7, np.nan, complex("inf"), "zeta"):
        with pytest.raises(ParameterError):
            SzegoParameter(bad)


def test_legal_disk_at_delta_stages():
    for d in (1, 2):
        c, r = legal_disk(delta(d, Domain.partial("a", 1, 1)))
        assert c == 0 and r == 1.0
    part = restrict_to_stage(delta(1, Domain.ball(2)), "aa", 1, 1)
    c, r = legal_disk(part)
    assert abs(c) < 1e-14 and abs(r - 1.0) < 1e-14


def test_legal_disk_single_letter_value():
    # With C(a) = c the stage at aa has center c^2 and radius 1 - |c|^2.
    val = 0.5 + 0.2j
    C = PDFunction(1, Domain.partial("aa", 1, 1), {"a": [[val]], "b": [[0.0]]})
    center, radius = legal_disk(C)
    assert abs(center - val**2) < 1e-12
    assert abs(radius - (1 - abs(val) ** 2)) < 1e-12


def test_extend_entry_value_and_advance_d1():
    C = delta(1, Domain.partial("a", 1, 1))
    z = 0.3 + 0.1j
    out = extend_entry(C, z)
    assert out.domain == Domain.partial("b", 1, 1)
    assert out.scalar("a", 1, 1) == pytest.approx(z)
    assert restrict_to_stage(out, "a", 1, 1) == C


def test_extend_entry_walks_the_coordinate_grid_d2():
    C = delta(2, Domain.partial("a", 1, 1))
    zs = [0.1, 0.2j, -0.15, 0.05 - 0.05j]
    stages = [("a", 1, 2), ("a", 2, 1), ("a", 2, 2), ("b", 1, 1)]
    for z, (g, j, k) in zip(zs, stages):
        C = extend_entry(C, z)
        assert C.domain == Domain.partial(word_from_str(g), j, k)
    A = C.entry("a")
    assert A.shape == (2, 2) and np.isfinite(A).all()


def test_extend_entry_skips_mirrored_levels():
    base = central_extension(letter_weights_function(0.5, 0.3), 2)
    C = restrict_to_stage(base, "bb", 1, 1)
    out = extend_entry(C, 0.2)
    # bA is the shortlex successor of bb but mirrors aB, so the walk jumps to Ab.
    assert next_novel(word_from_str("bb")) == word_from_str("Ab")
    assert out.domain == Domain.partial("Ab", 1, 1)
    assert out.scalar("bA", 1, 1) == pytest.approx(np.conj(out.scalar("aB", 1, 1)))


def test_extend_entry_rejects_bad_inputs():
    with pytest.raises(DomainError):
        extend_entry(delta(1, Domain.ball(1)), 0)
    C = delta(1, Domain.partial("a", 1, 1))
    for bad in (1.0, 1 - 1e-9, float("nan")):
        with pytest.raises(ParameterError):
            extend_entry(C, bad)


def test_central_extension_of_delta_is_delta():
    for d in (1, 2):
        out = central_extension(delta(d, Domain.ball(1)), 3)
        assert out == delta(d, Domain.ball(3))


def test_central_extension_letter_weights():
    C = central_extension(letter_weights_function(0.5, 0.3), 2)
    want = {"aa": 0.25, "ab": 0.15, "aB": 0.15, "ba": 0.15, "bb": 0.09}
    for w, v in want.items():
        assert C.scalar(w, 1, 1) == pytest.approx(v, abs=1e-12)
    deep = central_extension(letter_weights_function(0.5, 0.3), 3)
    # Central values multiply along reduced words, conjugating at inverses.
    vals = {0: 0.5, 1: 0.3, 2: 0.5, 3: 0.3}
    for w in ("aba", "aab", "bab", "aBa", "Abb"):
        word = word_from_str(w)
        expect = np.prod([vals[x] for x in word])
        assert deep.scalar(w, 1, 1) == pytest.approx(expect, abs=1e-10)
    verdict = check_pd(deep)
    assert verdict.status == "strict"


def test_extend_ball_matches_central_and_is_deterministic():
    C = random_nspd(1, 2, seed=5)
    a = extend_ball(C, 3)
    b = extend_ball(C, 3, policy=central_policy())
    c = extend_ball(C, 3, policy=constant_policy(0))
    d = central_extension(C, 3)
    assert a == b == c == d
    assert extend_ball(C, 3, policy=constant_policy(0.2 + 0.1j)) != a
    assert restrict_to_ball(a, 1) == C


def test_extend_ball_prefix_output_option():
    C = random_nspd(1, 1, seed=9)
    ball_out = extend_ball(C, 2, keep="ball")
    pref_out = extend_ball(C, 2, keep="prefix")
    assert pref_out.domain == Domain.prefix("BB")
    items_b = dict(ball_out.canonical_items())
    items_p = dict(pref_out.canonical_items())
    assert set(items_b) == set(items_p)
    for w, arr in items_b.items():
        assert np.array_equal(arr, items_p[w])


def test_extend_ball_same_radius_and_errors():
    C = random_nspd(1, 1, seed=2)
    assert extend_ball(C, 1) == C
    with pytest.raises(ParameterError):
        extend_ball(C, 0)
    with pytest.raises(ParameterError):
        extend_ball(C, 2, keep="sphere")
    with pytest.raises(DomainError):
        extend_ball(delta(1, Domain.partial("a", 1, 1)), 2)


def test_policy_failures_name_the_stage():
    C = delta(1, Domain.ball(1))

    def explode(stage, current, context):
        if stage[0] == word_from_str("ab"):
            raise ValueError("no idea")
        return 0j

    with pytest.raises(ParameterError, match=r"\(ab, 1, 1\)"):
        extend_ball(C, 2, policy=ParameterPolicy(explode, name="flaky"))

    def off_disk(stage, current, context):
        return 1.5

    with pytest.raises(ParameterError, match="degenerate rim"):
        extend_ball(C, 2, policy=ParameterPolicy(off_disk))


def test_policy_context_carries_the_disk():
    seen = {}

    def peek(stage, current, context):
        seen[stage] = context["disk"]
        return 0j

    C = letter_weights_function(0.5, 0.3)
    extend_ball(C, 2, policy=ParameterPolicy(peek))
    center, radius = seen[(word_from_str("aa"), 1, 1)]
    assert center == pytest.approx(0.25)
    assert radius == pytest.approx(0.75)


def test_random_walks_stay_strict():
    rng = np.random.default_rng(77)
    for seed in range(6):
        d = 1 + seed % 2
        C = random_nspd(1, d, seed=seed)
        zetas = 0.85 * rng.uniform(0, 1, size=64) * np.exp(
            2j * np.pi * rng.uniform(0, 1, size=64)
        )
        counter = {"i": 0}

        def pick(stage, current, context):
            z = zetas[counter["i"] % zetas.size]
            counter["i"] += 1
            return z

        out = extend_ball(C, 3, policy=ParameterPolicy(pick, name="rng"))
        verdict = check_pd(out)
        assert verdict.status == "strict", (seed, verdict.min_eigenvalue)
        if d == 1:
            brute = check_pd(restrict_to_ball(out, 2), brute_force=True)
            assert brute.status == "strict"


def _successor_stage_function(C, g, j, k, value):
    """Plug a candidate value into the working slot, bypassing extend_entry."""
    d = C.d
    top = np.array(
        [
            [C.scalar(g, l, m) if C.defined(g, l, m) else np.nan for m in range(1, d + 1)]
            for l in range(1, d + 1)
        ],
        dtype=complex,
    )
    top[j - 1, k - 1] = value
    entries = dict(C.canonical_items())
    entries[g] = top
    if (j, k) == (d, d):
        dom = Domain.partial(next_novel(g), 1, 1)
    elif k < d:
        dom = Domain.partial(g, j, k + 1)
    else:
        dom = Domain.partial(g, j + 1, 1)
    return PDFunction(d, dom, entries)


def test_disk_membership_decides_positivity():
    # Independent check of the disk against full Gram spectra: points at
    # 0.999 of the radius extend strictly, points at 1.001 fail.
    rng = np.random.default_rng(41)
    level2 = [w for w in (("a", "a"), ("a", "b"), ("a", "B"), ("b", "a"), ("b", "b"))]
    for seed in range(10):
        d = 1 + seed % 2
        C2 = random_nspd(2, d, seed=100 + seed)
        gs = word_from_str("".join(level2[seed % len(level2)]))
        assert is_novel(gs)
        j = int(rng.integers(1, d + 1))
        k = int(rng.integers(1, d + 1))
        stage = restrict_to_stage(C2, gs, j, k)
        center, radius = legal_disk(stage)
        assert abs(center) <= 1 + 1e-12 and 0 <= radius <= 1 + 1e-12
        phi = rng.uniform(0, 2 * np.pi)
        _, q_pairs = stage_pairs(gs, d, j, k)
        for rho, should_pass in ((0.5, True), (0.999, True), (1.001, False)):
            v = center + rho * radius * np.exp(1j * phi)
            cand = _successor_stage_function(stage, gs, j, k, v)
            gq = gram_indexed(cand, q_pairs)
            min_eig = scipy.linalg.eigvalsh(gq)[0]
            verdict = check_pd(cand)
            if should_pass:
                assert min_eig > 0, (seed, rho, min_eig)
                assert verdict.status == "strict"
            else:
                assert min_eig < 0, (seed, rho, min_eig)
                assert verdict.status == "not_pd"
                alpha = verdict.witness_vector
                g_w = gram_indexed(cand, verdict.witness_indices)
                quad = alpha.conj() @ g_w @ alpha
                assert quad.real < 0
        # extend_entry with the matching zeta lands on the same point.
        z = 0.999 * np.exp(1j * phi)
        via_zeta = extend_entry(stage, z).scalar(gs, j, k)
        assert abs(via_zeta - (center + 0.999 * radius * np.exp(1j * phi))) < 1e-12


def test_toeplitz_step_examples():
    assert toeplitz_step([1], 0.4 - 0.1j) == pytest.approx(0.4 - 0.1j)
    assert toeplitz_step([1, 0.5], 0) == pytest.approx(0.25, abs=1e-14)
    c2 = toeplitz_step([1, 0.5], 1 - DELTA_MIN)
    T = scipy.linalg.toeplitz(np.array([1, 0.5, c2]))
    lam = scipy.linalg.eigvalsh(T)[0]
    assert 0 <= lam <= 1e-5
    with pytest.raises(ParameterError):
        toeplitz_step([2.0, 0.5], 0)
    with pytest.raises(ParameterError):
        toeplitz_step([], 0)
    with pytest.raises(NotStrictError):
        toeplitz_step([1.0, 1.0], 0)
    with pytest.raises(ParameterError):
        toeplitz_step([1, 0.5], 1.0)


def test_toeplitz_step_keeps_sequences_positive():
    rng = np.random.default_rng(3)
    for trial in range(8):
        c = [1.0 + 0j]
        for _ in range(5):
            z = 0.9 * rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
            c.append(toeplitz_step(c, z))
            lam = scipy.linalg.eigvalsh(scipy.linalg.toeplitz(np.array(c)))[0]
            assert lam > 0, (trial, len(c), lam)


def test_group_walk_agrees_with_toeplitz_on_letter_powers():
    rng = np.random.default_rng(11)
    for trial in range(6):
        z_geo = 0.45 * np.exp(2j * np.pi * rng.uniform())
        c = [1.0 + 0j]
        for n in range(1, 5):
            zeta = 0.8 * rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
            group_fn = embed_toeplitz(c, n)
            v_group = extend_entry(group_fn, zeta).scalar((0,) * n, 1, 1)
            v_circle = toeplitz_step(c, zeta)
            assert abs(v_group - v_circle) < 1e-10, (trial, n)
            c.append(v_circle)
        del z_geo


def test_group_walk_agrees_on_geometric_sequences():
    for z in (0.4 + 0.2j, -0.3 + 0.35j, 0.55):
        for n in range(1, 5):
            c = [z**k for k in range(n)]
            c[0] = 1.0 + 0j
            zeta = 0.3 + 0.25j
            v_group = extend_entry(embed_toeplitz(c, n), zeta).scalar((0,) * n, 1, 1)
            v_circle = toeplitz_step(c, zeta)
            assert abs(v_group - v_circle) < 1e-10
