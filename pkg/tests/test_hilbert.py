"""Stage spaces, Gram-Schmidt matrices and residual data.

The two-by-two Gram-Schmidt example and the stage residuals are checked by
hand; determinant formulas act as an independent oracle for the matrices.
"""

import numpy as np
import pytest

from freepd.errors import (
    DegenerateStageError,
    DomainError,
    NotStrictError,
    ParameterError,
)
from freepd.hilbert import (
    StageIndexSets,
    build_partial_space,
    ortho_matrices,
    residual_data,
    residual_from_gram,
)
from freepd.pdcore import (
    Domain,
    PDFunction,
    check_pd,
    delta,
    random_nspd,
    restrict_to_stage,
)
from freepd.words import word_from_str

W = word_from_str


def test_build_partial_space_delta_stage():
    sp = build_partial_space(delta(1, Domain.partial("aa", 1, 1)))
    assert sp.indices.Q == ((W("a"), 1), (W("aa"), 1), (W("e"), 1))
    assert sp.core_size == 1
    expected = np.eye(3, dtype=complex)
    mask = np.isnan(sp.gram)
    assert mask[1, 2] and mask[2, 1]
    assert mask.sum() == 2
    assert np.array_equal(np.where(mask, 0, sp.gram), np.where(mask, 0, expected))


def test_build_partial_space_d2_stage():
    C = random_nspd(2, 2, seed=0, margin=0.2)
    sp = build_partial_space(restrict_to_stage(C, "aa", 2, 1))
    a, aa, e = W("a"), W("aa"), W("e")
    assert sp.indices.P == ((a, 1), (a, 2), (aa, 1))
    assert sp.indices.Q == sp.indices.P + ((aa, 2), (e, 1))
    assert sp.gram.shape == (5, 5)
    mask = np.isnan(sp.gram)
    assert mask[3, 4] and mask[4, 3] and mask.sum() == 2
    # the one-sided restrictions are fully defined and inherit the margin
    for X in (sp.x_g_gram, sp.x_e_gram, sp.core_gram):
        assert not np.isnan(X).any()
        assert np.linalg.eigvalsh(X).min() >= 0.2 - 1e-9
    # spot-check an assembled inner product against the source function
    assert sp.gram[2, 0] == C.scalar(W("a"), 1, 1)  # <Theta(aa)_1, Theta(a)_1>


def test_restrictions_stay_positive_on_random_instances():
    for seed in range(6):
        C = random_nspd(2, 2, seed=100 + seed, margin=0.15)
        for g in ("aa", "ab", "ba", "bb"):
            for j, k in ((1, 1), (2, 1), (2, 2)):
                part = restrict_to_stage(C, g, j, k)
                assert check_pd(part).status == "strict"
                sp = build_partial_space(part)
                assert np.linalg.eigvalsh(sp.x_g_gram).min() >= 0.15 - 1e-9
                assert np.linalg.eigvalsh(sp.x_e_gram).min() >= 0.15 - 1e-9


def test_build_partial_space_rejects_full_domains():
    with pytest.raises(DomainError):
        build_partial_space(delta(1, Domain.ball(1)))


def test_ortho_matrices_identity():
    G, N = ortho_matrices(np.eye(4))
    assert np.array_equal(G, np.eye(4))
    assert np.array_equal(N, np.eye(4))


def test_ortho_matrices_two_by_two_hand_example():
    c = 0.3 - 0.25j
    M = np.array([[1, c], [np.conj(c), 1]])
    G, N = ortho_matrices(M)
    assert np.array_equal(G, np.array([[1, -c], [0, 1]]))
    nrm = np.sqrt(1 - abs(c) ** 2)
    assert np.allclose(N[:, 1], np.array([-c, 1]) / nrm, atol=1e-14)
    Ninv = np.linalg.inv(N)
    assert np.max(np.abs(Ninv.conj().T @ Ninv - M)) < 1e-14


def _random_unit_diagonal_gram(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    M = A @ A.conj().T + 0.5 * n * np.eye(n)
    s = 1 / np.sqrt(np.diag(M).real)
    return M * np.outer(s, s)


def test_ortho_matrices_roundtrip_and_determinant_formulas():
    rng = np.random.default_rng(5)
    for n in (2, 3, 4, 5):
        for _ in range(8):
            M = _random_unit_diagonal_gram(rng, n)
            G, N = ortho_matrices(M)
            assert np.allclose(np.diag(G), 1.0)
            assert np.max(np.abs(np.tril(G, -1))) == 0.0
            Ninv = np.linalg.inv(N)
            assert np.max(np.abs(Ninv.conj().T @ Ninv - M)) < 1e-10

            # determinant oracles for the last column
            Msub, x = M[: n - 1, : n - 1], M[: n - 1, n - 1]
            assert np.allclose(G[: n - 1, n - 1], -np.linalg.solve(Msub, x), atol=1e-8)
            ratio = np.sqrt((np.linalg.det(Msub) / np.linalg.det(M)).real)
            assert N[n - 1, n - 1].real == pytest.approx(ratio, abs=1e-8)
            assert np.allclose(
                N[: n - 1, n - 1], G[: n - 1, n - 1] * N[n - 1, n - 1], atol=1e-8
            )


def test_ortho_matrices_errors():
    with pytest.raises(NotStrictError):
        ortho_matrices(np.ones((2, 2)))
    with pytest.raises(ParameterError):
        ortho_matrices(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ParameterError):
        ortho_matrices(np.zeros((2, 3)))


def test_residual_hand_examples():
    rd = residual_data(build_partial_space(delta(1, Domain.partial("aa", 1, 1))))
    assert (rd.n_g, rd.n_e, rd.cross) == (1.0, 1.0, 0.0)

    c = 0.35 - 0.2j
    C = PDFunction(1, Domain.partial("aa", 1, 1), {"a": c, "b": 0.1j})
    rd = residual_data(build_partial_space(C))
    assert rd.n_g == pytest.approx(np.sqrt(1 - abs(c) ** 2), abs=1e-14)
    assert rd.n_e == pytest.approx(np.sqrt(1 - abs(c) ** 2), abs=1e-14)
    assert rd.cross == pytest.approx(c ** 2, abs=1e-14)

    # empty core: K_a = {e, a} has no interior, so p = 0
    sp = build_partial_space(PDFunction(1, Domain.partial("a", 1, 1), {}))
    assert sp.core_size == 0
    rd = residual_data(sp)
    assert (rd.n_g, rd.n_e, rd.cross) == (1.0, 1.0, 0.0)


def test_residual_invariant_under_core_reordering():
    rng = np.random.default_rng(17)
    C = random_nspd(2, 2, seed=23, margin=0.15)
    sp = build_partial_space(restrict_to_stage(C, "bb", 2, 1))
    m = sp.core_size
    rd = residual_data(sp)
    for _ in range(5):
        perm = list(rng.permutation(m))
        order = perm + [m, m + 1]
        Gp = sp.gram[np.ix_(order, order)]
        rd2 = residual_from_gram(Gp, m)
        assert rd2.n_g == pytest.approx(rd.n_g, abs=1e-10)
        assert rd2.n_e == pytest.approx(rd.n_e, abs=1e-10)
        assert rd2.cross == pytest.approx(rd.cross, abs=1e-10)


def test_residual_degeneracy_is_detected():
    C = PDFunction(1, Domain.partial("aa", 1, 1), {"a": 1.0, "b": 0.0})
    with pytest.raises(DegenerateStageError):
        residual_data(build_partial_space(C))


def test_residual_continuity_under_entry_perturbation():
    C = random_nspd(2, 1, seed=3, margin=0.3)
    base = residual_data(build_partial_space(restrict_to_stage(C, "ab", 1, 1)))
    entries = {w: np.array(a) for w, a in C.canonical_items()}
    entries[W("a")] = entries[W("a")] + 1e-8
    D = PDFunction(1, Domain.ball(2), entries)
    moved = residual_data(build_partial_space(restrict_to_stage(D, "ab", 1, 1)))
    assert abs(moved.n_g - base.n_g) < 1e-5
    assert abs(moved.n_e - base.n_e) < 1e-5
    assert abs(moved.cross - base.cross) < 1e-5


def test_residual_from_gram_validates_core_size():
    with pytest.raises(ParameterError):
        residual_from_gram(np.eye(4), 1)


def test_stage_index_sets_constructor():
    s = StageIndexSets.at("aa", 2, 2, 1)
    assert (s.g, s.d, s.j, s.k) == (W("aa"), 2, 2, 1)
    assert s.Q == s.P + ((W("aa"), 2), (W("e"), 1))
