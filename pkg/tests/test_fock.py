import itertools
from fractions import Fraction
from math import factorial

import numpy as np
import pytest

from linqm import fock, oplib
from linqm.report import all_passed
from linqm.scalar import ONE
from linqm.weyl import DiffOp, Var


# ----------------------------------------------------------------------
# antisymmetrizer / symmetrizer
# ----------------------------------------------------------------------
def test_two_factor_antisymmetrization():
    anti = fock.antisymmetrize(fock.LabeledKet.of(("A", 1), ("B", 2)))
    assert anti.norm2 == Fraction(1, 2)
    terms = dict(anti.terms)
    assert terms[fock.LabeledKet.of(("A", 1), ("B", 2))] == ONE
    assert terms[fock.LabeledKet.of(("A", 2), ("B", 1))] == -ONE


def test_duplicate_labels_vanish():
    zero = fock.antisymmetrize(fock.LabeledKet.of(("A", 1), ("A", 2)))
    assert zero.is_zero
    assert str(zero) == "0"


def test_exchange_signs():
    base = fock.antisymmetrize(fock.LabeledKet.of(("A", 1), ("B", 2)))
    label_swapped = fock.antisymmetrize(fock.LabeledKet.of(("B", 1), ("A", 2)))
    assert label_swapped == -base
    # exchanging the variable-set subscripts is the same product as the
    # label exchange after canonical ordering, so the sign is -1 as well
    set_swapped = fock.antisymmetrize(fock.LabeledKet.of(("A", 2), ("B", 1)))
    assert set_swapped == -base


def test_symmetrizer_invariant_under_exchange():
    sym = fock.symmetrize(fock.LabeledKet.of(("A", 1), ("B", 2)))
    assert fock.symmetrize(fock.LabeledKet.of(("B", 1), ("A", 2))) == sym
    dup = fock.symmetrize(fock.LabeledKet.of(("A", 1), ("A", 2)))
    assert not dup.is_zero


def test_full_quantum_number_tuples_work_as_labels():
    # labels standing for (m, E, p, S, s_z, Q) are ordered tuples
    electron = (1, 2, 0, Fraction(1, 2), Fraction(1, 2), -1)
    positron = (1, 2, 0, Fraction(1, 2), Fraction(-1, 2), 1)
    anti = fock.antisymmetrize(fock.LabeledKet.of((electron, 1), (positron, 2)))
    assert len(anti.terms) == 2
    assert fock.antisymmetrize(
        fock.LabeledKet.of((electron, 1), (electron, 2))).is_zero
    assert sorted([electron, positron]) == [positron, electron]  # by s_z, then Q


def test_projector_idempotent_up_to_normalization():
    for labels in (("A", "B"), ("A", "B", "C")):
        product = fock.LabeledKet.of(*[(l, i + 1) for i, l in enumerate(labels)])
        k = len(labels)
        anti = fock.antisymmetrize(product)
        twice = fock.project(anti, fock.antisymmetrize)
        assert twice == anti.scale_sqrt(Fraction(factorial(k)))


def test_antisymmetrized_states_are_sign_eigenvectors():
    product = fock.LabeledKet.of(("A", 1), ("B", 2), ("C", 3))
    anti = fock.antisymmetrize(product)
    sym = fock.symmetrize(product)
    for a, b in itertools.combinations((1, 2, 3), 2):
        swap = {a: b, b: a}
        anti_sw = fock.KetSum.build(
            {k.permute_sets(swap): c for k, c in anti.terms}, anti.norm2)
        sym_sw = fock.KetSum.build(
            {k.permute_sets(swap): c for k, c in sym.terms}, sym.norm2)
        assert anti_sw == -anti
        assert sym_sw == sym


# ----------------------------------------------------------------------
# ladder operators
# ----------------------------------------------------------------------
def test_create_and_annihilate_basics():
    vac = fock.FockState.vacuum(4)
    sign, one = fock.apply_ladder(vac, "create", 0)
    assert (sign, str(one)) == (1, "|1000>")
    assert fock.apply_ladder(one, "create", 0) is None
    assert fock.apply_ladder(vac, "annihilate", 2) is None
    sign, back = fock.apply_ladder(one, "annihilate", 0)
    assert sign == 1 and back == vac


def test_sign_bookkeeping_two_modes():
    # create(0) on |0100> keeps +, create(1) on |1000> picks up -
    s01 = fock.FockState(4, 0b0010)
    sign, state = fock.apply_ladder(s01, "create", 0)
    assert sign == 1 and state.bits == 0b0011
    s10 = fock.FockState(4, 0b0001)
    sign, state = fock.apply_ladder(s10, "create", 1)
    assert sign == -1 and state.bits == 0b0011


@pytest.mark.parametrize("modes", [1, 2, 3, 4])
def test_car_relations_exact(modes):
    reports = fock.verify_car(modes)
    assert len(reports) == 3 * modes * modes
    assert all_passed(reports)


def test_sign_broken_convention_detected():
    assert not all_passed(fock.verify_car(2, sign_flip=True))


def test_printed_variant_recorded_not_gating():
    reports = fock.verify_car(2, include_printed_variant=True)
    standard = [r for r in reports if r.suite == "car"]
    variant = [r for r in reports if r.suite == "car-printed-variant"]
    assert all_passed(standard)
    diag = [r for r in variant if "delta(0,0)" in r.relation or "delta(1,1)" in r.relation]
    off = [r for r in variant if r not in diag]
    assert all_passed(diag)
    assert not any(r.passed for r in off)


def test_number_operator_counts_occupation():
    n = fock.number_operator(4).toarray()
    occ = [fock.FockState(4, b).occupation() for b in range(16)]
    assert np.array_equal(np.diag(n), np.array(occ))
    assert np.count_nonzero(n - np.diag(np.diag(n))) == 0


# ----------------------------------------------------------------------
# Slater-sign equivalence
# ----------------------------------------------------------------------
def perm_parity(perm: tuple[int, ...]) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm))
              if perm[i] > perm[j])
    return -1 if inv % 2 else 1


def ladder_sign(modes: int, creation_order: tuple[int, ...]) -> int:
    """Sign of a*_{m1} ... a*_{mk} |0>, rightmost operator acting first."""
    state = fock.FockState.vacuum(modes)
    total = 1
    for mode in reversed(creation_order):
        sign, state = fock.apply_ladder(state, "create", mode)
        total *= sign
    return total


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_slater_signs_match_antisymmetrizer(k):
    modes = 6
    for subset in itertools.combinations(range(modes), k):
        base_product = fock.LabeledKet.of(*[(m, i + 1) for i, m in enumerate(subset)])
        base = fock.antisymmetrize(base_product)
        for perm in itertools.permutations(subset):
            product = fock.LabeledKet.of(*[(m, i + 1) for i, m in enumerate(perm)])
            anti = fock.antisymmetrize(product)
            parity = perm_parity(perm)
            assert anti == (base if parity == 1 else -base)
            assert ladder_sign(modes, perm) == parity


# ----------------------------------------------------------------------
# multi-set operators
# ----------------------------------------------------------------------
def symmetric_interaction() -> DiffOp:
    a = DiffOp.variable(Var("u", 1, 1)) * DiffOp.variable(Var("v", 1, 2))
    return a + a.map_sites({1: 2, 2: 1})


def test_permutation_invariance_passes():
    one = oplib.oscillator(1)["O"]
    for n in (2, 3, 4):
        op = fock.MultiSetOperator(n, one, symmetric_interaction())
        assert all_passed(fock.verify_permutation_invariance(op))


def test_free_case_passes():
    op = fock.MultiSetOperator(2, oplib.oscillator(1)["O"], None)
    assert all_passed(fock.verify_permutation_invariance(op))


def test_asymmetric_interaction_rejected_at_construction():
    lopsided = DiffOp.variable(Var("u", 1, 1)) * DiffOp.variable(Var("v", 1, 2))
    with pytest.raises(fock.AsymmetricInteraction):
        fock.MultiSetOperator(3, oplib.oscillator(1)["O"], lopsided)


def test_set_count_bounds():
    with pytest.raises(ValueError):
        fock.MultiSetOperator(5, oplib.oscillator(1)["O"], None)
