"""Permutation symmetry and fermionic second quantization.

Labeled products model multi-set wave functions: each factor is a label
attached to one variable-set index, and the antisymmetrizer sums signed
set-index permutations.  The 1/sqrt(k!) normalizer is irrational, so a
``KetSum`` stores exact term amplitudes together with a rational squared
prefactor; equality handles perfect-square rescalings exactly.

Occupation states over M ordered modes use the standard sign convention:
acting at a mode picks up (-1)^(number of occupied modes below it).  The
anticommutator suite builds the ladder matrices on the full 2^M space and
checks the relations exactly in integer arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Hashable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .report import RelationReport
from .scalar import ONE, ZERO, Scalar, rational_sqrt
from .weyl import DiffOp

Label = Hashable


class AsymmetricInteraction(ValueError):
    """A two-set interaction template was not exchange symmetric."""


# ----------------------------------------------------------------------
# labeled products and signed sums
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class LabeledKet:
    """A product of labeled single-set factors, canonically ordered by set."""

    factors: tuple[tuple[Label, int], ...]

    def __post_init__(self) -> None:
        sets = [s for _, s in self.factors]
        if len(set(sets)) != len(sets):
            raise ValueError("variable-set indices must be distinct")
        object.__setattr__(self, "factors",
                           tuple(sorted(self.factors, key=lambda f: f[1])))

    @staticmethod
    def of(*factors: tuple[Label, int]) -> "LabeledKet":
        return LabeledKet(tuple(factors))

    def labels(self) -> tuple[Label, ...]:
        return tuple(lbl for lbl, _ in self.factors)

    def sets(self) -> tuple[int, ...]:
        return tuple(s for _, s in self.factors)

    def permute_sets(self, perm: Mapping[int, int]) -> "LabeledKet":
        return LabeledKet(tuple((lbl, perm.get(s, s)) for lbl, s in self.factors))

    def __str__(self) -> str:
        return "".join(f"|{lbl}>_{s}" for lbl, s in self.factors)


@dataclass(frozen=True)
class KetSum:
    """Exact linear combination of labeled products times sqrt(norm2).

    The represented state is sqrt(norm2) * sum(amplitude * ket); norm2 is a
    positive rational so that 1/sqrt(k!) factors stay exact.
    """

    terms: tuple[tuple[LabeledKet, Scalar], ...]
    norm2: Fraction = Fraction(1)

    @staticmethod
    def build(entries: Mapping[LabeledKet, Scalar], norm2: Fraction) -> "KetSum":
        kept = tuple(sorted(((k, c) for k, c in entries.items() if not c.is_zero),
                            key=lambda kc: str(kc[0])))
        return KetSum(kept, norm2)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def scale_sqrt(self, ratio: Fraction) -> "KetSum":
        """Multiply the state by sqrt(ratio) exactly."""
        if ratio <= 0:
            raise ValueError("ratio must be positive")
        return KetSum(self.terms, self.norm2 * ratio)

    def scale(self, c: Scalar) -> "KetSum":
        return KetSum.build({k: a * c for k, a in self.terms}, self.norm2)

    def __add__(self, other: "KetSum") -> "KetSum":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        ratio = other.norm2 / self.norm2
        root = rational_sqrt(ratio)
        if root is None:
            raise ValueError("cannot add sums with incommensurable prefactors")
        acc: dict[LabeledKet, Scalar] = dict(self.terms)
        for k, a in other.terms:
            acc[k] = acc.get(k, ZERO) + a * root
        return KetSum.build(acc, self.norm2)

    def __neg__(self) -> "KetSum":
        return self.scale(-ONE)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KetSum):
            return NotImplemented
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        root = rational_sqrt(self.norm2 / other.norm2)
        if root is None:
            return False
        mine = {k: a * root for k, a in self.terms}
        return mine == dict(other.terms)

    def as_terms(self) -> list[tuple[Scalar, LabeledKet]]:
        return [(c, k) for k, c in self.terms]

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        body = " + ".join(f"({c})*{k}" for k, c in self.terms)
        if self.norm2 == 1:
            return body
        return f"sqrt({self.norm2}) * [{body}]"


def _permutations_with_sign(items: Sequence[int]):
    base = list(items)
    for perm in itertools.permutations(base):
        inversions = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm))
                         if base.index(perm[i]) > base.index(perm[j]))
        yield dict(zip(base, perm)), -1 if inversions % 2 else 1


def antisymmetrize(product: LabeledKet) -> KetSum:
    """Signed sum over permutations of the set assignments, with the
    1/sqrt(k!) prefactor carried as exact squared metadata.

    Duplicate labels make the whole sum vanish (exclusion); the zero result
    is an explicit empty sum, never a bare list.
    """
    k = len(product.factors)
    acc: dict[LabeledKet, Scalar] = {}
    for perm, sign in _permutations_with_sign(product.sets()):
        ket = product.permute_sets(perm)
        acc[ket] = acc.get(ket, ZERO) + Scalar.of(sign)
    return KetSum.build(acc, Fraction(1, factorial(k)))


def symmetrize(product: LabeledKet) -> KetSum:
    """Unsigned permutation sum with the same exact normalization scheme."""
    k = len(product.factors)
    acc: dict[LabeledKet, Scalar] = {}
    for perm, _ in _permutations_with_sign(product.sets()):
        ket = product.permute_sets(perm)
        acc[ket] = acc.get(ket, ZERO) + ONE
    return KetSum.build(acc, Fraction(1, factorial(k)))


def project(ketsum: KetSum, projector) -> KetSum:
    """Linear extension of a product-level (anti)symmetrizer to a sum."""
    out = KetSum((), ketsum.norm2)
    for ket, amp in ketsum.terms:
        part = projector(ket)
        if part.is_zero:
            continue
        out = out + KetSum(part.terms, part.norm2 * ketsum.norm2).scale(amp)
    return out


# ----------------------------------------------------------------------
# occupation states and ladder operators
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class FockState:
    """Occupancy bit pattern over M ordered modes; mode 0 prints leftmost."""

    modes: int
    bits: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.bits < (1 << self.modes):
            raise ValueError("bit pattern out of range")

    @staticmethod
    def vacuum(modes: int) -> "FockState":
        return FockState(modes, 0)

    def occupied(self, mode: int) -> bool:
        return bool((self.bits >> mode) & 1)

    def occupation(self) -> int:
        return self.bits.bit_count()

    def __str__(self) -> str:
        return "|" + "".join("1" if self.occupied(m) else "0"
                             for m in range(self.modes)) + ">"


def _parity_below(bits: int, mode: int) -> int:
    below = bits & ((1 << mode) - 1)
    return -1 if below.bit_count() % 2 else 1


def apply_ladder(state: FockState, which: str, mode: int
                 ) -> tuple[int, FockState] | None:
    """Apply a creation or annihilation operator at one mode.

    Returns (sign, new state) with sign = (-1)^(occupied modes below), or
    None when the action annihilates the state.
    """
    if not 0 <= mode < state.modes:
        raise IndexError(f"mode {mode} out of range")
    occupied = state.occupied(mode)
    if which == "create":
        if occupied:
            return None
        return _parity_below(state.bits, mode), FockState(state.modes,
                                                          state.bits | (1 << mode))
    if which == "annihilate":
        if not occupied:
            return None
        return _parity_below(state.bits, mode), FockState(state.modes,
                                                          state.bits & ~(1 << mode))
    raise ValueError(f"unknown ladder kind: {which}")


def ladder_matrix(modes: int, which: str, mode: int,
                  sign_flip: bool = False) -> sp.csr_matrix:
    """Sparse integer matrix of one ladder operator on the 2^M basis.

    ``sign_flip`` drops the parity sign; used only to demonstrate that a
    broken convention fails the anticommutator suite.
    """
    dim = 1 << modes
    mat = sp.lil_matrix((dim, dim), dtype=np.int64)
    for bits in range(dim):
        moved = apply_ladder(FockState(modes, bits), which, mode)
        if moved is None:
            continue
        sign, new = moved
        mat[new.bits, bits] = 1 if sign_flip else sign
    return mat.tocsr()


def verify_car(modes: int, include_printed_variant: bool = False,
               sign_flip: bool = False) -> list[RelationReport]:
    """Exact anticommutator checks on the full 2^M space.

    Standard relations: {a_i, a*_j} = delta_ij I, {a_i, a_j} = 0 and
    {a*_i, a*_j} = 0.  The optional variant rows record the residual of the
    same-side index placement a*_i a_j + a_i a*_j, which differs from the
    standard relations off the diagonal; they are informational and are not
    included by default.
    """
    if modes > 12:
        raise ValueError("mode count capped at 12 (space dimension 2^M)")
    dim = 1 << modes
    eye = sp.identity(dim, format="csr", dtype=np.int64)
    ann = [ladder_matrix(modes, "annihilate", m, sign_flip) for m in range(modes)]
    cre = [ladder_matrix(modes, "create", m, sign_flip) for m in range(modes)]
    reports = []

    zero = sp.csr_matrix((dim, dim), dtype=np.int64)

    def check(suite: str, relation: str, actual: sp.csr_matrix,
              expected: sp.csr_matrix, expected_text: str) -> None:
        residual = (actual - expected).tocoo()
        residual.eliminate_zeros()
        nnz = residual.nnz
        worst = 0 if nnz == 0 else max(abs(x) for x in residual.data)
        reports.append(RelationReport(
            suite=suite,
            relation=relation,
            expected=expected_text,
            actual=f"dim {dim} matrix, {actual.nnz} nonzeros",
            residual="0" if nnz == 0 else f"{nnz} nonzero entries, max |.| = {worst}",
            passed=nnz == 0,
        ))

    for i in range(modes):
        for j in range(modes):
            delta = eye if i == j else zero
            check("car", f"a({i})a*({j}) + a*({j})a({i}) = delta({i},{j})I",
                  ann[i] @ cre[j] + cre[j] @ ann[i], delta,
                  "I" if i == j else "0")
            check("car", f"a({i})a({j}) + a({j})a({i}) = 0",
                  ann[i] @ ann[j] + ann[j] @ ann[i], zero, "0")
            check("car", f"a*({i})a*({j}) + a*({j})a*({i}) = 0",
                  cre[i] @ cre[j] + cre[j] @ cre[i], zero, "0")
            if include_printed_variant:
                check("car-printed-variant",
                      f"a*({i})a({j}) + a({i})a*({j}) = delta({i},{j})I",
                      cre[i] @ ann[j] + ann[i] @ cre[j], delta,
                      "I" if i == j else "0")
    return reports


def number_operator(modes: int) -> sp.csr_matrix:
    dim = 1 << modes
    total = sp.csr_matrix((dim, dim), dtype=np.int64)
    for m in range(modes):
        total = total + ladder_matrix(modes, "create", m) @ ladder_matrix(
            modes, "annihilate", m)
    return total


# ----------------------------------------------------------------------
# multi-set operators
# ----------------------------------------------------------------------
@dataclass
class MultiSetOperator:
    """Assembled operator: one-body copies plus pairwise interactions.

    Templates are written in site index 1 (one-body) and sites 1, 2
    (two-body); instantiation relabels the sites.  The two-body template
    must be symmetric under exchanging its two sites, enforced here.
    """

    n_sets: int
    one_body: DiffOp
    interaction: DiffOp | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.n_sets <= 4:
            raise ValueError("set count must be between 1 and 4")
        if self.interaction is not None:
            swapped = self.interaction.map_sites({1: 2, 2: 1})
            if swapped != self.interaction:
                raise AsymmetricInteraction(
                    "interaction template changes under site exchange")

    def assembled(self) -> DiffOp:
        total = DiffOp.zero()
        for m in range(1, self.n_sets + 1):
            total = total + self.one_body.map_sites({1: m})
        if self.interaction is not None:
            for m in range(1, self.n_sets + 1):
                for n in range(1, self.n_sets + 1):
                    if m != n:
                        total = total + self.interaction.map_sites({1: m, 2: n})
        return total


def verify_permutation_invariance(op: MultiSetOperator) -> list[RelationReport]:
    """Exact exchange-symmetry reports for every transposition of sets."""
    total = op.assembled()
    reports = []
    for m in range(1, op.n_sets + 1):
        for n in range(m + 1, op.n_sets + 1):
            swapped = total.map_sites({m: n, n: m})
            residual = swapped - total
            reports.append(RelationReport(
                suite="permutation-invariance",
                relation=f"exchange sets {m} <-> {n}",
                expected=total.render(),
                actual=swapped.render(),
                residual=residual.render(),
                passed=residual.is_zero,
            ))
    return reports
