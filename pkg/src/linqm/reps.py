"""Polynomial representation spaces in two complex variables.

Basis monomials are u^a v^b.  Two exact pairings are exposed:

* ``inner_product``: the closed form of the product-of-unit-disks integral,
  <u^a v^b | u^a v^b> = 2/((a+1)(b+1)).  This reproduces the printed ket
  normalizers exactly, but it is rotation invariant only up to degree one;
  ``verify_pairing_invariance`` records the residuals either way.
* ``invariant_inner_product``: the Gaussian-weight pairing with
  <u^a v^b | u^a v^b> = a! b!, which is exactly invariant under every
  unitary substitution.  Normalized operator matrices use these norms, so
  spin matrices come out in their standard form.

Irrational normalizers are never stored as coefficients; spaces carry the
squared norms and only the float-valued normalized matrices take square
roots.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .oplib import (NamedOperatorSet, cyclic_table, spin_generators,
                    verify_commutator_table)
from .report import RelationReport
from .scalar import ONE, ZERO, Scalar, ScalarLike
from .weyl import DiffOp, LinearSub, Var

U = Var("u")
V = Var("v")


class NonHolomorphic(ValueError):
    """A pairing argument was not a plain polynomial in u and v."""


class NotInvariantSubspace(ValueError):
    """An operator maps the space outside the span of its basis."""


class BadDeterminant(ValueError):
    """A group element must have determinant one."""


Monomial = tuple[int, int]


def monomial_poly(mono: Monomial) -> DiffOp:
    a, b = mono
    return DiffOp.term(ONE, [(U, a), (V, b)], ())


def _poly_monomial_coeffs(poly: DiffOp) -> dict[Monomial, Scalar]:
    """Exponent map of a polynomial in u, v; NonHolomorphic otherwise."""
    out: dict[Monomial, Scalar] = {}
    for coeff, mults, derivs in poly.terms():
        if derivs:
            raise NonHolomorphic("argument carries derivatives")
        a = b = 0
        for var, power in mults:
            if var == U:
                a = power
            elif var == V:
                b = power
            else:
                raise NonHolomorphic(f"foreign variable {var}")
        out[(a, b)] = out.get((a, b), ZERO) + coeff
    return out


@dataclass(frozen=True)
class RepSpace:
    """A finite span of monomials u^a v^b with its exact squared norms."""

    monomials: tuple[Monomial, ...]

    def __post_init__(self) -> None:
        if len(set(self.monomials)) != len(self.monomials):
            raise ValueError("duplicate basis monomials")

    @staticmethod
    def homogeneous(degree: int) -> "RepSpace":
        """The degree-(d) space u^d, u^(d-1) v, ..., v^d of dimension d+1."""
        if degree < 0:
            raise ValueError("degree must be >= 0")
        return RepSpace(tuple((degree - k, k) for k in range(degree + 1)))

    @staticmethod
    def direct_sum(spaces: Sequence["RepSpace"]) -> "RepSpace":
        monos: list[Monomial] = []
        for sp in spaces:
            monos.extend(sp.monomials)
        return RepSpace(tuple(monos))

    @property
    def dim(self) -> int:
        return len(self.monomials)

    @property
    def degree(self) -> int | None:
        degrees = {a + b for a, b in self.monomials}
        return degrees.pop() if len(degrees) == 1 else None

    @property
    def norms2(self) -> list[Fraction]:
        """Disk-product squared norms 2/((a+1)(b+1))."""
        return [Fraction(2, (a + 1) * (b + 1)) for a, b in self.monomials]

    @property
    def invariant_norms2(self) -> list[Fraction]:
        """Gaussian-weight squared norms a! b! (exactly unitary-invariant)."""
        return [Fraction(math.factorial(a) * math.factorial(b))
                for a, b in self.monomials]

    def basis_polys(self) -> list[DiffOp]:
        return [monomial_poly(m) for m in self.monomials]


# ----------------------------------------------------------------------
# pairings
# ----------------------------------------------------------------------
def inner_product(f: DiffOp, g: DiffOp) -> Scalar:
    """Disk-product pairing, conjugate linear in the first argument.

    Monomials are orthogonal with <u^a v^b|u^a v^b> = 2/((a+1)(b+1)).
    """
    cf = _poly_monomial_coeffs(f)
    cg = _poly_monomial_coeffs(g)
    acc = ZERO
    for mono, c in cf.items():
        if mono in cg:
            a, b = mono
            acc = acc + c.conjugate() * cg[mono] * Fraction(2, (a + 1) * (b + 1))
    return acc


def invariant_inner_product(f: DiffOp, g: DiffOp) -> Scalar:
    """Gaussian-weight pairing with monomial norms a! b!."""
    cf = _poly_monomial_coeffs(f)
    cg = _poly_monomial_coeffs(g)
    acc = ZERO
    for mono, c in cf.items():
        if mono in cg:
            a, b = mono
            acc = acc + c.conjugate() * cg[mono] * Fraction(
                math.factorial(a) * math.factorial(b))
    return acc


# ----------------------------------------------------------------------
# matrices
# ----------------------------------------------------------------------
@dataclass
class RepMatrix:
    """Matrix of an operator or group element on a RepSpace basis."""

    dim: int
    exact: bool
    entries: list[list[Scalar]] | np.ndarray

    def exact_entry(self, i: int, j: int) -> Scalar:
        if not self.exact:
            raise ValueError("matrix is float valued")
        return self.entries[i][j]

    def to_numpy(self) -> np.ndarray:
        if self.exact:
            return np.array([[e.to_complex() for e in row] for row in self.entries])
        return np.asarray(self.entries)

    def __matmul__(self, other: "RepMatrix") -> "RepMatrix":
        if self.exact and other.exact:
            n = self.dim
            rows = []
            for i in range(n):
                row = []
                for j in range(n):
                    acc = ZERO
                    for k in range(n):
                        acc = acc + self.entries[i][k] * other.entries[k][j]
                    row.append(acc)
                rows.append(row)
            return RepMatrix(n, True, rows)
        return RepMatrix(self.dim, False, self.to_numpy() @ other.to_numpy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RepMatrix):
            return NotImplemented
        if self.exact and other.exact:
            return self.entries == other.entries
        return bool(np.array_equal(self.to_numpy(), other.to_numpy()))


def _expand_on_basis(poly: DiffOp, space: RepSpace) -> list[Scalar]:
    index = {m: i for i, m in enumerate(space.monomials)}
    column = [ZERO] * space.dim
    for mono, c in _poly_monomial_coeffs(poly).items():
        if mono not in index:
            raise NotInvariantSubspace(
                f"image leaves the span: stray monomial u^{mono[0]} v^{mono[1]}")
        column[index[mono]] = c
    return column


def matrix_rep(op: DiffOp, space: RepSpace, normalized: bool = False) -> RepMatrix:
    """Matrix of a differential operator on the space.

    Exact Gaussian-rational entries on the raw monomial basis.  With
    ``normalized`` the basis is rescaled to unit invariant norm, which
    introduces square roots, so the matrix is float valued; structural
    identities should be checked on the exact monomial matrix.
    """
    columns = [_expand_on_basis(op.apply(p), space) for p in space.basis_polys()]
    exact = [[columns[j][i] for j in range(space.dim)] for i in range(space.dim)]
    if not normalized:
        return RepMatrix(space.dim, True, exact)
    norms = space.invariant_norms2
    arr = np.zeros((space.dim, space.dim), dtype=complex)
    for i in range(space.dim):
        for j in range(space.dim):
            arr[i, j] = exact[i][j].to_complex() * math.sqrt(norms[i] / norms[j])
    return RepMatrix(space.dim, False, arr)


def substitution_of_matrix(a: Sequence[Sequence[ScalarLike]]) -> LinearSub:
    """Change of variables by the transpose of a 2x2 matrix.

    With this convention composing two group elements multiplies their
    representation matrices in the same order, rep(B A) = rep(B) rep(A).
    """
    m = [[Scalar.of(x) for x in row] for row in a]
    return LinearSub({
        U: [(m[0][0], U), (m[1][0], V)],
        V: [(m[0][1], U), (m[1][1], V)],
    })


def rep_of_group_element(a: Sequence[Sequence[ScalarLike]],
                         space: RepSpace) -> RepMatrix:
    """Exact matrix of the substitution action of a determinant-one element."""
    m = [[Scalar.of(x) for x in row] for row in a]
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    if det != ONE:
        raise BadDeterminant(f"determinant is {det}, not 1")
    sub = substitution_of_matrix(m)
    columns = [_expand_on_basis(p.substitute(sub), space) for p in space.basis_polys()]
    entries = [[columns[j][i] for j in range(space.dim)] for i in range(space.dim)]
    return RepMatrix(space.dim, True, entries)


# ----------------------------------------------------------------------
# exact unitary sampling
# ----------------------------------------------------------------------
def su2_from_quadruple(p: int, q: int, r: int, s: int) -> list[list[Scalar]]:
    """Exact special-unitary 2x2 element from an integer quadruple.

    Squaring the quaternion p + qi + rj + sk and dividing by its norm gives
    a rational point (a, b, c, d) on the unit 3-sphere; the element is
    [[a+bi, c+di], [-c+di, a-bi]].
    """
    n = p * p + q * q + r * r + s * s
    if n == 0:
        raise ValueError("zero quadruple")
    a = Fraction(p * p - q * q - r * r - s * s, n)
    b = Fraction(2 * p * q, n)
    c = Fraction(2 * p * r, n)
    d = Fraction(2 * p * s, n)
    return [[Scalar(a, b), Scalar(c, d)], [Scalar(-c, d), Scalar(a, -b)]]


def random_su2(rng: random.Random) -> list[list[Scalar]]:
    while True:
        quad = tuple(rng.randint(-6, 6) for _ in range(4))
        if any(quad):
            return su2_from_quadruple(*quad)


def mat2_mul(a: list[list[Scalar]], b: list[list[Scalar]]) -> list[list[Scalar]]:
    return [[a[i][0] * b[0][j] + a[i][1] * b[1][j] for j in range(2)]
            for i in range(2)]


# ----------------------------------------------------------------------
# spectra
# ----------------------------------------------------------------------
def spin_spectrum(space: RepSpace,
                  spin_set: NamedOperatorSet | None = None) -> list[Fraction]:
    """Exact z-spin eigenvalue of each basis monomial, by application."""
    sz = (spin_set or spin_generators())["Sz"]
    values: list[Fraction] = []
    for mono in space.monomials:
        poly = monomial_poly(mono)
        image = sz.apply(poly)
        coeffs = _poly_monomial_coeffs(image)
        stray = {m for m, c in coeffs.items() if m != mono and not c.is_zero}
        if stray:
            raise NotInvariantSubspace("z-spin generator is not diagonal here")
        lam = coeffs.get(mono, ZERO)
        if not lam.im == 0:
            raise ValueError("z-spin eigenvalue should be real")
        values.append(lam.re)
    return values


def casimir_operator(gens: NamedOperatorSet, labels: Sequence[str]) -> DiffOp:
    return DiffOp.sum(gens[lbl] * gens[lbl] for lbl in labels)


def casimir_spectrum(gens: NamedOperatorSet, space: RepSpace,
                     labels: Sequence[str] | None = None,
                     ) -> tuple[RepMatrix, list[tuple[Fraction, list[int]]]]:
    """Exact matrix of the quadratic invariant and its eigenvalue blocks.

    The generator triple must satisfy the cyclic commutation table; the
    invariant is then diagonal on monomial bases, constant on each
    homogeneous block with value s(s+1) for s = degree/2.
    """
    labels = list(labels) if labels else gens.labels()[:3]
    table = cyclic_table(tuple(labels))
    checks = verify_commutator_table(gens, table, suite="casimir-precheck")
    if not all(r.passed for r in checks):
        raise ValueError("generators do not close under the cyclic table")
    c_op = casimir_operator(gens, labels)
    mat = matrix_rep(c_op, space)
    eigs: list[Fraction] = []
    for i in range(space.dim):
        for j in range(space.dim):
            entry = mat.exact_entry(i, j)
            if i != j and not entry.is_zero:
                raise NotInvariantSubspace("invariant is not diagonal on this basis")
        diag = mat.exact_entry(i, i)
        if diag.im != 0:
            raise ValueError("invariant eigenvalue should be real")
        eigs.append(diag.re)
    blocks: dict[Fraction, list[int]] = {}
    for i, lam in enumerate(eigs):
        blocks.setdefault(lam, []).append(i)
    ordered = sorted(blocks.items(), key=lambda kv: kv[0])
    return mat, ordered


# ----------------------------------------------------------------------
# pairing invariance reports
# ----------------------------------------------------------------------
def verify_pairing_invariance(space: RepSpace,
                              elements: Iterable[tuple[str, Sequence[Sequence[ScalarLike]]]],
                              pairing: str = "gaussian") -> list[RelationReport]:
    """Report <Uf|Ug> = <f|g> on all basis pairs for each group element.

    The gaussian pairing passes exactly for unitary elements; the disk
    pairing holds only on degree <= 1 spaces, and the reports localize the
    failures instead of asserting.
    """
    pair = invariant_inner_product if pairing == "gaussian" else inner_product
    basis = space.basis_polys()
    reports = []
    for name, a in elements:
        sub = substitution_of_matrix([[Scalar.of(x) for x in row] for row in a])
        images = [p.substitute(sub) for p in basis]
        worst = ZERO
        ok = True
        for i in range(space.dim):
            for j in range(space.dim):
                before = pair(basis[i], basis[j])
                after = pair(images[i], images[j])
                diff = after - before
                if not diff.is_zero:
                    ok = False
                    worst = diff
        reports.append(RelationReport(
            suite=f"pairing-invariance:{pairing}",
            relation=f"gram({name}) = gram(identity) on dim {space.dim}",
            expected="0",
            actual=str(worst),
            residual=str(worst),
            passed=ok,
        ))
    return reports
