"""Exact algebra of polynomial-coefficient differential operators.

Operators are kept normal ordered: every term is an exact coefficient times
a monomial in the variables times a monomial in the partial derivatives,
with all multiplication factors standing to the left of all derivatives.
The only rewrite rule is the canonical commutation [d/dx, x] = 1 applied
per variable.  Distinct variables commute, and a variable commutes with the
derivative of its conjugate: conjugate pairs such as u and u~ are treated
as independent formal variables, linked only through ``conjugate`` and
``adjoint``.

A polynomial is simply an operator whose terms carry no derivatives.

Text form (documented in docs/operator-text-format.md): a sum of terms
``(coeff)*var^k*...*d[var]^m*...`` where a variable prints as its family
letter, a ``~`` suffix for conjugation, and bracketed indices ``[slot,site]``
(or ``[site]`` when there is no slot, omitted entirely for site 1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping, Union

from . import linalg
from .scalar import ONE, ZERO, Scalar, ScalarLike

MAX_EXPONENT = 1 << 20


class ExponentOverflow(OverflowError):
    """A power or derivative order grew past the supported bound."""


class SingularSubstitution(ValueError):
    """Operator substitution by a non-invertible linear map."""


class NotAPolynomial(TypeError):
    """An operation expected a derivative-free operator."""


@dataclass(frozen=True)
class Var:
    """One indexed formal variable.

    ``family`` is a letter such as u, v, x; ``slot`` is the optional doublet
    index (1 or 2); ``site`` is the copy index (>= 1).  Real variables never
    carry a conjugation flag (conjugation is the identity on them).
    """

    family: str
    slot: int | None = None
    site: int = 1
    conjugated: bool = False
    real: bool = False

    def __post_init__(self) -> None:
        if not self.family or not self.family.isalpha():
            raise ValueError(f"bad variable family: {self.family!r}")
        if self.slot not in (None, 1, 2):
            raise ValueError(f"slot must be 1, 2 or None, got {self.slot!r}")
        if self.site < 1:
            raise ValueError(f"site must be >= 1, got {self.site!r}")
        if self.real and self.conjugated:
            raise ValueError("real variables cannot be conjugated")

    @property
    def key(self) -> tuple:
        """Fixed total order used for canonical term ordering."""
        return (self.family, self.slot or 0, self.site, self.conjugated)

    def conj(self) -> "Var":
        if self.real:
            return self
        return Var(self.family, self.slot, self.site, not self.conjugated)

    def label(self) -> str:
        name = self.family + ("~" if self.conjugated else "")
        if self.slot is not None:
            return f"{name}[{self.slot},{self.site}]"
        if self.site != 1:
            return f"{name}[{self.site}]"
        return name

    def __str__(self) -> str:
        return self.label()


# A term key is (mults, derivs); each half is a tuple of (Var, power>=1)
# sorted by Var.key.
Mults = tuple[tuple[Var, int], ...]
TermKey = tuple[Mults, Mults]

OpLike = Union["DiffOp", Scalar, int, Fraction]


def _sorted_powers(powers: Mapping[Var, int]) -> Mults:
    items = []
    for v, p in powers.items():
        if p == 0:
            continue
        if p < 0:
            raise ValueError(f"negative exponent for {v}")
        if p > MAX_EXPONENT:
            raise ExponentOverflow(f"exponent {p} for {v} exceeds bound")
        items.append((v, p))
    return tuple(sorted(items, key=lambda it: it[0].key))


def _merge_powers(a: Mults, b: Mults) -> Mults:
    acc: dict[Var, int] = dict(a)
    for v, p in b:
        acc[v] = acc.get(v, 0) + p
    return _sorted_powers(acc)


def _falling(p: int, k: int) -> int:
    out = 1
    for j in range(k):
        out *= p - j
    return out


def _term_sort_key(key: TermKey):
    mults, derivs = key
    return (tuple((v.key, p) for v, p in mults),
            tuple((v.key, p) for v, p in derivs))


class DiffOp:
    """A normal-ordered differential operator with exact coefficients."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[TermKey, Scalar] | None = None):
        cleaned: dict[TermKey, Scalar] = {}
        if terms:
            for key, coeff in terms.items():
                c = Scalar.of(coeff)
                if not c.is_zero:
                    cleaned[key] = c
        self._terms = cleaned

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------
    @staticmethod
    def zero() -> "DiffOp":
        return DiffOp()

    @staticmethod
    def constant(c: ScalarLike) -> "DiffOp":
        return DiffOp({((), ()): Scalar.of(c)})

    @staticmethod
    def variable(v: Var) -> "DiffOp":
        return DiffOp({(((v, 1),), ()): ONE})

    @staticmethod
    def derivative(v: Var) -> "DiffOp":
        return DiffOp({((), ((v, 1),)): ONE})

    @staticmethod
    def term(coeff: ScalarLike, mults: Iterable[tuple[Var, int]] = (),
             derivs: Iterable[tuple[Var, int]] = ()) -> "DiffOp":
        m: dict[Var, int] = {}
        for v, p in mults:
            m[v] = m.get(v, 0) + p
        d: dict[Var, int] = {}
        for v, p in derivs:
            d[v] = d.get(v, 0) + p
        return DiffOp({(_sorted_powers(m), _sorted_powers(d)): Scalar.of(coeff)})

    @staticmethod
    def sum(ops: Iterable["DiffOp"]) -> "DiffOp":
        acc: dict[TermKey, Scalar] = {}
        for op in ops:
            for key, c in op._terms.items():
                acc[key] = acc.get(key, ZERO) + c
        return DiffOp(acc)

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_polynomial(self) -> bool:
        return all(not derivs for (_, derivs) in self._terms)

    def terms(self) -> list[tuple[Scalar, Mults, Mults]]:
        """Terms in canonical order."""
        return [(self._terms[k], k[0], k[1])
                for k in sorted(self._terms, key=_term_sort_key)]

    def n_terms(self) -> int:
        return len(self._terms)

    def term_items(self):
        """Raw (key, coefficient) pairs; order is not canonical."""
        return self._terms.items()

    def coefficient(self, mults: Mults, derivs: Mults) -> Scalar:
        return self._terms.get((mults, derivs), ZERO)

    def variables(self) -> set[Var]:
        out: set[Var] = set()
        for mults, derivs in self._terms:
            out.update(v for v, _ in mults)
            out.update(v for v, _ in derivs)
        return out

    def max_derivative_order(self) -> int:
        """Largest total derivative order appearing in any term."""
        best = 0
        for _, derivs in self._terms:
            best = max(best, sum(p for _, p in derivs))
        return best

    def is_derivation(self) -> bool:
        """True when every term has total derivative order exactly one."""
        return bool(self._terms) and all(
            sum(p for _, p in derivs) == 1 for _, derivs in self._terms)

    # ------------------------------------------------------------------
    # ring structure
    # ------------------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiffOp):
            return NotImplemented
        return self._terms == other._terms

    def __add__(self, other: OpLike) -> "DiffOp":
        o = _as_op(other)
        acc = dict(self._terms)
        for key, c in o._terms.items():
            acc[key] = acc.get(key, ZERO) + c
        return DiffOp(acc)

    __radd__ = __add__

    def __sub__(self, other: OpLike) -> "DiffOp":
        return self + (-_as_op(other))

    def __rsub__(self, other: OpLike) -> "DiffOp":
        return _as_op(other) + (-self)

    def __neg__(self) -> "DiffOp":
        return DiffOp({k: -c for k, c in self._terms.items()})

    def scale(self, c: ScalarLike) -> "DiffOp":
        s = Scalar.of(c)
        if s.is_zero:
            return DiffOp.zero()
        return DiffOp({k: s * v for k, v in self._terms.items()})

    def __mul__(self, other: OpLike) -> "DiffOp":
        if not isinstance(other, DiffOp):
            return self.scale(other)
        acc: dict[TermKey, Scalar] = {}
        for (m1, d1), c1 in self._terms.items():
            for (m2, d2), c2 in other._terms.items():
                for coeff, mults, derivs in _compose_terms(c1, m1, d1, c2, m2, d2):
                    key = (mults, derivs)
                    acc[key] = acc.get(key, ZERO) + coeff
        return DiffOp(acc)

    def __rmul__(self, other: OpLike) -> "DiffOp":
        if isinstance(other, DiffOp):
            return other.__mul__(self)
        return self.scale(other)

    def __truediv__(self, c: ScalarLike) -> "DiffOp":
        return self.scale(ONE / Scalar.of(c))

    def commutator(self, other: "DiffOp") -> "DiffOp":
        return self * other - other * self

    # ------------------------------------------------------------------
    # action, adjoint, conjugation
    # ------------------------------------------------------------------
    def apply(self, poly: "DiffOp") -> "DiffOp":
        """Image of a polynomial under this operator.

        Linear in the polynomial and consistent with composition:
        (a*b).apply(f) == a.apply(b.apply(f)).
        """
        if not poly.is_polynomial:
            raise NotAPolynomial("apply target must be derivative-free")
        acc: dict[TermKey, Scalar] = {}
        for (m1, d1), c1 in self._terms.items():
            for (mf, _), cf in poly._terms.items():
                powers = dict(mf)
                coeff = c1 * cf
                dead = False
                for v, order in d1:
                    p = powers.get(v, 0)
                    if p < order:
                        dead = True
                        break
                    coeff = coeff * _falling(p, order)
                    powers[v] = p - order
                if dead or coeff.is_zero:
                    continue
                key = (_merge_powers(m1, _sorted_powers(powers)), ())
                acc[key] = acc.get(key, ZERO) + coeff
        return DiffOp(acc)

    def adjoint(self) -> "DiffOp":
        """Formal adjoint under x* = x~ and (d/dx)* = -d/dx~.

        For real variables the rules degenerate to x* = x and
        (d/dx)* = -d/dx.  The map reverses products and conjugates
        coefficients, and is involutive.
        """
        out = DiffOp.zero()
        for (mults, derivs), c in self._terms.items():
            total_order = sum(p for _, p in derivs)
            sign = -1 if total_order % 2 else 1
            deriv_part = DiffOp.term(ONE, (), [(v.conj(), p) for v, p in derivs])
            mult_part = DiffOp.term(ONE, [(v.conj(), p) for v, p in mults], ())
            out = out + (deriv_part * mult_part).scale(c.conjugate() * sign)
        return out

    def conjugate(self) -> "DiffOp":
        """Formal complex conjugate: coefficients and variables conjugated."""
        acc: dict[TermKey, Scalar] = {}
        for (mults, derivs), c in self._terms.items():
            key = (_sorted_powers({v.conj(): p for v, p in mults}),
                   _sorted_powers({v.conj(): p for v, p in derivs}))
            acc[key] = acc.get(key, ZERO) + c.conjugate()
        return DiffOp(acc)

    def substitute(self, sub: "LinearSub") -> "DiffOp":
        return sub.apply(self)

    def map_sites(self, mapping: Mapping[int, int]) -> "DiffOp":
        """Relabel site indices by an injective map (identity elsewhere)."""
        values = list(mapping.values())
        if len(set(values)) != len(values):
            raise ValueError("site map must be injective")

        def recast(v: Var) -> Var:
            if v.site in mapping:
                return Var(v.family, v.slot, mapping[v.site], v.conjugated, v.real)
            return v

        acc: dict[TermKey, Scalar] = {}
        for (mults, derivs), c in self._terms.items():
            key = (_sorted_powers({recast(v): p for v, p in mults}),
                   _sorted_powers({recast(v): p for v, p in derivs}))
            acc[key] = acc.get(key, ZERO) + c
        return DiffOp(acc)

    # ------------------------------------------------------------------
    # rendering
    # ------------------------------------------------------------------
    def render(self) -> str:
        if self.is_zero:
            return "0"
        parts = []
        for coeff, mults, derivs in self.terms():
            factors = [f"({coeff})"]
            for v, p in mults:
                factors.append(v.label() + (f"^{p}" if p > 1 else ""))
            for v, p in derivs:
                factors.append(f"d[{v.label()}]" + (f"^{p}" if p > 1 else ""))
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        return f"DiffOp({self.render()})"


def _as_op(x: OpLike) -> DiffOp:
    if isinstance(x, DiffOp):
        return x
    return DiffOp.constant(x)


def _compose_terms(c1: Scalar, m1: Mults, d1: Mults,
                   c2: Scalar, m2: Mults, d2: Mults):
    """Normal-order the product (m1 d1)*(m2 d2).

    Only the derivatives of the left term interact with the multiplications
    of the right term; per shared variable x the rewrite is

        d^m x^p = sum_k C(m,k) * p(p-1)...(p-k+1) * x^(p-k) d^(m-k).
    """
    d1_map = dict(d1)
    m2_map = dict(m2)
    shared = [v for v, _ in d1 if v in m2_map]
    base = c1 * c2
    if not shared:
        yield base, _merge_powers(m1, m2), _merge_powers(d1, d2)
        return
    choices = []
    for v in shared:
        m, p = d1_map[v], m2_map[v]
        choices.append([(v, k, comb(m, k) * _falling(p, k))
                        for k in range(min(m, p) + 1)])
    for combo in itertools.product(*choices):
        coeff = base
        m2_left = dict(m2_map)
        d1_left = dict(d1_map)
        for v, k, factor in combo:
            coeff = coeff * factor
            m2_left[v] -= k
            d1_left[v] -= k
        if coeff.is_zero:
            continue
        mults = _merge_powers(m1, _sorted_powers(m2_left))
        derivs = _merge_powers(_sorted_powers(d1_left), d2)
        yield coeff, mults, derivs


# ----------------------------------------------------------------------
# linear substitutions
# ----------------------------------------------------------------------
LinearImage = dict[Var, Scalar]


class LinearSub:
    """An invertible-when-needed linear change of variables.

    ``images`` maps a variable to a linear combination of variables.  For a
    complex variable whose conjugate is not mapped explicitly, the conjugate
    image is filled in by conjugating coefficients and variables, so that
    the map commutes with formal conjugation.

    Polynomials transform by plain replacement.  Operators additionally
    transform their derivative factors by the inverse-transpose of the map
    restricted to the touched variables, which is what conjugation of the
    operator by the substitution requires; that restriction must be
    invertible.
    """

    def __init__(self, images: Mapping[Var, Iterable[tuple[ScalarLike, Var]]]):
        norm: dict[Var, LinearImage] = {}
        for var, combo in images.items():
            img: LinearImage = {}
            for coeff, target in combo:
                c = Scalar.of(coeff)
                if c.is_zero:
                    continue
                img[target] = img.get(target, ZERO) + c
            norm[var] = {t: c for t, c in img.items() if not c.is_zero}
        for var in list(norm):
            if var.real or var.conj() in norm:
                continue
            norm[var.conj()] = {t.conj(): c.conjugate()
                                for t, c in norm[var].items()}
        self.images = norm

    def image_poly(self, v: Var) -> DiffOp:
        if v not in self.images:
            return DiffOp.variable(v)
        return DiffOp.sum(DiffOp.variable(t).scale(c)
                          for t, c in self.images[v].items())

    def basis(self) -> list[Var]:
        touched: set[Var] = set(self.images)
        for img in self.images.values():
            touched.update(img)
        return sorted(touched, key=lambda v: v.key)

    def matrix(self, basis: list[Var]) -> linalg.Matrix:
        index = {v: i for i, v in enumerate(basis)}
        mat = linalg.identity(len(basis))
        for var, img in self.images.items():
            row = [ZERO] * len(basis)
            for target, c in img.items():
                row[index[target]] = c
            mat[index[var]] = row
        return mat

    def apply(self, op: DiffOp) -> DiffOp:
        if op.is_polynomial:
            return self._apply_with(op, deriv_images=None)
        basis = self.basis()
        inv = linalg.invert(self.matrix(basis))
        if inv is None:
            raise SingularSubstitution("substitution is not invertible on its span")
        index = {v: i for i, v in enumerate(basis)}
        deriv_images: dict[Var, DiffOp] = {}
        for v in basis:
            i = index[v]
            deriv_images[v] = DiffOp.sum(
                DiffOp.derivative(basis[k]).scale(inv[k][i])
                for k in range(len(basis)) if not inv[k][i].is_zero)
        return self._apply_with(op, deriv_images)

    def _apply_with(self, op: DiffOp, deriv_images: dict[Var, DiffOp] | None) -> DiffOp:
        out = DiffOp.zero()
        for coeff, mults, derivs in op.terms():
            piece = DiffOp.constant(coeff)
            for v, p in mults:
                img = self.image_poly(v)
                for _ in range(p):
                    piece = piece * img
            for v, p in derivs:
                if deriv_images is None:
                    img = DiffOp.derivative(v)
                else:
                    img = deriv_images.get(v, DiffOp.derivative(v))
                for _ in range(p):
                    piece = piece * img
            out = out + piece
        return out

    def compose(self, first: "LinearSub") -> "LinearSub":
        """The map 'apply ``first``, then self' (self o first)."""
        images: dict[Var, list[tuple[Scalar, Var]]] = {}
        for var in set(first.images) | set(self.images):
            if var in first.images:
                combo: LinearImage = {}
                for target, c in first.images[var].items():
                    inner = self.images.get(target, {target: ONE})
                    for t2, c2 in inner.items():
                        combo[t2] = combo.get(t2, ZERO) + c * c2
            else:
                combo = dict(self.images[var])
            images[var] = [(c, t) for t, c in combo.items()]
        return LinearSub(images)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearSub):
            return NotImplemented
        return self.images == other.images
