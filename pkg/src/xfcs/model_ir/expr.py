"""Linear expressions over model variables.

Variables and expressions support ``+``, ``-``, scalar ``*`` and the
comparison operators ``<=``, ``>=`` and ``==``, which build a
:class:`Relation` to pass to :meth:`Model.add_constr`.
"""

from __future__ import annotations

from numbers import Real


class Var:
    __slots__ = ("index", "name")

    def __init__(self, index: int, name: str):
        self.index = index
        self.name = name

    def __repr__(self):
        return f"Var({self.name!r})"

    def __hash__(self):
        return hash(("Var", self.index))

    def to_expr(self) -> LinExpr:
        return LinExpr({self.index: 1.0})

    def __add__(self, other):
        return self.to_expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self.to_expr() - other

    def __rsub__(self, other):
        return other - self.to_expr()

    def __neg__(self):
        return LinExpr({self.index: -1.0})

    def __mul__(self, k):
        if not isinstance(k, Real):
            return NotImplemented
        return LinExpr({self.index: float(k)})

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / k)

    def __le__(self, other):
        return self.to_expr() <= other

    def __ge__(self, other):
        return self.to_expr() >= other

    def __eq__(self, other):
        return self.to_expr() == other


class LinExpr:
    """Sparse ``sum(coef * var) + const``; ``terms`` maps variable index to coefficient."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: dict[int, float] | None = None, const: float = 0.0):
        self.terms = terms if terms is not None else {}
        self.const = float(const)

    def __repr__(self):
        return f"LinExpr({self.terms}, const={self.const})"

    def copy(self) -> LinExpr:
        return LinExpr(dict(self.terms), self.const)

    def add_term(self, var: Var | int, coef: float) -> LinExpr:
        """In-place ``self += coef * var``; returns self for chaining."""
        i = var.index if isinstance(var, Var) else var
        self.terms[i] = self.terms.get(i, 0.0) + coef
        return self

    def _iadd(self, other, sign: float) -> LinExpr:
        if isinstance(other, LinExpr):
            t = self.terms
            for i, c in other.terms.items():
                t[i] = t.get(i, 0.0) + sign * c
            self.const += sign * other.const
        elif isinstance(other, Var):
            self.terms[other.index] = self.terms.get(other.index, 0.0) + sign
        elif isinstance(other, Real):
            self.const += sign * float(other)
        else:
            return NotImplemented
        return self

    def __add__(self, other):
        return self.copy()._iadd(other, 1.0)

    __radd__ = __add__

    def __iadd__(self, other):
        return self._iadd(other, 1.0)

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __isub__(self, other):
        return self._iadd(other, -1.0)

    def __rsub__(self, other):
        return (-self)._iadd(other, 1.0)

    def __neg__(self):
        return LinExpr({i: -c for i, c in self.terms.items()}, -self.const)

    def __mul__(self, k):
        if not isinstance(k, Real):
            return NotImplemented
        k = float(k)
        return LinExpr({i: k * c for i, c in self.terms.items()}, k * self.const)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / k)

    def __le__(self, other):
        return Relation(self - other, "<=")

    def __ge__(self, other):
        return Relation(self - other, ">=")

    def __eq__(self, other):
        return Relation(self - other, "==")

    __hash__ = None


class Relation:
    """``expr (sense) 0``, produced by comparing expressions."""

    __slots__ = ("expr", "sense")

    def __init__(self, expr: LinExpr, sense: str):
        self.expr = expr
        self.sense = sense

    def __bool__(self):
        raise TypeError("a Relation has no truth value; pass it to Model.add_constr")


def quicksum(items) -> LinExpr:
    """Sum of vars/expressions/numbers without the quadratic cost of repeated ``+``."""
    out = LinExpr()
    for it in items:
        out._iadd(it, 1.0)
    return out


def as_expr(x) -> LinExpr:
    if isinstance(x, LinExpr):
        return x
    if isinstance(x, Var):
        return x.to_expr()
    return LinExpr(const=float(x))
