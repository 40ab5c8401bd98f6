"""A small arithmetic expression language for coefficient functions of ``x``.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Functions: ``exp``, ``log``, ``sqrt``, ``pow``.  Expressions compile to numpy
closures and never go through ``eval``.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import DomainViolation

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/^(),]))")
_FUNCS = {"exp": (1, np.exp), "log": (1, np.log), "sqrt": (1, np.sqrt), "pow": (2, np.power)}


def _tokenize(text):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise DomainViolation(f"unexpected character in expression at {pos}: {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif name is not None:
            out.append(("name", name))
        else:
            out.append(("op", "^" if op == "**" else op))
        pos = m.end()
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            raise DomainViolation(f"expected {value or kind}, found {tok[1]!r}")
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs, lhs = self.term(), node
            node = (lambda x, l=lhs, r=rhs: l(x) + r(x)) if op == "+" else (lambda x, l=lhs, r=rhs: l(x) - r(x))
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs, lhs = self.unary(), node
            node = (lambda x, l=lhs, r=rhs: l(x) * r(x)) if op == "*" else (lambda x, l=lhs, r=rhs: l(x) / r(x))
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda x: -inner(x)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            exp = self.unary()
            return lambda x: np.power(base(x), exp(x))
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return lambda x: np.full_like(x, val, dtype=float)
        if kind == "name":
            self.take()
            if val == "x":
                return lambda x: x
            if val not in _FUNCS:
                raise DomainViolation(f"unknown function {val!r}")
            arity, fn = _FUNCS[val]
            self.take("op", "(")
            args = [self.expr()]
            while self.peek() == ("op", ","):
                self.take()
                args.append(self.expr())
            self.take("op", ")")
            if len(args) != arity:
                raise DomainViolation(f"{val} takes {arity} argument(s)")
            return lambda x: fn(*(a(x) for a in args))
        if (kind, val) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        raise DomainViolation(f"unexpected token {val!r}")


def compile_expr(text: str):
    """Compile ``text`` into a vectorised function of ``x``.

    >>> f = compile_expr("0.5 * x + exp(-x)")
    >>> float(f(0.0))
    1.0
    """
    parser = _Parser(text)
    node = parser.expr()
    parser.take("end")

    def fn(x):
        arr = np.asarray(x, dtype=float)
        out = node(arr)
        return out[()] if out.ndim == 0 else out

    fn.source = text
    return fn
