"""Field-expression language: lexer, recursive-descent parser, evaluator.

Grammar (EBNF):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' factor)?          -- '^' is right-associative
    atom   := number | ident | call | '(' expr ')' | '-' atom | vector
    call   := ident '(' expr (',' expr)* ')'
    vector := '[' expr (',' expr)* ']'

Identifiers: ``t``, the scalar coordinates ``x1..xq``, ``v1..vq``,
``vp1..vpq``, ``vpp1..vppq``, the vector coordinates ``x v vp vpp``, and
declared parameter names.  Functions: sqrt, abs, sin, cos, exp (scalar),
dot, cross (3-vectors, right-handed), norm2.  Non-integer exponents require
a positive base constant term; integer exponents expand by repeated
multiplication.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DslNameError, DslSyntaxError, DslTypeError
from .taylor import abs_g, cos_g, div_g, exp_g, pow_g, sin_g, sqrt_g

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),\[\]])
  | (?P<ws>[ \t\r\n]+)
  | (?P<bad>.)
""", re.VERBOSE)

_SCALAR_COORD_RE = re.compile(r"^(x|v|vp|vpp)([1-9][0-9]*)$")
VECTOR_COORDS = ("x", "v", "vp", "vpp")
FUNCTIONS = ("sqrt", "abs", "sin", "cos", "exp", "dot", "cross", "norm2")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        chunk = m.group()
        if kind == "ws":
            nl = chunk.count("\n")
            if nl:
                line += nl
                col = len(chunk) - chunk.rfind("\n")
            else:
                col += len(chunk)
            continue
        if kind == "bad":
            raise DslSyntaxError(f"unexpected character {chunk!r}", line, col)
        tokens.append(Token(kind if kind != "op" else chunk, chunk, line, col))
        col += len(chunk)
    tokens.append(Token("eof", "", line, col))
    return tokens


# AST ------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Ident:
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Neg:
    arg: object
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Vector:
    items: tuple
    line: int = 0
    col: int = 0


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def take(self, kind: str | None = None) -> Token:
        tok = self.tokens[self.pos]
        if kind is not None and tok.kind != kind:
            want = kind if kind != "eof" else "end of input"
            raise DslSyntaxError(f"expected {want!r}, found {tok.text or 'end of input'!r}",
                                 tok.line, tok.col)
        self.pos += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.take()
            node = BinOp(op.kind, node, self.term(), op.line, op.col)
        return node

    def term(self):
        node = self.factor()
        while self.peek().kind in ("*", "/"):
            op = self.take()
            node = BinOp(op.kind, node, self.factor(), op.line, op.col)
        return node

    def factor(self):
        node = self.atom()
        if self.peek().kind == "^":
            op = self.take()
            node = BinOp("^", node, self.factor(), op.line, op.col)
        return node

    def atom(self):
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text), tok.line, tok.col)
        if tok.kind == "ident":
            self.take()
            if self.peek().kind == "(":
                self.take()
                args = [self.expr()]
                while self.peek().kind == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                return Call(tok.text, tuple(args), tok.line, tok.col)
            return Ident(tok.text, tok.line, tok.col)
        if tok.kind == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if tok.kind == "-":
            self.take()
            return Neg(self.atom(), tok.line, tok.col)
        if tok.kind == "[":
            self.take()
            items = [self.expr()]
            while self.peek().kind == ",":
                self.take()
                items.append(self.expr())
            self.take("]")
            return Vector(tuple(items), tok.line, tok.col)
        raise DslSyntaxError(f"expected an expression, found {tok.text or 'end of input'!r}",
                             tok.line, tok.col)


def parse(text: str):
    parser = _Parser(tokenize(text))
    node = parser.expr()
    parser.take("eof")
    return node


# Static analysis -------------------------------------------------------

_ORDER_OF_SLOT = {"x": 0, "v": 1, "vp": 2, "vpp": 3}


@dataclass
class ExprInfo:
    kind: object            # "scalar" or ("vector", length)
    jet_order: int          # highest jet slot read (0..3); t counts as 0
    order_witness: str      # identifier responsible for jet_order


def analyze(node, q: int, param_names: set[str]) -> ExprInfo:
    """Resolve identifiers, check arities and kinds, compute the jet order."""
    if isinstance(node, Num):
        return ExprInfo("scalar", 0, "")
    if isinstance(node, Ident):
        name = node.name
        if name == "t":
            return ExprInfo("scalar", 0, "t")
        m = _SCALAR_COORD_RE.match(name)
        if m:
            slot, idx = m.group(1), int(m.group(2))
            if idx > q:
                raise DslNameError(f"coordinate {name!r} exceeds dimension q={q}",
                                   node.line, node.col)
            return ExprInfo("scalar", _ORDER_OF_SLOT[slot], name)
        if name in VECTOR_COORDS:
            return ExprInfo(("vector", q), _ORDER_OF_SLOT[name], name)
        if name in param_names:
            return ExprInfo("scalar", 0, "")
        raise DslNameError(f"unknown identifier {name!r}", node.line, node.col)
    if isinstance(node, Neg):
        return analyze(node.arg, q, param_names)
    if isinstance(node, Vector):
        infos = [analyze(it, q, param_names) for it in node.items]
        for it, info in zip(node.items, infos):
            if info.kind != "scalar":
                raise DslTypeError("vector literals take scalar entries",
                                   node.line, node.col)
        return _merge(ExprInfo(("vector", len(node.items)), 0, ""), infos)
    if isinstance(node, BinOp):
        li = analyze(node.left, q, param_names)
        ri = analyze(node.right, q, param_names)
        if node.op in ("+", "-"):
            if li.kind != ri.kind:
                raise DslTypeError(f"operands of {node.op!r} must have matching kind",
                                   node.line, node.col)
            return _merge(ExprInfo(li.kind, 0, ""), [li, ri])
        if node.op == "*":
            if li.kind == "scalar" and ri.kind == "scalar":
                kind = "scalar"
            elif li.kind == "scalar":
                kind = ri.kind
            elif ri.kind == "scalar":
                kind = li.kind
            else:
                raise DslTypeError("cannot multiply two vectors; use dot or cross",
                                   node.line, node.col)
            return _merge(ExprInfo(kind, 0, ""), [li, ri])
        if node.op == "/":
            if ri.kind != "scalar":
                raise DslTypeError("division by a vector", node.line, node.col)
            return _merge(ExprInfo(li.kind, 0, ""), [li, ri])
        if node.op == "^":
            if li.kind != "scalar" or ri.kind != "scalar":
                raise DslTypeError("'^' takes scalar operands", node.line, node.col)
            if ri.jet_order > 0:
                raise DslTypeError("exponent must not read jet coordinates",
                                   node.line, node.col)
            return _merge(ExprInfo("scalar", 0, ""), [li, ri])
        raise DslSyntaxError(f"unknown operator {node.op!r}", node.line, node.col)
    if isinstance(node, Call):
        if node.name not in FUNCTIONS:
            raise DslNameError(f"unknown function {node.name!r}", node.line, node.col)
        infos = [analyze(a, q, param_names) for a in node.args]
        scalar_fns = ("sqrt", "abs", "sin", "cos", "exp")
        if node.name in scalar_fns:
            _arity(node, 1)
            if infos[0].kind != "scalar":
                raise DslTypeError(f"{node.name} takes a scalar", node.line, node.col)
            return _merge(ExprInfo("scalar", 0, ""), infos)
        if node.name == "dot":
            _arity(node, 2)
            _want_vectors(node, infos)
            if infos[0].kind[1] != infos[1].kind[1]:
                raise DslTypeError("dot of vectors with different lengths",
                                   node.line, node.col)
            return _merge(ExprInfo("scalar", 0, ""), infos)
        if node.name == "cross":
            _arity(node, 2)
            _want_vectors(node, infos)
            if infos[0].kind[1] != 3 or infos[1].kind[1] != 3:
                raise DslTypeError("cross requires 3-vectors", node.line, node.col)
            return _merge(ExprInfo(("vector", 3), 0, ""), infos)
        if node.name == "norm2":
            _arity(node, 1)
            _want_vectors(node, infos)
            return _merge(ExprInfo("scalar", 0, ""), infos)
    raise DslSyntaxError("malformed expression tree", 0, 0)


def _arity(node: Call, n: int):
    if len(node.args) != n:
        raise DslTypeError(f"{node.name} takes {n} argument(s), got {len(node.args)}",
                           node.line, node.col)


def _want_vectors(node: Call, infos):
    for info in infos:
        if not isinstance(info.kind, tuple):
            raise DslTypeError(f"{node.name} takes vector arguments", node.line, node.col)


def _merge(base: ExprInfo, infos) -> ExprInfo:
    order, witness = base.jet_order, base.order_witness
    for info in infos:
        if info.jet_order > order:
            order, witness = info.jet_order, info.order_witness
    return ExprInfo(base.kind, order, witness)


# Evaluation ------------------------------------------------------------

def evaluate(node, env: dict):
    """Evaluate over an environment; entries may be floats or TaylorScalars."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Ident):
        name = node.name
        if name == "t":
            return env["t"]
        m = _SCALAR_COORD_RE.match(name)
        if m:
            return env[m.group(1)][int(m.group(2)) - 1]
        if name in VECTOR_COORDS:
            return list(env[name])
        if name in env:
            return env[name]
        raise DslNameError(f"unknown identifier {name!r}", node.line, node.col)
    if isinstance(node, Neg):
        val = evaluate(node.arg, env)
        return [-c for c in val] if isinstance(val, list) else -val
    if isinstance(node, Vector):
        return [evaluate(it, env) for it in node.items]
    if isinstance(node, BinOp):
        left = evaluate(node.left, env)
        right = evaluate(node.right, env)
        return _binop(node, left, right)
    if isinstance(node, Call):
        args = [evaluate(a, env) for a in node.args]
        return _call(node, args)
    raise DslSyntaxError("malformed expression tree", 0, 0)


def _binop(node, left, right):
    op = node.op
    lv, rv = isinstance(left, list), isinstance(right, list)
    if op == "+":
        if lv and rv:
            return [a + b for a, b in zip(left, right)]
        if not lv and not rv:
            return left + right
    elif op == "-":
        if lv and rv:
            return [a - b for a, b in zip(left, right)]
        if not lv and not rv:
            return left - right
    elif op == "*":
        if lv and not rv:
            return [a * right for a in left]
        if rv and not lv:
            return [left * b for b in right]
        if not lv and not rv:
            return left * right
    elif op == "/":
        if not rv:
            if lv:
                return [div_g(a, right) for a in left]
            return div_g(left, right)
    elif op == "^":
        if not lv and not rv:
            exponent = _constant_exponent(node, right)
            return pow_g(left, exponent)
    raise DslTypeError(f"operands of {op!r} have incompatible kinds",
                       node.line, node.col)


def _constant_exponent(node, value):
    from .taylor import TaylorScalar
    if isinstance(value, TaylorScalar):
        if any(abs(c) > 0.0 for c in value.coeffs[1:]):
            raise DslTypeError("exponent must be a constant expression",
                               node.line, node.col)
        return value.const
    return value


def _call(node, args):
    name = node.name
    if name in ("sqrt", "abs", "sin", "cos", "exp"):
        fn = {"sqrt": sqrt_g, "abs": abs_g, "sin": sin_g,
              "cos": cos_g, "exp": exp_g}[name]
        return fn(args[0])
    if name == "dot":
        a, b = args
        return sum((x * y for x, y in zip(a, b)),
                   start=0.0) if len(a) else 0.0
    if name == "cross":
        a, b = args
        return [a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0]]
    if name == "norm2":
        a = args[0]
        return sum((x * x for x in a), start=0.0)
    raise DslNameError(f"unknown function {name!r}", node.line, node.col)


# Pretty printing -------------------------------------------------------

def pretty(node) -> str:
    """Fully parenthesized form; reparses to an equivalent tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Ident):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.arg)})"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(pretty(a) for a in node.args)})"
    if isinstance(node, Vector):
        return f"[{', '.join(pretty(it) for it in node.items)}]"
    raise DslSyntaxError("malformed expression tree", 0, 0)
