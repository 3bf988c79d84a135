"""Surface syntax for programs (.dl), fact files (.facts) and deltas (.delta).

Grammar::

    program   := rule*
    rule      := atom [":-" literal ("," literal)*] "."
    literal   := atom | "not" atom | VAR "=" expr
    expr      := term (("+" | "-") term)*
    term      := factor ("*" factor)*
    factor    := INT | VAR | "(" expr ")" | "-" factor
    atom      := IDENT "(" [arg ("," arg)*] ")"
    arg       := VAR | SYMBOL | ["-"] INT | STRING

    facts     := (atom ".")*                 -- ground atoms only
    delta     := (("+" | "-") atom ".")*     -- ground atoms only

Variables start with an uppercase letter or ``_``; symbols with a lowercase
letter. An identifier directly followed by ``(`` is a predicate name, so
predicates may be capitalised. ``%`` starts a comment running to the end
of the line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DatalogError, GroundnessError, ParseError
from .model import INT64_MAX, INT64_MIN, Atom, BinOp, Builtin, Program, Rule, Var, fact_sort_key, render_fact

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<implies>:-)
  | (?P<punct>[(),.=+\-*])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text, source=None):
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, source)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(_Tok("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text, source=None):
        self.source = source
        self.toks = _tokenize(text, source)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, message, tok=None):
        tok = tok or self.tok
        found = tok.text if tok.kind != "eof" else "end of input"
        return ParseError(f"{message}, found {found!r}", tok.line, tok.col, self.source)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind in ("string",):
            raise self.error(f"expected {text!r}")
        self.i += 1

    def at(self, text):
        return self.tok.text == text and self.tok.kind in ("punct", "implies", "ident")

    def at_eof(self):
        return self.tok.kind == "eof"

    # -- atoms and terms --------------------------------------------------

    def atom(self):
        tok = self.tok
        if tok.kind != "ident" or self.peek().text != "(":
            raise self.error("expected an atom")
        self.i += 2
        args = []
        if not self.at(")"):
            args.append(self.arg())
            while self.at(","):
                self.i += 1
                args.append(self.arg())
        self.expect(")")
        return Atom(tok.text, tuple(args)), tok

    def arg(self):
        tok = self.tok
        if tok.kind == "ident":
            self.i += 1
            if tok.text[0].isupper() or tok.text[0] == "_":
                return Var(tok.text)
            return tok.text
        if tok.kind == "int":
            self.i += 1
            return self.integer(int(tok.text), tok)
        if tok.text == "-" and self.peek().kind == "int":
            self.i += 2
            return self.integer(-int(self.toks[self.i - 1].text), tok)
        if tok.kind == "string":
            self.i += 1
            return tok.text
        raise self.error("expected a term")

    def integer(self, value, tok):
        if value < INT64_MIN or value > INT64_MAX:
            raise ParseError(f"integer {value} outside the 64-bit range", tok.line, tok.col, self.source)
        return value

    def expr(self):
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at("*"):
            self.i += 1
            node = BinOp("*", node, self.factor())
        return node

    def factor(self):
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return self.integer(int(tok.text), tok)
        if tok.kind == "ident" and (tok.text[0].isupper() or tok.text[0] == "_"):
            self.i += 1
            return Var(tok.text)
        if self.at("("):
            self.i += 1
            node = self.expr()
            self.expect(")")
            return node
        if self.at("-"):
            if self.peek().kind == "int":
                self.i += 2
                return self.integer(-int(self.toks[self.i - 1].text), tok)
            self.i += 1
            inner = self.factor()
            return -inner if type(inner) is int else BinOp("-", 0, inner)
        raise self.error("expected an integer expression")

    # -- statements -------------------------------------------------------

    def rule(self):
        head, tok = self.atom()
        pos, neg, builtins = [], [], []
        if self.at(":-"):
            self.i += 1
            while True:
                self.literal(pos, neg, builtins)
                if self.at(","):
                    self.i += 1
                    continue
                break
        self.expect(".")
        return Rule(head, tuple(pos), tuple(neg), tuple(builtins), line=tok.line)

    def literal(self, pos, neg, builtins):
        tok = self.tok
        if tok.kind == "ident" and tok.text == "not" and self.peek().kind == "ident":
            self.i += 1
            neg.append(self.atom()[0])
        elif tok.kind == "ident" and self.peek().text == "=":
            if not (tok.text[0].isupper() or tok.text[0] == "_"):
                raise self.error("built-in target must be a variable")
            self.i += 2
            builtins.append(Builtin(Var(tok.text), self.expr()))
        else:
            pos.append(self.atom()[0])

    def ground_atom(self):
        atom, tok = self.atom()
        if not atom.is_ground():
            var = next(atom.variables())
            raise GroundnessError(f"variable {var} in fact {atom}", tok.line, tok.col, self.source)
        return (atom.pred, *atom.args)


def parse_rules(text, source=None) -> list:
    p = _Parser(text, source)
    rules = []
    while not p.at_eof():
        rules.append(p.rule())
    return rules


def parse_program(text, source=None) -> Program:
    """Parse, then check arities, safety and stratifiability."""
    rules = parse_rules(text, source)
    try:
        return Program(rules)
    except DatalogError as exc:
        # keep the rule's source line on the error where we can tell it
        rule = getattr(exc, "rule", None)
        if rule is not None:
            for r in rules:
                if str(r) == rule and r.line is not None:
                    exc.line = r.line
                    break
        raise


def parse_facts(text, source=None) -> dict:
    """Return the ground facts of ``text`` as an insertion-ordered set
    (a dict with ``None`` values); duplicates collapse."""
    p = _Parser(text, source)
    facts = {}
    while not p.at_eof():
        fact = p.ground_atom()
        p.expect(".")
        facts[fact] = None
    return facts


@dataclass
class Delta:
    deletions: dict = field(default_factory=dict)
    insertions: dict = field(default_factory=dict)

    def __post_init__(self):
        self.deletions = dict.fromkeys(self.deletions)
        self.insertions = dict.fromkeys(self.insertions)

    def __eq__(self, other):
        return (
            isinstance(other, Delta)
            and set(self.deletions) == set(other.deletions)
            and set(self.insertions) == set(other.insertions)
        )

    def __bool__(self):
        return bool(self.deletions or self.insertions)


def parse_delta(text, source=None) -> Delta:
    p = _Parser(text, source)
    delta = Delta()
    while not p.at_eof():
        if p.at("-"):
            target = delta.deletions
        elif p.at("+"):
            target = delta.insertions
        else:
            raise p.error("expected '+' or '-'")
        p.i += 1
        fact = p.ground_atom()
        p.expect(".")
        target[fact] = None
    return delta


def render_facts(facts) -> str:
    return "".join(f"{render_fact(f)}.\n" for f in sorted(facts, key=fact_sort_key))


def render_delta(delta: Delta) -> str:
    out = [f"- {render_fact(f)}.\n" for f in delta.deletions]
    out += [f"+ {render_fact(f)}.\n" for f in delta.insertions]
    return "".join(out)


def render_program(program) -> str:
    rules = program.rules if hasattr(program, "rules") else program
    return "".join(f"{r}\n" for r in rules)
