"""Lossless lexer, statement-level parser, and emitter for a Dafny subset.

The parser keeps every input byte: tokens carry their leading trivia
(whitespace and comments), expressions are transported as verbatim source
spans, and anything outside the subset grammar is captured as an opaque
balanced-delimiter span instead of being rejected.  Re-emitting an
untransformed unit reproduces the input exactly.

Offsets throughout are str indices (Unicode code points).
"""

from __future__ import annotations

from dataclasses import dataclass, field


class SubsetError(Exception):
    """Base for lexing/parsing failures; carries the source offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnterminatedString(SubsetError):
    def __init__(self, offset: int):
        super().__init__("unterminated string literal", offset)


class UnterminatedComment(SubsetError):
    def __init__(self, offset: int):
        super().__init__("unterminated block comment", offset)


class UnbalancedDelimiters(SubsetError):
    def __init__(self, offset: int):
        super().__init__("unbalanced delimiters", offset)


class _Backtrack(Exception):
    """Internal: structured parse failed, fall back to an opaque span."""


KEYWORDS = frozenset({
    "method", "function", "predicate", "datatype", "class", "module",
    "import", "ghost", "lemma", "const", "static", "trait", "newtype",
    "type", "abstract", "iterator", "twostate", "constructor",
    "var", "if", "else", "while", "return", "returns", "break",
    "requires", "ensures", "decreases", "modifies", "reads", "invariant",
    "assert", "assume", "expect", "print", "match", "calc", "forall",
})

# Keywords that can begin a top-level declaration; used to delimit opaque
# declarations that have no brace body or trailing semicolon.
DECL_START_KEYWORDS = frozenset({
    "method", "function", "predicate", "datatype", "class", "module",
    "import", "ghost", "lemma", "const", "static", "trait", "newtype",
    "type", "abstract", "iterator", "twostate",
})

CLAUSE_KEYWORDS = frozenset({
    "requires", "ensures", "decreases", "modifies", "reads", "invariant",
})

# Longest match first.
_MULTI_OPS = ["<==>", "==>", "<==", "::", ":=", ":|", "==", "!=", "<=",
              ">=", "&&", "||", "..", "->", "=>"]

_OPENERS = {"(": ")", "[": "]", "{": "}"}
_CLOSERS = {")": "(", "]": "[", "}": "{"}


@dataclass
class Token:
    kind: str       # "ident", "number", "string", keyword text, or operator text
    text: str
    offset: int     # start of text (trivia precedes it)
    trivia: str = ""

    @property
    def end(self) -> int:
        return self.offset + len(self.text)

    @property
    def trivia_start(self) -> int:
        return self.offset - len(self.trivia)


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c in "_'?"


def tokenize(source: str) -> list[Token]:
    """Split source into tokens, ending with an "eof" token.

    Comments and whitespace are preserved as trivia attached to the
    following token, so concatenating trivia+text over the whole stream
    reproduces the input exactly.
    """
    tokens: list[Token] = []
    i = 0
    n = len(source)
    trivia_start = 0
    while True:
        # Consume whitespace and comments into trivia.
        while i < n:
            c = source[i]
            if c.isspace():
                i += 1
            elif source.startswith("//", i):
                nl = source.find("\n", i)
                i = n if nl < 0 else nl + 1
            elif source.startswith("/*", i):
                open_off = i
                depth = 1
                i += 2
                while i < n and depth:
                    if source.startswith("/*", i):
                        depth += 1
                        i += 2
                    elif source.startswith("*/", i):
                        depth -= 1
                        i += 2
                    else:
                        i += 1
                if depth:
                    raise UnterminatedComment(open_off)
            else:
                break
        trivia = source[trivia_start:i]
        if i >= n:
            tokens.append(Token("eof", "", i, trivia))
            return tokens

        c = source[i]
        start = i
        if _is_ident_start(c):
            while i < n and _is_ident_char(source[i]):
                i += 1
            text = source[start:i]
            kind = text if text in KEYWORDS else "ident"
        elif c.isdigit():
            if source.startswith("0x", start):
                i += 2
                while i < n and (source[i] in "_" or source[i] in "0123456789abcdefABCDEF"):
                    i += 1
            else:
                while i < n and (source[i].isdigit() or source[i] == "_"):
                    i += 1
                if i < n - 1 and source[i] == "." and source[i + 1].isdigit():
                    i += 1
                    while i < n and (source[i].isdigit() or source[i] == "_"):
                        i += 1
            text = source[start:i]
            kind = "number"
        elif c == '"':
            i += 1
            while i < n and source[i] != '"':
                i += 2 if source[i] == "\\" else 1
            if i >= n:
                raise UnterminatedString(start)
            i += 1
            text = source[start:i]
            kind = "string"
        elif c == "@" and i + 1 < n and source[i + 1] == '"':
            # Verbatim string: "" escapes a quote.
            i += 2
            while i < n:
                if source[i] == '"':
                    if i + 1 < n and source[i + 1] == '"':
                        i += 2
                        continue
                    i += 1
                    break
                i += 1
            else:
                raise UnterminatedString(start)
            text = source[start:i]
            kind = "string"
        else:
            for op in _MULTI_OPS:
                if source.startswith(op, i):
                    i += len(op)
                    break
            else:
                i += 1
            text = source[start:i]
            kind = text
        tokens.append(Token(kind, text, start, trivia))
        trivia_start = i


@dataclass
class ExprSpan:
    """Verbatim source slice of one (uninterpreted) expression."""
    text: str
    start: int
    end: int


@dataclass
class ClauseSpan:
    kw: str                 # requires / ensures / decreases / modifies / reads / invariant
    kw_offset: int
    expr: ExprSpan
    cut_start: int          # start incl. pure-whitespace leading trivia, for clean removal

    @property
    def end(self) -> int:
        return self.expr.end


@dataclass
class SpecClauses:
    requires: list[ClauseSpan] = field(default_factory=list)
    ensures: list[ClauseSpan] = field(default_factory=list)
    decreases: list[ClauseSpan] = field(default_factory=list)
    frame: list[ClauseSpan] = field(default_factory=list)   # modifies/reads, source order

    def all_clauses(self) -> list[ClauseSpan]:
        out = self.requires + self.ensures + self.decreases + self.frame
        out.sort(key=lambda c: c.kw_offset)
        return out


@dataclass
class Param:
    name: str
    type_text: str


@dataclass
class Block:
    open_offset: int        # offset of '{'
    close_offset: int       # offset of '}'
    stmts: list["Stmt"]


@dataclass
class Stmt:
    start: int              # first token offset
    end: int                # one past last token
    lead_start: int         # start of leading trivia (insertion point)
    kind: str = field(init=False, default="opaque")


@dataclass
class CheckStmt(Stmt):
    """assert / assume / expect with an uninterpreted condition span."""
    kw: str = ""
    expr: ExprSpan | None = None

    def __post_init__(self):
        self.kind = self.kw


@dataclass
class VarDeclStmt(Stmt):
    def __post_init__(self):
        self.kind = "var"


@dataclass
class AssignStmt(Stmt):
    assign_offset: int = 0

    def __post_init__(self):
        self.kind = "assign"


@dataclass
class CallStmt(Stmt):
    def __post_init__(self):
        self.kind = "call"


@dataclass
class IfStmt(Stmt):
    guard: ExprSpan | None = None
    then_block: Block | None = None
    else_part: "IfStmt | Block | None" = None

    def __post_init__(self):
        self.kind = "if"


@dataclass
class WhileStmt(Stmt):
    guard: ExprSpan | None = None
    invariants: list[ClauseSpan] = field(default_factory=list)
    decreases: list[ClauseSpan] = field(default_factory=list)
    frame: list[ClauseSpan] = field(default_factory=list)
    body: Block | None = None

    def __post_init__(self):
        self.kind = "while"


@dataclass
class ReturnStmt(Stmt):
    value: ExprSpan | None = None

    def __post_init__(self):
        self.kind = "return"


@dataclass
class PrintStmt(Stmt):
    args: ExprSpan | None = None

    def __post_init__(self):
        self.kind = "print"


@dataclass
class OpaqueStmt(Stmt):
    def __post_init__(self):
        self.kind = "opaque"


@dataclass
class Decl:
    start: int
    end: int
    kind: str = field(init=False, default="opaque")


@dataclass
class MethodDecl(Decl):
    name: str = ""
    params: list[Param] = field(default_factory=list)
    returns: list[Param] = field(default_factory=list)
    spec: SpecClauses = field(default_factory=SpecClauses)
    body: Block | None = None
    header_end: int = 0     # offset just past the returns clause / params

    def __post_init__(self):
        self.kind = "method"


@dataclass
class FunctionDecl(Decl):
    flavor: str = "function"    # "function" | "function method" | "predicate"
    name: str = ""
    params: list[Param] = field(default_factory=list)
    result_type: str | None = None
    spec: SpecClauses = field(default_factory=SpecClauses)
    body: ExprSpan | None = None
    body_open: int | None = None
    body_close: int | None = None
    header_end: int = 0

    def __post_init__(self):
        self.kind = self.flavor


@dataclass
class DatatypeDecl(Decl):
    name: str = ""
    ctors: list[tuple[str, list[Param]]] = field(default_factory=list)

    def __post_init__(self):
        self.kind = "datatype"


@dataclass
class OpaqueDecl(Decl):
    def __post_init__(self):
        self.kind = "opaque"


@dataclass
class ProgramUnit:
    source: str
    tokens: list[Token]
    decls: list[Decl]

    def find_decl(self, name: str) -> Decl | None:
        for d in self.decls:
            if getattr(d, "name", None) == name:
                return d
        return None

    def decl_source(self, decl: Decl) -> str:
        return self.source[decl.start:decl.end]


def emit(unit: ProgramUnit) -> str:
    """Reproduce the unit's source text from its token stream."""
    return "".join(t.trivia + t.text for t in unit.tokens)


def extract_spec(decl: Decl) -> SpecClauses:
    """Specification clauses of a method- or function-like declaration."""
    spec = getattr(decl, "spec", None)
    if spec is None:
        raise ValueError(f"declaration kind {decl.kind!r} carries no specification")
    return spec


class _Parser:
    def __init__(self, source: str, tokens: list[Token]):
        self.source = source
        self.tokens = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at_eof(self) -> bool:
        return self.peek().kind == "eof"

    def expect(self, kind: str) -> Token:
        if self.peek().kind != kind:
            raise _Backtrack()
        return self.next()

    # -- spans ------------------------------------------------------------

    def _span_from(self, start_i: int) -> ExprSpan | None:
        if start_i >= self.i:
            return None
        first = self.tokens[start_i]
        last = self.tokens[self.i - 1]
        return ExprSpan(self.source[first.offset:last.end], first.offset, last.end)

    def scan_expr(self, terminators: frozenset[str] | set[str]) -> ExprSpan | None:
        """Consume tokens up to a depth-0 terminator (left unconsumed).

        Returns None when zero tokens were consumed.  Stops before any
        closer that would unbalance the enclosing context.
        """
        start_i = self.i
        stack: list[str] = []
        while not self.at_eof():
            t = self.peek()
            if not stack:
                if t.kind in terminators:
                    break
                if t.kind in _CLOSERS:
                    break
            if t.kind in _OPENERS:
                stack.append(t.kind)
            elif t.kind in _CLOSERS:
                if not stack or _CLOSERS[t.kind] != stack[-1]:
                    raise UnbalancedDelimiters(t.offset)
                stack.pop()
            self.next()
        if stack:
            raise UnbalancedDelimiters(self._find_unclosed(start_i))
        return self._span_from(start_i)

    def _find_unclosed(self, start_i: int) -> int:
        stack: list[Token] = []
        for t in self.tokens[start_i:self.i]:
            if t.kind in _OPENERS:
                stack.append(t)
            elif t.kind in _CLOSERS and stack:
                stack.pop()
        return stack[0].offset if stack else self.tokens[start_i].offset

    def scan_type(self, terminators: frozenset[str] | set[str]) -> str:
        """Consume a type span; '<'/'>' nest in type position."""
        start_i = self.i
        stack: list[str] = []
        angle = 0
        while not self.at_eof():
            t = self.peek()
            if not stack and angle == 0:
                if t.kind in terminators:
                    break
                if t.kind in _CLOSERS:
                    break
            if t.kind in _OPENERS:
                stack.append(t.kind)
            elif t.kind in _CLOSERS:
                if not stack or _CLOSERS[t.kind] != stack[-1]:
                    raise _Backtrack()
                stack.pop()
            elif t.kind == "<" and not stack:
                angle += 1
            elif t.kind == ">" and not stack:
                if angle == 0:
                    raise _Backtrack()
                angle -= 1
            self.next()
        if stack or angle:
            raise _Backtrack()
        span = self._span_from(start_i)
        return span.text if span else ""

    # -- declarations ------------------------------------------------------

    def parse_unit(self) -> list[Decl]:
        decls: list[Decl] = []
        while not self.at_eof():
            decls.append(self.parse_decl())
        return decls

    def parse_decl(self) -> Decl:
        start_i = self.i
        kind = self.peek().kind
        try:
            if kind == "method":
                return self.parse_method()
            if kind == "function" and self.peek(1).kind == "method":
                return self.parse_function("function method")
            if kind == "function":
                return self.parse_function("function")
            if kind == "predicate":
                return self.parse_function("predicate")
            if kind == "datatype":
                return self.parse_datatype()
        except _Backtrack:
            self.i = start_i
        return self.parse_opaque_decl()

    def parse_opaque_decl(self) -> Decl:
        start_tok = self.peek()
        stack: list[Token] = []
        consumed = 0
        while True:
            t = self.peek()
            if t.kind == "eof":
                if stack:
                    raise UnbalancedDelimiters(stack[0].offset)
                break
            if not stack:
                if t.kind in _CLOSERS:
                    raise UnbalancedDelimiters(t.offset)
                if t.kind in DECL_START_KEYWORDS and consumed > 0:
                    break
            if t.kind in _OPENERS:
                stack.append(t)
                self.next()
                consumed += 1
                continue
            if t.kind in _CLOSERS:
                if _CLOSERS[t.kind] != stack[-1].kind:
                    raise UnbalancedDelimiters(t.offset)
                stack.pop()
                self.next()
                consumed += 1
                if not stack:
                    if self.peek().kind == ";":
                        self.next()
                        consumed += 1
                    break
                continue
            self.next()
            consumed += 1
            if t.kind == ";" and not stack:
                break
        end = self.tokens[self.i - 1].end if consumed else start_tok.end
        return OpaqueDecl(start_tok.offset, end)

    def parse_params(self) -> list[Param]:
        self.expect("(")
        params: list[Param] = []
        while self.peek().kind != ")":
            if self.peek().kind == "ghost":
                self.next()
            name = self.expect("ident").text
            type_text = ""
            if self.peek().kind == ":":
                self.next()
                type_text = self.scan_type({",", ")"})
            params.append(Param(name, type_text))
            if self.peek().kind == ",":
                self.next()
            elif self.peek().kind != ")":
                raise _Backtrack()
        self.next()
        return params

    def parse_spec_clauses(self, allowed: frozenset[str]) -> SpecClauses:
        spec = SpecClauses()
        terminators = CLAUSE_KEYWORDS | DECL_START_KEYWORDS | {"{", ";", "returns"}
        while self.peek().kind in allowed:
            kw_tok = self.next()
            expr = self.scan_expr(terminators)
            if expr is None:
                raise _Backtrack()
            cut = kw_tok.trivia_start if kw_tok.trivia.strip() == "" else kw_tok.offset
            clause = ClauseSpan(kw_tok.kind, kw_tok.offset, expr, cut)
            if kw_tok.kind == "requires":
                spec.requires.append(clause)
            elif kw_tok.kind == "ensures":
                spec.ensures.append(clause)
            elif kw_tok.kind == "decreases":
                spec.decreases.append(clause)
            else:
                spec.frame.append(clause)
        return spec

    def parse_method(self) -> MethodDecl:
        kw = self.expect("method")
        name = self.expect("ident").text
        params = self.parse_params()
        returns: list[Param] = []
        header_end = self.tokens[self.i - 1].end
        if self.peek().kind == "returns":
            self.next()
            returns = self.parse_params()
            header_end = self.tokens[self.i - 1].end
        spec = self.parse_spec_clauses(
            frozenset({"requires", "ensures", "decreases", "modifies", "reads"}))
        body = None
        if self.peek().kind == "{":
            body = self.parse_block()
        end = self.tokens[self.i - 1].end
        decl = MethodDecl(kw.offset, end)
        decl.name, decl.params, decl.returns = name, params, returns
        decl.spec, decl.body, decl.header_end = spec, body, header_end
        return decl

    def parse_function(self, flavor: str) -> FunctionDecl:
        kw = self.next()
        if flavor == "function method":
            self.expect("method")
        name = self.expect("ident").text
        params = self.parse_params()
        result_type = None
        if flavor != "predicate" and self.peek().kind == ":":
            self.next()
            result_type = self.scan_type(CLAUSE_KEYWORDS | DECL_START_KEYWORDS | {"{"})
            if not result_type:
                raise _Backtrack()
        header_end = self.tokens[self.i - 1].end
        spec = self.parse_spec_clauses(
            frozenset({"requires", "ensures", "decreases", "reads"}))
        body = None
        body_open = body_close = None
        if self.peek().kind == "{":
            open_tok = self.next()
            start_i = self.i
            stack: list[Token] = [open_tok]
            while stack:
                if self.at_eof():
                    raise UnbalancedDelimiters(stack[0].offset)
                t = self.next()
                if t.kind in _OPENERS:
                    stack.append(t)
                elif t.kind in _CLOSERS:
                    if _CLOSERS[t.kind] != stack[-1].kind:
                        raise UnbalancedDelimiters(t.offset)
                    stack.pop()
            close_tok = self.tokens[self.i - 1]
            if self.i - 1 > start_i:
                first = self.tokens[start_i]
                last = self.tokens[self.i - 2]
                body = ExprSpan(self.source[first.offset:last.end], first.offset, last.end)
            body_open, body_close = open_tok.offset, close_tok.offset
        end = self.tokens[self.i - 1].end
        decl = FunctionDecl(kw.offset, end)
        decl.flavor = flavor
        decl.kind = flavor
        decl.name, decl.params, decl.result_type = name, params, result_type
        decl.spec, decl.body, decl.header_end = spec, body, header_end
        decl.body_open, decl.body_close = body_open, body_close
        return decl

    def parse_datatype(self) -> DatatypeDecl:
        kw = self.expect("datatype")
        name = self.expect("ident").text
        if self.peek().kind == "<":
            self.scan_type(frozenset({"="}))
        self.expect("=")
        ctors: list[tuple[str, list[Param]]] = []
        while True:
            ctor = self.expect("ident").text
            ctor_params: list[Param] = []
            if self.peek().kind == "(":
                ctor_params = self.parse_params()
            ctors.append((ctor, ctor_params))
            if self.peek().kind == "|":
                self.next()
            else:
                break
        if self.peek().kind == "{":
            raise _Backtrack()  # datatype member blocks are outside the subset
        end = self.tokens[self.i - 1].end
        decl = DatatypeDecl(kw.offset, end)
        decl.name, decl.ctors = name, ctors
        return decl

    # -- statements ---------------------------------------------------------

    def parse_block(self) -> Block:
        open_tok = self.expect("{")
        stmts: list[Stmt] = []
        while self.peek().kind != "}":
            if self.at_eof():
                raise UnbalancedDelimiters(open_tok.offset)
            stmts.append(self.parse_stmt())
        close_tok = self.next()
        return Block(open_tok.offset, close_tok.offset, stmts)

    def parse_stmt(self) -> Stmt:
        start_i = self.i
        kind = self.peek().kind
        try:
            if kind in ("assert", "assume", "expect"):
                return self.parse_check_stmt()
            if kind == "var":
                return self.parse_simple_stmt(VarDeclStmt)
            if kind == "if":
                return self.parse_if_stmt()
            if kind == "while":
                return self.parse_while_stmt()
            if kind == "return":
                return self.parse_return_stmt()
            if kind == "print":
                return self.parse_print_stmt()
            if kind == "ident":
                return self.parse_assign_or_call()
        except _Backtrack:
            self.i = start_i
        return self.parse_opaque_stmt()

    def _stmt_bounds(self, first: Token) -> tuple[int, int, int]:
        end = self.tokens[self.i - 1].end
        return first.offset, end, first.trivia_start

    def parse_check_stmt(self) -> CheckStmt:
        kw = self.next()
        expr = self.scan_expr({";", "{"})
        if expr is None or self.peek().kind != ";":
            raise _Backtrack()  # assert-by and friends fall back to opaque
        self.next()
        s, e, ls = self._stmt_bounds(kw)
        stmt = CheckStmt(s, e, ls)
        stmt.kw, stmt.expr = kw.kind, expr
        stmt.kind = kw.kind
        return stmt

    def parse_simple_stmt(self, cls) -> Stmt:
        kw = self.next()
        self.scan_expr({";", "{"})
        if self.peek().kind != ";":
            raise _Backtrack()
        self.next()
        s, e, ls = self._stmt_bounds(kw)
        return cls(s, e, ls)

    def parse_if_stmt(self) -> IfStmt:
        kw = self.expect("if")
        guard = self.scan_expr({"{"})
        if guard is None or self.peek().kind != "{":
            raise _Backtrack()
        then_block = self.parse_block()
        else_part: IfStmt | Block | None = None
        if self.peek().kind == "else":
            self.next()
            if self.peek().kind == "if":
                else_part = self.parse_if_stmt()
            elif self.peek().kind == "{":
                else_part = self.parse_block()
            else:
                raise _Backtrack()
        s, e, ls = self._stmt_bounds(kw)
        stmt = IfStmt(s, e, ls)
        stmt.guard, stmt.then_block, stmt.else_part = guard, then_block, else_part
        return stmt

    def parse_while_stmt(self) -> WhileStmt:
        kw = self.expect("while")
        loop_clause_kws = {"invariant", "decreases", "modifies"}
        guard = self.scan_expr({"{"} | loop_clause_kws)
        if guard is None:
            raise _Backtrack()
        invariants: list[ClauseSpan] = []
        decreases: list[ClauseSpan] = []
        frame: list[ClauseSpan] = []
        while self.peek().kind in loop_clause_kws:
            kw_tok = self.next()
            expr = self.scan_expr({"{"} | loop_clause_kws)
            if expr is None:
                raise _Backtrack()
            cut = kw_tok.trivia_start if kw_tok.trivia.strip() == "" else kw_tok.offset
            clause = ClauseSpan(kw_tok.kind, kw_tok.offset, expr, cut)
            {"invariant": invariants, "decreases": decreases,
             "modifies": frame}[kw_tok.kind].append(clause)
        if self.peek().kind != "{":
            raise _Backtrack()
        body = self.parse_block()
        s, e, ls = self._stmt_bounds(kw)
        stmt = WhileStmt(s, e, ls)
        stmt.guard, stmt.body = guard, body
        stmt.invariants, stmt.decreases, stmt.frame = invariants, decreases, frame
        return stmt

    def parse_return_stmt(self) -> ReturnStmt:
        kw = self.expect("return")
        value = None
        if self.peek().kind != ";":
            value = self.scan_expr({";", "{"})
        if self.peek().kind != ";":
            raise _Backtrack()
        self.next()
        s, e, ls = self._stmt_bounds(kw)
        stmt = ReturnStmt(s, e, ls)
        stmt.value = value
        return stmt

    def parse_print_stmt(self) -> PrintStmt:
        kw = self.expect("print")
        args = self.scan_expr({";", "{"})
        if self.peek().kind != ";":
            raise _Backtrack()
        self.next()
        s, e, ls = self._stmt_bounds(kw)
        stmt = PrintStmt(s, e, ls)
        stmt.args = args
        return stmt

    def parse_assign_or_call(self) -> Stmt:
        first = self.peek()
        assign_offset = None
        start_i = self.i
        stack: list[str] = []
        while not self.at_eof():
            t = self.peek()
            if not stack:
                if t.kind == ";":
                    break
                if t.kind == "{":
                    raise _Backtrack()
                if t.kind in _CLOSERS:
                    raise _Backtrack()
                if t.kind == ":=" and assign_offset is None:
                    assign_offset = t.offset
            if t.kind in _OPENERS:
                stack.append(t.kind)
            elif t.kind in _CLOSERS:
                if not stack or _CLOSERS[t.kind] != stack[-1]:
                    raise UnbalancedDelimiters(t.offset)
                stack.pop()
            self.next()
        if self.peek().kind != ";":
            raise _Backtrack()
        self.next()
        s, e, ls = self._stmt_bounds(first)
        if assign_offset is not None:
            stmt = AssignStmt(s, e, ls)
            stmt.assign_offset = assign_offset
            return stmt
        return CallStmt(s, e, ls)

    def parse_opaque_stmt(self) -> OpaqueStmt:
        first = self.peek()
        stack: list[Token] = []
        consumed = 0
        closed_group = False
        while True:
            t = self.peek()
            if t.kind == "eof":
                if stack:
                    raise UnbalancedDelimiters(stack[0].offset)
                break
            if not stack:
                if closed_group:
                    break
                if t.kind in _CLOSERS:
                    if consumed == 0:
                        # Stray closer in statement position: unbalanced.
                        raise UnbalancedDelimiters(t.offset)
                    break
            if t.kind in _OPENERS:
                stack.append(t)
                self.next()
                consumed += 1
                continue
            if t.kind in _CLOSERS:
                if _CLOSERS[t.kind] != stack[-1].kind:
                    raise UnbalancedDelimiters(t.offset)
                stack.pop()
                self.next()
                consumed += 1
                if not stack:
                    if self.peek().kind == ";":
                        self.next()
                        consumed += 1
                        break
                    closed_group = True
                continue
            self.next()
            consumed += 1
            if t.kind == ";" and not stack:
                break
        end = self.tokens[self.i - 1].end if consumed else first.end
        return OpaqueStmt(first.offset, end, first.trivia_start)


def parse_unit(source: str) -> ProgramUnit:
    """Parse a compilation unit; unknown constructs become opaque spans."""
    tokens = tokenize(source)
    parser = _Parser(source, tokens)
    decls = parser.parse_unit()
    return ProgramUnit(source, tokens, decls)


def walk_stmts(block: Block):
    """Yield every statement in a block, depth-first, nested bodies included."""
    for stmt in block.stmts:
        yield stmt
        yield from _walk_children(stmt)


def _walk_children(stmt: Stmt):
    if isinstance(stmt, IfStmt):
        if stmt.then_block:
            yield from walk_stmts(stmt.then_block)
        if isinstance(stmt.else_part, Block):
            yield from walk_stmts(stmt.else_part)
        elif isinstance(stmt.else_part, IfStmt):
            yield stmt.else_part
            yield from _walk_children(stmt.else_part)
    elif isinstance(stmt, WhileStmt) and stmt.body:
        yield from walk_stmts(stmt.body)
