"""Parser and canonical printer for TIR text.

Whitespace is insignificant: an instruction ends when its operand list
stops continuing with commas, so a whole program may sit on one line.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional, Union

from .model import (
    BIN_OPS,
    OPCODES,
    BodyItem,
    ClassDef,
    FieldRef,
    Instr,
    InstrumentedProgram,
    InstrumentSet,
    Label,
    MethodDef,
    MethodSig,
    Program,
    ReflectionTable,
    SignatureError,
    TableEntry,
    TypeDesc,
    parse_sig,
    parse_type,
    sig_sort_key,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<sig><[^<>\n]*>)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<kw>reflection-table|instrument-set)
  | (?P<arrow>->)
  | (?P<int>-?\d+)
  | (?P<name>[A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*(?:\[\])*)
  | (?P<punct>[{}(),:\[\]|-])
    """,
    re.VERBOSE,
)
_REG_RE = re.compile(r"^r(\d+)$")


@dataclass
class Token:
    kind: str
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, pos - line_start + 1))  # type: ignore[arg-type]
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rfind("\n") + 1
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers -------------------------------------------------
    def peek(self, offset: int = 0) -> Optional[Token]:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.peek() or (self.tokens[-1] if self.tokens else None)
        if tok is None:
            return ParseError(message)
        return ParseError(message, tok.line, tok.col)

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of input")
        self.pos += 1
        return tok

    def at(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.value == value and tok.kind in ("punct", "name", "arrow", "kw")

    def expect(self, value: str) -> Token:
        tok = self.next()
        if tok.value != value:
            raise self.error(f"expected {value!r}, found {tok.value!r}", tok)
        return tok

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.next()
        if tok.kind != kind:
            raise self.error(f"expected {what}, found {tok.value!r}", tok)
        return tok

    def sig(self) -> MethodSig:
        tok = self.expect_kind("sig", "method signature")
        try:
            return parse_sig(tok.value)
        except SignatureError as exc:
            raise self.error(str(exc), tok) from None

    def type_desc(self) -> TypeDesc:
        tok = self.expect_kind("name", "type")
        try:
            return parse_type(tok.value)
        except SignatureError as exc:
            raise self.error(str(exc), tok) from None

    def reg(self) -> int:
        tok = self.next()
        m = _REG_RE.match(tok.value) if tok.kind == "name" else None
        if not m:
            raise self.error(f"expected register, found {tok.value!r}", tok)
        return int(m.group(1))

    def dest(self) -> Optional[int]:
        if self.at("_"):
            self.next()
            return None
        return self.reg()

    def is_reg_next(self) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "name" and bool(_REG_RE.match(tok.value))

    def comma(self) -> None:
        self.expect(",")

    def more(self) -> bool:
        if self.at(","):
            self.next()
            return True
        return False

    # -- grammar -------------------------------------------------------
    def artifact(self) -> tuple[Program, Optional[ReflectionTable], Optional[list[MethodSig]]]:
        classes: list[ClassDef] = []
        seen: set[str] = set()
        entry: Optional[MethodSig] = None
        table: Optional[ReflectionTable] = None
        iset: Optional[list[MethodSig]] = None
        while self.peek() is not None:
            tok = self.next()
            if tok.value == "entry":
                if entry is not None:
                    raise self.error("duplicate entry declaration", tok)
                entry = self.sig()
            elif tok.value == "class":
                cls = self.class_def()
                if cls.name in seen:
                    raise self.error(f"duplicate class {cls.name}", tok)
                seen.add(cls.name)
                classes.append(cls)
            elif tok.value == "reflection-table":
                table = self.table()
            elif tok.value == "instrument-set":
                iset = self.sig_block()
            else:
                raise self.error(f"unexpected {tok.value!r} at top level", tok)
        return Program(tuple(classes), entry), table, iset

    def class_def(self) -> ClassDef:
        name = self.expect_kind("name", "class name").value
        superclass = None
        if self.at("extends"):
            self.next()
            superclass = self.expect_kind("name", "superclass name").value
        self.expect("{")
        fields: list[tuple[str, TypeDesc]] = []
        methods: list[MethodDef] = []
        method_keys: set[tuple] = set()
        while not self.at("}"):
            tok = self.next()
            if tok.value == "field":
                fname_tok = self.expect_kind("name", "field name")
                self.expect(":")
                ftype = self.type_desc()
                if any(f == fname_tok.value for f, _ in fields):
                    raise self.error(f"duplicate field {name}.{fname_tok.value}", fname_tok)
                fields.append((fname_tok.value, ftype))
            elif tok.value in ("method", "static"):
                static = tok.value == "static"
                if static:
                    self.expect("method")
                sig_tok = self.peek()
                method = self.method_def(static)
                if method.sig.owner != name:
                    raise self.error(f"method {method.sig} declared in class {name}", sig_tok)
                key = (method.sig.name, method.sig.params)
                if key in method_keys:
                    raise self.error(f"duplicate method {method.sig}", sig_tok)
                method_keys.add(key)
                methods.append(method)
            else:
                raise self.error(f"unexpected {tok.value!r} in class body", tok)
        self.expect("}")
        return ClassDef(name, superclass, tuple(fields), tuple(methods))

    def method_def(self, static: bool) -> MethodDef:
        sig = self.sig()
        num_regs: Optional[int] = None
        if self.at("regs"):
            self.next()
            num_regs = int(self.expect_kind("int", "register count").value)
        self.expect("{")
        body: list[BodyItem] = []
        while not self.at("}"):
            tok = self.peek()
            nxt = self.peek(1)
            if tok.kind == "name" and nxt is not None and nxt.value == ":" and nxt.kind == "punct":
                if _REG_RE.match(tok.value) or tok.value in OPCODES:
                    raise self.error(f"invalid label name {tok.value!r}", tok)
                self.pos += 2
                body.append(Label(tok.value))
                continue
            body.append(self.instr())
        self.expect("}")
        if num_regs is None:
            used = [r for item in body if isinstance(item, Instr) for r in item.registers()]
            slots = len(sig.params) + (0 if static else 1)
            num_regs = max([slots] + [r + 1 for r in used])
        return MethodDef(sig, num_regs, tuple(body), static)

    def instr(self) -> Instr:
        tok = self.next()
        op = tok.value
        if tok.kind != "name" or op not in OPCODES:
            raise self.error(f"unknown opcode {op!r}", tok)
        if op == "const":
            dst = self.reg()
            self.comma()
            return Instr(op, dst=dst, imm=int(self.expect_kind("int", "integer").value))
        if op == "sconst":
            dst = self.reg()
            self.comma()
            return Instr(op, dst=dst, text=json.loads(self.expect_kind("str", "string").value))
        if op == "move":
            dst = self.reg()
            self.comma()
            return Instr(op, dst=dst, srcs=(self.reg(),))
        if op == "bin":
            sub = self.expect_kind("name", "bin operator")
            if sub.value not in BIN_OPS:
                raise self.error(f"unknown bin operator {sub.value!r}", sub)
            self.comma()
            dst = self.reg()
            self.comma()
            a = self.reg()
            self.comma()
            return Instr(op, dst=dst, srcs=(a, self.reg()), binop=sub.value)
        if op == "new":
            dst = self.reg()
            self.comma()
            return Instr(op, dst=dst, cls=self.expect_kind("name", "class name").value)
        if op == "newarr":
            dst = self.reg()
            self.comma()
            t = self.type_desc()
            self.comma()
            return Instr(op, dst=dst, type=t, srcs=(self.reg(),))
        if op == "aload":
            dst = self.reg()
            self.comma()
            arr = self.reg()
            self.comma()
            return Instr(op, dst=dst, srcs=(arr, self.reg()))
        if op == "astore":
            arr = self.reg()
            self.comma()
            idx = self.reg()
            self.comma()
            return Instr(op, srcs=(arr, idx, self.reg()))
        if op == "get":
            dst = self.reg()
            self.comma()
            obj = self.reg()
            self.comma()
            return Instr(op, dst=dst, srcs=(obj,), fref=self.field_ref())
        if op == "put":
            obj = self.reg()
            self.comma()
            fref = self.field_ref()
            self.comma()
            return Instr(op, srcs=(obj, self.reg()), fref=fref)
        if op in ("scall", "vcall"):
            dst = self.dest()
            self.comma()
            sig = self.sig()
            args = []
            while self.more():
                args.append(self.reg())
            return Instr(op, dst=dst, sig=sig, srcs=tuple(args))
        if op == "dyncall":
            dst = self.dest()
            self.comma()
            args = [self.reg()]
            shadows = None
            while self.more():
                if self.at("["):
                    shadows = self.shadow_list()
                    break
                args.append(self.reg())
            if len(args) < 2:
                raise self.error("dyncall needs a name register and a receiver", tok)
            return Instr(op, dst=dst, srcs=tuple(args), shadows=shadows)
        if op == "ret":
            if self.is_reg_next():
                return Instr(op, srcs=(self.reg(),))
            return Instr(op)
        if op == "jmp":
            return Instr(op, target=self.expect_kind("name", "label").value)
        # br
        cond = self.reg()
        self.comma()
        return Instr(op, srcs=(cond,), target=self.expect_kind("name", "label").value)

    def shadow_list(self) -> tuple[Optional[int], ...]:
        self.expect("[")
        regs = [self.dest()]
        while self.more():
            regs.append(self.reg())
        self.expect("]")
        return tuple(regs)

    def field_ref(self) -> FieldRef:
        tok = self.expect_kind("name", "field reference")
        cls, dot, name = tok.value.rpartition(".")
        if not dot or not cls or "[" in name:
            raise self.error(f"malformed field reference {tok.value!r}", tok)
        return FieldRef(cls, name)

    def table(self) -> ReflectionTable:
        self.expect("{")
        entries = []
        while not self.at("}"):
            self.expect("(")
            cls = self.expect_kind("name", "class name").value
            self.comma()
            name = self.expect_kind("name", "method name").value
            self.comma()
            arity = int(self.expect_kind("int", "arity").value)
            self.expect(")")
            self.expect_kind("arrow", "'->'")
            original = self.sig()
            self.expect("|")
            mangled = None
            if self.at("-"):
                self.next()
            else:
                mangled = self.sig()
            entries.append(TableEntry(cls, name, arity, original, mangled))
        self.expect("}")
        return ReflectionTable(tuple(entries))

    def sig_block(self) -> list[MethodSig]:
        self.expect("{")
        sigs = []
        while not self.at("}"):
            sigs.append(self.sig())
        self.expect("}")
        return sigs


def parse_artifact(text: str) -> Union[Program, InstrumentedProgram]:
    """Parse TIR text; returns an InstrumentedProgram when sections are embedded."""
    program, table, iset = _Parser(text).artifact()
    if table is None and iset is None:
        return program
    return InstrumentedProgram(
        program,
        table or ReflectionTable(),
        InstrumentSet(frozenset(iset or ())),
    )


def parse_program(text: str) -> Program:
    program, table, iset = _Parser(text).artifact()
    if table is not None or iset is not None:
        raise ParseError("text carries instrumentation sections; use parse_artifact")
    return program


# -- printing ----------------------------------------------------------

def _r(reg: Optional[int]) -> str:
    return "_" if reg is None else f"r{reg}"


def emit_instr(ins: Instr) -> str:
    op = ins.op
    if op == "const":
        ops = [_r(ins.dst), str(ins.imm)]
    elif op == "sconst":
        ops = [_r(ins.dst), json.dumps(ins.text)]
    elif op == "move":
        ops = [_r(ins.dst), _r(ins.srcs[0])]
    elif op == "bin":
        ops = [ins.binop, _r(ins.dst), _r(ins.srcs[0]), _r(ins.srcs[1])]  # type: ignore[list-item]
    elif op == "new":
        ops = [_r(ins.dst), ins.cls]  # type: ignore[list-item]
    elif op == "newarr":
        ops = [_r(ins.dst), str(ins.type), _r(ins.srcs[0])]
    elif op == "aload":
        ops = [_r(ins.dst), _r(ins.srcs[0]), _r(ins.srcs[1])]
    elif op == "astore":
        ops = [_r(r) for r in ins.srcs]
    elif op == "get":
        ops = [_r(ins.dst), _r(ins.srcs[0]), str(ins.fref)]
    elif op == "put":
        ops = [_r(ins.srcs[0]), str(ins.fref), _r(ins.srcs[1])]
    elif op in ("scall", "vcall"):
        ops = [_r(ins.dst), str(ins.sig)] + [_r(r) for r in ins.srcs]
    elif op == "dyncall":
        ops = [_r(ins.dst)] + [_r(r) for r in ins.srcs]
        if ins.shadows is not None:
            ops.append("[" + ", ".join(_r(r) for r in ins.shadows) + "]")
    elif op == "ret":
        ops = [_r(r) for r in ins.srcs]
    elif op == "jmp":
        ops = [ins.target]  # type: ignore[list-item]
    elif op == "br":
        ops = [_r(ins.srcs[0]), ins.target]  # type: ignore[list-item]
    else:
        raise ValueError(f"unknown opcode {op!r}")
    return f"{op} {', '.join(ops)}" if ops else op


def _emit_class(cls: ClassDef) -> list[str]:
    head = f"class {cls.name}"
    if cls.superclass:
        head += f" extends {cls.superclass}"
    lines = [head + " {"]
    for fname, ftype in cls.fields:
        lines.append(f"  field {fname} : {ftype}")
    for m in cls.methods:
        prefix = "static method" if m.static else "method"
        lines.append(f"  {prefix} {m.sig} regs {m.num_regs} {{")
        for item in m.body:
            if isinstance(item, Label):
                lines.append(f"  {item.name}:")
            else:
                lines.append(f"    {emit_instr(item)}")
        lines.append("  }")
    lines.append("}")
    return lines


def emit_program(program: Program) -> str:
    lines: list[str] = []
    if program.entry is not None:
        lines += [f"entry {program.entry}", ""]
    for cls in program.classes:
        lines += _emit_class(cls) + [""]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines) + "\n" if lines else ""


def emit_artifact(artifact: Union[Program, InstrumentedProgram]) -> str:
    if isinstance(artifact, Program):
        return emit_program(artifact)
    text = emit_program(artifact.program)
    lines = ["reflection-table {"]
    for e in sorted(artifact.table.entries, key=lambda e: e.key):
        mangled = "-" if e.mangled is None else str(e.mangled)
        lines.append(f"  ({e.cls},{e.name},{e.arity}) -> {e.original} | {mangled}")
    lines += ["}", "", "instrument-set {"]
    lines += [f"  {s}" for s in sorted(artifact.instrument_set.methods, key=sig_sort_key)]
    lines.append("}")
    sections = "\n".join(lines) + "\n"
    return f"{text}\n{sections}" if text else sections
