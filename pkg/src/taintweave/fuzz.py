"""Random well-typed TIR programs for property tests.

Methods are grouped into units (a static method, or a virtual family with
its overrides). A unit only calls units generated before it, so every run
terminates. Branches only jump forward.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .tir import Program, parse_program

WRITE = "<stdlib.Out: void write(int)>"
PRINT = "<stdlib.Out: void print(int)>"
EXEC = "<stdlib.Sys: void exec(int)>"
READ = "<stdlib.In: int read()>"
READ_BUF = "<stdlib.In: int readBuf(int[])>"
MAP = "<stdlib.Hof: int map(stdlib.Fn,int)>"


@dataclass
class _Unit:
    kind: str  # static | virtual | callback
    sig: str
    owner: str
    name: str
    ret: Optional[str]
    params: tuple[str, ...]
    overrides: list[str] = field(default_factory=list)


@dataclass
class _Body:
    lines: list[str]
    base: int
    labels: int = 0

    # registers after the params
    def r(self, k: int) -> str:
        return f"r{self.base + k}"


INT_REGS = 4
ARR, OBJ, NAME, IDX, FN, GRID, ROW = 4, 5, 6, 7, 8, 9, 10


class _Gen:
    def __init__(self, rng: random.Random, multidim: bool):
        self.rng = rng
        self.multidim = multidim
        self.units: list[_Unit] = []
        n_classes = rng.randint(1, 4)
        self.classes = [f"C{i}" for i in range(n_classes)]
        self.parent: dict[str, Optional[str]] = {}
        for i, c in enumerate(self.classes):
            self.parent[c] = self.classes[rng.randrange(i)] if i and rng.random() < 0.6 else None
        self.fns = [f"F{i}" for i in range(rng.randint(0, 2))]

    def subclasses(self, c: str) -> list[str]:
        out = []
        for d in self.classes:
            x: Optional[str] = d
            while x is not None:
                if x == c:
                    out.append(d)
                    break
                x = self.parent[x]
        return out

    def root(self, c: str) -> str:
        while self.parent[c] is not None:
            c = self.parent[c]  # type: ignore[assignment]
        return c

    # -- units ----------------------------------------------------------------

    def plan(self, n_units: int) -> None:
        for f in self.fns:
            self.units.append(_Unit("callback", f"<{f}: int apply(int)>", f, "apply", "int", ("int",)))
        menu = [
            ("int", ("int",)), ("int", ("int", "int")), ("void", ("int",)),
            ("bool", ("int",)), ("int", ("int[]", "int")), ("int[]", ("int[]",)),
            ("void", ()), ("int", ()), ("void", ("OBJ",)),
        ]
        if self.multidim:
            menu.append(("int", ("int[][]",)))
        for i in range(n_units):
            if self.rng.random() < 0.3:
                decl = self.rng.choice(self.classes)
                ret = self.rng.choice(["int", "void"])
                sig = f"<{decl}: {ret} v{i}(int)>"
                u = _Unit("virtual", sig, decl, f"v{i}", ret, ("int",))
                for sub in self.subclasses(decl):
                    if sub != decl and self.rng.random() < 0.6:
                        u.overrides.append(sub)
                self.units.append(u)
            else:
                owner = f"S{self.rng.randrange(3)}"
                ret, params = self.rng.choice(menu)
                params = tuple(self.rng.choice(self.classes) if p == "OBJ" else p for p in params)
                sig = f"<{owner}: {ret} s{i}({','.join(params)})>"
                self.units.append(_Unit("static", sig, owner, f"s{i}", ret, params))

    # -- bodies ---------------------------------------------------------------

    def body(self, idx: int, owner: str, ret: Optional[str], params: tuple[str, ...], static: bool) -> list[str]:
        rng = self.rng
        slots = len(params) + (0 if static else 1)
        b = _Body([], slots)
        lines = b.lines
        obj_cls = rng.choice(self.classes)
        new_cls = rng.choice(self.subclasses(obj_cls))
        for k in range(INT_REGS):
            lines.append(f"const {b.r(k)}, {rng.randint(-3, 9)}")
        lines.append(f"const {b.r(IDX)}, 4")
        lines.append(f"newarr {b.r(ARR)}, int[], {b.r(IDX)}")
        lines.append(f"new {b.r(OBJ)}, {new_cls}")
        lines.append(f"newarr {b.r(ROW)}, int[], {b.r(IDX)}")
        lines.append(f"put {b.r(OBJ)}, {self.root(obj_cls)}.buf, {b.r(ROW)}")
        # seed int registers from int params
        int_params = [i + (0 if static else 1) for i, p in enumerate(params) if p in ("int", "bool")]
        for k, pr in enumerate(int_params[:INT_REGS]):
            lines.append(f"move {b.r(k)}, r{pr}")
        arr_params = [i + (0 if static else 1) for i, p in enumerate(params) if p == "int[]"]
        if arr_params:
            lines.append(f"move {b.r(ARR)}, r{arr_params[0]}")
        grid_params = [i + (0 if static else 1) for i, p in enumerate(params) if p == "int[][]"]
        has_grid = bool(grid_params)
        if has_grid:
            lines.append(f"move {b.r(GRID)}, r{grid_params[0]}")
        if self.multidim and not has_grid and rng.random() < 0.2:
            lines.append(f"newarr {b.r(GRID)}, int[][], {b.r(IDX)}")
            has_grid = True
        obj_params = [(i + (0 if static else 1), p) for i, p in enumerate(params) if p in self.classes]

        pending: list[str] = []
        calls = 0
        for _ in range(rng.randint(3, 14)):
            choice = rng.random()
            ir = lambda: b.r(rng.randrange(INT_REGS))
            if choice < 0.25:
                op = rng.choice(["add", "sub", "mul", "or", "and", "xor", "lt", "eq"])
                lines.append(f"bin {op}, {ir()}, {ir()}, {ir()}")
            elif choice < 0.32:
                lines.append(f"const {ir()}, {rng.randint(-5, 20)}")
            elif choice < 0.40:
                lines.append(f"const {b.r(IDX)}, {rng.randrange(4)}")
                if rng.random() < 0.5:
                    lines.append(f"aload {ir()}, {b.r(ARR)}, {b.r(IDX)}")
                else:
                    lines.append(f"astore {b.r(ARR)}, {b.r(IDX)}, {ir()}")
            elif choice < 0.48:
                root = self.root(obj_cls)
                r = rng.random()
                if r < 0.4:
                    lines.append(f"get {ir()}, {b.r(OBJ)}, {root}.v")
                elif r < 0.8:
                    lines.append(f"put {b.r(OBJ)}, {root}.v, {ir()}")
                else:
                    lines.append(f"get {b.r(ROW)}, {b.r(OBJ)}, {root}.buf")
                    lines.append(f"const {b.r(IDX)}, {rng.randrange(4)}")
                    lines.append(f"astore {b.r(ROW)}, {b.r(IDX)}, {ir()}")
            elif choice < 0.56:
                lines.append(f"scall {ir()}, {READ}")
            elif choice < 0.60:
                lines.append(f"scall {ir()}, {READ_BUF}, {b.r(ARR)}")
            elif choice < 0.70:
                lines.append(f"scall _, {rng.choice([WRITE, PRINT, PRINT, EXEC])}, {ir()}")
            elif choice < 0.74 and obj_params:
                pr, cls = rng.choice(obj_params)
                root = self.root(cls)
                lines.append(f"get {ir()}, r{pr}, {root}.v")
            elif choice < 0.80 and has_grid:
                lines.append(f"const {b.r(IDX)}, {rng.randrange(4)}")
                lines.append(f"newarr {b.r(ROW)}, int[], {b.r(IDX)}")
                lines.append(f"const {b.r(IDX)}, {rng.randrange(4)}")
                lines.append(f"astore {b.r(GRID)}, {b.r(IDX)}, {b.r(ROW)}")
            elif choice < 0.85:
                label = f"L{b.labels}"
                b.labels += 1
                lines.append(f"br {ir()}, {label}")
                pending.append(label)
            elif calls < 2:
                call = self.call(idx, b, obj_cls, has_grid)
                if call:
                    lines.extend(call)
                    calls += 1
            if pending and rng.random() < 0.4:
                lines.append(f"{pending.pop()}:")
        for label in pending:
            lines.append(f"{label}:")
        if ret is None or ret == "void":
            lines.append("ret")
        elif ret == "int[]":
            lines.append(f"ret {b.r(ARR)}")
        else:
            lines.append(f"ret {b.r(rng.randrange(INT_REGS))}")
        return lines

    def call(self, idx: int, b: _Body, obj_cls: str, has_grid: bool) -> list[str]:
        rng = self.rng
        options = [u for u in self.units[:idx] if u.kind != "callback"]
        fns = [u for u in self.units[:idx] if u.kind == "callback"]
        if fns and rng.random() < 0.25:
            u = rng.choice(fns)
            return [f"new {b.r(FN)}, {u.owner}",
                    f"scall {b.r(rng.randrange(INT_REGS))}, {MAP}, {b.r(FN)}, {b.r(rng.randrange(INT_REGS))}"]
        if not options:
            return []
        u = rng.choice(options)
        ir = lambda: b.r(rng.randrange(INT_REGS))
        if u.ret in ("int", "bool"):
            dst = ir()
        elif u.ret == "int[]":
            dst = b.r(ARR)
        else:
            dst = "_"
        if u.kind == "virtual":
            if u.owner not in self.subclasses(obj_cls) and obj_cls not in self.subclasses(u.owner):
                return []
            if obj_cls not in self.subclasses(u.owner):
                return []
            if rng.random() < 0.3 and u.ret == "int":
                return [f'sconst {b.r(NAME)}, "{u.name}"', f"dyncall {dst}, {b.r(NAME)}, {b.r(OBJ)}, {ir()}"]
            return [f"vcall {dst}, {u.sig}, {b.r(OBJ)}, {ir()}"]
        args = []
        for p in u.params:
            if p in ("int", "bool"):
                args.append(ir())
            elif p == "int[]":
                args.append(b.r(ARR))
            elif p == "int[][]":
                if not has_grid:
                    return []
                args.append(b.r(GRID))
            else:
                if p not in self.subclasses(obj_cls) and obj_cls not in self.subclasses(p):
                    return []
                if obj_cls not in self.subclasses(p):
                    return []
                args.append(b.r(OBJ))
        tail = "".join(f", {a}" for a in args)
        return [f"scall {dst}, {u.sig}{tail}"]

    # -- assembly -------------------------------------------------------------

    def render(self) -> str:
        methods: dict[str, list[str]] = {}

        def add(owner: str, header: str, body: list[str]) -> None:
            text = [f"  {header} {{"]
            for line in body:
                text.append(("  " if line.endswith(":") else "    ") + line)
            text.append("  }")
            methods.setdefault(owner, []).append("\n".join(text))

        for i, u in enumerate(self.units):
            if u.kind == "callback":
                add(u.owner, f"method {u.sig}", self.body(i, u.owner, "int", ("int",), False))
            elif u.kind == "virtual":
                add(u.owner, f"method {u.sig}", self.body(i, u.owner, u.ret, u.params, False))
                for sub in u.overrides:
                    sig = u.sig.replace(f"<{u.owner}:", f"<{sub}:", 1)
                    add(sub, f"method {sig}", self.body(i, sub, u.ret, u.params, False))
            else:
                add(u.owner, f"static method {u.sig}", self.body(i, u.owner, u.ret, u.params, True))
        main = self.body(len(self.units), "Main", None, (), True)
        add("Main", "static method <Main: void main()>", main)

        out = ["entry <Main: void main()>", ""]
        for c in self.classes:
            ext = f" extends {self.parent[c]}" if self.parent[c] else ""
            out.append(f"class {c}{ext} {{")
            if self.parent[c] is None:
                out.append("  field v : int")
                out.append("  field buf : int[]")
            out.extend(methods.pop(c, []))
            out.append("}")
            out.append("")
        for f in self.fns:
            out.append(f"class {f} extends stdlib.Fn {{")
            out.extend(methods.pop(f, []))
            out.append("}")
            out.append("")
        for owner in sorted(methods):
            out.append(f"class {owner} {{")
            out.extend(methods[owner])
            out.append("}")
            out.append("")
        return "\n".join(out)


def random_program_text(seed: int, n_units: Optional[int] = None, multidim: bool = False) -> str:
    rng = random.Random(seed)
    g = _Gen(rng, multidim)
    g.plan(n_units if n_units is not None else rng.randint(2, 9))
    return g.render()


def random_program(seed: int, n_units: Optional[int] = None, multidim: bool = False) -> Program:
    return parse_program(random_program_text(seed, n_units, multidim))


def random_inputs(seed: int, n: int = 8) -> tuple[int, ...]:
    rng = random.Random(seed ^ 0x5EED)
    return tuple(rng.randint(-5, 50) for _ in range(n))
