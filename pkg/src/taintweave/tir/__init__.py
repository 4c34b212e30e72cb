from .hierarchy import Hierarchy
from .model import (
    BOOL,
    INT,
    MANGLE_SUFFIX,
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
    array_of,
    class_type,
    mangled_sig,
    needs_mangling,
    parse_sig,
    parse_type,
    sig_sort_key,
)
from .syntax import ParseError, emit_artifact, emit_instr, emit_program, parse_artifact, parse_program
from .validate import LinkError, validate_program

__all__ = [
    "BOOL", "INT", "MANGLE_SUFFIX", "ClassDef", "FieldRef", "Hierarchy", "Instr",
    "InstrumentedProgram", "InstrumentSet", "Label", "LinkError", "MethodDef",
    "MethodSig", "ParseError", "Program", "ReflectionTable", "SignatureError",
    "TableEntry", "TypeDesc", "array_of", "class_type", "emit_artifact", "emit_instr",
    "emit_program", "mangled_sig", "needs_mangling", "parse_artifact", "parse_program",
    "parse_sig", "parse_type", "sig_sort_key", "validate_program",
]
