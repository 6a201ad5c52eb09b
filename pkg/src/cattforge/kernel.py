"""The four CaTT judgements and the coh side condition.

Everything produced by the meta-operations, the padding calculus and the
Eckmann-Hilton generator is re-verified here; ``check_term`` is the master
entry point and is memoized on (context, term) since generated cells revisit
shared subterms massively.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import pasting
from .syntax import (
    OBJ,
    ArrowTy,
    CattError,
    Coh,
    Ctx,
    Sub,
    Tm,
    Ty,
    Var,
    apply_ty,
    is_full,
    support,
)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    path: tuple
    message: str

    def __str__(self):
        loc = "/".join(str(p) for p in self.path) or "<root>"
        return f"{self.kind} at {loc}: {self.message}"


def _fail(kind: str, path: tuple, message: str):
    raise CattError(kind, str(Diagnostic(kind, path, message)))


_ctx_ok: set = set()
_ty_ok: set = set()
_term_ty: dict = {}
_sub_ok: set = set()
_classify: dict = {}


def check_ctx(context: Ctx, path: tuple = ()):
    if id(context) in _ctx_ok:
        return
    seen = set()
    for i, (name, ty) in enumerate(context.entries):
        if name.uid in seen:
            _fail("Shadowing", path + (name.text,), "variable declared twice")
        check_ty(_prefix(context, i), ty, path + (name.text,))
        seen.add(name.uid)
    _ctx_ok.add(id(context))


_prefix_cache: dict = {}


def _prefix(context: Ctx, i: int) -> Ctx:
    key = (id(context), i)
    out = _prefix_cache.get(key)
    if out is None:
        from .syntax import ctx as mkctx

        out = mkctx(context.entries[:i])
        _prefix_cache[key] = out
    return out


def check_ty(context: Ctx, ty: Ty, path: tuple = ()):
    if (id(context), id(ty)) in _ty_ok:
        return
    if ty is OBJ:
        return
    if not isinstance(ty, ArrowTy):
        _fail("TypeMismatch", path, f"unknown type {ty!r}")
    check_ty(context, ty.base, path + ("base",))
    src_ty = check_term(context, ty.src, path + ("src",))
    tgt_ty = check_term(context, ty.tgt, path + ("tgt",))
    if src_ty is not ty.base:
        _fail("TypeMismatch", path + ("src",), f"has type {src_ty}, expected {ty.base}")
    if tgt_ty is not ty.base:
        _fail("TypeMismatch", path + ("tgt",), f"has type {tgt_ty}, expected {ty.base}")
    _ty_ok.add((id(context), id(ty)))


def check_term(context: Ctx, t: Tm, path: tuple = ()) -> Ty:
    """Returns the inferred type; raises CattError on the first violation."""
    key = (id(context), id(t))
    hit = _term_ty.get(key)
    if hit is not None:
        return hit
    if isinstance(t, Var):
        i = context.pos.get(t.name.uid)
        if i is None:
            _fail("UnboundVariable", path, f"{t.name.text} not in context")
        out = context.entries[i][1]
        _term_ty[key] = out
        return out
    # coh(ps : A)[sub]
    try:
        pasting.recognize_pasting(t.ctx)
    except CattError as e:
        _fail("NotPasting", path, e.message)
    check_ctx(t.ctx, path + ("ps",))
    check_ty(t.ctx, t.ty, path + ("ty",))
    _check_side_condition(t, path)
    check_sub(context, t.sub, t.ctx, path + ("sub",))
    out = apply_ty(t.ty, t.sub)
    _term_ty[key] = out
    return out


def check_sub(context: Ctx, s: Sub, target: Ctx, path: tuple = ()):
    key = (id(context), id(s), id(target))
    if key in _sub_ok:
        return
    if len(s.pairs) != len(target):
        _fail("TypeMismatch", path, "substitution length mismatch")
    for i, ((n, t), (tn, tty)) in enumerate(zip(s.pairs, target.entries)):
        if n is not tn:
            _fail("TypeMismatch", path + (i,), "substitution domain out of order")
        got = check_term(context, t, path + (tn.text,))
        want = apply_ty(tty, s)
        if got is not want:
            _fail(
                "TypeMismatch",
                path + (tn.text,),
                f"image of {tn.text} has type {got}, expected {want}",
            )
    _sub_ok.add(key)


def _check_side_condition(t: Coh, path: tuple):
    if id(t) in _classify:
        return
    if not isinstance(t.ty, ArrowTy):
        _fail("SideConditionFailed", path, "coh type must be an arrow")
    u, v = t.ty.src, t.ty.tgt
    ps = t.ctx
    full_u = is_full(u, ps)
    full_v = is_full(v, ps)
    if full_u and full_v:
        _classify[id(t)] = "coherence"
        return
    if pasting.recognize_pasting(ps).dim > 0:
        src_vars = frozenset(n.uid for n, _ in pasting.boundary(ps, "-").entries)
        tgt_vars = frozenset(n.uid for n, _ in pasting.boundary(ps, "+").entries)
        if support(u, ps) == src_vars and support(v, ps) == tgt_vars:
            _classify[id(t)] = "composite"
            return
    _fail(
        "SideConditionFailed",
        path,
        "coh endpoints are neither full nor exact boundary composites",
    )


def classify_coh(t: Tm) -> str:
    """'composite' or 'coherence'; requires t well-typed (checks the coh)."""
    if not isinstance(t, Coh):
        _fail("TypeMismatch", (), "classify_coh expects a coh term")
    hit = _classify.get(id(t))
    if hit is None:
        _check_side_condition(t, ())
        hit = _classify[id(t)]
    return hit


def check(kind: str, subject, context: Ctx, expected=None) -> Optional[Diagnostic]:
    """Uniform judgement entry point returning None on success, else the
    Diagnostic (never raising)."""
    try:
        if kind == "ctx":
            check_ctx(subject)
        elif kind == "type":
            check_ty(context, subject)
        elif kind == "term":
            got = check_term(context, subject)
            if expected is not None and got is not expected:
                return Diagnostic("TypeMismatch", (), f"term has type {got}, expected {expected}")
        elif kind == "subst":
            check_sub(context, subject, expected)
        else:
            return Diagnostic("TypeMismatch", (), f"unknown judgement {kind}")
    except CattError as e:
        return Diagnostic(e.kind, (), e.message)
    return None


def assert_type(context: Ctx, t: Tm, expected: Ty, what: str = "term"):
    got = check_term(context, t)
    if got is not expected:
        raise CattError(
            "TypeMismatch",
            f"{what}: inferred type {got} differs from expected {expected}",
        )
