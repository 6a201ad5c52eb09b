"""Interned core syntax: names, types, terms, contexts, substitutions.

All four syntactic classes are immutable and hash-consed: building the same
structure twice (up to alpha-renaming of the pasting contexts bound inside
``coh`` nodes) yields the *same* Python object, so equality is ``is`` and
every cache in the package can key on ``id``-like integers.
"""

from __future__ import annotations

import itertools
import sys
import threading
from typing import Iterable, Optional, Union

# Term DAGs for the larger generated cells are deep; structural recursion
# needs headroom beyond CPython's default.
if sys.getrecursionlimit() < 100_000:
    sys.setrecursionlimit(100_000)

_LOCK = threading.RLock()


class CattError(Exception):
    """Raised with a :class:`Diagnostic` for every failed judgement."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.message = message


class BudgetExceeded(CattError):
    def __init__(self, message: str):
        super().__init__("BudgetExceeded", message)


# ---------------------------------------------------------------------------
# Names
# ---------------------------------------------------------------------------

_name_counter = itertools.count(1)


class Name:
    """An identifier with a globally unique uid; text is for printing only."""

    __slots__ = ("text", "uid")

    def __init__(self, text: str, uid: int):
        self.text = text
        self.uid = uid

    def __repr__(self):
        return f"{self.text}#{self.uid}"

    def __hash__(self):
        return self.uid


def fresh_name(text: str) -> Name:
    with _LOCK:
        return Name(text, next(_name_counter))


# Reserved names used to alpha-canonicalise contexts bound inside coh nodes.
_canon_pool: list[Name] = []


def _canon(i: int) -> Name:
    with _LOCK:
        while len(_canon_pool) <= i:
            _canon_pool.append(Name(f"x{len(_canon_pool)}", next(_name_counter)))
        return _canon_pool[i]


# ---------------------------------------------------------------------------
# Node store (interning)
# ---------------------------------------------------------------------------


class Store:
    """Append-only interning tables; the only mutable state in the package."""

    def __init__(self):
        self.types: dict = {}
        self.terms: dict = {}
        self.ctxs: dict = {}
        self.subs: dict = {}
        self.node_count = 0
        self.budget: Optional[int] = None
        self._budget_base = 0

    def _tick(self):
        self.node_count += 1
        if self.budget is not None and self.node_count - self._budget_base > self.budget:
            self.budget = None
            raise BudgetExceeded(f"node budget exhausted after {self.node_count - self._budget_base} nodes")

    def start_budget(self, budget: Optional[int]):
        self.budget = budget
        self._budget_base = self.node_count

    def stop_budget(self):
        self.budget = None


STORE = Store()


class budget:
    """Context manager bounding the number of freshly interned nodes."""

    def __init__(self, n: Optional[int]):
        self.n = n

    def __enter__(self):
        STORE.start_budget(self.n)

    def __exit__(self, *exc):
        STORE.stop_budget()
        return False


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


class Ty:
    __slots__ = ("key", "dim")

    def __hash__(self):
        return id(self)


class ObjTy(Ty):
    __slots__ = ()

    def __init__(self):
        self.key = ("*",)
        self.dim = -1

    def __repr__(self):
        return "*"


class ArrowTy(Ty):
    __slots__ = ("base", "src", "tgt")

    def __init__(self, base: Ty, src: "Tm", tgt: "Tm"):
        self.base = base
        self.src = src
        self.tgt = tgt
        self.dim = base.dim + 1
        self.key = None  # set by intern

    def __repr__(self):
        return f"({self.src} -> {self.tgt})"


OBJ = ObjTy()
STORE.types[OBJ.key] = OBJ


def arrow(base: Ty, src: "Tm", tgt: "Tm") -> ArrowTy:
    key = ("->", id(base), id(src), id(tgt))
    with _LOCK:
        node = STORE.types.get(key)
        if node is None:
            node = ArrowTy(base, src, tgt)
            node.key = key
            STORE.types[key] = node
            STORE._tick()
        return node


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


class Tm:
    __slots__ = ("key",)

    def __hash__(self):
        return id(self)


class Var(Tm):
    __slots__ = ("name",)

    def __init__(self, name: Name):
        self.name = name
        self.key = None

    def __repr__(self):
        return self.name.text


class Coh(Tm):
    __slots__ = ("ctx", "ty", "sub")

    def __init__(self, ctx: "Ctx", ty: Ty, sub: "Sub"):
        self.ctx = ctx
        self.ty = ty
        self.sub = sub
        self.key = None

    def __repr__(self):
        return f"coh[{self.ctx}:{self.ty}]{self.sub}"


def var(name: Name) -> Var:
    key = ("v", name.uid)
    with _LOCK:
        node = STORE.terms.get(key)
        if node is None:
            node = Var(name)
            node.key = key
            STORE.terms[key] = node
            STORE._tick()
        return node


# ---------------------------------------------------------------------------
# Contexts
# ---------------------------------------------------------------------------


class Ctx:
    __slots__ = ("entries", "key", "pos", "dim", "_cache")

    def __init__(self, entries: tuple):
        self.entries = entries  # tuple of (Name, Ty)
        self.pos = {n.uid: i for i, (n, _) in enumerate(entries)}
        self.dim = max((t.dim + 1 for _, t in entries), default=-1)
        self.key = None
        self._cache = {}

    def names(self):
        return tuple(n for n, _ in self.entries)

    def ty_of(self, name: Name) -> Ty:
        i = self.pos.get(name.uid)
        if i is None:
            raise CattError("UnboundVariable", f"{name.text} not in context")
        return self.entries[i][1]

    def has(self, name: Name) -> bool:
        return name.uid in self.pos

    def extend(self, name: Name, ty: Ty) -> "Ctx":
        if self.has(name):
            raise CattError("Shadowing", f"{name.text} declared twice")
        return ctx(self.entries + ((name, ty),))

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return "(" + ", ".join(f"{n.text}:{t}" for n, t in self.entries) + ")"


def ctx(entries: Iterable) -> Ctx:
    entries = tuple(entries)
    key = tuple((n.uid, id(t)) for n, t in entries)
    with _LOCK:
        node = STORE.ctxs.get(key)
        if node is None:
            node = Ctx(entries)
            node.key = key
            STORE.ctxs[key] = node
            STORE._tick()
        return node


EMPTY_CTX = ctx(())


# ---------------------------------------------------------------------------
# Substitutions
# ---------------------------------------------------------------------------


class Sub:
    """Ordered assignments (Name, Tm); inside a coh the names are exactly the
    target context's variables in order."""

    __slots__ = ("pairs", "map", "key")

    def __init__(self, pairs: tuple):
        self.pairs = pairs
        self.map = {n.uid: t for n, t in pairs}
        self.key = None

    def terms(self):
        return tuple(t for _, t in self.pairs)

    def __repr__(self):
        return "<" + ", ".join(f"{n.text}->{t}" for n, t in self.pairs) + ">"


def sub(pairs: Iterable) -> Sub:
    pairs = tuple(pairs)
    key = tuple((n.uid, id(t)) for n, t in pairs)
    with _LOCK:
        node = STORE.subs.get(key)
        if node is None:
            node = Sub(pairs)
            node.key = key
            STORE.subs[key] = node
            STORE._tick()
        return node


EMPTY_SUB = sub(())


def identity_sub(context: Ctx) -> Sub:
    return sub((n, var(n)) for n, _ in context.entries)


# ---------------------------------------------------------------------------
# coh construction with alpha-canonicalisation
# ---------------------------------------------------------------------------


def _is_canonical(context: Ctx) -> bool:
    return all(n is _canon(i) for i, (n, _) in enumerate(context.entries))


def coh(context: Ctx, ty: Ty, s: Sub) -> Coh:
    """Intern a coh node, renaming the bound context to canonical names.

    Interned ids therefore coincide exactly on alpha-equal terms.
    """
    if len(s.pairs) != len(context):
        raise CattError("TypeMismatch", "substitution length does not match context")
    if not _is_canonical(context):
        ren = {}
        new_entries = []
        for i, (n, t) in enumerate(context.entries):
            cn = _canon(i)
            new_entries.append((cn, apply_ty(t, ren, partial=True)))
            ren[n.uid] = var(cn)
        new_ctx = ctx(new_entries)
        ty = apply_ty(ty, ren, partial=True)
        s = sub((new_ctx.entries[i][0], t) for i, (_, t) in enumerate(s.pairs))
        context = new_ctx
    key = ("c", id(context), id(ty), id(s))
    with _LOCK:
        node = STORE.terms.get(key)
        if node is None:
            node = Coh(context, ty, s)
            node.key = key
            STORE.terms[key] = node
            STORE._tick()
        return node


# ---------------------------------------------------------------------------
# Substitution action and composition
# ---------------------------------------------------------------------------

_apply_memo: dict = {}


def _env_key(env) -> tuple:
    if isinstance(env, Sub):
        return ("S", id(env))
    return tuple(sorted((u, id(t)) for u, t in env.items()))


def _lookup(env, uid: int):
    if isinstance(env, Sub):
        return env.map.get(uid)
    return env.get(uid)


def apply_term(t: Tm, env: Union[Sub, dict], partial: bool = False) -> Tm:
    """Action t[env].  With partial=True unassigned variables stay fixed."""
    memo_key = (id(t), _env_key(env), partial)
    hit = _apply_memo.get(memo_key)
    if hit is not None:
        return hit
    if isinstance(t, Var):
        image = _lookup(env, t.name.uid)
        if image is None:
            if partial:
                image = t
            else:
                raise CattError("UnboundVariable", f"{t.name.text} unassigned by substitution")
        out = image
    else:
        new_sub = sub((n, apply_term(u, env, partial)) for n, u in t.sub.pairs)
        out = coh(t.ctx, t.ty, new_sub)
    _apply_memo[memo_key] = out
    return out


def apply_ty(ty: Ty, env: Union[Sub, dict], partial: bool = False) -> Ty:
    if ty is OBJ:
        return OBJ
    memo_key = (id(ty), _env_key(env), partial)
    hit = _apply_memo.get(memo_key)
    if hit is not None:
        return hit
    out = arrow(
        apply_ty(ty.base, env, partial),
        apply_term(ty.src, env, partial),
        apply_term(ty.tgt, env, partial),
    )
    _apply_memo[memo_key] = out
    return out


def apply(entity, env, partial: bool = False):
    if isinstance(entity, Ty):
        return apply_ty(entity, env, partial)
    if isinstance(entity, Tm):
        return apply_term(entity, env, partial)
    if isinstance(entity, Sub):
        return compose_sub(entity, env, partial)
    raise TypeError(f"cannot apply substitution to {entity!r}")


def compose_sub(tau: Sub, sigma: Union[Sub, dict], partial: bool = False) -> Sub:
    """tau . sigma, acting componentwise: x[tau.sigma] = x[tau][sigma]."""
    return sub((n, apply_term(t, sigma, partial)) for n, t in tau.pairs)


# ---------------------------------------------------------------------------
# Free variables, support, dimension
# ---------------------------------------------------------------------------

_fv_memo: dict = {}


def freevars(entity) -> frozenset:
    """Uids of variables occurring in a term/type/substitution."""
    key = id(entity)
    hit = _fv_memo.get(key)
    if hit is not None:
        return hit
    if entity is OBJ:
        out = frozenset()
    elif isinstance(entity, Var):
        out = frozenset((entity.name.uid,))
    elif isinstance(entity, Coh):
        out = frozenset().union(*(freevars(t) for _, t in entity.sub.pairs)) if entity.sub.pairs else frozenset()
    elif isinstance(entity, ArrowTy):
        out = freevars(entity.base) | freevars(entity.src) | freevars(entity.tgt)
    elif isinstance(entity, Sub):
        out = frozenset().union(*(freevars(t) for _, t in entity.pairs)) if entity.pairs else frozenset()
    else:
        raise TypeError(f"freevars: {entity!r}")
    _fv_memo[key] = out
    return out


_supp_memo: dict = {}


def support(entity, context: Ctx) -> frozenset:
    """supp_ctx(entity): occurring variables closed under their context types."""
    key = (id(entity), id(context))
    hit = _supp_memo.get(key)
    if hit is not None:
        return hit
    out = set()
    stack = list(freevars(entity))
    while stack:
        uid = stack.pop()
        if uid in out:
            continue
        i = context.pos.get(uid)
        if i is None:
            raise CattError("UnboundVariable", "support of ill-scoped entity")
        out.add(uid)
        stack.extend(freevars(context.entries[i][1]))
    out = frozenset(out)
    _supp_memo[key] = out
    return out


def is_full(entity, context: Ctx) -> bool:
    return support(entity, context) == frozenset(context.pos)


def dim_ty(ty: Ty) -> int:
    return ty.dim


def dim_term(t: Tm, context: Ctx) -> int:
    if isinstance(t, Var):
        return context.ty_of(t.name).dim + 1
    return t.ty.dim + 1


def dim_ctx(context: Ctx) -> int:
    return context.dim


# ---------------------------------------------------------------------------
# Alpha equality
# ---------------------------------------------------------------------------


def alpha_equal(a, b) -> bool:
    """Interning is alpha-canonical, so alpha-equality is identity."""
    return a is b


def structural_equal(a, b, ren=None) -> bool:
    """Oracle comparator that ignores interning: direct structural recursion
    with a binder renaming, used to cross-check alpha_equal."""
    if ren is None:
        ren = {}
    if isinstance(a, Var) and isinstance(b, Var):
        return ren.get(a.name.uid, a.name.uid) == b.name.uid
    if a is OBJ or b is OBJ:
        return a is b
    if isinstance(a, ArrowTy) and isinstance(b, ArrowTy):
        return (
            structural_equal(a.base, b.base, ren)
            and structural_equal(a.src, b.src, ren)
            and structural_equal(a.tgt, b.tgt, ren)
        )
    if isinstance(a, Coh) and isinstance(b, Coh):
        if len(a.ctx) != len(b.ctx):
            return False
        inner = dict(ren)
        for (n1, t1), (n2, t2) in zip(a.ctx.entries, b.ctx.entries):
            if not structural_equal(t1, t2, inner):
                return False
            inner[n1.uid] = n2.uid
        if not structural_equal(a.ty, b.ty, inner):
            return False
        return all(structural_equal(x, y, ren) for (_, x), (_, y) in zip(a.sub.pairs, b.sub.pairs))
    return False
