"""Meta-operations: suspension, opposites, chosen inverses, cancellators,
and the functorialisation / naturality lifting (the ``up'' operation).

Depth-0 lifts of coh heads are single coherences over the lifted pasting
context.  Depth-1 lifts exist only for composites and are assembled here as
cylinder telescopes: a chain of whiskered connector steps conjugated by
re-bracketing and interchange coherences, so that the endpoints match the
lifted type exactly.  Every output is meant to be re-checked by the kernel;
nothing in this module is trusted.
"""

from __future__ import annotations

import itertools
from typing import Optional

from . import kernel, pasting
from .pasting import (
    Tree,
    boundary,
    comp_term,
    disc,
    glued_discs,
    identity,
    infer_ty,
    locally_maximal,
    nary_comp,
    recognize_pasting,
    sub_from_locmax,
    tree_to_context,
)
from .syntax import (
    OBJ,
    ArrowTy,
    CattError,
    Coh,
    Ctx,
    Name,
    Sub,
    Tm,
    Ty,
    Var,
    apply_term,
    apply_ty,
    arrow,
    coh,
    compose_sub,
    ctx,
    dim_term,
    freevars,
    fresh_name,
    identity_sub,
    is_full,
    sub,
    support,
    var,
)

# ---------------------------------------------------------------------------
# Suspension
# ---------------------------------------------------------------------------

_susp_memo: dict = {}


def suspend_ctx(context: Ctx, north: Optional[Name] = None, south: Optional[Name] = None):
    """Suspension of a context; returns (suspended ctx, N, S)."""
    north = north or fresh_name("N")
    south = south or fresh_name("S")
    entries = [(north, OBJ), (south, OBJ)]
    for n, t in context.entries:
        entries.append((n, suspend_ty(t, north, south)))
    return ctx(entries), north, south


def suspend_ty(t: Ty, north: Name, south: Name) -> Ty:
    if t is OBJ:
        return arrow(OBJ, var(north), var(south))
    return arrow(
        suspend_ty(t.base, north, south),
        suspend_term(t.src, north, south),
        suspend_term(t.tgt, north, south),
    )


def suspend_term(t: Tm, north: Name, south: Name) -> Tm:
    key = (id(t), north.uid, south.uid)
    hit = _susp_memo.get(key)
    if hit is not None:
        return hit
    if isinstance(t, Var):
        out = t
    else:
        inner_n = fresh_name("N")
        inner_s = fresh_name("S")
        new_ctx, _, _ = suspend_ctx(t.ctx, inner_n, inner_s)
        new_ty = suspend_ty(t.ty, inner_n, inner_s)
        pairs = [(inner_n, var(north)), (inner_s, var(south))]
        for n, u in t.sub.pairs:
            pairs.append((n, suspend_term(u, north, south)))
        out = coh(new_ctx, new_ty, sub(pairs))
    _susp_memo[key] = out
    return out


def suspend_sub(s: Sub, north: Name, south: Name, inner_n: Name, inner_s: Name) -> Sub:
    """Suspension of an explicit substitution, given the pole names of the
    suspended target context."""
    pairs = [(inner_n, var(north)), (inner_s, var(south))]
    for n, u in s.pairs:
        pairs.append((n, suspend_term(u, north, south)))
    return sub(pairs)


def suspend(entity, context: Ctx):
    """Public suspension; for terms/types the poles of the suspended ambient
    context must be supplied via suspend_ctx + suspend_term."""
    if isinstance(entity, Ctx):
        return suspend_ctx(entity)[0]
    raise TypeError("suspend() suspends contexts; use suspend_term/suspend_ty")


# ---------------------------------------------------------------------------
# Opposites
# ---------------------------------------------------------------------------

_op_memo: dict = {}


def _op_tree(tree: Tree, dims: frozenset, depth: int = 0) -> Tree:
    children = tuple(_op_tree(c, dims, depth + 1) for c in tree.children)
    labels = tree.labels
    if (depth + 1) in dims:
        labels = tuple(reversed(labels))
        children = tuple(reversed(children))
    return Tree(labels, children)


def op_ty(t: Ty, dims: frozenset) -> Ty:
    if t is OBJ:
        return OBJ
    key = (id(t), dims)
    hit = _op_memo.get(key)
    if hit is not None:
        return hit
    base = op_ty(t.base, dims)
    src = op_term(t.src, dims)
    tgt = op_term(t.tgt, dims)
    out = arrow(base, tgt, src) if (t.dim + 1) in dims else arrow(base, src, tgt)
    _op_memo[key] = out
    return out


def op_term(t: Tm, dims: frozenset) -> Tm:
    if isinstance(t, Var):
        return t
    key = (id(t), dims)
    hit = _op_memo.get(key)
    if hit is not None:
        return hit
    tree = recognize_pasting(t.ctx)
    flipped = tree_to_context(_op_tree(tree, dims))
    new_ty = op_ty(t.ty, dims)
    images = {n.uid: op_term(u, dims) for n, u in t.sub.pairs}
    new_sub = sub((n, images[n.uid]) for n, _ in flipped.entries)
    out = coh(flipped, new_ty, new_sub)
    _op_memo[key] = out
    return out


def op_ctx(context: Ctx, dims: frozenset) -> Ctx:
    """Entrywise opposite; pasting renormalisation happens only inside coh."""
    return ctx((n, op_ty(t, dims)) for n, t in context.entries)


def op_sub(s: Sub, dims: frozenset) -> Sub:
    return sub((n, op_term(t, dims)) for n, t in s.pairs)


def opposite(entity, dims) -> object:
    dims = frozenset(dims)
    if not dims:
        return entity
    if isinstance(entity, Ty):
        return op_ty(entity, dims)
    if isinstance(entity, Tm):
        return op_term(entity, dims)
    if isinstance(entity, Ctx):
        return op_ctx(entity, dims)
    if isinstance(entity, Sub):
        return op_sub(entity, dims)
    raise TypeError(f"opposite: {entity!r}")


# ---------------------------------------------------------------------------
# Chosen inverses
# ---------------------------------------------------------------------------


def _max_dim_images(t: Coh):
    n = t.ctx.dim
    return [u for (name, _), u in zip(t.ctx.entries, t.sub.terms()) if t.ctx.ty_of(name).dim + 1 == n]


def is_invertible(t: Tm) -> bool:
    if not isinstance(t, Coh):
        return False
    if kernel.classify_coh(t) == "coherence":
        return True
    return all(is_invertible(u) for u in _max_dim_images(t))


_inv_memo: dict = {}


def invert(t: Tm) -> Tm:
    """Chosen inverse; coherences flip their type, composites route through
    the top-dimension opposite with inverted maximal images."""
    hit = _inv_memo.get(id(t))
    if hit is not None:
        return hit
    if not isinstance(t, Coh):
        raise CattError("NotInvertible", "variables are not invertible")
    if kernel.classify_coh(t) == "coherence":
        ty = t.ty
        out = coh(t.ctx, arrow(ty.base, ty.tgt, ty.src), t.sub)
    else:
        n = t.ctx.dim
        dims = frozenset((n,))
        flipped = tree_to_context(_op_tree(recognize_pasting(t.ctx), dims))
        new_ty = op_ty(t.ty, dims)
        bar = {}
        for (name, vty), u in zip(t.ctx.entries, t.sub.terms()):
            if vty.dim + 1 == n:
                if not is_invertible(u):
                    raise CattError("NotInvertible", "composite has a non-invertible maximal image")
                bar[name.uid] = invert(u)
            else:
                bar[name.uid] = u
        new_sub = sub((n2, bar[n2.uid]) for n2, _ in flipped.entries)
        out = coh(flipped, new_ty, new_sub)
    _inv_memo[id(t)] = out
    return out


def bar_sub(s: Sub, target: Ctx) -> Sub:
    """Invert the images of maximal-dimension variables of target."""
    n = target.dim
    pairs = []
    for name, t in s.pairs:
        if target.ty_of(name).dim + 1 == n:
            pairs.append((name, invert(t)))
        else:
            pairs.append((name, t))
    return sub(pairs)


# ---------------------------------------------------------------------------
# Point coherences and pattern coherences
# ---------------------------------------------------------------------------


def point_coherence(src: Tm, tgt: Tm, context: Ctx) -> Tm:
    """The unique coherence over the point context with the given endpoints;
    both terms must have the same single 0-cell in support."""
    fv = freevars(src) | freevars(tgt)
    uids = {u for u in fv}
    if len(uids) != 1:
        raise CattError("SynthesisFailed", "endpoints are not point-context terms")
    (uid,) = uids
    i = context.pos.get(uid)
    name = context.entries[i][0]
    if context.entries[i][1] is not OBJ:
        raise CattError("SynthesisFailed", "support is not a 0-cell")
    base = infer_ty(src, context)
    point = ctx(((name, OBJ),))
    inner = coh(point, arrow(base, src, tgt), identity_sub(point))
    # the bound copy of `name` was canonicalised away; re-apply the original
    return apply_term(inner, {inner.ctx.entries[0][0].uid: var(name)}, partial=True)


def pattern_coherence(context: Ctx, items: list, k: int, expr_a, expr_b) -> Tm:
    """Coherence relating two full composite patterns of the same cells.

    items are cells in diagram order, glued along level k; expressions are
    nested patterns: an int is a leaf index, ("c", level, [e...]) a composite,
    ("id", e) an identity on a subpattern.
    """
    dims = [dim_term(t, context) for t in items]
    shape = glued_discs(dims, k)
    slots = [var(n) for n in locally_maximal(shape)]

    def build(e):
        if isinstance(e, int):
            return slots[e]
        tag = e[0]
        if tag == "c":
            return nary_comp([build(x) for x in e[2]], e[1], shape)
        if tag == "id":
            return identity(build(e[1]), shape)
        raise ValueError(f"bad pattern {e!r}")

    pa = build(expr_a)
    pb = build(expr_b)
    base = infer_ty(pa, shape)
    head = coh(shape, arrow(base, pa, pb), identity_sub(shape))
    return apply_term(head, sub_from_locmax(shape, items, context))


# ---------------------------------------------------------------------------
# Cancellators
# ---------------------------------------------------------------------------


def cancellator(t: Tm, side: str, context: Ctx) -> Tm:
    """eps: t *_{n-1} t^-1 -> id(src t); eta: id(tgt t) -> t^-1 *_{n-1} t."""
    if not is_invertible(t):
        raise CattError("NotInvertible", "cancellator of a non-invertible term")
    tinv = invert(t)
    n = dim_term(t, context)
    ty = infer_ty(t, context)
    if side == "eps":
        u = nary_comp([t, tinv], n - 1, context)
        v = identity(ty.src, context)
    elif side == "eta":
        u = identity(ty.tgt, context)
        v = nary_comp([tinv, t], n - 1, context)
    else:
        raise ValueError(side)
    try:
        return point_coherence(u, v, context)
    except CattError:
        pass
    if isinstance(t, Coh):
        head = coh(t.ctx, t.ty, identity_sub(t.ctx))
        head_ty = apply_ty(t.ty, identity_sub(t.ctx))
        if side == "eps":
            hu = nary_comp([head, invert(head)], n - 1, t.ctx)
            hv = identity(head_ty.src, t.ctx)
        else:
            hu = identity(head_ty.tgt, t.ctx)
            hv = nary_comp([invert(head), head], n - 1, t.ctx)
        if is_full(hu, t.ctx) and is_full(hv, t.ctx):
            base = infer_ty(hu, t.ctx)
            eps0 = coh(t.ctx, arrow(base, hu, hv), identity_sub(t.ctx))
            return apply_term(eps0, t.sub)
    raise CattError("SynthesisFailed", "no cancellator strategy applies")


# ---------------------------------------------------------------------------
# The lifting scheme (functorialisation / naturality)
# ---------------------------------------------------------------------------

_lifted_names: dict = {}


def lifted_names(n: Name):
    hit = _lifted_names.get(n.uid)
    if hit is None:
        hit = (fresh_name(n.text + "_m"), fresh_name(n.text + "_p"), fresh_name(n.text + "_f"))
        _lifted_names[n.uid] = hit
    return hit


def up_closed(context: Ctx, X: frozenset) -> bool:
    for n, _ in context.entries:
        if n.uid not in X and (support(var(n), context) - {n.uid}) & X:
            return False
    return True


def ctx_depth(context: Ctx, X: frozenset) -> int:
    """depth_X of the context: max over variables y of dim y - dim x for
    x in supp(y) intersect X; -1 when X is empty."""
    out = -1
    for n, ty in context.entries:
        dn = ty.dim + 1
        for uid in support(var(n), context) & X:
            dx = context.ty_of(context.entries[context.pos[uid]][0]).dim + 1
            out = max(out, dn - dx)
    return out


def term_depth(t: Tm, context: Ctx, X: frozenset) -> int:
    n = dim_term(t, context)
    hits = support(t, context) & X
    if not hits:
        return -1
    return max(n - (context.entries[context.pos[u]][1].dim + 1) for u in hits)


def preimage(s: Sub, X: frozenset) -> frozenset:
    """X_sigma: target variables whose image meets X (valid for up-closed X)."""
    return frozenset(n.uid for n, t in s.pairs if freevars(t) & X)


_jobs: dict = {}


def lift_job(context: Ctx, X: frozenset) -> "LiftJob":
    key = (id(context), X)
    hit = _jobs.get(key)
    if hit is None:
        hit = LiftJob(context, X)
        _jobs[key] = hit
    return hit


class LiftJob:
    """Lifting of a fixed context along an up-closed variable set X."""

    def __init__(self, base: Ctx, X: frozenset):
        self.base = base
        self.X = X
        if not up_closed(base, X):
            raise CattError("NotUpClosed", "lift set is not up-closed")
        self.depth = ctx_depth(base, X)
        if self.depth > 1:
            raise CattError("DepthTooLarge", f"context depth {self.depth} > 1")
        self.injm: dict = {}
        self.injp: dict = {}
        self._term_memo: dict = {}
        entries = []
        for n, t in base.entries:
            if n.uid in X:
                nm, np_, nf = lifted_names(n)
                entries.append((nm, apply_ty(t, self.injm, partial=True)))
                entries.append((np_, apply_ty(t, self.injp, partial=True)))
                self._partial = ctx(entries)
                conn_ty = self._ty_over(t, var(n), self._partial)
                entries.append((nf, conn_ty))
                self.injm[n.uid] = var(nm)
                self.injp[n.uid] = var(np_)
            else:
                entries.append((n, t))
        self.lifted = ctx(entries)

    # -- substitutions Gamma^X -> Gamma
    def inj(self, sign: str) -> Sub:
        env = self.injm if sign == "-" else self.injp
        return sub((n, env.get(n.uid, var(n))) for n, _ in self.base.entries)

    def minus(self, entity):
        return apply_term(entity, self.injm, partial=True) if isinstance(entity, Tm) else apply_ty(entity, self.injm, partial=True)

    def plus(self, entity):
        return apply_term(entity, self.injp, partial=True) if isinstance(entity, Tm) else apply_ty(entity, self.injp, partial=True)

    # -- types
    def _ty_over(self, A: Ty, t: Tm, lifted_ctx: Ctx) -> Ty:
        if A is OBJ:
            lo, hi = self.minus(t), self.plus(t)
            return arrow(OBJ, lo, hi)
        n = A.dim + 1
        u, v = A.src, A.tgt
        lo = self.minus(t)
        if freevars(v) & self.X:
            lo = nary_comp([lo, self._term(v, lifted_ctx)], n - 1, lifted_ctx)
        hi = self.plus(t)
        if freevars(u) & self.X:
            hi = nary_comp([self._term(u, lifted_ctx), hi], n - 1, lifted_ctx)
        base = infer_ty(lo, lifted_ctx)
        return arrow(base, lo, hi)

    def ty(self, A: Ty, t: Tm) -> Ty:
        """A lifted along t: the type of t^X."""
        return self._ty_over(A, t, self.lifted)

    # -- terms
    def term(self, t: Tm) -> Tm:
        return self._term(t, self.lifted)

    def _term(self, t: Tm, lifted_ctx: Ctx) -> Tm:
        hit = self._term_memo.get(id(t))
        if hit is not None:
            return hit
        if isinstance(t, Var):
            if t.name.uid not in self.X:
                raise CattError("DepthTooLarge", "lift of a variable outside X")
            out = var(lifted_names(t.name)[2])
        else:
            Y = preimage(t.sub, self.X)
            if not Y:
                raise CattError("DepthTooLarge", "lift of an X-free term")
            head = lift_coh_head(t.ctx, t.ty, Y)
            out = apply_term(head, self.sub(t.sub, t.ctx))
        self._term_memo[id(t)] = out
        return out

    # -- substitutions
    def sub(self, s: Sub, target: Ctx) -> Sub:
        """sigma^X : Gamma^X -> target^(X_sigma)."""
        Y = preimage(s, self.X)
        pairs = []
        for n, t in s.pairs:
            if n.uid in Y:
                nm, np_, nf = lifted_names(n)
                pairs.append((nm, self.minus(t)))
                pairs.append((np_, self.plus(t)))
                pairs.append((nf, self.term(t)))
            else:
                pairs.append((n, t))
        return sub(pairs)


_head_memo: dict = {}


VERIFY_LIFTS = True


def lift_coh_head(context: Ctx, A: Ty, Y: frozenset) -> Tm:
    """Lift of coh(context : A)[id] along Y, as a term over context^Y."""
    key = (id(context), id(A), Y)
    hit = _head_memo.get(key)
    if hit is not None:
        return hit
    job = lift_job(context, Y)
    t0 = coh(context, A, identity_sub(context))
    if job.depth <= 0:
        lifted_ty = job.ty(A, t0)
        out = coh(job.lifted, lifted_ty, identity_sub(job.lifted))
    else:
        if kernel.classify_coh(t0) != "composite":
            raise CattError("NaturalityFailed", "depth-1 lift of a non-composite coherence")
        if t0 is not comp_term(context):
            raise CattError("NaturalityFailed", "depth-1 lift of a non-canonical composite")
        out = _cylinder(job)
    if VERIFY_LIFTS:
        got = kernel.check_term(job.lifted, out)
        expected = job.ty(A, t0)
        if got is not expected:
            raise CattError(
                "NaturalityFailed",
                f"lifted head has type {got}, expected {expected}",
            )
    _head_memo[key] = out
    return out


# ---------------------------------------------------------------------------
# Cylinder telescopes: depth-1 lifts of canonical composites
# ---------------------------------------------------------------------------


def _column_contexts(tree: Tree):
    cols = []
    for i, child in enumerate(tree.children):
        cols.append(tree_to_context(Tree((tree.labels[i], tree.labels[i + 1]), (child,))))
    return cols


def _cylinder(job: LiftJob) -> Tm:
    """Filler for comp_Gamma along X over Gamma^X (context depth exactly 1)."""
    base = job.base
    X = job.X
    tree = recognize_pasting(base)

    # Sigma-descent through single-branch roots.
    if len(tree.children) == 1:
        w0, w1 = tree.labels
        if w0.uid in X or w1.uid in X:
            raise CattError("NaturalityFailed", "pole of a suspension column in X")
        inner_ctx = tree_to_context(tree.children[0])
        inner_job = lift_job(inner_ctx, X & frozenset(n.uid for n, _ in inner_ctx.entries))
        inner = inner_job.term(comp_term(inner_ctx))
        return suspend_term(inner, w0, w1)

    cols = _column_contexts(tree)
    comps = [comp_term(c) for c in cols]
    hits = [bool(frozenset(n.uid for n, _ in c.entries) & X) for c in cols]
    col_dims = [c.dim for c in cols]
    if all(d == 1 for d, h in zip(col_dims, hits) if h) and all(d == 1 for d in col_dims):
        return _cyl_sequential(job, tree, cols, comps, hits)
    if any(lab.uid in X for lab in tree.labels):
        raise CattError("NaturalityFailed", "mixed pole/deep lifting is unsupported")
    return _cyl_grid(job, tree, cols, comps, hits)


def _flat_items(job: LiftJob, tree: Tree, comps, side: str):
    env = job.injm if side == "-" else job.injp
    return [apply_term(c, env, partial=True) for c in comps]


def _cyl_sequential(job: LiftJob, tree: Tree, cols, comps, hits) -> Tm:
    """All columns one-dimensional: the hexagon-style telescope."""
    X = job.X
    lc = job.lifted
    labels = tree.labels
    cells = [c.entries[-1][0] for c in cols]  # the 1-cells, in order

    def wedge(lab):
        return var(lifted_names(lab)[2]) if lab.uid in X else None

    def copy(name, sign):
        if name.uid in X:
            return var(lifted_names(name)[1 if sign == "+" else 0])
        return var(name)

    # flat state: cell terms left to right, plus transient pole wedges;
    # columns right of the cursor already hold their plus copies
    state = [copy(c, "-") for c in cells]
    final_right = wedge(labels[-1])
    if final_right is not None:
        state = state + [final_right]

    pieces = []  # 2-cells composed at *_1, in diagram order

    if final_right is not None:
        # regroup the contract source (t[inj-] *_0 wedge) into the flat state
        expr_a = ("c", 0, [("c", 0, list(range(len(cells)))), len(cells)])
        expr_b = ("c", 0, list(range(len(state))))
        pieces.append(pattern_coherence(lc, state, 0, expr_a, expr_b))

    for j in range(len(cols) - 1, -1, -1):
        if not hits[j]:
            continue
        fj = job.term(comps[j])  # the connector of the j-th 1-cell
        right_w = wedge(labels[j + 1])
        left_w = wedge(labels[j])
        idx = j
        take = 2 if right_w is not None else 1
        if right_w is not None:
            flat = ("c", 0, list(range(len(state))))
            grouped = (
                "c",
                0,
                list(range(idx)) + [("c", 0, [idx, idx + 1])] + list(range(idx + 2, len(state))),
            )
            pieces.append(pattern_coherence(lc, state, 0, flat, grouped))
        step_args = state[:idx] + [fj] + state[idx + take :]
        pieces.append(nary_comp(step_args, 0, lc))
        new_items = ([left_w] if left_w is not None else []) + [copy(cells[j], "+")]
        state = state[:idx] + new_items + state[idx + take :]
        if left_w is not None:
            grouped = (
                "c",
                0,
                list(range(idx)) + [("c", 0, [idx, idx + 1])] + list(range(idx + 2, len(state))),
            )
            flat = ("c", 0, list(range(len(state))))
            pieces.append(pattern_coherence(lc, state, 0, grouped, flat))

    final_left = wedge(labels[0])
    if final_left is not None:
        flat = ("c", 0, list(range(len(state))))
        expr_b = ("c", 0, [0, ("c", 0, list(range(1, len(state))))])
        pieces.append(pattern_coherence(lc, state, 0, flat, expr_b))

    return nary_comp(pieces, 1, lc)


class _GridCol:
    __slots__ = ("ctx", "comp", "hit", "dim", "minus", "plus", "filler", "wedge", "blabel")


def _cyl_grid(job: LiftJob, tree: Tree, cols, comps, hits) -> Tm:
    """Disc columns, hit ones top-dimensional with internal boundary wedges:
    an interchange sandwich around the simultaneous whisker of connectors."""
    X = job.X
    lc = job.lifted
    base = job.base
    t0 = comp_term(base)
    D = base.dim

    def column(c, cm, h, side):
        r = _GridCol()
        r.ctx, r.comp, r.hit, r.dim = c, cm, h, c.dim
        if not isinstance(cm, Var):
            raise CattError("NaturalityFailed", "grid lift requires disc columns")
        if h and r.dim != D:
            raise CattError("NaturalityFailed", "grid lift requires top-dimensional hits")
        r.minus = apply_term(cm, job.injm, partial=True)
        r.plus = apply_term(cm, job.injp, partial=True)
        r.filler = job.term(cm) if h else None
        r.wedge = None
        r.blabel = None
        if h and r.dim >= 2:
            # the collapsed boundary label of the disc column on this side
            lab = c.entries[-2][0] if side == "in" else c.entries[-3][0]
            r.blabel = lab
            if lab.uid in X:
                r.wedge = var(lifted_names(lab)[2])
        return r

    recs_in = [column(c, cm, h, "in") for c, cm, h in zip(cols, comps, hits)]
    recs_out = [column(c, cm, h, "out") for c, cm, h in zip(cols, comps, hits)]

    core = nary_comp([r.filler if r.hit else r.minus for r in recs_in], 0, lc)
    core_ty = infer_ty(core, lc)

    pieces = []
    if any(r.wedge is not None for r in recs_in):
        med = _grid_mediator(job, tree, recs_in, "in")
        lo = nary_comp([job.minus(t0), job.term(comp_term(boundary(base, "+")))], D - 1, lc)
        if infer_ty(med, lc).src is not lo or infer_ty(med, lc).tgt is not core_ty.src:
            raise CattError("NaturalityFailed", "grid source mediation mismatch")
        pieces.append(med)
    elif core_ty.src is not job.minus(t0):
        raise CattError("NaturalityFailed", "grid source does not match the lift contract")
    pieces.append(core)
    if any(r.wedge is not None for r in recs_out):
        med = _grid_mediator(job, tree, recs_out, "out")
        hi = nary_comp([job.term(comp_term(boundary(base, "-"))), job.plus(t0)], D - 1, lc)
        if infer_ty(med, lc).tgt is not hi or infer_ty(med, lc).src is not core_ty.tgt:
            raise CattError("NaturalityFailed", "grid target mediation mismatch")
        pieces.append(med)
    elif core_ty.tgt is not job.plus(t0):
        raise CattError("NaturalityFailed", "grid target does not match the lift contract")
    return nary_comp(pieces, D, lc)


def _grid_mediator(job: LiftJob, tree: Tree, records, side: str) -> Tm:
    """One coherence over an explicit grid pasting relating the row form
    comp *_(D-1) (lifted boundary) with the columnwise wedged form."""
    lc = job.lifted
    base = job.base
    D = base.dim
    X = job.X
    sign = "+" if side == "in" else "-"

    qmap: dict = {}  # real base/boundary variable uid -> Q term
    split: dict = {}  # real boundary label uid -> (m, p, wedge) Q terms

    root_labels = tuple(fresh_name(f"o{i}") for i in range(len(records) + 1))
    for lab, q in zip(tree.labels, root_labels):
        qmap[lab.uid] = var(q)

    subtrees = []
    cell_slots = []
    wedge_slots = []
    for r in records:
        inner = [n for n, _ in r.ctx.entries[2:]]  # column entries minus poles
        stacked = r.wedge is not None
        d = r.dim
        fresh = [fresh_name(f"q{i}") for i in range(2 * d + (2 if stacked else -1))]

        def build(j, names):
            if stacked and j == d - 1:
                l0, l1, l2 = names[0], names[1], names[3]
                return Tree((l0, l1, l2), (Tree((names[2],)), Tree((names[4],))))
            if not stacked and j == d:
                return Tree((names[0],))
            return Tree((names[0], names[1]), (build(j + 1, names[2:]),))

        sub_tree = build(1, fresh)
        subtrees.append(sub_tree)
        qvars = list(tree_vars(sub_tree))
        if stacked:
            *pairs, l0, l1, cell, l2, wedge = qvars
            cell_slots.append(var(cell))
            wedge_slots.append(var(wedge))
            # pairs at depths < D-1 map positionally; the collapsed boundary
            # label splits across the stacked node
            for real, q in zip(inner[: 2 * (d - 2)], pairs):
                qmap[real.uid] = var(q)
            bm, bp = inner[2 * (d - 2)], inner[2 * (d - 2) + 1]
            if side == "in":
                qmap[bm.uid] = var(l0)
                split[bp.uid] = (var(l1), var(l2), var(wedge))
            else:
                split[bm.uid] = (var(l0), var(l1), var(wedge))
                qmap[bp.uid] = var(l2)
        else:
            cell = qvars[-1]
            cell_slots.append(var(cell))
            wedge_slots.append(None)
            for real, q in zip(inner, qvars):
                qmap[real.uid] = var(q)

    Q = tree_to_context(Tree(root_labels, tuple(subtrees)))

    items = []
    for r, ws in zip(records, wedge_slots):
        items.append(r.minus if side == "in" else r.plus)
        if ws is not None:
            items.append(r.wedge)

    col_pat = []
    for r, cs, ws in zip(records, cell_slots, wedge_slots):
        if ws is None:
            col_pat.append(cs)
        elif side == "in":
            col_pat.append(nary_comp([cs, ws], r.dim - 1, Q))
        else:
            col_pat.append(nary_comp([ws, cs], r.dim - 1, Q))
    pat_cols = nary_comp(col_pat, 0, Q)

    # the lifted-boundary pattern over Q, built positionally from the head
    bnd = boundary(base, sign)
    v0 = comp_term(bnd)
    Yv = preimage(v0.sub, X)
    head = lift_coh_head(v0.ctx, v0.ty, Yv)
    env: dict = {}
    for (real, _), (canon, _) in zip(bnd.entries, v0.ctx.entries):
        if canon.uid in Yv:
            cm, cp, cf = lifted_names(canon)
            m, p, w = split[real.uid]
            env[cm.uid] = m
            env[cp.uid] = p
            env[cf.uid] = w
        else:
            env[canon.uid] = qmap[real.uid]
    wpat = apply_term(head, env)

    row_comp = nary_comp(cell_slots, 0, Q)
    if side == "in":
        pa = nary_comp([row_comp, wpat], D - 1, Q)
        pb = pat_cols
    else:
        pa = pat_cols
        pb = nary_comp([wpat, row_comp], D - 1, Q)
    bty = infer_ty(pa, Q)
    head_coh = coh(Q, arrow(bty, pa, pb), identity_sub(Q))
    theta = sub_from_locmax(Q, items, lc)
    return apply_term(head_coh, theta)


# ---------------------------------------------------------------------------
# Public lifting API
# ---------------------------------------------------------------------------


def lift_context(context: Ctx, names) -> tuple:
    """Gamma^X with the two inclusion substitutions (inj-, inj+)."""
    X = frozenset(n.uid for n in names)
    job = lift_job(context, X)
    return job.lifted, job.inj("-"), job.inj("+")


def lift_term(t: Tm, names, context: Ctx) -> Tm:
    X = frozenset(n.uid for n in names)
    job = lift_job(context, X)
    d = term_depth(t, context, X)
    if d < 0 or d > 1:
        raise CattError("DepthTooLarge", f"term depth {d} outside [0, 1]")
    return job.term(t)


def lift_type(A: Ty, t: Tm, names, context: Ctx) -> Ty:
    X = frozenset(n.uid for n in names)
    return lift_job(context, X).ty(A, t)


def lift_sub(s: Sub, names, context: Ctx, target: Ctx) -> Sub:
    X = frozenset(n.uid for n in names)
    return lift_job(context, X).sub(s, target)


# ---------------------------------------------------------------------------
# The hexagonal composite
# ---------------------------------------------------------------------------

_hex_cache: dict = {}


def _hex_base():
    """The chain context 3 = (x,y,z,w, f,g,h) with X = {f,y,g,z,h}."""
    hit = _hex_cache.get("base")
    if hit is None:
        x, y, z, w = (fresh_name(s) for s in "xyzw")
        f, g, h = (fresh_name(s) for s in "fgh")
        c = ctx(
            (
                (x, OBJ),
                (y, OBJ),
                (f, arrow(OBJ, var(x), var(y))),
                (z, OBJ),
                (g, arrow(OBJ, var(y), var(z))),
                (w, OBJ),
                (h, arrow(OBJ, var(z), var(w))),
            )
        )
        X = frozenset(n.uid for n in (f, y, g, z, h))
        hit = (c, X)
        _hex_cache["base"] = hit
    return hit


def hex_filler(susp_level: int = 0):
    """Sigma^k of the naturality filler of f *_0 g *_0 h; returns the term
    together with its (suspended, lifted) context."""
    key = ("filler", susp_level)
    hit = _hex_cache.get(key)
    if hit is None:
        c, X = _hex_base()
        job = lift_job(c, X)
        filler = job.term(comp_term(c))
        hctx = job.lifted
        for _ in range(susp_level):
            hctx, nn, ss = suspend_ctx(hctx)
            filler = suspend_term(filler, nn, ss)
        hit = (filler, hctx)
        _hex_cache[key] = hit
    return hit


def hexcomp(a: Tm, b: Tm, c_: Tm, susp_level: int, context: Ctx) -> Tm:
    """(Sigma^k (t^X))[[a, b, c]] for t = f *_0 g *_0 h."""
    filler, hctx = hex_filler(susp_level)
    s = sub_from_locmax(hctx, [a, b, c_], context)
    return apply_term(filler, s)
