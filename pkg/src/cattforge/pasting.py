"""Batanin trees, pasting contexts, discs/spheres, composites, identities.

The canonical variable order of a pasting context is the ps-derivation
order: a node with labels v1..v_{s+1} and subtrees B1..Bs is emitted as
v1, then (v2, B1), (v3, B2), ...  The figure context
(x, y, f, z, g, h, a, k, b) is exactly this traversal of its tree.
"""

from __future__ import annotations

from typing import Optional

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
    ctx,
    dim_term,
    fresh_name,
    identity_sub,
    is_full,
    sub,
    var,
)


class Tree:
    """Rooted planar tree; a node with n children carries n+1 labels."""

    __slots__ = ("labels", "children", "_dim")

    def __init__(self, labels: tuple, children: tuple = ()):
        assert len(labels) == len(children) + 1
        self.labels = labels
        self.children = children
        self._dim = 1 + max((c._dim for c in children), default=-1)

    @property
    def dim(self):
        return self._dim

    def relabel(self, mapping) -> "Tree":
        return Tree(
            tuple(mapping.get(n.uid, n) for n in self.labels),
            tuple(c.relabel(mapping) for c in self.children),
        )

    def __repr__(self):
        if not self.children:
            return self.labels[0].text
        parts = [self.labels[0].text]
        for lab, child in zip(self.labels[1:], self.children):
            parts.append(f"[{child!r}]{lab.text}")
        return "".join(parts)


def tree_vars(tree: Tree):
    yield tree.labels[0]
    for lab, child in zip(tree.labels[1:], tree.children):
        yield lab
        yield from tree_vars(child)


def fresh_tree(shape, prefix="c", _depth=0, _counter=None) -> Tree:
    """Build a tree with fresh labels from a nested shape: () is a leaf,
    (s1, s2) a node with two children."""
    if _counter is None:
        _counter = iter(range(10**9))
    labels = tuple(
        fresh_name(f"{prefix}{_depth}_{next(_counter)}") for _ in range(len(shape) + 1)
    )
    children = tuple(fresh_tree(s, prefix, _depth + 1, _counter) for s in shape)
    return Tree(labels, children)


def tree_to_context(tree: Tree) -> Ctx:
    """Derived context of a labelled tree, in canonical ps order."""
    entries = []

    def node(t: Tree, ty: Ty):
        entries.append((t.labels[0], ty))
        for i, child in enumerate(t.children):
            entries.append((t.labels[i + 1], ty))
            node(child, arrow(ty, var(t.labels[i]), var(t.labels[i + 1])))

    node(tree, OBJ)
    return ctx(entries)


def recognize_pasting(context: Ctx) -> Tree:
    """Parse a context as a pasting context, mirroring the ps rules; raises
    NotPasting at the first offending entry."""
    cached = context._cache.get("tree")
    if cached is not None:
        return cached
    if len(context) == 0:
        raise CattError("NotPasting", "empty context")
    entries = list(context.entries)
    name0, ty0 = entries[0]
    if ty0 is not OBJ:
        raise CattError("NotPasting", f"first entry {name0.text} must have type *")

    # Mutable node skeletons: [labels, children, type]
    root = [[name0], [], OBJ]
    stack = [root]
    i = 1
    while i < len(entries):
        if i + 1 >= len(entries):
            raise CattError("NotPasting", f"dangling entry {entries[i][0].text}")
        (yname, yty), (fname, fty) = entries[i], entries[i + 1]
        if not isinstance(fty, ArrowTy):
            raise CattError("NotPasting", f"{fname.text} must be an arrow entry")
        # drop to the dimension of the new pair
        want = fty.dim  # depth of the node y extends
        while len(stack) - 1 > want:
            stack.pop()
        if len(stack) - 1 != want:
            raise CattError("NotPasting", f"{fname.text} skips dimensions")
        node = stack[-1]
        xname = node[0][-1]
        if yty is not node[2]:
            raise CattError("NotPasting", f"{yname.text} has unexpected type")
        if not (
            isinstance(fty.src, Var)
            and fty.src.name is xname
            and isinstance(fty.tgt, Var)
            and fty.tgt.name is yname
            and fty.base is node[2]
        ):
            raise CattError("NotPasting", f"{fname.text} is not {xname.text} -> {yname.text}")
        node[0].append(yname)
        child = [[fname], [], fty]
        node[1].append(child)
        stack.append(child)
        i += 2

    def freeze(node) -> Tree:
        return Tree(tuple(node[0]), tuple(freeze(c) for c in node[1]))

    tree = freeze(root)
    context._cache["tree"] = tree
    return tree


def is_pasting(context: Ctx) -> bool:
    try:
        recognize_pasting(context)
        return True
    except CattError:
        return False


def locally_maximal(context: Ctx) -> tuple:
    """Variables appearing in no other variable's type, in context order."""
    cached = context._cache.get("locmax")
    if cached is None:
        used = set()
        for _, ty in context.entries:
            from .syntax import freevars

            used |= freevars(ty)
        cached = tuple(n for n, _ in context.entries if n.uid not in used)
        context._cache["locmax"] = cached
    return cached


def boundary_tree(tree: Tree, sign: str) -> Tree:
    """Remove max-height leaves; keep leftmost (-) or rightmost (+) labels."""
    if tree.dim <= 0:
        raise CattError("TrivialBoundary", "the point context has no boundary")
    top = tree.dim

    def walk(t: Tree, depth: int) -> Tree:
        if depth == top - 1:
            keep = t.labels[0] if sign == "-" else t.labels[-1]
            return Tree((keep,), ())
        labels = [t.labels[0]]
        children = []
        for lab, child in zip(t.labels[1:], t.children):
            children.append(walk(child, depth + 1))
            labels.append(lab)
        return Tree(tuple(labels), tuple(children))

    return walk(tree, 0)


def boundary(context: Ctx, sign: str) -> Ctx:
    key = ("boundary", sign)
    cached = context._cache.get(key)
    if cached is None:
        cached = tree_to_context(boundary_tree(recognize_pasting(context), sign))
        context._cache[key] = cached
    return cached


# ---------------------------------------------------------------------------
# Discs and spheres
# ---------------------------------------------------------------------------

_disc_cache: dict = {}


def disc_tree_fresh(n: int) -> Tree:
    """Linear spine: two labels at each depth j < n, one label at depth n."""

    def build(j: int) -> Tree:
        if j == n:
            return Tree((fresh_name(f"d{n}"),))
        return Tree((fresh_name(f"d{j}m"), fresh_name(f"d{j}p")), (build(j + 1),))

    return build(0)


def disc(n: int) -> Ctx:
    key = ("disc", n)
    if key not in _disc_cache:
        _disc_cache[key] = tree_to_context(disc_tree_fresh(n))
    return _disc_cache[key]


def disc_top(n: int) -> Name:
    return disc(n).entries[-1][0]


def sphere(n: int) -> Ctx:
    """Sphere context S^n; sphere(-1) is empty."""
    if n < -1:
        raise CattError("Range", "sphere dimension must be >= -1")
    if n == -1:
        return ctx(())
    return ctx(disc(n + 1).entries[:-1])


def sphere_ty(n: int, context: Optional[Ctx] = None) -> Ty:
    """The type S^n over sphere(n) (or over any context containing it)."""
    if n == -1:
        return OBJ
    c = disc(n + 1)
    return c.entries[-1][1]


# ---------------------------------------------------------------------------
# Kernel-free type inference for well-typed terms (used by unification)
# ---------------------------------------------------------------------------


def infer_ty(t: Tm, context: Ctx) -> Ty:
    """Type of a well-typed term; cheap (no judgement re-checking)."""
    if isinstance(t, Var):
        return context.ty_of(t.name)
    return apply_ty(t.ty, t.sub)


def tgt_of(t: Tm, context: Ctx) -> Tm:
    ty = infer_ty(t, context)
    if ty is OBJ:
        raise CattError("TypeMismatch", "0-cell has no target")
    return ty.tgt


def src_of(t: Tm, context: Ctx) -> Tm:
    ty = infer_ty(t, context)
    if ty is OBJ:
        raise CattError("TypeMismatch", "0-cell has no source")
    return ty.src


def boundary_at(t: Tm, context: Ctx, k: int, sign: str) -> Tm:
    """k-dimensional source/target of t."""
    n = dim_term(t, context)
    if k >= n:
        raise CattError("Range", "boundary dimension too large")
    ty = infer_ty(t, context)
    while ty.dim > k:
        ty = ty.base
    return ty.src if sign == "-" else ty.tgt


# ---------------------------------------------------------------------------
# Unification: substitutions from locally-maximal arguments
# ---------------------------------------------------------------------------


def _unify_term(pattern: Tm, concrete: Tm, binding: dict, context: Ctx):
    if isinstance(pattern, Var):
        got = binding.get(pattern.name.uid)
        if got is None:
            binding[pattern.name.uid] = concrete
        elif got is not concrete:
            raise CattError(
                "BoundaryMismatch",
                f"variable {pattern.name.text} forced to two distinct images",
            )
        return
    if not isinstance(concrete, Coh) or concrete.ctx is not pattern.ctx or concrete.ty is not pattern.ty:
        raise CattError("BoundaryMismatch", "boundary shapes do not match")
    for (_, p), (_, c) in zip(pattern.sub.pairs, concrete.sub.pairs):
        _unify_term(p, c, binding, context)


def _unify_ty(pattern: Ty, concrete: Ty, binding: dict, context: Ctx):
    if pattern is OBJ or concrete is OBJ:
        if pattern is not concrete:
            raise CattError("BoundaryMismatch", "type dimensions do not match")
        return
    _unify_ty(pattern.base, concrete.base, binding, context)
    _unify_term(pattern.src, concrete.src, binding, context)
    _unify_term(pattern.tgt, concrete.tgt, binding, context)


def sub_from_locmax(target: Ctx, args: list, context: Ctx) -> Sub:
    """Reconstruct the full substitution context -> target from the images of
    target's locally-maximal variables, by first-order matching on boundaries."""
    locmax = locally_maximal(target)
    if len(args) != len(locmax):
        raise CattError(
            "BoundaryMismatch",
            f"expected {len(locmax)} locally-maximal arguments, got {len(args)}",
        )
    binding: dict = {}
    for m, t in zip(locmax, args):
        if m.uid in binding:
            if binding[m.uid] is not t:
                raise CattError("BoundaryMismatch", f"conflicting images for {m.text}")
        else:
            binding[m.uid] = t
        _unify_ty(target.ty_of(m), infer_ty(t, context), binding, context)
    pairs = []
    for n, _ in target.entries:
        if n.uid not in binding:
            raise CattError("BoundaryMismatch", f"image of {n.text} not determined")
        pairs.append((n, binding[n.uid]))
    return sub(pairs)


# ---------------------------------------------------------------------------
# Composites and identities
# ---------------------------------------------------------------------------

_comp_cache: dict = {}


def comp_term(context: Ctx) -> Tm:
    """comp_Gamma: the top variable for discs, else
    coh(Gamma : comp(d-) -> comp(d+))[id]."""
    hit = _comp_cache.get(id(context))
    if hit is not None:
        return hit
    tree = recognize_pasting(context)
    if _is_disc_tree(tree):
        out = var(_disc_top_label(tree))
    else:
        src_ctx = boundary(context, "-")
        tgt_ctx = boundary(context, "+")
        src = comp_term(src_ctx)
        tgt = comp_term(tgt_ctx)
        base = infer_ty(src, src_ctx)
        out = coh(context, arrow(base, src, tgt), identity_sub(context))
    _comp_cache[id(context)] = out
    return out


def _is_disc_tree(tree: Tree) -> bool:
    while True:
        if len(tree.labels) == 1 and not tree.children:
            return True
        if len(tree.labels) != 2 or len(tree.children) != 1:
            return False
        tree = tree.children[0]


def _disc_top_label(tree: Tree) -> Name:
    while tree.children:
        tree = tree.children[0]
    return tree.labels[0]


def glued_discs_tree(dims: list, k: int) -> Tree:
    """Tree of the pasting gluing discs of the given dimensions along level k
    (d^k_+ of each disc identified with d^k_- of its successor)."""
    if not dims or any(d <= k for d in dims):
        raise CattError("NotComposable", "all factors must have dimension > k")

    def tail(d: int, j: int) -> Tree:
        # linear disc spine from depth j+1 up to d
        if j + 1 == d:
            return Tree((fresh_name(f"t{d}"),))
        return Tree((fresh_name(f"e{j+1}m"), fresh_name(f"e{j+1}p")), (tail(d, j + 1),))

    def build(j: int) -> Tree:
        if j == k:
            labels = tuple(fresh_name(f"o{i}") for i in range(len(dims) + 1))
            children = tuple(tail(d, k) for d in dims)
            return Tree(labels, children)
        return Tree((fresh_name(f"s{j}m"), fresh_name(f"s{j}p")), (build(j + 1),))

    return build(0)


_glued_cache: dict = {}


def glued_discs(dims, k: int) -> Ctx:
    key = (tuple(dims), k)
    if key not in _glued_cache:
        _glued_cache[key] = tree_to_context(glued_discs_tree(list(dims), k))
    return _glued_cache[key]


def nary_comp(args: list, k: int, context: Ctx) -> Tm:
    """t1 *_k ... *_k tm via the glued-discs pasting.  For dims <= k all
    arguments must coincide (and are returned as-is)."""
    if not args:
        raise CattError("NotComposable", "empty composite")
    if len(args) == 1:
        return args[0]
    dims = [dim_term(t, context) for t in args]
    if all(d <= k for d in dims):
        first = args[0]
        if any(t is not first for t in args):
            raise CattError("NotComposable", "low-dimensional factors must all be equal")
        return first
    if any(d <= k for d in dims):
        raise CattError("NotComposable", "mixed low-dimensional factors in composite")
    shape = glued_discs(dims, k)
    s = sub_from_locmax(shape, args, context)
    return apply_term(comp_term(shape), s)


def identity(t: Tm, context: Ctx, k: int = 1) -> Tm:
    """id^k_t; id^0 is t itself."""
    out = t
    for _ in range(k):
        n = dim_term(out, context)
        d = disc(n)
        s = sub_from_locmax(d, [out], context)
        top = var(disc_top(n))
        out = apply_term(coh(d, arrow(d.entries[-1][1], top, top), identity_sub(d)), s)
    return out
