#!/usr/bin/env python3
"""Generate the pinned set.mm-style fixture database.

The output reuses set.mm's notation and early labels (ax-mp, ax-1, ax-2,
ax-3, mp2b, a1i, syl, ...) for a propositional and first-order core, then
appends a few thousand machine-derived propositions built by forward
chaining over everything proved so far. Every proof is constructed as an
explicit tree and serialised either in normal or compressed form.

Usage: gen_fixture.py OUT.mm [--count N] [--seed S] [--corrupt OUT2.mm]
"""

import argparse
import random

WFF_VARS = ["ph", "ps", "ch", "th", "ta", "et", "ze", "si"]
SET_VARS = ["x", "y", "z", "w", "v", "u"]
FLABEL = {v: "w" + v for v in WFF_VARS}
FLABEL.update({v: "v" + v for v in SET_VARS})
VTYPE = {v: "wff" for v in WFF_VARS}
VTYPE.update({v: "set" for v in SET_VARS})
FORDER = {v: i for i, v in enumerate(WFF_VARS + SET_VARS)}

# label -> (typecode, body tokens); variable tokens are slots
CTORS = {}
CTOR_ORDER = []


def ctor(label, body):
    toks = body.split()
    CTORS[label] = ("wff", toks)
    CTOR_ORDER.append(label)


ctor("wn", "-. ph")
ctor("wi", "( ph -> ps )")
ctor("wb", "( ph <-> ps )")
ctor("wo", "( ph \\/ ps )")
ctor("wa", "( ph /\\ ps )")
ctor("wal", "A. x ph")
ctor("wex", "E. x ph")
ctor("weq", "x = y")
ctor("wel", "x e. y")


def ctor_slots(label):
    return [t for t in CTORS[label][1] if t in VTYPE]


def ctor_mand(label):
    return sorted(ctor_slots(label), key=lambda v: FORDER[v])


# ---------------------------------------------------------------- terms


def T(label, *args):
    return (label,) + args


def tvars(t, acc=None):
    if acc is None:
        acc = []
    if isinstance(t, str):
        if t not in acc:
            acc.append(t)
    else:
        for a in t[1:]:
            tvars(a, acc)
    return acc


def ttype(t):
    if isinstance(t, str):
        return VTYPE[t]
    return CTORS[t[0]][0]


def tsize(t):
    if isinstance(t, str):
        return 1
    return 1 + sum(tsize(a) for a in t[1:])


def subst(t, s):
    if isinstance(t, str):
        return s.get(t, t)
    return (t[0],) + tuple(subst(a, s) for a in t[1:])


def match(pat, term, s):
    if isinstance(pat, str):
        if pat in s:
            return s[pat] == term
        if ttype(term) != VTYPE[pat]:
            return False
        s[pat] = term
        return True
    if isinstance(term, str) or term[0] != pat[0]:
        return False
    return all(match(p, q, s) for p, q in zip(pat[1:], term[1:]))


def render(t):
    if isinstance(t, str):
        return [t]
    slots = ctor_slots(t[0])
    args = dict(zip(slots, t[1:]))
    out = []
    for tok in CTORS[t[0]][1]:
        if tok in args:
            out.extend(render(args[tok]))
        else:
            out.append(tok)
    return out


def subterms(t, acc):
    acc.append(t)
    if not isinstance(t, str):
        for a in t[1:]:
            subterms(a, acc)
    return acc


# ------------------------------------------------------------- theorems


class Thm:
    def __init__(self, label, hyps, concl, dv=(), axiom=False):
        self.label = label
        self.hyps = list(hyps)
        self.concl = concl
        vs = []
        for h in self.hyps + [concl]:
            tvars(h, vs)
        self.vars = sorted(vs, key=lambda v: FORDER[v])
        self.dv = set()
        for (a, b) in dv:
            if a in self.vars and b in self.vars:
                self.dv.add(tuple(sorted((a, b), key=lambda v: FORDER[v])))
        self.axiom = axiom
        self.size = sum(tsize(h) for h in self.hyps) + tsize(concl)

    def mand(self):
        return [("f", v) for v in self.vars] + [("e", i) for i in range(len(self.hyps))]


def wi(a, b):
    return T("wi", a, b)


def wn(a):
    return T("wn", a)


def wb(a, b):
    return T("wb", a, b)


def wa(a, b):
    return T("wa", a, b)


def wo(a, b):
    return T("wo", a, b)


def wal(x, a):
    return T("wal", x, a)


def wex(x, a):
    return T("wex", x, a)


def weq(x, y):
    return T("weq", x, y)


def wel(x, y):
    return T("wel", x, y)


ph, ps, ch, th = "ph", "ps", "ch", "th"
x, y, z = "x", "y", "z"

AXIOMS = [
    Thm("ax-mp", [ph, wi(ph, ps)], ps, axiom=True),
    Thm("ax-1", [], wi(ph, wi(ps, ph)), axiom=True),
    Thm("ax-2", [], wi(wi(ph, wi(ps, ch)), wi(wi(ph, ps), wi(ph, ch))), axiom=True),
    Thm("ax-3", [], wi(wi(wn(ph), wn(ps)), wi(ps, ph)), axiom=True),
    Thm("df-bi1", [], wi(wb(ph, ps), wi(ph, ps)), axiom=True),
    Thm("df-bi2", [], wi(wb(ph, ps), wi(ps, ph)), axiom=True),
    Thm("df-bi3", [], wi(wi(ph, ps), wi(wi(ps, ph), wb(ph, ps))), axiom=True),
    Thm("df-an1", [], wi(wa(ph, ps), ph), axiom=True),
    Thm("df-an2", [], wi(wa(ph, ps), ps), axiom=True),
    Thm("df-an3", [], wi(ph, wi(ps, wa(ph, ps))), axiom=True),
    Thm("df-or1", [], wi(ph, wo(ph, ps)), axiom=True),
    Thm("df-or2", [], wi(ps, wo(ph, ps)), axiom=True),
    Thm("df-or3", [], wi(wi(ph, ch), wi(wi(ps, ch), wi(wo(ph, ps), ch))), axiom=True),
    Thm("ax-gen", [ph], wal(x, ph), axiom=True),
    Thm("ax-4", [], wi(wal(x, wi(ph, ps)), wi(wal(x, ph), wal(x, ps))), axiom=True),
    Thm("ax-5", [], wi(ph, wal(x, ph)), dv=[(x, ph)], axiom=True),
    Thm("ax-sp", [], wi(wal(x, ph), ph), axiom=True),
    Thm("df-ex", [], wb(wex(x, ph), wn(wal(x, wn(ph)))), axiom=True),
    Thm("ax-6", [], wn(wal(x, wn(weq(x, y)))), axiom=True),
    Thm("ax-7", [], wi(weq(x, y), wi(weq(x, z), weq(y, z))), axiom=True),
    Thm("ax-ext", [], wi(wal(z, wb(wel(z, x), wel(z, y))), weq(x, y)),
        dv=[(x, y), (x, z), (y, z)], axiom=True),
]

# --------------------------------------------------------------- proofs
# proof := ("hyp", i) | ("app", thm, subst, [children])


class Lib:
    def __init__(self):
        self.thms = {}
        self.order = []

    def add(self, thm):
        self.thms[thm.label] = thm
        self.order.append(thm)


LIB = Lib()
for a in AXIOMS:
    LIB.add(a)


def conclusion(proof, hyps):
    if proof[0] == "hyp":
        return hyps[proof[1]]
    _, label, s, children = proof
    thm = LIB.thms[label]
    assert len(children) == len(thm.hyps), label
    for h, c in zip(thm.hyps, children):
        got = conclusion(c, hyps)
        want = subst(h, s)
        assert got == want, (label, got, want)
    for v in thm.vars:
        assert v in s and ttype(s[v]) == VTYPE[v], (label, v)
    return subst(thm.concl, s)


def needed_dv(proof, acc):
    if proof[0] == "hyp":
        return acc
    _, label, s, children = proof
    thm = LIB.thms[label]
    for (a, b) in thm.dv:
        for p in tvars(s[a]):
            for q in tvars(s[b]):
                if p == q:
                    raise ValueError("dv collision")
                acc.add(tuple(sorted((p, q), key=lambda v: FORDER[v])))
    for c in children:
        needed_dv(c, acc)
    return acc


def proof_vars(proof, acc):
    if proof[0] == "app":
        for t in proof[2].values():
            tvars(t, acc)
        for c in proof[3]:
            proof_vars(c, acc)
    return acc


def app(label, children=(), **kw):
    return ("app", label, dict(kw), list(children))


def H(i):
    return ("hyp", i)


# hand-written early theorems, in set.mm's spirit
HAND = []


def hand(label, hyps, concl, proof, dv=()):
    HAND.append((label, hyps, concl, proof, dv))


hand("mp2b", [ph, wi(ph, ps), wi(ps, ch)], ch,
     app("ax-mp", [app("ax-mp", [H(0), H(1)], ph=ph, ps=ps), H(2)], ph=ps, ps=ch))
hand("a1i", [ph], wi(ps, ph),
     app("ax-mp", [H(0), app("ax-1", ph=ph, ps=ps)], ph=ph, ps=wi(ps, ph)))
hand("mp2", [ph, ps, wi(ph, wi(ps, ch))], ch,
     app("ax-mp", [H(1), app("ax-mp", [H(0), H(2)], ph=ph, ps=wi(ps, ch))], ph=ps, ps=ch))
hand("a2i", [wi(ph, wi(ps, ch))], wi(wi(ph, ps), wi(ph, ch)),
     app("ax-mp", [H(0), app("ax-2", ph=ph, ps=ps, ch=ch)],
         ph=wi(ph, wi(ps, ch)), ps=wi(wi(ph, ps), wi(ph, ch))))
hand("mpd", [wi(ph, ps), wi(ph, wi(ps, ch))], wi(ph, ch),
     app("ax-mp", [H(0), app("a2i", [H(1)], ph=ph, ps=ps, ch=ch)],
         ph=wi(ph, ps), ps=wi(ph, ch)))
hand("syl", [wi(ph, ps), wi(ps, ch)], wi(ph, ch),
     app("mpd", [H(0), app("a1i", [H(1)], ph=wi(ps, ch), ps=ph)], ph=ph, ps=ps, ch=ch))
hand("id", [], wi(ph, ph),
     app("mpd", [app("ax-1", ph=ph, ps=ph), app("ax-1", ph=ph, ps=wi(ph, ph))],
         ph=ph, ps=wi(ph, ph), ch=ph))
hand("a1d", [wi(ph, ps)], wi(ph, wi(ch, ps)),
     app("syl", [H(0), app("ax-1", ph=ps, ps=ch)], ph=ph, ps=ps, ch=wi(ch, ps)))
hand("mpi", [ps, wi(ph, wi(ps, ch))], wi(ph, ch),
     app("mpd", [app("a1i", [H(0)], ph=ps, ps=ph), H(1)], ph=ph, ps=ps, ch=ch))
hand("alimi", [wi(ph, ps)], wi(wal(x, ph), wal(x, ps)),
     app("ax-mp", [app("ax-gen", [H(0)], ph=wi(ph, ps), x=x), app("ax-4", x=x, ph=ph, ps=ps)],
         ph=wal(x, wi(ph, ps)), ps=wi(wal(x, ph), wal(x, ps))))
hand("simpli", [wa(ph, ps)], ph,
     app("ax-mp", [H(0), app("df-an1", ph=ph, ps=ps)], ph=wa(ph, ps), ps=ph))
hand("orci", [ph], wo(ph, ps),
     app("ax-mp", [H(0), app("df-or1", ph=ph, ps=ps)], ph=ph, ps=wo(ph, ps)))
hand("biimpi", [wb(ph, ps)], wi(ph, ps),
     app("ax-mp", [H(0), app("df-bi1", ph=ph, ps=ps)], ph=wb(ph, ps), ps=wi(ph, ps)))


# ------------------------------------------------------------ rendering


class Emitter:
    def __init__(self, rng):
        self.rng = rng
        self.use_wi2 = True

    def syn_steps(self, t):
        """Syntax proof of a term as a step tree (label, children)."""
        if isinstance(t, str):
            return (FLABEL[t], [])
        if (self.use_wi2 and t[0] == "wi" and not isinstance(t[2], str)
                and t[2][0] == "wi" and self.rng.random() < 0.3):
            a, (_, b, c) = t[1], t[2]
            return ("wi2", [self.syn_steps(a), self.syn_steps(b), self.syn_steps(c)])
        slots = ctor_slots(t[0])
        args = dict(zip(slots, t[1:]))
        return (t[0], [self.syn_steps(args[v]) for v in ctor_mand(t[0])])

    def proof_steps(self, proof, hyp_labels):
        if proof[0] == "hyp":
            return (hyp_labels[proof[1]], [])
        _, label, s, children = proof
        thm = LIB.thms[label]
        kids = []
        for kind, k in thm.mand():
            if kind == "f":
                kids.append(self.syn_steps(s[k]))
            else:
                kids.append(self.proof_steps(children[k], hyp_labels))
        return (label, kids)


def flatten(step, out):
    for c in step[1]:
        flatten(c, out)
    out.append(step[0])
    return out


def key_of(step):
    return (step[0], tuple(key_of(c) for c in step[1]))


def encode_num(n):
    s = chr(ord("A") + (n - 1) % 20)
    n = (n - 1) // 20
    while n > 0:
        s = chr(ord("U") + (n - 1) % 5) + s
        n = (n - 1) // 5
    return s


def compress(step, mand_labels):
    counts = {}

    def count(st):
        k = key_of(st)
        counts[k] = counts.get(k, 0) + 1
        if counts[k] == 1:
            for c in st[1]:
                count(c)

    count(step)
    labels = []
    for lab in flatten(step, []):
        if lab not in mand_labels and lab not in labels:
            labels.append(lab)
    index = {lab: i + 1 for i, lab in enumerate(mand_labels)}
    for i, lab in enumerate(labels):
        index[lab] = len(mand_labels) + i + 1
    base = len(mand_labels) + len(labels)
    saved = {}
    out = []

    def emit(st):
        k = key_of(st)
        if k in saved:
            out.append(encode_num(base + saved[k] + 1))
            return
        for c in st[1]:
            emit(c)
        out.append(encode_num(index[st[0]]))
        if st[1] and counts[k] > 1:
            out.append("Z")
            saved[k] = len(saved)

    emit(step)
    letters = "".join(out)
    chunks = [letters[i:i + 64] for i in range(0, len(letters), 64)]
    return ["("] + labels + [")"] + chunks


def fmt_stmt(label, kw, toks):
    return f"{label} {kw} " + " ".join(toks) + " $."


def header():
    lines = []
    lines.append("$( Fixture database in set.mm notation: propositional and")
    lines.append("   first-order core plus generated propositions. $)")
    lines.append("")
    lines.append("$( $j syntax 'wff'; syntax '|-' as 'wff'; $)")
    lines.append("")
    consts = ["(", ")", "->", "-.", "<->", "\\/", "/\\", "A.", "E.", "=", "e.", "wff", "set", "|-"]
    lines.append("  $c " + " ".join(consts) + " $.")
    lines.append("  $v " + " ".join(WFF_VARS) + " $.")
    for v in WFF_VARS:
        lines.append(f"  {FLABEL[v]} $f wff {v} $.")
    lines.append("  $v " + " ".join(SET_VARS) + " $.")
    for v in SET_VARS:
        lines.append(f"  {FLABEL[v]} $f set {v} $.")
    lines.append("")
    lines.append("  $( Constructors. $)")
    for c in CTOR_ORDER:
        lines.append("  " + fmt_stmt(c, "$a", ["wff"] + CTORS[c][1]))
    lines.append("")
    lines.append("  $( A syntax theorem; not a grammar production. $)")
    lines.append("  wi2 $p wff ( ph -> ( ps -> ch ) ) $= wph wps wch wi wi $.")
    lines.append("")
    return lines


def emit_axiom(thm):
    lines = []
    scoped = bool(thm.hyps or thm.dv)
    ind = "    " if scoped else "  "
    if scoped:
        lines.append("  ${")
    for (a, b) in sorted(thm.dv, key=lambda p: (FORDER[p[0]], FORDER[p[1]])):
        lines.append(f"{ind}$d {a} {b} $.")
    for i, h in enumerate(thm.hyps):
        lines.append(ind + fmt_stmt(f"{thm.label}.{i + 1}", "$e", ["|-"] + render(h)))
    lines.append(ind + fmt_stmt(thm.label, "$a", ["|-"] + render(thm.concl)))
    if scoped:
        lines.append("  $}")
    return lines


def emit_prop(label, hyps, concl, proof, dv, em, compressed):
    lines = ["  ${"]
    for (a, b) in sorted(dv, key=lambda p: (FORDER[p[0]], FORDER[p[1]])):
        lines.append(f"    $d {a} {b} $.")
    hyp_labels = [f"{label}.{i + 1}" for i in range(len(hyps))]
    for hl, h in zip(hyp_labels, hyps):
        lines.append("    " + fmt_stmt(hl, "$e", ["|-"] + render(h)))
    thm = Thm(label, hyps, concl, dv)
    steps = em.proof_steps(proof, hyp_labels)
    if compressed:
        mand = [FLABEL[v] for v in thm.vars] + hyp_labels
        body = compress(steps, mand)
    else:
        body = flatten(steps, [])
    lines.append(f"    {label} $p |- " + " ".join(render(concl)) + " $=")
    words = []
    for i in range(0, len(body), 12):
        words.append("      " + " ".join(body[i:i + 12]))
    lines.extend(words)
    lines[-1] += " $."
    lines.append("  $}")
    return lines, thm


# ------------------------------------------------------------ generator


class Gen:
    def __init__(self, rng):
        self.rng = rng

    def rand_term(self, tc, wvars, svars, depth, pool_terms):
        rng = self.rng
        if tc == "set":
            return rng.choice(svars if svars else SET_VARS)
        if pool_terms and rng.random() < 0.35:
            cands = [t for t in pool_terms if ttype(t) == "wff" and tsize(t) <= 5]
            if cands:
                return rng.choice(cands)
        if depth <= 0 or rng.random() < 0.45:
            return rng.choice(wvars)
        r = rng.random()
        if r < 0.45:
            return wi(self.rand_term("wff", wvars, svars, depth - 1, None),
                      self.rand_term("wff", wvars, svars, depth - 1, None))
        if r < 0.65:
            return wn(self.rand_term("wff", wvars, svars, depth - 1, None))
        if r < 0.73:
            return wa(self.rand_term("wff", wvars, svars, depth - 1, None),
                      self.rand_term("wff", wvars, svars, depth - 1, None))
        if r < 0.80:
            return wo(self.rand_term("wff", wvars, svars, depth - 1, None),
                      self.rand_term("wff", wvars, svars, depth - 1, None))
        if r < 0.86:
            return wb(self.rand_term("wff", wvars, svars, depth - 1, None),
                      self.rand_term("wff", wvars, svars, depth - 1, None))
        sv = svars if svars else SET_VARS[:2]
        if r < 0.93:
            return wal(rng.choice(sv), self.rand_term("wff", wvars, svars, depth - 1, None))
        if r < 0.97:
            return weq(rng.choice(sv), rng.choice(sv))
        return wel(rng.choice(sv), rng.choice(sv))

    def pick_theorem(self, lib_list):
        rng = self.rng
        r = rng.random()
        if r < 0.30:
            return LIB.thms["ax-mp"]
        if r < 0.45:
            return LIB.thms[rng.choice(["syl", "mpd", "a1i", "mpi", "a2i", "mp2", "a1d"])]
        if r < 0.65:
            return rng.choice(lib_list[-300:])
        return rng.choice(lib_list)

    def closers(self, ground, lib_list):
        """Prove a ground term directly by a hypothesis-free theorem."""
        rng = self.rng
        cands = [t for t in lib_list if not t.hyps]
        rng.shuffle(cands)
        for t in cands[:60]:
            s = {}
            if match(t.concl, ground, s):
                if all(v in s for v in t.vars):
                    pr = ("app", t.label, s, [])
                    try:
                        needed_dv(pr, set())
                    except ValueError:
                        continue
                    return pr
        return None

    def apply(self, thm, pool, wvars, svars, lib_list):
        rng = self.rng
        s = {}
        children = [None] * len(thm.hyps)
        order = sorted(range(len(thm.hyps)), key=lambda i: -tsize(thm.hyps[i]))
        pool_terms = [f[0] for f in pool]
        for i in order:
            h = thm.hyps[i]
            if all(v in s for v in tvars(h)):
                g = subst(h, s)
                hit = [f for f in pool if f[0] == g]
                if hit:
                    children[i] = hit[0][1]
                    continue
                pr = self.closers(g, lib_list)
                if pr is None:
                    return None
                children[i] = pr
                continue
            cands = []
            for f in pool:
                s2 = dict(s)
                if match(h, f[0], s2):
                    cands.append((f, s2))
            if not cands:
                return None
            f, s2 = rng.choice(cands)
            s = s2
            children[i] = f[1]
        for v in thm.vars:
            if v not in s:
                subs = []
                for t in pool_terms:
                    subterms(t, subs)
                s[v] = self.rand_term(VTYPE[v], wvars, svars, 2, subs)
        proof = ("app", thm.label, {v: s[v] for v in thm.vars}, children)
        try:
            needed_dv(proof, set())
        except ValueError:
            return None
        return subst(thm.concl, s), proof

    def proposition(self, lib_list):
        rng = self.rng
        wvars = rng.sample(WFF_VARS[:6], rng.choice([2, 2, 3, 3, 4]))
        svars = rng.sample(SET_VARS[:4], rng.choice([0, 0, 0, 1, 2]))
        nh = rng.choice([0, 1, 1, 1, 2, 2, 2, 3])
        hyps = []
        for _ in range(nh):
            h = self.rand_term("wff", wvars, svars, 2, None)
            if h not in hyps:
                hyps.append(h)
        pool = [(h, H(i)) for i, h in enumerate(hyps)]
        derived = []
        for _ in range(rng.randint(2, 7)):
            thm = self.pick_theorem(lib_list)
            r = self.apply(thm, pool, wvars, svars, lib_list)
            if r is None:
                continue
            term, proof = r
            if tsize(term) > 17 or any(f[0] == term for f in pool):
                continue
            pool.append((term, proof))
            derived.append((term, proof))
        if not derived:
            return None
        term, proof = derived[-1] if rng.random() < 0.7 else rng.choice(derived)
        used = sorted(set(hyp_uses(proof, [])))
        remap = {old: new for new, old in enumerate(used)}
        proof = renumber(proof, remap)
        new_hyps = [hyps[i] for i in used]
        if term in new_hyps:
            return None
        return new_hyps, term, proof


def hyp_uses(proof, acc):
    if proof[0] == "hyp":
        acc.append(proof[1])
    else:
        for c in proof[3]:
            hyp_uses(c, acc)
    return acc


def renumber(proof, remap):
    if proof[0] == "hyp":
        return ("hyp", remap[proof[1]])
    return ("app", proof[1], proof[2], [renumber(c, remap) for c in proof[3]])


def red_count(proof):
    if proof[0] == "hyp":
        return 1
    return 1 + sum(red_count(c) for c in proof[3])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--count", type=int, default=3200)
    ap.add_argument("--seed", type=int, default=20170101)
    ap.add_argument("--corrupt")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    em = Emitter(rng)
    lines = header()
    lines.append("  $( Axioms. $)")
    for a in AXIOMS:
        lines.extend(emit_axiom(a))
    lines.append("")
    lines.append("  $( Early propositions. $)")
    seen = set()
    props = []
    for (label, hyps, concl, proof, dv) in HAND:
        LIB.add(Thm(label, hyps, concl, dv))
        got = conclusion(proof, hyps)
        assert got == concl, label
        LIB.thms.pop(label)
        LIB.order.pop()
        dvs = needed_dv(proof, set())
        block, thm = emit_prop(label, hyps, concl, proof, dvs, em, compressed=(label == "mp2b"))
        lines.extend(block)
        LIB.add(thm)
        seen.add((tuple(hyps), concl))
        props.append(label)
    lines.append("")
    lines.append("  $( Generated propositions. $)")
    gen = Gen(rng)
    n = 0
    attempts = 0
    while n < args.count:
        attempts += 1
        r = gen.proposition(LIB.order)
        if r is None:
            continue
        hyps, concl, proof = r
        key = (tuple(hyps), concl)
        if key in seen:
            continue
        assert conclusion(proof, hyps) == concl
        dvs = needed_dv(proof, set())
        label = f"th{n + 1}"
        block, thm = emit_prop(label, hyps, concl, proof, dvs, em, compressed=rng.random() < 0.6)
        lines.extend(block)
        LIB.add(thm)
        seen.add(key)
        props.append(label)
        n += 1
    text = "\n".join(lines) + "\n"
    with open(args.out, "w") as fh:
        fh.write(text)
    print(f"wrote {len(props)} propositions after {attempts} attempts")
    if args.corrupt:
        corrupt(text, args.corrupt, random.Random(args.seed + 1))


def corrupt(text, path, rng):
    """Damage a seeded sample of proofs; verdicts come from the reference verifier."""
    out = []
    lines = text.split("\n")
    i = 0
    damaged = 0
    while i < len(lines):
        line = lines[i]
        if " $p |- " in line and line.strip().startswith("th") and rng.random() < 0.03:
            j = i + 1
            block = []
            while True:
                block.append(lines[j])
                if lines[j].endswith("$."):
                    break
                j += 1
            toks = " ".join(block).split()
            toks = toks[:-1]
            mode = rng.choice(["drop", "swap", "letter", "label"])
            if toks and toks[0] == "(":
                k = toks.index(")")
                letters = list("".join(toks[k + 1:]))
                pos = rng.randrange(len(letters))
                if mode in ("drop", "swap"):
                    del letters[pos]
                else:
                    c = letters[pos]
                    letters[pos] = "A" if c != "A" else "B"
                toks = toks[:k + 1] + ["".join(letters)]
            else:
                pos = rng.randrange(len(toks))
                if mode == "drop":
                    del toks[pos]
                elif mode == "swap" and pos + 1 < len(toks):
                    toks[pos], toks[pos + 1] = toks[pos + 1], toks[pos]
                else:
                    toks[pos] = "ax-1"
            out.append(line)
            out.append("      " + " ".join(toks) + " $.")
            damaged += 1
            i = j + 1
            continue
        out.append(line)
        i += 1
    with open(path, "w") as fh:
        fh.write("\n".join(out))
    print(f"damaged {damaged} proofs in {path}")


if __name__ == "__main__":
    main()
