#!/usr/bin/env python3
"""Reference Metamath verifier used to freeze expected verdicts for fixtures.

Implements the classic stack-machine check over symbol strings, with both
normal and compressed proofs. Unlike a strict verifier it does not stop at
the first bad proof: every $p statement gets a verdict line

    <label>\t<ok|fail>

written to stdout (or to --out). Parse-level errors abort the run.
"""

import argparse
import sys


class MMError(Exception):
    pass


def tokenize(text):
    toks = text.split()
    out = []
    i = 0
    while i < len(toks):
        t = toks[i]
        if t == "$(":
            while i < len(toks) and toks[i] != "$)":
                i += 1
            if i == len(toks):
                raise MMError("unterminated comment")
            i += 1
            continue
        out.append(t)
        i += 1
    return out


class Frame:
    def __init__(self):
        self.c = set()
        self.v = set()
        self.d = set()
        self.f = []  # (var, typecode, label)
        self.f_labels = {}
        self.e = []  # (stmt, label)
        self.e_labels = {}


class FrameStack(list):
    def lookup_c(self, tok):
        return any(tok in fr.c for fr in self)

    def lookup_v(self, tok):
        return any(tok in fr.v for fr in self)

    def lookup_f(self, var):
        for fr in reversed(self):
            if var in fr.f_labels:
                return fr.f_labels[var]
        return None

    def lookup_d(self, x, y):
        pair = (min(x, y), max(x, y))
        return any(pair in fr.d for fr in self)

    def make_assertion(self, stmt):
        e_hyps = [e for fr in self for (e, _) in fr.e]
        mand = set()
        for hyp in e_hyps + [stmt]:
            for tok in hyp[1:]:
                if self.lookup_v(tok):
                    mand.add(tok)
        dvs = set()
        for fr in self:
            for (x, y) in fr.d:
                if x in mand and y in mand:
                    dvs.add((x, y))
        # floating and essential hyps interleave by database position
        ordered = []
        for fr in self:
            for item in fr.order:
                kind, label = item
                if kind == "f":
                    var, tc = fr.f_by_label[label]
                    if var in mand:
                        ordered.append(("f", label, [tc, var]))
                else:
                    ordered.append(("e", label, fr.e_by_label[label]))
        return (dvs, ordered, stmt)


class Verifier:
    def __init__(self):
        self.fs = FrameStack()
        self.labels = {}
        self.verdicts = []

    def add_frame(self):
        fr = Frame()
        fr.order = []
        fr.f_by_label = {}
        fr.e_by_label = {}
        self.fs.append(fr)

    def read(self, toks):
        self.add_frame()
        i = 0
        label = None
        n = len(toks)

        def read_stmt(j):
            out = []
            while j < n and toks[j] != "$.":
                out.append(toks[j])
                j += 1
            if j == n:
                raise MMError("missing $.")
            return out, j + 1

        while i < n:
            t = toks[i]
            i += 1
            if t == "$c":
                stmt, i = read_stmt(i)
                for c in stmt:
                    if self.fs.lookup_c(c) or self.fs.lookup_v(c):
                        raise MMError("redeclared " + c)
                    self.fs[-1].c.add(c)
            elif t == "$v":
                stmt, i = read_stmt(i)
                for v in stmt:
                    if self.fs.lookup_c(v) or self.fs.lookup_v(v):
                        raise MMError("redeclared " + v)
                    self.fs[-1].v.add(v)
            elif t == "$f":
                stmt, i = read_stmt(i)
                if label is None or len(stmt) != 2:
                    raise MMError("bad $f")
                tc, var = stmt
                fr = self.fs[-1]
                fr.f.append((var, tc, label))
                fr.f_labels[var] = label
                fr.f_by_label[label] = (var, tc)
                fr.order.append(("f", label))
                self.labels[label] = ("$f", [tc, var])
                label = None
            elif t == "$e":
                stmt, i = read_stmt(i)
                if label is None:
                    raise MMError("bad $e")
                fr = self.fs[-1]
                fr.e.append((stmt, label))
                fr.e_labels[tuple(stmt)] = label
                fr.e_by_label[label] = stmt
                fr.order.append(("e", label))
                self.labels[label] = ("$e", stmt)
                label = None
            elif t == "$a":
                stmt, i = read_stmt(i)
                self.labels[label] = ("$a", self.fs.make_assertion(stmt))
                label = None
            elif t == "$p":
                stmt, i = read_stmt(i)
                if "$=" not in stmt:
                    raise MMError("$p without $=")
                k = stmt.index("$=")
                body, proof = stmt[:k], stmt[k + 1:]
                ok = True
                try:
                    self.verify(label, body, proof)
                except MMError:
                    ok = False
                self.verdicts.append((label, ok))
                self.labels[label] = ("$p", self.fs.make_assertion(body))
                label = None
            elif t == "$d":
                stmt, i = read_stmt(i)
                for a in range(len(stmt)):
                    for b in range(a + 1, len(stmt)):
                        x, y = stmt[a], stmt[b]
                        if x == y:
                            raise MMError("repeated $d variable")
                        self.fs[-1].d.add((min(x, y), max(x, y)))
            elif t == "${":
                self.add_frame()
            elif t == "$}":
                self.fs.pop()
                if not self.fs:
                    raise MMError("unbalanced $}")
            elif t[0] != "$":
                label = t
            else:
                raise MMError("unknown keyword " + t)
        if len(self.fs) != 1:
            raise MMError("unclosed ${")

    def active_hyp(self, label):
        for fr in self.fs:
            if label in fr.f_by_label or label in fr.e_by_label:
                return True
        return False

    def apply_step(self, label, stack, stat_dvs_ok):
        kind, data = self.labels[label]
        if kind in ("$f", "$e"):
            if not self.active_hyp(label):
                raise MMError("inactive hypothesis " + label)
            stack.append(list(data))
            return
        dvs, hyps, concl = data
        npop = len(hyps)
        if len(stack) < npop:
            raise MMError("stack underflow")
        base = len(stack) - npop
        subst = {}
        for k, (hk, hl, hs) in enumerate(hyps):
            entry = stack[base + k]
            if hk == "f":
                if entry[0] != hs[0]:
                    raise MMError("typecode mismatch")
                subst[hs[1]] = entry[1:]
        for k, (hk, hl, hs) in enumerate(hyps):
            entry = stack[base + k]
            if hk == "e":
                inst = [hs[0]]
                for tok in hs[1:]:
                    inst.extend(subst.get(tok, [tok]))
                if inst != entry:
                    raise MMError("hypothesis mismatch")
        for (x, y) in dvs:
            xv = [t for t in subst[x] if self.fs.lookup_v(t)]
            yv = [t for t in subst[y] if self.fs.lookup_v(t)]
            for a in xv:
                for b in yv:
                    if a == b or not self.fs.lookup_d(a, b):
                        raise MMError("disjoint violation")
        del stack[base:]
        out = [concl[0]]
        for tok in concl[1:]:
            out.extend(subst.get(tok, [tok]))
        stack.append(out)

    def verify(self, label, stmt, proof):
        if not proof:
            raise MMError("empty proof")
        stack = []
        if proof[0] == "(":
            k = proof.index(")")
            plabels = proof[1:k]
            letters = "".join(proof[k + 1:])
            dvs, mand, _ = self.fs.make_assertion(stmt)
            hyp_labels = [hl for (_, hl, _) in mand]
            all_labels = hyp_labels + plabels
            saved = []
            cur = 0
            for ch in letters:
                if "U" <= ch <= "Y":
                    cur = cur * 5 + (ord(ch) - ord("U") + 1)
                elif "A" <= ch <= "T":
                    cur = cur * 20 + (ord(ch) - ord("A") + 1)
                    idx = cur - 1
                    cur = 0
                    if idx < len(all_labels):
                        lab = all_labels[idx]
                        if lab not in self.labels:
                            raise MMError("unknown label")
                        self.apply_step(lab, stack, None)
                    elif idx < len(all_labels) + len(saved):
                        stack.append(list(saved[idx - len(all_labels)]))
                    else:
                        raise MMError("reference out of range")
                elif ch == "Z":
                    if not stack or cur != 0:
                        raise MMError("bad Z")
                    saved.append(list(stack[-1]))
                else:
                    raise MMError("bad compressed char")
            if cur != 0:
                raise MMError("dangling digits")
        else:
            for lab in proof:
                if lab not in self.labels:
                    raise MMError("unknown label " + lab)
                self.apply_step(lab, stack, None)
        if len(stack) != 1:
            raise MMError("stack size")
        if stack[0] != stmt:
            raise MMError("wrong conclusion")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("database")
    ap.add_argument("--out")
    args = ap.parse_args()
    with open(args.database, encoding="utf-8") as fh:
        toks = tokenize(fh.read())
    v = Verifier()
    v.read(toks)
    lines = "".join(f"{lab}\t{'ok' if ok else 'fail'}\n" for lab, ok in v.verdicts)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    bad = sum(1 for _, ok in v.verdicts if not ok)
    print(f"{len(v.verdicts)} proofs, {bad} failed", file=sys.stderr)


if __name__ == "__main__":
    main()
