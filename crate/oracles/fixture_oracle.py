"""Independent reference computations for the frozen test values.

Everything here is computed from textbook definitions with exact fractions
(and math.erfc for p-values). It shares no code with the Rust crates.
Run: python3 oracles/fixture_oracle.py [--write-fixture]
"""
import csv
import itertools
import math
import sys
from fractions import Fraction as F
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
LABELS = ["negative", "neutral", "positive"]
TERMS = ["adamant", "adherent", "agitated", "aggressive", "angry", "compliant",
         "cooperative", "malingering", "non_adherent", "not_agitated",
         "non_compliant", "pleasant", "uncooperative"]

# (negative, neutral, positive) vote counts per sentence s01..s26
PHYS = [(0, 10, 0), (1, 8, 1), (0, 6, 4), (0, 4, 6), (6, 4, 0), (3, 7, 0),
        (9, 1, 0), (4, 6, 0), (8, 2, 0), (5, 5, 0), (0, 5, 5), (0, 7, 3),
        (0, 3, 7), (0, 6, 4), (7, 3, 0), (6, 4, 0), (8, 2, 0), (5, 4, 1),
        (0, 4, 6), (0, 8, 2), (10, 0, 0), (7, 3, 0), (0, 3, 7), (0, 1, 9),
        (9, 1, 0), (8, 2, 0)]
NONPHYS = [(4, 6, 0), (6, 4, 0), (0, 3, 7), (0, 2, 8), (8, 2, 0), (5, 5, 0),
           (10, 0, 0), (7, 3, 0), (9, 1, 0), (7, 3, 0), (0, 4, 6), (0, 5, 5),
           (0, 2, 8), (0, 3, 7), (9, 1, 0), (8, 2, 0), (9, 1, 0), (7, 2, 1),
           (0, 3, 7), (0, 4, 6), (10, 0, 0), (9, 1, 0), (0, 0, 10), (0, 1, 9),
           (10, 0, 0), (9, 1, 0)]
SIDS = [f"s{i:02d}" for i in range(1, 27)]
TERM_OF = {sid: TERMS[i // 2] for i, sid in enumerate(SIDS)}


def write_fixture():
    rows = []
    for idx, sid in enumerate(SIDS):
        for prefix, counts in (("P", PHYS[idx]), ("N", NONPHYS[idx])):
            labels = [LABELS[j] for j in range(3) for _ in range(counts[j])]
            # rotate so raters do not always vote in the same order
            shift = idx % 10
            labels = labels[shift:] + labels[:shift]
            group = "physician" if prefix == "P" else "non-physician"
            for r, lab in enumerate(labels, start=1):
                rows.append((sid, f"{prefix}{r:02d}", group, lab))
    path = ROOT / "fixtures/synthetic/annotations.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sentence_id", "rater_id", "group", "label"])
        w.writerows(rows)
    print(f"wrote {len(rows)} records to {path}")


def fleiss(rows):
    n = sum(rows[0])
    N = len(rows)
    k = len(rows[0])
    P = [F(sum(c * c for c in r) - n, n * (n - 1)) for r in rows]
    pbar = sum(P) / N
    p = [F(sum(r[j] for r in rows), N * n) for j in range(k)]
    pe = sum(x * x for x in p)
    kappa = (pbar - pe) / (1 - pe)
    # Fleiss, Nee & Landis large-sample variance under the null
    s = sum(x * (1 - x) for x in p)
    var = F(2, N * n * (n - 1)) * (s * s - sum(x * (1 - x) * (1 - 2 * x) for x in p)) / (s * s)
    z = float(kappa) / math.sqrt(float(var))
    pval = math.erfc(abs(z) / math.sqrt(2))
    return kappa, pbar, pe, z, pval


def cohen(a, b):
    n = len(a)
    po = F(sum(x == y for x, y in zip(a, b)), n)
    cats = sorted(set(a) | set(b))
    pa = {c: F(a.count(c), n) for c in cats}
    pb = {c: F(b.count(c), n) for c in cats}
    pe = sum(pa[c] * pb[c] for c in cats)
    kappa = (po - pe) / (1 - pe)
    # Fleiss, Cohen & Everitt null standard error
    var0 = (pe + pe * pe - sum(pa[c] * pb[c] * (pa[c] + pb[c]) for c in cats)) / (n * (1 - pe) ** 2)
    z = float(kappa) / math.sqrt(float(var0))
    return kappa, po, pe, z, math.erfc(abs(z) / math.sqrt(2))


def unify(counts):
    m = max(counts)
    tied = [j for j in range(3) if counts[j] == m]
    if len(tied) == 1:
        return tied[0], F(m, sum(counts))
    assert 1 in tied, counts
    return 1, F(m, sum(counts))


def per_class(gold, pred):
    out = []
    for c in range(3):
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        prec = F(tp, tp + fp) if tp + fp else F(0)
        rec = F(tp, tp + fn) if tp + fn else F(0)
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else F(0)
        out.append((prec, rec, f1, tp + fn))
    return out


def macro(gold, pred):
    pc = [x for x in per_class(gold, pred) if x[3] > 0]
    return tuple(sum(x[i] for x in pc) / len(pc) for i in range(3))


def show(name, value):
    if isinstance(value, F):
        print(f"{name} = {value} = {float(value)!r}")
    else:
        print(f"{name} = {value!r}")


def small_examples():
    print("== small operation examples")
    k, pbar, pe, z, p = fleiss([(3, 0, 0), (0, 3, 0), (2, 1, 0), (1, 1, 1)])
    show("fleiss4x3.kappa", k); show("fleiss4x3.pbar", pbar); show("fleiss4x3.pe", pe)
    show("fleiss4x3.z", z); show("fleiss4x3.p", p)
    a = [0, 0, 1, 2]; b = [0, 1, 1, 2]
    k, po, pe, z, p = cohen(a, b)
    show("cohen.kappa", k); show("cohen.po", po); show("cohen.pe", pe); show("cohen.z", z); show("cohen.p", p)
    show("unify.6-3-1", unify((6, 3, 1)))
    show("ta.17.100", math.floor(F(17) * (1 - F(85, 100)) / F(85, 100) + F(1, 2)))
    show("ta.368", math.floor(F(368) * (1 - F(85, 100)) / F(85, 100) + F(1, 2)))
    show("split.0.3x39", math.floor(F(3, 10) * 39 + F(1, 2)))
    show("split.0.7x39", math.floor(F(7, 10) * 39 + F(1, 2)))
    show("combos.1-1-1", len(list(itertools.product(range(2), range(2), range(2)))))
    show("combos.2-3-2", len(list(itertools.product(range(3), range(4), range(3)))))
    gold = [0, 0, 1, 2]; pred = [0, 1, 1, 2]
    pc = per_class(gold, pred)
    show("metrics.per_class_f1", [str(x[2]) for x in pc])
    mp, mr, mf = macro(gold, pred)
    show("metrics.macro_p", mp); show("metrics.macro_r", mr); show("metrics.macro_f1", mf)
    gold = [0, 2, 1, 1]; pred = [1, 1, 1, 0]
    pol = [i for i, g in enumerate(gold) if g != 1]
    neu = [i for i, g in enumerate(gold) if g == 1]
    show("too_neutral", F(sum(pred[i] == 1 for i in pol), len(pol)))
    show("polarized", F(sum(pred[i] != 1 for i in neu), len(neu)))
    # mock that answers neutral unless a negative example is present, else echoes gold
    pool = (2, 3, 2)
    scores = {}
    val_gold = [0, 0, 1, 1, 1, 2]
    for c in itertools.product(*(range(x + 1) for x in pool)):
        pred = val_gold if c[0] >= 1 else [1] * len(val_gold)
        scores[c] = macro(val_gold, pred)[2]
    best = max(scores.values())
    winners = sorted([c for c, s in scores.items() if s == best], key=lambda c: (sum(c), c))
    show("biased.search.winner", winners[0]); show("biased.search.best", best)
    show("biased.search.n_ge1", sum(1 for c in scores if c[0] >= 1))


def synthetic():
    print("== synthetic annotation fixture")
    allrows = [tuple(p + q for p, q in zip(a, b)) for a, b in zip(PHYS, NONPHYS)]
    for name, rows in (("all", allrows), ("phys", PHYS), ("nonphys", NONPHYS)):
        k, pbar, pe, z, p = fleiss(rows)
        show(f"fleiss.{name}.kappa", k); show(f"fleiss.{name}.z", z); show(f"fleiss.{name}.p", p)
    up = [unify(c) for c in PHYS]
    un = [unify(c) for c in NONPHYS]
    k, po, pe, z, p = cohen([x[0] for x in up], [x[0] for x in un])
    show("cohen.kappa", k); show("cohen.po", po); show("cohen.z", z); show("cohen.p", p)
    ties = [(SIDS[i], g) for g, U, C in (("phys", up, PHYS), ("nonphys", un, NONPHYS))
            for i, c in enumerate(C) if sorted(c)[-1] == sorted(c)[-2]]
    show("ties", ties)
    base = len(SIDS)
    for t in (F(7, 10), F(8, 10), F(9, 10)):
        n = sum(1 for a, b in zip(up, un) if max(a[1], b[1]) >= t)
        show(f"stratify.{t}", n)
    show("stratify.baseline", base)
    show("no_agreement", [SIDS[i] for i in range(base) if up[i][0] != un[i][0]])
    for gname, U in (("phys", up), ("nonphys", un)):
        for j, lab in enumerate(LABELS):
            vals = [a for l, a in U if l == j]
            show(f"table2.{gname}.{lab}", (sum(vals) / len(vals)) if vals else None)
        counts = [sum(1 for l, _ in U if l == j) for j in range(3)]
        show(f"figure1.{gname}.baseline.counts", counts)
        show(f"figure1.{gname}.baseline.neutral_share", F(counts[1], base))
    for gname, U in (("phys", up), ("nonphys", un)):
        for term in TERMS:
            vals = [U[i][1] for i, sid in enumerate(SIDS) if TERM_OF[sid] == term]
            show(f"word.{gname}.{term}", sum(vals) / len(vals))
        clinical = [U[i][1] for i, sid in enumerate(SIDS)
                    if TERM_OF[sid] in ("compliant", "adherent", "malingering")]
        show(f"word.{gname}.clinical_subset", sum(clinical) / len(clinical))
    # test set: zero-shot under the negative-example-biased mock predicts all neutral
    tests = list(csv.DictReader((ROOT / "fixtures/synthetic/test_set.csv").open()))
    for col in ("physician", "non_physician"):
        gold = [LABELS.index(r[col]) for r in tests]
        mp, mr, mf = macro(gold, [1] * len(gold))
        show(f"test.allneutral.{col}.macro_f1", mf)
        show(f"test.allneutral.{col}.macro_p", mp)
        show(f"test.allneutral.{col}.macro_r", mr)


if __name__ == "__main__":
    if "--write-fixture" in sys.argv:
        write_fixture()
    small_examples()
    synthetic()
