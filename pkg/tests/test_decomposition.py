import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from raregion.decomposition import (BlockFamily, DecompositionError, DecompositionInput, assemble,
                                    check_b_intersection, check_cond6, check_cond7, check_prar,
                                    check_thm2, check_thm3)
from raregion.geometry import Box
from raregion.report import CERTIFIED, REFUTED

from conftest import EX1_F1, EX1_F2, EX3_F1, example3_dec, surf, two_block

COND7_CASE = (["1-(x1-1/2)^2-x2^2", "1-(x1+1/2)^2-x2^2"], ["1-(x1-1)^2-x3^2"], (0.25, 0, 0))


def verdicts(rep):
    return {c.name: c.verdict for c in rep.conditions}


@pytest.mark.parametrize("blocks,n", [
    (((1, 2), (1, 2)), 2),
    (((1,), (1, 2)), 2),
    (((1, 2),), 3),
    (((0, 1), (1, 2)), 2),
    ((), 2),
])
def test_block_family_rejects_malformed(blocks, n):
    with pytest.raises(DecompositionError):
        BlockFamily(blocks, n)


def test_block_family_shared():
    fam = BlockFamily(((1, 2, 3), (1, 2, 4), (4, 5)), 5)
    assert fam.shared(0, 1) == (1, 2)
    assert fam.shared(0, 2) == ()
    assert fam.shared_coords(1) == (1, 2, 4)
    assert fam.sizes == (3, 3, 2)


def test_inconsistent_seeds():
    fam = BlockFamily(((1, 2), (1, 3)), 3)
    s = (surf("A", EX1_F1, 3), surf("B", EX1_F2, 3))
    with pytest.raises(DecompositionError, match="inconsistent seeds"):
        DecompositionInput(s, fam, (0, 1), Box.cube(3, -2, 2), None, ((0, 0), (0.1, 0)))
    inp = DecompositionInput(s, fam, (0, 1), Box.cube(3, -2, 2), None, ((0, 0.5), (0, -0.25)))
    assert inp.seed == (0, 0.5, -0.25)


def test_prar_realization_fails_without_block_surface():
    fam = BlockFamily(((1, 2), (1, 3)), 3)
    inp = DecompositionInput((surf("A", EX1_F1, 3),), fam, (0,), Box.cube(3, -2, 2), (0, 0, 0))
    r = {c.name: c for c in check_prar(inp)}
    assert r["prar-1"].verdict == "fail"
    assert r["prar-4"].verdict == "skipped"


def test_prar_full_support_fails():
    inp = two_block(["1-(x1-1/2)^2"], [EX1_F2], (0, 0, 0))
    r = {c.name: c.verdict for c in check_prar(inp)}
    assert r["prar-3"] == "fail" and r["prar-2"] == "pass"


def test_prar_support_outside_block():
    inp = two_block([EX1_F1, "4-x3^2"], [EX1_F2], (0, 0, 0))
    r = {c.name: c.verdict for c in check_prar(inp)}
    assert r["prar-2"] == "fail"


def test_prar_block_region_duplicate_surface_fails(example1_dec):
    inp = example1_dec.with_extra_surface(surf("D", "2-2*(x1-1/2)^2-2*x2^2", 3), 0)
    r = {c.name: c.verdict for c in check_prar(inp)}
    assert r["prar-4"] == "fail"
    assert assemble(inp).overall == REFUTED


def test_b_intersection():
    inp = example3_dec()
    assert check_b_intersection(inp, 1).verdict == "fail"
    assert check_b_intersection(inp, 2).verdict == "pass"
    with pytest.raises(DecompositionError):
        check_b_intersection(inp, 4)


def test_example1_certified(example1_dec):
    rep = assemble(example1_dec, "thm1", 1)
    assert set(verdicts(rep).values()) == {"pass"}
    assert rep.overall == CERTIFIED and rep.exit_code == 0
    assert "agrees with cond-6 and cond-7" in check_thm2(example1_dec).notes


def test_aligned_refuted(aligned_dec):
    assert check_cond6(aligned_dec).verdict == "fail"
    t = check_thm2(aligned_dec)
    assert t.verdict == "fail"
    values = sorted({round(w.data["value"], 6) for w in t.witnesses})
    assert values == [-0.5, 1.5]
    rep = assemble(aligned_dec)
    assert rep.overall == REFUTED
    assert verdicts(rep)["direct-def1-cond2"] == "fail"


def test_cond7_refuted_by_non_normal_point():
    inp = two_block(*COND7_CASE)
    c7 = check_cond7(inp)
    assert c7.verdict == "fail"
    pts = np.array([w.points[0] for w in c7.witnesses])
    assert np.allclose(np.abs(pts), [0, np.sqrt(3) / 2], atol=1e-9)
    assert check_thm2(inp).verdict == "fail"
    assert verdicts(assemble(inp))["direct-def1-cond2"] == "fail"


def test_thm2_skipped_for_large_blocks():
    assert check_thm2(example3_dec()).verdict == "skipped"


def test_example3_certified_in_thm3():
    rep = assemble(example3_dec(), "thm3", 2)
    assert set(verdicts(rep).values()) == {"pass"}, rep.table()


def test_example3_r0_refuted_by_cond9():
    c8, c9 = check_thm3(example3_dec("0"), 2)
    assert c9.verdict == "fail"
    assert all(abs(abs(w.points[0][1]) - 1) < 1e-6 for w in c9.witnesses)


def test_mode_errors(example1_dec):
    with pytest.raises(DecompositionError):
        assemble(example1_dec, "thm9")
    with pytest.raises(DecompositionError):
        assemble(example1_dec, "thm1", 2)


CASES = [
    two_block([EX1_F1], [EX1_F2], (0, 0, 0)),
    two_block([EX1_F1], ["1-(x1-1/2)^2-x3^2"], (0.5, 0, 0)),
    two_block(*COND7_CASE),
]


def witness_set(rep):
    def pts(w):
        return frozenset(tuple(np.round(np.asarray(p, float), 6) + 0.0) for p in w.points)
    return {(c.name, pts(w)) for c in rep.conditions for w in c.witnesses}


@settings(max_examples=12)
@given(st.sampled_from(range(len(CASES))), st.randoms(use_true_random=False))
def test_permutation_invariance(k, rnd):
    inp = CASES[k]
    so = list(range(len(inp.surfaces)))
    rnd.shuffle(so)
    bo = [1, 0] if rnd.random() < 0.5 else [0, 1]
    a, b = assemble(inp), assemble(inp.permuted(so, bo))
    assert a.overall == b.overall
    assert verdicts(a) == verdicts(b)
    assert witness_set(a) == witness_set(b)


@pytest.mark.parametrize("k", range(len(CASES)))
@pytest.mark.parametrize("scale", ["1", "3"])
def test_duplicate_surface_never_turns_fail_into_pass(k, scale):
    inp = CASES[k]
    base = verdicts(assemble(inp))
    for j, s in enumerate(inp.surfaces):
        dup = s.scaled(int(scale))
        more = verdicts(assemble(inp.with_extra_surface(dup, inp.assignment[j])))
        for name in ("cond-6", "cond-7"):
            if base[name] == "fail":
                assert more[name] == "fail", (j, name)


def test_certified_implies_full_rank_intersections(example1_dec):
    from raregion.region import analyze
    assert assemble(example1_dec).overall == CERTIFIED
    an = analyze(example1_dec.region_spec())
    ranks = [r for r, a in zip(an.sample_ranks, an.active) if len(a) > 1]
    assert ranks and all(r[0] == 2 for r in ranks)


def test_chain_passes_but_surface_misses_closure():
    # the inner circle of block 1 sits at x1 < -1/2 while block 2 confines x1 to (1/2, 3/2)
    inp = two_block(["7/4-x1^2-x2^2-x1+x2", "x1^2+x2^2+2*x1-x2+1"], ["-7/4-x1^2-x3^2+2*x1-2*x3"],
                    (0.875, 0.25, -1.0), lo=-3, hi=3)
    v = verdicts(assemble(inp))
    assert all(v[k] == "pass" for k in v if not k.startswith("direct"))
    assert v["direct-def1-cond1"] == "fail"
    assert assemble(inp).overall == REFUTED
