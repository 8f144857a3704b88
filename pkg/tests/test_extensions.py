import itertools

import pytest

from helpers import brute_force_h2_count

from etalebench.extensions import (
    CapExceeded,
    ExtensionError,
    _solve_coboundary,
    check_split_section,
    classify_extensions,
    extension_obstruction,
    find_extension_with_outer_action,
    outer_homs,
)
from etalebench.groupoid import GroupoidHom, ObjectGraph, action_groupoid, point_groupoid
from etalebench.groups import FiniteGroup, cyclic, dihedral, direct_product, identity_map, symmetric, trivial_group


def involutions(G):
    return sum(1 for g in G if g != G.identity and G.mul(g, g) == G.identity)


@pytest.mark.parametrize("Q,C,count", [
    (cyclic(2), cyclic(2), 2),
    (cyclic(3), cyclic(3), 3),
    (cyclic(2), cyclic(3), 1),
    (cyclic(2), cyclic(4), 2),
    (dihedral(2), cyclic(2), 8),
])
def test_trivial_action_counts(Q, C, count):
    classes = classify_extensions(Q, C)
    assert len(classes) == count == brute_force_h2_count(Q, C)
    for ec in classes:
        assert len(ec.group) == len(Q) * len(C)
        assert ec.group.validate() == []
        # C sits in the centre under the trivial action
        assert all((a, Q.identity) in ec.group.center for a in C)


def test_z2_by_z2_realizes_z4_and_klein():
    orders = sorted(max(E.group.order_of(g) for g in E.group) for E in classify_extensions(cyclic(2), cyclic(2)))
    assert orders == [2, 4]


def test_inversion_action_on_z3_is_split_only():
    Q, C = cyclic(2), cyclic(3)
    inv = {0: identity_map(C), 1: {a: (-a) % 3 for a in C}}
    classes = classify_extensions(Q, C, inv)
    assert len(classes) == 1
    assert not classes[0].group.is_abelian()        # S3


def test_inversion_action_on_z4_gives_dihedral_and_quaternion():
    Q, C = cyclic(2), cyclic(4)
    inv = {0: identity_map(C), 1: {a: (-a) % 4 for a in C}}
    classes = classify_extensions(Q, C, inv)
    assert sorted(involutions(E.group) for E in classes) == [1, 5]


def test_count_invariant_under_relabelling():
    Q = cyclic(3)
    names = {0: "e", 1: "x", 2: "xx"}
    Qr = FiniteGroup(names.values(), {(names[a], names[b]): names[Q.mul(a, b)] for a in Q for b in Q})
    assert len(classify_extensions(Qr, cyclic(3))) == len(classify_extensions(Q, cyclic(3)))


def test_non_abelian_coefficients_rejected():
    with pytest.raises(ExtensionError, match="abelian"):
        classify_extensions(cyclic(2), symmetric(3))


def test_bad_action_rejected():
    C = cyclic(3)
    with pytest.raises(ExtensionError):
        classify_extensions(cyclic(2), C, {0: identity_map(C), 1: {0: 0, 1: 1, 2: 1}})


def test_cocycle_cap():
    with pytest.raises(CapExceeded):
        classify_extensions(dihedral(2), cyclic(2), max_nodes=3)


# -- obstruction -------------------------------------------------------------


@pytest.mark.parametrize("Q,N", [(cyclic(2), cyclic(3)), (cyclic(2), dihedral(2)), (cyclic(3), dihedral(2)),
                                 (cyclic(2), cyclic(4))])
def test_abelian_kernel_always_vanishes(Q, N):
    for psi in outer_homs(Q, N):
        ob = extension_obstruction(Q, N, psi)
        assert ob.vanishes
        assert set(ob.cocycle.values()) == {N.identity}
        assert find_extension_with_outer_action(Q, N, psi) is not None


def test_s3_is_complete():
    Q, N = cyclic(2), symmetric(3)
    homs = outer_homs(Q, N)
    assert len(homs) == 1                         # Out(S3) = 1
    ob = extension_obstruction(Q, N, homs[0])
    E = find_extension_with_outer_action(Q, N, homs[0])
    assert ob.vanishes and E is not None and len(E) == 12 and E.validate() == []


def test_witness_bounds_the_cocycle():
    Q, N = cyclic(2), dihedral(4)
    for psi in outer_homs(Q, N):
        ob = extension_obstruction(Q, N, psi)
        assert ob.vanishes == (find_extension_with_outer_action(Q, N, psi) is not None)
        if ob.vanishes:
            b, phi = ob.witness, ob.lifts
            for q1, q2, q3 in itertools.product(Q.elements, repeat=3):
                v = N.mul(phi[q1][b[q2, q3]], N.inv(b[Q.mul(q1, q2), q3]))
                v = N.mul(N.mul(v, b[q1, Q.mul(q2, q3)]), N.inv(b[q1, q2]))
                assert v == ob.cocycle[q1, q2, q3]


def test_nonzero_three_class_has_no_witness():
    # k(1,1,1) = 1, zero elsewhere, generates H^3(Z/2, Z/2)
    Q = N = cyclic(2)
    lifts = {q: identity_map(N) for q in Q}
    k = {t: (1 if t == (1, 1, 1) else 0) for t in itertools.product(Q.elements, repeat=3)}
    assert _solve_coboundary(Q, N, lifts, k, [0, 1], 10_000) is None
    zero = {t: 0 for t in k}
    assert _solve_coboundary(Q, N, lifts, zero, [0, 1], 10_000) is not None


def test_psi_not_a_hom_rejected():
    Q, N = cyclic(3), dihedral(2)
    # swap two involutions on the generator: order 2 in Out, cannot be the image of order 3
    swap = {(0, 0): (0, 0), (1, 0): (0, 1), (0, 1): (1, 0), (1, 1): (1, 1)}
    psi = {0: identity_map(N), 1: swap, 2: swap}
    with pytest.raises(ExtensionError, match="not a homomorphism"):
        extension_obstruction(Q, N, psi)


def test_obstruction_cap():
    Q, N = dihedral(2), cyclic(4)
    with pytest.raises(CapExceeded):
        extension_obstruction(Q, N, outer_homs(Q, N)[0], max_nodes=1)


# -- split sections ----------------------------------------------------------


def one_object(G):
    return action_groupoid(G, ObjectGraph(["*"]), lambda g, x: x, name=G.name)


def quotient_hom(H, G, q):
    return GroupoidHom(one_object(H), one_object(G), {"*": "*"}, {(h, "*"): (q(h), "*") for h in H})


def test_split_extension_has_section():
    E = classify_extensions(cyclic(2), cyclic(2))
    split = next(ec for ec in E if all(v == ec.zero for v in ec.cocycle.values()))
    phi = quotient_hom(split.group, cyclic(2), lambda x: x[1])
    assert check_split_section(phi)


def test_z4_onto_z2_has_set_section():
    assert check_split_section(quotient_hom(cyclic(4), cyclic(2), lambda a: a % 2))


def test_non_surjective_has_no_section():
    phi = quotient_hom(trivial_group(), cyclic(2), lambda a: 0)
    assert check_split_section(phi) is False


def test_kernel_mismatch_rejected(A):
    PT = point_groupoid()
    phi = GroupoidHom(A, PT, {x: "*" for x in A.objects}, {g: PT.arrows[0] for g in A.arrows})
    with pytest.raises(ExtensionError, match="kernel mismatch"):
        check_split_section(phi)


def test_product_extension_section():
    H = direct_product(cyclic(3), cyclic(2))
    assert check_split_section(quotient_hom(H, cyclic(2), lambda x: x[1]))
