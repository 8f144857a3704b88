import math

import numpy as np
import pytest

from etalebench.geometry import (
    Flat,
    GeometryError,
    IsometryElement,
    Sphere,
    enumerate_isometries,
    invert_word,
    join_words,
    make_geometry,
    parse_letters,
    reflection,
    rotation_2d,
    rotation_z,
    translation,
    word_element,
)


def test_lattice_ball_has_25_translations():
    G = enumerate_isometries({"a": translation([1, 0]), "b": translation([0, 1])}, 3)
    pts = sorted(tuple(np.round(g.translation).astype(int)) for g in G.elements)
    assert len(G) == 25
    assert pts == sorted((p, q) for p in range(-3, 4) for q in range(-3, 4) if abs(p) + abs(q) <= 3)


def test_rotation_group_closes():
    assert len(enumerate_isometries({"a": rotation_z(2 * math.pi / 3)}, 3)) == 3


def test_two_mirrors_at_bound_two():
    G = enumerate_isometries({"a": reflection([1, 0], 0.0), "b": reflection([1, 0], 1.0)}, 2)
    expected = [IsometryElement.identity(2), reflection([1, 0], 0.0), reflection([1, 0], 1.0),
                translation([2, 0]), translation([-2, 0])]
    assert len(G) == 5
    assert all(e in G for e in expected)


def test_words_compose_left_to_right():
    gens = {"a": reflection([1, 0], 0.0), "b": reflection([1, 0], 1.0)}
    # b*a = b ∘ a: x -> 2 - (-x) = x + 2
    assert word_element("b*a", gens) == translation([2, 0])
    assert word_element("a*b", gens) == translation([-2, 0])
    assert word_element("a^2", gens).is_identity()


def test_word_helpers():
    assert parse_letters("a^3*b^-1") == [("a", 3), ("b", -1)]
    assert parse_letters("id") == []
    assert join_words("a*b", "b^-1*a") == "a^2"
    assert invert_word("a^3*b") == "b^-1*a^-3"
    with pytest.raises(GeometryError):
        parse_letters("a**b")


def test_unknown_generator_and_out_of_ball():
    gens = {"a": translation([1, 0])}
    with pytest.raises(GeometryError, match="unknown generator"):
        word_element("c", gens)
    G = enumerate_isometries(gens, 2)
    with pytest.raises(GeometryError, match="not in the enumerated group"):
        G.element("a^3")


def test_non_orthogonal_rejected():
    with pytest.raises(GeometryError, match="not orthogonal"):
        IsometryElement(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), "bad")


def test_inverse_and_conjugate():
    rng = np.random.default_rng(0)
    g = rotation_2d(0.7).compose(translation(rng.normal(size=2)))
    assert g.compose(g.inverse()).is_identity()
    t = translation([1, 0])
    assert t.conjugate(rotation_2d(math.pi / 2)) == translation([0, 1])


def test_equality_tolerates_rounding():
    r = rotation_2d(2 * math.pi / 3)
    assert r.compose(r).compose(r).is_identity()
    assert len({r, r.compose(r).compose(r).compose(r)}) == 1


def test_make_geometry():
    assert make_geometry("flat").ambient == 2
    assert make_geometry("flat", 3).ambient == 3
    assert make_geometry("sphere").ambient == 3
    with pytest.raises(GeometryError):
        make_geometry("hyperbolic")
    with pytest.raises(GeometryError):
        Flat(4)


def test_sphere_exp_log_round_trip():
    S = Sphere()
    rng = np.random.default_rng(1)
    x = S.normalize(rng.normal(size=(50, 3)))
    v = S.project(x, rng.normal(size=(50, 3)))
    v *= (rng.uniform(0, 1.4, size=(50, 1)) / np.linalg.norm(v, axis=1, keepdims=True))
    y = S.exp(x, v)
    assert np.max(np.abs(S.log(x, y) - v)) < 1e-12
    assert np.allclose(S.dist(x, y), np.linalg.norm(v, axis=1), atol=1e-12)


def test_sphere_transport_is_isometric_and_tangent():
    S = Sphere()
    rng = np.random.default_rng(2)
    for _ in range(20):
        x, y = S.normalize(rng.normal(size=3)), S.normalize(rng.normal(size=3))
        v = S.project(x, rng.normal(size=3))
        w = S.transport(x, y, v)
        assert abs(np.linalg.norm(w) - np.linalg.norm(v)) < 1e-12
        assert abs(w @ y) < 1e-12


def test_flat_transport_is_identity():
    F = Flat()
    v = np.array([0.3, -1.0])
    assert np.array_equal(F.transport([0, 0], [5, 5], v), v)


@pytest.mark.parametrize("kind", ["flat", "sphere"])
def test_differential_is_a_cocycle(kind):
    rng = np.random.default_rng(3)
    for _ in range(20):
        if kind == "flat":
            g1 = rotation_2d(rng.uniform(0, 6)).compose(translation(rng.normal(size=2)))
            g2 = reflection(rng.normal(size=2), rng.normal()).compose(translation(rng.normal(size=2)))
        else:
            g1, g2 = rotation_z(rng.uniform(0, 6)), reflection(rng.normal(size=3))
        assert np.max(np.abs(g2.compose(g1).differential() - g2.differential() @ g1.differential())) < 1e-12


def test_isometries_preserve_sphere_distance():
    S = Sphere()
    rng = np.random.default_rng(4)
    g = rotation_z(1.1).compose(reflection([1.0, 2.0, 0.5]))
    x, y = S.normalize(rng.normal(size=(10, 3))), S.normalize(rng.normal(size=(10, 3)))
    assert np.allclose(S.dist(g.apply(x), g.apply(y)), S.dist(x, y), atol=1e-12)
