import json

import numpy as np
import pytest

from robust_miso.model import (
    BeamformerSet,
    Ellipsoid,
    Scenario,
    ScenarioFormatError,
    complex_gaussian,
    generate_scenario,
    load_scenario,
    make_rng,
    save_scenario,
    spherical_uncertainty,
)
from robust_miso.numerics import largest_singular_value


def test_three_user_configuration(seed7_three_user):
    s = seed7_three_user
    assert s.K == 3
    assert s.antennas == [3, 3, 3]
    assert s.powers == [1.0, 1.0, 1.0]
    assert s.noise_power == 1.0
    assert np.all(s.epsilons() == 0.5)


def test_same_seed_identical():
    a = generate_scenario(3, [3, 3, 3], 0.5, [1, 1, 1], 1.0, seed=11)
    b = generate_scenario(3, [3, 3, 3], 0.5, [1, 1, 1], 1.0, seed=11)
    assert a == b
    assert a.digest() == b.digest()
    assert a != generate_scenario(3, [3, 3, 3], 0.5, [1, 1, 1], 1.0, seed=12)


def test_shapes_unit_spectral_norm(seed7_three_user):
    for link in seed7_three_user.links:
        for u in link.uncertainty:
            assert abs(largest_singular_value(u.shape) - 1.0) < 1e-12


def test_draw_order_documented():
    # estimate h_00 first, then the 3 columns of A_00, then h_01 ...
    s = generate_scenario(2, [3, 2], 0.1, [1, 1], 1.0, seed=5)
    rng = make_rng(5)
    h00 = complex_gaussian(rng, 3)
    cols = [complex_gaussian(rng, 3) for _ in range(3)]
    h01 = complex_gaussian(rng, 3)
    assert np.array_equal(s.estimate(0, 0), h00)
    a = np.stack(cols, axis=1)
    assert np.allclose(s.uncertainty(0, 0).shape, a / largest_singular_value(a), atol=0)
    assert np.array_equal(s.estimate(0, 1), h01)


def test_complex_gaussian_moments():
    z = complex_gaussian(make_rng(0), 200000)
    assert abs(np.mean(z)) < 0.01
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01
    assert abs(np.mean(z ** 2)) < 0.01
    assert abs(np.var(z.real) - 0.5) < 0.01


def test_heterogeneous_dimensions():
    s = generate_scenario(3, [1, 2, 4], 0.2, [1, 2, 3], 0.5, seed=3)
    for k, n in enumerate([1, 2, 4]):
        for ell in range(3):
            assert s.estimate(k, ell).shape == (n,)
            assert s.uncertainty(k, ell).dim == n


@pytest.mark.parametrize("kwargs", [
    dict(K=2, antennas=[3], epsilons=0.1, powers=[1, 1]),
    dict(K=2, antennas=[3, 3], epsilons=-0.1, powers=[1, 1]),
    dict(K=2, antennas=[3, 3], epsilons=np.ones((3, 3)), powers=[1, 1]),
    dict(K=2, antennas=[3, 0], epsilons=0.1, powers=[1, 1]),
    dict(K=0, antennas=[], epsilons=0.1, powers=[]),
])
def test_generate_invalid(kwargs):
    with pytest.raises(ValueError):
        generate_scenario(noise_power=1.0, seed=0, **kwargs)


@pytest.mark.parametrize("n,radius", [(2, 0.0), (3, 0.5)])
def test_spherical_uncertainty(n, radius):
    e = spherical_uncertainty(n, radius)
    assert np.array_equal(e.shape, np.eye(n))
    assert e.radius == radius


def test_spherical_membership():
    e = spherical_uncertainty(3, 0.5)
    rng = np.random.default_rng(0)
    d = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert e.contains(0.5 * d / np.linalg.norm(d))
    assert not e.contains(0.51 * d / np.linalg.norm(d))


def test_ellipsoid_invariants():
    with pytest.raises(ScenarioFormatError):
        Ellipsoid(1.5 * np.eye(2), 0.1)
    with pytest.raises(ScenarioFormatError):
        Ellipsoid(np.eye(2), -0.1)
    with pytest.raises(ScenarioFormatError):
        Ellipsoid(np.array([[1, 1], [1, 1]]) / 2, 0.1)
    with pytest.raises(ScenarioFormatError):
        Ellipsoid(np.ones((2, 3)) / 3, 0.1)


def test_round_trip(tmp_path, seed7_three_user):
    path = tmp_path / "s.json"
    save_scenario(seed7_three_user, path)
    back = load_scenario(path)
    assert back == seed7_three_user
    for k in range(3):
        for ell in range(3):
            assert np.array_equal(back.estimate(k, ell), seed7_three_user.estimate(k, ell))
            assert np.array_equal(back.uncertainty(k, ell).shape,
                                  seed7_three_user.uncertainty(k, ell).shape)
    save_scenario(back, tmp_path / "t.json")
    assert (tmp_path / "t.json").read_bytes() == path.read_bytes()


def test_file_format_fields(tmp_path, two_user):
    save_scenario(two_user, tmp_path / "s.json")
    d = json.loads((tmp_path / "s.json").read_text())
    assert set(d) == {"format", "K", "noise_power", "links"}
    link = d["links"][0]
    assert set(link) == {"antennas", "power_budget", "estimates", "ellipsoids"}
    assert len(link["estimates"][1]) == 3 and len(link["estimates"][1][0]) == 2
    assert set(link["ellipsoids"][0]) == {"shape", "radius"}


def _corrupt(tmp_path, scenario, edit):
    save_scenario(scenario, tmp_path / "s.json")
    d = json.loads((tmp_path / "s.json").read_text())
    edit(d)
    (tmp_path / "bad.json").write_text(json.dumps(d))
    return tmp_path / "bad.json"


def test_reject_negative_radius(tmp_path, two_user):
    def edit(d):
        d["links"][1]["ellipsoids"][0]["radius"] = -0.2
    with pytest.raises(ScenarioFormatError, match=r"links\[1\]\.ellipsoids\[0\]"):
        load_scenario(_corrupt(tmp_path, two_user, edit))


def test_reject_scaled_shape(tmp_path, two_user):
    def edit(d):
        shape = d["links"][0]["ellipsoids"][1]["shape"]
        d["links"][0]["ellipsoids"][1]["shape"] = [[[1.5 * re, 1.5 * im] for re, im in row]
                                                   for row in shape]
    with pytest.raises(ScenarioFormatError, match="largest singular value"):
        load_scenario(_corrupt(tmp_path, two_user, edit))


@pytest.mark.parametrize("edit,field", [
    (lambda d: d.pop("noise_power"), "noise_power"),
    (lambda d: d["links"][0].pop("antennas"), r"links\[0\]\.antennas"),
    (lambda d: d["links"][1]["estimates"].pop(), r"links\[1\]"),
    (lambda d: d.__setitem__("K", "two"), "K"),
])
def test_malformed_names_field(tmp_path, two_user, edit, field):
    with pytest.raises(ScenarioFormatError, match=field):
        load_scenario(_corrupt(tmp_path, two_user, edit))


def test_not_json(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ScenarioFormatError):
        load_scenario(tmp_path / "x.json")


def test_beamformer_power_check(two_user):
    ok = BeamformerSet((np.array([1, 0, 0]), np.array([0, 1j, 0])))
    ok.check(two_user)
    with pytest.raises(ValueError):
        BeamformerSet((np.array([1.001, 0, 0]), np.zeros(3))).check(two_user)
    with pytest.raises(ValueError):
        BeamformerSet((np.zeros(2), np.zeros(3))).check(two_user)


def test_with_epsilons_keeps_shapes(two_user):
    s = two_user.with_epsilons(0.0)
    assert np.all(s.epsilons() == 0)
    assert s.uncertainty(0, 1).shape is not None
    assert np.array_equal(s.uncertainty(0, 1).shape, two_user.uncertainty(0, 1).shape)


def test_scenario_requires_positive_noise(two_user):
    with pytest.raises(ScenarioFormatError):
        Scenario(two_user.links, 0.0)
