import json

import numpy as np
import pytest

from symblender.boxes import Box
from symblender.cycles import (
    CycleScenario, MixingScenario, blender_activation, default_cycle_scenario, default_mixing_scenario,
    density_check, mixing_witness, sample_pairs, scenario_from_dict, scenario_to_json, verify_cycle, verify_mixing,
)
from symblender.fiber import FiberMap, SkewProduct, apply_translations, random_translations
from symblender.ifs import IFS, covering_check
from symblender.symbolic import BiSequence


@pytest.fixture(scope="module")
def mixing():
    return default_mixing_scenario()


def test_cycle_passes_small():
    rep = verify_cycle(default_cycle_scenario(), perturbations=2, seed=1)
    assert rep.passed, rep.reason
    names = [s.name for s in rep.stages]
    assert names[-2:] == ["leg-a", "leg-b"]
    for run in rep.perturbations:
        assert run["leg_a"]["passed"] and run["leg_b"]["passed"]


@pytest.mark.parametrize("kwargs,stage", [
    (dict(transitions=(0.0, -1.25)), "cyclic-intersections"),
    (dict(cu_shifts=(0.0, 0.0, 0.0)), "covering-cu"),
    (dict(cs_shifts=(0.0, 0.0, 0.0)), "covering-cs"),
])
def test_cycle_failure_variants(kwargs, stage):
    rep = verify_cycle(default_cycle_scenario(**kwargs), perturbations=1)
    assert not rep.passed and rep.failed_stage == stage


def test_cycle_scenario_roundtrip():
    sc = default_cycle_scenario()
    sc2 = scenario_from_dict(json.loads(scenario_to_json(sc)))
    assert isinstance(sc2, CycleScenario)
    assert scenario_to_json(sc2) == scenario_to_json(sc)
    with pytest.raises(ValueError):
        scenario_from_dict({"type": "spiral"})
    d = sc.to_dict()
    del d["D"]
    with pytest.raises(ValueError):
        CycleScenario.from_dict(d)
    with pytest.raises(ValueError):
        verify_cycle(sc, depth=0)


def test_density_sink_single_map():
    # k = 1: every point of the window converges to the sink of 0.5x
    psi = SkewProduct.one_step([FiberMap.affine(0.5, 0.0)], Box([-2.0], [2.0]))
    rep = density_check(psi, BiSequence.constant(1), [0.0], "stable", Box([-1.0], [1.0]), r=5, horizon=40,
                        word_length=1)
    assert rep.passed and rep.fraction == 1.0


def test_density_rejects_wrong_type(mixing):
    psi = mixing.skew()
    with pytest.raises(ValueError):
        density_check(psi, BiSequence.constant(1), mixing.p, "unstable", mixing.window)
    with pytest.raises(ValueError):
        density_check(psi, BiSequence.constant(mixing.repeller), mixing.q, "stable", mixing.window)
    with pytest.raises(ValueError):
        density_check(psi, BiSequence.constant(1), [0.7], "stable", mixing.window)
    with pytest.raises(ValueError):
        density_check(psi, BiSequence.constant(1), mixing.p, "sideways", mixing.window)


def test_density_both_directions(mixing):
    psi = mixing.skew()
    s = density_check(psi, BiSequence.constant(1), mixing.p, "stable", mixing.window)
    u = density_check(psi, BiSequence.constant(mixing.repeller), mixing.q, "unstable", mixing.window)
    assert s.passed and u.passed


def test_witness_horizon(mixing):
    psi = mixing.skew()
    u, U, v, V = sample_pairs(mixing, 1, np.random.default_rng(4))[0]
    w0 = mixing_witness(psi, mixing, u, U, v, V, 0)
    assert not w0.passed and w0.n0 is None
    w = mixing_witness(psi, mixing, u, U, v, V, 40)
    assert w.passed
    w2 = mixing_witness(psi, mixing, u, U, v, V, 50)
    assert w2.n0 == w.n0
    assert [n for n, _, _ in w2.verified][: len(w.verified)] == [n for n, _, _ in w.verified]
    assert all(ok for _, ok, _ in w2.verified)


def test_mixing_passes_small(mixing):
    rep = verify_mixing(mixing, pairs=15, perturbations=2, seed=3)
    assert rep.passed, rep.reason
    assert rep.n0_max <= 40
    for run in rep.perturbations:
        types = sorted(m["type"] for m in run["markers"])
        assert types == ["attracting", "repelling"]


def test_mixing_without_repeller():
    sc = default_mixing_scenario(with_repeller=False)
    rep = verify_mixing(sc, pairs=5, perturbations=1)
    assert not rep.passed and rep.failed_stage == "fixed-points"
    density = next(s for s in rep.stages if s.name == "density-unstable")
    assert "repelling" in density.detail["reason"]


def test_mixing_scenario_validation(mixing):
    with pytest.raises(ValueError):
        MixingScenario(mixing.k, mixing.maps, mixing.B, mixing.window, attractor=mixing.k + 1)
    with pytest.raises(ValueError):
        MixingScenario(mixing.k, mixing.maps, mixing.B, mixing.window, repeller=1)
    sc2 = scenario_from_dict(json.loads(scenario_to_json(mixing)))
    assert scenario_to_json(sc2) == scenario_to_json(mixing)


def test_activation(mixing):
    cover = covering_check(IFS(mixing.maps[:mixing.k], mixing.window), mixing.B, 10, 0.005)
    nominal = mixing.skew()
    psi = apply_translations(nominal, random_translations(nominal, 0.005, np.random.default_rng(0), 1))
    q = psi.entry(BiSequence.constant(mixing.repeller)).fixed_point(mixing.q)
    recs = blender_activation(psi, mixing.repeller, q, [0.9], mixing.k, mixing.B, cover, [1, 3, 6, 10])
    assert all(r.success for r in recs)
    assert all(r.measured_C <= r.disk_C for r in recs)
    flat = blender_activation(nominal, mixing.repeller, mixing.q, [0.9], mixing.k, mixing.B, cover, [2])
    assert flat[0].success and flat[0].disk_C == 0.0 and flat[0].measured_C == 0.0
    with pytest.raises(ValueError):
        blender_activation(nominal, mixing.repeller, [1.2], [0.9], mixing.k, mixing.B, cover, [1])
    with pytest.raises(ValueError):
        blender_activation(nominal, 1, mixing.p, [0.9], mixing.k, mixing.B, cover, [1])
