import math
from dataclasses import replace

import numpy as np
import pytest

from mpccil.controllers import MpccWeights
from mpccil.dynamics import ModelParams, trim_pitch
from mpccil.errors import InvalidInputError
from mpccil.imitation import (AUGMENTED, NOISE_STD, OFF_POLICY, ON_POLICY, Dataset, LearnConfig, MpccSupervisor,
                              augment, avoid_scenario, collect_off_policy, collect_on_policy, gen_avoid_path,
                              gen_return_path, learn, make_example_set, make_supervisor, relabel,
                              return_scenario, straight_guidance)
from mpccil.policy import TrainConfig, init_policy
from mpccil.world import Obstacle, observe

MODEL = ModelParams.from_alpha(0.85)
WEIGHTS = MpccWeights(R=(2.0, 8.0, 8.0, 1.0), nu_dot_max=1.3)
GUIDE = straight_guidance(12.0)


# ------------------------------------------------------------------- paths

def test_return_path_merges_at_45_degrees():
    path = gen_return_path((1.0, 0.0), GUIDE)
    np.testing.assert_allclose(path.position(0.0), [0, 1, 1], atol=1e-12)
    # merge point one metre downstream of the lateral projection
    assert any(np.allclose(p, [1.0, 0.0, 1.0], atol=1e-12) for p in path.control_points)
    chord = np.array([1.0, 0.0, 1.0]) - path.position(0.0)
    assert math.degrees(math.atan2(-chord[1], chord[0])) == pytest.approx(45.0)
    np.testing.assert_allclose(path.position(path.total_length), GUIDE.position(GUIDE.total_length), atol=1e-12)


def test_return_path_stays_in_plane():
    path = gen_return_path((-2.0, 0.0), GUIDE)
    z = np.array([path.position(v)[2] for v in np.linspace(0, path.total_length, 200)])
    np.testing.assert_allclose(z, 1.0, atol=1e-12)
    with pytest.raises(InvalidInputError):
        gen_return_path((0.0, 0.0), GUIDE)


def min_center_distance(path, ob):
    nus = np.linspace(0, path.total_length, 20001)
    pts = np.array([path.position(v) for v in nus])
    return float(np.min(np.hypot(pts[:, 0] - ob.center[0], pts[:, 1] - ob.center[1])))


@pytest.mark.parametrize("lateral", [0.0, 0.3, -0.45])
def test_avoid_path_clearance(lateral):
    ob = Obstacle.cylinder(6.0, lateral, 0.2)
    path = gen_avoid_path(ob, GUIDE)
    assert min_center_distance(path, ob) == pytest.approx(1.5, abs=0.05)
    # on the guidance until 3 m before the obstacle
    cp = path.control_points
    assert cp[0, 0] == pytest.approx(2.0)
    np.testing.assert_allclose(cp[cp[:, 0] <= 3.0 + 1e-9, 1], 0.0, atol=1e-12)
    assert np.all(np.abs(cp[(cp[:, 0] > 3.5) & (cp[:, 0] < 8.5), 1]) > 0.1)


def test_avoid_path_side_selection():
    on_path = Obstacle.cylinder(6.0, 0.0, 0.2)
    sides = [np.sign(gen_avoid_path(on_path, GUIDE, seed=s).position(6.0)[1]) for s in range(4)]
    assert sides == [1.0, -1.0, 1.0, -1.0]
    left = Obstacle.cylinder(6.0, 0.3, 0.2)
    y = np.array([gen_avoid_path(left, GUIDE, seed=s).position(6.0)[1] for s in range(2)])
    assert np.all(y < 0)
    with pytest.raises(InvalidInputError):
        gen_avoid_path(Obstacle.cylinder(6.0, 0.8, 0.2), GUIDE)


def test_example_set():
    ex = make_example_set(1, MODEL)
    assert len(ex) == 12
    assert len(ex.tagged("return-to-guidance")) == 4
    assert len(ex.tagged("obstacle-avoidance")) == 8
    for i in ex.tagged("obstacle-avoidance"):
        sc = ex[i]
        assert sc.obstacles[0].size[0] == 0.2
        assert min_center_distance(sc.path, sc.obstacles[0]) == pytest.approx(1.5, abs=0.05)
    with pytest.raises(InvalidInputError):
        make_example_set(1, MODEL, n_return=1, n_avoid=1)


# ----------------------------------------------------------------- dataset

def filled_dataset(rng, n=6):
    ds = Dataset()
    for i in range(n):
        ds.add(rng.uniform(0, 5, 45), rng.uniform(-0.3, 0.3, 3), OFF_POLICY if i % 2 else ON_POLICY, i // 2)
    ds.add(rng.uniform(0, 5, 45), rng.uniform(-0.3, 0.3, 3), AUGMENTED, 0, parent=1)
    return ds


def test_dataset_invariants(rng):
    ds = filled_dataset(rng)
    assert len(ds) == 7
    with pytest.raises(InvalidInputError):
        ds.add(np.zeros(44), np.zeros(3), OFF_POLICY, 0)
    with pytest.raises(InvalidInputError):
        ds.add(np.full(45, np.nan), np.zeros(3), OFF_POLICY, 0)
    with pytest.raises(InvalidInputError):
        ds.add(np.zeros(45), np.zeros(3), AUGMENTED, 0, parent=99)
    with pytest.raises(ValueError):
        ds._obs[0][0] = 1.0  # stored samples are read-only


def test_dataset_extend_offsets_parents(rng):
    a, b = filled_dataset(rng), filled_dataset(rng)
    n = len(a)
    before = a.observations.copy()
    a.extend(b)
    assert len(a) == 2 * n
    assert a.parents[-1] == n + 1
    np.testing.assert_array_equal(a.observations[:n], before)


@pytest.mark.parametrize("fmt", ["csv", "npz"])
def test_dataset_round_trip(tmp_path, rng, fmt):
    ds = filled_dataset(rng)
    path = tmp_path / f"d.{fmt}"
    if fmt == "csv":
        ds.to_csv(path)
        back = Dataset.from_csv(path)
    else:
        ds.save(path)
        back = Dataset.load(path)
    np.testing.assert_array_equal(back.observations, ds.observations)
    np.testing.assert_array_equal(back.targets, ds.targets)
    np.testing.assert_array_equal(back.provenance, ds.provenance)
    np.testing.assert_array_equal(back.episodes, ds.episodes)
    np.testing.assert_array_equal(back.parents, ds.parents)


# --------------------------------------------------------------- collection

@pytest.fixture(scope="module")
def straight_episode():
    sc = return_scenario((1e-9, 0.0), 1.3, MODEL, length=8.0)
    # an essentially zero offset: the example path is the guidance itself
    sc.path = sc.guidance
    sup = MpccSupervisor(sc.path, WEIGHTS, MODEL)
    world = sc.world(1.3)
    shard, rec = collect_off_policy(sc, MODEL, sup, world)
    return sc, sup, world, shard, rec


def test_off_policy_on_straight_path(straight_episode):
    sc, sup, world, shard, rec = straight_episode
    assert len(shard) == rec.n == len(rec.labels)
    assert np.all(shard.provenance == OFF_POLICY)
    assert max(rec.deviations) <= 0.05
    T = shard.targets
    np.testing.assert_allclose(T[:, :2], 0.0, atol=1e-6)
    assert np.max(np.abs(T[:, 2] - trim_pitch(1.3, MODEL))) < 5e-3
    assert not rec.failed and rec.collisions == 0


def test_labels_are_reproducible(straight_episode):
    _, sup, _, shard, rec = straight_episode
    labels, _ = relabel(rec, sup)
    assert all(np.array_equal(a, b) for a, b in zip(labels, rec.labels))


def test_zero_following_weight_reduces_to_off_policy():
    sc = return_scenario((1.5, 0.0), 1.3, MODEL)
    world = sc.world(1.3)
    sup_off = MpccSupervisor(sc.path, WEIGHTS, MODEL)
    sup_on = MpccSupervisor(sc.path, WEIGHTS, MODEL, onpolicy_weights=replace(WEIGHTS, K_f=0.0))
    a, ra = collect_off_policy(sc, MODEL, sup_off, world)
    b, rb = collect_on_policy(sc, MODEL, sup_on, init_policy(0), world)
    np.testing.assert_array_equal(np.array(ra.states), np.array(rb.states))
    np.testing.assert_array_equal(a.observations, b.observations)
    np.testing.assert_array_equal(a.targets, b.targets)
    assert np.all(b.provenance == ON_POLICY)


def test_augment_grows_fourfold(straight_episode):
    _, sup, world, shard, rec = straight_episode
    out, dropped = augment(shard, rec, sup, world, np.random.default_rng(0), k=3)
    assert dropped == 0
    assert len(out) == 4 * len(shard)
    aug = out.provenance == AUGMENTED
    assert aug.sum() == 3 * len(shard)
    assert np.all((out.parents[aug] >= 0) & (out.parents[aug] < len(shard)))


def test_augment_without_noise_duplicates_labels(straight_episode):
    _, sup, world, shard, rec = straight_episode
    out, _ = augment(shard, rec, sup, world, np.random.default_rng(0), noise_std=0.0, k=2)
    aug = np.flatnonzero(out.provenance == AUGMENTED)
    np.testing.assert_allclose(out.targets[aug], shard.targets[out.parents[aug]], atol=1e-9)
    np.testing.assert_array_equal(out.observations[aug], shard.observations[out.parents[aug]])


def test_augmented_observations_match_perturbed_states(straight_episode):
    _, sup, world, shard, rec = straight_episode
    out, _ = augment(shard, rec, sup, world, np.random.default_rng(5), k=3)
    r = np.random.default_rng(5)
    expect = []
    for x, t, vz in zip(rec.states, rec.times, rec.vz_prev):
        for _ in range(3):
            xn = x + r.normal(0.0, 1.0, 8) * NOISE_STD
            expect.append(observe(xn, world, t, vz).vector)
    np.testing.assert_allclose(out.observations[out.provenance == AUGMENTED], np.array(expect), atol=1e-12)
    with pytest.raises(InvalidInputError):
        augment(shard, rec, sup, world, r, k=-1)


def near_duplicate_label_gap(kind, radius=0.1):
    obs, lab = [], []
    for off in [(1.5, 0.0), (1.0, 0.0)]:
        sc = return_scenario(off, 1.3, MODEL)
        shard, _ = collect_off_policy(sc, MODEL, make_supervisor(kind, sc, WEIGHTS, MODEL), sc.world(1.3))
        obs.append(shard.observations)
        lab.append(shard.targets)
    O, U = np.vstack(obs), np.vstack(lab)
    D = np.linalg.norm(O[:, None] - O[None], axis=2)
    L = np.linalg.norm(U[:, None] - U[None], axis=2)
    mask = (D < radius) & ~np.eye(len(O), dtype=bool)
    return float(L[mask].max())


def test_contouring_labels_are_less_ambiguous_than_tracking():
    assert near_duplicate_label_gap("mpcc") < near_duplicate_label_gap("mpc")


# ------------------------------------------------------------------ learning

@pytest.fixture(scope="module")
def small_run():
    ex = make_example_set(0, MODEL, n_return=2, n_avoid=2)
    cfg = LearnConfig(train=TrainConfig(epochs=2, learning_rate=3e-3), init_epochs=5)
    return learn(ex, MODEL, MODEL, WEIGHTS, cfg)


def test_learn_bookkeeping(small_run):
    policy, report, data = small_run
    its = report.iterations
    assert [r.mode for r in its] == ["off", "off", "off", "on"]
    assert its[0].iteration == its[1].iteration == 0
    assert its[-1].dataset_size == len(data) == sum(r.samples for r in its)
    for r in its:
        assert r.samples == 4 * report.episodes[its.index(r)].n - r.dropped
    sizes = [r.dataset_size for r in its[1:]]
    assert all(b > a for a, b in zip(sizes, sizes[1:]))
    assert report.train_collisions == 0
    assert np.all(np.abs(data.targets) <= MODEL.input_limits.upper[:3] + 1e-12)


def test_learn_is_deterministic(small_run):
    ex = make_example_set(0, MODEL, n_return=2, n_avoid=2)
    cfg = LearnConfig(train=TrainConfig(epochs=2, learning_rate=3e-3), init_epochs=5)
    policy, report, data = learn(ex, MODEL, MODEL, WEIGHTS, cfg)
    p0, r0, d0 = small_run
    np.testing.assert_array_equal(data.targets, d0.targets)
    for a, b in zip(policy.params, p0.params):
        assert np.array_equal(a, b)


def test_learn_needs_three_examples():
    ex = make_example_set(0, MODEL, n_return=2, n_avoid=2)
    ex.scenarios = ex.scenarios[:2]
    with pytest.raises(InvalidInputError):
        learn(ex, MODEL, MODEL, WEIGHTS)


class StraightAhead:
    def act(self, o):
        return np.array([0.0, 0.0, trim_pitch(1.3, MODEL)])


def test_unsafe_exploration_flies_the_raw_policy():
    sc = avoid_scenario(0.0, 1.3, MODEL)
    world = sc.world(1.3)
    sup = MpccSupervisor(sc.path, WEIGHTS, MODEL)
    shard, rec = collect_on_policy(sc, MODEL, sup, StraightAhead(), world, unsafe=True)
    # nothing corrects the raw policy, so it flies into the on-path obstacle and the episode stops
    assert rec.collisions == 1
    assert rec.min_distance < 0.3
    assert len(shard) == rec.n
    assert rec.positions[-1][0] < 5.0
