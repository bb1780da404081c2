import numpy as np
import pytest

from fewscale.datasets import ScaleVariable
from fewscale.errors import (
    ArgumentError,
    EpisodeInfeasibleError,
    InsufficientClassesError,
)
from fewscale.sampling import (
    CLASS_COUNT_RATIOS,
    DATASET_SIZE_RATIOS,
    EpisodeConfig,
    ScalingSchedule,
    derive_trial_seed,
    sample_episode,
    split_classes,
    subsample_classes,
    subsample_data,
)

from conftest import blob_dataset


def shuffled(dataset, seed=123):
    order = np.random.default_rng(seed).permutation(len(dataset))
    return dataset.select(order)


# ---------------------------------------------------------------- splits


def test_split_sizes_round_half_up(tiny_dataset):
    split = split_classes(tiny_dataset, 0.8, seed=1)
    # 8 classes, fraction 0.8 -> floor(6.4 + 0.5) = 6
    assert len(split.train_classes) == 6
    assert len(split.holdout_classes) == 2
    assert split.train_classes | split.holdout_classes == set(range(8))
    assert not split.train_classes & split.holdout_classes


def test_split_always_leaves_both_sides_nonempty(tiny_dataset):
    assert len(split_classes(tiny_dataset, 0.999, seed=0).holdout_classes) == 1
    assert len(split_classes(tiny_dataset, 0.001, seed=0).train_classes) == 1


def test_split_is_deterministic_and_record_order_free(tiny_dataset):
    a = split_classes(tiny_dataset, 0.75, seed=7)
    b = split_classes(shuffled(tiny_dataset), 0.75, seed=7)
    assert a.train_classes == b.train_classes
    assert a.holdout_classes == b.holdout_classes


def test_split_depends_on_seed(tiny_dataset):
    splits = {
        frozenset(split_classes(tiny_dataset, 0.5, seed=s).train_classes)
        for s in range(20)
    }
    assert len(splits) > 1


def test_split_rejects_bad_inputs(tiny_dataset):
    with pytest.raises(ArgumentError):
        split_classes(tiny_dataset, 0.0, seed=0)
    with pytest.raises(ArgumentError):
        split_classes(tiny_dataset, 1.0, seed=0)
    one_class = tiny_dataset.restrict_to_classes([0])
    with pytest.raises(InsufficientClassesError):
        split_classes(one_class, 0.5, seed=0)


# ---------------------------------------------------------------- subsampling


def test_subsample_data_counts_are_stratified(tiny_dataset):
    sub = subsample_data(tiny_dataset, 0.5, seed=4)
    for c, n in sub.class_counts().items():
        assert n == 6  # floor(0.5 * 12)
    assert sub.classes().tolist() == tiny_dataset.classes().tolist()


def test_subsample_data_keeps_at_least_one_per_class(tiny_dataset):
    sub = subsample_data(tiny_dataset, 0.01, seed=4)
    assert all(n == 1 for n in sub.class_counts().values())


def test_subsample_data_is_nested_across_ratios(tiny_dataset):
    # the kept set at a smaller ratio is a subset of the kept set at a
    # larger ratio under the same seed
    ids = {
        r: set(subsample_data(tiny_dataset, r, seed=9).sample_ids.tolist())
        for r in (1.0, 0.5, 0.25, 0.125)
    }
    assert ids[0.125] <= ids[0.25] <= ids[0.5] <= ids[1.0]


def test_subsample_data_ignores_record_order(tiny_dataset):
    a = subsample_data(tiny_dataset, 0.4, seed=2)
    b = subsample_data(shuffled(tiny_dataset), 0.4, seed=2)
    assert set(a.sample_ids.tolist()) == set(b.sample_ids.tolist())


def test_subsample_data_ratio_one_is_identity(tiny_dataset):
    assert subsample_data(tiny_dataset, 1.0, seed=0) is tiny_dataset


def test_subsample_data_rejects_bad_ratio(tiny_dataset):
    for ratio in (0.0, -0.5, 1.5):
        with pytest.raises(ArgumentError):
            subsample_data(tiny_dataset, ratio, seed=0)


def test_subsample_classes_counts(tiny_dataset):
    sub = subsample_classes(tiny_dataset, 0.5, seed=3)
    assert len(sub.classes()) == 4
    # all samples of the kept classes survive
    assert all(n == 12 for n in sub.class_counts().values())


def test_subsample_classes_floor_is_two(tiny_dataset):
    sub = subsample_classes(tiny_dataset, 0.01, seed=3)
    assert len(sub.classes()) == 2


def test_subsample_classes_nested(tiny_dataset):
    small = set(subsample_classes(tiny_dataset, 0.25, seed=5).classes().tolist())
    large = set(subsample_classes(tiny_dataset, 0.75, seed=5).classes().tolist())
    assert small <= large


# ---------------------------------------------------------------- schedules


def test_schedule_defaults():
    assert ScalingSchedule(ScaleVariable.DATASET_SIZE).ratios == DATASET_SIZE_RATIOS
    assert ScalingSchedule(ScaleVariable.CLASS_COUNT).ratios == CLASS_COUNT_RATIOS
    assert DATASET_SIZE_RATIOS == (1.0, 0.5, 0.25, 0.125, 0.0625)
    assert CLASS_COUNT_RATIOS == (1.0, 0.5, 0.25, 0.125)


def test_schedule_validation():
    with pytest.raises(ArgumentError):
        ScalingSchedule(ScaleVariable.DATASET_SIZE, (0.5, 0.25))  # must start at 1
    with pytest.raises(ArgumentError):
        ScalingSchedule(ScaleVariable.DATASET_SIZE, (1.0, 0.5, 0.5))  # not decreasing
    with pytest.raises(ArgumentError):
        ScalingSchedule(ScaleVariable.DATASET_SIZE, (1.0, 0.0))  # out of range


def test_episode_config_validation():
    with pytest.raises(ArgumentError):
        EpisodeConfig(way=1)
    with pytest.raises(ArgumentError):
        EpisodeConfig(shot=0)
    with pytest.raises(ArgumentError):
        EpisodeConfig(trials=0)
    with pytest.raises(ArgumentError):
        EpisodeConfig(master_seed=-1)


# ---------------------------------------------------------------- episodes


def test_trial_seeds_are_distinct():
    seeds = {derive_trial_seed(0, t) for t in range(1000)}
    assert len(seeds) == 1000
    assert derive_trial_seed(0, 5) == derive_trial_seed(0, 5)
    assert derive_trial_seed(0, 5) != derive_trial_seed(1, 5)


def test_episode_shapes_and_disjointness(tiny_dataset):
    config = EpisodeConfig(way=5, shot=2, queries_per_class=4, trials=1, master_seed=0)
    ep = sample_episode(tiny_dataset, config, trial_index=0)
    assert ep.way == 5 and ep.shot == 2
    assert ep.support_vectors.shape == (10, tiny_dataset.dim)
    assert ep.query_vectors.shape == (20, tiny_dataset.dim)
    assert set(ep.support_ids.tolist()).isdisjoint(ep.query_ids.tolist())
    assert sorted(set(ep.support_slots.tolist())) == [0, 1, 2, 3, 4]


def test_episode_slots_map_back_to_classes(tiny_dataset):
    config = EpisodeConfig(way=4, shot=1, queries_per_class=3, trials=1, master_seed=2)
    ep = sample_episode(tiny_dataset, config, trial_index=7)
    by_id = {int(s): int(c) for s, c in zip(tiny_dataset.sample_ids, tiny_dataset.class_ids)}
    for slot, sid in zip(ep.support_slots, ep.support_ids):
        assert by_id[int(sid)] == int(ep.slot_class_ids[slot])
    for slot, sid in zip(ep.query_slots, ep.query_ids):
        assert by_id[int(sid)] == int(ep.slot_class_ids[slot])


def test_episode_is_a_pure_function_of_seed_and_trial(tiny_dataset):
    config = EpisodeConfig(way=3, shot=1, queries_per_class=2, trials=1, master_seed=6)
    a = sample_episode(tiny_dataset, config, trial_index=3)
    b = sample_episode(shuffled(tiny_dataset), config, trial_index=3)
    np.testing.assert_array_equal(a.support_ids, b.support_ids)
    np.testing.assert_array_equal(a.query_ids, b.query_ids)
    np.testing.assert_array_equal(a.support_vectors, b.support_vectors)


def test_different_trials_differ(tiny_dataset):
    config = EpisodeConfig(way=3, shot=1, queries_per_class=2, trials=1, master_seed=6)
    a = sample_episode(tiny_dataset, config, trial_index=0)
    b = sample_episode(tiny_dataset, config, trial_index=1)
    assert (
        a.support_ids.tolist() != b.support_ids.tolist()
        or a.query_ids.tolist() != b.query_ids.tolist()
    )


def test_query_count_is_capped_by_class_size():
    ds = blob_dataset(classes=5, per_class=3, dim=4)
    config = EpisodeConfig(way=5, shot=1, queries_per_class=10, trials=1, master_seed=0)
    ep = sample_episode(ds, config, trial_index=0)
    # only 2 non-support samples exist per class
    assert ep.query_vectors.shape[0] == 10


def test_infeasible_episode_raises():
    ds = blob_dataset(classes=3, per_class=4, dim=4)
    config = EpisodeConfig(way=5, shot=1, queries_per_class=2, trials=1, master_seed=0)
    with pytest.raises(EpisodeInfeasibleError, match="5-way"):
        sample_episode(ds, config, trial_index=0)
    deep = EpisodeConfig(way=3, shot=4, queries_per_class=2, trials=1, master_seed=0)
    with pytest.raises(EpisodeInfeasibleError):
        sample_episode(ds, deep, trial_index=0)


def test_negative_trial_index_rejected(tiny_dataset):
    config = EpisodeConfig(way=3, shot=1, queries_per_class=2, trials=1, master_seed=0)
    with pytest.raises(ArgumentError):
        sample_episode(tiny_dataset, config, trial_index=-1)
