import numpy as np
import pytest

from blocktalk import datagen, world
from blocktalk.datagen import (
    Example,
    RECOVERY_SESSION_COUNTS,
    TEST_CORRUPT_WORDS,
    VALIDATION_CORRUPT_WORDS,
    build_corruption_map,
    build_recovery_sessions,
    build_validation_recovery_session,
    corrupt,
    generate,
    load_dataset,
    make_scramble,
    make_split,
    sample_state,
    save_dataset,
    scramble_language,
)


@pytest.fixture(scope="module")
def split():
    return make_split(seed=0)


@pytest.fixture(scope="module")
def small_data(split):
    return generate(split, counts={"train": 800, "val": 150, "test": 150})


def test_split_sizes_and_partition(split):
    assert [len(split.utterances[t]) for t in ("train", "val", "test")] == [66, 11, 11]
    assert [len(split.columns[t]) for t in ("train", "val", "test")] == [69, 8, 8]
    all_utts = set()
    for tag in ("train", "val", "test"):
        part = set(split.utterance_pool(tag))
        assert not (all_utts & part)
        all_utts |= part
    assert len(all_utts) == 88
    all_cols = set()
    for tag in ("train", "val", "test"):
        part = set(split.columns[tag])
        assert not (all_cols & part)
        all_cols |= part
    assert len(all_cols) == 85


def test_split_deterministic():
    a, b = make_split(3), make_split(3)
    assert a.to_json() == b.to_json()
    assert a.to_json() != make_split(4).to_json()


def test_split_json_roundtrip(split, tmp_path):
    path = tmp_path / "split.json"
    split.save(path)
    loaded = datagen.SplitSpec.load(path)
    assert loaded.to_json() == split.to_json()


def test_sample_state_membership(split):
    rng = np.random.default_rng(0)
    pool = split.columns["train"]
    pool_set = set(pool)
    for _ in range(500):
        state = sample_state(pool, rng)
        assert len(state) == 6
        assert all(c in pool_set for c in state)


def test_sample_state_uniform_chi_square(split):
    rng = np.random.default_rng(1)
    pool = split.columns["train"]
    counts = {c: 0 for c in pool}
    draws = 100_000 // 6 + 1
    for _ in range(draws):
        for c in sample_state(pool, rng):
            counts[c] += 1
    n = draws * 6
    expected = n / len(pool)
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    df = len(pool) - 1
    assert stat < df + 3 * np.sqrt(2 * df)


def test_generate_counts_and_construction(small_data):
    assert [len(small_data[t]) for t in ("train", "val", "test")] == [800, 150, 150]
    for tag, ds in small_data.items():
        for ex in ds.examples[:50]:
            instr = world.parse_utterance(ex.utterance)
            assert ex.target == world.apply_instruction(instr, ex.start)


def test_generate_no_leakage(split, small_data):
    train_utts = set(split.utterance_pool("train"))
    train_cols = set(split.columns["train"])
    for tag in ("val", "test"):
        for ex in small_data[tag].examples:
            assert ex.utterance not in train_utts
            assert all(c not in train_cols for c in ex.start)


def test_generate_deterministic_and_shard_independent(split):
    a = generate(split, counts={"val": 60})["val"]
    b = generate(split, counts={"val": 60})["val"]
    assert a.examples == b.examples
    # per-index streams: a prefix of a bigger run matches a smaller run
    big = generate(split, counts={"val": 120})["val"]
    assert big.examples[:60] == a.examples


def test_generate_covers_all_train_utterances(split, small_data):
    used = {ex.utterance for ex in small_data["train"].examples}
    assert used == set(split.utterance_pool("train"))


# -- corruption ----------------------------------------------------------

def test_corrupt_single_word():
    ex = Example(("remove", "red", "at", "3rd", "tile"), ((),) * 6, ((),) * 6)
    out = corrupt([ex], {"red": "roze"})
    assert out[0].utterance == ("remove", "roze", "at", "3rd", "tile")
    assert out[0].start == ex.start and out[0].target == ex.target


def test_corrupt_empty_map_is_identity():
    ex = Example(("add", "cyan", "at", "every", "tile"), ((),) * 6, ((),) * 6)
    assert corrupt([ex], {})[0] == ex


def test_corrupt_three_words():
    ex = Example(("remove", "brown", "at", "every", "tile"), ((),) * 6, ((),) * 6)
    out = corrupt([ex], {"brown": "braun", "remove": "rmv", "every": "evr"})
    assert out[0].utterance == ("rmv", "braun", "at", "evr", "tile")


def test_corrupt_rejects_bad_maps():
    ex = Example(("add", "red", "at", "1st", "tile"), ((),) * 6, ((),) * 6)
    with pytest.raises(ValueError):
        corrupt([ex], {"red": "zzz", "cyan": "zzz"})
    with pytest.raises(ValueError):
        corrupt([ex], {"red": "cyan"})


def test_corruption_map_scheme():
    mapping = build_corruption_map(TEST_CORRUPT_WORDS)
    assert mapping["remove"] == "evomer"
    assert len(set(mapping.values())) == len(mapping)
    assert not set(mapping.values()) & set(world.GRAMMAR_WORDS)
    assert corrupt([Example(("remove", "red", "at", "1st", "tile"),
                            ((),) * 6, ((),) * 6)],
                   mapping)[0].utterance[0] == "evomer"
    # invertible given the map
    inverse = {v: k for k, v in mapping.items()}
    assert inverse["evomer"] == "remove"


# -- recovery sessions -----------------------------------------------------

def test_vocabulary_split_for_recovery():
    assert len(VALIDATION_CORRUPT_WORDS) == 7
    assert len(TEST_CORRUPT_WORDS) == 10
    assert not set(VALIDATION_CORRUPT_WORDS) & set(TEST_CORRUPT_WORDS)
    content = set(world.VERBS) | set(world.COLORS) | set(world.POSITIONS)
    assert set(VALIDATION_CORRUPT_WORDS) | set(TEST_CORRUPT_WORDS) == content


@pytest.mark.parametrize("condition", datagen.RECOVERY_CONDITIONS)
def test_recovery_sessions_shape(split, condition):
    sessions = build_recovery_sessions(split, condition, seed=0)
    assert len(sessions) == RECOVERY_SESSION_COUNTS[condition]
    for sess in sessions:
        assert len(sess.examples) == 45
        assert not set(sess.words) & set(VALIDATION_CORRUPT_WORDS)
        assert set(sess.words) <= set(TEST_CORRUPT_WORDS)
        if condition != "all":
            assert len(sess.words) == int(condition[0])
            types = [datagen.word_type(w) for w in sess.words]
            assert len(set(types)) == len(types)
        corrupted_tokens = set(sess.mapping.values())
        seen = {t for ex in sess.examples for t in ex.utterance}
        assert seen & corrupted_tokens  # the session exercises new tokens
        assert not (seen & set(sess.words))  # originals fully replaced
        test_cols = set(split.columns["test"])
        for ex in sess.examples[:5]:
            assert all(c in test_cols for c in ex.start)


def test_recovery_targets_follow_original_semantics(split):
    smap = {v: k for k, v in
            build_corruption_map(TEST_CORRUPT_WORDS).items()}
    for sess in build_recovery_sessions(split, "2-word", seed=0)[:3]:
        for ex in sess.examples[:10]:
            original = tuple(smap.get(t, t) for t in ex.utterance)
            instr = world.parse_utterance(original)
            assert ex.target == world.apply_instruction(instr, ex.start)


def test_validation_recovery_session(split):
    sess = build_validation_recovery_session(split, seed=0)
    assert len(sess.examples) == 45
    assert sess.words == VALIDATION_CORRUPT_WORDS
    seen = {t for ex in sess.examples for t in ex.utterance}
    assert not (seen & set(VALIDATION_CORRUPT_WORDS))


# -- scrambling ----------------------------------------------------------

def test_scramble_is_invertible(small_data):
    examples = small_data["val"].examples[:100]
    scrambled, smap = scramble_language(examples, seed=5)
    inverse = smap.invert()
    restored = [Example(inverse.apply(ex.utterance), ex.start, ex.target)
                for ex in scrambled]
    assert restored == examples


def test_scramble_consistency(small_data):
    examples = small_data["val"].examples[:200]
    scrambled, smap = scramble_language(examples, seed=5)
    for orig, scr in zip(examples, scrambled):
        assert scr.start == orig.start and scr.target == orig.target
        assert scr.utterance == smap.apply(orig.utterance)
    # two utterances sharing a word share its image
    a, b = examples[0].utterance, next(
        ex.utterance for ex in examples[1:] if examples[0].utterance[0] in ex.utterance
    )
    image = smap.word_map[a[0]]
    assert image in smap.apply(b)


def test_scramble_actually_changes_surface(small_data):
    examples = small_data["val"].examples[:20]
    scrambled, _ = scramble_language(examples, seed=5)
    assert any(s.utterance != e.utterance for s, e in zip(scrambled, examples))


# -- files ---------------------------------------------------------------

def test_dataset_file_roundtrip(tmp_path, small_data):
    examples = small_data["test"].examples[:50]
    path = tmp_path / "data.tsv"
    save_dataset(path, examples)
    assert load_dataset(path) == examples


def test_dataset_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("just one field\n")
    with pytest.raises(ValueError):
        load_dataset(path)
