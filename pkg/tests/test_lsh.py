import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mc_kernel import band_match_rate, digests_of, row_collision_rate
from pprl.lsh import (
    MAX_HASH,
    MERSENNE_PRIME,
    BandSignatureList,
    HashCoeffs,
    LshParams,
    calc_h,
    coeffs_for,
    duplicate_with_suffixes,
    get_weighted_shingles,
    jaccard,
    lsh_dataset,
    lsh_match,
    lsh_record,
    shingle_digest,
    shingles,
    uhash_matrix,
)
from pprl.records import FieldGroupSpec, Record

SEED = bytes(range(32))


class TestShingles:
    def test_basic(self):
        assert shingles("abcd", 2) == {"ab", "bc", "cd"}

    def test_k_longer_than_text(self):
        assert shingles("ab", 5) == set()

    def test_k_equal_text(self):
        assert shingles("abc", 3) == {"abc"}

    def test_repeats_collapse(self):
        assert shingles("aaaa", 2) == {"aa"}

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            shingles("abc", 0)


class TestJaccard:
    def test_worked_example_short_shingles(self):
        a = shingles("street blvd los angeles", 5)
        b = shingles("stret blvd los angeles", 5)
        assert (len(a), len(b)) == (19, 18)
        assert jaccard(a, b) == Fraction(15, 22)

    def test_worked_example_long_shingles(self):
        a = shingles("street blvd los angeles", 11)
        b = shingles("stret blvd los angeles", 11)
        assert jaccard(a, b) == Fraction(9, 16)
        assert round(float(jaccard(a, b)), 2) == 0.56

    def test_empty_sets(self):
        assert jaccard(set(), set()) == 0

    def test_identity(self):
        s = shingles("hello world", 3)
        assert jaccard(s, s) == 1

    @given(
        st.sets(st.text(min_size=1, max_size=4), max_size=20),
        st.sets(st.text(min_size=1, max_size=4), max_size=20),
    )
    def test_symmetric_and_bounded(self, a, b):
        j = jaccard(a, b)
        assert j == jaccard(b, a)
        assert 0 <= j <= 1


class TestUniversalHash:
    @given(
        st.integers(0, MAX_HASH - 1),
        st.integers(1, MERSENNE_PRIME - 1),
        st.integers(0, MERSENNE_PRIME - 1),
    )
    @settings(max_examples=300)
    def test_kernel_matches_bigint_oracle(self, h, c, d):
        expected = ((h * c + d) % MERSENNE_PRIME) % MAX_HASH
        got = uhash_matrix(
            np.array([h], dtype=np.uint64),
            np.array([c], dtype=np.uint64),
            np.array([d], dtype=np.uint64),
        )
        assert int(got[0]) == expected

    def test_kernel_edge_values(self):
        hs = [0, 1, MAX_HASH - 1]
        cs = [1, 2, MERSENNE_PRIME - 1, MERSENNE_PRIME // 2]
        ds = [0, 1, MERSENNE_PRIME - 1]
        for h in hs:
            for c in cs:
                for d in ds:
                    expected = ((h * c + d) % MERSENNE_PRIME) % MAX_HASH
                    got = uhash_matrix(
                        np.array([h], dtype=np.uint64),
                        np.array([c], dtype=np.uint64),
                        np.array([d], dtype=np.uint64),
                    )
                    assert int(got[0]) == expected, (h, c, d)

    def test_calc_h_unweighted_is_exact_int(self):
        out = calc_h(12345, 999999, 888888, 1)
        assert out == ((12345 * 999999 + 888888) % MERSENNE_PRIME) % MAX_HASH
        assert isinstance(out, int)

    def test_calc_h_weight_two_uses_sqrt_curve(self):
        # x = 0.75 -> y = 1 - sqrt(0.25) = 0.5 exactly
        h = int(0.75 * MAX_HASH)
        c, d = 1, 0
        assert calc_h(h, c, d, 2) == MAX_HASH // 2

    def test_calc_h_range(self):
        for w in (1, 2, 3, 7):
            for h in (0, 1, MAX_HASH - 1):
                assert 0 <= calc_h(h, 12345, 678, w) <= MAX_HASH

    def test_calc_h_monotone_in_weight(self):
        # heavier weight pulls the transformed value down
        h = 3_000_000_000
        vals = [calc_h(h, 17, 5, w) for w in (1, 2, 4, 8)]
        assert vals == sorted(vals, reverse=True)

    def test_calc_h_validates_inputs(self):
        with pytest.raises(ValueError):
            calc_h(MAX_HASH, 1, 0, 1)
        with pytest.raises(ValueError):
            calc_h(0, 0, 0, 1)
        with pytest.raises(ValueError):
            calc_h(0, MERSENNE_PRIME, 0, 1)
        with pytest.raises(ValueError):
            calc_h(0, 1, MERSENNE_PRIME, 1)
        with pytest.raises(ValueError):
            calc_h(0, 1, 0, 0)


class TestHashCoeffs:
    def test_deterministic_from_seed(self):
        a = HashCoeffs.from_seed(SEED, 64)
        b = HashCoeffs.from_seed(SEED, 64)
        assert np.array_equal(a.mult, b.mult)
        assert np.array_equal(a.add, b.add)

    def test_frozen_regression_vector(self):
        c = HashCoeffs.from_seed(SEED, 4)
        assert [int(v) for v in c.mult] == [
            1700522824018875303,
            177524975942996098,
            1782806720887326854,
            209798077444993614,
        ]
        assert [int(v) for v in c.add] == [
            1733066120157246010,
            117706136219337560,
            428375806212895950,
            1597044299004054190,
        ]

    def test_ranges(self):
        c = HashCoeffs.from_seed(b"\x07" * 32, 2048)
        assert int(c.mult.min()) >= 1
        assert int(c.mult.max()) < MERSENNE_PRIME
        assert int(c.add.min()) >= 0
        assert int(c.add.max()) < MERSENNE_PRIME

    def test_positions_are_independent(self):
        # bands*rows distinct pairs; any repeat would correlate bands
        c = HashCoeffs.from_seed(SEED, 512)
        pairs = {(int(m), int(a)) for m, a in zip(c.mult, c.add)}
        assert len(pairs) == 512

    def test_different_seeds_differ(self):
        a = HashCoeffs.from_seed(b"\x00" * 32, 16)
        b = HashCoeffs.from_seed(b"\x01" + b"\x00" * 31, 16)
        assert not np.array_equal(a.mult, b.mult)


def _record(first="john", last="smith", city="springfield"):
    return Record(id="r", fields={"first": first, "last": last, "city": city})


def _specs(weight_name=1):
    return (
        FieldGroupSpec(name="name", members=("first", "last"), shingle_len=3, weight=weight_name),
        FieldGroupSpec(name="place", members=("city",), shingle_len=4),
    )


class TestLshRecord:
    def test_shape_and_determinism(self):
        params = LshParams(bands=25, rows=4, seed=SEED)
        out = lsh_record(_record(), _specs(), params)
        assert len(out) == 25
        assert all(len(sig) == 32 for sig in out.sigs)
        again = lsh_record(_record(), _specs(), params)
        assert out == again

    def test_identical_records_identical_signatures(self):
        params = LshParams(bands=6, rows=3, seed=SEED)
        a = lsh_record(_record(), _specs(), params)
        b = lsh_record(_record(), _specs(), params)
        assert a == b

    def test_empty_record_raises(self):
        params = LshParams(bands=2, rows=2, seed=SEED)
        rec = Record(id="empty", fields={"first": "ab", "last": "", "city": "xy"})
        with pytest.raises(ValueError, match="empty record"):
            lsh_record(rec, _specs(), params)

    def test_partial_groups_are_fine(self):
        # no city shingles (too short), but the name group carries it
        params = LshParams(bands=2, rows=2, seed=SEED)
        rec = Record(id="p", fields={"first": "abcdef", "last": "", "city": "xy"})
        out = lsh_record(rec, _specs(), params)
        assert len(out) == 2

    def test_seed_changes_signatures(self):
        p1 = LshParams(bands=4, rows=2, seed=SEED)
        p2 = LshParams(bands=4, rows=2, seed=b"\xff" * 32)
        assert lsh_record(_record(), _specs(), p1) != lsh_record(_record(), _specs(), p2)

    def test_dataset_cache_agrees_with_single(self):
        params = LshParams(bands=5, rows=2, seed=SEED)
        recs = [_record(), _record("jane", "doe", "rivertown")]
        recs[1] = Record(id="r2", fields=recs[1].fields)
        via_dataset = lsh_dataset(recs, _specs(), params)
        assert via_dataset[0] == lsh_record(recs[0], _specs(), params)
        assert via_dataset[1] == lsh_record(recs[1], _specs(), params)


class TestLshMatch:
    def test_equal_lists_full_hits(self):
        params = LshParams(bands=7, rows=2, seed=SEED)
        sig = lsh_record(_record(), _specs(), params)
        assert lsh_match(sig, sig) == (1, 7)

    def test_single_band_overlap(self):
        a = BandSignatureList(sigs=(b"\x01" * 32, b"\x02" * 32, b"\x03" * 32))
        b = BandSignatureList(sigs=(b"\x09" * 32, b"\x02" * 32, b"\x08" * 32))
        assert lsh_match(a, b) == (1, 1)

    def test_positional_only(self):
        # same digest at different positions is not a hit
        a = BandSignatureList(sigs=(b"\x01" * 32, b"\x02" * 32))
        b = BandSignatureList(sigs=(b"\x02" * 32, b"\x01" * 32))
        assert lsh_match(a, b) == (0, 0)

    def test_length_mismatch(self):
        a = BandSignatureList(sigs=(b"\x01" * 32,))
        b = BandSignatureList(sigs=(b"\x01" * 32, b"\x02" * 32))
        with pytest.raises(ValueError):
            lsh_match(a, b)

    def test_disjoint_records_do_not_match(self):
        params = LshParams(bands=8, rows=4, seed=SEED)
        specs = (FieldGroupSpec(name="g", members=("first",), shingle_len=3),)
        a = lsh_record(Record(id="a", fields={"first": "abcdefghij"}), specs, params)
        b = lsh_record(Record(id="b", fields={"first": "klmnopqrst"}), specs, params)
        assert lsh_match(a, b) == (0, 0)


class TestWeights:
    def test_weighted_shingles_take_max_weight(self):
        specs = (
            FieldGroupSpec(name="a", members=("first",), shingle_len=2, weight=1),
            FieldGroupSpec(name="b", members=("first",), shingle_len=2, weight=3),
        )
        rec = Record(id="r", fields={"first": "abc"})
        assert get_weighted_shingles(rec, specs) == {"ab": 3, "bc": 3}

    def test_duplicate_with_suffixes(self):
        out = duplicate_with_suffixes({"ab"}, 3)
        assert out == {"ab0", "ab1", "ab2"}

    def test_weight_changes_signatures(self):
        params = LshParams(bands=6, rows=2, seed=SEED)
        plain = lsh_record(_record(), _specs(1), params)
        heavy = lsh_record(_record(), _specs(4), params)
        assert plain != heavy


# statistical invariants; seeds pinned so these are deterministic


class TestStatisticalBehavior:
    def test_row_collision_rate_tracks_jaccard(self):
        # J = 6/20 = 0.3 by construction with single-char shingles
        alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
        a, b = set(alphabet[:13]), set(alphabet[7:20])
        assert jaccard(a, b) == Fraction(6, 20)
        n = 10_000
        freq = row_collision_rate(a, b, trials=100, positions=100, seed=11)
        assert abs(freq - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / n)

    def test_band_match_rate_tracks_curve(self):
        alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
        a, b = set(alphabet[:19]), set(alphabet[1:20])
        j = 18 / 20
        bands, rows = 6, 3
        expect = 1 - (1 - j**rows) ** bands
        n = 4000
        freq = band_match_rate(a, b, bands, rows, trials=n, seed=13)
        assert abs(freq - expect) <= 3 * math.sqrt(expect * (1 - expect) / n)

    def test_weight_equivalence_with_duplication(self):
        # weight-3 group vs the same shingles duplicated 3x with suffixes
        import numpy as np

        from mc_kernel import draw_coeffs, weighted_row_minima, row_minima

        base = {"abc", "bcd", "cde", "def", "efg", "fgh"}
        dup = duplicate_with_suffixes(base, 3)
        bands, rows = 4, 2
        positions = bands * rows
        trials = 10_000
        rng = np.random.default_rng(29)

        other = {"xyz", "yzw", "zwv", "wvu"}
        matched_w = 0
        matched_d = 0
        chunk = 1000
        for lo in range(0, trials, chunk):
            mult, add = draw_coeffs(rng, chunk, positions)
            mw_a = weighted_row_minima([(digests_of(base), 3)], mult, add)
            mw_b = weighted_row_minima(
                [(digests_of(base | other), 3)], mult, add
            )
            eq = (mw_a.reshape(chunk, bands, rows) == mw_b.reshape(chunk, bands, rows)).all(
                axis=2
            )
            matched_w += int(eq.any(axis=1).sum())

            md_a = row_minima(digests_of(dup), mult, add)
            md_b = row_minima(digests_of(dup | duplicate_with_suffixes(other, 3)), mult, add)
            eq = (md_a.reshape(chunk, bands, rows) == md_b.reshape(chunk, bands, rows)).all(
                axis=2
            )
            matched_d += int(eq.any(axis=1).sum())

        p_w = matched_w / trials
        p_d = matched_d / trials
        pbar = (p_w + p_d) / 2
        sigma = math.sqrt(2 * pbar * (1 - pbar) / trials)
        assert abs(p_w - p_d) <= 3 * sigma, (p_w, p_d)


class TestShingleDigest:
    def test_frozen_value(self):
        assert shingle_digest("abcde") == 918283534

    def test_fits_32_bits(self):
        for s in ("", "a", "hello world", "ünïcode"):
            assert 0 <= shingle_digest(s) < MAX_HASH


class TestCoeffsCache:
    def test_cached_instance_reused(self):
        p = LshParams(bands=3, rows=3, seed=SEED)
        assert coeffs_for(p) is coeffs_for(p)
