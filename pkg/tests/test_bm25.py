from __future__ import annotations

import math
import random

import pytest

from gritkit.bm25 import (
    Bm25Params,
    build_index,
    bm25_search,
    doc_text,
    idf,
    load_index,
    save_index,
    search_all,
    tokenize,
)
from gritkit.errors import EmptyCatalog, FormatError
from gritkit.models import ProductDoc, Query

from oracles import bm25_score_oracle

# Frozen expected scores for the three-document fixture, computed by hand
# from the closed-form formula (k1=1.2, b=0.75, lengths 2/3/3, avg 8/3).
RED_SHOE_SCORES = {
    "D1": 1.047096693003158,
    "D2": 0.6243067075264112,
    "D3": 0.44713858782297017,
}
RED_SCORES = {"D1": 0.523548346501579, "D2": 0.6243067075264112}
BLUE_BOOT_SCORE = 0.9331132352976423  # identical for D2 and D3


class TestTokenizer:
    def test_lowercases_and_splits_on_punctuation(self):
        assert tokenize("06 Honda Odyssey A/C compressor") == [
            "06", "honda", "odyssey", "a", "c", "compressor",
        ]

    def test_underscore_splits(self):
        assert tokenize("usb_c hub") == ["usb", "c", "hub"]

    def test_empty_and_symbol_only(self):
        assert tokenize("") == []
        assert tokenize("!!! --- ???") == []

    def test_digits_kept(self):
        assert tokenize("3.5mm jack") == ["3", "5mm", "jack"]


class TestIndexBuild:
    def test_ordinals_follow_sorted_product_ids(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        assert index.doc_ids == ["D1", "D2", "D3"]
        assert index.doc_lengths == [2, 3, 3]
        assert index.doc_count == 3
        assert index.avg_doc_length == pytest.approx(8 / 3)

    def test_postings_sorted_with_term_frequencies(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        assert index.postings["red"] == [(0, 1), (1, 2)]
        assert index.postings["shoe"] == [(0, 1), (2, 1)]
        ordinals = [o for o, _ in index.postings["red"]]
        assert ordinals == sorted(ordinals)

    def test_field_selection_changes_lengths(self, catalog_file):
        from gritkit.ingest import parse_products

        catalog = parse_products(catalog_file)
        title_only = build_index(catalog, fields=("title",))
        everything = build_index(catalog)
        assert sum(everything.doc_lengths) > sum(title_only.doc_lengths)

    def test_unknown_field_rejected(self, small_catalog):
        with pytest.raises(ValueError, match="unknown index field"):
            build_index(small_catalog, fields=("title", "price"))

    def test_empty_catalog_rejected(self):
        with pytest.raises(EmptyCatalog):
            build_index({})

    def test_doc_text_skips_missing_fields(self):
        doc = ProductDoc("P1", "red shoe", brand="acme")
        assert doc_text(doc) == "red shoe acme"


class TestScoring:
    def test_single_doc_single_term(self):
        index = build_index({"D": ProductDoc("D", "red")})
        run = bm25_search(index, Query("q", "red"), n=10)
        assert run.entries[0].score == pytest.approx(math.log(4 / 3), abs=1e-12)

    def test_frozen_three_doc_values(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        run = bm25_search(index, Query("q", "red shoe"), n=10)
        got = {e.product_id: e.score for e in run}
        assert set(got) == set(RED_SHOE_SCORES)
        for pid, expected in RED_SHOE_SCORES.items():
            assert got[pid] == pytest.approx(expected, abs=1e-12)
        assert run.product_ids() == ("D1", "D2", "D3")

    def test_term_frequency_beats_short_length_here(self, small_catalog):
        # "red" appears twice in D2; that outweighs D1's shorter document.
        index = build_index(small_catalog, fields=("title",))
        run = bm25_search(index, Query("q", "red"), n=10)
        got = {e.product_id: e.score for e in run}
        assert got == pytest.approx(RED_SCORES, abs=1e-12)
        assert run.product_ids() == ("D2", "D1")

    def test_exact_tie_breaks_by_ascending_id(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        run = bm25_search(index, Query("q", "blue boot"), n=10)
        assert run.product_ids() == ("D2", "D3")
        assert run.entries[0].score == run.entries[1].score == pytest.approx(
            BLUE_BOOT_SCORE, abs=1e-12)

    def test_repeated_query_terms_count_once(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        once = bm25_search(index, Query("q", "red"), n=10)
        thrice = bm25_search(index, Query("q", "red red red"), n=10)
        assert [(e.product_id, e.score) for e in once] == [
            (e.product_id, e.score) for e in thrice]

    def test_unmatched_query_gives_empty_run(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        run = bm25_search(index, Query("q", "zzz qqq"), n=10)
        assert len(run) == 0

    def test_depth_truncates(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        run = bm25_search(index, Query("q", "red shoe"), n=2)
        assert run.product_ids() == ("D1", "D2")

    def test_depth_must_be_positive(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        with pytest.raises(ValueError):
            bm25_search(index, Query("q", "red"), n=0)

    def test_idf_of_absent_term(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        assert idf(index, "zzz") == pytest.approx(math.log(1 + 3.5 / 0.5))

    def test_matches_literal_oracle_on_random_corpora(self):
        rng = random.Random(42)
        vocab = ["red", "blue", "shoe", "boot", "hub", "usb", "lamp", "oak"]
        for trial in range(30):
            docs = {
                f"P{i}": " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 8)))
                for i in range(rng.randint(2, 12))
            }
            catalog = {pid: ProductDoc(pid, text) for pid, text in docs.items()}
            doc_terms = {pid: text.split() for pid, text in docs.items()}
            index = build_index(catalog, fields=("title",))
            query = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 3)))
            run = bm25_search(index, Query("q", query), n=len(docs))
            for entry in run:
                expected = bm25_score_oracle(query, doc_terms, entry.product_id)
                assert entry.score == pytest.approx(expected, abs=1e-12)

    def test_search_all_covers_every_query(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        runs = search_all(index, [Query("a", "red"), Query("b", "shoe")], n=5)
        assert set(runs) == {"a", "b"}


class TestPersistence:
    def test_round_trip_preserves_structure_and_scores(self, small_catalog, tmp_path):
        index = build_index(small_catalog)
        path = tmp_path / "idx.txt"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.doc_ids == index.doc_ids
        assert loaded.doc_lengths == index.doc_lengths
        assert loaded.postings == index.postings
        q = Query("q", "red shoe")
        before = [(e.product_id, e.score) for e in bm25_search(index, q, 10)]
        after = [(e.product_id, e.score) for e in bm25_search(loaded, q, 10)]
        assert before == after

    def test_save_is_byte_deterministic(self, small_catalog, tmp_path):
        index = build_index(small_catalog)
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        save_index(index, a)
        save_index(build_index(dict(reversed(list(small_catalog.items())))), b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "idx.txt"
        path.write_text("some-other-format\n3\n", encoding="utf-8")
        with pytest.raises(FormatError) as err:
            load_index(path)
        assert err.value.line == 1

    def test_corrupt_postings_rejected(self, small_catalog, tmp_path):
        path = tmp_path / "idx.txt"
        save_index(build_index(small_catalog), path)
        text = path.read_text(encoding="utf-8")
        path.write_text(text.replace("0:1", "9:1", 1), encoding="utf-8")
        with pytest.raises(FormatError):
            load_index(path)


class TestParams:
    def test_defaults(self):
        params = Bm25Params()
        assert params.k1 == 1.2 and params.b == 0.75

    def test_validation(self):
        with pytest.raises(ValueError):
            Bm25Params(k1=-0.1)
        with pytest.raises(ValueError):
            Bm25Params(b=1.5)

    def test_b_zero_removes_length_preference(self, small_catalog):
        index = build_index(small_catalog, fields=("title",))
        run = bm25_search(index, Query("q", "shoe"), n=10, params=Bm25Params(b=0.0))
        got = {e.product_id: e.score for e in run}
        assert got["D1"] == pytest.approx(got["D3"], abs=1e-12)
