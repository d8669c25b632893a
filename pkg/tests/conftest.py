from __future__ import annotations

import pytest

from gritkit.models import Judgment, JudgmentSet, ProductDoc, Query, RelevanceLabel

CATALOG_TSV = """product_id\tproduct_title\tproduct_description\tproduct_brand\tproduct_color\tproduct_locale
B01\tred running shoe\tlight trail shoe\tacme\tred\tus
B02\tred leather boot\t\tacme\tred\tus
B03\tblue sneaker shoe\tcasual\tzeta\tblue\tus
B04\ttrail gaiter\twaterproof ankle gaiter\tzeta\tgreen\tus
B05\tshoe polish kit\tpolish and brush\tacme\tblack\tus
"""

JUDGMENTS_TSV = """query_id\tquery\tproduct_id\tesci_label\tsplit\tproduct_locale
t1\tred shoe\tB01\tE\ttrain\tus
t1\tred shoe\tB04\tS\ttrain\tus
t1\tred shoe\tB05\tC\ttrain\tus
t2\ttrail shoe\tB01\tE\ttrain\tus
t2\ttrail shoe\tB04\tE\ttrain\tus
q1\tred shoe\tB01\tE\ttest\tus
q1\tred shoe\tB04\tE\ttest\tus
q2\tboot\tB02\tE\ttest\tus
q2\tboot\tB05\tI\ttest\tus
"""

QUERIES_TSV = "query_id\tquery\nq1\tred shoe\nq2\tboot\n"


@pytest.fixture
def catalog_file(tmp_path):
    path = tmp_path / "catalog.tsv"
    path.write_text(CATALOG_TSV, encoding="utf-8")
    return path


@pytest.fixture
def judgments_file(tmp_path):
    path = tmp_path / "judgments.tsv"
    path.write_text(JUDGMENTS_TSV, encoding="utf-8")
    return path


@pytest.fixture
def queries_file(tmp_path):
    path = tmp_path / "queries.tsv"
    path.write_text(QUERIES_TSV, encoding="utf-8")
    return path


@pytest.fixture
def small_catalog() -> dict[str, ProductDoc]:
    return {
        "D1": ProductDoc("D1", "red shoe"),
        "D2": ProductDoc("D2", "red red boot"),
        "D3": ProductDoc("D3", "blue sneaker shoe"),
    }


@pytest.fixture
def test_judgments() -> JudgmentSet:
    judgments = [
        Judgment("q1", "B01", RelevanceLabel.EXACT, "test"),
        Judgment("q1", "B04", RelevanceLabel.EXACT, "test"),
        Judgment("q2", "B02", RelevanceLabel.EXACT, "test"),
        Judgment("q2", "B05", RelevanceLabel.IRRELEVANT, "test"),
    ]
    queries = {"q1": Query("q1", "red shoe"), "q2": Query("q2", "boot")}
    return JudgmentSet(judgments, queries)
