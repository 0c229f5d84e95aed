import pytest

from sqlforge.errors import ParseError
from sqlforge.sql_analysis import (
    MISSING_QUOTATION,
    SYNTAX_ERROR,
    UNRESOLVED,
    VALID,
    WRONG_COLUMN_NAME,
    WRONG_TABLE_NAME,
    extract_references,
    validate,
    validate_against_tables,
)


class TestExtractReferences:
    def test_join_with_qualified_columns(self):
        refs = extract_references(
            "SELECT min(player.hs), tryout.ppos FROM tryout JOIN player "
            "ON tryout.pid = player.pid GROUP BY tryout.ppos"
        )
        assert refs.tables == {"tryout", "player"}
        assert refs.columns == {
            ("player", "hs"),
            ("tryout", "ppos"),
            ("tryout", "pid"),
            ("player", "pid"),
        }

    def test_no_references(self):
        refs = extract_references("SELECT 1")
        assert refs.tables == set()
        assert refs.columns == set()

    def test_count_star(self):
        refs = extract_references("SELECT count(*) FROM singer")
        assert refs.tables == {"singer"}
        assert refs.columns == set()

    def test_bare_columns_attribute_to_single_table(self):
        refs = extract_references("SELECT name, age FROM singer WHERE age > 20")
        assert refs.columns == {("singer", "name"), ("singer", "age")}

    def test_bare_columns_unresolved_with_two_tables(self):
        refs = extract_references("SELECT name FROM a JOIN b ON a.x = b.x")
        assert (UNRESOLVED, "name") in refs.columns

    def test_alias_resolution(self):
        refs = extract_references(
            "SELECT T1.name FROM singer AS T1 JOIN concert AS T2 "
            "ON T1.singer_id = T2.singer_id"
        )
        assert refs.tables == {"singer", "concert"}
        assert ("singer", "name") in refs.columns

    def test_implicit_alias_without_as(self):
        refs = extract_references("SELECT s.name FROM singer s")
        assert refs.tables == {"singer"}
        assert refs.columns == {("singer", "name")}

    def test_subquery_tables_collected(self):
        refs = extract_references(
            "SELECT name FROM singer WHERE singer_id IN "
            "(SELECT singer_id FROM singer_in_concert)"
        )
        assert refs.tables == {"singer", "singer_in_concert"}
        assert ("singer_in_concert", "singer_id") in refs.columns

    def test_order_by_top_level(self):
        assert extract_references("SELECT a FROM t ORDER BY a").has_order_by
        assert not extract_references("SELECT a FROM t").has_order_by

    def test_order_by_inside_subquery_is_not_top_level(self):
        refs = extract_references(
            "SELECT x FROM (SELECT a AS x FROM t ORDER BY a) sub"
        )
        assert not refs.has_order_by

    def test_empty_sql_raises(self):
        with pytest.raises(ParseError):
            extract_references("   ")

    def test_unterminated_string_raises(self):
        with pytest.raises(ParseError):
            extract_references("SELECT 'unclosed FROM t")

    def test_pure_and_idempotent(self):
        sql = "SELECT a.x, b.y FROM alpha a JOIN beta b ON a.k = b.k ORDER BY a.x"
        first = extract_references(sql)
        second = extract_references(sql)
        assert first.tables == second.tables
        assert first.columns == second.columns
        assert first.has_order_by == second.has_order_by


class TestValidate:
    def test_wrong_column_attributed_table_in_detail(self, schemas):
        report = validate(
            "SELECT min(HS), ppos FROM player GROUP BY ppos", schemas["soccer_tryout"]
        )
        assert report.status == WRONG_COLUMN_NAME
        assert report.detail == "ppos not in player"

    def test_reference_chosen_query_is_valid(self, schemas):
        report = validate(
            "SELECT min(player.hs) , tryout.ppos FROM tryout JOIN player "
            "ON tryout.pid = player.pid GROUP BY tryout.ppos",
            schemas["soccer_tryout"],
        )
        assert report.is_valid
        assert report.detail == ""

    def test_all_gold_sql_valid(self, samples, schemas):
        for sample in samples:
            report = validate(sample.gold_sql, schemas[sample.db_id])
            assert report.is_valid, (sample.sample_id, report)

    def test_wrong_table(self, schemas):
        report = validate("SELECT * FROM nonexistent", schemas["shop"])
        assert report.status == WRONG_TABLE_NAME
        assert "nonexistent" in report.detail

    def test_syntax_error(self, schemas):
        report = validate("SELECT FROM WHERE", schemas["shop"])
        assert report.status == SYNTAX_ERROR
        assert report.detail

    def test_missing_quotation_for_space_column(self, schemas):
        report = validate("SELECT free text FROM stops", schemas["transit"])
        assert report.status == MISSING_QUOTATION
        assert report.detail == "free text"

    def test_quoted_space_column_is_valid(self, schemas):
        report = validate('SELECT "free text" FROM stops', schemas["transit"])
        assert report.is_valid

    def test_case_insensitive_table_and_column(self, schemas):
        report = validate("SELECT NAME FROM SINGER", schemas["concert_singer"])
        assert report.status == VALID

    def test_valid_report_has_empty_detail(self, schemas):
        report = validate("SELECT count(*) FROM customers", schemas["shop"])
        assert report.status == VALID
        assert report.detail == ""

    def test_validate_against_table_subset(self, schemas):
        tables = [t for t in schemas["shop"].tables if t.name == "customers"]
        assert validate_against_tables("SELECT name FROM customers", tables).is_valid
        report = validate_against_tables("SELECT total FROM orders", tables)
        assert report.status == WRONG_TABLE_NAME


class TestValidateExecutionConsistency:
    def test_static_table_or_column_errors_also_fail_at_execution(
        self, corpus, samples, schemas
    ):
        # Every statically detected table/column defect must also error at
        # execution on the schema's database.
        from sqlforge.executor import EXEC_ERROR, execute

        bad_preds = {
            "shop": "SELECT * FROM missing_table",
            "soccer_tryout": "SELECT min(HS), ppos FROM player GROUP BY ppos",
            "concert_singer": "SELECT bogus FROM singer",
        }
        for db_id, sql in bad_preds.items():
            report = validate(sql, schemas[db_id])
            assert report.status in (WRONG_TABLE_NAME, WRONG_COLUMN_NAME)
            outcome = execute(corpus.db_path(db_id), sql)
            assert outcome.kind == EXEC_ERROR
