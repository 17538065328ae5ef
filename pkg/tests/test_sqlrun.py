"""Column normalization and the polars SQL backend."""

import pytest

from tablescout.errors import EngineError
from tablescout.sqlrun import PolarsSqlEngine, normalized_columns

from conftest import write_csv


class TestNormalizedColumns:
    def test_strip_and_casefold(self):
        assert normalized_columns(["  Sale Amount ", "YEAR"]) == ["sale amount", "year"]

    def test_order_preserved(self):
        assert normalized_columns(["b", "a", "c"]) == ["b", "a", "c"]

    def test_collisions_get_numeric_suffixes(self):
        assert normalized_columns(["Name", "name", "NAME"]) == ["name", "name_2", "name_3"]

    def test_distinct_names_untouched(self):
        assert normalized_columns(["year", "year total"]) == ["year", "year total"]

    def test_empty(self):
        assert normalized_columns([]) == []


@pytest.fixture
def cities_csv(tmp_path):
    path = tmp_path / "cities.csv"
    write_csv(path, ["City Name", "Population", "Region"], [
        ["London", "9000000", "south"],
        ["Leeds", "800000", "north"],
        ["Lyon", "500000", "east"],
    ])
    return path


@pytest.fixture
def engine():
    return PolarsSqlEngine()


class TestPolarsSqlEngine:
    def test_engine_id(self, engine):
        assert engine.id == "polars"

    def test_select_with_bare_identifier(self, engine, cities_csv):
        rows = engine.run('SELECT region FROM cities WHERE region = \'north\'',
                          "cities", cities_csv)
        assert rows == [("north",)]

    def test_headers_are_normalized_for_sql(self, engine, cities_csv):
        # the file says "City Name"; SQL sees the casefolded form
        rows = engine.run('SELECT "city name" FROM cities WHERE "city name" = \'Lyon\'',
                          "cities", cities_csv)
        assert rows == [("Lyon",)]

    def test_numeric_column_typed(self, engine, cities_csv):
        rows = engine.run('SELECT "population" FROM cities WHERE "city name" = \'Leeds\'',
                          "cities", cities_csv)
        assert rows == [(800000,)]

    def test_ilike_is_case_insensitive(self, engine, cities_csv):
        rows = engine.run(
            'SELECT "city name" FROM cities WHERE CAST("city name" AS VARCHAR) ILIKE \'%LON%\'',
            "cities", cities_csv)
        assert rows == [("London",)]

    def test_cast_lets_ilike_hit_numbers(self, engine, cities_csv):
        rows = engine.run(
            'SELECT "city name" FROM cities WHERE CAST("population" AS VARCHAR) ILIKE \'%9000000%\'',
            "cities", cities_csv)
        assert rows == [("London",)]

    def test_aggregate(self, engine, cities_csv):
        assert engine.run("SELECT count(*) FROM cities", "cities", cities_csv) == [(3,)]

    def test_no_match_returns_empty(self, engine, cities_csv):
        rows = engine.run('SELECT region FROM cities WHERE region = \'west\'',
                          "cities", cities_csv)
        assert rows == []

    def test_bad_sql_raises(self, engine, cities_csv):
        with pytest.raises(EngineError, match="cities"):
            engine.run("SELECT FROM WHERE", "cities", cities_csv)

    def test_unknown_column_raises(self, engine, cities_csv):
        with pytest.raises(EngineError):
            engine.run('SELECT "ghost" FROM cities', "cities", cities_csv)

    def test_unknown_table_raises(self, engine, cities_csv):
        with pytest.raises(EngineError):
            engine.run("SELECT * FROM elsewhere", "cities", cities_csv)

    def test_missing_file_raises(self, engine, tmp_path):
        with pytest.raises(EngineError):
            engine.run("SELECT * FROM ghost", "ghost", tmp_path / "ghost.csv")
