import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsamgsr.data import DataError
from wsamgsr.io import (ParseError, RunConfig, RunReport, format_table, parse_edges,
                        parse_expression, parse_gmt, render_text, write_expression, write_gmt)
from wsamgsr.reduction import ConfigError


def write(path, text):
    path.write_text(text)
    return path


class TestGMT:
    def test_basic_line(self, tmp_path):
        coll = parse_gmt(write(tmp_path / "s.gmt", "S1\tdesc\tA\tB\n"))
        assert coll["S1"] == ("A", "B")

    def test_duplicate_gene_warns(self, tmp_path):
        with pytest.warns(UserWarning, match="duplicate"):
            coll = parse_gmt(write(tmp_path / "s.gmt", "S1\tdesc\tA\tA\n"))
        assert coll["S1"] == ("A",)

    def test_empty_file_warns(self, tmp_path):
        with pytest.warns(UserWarning, match="no gene sets"):
            coll = parse_gmt(write(tmp_path / "s.gmt", ""))
        assert len(coll) == 0

    def test_short_line_has_line_number(self, tmp_path):
        with pytest.raises(ParseError, match=r"s\.gmt:2:") as err:
            parse_gmt(write(tmp_path / "s.gmt", "S1\td\tA\nS2\tonly-desc\n"))
        assert err.value.line == 2

    def test_duplicate_name(self, tmp_path):
        with pytest.raises(ParseError, match="duplicate gene set name"):
            parse_gmt(write(tmp_path / "s.gmt", "S1\td\tA\nS1\td\tB\n"))

    def test_trailing_tab_and_blank_lines(self, tmp_path):
        coll = parse_gmt(write(tmp_path / "s.gmt", "\nS1\td\tA\tB\t\n\n"))
        assert coll["S1"] == ("A", "B")

    def test_write_roundtrip(self, tmp_path):
        coll = parse_gmt(write(tmp_path / "a.gmt", "S1\td\tA\tB\nS2\td\tC\n"))
        write_gmt(coll, tmp_path / "b.gmt")
        assert parse_gmt(tmp_path / "b.gmt") == coll


class TestExpression:
    def _files(self, tmp_path, matrix, labels):
        return write(tmp_path / "x.tsv", matrix), write(tmp_path / "y.tsv", labels)

    def test_small(self, tmp_path):
        ds = parse_expression(*self._files(
            tmp_path, "gene\ts1\ts2\ts3\nA\t1\t2\t3\nB\t4\t5\t6.5\n",
            "s1\tx\ns2\ty\ns3\tx\n"))
        assert ds.values.shape == (2, 3)
        assert ds.labels == ("x", "y", "x")
        np.testing.assert_array_equal(ds.values[1], [4, 5, 6.5])

    def test_label_order_follows_matrix(self, tmp_path):
        ds = parse_expression(*self._files(
            tmp_path, "gene\ts1\ts2\nA\t1\t2\n", "sample\tclass\ns2\ty\ns1\tx\n"))
        assert ds.labels == ("x", "y")

    def test_missing_label_names_sample(self, tmp_path):
        with pytest.raises(DataError, match="s3"):
            parse_expression(*self._files(
                tmp_path, "gene\ts1\ts2\ts3\nA\t1\t2\t3\n", "s1\tx\ns2\ty\n"))

    def test_extra_label_names_sample(self, tmp_path):
        with pytest.raises(DataError, match="s9"):
            parse_expression(*self._files(
                tmp_path, "gene\ts1\ts2\nA\t1\t2\n", "s1\tx\ns2\ty\ns9\tx\n"))

    def test_na_cell_coordinates(self, tmp_path):
        with pytest.raises(ParseError, match=r"x\.tsv:3:3") as err:
            parse_expression(*self._files(
                tmp_path, "gene\ts1\ts2\nA\t1\t2\nB\t3\tNA\n", "s1\tx\ns2\ty\n"))
        assert (err.value.line, err.value.column) == (3, 3)

    @pytest.mark.parametrize("cell", ["abc", "", "nan", "inf"])
    def test_non_numeric(self, tmp_path, cell):
        with pytest.raises(ParseError, match="non-numeric"):
            parse_expression(*self._files(
                tmp_path, f"gene\ts1\ts2\nA\t1\t{cell}\n", "s1\tx\ns2\ty\n"))

    def test_duplicate_gene(self, tmp_path):
        with pytest.raises(ParseError, match="duplicate gene id 'A'"):
            parse_expression(*self._files(
                tmp_path, "gene\ts1\ts2\nA\t1\t2\nA\t3\t4\n", "s1\tx\ns2\ty\n"))

    def test_duplicate_sample_in_header(self, tmp_path):
        with pytest.raises(ParseError, match="duplicate sample id 's1'"):
            parse_expression(*self._files(
                tmp_path, "gene\ts1\ts1\nA\t1\t2\n", "s1\tx\n"))

    def test_duplicate_sample_in_labels(self, tmp_path):
        with pytest.raises(ParseError, match="duplicate sample id"):
            parse_expression(*self._files(
                tmp_path, "gene\ts1\ts2\nA\t1\t2\n", "s1\tx\ns1\ty\ns2\tx\n"))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(ParseError, match=":2:"):
            parse_expression(*self._files(
                tmp_path, "gene\ts1\ts2\nA\t1\n", "s1\tx\ns2\ty\n"))

    def test_write_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        x, y = self._files(tmp_path, "gene\ts1\ts2\ts3\nA\t1\t2\t3\n", "s1\ta\ns2\tb\ns3\ta\n")
        ds = parse_expression(x, y)
        from wsamgsr.data import ExpressionDataset
        ds = ExpressionDataset(("g1", "g2"), rng.normal(size=(2, 3)), ds.labels, ds.sample_ids)
        write_expression(ds, tmp_path / "x2.tsv", tmp_path / "y2.tsv")
        back = parse_expression(tmp_path / "x2.tsv", tmp_path / "y2.tsv")
        np.testing.assert_array_equal(back.values, ds.values)
        assert back.labels == ds.labels and back.gene_ids == ds.gene_ids


class TestEdges:
    def test_pair(self, tmp_path):
        assert parse_edges(write(tmp_path / "e.tsv", "A\tB\n")).pairs == [("A", "B")]

    def test_self_loop_counted(self, tmp_path):
        edges = parse_edges(write(tmp_path / "e.tsv", "A\tA\nA\tB\n"))
        assert edges.pairs == [("A", "B")] and edges.self_loops == 1

    def test_reversed_duplicate(self, tmp_path):
        edges = parse_edges(write(tmp_path / "e.tsv", "A\tB\nB\tA\n"))
        assert len(edges.pairs) == 1 and edges.duplicates == 1

    @pytest.mark.parametrize("line", ["A\n", "A\tB\tC\n", "A\t\n"])
    def test_bad_column_count(self, tmp_path, line):
        with pytest.raises(ParseError, match=r"e\.tsv:2:"):
            parse_edges(write(tmp_path / "e.tsv", "X\tY\n" + line))

    def test_header(self, tmp_path):
        edges = parse_edges(write(tmp_path / "e.tsv", "geneA\tgeneB\nA\tB\n"), header=True)
        assert edges.pairs == [("A", "B")]


class TestRunConfig:
    def test_weighted_without_ppi(self):
        with pytest.raises(ConfigError, match="--ppi"):
            RunConfig(weighted=True, expression="/nonexistent").validate()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            RunConfig(expression=str(tmp_path / "nope.tsv")).validate()

    def test_required(self):
        with pytest.raises(ConfigError, match="--gmt"):
            RunConfig().validate(("gmt",))

    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(c_star=1.0), dict(B=0), dict(K=1),
                                    dict(grid=(0.5, 1.2)), dict(s0="mean"),
                                    dict(normalization="rank"), dict(threads=0)])
    def test_ranges(self, kw):
        with pytest.raises(ConfigError):
            RunConfig(**kw).validate()

    def test_execution_details_not_serialized(self):
        d = RunConfig(out="/tmp/x", threads=8).to_dict()
        assert "out" not in d and "threads" not in d


json_scalars = st.one_of(st.none(), st.booleans(), st.integers(-10**6, 10**6),
                         st.floats(allow_nan=False, allow_infinity=False), st.text(max_size=8))
json_values = st.recursive(json_scalars, lambda inner: st.one_of(
    st.lists(inner, max_size=4), st.dictionaries(st.text(max_size=6), inner, max_size=4)),
    max_leaves=12)


class TestRunReport:
    @settings(max_examples=60, deadline=None)
    @given(st.dictionaries(st.text(max_size=6), json_values, max_size=5),
           st.lists(st.text(max_size=10), max_size=3), json_values)
    def test_roundtrip(self, config, warns, extra):
        rep = RunReport("reduce", "0.1.0", config, "abc", signature={"genes": ["a"]},
                        traces=[{"x": extra}], warnings=warns).stamp()
        back = RunReport.from_json(rep.to_json())
        assert back == rep
        assert back.to_json() == rep.to_json()

    def test_timestamp_is_only_volatile_field(self):
        a = RunReport("screen", "0.1.0", {"alpha": 0.05})
        b = RunReport("screen", "0.1.0", {"alpha": 0.05})
        a.created, b.created = "2020-01-01T00:00:00+00:00", "2030-01-01T00:00:00+00:00"
        assert a != b and a.without_timestamp() == b.without_timestamp()

    def test_json_is_sorted(self):
        text = RunReport("screen", "0.1.0", {"b": 1, "a": 2}).to_json()
        keys = list(json.loads(text).keys())
        assert keys == sorted(keys)

    def test_render_sections(self):
        rep = RunReport("stability", "0.1.0", {}, stability={"rand_gene": 1.0,
                                                             "rand_pathway": 0.5, "k": 2})
        text = render_text(rep)
        assert "Stability over 2 runs" in text and "pathway" in text


def test_format_table_alignment():
    out = format_table(["name", "value"], [["a", 1.5], ["long-name", 22]])
    lines = out.splitlines()
    assert len({len(line) for line in lines}) == 1
    assert lines[1].startswith("----")
