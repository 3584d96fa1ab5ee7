import numpy as np
import pytest

from hallsand.ingest import (
    DEFAULT_MEAN_LEAKAGE,
    TableError,
    list_years,
    parse_io_table,
    synth_substrate,
    write_io_table,
)

FLOWS_HEADER = "year,src_country,src_sector,dst_country,dst_sector,value\n"
ROW_USE_HEADER = "year,country,sector,gross_use\n"


def write_flows(tmp_path, body, name="flows.csv", header=FLOWS_HEADER):
    p = tmp_path / name
    p.write_text(header + body)
    return p


def test_parse_basic_two_node(tmp_path):
    p = write_flows(
        tmp_path,
        "2014,USA,AGR,DEU,MAN,3.0\n2014,DEU,MAN,USA,AGR,1.5\n",
    )
    table = parse_io_table(p, 2014)
    assert table.n == 2
    assert table.year == 2014
    # lexicographic (country, sector) ordering puts DEU before USA
    assert [nd.label for nd in table.nodes] == ["DEU_MAN", "USA_AGR"]
    Z = table.Z.toarray()
    assert Z[table.index_of("USA", "AGR"), table.index_of("DEU", "MAN")] == 3.0
    assert Z[table.index_of("DEU", "MAN"), table.index_of("USA", "AGR")] == 1.5
    # no row-use file: gross use defaults to the outflow sums
    np.testing.assert_array_equal(table.row_use_total, table.outflow_totals())


def test_parse_filters_year(tmp_path):
    p = write_flows(
        tmp_path,
        "2013,USA,AGR,DEU,MAN,9.0\n2014,USA,AGR,DEU,MAN,3.0\n",
    )
    table = parse_io_table(p, 2014)
    assert table.total_flow() == 3.0
    assert list_years(p) == [2013, 2014]


def test_parse_missing_column(tmp_path):
    p = tmp_path / "flows.csv"
    p.write_text("year,src_country,value\n2014,USA,1.0\n")
    with pytest.raises(TableError):
        parse_io_table(p, 2014)


def test_parse_rejects_negative_value(tmp_path):
    p = write_flows(tmp_path, "2014,USA,AGR,DEU,MAN,-2.0\n")
    with pytest.raises(TableError, match="row 2"):
        parse_io_table(p, 2014)


def test_parse_rejects_non_numeric_value(tmp_path):
    p = write_flows(tmp_path, "2014,USA,AGR,DEU,MAN,abc\n")
    with pytest.raises(TableError, match="row 2"):
        parse_io_table(p, 2014)


def test_parse_rejects_non_finite_value(tmp_path):
    p = write_flows(tmp_path, "2014,USA,AGR,DEU,MAN,inf\n")
    with pytest.raises(TableError):
        parse_io_table(p, 2014)


def test_parse_rejects_duplicate_edge(tmp_path):
    p = write_flows(
        tmp_path,
        "2014,USA,AGR,DEU,MAN,1.0\n2014,USA,AGR,DEU,MAN,2.0\n",
    )
    with pytest.raises(TableError, match="duplicate"):
        parse_io_table(p, 2014)


def test_parse_empty_year(tmp_path):
    p = write_flows(tmp_path, "2013,USA,AGR,DEU,MAN,1.0\n")
    with pytest.raises(TableError, match="no edges"):
        parse_io_table(p, 2013 + 1)


def test_parse_tolerates_utf8_bom(tmp_path):
    p = tmp_path / "flows.csv"
    p.write_bytes(b"\xef\xbb\xbf" + (FLOWS_HEADER + "2014,USA,AGR,DEU,MAN,1.0\n").encode())
    table = parse_io_table(p, 2014)
    assert table.n == 2


def test_row_use_companion(tmp_path):
    p = write_flows(tmp_path, "2014,USA,AGR,DEU,MAN,3.0\n2014,DEU,MAN,USA,AGR,1.5\n")
    r = tmp_path / "row_use.csv"
    r.write_text(ROW_USE_HEADER + "2014,USA,AGR,12.0\n2014,DEU,MAN,3.0\n")
    # sibling row_use.csv is discovered without being named explicitly
    table = parse_io_table(p, 2014)
    assert table.row_use_total[table.index_of("USA", "AGR")] == 12.0
    assert table.row_use_total[table.index_of("DEU", "MAN")] == 3.0


def test_row_use_unknown_node(tmp_path):
    p = write_flows(tmp_path, "2014,USA,AGR,DEU,MAN,3.0\n")
    r = tmp_path / "uses.csv"
    r.write_text(ROW_USE_HEADER + "2014,FRA,AGR,5.0\n")
    with pytest.raises(TableError, match="unknown node"):
        parse_io_table(p, 2014, row_use_path=r)


def test_row_use_below_outflow(tmp_path):
    p = write_flows(tmp_path, "2014,USA,AGR,DEU,MAN,3.0\n")
    r = tmp_path / "uses.csv"
    r.write_text(ROW_USE_HEADER + "2014,USA,AGR,2.0\n")
    with pytest.raises(TableError, match="below outflow"):
        parse_io_table(p, 2014, row_use_path=r)


def test_row_use_duplicate_entry(tmp_path):
    p = write_flows(tmp_path, "2014,USA,AGR,DEU,MAN,3.0\n")
    r = tmp_path / "uses.csv"
    r.write_text(ROW_USE_HEADER + "2014,USA,AGR,5.0\n2014,USA,AGR,6.0\n")
    with pytest.raises(TableError, match="duplicate row-use"):
        parse_io_table(p, 2014, row_use_path=r)


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_synth_round_trip_exact(tmp_path, seed):
    table = synth_substrate(12, 0.3, seed)
    fp = tmp_path / "flows.csv"
    rp = tmp_path / "uses.csv"
    write_io_table(table, fp, rp)
    back = parse_io_table(fp, table.year, row_use_path=rp)
    assert back.n == table.n
    assert (back.Z != table.Z).nnz == 0
    np.testing.assert_array_equal(back.row_use_total, table.row_use_total)
    assert [nd.label for nd in back.nodes] == [nd.label for nd in table.nodes]


def test_synth_deterministic():
    a = synth_substrate(30, 0.2, 42)
    b = synth_substrate(30, 0.2, 42)
    assert (a.Z != b.Z).nnz == 0
    np.testing.assert_array_equal(a.row_use_total, b.row_use_total)


def test_synth_leakage_mean_near_target():
    table = synth_substrate(400, 0.1, 3)
    out = table.outflow_totals()
    pos = out > 0
    leak = out[pos] / table.row_use_total[pos]
    assert abs(leak.mean() - DEFAULT_MEAN_LEAKAGE) < 0.03
    assert leak.max() <= 1.0 + 1e-12


def test_synth_custom_leakage_mean():
    table = synth_substrate(400, 0.1, 3, mean_leakage=0.22)
    out = table.outflow_totals()
    pos = out > 0
    leak = out[pos] / table.row_use_total[pos]
    assert abs(leak.mean() - 0.22) < 0.03


def test_synth_row_use_bounds_outflow():
    table = synth_substrate(50, 0.2, 9)
    out = table.outflow_totals()
    assert np.all(table.row_use_total >= out - 1e-12)


def test_synth_rejects_bad_args():
    with pytest.raises(ValueError):
        synth_substrate(1, 0.5, 0)
    with pytest.raises(ValueError):
        synth_substrate(10, 0.0, 0)
    with pytest.raises(ValueError):
        synth_substrate(10, 0.5, 0, mean_leakage=1.0)
