"""Test suite for the BIF reader and writer.

This module tests:
- Parsing of table, default and row forms
- Writing and re-reading networks
- Syntax and semantic error reporting
- Conversion to table-driven models
"""

import itertools
from pathlib import Path

import numpy as np
import pytest

from src.distances import DistanceConfig, cd
from src.errors import BifSemanticError, BifSyntaxError, CounterfactualUnsupported
from src.generators import random_bayes_net
from src.model_io.bif import (
    bif_to_scm,
    parse_bif,
    read_bif,
    scm_to_bif,
    serialize_bif,
)
from src.scm import ModelKind, sample

FIXTURES = Path(__file__).parent / "fixtures"
NETWORKS = ["asia", "cancer", "earthquake", "survey", "student"]

SPRINKLER = """
// classic three-node network
network sprinkler {
  property author unknown ;
}
variable Rain {
  type discrete [ 2 ] { no, yes };
}
variable Sprinkler {
  type discrete [ 2 ] { off, on };
  property position = (10, 20) ;
}
variable Grass {
  type discrete [ 3 ] { dry, damp, wet };
}
probability ( Rain ) {
  table 0.8, 0.2;
}
probability ( Sprinkler | Rain ) {
  (no) 0.6, 0.4;
  (yes) 0.99, 0.01;
}
/* grass depends on both */
probability ( Grass | Sprinkler, Rain ) {
  default 0.1, 0.2, 0.7;
  (off, no) 1.0, 0.0, 0.0;
}
"""


@pytest.fixture
def doc():
    """Parse the sprinkler network.

    Returns:
        A BifDocument with three variables.
    """
    return parse_bif(SPRINKLER)


def test_parse_variables(doc):
    """Test network name, variables and states."""
    assert doc.name == "sprinkler"
    assert [v.name for v in doc.variables] == ["Rain", "Sprinkler", "Grass"]
    assert doc.variable("Grass").states == ("dry", "damp", "wet")
    assert doc.variable("Grass").cardinality == 3


def test_parse_table_and_rows(doc):
    """Test root tables, explicit rows and default rows."""
    assert doc.block("Rain").rows[()] == (0.8, 0.2)
    assert doc.block("Sprinkler").rows[("yes",)] == (0.99, 0.01)
    grass = doc.block("Grass")
    assert grass.parents == ("Sprinkler", "Rain")
    assert grass.rows[("off", "no")] == (1.0, 0.0, 0.0)
    assert grass.rows[("on", "yes")] == (0.1, 0.2, 0.7)
    assert len(grass.rows) == 4


def test_table_with_parents_varies_child_slowest():
    """Test the layout of a table list on a child with parents."""
    text = """
    variable A { type discrete [ 2 ] { a0, a1 }; }
    variable B { type discrete [ 2 ] { b0, b1 }; }
    probability ( A ) { table 0.5, 0.5; }
    probability ( B | A ) { table 0.9, 0.3, 0.1, 0.7; }
    """
    doc = parse_bif(text)
    assert doc.name == "unnamed"
    assert doc.block("B").rows[("a0",)] == (0.9, 0.1)
    assert doc.block("B").rows[("a1",)] == (0.3, 0.7)


def test_serialize_then_parse_is_equivalent(doc):
    """Test that a written network reads back the same."""
    again = parse_bif(serialize_bif(doc))
    assert again.equivalent(doc)


def test_equivalent_detects_changed_probabilities(doc):
    """Test that differing tables are not equivalent."""
    text = SPRINKLER.replace("table 0.8, 0.2;", "table 0.7, 0.3;")
    assert not parse_bif(text).equivalent(doc)


@pytest.mark.parametrize(
    "text, line",
    [
        ("variable A { type discrete [ 2 ] { x, y } }", 1),
        ("network n {\n}\nvariable A {\n  type continuous;\n}", 4),
        ("network n {}\nfoo", 2),
        ("variable A { type discrete [ two ] { x, y }; }", 1),
        ("probability ( A ) {\n  table 0.5, oops;\n}", 2),
    ],
)
def test_syntax_errors_carry_location(text, line):
    """Test that malformed input reports its line."""
    with pytest.raises(BifSyntaxError) as info:
        parse_bif(text)
    assert info.value.line == line
    assert info.value.column >= 1


def test_unterminated_comment():
    """Test that an unclosed block comment is a syntax error."""
    with pytest.raises(BifSyntaxError, match="unterminated"):
        parse_bif("network n {}\n/* never closed")


def test_semantic_errors():
    """Test declaration, coverage and simplex checks."""
    header = "variable A { type discrete [ 2 ] { x, y }; }\n"
    with pytest.raises(BifSemanticError, match="declares 3"):
        parse_bif("variable A { type discrete [ 3 ] { x, y }; }")
    with pytest.raises(BifSemanticError, match="no probability block"):
        parse_bif(header)
    with pytest.raises(BifSemanticError, match="simplex"):
        parse_bif(header + "probability ( A ) { table 0.5, 0.6; }")
    with pytest.raises(BifSemanticError, match="undeclared"):
        parse_bif(header + "probability ( A | Z ) { table 0.5, 0.5; }")
    with pytest.raises(BifSemanticError, match="declared twice"):
        parse_bif(header + header + "probability ( A ) { table 0.5, 0.5; }")


def test_missing_rows_are_reported():
    """Test that every parent configuration needs a row."""
    text = """
    variable A { type discrete [ 2 ] { x, y }; }
    variable B { type discrete [ 2 ] { u, v }; }
    probability ( A ) { table 0.5, 0.5; }
    probability ( B | A ) { (x) 0.5, 0.5; }
    """
    with pytest.raises(BifSemanticError) as info:
        parse_bif(text)
    assert info.value.block == "B | A"


def test_bif_to_scm(doc):
    """Test the table-driven model built from a network."""
    m = bif_to_scm(doc)
    assert m.kind is ModelKind.BAYES_NET_ONLY
    assert m.labels == ("Rain", "Sprinkler", "Grass")
    assert m.cardinalities == (2, 2, 3)
    assert m.graph.parents(2) == (0, 1)


def test_bif_to_scm_marginals_match_enumeration(doc):
    """Test sampled marginals against exact enumeration of the network."""
    m = bif_to_scm(doc)
    rain, sprinkler, grass = doc.blocks
    exact = np.zeros(3)
    for r, s in itertools.product(range(2), range(2)):
        key = (doc.variables[1].states[s], doc.variables[0].states[r])
        p = rain.rows[()][r] * sprinkler.rows[(key[1],)][s]
        exact += p * np.array(grass.rows[key])
    values = sample(m, 40000, 3).values[:, 2].astype(int)
    freq = np.bincount(values, minlength=3) / len(values)
    assert np.allclose(freq, exact, atol=0.01)


def test_scm_to_bif_round_trip():
    """Test that a random network survives conversion both ways."""
    bn = random_bayes_net(4, 2, rng_seed=2, cardinality=[2, 3, 2, 2])
    doc = scm_to_bif(bn, "random")
    back = bif_to_scm(parse_bif(serialize_bif(doc)))
    assert back.graph == bn.graph
    for a, b in zip(back.mechanisms, bn.mechanisms):
        assert np.allclose(a.table, b.table)


def test_counterfactuals_refuse_bif_models(doc):
    """Test that networks read from BIF have no counterfactuals."""
    m = bif_to_scm(doc)
    with pytest.raises(CounterfactualUnsupported):
        cd(m, m, DistanceConfig(k=20, l=2, m=2))


@pytest.mark.parametrize("name", NETWORKS)
def test_fixture_networks_round_trip(name):
    """Test that bundled networks survive writing and re-reading."""
    doc = read_bif(FIXTURES / f"{name}.bif")
    assert doc.name == name
    assert parse_bif(serialize_bif(doc)).equivalent(doc)
    m = bif_to_scm(doc)
    assert m.node_count == len(doc.variables)


@pytest.mark.parametrize("name", NETWORKS)
def test_fixture_networks_sample_after_round_trip(name):
    """Test that a re-read network samples identically and matches its roots."""
    doc = read_bif(FIXTURES / f"{name}.bif")
    m = bif_to_scm(doc)
    again = bif_to_scm(parse_bif(serialize_bif(doc)))
    k = 4000
    values = sample(m, k, 5).values
    assert np.array_equal(values, sample(again, k, 5).values)
    for v in range(m.node_count):
        if m.graph.parents(v):
            continue
        expected = m.mechanisms[v].probabilities(np.zeros((1, 0)))[0]
        observed = np.bincount(values[:, v].astype(int), minlength=len(expected)) / k
        assert np.allclose(observed, expected, atol=3 / np.sqrt(k))
