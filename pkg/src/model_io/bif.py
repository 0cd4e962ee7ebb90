"""Reader and writer for the discrete subset of the BIF network format.

Supported statements (see ``docs/bif_grammar.md``):
- ``network NAME { ... }``
- ``variable NAME { type discrete [ n ] { s1, ..., sn }; }``
- ``probability ( CHILD | P1, ..., Pk ) { ... }`` holding either a ``table``
  list, ``default`` entries or ``( state, ... ) p1, ..., pn;`` rows

``property`` statements and ``//`` or ``/* */`` comments are skipped.
"""

import itertools
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import BifSemanticError, BifSyntaxError
from ..graph import Dag
from ..mechanisms import SIMPLEX_TOL, Cpt, Discrete, UniformVariate
from ..scm import ModelKind, Scm

logger = logging.getLogger(__name__)

Row = Tuple[float, ...]

_TOKEN = re.compile(
    r"(?P<space>\s+)|(?P<line_comment>//[^\n]*)|(?P<block_comment>/\*.*?\*/)"
    r"|(?P<punct>[{}()\[\],;|])|(?P<word>[^\s{}()\[\],;|]+)",
    re.DOTALL,
)


@dataclass(frozen=True)
class BifVariable:
    name: str
    states: Tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class BifBlock:
    """Conditional distribution of ``child`` given ``parents``.

    ``rows`` maps a tuple of parent state names (empty for roots) to the
    probabilities of the child's states.
    """

    child: str
    parents: Tuple[str, ...]
    rows: Dict[Tuple[str, ...], Row] = field(default_factory=dict)


@dataclass(frozen=True)
class BifDocument:
    name: str
    variables: Tuple[BifVariable, ...]
    blocks: Tuple[BifBlock, ...]

    def variable(self, name: str) -> BifVariable:
        for var in self.variables:
            if var.name == name:
                return var
        raise BifSemanticError(f"undeclared variable '{name}'")

    def block(self, child: str) -> BifBlock:
        for block in self.blocks:
            if block.child == child:
                return block
        raise BifSemanticError(f"no probability block for '{child}'")

    def equivalent(self, other: "BifDocument", atol: float = 1e-9) -> bool:
        """Field-level equality with probabilities compared to ``atol``."""
        if (self.name, self.variables) != (other.name, other.variables):
            return False
        if len(self.blocks) != len(other.blocks):
            return False
        for a, b in zip(self.blocks, other.blocks):
            if (a.child, a.parents) != (b.child, b.parents):
                return False
            if set(a.rows) != set(b.rows):
                return False
            if any(not np.allclose(a.rows[k], b.rows[k], atol=atol) for k in a.rows):
                return False
        return True


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        assert match is not None
        kind = match.lastgroup or ""
        chunk = match.group()
        if kind == "word" and chunk.startswith("/*"):
            raise BifSyntaxError("unterminated comment", line, pos - line_start + 1)
        if kind in ("punct", "word"):
            tokens.append(_Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = match.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    """Recursive-descent parser over the token list."""

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.name = "unnamed"
        self.variables: List[BifVariable] = []
        self.raw_blocks: List[Tuple[_Token, str, Tuple[str, ...], list]] = []

    # token helpers

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, message: str, token: Optional[_Token] = None) -> BifSyntaxError:
        tok = token or self.current
        found = tok.text or "end of input"
        return BifSyntaxError(f"{message}, found '{found}'", tok.line, tok.column)

    def advance(self) -> _Token:
        tok = self.current
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def peek_is(self, text: str) -> bool:
        return self.current.text == text

    def expect(self, text: str) -> _Token:
        if not self.peek_is(text):
            raise self.error(f"expected '{text}'")
        return self.advance()

    def word(self, what: str) -> str:
        if self.current.kind != "word":
            raise self.error(f"expected {what}")
        return self.advance().text

    def number(self) -> float:
        tok = self.current
        if tok.kind != "word":
            raise self.error("expected a probability")
        try:
            value = float(tok.text)
        except ValueError:
            raise self.error("expected a probability")
        self.advance()
        return value

    def words_until(self, closing: str, what: str) -> List[str]:
        items = [self.word(what)]
        while self.peek_is(","):
            self.advance()
            items.append(self.word(what))
        self.expect(closing)
        return items

    def numbers(self) -> List[float]:
        values = [self.number()]
        while self.peek_is(","):
            self.advance()
            values.append(self.number())
        self.expect(";")
        return values

    def skip_property(self) -> None:
        self.expect("property")
        while not self.peek_is(";"):
            if self.current.kind == "eof":
                raise self.error("expected ';' after property")
            self.advance()
        self.advance()

    # grammar

    def parse(self) -> None:
        while self.current.kind != "eof":
            keyword = self.current.text
            if keyword == "network":
                self.parse_network()
            elif keyword == "variable":
                self.parse_variable()
            elif keyword == "probability":
                self.parse_probability()
            else:
                raise self.error("expected 'network', 'variable' or 'probability'")

    def parse_network(self) -> None:
        self.expect("network")
        self.name = self.word("a network name")
        self.expect("{")
        while not self.peek_is("}"):
            self.skip_property()
        self.expect("}")

    def parse_variable(self) -> None:
        self.expect("variable")
        name = self.word("a variable name")
        self.expect("{")
        states: Optional[List[str]] = None
        while not self.peek_is("}"):
            if self.peek_is("property"):
                self.skip_property()
                continue
            self.expect("type")
            if not self.peek_is("discrete"):
                raise self.error("only discrete variables are supported")
            self.advance()
            self.expect("[")
            size_tok = self.current
            try:
                size = int(self.word("a state count"))
            except ValueError:
                raise self.error("expected an integer state count", size_tok)
            self.expect("]")
            self.expect("{")
            states = self.words_until("}", "a state name")
            self.expect(";")
            if len(states) != size:
                raise BifSemanticError(
                    f"variable '{name}' declares {size} states but lists {len(states)}"
                )
        self.expect("}")
        if states is None:
            raise BifSemanticError(f"variable '{name}' has no type declaration")
        self.variables.append(BifVariable(name, tuple(states)))

    def parse_probability(self) -> None:
        start = self.expect("probability")
        self.expect("(")
        child = self.word("a variable name")
        parents: List[str] = []
        if self.peek_is("|"):
            self.advance()
            parents = self.words_until(")", "a parent name")
        else:
            self.expect(")")
        self.expect("{")
        entries: list = []
        while not self.peek_is("}"):
            if self.peek_is("property"):
                self.skip_property()
            elif self.peek_is("table"):
                self.advance()
                entries.append(("table", self.numbers()))
            elif self.peek_is("default"):
                self.advance()
                entries.append(("default", self.numbers()))
            elif self.peek_is("("):
                self.advance()
                key = tuple(self.words_until(")", "a parent state"))
                entries.append(("row", key, self.numbers()))
            else:
                raise self.error("expected 'table', 'default' or a '(' row")
        self.expect("}")
        self.raw_blocks.append((start, child, tuple(parents), entries))


def _build_block(
    doc_vars: Dict[str, BifVariable],
    child: str,
    parents: Tuple[str, ...],
    entries: list,
) -> BifBlock:
    label = " | ".join([child, ", ".join(parents)]) if parents else child
    for name in (child,) + parents:
        if name not in doc_vars:
            raise BifSemanticError(f"undeclared variable '{name}'", label)
    card = doc_vars[child].cardinality
    keys = list(itertools.product(*(doc_vars[p].states for p in parents)))
    rows: Dict[Tuple[str, ...], Row] = {}
    default: Optional[Row] = None
    for entry in entries:
        if entry[0] == "table":
            values = np.asarray(entry[1], dtype=float)
            if len(values) != card * len(keys):
                raise BifSemanticError(
                    f"table lists {len(values)} values, expected {card * len(keys)}",
                    label,
                )
            # child state varies slowest
            grid = values.reshape(card, len(keys)).T
            rows.update({key: tuple(grid[i]) for i, key in enumerate(keys)})
        elif entry[0] == "default":
            default = tuple(entry[1])
        else:
            key = tuple(entry[1])
            if len(key) != len(parents):
                raise BifSemanticError(f"row {key} does not name every parent", label)
            for parent, state in zip(parents, key):
                if state not in doc_vars[parent].states:
                    raise BifSemanticError(
                        f"unknown state '{state}' of parent '{parent}'", label
                    )
            rows[key] = tuple(entry[2])
    if default is not None:
        for key in keys:
            rows.setdefault(key, default)
    if len(rows) != len(keys):
        raise BifSemanticError(
            f"block has {len(rows)} rows, parent states need {len(keys)}", label
        )
    for key, row in rows.items():
        where = key or "()"
        if len(row) != card:
            raise BifSemanticError(
                f"row {where} has {len(row)} entries, '{child}' has {card} states",
                label,
            )
        if min(row) < -SIMPLEX_TOL or abs(sum(row) - 1.0) > SIMPLEX_TOL:
            raise BifSemanticError(
                f"row {where} is not a probability simplex (sums to {sum(row):.6g})",
                label,
            )
    return BifBlock(child, parents, {key: rows[key] for key in keys})


def parse_bif(text: str) -> BifDocument:
    """Parse a BIF document.

    Raises:
        BifSyntaxError: On malformed input, with line and column.
        BifSemanticError: If the network violates a declaration, row-count or
            simplex constraint.
    """
    parser = _Parser(text)
    parser.parse()
    doc_vars: Dict[str, BifVariable] = {}
    for var in parser.variables:
        if var.name in doc_vars:
            raise BifSemanticError(f"variable '{var.name}' declared twice")
        doc_vars[var.name] = var
    blocks: Dict[str, BifBlock] = {}
    for _, child, parents, entries in parser.raw_blocks:
        if child in blocks:
            raise BifSemanticError(f"'{child}' has more than one probability block")
        blocks[child] = _build_block(doc_vars, child, parents, entries)
    missing = [v.name for v in parser.variables if v.name not in blocks]
    if missing:
        raise BifSemanticError(f"no probability block for {', '.join(missing)}")
    ordered = tuple(blocks[v.name] for v in parser.variables)
    logger.debug(f"parsed BIF network '{parser.name}' with {len(doc_vars)} variables")
    return BifDocument(parser.name, tuple(parser.variables), ordered)


def read_bif(path: Union[str, Path]) -> BifDocument:
    return parse_bif(Path(path).read_text(encoding="utf-8"))


def _format_number(x: float) -> str:
    return repr(float(x))


def serialize_bif(doc: BifDocument) -> str:
    """Render ``doc`` as BIF text; roots use ``table``, other blocks use rows."""
    lines = [f"network {doc.name} {{", "}"]
    for var in doc.variables:
        lines += [
            f"variable {var.name} {{",
            f"  type discrete [ {var.cardinality} ] {{ {', '.join(var.states)} }};",
            "}",
        ]
    for block in doc.blocks:
        if block.parents:
            lines.append(
                f"probability ( {block.child} | {', '.join(block.parents)} ) {{"
            )
            for key, row in block.rows.items():
                values = ", ".join(_format_number(x) for x in row)
                lines.append(f"  ({', '.join(key)}) {values};")
        else:
            lines.append(f"probability ( {block.child} ) {{")
            values = ", ".join(_format_number(x) for x in block.rows[()])
            lines.append(f"  table {values};")
        lines.append("}")
    return "\n".join(lines) + "\n"


def _parent_rows(
    doc: BifDocument, block: BifBlock, ordered_parents: Sequence[str]
) -> Iterator[Row]:
    """Rows of ``block`` in mixed-radix order over ``ordered_parents``."""
    position = [block.parents.index(p) for p in ordered_parents]
    for states in itertools.product(*(doc.variable(p).states for p in ordered_parents)):
        key = [""] * len(block.parents)
        for pos, state in zip(position, states):
            key[pos] = state
        yield block.rows[tuple(key)]


def bif_to_scm(doc: BifDocument) -> Scm:
    """Causal Bayesian network as a table-mechanism model.

    Every node gets a ``Cpt`` driven by a uniform variate; the result is
    marked ``BayesNetOnly`` so counterfactual queries refuse it.
    """
    labels = [v.name for v in doc.variables]
    edges = [(p, b.child) for b in doc.blocks for p in b.parents]
    graph = Dag.from_labelled_edges(labels, edges)
    domains, mechanisms = [], []
    for v, var in enumerate(doc.variables):
        block = doc.block(var.name)
        ordered = [labels[p] for p in graph.parents(v)]
        table = np.array(list(_parent_rows(doc, block, ordered)))
        cards = tuple(doc.variable(p).cardinality for p in ordered)
        domains.append(Discrete(var.cardinality, var.states))
        mechanisms.append(Cpt(table, cards))
    noises = [UniformVariate() for _ in labels]
    return Scm(
        graph,
        tuple(domains),
        tuple(mechanisms),
        tuple(noises),
        ModelKind.BAYES_NET_ONLY,
    )


def scm_to_bif(m: Scm, name: str = "network") -> BifDocument:
    """Inverse of ``bif_to_scm`` for models whose mechanisms are all tables."""
    variables, blocks = [], []
    for v, label in enumerate(m.labels):
        domain, mech = m.domains[v], m.mechanisms[v]
        if not isinstance(domain, Discrete) or not isinstance(mech, Cpt):
            raise BifSemanticError(f"'{label}' is not a table-driven discrete node")
        variables.append(BifVariable(label, domain.states))
    for v, label in enumerate(m.labels):
        parents = m.graph.parents(v)
        mech = m.mechanisms[v]
        assert isinstance(mech, Cpt)
        keys = itertools.product(*(variables[p].states for p in parents))
        rows = {
            tuple(key): tuple(float(x) for x in mech.table[i])
            for i, key in enumerate(keys)
        }
        blocks.append(BifBlock(label, tuple(m.labels[p] for p in parents), rows))
    return BifDocument(name, tuple(variables), tuple(blocks))
