# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
"""
Network data model of a radial feeder: buses, branches, case-file parsing and validation.

Internal units follow the MATPOWER case format: loads in MW / MVar at peak, shunts in MW / MVar
consumed at 1 p.u. voltage, branch impedances in p.u. on the system base.
"""
import dataclasses
import functools
import json
import logging
import os
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

import helper
from errors import CaseSyntaxError, NetworkError

DEFAULT_PCC_VOLTAGE = 1.03
JSON_SCHEMA_VERSION = 1

SLACK = "slack"
PQ = "pq"

l = logging.getLogger("NetModel")


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    p_load: float
    q_load: float
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    base_kv: float = 1.0
    v_set: Optional[float] = None


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    rating: float = 0.0


@dataclass(frozen=True)
class Diagnostic:
    invariant: str
    element: str
    message: str

    def __str__(self) -> str:
        return f"{self.element}: {self.message}"


@dataclass(frozen=True)
class Network:
    """
    Immutable per-unit model of a feeder. Construct it with Network.build() so that
    peak_load_mw is derived from the bus loads.
    """
    base_mva: float
    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...]
    peak_load_mw: float
    name: str = "network"

    @staticmethod
    def build(base_mva: float, buses: Iterable[Bus], branches: Iterable[Branch], name: str = "network") -> "Network":
        buses = tuple(buses)
        return Network(float(base_mva), buses, tuple(branches), float(sum(b.p_load for b in buses)), name)

    @functools.cached_property
    def index_of(self) -> Dict[int, int]:
        """ Returns a map from bus id to position in self.buses. """
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def slack_index(self) -> int:
        """
        Position of the (single) slack bus.
        @return: Returns the index into self.buses. Raises NetworkError if there is not exactly one slack bus.
        """
        slack = [i for i, b in enumerate(self.buses) if b.kind == SLACK]
        if len(slack) != 1:
            raise NetworkError(f"Network {self.name} has {len(slack)} slack buses, expected exactly one.")
        return slack[0]

    @property
    def pcc_voltage(self) -> float:
        return self.buses[self.slack_index].v_set

    @property
    def peak_load_mvar(self) -> float:
        return float(sum(b.q_load for b in self.buses))

    def p_load_pu(self) -> np.ndarray:
        return np.array([b.p_load for b in self.buses]) / self.base_mva

    def q_load_pu(self) -> np.ndarray:
        return np.array([b.q_load for b in self.buses]) / self.base_mva

    def shunt_pu(self) -> np.ndarray:
        """ Returns the complex shunt admittance per bus in p.u. (G + jB). """
        return np.array([complex(b.g_shunt, b.b_shunt) for b in self.buses]) / self.base_mva

    def with_pcc_voltage(self, v_set: float) -> "Network":
        """
        Return a copy with a new slack voltage set point.
        @param v_set: The PCC voltage in p.u.
        """
        buses = [dataclasses.replace(b, v_set=float(v_set)) if b.kind == SLACK else b for b in self.buses]
        return Network.build(self.base_mva, buses, self.branches, self.name)

    def scaled_load(self, factor: float) -> "Network":
        """
        Return a copy with every bus load multiplied by factor (peak-load sensitivity studies).
        """
        buses = [dataclasses.replace(b, p_load=b.p_load * factor, q_load=b.q_load * factor) for b in self.buses]
        return Network.build(self.base_mva, buses, self.branches, self.name)


def validate_network(net: Network) -> List[Diagnostic]:
    """
    Check all network invariants.
    @param net: The network to check.
    @return: Returns a list of diagnostics, which is empty if and only if all invariants hold.
    """
    diags = []

    if not net.base_mva > 0:
        diags.append(Diagnostic("base_mva", "network", f"base_mva must be positive, got {net.base_mva}"))

    slack = [b for b in net.buses if b.kind == SLACK]
    if len(slack) == 0:
        diags.append(Diagnostic("single_slack", "network", "no slack bus"))
    elif len(slack) > 1:
        ids = ", ".join(str(b.id) for b in slack)
        diags.append(Diagnostic("single_slack", "network", f"multiple slack buses ({ids})"))

    seen = set()
    for b in net.buses:
        element = f"bus {b.id}"
        if b.id in seen:
            diags.append(Diagnostic("unique_bus_id", element, f"duplicate bus id {b.id}"))
        seen.add(b.id)
        if b.id <= 0:
            diags.append(Diagnostic("positive_bus_id", element, "bus id must be a positive integer"))
        if b.kind not in (SLACK, PQ):
            diags.append(Diagnostic("bus_kind", element, f"unknown bus kind '{b.kind}'"))
        if b.kind == PQ and b.p_load < 0:
            diags.append(Diagnostic("nonnegative_load", element, f"negative load {b.p_load} MW"))
        if not b.base_kv > 0:
            diags.append(Diagnostic("positive_base_kv", element, f"base_kv must be positive, got {b.base_kv}"))
        if b.kind == SLACK and (b.v_set is None or not b.v_set > 0):
            diags.append(Diagnostic("slack_setpoint", element, "slack bus needs a positive voltage set point"))

    for k, br in enumerate(net.branches):
        element = f"branch {k + 1} ({br.from_bus}-{br.to_bus})"
        for end in (br.from_bus, br.to_bus):
            if end not in net.index_of:
                diags.append(Diagnostic("branch_endpoints", element, f"references nonexistent bus {end}"))
        if br.r < 0:
            diags.append(Diagnostic("nonnegative_r", element, f"negative resistance {br.r}"))
        if br.x == 0:
            diags.append(Diagnostic("nonzero_x", element, "zero reactance"))

    if net.buses and len(seen) == len(net.buses):
        valid = [br for br in net.branches if br.from_bus in net.index_of and br.to_bus in net.index_of]
        rows = [net.index_of[br.from_bus] for br in valid]
        cols = [net.index_of[br.to_bus] for br in valid]
        graph = coo_matrix((np.ones(len(valid)), (rows, cols)), shape=(net.n_bus, net.n_bus))
        n_components, labels = connected_components(graph, directed=False)
        if n_components > 1:
            island = [str(b.id) for b, lab in zip(net.buses, labels) if lab != labels[0]]
            diags.append(Diagnostic("connected", "network",
                                    f"disconnected graph, {n_components} islands (unreached buses: {', '.join(island)})"))
        elif len(valid) != net.n_bus - 1:
            diags.append(Diagnostic("radial", "network",
                                    f"{len(valid)} branches connect {net.n_bus} buses, the feeder is not radial"))

    total = sum(b.p_load for b in net.buses)
    if abs(net.peak_load_mw - total) > 1e-9:
        diags.append(Diagnostic("peak_load", "network",
                                f"peak_load_mw {net.peak_load_mw} differs from sum of bus loads {total}"))

    return diags


def network_health(diags: Iterable[Diagnostic]) -> str:
    """
    Every broken network invariant is CRITICAL.
    """
    return helper.get_highest_warning_level(["CRITICAL" for _ in diags])


# --- MATPOWER subset -------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>%[^\n]*)
  | (?P<cont>\.\.\.[^\n]*\n)
  | (?P<newline>\n)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<string>'[^'\n]*')
  | (?P<op>[=\[\];,])
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise CaseSyntaxError(f"unsupported syntax starting with {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind in ("number", "name", "string", "op"):
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        elif kind in ("newline", "cont"):
            if kind == "newline":
                tokens.append(_Token("newline", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _CaseParser:
    """
    Recursive-descent reader for the MATPOWER matrix syntax subset: a function header,
    scalar/string assignments and numeric matrices.
    """

    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.pos = 0
        self.name = "case"
        self.fields = {}

    def _peek(self) -> _Token:
        return self.tokens[self.pos]

    def _next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _expect(self, kind: str, text: Optional[str] = None) -> _Token:
        tok = self._next()
        if tok.kind != kind or (text is not None and tok.text != text):
            wanted = text if text is not None else kind
            raise CaseSyntaxError(f"expected {wanted!r}, found {tok.text or tok.kind!r}", tok.line, tok.column)
        return tok

    def parse(self) -> Dict[str, object]:
        while self._peek().kind != "eof":
            tok = self._peek()
            if tok.kind == "newline" or (tok.kind == "op" and tok.text in ";,"):
                self._next()
            elif tok.kind == "name" and tok.text == "function":
                self._parse_function()
            elif tok.kind == "name":
                self._parse_assignment()
            else:
                raise CaseSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.column)
        return self.fields

    def _parse_function(self) -> None:
        self._expect("name", "function")
        self._expect("name")
        self._expect("op", "=")
        self.name = self._expect("name").text

    def _parse_assignment(self) -> None:
        target = self._expect("name")
        if not target.text.startswith("mpc.") or target.text.count(".") != 1:
            raise CaseSyntaxError(f"unsupported assignment target {target.text!r}", target.line, target.column)
        self._expect("op", "=")
        tok = self._peek()
        if tok.kind == "number":
            value = float(self._next().text)
        elif tok.kind == "string":
            value = self._next().text.strip("'")
        elif tok.kind == "op" and tok.text == "[":
            value = self._parse_matrix()
        else:
            raise CaseSyntaxError(f"unsupported value {tok.text!r}", tok.line, tok.column)
        end = self._peek()
        if end.kind not in ("newline", "eof") and not (end.kind == "op" and end.text == ";"):
            raise CaseSyntaxError(f"unexpected {end.text!r} after value", end.line, end.column)
        self.fields[target.text[4:]] = (value, target)

    def _parse_matrix(self) -> List[List[float]]:
        opening = self._expect("op", "[")
        rows = []
        row = []
        while True:
            tok = self._next()
            if tok.kind == "number":
                row.append(float(tok.text))
            elif tok.kind == "op" and tok.text == ",":
                continue
            elif tok.kind == "newline" or (tok.kind == "op" and tok.text == ";"):
                if row:
                    if rows and len(row) != len(rows[0]):
                        raise CaseSyntaxError(f"row has {len(row)} columns, expected {len(rows[0])}",
                                              tok.line, tok.column)
                    rows.append(row)
                    row = []
            elif tok.kind == "op" and tok.text == "]":
                if row:
                    if rows and len(row) != len(rows[0]):
                        raise CaseSyntaxError(f"row has {len(row)} columns, expected {len(rows[0])}",
                                              tok.line, tok.column)
                    rows.append(row)
                return rows
            elif tok.kind == "eof":
                raise CaseSyntaxError("unterminated matrix", opening.line, opening.column)
            else:
                raise CaseSyntaxError(f"unexpected {tok.text!r} in matrix", tok.line, tok.column)


def _as_id(value: float, what: str, tok: _Token) -> int:
    if value != int(value) or value <= 0:
        raise CaseSyntaxError(f"{what} must be a positive integer, got {value}", tok.line, tok.column)
    return int(value)


def _require_matrix(fields: Dict[str, object], key: str, min_cols: int) -> Tuple[List[List[float]], _Token]:
    if key not in fields:
        raise NetworkError(f"Case file has no mpc.{key} table.")
    value, tok = fields[key]
    if not isinstance(value, list):
        raise CaseSyntaxError(f"mpc.{key} must be a matrix", tok.line, tok.column)
    if value and len(value[0]) < min_cols:
        raise CaseSyntaxError(f"mpc.{key} needs at least {min_cols} columns, has {len(value[0])}",
                              tok.line, tok.column)
    return value, tok


def parse_matpower_case(text: str, pcc_voltage: float = DEFAULT_PCC_VOLTAGE, strict: bool = True) -> Network:
    """
    Parse a MATPOWER case file (subset) into a Network.
    Supported are baseMVA, bus, branch and gen matrices. The gen table is only used to locate the slack
    bus when the bus-type column does not mark one.
    @param text: Case file content.
    @param pcc_voltage: Voltage set point of the slack bus in p.u.
    @param strict: Raise NetworkError if validate_network() reports problems.
    @return: Returns a validated Network. Raises CaseSyntaxError or NetworkError.
    """
    parser = _CaseParser(text)
    fields = parser.parse()

    if "version" in fields and fields["version"][0] != "2":
        _, tok = fields["version"]
        raise CaseSyntaxError(f"unsupported case format version {fields['version'][0]!r}", tok.line, tok.column)
    if "baseMVA" not in fields or not isinstance(fields["baseMVA"][0], float):
        raise NetworkError("Case file has no scalar mpc.baseMVA.")
    base_mva = fields["baseMVA"][0]

    for key in fields:
        if key not in ("version", "baseMVA", "bus", "branch", "gen"):
            l.debug(f"[{parser.name}] Ignoring mpc.{key}.")

    bus_rows, bus_tok = _require_matrix(fields, "bus", 13)
    branch_rows, branch_tok = _require_matrix(fields, "branch", 11)
    gen_rows = []
    if "gen" in fields:
        gen_rows, _ = _require_matrix(fields, "gen", 1)

    slack_ids = {int(row[0]) for row in bus_rows if row[1] == 3}
    if not slack_ids:
        in_service = [row for row in gen_rows if len(row) < 8 or row[7] > 0]
        if len(in_service) == 1:
            slack_ids = {int(in_service[0][0])}
            l.info(f"[{parser.name}] No reference bus type, using generator bus {in_service[0][0]:g} as slack.")

    buses = []
    for row in bus_rows:
        bus_id = _as_id(row[0], "bus id", bus_tok)
        bus_type = int(row[1])
        if bus_type == 4:
            raise NetworkError(f"Bus {bus_id} is isolated (type 4), which is not supported.")
        if bus_type == 2:
            l.warning(f"[{parser.name}] Bus {bus_id} is a PV bus in the case file; treating it as PQ.")
        kind = SLACK if bus_id in slack_ids else PQ
        buses.append(Bus(
            id=bus_id,
            kind=kind,
            p_load=row[2],
            q_load=row[3],
            g_shunt=row[4],
            b_shunt=row[5],
            base_kv=row[9],
            v_set=float(pcc_voltage) if kind == SLACK else None,
        ))

    branches = []
    for k, row in enumerate(branch_rows):
        f_bus = _as_id(row[0], "branch from-bus", branch_tok)
        t_bus = _as_id(row[1], "branch to-bus", branch_tok)
        if row[10] == 0:
            l.info(f"[{parser.name}] Branch {k + 1} ({f_bus}-{t_bus}) is out of service, dropped.")
            continue
        if row[8] not in (0.0, 1.0) or row[9] != 0.0:
            raise NetworkError(f"Branch {k + 1} ({f_bus}-{t_bus}) has a tap ratio or phase shift, "
                               "which is not supported.")
        branches.append(Branch(f_bus, t_bus, r=row[2], x=row[3], b_charging=row[4], rating=row[5]))

    net = Network.build(base_mva, buses, branches, parser.name)

    diags = validate_network(net) if strict else []
    if diags:
        raise NetworkError(f"Invalid network {parser.name}: " + "; ".join(str(d) for d in diags))

    l.info(f"[{net.name}] Parsed {net.n_bus} buses, {len(net.branches)} branches, "
           f"peak load {net.peak_load_mw:.4f} MW.")
    return net


# --- internal JSON schema --------------------------------------------------------------------

_BUS_KEYS = ("id", "kind", "p_load", "q_load", "g_shunt", "b_shunt", "base_kv", "v_set")
_BRANCH_KEYS = ("from_bus", "to_bus", "r", "x", "b_charging", "rating")


def network_to_dict(net: Network) -> dict:
    return {
        "schema_version": JSON_SCHEMA_VERSION,
        "name": net.name,
        "base_mva": net.base_mva,
        "buses": [{k: getattr(b, k) for k in _BUS_KEYS} for b in net.buses],
        "branches": [{k: getattr(br, k) for k in _BRANCH_KEYS} for br in net.branches],
    }


def network_to_json(net: Network) -> str:
    """
    Serialize a network to the internal JSON format.
    """
    return json.dumps(network_to_dict(net), indent=2, allow_nan=False) + "\n"


def network_from_json(text: str) -> Network:
    """
    Read a network from the internal JSON format.
    @param text: JSON document with keys schema_version, name, base_mva, buses[], branches[].
    @return: Returns the Network. Raises NetworkError on schema problems.
    """
    try:
        doc = json.loads(text)
        if doc.get("schema_version", JSON_SCHEMA_VERSION) != JSON_SCHEMA_VERSION:
            raise NetworkError(f"Unsupported network schema version {doc.get('schema_version')}.")
        buses = [Bus(
            id=int(b["id"]),
            kind=b["kind"],
            p_load=float(b["p_load"]),
            q_load=float(b["q_load"]),
            g_shunt=float(b.get("g_shunt", 0.0)),
            b_shunt=float(b.get("b_shunt", 0.0)),
            base_kv=float(b["base_kv"]),
            v_set=None if b.get("v_set") is None else float(b["v_set"]),
        ) for b in doc["buses"]]
        branches = [Branch(
            from_bus=int(br["from_bus"]),
            to_bus=int(br["to_bus"]),
            r=float(br["r"]),
            x=float(br["x"]),
            b_charging=float(br.get("b_charging", 0.0)),
            rating=float(br.get("rating", 0.0)),
        ) for br in doc["branches"]]
        return Network.build(float(doc["base_mva"]), buses, branches, doc.get("name", "network"))
    except (KeyError, TypeError, ValueError) as e:
        raise NetworkError(f"Malformed network JSON: {e}") from e


def load_network(filename: str, pcc_voltage: Optional[float] = None, strict: bool = True) -> Network:
    """
    Load a network from a MATPOWER .m file or an internal .json file.
    @param filename: Path to the case file.
    @param pcc_voltage: Optional slack voltage set point; the default is 1.03 p.u. for .m files and the stored
        value for .json files.
    @return: Returns the validated Network.
    """
    try:
        with open(filename, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise NetworkError(f"Cannot read network file {filename}: {e}") from e

    if os.path.splitext(filename)[1].lower() == ".json":
        net = network_from_json(text)
        if pcc_voltage is not None:
            net = net.with_pcc_voltage(pcc_voltage)
        diags = validate_network(net) if strict else []
        if diags:
            raise NetworkError(f"Invalid network {net.name}: " + "; ".join(str(d) for d in diags))
        return net

    return parse_matpower_case(text, DEFAULT_PCC_VOLTAGE if pcc_voltage is None else pcc_voltage, strict)
