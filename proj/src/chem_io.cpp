// SPDX-License-Identifier: Apache-2.0

#include "simg/chem_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

namespace simg {

using nlohmann::json;

namespace {

// Thrown internally by the JSON field accessors; converted to a ParseError
// at the parser boundary.
struct ParseFailure {
  ParseError err;
};

[[noreturn]] void fail(ParseErrorKind kind, std::string message, int line = 1,
                       int column = 1) {
  throw ParseFailure{ParseError{line, column, kind, std::move(message)}};
}

std::pair<int, int> line_col_of_offset(std::string_view text, size_t offset) {
  offset = std::min(offset, text.size());
  int line = 1;
  int col = 1;
  for (size_t k = 0; k < offset; ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json parse_json_or_fail(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    fail(ParseErrorKind::Syntax, e.what(), line, col);
  }
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(ParseErrorKind::Syntax, std::string("missing key '") + key + "'");
  return *it;
}

double num(const json& j, const char* what) {
  if (!j.is_number()) fail(ParseErrorKind::Syntax, std::string(what) + ": expected number");
  return j.get<double>();
}

int integer(const json& j, const char* what) {
  if (!j.is_number_integer()) fail(ParseErrorKind::Syntax, std::string(what) + ": expected integer");
  return j.get<int>();
}

const json& array(const json& j, const char* what) {
  if (!j.is_array()) fail(ParseErrorKind::Syntax, std::string(what) + ": expected array");
  return j;
}

std::string str(const json& j, const char* what) {
  if (!j.is_string()) fail(ParseErrorKind::Syntax, std::string(what) + ": expected string");
  return j.get<std::string>();
}

}  // namespace

std::string ParseError::to_string() const {
  const char* k = "syntax";
  switch (kind) {
    case ParseErrorKind::Syntax: k = "syntax"; break;
    case ParseErrorKind::Range: k = "range"; break;
    case ParseErrorKind::Reference: k = "reference"; break;
    case ParseErrorKind::Checksum: k = "checksum"; break;
  }
  std::ostringstream os;
  os << line << ":" << column << ": " << k << " error: " << message;
  return os.str();
}

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

bool float_close(double a, double b) {
  if (a == b) return true;
  double scale = std::max(std::fabs(a), std::fabs(b));
  if (std::fabs(a - b) <= 1e-9 * scale) return true;
  // Values that agree through the canonical formatter are equal for
  // round-trip purposes.
  return format_float(a) == format_float(b);
}

// --- MOLJ ------------------------------------------------------------------

ParseResult<Molecule> parse_molecule(std::string_view text) {
  try {
    json j = parse_json_or_fail(text);
    if (!j.is_object()) fail(ParseErrorKind::Syntax, "top level must be an object");
    Molecule m;
    m.charge = integer(field(j, "charge"), "charge");
    for (const auto& a : array(field(j, "atoms"), "atoms")) {
      std::string el = str(field(a, "el"), "el");
      auto idx = element_index(el);
      if (!idx) fail(ParseErrorKind::Range, "unknown element '" + el + "'");
      const auto& xyz = array(field(a, "xyz"), "xyz");
      if (xyz.size() != 3) fail(ParseErrorKind::Syntax, "xyz must have 3 components");
      Atom atom;
      atom.element = *idx;
      for (int k = 0; k < 3; ++k) atom.position[k] = num(xyz[k], "xyz");
      m.atoms.push_back(atom);
    }
    const int n = static_cast<int>(m.atoms.size());
    std::vector<std::pair<int, int>> seen;
    for (const auto& b : array(field(j, "bonds"), "bonds")) {
      Bond bond;
      bond.i = integer(field(b, "i"), "i");
      bond.j = integer(field(b, "j"), "j");
      bond.order = integer(field(b, "order"), "order");
      if (bond.i < 0 || bond.i >= n || bond.j < 0 || bond.j >= n)
        fail(ParseErrorKind::Reference, "bond references atom out of range");
      if (bond.i == bond.j) fail(ParseErrorKind::Reference, "bond endpoints must differ");
      if (bond.order < 1 || bond.order > 3) fail(ParseErrorKind::Range, "bond order outside 1..3");
      if (bond.i > bond.j) std::swap(bond.i, bond.j);
      if (std::find(seen.begin(), seen.end(), std::make_pair(bond.i, bond.j)) != seen.end())
        fail(ParseErrorKind::Reference, "duplicate bond");
      seen.emplace_back(bond.i, bond.j);
      m.bonds.push_back(bond);
    }
    return m;
  } catch (const ParseFailure& pf) {
    return pf.err;
  }
}

std::string serialize_molecule(const Molecule& m) {
  std::string out = "{\n  \"charge\": " + std::to_string(m.charge) + ",\n  \"atoms\": [";
  for (size_t k = 0; k < m.atoms.size(); ++k) {
    const Atom& a = m.atoms[k];
    out += k ? ",\n    " : "\n    ";
    out += "{\"el\": \"" + std::string(kElements[a.element]) + "\", \"xyz\": [" +
           format_float(a.position[0]) + ", " + format_float(a.position[1]) + ", " +
           format_float(a.position[2]) + "]}";
  }
  out += m.atoms.empty() ? "],\n" : "\n  ],\n";
  out += "  \"bonds\": [";
  std::vector<Bond> bonds = m.bonds;
  std::sort(bonds.begin(), bonds.end(),
            [](const Bond& a, const Bond& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  for (size_t k = 0; k < bonds.size(); ++k) {
    out += k ? ",\n    " : "\n    ";
    out += "{\"i\": " + std::to_string(bonds[k].i) + ", \"j\": " + std::to_string(bonds[k].j) +
           ", \"order\": " + std::to_string(bonds[k].order) + "}";
  }
  out += bonds.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

// --- NBO record validation ---------------------------------------------

namespace {

void validate_record(const NboRecord& r, ParseMode mode) {
  if (mode != ParseMode::Strict) return;
  for (const auto& lp : r.lone_pairs) {
    double sum = lp.s + lp.p + lp.d + lp.f;
    if (sum < 99.0 || sum > 101.0)
      fail(ParseErrorKind::Range, "lone pair characters sum to " + format_float(sum));
    if (!(lp.occupancy > 0.0 && lp.occupancy <= 2.0))
      fail(ParseErrorKind::Range, "lone pair occupancy " + format_float(lp.occupancy) +
                                      " outside (0, 2]");
  }
  for (const auto& bo : r.bond_orbitals) {
    for (const BondOrbitalSide* side : {&bo.bonding, &bo.antibonding}) {
      double psum = side->pol1 + side->pol2;
      if (psum < 99.0 || psum > 101.0)
        fail(ParseErrorKind::Range, "polarization percents sum to " + format_float(psum));
    }
  }
  for (const auto& ix : r.interactions) {
    if (ix.e2 < 0.0) fail(ParseErrorKind::Range, "e2 must be non-negative");
    if (ix.donor.kind != OrbKind::LonePair && ix.donor.kind != OrbKind::Sigma &&
        ix.donor.kind != OrbKind::Pi)
      fail(ParseErrorKind::Range, "bad donor kind");
    if (ix.acceptor.kind == OrbKind::LonePair)
      fail(ParseErrorKind::Range, "acceptor must be a bond orbital");
  }
}

OrbKind orb_kind_from(const std::string& s) {
  if (s == "lp") return OrbKind::LonePair;
  if (s == "sigma") return OrbKind::Sigma;
  if (s == "pi") return OrbKind::Pi;
  fail(ParseErrorKind::Syntax, "unknown orbital kind '" + s + "'");
}

const char* orb_kind_name(OrbKind k) {
  switch (k) {
    case OrbKind::LonePair: return "lp";
    case OrbKind::Sigma: return "sigma";
    case OrbKind::Pi: return "pi";
  }
  return "lp";
}

OrbitalRef orbital_ref_from_json(const json& j) {
  OrbitalRef r;
  r.kind = orb_kind_from(str(field(j, "kind"), "kind"));
  r.atom_i = integer(field(j, "i"), "i");
  if (r.kind != OrbKind::LonePair) r.atom_j = integer(field(j, "j"), "j");
  auto it = j.find("ord");
  r.ordinal = it != j.end() ? integer(*it, "ord") : 0;
  return r;
}

BondOrbitalSide side_from_json(const json& j) {
  BondOrbitalSide s;
  s.s1 = num(field(j, "s1"), "s1");
  s.p1 = num(field(j, "p1"), "p1");
  s.d1 = num(field(j, "d1"), "d1");
  s.f1 = num(field(j, "f1"), "f1");
  s.pol1 = num(field(j, "pol1"), "pol1");
  s.coef1 = num(field(j, "coef1"), "coef1");
  s.s2 = num(field(j, "s2"), "s2");
  s.p2 = num(field(j, "p2"), "p2");
  s.d2 = num(field(j, "d2"), "d2");
  s.f2 = num(field(j, "f2"), "f2");
  s.pol2 = num(field(j, "pol2"), "pol2");
  s.coef2 = num(field(j, "coef2"), "coef2");
  s.occupancy = num(field(j, "occ"), "occ");
  return s;
}

void emit_side(std::string& out, const BondOrbitalSide& s) {
  out += "{";
  const std::pair<const char*, double> kv[] = {
      {"s1", s.s1},   {"p1", s.p1},     {"d1", s.d1},     {"f1", s.f1},
      {"pol1", s.pol1}, {"coef1", s.coef1}, {"s2", s.s2},   {"p2", s.p2},
      {"d2", s.d2},   {"f2", s.f2},     {"pol2", s.pol2}, {"coef2", s.coef2},
      {"occ", s.occupancy}};
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) out += ", ";
    first = false;
    out += "\"" + std::string(k) + "\": " + format_float(v);
  }
  out += "}";
}

void emit_orbital_ref(std::string& out, const OrbitalRef& r) {
  out += "{\"kind\": \"" + std::string(orb_kind_name(r.kind)) + "\", \"i\": " +
         std::to_string(r.atom_i);
  if (r.kind != OrbKind::LonePair) out += ", \"j\": " + std::to_string(r.atom_j);
  out += ", \"ord\": " + std::to_string(r.ordinal) + "}";
}

}  // namespace

ParseResult<NboRecord> parse_nboj(std::string_view text, ParseMode mode) {
  try {
    json j = parse_json_or_fail(text);
    if (!j.is_object()) fail(ParseErrorKind::Syntax, "top level must be an object");
    NboRecord r;
    if (j.contains("npa")) {
      for (const auto& a : array(j["npa"], "npa")) {
        AtomNpa n;
        n.natural_charge = num(field(a, "q"), "q");
        n.core_electrons = num(field(a, "core"), "core");
        n.valence_electrons = num(field(a, "val"), "val");
        n.total_electrons = num(field(a, "tot"), "tot");
        r.atom_npa.push_back(n);
      }
    }
    if (j.contains("lone_pairs")) {
      for (const auto& a : array(j["lone_pairs"], "lone_pairs")) {
        LonePairRecord lp;
        lp.owner_atom = integer(field(a, "atom"), "atom");
        lp.s = num(field(a, "s"), "s");
        lp.p = num(field(a, "p"), "p");
        lp.d = num(field(a, "d"), "d");
        lp.f = num(field(a, "f"), "f");
        lp.occupancy = num(field(a, "occ"), "occ");
        r.lone_pairs.push_back(lp);
      }
    }
    if (j.contains("bond_orbitals")) {
      for (const auto& a : array(j["bond_orbitals"], "bond_orbitals")) {
        BondOrbitalRecord bo;
        bo.atom_i = integer(field(a, "i"), "i");
        bo.atom_j = integer(field(a, "j"), "j");
        std::string kind = str(field(a, "kind"), "kind");
        if (kind == "sigma") bo.kind = BondKind::Sigma;
        else if (kind == "pi") bo.kind = BondKind::Pi;
        else fail(ParseErrorKind::Syntax, "bond kind must be sigma or pi");
        bo.bonding = side_from_json(field(a, "bond"));
        bo.antibonding = side_from_json(field(a, "anti"));
        r.bond_orbitals.push_back(bo);
      }
    }
    if (j.contains("interactions")) {
      for (const auto& a : array(j["interactions"], "interactions")) {
        InteractionRecord ix;
        ix.donor = orbital_ref_from_json(field(a, "donor"));
        ix.acceptor = orbital_ref_from_json(field(a, "acceptor"));
        ix.e2 = num(field(a, "e2"), "e2");
        ix.energy_gap = num(field(a, "de"), "de");
        ix.fock_element = num(field(a, "fij"), "fij");
        r.interactions.push_back(ix);
      }
    }
    validate_record(r, mode);
    return r;
  } catch (const ParseFailure& pf) {
    return pf.err;
  }
}

std::string serialize_nbo_record(const NboRecord& r) {
  std::string out = "{\n  \"npa\": [";
  for (size_t k = 0; k < r.atom_npa.size(); ++k) {
    const auto& a = r.atom_npa[k];
    out += k ? ",\n    " : "\n    ";
    out += "{\"q\": " + format_float(a.natural_charge) +
           ", \"core\": " + format_float(a.core_electrons) +
           ", \"val\": " + format_float(a.valence_electrons) +
           ", \"tot\": " + format_float(a.total_electrons) + "}";
  }
  out += r.atom_npa.empty() ? "],\n" : "\n  ],\n";
  out += "  \"lone_pairs\": [";
  for (size_t k = 0; k < r.lone_pairs.size(); ++k) {
    const auto& lp = r.lone_pairs[k];
    out += k ? ",\n    " : "\n    ";
    out += "{\"atom\": " + std::to_string(lp.owner_atom) + ", \"s\": " + format_float(lp.s) +
           ", \"p\": " + format_float(lp.p) + ", \"d\": " + format_float(lp.d) +
           ", \"f\": " + format_float(lp.f) + ", \"occ\": " + format_float(lp.occupancy) + "}";
  }
  out += r.lone_pairs.empty() ? "],\n" : "\n  ],\n";
  out += "  \"bond_orbitals\": [";
  for (size_t k = 0; k < r.bond_orbitals.size(); ++k) {
    const auto& bo = r.bond_orbitals[k];
    out += k ? ",\n    " : "\n    ";
    out += "{\"i\": " + std::to_string(bo.atom_i) + ", \"j\": " + std::to_string(bo.atom_j) +
           ", \"kind\": \"" + (bo.kind == BondKind::Sigma ? "sigma" : "pi") + "\", \"bond\": ";
    emit_side(out, bo.bonding);
    out += ", \"anti\": ";
    emit_side(out, bo.antibonding);
    out += "}";
  }
  out += r.bond_orbitals.empty() ? "],\n" : "\n  ],\n";
  out += "  \"interactions\": [";
  for (size_t k = 0; k < r.interactions.size(); ++k) {
    const auto& ix = r.interactions[k];
    out += k ? ",\n    " : "\n    ";
    out += "{\"donor\": ";
    emit_orbital_ref(out, ix.donor);
    out += ", \"acceptor\": ";
    emit_orbital_ref(out, ix.acceptor);
    out += ", \"e2\": " + format_float(ix.e2) + ", \"de\": " + format_float(ix.energy_gap) +
           ", \"fij\": " + format_float(ix.fock_element) + "}";
  }
  out += r.interactions.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

// --- NBOTXT ------------------------------------------------------------

namespace {

struct Token {
  std::string text;
  int column;  // 1-based
};

std::vector<Token> tokenize_line(std::string_view line) {
  std::vector<Token> out;
  size_t k = 0;
  while (k < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[k]))) {
      ++k;
      continue;
    }
    if (line[k] == '#') break;
    size_t start = k;
    while (k < line.size() && !std::isspace(static_cast<unsigned char>(line[k]))) ++k;
    out.push_back({std::string(line.substr(start, k - start)), static_cast<int>(start) + 1});
  }
  return out;
}

double parse_kv(const Token& tok, const char* key, int line_no) {
  std::string prefix = std::string(key) + "=";
  if (tok.text.rfind(prefix, 0) != 0)
    fail(ParseErrorKind::Syntax, "expected '" + prefix + "<number>'", line_no, tok.column);
  const std::string v = tok.text.substr(prefix.size());
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    fail(ParseErrorKind::Syntax, "bad number '" + v + "'", line_no, tok.column);
  return d;
}

int parse_int_token(const std::string& s, const Token& tok, int line_no) {
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    fail(ParseErrorKind::Syntax, "bad integer '" + s + "'", line_no, tok.column);
  return static_cast<int>(v);
}

// Parses `<i>-<j>` (1-based) into 0-based atom indices with i < j.
std::pair<int, int> parse_atom_pair(const Token& tok, int line_no) {
  auto dash = tok.text.find('-');
  if (dash == std::string::npos)
    fail(ParseErrorKind::Syntax, "expected '<i>-<j>' atom pair", line_no, tok.column);
  int i = parse_int_token(tok.text.substr(0, dash), tok, line_no) - 1;
  int j = parse_int_token(tok.text.substr(dash + 1), tok, line_no) - 1;
  if (i < 0 || j < 0 || i == j)
    fail(ParseErrorKind::Reference, "bad atom pair", line_no, tok.column);
  if (i > j) std::swap(i, j);
  return {i, j};
}

// Orbital reference grammar: LP<ord>/<atom> | SG/<i>-<j> | PI<rank>/<i>-<j>,
// with a trailing '*' on the kind tag for antibonding acceptors
// (SG*/..., PI<rank>*/...). All numbers 1-based.
OrbitalRef parse_orbital_ref(const Token& tok, bool acceptor, int line_no) {
  const std::string& t = tok.text;
  auto slash = t.find('/');
  if (slash == std::string::npos)
    fail(ParseErrorKind::Syntax, "expected orbital reference '<kind>/<atoms>'", line_no,
         tok.column);
  std::string head = t.substr(0, slash);
  std::string tail = t.substr(slash + 1);
  bool starred = !head.empty() && head.back() == '*';
  if (starred) head.pop_back();
  if (acceptor != starred)
    fail(ParseErrorKind::Syntax, acceptor ? "acceptor reference must be starred"
                                          : "donor reference must not be starred",
         line_no, tok.column);
  OrbitalRef r;
  if (head.rfind("LP", 0) == 0) {
    if (acceptor) fail(ParseErrorKind::Range, "lone pair cannot accept", line_no, tok.column);
    r.kind = OrbKind::LonePair;
    r.ordinal = parse_int_token(head.substr(2), tok, line_no) - 1;
    r.atom_i = parse_int_token(tail, tok, line_no) - 1;
  } else if (head == "SG") {
    r.kind = OrbKind::Sigma;
    r.ordinal = 0;
    std::tie(r.atom_i, r.atom_j) = parse_atom_pair({tail, tok.column}, line_no);
  } else if (head.rfind("PI", 0) == 0) {
    r.kind = OrbKind::Pi;
    r.ordinal = parse_int_token(head.substr(2), tok, line_no) - 1;
    std::tie(r.atom_i, r.atom_j) = parse_atom_pair({tail, tok.column}, line_no);
  } else {
    fail(ParseErrorKind::Syntax, "unknown orbital kind '" + head + "'", line_no, tok.column);
  }
  if (r.ordinal < 0 || r.atom_i < 0)
    fail(ParseErrorKind::Reference, "bad orbital reference", line_no, tok.column);
  return r;
}

std::string orbital_ref_text(const OrbitalRef& r, bool acceptor) {
  switch (r.kind) {
    case OrbKind::LonePair:
      return "LP" + std::to_string(r.ordinal + 1) + "/" + std::to_string(r.atom_i + 1);
    case OrbKind::Sigma:
      return std::string("SG") + (acceptor ? "*" : "") + "/" + std::to_string(r.atom_i + 1) +
             "-" + std::to_string(r.atom_j + 1);
    case OrbKind::Pi:
      return "PI" + std::to_string(r.ordinal + 1) + (acceptor ? "*" : "") + "/" +
             std::to_string(r.atom_i + 1) + "-" + std::to_string(r.atom_j + 1);
  }
  return {};
}

}  // namespace

ParseResult<NboRecord> parse_nbotxt(std::string_view text, ParseMode mode) {
  try {
    NboRecord r;
    struct PendingBd {
      BondOrbitalRecord rec;
      bool has_bond = false;
      bool has_anti = false;
      int line_no = 0;
    };
    // Keyed (i, j, kind) so reassembled records come out in canonical
    // bond-node order: (i, j, sigma < pi, pi rank).
    std::map<std::tuple<int, int, int>, std::vector<PendingBd>> pending;

    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
      size_t eol = text.find('\n', pos);
      std::string_view line =
          text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
      ++line_no;
      pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

      auto toks = tokenize_line(line);
      if (toks.empty()) continue;
      const std::string& tag = toks[0].text;

      auto need = [&](size_t n) {
        if (toks.size() != n)
          fail(ParseErrorKind::Syntax,
               "expected " + std::to_string(n) + " fields, got " + std::to_string(toks.size()),
               line_no, toks[0].column);
      };

      if (tag == "NPA") {
        need(6);
        AtomNpa a;
        int atom = parse_int_token(toks[1].text, toks[1], line_no) - 1;
        if (atom < 0) fail(ParseErrorKind::Reference, "atom index must be >= 1", line_no, toks[1].column);
        a.natural_charge = parse_kv(toks[2], "q", line_no);
        a.core_electrons = parse_kv(toks[3], "core", line_no);
        a.valence_electrons = parse_kv(toks[4], "val", line_no);
        a.total_electrons = parse_kv(toks[5], "tot", line_no);
        if (static_cast<int>(r.atom_npa.size()) <= atom) r.atom_npa.resize(atom + 1);
        r.atom_npa[atom] = a;
      } else if (tag == "LP") {
        need(7);
        LonePairRecord lp;
        lp.owner_atom = parse_int_token(toks[1].text, toks[1], line_no) - 1;
        if (lp.owner_atom < 0)
          fail(ParseErrorKind::Reference, "atom index must be >= 1", line_no, toks[1].column);
        lp.s = parse_kv(toks[2], "s", line_no);
        lp.p = parse_kv(toks[3], "p", line_no);
        lp.d = parse_kv(toks[4], "d", line_no);
        lp.f = parse_kv(toks[5], "f", line_no);
        lp.occupancy = parse_kv(toks[6], "occ", line_no);
        r.lone_pairs.push_back(lp);
      } else if (tag == "BD") {
        need(19);
        BondKind kind;
        if (toks[1].text == "SG") kind = BondKind::Sigma;
        else if (toks[1].text == "PI") kind = BondKind::Pi;
        else fail(ParseErrorKind::Syntax, "bond kind must be SG or PI", line_no, toks[1].column);
        auto [i, j] = parse_atom_pair(toks[2], line_no);
        bool anti;
        if (toks[3].text == "SIDE=bond") anti = false;
        else if (toks[3].text == "SIDE=anti") anti = true;
        else fail(ParseErrorKind::Syntax, "expected SIDE=bond or SIDE=anti", line_no, toks[3].column);
        if (toks[4].text != "A1")
          fail(ParseErrorKind::Syntax, "expected 'A1'", line_no, toks[4].column);
        if (toks[11].text != "A2")
          fail(ParseErrorKind::Syntax, "expected 'A2'", line_no, toks[11].column);
        BondOrbitalSide side;
        side.s1 = parse_kv(toks[5], "s", line_no);
        side.p1 = parse_kv(toks[6], "p", line_no);
        side.d1 = parse_kv(toks[7], "d", line_no);
        side.f1 = parse_kv(toks[8], "f", line_no);
        side.pol1 = parse_kv(toks[9], "pol", line_no);
        side.coef1 = parse_kv(toks[10], "coef", line_no);
        side.s2 = parse_kv(toks[12], "s", line_no);
        side.p2 = parse_kv(toks[13], "p", line_no);
        side.d2 = parse_kv(toks[14], "d", line_no);
        side.f2 = parse_kv(toks[15], "f", line_no);
        side.pol2 = parse_kv(toks[16], "pol", line_no);
        side.coef2 = parse_kv(toks[17], "coef", line_no);
        side.occupancy = parse_kv(toks[18], "occ", line_no);

        // Bond/anti lines pair up per (kind, i, j) in input order; a repeat
        // of one side opens the next pi-rank slot.
        auto& slots = pending[{i, j, static_cast<int>(kind)}];
        PendingBd* target = nullptr;
        for (auto& pb : slots) {
          if ((anti && !pb.has_anti) || (!anti && !pb.has_bond)) {
            target = &pb;
            break;
          }
        }
        if (!target) {
          PendingBd pb;
          pb.rec.atom_i = i;
          pb.rec.atom_j = j;
          pb.rec.kind = kind;
          pb.line_no = line_no;
          slots.push_back(pb);
          target = &slots.back();
        }
        if (anti) {
          target->rec.antibonding = side;
          target->has_anti = true;
        } else {
          target->rec.bonding = side;
          target->has_bond = true;
        }
      } else if (tag == "E2") {
        need(7);
        if (toks[2].text != "->")
          fail(ParseErrorKind::Syntax, "expected '->'", line_no, toks[2].column);
        InteractionRecord ix;
        ix.donor = parse_orbital_ref(toks[1], false, line_no);
        ix.acceptor = parse_orbital_ref(toks[3], true, line_no);
        ix.e2 = parse_kv(toks[4], "e2", line_no);
        ix.energy_gap = parse_kv(toks[5], "de", line_no);
        ix.fock_element = parse_kv(toks[6], "fij", line_no);
        r.interactions.push_back(ix);
      } else {
        fail(ParseErrorKind::Syntax, "unknown record tag '" + tag + "'", line_no,
             toks[0].column);
      }
      if (eol == std::string_view::npos) break;
    }

    for (auto& [key, vec] : pending) {
      for (auto& pb : vec) {
        if (!pb.has_bond || !pb.has_anti)
          fail(ParseErrorKind::Reference, "bond orbital missing a side", pb.line_no, 1);
        r.bond_orbitals.push_back(pb.rec);
      }
    }
    validate_record(r, mode);
    return r;
  } catch (const ParseFailure& pf) {
    return pf.err;
  }
}

ParseResult<NboRecord> parse_nbo_record(std::string_view text, ParseMode mode) {
  size_t k = text.find_first_not_of(" \t\r\n");
  if (k != std::string_view::npos && text[k] == '{') return parse_nboj(text, mode);
  return parse_nbotxt(text, mode);
}

std::string serialize_nbotxt(const NboRecord& r) {
  std::string out;
  auto kv = [](const char* k, double v) { return std::string(k) + "=" + format_float(v); };
  for (size_t a = 0; a < r.atom_npa.size(); ++a) {
    const auto& n = r.atom_npa[a];
    out += "NPA " + std::to_string(a + 1) + " " + kv("q", n.natural_charge) + " " +
           kv("core", n.core_electrons) + " " + kv("val", n.valence_electrons) + " " +
           kv("tot", n.total_electrons) + "\n";
  }
  for (const auto& lp : r.lone_pairs) {
    out += "LP " + std::to_string(lp.owner_atom + 1) + " " + kv("s", lp.s) + " " + kv("p", lp.p) +
           " " + kv("d", lp.d) + " " + kv("f", lp.f) + " " + kv("occ", lp.occupancy) + "\n";
  }
  for (const auto& bo : r.bond_orbitals) {
    for (int anti = 0; anti < 2; ++anti) {
      const BondOrbitalSide& s = anti ? bo.antibonding : bo.bonding;
      out += std::string("BD ") + (bo.kind == BondKind::Sigma ? "SG" : "PI") + " " +
             std::to_string(bo.atom_i + 1) + "-" + std::to_string(bo.atom_j + 1) +
             (anti ? " SIDE=anti" : " SIDE=bond") + " A1 " + kv("s", s.s1) + " " + kv("p", s.p1) +
             " " + kv("d", s.d1) + " " + kv("f", s.f1) + " " + kv("pol", s.pol1) + " " +
             kv("coef", s.coef1) + " A2 " + kv("s", s.s2) + " " + kv("p", s.p2) + " " +
             kv("d", s.d2) + " " + kv("f", s.f2) + " " + kv("pol", s.pol2) + " " +
             kv("coef", s.coef2) + " " + kv("occ", s.occupancy) + "\n";
    }
  }
  for (const auto& ix : r.interactions) {
    out += "E2 " + orbital_ref_text(ix.donor, false) + " -> " +
           orbital_ref_text(ix.acceptor, true) + " " + kv("e2", ix.e2) + " " +
           kv("de", ix.energy_gap) + " " + kv("fij", ix.fock_element) + "\n";
  }
  return out;
}

// --- SIMG ----------------------------------------------------------------

std::string serialize_simg(const SimgGraph& g) {
  const ExtendedGraph& eg = g.graph;
  std::string out = "{\n  \"charge\": " + std::to_string(eg.charge) + ",\n";

  auto emit_list = [&out](const char* key, size_t n, auto item) {
    out += "  \"" + std::string(key) + "\": [";
    for (size_t k = 0; k < n; ++k) {
      out += k ? ",\n    " : "\n    ";
      item(k);
    }
    out += n ? "\n  ],\n" : "],\n";
  };

  emit_list("atoms", eg.atoms.size(), [&](size_t k) {
    const Atom& a = eg.atoms[k];
    out += "{\"el\": \"" + std::string(kElements[a.element]) + "\", \"xyz\": [" +
           format_float(a.position[0]) + ", " + format_float(a.position[1]) + ", " +
           format_float(a.position[2]) + "]}";
  });
  emit_list("lp_nodes", eg.lp_nodes.size(), [&](size_t k) {
    out += "{\"owner\": " + std::to_string(eg.lp_nodes[k].owner_atom) +
           ", \"type\": " + std::to_string(eg.lp_nodes[k].lp_type) + "}";
  });
  emit_list("bond_nodes", eg.bond_nodes.size(), [&](size_t k) {
    const auto& b = eg.bond_nodes[k];
    out += "{\"i\": " + std::to_string(b.atom_i) + ", \"j\": " + std::to_string(b.atom_j) +
           ", \"kind\": \"" + (b.kind == BondKind::Sigma ? "sigma" : "pi") + "\", \"rank\": " +
           std::to_string(b.pi_rank) + "}";
  });
  emit_list("edges_aa", eg.edges_atom_atom.size(), [&](size_t k) {
    const auto& e = eg.edges_atom_atom[k];
    out += "{\"i\": " + std::to_string(e.i) + ", \"j\": " + std::to_string(e.j) +
           ", \"order\": " + std::to_string(e.order) + ", \"length\": " + format_float(e.length) +
           "}";
  });
  emit_list("edges_ab", eg.edges_atom_bond.size(), [&](size_t k) {
    out += "[" + std::to_string(eg.edges_atom_bond[k].first) + ", " +
           std::to_string(eg.edges_atom_bond[k].second) + "]";
  });
  emit_list("edges_alp", eg.edges_atom_lp.size(), [&](size_t k) {
    out += "[" + std::to_string(eg.edges_atom_lp[k].first) + ", " +
           std::to_string(eg.edges_atom_lp[k].second) + "]";
  });

  auto emit_float_rows = [&](const char* key, const auto& rows) {
    emit_list(key, rows.size(), [&](size_t k) {
      out += "[";
      for (size_t c = 0; c < rows[k].size(); ++c) {
        if (c) out += ", ";
        out += format_float(rows[k][c]);
      }
      out += "]";
    });
  };
  emit_float_rows("atom_targets", g.atom_targets);
  emit_float_rows("lp_targets", g.lp_targets);
  emit_float_rows("bond_occ", g.bond_occupancies);
  emit_float_rows("bond_side_targets", g.bond_side_targets);

  out += "  \"interactions\": [";
  for (size_t k = 0; k < g.interactions.size(); ++k) {
    const auto& ix = g.interactions[k];
    out += k ? ",\n    " : "\n    ";
    auto ref = [](const NodeRef& r) {
      return std::string("[\"") + (r.kind == NodeKind::LonePair ? "lp" : "bond") + "\", " +
             std::to_string(r.index) + "]";
    };
    out += "{\"donor\": " + ref(ix.donor) + ", \"acceptor\": " + ref(ix.acceptor) +
           ", \"e2\": " + format_float(ix.e2) + ", \"de\": " + format_float(ix.energy_gap) +
           ", \"fij\": " + format_float(ix.fock_element) + "}";
  }
  out += g.interactions.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

ParseResult<SimgGraph> parse_simg(std::string_view text) {
  try {
    json j = parse_json_or_fail(text);
    if (!j.is_object()) fail(ParseErrorKind::Syntax, "top level must be an object");
    SimgGraph g;
    ExtendedGraph& eg = g.graph;
    eg.charge = integer(field(j, "charge"), "charge");
    for (const auto& a : array(field(j, "atoms"), "atoms")) {
      std::string el = str(field(a, "el"), "el");
      auto idx = element_index(el);
      if (!idx) fail(ParseErrorKind::Range, "unknown element '" + el + "'");
      Atom atom;
      atom.element = *idx;
      const auto& xyz = array(field(a, "xyz"), "xyz");
      if (xyz.size() != 3) fail(ParseErrorKind::Syntax, "xyz must have 3 components");
      for (int k = 0; k < 3; ++k) atom.position[k] = num(xyz[k], "xyz");
      eg.atoms.push_back(atom);
    }
    for (const auto& a : array(field(j, "lp_nodes"), "lp_nodes")) {
      LpNode n;
      n.owner_atom = integer(field(a, "owner"), "owner");
      n.lp_type = integer(field(a, "type"), "type");
      if (n.owner_atom < 0 || n.owner_atom >= static_cast<int>(eg.atoms.size()))
        fail(ParseErrorKind::Reference, "lp owner out of range");
      eg.lp_nodes.push_back(n);
    }
    for (const auto& a : array(field(j, "bond_nodes"), "bond_nodes")) {
      BondPairNode n;
      n.atom_i = integer(field(a, "i"), "i");
      n.atom_j = integer(field(a, "j"), "j");
      std::string kind = str(field(a, "kind"), "kind");
      if (kind == "sigma") n.kind = BondKind::Sigma;
      else if (kind == "pi") n.kind = BondKind::Pi;
      else fail(ParseErrorKind::Syntax, "bond kind must be sigma or pi");
      n.pi_rank = integer(field(a, "rank"), "rank");
      eg.bond_nodes.push_back(n);
    }
    for (const auto& a : array(field(j, "edges_aa"), "edges_aa")) {
      AtomAtomEdge e;
      e.i = integer(field(a, "i"), "i");
      e.j = integer(field(a, "j"), "j");
      e.order = integer(field(a, "order"), "order");
      e.length = num(field(a, "length"), "length");
      eg.edges_atom_atom.push_back(e);
    }
    for (const auto& a : array(field(j, "edges_ab"), "edges_ab")) {
      const auto& pr = array(a, "edges_ab entry");
      if (pr.size() != 2) fail(ParseErrorKind::Syntax, "edge entry must be a pair");
      eg.edges_atom_bond.emplace_back(integer(pr[0], "atom"), integer(pr[1], "bond"));
    }
    for (const auto& a : array(field(j, "edges_alp"), "edges_alp")) {
      const auto& pr = array(a, "edges_alp entry");
      if (pr.size() != 2) fail(ParseErrorKind::Syntax, "edge entry must be a pair");
      eg.edges_atom_lp.emplace_back(integer(pr[0], "atom"), integer(pr[1], "lp"));
    }
    auto read_rows = [&](const char* key, auto& rows, size_t width) {
      for (const auto& a : array(field(j, key), key)) {
        const auto& row = array(a, key);
        if (row.size() != width)
          fail(ParseErrorKind::Syntax, std::string(key) + " row has wrong width");
        typename std::decay_t<decltype(rows)>::value_type r{};
        for (size_t c = 0; c < width; ++c) r[c] = num(row[c], key);
        rows.push_back(r);
      }
    };
    read_rows("atom_targets", g.atom_targets, 4);
    read_rows("lp_targets", g.lp_targets, 5);
    read_rows("bond_occ", g.bond_occupancies, 2);
    read_rows("bond_side_targets", g.bond_side_targets, 24);
    for (const auto& a : array(field(j, "interactions"), "interactions")) {
      InteractionEdge ix;
      auto ref = [&](const json& r, const char* what) {
        const auto& pr = array(r, what);
        if (pr.size() != 2) fail(ParseErrorKind::Syntax, "node ref must be a pair");
        std::string kind = str(pr[0], what);
        NodeRef n;
        if (kind == "lp") n.kind = NodeKind::LonePair;
        else if (kind == "bond") n.kind = NodeKind::BondPair;
        else fail(ParseErrorKind::Syntax, "node ref kind must be lp or bond");
        n.index = integer(pr[1], what);
        int limit = n.kind == NodeKind::LonePair ? static_cast<int>(eg.lp_nodes.size())
                                                 : static_cast<int>(eg.bond_nodes.size());
        if (n.index < 0 || n.index >= limit)
          fail(ParseErrorKind::Reference, std::string(what) + " index out of range");
        return n;
      };
      ix.donor = ref(field(a, "donor"), "donor");
      ix.acceptor = ref(field(a, "acceptor"), "acceptor");
      if (ix.acceptor.kind != NodeKind::BondPair)
        fail(ParseErrorKind::Range, "acceptor must be a bond node");
      ix.e2 = num(field(a, "e2"), "e2");
      ix.energy_gap = num(field(a, "de"), "de");
      ix.fock_element = num(field(a, "fij"), "fij");
      g.interactions.push_back(ix);
    }
    if (g.atom_targets.size() != eg.atoms.size() || g.lp_targets.size() != eg.lp_nodes.size() ||
        g.bond_occupancies.size() != eg.bond_nodes.size() ||
        g.bond_side_targets.size() != eg.bond_nodes.size())
      fail(ParseErrorKind::Range, "target table sizes do not match node tables");
    return g;
  } catch (const ParseFailure& pf) {
    return pf.err;
  }
}

// --- structural equality -------------------------------------------------

bool molecules_equal(const Molecule& a, const Molecule& b) {
  if (a.charge != b.charge || a.atoms.size() != b.atoms.size() || a.bonds.size() != b.bonds.size())
    return false;
  for (size_t k = 0; k < a.atoms.size(); ++k) {
    if (a.atoms[k].element != b.atoms[k].element) return false;
    for (int c = 0; c < 3; ++c)
      if (!float_close(a.atoms[k].position[c], b.atoms[k].position[c])) return false;
  }
  auto key = [](const Bond& x) { return std::tuple(x.i, x.j, x.order); };
  auto sa = a.bonds, sb = b.bonds;
  auto lt = [&](const Bond& x, const Bond& y) { return key(x) < key(y); };
  std::sort(sa.begin(), sa.end(), lt);
  std::sort(sb.begin(), sb.end(), lt);
  for (size_t k = 0; k < sa.size(); ++k)
    if (key(sa[k]) != key(sb[k])) return false;
  return true;
}

namespace {

bool sides_equal(const BondOrbitalSide& a, const BondOrbitalSide& b) {
  const double* pa = &a.s1;
  const double* pb = &b.s1;
  for (int k = 0; k < 13; ++k)
    if (!float_close(pa[k], pb[k])) return false;
  return true;
}

}  // namespace

bool records_equal(const NboRecord& a, const NboRecord& b) {
  if (a.atom_npa.size() != b.atom_npa.size() || a.lone_pairs.size() != b.lone_pairs.size() ||
      a.bond_orbitals.size() != b.bond_orbitals.size() ||
      a.interactions.size() != b.interactions.size())
    return false;
  for (size_t k = 0; k < a.atom_npa.size(); ++k) {
    const auto &x = a.atom_npa[k], &y = b.atom_npa[k];
    if (!float_close(x.natural_charge, y.natural_charge) ||
        !float_close(x.core_electrons, y.core_electrons) ||
        !float_close(x.valence_electrons, y.valence_electrons) ||
        !float_close(x.total_electrons, y.total_electrons))
      return false;
  }
  for (size_t k = 0; k < a.lone_pairs.size(); ++k) {
    const auto &x = a.lone_pairs[k], &y = b.lone_pairs[k];
    if (x.owner_atom != y.owner_atom || !float_close(x.s, y.s) || !float_close(x.p, y.p) ||
        !float_close(x.d, y.d) || !float_close(x.f, y.f) ||
        !float_close(x.occupancy, y.occupancy))
      return false;
  }
  for (size_t k = 0; k < a.bond_orbitals.size(); ++k) {
    const auto &x = a.bond_orbitals[k], &y = b.bond_orbitals[k];
    if (x.atom_i != y.atom_i || x.atom_j != y.atom_j || x.kind != y.kind ||
        !sides_equal(x.bonding, y.bonding) || !sides_equal(x.antibonding, y.antibonding))
      return false;
  }
  for (size_t k = 0; k < a.interactions.size(); ++k) {
    const auto &x = a.interactions[k], &y = b.interactions[k];
    if (!(x.donor == y.donor) || !(x.acceptor == y.acceptor) || !float_close(x.e2, y.e2) ||
        !float_close(x.energy_gap, y.energy_gap) ||
        !float_close(x.fock_element, y.fock_element))
      return false;
  }
  return true;
}

bool simg_equal(const SimgGraph& a, const SimgGraph& b) {
  const ExtendedGraph &x = a.graph, &y = b.graph;
  if (x.charge != y.charge || x.atoms.size() != y.atoms.size() ||
      x.lp_nodes.size() != y.lp_nodes.size() || x.bond_nodes.size() != y.bond_nodes.size() ||
      x.edges_atom_atom.size() != y.edges_atom_atom.size() ||
      x.edges_atom_bond != y.edges_atom_bond || x.edges_atom_lp != y.edges_atom_lp)
    return false;
  for (size_t k = 0; k < x.atoms.size(); ++k) {
    if (x.atoms[k].element != y.atoms[k].element) return false;
    for (int c = 0; c < 3; ++c)
      if (!float_close(x.atoms[k].position[c], y.atoms[k].position[c])) return false;
  }
  for (size_t k = 0; k < x.lp_nodes.size(); ++k)
    if (x.lp_nodes[k].owner_atom != y.lp_nodes[k].owner_atom ||
        x.lp_nodes[k].lp_type != y.lp_nodes[k].lp_type)
      return false;
  for (size_t k = 0; k < x.bond_nodes.size(); ++k) {
    const auto &p = x.bond_nodes[k], &q = y.bond_nodes[k];
    if (p.atom_i != q.atom_i || p.atom_j != q.atom_j || p.kind != q.kind ||
        p.pi_rank != q.pi_rank)
      return false;
  }
  for (size_t k = 0; k < x.edges_atom_atom.size(); ++k) {
    const auto &p = x.edges_atom_atom[k], &q = y.edges_atom_atom[k];
    if (p.i != q.i || p.j != q.j || p.order != q.order || !float_close(p.length, q.length))
      return false;
  }
  auto rows_equal = [](const auto& ra, const auto& rb) {
    if (ra.size() != rb.size()) return false;
    for (size_t k = 0; k < ra.size(); ++k)
      for (size_t c = 0; c < ra[k].size(); ++c)
        if (!float_close(ra[k][c], rb[k][c])) return false;
    return true;
  };
  if (!rows_equal(a.atom_targets, b.atom_targets) || !rows_equal(a.lp_targets, b.lp_targets) ||
      !rows_equal(a.bond_occupancies, b.bond_occupancies) ||
      !rows_equal(a.bond_side_targets, b.bond_side_targets))
    return false;
  if (a.interactions.size() != b.interactions.size()) return false;
  for (size_t k = 0; k < a.interactions.size(); ++k) {
    const auto &p = a.interactions[k], &q = b.interactions[k];
    if (!(p.donor == q.donor) || !(p.acceptor == q.acceptor) || !float_close(p.e2, q.e2) ||
        !float_close(p.energy_gap, q.energy_gap) ||
        !float_close(p.fock_element, q.fock_element))
      return false;
  }
  return true;
}

std::optional<int> element_index(std::string_view symbol) {
  for (int k = 0; k < kNumElements; ++k)
    if (kElements[k] == symbol) return k;
  return std::nullopt;
}

}  // namespace simg
