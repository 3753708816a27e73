// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "simg/chem.hpp"
#include "simg/graph.hpp"

namespace simg {

enum class ParseErrorKind { Syntax, Range, Reference, Checksum };

struct ParseError {
  int line = 1;    // 1-based
  int column = 1;  // 1-based
  ParseErrorKind kind = ParseErrorKind::Syntax;
  std::string message;

  std::string to_string() const;
};

template <typename T>
using ParseResult = std::variant<T, ParseError>;

enum class ParseMode { Strict, Lenient };

// Formats a double with 9 significant digits; the canonical float encoding
// used by every serializer here.
std::string format_float(double v);

// True when a == b bit-exactly, within 1e-9 relative error, or equal after
// canonical formatting.
bool float_close(double a, double b);

// --- MOLJ ----------------------------------------------------------------
ParseResult<Molecule> parse_molecule(std::string_view text);
std::string serialize_molecule(const Molecule& m);

// --- NBOJ / NBOTXT -------------------------------------------------------
// Dispatches on content: `{`-leading input is NBOJ, otherwise NBOTXT.
ParseResult<NboRecord> parse_nbo_record(std::string_view text,
                                        ParseMode mode = ParseMode::Strict);
ParseResult<NboRecord> parse_nboj(std::string_view text,
                                  ParseMode mode = ParseMode::Strict);
ParseResult<NboRecord> parse_nbotxt(std::string_view text,
                                    ParseMode mode = ParseMode::Strict);
std::string serialize_nbo_record(const NboRecord& r);
std::string serialize_nbotxt(const NboRecord& r);

// --- SIMG ----------------------------------------------------------------
std::string serialize_simg(const SimgGraph& g);
ParseResult<SimgGraph> parse_simg(std::string_view text);

// Structural equality helpers (floats compared via float_close).
bool molecules_equal(const Molecule& a, const Molecule& b);
bool records_equal(const NboRecord& a, const NboRecord& b);
bool simg_equal(const SimgGraph& a, const SimgGraph& b);

}  // namespace simg
