#pragma once

// Reader and writer for the small TOML subset used by hetadmit config files:
//
//   # comment
//   top_key = 1
//   [table]
//   key = "text"          # strings, integers, floats, booleans
//   list = [10, 20.5]     # single-line arrays of scalars
//   [[array_of_tables]]
//   key = 0.25
//
// Dotted keys, inline tables, multi-line strings and dates are not supported.

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace hetadmit::toml_lite {

/// Throws Error(ParseError) with the offending line number.
nlohmann::json parse(std::string_view text);

/// Inverse of parse() for trees of at most two levels (tables and arrays of tables).
std::string dump(const nlohmann::json& tree);

}  // namespace hetadmit::toml_lite
