// Copyright 2026 The Hierflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HIERFLOW_SRC_CSV_HPP
#define HIERFLOW_SRC_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hierflow::detail {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Reads all non-blank rows. Fields are whitespace-trimmed; double quotes
/// may wrap a field containing the delimiter ("" escapes a quote).
std::vector<CsvRow> read_csv(std::istream& in, char delimiter, bool header);

/// Strict decimal parse of the whole field; throws ParseError.
double parse_number(std::string_view text, std::size_t line,
                    std::string_view what);

/// Quotes `field` when it contains the delimiter, a quote or a newline.
std::string csv_escape(const std::string& field, char delimiter = ',');

/// Shortest round-trip decimal representation.
std::string format_number(double value);

}  // namespace hierflow::detail

#endif  // HIERFLOW_SRC_CSV_HPP
