#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace adar {

using CsvRow = std::vector<std::string>;

/// RFC 4180 reader: comma separated, double-quoted fields with "" escapes,
/// CRLF or LF record ends, line breaks allowed inside quotes. A trailing
/// empty line is ignored. Throws SchemaError on an unterminated quote.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);

}  // namespace adar
