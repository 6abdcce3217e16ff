#pragma once

#include "caslab/error.hpp"
#include "caslab/io.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace caslab {

// Experiment files:
//
//   file    := { line }
//   line    := ws [ header | pair ] ws [ comment ] newline
//   header  := "[" key { "." key } "]"
//   pair    := key ws "=" ws value
//   key     := [A-Za-z0-9_-]+
//   value   := string | number | "true" | "false" | array
//   array   := "[" [ value { "," value } [ "," ] ] "]"      (may span lines, comments allowed)
//   string  := '"' { char | "\" ( '"' | "\" | "n" | "t" ) } '"'
//   number  := integer or decimal with optional exponent, optional sign
//   comment := "#" to end of line
//
// Tables become nested JSON objects. Redefining a key or a table is an error.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, int line, int column, const std::string& source = {});
    int line, column;
};

json parse_config(std::string_view text, const std::string& source = "<config>");
json load_config(const std::filesystem::path& path);

} // namespace caslab
