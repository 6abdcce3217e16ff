#pragma once

#include "caslab/grid.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace caslab {

using json = nlohmann::ordered_json;

json domain_to_json(const GridDomain& d);
GridDomain domain_from_json(const json& j);

json cplx_to_json(cplx v);
cplx cplx_from_json(const json& j);

// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// FNV-1a 64-bit, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

const char* artifact_version();

} // namespace caslab
