#include "caslab/io.hpp"

#include "caslab/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace caslab {

json domain_to_json(const GridDomain& d) {
    return json{{"nx", d.nx},        {"ny", d.ny}, {"lx", d.lx}, {"ly", d.ly}, {"origin", cplx_to_json(d.origin)},
                {"periodic", d.periodic}};
}

GridDomain domain_from_json(const json& j) {
    GridDomain d{j.at("nx").get<int>(),
                 j.at("ny").get<int>(),
                 j.at("lx").get<double>(),
                 j.at("ly").get<double>(),
                 cplx_from_json(j.at("origin")),
                 j.at("periodic").get<bool>()};
    d.validate();
    return d;
}

json cplx_to_json(cplx v) { return json::array({v.real(), v.imag()}); }

cplx cplx_from_json(const json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    return json::parse(in);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const char* artifact_version() { return CASLAB_VERSION; }

} // namespace caslab
