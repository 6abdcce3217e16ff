#pragma once

#include "caslab/gauss.hpp"
#include "caslab/spectra.hpp"
#include "caslab/svg.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace caslab::cli {

// Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_numerical = 3;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

// Fold diagram: branch parameter against the RMS norm of u and against the
// smallest |eigenvalue|, one polyline per branch joined at the fold marker.
std::vector<Plot> fold_plots(const RayResult& r);
std::vector<Plot> scan_plots(const ScanReport& r, double floor);
std::vector<Plot> eigenvalue_plots(const SpectrumReport& r);

} // namespace caslab::cli
