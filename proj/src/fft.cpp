#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace caslab::detail {

namespace {

std::mutex plan_mutex;

fftw_plan plan_for(int nx, int ny, int sign) {
    static std::map<std::tuple<int, int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_tuple(nx, ny, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<std::complex<double>> scratch(std::size_t(nx) * ny);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(ny, nx, p, p, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(key, plan);
    return plan;
}

} // namespace

void fft2(std::vector<std::complex<double>>& data, int nx, int ny, int sign) {
    fftw_plan plan = plan_for(nx, ny, sign);
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
}

} // namespace caslab::detail
