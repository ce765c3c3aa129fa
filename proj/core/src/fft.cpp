#include "holofuse/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "holofuse/errors.hpp"

namespace holofuse {
namespace {

// FFTW's planner is not reentrant; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n == 0) throw ShapeError("RealFft: length must be positive");
  std::vector<double> re(n);
  std::vector<Complex> sp(n / 2 + 1);
  auto* cx = reinterpret_cast<fftw_complex*>(sp.data());
  const int len = static_cast<int>(n);
  std::lock_guard lock(planner_mutex());
  forward_plan_ = fftw_plan_dft_r2c_1d(len, re.data(), cx, FFTW_ESTIMATE | FFTW_UNALIGNED);
  inverse_plan_ = fftw_plan_dft_c2r_1d(len, cx, re.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  if (forward_plan_ == nullptr || inverse_plan_ == nullptr) {
    throw NumericError("RealFft: FFTW planning failed");
  }
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void RealFft::forward(std::span<const double> in, std::span<Complex> out) const {
  if (in.size() != n_ || out.size() != bins()) throw ShapeError("RealFft::forward: size mismatch");
  // r2c does not modify its input, the cast only satisfies the C signature.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const Complex> in, std::span<double> out) const {
  if (in.size() != bins() || out.size() != n_) throw ShapeError("RealFft::inverse: size mismatch");
  thread_local std::vector<Complex> scratch;
  scratch.assign(in.begin(), in.end());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
  const double scale = 1.0 / static_cast<double>(n_);
  for (double& x : out) x *= scale;
}

std::shared_ptr<const RealFft> real_fft(std::size_t n) {
  static std::mutex cache_mutex;
  static std::map<std::size_t, std::shared_ptr<const RealFft>> cache;
  std::lock_guard lock(cache_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto plan = std::make_shared<const RealFft>(n);
  cache.emplace(n, plan);
  return plan;
}

}  // namespace holofuse
