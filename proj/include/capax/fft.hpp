#pragma once

// Zero-padded linear convolution on a grid via FFTW.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "capax/grid.hpp"

namespace capax {

namespace detail {

// FFTW's planner is not thread safe; execution with the new-array API is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using fftw_buffer = std::unique_ptr<T[], FftwFree>;

inline fftw_buffer<double> alloc_real(std::size_t n) {
  return fftw_buffer<double>(fftw_alloc_real(n));
}
inline fftw_buffer<fftw_complex> alloc_complex(std::size_t n) {
  return fftw_buffer<fftw_complex>(fftw_alloc_complex(n));
}

}  // namespace detail

/// Convolution with a fixed kernel sampled on the doubled grid (M = 2N per
/// axis, wraparound layout: index m holds offset m for m < N and m - M
/// otherwise). apply() returns sum_y k(x - y) f(y) at every node x.
class Convolver {
 public:
  Convolver(const Grid& g, std::span<const double> kernel_wrapped) : grid_(g) {
    int n = g.dim;
    M_ = 2 * g.points;
    real_size_ = 1;
    for (int a = 0; a < n; ++a) real_size_ *= static_cast<std::size_t>(M_);
    complex_size_ = real_size_ / M_ * (M_ / 2 + 1);
    if (kernel_wrapped.size() != real_size_) throw invalid_input("kernel table size does not match doubled grid");

    in_ = detail::alloc_real(real_size_);
    out_ = detail::alloc_complex(complex_size_);
    std::vector<int> dims(n, M_);
    {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      forward_ = fftw_plan_dft_r2c(n, dims.data(), in_.get(), out_.get(), FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r(n, dims.data(), out_.get(), in_.get(), FFTW_ESTIMATE);
    }
    pad_map_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto ijk = g.unravel(i);
      std::size_t p = 0;
      for (int a = 0; a < n; ++a) p = p * static_cast<std::size_t>(M_) + static_cast<std::size_t>(ijk[a]);
      pad_map_[i] = p;
    }
    std::copy(kernel_wrapped.begin(), kernel_wrapped.end(), in_.get());
    fftw_execute(forward_);
    spectrum_.resize(complex_size_);
    double scale = 1.0 / static_cast<double>(real_size_);
    for (std::size_t i = 0; i < complex_size_; ++i)
      spectrum_[i] = std::complex<double>(out_[i][0], out_[i][1]) * scale;
  }

  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;

  ~Convolver() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  const Grid& grid() const { return grid_; }

  std::vector<double> apply(std::span<const double> f) const {
    std::vector<double> result(grid_.size());
    apply_into(f, result);
    return result;
  }

  void apply_into(std::span<const double> f, std::span<double> result) const {
    if (f.size() != grid_.size() || result.size() != grid_.size())
      throw invalid_input("convolution input does not match grid");
    auto in = detail::alloc_real(real_size_);
    auto out = detail::alloc_complex(complex_size_);
    std::fill(in.get(), in.get() + real_size_, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) in[pad_map_[i]] = f[i];
    fftw_execute_dft_r2c(forward_, in.get(), out.get());
    for (std::size_t i = 0; i < complex_size_; ++i) {
      std::complex<double> z(out[i][0], out[i][1]);
      z *= spectrum_[i];
      out[i][0] = z.real();
      out[i][1] = z.imag();
    }
    fftw_execute_dft_c2r(backward_, out.get(), in.get());
    for (std::size_t i = 0; i < result.size(); ++i) result[i] = in[pad_map_[i]];
  }

 private:
  Grid grid_;
  int M_ = 0;
  std::size_t real_size_ = 0;
  std::size_t complex_size_ = 0;
  detail::fftw_buffer<double> in_;
  detail::fftw_buffer<fftw_complex> out_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::vector<std::complex<double>> spectrum_;
  std::vector<std::size_t> pad_map_;
};

}  // namespace capax
