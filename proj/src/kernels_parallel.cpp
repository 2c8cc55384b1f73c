#include <algorithm>

#include "dmt/kernels.hpp"

namespace dmt::kernels::parallel {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelThreshold = 1u << 15;

struct Span1d {
  std::size_t begin;
  std::size_t end;
};

// Output rows/cols that read an in-bounds input for kernel tap `k` (0..2).
Span1d valid_range(std::size_t extent, std::size_t k) {
  const std::size_t begin = k == 0 ? 1 : 0;
  const std::size_t end = k == 2 ? extent - 1 : extent;
  return {begin, std::max(begin, end)};
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c.data() + i * n;
    std::fill(crow, crow + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* dcrow = dc.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data() + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
      da[i * k + p] += acc;
    }
  }
}

void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(k);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (long pp = 0; pp < rows; ++pp) {
    const auto p = static_cast<std::size_t>(pp);
    double* dbrow = db.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = a[i * k + p];
      const double* dcrow = dc.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) dbrow[j] += aip * dcrow[j];
    }
  }
}

void conv2d_forward(std::span<const double> x, std::span<const double> weight,
                    std::span<double> y, const ConvDims& d) {
  const std::size_t plane = d.height * d.width;
  const long tasks = static_cast<long>(d.batch * d.c_out);
  const std::size_t work = d.batch * d.c_out * d.c_in * plane * 9;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (long task = 0; task < tasks; ++task) {
    const std::size_t b = static_cast<std::size_t>(task) / d.c_out;
    const std::size_t co = static_cast<std::size_t>(task) % d.c_out;
    double* out = y.data() + (b * d.c_out + co) * plane;
    std::fill(out, out + plane, 0.0);
    for (std::size_t ci = 0; ci < d.c_in; ++ci) {
      const double* in = x.data() + (b * d.c_in + ci) * plane;
      const double* w = weight.data() + (co * d.c_in + ci) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const Span1d rows = valid_range(d.height, ky);
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const Span1d cols = valid_range(d.width, kx);
          const double wv = w[ky * 3 + kx];
          for (std::size_t yy = rows.begin; yy < rows.end; ++yy) {
            double* orow = out + yy * d.width;
            const double* irow = in + (yy + ky - 1) * d.width;
            for (std::size_t xx = cols.begin; xx < cols.end; ++xx) {
              orow[xx] += wv * irow[xx + kx - 1];
            }
          }
        }
      }
    }
  }
}

void conv2d_grad_input(std::span<const double> dy, std::span<const double> weight,
                       std::span<double> dx, const ConvDims& d) {
  const std::size_t plane = d.height * d.width;
  const long tasks = static_cast<long>(d.batch * d.c_in);
  const std::size_t work = d.batch * d.c_out * d.c_in * plane * 9;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (long task = 0; task < tasks; ++task) {
    const std::size_t b = static_cast<std::size_t>(task) / d.c_in;
    const std::size_t ci = static_cast<std::size_t>(task) % d.c_in;
    double* gin = dx.data() + (b * d.c_in + ci) * plane;
    for (std::size_t co = 0; co < d.c_out; ++co) {
      const double* gout = dy.data() + (b * d.c_out + co) * plane;
      const double* w = weight.data() + (co * d.c_in + ci) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const Span1d rows = valid_range(d.height, ky);
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const Span1d cols = valid_range(d.width, kx);
          const double wv = w[ky * 3 + kx];
          for (std::size_t yy = rows.begin; yy < rows.end; ++yy) {
            const double* grow = gout + yy * d.width;
            double* irow = gin + (yy + ky - 1) * d.width;
            for (std::size_t xx = cols.begin; xx < cols.end; ++xx) {
              irow[xx + kx - 1] += wv * grow[xx];
            }
          }
        }
      }
    }
  }
}

void conv2d_grad_weight(std::span<const double> x, std::span<const double> dy,
                        std::span<double> dw, const ConvDims& d) {
  const std::size_t plane = d.height * d.width;
  const long tasks = static_cast<long>(d.c_out * d.c_in);
  const std::size_t work = d.batch * d.c_out * d.c_in * plane * 9;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (long task = 0; task < tasks; ++task) {
    const std::size_t co = static_cast<std::size_t>(task) / d.c_in;
    const std::size_t ci = static_cast<std::size_t>(task) % d.c_in;
    double* w = dw.data() + (co * d.c_in + ci) * 9;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      const Span1d rows = valid_range(d.height, ky);
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const Span1d cols = valid_range(d.width, kx);
        double acc = 0.0;
        for (std::size_t b = 0; b < d.batch; ++b) {
          const double* in = x.data() + (b * d.c_in + ci) * plane;
          const double* gout = dy.data() + (b * d.c_out + co) * plane;
          for (std::size_t yy = rows.begin; yy < rows.end; ++yy) {
            const double* grow = gout + yy * d.width;
            const double* irow = in + (yy + ky - 1) * d.width;
            for (std::size_t xx = cols.begin; xx < cols.end; ++xx) {
              acc += grow[xx] * irow[xx + kx - 1];
            }
          }
        }
        w[ky * 3 + kx] += acc;
      }
    }
  }
}

}  // namespace dmt::kernels::parallel
