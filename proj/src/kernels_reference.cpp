#include "dmt/kernels.hpp"

namespace dmt::kernels::reference {

namespace {

double input_at(std::span<const double> x, const ConvDims& d, std::size_t b, std::size_t c,
                long yy, long xx) {
  if (yy < 0 || xx < 0 || yy >= static_cast<long>(d.height) || xx >= static_cast<long>(d.width)) {
    return 0.0;
  }
  return x[((b * d.c_in + c) * d.height + static_cast<std::size_t>(yy)) * d.width +
           static_cast<std::size_t>(xx)];
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += dc[i * n + j] * b[p * n + j];
      da[i * k + p] += acc;
    }
  }
}

void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * dc[i * n + j];
      db[p * n + j] += acc;
    }
  }
}

void conv2d_forward(std::span<const double> x, std::span<const double> weight,
                    std::span<double> y, const ConvDims& d) {
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t co = 0; co < d.c_out; ++co) {
      for (std::size_t yy = 0; yy < d.height; ++yy) {
        for (std::size_t xx = 0; xx < d.width; ++xx) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < d.c_in; ++ci) {
            for (long ky = 0; ky < 3; ++ky) {
              for (long kx = 0; kx < 3; ++kx) {
                const double w = weight[((co * d.c_in + ci) * 3 + static_cast<std::size_t>(ky)) * 3 +
                                        static_cast<std::size_t>(kx)];
                acc += w * input_at(x, d, b, ci, static_cast<long>(yy) + ky - 1,
                                    static_cast<long>(xx) + kx - 1);
              }
            }
          }
          y[((b * d.c_out + co) * d.height + yy) * d.width + xx] = acc;
        }
      }
    }
  }
}

void conv2d_grad_input(std::span<const double> dy, std::span<const double> weight,
                       std::span<double> dx, const ConvDims& d) {
  // Scatter form: every output position distributes its gradient to the inputs it read.
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t co = 0; co < d.c_out; ++co) {
      for (std::size_t yy = 0; yy < d.height; ++yy) {
        for (std::size_t xx = 0; xx < d.width; ++xx) {
          const double g = dy[((b * d.c_out + co) * d.height + yy) * d.width + xx];
          for (std::size_t ci = 0; ci < d.c_in; ++ci) {
            for (long ky = 0; ky < 3; ++ky) {
              for (long kx = 0; kx < 3; ++kx) {
                const long iy = static_cast<long>(yy) + ky - 1;
                const long ix = static_cast<long>(xx) + kx - 1;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(d.height) ||
                    ix >= static_cast<long>(d.width)) {
                  continue;
                }
                const double w = weight[((co * d.c_in + ci) * 3 + static_cast<std::size_t>(ky)) * 3 +
                                        static_cast<std::size_t>(kx)];
                dx[((b * d.c_in + ci) * d.height + static_cast<std::size_t>(iy)) * d.width +
                   static_cast<std::size_t>(ix)] += w * g;
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_grad_weight(std::span<const double> x, std::span<const double> dy,
                        std::span<double> dw, const ConvDims& d) {
  for (std::size_t co = 0; co < d.c_out; ++co) {
    for (std::size_t ci = 0; ci < d.c_in; ++ci) {
      for (long ky = 0; ky < 3; ++ky) {
        for (long kx = 0; kx < 3; ++kx) {
          double acc = 0.0;
          for (std::size_t b = 0; b < d.batch; ++b) {
            for (std::size_t yy = 0; yy < d.height; ++yy) {
              for (std::size_t xx = 0; xx < d.width; ++xx) {
                acc += dy[((b * d.c_out + co) * d.height + yy) * d.width + xx] *
                       input_at(x, d, b, ci, static_cast<long>(yy) + ky - 1,
                                static_cast<long>(xx) + kx - 1);
              }
            }
          }
          dw[((co * d.c_in + ci) * 3 + static_cast<std::size_t>(ky)) * 3 +
             static_cast<std::size_t>(kx)] += acc;
        }
      }
    }
  }
}

}  // namespace dmt::kernels::reference
