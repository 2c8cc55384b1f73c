#pragma once

// Dense kernels behind the autodiff ops. Two implementations with identical
// contracts:
//   reference:: straightforward loops, kept as the correctness oracle;
//   parallel::  loop orders that vectorize, OpenMP over independent outputs.
// Each parallel output element is accumulated by exactly one thread in a fixed
// order, so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace dmt::kernels {

/// 3x3 cross-correlation, zero padding 1, stride 1; spatial size preserved.
/// Layouts: x [batch, c_in, h, w], weight [c_out, c_in, 3, 3], y [batch, c_out, h, w].
struct ConvDims {
  std::size_t batch = 1;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t height = 1;
  std::size_t width = 1;
};

namespace reference {

/// c = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
/// da += dc * b^T
void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t k, std::size_t n);
/// db += a^T * dc
void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t k, std::size_t n);

void conv2d_forward(std::span<const double> x, std::span<const double> weight,
                    std::span<double> y, const ConvDims& d);
/// dx += d(y)/d(x)^T dy
void conv2d_grad_input(std::span<const double> dy, std::span<const double> weight,
                       std::span<double> dx, const ConvDims& d);
/// dw += d(y)/d(w)^T dy
void conv2d_grad_weight(std::span<const double> x, std::span<const double> dy,
                        std::span<double> dw, const ConvDims& d);

}  // namespace reference

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t k, std::size_t n);

void conv2d_forward(std::span<const double> x, std::span<const double> weight,
                    std::span<double> y, const ConvDims& d);
void conv2d_grad_input(std::span<const double> dy, std::span<const double> weight,
                       std::span<double> dx, const ConvDims& d);
void conv2d_grad_weight(std::span<const double> x, std::span<const double> dy,
                        std::span<double> dw, const ConvDims& d);

}  // namespace parallel

}  // namespace dmt::kernels
