#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dmt/tensor.hpp"

namespace dmt {

enum class DataMode { vector2d, image };

struct DatasetInfo {
  std::string generator;
  std::uint64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();
};

/// Index-aligned (x0, y0) pairs stored as stacked [n, sample...] tensors.
/// Rows [0, n_train) form the train split, the rest the test split.
class PairedDataset {
 public:
  /// Rejects mismatched shapes, values outside [-1, 1], and elementwise
  /// identical domains (DiracDegeneracyError).
  PairedDataset(Tensor x0, Tensor y0, std::size_t n_train, DatasetInfo info);

  DataMode mode() const noexcept { return sample_shape_.size() == 1 ? DataMode::vector2d : DataMode::image; }
  const Shape& sample_shape() const noexcept { return sample_shape_; }
  std::size_t size() const noexcept { return x0_.dim(0); }
  std::size_t n_train() const noexcept { return n_train_; }
  std::size_t n_test() const noexcept { return size() - n_train_; }
  const DatasetInfo& info() const noexcept { return info_; }

  const Tensor& x0() const noexcept { return x0_; }
  const Tensor& y0() const noexcept { return y0_; }
  Tensor x0_at(std::size_t i) const;
  Tensor y0_at(std::size_t i) const;
  Tensor train_x0() const { return x0_.slice_leading(0, n_train_); }
  Tensor train_y0() const { return y0_.slice_leading(0, n_train_); }
  Tensor test_x0() const { return x0_.slice_leading(n_train_, n_test()); }
  Tensor test_y0() const { return y0_.slice_leading(n_train_, n_test()); }

 private:
  Tensor x0_;
  Tensor y0_;
  std::size_t n_train_;
  Shape sample_shape_;
  DatasetInfo info_;
};

bool elementwise_identical(const Tensor& a, const Tensor& b);
/// Throws DiracDegeneracyError when the two domains coincide.
void check_not_dirac(const Tensor& x0, const Tensor& y0);

/// Rows kept for testing when a generator is asked for n pairs.
std::size_t default_test_count(std::size_t n);

/// Two-moons points (centered, scaled into the unit disk) and their rotation
/// about the origin.
PairedDataset gen_moons_pair(std::size_t n, double rotation, double noise_sd, std::uint64_t seed);
/// Outline of a random rectangle or ellipse -> the filled shape (1 channel).
/// Rectangles fill at kRectFill, ellipses at kEllipseFill.
PairedDataset gen_shapes_pair(std::size_t n, std::size_t size, std::uint64_t seed);
/// Luminance (replicated to 3 channels) -> procedurally colored pattern.
PairedDataset gen_gray2color_pair(std::size_t n, std::size_t size, std::uint64_t seed);

inline constexpr double kRectFill = 0.6;
inline constexpr double kEllipseFill = 0.2;

/// Luminance with the (0.299, 0.587, 0.114) weights.
double luminance(double r, double g, double b);

struct ImagePair {
  Tensor x0;
  Tensor y0;
};

/// Builds a (gray, color) pair from a [3, h, w] color image. A color image
/// whose channels already coincide is rejected.
ImagePair make_gray2color_pair(const Tensor& color);

std::string encode_dataset(const PairedDataset& ds);
PairedDataset decode_dataset(std::string_view bytes);
void save_dataset(const PairedDataset& ds, const std::filesystem::path& path);
PairedDataset load_dataset(const std::filesystem::path& path);

/// FNV-1a of the encoded file.
std::uint64_t dataset_hash(const PairedDataset& ds);

}  // namespace dmt
