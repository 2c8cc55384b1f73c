#include "dmt/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dmt/binary_io.hpp"
#include "dmt/errors.hpp"
#include "dmt/rng.hpp"

namespace dmt {

namespace {

constexpr std::string_view kMagic = "DMTDATA1";
constexpr int kFormatVersion = 1;

std::string mode_name(DataMode m) { return m == DataMode::vector2d ? "vector2d" : "image"; }

void require_pairs(std::size_t n) {
  if (n < 2) throw ContractError("a paired dataset needs n >= 2, got " + std::to_string(n));
}

std::size_t train_count(std::size_t n) { return n - default_test_count(n); }

}  // namespace

std::size_t default_test_count(std::size_t n) { return n / 5; }

bool elementwise_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

void check_not_dirac(const Tensor& x0, const Tensor& y0) {
  if (elementwise_identical(x0, y0)) throw DiracDegeneracyError();
}

PairedDataset::PairedDataset(Tensor x0, Tensor y0, std::size_t n_train, DatasetInfo info)
    : x0_(std::move(x0)), y0_(std::move(y0)), n_train_(n_train), info_(std::move(info)) {
  require_same_shape(x0_, y0_, "paired dataset");
  if (x0_.rank() != 2 && x0_.rank() != 4) {
    throw DimensionError("paired dataset expects [n,d] or [n,c,h,w], got " +
                         shape_to_string(x0_.shape()));
  }
  if (x0_.dim(0) == 0) throw ContractError("paired dataset is empty");
  if (n_train_ == 0 || n_train_ > x0_.dim(0)) {
    throw ValidationError("train split size " + std::to_string(n_train_) + " outside [1, " +
                          std::to_string(x0_.dim(0)) + "]");
  }
  for (const Tensor* t : {&x0_, &y0_}) {
    for (double v : t->data()) {
      if (!(v >= -1.0 && v <= 1.0)) throw ValidationError("dataset values must lie in [-1, 1]");
    }
  }
  check_not_dirac(x0_, y0_);
  sample_shape_.assign(x0_.shape().begin() + 1, x0_.shape().end());
}

Tensor PairedDataset::x0_at(std::size_t i) const {
  return x0_.slice_leading(i, 1).reshaped(sample_shape_);
}

Tensor PairedDataset::y0_at(std::size_t i) const {
  return y0_.slice_leading(i, 1).reshaped(sample_shape_);
}

PairedDataset gen_moons_pair(std::size_t n, double rotation, double noise_sd, std::uint64_t seed) {
  require_pairs(n);
  if (!(noise_sd >= 0.0)) throw ValidationError("noise_sd must be >= 0");
  double c = std::cos(rotation);
  double s = std::sin(rotation);
  // Snap round-off so quarter turns are exact (rotation = pi gives y0 == -x0).
  if (std::abs(c) < 1e-15) c = 0.0;
  if (std::abs(s) < 1e-15) s = 0.0;
  if (c == 1.0 && s == 0.0) throw DiracDegeneracyError();

  CounterRng rng(seed);
  Tensor x0({n, 2});
  Tensor y0({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = rng.uniform(0.0, std::numbers::pi);
    double px, py;
    if (rng.below(2) == 0) {
      px = std::cos(theta);
      py = std::sin(theta);
    } else {
      px = 1.0 - std::cos(theta);
      py = 0.5 - std::sin(theta);
    }
    px = 0.55 * (px - 0.5) + noise_sd * rng.normal();
    py = 0.55 * (py - 0.25) + noise_sd * rng.normal();
    x0[2 * i] = std::clamp(px, -1.0, 1.0);
    x0[2 * i + 1] = std::clamp(py, -1.0, 1.0);
    y0[2 * i] = std::clamp(c * px - s * py, -1.0, 1.0);
    y0[2 * i + 1] = std::clamp(s * px + c * py, -1.0, 1.0);
  }
  DatasetInfo info{"moons", seed, {{"rotation", rotation}, {"noise_sd", noise_sd}}};
  return PairedDataset(std::move(x0), std::move(y0), train_count(n), std::move(info));
}

PairedDataset gen_shapes_pair(std::size_t n, std::size_t size, std::uint64_t seed) {
  require_pairs(n);
  if (size < 8) throw ValidationError("shapes need size >= 8, got " + std::to_string(size));
  CounterRng rng(seed);
  const std::size_t plane = size * size;
  Tensor x0 = Tensor::full({n, 1, size, size}, -1.0);
  Tensor y0 = Tensor::full({n, 1, size, size}, -1.0);
  std::vector<char> inside(plane);
  const double sz = static_cast<double>(size);
  for (std::size_t i = 0; i < n; ++i) {
    const bool rect = rng.below(2) == 0;
    if (rect) {
      const std::size_t w = 3 + rng.below(size - 4);  // [3, size-2]
      const std::size_t h = 3 + rng.below(size - 4);
      const std::size_t x_lo = 1 + rng.below(size - 1 - w);
      const std::size_t y_lo = 1 + rng.below(size - 1 - h);
      for (std::size_t yy = 0; yy < size; ++yy) {
        for (std::size_t xx = 0; xx < size; ++xx) {
          inside[yy * size + xx] = yy >= y_lo && yy < y_lo + h && xx >= x_lo && xx < x_lo + w;
        }
      }
    } else {
      const double rx = rng.uniform(2.0, sz / 2.0 - 1.0);
      const double ry = rng.uniform(2.0, sz / 2.0 - 1.0);
      const double cx = rng.uniform(rx + 0.5, sz - rx - 1.5);
      const double cy = rng.uniform(ry + 0.5, sz - ry - 1.5);
      for (std::size_t yy = 0; yy < size; ++yy) {
        for (std::size_t xx = 0; xx < size; ++xx) {
          const double u = (static_cast<double>(xx) - cx) / rx;
          const double v = (static_cast<double>(yy) - cy) / ry;
          inside[yy * size + xx] = u * u + v * v <= 1.0;
        }
      }
    }
    const double fill = rect ? kRectFill : kEllipseFill;
    double* xo = x0.data().data() + i * plane;
    double* yo = y0.data().data() + i * plane;
    for (std::size_t yy = 0; yy < size; ++yy) {
      for (std::size_t xx = 0; xx < size; ++xx) {
        if (!inside[yy * size + xx]) continue;
        yo[yy * size + xx] = fill;
        const bool edge = yy == 0 || xx == 0 || yy + 1 == size || xx + 1 == size ||
                          !inside[(yy - 1) * size + xx] || !inside[(yy + 1) * size + xx] ||
                          !inside[yy * size + xx - 1] || !inside[yy * size + xx + 1];
        if (edge) xo[yy * size + xx] = 1.0;
      }
    }
  }
  DatasetInfo info{"shapes", seed, {{"size", size}}};
  return PairedDataset(std::move(x0), std::move(y0), train_count(n), std::move(info));
}

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

ImagePair make_gray2color_pair(const Tensor& color) {
  if (color.rank() != 3 || color.dim(0) != 3) {
    throw DimensionError("color image must be [3,h,w], got " + shape_to_string(color.shape()));
  }
  const std::size_t plane = color.dim(1) * color.dim(2);
  bool gray = true;
  for (std::size_t k = 0; k < plane && gray; ++k) {
    gray = std::abs(color[k] - color[plane + k]) < 1e-12 &&
           std::abs(color[k] - color[2 * plane + k]) < 1e-12;
  }
  if (gray) throw ValidationError("target image is already grayscale; nothing to colorize");
  Tensor x0(color.shape());
  for (std::size_t k = 0; k < plane; ++k) {
    const double l = luminance(color[k], color[plane + k], color[2 * plane + k]);
    x0[k] = x0[plane + k] = x0[2 * plane + k] = l;
  }
  return {std::move(x0), color};
}

PairedDataset gen_gray2color_pair(std::size_t n, std::size_t size, std::uint64_t seed) {
  require_pairs(n);
  if (size < 8) throw ValidationError("gray2color needs size >= 8, got " + std::to_string(size));
  CounterRng rng(seed);
  const std::size_t plane = size * size;
  std::vector<Tensor> xs, ys;
  auto hue_color = [](double hue, double out[3]) {
    for (int k = 0; k < 3; ++k) {
      const double v = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (hue + k / 3.0));
      out[k] = 1.6 * v - 0.8;
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    double c1[3], c2[3];
    const double h1 = rng.uniform();
    hue_color(h1, c1);
    hue_color(h1 + rng.uniform(0.25, 0.75), c2);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double freq = rng.uniform(0.3, 0.9);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Tensor color({3, size, size});
    for (std::size_t yy = 0; yy < size; ++yy) {
      for (std::size_t xx = 0; xx < size; ++xx) {
        const double u = std::cos(angle) * static_cast<double>(xx) +
                         std::sin(angle) * static_cast<double>(yy);
        const double m = 0.5 + 0.5 * std::sin(freq * u + phase);
        for (std::size_t k = 0; k < 3; ++k) {
          color[k * plane + yy * size + xx] = m * c1[k] + (1.0 - m) * c2[k];
        }
      }
    }
    ImagePair p = make_gray2color_pair(color);
    xs.push_back(std::move(p.x0));
    ys.push_back(std::move(p.y0));
  }
  DatasetInfo info{"gray2color", seed, {{"size", size}}};
  return PairedDataset(stack(xs), stack(ys), train_count(n), std::move(info));
}

std::string encode_dataset(const PairedDataset& ds) {
  const nlohmann::json header{{"format_version", kFormatVersion},
                              {"mode", mode_name(ds.mode())},
                              {"sample_shape", ds.sample_shape()},
                              {"n", ds.size()},
                              {"n_train", ds.n_train()},
                              {"generator", ds.info().generator},
                              {"seed", ds.info().seed},
                              {"params", ds.info().params}};
  const std::string text = header.dump();
  std::string out(kMagic);
  io::put_u64(out, text.size());
  out += text;
  const std::size_t per = shape_size(ds.sample_shape());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < per; ++k) io::put_f64(out, ds.x0()[i * per + k]);
    for (std::size_t k = 0; k < per; ++k) io::put_f64(out, ds.y0()[i * per + k]);
  }
  return out;
}

PairedDataset decode_dataset(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.bytes(kMagic.size(), "magic") != kMagic) throw ParseError("not a dataset file", 0);
  const std::uint64_t len = r.u64("header length");
  const std::size_t json_at = r.offset();
  const std::string_view text = r.bytes(len, "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed dataset header: ") + e.what(),
                     json_at + (e.byte > 0 ? e.byte - 1 : 0));
  }
  try {
    if (header.at("format_version").get<int>() != kFormatVersion) {
      throw CompatibilityError("unsupported dataset format version " +
                               header.at("format_version").dump());
    }
    const Shape sample = header.at("sample_shape").get<Shape>();
    const auto n = header.at("n").get<std::size_t>();
    const auto n_train = header.at("n_train").get<std::size_t>();
    const std::size_t per = shape_size(sample);
    if (per == 0 || n == 0) throw ParseError("dataset header declares no data", json_at);
    if (r.remaining() != 2 * n * per * 8) {
      throw ParseError("payload size does not match header (" + std::to_string(r.remaining()) +
                           " bytes)",
                       r.offset());
    }
    Shape full{n};
    full.insert(full.end(), sample.begin(), sample.end());
    Tensor x0(full), y0(full);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < per; ++k) x0[i * per + k] = r.f64("payload");
      for (std::size_t k = 0; k < per; ++k) y0[i * per + k] = r.f64("payload");
    }
    DatasetInfo info{header.at("generator").get<std::string>(),
                     header.at("seed").get<std::uint64_t>(), header.at("params")};
    return PairedDataset(std::move(x0), std::move(y0), n_train, std::move(info));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset header is missing fields: ") + e.what(), json_at);
  }
}

void save_dataset(const PairedDataset& ds, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(ds));
}

PairedDataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path));
}

std::uint64_t dataset_hash(const PairedDataset& ds) { return io::fnv1a64(encode_dataset(ds)); }

}  // namespace dmt
