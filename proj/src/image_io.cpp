#include "dmt/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "dmt/binary_io.hpp"
#include "dmt/errors.hpp"

namespace dmt {

void write_pnm(const Tensor& image, const std::filesystem::path& path) {
  std::size_t c = 1, h = 0, w = 0;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() == 3 && (image.dim(0) == 1 || image.dim(0) == 3)) {
    c = image.dim(0);
    h = image.dim(1);
    w = image.dim(2);
  } else {
    throw DimensionError("PNM export needs [h,w], [1,h,w] or [3,h,w], got " +
                         shape_to_string(image.shape()));
  }
  std::string out = (c == 1 ? "P5\n" : "P6\n") + std::to_string(w) + " " + std::to_string(h) +
                    "\n255\n";
  const std::size_t plane = h * w;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t k = 0; k < c; ++k) {
      const double v = std::clamp((image[k * plane + p] + 1.0) * 127.5, 0.0, 255.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
    }
  }
  io::write_file(path, out);
}

Tensor read_pnm(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::size_t {
    skip_space();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
    }
    if (pos == start) throw ParseError("expected a number in PNM header", start);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("not a binary PGM/PPM file", 0);
  }
  const std::size_t c = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const std::size_t w = number();
  const std::size_t h = number();
  const std::size_t maxval = number();
  if (maxval != 255) throw ParseError("only maxval 255 is supported", pos);
  ++pos;  // single whitespace before the raster
  const std::size_t plane = h * w;
  if (bytes.size() < pos + plane * c) throw ParseError("truncated PNM raster", bytes.size());
  Tensor out({c, h, w});
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t k = 0; k < c; ++k) {
      const auto v = static_cast<unsigned char>(bytes[pos + p * c + k]);
      out[k * plane + p] = v / 127.5 - 1.0;
    }
  }
  return out;
}

}  // namespace dmt
