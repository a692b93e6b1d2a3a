#include "ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "efcn/error.hpp"

namespace efcn::cli {

void write_assignment_ppm(const std::filesystem::path& path, const Tensor& image, const LabelMap& assigned,
                          const LabelMap& labels, const Frame& frame) {
  const std::size_t h = assigned.height;
  const std::size_t w = assigned.width;
  if (image.height() != h || image.width() != w || labels.height != h || labels.width != w)
    fail(ErrorKind::Dimension, "visualization inputs differ in size");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << "P6\n" << w << ' ' << h << "\n255\n";
  auto byte = [](double v) { return static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))); };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const ClassSet a = assigned.at(y, x);
      const ClassSet l = labels.at(y, x);
      double rgb[3];
      if (a == frame.omega()) {
        rgb[0] = 1.0, rgb[1] = 0.41, rgb[2] = 0.71;
      } else if (a.size() > 1) {
        rgb[0] = 0.0, rgb[1] = 0.85, rgb[2] = 0.0;
      } else if (l.empty() || !a.is_subset_of(l)) {
        rgb[0] = 1.0, rgb[1] = 0.0, rgb[2] = 0.0;
      } else {
        for (std::size_t c = 0; c < 3; ++c) rgb[c] = image.channels() > c ? image(y, x, c) : image(y, x, 0);
      }
      const char px[3] = {byte(rgb[0]), byte(rgb[1]), byte(rgb[2])};
      out.write(px, 3);
    }
  }
  if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace efcn::cli
