// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "lsx/attribution.hpp"

namespace lsx::attr {

void write_csv(const std::filesystem::path& path, std::span<const AttributionMap> maps) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  const std::size_t width = maps.empty() ? 0 : maps[0].values.numel();
  os << "sample_id,label,predicted";
  for (std::size_t j = 0; j < width; ++j) os << ",v" << j;
  os << '\n' << std::setprecision(17);
  for (const auto& m : maps) {
    os << m.sample_id << ',' << m.label << ',' << m.predicted;
    for (double v : m.values.data()) os << ',' << v;
    os << '\n';
  }
}

void write_pgm(const std::filesystem::path& path, const AttributionMap& map) {
  const Shape& s = map.values.shape();
  std::size_t h = 1, w = map.values.numel(), c = 1;
  if (s.size() == 3) {
    c = s[0];
    h = s[1];
    w = s[2];
  } else if (s.size() == 2) {
    h = s[0];
    w = s[1];
  }
  std::vector<double> mag(h * w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i) mag[i] += std::abs(map.values[ch * h * w + i]);
  const double top = *std::max_element(mag.begin(), mag.end());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << w << ' ' << h << "\n255\n";
  for (double v : mag) {
    const auto byte = static_cast<unsigned char>(top > 0.0 ? std::lround(255.0 * v / top) : 0);
    os.put(static_cast<char>(byte));
  }
}

}  // namespace lsx::attr
