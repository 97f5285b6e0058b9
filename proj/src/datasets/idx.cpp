// SPDX-License-Identifier: Apache-2.0
#include <zlib.h>

#include <memory>

#include "lsx/datasets.hpp"

namespace lsx::data {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

struct GzCloser {
  void operator()(gzFile_s* f) const { gzclose(f); }
};
using GzFile = std::unique_ptr<gzFile_s, GzCloser>;

GzFile open(const std::filesystem::path& path) {
  GzFile f(gzopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

void read_exact(gzFile_s* f, void* dst, std::size_t n, const std::filesystem::path& path) {
  auto* p = static_cast<unsigned char*>(dst);
  while (n > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
    const int got = gzread(f, p, chunk);
    if (got <= 0) throw DataError(path.string() + ": truncated payload");
    p += got;
    n -= static_cast<std::size_t>(got);
  }
}

std::uint32_t read_be32(gzFile_s* f, const std::filesystem::path& path) {
  unsigned char b[4];
  read_exact(f, b, 4, path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

LabeledSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::uint64_t id_base) {
  GzFile fi = open(images);
  std::uint32_t magic = read_be32(fi.get(), images);
  if (magic != kImageMagic) throw DataError(images.string() + ": bad magic " + std::to_string(magic) + " for images");
  const std::size_t n = read_be32(fi.get(), images);
  const std::size_t rows = read_be32(fi.get(), images);
  const std::size_t cols = read_be32(fi.get(), images);

  GzFile fl = open(labels);
  magic = read_be32(fl.get(), labels);
  if (magic != kLabelMagic) throw DataError(labels.string() + ": bad magic " + std::to_string(magic) + " for labels");
  const std::size_t nl = read_be32(fl.get(), labels);
  if (nl != n) {
    throw DataError("count mismatch: " + std::to_string(n) + " images vs " + std::to_string(nl) + " labels");
  }

  std::vector<unsigned char> pix(n * rows * cols);
  read_exact(fi.get(), pix.data(), pix.size(), images);
  std::vector<unsigned char> lab(n);
  read_exact(fl.get(), lab.data(), lab.size(), labels);

  LabeledSet out;
  out.kind = "mnist";
  out.num_classes = 10;
  out.inputs = Tensor(Shape{n, 1, rows, cols});
  for (std::size_t i = 0; i < pix.size(); ++i) out.inputs[i] = pix[i] / 255.0;
  out.labels.assign(lab.begin(), lab.end());
  out.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.ids[i] = id_base + i;
  out.validate();
  return out;
}

}  // namespace lsx::data
