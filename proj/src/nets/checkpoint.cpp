// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstring>
#include <fstream>

#include "lsx/nets.hpp"

namespace lsx::nets {
namespace {

constexpr char kMagic[8] = {'L', 'S', 'X', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError(path.string() + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const Param> params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof kMagic);
  for (const auto& p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(p.value.data().data()),
             static_cast<std::streamsize>(p.value.numel() * sizeof(double)));
  }
  if (!os) throw CheckpointError("write failed for " + path.string());
}

std::vector<Param> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError(path.string() + ": bad checkpoint magic");
  }
  std::vector<Param> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    Param p;
    const auto len = get<std::uint32_t>(is, path);
    if (len > 4096) throw CheckpointError(path.string() + ": implausible name length");
    p.name.resize(len);
    if (!is.read(p.name.data(), len)) throw CheckpointError(path.string() + ": truncated checkpoint");
    const auto rank = get<std::uint32_t>(is, path);
    if (rank > 8) throw CheckpointError(path.string() + ": implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(is, path));
    std::vector<double> data(shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw CheckpointError(path.string() + ": truncated payload for " + p.name);
    }
    p.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace lsx::nets
