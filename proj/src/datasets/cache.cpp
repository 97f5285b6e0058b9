// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <map>

#include "lsx/datasets.hpp"
#include "lsx/nets.hpp"

namespace lsx::data {
namespace {

std::filesystem::path meta_path(const std::filesystem::path& path) {
  std::filesystem::path m = path;
  m += ".meta";
  return m;
}

}  // namespace

void save_set(const std::filesystem::path& path, const LabeledSet& set, std::uint64_t seed) {
  set.validate();
  const std::size_t n = set.size();
  std::vector<nets::Param> blobs;
  blobs.push_back({"inputs", set.inputs});
  Tensor labels(Shape{n}), ids(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = set.labels[i];
    // ids stay below 2^53, so doubles hold them exactly
    ids[i] = static_cast<double>(set.ids[i]);
  }
  blobs.push_back({"labels", std::move(labels)});
  blobs.push_back({"ids", std::move(ids)});
  nets::save_checkpoint(path, blobs);

  std::ofstream meta(meta_path(path));
  meta << "kind=" << set.kind << "\nseed=" << seed << "\nN=" << n << "\nK=" << set.num_classes
       << "\nconfounded=" << (set.confounded ? 1 : 0) << "\n";
  if (!meta) throw DataError("cannot write " + meta_path(path).string());
}

LabeledSet load_set(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("no dataset file " + path.string());
  std::ifstream meta(meta_path(path));
  if (!meta) throw DataError("missing metadata sidecar " + meta_path(path).string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"kind", "N", "K", "confounded"})
    if (!kv.count(key)) throw DataError(meta_path(path).string() + ": missing key " + key);

  auto blobs = nets::load_checkpoint(path);
  if (blobs.size() != 3 || blobs[0].name != "inputs" || blobs[1].name != "labels" || blobs[2].name != "ids") {
    throw DataError(path.string() + ": not a dataset file");
  }
  LabeledSet out;
  out.kind = kv["kind"];
  out.num_classes = std::stoul(kv["K"]);
  out.confounded = kv["confounded"] == "1";
  out.inputs = std::move(blobs[0].value);
  for (double v : blobs[1].value.data()) out.labels.push_back(static_cast<int>(v));
  for (double v : blobs[2].value.data()) out.ids.push_back(static_cast<std::uint64_t>(v));
  if (out.size() != std::stoul(kv["N"])) throw DataError(path.string() + ": sample count disagrees with metadata");
  out.validate();
  return out;
}

}  // namespace lsx::data
