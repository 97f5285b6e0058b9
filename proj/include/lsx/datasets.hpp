// SPDX-License-Identifier: Apache-2.0
//
// MNIST IDX loading, confounded image variants, synthetic concept data and
// learner/critic splits.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsx/concepts.hpp"
#include "lsx/tensor.hpp"

namespace lsx::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LabeledSet {
  Tensor inputs;  // [N, C, H, W] images or [N, O, A] concept matrices
  std::vector<int> labels;
  std::vector<std::uint64_t> ids;
  std::string kind;
  bool confounded = false;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  LabeledSet subset(std::span<const std::size_t> rows) const;
  // Throws DataError when sizes, label range or ids are inconsistent.
  void validate() const;
};

// Rows of `a` followed by rows of `b`; ids must not collide.
LabeledSet concat(const LabeledSet& a, const LabeledSet& b);

// Reads gzip-compressed or raw IDX files. Sample ids are id_base + row.
LabeledSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                    std::uint64_t id_base = 0);

enum class Mode { train, test };

// 8 px: at a few thousand training images a 4 px swatch is ignored by the CNN.
inline constexpr std::size_t kDecoyPatch = 8;
double decoy_shade(int label);
LabeledSet make_decoy(const LabeledSet& base, Mode mode, std::uint64_t seed);

const std::array<std::array<double, 3>, 10>& color_palette();
LabeledSet make_color(const LabeledSet& base, Mode mode, std::uint64_t seed);

struct ClassRule {
  int class_id = 0;
  std::vector<std::vector<Condition>> objects;
  // (object index, condition) imposed only in train mode.
  std::optional<std::pair<std::size_t, Condition>> confounder;
};

// The three CLEVR-Hans-style class rules over ConceptSchema::clevr().
std::vector<ClassRule> hans3_rules(const ConceptSchema& schema);

struct ConceptHansOptions {
  std::size_t max_distractors = 4;
};

LabeledSet make_concept_hans(const ConceptSchema& schema, const std::vector<ClassRule>& rules,
                             std::size_t n_per_class, Mode mode, std::uint64_t seed,
                             const ConceptHansOptions& opts = {});

// [classes, width] one-hot-per-group binary prototypes.
Tensor cub_prototypes(const ConceptSchema& schema, std::size_t classes, std::uint64_t seed);
// Each sample: (prototype + U(0,1)) >= 0.75, shaped [N, 1, width].
LabeledSet make_cub_noisy(const Tensor& prototypes, std::size_t n_per_class, std::uint64_t seed);

enum class CriticRelation { subset, disjoint, deconfounded_heldout };

struct SplitPolicy {
  std::size_t learner_size = 0;
  std::size_t critic_size = 0;
  CriticRelation relation = CriticRelation::subset;
};

struct Split {
  LabeledSet learner;
  LabeledSet critic;
};

// Class-balanced sample of n rows (the remainder goes to the lowest classes).
std::vector<std::size_t> stratified_sample(std::span<const int> labels, std::size_t classes, std::size_t n,
                                           std::uint64_t seed, std::span<const std::size_t> exclude = {});

// heldout is required for deconfounded_heldout and ignored otherwise.
Split make_split(const LabeledSet& pool, const SplitPolicy& policy, std::uint64_t seed,
                 const LabeledSet* heldout = nullptr);

bool ids_disjoint(const LabeledSet& a, const LabeledSet& b);

// Binary set file in the checkpoint layout plus a `.meta` key=value sidecar.
void save_set(const std::filesystem::path& path, const LabeledSet& set, std::uint64_t seed);
LabeledSet load_set(const std::filesystem::path& path);

}  // namespace lsx::data
