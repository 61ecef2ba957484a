#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mattack {

struct CategoricalSpec {
  std::string name;
  std::vector<std::string> vocabulary;  // 2..50 entries
};

// Column layout of a mixed-type dataset. Encoded width D = d_n + sum k_i.
struct MixedSchema {
  std::vector<std::string> numerical_names;
  std::vector<CategoricalSpec> categorical_specs;
  std::string label_name;
  std::vector<std::string> label_vocabulary;

  std::size_t num_numeric() const { return numerical_names.size(); }
  std::size_t num_categorical() const { return categorical_specs.size(); }
  std::size_t num_classes() const { return label_vocabulary.size(); }
  std::size_t encoded_width() const;
  // Offset of categorical feature i's one-hot block within the dense vector.
  std::size_t block_offset(std::size_t i) const;

  void validate() const;  // throws DataError on invariant violations
};

struct MixedSample {
  std::vector<double> numerics;       // raw units, length d_n
  std::vector<std::size_t> categoricals;  // vocabulary indices, length d_c
  std::size_t label = 0;

  bool operator==(const MixedSample&) const = default;
};

struct StandardizationStats {
  std::vector<double> means;
  std::vector<double> std_devs;  // floored at 1e-8
};

// Dense encoded row: standardized numerics then one-hot blocks in schema order.
using EncodedSample = std::vector<double>;

// Schema text file: "numerical:", "categorical: name = a, b, c", "label: ...".
MixedSchema load_schema(const std::string& path);
MixedSchema parse_schema(const std::string& text);
void save_schema(const MixedSchema& schema, const std::string& path);

std::vector<MixedSample> load_csv(const std::string& path, const MixedSchema& schema);
void save_csv(const std::vector<MixedSample>& dataset, const MixedSchema& schema,
              const std::string& path);

StandardizationStats fit_standardization(const std::vector<MixedSample>& train);

EncodedSample encode(const MixedSample& sample, const StandardizationStats& stats,
                     const MixedSchema& schema);

// Inverse of encode for hard samples; relaxed blocks decode by argmax
// (lowest index wins ties). The label is not represented and defaults to 0.
MixedSample decode(const EncodedSample& dense, const StandardizationStats& stats,
                   const MixedSchema& schema);

struct SyntheticSpec {
  std::size_t d_n = 6;
  std::vector<std::size_t> category_counts = {4, 4, 4};
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
};

// Deterministic generator with a planted label rule and numeric means
// conditioned on category choices.
std::pair<std::vector<MixedSample>, MixedSchema> generate_synthetic(const SyntheticSpec& spec);

// Label a sample with the generator's planted rule (oracle for tests).
std::size_t planted_label(const MixedSample& sample, const SyntheticSpec& spec);

// Deterministic order-preserving split: first floor(fraction*N) rows train.
std::pair<std::vector<MixedSample>, std::vector<MixedSample>> split_dataset(
    const std::vector<MixedSample>& dataset, double train_fraction);

}  // namespace mattack
