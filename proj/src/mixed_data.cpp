#include "mattack/mixed_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mattack/errors.hpp"
#include "mattack/rng.hpp"

namespace mattack {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::size_t MixedSchema::encoded_width() const {
  std::size_t d = numerical_names.size();
  for (const auto& c : categorical_specs) d += c.vocabulary.size();
  return d;
}

std::size_t MixedSchema::block_offset(std::size_t i) const {
  std::size_t off = numerical_names.size();
  for (std::size_t j = 0; j < i; ++j) off += categorical_specs[j].vocabulary.size();
  return off;
}

void MixedSchema::validate() const {
  std::unordered_set<std::string> seen;
  auto check_unique = [&](const std::string& name) {
    if (!seen.insert(name).second)
      throw DataError("schema: duplicate column identifier '" + name + "'");
  };
  for (const auto& n : numerical_names) check_unique(n);
  for (const auto& c : categorical_specs) {
    check_unique(c.name);
    if (c.vocabulary.size() < 2 || c.vocabulary.size() > 50)
      throw DataError("schema: categorical '" + c.name +
                      "' must have between 2 and 50 categories, has " +
                      std::to_string(c.vocabulary.size()));
    std::unordered_set<std::string> vocab(c.vocabulary.begin(), c.vocabulary.end());
    if (vocab.size() != c.vocabulary.size())
      throw DataError("schema: categorical '" + c.name + "' has duplicate categories");
  }
  if (label_name.empty()) throw DataError("schema: missing label declaration");
  check_unique(label_name);
  if (label_vocabulary.size() < 2)
    throw DataError("schema: label vocabulary needs at least 2 classes");
}

MixedSchema parse_schema(const std::string& text) {
  MixedSchema schema;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t colon = t.find(':');
    if (colon == std::string::npos)
      throw DataError("schema line " + std::to_string(lineno) + ": expected 'key: ...'");
    std::string key = trim(t.substr(0, colon));
    std::string rest = trim(t.substr(colon + 1));
    if (key == "numerical") {
      for (auto& name : split_commas(rest)) schema.numerical_names.push_back(name);
    } else if (key == "categorical" || key == "label") {
      std::size_t eq = rest.find('=');
      if (eq == std::string::npos)
        throw DataError("schema line " + std::to_string(lineno) + ": expected 'name = values'");
      std::string name = trim(rest.substr(0, eq));
      auto values = split_commas(rest.substr(eq + 1));
      if (key == "categorical") {
        schema.categorical_specs.push_back({name, values});
      } else {
        if (!schema.label_name.empty())
          throw DataError("schema line " + std::to_string(lineno) + ": duplicate label");
        schema.label_name = name;
        schema.label_vocabulary = values;
      }
    } else {
      throw DataError("schema line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  schema.validate();
  return schema;
}

MixedSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

void save_schema(const MixedSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write schema file: " + path);
  if (!schema.numerical_names.empty()) {
    out << "numerical: ";
    for (std::size_t i = 0; i < schema.numerical_names.size(); ++i)
      out << (i ? ", " : "") << schema.numerical_names[i];
    out << "\n";
  }
  for (const auto& c : schema.categorical_specs) {
    out << "categorical: " << c.name << " = ";
    for (std::size_t i = 0; i < c.vocabulary.size(); ++i)
      out << (i ? ", " : "") << c.vocabulary[i];
    out << "\n";
  }
  out << "label: " << schema.label_name << " = ";
  for (std::size_t i = 0; i < schema.label_vocabulary.size(); ++i)
    out << (i ? ", " : "") << schema.label_vocabulary[i];
  out << "\n";
}

std::vector<MixedSample> load_csv(const std::string& path, const MixedSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open csv file: " + path);

  std::string header;
  if (!std::getline(in, header)) throw DataError("csv is empty: " + path);
  std::vector<std::string> columns = split_commas(header);
  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < columns.size(); ++i) col_index[columns[i]] = i;

  auto require = [&](const std::string& name) -> std::size_t {
    auto it = col_index.find(name);
    if (it == col_index.end())
      throw DataError("csv missing column '" + name + "' required by schema");
    return it->second;
  };
  std::vector<std::size_t> num_cols, cat_cols;
  for (const auto& n : schema.numerical_names) num_cols.push_back(require(n));
  for (const auto& c : schema.categorical_specs) cat_cols.push_back(require(c.name));
  std::size_t label_col = require(schema.label_name);

  std::vector<std::unordered_map<std::string, std::size_t>> cat_lookup;
  for (const auto& c : schema.categorical_specs) {
    std::unordered_map<std::string, std::size_t> m;
    for (std::size_t i = 0; i < c.vocabulary.size(); ++i) m[c.vocabulary[i]] = i;
    cat_lookup.push_back(std::move(m));
  }
  std::unordered_map<std::string, std::size_t> label_lookup;
  for (std::size_t i = 0; i < schema.label_vocabulary.size(); ++i)
    label_lookup[schema.label_vocabulary[i]] = i;

  std::vector<MixedSample> dataset;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() < columns.size())
      throw DataError("csv row " + std::to_string(row) + ": expected " +
                      std::to_string(columns.size()) + " cells, got " +
                      std::to_string(cells.size()));

    MixedSample s;
    for (std::size_t j = 0; j < num_cols.size(); ++j) {
      const std::string& text = cells[num_cols[j]];
      char* end = nullptr;
      double v = std::strtod(text.c_str(), &end);
      if (end == text.c_str() || *end != '\0' || !std::isfinite(v))
        throw DataError("csv row " + std::to_string(row) + ", column '" +
                        schema.numerical_names[j] + "': cannot parse numeric '" + text + "'");
      s.numerics.push_back(v);
    }
    for (std::size_t j = 0; j < cat_cols.size(); ++j) {
      const std::string& text = cells[cat_cols[j]];
      auto it = cat_lookup[j].find(text);
      if (it == cat_lookup[j].end())
        throw DataError("csv row " + std::to_string(row) + ", column '" +
                        schema.categorical_specs[j].name + "': category '" + text +
                        "' not in vocabulary");
      s.categoricals.push_back(it->second);
    }
    auto it = label_lookup.find(cells[label_col]);
    if (it == label_lookup.end())
      throw DataError("csv row " + std::to_string(row) + ": label '" + cells[label_col] +
                      "' not in label vocabulary");
    s.label = it->second;
    dataset.push_back(std::move(s));
  }
  return dataset;
}

void save_csv(const std::vector<MixedSample>& dataset, const MixedSchema& schema,
              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write csv file: " + path);
  bool first = true;
  for (const auto& n : schema.numerical_names) {
    out << (first ? "" : ",") << n;
    first = false;
  }
  for (const auto& c : schema.categorical_specs) {
    out << (first ? "" : ",") << c.name;
    first = false;
  }
  out << (first ? "" : ",") << schema.label_name << "\n";
  for (const auto& s : dataset) {
    first = true;
    for (double v : s.numerics) {
      out << (first ? "" : ",") << format_double(v);
      first = false;
    }
    for (std::size_t i = 0; i < s.categoricals.size(); ++i) {
      out << (first ? "" : ",") << schema.categorical_specs[i].vocabulary[s.categoricals[i]];
      first = false;
    }
    out << (first ? "" : ",") << schema.label_vocabulary[s.label] << "\n";
  }
}

StandardizationStats fit_standardization(const std::vector<MixedSample>& train) {
  if (train.empty()) throw UsageError("fit_standardization: empty training set");
  const std::size_t d = train[0].numerics.size();
  const double n = static_cast<double>(train.size());
  StandardizationStats stats;
  stats.means.assign(d, 0.0);
  stats.std_devs.assign(d, 0.0);
  for (const auto& s : train)
    for (std::size_t j = 0; j < d; ++j) stats.means[j] += s.numerics[j];
  for (double& m : stats.means) m /= n;
  if (train.size() > 1) {
    for (const auto& s : train)
      for (std::size_t j = 0; j < d; ++j) {
        double diff = s.numerics[j] - stats.means[j];
        stats.std_devs[j] += diff * diff;
      }
    for (double& v : stats.std_devs) v = std::sqrt(v / (n - 1.0));
  }
  for (double& v : stats.std_devs) v = std::max(v, 1e-8);
  return stats;
}

EncodedSample encode(const MixedSample& sample, const StandardizationStats& stats,
                     const MixedSchema& schema) {
  EncodedSample dense(schema.encoded_width(), 0.0);
  for (std::size_t j = 0; j < schema.num_numeric(); ++j)
    dense[j] = (sample.numerics[j] - stats.means[j]) / stats.std_devs[j];
  std::size_t off = schema.num_numeric();
  for (std::size_t i = 0; i < schema.num_categorical(); ++i) {
    dense[off + sample.categoricals[i]] = 1.0;
    off += schema.categorical_specs[i].vocabulary.size();
  }
  return dense;
}

MixedSample decode(const EncodedSample& dense, const StandardizationStats& stats,
                   const MixedSchema& schema) {
  for (double v : dense)
    if (!std::isfinite(v)) throw DataError("decode: non-finite entry in encoded sample");
  MixedSample s;
  for (std::size_t j = 0; j < schema.num_numeric(); ++j)
    s.numerics.push_back(dense[j] * stats.std_devs[j] + stats.means[j]);
  std::size_t off = schema.num_numeric();
  for (std::size_t i = 0; i < schema.num_categorical(); ++i) {
    std::size_t k = schema.categorical_specs[i].vocabulary.size();
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (dense[off + c] > dense[off + best]) best = c;
    s.categoricals.push_back(best);
    off += k;
  }
  return s;
}

namespace {

// Coefficients of the planted label rule and the category-conditioned numeric
// means. Fixed patterns so datasets only depend on the spec (incl. seed).
double numeric_weight(std::size_t j) { return (j % 2 == 0 ? 0.7 : -0.7); }
double category_weight(std::size_t i) { return (i % 2 == 0 ? 1.2 : -1.2); }

double category_level(std::size_t idx, std::size_t k) {
  double half = std::max<double>(1.0, (static_cast<double>(k) - 1.0) / 2.0);
  return (static_cast<double>(idx) - (static_cast<double>(k) - 1.0) / 2.0) / half;
}

constexpr double kLabelNoise = 0.08;

double planted_score(const MixedSample& s, const SyntheticSpec& spec) {
  double score = 0.0;
  for (std::size_t j = 0; j < s.numerics.size(); ++j)
    score += numeric_weight(j) * s.numerics[j];
  for (std::size_t i = 0; i < s.categoricals.size(); ++i)
    score += category_weight(i) *
             category_level(s.categoricals[i], spec.category_counts[i]);
  return score;
}

}  // namespace

std::size_t planted_label(const MixedSample& sample, const SyntheticSpec& spec) {
  return planted_score(sample, spec) > 0.0 ? 1 : 0;
}

std::pair<std::vector<MixedSample>, MixedSchema> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_samples < 10) throw UsageError("generate_synthetic: n_samples must be >= 10");
  if (spec.category_counts.empty()) throw UsageError("generate_synthetic: need >= 1 categorical");
  for (std::size_t k : spec.category_counts)
    if (k < 2 || k > 50)
      throw UsageError("generate_synthetic: category counts must be in [2, 50]");

  MixedSchema schema;
  for (std::size_t j = 0; j < spec.d_n; ++j)
    schema.numerical_names.push_back("num" + std::to_string(j));
  for (std::size_t i = 0; i < spec.category_counts.size(); ++i) {
    CategoricalSpec c;
    c.name = "cat" + std::to_string(i);
    for (std::size_t v = 0; v < spec.category_counts[i]; ++v)
      c.vocabulary.push_back("c" + std::to_string(v));
    schema.categorical_specs.push_back(std::move(c));
  }
  schema.label_name = "label";
  schema.label_vocabulary = {"neg", "pos"};
  schema.validate();

  const std::size_t d_c = spec.category_counts.size();
  Rng rng(spec.seed);
  std::vector<MixedSample> dataset;
  dataset.reserve(spec.n_samples);
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    MixedSample s;
    for (std::size_t i = 0; i < d_c; ++i)
      s.categoricals.push_back(rng.below(spec.category_counts[i]));
    for (std::size_t j = 0; j < spec.d_n; ++j) {
      // Numeric mean tied to the category of feature j mod d_c, so numeric
      // and categorical columns are correlated.
      std::size_t link = j % d_c;
      double mu = 0.9 * category_level(s.categoricals[link], spec.category_counts[link]);
      s.numerics.push_back(mu + rng.normal());
    }
    s.label = planted_label(s, spec);
    // flip a fixed fraction of labels: the irreducible noise caps the optimal
    // posterior away from 0/1, so trained models keep non-vanishing loss
    // gradients everywhere instead of saturating on easy samples
    if (rng.uniform() < kLabelNoise) s.label = 1 - s.label;
    dataset.push_back(std::move(s));
  }
  return {std::move(dataset), std::move(schema)};
}

std::pair<std::vector<MixedSample>, std::vector<MixedSample>> split_dataset(
    const std::vector<MixedSample>& dataset, double train_fraction) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw UsageError("split fraction must be in (0, 1)");
  std::size_t n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(dataset.size())));
  n_train = std::min(std::max<std::size_t>(n_train, 1), dataset.size() - 1);
  std::vector<MixedSample> train(dataset.begin(), dataset.begin() + n_train);
  std::vector<MixedSample> test(dataset.begin() + n_train, dataset.end());
  return {std::move(train), std::move(test)};
}

}  // namespace mattack
