#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mattack/errors.hpp"
#include "mattack/mixed_data.hpp"
#include "mattack/rng.hpp"

using namespace mattack;

namespace {

MixedSchema toy_schema() {
  MixedSchema s;
  s.numerical_names = {"a", "b"};
  s.categorical_specs = {{"color", {"red", "green", "blue"}}};
  s.label_name = "y";
  s.label_vocabulary = {"no", "yes"};
  return s;
}

std::string write_temp(const std::string& contents) {
  static int counter = 0;
  std::string path = "test_tmp_" + std::to_string(counter++) + ".csv";
  std::ofstream out(path);
  out << contents;
  return path;
}

}  // namespace

TEST_CASE("load_csv parses a matching file") {
  auto path = write_temp("a,b,color,y\n1.5,2,red,no\n-1,0.25,blue,yes\n");
  auto data = load_csv(path, toy_schema());
  REQUIRE(data.size() == 2);
  CHECK(data[0].numerics == std::vector<double>{1.5, 2.0});
  CHECK(data[0].categoricals == std::vector<std::size_t>{0});
  CHECK(data[0].label == 0);
  CHECK(data[1].categoricals == std::vector<std::size_t>{2});
  CHECK(data[1].label == 1);
  std::remove(path.c_str());
}

TEST_CASE("load_csv reports out-of-vocabulary cells with the offending label") {
  auto path = write_temp("a,b,color,y\n1,2,purple,no\n");
  try {
    load_csv(path, toy_schema());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("purple") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_csv reports missing columns by name") {
  auto path = write_temp("a,color,y\n1,red,no\n");
  try {
    load_csv(path, toy_schema());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_csv reports unparseable numerics with row and column") {
  auto path = write_temp("a,b,color,y\n1,zzz,red,no\n");
  try {
    load_csv(path, toy_schema());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("CIS-shaped schema round-trips through csv") {
  SyntheticSpec spec;
  spec.d_n = 108;
  spec.category_counts.assign(32, 3);
  spec.n_samples = 40;
  spec.seed = 5;
  auto [data, schema] = generate_synthetic(spec);
  CHECK(schema.num_numeric() == 108);
  CHECK(schema.num_categorical() == 32);
  auto path = write_temp("");
  save_csv(data, schema, path);
  auto reloaded = load_csv(path, schema);
  REQUIRE(reloaded.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(reloaded[i] == data[i]);
  std::remove(path.c_str());
}

TEST_CASE("schema text round-trip and validation") {
  auto schema = toy_schema();
  auto path = write_temp("");
  save_schema(schema, path);
  auto reloaded = load_schema(path);
  CHECK(reloaded.numerical_names == schema.numerical_names);
  CHECK(reloaded.categorical_specs[0].vocabulary == schema.categorical_specs[0].vocabulary);
  CHECK(reloaded.label_vocabulary == schema.label_vocabulary);
  std::remove(path.c_str());

  MixedSchema bad = toy_schema();
  bad.categorical_specs[0].vocabulary = {"only"};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = toy_schema();
  bad.numerical_names.push_back("color");
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("fit_standardization hand cases") {
  MixedSample s1{{1.0}, {0}, 0}, s2{{2.0}, {0}, 0}, s3{{3.0}, {0}, 0};
  auto stats = fit_standardization({s1, s2, s3});
  CHECK(stats.means[0] == doctest::Approx(2.0));
  CHECK(stats.std_devs[0] == doctest::Approx(1.0));

  MixedSample c1{{5.0}, {0}, 0}, c2{{5.0}, {0}, 0};
  stats = fit_standardization({c1, c2});
  CHECK(stats.means[0] == doctest::Approx(5.0));
  CHECK(stats.std_devs[0] == doctest::Approx(1e-8));

  CHECK_THROWS_AS(fit_standardization({}), UsageError);
}

TEST_CASE("standardized training column has mean 0 and std 1") {
  Rng rng(21);
  std::vector<MixedSample> data;
  for (int i = 0; i < 1000; ++i) data.push_back({{3.0 + 2.5 * rng.normal()}, {0}, 0});
  auto stats = fit_standardization(data);

  MixedSchema schema;
  schema.numerical_names = {"x"};
  schema.categorical_specs = {{"c", {"a", "b"}}};
  schema.label_name = "y";
  schema.label_vocabulary = {"n", "p"};

  double mean = 0, var = 0;
  for (const auto& s : data) mean += encode(s, stats, schema)[0];
  mean /= 1000.0;
  for (const auto& s : data) {
    double v = encode(s, stats, schema)[0] - mean;
    var += v * v;
  }
  var /= 999.0;
  CHECK(std::fabs(mean) <= 1e-10);
  CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-10);
}

TEST_CASE("encode layout and decode inverse") {
  MixedSchema schema = toy_schema();
  StandardizationStats stats{{2.0, 0.0}, {1.0, 1.0}};
  MixedSample s{{2.0, 0.0}, {1}, 0};
  auto dense = encode(s, stats, schema);
  CHECK(dense == std::vector<double>{0.0, 0.0, 0.0, 1.0, 0.0});

  auto back = decode(dense, stats, schema);
  CHECK(back.numerics[0] == doctest::Approx(2.0));
  CHECK(back.categoricals == std::vector<std::size_t>{1});
}

TEST_CASE("decode tie-break, de-standardization, relaxed argmax") {
  MixedSchema schema;
  schema.numerical_names = {"x"};
  schema.categorical_specs = {{"c", {"a", "b"}}, {"d", {"p", "q", "r"}}};
  schema.label_name = "y";
  schema.label_vocabulary = {"n", "p"};
  StandardizationStats stats{{3.0}, {2.0}};

  auto s = decode({0.0, 0.5, 0.5, 0.2, 0.7, 0.1}, stats, schema);
  CHECK(s.numerics[0] == doctest::Approx(3.0));
  CHECK(s.categoricals[0] == 0);  // tie goes to the lowest index
  CHECK(s.categoricals[1] == 1);

  CHECK_THROWS_AS(decode({std::nan(""), 1, 0, 1, 0, 0}, stats, schema), DataError);
}

TEST_CASE("encode/decode round-trip on random datasets") {
  SyntheticSpec spec;
  spec.d_n = 4;
  spec.category_counts = {3, 5, 2};
  spec.n_samples = 200;
  spec.seed = 17;
  auto [data, schema] = generate_synthetic(spec);
  auto stats = fit_standardization(data);
  for (const auto& s : data) {
    auto dense = encode(s, stats, schema);
    CHECK(dense.size() == schema.encoded_width());
    // one-hot blocks sum to exactly 1
    std::size_t off = schema.num_numeric();
    for (const auto& c : schema.categorical_specs) {
      double sum = 0;
      for (std::size_t j = 0; j < c.vocabulary.size(); ++j) sum += dense[off + j];
      CHECK(sum == 1.0);
      off += c.vocabulary.size();
    }
    auto back = decode(dense, stats, schema);
    CHECK(back.categoricals == s.categoricals);
    for (std::size_t j = 0; j < s.numerics.size(); ++j)
      CHECK(back.numerics[j] == doctest::Approx(s.numerics[j]).epsilon(1e-12));
  }
}

TEST_CASE("generate_synthetic determinism and planted rule") {
  SyntheticSpec spec;
  spec.d_n = 13;
  spec.category_counts.assign(7, 10);
  spec.n_samples = 5000;
  spec.seed = 3;
  auto [a, schema_a] = generate_synthetic(spec);
  auto [b, schema_b] = generate_synthetic(spec);
  CHECK(a == b);
  CHECK(schema_a.num_numeric() == 13);
  CHECK(schema_a.num_categorical() == 7);

  // The planted rule labels its own data perfectly.
  std::size_t hits = 0;
  for (const auto& s : a)
    if (planted_label(s, spec) == s.label) ++hits;
  CHECK(static_cast<double>(hits) / static_cast<double>(a.size()) > 0.85);

  CHECK_THROWS_AS(generate_synthetic(SyntheticSpec{2, {3}, 5, 0}), UsageError);
}

TEST_CASE("split_dataset is deterministic and order-preserving") {
  SyntheticSpec spec;
  spec.n_samples = 100;
  auto [data, schema] = generate_synthetic(spec);
  auto [train, test] = split_dataset(data, 0.8);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  CHECK(train[0] == data[0]);
  CHECK(test[0] == data[80]);
}
