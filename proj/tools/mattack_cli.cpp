#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mattack/baselines.hpp"
#include "mattack/errors.hpp"
#include "mattack/harness.hpp"
#include "mattack/m_attack.hpp"
#include "mattack/mahalanobis.hpp"
#include "mattack/mixed_data.hpp"
#include "mattack/mlp.hpp"
#include "mattack/ood.hpp"

namespace {

using namespace mattack;
namespace fs = std::filesystem;

struct DataArgs {
  std::string data_path;
  std::string schema_path;
  double split = 0.8;
  std::uint64_t seed = 0;
};

void add_data_flags(CLI::App* cmd, DataArgs& args) {
  cmd->add_option("--data", args.data_path, "CSV data file")->required();
  cmd->add_option("--schema", args.schema_path, "schema file")->required();
  cmd->add_option("--split", args.split, "train fraction (default 0.8)");
  cmd->add_option("--seed", args.seed, "random seed");
}

struct LoadedData {
  MixedSchema schema;
  std::vector<MixedSample> train;
  std::vector<MixedSample> test;
  StandardizationStats stats;
  std::vector<std::vector<double>> train_enc;
  std::vector<std::size_t> train_labels;
  std::vector<std::vector<double>> test_enc;
  std::vector<std::size_t> test_labels;
};

LoadedData load_and_split(const DataArgs& args) {
  LoadedData d;
  d.schema = load_schema(args.schema_path);
  auto dataset = load_csv(args.data_path, d.schema);
  std::cout << "loaded " << dataset.size() << " rows from " << args.data_path << "\n";
  auto [train, test] = split_dataset(dataset, args.split);
  d.train = std::move(train);
  d.test = std::move(test);
  d.stats = fit_standardization(d.train);
  for (const auto& s : d.train) {
    d.train_enc.push_back(encode(s, d.stats, d.schema));
    d.train_labels.push_back(s.label);
  }
  for (const auto& s : d.test) {
    d.test_enc.push_back(encode(s, d.stats, d.schema));
    d.test_labels.push_back(s.label);
  }
  return d;
}

std::vector<std::size_t> parse_counts(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
  return out;
}

// Config files mirror the CLI flags as "key = value" lines.
void apply_config_file(const std::string& path, harness::ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  auto parse_list = [](const std::string& v) {
    std::vector<std::string> items;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t b = item.find_first_not_of(" \t");
      std::size_t e = item.find_last_not_of(" \t");
      if (b != std::string::npos) items.push_back(item.substr(b, e - b + 1));
    }
    return items;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      std::size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    if (key == "data") {
      cfg.data.synthetic = false;
      cfg.data.csv_path = value;
    } else if (key == "schema") {
      cfg.data.schema_path = value;
    } else if (key == "split") {
      cfg.data.train_fraction = std::stod(value);
    } else if (key == "synthetic-dn") {
      cfg.data.spec.d_n = std::stoul(value);
    } else if (key == "synthetic-cats") {
      cfg.data.spec.category_counts = parse_counts(value);
    } else if (key == "synthetic-n") {
      cfg.data.spec.n_samples = std::stoul(value);
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& m : parse_list(value)) cfg.methods.push_back(harness::parse_method(m));
    } else if (key == "eps1") {
      cfg.eps1_grid.clear();
      for (const auto& v : parse_list(value)) cfg.eps1_grid.push_back(std::stod(v));
    } else if (key == "eps2") {
      cfg.eps2_grid.clear();
      for (const auto& v : parse_list(value)) cfg.eps2_grid.push_back(std::stoul(v));
    } else if (key == "lambda") {
      cfg.lambda_grid.clear();
      for (const auto& v : parse_list(value)) cfg.lambda_grid.push_back(std::stod(v));
    } else if (key == "n-eval") {
      cfg.n_eval_samples = std::stoul(value);
    } else if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "steps") {
      cfg.attack_steps = std::stoul(value);
    } else if (key == "epochs") {
      cfg.train_epochs = std::stoul(value);
    } else if (key == "threads") {
      cfg.threads = std::stoul(value);
    } else if (key == "outdir") {
      cfg.output_dir = value;
    } else {
      throw UsageError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
}

int run(int argc, char** argv) {
  CLI::App app{"sparse in-distribution adversarial examples for mixed-type tabular data"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  SyntheticSpec spec;
  std::string gen_cats = "4,4,4";
  std::string gen_out = "data.csv", gen_schema_out = "schema.txt";
  gen->add_option("--dn", spec.d_n, "numerical feature count");
  gen->add_option("--cats", gen_cats, "comma list of category counts");
  gen->add_option("--n", spec.n_samples, "sample count");
  gen->add_option("--seed", spec.seed, "random seed");
  gen->add_option("--out", gen_out, "output CSV path");
  gen->add_option("--schema-out", gen_schema_out, "output schema path");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the target MLP");
  DataArgs train_data;
  add_data_flags(train_cmd, train_data);
  std::string model_out = "model.bin";
  std::size_t epochs = 40;
  train_cmd->add_option("--model-out", model_out, "output model path");
  train_cmd->add_option("--epochs", epochs, "training epochs");

  // fit-cov
  auto* cov_cmd = app.add_subcommand("fit-cov", "fit the generalized covariance");
  DataArgs cov_data;
  add_data_flags(cov_cmd, cov_data);
  std::string cov_out = "cov.bin";
  cov_cmd->add_option("--out", cov_out, "output covariance path");

  // fit-ood
  auto* ood_cmd = app.add_subcommand("fit-ood", "fit and calibrate the KDE detector");
  DataArgs ood_data;
  add_data_flags(ood_cmd, ood_data);
  std::string ood_out = "ood.bin";
  std::size_t kde_cap = 2000;
  ood_cmd->add_option("--out", ood_out, "output detector path");
  ood_cmd->add_option("--cap", kde_cap, "reference subsample cap");

  // attack
  auto* atk_cmd = app.add_subcommand("attack", "attack test samples");
  DataArgs atk_data;
  add_data_flags(atk_cmd, atk_data);
  std::string method = "mattack", model_in, cov_in, ood_in, results_out = "results.jsonl";
  AttackConfig acfg;
  std::size_t atk_n = 100;
  atk_cmd->add_option("--method", method, "mattack|pgd-search|pgd-greedy");
  atk_cmd->add_option("--model", model_in, "trained model path")->required();
  atk_cmd->add_option("--cov", cov_in, "covariance path (enables the distance penalty)");
  atk_cmd->add_option("--ood", ood_in, "detector path (fills the OOD flag)");
  atk_cmd->add_option("--eps1", acfg.epsilon1, "l1 budget on standardized numerics");
  atk_cmd->add_option("--eps2", acfg.epsilon2, "l0 budget on categoricals");
  atk_cmd->add_option("--lambda", acfg.lambda, "distance penalty weight");
  atk_cmd->add_option("--alpha", acfg.alpha_ce, "CE-surrogate weight");
  atk_cmd->add_option("--steps", acfg.steps, "gradient steps");
  atk_cmd->add_option("--n", atk_n, "number of test samples to attack");
  atk_cmd->add_option("--out", results_out, "results JSONL path");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "run a benchmark experiment");
  std::string which, config_path, outdir = ".";
  harness::ExperimentConfig ecfg;
  std::string exp_data, exp_schema, exp_cats = "4,4,4,4,4";
  std::size_t exp_dn = 6, exp_n = 5000;
  exp_cmd->add_option("name", which, "e1|e2|e3")->required();
  exp_cmd->add_option("--config", config_path, "config file mirroring the flags");
  exp_cmd->add_option("--data", exp_data, "CSV data file (default: synthetic)");
  exp_cmd->add_option("--schema", exp_schema, "schema file");
  exp_cmd->add_option("--dn", exp_dn, "synthetic numerical feature count");
  exp_cmd->add_option("--cats", exp_cats, "synthetic category counts");
  exp_cmd->add_option("--n-data", exp_n, "synthetic sample count");
  exp_cmd->add_option("--n-eval", ecfg.n_eval_samples, "evaluation samples per cell");
  exp_cmd->add_option("--seed", ecfg.seed, "seed");
  exp_cmd->add_option("--steps", ecfg.attack_steps, "attack gradient steps");
  exp_cmd->add_option("--epochs", ecfg.train_epochs, "training epochs");
  exp_cmd->add_option("--threads", ecfg.threads, "worker threads (0 = auto)");
  exp_cmd->add_option("--outdir", outdir, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    spec.category_counts = parse_counts(gen_cats);
    auto [dataset, schema] = generate_synthetic(spec);
    save_csv(dataset, schema, gen_out);
    save_schema(schema, gen_schema_out);
    std::cout << "wrote " << dataset.size() << " rows to " << gen_out << " and schema to "
              << gen_schema_out << "\n";
  } else if (train_cmd->parsed()) {
    LoadedData d = load_and_split(train_data);
    TrainConfig tc;
    tc.epochs = epochs;
    tc.seed = Rng::derive(train_data.seed, 2);
    auto [model, report] = MlpClassifier::train(d.train_enc, d.train_labels,
                                                d.schema.num_classes(), tc);
    model.save(model_out);
    std::cout << "train accuracy " << report.train_accuracy << ", test accuracy "
              << model.accuracy(d.test_enc, d.test_labels) << ", model saved to " << model_out
              << "\n";
  } else if (cov_cmd->parsed()) {
    LoadedData d = load_and_split(cov_data);
    GeneralizedCovariance cov = fit_covariance(d.train_enc);
    cov.save(cov_out);
    std::cout << "covariance fitted (D=" << cov.sigma.rows() << ", retained rank "
              << cov.retained_rank << "), saved to " << cov_out << "\n";
  } else if (ood_cmd->parsed()) {
    LoadedData d = load_and_split(ood_data);
    KdeModel kde = KdeModel::fit(d.train_enc, kde_cap, Rng::derive(ood_data.seed, 3));
    kde.calibrate(d.test_enc);
    kde.save(ood_out);
    std::cout << "detector calibrated (threshold " << kde.threshold() << ", "
              << kde.num_references() << " references), saved to " << ood_out << "\n";
  } else if (atk_cmd->parsed()) {
    LoadedData d = load_and_split(atk_data);
    MlpClassifier model = MlpClassifier::load(model_in);
    GeneralizedCovariance cov;
    bool have_cov = !cov_in.empty();
    if (have_cov) cov = GeneralizedCovariance::load(cov_in);
    KdeModel kde;
    bool have_ood = !ood_in.empty();
    if (have_ood) kde = KdeModel::load(ood_in);

    harness::Method m = harness::parse_method(method);
    std::vector<AttackResult> results;
    std::size_t attacked = 0, flips = 0;
    for (std::size_t i = 0; i < d.test.size() && attacked < atk_n; ++i) {
      if (model.predict(d.test_enc[i]) != d.test_labels[i]) continue;
      ++attacked;
      const GeneralizedCovariance* maha = have_cov && acfg.lambda > 0.0 ? &cov : nullptr;
      AttackResult r;
      if (m == harness::Method::MAttack) {
        AttackConfig c = acfg;
        c.seed = Rng::derive(atk_data.seed, 1000 + i);
        r = attack(model, d.test[i], d.schema, d.stats, c, maha);
      } else {
        BaselineConfig bc;
        bc.epsilon1 = acfg.epsilon1;
        bc.epsilon2 = acfg.epsilon2;
        bc.lambda = acfg.lambda;
        bc.steps = acfg.steps;
        bc.seed = Rng::derive(atk_data.seed, 1000 + i);
        r = m == harness::Method::PgdSearch
                ? search_attack(model, d.test[i], d.schema, d.stats, bc, maha)
                : greedy_attack(model, d.test[i], d.schema, d.stats, bc, maha);
      }
      if (have_ood) r.flagged_ood = kde.is_flagged(r.adv_encoded);
      if (r.success) ++flips;
      results.push_back(std::move(r));
    }
    harness::write_results_jsonl(results, d.schema, results_out);
    std::cout << "attacked " << attacked << " samples, " << flips
              << " prediction flips, results written to " << results_out << "\n";
  } else if (exp_cmd->parsed()) {
    if (!exp_data.empty()) {
      ecfg.data.synthetic = false;
      ecfg.data.csv_path = exp_data;
      ecfg.data.schema_path = exp_schema;
    } else {
      ecfg.data.spec.d_n = exp_dn;
      ecfg.data.spec.category_counts = parse_counts(exp_cats);
      ecfg.data.spec.n_samples = exp_n;
    }
    ecfg.output_dir = outdir;
    if (!config_path.empty()) apply_config_file(config_path, ecfg);
    fs::create_directories(ecfg.output_dir);

    if (which == "e1") {
      harness::HistogramTable table = harness::run_e1_likelihood(ecfg);
      std::string path = ecfg.output_dir + "/histogram.csv";
      harness::write_histogram_csv(table, path);
      std::cout << "medians:";
      for (std::size_t i = 0; i < table.cohort_names.size(); ++i)
        std::cout << " " << table.cohort_names[i] << "=" << table.medians[i];
      std::cout << "\nwrote " << path << "\n";
    } else if (which == "e2") {
      harness::CampaignReport report = harness::run_e2_success(ecfg);
      harness::write_campaign_csv(report, ecfg.output_dir + "/report.csv");
      harness::write_campaign_json(report, ecfg.output_dir + "/report.json");
      std::cout << "wrote " << ecfg.output_dir << "/report.{csv,json} (" << report.size()
                << " cells)\n";
    } else if (which == "e3") {
      auto rows = harness::run_e3_tradeoff(ecfg);
      harness::write_tradeoff_csv(rows, ecfg.output_dir + "/tradeoff.csv");
      std::cout << "wrote " << ecfg.output_dir << "/tradeoff.csv (" << rows.size()
                << " rows)\n";
    } else {
      throw UsageError("unknown experiment '" + which + "' (expected e1|e2|e3)");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return UsageError::exit_code;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return DataError::exit_code;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return NumericError::exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
