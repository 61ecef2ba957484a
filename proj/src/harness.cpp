#include "mattack/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "mattack/errors.hpp"

namespace mattack::harness {

std::string method_name(Method m) {
  switch (m) {
    case Method::MAttack: return "mattack";
    case Method::PgdSearch: return "pgd-search";
    case Method::PgdGreedy: return "pgd-greedy";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "mattack") return Method::MAttack;
  if (name == "pgd-search") return Method::PgdSearch;
  if (name == "pgd-greedy") return Method::PgdGreedy;
  throw UsageError("unknown method '" + name + "' (expected mattack|pgd-search|pgd-greedy)");
}

void ExperimentConfig::validate() const {
  if (methods.empty() || eps1_grid.empty() || eps2_grid.empty() || lambda_grid.empty())
    throw UsageError("experiment: method/budget/lambda grids must be non-empty");
  if (n_eval_samples < 1) throw UsageError("experiment: n_eval_samples must be >= 1");
}

Prepared prepare(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  Prepared prep;

  std::vector<MixedSample> dataset;
  if (config.data.synthetic) {
    SyntheticSpec spec = config.data.spec;
    spec.seed = seed;
    auto [data, schema] = generate_synthetic(spec);
    dataset = std::move(data);
    prep.schema = std::move(schema);
  } else {
    prep.schema = load_schema(config.data.schema_path);
    dataset = load_csv(config.data.csv_path, prep.schema);
  }
  auto [train, test] = split_dataset(dataset, config.data.train_fraction);
  prep.train = std::move(train);
  prep.test = std::move(test);
  prep.stats = fit_standardization(prep.train);

  std::vector<std::vector<double>> train_enc, test_enc;
  std::vector<std::size_t> train_labels, test_labels;
  for (const auto& s : prep.train) {
    train_enc.push_back(encode(s, prep.stats, prep.schema));
    train_labels.push_back(s.label);
  }
  for (const auto& s : prep.test) {
    test_enc.push_back(encode(s, prep.stats, prep.schema));
    test_labels.push_back(s.label);
  }

  TrainConfig tc;
  tc.epochs = config.train_epochs;
  tc.seed = Rng::derive(seed, 2);
  auto [model, report] = MlpClassifier::train(train_enc, train_labels,
                                              prep.schema.num_classes(), tc);
  (void)report;
  prep.model = std::move(model);
  prep.test_accuracy = prep.model.accuracy(test_enc, test_labels);

  prep.covariance = fit_covariance(train_enc);
  prep.kde = KdeModel::fit(train_enc, config.kde_cap, Rng::derive(seed, 3));
  prep.kde.calibrate(test_enc);

  for (std::size_t i = 0; i < prep.test.size(); ++i) {
    if (prep.eval_indices.size() >= config.n_eval_samples) break;
    if (prep.model.predict(test_enc[i]) == test_labels[i]) prep.eval_indices.push_back(i);
  }
  if (prep.eval_indices.empty())
    throw UsageError("experiment: the model classifies no test sample correctly");
  return prep;
}

namespace {

AttackResult attack_one(const Prepared& prep, Method method, const MixedSample& sample,
                        double eps1, std::size_t eps2, double lambda,
                        const ExperimentConfig& config, std::uint64_t sample_seed) {
  // always passed so every result reports its distance; the lambda setting
  // alone decides whether the attacks are penalized by it
  const GeneralizedCovariance* maha = &prep.covariance;
  AttackResult result;
  switch (method) {
    case Method::MAttack: {
      AttackConfig ac;
      ac.epsilon1 = eps1;
      ac.epsilon2 = eps2;
      ac.lambda = lambda;
      ac.alpha_ce = config.alpha_ce;
      ac.steps = config.attack_steps;
      ac.seed = sample_seed;
      result = attack(prep.model, sample, prep.schema, prep.stats, ac, maha);
      break;
    }
    case Method::PgdSearch:
    case Method::PgdGreedy: {
      BaselineConfig bc;
      bc.epsilon1 = eps1;
      bc.epsilon2 = eps2;
      bc.lambda = lambda;
      bc.steps = config.attack_steps;
      bc.seed = sample_seed;
      result = method == Method::PgdSearch
                   ? search_attack(prep.model, sample, prep.schema, prep.stats, bc, maha)
                   : greedy_attack(prep.model, sample, prep.schema, prep.stats, bc, maha);
      break;
    }
  }
  result.flagged_ood = prep.kde.is_flagged(result.adv_encoded);
  return result;
}

}  // namespace

std::vector<AttackResult> run_cell(const Prepared& prep, Method method, double eps1,
                                   std::size_t eps2, double lambda,
                                   const ExperimentConfig& config, std::uint64_t seed) {
  const auto& indices = prep.eval_indices;
  std::vector<AttackResult> results(indices.size());

  std::size_t n_threads = config.threads ? config.threads
                                         : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, indices.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= indices.size()) return;
      const MixedSample& sample = prep.test[indices[i]];
      results[i] = attack_one(prep, method, sample, eps1, eps2, lambda, config,
                              Rng::derive(seed, 1000 + indices[i]));
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

CampaignRow summarize_cell(const Prepared& prep, Method method, double eps1, std::size_t eps2,
                           double lambda, const ExperimentConfig& config, std::uint64_t seed) {
  std::vector<AttackResult> results = run_cell(prep, method, eps1, eps2, lambda, config, seed);
  CampaignRow row;
  row.method = method;
  row.eps1 = eps1;
  row.eps2 = eps2;
  row.lambda = lambda;
  row.seed = seed;
  row.n = results.size();
  for (const auto& r : results) {
    bool flagged = r.flagged_ood.value_or(false);
    if (r.success && !flagged) row.success_rate += 1.0;
    if (flagged) row.flag_rate += 1.0;
    row.mean_wall_time_secs += r.wall_time_secs;
    row.mean_loss += r.loss;
    row.mean_m_distance += r.m_distance;
    row.max_l1 = std::max(row.max_l1, r.l1_num_perturbation);
    row.max_l0 = std::max(row.max_l0, r.l0_cat_changes);
  }
  double inv = 1.0 / static_cast<double>(results.size());
  row.success_rate *= inv;
  row.flag_rate *= inv;
  row.mean_wall_time_secs *= inv;
  row.mean_loss *= inv;
  row.mean_m_distance *= inv;
  return row;
}

HistogramTable run_e1_likelihood(const ExperimentConfig& config) {
  config.validate();
  Prepared prep = prepare(config, config.seed);

  double lambda_high = *std::max_element(config.lambda_grid.begin(), config.lambda_grid.end());
  double eps1 = config.eps1_grid.front();
  std::size_t eps2 = config.eps2_grid.front();

  HistogramTable table;
  table.cohort_names = {"clean", "adv_lambda_high", "adv_lambda_zero"};

  std::vector<std::vector<double>> scores(3);
  // score the clean versions of the attacked samples so the cohorts differ
  // only by the perturbation, not by the eval-sample selection
  for (std::size_t i : prep.eval_indices)
    scores[0].push_back(prep.kde.log_likelihood(encode(prep.test[i], prep.stats, prep.schema)));
  for (const auto& r :
       run_cell(prep, Method::MAttack, eps1, eps2, lambda_high, config, config.seed))
    scores[1].push_back(prep.kde.log_likelihood(r.adv_encoded));
  for (const auto& r : run_cell(prep, Method::MAttack, eps1, eps2, 0.0, config, config.seed))
    scores[2].push_back(prep.kde.log_likelihood(r.adv_encoded));

  for (const auto& s : scores)
    if (s.empty()) throw UsageError("e1: empty cohort");

  double lo = scores[0][0], hi = scores[0][0];
  for (const auto& cohort : scores)
    for (double v : cohort) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (hi <= lo) hi = lo + 1.0;
  const std::size_t bins = 30;
  for (std::size_t b = 0; b <= bins; ++b)
    table.bin_edges.push_back(lo + (hi - lo) * static_cast<double>(b) /
                                       static_cast<double>(bins));

  for (const auto& cohort : scores) {
    std::vector<std::size_t> freq(bins, 0);
    for (double v : cohort) {
      std::size_t b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
      freq[std::min(b, bins - 1)] += 1;
    }
    table.frequencies.push_back(std::move(freq));
    table.medians.push_back(percentile(cohort, 0.5));
  }
  return table;
}

CampaignReport run_e2_success(const ExperimentConfig& config) {
  config.validate();
  Prepared prep = prepare(config, config.seed);
  CampaignReport report;
  for (Method m : config.methods)
    for (double eps1 : config.eps1_grid)
      for (std::size_t eps2 : config.eps2_grid)
        for (double lambda : config.lambda_grid)
          report.push_back(summarize_cell(prep, m, eps1, eps2, lambda, config, config.seed));
  return report;
}

std::vector<TradeoffRow> run_e3_tradeoff(const ExperimentConfig& config) {
  config.validate();
  Prepared prep = prepare(config, config.seed);
  double eps1 = config.eps1_grid.front();
  std::size_t eps2 = config.eps2_grid.front();

  std::vector<TradeoffRow> rows;
  for (Method m : config.methods) {
    for (double lambda : config.lambda_grid) {
      CampaignRow cell = summarize_cell(prep, m, eps1, eps2, lambda, config, config.seed);
      TradeoffRow row;
      row.method = m;
      row.lambda = lambda;
      row.seed = config.seed;
      row.mean_loss = cell.mean_loss;
      row.mean_m_distance = cell.mean_m_distance;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_histogram_csv(const HistogramTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "bin_lo,bin_hi";
  for (const auto& name : table.cohort_names) out << "," << name;
  out << "\n";
  for (std::size_t b = 0; b + 1 < table.bin_edges.size(); ++b) {
    out << table.bin_edges[b] << "," << table.bin_edges[b + 1];
    for (const auto& freq : table.frequencies) out << "," << freq[b];
    out << "\n";
  }
}

void write_campaign_csv(const CampaignReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "method,eps1,eps2,lambda,seed,success_rate,mean_wall_time_secs,mean_loss,"
         "mean_m_distance,flag_rate,n\n";
  for (const auto& r : report) {
    out << method_name(r.method) << "," << r.eps1 << "," << r.eps2 << "," << r.lambda << ","
        << r.seed << "," << r.success_rate << "," << r.mean_wall_time_secs << "," << r.mean_loss
        << "," << r.mean_m_distance << "," << r.flag_rate << "," << r.n << "\n";
  }
}

void write_campaign_json(const CampaignReport& report, const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report) {
    rows.push_back({{"method", method_name(r.method)},
                    {"eps1", r.eps1},
                    {"eps2", r.eps2},
                    {"lambda", r.lambda},
                    {"seed", r.seed},
                    {"success_rate", r.success_rate},
                    {"mean_wall_time_secs", r.mean_wall_time_secs},
                    {"mean_loss", r.mean_loss},
                    {"mean_m_distance", r.mean_m_distance},
                    {"flag_rate", r.flag_rate},
                    {"n", r.n}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << rows.dump(2) << "\n";
}

void write_tradeoff_csv(const std::vector<TradeoffRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "method,lambda,seed,mean_loss,mean_m_distance\n";
  for (const auto& r : rows)
    out << method_name(r.method) << "," << r.lambda << "," << r.seed << "," << r.mean_loss
        << "," << r.mean_m_distance << "\n";
}

void write_results_jsonl(const std::vector<AttackResult>& results, const MixedSchema& schema,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& r : results) {
    nlohmann::json cats = nlohmann::json::array();
    for (std::size_t i = 0; i < r.adv_sample.categoricals.size(); ++i)
      cats.push_back(schema.categorical_specs[i].vocabulary[r.adv_sample.categoricals[i]]);
    nlohmann::json line = {{"numerics", r.adv_sample.numerics},
                           {"categoricals", cats},
                           {"loss", r.loss},
                           {"m_distance", r.m_distance},
                           {"l1_num_perturbation", r.l1_num_perturbation},
                           {"l0_cat_changes", r.l0_cat_changes},
                           {"success", r.success},
                           {"wall_time_secs", r.wall_time_secs}};
    if (r.flagged_ood.has_value()) line["flagged_ood"] = *r.flagged_ood;
    out << line.dump() << "\n";
  }
}

}  // namespace mattack::harness
