#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mattack/baselines.hpp"
#include "mattack/m_attack.hpp"
#include "mattack/mahalanobis.hpp"
#include "mattack/mixed_data.hpp"
#include "mattack/mlp.hpp"
#include "mattack/ood.hpp"

namespace mattack::harness {

enum class Method { MAttack, PgdSearch, PgdGreedy };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct DataSource {
  bool synthetic = true;
  SyntheticSpec spec;        // used when synthetic
  std::string csv_path;      // used otherwise
  std::string schema_path;
  double train_fraction = 0.8;
};

struct ExperimentConfig {
  DataSource data;
  std::vector<Method> methods = {Method::MAttack, Method::PgdSearch, Method::PgdGreedy};
  std::vector<double> eps1_grid = {0.3, 0.6};
  std::vector<std::size_t> eps2_grid = {2, 3, 4};
  std::vector<double> lambda_grid = {0.0, 6.0};
  std::size_t n_eval_samples = 100;
  std::uint64_t seed = 0;
  // applied to every method; the numeric-only baselines converge in far fewer
  // steps, while the joint attack needs the longer horizon to move its
  // categorical distributions from their near-one-hot initialization
  std::size_t attack_steps = 800;
  double alpha_ce = 1.0;
  std::size_t train_epochs = 40;
  std::size_t kde_cap = 2000;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::string output_dir = ".";

  void validate() const;
};

// Everything fitted once per seed and shared read-only by the attack workers.
struct Prepared {
  MixedSchema schema;
  StandardizationStats stats;
  std::vector<MixedSample> train;
  std::vector<MixedSample> test;
  MlpClassifier model;
  GeneralizedCovariance covariance;
  KdeModel kde;
  double test_accuracy = 0.0;
  // Test samples the clean model classifies correctly, capped at
  // n_eval_samples; order follows the test split.
  std::vector<std::size_t> eval_indices;
};

Prepared prepare(const ExperimentConfig& config, std::uint64_t seed);

struct CampaignRow {
  Method method = Method::MAttack;
  double eps1 = 0;
  std::size_t eps2 = 0;
  double lambda = 0;
  std::uint64_t seed = 0;
  double success_rate = 0;
  double mean_wall_time_secs = 0;
  double mean_loss = 0;
  double mean_m_distance = 0;
  double flag_rate = 0;
  std::size_t n = 0;
  double max_l1 = 0;       // feasibility bookkeeping
  std::size_t max_l0 = 0;
};

using CampaignReport = std::vector<CampaignRow>;

// Attack every eval sample with one method/budget setting; results keyed by
// sample order so the worker pool cannot change the report.
std::vector<AttackResult> run_cell(const Prepared& prep, Method method, double eps1,
                                   std::size_t eps2, double lambda,
                                   const ExperimentConfig& config, std::uint64_t seed);

CampaignRow summarize_cell(const Prepared& prep, Method method, double eps1, std::size_t eps2,
                           double lambda, const ExperimentConfig& config, std::uint64_t seed);

struct HistogramTable {
  std::vector<double> bin_edges;                    // 31 edges, 30 bins
  std::vector<std::string> cohort_names;
  std::vector<std::vector<std::size_t>> frequencies;  // per cohort
  std::vector<double> medians;                        // per cohort
};

// E1: clean test vs lambda = max(grid) vs lambda = 0 adversarial likelihoods.
HistogramTable run_e1_likelihood(const ExperimentConfig& config);

// E2: success-rate / wall-time campaign over the full grid.
CampaignReport run_e2_success(const ExperimentConfig& config);

struct TradeoffRow {
  Method method = Method::MAttack;
  double lambda = 0;
  std::uint64_t seed = 0;
  double mean_loss = 0;
  double mean_m_distance = 0;
};

// E3: loss-vs-distance sweep over the lambda grid at the first budget in the
// grids.
std::vector<TradeoffRow> run_e3_tradeoff(const ExperimentConfig& config);

void write_histogram_csv(const HistogramTable& table, const std::string& path);
void write_campaign_csv(const CampaignReport& report, const std::string& path);
void write_campaign_json(const CampaignReport& report, const std::string& path);
void write_tradeoff_csv(const std::vector<TradeoffRow>& rows, const std::string& path);
void write_results_jsonl(const std::vector<AttackResult>& results, const MixedSchema& schema,
                         const std::string& path);

}  // namespace mattack::harness
