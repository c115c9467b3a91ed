#pragma once

#include "cldyn/trainer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cldyn {

enum class ExperimentKind {
  Table1,
  Table2BN,
  TableAChiMinus,
  TableAQuadratic,
  TableABNVariants,
  Fig1PIConvergence,
  Fig5Weights,
  OneLayerSuite,
  TwoLayerSuite,
};

std::string kind_name(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& s);

// "none" disables BN; otherwise mean / var / both / neither name which statistics are
// backpropagated.
std::optional<BNVariant> parse_bn(const std::string& s, double eps);

struct TrainingDefaults {
  Index G = 40;
  Index K = 10;
  Index d_tokens = 20;
  Index d = 20;
  double lr = 2e-3;
  double momentum = 0.9;
  double weight_decay = 5e-3;
  long steps = 5000;
  Index batch = 128;
  double tau = 0.5;
  double eps = 0.0;
  double w_init_scale = 0.1;
  Index d_out = 0;  // 0 -> K*M
  double bn_eps = 1e-5;
};

struct PIConvergenceSettings {
  Index dim = 4;
  Index atoms = 4;
  double q = 0.1;
  std::vector<double> perturbations{0.0, 0.02, 0.05};
  Index starts = 4;
  double start_angle_deg = 2.0;
  double tol = 1e-10;
  long max_iter = 200;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Table1;
  std::string name;

  std::vector<int> betas{1, 2, 5, 10};
  std::vector<int> Ps{1, 3, 5, 10};
  std::vector<std::string> activations{"linear", "relu"};
  std::vector<double> zetas{1.0};
  std::vector<std::string> bn{"none"};
  std::vector<std::string> losses{"infonce"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool save_checkpoints = false;

  TrainingDefaults train;
  PIConvergenceSettings pi;

  // Per-kind default sweep axes.
  static ExperimentConfig defaults(ExperimentKind kind);
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// TOML rendering of every value, defaults included.
std::string to_toml(const ExperimentConfig& cfg);

}  // namespace cldyn
