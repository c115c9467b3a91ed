#pragma once

#include "cldyn/analysis.hpp"
#include "cldyn/config.hpp"
#include "cldyn/synthdata.hpp"
#include "cldyn/trainer.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cldyn {

struct TrainingCell {
  std::string activation = "relu";
  int P = 3;
  int beta = 1;
  double zeta = 1.0;
  std::string bn = "none";
  std::string loss = "infonce";
};

struct RunRecord {
  TrainingCell cell;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double chi_plus = 0.0;
  double chi_minus = 0.0;
  double final_loss = 0.0;
};

struct CellSummary {
  TrainingCell cell;
  Index runs = 0;
  Index failed = 0;
  double chi_plus_mean = 0.0, chi_plus_std = 0.0;
  double chi_minus_mean = 0.0, chi_minus_std = 0.0;
};

// Everything a single training run produces, for callers that keep the weights.
struct TrainedRun {
  RunRecord record;
  GeneratorPool pool;
  TokenEmbedding emb;
  std::optional<TwoLayerNet> net;
  std::vector<double> loss;
};

// Pools depend on (seed, P) only and initial weights on (seed, P, beta, activation), so
// cells that differ in BN, loss or zeta start from the same state.
TrainedRun train_cell(const TrainingCell& cell, const TrainingDefaults& train, std::uint64_t seed);
RunRecord run_cell(const TrainingCell& cell, const TrainingDefaults& train, std::uint64_t seed);

std::vector<TrainingCell> training_cells(const ExperimentConfig& cfg);

// Runs every (cell, seed) on `parallel` worker threads; results come back in (cell, seed)
// order regardless of scheduling.
// With a non-empty artifact_dir each run also leaves its checkpoint, pool and weight grid there.
std::vector<RunRecord> run_sweep(const std::vector<TrainingCell>& cells,
                                 const std::vector<std::uint64_t>& seeds,
                                 const TrainingDefaults& train, int parallel,
                                 std::ostream* progress = nullptr,
                                 const std::string& artifact_dir = "");

// Population standard deviation over successful runs, grouped by cell in first-seen order.
std::vector<CellSummary> aggregate(const std::vector<RunRecord>& runs);

void write_runs_csv(const std::vector<RunRecord>& runs, std::ostream& os);
void write_table_csv(const std::vector<CellSummary>& table, std::ostream& os);

// Full experiment: validates, runs, writes CSVs and manifest.toml into out_dir. Returns 0 when
// every run succeeded, 1 when some runs failed (their rows carry the error).
int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                   std::uint64_t seed_offset, int parallel, std::ostream* progress = nullptr);

// Greyscale PGM, one panel per RF: rows are filters, columns tokens, cell value
// w_km . u_a / |u_a|^2 mapped to [0, 255] around a mid-tone of 128.
// With a pool, a marker strip above each panel lights up the candidate tokens of that RF.
void render_weight_grid(const TwoLayerNet& net, const TokenEmbedding& emb,
                        const std::string& path, const GeneratorPool* pool = nullptr,
                        int cell_px = 6);

std::string cell_label(const TrainingCell& cell);

}  // namespace cldyn
