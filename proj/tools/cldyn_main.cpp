#include "cldyn/config.hpp"
#include "cldyn/experiments.hpp"
#include "cldyn/synthdata.hpp"
#include "cldyn/twolayer.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

int main(int argc, char** argv) {
  CLI::App app{"Contrastive learning dynamics experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed_offset = 0;
  int parallel = 1;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run one configured experiment");
  run->add_option("--config", config_path, "TOML experiment file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed-offset", seed_offset, "Added to every configured seed");
  run->add_option("--parallel,-j", parallel, "Worker threads")
      ->check(CLI::Range(1, 1024));
  run->add_flag("--quiet,-q", quiet, "No per-run progress lines");

  std::string ckpt, image, pool_path;
  double zeta = 1.0;
  cldyn::Index d_tokens = 20;
  int cell_px = 6;
  auto* render = app.add_subcommand("render", "Render the filters of a checkpoint as a PGM grid");
  render->add_option("--checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  render->add_option("--out", image, "Output .pgm")->required();
  render->add_option("--pool", pool_path, "Generator pool file for the candidate strip")
      ->check(CLI::ExistingFile);
  render->add_option("--zeta", zeta, "Embedding norm ratio used in training");
  render->add_option("--d-tokens", d_tokens, "Vocabulary size used in training");
  render->add_option("--cell-px", cell_px, "Pixels per grid cell")->check(CLI::PositiveNumber);

  std::string kind;
  auto* defaults = app.add_subcommand("defaults", "Print the default config of an experiment kind");
  defaults->add_option("kind", kind, "Experiment kind")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      cldyn::ExperimentConfig cfg = cldyn::load_config(config_path);
      int status = cldyn::run_experiment(cfg, out_dir, seed_offset, parallel,
                                         quiet ? nullptr : &std::cerr);
      if (status != 0) std::cerr << "some runs failed; see runs.csv\n";
      return status;
    }
    if (*render) {
      cldyn::TwoLayerNet net = cldyn::load_checkpoint(ckpt);
      cldyn::TokenEmbedding emb = cldyn::make_embedding(d_tokens, net.d, zeta);
      std::optional<cldyn::GeneratorPool> pool;
      if (!pool_path.empty()) pool = cldyn::read_pool_file(pool_path);
      cldyn::render_weight_grid(net, emb, image, pool ? &*pool : nullptr, cell_px);
      return 0;
    }
    if (*defaults) {
      std::cout << cldyn::to_toml(cldyn::ExperimentConfig::defaults(cldyn::parse_kind(kind)));
      return 0;
    }
  } catch (const cldyn::InvalidConfiguration& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
