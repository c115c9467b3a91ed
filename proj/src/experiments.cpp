#include "cldyn/experiments.hpp"

#include "cldyn/checks.hpp"
#include "cldyn/fixedpoint.hpp"
#include "cldyn/genmodels.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#ifndef CLDYN_VERSION
#define CLDYN_VERSION "unknown"
#endif

namespace cldyn {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (auto p : parts) h = splitmix(h ^ p);
  return h;
}

std::uint64_t str_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

// Shortest round-trip form; independent of the global locale.
std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << body;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string cell_columns(const TrainingCell& c) {
  return std::to_string(c.beta) + "," + std::to_string(c.P) + "," + c.activation + "," + c.bn +
         "," + c.loss + "," + fmt(c.zeta);
}

const char* kCellHeader = "beta,P,activation,bn,loss,zeta";

void experiment_pi_convergence(const ExperimentConfig& cfg, std::uint64_t seed_offset,
                               const fs::path& out) {
  std::ostringstream trace, summary;
  trace << "seed,perturbation,start,iteration,discrepancy,c_value\n";
  summary << "seed,perturbation,start,atom,c0,certified,gamma,basin_radius,converged,iterations,"
             "final_alignment,reason\n";
  const auto& pi = cfg.pi;
  for (std::uint64_t seed0 : cfg.seeds) {
    std::uint64_t seed = seed0 + seed_offset;
    for (double pert : pi.perturbations) {
      OrthonormalDictionary dict = OrthonormalDictionary::random(pi.dim, pi.atoms, mix({seed, 1}));
      OrthonormalDictionary used = pert > 0.0 ? dict.perturbed(pert, mix({seed, 2})) : dict;
      SummationModel model{used, Vector::Constant(pi.atoms, pi.q)};
      GatedOperator a = summation_population_operator(model);
      Rng rng = make_rng(mix({seed, 3, std::uint64_t(pert * 1e9)}));
      double th = pi.start_angle_deg * std::acos(-1.0) / 180.0;
      for (Index s = 0; s < pi.starts; ++s) {
        Index atom = s % pi.atoms;
        Vector u = dict.base.col(atom);
        Vector w0 = std::cos(th) * u + std::sin(th) * random_tangent(u, rng);
        w0.normalize();
        std::string cert_cols, reason;
        try {
          ConvergenceCertificate c =
              certificate(a, w0, {0.02, 0.05, 0.1, 0.2, 0.3, 0.5}, 32, mix({seed, 4, std::uint64_t(s)}));
          cert_cols = fmt(c.c0) + "," + (c.certified ? "1" : "0") + "," + fmt(c.gamma) + "," +
                      fmt(c.basin_radius);
          reason = c.reason;
        } catch (const Error& e) {
          cert_cols = "nan,0,nan,nan";
          reason = e.what();
        }
        PowerIterationTrace tr;
        try {
          tr = power_iterate(a, w0, pi.tol, pi.max_iter);
        } catch (const DegenerateOperator& e) {
          tr = e.trace;
        }
        for (std::size_t t = 0; t < tr.discrepancies.size(); ++t)
          trace << seed << "," << fmt(pert) << "," << s << "," << t << ","
                << fmt(tr.discrepancies[t]) << "," << fmt(tr.c_values[t]) << "\n";
        double align = tr.limit.size() ? std::abs(tr.limit.dot(used.columns().col(atom).normalized())) : 0.0;
        summary << seed << "," << fmt(pert) << "," << s << "," << atom << "," << cert_cols << ","
                << (tr.converged ? 1 : 0) << "," << tr.discrepancies.size() << "," << fmt(align)
                << "," << csv_escape(reason) << "\n";
      }
    }
  }
  write_file(out / "pi_trace.csv", trace.str());
  write_file(out / "pi_summary.csv", summary.str());
}

void suite_row(std::ostringstream& os, const std::string& name, double value) {
  os << name << "," << fmt(value) << "\n";
}

void experiment_onelayer(const ExperimentConfig& cfg, std::uint64_t seed_offset, const fs::path& out) {
  std::ostringstream os;
  os << "seed,check,value\n";
  for (std::uint64_t seed0 : cfg.seeds) {
    std::uint64_t seed = seed0 + seed_offset;
    std::ostringstream rows;
    auto sc = summation_closed_form_check(0.2, 4, 100000, mix({seed, 10}));
    suite_row(rows, "summation_mc_along", sc.mc_along);
    suite_row(rows, "summation_mc_other", sc.mc_other);
    suite_row(rows, "summation_analytic_along", sc.analytic_along);
    suite_row(rows, "summation_analytic_other", sc.analytic_other);
    double qt = summation_tie_threshold();
    suite_row(rows, "tie_threshold", qt);
    suite_row(rows, "gap_below_tie", summation_gap(qt - 0.002, 4));
    suite_row(rows, "gap_above_tie", summation_gap(qt + 0.002, 4));

    // basin sizes of the categorical model's fixed points
    CategoricalModel cat{OrthonormalDictionary::identity(4), Vector::Constant(4, 0.25)};
    Matrix xs = sample_categorical(cat, 4000, mix({seed, 11}));
    GatedOperator a = empirical_operator(unaugmented_batch(xs), uniform_alpha(xs.rows()),
                                         Activation::relu());
    std::vector<Vector> targets;
    for (Index m = 0; m < 4; ++m) targets.push_back(cat.dict.base.col(m));
    BasinReport br = basin_estimate(a, targets, 50, 0.05, mix({seed, 12}), 0.05, 4000);
    for (Index m = 0; m < 4; ++m) suite_row(rows, "basin_u" + std::to_string(m), br.frequency[m]);
    suite_row(rows, "basin_unassigned", br.unassigned);
    suite_row(rows, "basin_unconverged", br.unconverged);

    auto runs = certified_power_iteration(0.1, 2, {0.5, 1.0, 2.0}, mix({seed, 13}));
    for (std::size_t i = 0; i < runs.size(); ++i) {
      std::string p = "pi_run" + std::to_string(i) + "_";
      suite_row(rows, p + "c0", runs[i].c0);
      suite_row(rows, p + "certified", runs[i].certified);
      suite_row(rows, p + "gamma", runs[i].gamma);
      suite_row(rows, p + "bound_ratio", runs[i].worst_bound_ratio);
    }
    suite_row(rows, "stability_fraction", summation_stability_fraction(0.1, 4, 1e-3, 16, mix({seed, 14})));
    Rng prng = make_rng(mix({seed, 15}));
    Vector w = random_unit_vector(5, prng);
    Vector w_prime = random_unit_vector(5, prng);
    PairCheck pc = spherical_gaussian_pair_check(w, w_prime, 200000, mix({seed, 15}));
    suite_row(rows, "pair_coefficient", pc.coefficient);
    suite_row(rows, "pair_expected", pc.expected);
    suite_row(rows, "pair_standard_error", pc.standard_error);
    suite_row(rows, "psd_worst_ratio", psd_worst_ratio(100, mix({seed, 16})));
    std::string body = rows.str();
    std::istringstream lines(body);
    for (std::string line; std::getline(lines, line);) os << seed << "," << line << "\n";
  }
  write_file(out / "suite.csv", os.str());
}

void experiment_twolayer(const ExperimentConfig& cfg, std::uint64_t seed_offset, const fs::path& out) {
  std::ostringstream os;
  os << "seed,check,value\n";
  for (std::uint64_t seed0 : cfg.seeds) {
    std::uint64_t seed = seed0 + seed_offset;
    std::ostringstream rows;
    suite_row(rows, "colinearity_min_cos", colinearity_min_cos(100, mix({seed, 20})));
    suite_row(rows, "critical_path_max_grad", critical_path_max_grad(20, mix({seed, 21})));
    Rank1Check r1 = rank1_solver_check(1000, 50, mix({seed, 22}));
    suite_row(rows, "rank1_max_rel_lambda_err", r1.max_rel_lambda_err);
    suite_row(rows, "rank1_max_vector_err", r1.max_vector_err);
    suite_row(rows, "rank1_floor_violations", double(r1.floor_violations));
    suite_row(rows, "decoupled_rhs_max_err", decoupled_rhs_max_error(50, mix({seed, 23})));
    ReassemblyCheck rc = reassembly_check(20000, mix({seed, 24}));
    suite_row(rows, "reassembly_residual", rc.residual);
    suite_row(rows, "reassembly_band", rc.band);
    suite_row(rows, "delta_antisymmetry", rc.delta_antisymmetry);
    suite_row(rows, "infonce_grad_rel_err",
              loss_gradient_check(LossConfig::Kind::InfoNCE, 100, mix({seed, 25})).max_rel_err);
    suite_row(rows, "quadratic_grad_rel_err",
              loss_gradient_check(LossConfig::Kind::Quadratic, 100, mix({seed, 26})).max_rel_err);

    // BN normalizes the per-RF magnitude spread
    Vector scale = Vector::Ones(4);
    scale[0] = 10.0;
    ConditionalModel model = make_prototype_model(Vector::Constant(2, 0.5), 4, 3, 2, 0.3,
                                                  mix({seed, 27}), scale);
    TwoLayerNet net = TwoLayerNet::random(4, 1, 3, 0, Activation::relu(), mix({seed, 28}));
    BNEffect be = bn_statistics_effect(model, net, 20000, mix({seed, 29}));
    suite_row(rows, "bn_spread_raw", be.spread);
    suite_row(rows, "bn_spread_normalized", be.spread_bn);
    std::string body = rows.str();
    std::istringstream lines(body);
    for (std::string line; std::getline(lines, line);) os << seed << "," << line << "\n";
  }
  write_file(out / "suite.csv", os.str());
}

std::string timestamp() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

std::string cell_label(const TrainingCell& c) {
  std::string s = c.activation + "_P" + std::to_string(c.P) + "_b" + std::to_string(c.beta) +
                  "_z" + fmt(c.zeta) + "_" + c.bn + "_" + c.loss;
  for (char& ch : s)
    if (ch == ':' || ch == '/') ch = '-';
  return s;
}

TrainedRun train_cell(const TrainingCell& cell, const TrainingDefaults& tr, std::uint64_t seed) {
  TrainedRun out;
  out.record.cell = cell;
  out.record.seed = seed;
  Activation act = Activation::parse(cell.activation);
  out.pool = build_pool(tr.G, tr.K, cell.P, tr.d_tokens, mix({seed, std::uint64_t(cell.P), 101}));
  out.emb = make_embedding(tr.d_tokens, tr.d, cell.zeta);
  const Index M = Index(cell.beta) * cell.P;
  TwoLayerNet net =
      TwoLayerNet::random(tr.K, M, tr.d, tr.d_out, act,
                          mix({seed, std::uint64_t(cell.P), std::uint64_t(cell.beta),
                               str_hash(cell.activation), 202}));
  net.W *= tr.w_init_scale;
  LossConfig loss = cell.loss == "quadratic" ? LossConfig::quadratic()
                                             : LossConfig::infonce(tr.tau, tr.eps);
  OptimConfig optim{tr.lr, tr.momentum, tr.weight_decay, tr.steps, tr.batch, false};
  std::optional<BNVariant> bn = parse_bn(cell.bn, tr.bn_eps);
  try {
    FitResult fr = fit(net, out.pool, out.emb, loss, optim, bn,
                       mix({seed, std::uint64_t(cell.P), std::uint64_t(cell.beta), 303}));
    MatchingReport m = matching_scores(fr.net, out.emb, out.pool);
    out.record.chi_plus = m.chi_plus;
    out.record.chi_minus = m.chi_minus;
    out.record.final_loss = fr.loss.empty() ? 0.0 : fr.loss.back();
    out.record.ok = std::isfinite(m.chi_plus) && std::isfinite(m.chi_minus);
    if (!out.record.ok) out.record.error = "non-finite matching score";
    out.net = std::move(fr.net);
    out.loss = std::move(fr.loss);
  } catch (const DivergenceError& e) {
    out.record.error = std::string(e.what()) + " at step " + std::to_string(e.step);
  } catch (const Error& e) {
    out.record.error = e.what();
  }
  return out;
}

RunRecord run_cell(const TrainingCell& cell, const TrainingDefaults& train, std::uint64_t seed) {
  return train_cell(cell, train, seed).record;
}

std::vector<TrainingCell> training_cells(const ExperimentConfig& cfg) {
  std::vector<TrainingCell> cells;
  for (const auto& act : cfg.activations)
    for (int P : cfg.Ps)
      for (int beta : cfg.betas)
        for (double zeta : cfg.zetas)
          for (const auto& bn : cfg.bn)
            for (const auto& loss : cfg.losses) cells.push_back({act, P, beta, zeta, bn, loss});
  return cells;
}

std::vector<RunRecord> run_sweep(const std::vector<TrainingCell>& cells,
                                 const std::vector<std::uint64_t>& seeds,
                                 const TrainingDefaults& train, int parallel,
                                 std::ostream* progress, const std::string& artifact_dir) {
  const std::size_t total = cells.size() * seeds.size();
  std::vector<RunRecord> out(total);
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto t0 = std::chrono::steady_clock::now();
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const TrainingCell& cell = cells[i / seeds.size()];
      std::uint64_t seed = seeds[i % seeds.size()];
      TrainedRun run = train_cell(cell, train, seed);
      if (!artifact_dir.empty() && run.net) {
        std::string stem = (fs::path(artifact_dir) / (cell_label(cell) + "_s" + std::to_string(seed))).string();
        save_checkpoint(*run.net, stem + ".ckpt");
        write_pool(run.pool, stem + ".pool");
        render_weight_grid(*run.net, run.emb, stem + ".pgm", &run.pool);
        write_loss_curve(run.loss, stem + "_loss.csv");
      }
      out[i] = run.record;
      if (progress) {
        std::lock_guard<std::mutex> lock(log_mu);
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        *progress << "[" << (i + 1) << "/" << total << " " << std::lround(sec) << "s] "
                  << cell_label(cell) << " seed " << seed;
        if (run.record.ok)
          *progress << " chi+ " << fmt(std::round(run.record.chi_plus * 1e4) / 1e4) << " chi- "
                    << fmt(std::round(run.record.chi_minus * 1e4) / 1e4);
        else
          *progress << " FAILED: " << run.record.error;
        *progress << std::endl;
      }
    }
  };
  int threads = std::max(1, std::min<int>(parallel, int(total)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

std::vector<CellSummary> aggregate(const std::vector<RunRecord>& runs) {
  std::vector<CellSummary> table;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<const RunRecord*>> members;
  for (const auto& r : runs) {
    std::string key = cell_columns(r.cell);
    auto [it, fresh] = index.emplace(key, table.size());
    if (fresh) {
      table.push_back(CellSummary{r.cell});
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    CellSummary& s = table[i];
    std::vector<double> cp, cm;
    for (const RunRecord* r : members[i]) {
      ++s.runs;
      if (!r->ok) {
        ++s.failed;
        continue;
      }
      cp.push_back(r->chi_plus);
      cm.push_back(r->chi_minus);
    }
    auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
      if (v.empty()) {
        mean = sd = std::nan("");
        return;
      }
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= double(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      sd = std::sqrt(ss / double(v.size()));
    };
    stats(cp, s.chi_plus_mean, s.chi_plus_std);
    stats(cm, s.chi_minus_mean, s.chi_minus_std);
  }
  return table;
}

void write_runs_csv(const std::vector<RunRecord>& runs, std::ostream& os) {
  os << kCellHeader << ",seed,status,chi_plus,chi_minus,final_loss,error\n";
  for (const auto& r : runs) {
    os << cell_columns(r.cell) << "," << r.seed << "," << (r.ok ? "ok" : "failed") << ",";
    if (r.ok)
      os << fmt(r.chi_plus) << "," << fmt(r.chi_minus) << "," << fmt(r.final_loss);
    else
      os << ",,";
    os << "," << csv_escape(r.error) << "\n";
  }
}

void write_table_csv(const std::vector<CellSummary>& table, std::ostream& os) {
  os << kCellHeader
     << ",runs,failed,chi_plus_mean,chi_plus_std,chi_minus_mean,chi_minus_std\n";
  for (const auto& s : table)
    os << cell_columns(s.cell) << "," << s.runs << "," << s.failed << "," << fmt(s.chi_plus_mean)
       << "," << fmt(s.chi_plus_std) << "," << fmt(s.chi_minus_mean) << ","
       << fmt(s.chi_minus_std) << "\n";
}

int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                   std::uint64_t seed_offset, int parallel, std::ostream* progress) {
  cfg.validate();
  fs::path out(out_dir);
  fs::create_directories(out);
  std::string started = timestamp();
  int status = 0;
  Index failed = 0, total = 0;

  switch (cfg.kind) {
    case ExperimentKind::Fig1PIConvergence:
      experiment_pi_convergence(cfg, seed_offset, out);
      break;
    case ExperimentKind::OneLayerSuite:
      experiment_onelayer(cfg, seed_offset, out);
      break;
    case ExperimentKind::TwoLayerSuite:
      experiment_twolayer(cfg, seed_offset, out);
      break;
    default: {
      std::vector<std::uint64_t> seeds;
      for (auto s : cfg.seeds) seeds.push_back(s + seed_offset);
      std::string artifacts;
      if (cfg.save_checkpoints) {
        fs::create_directories(out / "runs");
        artifacts = (out / "runs").string();
      }
      std::vector<RunRecord> runs =
          run_sweep(training_cells(cfg), seeds, cfg.train, parallel, progress, artifacts);
      std::ostringstream rs, ts;
      write_runs_csv(runs, rs);
      write_table_csv(aggregate(runs), ts);
      write_file(out / "runs.csv", rs.str());
      write_file(out / "table.csv", ts.str());
      total = Index(runs.size());
      for (const auto& r : runs) failed += !r.ok;
      if (failed) status = 1;
    }
  }

  std::ostringstream man;
  man << to_toml(cfg) << "\n[run]\n"
      << "code_version = \"" << CLDYN_VERSION << "\"\n"
      << "seed_offset = " << seed_offset << "\n"
      << "parallel = " << parallel << "\n"
      << "started = \"" << started << "\"\n"
      << "finished = \"" << timestamp() << "\"\n"
      << "runs = " << total << "\n"
      << "failed_runs = " << failed << "\n";
  write_file(out / "manifest.toml", man.str());
  return status;
}

void render_weight_grid(const TwoLayerNet& net, const TokenEmbedding& emb, const std::string& path,
                        const GeneratorPool* pool, int cell_px) {
  if (net.d != emb.dim()) throw DimensionError("embedding dimension differs from the filters");
  if (cell_px < 1) throw InvalidConfiguration("cell_px must be >= 1");
  const Index T = emb.tokens();
  const Index gap = 1;
  const Index marker = pool ? 2 : 0;  // marker strip rows (in cells), including a spacer
  const Index W = net.K * T * cell_px + (net.K - 1) * gap * cell_px;
  const Index H = (net.M + marker) * cell_px;
  std::vector<unsigned char> img(std::size_t(W * H), 0);

  Vector norms2 = emb.table.rowwise().squaredNorm();
  for (Index k = 0; k < net.K; ++k) {
    // coefficients in the embedding basis
    Matrix coef = net.W.middleRows(k * net.M, net.M) * emb.table.transpose();
    coef.array().rowwise() /= norms2.transpose().array();
    double peak = coef.cwiseAbs().maxCoeff();
    const Index x0 = k * (T + gap) * cell_px;
    auto paint = [&](Index row, Index col, unsigned char v) {
      for (Index py = 0; py < cell_px; ++py)
        for (Index px = 0; px < cell_px; ++px)
          img[std::size_t((row * cell_px + py) * W + x0 + col * cell_px + px)] = v;
    };
    if (pool) {
      for (Index a = 0; a < T; ++a) paint(0, a, pool->in_candidates(k, int(a)) ? 255 : 0);
      for (Index a = 0; a < T; ++a) paint(1, a, 0);
    }
    for (Index m = 0; m < net.M; ++m)
      for (Index a = 0; a < T; ++a) {
        double v = peak > 0.0 ? coef(m, a) / peak : 0.0;
        long level = std::lround(128.0 + 127.0 * v);
        paint(marker + m, a, static_cast<unsigned char>(std::clamp(level, 0L, 255L)));
      }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image '" + path + "'");
  out << "P5\n" << W << " " << H << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), std::streamsize(img.size()));
  if (!out) throw Error("image write failed for '" + path + "'");
}

}  // namespace cldyn
