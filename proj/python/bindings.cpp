#include "cldyn/analysis.hpp"
#include "cldyn/config.hpp"
#include "cldyn/core.hpp"
#include "cldyn/experiments.hpp"
#include "cldyn/fixedpoint.hpp"
#include "cldyn/genmodels.hpp"
#include "cldyn/synthdata.hpp"
#include "cldyn/trainer.hpp"
#include "cldyn/twolayer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace cldyn;

namespace {

PairwiseImportance alpha_for(Index n, const std::optional<Matrix>& weights) {
  return weights ? PairwiseImportance::from_matrix(*weights) : uniform_alpha(n);
}

py::dict loss_dict(const LossValue& lv) {
  py::dict d;
  d["value"] = lv.value;
  d["grad_anchors"] = lv.grad_anchors;
  d["grad_views"] = lv.grad_views;
  return d;
}

SummationModel identity_summation(double q, Index dim) {
  return {OrthonormalDictionary::identity(dim), Vector::Constant(dim, q)};
}

}  // namespace

PYBIND11_MODULE(_cldyn, m) {
  m.doc() = "Contrastive learning dynamics: covariance operators, two-layer training, experiments";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidConfiguration>(m, "InvalidConfiguration", PyExc_ValueError);
  py::register_exception<InvalidBatch>(m, "InvalidBatch", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  // core
  m.def(
      "contrastive_covariance",
      [](const Matrix& a, const std::optional<Matrix>& b, const std::optional<Matrix>& alpha) {
        Index n = a.rows() / 2;
        return contrastive_covariance(a, b ? *b : a, alpha_for(n, alpha));
      },
      py::arg("a"), py::arg("b") = py::none(), py::arg("alpha") = py::none(),
      "C_alpha[a, b] for stacked 2N-row samples, anchors first. Uniform alpha by default.");
  m.def(
      "gated_operator",
      [](const Matrix& anchors, const Matrix& views, const Vector& w, const std::string& act) {
        return empirical_operator(PairedBatch(anchors, views), uniform_alpha(anchors.rows()),
                                  Activation::parse(act))(w);
      },
      py::arg("anchors"), py::arg("views"), py::arg("w"), py::arg("activation") = "relu");

  // generative models and closed forms
  m.def(
      "analytic_A_summation",
      [](double q, Index dim, Index atom) { return analytic_A_summation(identity_summation(q, dim), atom); },
      py::arg("q"), py::arg("dim"), py::arg("atom") = 0);
  m.def(
      "summation_population_A",
      [](double q, Index dim, const Vector& w) {
        return summation_population_operator(identity_summation(q, dim))(w);
      },
      py::arg("q"), py::arg("dim"), py::arg("w"));
  m.def("summation_tie_threshold", &summation_tie_threshold);
  m.def(
      "sample_summation",
      [](double q, Index dim, Index n, std::uint64_t seed) {
        return sample_summation(identity_summation(q, dim), n, seed);
      },
      py::arg("q"), py::arg("dim"), py::arg("n"), py::arg("seed"));

  // fixed points
  m.def(
      "power_iterate_summation",
      [](double q, Index dim, const Vector& w0, double tol, long max_iter) {
        PowerIterationTrace tr =
            power_iterate(summation_population_operator(identity_summation(q, dim)), w0, tol, max_iter);
        py::dict d;
        d["limit"] = tr.limit;
        d["converged"] = tr.converged;
        d["discrepancies"] = tr.discrepancies;
        d["c_values"] = tr.c_values;
        return d;
      },
      py::arg("q"), py::arg("dim"), py::arg("w0"), py::arg("tol") = 1e-10, py::arg("max_iter") = 200);
  m.def(
      "rank1_top_eigen",
      [](const Vector& d, const Vector& b, double weight) {
        Rank1Eigen r = rank1_top_eigen(d, b, weight);
        return py::make_tuple(r.lambda, r.s);
      },
      py::arg("d"), py::arg("b"), py::arg("weight"));

  // analysis
  m.def("modulation_probability", &modulation_probability, py::arg("eps"), py::arg("d"));
  m.def("blowup_time", &blowup_time, py::arg("b"), py::arg("y0"));
  m.def(
      "simulate_1d",
      [](double b, double y0, double dt, double t_max) {
        Trajectory1D tr = simulate_1d(b, y0, dt, t_max);
        py::dict d;
        d["t"] = tr.t;
        d["y"] = tr.y;
        d["blew_up"] = tr.blew_up;
        d["blowup_at"] = tr.blowup_at;
        return d;
      },
      py::arg("b"), py::arg("y0"), py::arg("dt"), py::arg("t_max"));

  // losses
  m.def(
      "infonce_loss",
      [](const Matrix& a, const Matrix& v, double tau, double eps) {
        return loss_dict(infonce_loss(a, v, tau, eps));
      },
      py::arg("anchors"), py::arg("views"), py::arg("tau") = 0.5, py::arg("eps") = 1.0);
  m.def(
      "quadratic_loss", [](const Matrix& a, const Matrix& v) { return loss_dict(quadratic_loss(a, v)); },
      py::arg("anchors"), py::arg("views"));

  // synthetic data
  py::class_<GeneratorPool>(m, "GeneratorPool")
      .def_readonly("G", &GeneratorPool::G)
      .def_readonly("K", &GeneratorPool::K)
      .def_readonly("P", &GeneratorPool::P)
      .def_readonly("d_tokens", &GeneratorPool::d_tokens)
      .def_readonly("generators", &GeneratorPool::generators)
      .def_readonly("candidate_sets", &GeneratorPool::candidate_sets)
      .def("save", py::overload_cast<const GeneratorPool&, const std::string&>(&write_pool))
      .def_static("load", &read_pool_file);
  m.def("build_pool", &build_pool, py::arg("G") = 40, py::arg("K") = 10, py::arg("P") = 3,
        py::arg("d_tokens") = 20, py::arg("seed") = 1);
  m.def(
      "make_embedding",
      [](Index d_tokens, Index d, double zeta) { return make_embedding(d_tokens, d, zeta).table; },
      py::arg("d_tokens") = 20, py::arg("d") = 20, py::arg("zeta") = 1.0);

  // networks
  py::class_<TwoLayerNet>(m, "TwoLayerNet")
      .def_static(
          "random",
          [](Index K, Index M, Index d, Index d_out, const std::string& act, std::uint64_t seed) {
            return TwoLayerNet::random(K, M, d, d_out, Activation::parse(act), seed);
          },
          py::arg("K"), py::arg("M"), py::arg("d"), py::arg("d_out") = 0,
          py::arg("activation") = "relu", py::arg("seed") = 1)
      .def_readonly("K", &TwoLayerNet::K)
      .def_readonly("M", &TwoLayerNet::M)
      .def_readonly("d", &TwoLayerNet::d)
      .def_readonly("d_out", &TwoLayerNet::d_out)
      .def_readwrite("W", &TwoLayerNet::W)
      .def_readwrite("V", &TwoLayerNet::V)
      .def_property_readonly("activation", [](const TwoLayerNet& n) { return n.act.name(); })
      .def(
          "forward",
          [](const TwoLayerNet& n, const Matrix& anchors, const Matrix& views) {
            return forward(n, RFBatch(anchors, views, n.K, n.d)).f2;
          },
          py::arg("anchors"), py::arg("views"))
      .def("save", [](const TwoLayerNet& n, const std::string& path) { save_checkpoint(n, path); })
      .def_static("load", &load_checkpoint);

  m.def(
      "matching_scores",
      [](const TwoLayerNet& net, const Matrix& emb_table, const GeneratorPool& pool) {
        TokenEmbedding emb;
        emb.table = emb_table;
        MatchingReport r = matching_scores(net, emb, pool);
        return py::make_tuple(r.chi_plus, r.chi_minus);
      },
      py::arg("net"), py::arg("embedding"), py::arg("pool"));

  m.def(
      "train",
      [](const std::string& activation, int P, int beta, double zeta, const std::string& bn,
         const std::string& loss, std::uint64_t seed, long steps, Index batch) {
        TrainingDefaults t;
        t.steps = steps;
        t.batch = batch;
        TrainedRun run;
        {
          py::gil_scoped_release release;
          run = train_cell({activation, P, beta, zeta, bn, loss}, t, seed);
        }
        py::dict d;
        d["ok"] = run.record.ok;
        d["error"] = run.record.error;
        d["chi_plus"] = run.record.chi_plus;
        d["chi_minus"] = run.record.chi_minus;
        d["loss"] = run.loss;
        if (run.net) d["net"] = *run.net;
        d["pool"] = run.pool;
        return d;
      },
      py::arg("activation") = "relu", py::arg("P") = 3, py::arg("beta") = 1, py::arg("zeta") = 1.0,
      py::arg("bn") = "none", py::arg("loss") = "infonce", py::arg("seed") = 1,
      py::arg("steps") = 5000, py::arg("batch") = 128,
      "One training run with the experiment defaults; returns scores, loss curve and weights.");

  // experiments
  m.def(
      "default_config", [](const std::string& kind) { return to_toml(ExperimentConfig::defaults(parse_kind(kind))); },
      py::arg("kind"), "Default TOML config of an experiment kind.");
  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::string& out_dir, std::uint64_t seed_offset,
         int parallel) {
        ExperimentConfig cfg = parse_config(config_text);
        py::gil_scoped_release release;
        return run_experiment(cfg, out_dir, seed_offset, parallel);
      },
      py::arg("config_text"), py::arg("out_dir"), py::arg("seed_offset") = 0, py::arg("parallel") = 1);
  m.def(
      "render_weight_grid",
      [](const TwoLayerNet& net, Index d_tokens, double zeta, const std::string& path,
         const GeneratorPool* pool) {
        render_weight_grid(net, make_embedding(d_tokens, net.d, zeta), path, pool);
      },
      py::arg("net"), py::arg("d_tokens"), py::arg("zeta"), py::arg("path"), py::arg("pool") = nullptr);
}
