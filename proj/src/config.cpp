#include "cldyn/config.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace cldyn {

namespace {

struct KindEntry {
  ExperimentKind kind;
  const char* name;
};

constexpr KindEntry kKinds[] = {
    {ExperimentKind::Table1, "table1"},
    {ExperimentKind::Table2BN, "table2_bn"},
    {ExperimentKind::TableAChiMinus, "tableA_chi_minus"},
    {ExperimentKind::TableAQuadratic, "tableA_quadratic"},
    {ExperimentKind::TableABNVariants, "tableA_bn_variants"},
    {ExperimentKind::Fig1PIConvergence, "fig1_pi_convergence"},
    {ExperimentKind::Fig5Weights, "fig5_weights"},
    {ExperimentKind::OneLayerSuite, "onelayer_suite"},
    {ExperimentKind::TwoLayerSuite, "twolayer_suite"},
};

void check_keys(const toml::table& t, const std::set<std::string>& allowed, const std::string& where) {
  for (auto&& [k, v] : t) {
    (void)v;
    if (!allowed.count(std::string(k.str())))
      throw InvalidConfiguration("unknown key '" + std::string(k.str()) + "' in " + where);
  }
}

template <class T>
void read_scalar(const toml::table& t, const char* key, T& out) {
  const toml::node* n = t.get(key);
  if (!n) return;
  if constexpr (std::is_same_v<T, bool>) {
    auto v = n->value<bool>();
    if (!v) throw InvalidConfiguration(std::string("'") + key + "' must be a boolean");
    out = *v;
  } else if constexpr (std::is_same_v<T, std::string>) {
    auto v = n->value<std::string>();
    if (!v) throw InvalidConfiguration(std::string("'") + key + "' must be a string");
    out = *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    auto v = n->value<double>();  // accepts integers too
    if (!v) throw InvalidConfiguration(std::string("'") + key + "' must be a number");
    out = *v;
  } else {
    if (!n->is_integer()) throw InvalidConfiguration(std::string("'") + key + "' must be an integer");
    out = static_cast<T>(n->as_integer()->get());
  }
}

template <class T>
void read_list(const toml::table& t, const char* key, std::vector<T>& out) {
  const toml::node* n = t.get(key);
  if (!n) return;
  const toml::array* arr = n->as_array();
  if (!arr) throw InvalidConfiguration(std::string("'") + key + "' must be an array");
  std::vector<T> vals;
  for (const toml::node& e : *arr) {
    if constexpr (std::is_same_v<T, std::string>) {
      auto v = e.value<std::string>();
      if (!v) throw InvalidConfiguration(std::string("'") + key + "' must hold strings");
      vals.push_back(*v);
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = e.value<double>();
      if (!v) throw InvalidConfiguration(std::string("'") + key + "' must hold numbers");
      vals.push_back(*v);
    } else {
      if (!e.is_integer()) throw InvalidConfiguration(std::string("'") + key + "' must hold integers");
      auto v = e.as_integer()->get();
      if (std::is_unsigned_v<T> && v < 0)
        throw InvalidConfiguration(std::string("'") + key + "' must be nonnegative");
      vals.push_back(static_cast<T>(v));
    }
  }
  out = std::move(vals);
}

template <class T>
std::string list_str(const std::vector<T>& v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    if constexpr (std::is_same_v<T, std::string>)
      os << '"' << v[i] << '"';
    else
      os << v[i];
  }
  os << "]";
  return os.str();
}

std::string num(double x) {
  char buf[64];
  std::string s(buf, std::to_chars(buf, buf + sizeof buf, x).ptr);
  // keep floats recognisable as floats when read back
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  for (const auto& e : kKinds)
    if (e.kind == kind) return e.name;
  return "unknown";
}

ExperimentKind parse_kind(const std::string& s) {
  for (const auto& e : kKinds)
    if (s == e.name) return e.kind;
  throw InvalidConfiguration("unknown experiment kind '" + s + "'");
}

std::optional<BNVariant> parse_bn(const std::string& s, double eps) {
  if (s == "none") return std::nullopt;
  if (s == "mean") return BNVariant{true, false, eps};
  if (s == "var") return BNVariant{false, true, eps};
  if (s == "both") return BNVariant{true, true, eps};
  if (s == "neither") return BNVariant{false, false, eps};
  throw InvalidConfiguration("unknown BN variant '" + s + "' (none|mean|var|both|neither)");
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.name = kind_name(kind);
  switch (kind) {
    case ExperimentKind::Table1:
    case ExperimentKind::TableAChiMinus:
      break;
    case ExperimentKind::TableAQuadratic:
      c.losses = {"quadratic"};
      break;
    case ExperimentKind::Table2BN:
      c.activations = {"relu"};
      c.zetas = {10.0};
      c.bn = {"none", "mean"};
      break;
    case ExperimentKind::TableABNVariants:
      c.activations = {"relu"};
      c.zetas = {10.0};
      c.bn = {"neither", "var", "mean", "both"};
      break;
    case ExperimentKind::Fig5Weights:
      c.betas = {5};
      c.Ps = {3};
      c.activations = {"relu"};
      c.seeds = {1};
      c.save_checkpoints = true;
      break;
    case ExperimentKind::Fig1PIConvergence:
    case ExperimentKind::OneLayerSuite:
    case ExperimentKind::TwoLayerSuite:
      c.seeds = {1};
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw InvalidConfiguration("seed list is empty");
  if (betas.empty() || Ps.empty() || activations.empty() || zetas.empty() || bn.empty() ||
      losses.empty())
    throw InvalidConfiguration("every sweep axis needs at least one value");
  for (int b : betas)
    if (b < 1) throw InvalidConfiguration("beta must be >= 1");
  for (int p : Ps)
    if (p < 1 || p > train.d_tokens) throw InvalidConfiguration("P must lie in [1, d_tokens]");
  for (const auto& a : activations) Activation::parse(a);
  for (double z : zetas)
    if (!(z > 0.0)) throw InvalidConfiguration("zeta must be positive");
  for (const auto& b : bn) parse_bn(b, train.bn_eps);
  for (const auto& l : losses)
    if (l != "infonce" && l != "quadratic")
      throw InvalidConfiguration("loss must be infonce or quadratic, got '" + l + "'");
  if (train.G < 1 || train.K < kFixedPositions || train.d_tokens < 1 || train.d < train.d_tokens)
    throw InvalidConfiguration("data settings need G >= 1, K >= 5 and d >= d_tokens >= 1");
  OptimConfig o{train.lr, train.momentum, train.weight_decay, train.steps, train.batch, false};
  o.validate();
  LossConfig::infonce(train.tau, train.eps).validate();
  if (!(train.w_init_scale > 0.0)) throw InvalidConfiguration("w_init_scale must be positive");
  if (train.d_out < 0) throw InvalidConfiguration("d_out must be >= 0");
  if (!(train.bn_eps >= 0.0)) throw InvalidConfiguration("bn_eps must be >= 0");
  if (pi.dim < pi.atoms || pi.atoms < 1 || pi.atoms > 16)
    throw InvalidConfiguration("pi settings need 1 <= atoms <= min(dim, 16)");
  if (!(pi.q > 0.0 && pi.q < 1.0)) throw InvalidConfiguration("pi.q must lie in (0, 1)");
  if (pi.perturbations.empty() || pi.starts < 1 || pi.max_iter < 1 || !(pi.tol > 0.0))
    throw InvalidConfiguration("pi settings need perturbations, starts >= 1, max_iter >= 1, tol > 0");
}

ExperimentConfig parse_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error: " << e.description() << " at line " << e.source().begin.line;
    throw InvalidConfiguration(os.str());
  }
  check_keys(root, {"kind", "name", "seeds", "save_checkpoints", "sweep", "train", "pi"}, "config");
  std::string kind;
  read_scalar(root, "kind", kind);
  if (kind.empty()) throw InvalidConfiguration("config needs 'kind'");
  ExperimentConfig c = ExperimentConfig::defaults(parse_kind(kind));
  read_scalar(root, "name", c.name);
  read_list(root, "seeds", c.seeds);
  read_scalar(root, "save_checkpoints", c.save_checkpoints);

  if (const toml::table* s = root["sweep"].as_table()) {
    check_keys(*s, {"beta", "P", "activation", "zeta", "bn", "loss"}, "[sweep]");
    read_list(*s, "beta", c.betas);
    read_list(*s, "P", c.Ps);
    read_list(*s, "activation", c.activations);
    read_list(*s, "zeta", c.zetas);
    read_list(*s, "bn", c.bn);
    read_list(*s, "loss", c.losses);
  }
  if (const toml::table* t = root["train"].as_table()) {
    check_keys(*t,
               {"G", "K", "d_tokens", "d", "lr", "momentum", "weight_decay", "steps", "batch", "tau",
                "eps", "w_init_scale", "d_out", "bn_eps"},
               "[train]");
    auto& tr = c.train;
    read_scalar(*t, "G", tr.G);
    read_scalar(*t, "K", tr.K);
    read_scalar(*t, "d_tokens", tr.d_tokens);
    read_scalar(*t, "d", tr.d);
    read_scalar(*t, "lr", tr.lr);
    read_scalar(*t, "momentum", tr.momentum);
    read_scalar(*t, "weight_decay", tr.weight_decay);
    read_scalar(*t, "steps", tr.steps);
    read_scalar(*t, "batch", tr.batch);
    read_scalar(*t, "tau", tr.tau);
    read_scalar(*t, "eps", tr.eps);
    read_scalar(*t, "w_init_scale", tr.w_init_scale);
    read_scalar(*t, "d_out", tr.d_out);
    read_scalar(*t, "bn_eps", tr.bn_eps);
  }
  if (const toml::table* p = root["pi"].as_table()) {
    check_keys(*p, {"dim", "atoms", "q", "perturbations", "starts", "start_angle_deg", "tol", "max_iter"},
               "[pi]");
    read_scalar(*p, "dim", c.pi.dim);
    read_scalar(*p, "atoms", c.pi.atoms);
    read_scalar(*p, "q", c.pi.q);
    read_list(*p, "perturbations", c.pi.perturbations);
    read_scalar(*p, "starts", c.pi.starts);
    read_scalar(*p, "start_angle_deg", c.pi.start_angle_deg);
    read_scalar(*p, "tol", c.pi.tol);
    read_scalar(*p, "max_iter", c.pi.max_iter);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfiguration("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_toml(const ExperimentConfig& c) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  const auto& t = c.train;
  os << "kind = \"" << kind_name(c.kind) << "\"\n"
     << "name = \"" << c.name << "\"\n"
     << "seeds = " << list_str(c.seeds) << "\n"
     << "save_checkpoints = " << (c.save_checkpoints ? "true" : "false") << "\n\n"
     << "[sweep]\n"
     << "beta = " << list_str(c.betas) << "\n"
     << "P = " << list_str(c.Ps) << "\n"
     << "activation = " << list_str(c.activations) << "\n"
     << "zeta = [";
  for (std::size_t i = 0; i < c.zetas.size(); ++i) os << (i ? ", " : "") << num(c.zetas[i]);
  os << "]\n"
     << "bn = " << list_str(c.bn) << "\n"
     << "loss = " << list_str(c.losses) << "\n\n"
     << "[train]\n"
     << "G = " << t.G << "\nK = " << t.K << "\nd_tokens = " << t.d_tokens << "\nd = " << t.d << "\n"
     << "lr = " << num(t.lr) << "\nmomentum = " << num(t.momentum)
     << "\nweight_decay = " << num(t.weight_decay) << "\n"
     << "steps = " << t.steps << "\nbatch = " << t.batch << "\n"
     << "tau = " << num(t.tau) << "\neps = " << num(t.eps)
     << "\nw_init_scale = " << num(t.w_init_scale) << "\n"
     << "d_out = " << t.d_out << "\nbn_eps = " << num(t.bn_eps) << "\n\n"
     << "[pi]\n"
     << "dim = " << c.pi.dim << "\natoms = " << c.pi.atoms << "\nq = " << num(c.pi.q) << "\n"
     << "perturbations = [";
  for (std::size_t i = 0; i < c.pi.perturbations.size(); ++i)
    os << (i ? ", " : "") << num(c.pi.perturbations[i]);
  os << "]\n"
     << "starts = " << c.pi.starts << "\nstart_angle_deg = " << num(c.pi.start_angle_deg) << "\n"
     << "tol = " << num(c.pi.tol) << "\nmax_iter = " << c.pi.max_iter << "\n";
  return os.str();
}

}  // namespace cldyn
