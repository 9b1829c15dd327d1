#include "osm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "osm/bma.hpp"
#include "osm/common.hpp"
#include "osm/mcmc.hpp"
#include "osm/prediction.hpp"
#include "osm/simulation.hpp"
#include "osm/trial_data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace osm {

namespace {

constexpr std::uint64_t kTagFit = 0xF1;
constexpr std::uint64_t kTagPpd = 0xF2;
constexpr std::uint64_t kTagMix = 0xF3;

std::uint64_t model_tag(const std::string& name) {
  if (name == "marginal") return 1;
  if (name == "tl_os") return 2;
  if (name == "nt_os") return 3;
  if (name == "nl_os") return 4;
  if (name == "ttp") return 5;
  if (name == "spjm") return 6;
  if (name == "multistate") return 7;
  if (name == "bave") return 8;
  throw ConfigError("unknown model: " + name);
}

// ---------------------------------------------------------------------------
// Config file.
// ---------------------------------------------------------------------------

struct AppConfig {
  std::string longitudinal, events;
  int covariates = 0;
  int snapshot_k = 0;
  bool has_data = false;

  McmcSettings mcmc;  // threads 0 = resolve from env
  PriorSpec priors;
  std::vector<std::string> models;

  int target_n = 0;  // 0 = all subjects
  double alpha = 0.05;
  bool one_sided = false;
  std::vector<std::string> death_count_dates;
  double rmst_tau = 0.0;
  double km_grid_step = 0.5;

  std::string output = "out";

  StudyConfig study;
  bool has_simulate = false;
  bool export_trial = false;
};

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(std::string("config: unknown key ") + where + "." + it.key());
  }
}

double get_num(const json& j, const char* where, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) {
    throw ConfigError(std::string("config: ") + where + "." + key + " must be a number");
  }
  return j[key].get<double>();
}

int get_int(const json& j, const char* where, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) {
    throw ConfigError(std::string("config: ") + where + "." + key + " must be an integer");
  }
  return j[key].get<int>();
}

bool get_bool(const json& j, const char* where, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) {
    throw ConfigError(std::string("config: ") + where + "." + key + " must be a boolean");
  }
  return j[key].get<bool>();
}

std::string get_str(const json& j, const char* where, const char* key, std::string fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) {
    throw ConfigError(std::string("config: ") + where + "." + key + " must be a string");
  }
  return j[key].get<std::string>();
}

std::vector<std::string> get_str_list(const json& j, const char* where, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) {
    throw ConfigError(std::string("config: ") + where + "." + key + " must be an array");
  }
  for (const auto& e : j[key]) {
    if (!e.is_string()) {
      throw ConfigError(std::string("config: ") + where + "." + key + " entries must be strings");
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

void validate_model_name(const std::string& n) { model_tag(n); }

AppConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(j, "top",
             {"data", "mcmc", "models", "predict", "output", "priors", "simulate"});

  AppConfig cfg;
  cfg.mcmc.threads = 0;
  cfg.output = get_str(j, "top", "output", cfg.output);

  if (j.contains("data")) {
    const json& d = j["data"];
    if (!d.is_object()) throw ConfigError("config: data must be an object");
    check_keys(d, "data", {"longitudinal", "events", "covariates", "snapshot_k"});
    cfg.longitudinal = get_str(d, "data", "longitudinal", "");
    cfg.events = get_str(d, "data", "events", "");
    cfg.covariates = get_int(d, "data", "covariates", 0);
    cfg.snapshot_k = get_int(d, "data", "snapshot_k", 0);
    if (cfg.longitudinal.empty() || cfg.events.empty()) {
      throw ConfigError("config: data requires longitudinal and events paths");
    }
    if (cfg.covariates < 0) throw ConfigError("config: data.covariates must be >= 0");
    if (cfg.snapshot_k < 0) throw ConfigError("config: data.snapshot_k must be >= 0");
    cfg.has_data = true;
  }

  if (j.contains("mcmc")) {
    const json& m = j["mcmc"];
    if (!m.is_object()) throw ConfigError("config: mcmc must be an object");
    check_keys(m, "mcmc", {"chains", "adapt", "burn_in", "iters", "seed", "threads", "init_step"});
    cfg.mcmc.chains = get_int(m, "mcmc", "chains", cfg.mcmc.chains);
    cfg.mcmc.adapt = get_int(m, "mcmc", "adapt", cfg.mcmc.adapt);
    cfg.mcmc.burn_in = get_int(m, "mcmc", "burn_in", cfg.mcmc.burn_in);
    cfg.mcmc.iters = get_int(m, "mcmc", "iters", cfg.mcmc.iters);
    if (m.contains("seed")) {
      if (!m["seed"].is_number_integer() || m["seed"].get<std::int64_t>() < 0) {
        throw ConfigError("config: mcmc.seed must be a nonnegative integer");
      }
      cfg.mcmc.seed = m["seed"].get<std::uint64_t>();
    }
    cfg.mcmc.threads = get_int(m, "mcmc", "threads", 0);
    cfg.mcmc.init_step = get_num(m, "mcmc", "init_step", cfg.mcmc.init_step);
    if (cfg.mcmc.chains < 1 || cfg.mcmc.iters < 1 || cfg.mcmc.adapt < 0 ||
        cfg.mcmc.burn_in < 0 || cfg.mcmc.init_step <= 0.0) {
      throw ConfigError("config: mcmc settings must be positive");
    }
  }

  if (j.contains("priors")) {
    const json& p = j["priors"];
    if (!p.is_object()) throw ConfigError("config: priors must be an object");
    check_keys(p, "priors",
               {"coef_sd", "assoc_sd", "shape_rate", "rate_scale_rate", "dependence_rate",
                "sd_scale", "aft_scale_sd", "scale_override"});
    cfg.priors.coef_sd = get_num(p, "priors", "coef_sd", cfg.priors.coef_sd);
    cfg.priors.assoc_sd = get_num(p, "priors", "assoc_sd", cfg.priors.assoc_sd);
    cfg.priors.shape_rate = get_num(p, "priors", "shape_rate", cfg.priors.shape_rate);
    cfg.priors.rate_scale_rate =
        get_num(p, "priors", "rate_scale_rate", cfg.priors.rate_scale_rate);
    cfg.priors.dependence_rate =
        get_num(p, "priors", "dependence_rate", cfg.priors.dependence_rate);
    cfg.priors.sd_scale = get_num(p, "priors", "sd_scale", cfg.priors.sd_scale);
    cfg.priors.aft_scale_sd = get_num(p, "priors", "aft_scale_sd", cfg.priors.aft_scale_sd);
    if (p.contains("scale_override")) {
      if (!p["scale_override"].is_object()) {
        throw ConfigError("config: priors.scale_override must be an object");
      }
      for (auto it = p["scale_override"].begin(); it != p["scale_override"].end(); ++it) {
        if (!it.value().is_number()) {
          throw ConfigError("config: priors.scale_override values must be numbers");
        }
        cfg.priors.scale_override[it.key()] = it.value().get<double>();
      }
    }
  }

  cfg.models = get_str_list(j, "top", "models");
  for (const auto& m : cfg.models) validate_model_name(m);

  if (j.contains("predict")) {
    const json& p = j["predict"];
    if (!p.is_object()) throw ConfigError("config: predict must be an object");
    check_keys(p, "predict",
               {"target_n", "alpha", "one_sided", "death_count_dates", "rmst_tau",
                "km_grid_step"});
    cfg.target_n = get_int(p, "predict", "target_n", 0);
    cfg.alpha = get_num(p, "predict", "alpha", cfg.alpha);
    cfg.one_sided = get_bool(p, "predict", "one_sided", cfg.one_sided);
    cfg.death_count_dates = get_str_list(p, "predict", "death_count_dates");
    cfg.rmst_tau = get_num(p, "predict", "rmst_tau", cfg.rmst_tau);
    cfg.km_grid_step = get_num(p, "predict", "km_grid_step", cfg.km_grid_step);
    if (cfg.target_n < 0) throw ConfigError("config: predict.target_n must be >= 0");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
      throw ConfigError("config: predict.alpha must be in (0,1)");
    }
    if (cfg.km_grid_step <= 0.0) throw ConfigError("config: predict.km_grid_step must be > 0");
    for (const auto& dstr : cfg.death_count_dates) {
      try {
        parse_iso_date(dstr);
      } catch (const std::exception&) {
        throw ConfigError("config: predict.death_count_dates entry not ISO-8601: " + dstr);
      }
    }
  }

  if (j.contains("simulate")) {
    const json& s = j["simulate"];
    if (!s.is_object()) throw ConfigError("config: simulate must be an object");
    check_keys(s, "simulate",
               {"scenario", "n_subjects", "replicates", "snapshot_ks", "methods", "target_n",
                "generator", "export_trial"});
    cfg.export_trial = get_bool(s, "simulate", "export_trial", false);
    StudyConfig& sc = cfg.study;
    sc.generator.scenario = get_int(s, "simulate", "scenario", sc.generator.scenario);
    sc.generator.n_subjects = get_int(s, "simulate", "n_subjects", sc.generator.n_subjects);
    sc.replicates = get_int(s, "simulate", "replicates", sc.replicates);
    sc.target_n = get_int(s, "simulate", "target_n", sc.target_n);
    if (s.contains("snapshot_ks")) {
      if (!s["snapshot_ks"].is_array()) {
        throw ConfigError("config: simulate.snapshot_ks must be an array");
      }
      sc.snapshot_ks.clear();
      for (const auto& e : s["snapshot_ks"]) {
        if (!e.is_number_integer()) {
          throw ConfigError("config: simulate.snapshot_ks entries must be integers");
        }
        sc.snapshot_ks.push_back(e.get<int>());
      }
    }
    if (s.contains("methods")) {
      sc.methods = get_str_list(s, "simulate", "methods");
    }
    if (s.contains("generator")) {
      const json& g = s["generator"];
      if (!g.is_object()) throw ConfigError("config: simulate.generator must be an object");
      check_keys(g, "generator",
                 {"tl_intercept", "tl_trt", "tl_slope", "tl_sd_intercept", "tl_sd_slope",
                  "tl_corr", "tl_sd_noise", "nl_shape", "nl_rate", "nl_trt", "os_shape",
                  "os_rate", "os_trt", "eta_scenario2", "eta_scenario4", "tl_mix",
                  "visit_horizon"});
      GeneratorConfig& gc = sc.generator;
      gc.tl_intercept = get_num(g, "generator", "tl_intercept", gc.tl_intercept);
      gc.tl_trt = get_num(g, "generator", "tl_trt", gc.tl_trt);
      gc.tl_slope = get_num(g, "generator", "tl_slope", gc.tl_slope);
      gc.tl_sd_intercept = get_num(g, "generator", "tl_sd_intercept", gc.tl_sd_intercept);
      gc.tl_sd_slope = get_num(g, "generator", "tl_sd_slope", gc.tl_sd_slope);
      gc.tl_corr = get_num(g, "generator", "tl_corr", gc.tl_corr);
      gc.tl_sd_noise = get_num(g, "generator", "tl_sd_noise", gc.tl_sd_noise);
      gc.nl_shape = get_num(g, "generator", "nl_shape", gc.nl_shape);
      gc.nl_rate = get_num(g, "generator", "nl_rate", gc.nl_rate);
      gc.nl_trt = get_num(g, "generator", "nl_trt", gc.nl_trt);
      gc.os_shape = get_num(g, "generator", "os_shape", gc.os_shape);
      gc.os_rate = get_num(g, "generator", "os_rate", gc.os_rate);
      gc.os_trt = get_num(g, "generator", "os_trt", gc.os_trt);
      gc.eta_scenario2 = get_num(g, "generator", "eta_scenario2", gc.eta_scenario2);
      gc.eta_scenario4 = get_num(g, "generator", "eta_scenario4", gc.eta_scenario4);
      gc.tl_mix = get_num(g, "generator", "tl_mix", gc.tl_mix);
      gc.visit_horizon = get_num(g, "generator", "visit_horizon", gc.visit_horizon);
    }
    cfg.has_simulate = true;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Draws persistence.
// ---------------------------------------------------------------------------

void save_draws_csv(const std::string& path, const PosteriorDraws& d) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << "chain,iter,param_name,value\n";
  for (int c = 0; c < d.chains; ++c) {
    for (int it = 0; it < d.iters; ++it) {
      const int k = c * d.iters + it;
      const double* row = d.draw(k);
      for (int p = 0; p < d.dim; ++p) {
        f << c << ',' << it << ',' << d.names[p] << ',' << fmt_double(row[p]) << '\n';
      }
      f << c << ',' << it << ",loglik__," << fmt_double(d.loglik[k]) << '\n';
      f << c << ',' << it << ",logprior__," << fmt_double(d.logprior[k]) << '\n';
      f << c << ',' << it << ",logranef__," << fmt_double(d.logranef[k]) << '\n';
      f << c << ',' << it << ",osloglik__," << fmt_double(d.osloglik[k]) << '\n';
    }
  }
}

PosteriorDraws load_draws_csv(const std::string& path, const SubjectModel& model) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0] != "chain,iter,param_name,value") {
    throw DataError(path + ": expected header chain,iter,param_name,value");
  }
  const ParameterSpace& space = model.space();
  std::vector<std::string> names = space.flat_names(model.subject_ids());
  const int dim = space.dim();
  std::map<std::string, int> index;
  for (int p = 0; p < dim; ++p) index[names[p]] = p;
  index["loglik__"] = dim;
  index["logprior__"] = dim + 1;
  index["logranef__"] = dim + 2;
  index["osloglik__"] = dim + 3;

  struct Cell {
    int chain, iter, param;
    double value;
  };
  std::vector<Cell> cells;
  cells.reserve(lines.size());
  int max_chain = -1, max_iter = -1;
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::vector<std::string> parts = split_csv_line(lines[ln]);
    if (parts.size() != 4) throw DataError(path + ": bad row " + std::to_string(ln + 1));
    const std::string ctx = path + ":" + std::to_string(ln + 1);
    Cell c{};
    c.chain = static_cast<int>(parse_double_field(parts[0], ctx));
    c.iter = static_cast<int>(parse_double_field(parts[1], ctx));
    auto it = index.find(parts[2]);
    if (it == index.end()) throw DataError(path + ": unknown parameter " + parts[2]);
    c.param = it->second;
    c.value = parse_double_field(parts[3], ctx);
    if (c.chain < 0 || c.iter < 0) throw DataError(path + ": negative chain or iter index");
    max_chain = std::max(max_chain, c.chain);
    max_iter = std::max(max_iter, c.iter);
    cells.push_back(c);
  }
  if (cells.empty()) throw DataError(path + ": no draws");

  PosteriorDraws d;
  d.names = std::move(names);
  d.chains = max_chain + 1;
  d.iters = max_iter + 1;
  d.dim = dim;
  const size_t n = static_cast<size_t>(d.chains) * d.iters;
  d.draws.assign(n * dim, 0.0);
  d.loglik.assign(n, 0.0);
  d.logprior.assign(n, 0.0);
  d.logranef.assign(n, 0.0);
  d.osloglik.assign(n, 0.0);
  std::vector<char> seen(n * (dim + 4), 0);
  for (const Cell& c : cells) {
    const size_t k = static_cast<size_t>(c.chain) * d.iters + c.iter;
    const size_t slot = k * (dim + 4) + c.param;
    if (seen[slot]) throw DataError(path + ": duplicate entry for " + d.names[std::min(c.param, dim - 1)]);
    seen[slot] = 1;
    if (c.param < dim) {
      d.draws[k * dim + c.param] = c.value;
    } else if (c.param == dim) {
      d.loglik[k] = c.value;
    } else if (c.param == dim + 1) {
      d.logprior[k] = c.value;
    } else if (c.param == dim + 2) {
      d.logranef[k] = c.value;
    } else {
      d.osloglik[k] = c.value;
    }
  }
  for (char s : seen) {
    if (!s) throw DataError(path + ": incomplete draw grid (missing entries)");
  }
  for (int j = 0; j < space.block_count(); ++j) {
    if (space.block(j).role == Role::Global) {
      for (int c2 = 0; c2 < space.block(j).dim; ++c2) {
        d.global_index.push_back(space.offset(j) + c2);
        d.global_support.push_back(space.block(j).support);
      }
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

TrialSnapshot load_snapshot(const AppConfig& cfg) {
  if (!cfg.has_data) throw ConfigError("this command requires a data section in the config");
  TrialSnapshot snap = load_trial(cfg.longitudinal, cfg.events, cfg.covariates);
  if (cfg.snapshot_k > 0) snap = snapshot_at_kth_death(snap, cfg.snapshot_k);
  return snap;
}

std::unique_ptr<SubjectModel> build_model(const std::string& name, const TrialSnapshot& snap) {
  if (name == "marginal") return std::make_unique<MarginalOsModel>(snap);
  if (name == "tl_os") return std::make_unique<TlOsModel>(snap);
  if (name == "nt_os") return std::make_unique<ClaytonPairModel>(snap, PairKind::NT);
  if (name == "nl_os") return std::make_unique<ClaytonPairModel>(snap, PairKind::NL);
  if (name == "ttp") return std::make_unique<ClaytonPairModel>(snap, PairKind::TTP);
  if (name == "spjm") return std::make_unique<SpjmModel>(snap);
  if (name == "multistate") return std::make_unique<MultistateModel>(snap);
  throw ConfigError("unknown model: " + name);
}

// "bave" expands to its submodels for fitting; duplicates collapse.
std::vector<std::string> expand_models(const std::vector<std::string>& models) {
  std::vector<std::string> out;
  auto push = [&](const std::string& n) {
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  };
  for (const auto& m : models) {
    if (m == "bave") {
      push("tl_os");
      push("nt_os");
      push("nl_os");
      push("marginal");
    } else {
      push(m);
    }
  }
  return out;
}

std::string draws_path(const std::string& outdir, const std::string& name) {
  return (fs::path(outdir) / ("draws_" + name + ".csv")).string();
}

int cmd_fit(const AppConfig& cfg, bool strict, int threads) {
  const TrialSnapshot snap = load_snapshot(cfg);
  if (cfg.models.empty()) throw ConfigError("fit: no models requested");
  fs::create_directories(cfg.output);
  const std::vector<std::string> names = expand_models(cfg.models);
  bool all_converged = true;
  for (const auto& name : names) {
    const std::unique_ptr<SubjectModel> model = build_model(name, snap);
    McmcSettings ms = cfg.mcmc;
    ms.threads = threads;
    ms.seed = derive_seed(cfg.mcmc.seed, {kTagFit, model_tag(name)});
    const PosteriorDraws d = run_mcmc(*model, cfg.priors, ms);
    save_draws_csv(draws_path(cfg.output, name), d);
    json diag;
    diag["model"] = name;
    diag["converged"] = d.converged;
    diag["rhat"] = json::object();
    for (const auto& [param, value] : d.rhat) diag["rhat"][param] = value;
    diag["acceptance"] = json::object();
    for (const auto& [block, rate] : d.acceptance) diag["acceptance"][block] = rate;
    std::ofstream jf(fs::path(cfg.output) / ("diagnostics_" + name + ".json"));
    jf << diag.dump(2) << '\n';
    std::cout << "fit " << name << ": " << (d.converged ? "converged" : "NOT converged")
              << ", draws at " << draws_path(cfg.output, name) << '\n';
    all_converged = all_converged && d.converged;
  }
  if (strict && !all_converged) {
    throw NumericalError("convergence diagnostics above threshold with --strict-convergence");
  }
  return 0;
}

// Loads draws and produces the predictive matrix for one model entry.
PpdMatrix predict_ppd(const std::string& name, const TrialSnapshot& snap, const AppConfig& cfg,
                      int threads) {
  const std::uint64_t seed = cfg.mcmc.seed;
  if (name == "bave") {
    TlOsModel mt(snap);
    ClaytonPairModel mnt(snap, PairKind::NT);
    ClaytonPairModel mnl(snap, PairKind::NL);
    MarginalOsModel mo(snap);
    const PosteriorDraws dt = load_draws_csv(draws_path(cfg.output, "tl_os"), mt);
    const PosteriorDraws dnt = load_draws_csv(draws_path(cfg.output, "nt_os"), mnt);
    const PosteriorDraws dnl = load_draws_csv(draws_path(cfg.output, "nl_os"), mnl);
    const PosteriorDraws dos = load_draws_csv(draws_path(cfg.output, "marginal"), mo);
    const std::vector<BmaStream> streams = {make_stream("tl_os", dt), make_stream("nt_os", dnt),
                                            make_stream("nl_os", dnl),
                                            make_stream("marginal", dos)};
    const BmaWeights w = compute_weights(streams);

    std::ofstream wf(fs::path(cfg.output) / "weights.csv");
    if (!wf) throw DataError("cannot write weights.csv");
    wf << "iter,w_T,w_NT,w_NL,w_OS\n";
    for (int t = 0; t < w.n_iter; ++t) {
      wf << t << ',' << fmt_double(w.at(t, 0)) << ',' << fmt_double(w.at(t, 1)) << ','
         << fmt_double(w.at(t, 2)) << ',' << fmt_double(w.at(t, 3)) << '\n';
    }
    json ws;
    ws["mean_w"] = json::object();
    for (size_t q = 0; q < w.models.size(); ++q) ws["mean_w"][w.models[q]] = w.mean_w[q];
    std::ofstream wjf(fs::path(cfg.output) / "weights_summary.json");
    wjf << ws.dump(2) << '\n';

    std::vector<PpdMatrix> comps;
    comps.push_back(ppd_tl_os(mt, dt, snap, derive_seed(seed, {kTagPpd, 2}), threads));
    comps.push_back(ppd_clayton(mnt, dnt, snap, derive_seed(seed, {kTagPpd, 3}), threads));
    comps.push_back(ppd_clayton(mnl, dnl, snap, derive_seed(seed, {kTagPpd, 4}), threads));
    comps.push_back(ppd_marginal(mo, dos, snap, derive_seed(seed, {kTagPpd, 1}), threads));
    return bma_ppd(w, comps, derive_seed(seed, {kTagMix}));
  }
  const std::uint64_t pseed = derive_seed(seed, {kTagPpd, model_tag(name)});
  if (name == "marginal") {
    MarginalOsModel m(snap);
    return ppd_marginal(m, load_draws_csv(draws_path(cfg.output, name), m), snap, pseed, threads);
  }
  if (name == "tl_os") {
    TlOsModel m(snap);
    return ppd_tl_os(m, load_draws_csv(draws_path(cfg.output, name), m), snap, pseed, threads);
  }
  if (name == "nt_os" || name == "nl_os" || name == "ttp") {
    const PairKind kind =
        name == "nt_os" ? PairKind::NT : (name == "nl_os" ? PairKind::NL : PairKind::TTP);
    ClaytonPairModel m(snap, kind);
    return ppd_clayton(m, load_draws_csv(draws_path(cfg.output, name), m), snap, pseed, threads);
  }
  if (name == "spjm") {
    SpjmModel m(snap);
    return ppd_spjm(m, load_draws_csv(draws_path(cfg.output, name), m), snap, pseed, threads);
  }
  if (name == "multistate") {
    MultistateModel m(snap);
    return ppd_multistate(m, load_draws_csv(draws_path(cfg.output, name), m), snap, pseed,
                          threads);
  }
  throw ConfigError("unknown model: " + name);
}

int cmd_predict(const AppConfig& cfg, int threads) {
  const TrialSnapshot snap = load_snapshot(cfg);
  if (cfg.models.empty()) throw ConfigError("predict: no models requested");
  fs::create_directories(cfg.output);
  const int total = static_cast<int>(snap.subjects.size());
  const int target_n = cfg.target_n > 0 ? cfg.target_n : total;

  for (const auto& name : cfg.models) {
    const PpdMatrix ppd = predict_ppd(name, snap, cfg, threads);

    const std::string ppd_file = "ppd_" + name + ".csv";
    {
      std::ofstream pf(fs::path(cfg.output) / ppd_file);
      if (!pf) throw DataError("cannot write " + ppd_file);
      pf << "iter,subject_id,pred_time_months\n";
      for (int k = 0; k < ppd.n_draws; ++k) {
        for (int j = 0; j < ppd.n_alive(); ++j) {
          pf << k << ',' << ppd.subject_ids[j] << ',' << fmt_double(ppd.at(k, j)) << '\n';
        }
      }
    }

    const MilestoneForecast mf = milestone_nth_death(ppd, snap, target_n, 0.9);
    const PredictedKm km = predicted_km(ppd, snap, cfg.km_grid_step, cfg.rmst_tau);
    {
      std::ofstream kf(fs::path(cfg.output) / ("km_band_" + name + ".csv"));
      kf << "arm,time,med,lo,hi\n";
      for (int arm = 0; arm < 2; ++arm) {
        for (size_t gi = 0; gi < km.grid.size(); ++gi) {
          kf << arm << ',' << fmt_double(km.grid[gi]) << ',' << fmt_double(km.med[arm][gi]) << ','
             << fmt_double(km.lo[arm][gi]) << ',' << fmt_double(km.hi[arm][gi]) << '\n';
        }
      }
    }

    json fj;
    fj["model"] = name;
    fj["target_n"] = mf.target_n;
    fj["median_date"] = format_iso_date(mf.median_date);
    fj["median_days"] = mf.median_date;
    fj["hpd90"] = {format_iso_date(mf.hpd_lo), format_iso_date(mf.hpd_hi)};
    fj["hpd90_days"] = {mf.hpd_lo, mf.hpd_hi};
    fj["median_months_after_cutoff"] = mf.median_months_after_cutoff;
    fj["any_capped"] = mf.any_capped;
    fj["draws_path"] = ppd_file;

    fj["death_counts"] = json::array();
    for (const auto& dstr : cfg.death_count_dates) {
      const DeathCountSummary dc = death_count_at(ppd, snap, parse_iso_date(dstr));
      json e;
      e["date"] = dstr;
      e["mean"] = dc.mean;
      e["median"] = dc.median;
      e["q05"] = dc.q05;
      e["q95"] = dc.q95;
      fj["death_counts"].push_back(e);
    }

    const SuccessProbability pos =
        probability_of_success(ppd, snap, target_n, cfg.alpha, cfg.one_sided);
    fj["probability_of_success"] = {{"probability", pos.probability},
                                    {"significant", pos.significant},
                                    {"n_draws", pos.n_draws},
                                    {"alpha", pos.alpha},
                                    {"one_sided", pos.one_sided}};
    fj["rmst_difference"] = {{"tau", km.tau},
                             {"median", km.rmst_median},
                             {"hpd90", {km.rmst_lo, km.rmst_hi}},
                             {"extrapolated", km.rmst_extrapolated}};
    std::ofstream ff(fs::path(cfg.output) / ("forecast_" + name + ".json"));
    ff << fj.dump(2) << '\n';
    std::cout << "predict " << name << ": death " << target_n << " at "
              << format_iso_date(mf.median_date) << " [" << format_iso_date(mf.hpd_lo) << ", "
              << format_iso_date(mf.hpd_hi) << "]\n";
  }
  return 0;
}

int cmd_simulate(const AppConfig& cfg, int threads) {
  if (!cfg.has_simulate) throw ConfigError("simulate requires a simulate section in the config");
  fs::create_directories(cfg.output);
  if (cfg.export_trial) {
    GeneratorConfig g = cfg.study.generator;
    g.seed = derive_seed(cfg.mcmc.seed, {0xA1, 0});
    const GeneratedTrial trial = generate_trial(g);
    const std::string lpath = (fs::path(cfg.output) / "trial_longitudinal.csv").string();
    const std::string epath = (fs::path(cfg.output) / "trial_events.csv").string();
    write_trial(trial.full, lpath, epath, (fs::path(cfg.output) / "trial_meta.json").string());
    json truth;
    truth["last_death_months"] = trial.last_death_months;
    truth["last_death_date"] = format_iso_date(trial.last_death_date);
    std::ofstream tf(fs::path(cfg.output) / "trial_truth.json");
    tf << truth.dump(2) << '\n';
    std::cout << "exported " << trial.full.subjects.size() << "-subject scenario-"
              << g.scenario << " trial to " << cfg.output << '\n';
    return 0;
  }
  StudyConfig sc = cfg.study;
  sc.priors = cfg.priors;
  sc.mcmc = cfg.mcmc;
  sc.mcmc.threads = 1;  // replicates own the parallelism
  sc.seed = cfg.mcmc.seed;
  sc.threads = threads;
  const EvalReport report = run_study(sc);
  const std::string summary = (fs::path(cfg.output) / "eval_summary.csv").string();
  const std::string rows = (fs::path(cfg.output) / "eval_rows.csv").string();
  write_eval_report(report, summary, rows);
  std::cout << "scenario " << sc.generator.scenario << ", " << sc.replicates
            << " replicates: summary at " << summary << '\n';
  for (const auto& c : report.cells) {
    std::cout << "  k=" << c.k << ' ' << c.method << ": bias=" << c.bias << " rmse=" << c.rmse
              << " cr=" << c.cr << " width=" << c.width << " fail=" << c.n_fail << '\n';
  }
  return 0;
}

std::string fixed3(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  return buf;
}

int cmd_report(const AppConfig& cfg) {
  if (cfg.models.empty() && !fs::exists(fs::path(cfg.output) / "eval_summary.csv")) {
    throw ConfigError("report: nothing to report (no models, no evaluation output)");
  }
  std::ostringstream out;
  for (const auto& name : cfg.models) {
    const fs::path fpath = fs::path(cfg.output) / ("forecast_" + name + ".json");
    std::ifstream ff(fpath);
    if (!ff) throw DataError("missing artifact " + fpath.string() + " (run predict first)");
    json fj;
    try {
      fj = json::parse(ff);
    } catch (const json::exception& e) {
      throw DataError(fpath.string() + ": invalid JSON: " + e.what());
    }
    out << "== forecast: " << name << " ==\n";
    out << "milestone death " << fj.at("target_n").get<int>() << ": "
        << fj.at("median_date").get<std::string>() << "  (90% HPD "
        << fj.at("hpd90")[0].get<std::string>() << " .. " << fj.at("hpd90")[1].get<std::string>()
        << "), " << fixed3(fj.at("median_months_after_cutoff").get<double>())
        << " months after cutoff\n";
    for (const auto& e : fj.at("death_counts")) {
      out << "deaths by " << e.at("date").get<std::string>() << ": mean "
          << fixed3(e.at("mean").get<double>()) << ", median "
          << fixed3(e.at("median").get<double>()) << ", 90% range ["
          << fixed3(e.at("q05").get<double>()) << ", " << fixed3(e.at("q95").get<double>())
          << "]\n";
    }
    const json& pos = fj.at("probability_of_success");
    out << "probability of success at n=" << fj.at("target_n").get<int>() << ": "
        << fixed3(pos.at("probability").get<double>()) << " ("
        << (pos.at("one_sided").get<bool>() ? "one" : "two") << "-sided alpha="
        << fixed3(pos.at("alpha").get<double>()) << ")\n";
    const json& rm = fj.at("rmst_difference");
    out << "restricted-mean difference at tau=" << fixed3(rm.at("tau").get<double>()) << ": "
        << fixed3(rm.at("median").get<double>()) << " (90% HPD ["
        << fixed3(rm.at("hpd90")[0].get<double>()) << ", " << fixed3(rm.at("hpd90")[1].get<double>())
        << "])\n\n";
  }

  const fs::path wpath = fs::path(cfg.output) / "weights_summary.json";
  if (fs::exists(wpath)) {
    std::ifstream wf(wpath);
    json wj;
    try {
      wj = json::parse(wf);
    } catch (const json::exception& e) {
      throw DataError(wpath.string() + ": invalid JSON: " + e.what());
    }
    out << "== model weights (means) ==\n";
    for (auto it = wj.at("mean_w").begin(); it != wj.at("mean_w").end(); ++it) {
      out << it.key() << ": " << fixed3(it.value().get<double>()) << '\n';
    }
    out << '\n';
  }

  const fs::path epath = fs::path(cfg.output) / "eval_summary.csv";
  if (fs::exists(epath)) {
    out << "== evaluation summary ==\n";
    for (const auto& line : read_lines(epath.string())) out << line << '\n';
    out << '\n';
  }

  const std::string text = out.str();
  std::ofstream rf(fs::path(cfg.output) / "report.txt");
  if (!rf) throw DataError("cannot write report.txt");
  rf << text;
  std::cout << text;
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Bayesian event-milestone forecasting for survival trials", "osm"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_flag = 0;
  int threads_flag = 0;
  std::string out_flag;
  bool strict = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_flag, "override mcmc.seed");
    sub->add_option("--threads", threads_flag, "worker threads (0 = OSM_THREADS env or 1)");
    sub->add_option("--out", out_flag, "override output directory");
  };
  CLI::App* fit = app.add_subcommand("fit", "sample model posteriors and persist draws");
  add_common(fit);
  fit->add_flag("--strict-convergence", strict, "exit 4 if any split-Rhat is above 1.1");
  CLI::App* predict = app.add_subcommand("predict", "forecast milestones from persisted draws");
  add_common(predict);
  CLI::App* simulate = app.add_subcommand("simulate", "run the snapshot evaluation study");
  add_common(simulate);
  CLI::App* report = app.add_subcommand("report", "consolidate prediction artifacts");
  add_common(report);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    AppConfig cfg = parse_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed") > 0) cfg.mcmc.seed = seed_flag;
    if (sub->count("--out") > 0) cfg.output = out_flag;
    int threads = cfg.mcmc.threads;
    if (sub->count("--threads") > 0) threads = threads_flag;
    threads = resolve_threads(threads);

    if (sub == fit) return cmd_fit(cfg, strict, threads);
    if (sub == predict) return cmd_predict(cfg, threads);
    if (sub == simulate) return cmd_simulate(cfg, threads);
    return cmd_report(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace osm
