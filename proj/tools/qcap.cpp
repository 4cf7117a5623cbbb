// qcap: command-line front end.  One subcommand per pipeline; every report is
// canonical JSON (or CSV rows) and depends only on inputs, flags and seed.
//
// Exit codes: 0 success, 1 input error, 2 assertion failure.
#include "qcap/qcap.hpp"
#include "qcap/report.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <numeric>

namespace {

using namespace qcap;

struct Options {
  std::string channels;
  std::vector<int> l_list;
  double delta = 0.1;
  double epsilon = 0.5;
  int k = 1;
  int trials = 50;
  int restarts = 4;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  std::size_t budget = 0;  // 0: QCAP_BUDGET_DIM or the default
  std::size_t threads = 1;
  std::vector<double> rho_diag;
  int g_dim = 0;
  bool timings = false;
  int instances = -1;
};

struct Outcome {
  RunReport report;
  std::vector<CsvRow> rows;
};

std::size_t resolve_budget(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("QCAP_BUDGET_DIM")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) throw ValidationError("QCAP_BUDGET_DIM must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return kDefaultBudgetDim;
}

struct Input {
  CompoundSet set;
  std::vector<std::string> contents;
};

Input load_set(const Options& o) {
  if (o.channels.empty()) throw ValidationError("a channel-set file is required");
  std::string text = read_file(o.channels);
  CompoundSet set = parse_channel_set_text(text);
  return {std::move(set), {std::move(text)}};
}

OptimizerConfig optimizer(const Options& o) {
  OptimizerConfig cfg;
  cfg.restarts = o.restarts;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

int single_l(const Options& o, int fallback) {
  if (o.l_list.empty()) return fallback;
  if (o.l_list.size() != 1) throw ValidationError("--l takes a single value for this command");
  return o.l_list.front();
}

void check_l(int l) {
  if (l < 1) throw ValidationError("--l must be at least 1");
}

DensityState rho_from_diag(const Options& o, Eigen::Index dim) {
  if (o.rho_diag.empty()) return DensityState::maximally_mixed(dim);
  if (static_cast<Eigen::Index>(o.rho_diag.size()) != dim)
    throw ValidationError("--rho-diag has " + std::to_string(o.rho_diag.size()) + " entries, expected " +
                          std::to_string(dim));
  for (double p : o.rho_diag)
    if (!(p >= 0.0)) throw ValidationError("--rho-diag entries must be nonnegative");
  const double s = std::accumulate(o.rho_diag.begin(), o.rho_diag.end(), 0.0);
  if (std::abs(s - 1.0) > 1e-9) throw ValidationError("--rho-diag must sum to 1");
  return DensityState::diagonal(o.rho_diag);
}

SubspaceBasis code_space(const Options& o, Eigen::Index dim_in) {
  if (o.g_dim == 0) return SubspaceBasis::full(dim_in);
  if (o.g_dim < 1 || o.g_dim > dim_in)
    throw ValidationError("--g-dim must lie in [1, " + std::to_string(dim_in) + "]");
  return SubspaceBasis::leading(dim_in, o.g_dim);
}

Json doubles(const std::vector<double>& v) { return Json(v); }

// ---------------------------------------------------------------------------

Outcome cmd_info(const Options& o) {
  Input in = load_set(o);
  Outcome out;
  const DensityState pi = DensityState::maximally_mixed(in.set.dim_in());
  Json members = Json::array();
  for (std::size_t j = 0; j < in.set.size(); ++j) {
    const KrausMap& n = in.set[j];
    const KindReport kind = verify_kind(n);
    const std::string& name = in.set.member_names()[j];
    Json m;
    m["name"] = name;
    m["kind"] = to_string(kind.kind);
    m["tp_residual"] = kind.tp_residual;
    m["kraus_count"] = n.kraus_count();
    m["minimal_kraus_count"] = minimal_kraus(n).kraus_count();
    const double ic = coherent_information(pi, n);
    const double se = entropy_exchange(pi, n);
    m["coherent_information_pi"] = ic;
    m["entropy_exchange_pi"] = se;
    m["output_entropy_pi"] = operator_entropy(apply(n, pi.matrix()));
    if (n.dim_in() == n.dim_out()) {
      const double fe = entanglement_fidelity(pi, n);
      m["entanglement_fidelity_pi"] = fe;
      out.rows.push_back({1, name, "entanglement_fidelity_pi", fe});
    }
    out.rows.push_back({1, name, "coherent_information_pi", ic});
    out.rows.push_back({1, name, "entropy_exchange_pi", se});
    members.push_back(std::move(m));
  }
  out.report.results = {{"name", in.set.name()},
                        {"dim_in", in.set.dim_in()},
                        {"dim_out", in.set.dim_out()},
                        {"channels", std::move(members)}};
  out.report.inputs_digest = inputs_digest(in.contents);
  return out;
}

Outcome cmd_icap(const Options& o, std::size_t budget) {
  Input in = load_set(o);
  const OptimizerConfig cfg = optimizer(o);
  std::vector<int> ls = o.l_list.empty() ? std::vector<int>{1} : o.l_list;
  Outcome out;
  Json points = Json::array();
  for (int l : ls) {
    check_l(l);
    const CapacityEstimate e = maximin_coherent_info(in.set, l, cfg, budget, o.threads);
    Json p;
    p["l"] = l;
    p["value"] = e.value;
    p["per_channel_ic"] = doubles(e.per_channel_ic);
    p["converged"] = e.converged;
    p["restarts_used"] = e.restarts_used;
    p["argmax_spectrum"] = real_vector_to_json(eigh(e.argmax_state.matrix()).values);
    points.push_back(std::move(p));
    out.rows.push_back({l, "min", "maximin_ic_per_letter", e.value});
    for (std::size_t j = 0; j < e.per_channel_ic.size(); ++j)
      out.rows.push_back({l, in.set.member_names()[j], "ic", e.per_channel_ic[j]});
  }
  out.report.parameters = {{"restarts", o.restarts}, {"l", ls}};
  out.report.results = {{"points", std::move(points)}};
  out.report.inputs_digest = inputs_digest(in.contents);
  return out;
}

Outcome cmd_oneshot(const Options& o) {
  std::vector<std::string> contents;
  std::vector<KrausMap> maps;
  SubspaceBasis g = SubspaceBasis::full(1);
  if (o.channels.empty()) {
    // Identity channel on C^{g_dim}.
    if (o.g_dim < 1) throw ValidationError("oneshot needs a channel-set file or --g-dim");
    maps.push_back(identity_channel(o.g_dim));
    g = SubspaceBasis::full(o.g_dim);
  } else {
    Input in = load_set(o);
    maps = in.set.channels();
    g = code_space(o, in.set.dim_in());
    contents = std::move(in.contents);
  }
  const OptimizerConfig cfg = optimizer(o);
  const OneShotBoundReport r = mc_code_fidelity(maps, g, o.k, o.trials, HaarSampler{g.k(), o.seed, 0}, cfg, o.threads);
  Outcome out;
  out.report.parameters = {{"k", o.k}, {"trials", o.trials}, {"g_dim", g.k()}};
  out.report.results = {{"rhs", r.rhs},
                        {"total_weight", r.total_weight},
                        {"n_j", r.n_j},
                        {"l2_norms", doubles(r.l2_norms)},
                        {"mc_mean", r.mc_mean},
                        {"mc_stderr", r.mc_stderr},
                        {"trials", r.trials},
                        {"values", doubles(r.values)},
                        {"all_converged", r.all_converged},
                        {"holds", r.holds()}};
  out.report.assertions_ok = r.holds();
  out.report.inputs_digest = inputs_digest(contents);
  out.rows = {{1, "average", "rhs", r.rhs}, {1, "average", "mc_mean", r.mc_mean}, {1, "average", "mc_stderr", r.mc_stderr}};
  return out;
}

Outcome cmd_typical(const Options& o, std::size_t budget) {
  std::vector<std::string> contents;
  std::optional<CompoundSet> set;
  if (!o.channels.empty()) {
    Input in = load_set(o);
    set = std::move(in.set);
    contents = std::move(in.contents);
  }
  const Eigen::Index dim = set ? set->dim_in() : static_cast<Eigen::Index>(std::max<std::size_t>(o.rho_diag.size(), 2));
  const DensityState rho = rho_from_diag(o, dim);
  const std::vector<int> ls = o.l_list.empty() ? std::vector<int>{2} : o.l_list;
  const double s = von_neumann_entropy(rho);
  const bool exponent_range = o.delta > 0.0 && o.delta < 0.5;
  Outcome out;
  bool ok = true;
  Json points = Json::array();
  for (int l : ls) {
    check_l(l);
    const TypicalProjector q = frequency_typical_projector(rho, o.delta, l, budget);
    Json p;
    p["l"] = l;
    p["rank"] = q.rank;
    p["weight"] = q.weight();
    p["type_class_count"] = q.type_classes.size();
    p["max_probability"] = q.max_probability();
    out.rows.push_back({l, "state", "rank", static_cast<double>(q.rank)});
    out.rows.push_back({l, "state", "weight", q.weight()});
    if (exponent_range) {
      const ExponentBook book = exponents(static_cast<int>(dim), static_cast<int>(dim), l, o.delta);
      const double cap = std::exp2(-l * (s - book.phi_delta));
      p["eigenvalue_cap"] = cap;
      p["cap_holds"] = q.max_probability() <= cap;
      ok = ok && q.max_probability() <= cap;
    }
    if (set) {
      Json reduced = Json::array();
      for (std::size_t j = 0; j < set->size(); ++j) {
        const ReducedOperation r = reduced_operation((*set)[j], DensityState::maximally_mixed(dim), o.delta, l, budget);
        Json rj;
        rj["channel"] = set->member_names()[j];
        rj["kraus_count"] = r.kraus_count;
        rj["env_entropy"] = r.env_entropy;
        rj["env_weight"] = r.env_projector.weight();
        reduced.push_back(std::move(rj));
        out.rows.push_back({l, set->member_names()[j], "reduced_kraus_count", static_cast<double>(r.kraus_count)});
      }
      p["reduced_operations"] = std::move(reduced);
    }
    points.push_back(std::move(p));
  }
  out.report.parameters = {{"delta", o.delta}, {"l", ls}, {"rho_diag", doubles(o.rho_diag)}};
  out.report.results = {{"entropy", s}, {"points", std::move(points)}};
  out.report.assertions_ok = ok;
  out.report.inputs_digest = inputs_digest(contents);
  return out;
}

Outcome cmd_bsst(const Options& o, std::size_t budget) {
  Input in = load_set(o);
  const DensityState rho = rho_from_diag(o, in.set.dim_in());
  std::vector<int> ls = o.l_list;
  if (ls.empty())
    for (int l = 1; l <= 4; ++l) ls.push_back(l);
  for (int l : ls) check_l(l);
  const BsstSequence seq = bsst_sequence(rho, in.set, ls, default_delta_rule, budget);
  Outcome out;
  Json points = Json::array();
  for (const auto& p : seq.points) {
    points.push_back({{"l", p.l},
                      {"delta", p.delta},
                      {"rank", p.rank},
                      {"value", p.value},
                      {"error", std::abs(p.value - seq.target)},
                      {"per_channel", doubles(p.per_channel)}});
    out.rows.push_back({p.l, "min", "bsst_value", p.value});
    out.rows.push_back({p.l, "min", "bsst_error", std::abs(p.value - seq.target)});
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < seq.points.size(); ++i)
    decreasing = decreasing && std::abs(seq.points[i].value - seq.target) < std::abs(seq.points[i - 1].value - seq.target);
  out.report.parameters = {{"l", ls}, {"delta_rule", "l^(-1/3)"}, {"rho_diag", doubles(o.rho_diag)}};
  out.report.results = {{"target", seq.target}, {"points", std::move(points)}, {"error_decreasing", decreasing}};
  out.report.inputs_digest = inputs_digest(in.contents);
  return out;
}

Outcome cmd_direct(const Options& o, std::size_t budget) {
  Input in = load_set(o);
  const int l = single_l(o, 2);
  check_l(l);
  const SubspaceBasis g = code_space(o, in.set.dim_in());
  const DirectPartReport r = direct_part_experiment(in.set, g, l, o.delta, o.epsilon, o.trials, optimizer(o),
                                                    kDefaultTypicalityConstant, budget, o.threads);
  Outcome out;
  out.report.parameters = {{"l", l}, {"delta", o.delta}, {"epsilon", o.epsilon}, {"trials", o.trials}, {"g_dim", g.k()}};
  out.report.results = {{"k_l", r.k_l},
                        {"rate", r.rate},
                        {"i_min", r.i_min},
                        {"min_fidelity_clipped", r.min_fidelity_clipped},
                        {"min_fidelity_true", r.min_fidelity_true},
                        {"fidelity_clipped", doubles(r.fidelity_clipped)},
                        {"fidelity_true", doubles(r.fidelity_true)},
                        {"epsilon_l", r.epsilon_l},
                        {"epsilon_l_vacuous", r.epsilon_l_vacuous},
                        {"typicality_constant", r.typicality_constant},
                        {"reduced_kraus_counts", r.reduced_kraus_counts},
                        {"clipped_weights", doubles(r.clipped_weights)},
                        {"clipped_average_weight", r.clipped_average_weight},
                        {"chosen_candidate", r.chosen_candidate},
                        {"chosen_code_fidelity", r.chosen_code_fidelity},
                        {"haar_mean_code_fidelity", r.haar_mean_code_fidelity},
                        {"haar_stderr_code_fidelity", r.haar_stderr_code_fidelity},
                        {"optimizer_converged", r.optimizer_converged},
                        {"linkage_holds", r.linkage_holds()}};
  out.report.assertions_ok = r.linkage_holds();
  out.report.inputs_digest = inputs_digest(in.contents);
  for (std::size_t j = 0; j < in.set.size(); ++j) {
    out.rows.push_back({l, in.set.member_names()[j], "fidelity_clipped", r.fidelity_clipped[j]});
    out.rows.push_back({l, in.set.member_names()[j], "fidelity_true", r.fidelity_true[j]});
  }
  return out;
}

Json record_json(const LemmaCheckRecord& r) {
  return {{"id", r.lemma_id}, {"instance_seed", r.instance_seed}, {"lhs", r.lhs},
          {"rhs", r.rhs},     {"margin", r.margin},               {"ok", r.ok}};
}

Outcome cmd_verify(const Options& o) {
  SuiteSizes sizes;
  if (o.instances >= 0) {
    sizes.lemma1 = sizes.lemma3 = sizes.lemma5 = sizes.lemma6 = o.instances;
    sizes.theorem2_trials = std::max(2, std::min(o.instances, sizes.theorem2_trials));
    sizes.lemma4_trials = std::max(100, o.instances * 100);
  }
  const SuiteReport rep = run_suite(o.seed, sizes, optimizer(o), o.threads);
  Outcome out;
  Json failures = Json::array();
  std::map<std::string, std::pair<int, int>> tally;  // id → (passed, failed)
  for (const auto& r : rep.records) {
    auto& t = tally[r.lemma_id];
    (r.ok ? t.first : t.second) += 1;
    if (!r.ok) failures.push_back(record_json(r));
  }
  Json per = Json::object();
  for (const auto& [id, t] : tally) per[id] = {{"passed", t.first}, {"failed", t.second}};
  Json smallest = Json::object();
  for (const auto& [id, v] : rep.smallest_margins(5)) {
    Json a = Json::array();
    for (const auto& r : v) a.push_back(record_json(r));
    smallest[id] = std::move(a);
    out.rows.push_back({0, id, "smallest_margin", v.front().margin});
  }
  out.report.parameters = {{"lemma1", sizes.lemma1},   {"lemma3", sizes.lemma3},
                           {"lemma4_trials", sizes.lemma4_trials}, {"lemma5", sizes.lemma5},
                           {"lemma6", sizes.lemma6},   {"theorem2_trials", sizes.theorem2_trials}};
  out.report.results = {{"passed", rep.passed},
                        {"failed", rep.failed},
                        {"per_check", std::move(per)},
                        {"failures", std::move(failures)},
                        {"smallest_margins", std::move(smallest)},
                        {"lemma1_projected_violations", rep.lemma1_projected_violations},
                        {"optimizer_converged", rep.optimizer_converged}};
  out.report.assertions_ok = rep.ok();
  out.report.inputs_digest = inputs_digest({});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entanglement transmission over compound quantum channels"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--out", o.out, "Write the report here instead of stdout");
    sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--budget-dim", o.budget, "Largest dense composite dimension (default QCAP_BUDGET_DIM or 4096)");
    sub->add_option("--threads", o.threads, "Worker threads, 0 = hardware concurrency");
    sub->add_option("--restarts", o.restarts, "Optimiser restarts");
    sub->add_flag("--timings", o.timings, "Include wall-clock timings in the report");
  };
  auto add_channels = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("channels", o.channels, "Channel-set JSON file (schema v1)");
    if (required) opt->required();
  };

  auto* info = app.add_subcommand("info", "Channel diagnostics");
  add_channels(info, true);
  add_common(info);

  auto* icap = app.add_subcommand("icap", "max over states of min_j I_c(rho, N_j^{(x)l}) / l");
  add_channels(icap, true);
  add_common(icap);
  icap->add_option("--l", o.l_list, "Block lengths")->delimiter(',')->allow_extra_args(false);

  auto* oneshot = app.add_subcommand("oneshot", "One-shot random-code fidelity against the decoupling bound");
  add_channels(oneshot, false);
  add_common(oneshot);
  oneshot->add_option("--k", o.k, "Code dimension");
  oneshot->add_option("--trials", o.trials, "Haar trials");
  oneshot->add_option("--g-dim", o.g_dim, "Dimension of G (identity channel when no file is given)");

  auto* typical = app.add_subcommand("typical", "Frequency-typical projector statistics");
  add_channels(typical, false);
  add_common(typical);
  typical->add_option("--l", o.l_list, "Block lengths")->delimiter(',')->allow_extra_args(false);
  typical->add_option("--delta", o.delta, "Typicality parameter");
  typical->add_option("--rho-diag", o.rho_diag, "Diagonal state, comma separated")->delimiter(',')->allow_extra_args(false);

  auto* bsst = app.add_subcommand("bsst", "Per-letter coherent information of typical states");
  add_channels(bsst, true);
  add_common(bsst);
  bsst->add_option("--l", o.l_list, "Block lengths")->delimiter(',')->allow_extra_args(false);
  bsst->add_option("--rho-diag", o.rho_diag, "Diagonal state, comma separated")->delimiter(',')->allow_extra_args(false);

  auto* direct = app.add_subcommand("direct", "Direct-part code construction");
  add_channels(direct, true);
  add_common(direct);
  direct->add_option("--l", o.l_list, "Block length");
  direct->add_option("--delta", o.delta, "Typicality parameter");
  direct->add_option("--epsilon", o.epsilon, "Rate back-off");
  direct->add_option("--trials", o.trials, "Haar encoder trials");
  direct->add_option("--g-dim", o.g_dim, "Dimension of G (default: whole input space)");

  auto* verify = app.add_subcommand("verify", "Seeded inequality suite");
  add_common(verify);
  verify->add_option("--instances", o.instances, "Instances per random check (default: full suite)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    const std::size_t budget = resolve_budget(o.budget);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    if (name == "info") out = cmd_info(o);
    else if (name == "icap") out = cmd_icap(o, budget);
    else if (name == "oneshot") out = cmd_oneshot(o);
    else if (name == "typical") out = cmd_typical(o, budget);
    else if (name == "bsst") out = cmd_bsst(o, budget);
    else if (name == "direct") out = cmd_direct(o, budget);
    else out = cmd_verify(o);
    const auto t1 = std::chrono::steady_clock::now();

    out.report.command = name;
    out.report.seed = o.seed;
    out.report.parameters["budget_dim"] = budget;
    if (o.timings) out.report.timing_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    const std::string text = o.format == "csv" ? to_csv(out.rows) : canonical_json(out.report.to_json());
    if (o.out.empty())
      std::cout << text;
    else
      write_atomic(o.out, text);
    if (!out.report.assertions_ok) {
      std::cerr << "qcap " << name << ": assertion failed\n";
      return 2;
    }
    return 0;
  } catch (const std::invalid_argument& e) {  // schema, validation, dimension errors
    std::cerr << "qcap " << name << ": " << e.what() << "\n";
    return 1;
  } catch (const BudgetError& e) {
    std::cerr << "qcap " << name << ": " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "qcap " << name << ": " << e.what() << "\n";
    return 1;
  } catch (const DegenerateError& e) {
    std::cerr << "qcap " << name << ": " << e.what() << "\n";
    return 1;
  }
}
