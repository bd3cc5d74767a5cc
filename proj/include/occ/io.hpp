#pragma once

// Problem files, JSON/CSV serialization of results, and the on-disk
// tabulation cache.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "occ/analysis.hpp"
#include "occ/concavify.hpp"
#include "occ/described.hpp"
#include "occ/model.hpp"

namespace occ::io {

using nlohmann::json;

/// Rounds to 9 significant digits so printed output is stable.
inline double sig9(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  const double r = std::strtod(buf, nullptr);
  return r == 0.0 ? 0.0 : r;  // no negative zero
}

inline std::string fmt9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", sig9(x));
  return buf;
}

namespace detail {

inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InputError("unknown key '" + key + "' in " + where);
  }
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InputError("missing key '" + std::string(key) + "' in " + where);
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw InputError(where + " must be a number");
  return j.get<double>();
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number(x, where));
  return out;
}

inline MoneyUtility::Kind money_kind(const std::string& s) {
  if (s == "sqrt") return MoneyUtility::Kind::sqrt;
  if (s == "linear") return MoneyUtility::Kind::linear;
  if (s == "cara") return MoneyUtility::Kind::cara;
  if (s == "scaled") return MoneyUtility::Kind::scaled;
  throw InputError("unknown u_tilde kind '" + s + "'");
}

inline const char* money_kind_name(MoneyUtility::Kind k) {
  switch (k) {
    case MoneyUtility::Kind::sqrt: return "sqrt";
    case MoneyUtility::Kind::linear: return "linear";
    case MoneyUtility::Kind::cara: return "cara";
    case MoneyUtility::Kind::scaled: return "scaled";
  }
  return "?";
}

}  // namespace detail

/// Builtin general payoffs. `quadratic_payment_cost`: v = b_s [q = 1] - tau_s x^2.
inline PrincipalPayoff builtin_payoff(const std::string& name, std::vector<double> b, std::vector<double> tau) {
  if (name == "quadratic_payment_cost") {
    auto p = PrincipalPayoff::general(name, [b, tau](double, std::size_t q, double x, std::size_t s) {
      return (q == 1 ? b[s] : 0.0) - tau[s] * x * x;
    });
    p.b = std::move(b);
    p.tau = std::move(tau);
    return p;
  }
  throw InputError("unknown general payoff '" + name + "'");
}

inline Problem parse_problem(const json& j) {
  using detail::number;
  using detail::numbers;
  using detail::require;
  detail::only_keys(j, {"states", "population", "utility", "payoff", "output", "actions", "payments",
                        "reservation_utility"},
                    "problem");
  Problem p;

  const auto& states = require(j, "states", "problem");
  if (!states.is_array()) throw InputError("states must be an array of strings");
  std::vector<std::string> labels;
  for (const auto& s : states) {
    if (!s.is_string()) throw InputError("states must be an array of strings");
    labels.push_back(s.get<std::string>());
  }
  p.states = StateSpace(std::move(labels));
  p.population = Composition::normalized(numbers(require(j, "population", "problem"), "population"), 1e-9);

  const auto& util = require(j, "utility", "problem");
  detail::only_keys(util, {"h", "u_tilde", "cost"}, "utility");
  if (util.contains("h") && util.at("h") != "identity") throw InputError("utility.h must be \"identity\"");
  const auto& ut = require(util, "u_tilde", "utility");
  detail::only_keys(ut, {"kind", "rho", "base"}, "utility.u_tilde");
  const auto& kind = require(ut, "kind", "utility.u_tilde");
  if (!kind.is_string()) throw InputError("utility.u_tilde.kind must be a string");
  p.utility.money.kind = detail::money_kind(kind.get<std::string>());
  const bool has_rho = p.utility.money.kind == MoneyUtility::Kind::cara || p.utility.money.kind == MoneyUtility::Kind::scaled;
  if (has_rho) p.utility.money.rho = number(require(ut, "rho", "utility.u_tilde"), "utility.u_tilde.rho");
  if (ut.contains("base")) {
    if (p.utility.money.kind != MoneyUtility::Kind::scaled) throw InputError("u_tilde.base is only valid for scaled");
    if (!ut.at("base").is_string()) throw InputError("utility.u_tilde.base must be a string");
    p.utility.money.base = detail::money_kind(ut.at("base").get<std::string>());
  }
  if (util.contains("cost")) {
    const auto& cost = util.at("cost");
    detail::only_keys(cost, {"kind", "coef"}, "utility.cost");
    if (require(cost, "kind", "utility.cost") != "quadratic") throw InputError("utility.cost.kind must be \"quadratic\"");
    if (cost.contains("coef")) p.utility.cost.coef = number(cost.at("coef"), "utility.cost.coef");
  }

  const auto& payoff = require(j, "payoff", "problem");
  detail::only_keys(payoff, {"kind", "b", "tau", "name"}, "payoff");
  const auto& pk = require(payoff, "kind", "payoff");
  if (pk == "ride_hailing") {
    if (payoff.contains("name")) throw InputError("unknown key 'name' in ride_hailing payoff");
    p.payoff = PrincipalPayoff::ride_hailing(numbers(require(payoff, "b", "payoff"), "payoff.b"),
                                             numbers(require(payoff, "tau", "payoff"), "payoff.tau"));
  } else if (pk == "general") {
    const auto& name = require(payoff, "name", "payoff");
    if (!name.is_string()) throw InputError("payoff.name must be a string");
    p.payoff = builtin_payoff(name.get<std::string>(), numbers(require(payoff, "b", "payoff"), "payoff.b"),
                              numbers(require(payoff, "tau", "payoff"), "payoff.tau"));
    if (p.payoff.b.size() != p.states.size() || p.payoff.tau.size() != p.states.size())
      throw InputError("payoff b and tau must have one entry per state");
  } else {
    throw InputError("payoff.kind must be \"ride_hailing\" or \"general\"");
  }

  if (j.contains("output")) {
    const auto& out = j.at("output");
    detail::only_keys(out, {"kind"}, "output");
    if (require(out, "kind", "output") != "binary_rate") throw InputError("output.kind must be \"binary_rate\"");
  }
  if (j.contains("actions")) {
    detail::only_keys(j.at("actions"), {"max"}, "actions");
    p.actions.upper = number(require(j.at("actions"), "max", "actions"), "actions.max");
  }
  if (j.contains("payments")) {
    detail::only_keys(j.at("payments"), {"max"}, "payments");
    p.x_max = number(require(j.at("payments"), "max", "payments"), "payments.max");
  }
  if (j.contains("reservation_utility")) p.reservation_utility = number(j.at("reservation_utility"), "reservation_utility");
  p.validate();
  return p;
}

inline Problem parse_problem(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
  return parse_problem(j);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json problem_to_json(const Problem& p) {
  json j;
  j["states"] = p.states.labels();
  j["population"] = std::vector<double>(p.population.weights().begin(), p.population.weights().end());
  json ut{{"kind", detail::money_kind_name(p.utility.money.kind)}};
  if (p.utility.money.kind == MoneyUtility::Kind::cara || p.utility.money.kind == MoneyUtility::Kind::scaled)
    ut["rho"] = p.utility.money.rho;
  if (p.utility.money.kind == MoneyUtility::Kind::scaled) ut["base"] = detail::money_kind_name(p.utility.money.base);
  j["utility"] = {{"h", "identity"}, {"u_tilde", ut}, {"cost", {{"kind", "quadratic"}, {"coef", p.utility.cost.coef}}}};
  if (p.payoff.kind == PrincipalPayoff::Kind::ride_hailing)
    j["payoff"] = {{"kind", "ride_hailing"}, {"b", p.payoff.b}, {"tau", p.payoff.tau}};
  else
    j["payoff"] = {{"kind", "general"}, {"name", p.payoff.name}, {"b", p.payoff.b}, {"tau", p.payoff.tau}};
  j["output"] = {{"kind", "binary_rate"}};
  j["actions"] = {{"max", p.actions.upper}};
  j["payments"] = {{"max", p.x_max}};
  if (p.reservation_utility != 0.0) j["reservation_utility"] = p.reservation_utility;
  return j;
}

inline json to_json(const CoarseSolution& s, const Problem& p) {
  json payments = json::object();
  for (std::size_t q = 0; q < s.payments.size(); ++q) {
    json row = json::object();
    for (std::size_t st = 0; st < s.payments[q].size(); ++st) row[p.states.label(st)] = sig9(s.payments[q][st]);
    payments[p.output.labels[q]] = row;
  }
  return {{"payments", payments},          {"action", sig9(s.action)},
          {"principal_value", sig9(s.principal_value)}, {"agent_value", sig9(s.agent_value)},
          {"ir_slack", sig9(s.ir_slack)},  {"feasible", s.feasible}};
}

inline json to_json(const DescribedContract& dc, const Problem& p) {
  json contracts = json::array();
  for (std::size_t k = 0; k < dc.size(); ++k) {
    json comm = json::object(), real = json::object();
    for (std::size_t q = 0; q < p.num_outputs(); ++q) {
      json atoms = json::array();
      for (const auto& a : dc.communicated[k].lotteries[q].atoms()) atoms.push_back({sig9(a.payment), sig9(a.probability)});
      comm[p.output.labels[q]] = atoms;
      json row = json::object();
      for (std::size_t s = 0; s < p.num_states(); ++s) row[p.states.label(s)] = sig9(dc.realized[k].payment(q, s));
      real[p.output.labels[q]] = row;
    }
    contracts.push_back({{"label", dc.communicated[k].label}, {"communicated", comm}, {"realized", real}});
  }
  json sorting = json::array();
  for (const auto& row : dc.sorting.rows()) {
    json r = json::array();
    for (double m : row) r.push_back(sig9(m));
    sorting.push_back(r);
  }
  return {{"contracts", contracts}, {"sorting", sorting}};
}

inline DescribedContract described_from_json(const json& j, const Problem& p) {
  detail::only_keys(j, {"contracts", "sorting"}, "described contract");
  DescribedContract dc;
  const auto& contracts = detail::require(j, "contracts", "described contract");
  if (!contracts.is_array()) throw InputError("contracts must be an array");
  for (const auto& c : contracts) {
    detail::only_keys(c, {"label", "communicated", "realized"}, "contract");
    const auto label = detail::require(c, "label", "contract").get<std::size_t>();
    CommunicatedContract comm{label, {}};
    RealizedContract real{label, std::vector<std::vector<double>>(p.num_outputs(), std::vector<double>(p.num_states()))};
    for (std::size_t q = 0; q < p.num_outputs(); ++q) {
      const auto& ql = p.output.labels[q];
      std::vector<LotteryAtom> atoms;
      for (const auto& a : detail::require(detail::require(c, "communicated", "contract"), ql.c_str(), "communicated"))
        atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
      comm.lotteries.emplace_back(std::move(atoms));
      const auto& row = detail::require(detail::require(c, "realized", "contract"), ql.c_str(), "realized");
      for (std::size_t s = 0; s < p.num_states(); ++s)
        real.payments[q][s] = detail::number(detail::require(row, p.states.label(s).c_str(), "realized"), "payment");
    }
    dc.communicated.push_back(std::move(comm));
    dc.realized.push_back(std::move(real));
  }
  std::vector<std::vector<double>> rows;
  for (const auto& r : detail::require(j, "sorting", "described contract")) rows.push_back(detail::numbers(r, "sorting"));
  dc.sorting = SortingFunction(std::move(rows), 1e-8);
  return dc;
}

inline json to_json(const Decomposition& dec) {
  json out = json::array();
  for (const auto& e : dec.entries) {
    json w = json::array();
    for (double x : e.composition.weights()) w.push_back(sig9(x));
    out.push_back({{"weight", sig9(e.weight)}, {"composition", w}});
  }
  return out;
}

inline json to_json(const ClosureReport& r) {
  json f = json::array();
  for (double x : r.f.weights()) f.push_back(sig9(x));
  return {{"f", f},
          {"V", sig9(r.V)},
          {"Vbar", sig9(r.Vbar)},
          {"VT", sig9(r.VT)},
          {"U", sig9(r.U)},
          {"Utilde", sig9(r.Utilde)},
          {"UT", sig9(r.UT)},
          {"value_of_opacity", sig9(r.value_of_opacity)},
          {"welfare_increase", sig9(r.welfare_increase)},
          {"verdict", to_string(r.verdict)},
          {"decomposition", to_json(r.decomposition)}};
}

inline std::string to_csv(const std::vector<ClosureReport>& reports) {
  if (reports.empty()) return "";
  std::string out;
  for (std::size_t s = 0; s < reports.front().f.size(); ++s) out += "f_" + std::to_string(s) + ",";
  out += "V,Vbar,VT,U,Utilde,UT,opacity,welfare_gain,verdict\n";
  for (const auto& r : reports) {
    for (double x : r.f.weights()) out += fmt9(x) + ",";
    for (double x : {r.V, r.Vbar, r.VT, r.U, r.Utilde, r.UT, r.value_of_opacity, r.welfare_increase})
      out += fmt9(x) + ",";
    out += std::string(to_string(r.verdict)) + "\n";
  }
  return out;
}

inline json to_json(const ConvexityClassification& c, const TabulatedFunction& tab) {
  auto witness = [&](const std::optional<CurvatureWitness>& w) -> json {
    if (!w) return nullptr;
    json point = json::array();
    for (double x : tab.grid.point(w->grid_index).weights()) point.push_back(sig9(x));
    return {{"point", point},
            {"direction", {w->plus_state, w->minus_state}},
            {"second_difference", sig9(w->second_difference)}};
  };
  return {{"verdict", to_string(c.verdict)},
          {"lines_checked", c.lines_checked},
          {"concave_witness", witness(c.concave_witness)},
          {"convex_witness", witness(c.convex_witness)}};
}

inline json to_json(const OrthogonalClosure& o, const Problem& p) {
  auto blocks = [&](const Blocks& b) {
    json out = json::array();
    for (const auto& block : b) {
      json names = json::array();
      for (auto s : block) names.push_back(p.states.label(s));
      out.push_back(names);
    }
    return out;
  };
  json all = json::array();
  for (const auto& pv : o.partitions) all.push_back({{"blocks", blocks(pv.blocks)}, {"value", sig9(pv.value)}});
  return {{"value", sig9(o.value)}, {"best", {{"blocks", blocks(o.best.blocks)}, {"value", sig9(o.best.value)}}},
          {"partitions", all}};
}

// ---------------------------------------------------------------------------
// Tabulation cache: CSV `w_0,...,w_{n-1},V,U`, one row per grid point.

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string cache_key(std::string_view problem_bytes, std::size_t resolution, std::string_view extra = {}) {
  std::string material(problem_bytes);
  material += "\x1fgrid=" + std::to_string(resolution);
  material += "\x1f";
  material += extra;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(material)));
  return buf;
}

inline std::string tabulation_csv(const TabulatedFunction& tab) {
  std::string out;
  for (std::size_t s = 0; s < tab.num_states(); ++s) out += "w_" + std::to_string(s) + ",";
  out += "V,U\n";
  char buf[40];
  for (std::size_t i = 0; i < tab.size(); ++i) {
    for (double w : tab.grid.point(i).weights()) {
      std::snprintf(buf, sizeof buf, "%.17g,", w);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,", tab.principal_values[i]);
    out += buf;
    std::snprintf(buf, sizeof buf, "%.17g\n", tab.agent_values[i]);
    out += buf;
  }
  return out;
}

/// Parses a cached tabulation; returns nullopt if it does not match the grid.
inline std::optional<TabulatedFunction> parse_tabulation_csv(const std::string& text, std::size_t num_states,
                                                             std::size_t resolution) {
  TabulatedFunction tab;
  tab.grid = SimplexGrid(num_states, resolution);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= tab.size()) return std::nullopt;
    std::vector<double> fields;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) fields.push_back(std::strtod(cell.c_str(), nullptr));
    if (fields.size() != num_states + 2) return std::nullopt;
    for (std::size_t s = 0; s < num_states; ++s)
      if (std::abs(fields[s] - tab.grid.point(i)[s]) > 1e-15) return std::nullopt;
    tab.principal_values.push_back(fields[num_states]);
    tab.agent_values.push_back(fields[num_states + 1]);
    ++i;
  }
  if (i != tab.size()) return std::nullopt;
  return tab;
}

/// Tabulates through the cache directory when one is given.
inline TabulatedFunction cached_tabulate(const Problem& problem, std::size_t resolution, const std::string& key,
                                         const std::optional<std::filesystem::path>& dir) {
  if (dir) {
    const auto path = *dir / ("tab_" + key + ".csv");
    if (std::filesystem::exists(path))
      if (auto tab = parse_tabulation_csv(read_file(path), problem.num_states(), resolution)) return *tab;
  }
  auto tab = tabulate(problem, resolution);
  if (dir) {
    std::filesystem::create_directories(*dir);
    const auto path = *dir / ("tab_" + key + ".csv");
    const auto tmp = *dir / ("tab_" + key + ".csv.tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      out << tabulation_csv(tab);
    }
    std::filesystem::rename(tmp, path);
  }
  return tab;
}

}  // namespace occ::io
