// occ: command-line front end for the opaque-contract toolkit.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "occ/occ.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kVerifyFailed = 2, kNumeric = 3 };

struct Options {
  std::string problem_path;
  std::size_t grid = 0;
  std::string f;
  std::string out;
  std::string format = "json";
  std::string rho_values;
  std::optional<double> x_max;
  std::optional<double> a_max;
  bool no_cache = false;
  std::string figure;
  bool vary_other_state = false;
};

struct Loaded {
  occ::Problem problem;
  std::string bytes;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end == item.c_str() || *end != '\0') throw occ::InputError(std::string("bad number in ") + what);
    out.push_back(v);
  }
  if (out.empty()) throw occ::InputError(std::string(what) + " is empty");
  return out;
}

Loaded load(const Options& o) {
  Loaded l;
  l.bytes = occ::io::read_file(o.problem_path);
  l.problem = occ::io::parse_problem(l.bytes);
  if (o.x_max) l.problem.x_max = *o.x_max;
  if (o.a_max) l.problem.actions.upper = *o.a_max;
  l.problem.validate();
  return l;
}

occ::Composition query(const Options& o, const occ::Problem& p) {
  if (o.f.empty()) return p.population;
  auto w = parse_list(o.f, "--f");
  if (w.size() != p.num_states()) throw occ::InputError("--f must have one weight per state");
  return occ::Composition::normalized(std::move(w), 1e-9);
}

std::size_t resolution(const Options& o, const occ::Problem& p) {
  return o.grid ? o.grid : occ::default_resolution(p.num_states());
}

std::optional<std::filesystem::path> cache_dir(const Options& o) {
  if (o.no_cache) return std::nullopt;
  const char* dir = std::getenv("OCC_CACHE_DIR");
  if (!dir || !*dir) return std::nullopt;
  return std::filesystem::path(dir);
}

std::string overrides_tag(const occ::Problem& p) {
  return "x_max=" + occ::io::fmt9(p.x_max) + ";a_max=" + occ::io::fmt9(p.actions.upper);
}

occ::TabulatedFunction tabulation(const Options& o, const Loaded& l, std::size_t res, const std::string& extra = "") {
  const auto key = occ::io::cache_key(l.bytes, res, overrides_tag(l.problem) + extra);
  return occ::io::cached_tabulate(l.problem, res, key, cache_dir(o));
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw occ::InputError("cannot write " + o.out);
  out << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void require_json(const Options& o) {
  if (o.format != "json") throw occ::InputError("this command only supports --format json");
}

int cmd_solve_coarse(const Options& o) {
  require_json(o);
  const auto l = load(o);
  const auto sol = occ::solve_coarse(l.problem, query(o, l.problem));
  emit(o, dump(occ::io::to_json(sol, l.problem)));
  return kOk;
}

int cmd_concavify(const Options& o) {
  const auto l = load(o);
  const auto tab = tabulation(o, l, resolution(o, l.problem));
  const auto report = occ::closure_report(l.problem, tab, query(o, l.problem));
  emit(o, o.format == "csv" ? occ::io::to_csv({report}) : dump(occ::io::to_json(report)));
  return kOk;
}

int cmd_describe(const Options& o) {
  require_json(o);
  const auto l = load(o);
  const auto f = query(o, l.problem);
  const auto tab = tabulation(o, l, resolution(o, l.problem));
  const auto closure = occ::concave_closure(tab, f);
  const auto dec = occ::merge_duplicates(closure.decomposition);
  const auto dc = occ::assemble_described(l.problem, f, dec);
  const auto consistency = occ::check_consistency(dc, f);
  const auto value = occ::evaluate_described(l.problem, dc, f);
  nlohmann::json j;
  j["contract"] = occ::io::to_json(dc, l.problem);
  j["class"] = occ::to_string(occ::classify_contract(dc));
  j["consistency"] = {{"consistent", consistency.consistent},
                      {"max_deviation", occ::io::sig9(consistency.max_deviation())}};
  j["principal_value"] = occ::io::sig9(value.principal);
  j["welfare"] = occ::io::sig9(value.welfare);
  j["Vbar"] = occ::io::sig9(closure.value);
  emit(o, dump(j));
  return kOk;
}

int cmd_classify(const Options& o) {
  require_json(o);
  const auto l = load(o);
  const auto tab = tabulation(o, l, resolution(o, l.problem));
  emit(o, dump(occ::io::to_json(occ::convexity_classification(tab), tab)));
  return kOk;
}

int cmd_sweep_rho(const Options& o) {
  const auto l = load(o);
  const auto kind = l.problem.utility.money.kind;
  if (kind != occ::MoneyUtility::Kind::cara && kind != occ::MoneyUtility::Kind::scaled)
    throw occ::InputError("sweep-rho needs a cara or scaled utility");
  const auto rhos = o.rho_values.empty() ? std::vector<double>{0.25, 0.5, 1, 2, 4, 8, 16}
                                         : parse_list(o.rho_values, "--rho-values");
  for (std::size_t i = 0; i < rhos.size(); ++i)
    if (!(rhos[i] > 0) || (i > 0 && !(rhos[i] > rhos[i - 1])))
      throw occ::InputError("--rho-values must be positive and ascending");
  const std::size_t res = o.grid ? o.grid : 201;
  const auto f = query(o, l.problem);
  std::vector<occ::SweepPoint> points;
  for (double rho : rhos) {
    Loaded at = l;
    at.problem.utility.money.rho = rho;
    at.problem.validate();
    const auto tab = tabulation(o, at, res, ";rho=" + occ::io::fmt9(rho));
    const double vbar = occ::concave_closure(tab, f).value;
    const double vt = occ::extremal_closure(tab, f).principal;
    points.push_back({rho, vbar, vt, vbar - vt});
  }
  if (o.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : points)
      j.push_back({{"rho", occ::io::sig9(p.rho)},
                   {"Vbar", occ::io::sig9(p.Vbar)},
                   {"VT", occ::io::sig9(p.VT)},
                   {"value_of_opacity", occ::io::sig9(p.value_of_opacity)}});
    emit(o, dump(j));
  } else {
    std::string csv = "rho,Vbar,VT,value_of_opacity\n";
    for (const auto& p : points)
      csv += occ::io::fmt9(p.rho) + "," + occ::io::fmt9(p.Vbar) + "," + occ::io::fmt9(p.VT) + "," +
             occ::io::fmt9(p.value_of_opacity) + "\n";
    emit(o, csv);
  }
  return kOk;
}

int cmd_figure(const Options& o) {
  occ::ridehailing::FigureSpec spec;
  if (o.figure == "fig2-left")
    spec = occ::ridehailing::FigureSpec::left();
  else if (o.figure == "fig2-right")
    spec = occ::ridehailing::FigureSpec::right();
  else
    throw occ::InputError("figure preset must be fig2-left or fig2-right");
  if (o.grid) spec.resolution = o.grid;
  spec.vary_other_state = o.vary_other_state;
  emit(o, occ::ridehailing::figure_data(spec).to_csv());
  return kOk;
}

int cmd_verify(const Options& o) {
  const auto checks = occ::ridehailing::verify_published_examples();
  nlohmann::json j = nlohmann::json::array();
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.passed();
    j.push_back({{"check", c.name},
                 {"expected", occ::io::sig9(c.expected)},
                 {"actual", occ::io::sig9(c.actual)},
                 {"tolerance", c.tolerance},
                 {"passed", c.passed()}});
  }
  emit(o, dump({{"passed", ok}, {"checks", j}}));
  return ok ? kOk : kVerifyFailed;
}

int cmd_orthogonal(const Options& o) {
  require_json(o);
  const auto l = load(o);
  emit(o, dump(occ::io::to_json(occ::orthogonal_closure(l.problem, query(o, l.problem)), l.problem)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Opaque contracts: coarse solver, concave closure, described contracts"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool needs_problem) {
    if (needs_problem) sub->add_option("problem", o.problem_path, "problem JSON file")->required();
    sub->add_option("--out", o.out, "write output to PATH instead of stdout");
    sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  };
  auto problem_flags = [&](CLI::App* sub) {
    sub->add_option("--f", o.f, "query composition w0,w1,...");
    sub->add_option("--x-max", o.x_max, "payment upper bound");
    sub->add_option("--a-max", o.a_max, "action upper bound");
  };
  auto grid_flags = [&](CLI::App* sub) {
    sub->add_option("--grid", o.grid, "grid resolution")->check(CLI::PositiveNumber);
    sub->add_flag("--no-cache", o.no_cache, "ignore OCC_CACHE_DIR");
  };

  auto* solve = app.add_subcommand("solve-coarse", "optimal pooled contract at f");
  common(solve, true);
  problem_flags(solve);
  auto* concav = app.add_subcommand("concavify", "closure report at f");
  common(concav, true);
  problem_flags(concav);
  grid_flags(concav);
  auto* describe = app.add_subcommand("describe", "optimal described contract at f");
  common(describe, true);
  problem_flags(describe);
  grid_flags(describe);
  auto* classify = app.add_subcommand("classify", "convexity classification of V");
  common(classify, true);
  problem_flags(classify);
  grid_flags(classify);
  auto* sweep = app.add_subcommand("sweep-rho", "value of opacity across risk aversion");
  common(sweep, true);
  problem_flags(sweep);
  grid_flags(sweep);
  sweep->add_option("--rho-values", o.rho_values, "ascending list a,b,c");
  o.format = "json";
  auto* figure = app.add_subcommand("figure", "ride-hailing value function columns");
  figure->add_option("preset", o.figure, "fig2-left or fig2-right")->required();
  figure->add_option("--out", o.out, "write output to PATH instead of stdout");
  figure->add_option("--grid", o.grid, "number of alpha points")->check(CLI::PositiveNumber);
  figure->add_flag("--vary-low", o.vary_other_state, "vary the low-demand state's parameter instead");
  auto* verify = app.add_subcommand("verify", "reproduce the published two-division numbers");
  verify->add_option("--out", o.out, "write output to PATH instead of stdout");
  auto* ortho = app.add_subcommand("orthogonal", "best state partition into pooled contracts");
  common(ortho, true);
  problem_flags(ortho);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "occ: " << e.what() << "\n";
    return kUsage;
  }
  // sweep-rho defaults to CSV unless the user asked for JSON explicitly.
  if (sweep->parsed() && sweep->count("--format") == 0) o.format = "csv";

  try {
    if (solve->parsed()) return cmd_solve_coarse(o);
    if (concav->parsed()) return cmd_concavify(o);
    if (describe->parsed()) return cmd_describe(o);
    if (classify->parsed()) return cmd_classify(o);
    if (sweep->parsed()) return cmd_sweep_rho(o);
    if (figure->parsed()) return cmd_figure(o);
    if (verify->parsed()) return cmd_verify(o);
    if (ortho->parsed()) return cmd_orthogonal(o);
  } catch (const occ::InputError& e) {
    std::cerr << "occ: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "occ: " << e.what() << "\n";
    return kUsage;
  } catch (const occ::NumericError& e) {
    std::cerr << "occ: numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "occ: " << e.what() << "\n";
    return kNumeric;
  }
  return kUsage;
}
