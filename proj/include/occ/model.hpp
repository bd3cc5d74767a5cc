#pragma once

// Domain types for the described-contracts moral hazard model: states,
// populations, utility and payoff primitives, lotteries, and the three
// pieces of a described contract (communicated contracts, realized
// contracts, sorting function).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace occ {

/// Malformed or contract-violating input.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a valid answer.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kWeightSumTol = 1e-12;
inline constexpr double kLotteryMergeTol = 1e-9;
inline constexpr double kLotteryProbTol = 1e-9;

class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw InputError("state space must be nonempty");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_)
      if (!seen.insert(l).second) throw InputError("duplicate state label '" + l + "'");
  }

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t s) const { return labels_.at(s); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::size_t index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw InputError("unknown state label '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

 private:
  std::vector<std::string> labels_;
};

/// A point of the probability simplex over states.
class Composition {
 public:
  Composition() = default;
  explicit Composition(std::vector<double> weights, double tol = kWeightSumTol)
      : weights_(std::move(weights)) {
    if (weights_.empty()) throw InputError("composition must have at least one weight");
    double sum = 0.0;
    for (double w : weights_) {
      if (!std::isfinite(w) || w < 0.0) throw InputError("composition weights must be finite and nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > tol)
      throw InputError("composition weights sum to " + std::to_string(sum) + ", expected 1");
  }

  /// Accepts weights whose sum is within `tol` of one and rescales them.
  static Composition normalized(std::vector<double> weights, double tol = 1e-9) {
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (weights.empty() || !(std::abs(sum - 1.0) <= tol))
      throw InputError("composition weights must sum to 1 (got " + std::to_string(sum) + ")");
    for (double& w : weights) {
      if (!(w >= 0.0)) throw InputError("composition weights must be nonnegative");
      w /= sum;
    }
    return Composition(std::move(weights));
  }

  static Composition vertex(std::size_t n, std::size_t s) {
    std::vector<double> w(n, 0.0);
    w.at(s) = 1.0;
    return Composition(std::move(w));
  }

  static Composition uniform(std::size_t n) { return Composition(std::vector<double>(n, 1.0 / static_cast<double>(n)), 1e-9); }

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t s) const { return weights_[s]; }
  std::span<const double> weights() const { return weights_; }

  /// Index of the state holding all the mass, if this is a vertex.
  std::optional<std::size_t> vertex_index(double tol = 1e-12) const {
    for (std::size_t s = 0; s < weights_.size(); ++s)
      if (weights_[s] >= 1.0 - tol) return s;
    return std::nullopt;
  }

  double distance(const Composition& other) const {
    double d = 0.0;
    for (std::size_t s = 0; s < size(); ++s) d = std::max(d, std::abs(weights_[s] - other.weights_.at(s)));
    return d;
  }

 private:
  std::vector<double> weights_;
};

struct ActionInterval {
  double upper = 4.0;

  void validate() const {
    if (!std::isfinite(upper) || upper < 0.0) throw InputError("action upper bound must be finite and >= 0");
  }
  double lower() const { return 0.0; }
  bool contains(double a) const { return a >= 0.0 && a <= upper; }
};

/// Output technology. `binary_rate` has outputs {0,1} with the expected
/// rate of output 1 equal to the action; `table` supplies pi(q|a).
struct OutputModel {
  enum class Kind { binary_rate, table };

  Kind kind = Kind::binary_rate;
  std::vector<std::string> labels{"0", "1"};
  std::function<std::vector<double>(double)> probabilities;  // table kind only

  static OutputModel binary_rate() { return {}; }

  static OutputModel table(std::vector<std::string> labels, std::function<std::vector<double>(double)> pi) {
    OutputModel m;
    m.kind = Kind::table;
    m.labels = std::move(labels);
    m.probabilities = std::move(pi);
    return m;
  }

  std::size_t size() const { return labels.size(); }
  bool is_binary() const { return kind == Kind::binary_rate; }

  void validate(const ActionInterval& actions) const {
    if (kind == Kind::binary_rate) {
      if (labels.size() != 2) throw InputError("binary_rate output model needs exactly two outputs");
      return;
    }
    if (labels.empty() || !probabilities) throw InputError("table output model needs labels and pi(q|a)");
    for (int i = 0; i <= 20; ++i) {
      const double a = actions.upper * i / 20.0;
      const auto p = probabilities(a);
      if (p.size() != labels.size()) throw InputError("pi(q|a) has wrong length");
      double sum = 0.0;
      for (double x : p) {
        if (!(x >= 0.0)) throw InputError("pi(q|a) must be nonnegative");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw InputError("pi(q|a) must sum to 1");
    }
  }
};

/// Money utility u~(x). `scaled` evaluates base(rho * x).
struct MoneyUtility {
  enum class Kind { sqrt, linear, cara, scaled };

  Kind kind = Kind::sqrt;
  double rho = 1.0;
  Kind base = Kind::cara;  // scaled kind only; CARA base uses unit risk aversion

  static MoneyUtility square_root() { return {Kind::sqrt, 1.0, Kind::cara}; }
  static MoneyUtility linear() { return {Kind::linear, 1.0, Kind::cara}; }
  static MoneyUtility cara(double rho) { return {Kind::cara, rho, Kind::cara}; }
  static MoneyUtility scaled(double rho, Kind base = Kind::cara) { return {Kind::scaled, rho, base}; }

  double operator()(double x) const {
    switch (kind) {
      case Kind::sqrt: return std::sqrt(std::max(x, 0.0));
      case Kind::linear: return x;
      case Kind::cara: return -std::expm1(-rho * x);
      case Kind::scaled: return MoneyUtility{base, 1.0, Kind::cara}(rho * x);
    }
    return 0.0;
  }

  void validate(double x_max) const {
    if (kind == Kind::cara || kind == Kind::scaled)
      if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("risk-aversion parameter rho must be positive");
    if (kind == Kind::scaled && base == Kind::scaled) throw InputError("scaled utility cannot have a scaled base");
    // Sampled monotonicity and concavity on [0, x_max].
    constexpr int n = 256;
    const double h = x_max / n;
    if (h <= 0.0) return;
    double prev_slope = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double lo = (*this)(i * h), hi = (*this)((i + 1) * h);
      const double slope = (hi - lo) / h;
      if (slope < -1e-12) throw InputError("money utility must be increasing");
      if (slope > prev_slope + 1e-9 * std::max(1.0, std::abs(prev_slope)))
        throw InputError("money utility must be concave");
      prev_slope = slope;
    }
  }
};

struct QuadraticCost {
  double coef = 0.5;
  double operator()(double a) const { return coef * a * a; }
};

/// u(a, x) = h(a) u~(x) - c(a). An empty multiplier means h(a) = a.
struct UtilityFamily {
  std::function<double(double)> multiplier;
  MoneyUtility money;
  QuadraticCost cost;

  bool identity_multiplier() const { return !multiplier; }
  double h(double a) const { return multiplier ? multiplier(a) : a; }

  void validate(const ActionInterval& actions, double x_max) const {
    money.validate(x_max);
    if (!(cost.coef >= 0.0) || !std::isfinite(cost.coef)) throw InputError("effort cost coefficient must be >= 0");
    if (multiplier) {
      for (int i = 1; i <= 20; ++i) {
        const double v = multiplier(actions.upper * i / 20.0);
        if (!(v > 0.0) || !std::isfinite(v)) throw InputError("action multiplier must be positive on (0, a_max]");
      }
    }
  }
};

/// Principal's per-output payoff v(a, q, x, s) for an agent in state s
/// who produced output q and was paid x.
struct PrincipalPayoff {
  enum class Kind { ride_hailing, general };

  Kind kind = Kind::ride_hailing;
  std::vector<double> b;    // revenue per unit of output 1
  std::vector<double> tau;  // effective cost per unit of payment
  std::string name;         // general kind: builtin identifier
  std::function<double(double, std::size_t, double, std::size_t)> v;

  static PrincipalPayoff ride_hailing(std::vector<double> b, std::vector<double> tau) {
    PrincipalPayoff p;
    p.b = std::move(b);
    p.tau = std::move(tau);
    return p;
  }

  static PrincipalPayoff general(std::string name, std::function<double(double, std::size_t, double, std::size_t)> v) {
    PrincipalPayoff p;
    p.kind = Kind::general;
    p.name = std::move(name);
    p.v = std::move(v);
    return p;
  }

  double operator()(double a, std::size_t q, double x, std::size_t s) const {
    if (kind == Kind::ride_hailing) return (q == 1 ? b[s] : 0.0) - tau[s] * x;
    return v(a, q, x, s);
  }

  void validate(std::size_t states) const {
    if (kind == Kind::ride_hailing) {
      if (b.size() != states || tau.size() != states) throw InputError("payoff b and tau must have one entry per state");
      for (std::size_t s = 0; s < states; ++s)
        if (!(b[s] > 0.0) || !(tau[s] > 0.0)) throw InputError("payoff b and tau must be positive");
    } else if (!v) {
      throw InputError("general payoff needs a function");
    }
  }
};

struct Problem {
  StateSpace states;
  Composition population;
  UtilityFamily utility;
  PrincipalPayoff payoff;
  OutputModel output;
  ActionInterval actions;
  double x_max = 16.0;
  double reservation_utility = 0.0;

  std::size_t num_states() const { return states.size(); }
  std::size_t num_outputs() const { return output.size(); }

  void validate() const {
    if (population.size() != states.size()) throw InputError("population length must equal the number of states");
    if (!(x_max >= 0.0) || !std::isfinite(x_max)) throw InputError("payment bound x_max must be >= 0");
    actions.validate();
    output.validate(actions);
    utility.validate(actions, x_max);
    payoff.validate(states.size());
  }
};

struct LotteryAtom {
  double payment = 0.0;
  double probability = 0.0;
};

class PaymentLottery {
 public:
  PaymentLottery() = default;
  explicit PaymentLottery(std::vector<LotteryAtom> atoms, double merge_tol = kLotteryMergeTol)
      : atoms_(merge(std::move(atoms), merge_tol)) {}

  static PaymentLottery degenerate(double x) { return PaymentLottery({{x, 1.0}}); }

  std::span<const LotteryAtom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }

  double total_probability() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.probability;
    return s;
  }

  template <typename F>
  double expect(F&& fn) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.probability * fn(a.payment);
    return s;
  }

  void validate(double x_max) const {
    for (const auto& a : atoms_) {
      if (!(a.probability >= 0.0)) throw InputError("lottery probabilities must be nonnegative");
      if (!(a.payment >= -kLotteryMergeTol && a.payment <= x_max + kLotteryMergeTol))
        throw InputError("lottery payment outside [0, x_max]");
    }
    if (std::abs(total_probability() - 1.0) > kWeightSumTol)
      throw InputError("lottery probabilities must sum to 1");
  }

 private:
  // Sorted by payment; atoms within `tol` of the running atom are pooled.
  static std::vector<LotteryAtom> merge(std::vector<LotteryAtom> atoms, double tol) {
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const LotteryAtom& l, const LotteryAtom& r) { return l.payment < r.payment; });
    std::vector<LotteryAtom> out;
    for (const auto& a : atoms) {
      if (a.probability == 0.0) continue;
      if (!out.empty() && a.payment - out.back().payment <= tol)
        out.back().probability += a.probability;
      else
        out.push_back(a);
    }
    return out;
  }

  std::vector<LotteryAtom> atoms_;
};

/// Largest per-atom probability gap after matching payments within `payment_tol`.
inline double lottery_distance(const PaymentLottery& lhs, const PaymentLottery& rhs,
                               double payment_tol = kLotteryMergeTol) {
  auto l = lhs.atoms();
  auto r = rhs.atoms();
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < l.size() || j < r.size()) {
    if (j == r.size() || (i < l.size() && l[i].payment < r[j].payment - payment_tol)) {
      worst = std::max(worst, l[i++].probability);
    } else if (i == l.size() || r[j].payment < l[i].payment - payment_tol) {
      worst = std::max(worst, r[j++].probability);
    } else {
      worst = std::max(worst, std::abs(l[i++].probability - r[j++].probability));
    }
  }
  return worst;
}

struct CommunicatedContract {
  std::size_t label = 0;
  std::vector<PaymentLottery> lotteries;  // one per output
};

struct RealizedContract {
  std::size_t label = 0;
  std::vector<std::vector<double>> payments;  // [output][state]

  double payment(std::size_t q, std::size_t s) const { return payments[q][s]; }
};

/// mu[s][k]: probability that a state-s agent is assigned contract k.
class SortingFunction {
 public:
  SortingFunction() = default;
  explicit SortingFunction(std::vector<std::vector<double>> rows, double tol = kWeightSumTol) : rows_(std::move(rows)) {
    if (rows_.empty()) throw InputError("sorting function needs one row per state");
    const std::size_t k = rows_.front().size();
    for (const auto& row : rows_) {
      if (row.size() != k || k == 0) throw InputError("sorting rows must have equal, nonzero length");
      double sum = 0.0;
      for (double m : row) {
        if (!(m >= 0.0)) throw InputError("sorting probabilities must be nonnegative");
        sum += m;
      }
      if (std::abs(sum - 1.0) > tol) throw InputError("sorting row does not sum to 1");
    }
  }

  static SortingFunction identity(std::size_t n) {
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < n; ++s) rows[s][s] = 1.0;
    return SortingFunction(std::move(rows));
  }

  static SortingFunction pooled(std::size_t n) { return SortingFunction(std::vector<std::vector<double>>(n, {1.0})); }

  std::size_t num_states() const { return rows_.size(); }
  std::size_t num_contracts() const { return rows_.empty() ? 0 : rows_.front().size(); }
  double operator()(std::size_t s, std::size_t k) const { return rows_[s][k]; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  /// Population mass sum_s f(s) mu_s(k) assigned to contract k.
  double mass(const Composition& f, std::size_t k) const {
    double m = 0.0;
    for (std::size_t s = 0; s < rows_.size(); ++s) m += f[s] * rows_[s][k];
    return m;
  }

 private:
  std::vector<std::vector<double>> rows_;
};

struct DescribedContract {
  std::vector<CommunicatedContract> communicated;
  std::vector<RealizedContract> realized;
  SortingFunction sorting;

  std::size_t size() const { return communicated.size(); }

  std::size_t position_of(std::size_t label) const {
    for (std::size_t i = 0; i < communicated.size(); ++i)
      if (communicated[i].label == label) return i;
    throw InputError("unknown contract label " + std::to_string(label));
  }

  void validate(const Composition& f, std::size_t num_outputs) const {
    if (communicated.size() != realized.size() || communicated.empty())
      throw InputError("described contract needs matching, nonempty communicated and realized contracts");
    std::unordered_set<std::size_t> labels;
    for (std::size_t i = 0; i < communicated.size(); ++i) {
      if (communicated[i].label != realized[i].label) throw InputError("communicated/realized labels disagree");
      if (!labels.insert(communicated[i].label).second) throw InputError("duplicate contract label");
      if (communicated[i].lotteries.size() != num_outputs) throw InputError("need one lottery per output");
      if (realized[i].payments.size() != num_outputs) throw InputError("need one payment row per output");
      for (const auto& row : realized[i].payments)
        if (row.size() != f.size()) throw InputError("realized payments need one entry per state");
    }
    if (sorting.num_contracts() != communicated.size() || sorting.num_states() != f.size())
      throw InputError("sorting dimensions do not match the contract");
    for (std::size_t k = 0; k < communicated.size(); ++k)
      if (!(sorting.mass(f, k) > 0.0))
        throw InputError("contract " + std::to_string(communicated[k].label) + " receives zero mass");
  }
};

/// Distribution of realized payments at output q among agents holding contract k.
inline PaymentLottery observed_outcome_distribution(const DescribedContract& dc, const Composition& f,
                                                    std::size_t label, std::size_t q) {
  const std::size_t k = dc.position_of(label);
  const double mass = dc.sorting.mass(f, k);
  if (!(mass > 0.0)) throw InputError("contract " + std::to_string(label) + " receives zero mass");
  const auto& realized = dc.realized[k];
  std::vector<LotteryAtom> atoms;
  for (std::size_t s = 0; s < f.size(); ++s) {
    const double w = dc.sorting(s, k) * f[s] / mass;
    if (w > 0.0) atoms.push_back({realized.payment(q, s), w});
  }
  return PaymentLottery(std::move(atoms));
}

struct ConsistencyReport {
  bool consistent = true;
  std::vector<std::vector<double>> deviation;  // [contract position][output]

  double max_deviation() const {
    double d = 0.0;
    for (const auto& row : deviation)
      for (double x : row) d = std::max(d, x);
    return d;
  }
};

inline ConsistencyReport check_consistency(const DescribedContract& dc, const Composition& f) {
  ConsistencyReport report;
  for (std::size_t k = 0; k < dc.size(); ++k) {
    const auto& comm = dc.communicated[k];
    std::vector<double> row;
    for (std::size_t q = 0; q < comm.lotteries.size(); ++q) {
      const auto observed = observed_outcome_distribution(dc, f, comm.label, q);
      const PaymentLottery announced(std::vector<LotteryAtom>(comm.lotteries[q].atoms().begin(),
                                                              comm.lotteries[q].atoms().end()));
      const double d = lottery_distance(observed, announced);
      row.push_back(d);
      if (d > kLotteryProbTol) report.consistent = false;
    }
    report.deviation.push_back(std::move(row));
  }
  return report;
}

enum class ContractClass { transparent, fully_coarse, opaque_non_coarse };

inline const char* to_string(ContractClass c) {
  switch (c) {
    case ContractClass::transparent: return "transparent";
    case ContractClass::fully_coarse: return "fully_coarse";
    case ContractClass::opaque_non_coarse: return "opaque_non_coarse";
  }
  return "?";
}

inline ContractClass classify_contract(const DescribedContract& dc, double tol = 1e-12) {
  const auto& mu = dc.sorting;
  const std::size_t n = mu.num_states(), k = mu.num_contracts();
  if (n == k) {
    std::vector<bool> used(k, false);
    bool bijective = true;
    for (std::size_t s = 0; s < n && bijective; ++s) {
      std::optional<std::size_t> target;
      for (std::size_t j = 0; j < k; ++j) {
        if (mu(s, j) >= 1.0 - tol) target = j;
        else if (mu(s, j) > tol) bijective = false;
      }
      if (!target || used[*target]) bijective = false;
      else used[*target] = true;
    }
    if (bijective) return ContractClass::transparent;
  }
  if (k == 1) return ContractClass::fully_coarse;
  return ContractClass::opaque_non_coarse;
}

}  // namespace occ
