#pragma once

// Replicated benchmark runs over the four generators, producing one
// aggregated row per (method, n, metric).

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cvxreg/cap.hpp"
#include "cvxreg/core.hpp"
#include "cvxreg/ensemble.hpp"
#include "cvxreg/generators.hpp"
#include "cvxreg/io.hpp"
#include "cvxreg/lse.hpp"
#include "cvxreg/mb.hpp"
#include "cvxreg/optimizer.hpp"
#include "cvxreg/posynomial.hpp"
#include "cvxreg/rng.hpp"

namespace cvxreg {

enum class ExperimentName { syn, opt, power, osc };

inline std::string to_string(ExperimentName e) {
  switch (e) {
    case ExperimentName::syn: return "syn";
    case ExperimentName::opt: return "opt";
    case ExperimentName::power: return "power";
    case ExperimentName::osc: return "osc";
  }
  return "unknown";
}

inline ExperimentName parse_experiment_name(const std::string& s) {
  if (s == "syn") return ExperimentName::syn;
  if (s == "opt") return ExperimentName::opt;
  if (s == "power") return ExperimentName::power;
  if (s == "osc") return ExperimentName::osc;
  throw DataError("unknown experiment '" + s + "' (expected syn, opt, power or osc)");
}

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> ids = {"cap",     "mb",      "lse",     "sm-cap", "sm-mb",
                                               "sm25-cap", "sm25-mb", "bag-cap", "bag-mb", "rd"};
  return ids;
}

struct ExperimentSpec {
  ExperimentName name = ExperimentName::syn;
  std::size_t n = 100;
  std::size_t reps = 0;  // 0 -> 10 for syn and power, 50 for opt and osc
  std::vector<std::string> methods;
  std::uint64_t seed = 0;
  std::size_t test_size = 10000;  // syn and power test draws
  std::size_t members = 0;        // 0 -> 200, or 50 for osc
  std::size_t cv_members_per_level = 25;
  double noise_sd = std::sqrt(0.1);  // opt only
  FitConfig fit;

  std::size_t resolved_reps() const {
    if (reps != 0) return reps;
    return name == ExperimentName::syn || name == ExperimentName::power ? 10 : 50;
  }
  std::size_t resolved_members() const {
    if (members != 0) return members;
    return name == ExperimentName::osc ? 50 : 200;
  }

  void validate() const {
    if (n < 10) throw DataError("experiment needs n >= 10");
    if (methods.empty()) throw DataError("experiment needs at least one method");
    for (const auto& m : methods) {
      const auto& ids = known_methods();
      if (std::find(ids.begin(), ids.end(), m) == ids.end()) {
        throw DataError("unknown method id '" + m + "'");
      }
    }
    if (test_size == 0) throw DataError("test_size must be positive");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw DataError("noise_sd must be finite and >= 0");
    if (cv_members_per_level == 0) throw DataError("cv_members_per_level must be positive");
  }
};

struct MetricRow {
  std::string method;
  std::size_t n = 0;
  std::string metric;
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::vector<double> values;  // per successful replicate, in replicate order
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<std::size_t> sizes;  // training sizes covered by rows
  std::vector<MetricRow> rows;

  const MetricRow* find(const std::string& method, const std::string& metric) const {
    for (const auto& r : rows)
      if (r.method == method && r.metric == metric) return &r;
    return nullptr;
  }
  const MetricRow* find(const std::string& method, std::size_t n, const std::string& metric) const {
    for (const auto& r : rows)
      if (r.method == method && r.n == n && r.metric == metric) return &r;
    return nullptr;
  }
};

namespace detail {

struct MethodSpec {
  std::string id;
  enum Kind { base, bag, smear_fixed, smear_cv, rd } kind = base;
  std::string base_name;  // cap | mb | lse
};

inline MethodSpec parse_method(const std::string& id) {
  MethodSpec m;
  m.id = id;
  auto suffix = [&](const std::string& prefix) { return id.substr(prefix.size()); };
  if (id == "cap" || id == "mb" || id == "lse") {
    m.base_name = id;
  } else if (id == "rd") {
    m.kind = MethodSpec::rd;
    m.base_name = "cap";
  } else if (id.rfind("bag-", 0) == 0) {
    m.kind = MethodSpec::bag;
    m.base_name = suffix("bag-");
  } else if (id.rfind("sm25-", 0) == 0) {
    m.kind = MethodSpec::smear_fixed;
    m.base_name = suffix("sm25-");
  } else if (id.rfind("sm-", 0) == 0) {
    m.kind = MethodSpec::smear_cv;
    m.base_name = suffix("sm-");
  } else {
    throw DataError("unknown method id '" + id + "'");
  }
  return m;
}

inline AnyModel fit_method(const MethodSpec& m, const Dataset& data, const FitConfig& fit_cfg,
                           const EnsembleConfig& ens) {
  const BaseMethod base = m.base_name == "mb" ? BaseMethod::mb : BaseMethod::cap;
  switch (m.kind) {
    case MethodSpec::base:
      if (m.base_name == "cap") return fit_cap(data, fit_cfg);
      if (m.base_name == "mb") return fit_mb(data, fit_cfg);
      return fit_lse(data);
    case MethodSpec::bag: return bag(data, base, fit_cfg, ens);
    case MethodSpec::smear_fixed: return smear_fixed(data, base, fit_cfg, ens);
    case MethodSpec::smear_cv: return smear_cv(data, base, fit_cfg, ens);
    case MethodSpec::rd: return random_directions(data, fit_cfg, ens);
  }
  throw DataError("unknown method id '" + m.id + "'");
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double std_error_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

/// Regular grid with `per_axis` points per coordinate over [lo_j, hi_j].
inline std::vector<double> grid_points(const std::vector<std::pair<double, double>>& ranges,
                                       std::size_t per_axis) {
  const std::size_t p = ranges.size();
  std::size_t total = 1;
  for (std::size_t j = 0; j < p; ++j) total *= per_axis;
  std::vector<double> pts(total * p);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t t = rem % per_axis;
      rem /= per_axis;
      const auto [lo, hi] = ranges[j];
      pts[i * p + j] = lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(per_axis - 1);
    }
  }
  return pts;
}

using Metrics = std::vector<std::pair<std::string, double>>;

inline Metrics metric_names(ExperimentName e) {
  switch (e) {
    case ExperimentName::syn:
    case ExperimentName::power: return {{"rmse", 0.0}};
    case ExperimentName::opt: return {{"rmse", 0.0}, {"solution_value", 0.0}};
    case ExperimentName::osc: return {{"max_dev_pct", 0.0}, {"mean_dev_pct", 0.0}};
  }
  return {};
}

/// Data and scoring for one replicate of one experiment.
class Replicate {
 public:
  Replicate(const ExperimentSpec& spec, std::uint64_t rep_seed) : spec_(spec) {
    const std::uint64_t train_seed = mix_seed(rep_seed, 0);
    const std::uint64_t test_seed = mix_seed(rep_seed, 1);
    switch (spec.name) {
      case ExperimentName::syn: {
        train_ = gen::gen_syn(spec.n, train_seed);
        Rng rng(test_seed);
        test_x_ = gen::syn_covariates(spec.test_size, rng);
        p_ = 5;
        break;
      }
      case ExperimentName::opt:
        train_ = gen::gen_opt(spec.n, train_seed, spec.noise_sd);
        test_x_ = grid_points({{-1.0, 1.0}, {-1.0, 1.0}}, 101);
        p_ = 2;
        break;
      case ExperimentName::power: {
        raw_ = gen::gen_power(spec.n, train_seed);
        train_ = log_transform(raw_);
        test_x_ = gen::gen_power(spec.test_size, test_seed).covariates();
        p_ = 2;
        break;
      }
      case ExperimentName::osc: {
        raw_ = gen::gen_osc(spec.n, train_seed);
        train_ = log_transform(raw_);
        test_x_ = grid_points(gen::osc_log_ranges(), 21);
        for (auto& v : test_x_) v = std::exp(v);
        p_ = 3;
        break;
      }
    }
    truth_.resize(test_x_.size() / p_);
    for (std::size_t i = 0; i < truth_.size(); ++i) truth_[i] = f_true({&test_x_[i * p_], p_});
  }

  const Dataset& train() const { return train_; }

  Metrics score(const AnyModel& model) const {
    const std::size_t m = truth_.size();
    switch (spec_.name) {
      case ExperimentName::syn:
      case ExperimentName::opt: {
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double r = evaluate(model, {&test_x_[i * p_], p_}) - truth_[i];
          ss += r * r;
        }
        Metrics out{{"rmse", std::sqrt(ss / static_cast<double>(m))}};
        if (spec_.name == ExperimentName::opt) {
          const SolveResult sol = minimize(model, gen::opt_box());
          if (sol.status != SolveStatus::optimal) {
            throw NumericalError("optimizer returned status " + to_string(sol.status));
          }
          out.emplace_back("solution_value", gen::f_opt(sol.x_star));
        }
        return out;
      }
      case ExperimentName::power: {
        const PosynomialModel pm = export_posynomial(model);
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double r = pm({&test_x_[i * p_], p_}) - truth_[i];
          ss += r * r;
        }
        return {{"rmse", std::sqrt(ss / static_cast<double>(m))}};
      }
      case ExperimentName::osc: {
        const PosynomialModel pm = export_posynomial(model);
        double sum = 0.0, worst = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double dev = 100.0 * std::abs(pm({&test_x_[i * p_], p_}) - truth_[i]) / truth_[i];
          sum += dev;
          worst = std::max(worst, dev);
        }
        return {{"max_dev_pct", worst}, {"mean_dev_pct", sum / static_cast<double>(m)}};
      }
    }
    return {};
  }

 private:
  double f_true(std::span<const double> x) const {
    switch (spec_.name) {
      case ExperimentName::syn: return gen::f_syn(x);
      case ExperimentName::opt: return gen::f_opt(x);
      case ExperimentName::power: return gen::f_power(x);
      case ExperimentName::osc: return gen::f_osc(x);
    }
    return 0.0;
  }

  const ExperimentSpec& spec_;
  Dataset raw_, train_;
  std::vector<double> test_x_;
  std::vector<double> truth_;
  std::size_t p_ = 0;
};

}  // namespace detail

/// Called after every (replicate, method) fit with a short status line.
using ProgressFn = std::function<void(const std::string&)>;

inline ExperimentReport run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {}) {
  spec.validate();
  std::vector<detail::MethodSpec> methods;
  for (const auto& id : spec.methods) methods.push_back(detail::parse_method(id));

  const auto names = detail::metric_names(spec.name);
  std::map<std::pair<std::string, std::string>, MetricRow> acc;
  for (const auto& m : methods) {
    for (const auto& [metric, unused] : names) {
      MetricRow row;
      row.method = m.id;
      row.n = spec.n;
      row.metric = metric;
      acc.emplace(std::make_pair(m.id, metric), std::move(row));
    }
  }

  const std::size_t reps = spec.resolved_reps();
  for (std::size_t r = 0; r < reps; ++r) {
    const std::uint64_t rep_seed = mix_seed(spec.seed, r);
    const detail::Replicate rep(spec, rep_seed);
    for (const auto& m : methods) {
      const std::uint64_t method_seed = mix_seed(rep_seed, hash_name(m.id));
      FitConfig fit_cfg = spec.fit;
      fit_cfg.seed = method_seed;
      EnsembleConfig ens;
      ens.members = spec.resolved_members();
      ens.seed = mix_seed(method_seed, 0xE5);
      ens.cv_members_per_level = spec.cv_members_per_level;
      std::string status = "ok";
      try {
        const AnyModel model = detail::fit_method(m, rep.train(), fit_cfg, ens);
        for (const auto& [metric, value] : rep.score(model)) {
          auto& row = acc.at({m.id, metric});
          row.values.push_back(value);
          ++row.ok;
        }
      } catch (const Error& e) {
        for (const auto& [metric, unused] : names) ++acc.at({m.id, metric}).failed;
        status = std::string("failed: ") + e.what();
      }
      if (progress) {
        progress(to_string(spec.name) + " n=" + std::to_string(spec.n) + " rep " + std::to_string(r + 1) +
                 "/" + std::to_string(reps) + " " + m.id + " " + status);
      }
    }
  }

  ExperimentReport report;
  report.spec = spec;
  report.sizes = {spec.n};
  for (auto& [key, row] : acc) {
    if (row.values.empty()) {
      row.mean = std::numeric_limits<double>::quiet_NaN();
      row.std_err = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.mean = detail::mean_of(row.values);
      row.std_err = detail::std_error_of(row.values);
    }
    report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.method, a.n, a.metric) < std::tie(b.method, b.n, b.metric);
  });
  return report;
}

/// One run per training size, rows merged and re-sorted.
inline ExperimentReport run_experiment(ExperimentSpec spec, const std::vector<std::size_t>& sizes,
                                       const ProgressFn& progress = {}) {
  if (sizes.empty()) throw DataError("no training sizes given");
  for (std::size_t n : sizes) {
    spec.n = n;
    spec.validate();
  }
  ExperimentReport merged;
  for (std::size_t n : sizes) {
    spec.n = n;
    ExperimentReport part = run_experiment(spec, progress);
    if (merged.sizes.empty()) merged.spec = part.spec;
    merged.sizes.push_back(n);
    for (auto& r : part.rows) merged.rows.push_back(std::move(r));
  }
  std::stable_sort(merged.rows.begin(), merged.rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.method, a.n, a.metric) < std::tie(b.method, b.n, b.metric);
  });
  return merged;
}

// ---------------------------------------------------------------------------
// Report formatting

namespace detail {

inline std::vector<std::string> report_metadata(const ExperimentSpec& s, const std::vector<std::size_t>& sizes) {
  std::vector<std::string> meta;
  std::string ns;
  for (std::size_t n : sizes) ns += (ns.empty() ? "" : ",") + std::to_string(n);
  meta.push_back("experiment=" + to_string(s.name) + " n=" + ns +
                 " reps=" + std::to_string(s.resolved_reps()) + " seed=" + std::to_string(s.seed) +
                 " members=" + std::to_string(s.resolved_members()));
  switch (s.name) {
    case ExperimentName::syn: meta.push_back("test set: " + std::to_string(s.test_size) + " draws of N5(0,I)"); break;
    case ExperimentName::opt:
      meta.push_back("rmse on a 101x101 grid over [-1,1]^2; solution_value = f_true(x_hat); noise_sd=" +
                     format_double(s.noise_sd));
      break;
    case ExperimentName::power:
      meta.push_back("fit in log space; rmse in original units on " + std::to_string(s.test_size) + " draws");
      break;
    case ExperimentName::osc: meta.push_back("percentage deviations on a 21^3 grid in log space"); break;
  }
  return meta;
}

inline std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

}  // namespace detail

/// Machine-readable CSV; metadata lines start with '#'.
inline void write_report_csv(std::ostream& out, const ExperimentReport& rep) {
  for (const auto& m : detail::report_metadata(rep.spec, rep.sizes)) out << "# " << m << '\n';
  out << "experiment,method,n,metric,mean,std_err,reps_ok,reps_failed\n";
  for (const auto& r : rep.rows) {
    out << to_string(rep.spec.name) << ',' << r.method << ',' << r.n << ',' << r.metric << ','
        << detail::cell(r.mean) << ',' << detail::cell(r.std_err) << ',' << r.ok << ',' << r.failed << '\n';
  }
}

inline void write_report_text(std::ostream& out, const ExperimentReport& rep) {
  std::vector<std::vector<std::string>> cells = {{"method", "n", "metric", "mean", "std_err", "ok", "failed"}};
  for (const auto& r : rep.rows) {
    std::ostringstream mean, se;
    mean << std::setprecision(6) << r.mean;
    se << std::setprecision(6) << r.std_err;
    cells.push_back({r.method, std::to_string(r.n), r.metric, mean.str(), se.str(), std::to_string(r.ok),
                     std::to_string(r.failed)});
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  for (const auto& m : detail::report_metadata(rep.spec, rep.sizes)) out << "# " << m << '\n';
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      if (c < 3) {
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    out << '\n';
  }
}

/// Markdown table: one row per (method, n), one column per metric, cells "mean ± se".
inline void write_report_markdown(std::ostream& out, const ExperimentReport& rep) {
  std::vector<std::string> metrics;
  for (const auto& [m, unused] : detail::metric_names(rep.spec.name)) metrics.push_back(m);
  out << "| Method | n |";
  for (const auto& m : metrics) out << ' ' << m << " |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < metrics.size(); ++i) out << "---|";
  out << '\n';
  std::vector<std::pair<std::string, std::size_t>> seen;
  for (const auto& r : rep.rows) {
    if (std::find(seen.begin(), seen.end(), std::make_pair(r.method, r.n)) != seen.end()) continue;
    seen.emplace_back(r.method, r.n);
    out << "| " << r.method << " | " << r.n << " |";
    for (const auto& m : metrics) {
      const MetricRow* row = rep.find(r.method, r.n, m);
      std::ostringstream c;
      c << std::fixed << std::setprecision(3) << row->mean << " ± " << row->std_err;
      out << ' ' << c.str() << " |";
    }
    out << '\n';
  }
}

}  // namespace cvxreg
