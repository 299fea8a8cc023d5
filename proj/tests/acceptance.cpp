// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run criteria 1..8
//   acceptance 5 6 7      run a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cvxreg/cvxreg.hpp"
#include "oracle.hpp"

using namespace cvxreg;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void progress(const std::string& line) { std::cerr << "  " << line << "\n"; }

double mean_of(const ExperimentReport& r, const std::string& method, const std::string& metric) {
  const MetricRow* row = r.find(method, metric);
  if (!row || row->ok == 0 || row->failed != 0) return std::numeric_limits<double>::quiet_NaN();
  return row->mean;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------

void synthetic_ordering(Outcome& out) {
  const double kCapLo = 0.34, kCapHi = 1.07, kSeconds = 600.0;
  ExperimentSpec s;
  s.name = ExperimentName::syn;
  s.n = 500;
  s.reps = 10;
  s.seed = 0;
  s.methods = {"cap", "bag-cap", "sm-cap", "rd"};
  const Stopwatch clock;
  const ExperimentReport r = run_experiment(s, progress);
  const double t = clock.seconds();

  const double cap = mean_of(r, "cap", "rmse");
  out.detail << "cap=" << fmt(cap);
  out.require(cap >= kCapLo && cap <= kCapHi, "cap mean rmse in [0.34, 1.07]");
  for (const std::string m : {"bag-cap", "sm-cap", "rd"}) {
    const double v = mean_of(r, m, "rmse");
    out.detail << " " << m << "=" << fmt(v);
    out.require(v < cap, m + " below cap");
  }
  out.detail << " time=" << fmt(t) << "s";
  out.require(t <= kSeconds, "runtime <= 600 s");
}

void power_magnitude(Outcome& out) {
  const double kMbMax = 0.03, kSeconds = 600.0;
  ExperimentSpec s;
  s.name = ExperimentName::power;
  s.n = 1000;
  s.reps = 10;
  s.seed = 0;
  s.methods = {"mb", "sm-mb"};
  const Stopwatch clock;
  const ExperimentReport r = run_experiment(s, progress);
  const double t = clock.seconds();

  const double mb = mean_of(r, "mb", "rmse"), sm = mean_of(r, "sm-mb", "rmse");
  out.detail << "mb=" << fmt(mb) << " sm-mb=" << fmt(sm) << " time=" << fmt(t) << "s";
  out.require(mb <= kMbMax, "mb mean rmse <= 0.03");
  out.require(sm <= mb, "sm-mb <= mb");
  out.require(t <= kSeconds, "runtime <= 600 s");
}

void optimization_quality(Outcome& out) {
  const double kSm25Max = 0.05, kSeconds = 900.0;
  ExperimentSpec s;
  s.name = ExperimentName::opt;
  s.n = 100;
  s.reps = 50;
  s.seed = 0;
  s.methods = {"mb", "sm-cap", "sm-mb", "sm25-cap", "sm25-mb", "bag-cap", "bag-mb", "rd"};
  const Stopwatch clock;
  const ExperimentReport r = run_experiment(s, progress);
  const double t = clock.seconds();

  const double mb = mean_of(r, "mb", "solution_value");
  const double sm25 = mean_of(r, "sm25-cap", "solution_value");
  out.detail << "mb=" << fmt(mb);
  out.require(sm25 <= kSm25Max, "sm25-cap mean solution value <= 0.05");
  for (std::size_t k = 1; k < s.methods.size(); ++k) {
    const double v = mean_of(r, s.methods[k], "solution_value");
    out.detail << " " << s.methods[k] << "=" << fmt(v);
    out.require(v < mb, s.methods[k] + " below mb");
  }
  out.detail << " time=" << fmt(t) << "s";
  out.require(t <= kSeconds, "runtime <= 900 s");
}

void oscillator_deviation(Outcome& out) {
  const double kSmMeanDev = 0.5, kBagMaxDev = 6.0, kSeconds = 900.0;
  ExperimentSpec s;
  s.name = ExperimentName::osc;
  s.n = 5000;
  s.reps = 50;
  s.seed = 0;
  s.members = 50;
  s.methods = {"sm-mb", "bag-mb"};
  const Stopwatch clock;
  const ExperimentReport r = run_experiment(s, progress);
  const double t = clock.seconds();

  const double sm = mean_of(r, "sm-mb", "mean_dev_pct"), bag = mean_of(r, "bag-mb", "max_dev_pct");
  out.detail << "sm-mb mean_dev=" << fmt(sm) << "% bag-mb max_dev=" << fmt(bag) << "% time=" << fmt(t) << "s";
  out.require(sm <= kSmMeanDev, "sm-mb mean deviation <= 0.5%");
  out.require(bag <= kBagMaxDev, "bag-mb max deviation <= 6%");
  out.require(t <= kSeconds, "runtime <= 900 s");
}

void lse_oracle(Outcome& out) {
  const double kRel = 1e-6, kAnalytic = 1e-8;
  const auto instances = oracle::load_lse_instances(CVXREG_TEST_DATA "/lse_oracle.txt");
  out.require(instances.size() == 100, "100 oracle instances");
  double worst = 0.0;
  std::size_t bad = 0;
  for (const auto& inst : instances) {
    const LseFit fit = fit_lse_detailed(Dataset(inst.p, inst.x, inst.y));
    const double rel = std::abs(fit.objective - inst.objective) / inst.objective;
    worst = std::max(worst, rel);
    bad += !(rel <= kRel);
  }
  out.detail << "instances=" << instances.size() << " worst_rel=" << fmt(worst);
  out.require(bad == 0, std::to_string(bad) + " instances beyond 1e-6");

  const LseFit three = fit_lse_detailed(Dataset(1, std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 1}));
  const double want[3] = {1.0 / 6.0, 2.0 / 3.0, 7.0 / 6.0};
  double err = 0.0;
  for (std::size_t i = 0; i < 3; ++i) err = std::max(err, std::abs(three.model.anchors()[i].yhat - want[i]));
  out.detail << " analytic_err=" << fmt(err);
  out.require(err <= kAnalytic, "analytic case within 1e-8");
}

void optimizer_oracle(Outcome& out) {
  const double kGrid = 2e-3, kVertex = 1e-7;
  const Box square{{-1.0, -1.0}, {1.0, 1.0}};
  Rng rng(2024);
  double worst_grid = 0.0, worst_vertex = 0.0;
  std::size_t bad = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t K = 1 + rng.index(10);
    std::vector<Hyperplane> planes(K);
    oracle::Group group;
    for (auto& h : planes) {
      h.alpha = rng.uniform(-1, 1);
      h.beta = {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
      group.push_back({h.alpha, h.beta});
    }
    const SolveResult r = minimize(MaxAffineModel(planes), square);
    if (r.status != SolveStatus::optimal) {
      ++bad;
      continue;
    }
    const double grid = oracle::grid_min_2d({group}, -1.0, 1.0, 400);
    const double vertex = oracle::vertex_enum_min({group}, {-1.0, -1.0}, {1.0, 1.0});
    worst_grid = std::max(worst_grid, std::abs(r.value - grid));
    worst_vertex = std::max(worst_vertex, std::abs(r.value - vertex));
    bad += !(std::abs(r.value - grid) <= kGrid && std::abs(r.value - vertex) <= kVertex);
  }
  out.detail << "instances=100 worst_grid=" << fmt(worst_grid) << " worst_vertex=" << fmt(worst_vertex);
  out.require(bad == 0, std::to_string(bad) + " instances out of tolerance");
}

void property_suite(Outcome& out) {
  const double kConvex = 1e-9, kRoundTrip = 1e-12;
  const Dataset syn = gen::gen_syn(200, 41);
  FitConfig cfg;
  cfg.seed = 3;
  EnsembleConfig ens;
  ens.members = 10;
  ens.cv_members_per_level = 3;
  ens.seed = 5;

  std::vector<std::pair<std::string, AnyModel>> models = {
      {"cap", fit_cap(syn, cfg)},
      {"mb", fit_mb(syn, cfg)},
      {"lse", fit_lse(gen::gen_syn(120, 42))},
      {"bag-cap", bag(syn, BaseMethod::cap, cfg, ens)},
      {"bag-mb", bag(syn, BaseMethod::mb, cfg, ens)},
      {"sm-cap", smear_cv(syn, BaseMethod::cap, cfg, ens)},
      {"sm-mb", smear_cv(syn, BaseMethod::mb, cfg, ens)},
      {"sm25-cap", smear_fixed(syn, BaseMethod::cap, cfg, ens)},
      {"sm25-mb", smear_fixed(syn, BaseMethod::mb, cfg, ens)},
      {"rd", random_directions(syn, cfg, ens)}};

  // Midpoint convexity on 10,000 random triples per model.
  std::size_t convex_bad = 0;
  for (const auto& [name, model] : models) {
    Rng rng(mix_seed(77, name.size()));
    for (int t = 0; t < 10000; ++t) {
      std::vector<double> a(5), b(5), mid(5);
      for (std::size_t j = 0; j < 5; ++j) {
        a[j] = rng.uniform(-3, 3);
        b[j] = rng.uniform(-3, 3);
        mid[j] = 0.5 * (a[j] + b[j]);
      }
      const double fa = evaluate(model, a), fb = evaluate(model, b), fm = evaluate(model, mid);
      convex_bad += !(fm <= 0.5 * (fa + fb) + kConvex * (1.0 + std::abs(fa) + std::abs(fb)));
    }
  }
  out.detail << "convexity_violations=" << convex_bad;
  out.require(convex_bad == 0, "midpoint convexity");

  // Exact serialization round trip.
  std::size_t serial_bad = 0;
  Rng prng(91);
  for (const auto& [name, model] : models) {
    const std::string text = serialize(model);
    const AnyModel back = deserialize(text);
    serial_bad += serialize(back) != text;
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(5);
      for (auto& v : x) v = prng.uniform(-3, 3);
      serial_bad += evaluate(back, x) != evaluate(model, x);
    }
  }
  out.detail << " serialization_mismatches=" << serial_bad;
  out.require(serial_bad == 0, "serialization round trip");

  // Posynomial export agrees with exp of the log-space model.
  const Dataset logpow = log_transform(gen::gen_power(300, 17));
  const std::vector<AnyModel> pmodels = {fit_mb(logpow, cfg), fit_cap(logpow, cfg),
                                         smear_cv(logpow, BaseMethod::mb, cfg, ens),
                                         bag(logpow, BaseMethod::cap, cfg, ens)};
  double worst_posy = 0.0;
  Rng xr(13);
  const auto ranges = gen::power_log_ranges();
  for (const auto& m : pmodels) {
    const PosynomialModel pm = export_posynomial(m);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> z, x;
      for (const auto& [lo, hi] : ranges) {
        z.push_back(xr.uniform(lo, hi));
        x.push_back(std::exp(z.back()));
      }
      const double want = std::exp(evaluate(m, z));
      worst_posy = std::max(worst_posy, std::abs(pm(x) - want) / want);
    }
  }
  out.detail << " posynomial_rel=" << fmt(worst_posy);
  out.require(worst_posy <= kRoundTrip, "posynomial round trip");

  // Smearing with multiplier 0 is the base estimator.
  std::size_t smear_bad = 0;
  EnsembleConfig zero = ens;
  zero.smear_multiplier = 0.0;
  for (BaseMethod base : {BaseMethod::cap, BaseMethod::mb}) {
    const EnsembleModel e = smear_fixed(syn, base, cfg, zero);
    const MaxAffineModel ref = base == BaseMethod::cap ? fit_cap(syn, cfg) : fit_mb(syn, cfg);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> x(5);
      for (auto& v : x) v = prng.normal();
      smear_bad += e(x) != ref(x);
    }
  }
  out.detail << " smear0_mismatches=" << smear_bad;
  out.require(smear_bad == 0, "smear multiplier 0 equals base");

  // Two consecutive runs give byte-identical reports.
  ExperimentSpec s;
  s.name = ExperimentName::opt;
  s.n = 60;
  s.reps = 3;
  s.seed = 8;
  s.members = 5;
  s.cv_members_per_level = 2;
  s.methods = known_methods();
  auto csv = [&] {
    std::ostringstream o;
    write_report_csv(o, run_experiment(s));
    return o.str();
  };
  const bool same = csv() == csv();
  out.detail << " reports_identical=" << (same ? "yes" : "no");
  out.require(same, "bit-identical reports");
}

void consistency_proxy(Outcome& out) {
  // Reduced ensemble sizes keep the n = 5000 replicates tractable on one core.
  ExperimentSpec s;
  s.name = ExperimentName::syn;
  s.reps = 10;
  s.seed = 0;
  s.members = 20;
  s.cv_members_per_level = 5;
  s.methods = {"bag-cap", "sm-cap", "rd"};
  const std::vector<std::size_t> sizes = {200, 1000, 5000};
  const Stopwatch clock;
  const ExperimentReport r = run_experiment(s, sizes, progress);
  const double t = clock.seconds();

  for (const auto& m : s.methods) {
    out.detail << m << "=";
    double prev = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    for (std::size_t n : sizes) {
      const MetricRow* row = r.find(m, n, "rmse");
      const double med = row && row->failed == 0 ? median(row->values) : std::numeric_limits<double>::quiet_NaN();
      out.detail << (n == sizes.front() ? "" : ">") << fmt(med);
      decreasing = decreasing && med < prev;
      prev = med;
    }
    out.detail << " ";
    out.require(decreasing, m + " median rmse strictly decreasing");
  }
  out.detail << "(M=20, 5 per level) time=" << fmt(t) << "s";
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {1, {"synthetic ordering", synthetic_ordering}},
      {2, {"power magnitude", power_magnitude}},
      {3, {"optimization quality", optimization_quality}},
      {4, {"oscillator deviation", oscillator_deviation}},
      {5, {"LSE oracle", lse_oracle}},
      {6, {"optimizer oracle", optimizer_oracle}},
      {7, {"property suite", property_suite}},
      {8, {"consistency proxy", consistency_proxy}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [id, c] : criteria) selected.insert(id);

  int failures = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome out;
    try {
      it->second.second(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    failures += !out.pass;
    std::cout << "criterion " << id << " (" << it->second.first << "): " << (out.pass ? "PASS" : "FAIL") << "  "
              << out.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
