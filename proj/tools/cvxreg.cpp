// Command-line front end: fit, predict, optimize, export-posy, bench.
// Exit codes: 0 success, 1 usage, 2 data or format error, 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cvxreg/cvxreg.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  std::size_t col = 0;
  while (std::getline(ss, tok, ',')) out.push_back(cvxreg::detail::parse_double(cvxreg::detail::trim(tok), 1, col++));
  if (out.empty()) throw cvxreg::DataError(what + " is empty");
  return out;
}

std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = cvxreg::detail::trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

// Writes to the file, or to stdout when the path is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  auto out = cvxreg::detail::open_out(path);
  fn(out);
}

struct FitArgs {
  std::string method;
  std::string ensemble;
  std::size_t members = 0;
  std::string input, config, output;
  bool log_space = false;
  bool has_seed = false;
  std::uint64_t seed = 0;
};

int run_fit(const FitArgs& a) {
  using namespace cvxreg;
  FitSettings st = a.config.empty() ? FitSettings{} : load_fit_settings(a.config);
  if (a.members != 0) st.ensemble.members = a.members;
  if (a.has_seed) {
    st.fit.seed = a.seed;
    st.ensemble.seed = a.seed;
  }
  Dataset data = read_dataset(a.input);
  if (a.log_space) data = log_transform(data);

  AnyModel model;
  if (a.ensemble.empty()) {
    if (a.method == "cap") model = fit_cap(data, st.fit);
    else if (a.method == "mb") model = fit_mb(data, st.fit);
    else model = fit_lse_detailed(data, st.lse).model;
  } else {
    if (a.method == "lse") throw DataError("ensembles are built over cap or mb, not lse");
    const BaseMethod base = a.method == "mb" ? BaseMethod::mb : BaseMethod::cap;
    if (a.ensemble == "bag") model = bag(data, base, st.fit, st.ensemble);
    else if (a.ensemble == "smear") model = smear_fixed(data, base, st.fit, st.ensemble);
    else if (a.ensemble == "smear-cv") model = smear_cv(data, base, st.fit, st.ensemble);
    else {
      if (base != BaseMethod::cap) throw DataError("random directions ensembles need --method cap");
      model = random_directions(data, st.fit, st.ensemble);
    }
  }
  emit(a.output, [&](std::ostream& out) { out << serialize(model) << '\n'; });
  return kOk;
}

int run_predict(const std::string& model_path, const std::string& input, const std::string& output) {
  using namespace cvxreg;
  const AnyModel model = load_model(model_path);
  const auto points = read_points(input);
  const std::size_t p = model_dim(model);
  emit(output, [&](std::ostream& out) {
    for (std::size_t j = 0; j < p; ++j) out << 'x' << (j + 1) << ',';
    out << "yhat\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != p) {
        throw DataError("point " + std::to_string(i) + " has " + std::to_string(points[i].size()) +
                        " coordinates, model dimension is " + std::to_string(p));
      }
      for (double v : points[i]) out << detail::format_double(v) << ',';
      out << detail::format_double(evaluate(model, points[i])) << '\n';
    }
  });
  return kOk;
}

int run_optimize(const std::string& model_path, const std::string& lower, const std::string& upper,
                 double tol, const std::string& output) {
  using namespace cvxreg;
  const AnyModel model = load_model(model_path);
  const Box box{parse_list(lower, "--lower"), parse_list(upper, "--upper")};
  const SolveResult res = minimize(model, box, tol);
  emit(output, [&](std::ostream& out) { out << to_json(res).dump(1) << '\n'; });
  switch (res.status) {
    case SolveStatus::optimal: return kOk;
    case SolveStatus::infeasible:
      std::cerr << "error: box is empty (some lower bound exceeds its upper bound)\n";
      return kData;
    case SolveStatus::numerical_failure:
      std::cerr << "error: LP solve failed numerically\n";
      return kNumerical;
  }
  return kNumerical;
}

int run_export(const std::string& model_path, const std::string& output, const std::string& listing) {
  using namespace cvxreg;
  const PosynomialModel pm = export_posynomial(load_model(model_path));
  const std::string gp = gp_constraint_listing(pm);
  json doc = to_json(pm);
  json lines = json::array();
  std::istringstream in(gp);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  doc["gp_encoding"] = std::move(lines);
  emit(output, [&](std::ostream& out) { out << doc.dump(1) << '\n'; });
  if (!listing.empty()) emit(listing, [&](std::ostream& out) { out << gp; });
  return kOk;
}

struct BenchArgs {
  std::string experiment;
  std::string sizes;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::string methods;
  std::string out;
  bool markdown = false;
  bool quiet = false;
  double noise_sd = -1.0;
  std::size_t members = 0;
  std::size_t test_size = 10000;
  std::size_t cv_members = 25;
};

int run_bench(const BenchArgs& a) {
  using namespace cvxreg;
  ExperimentSpec spec;
  spec.name = parse_experiment_name(a.experiment);
  spec.reps = a.reps;
  spec.seed = a.seed;
  spec.methods = a.methods.empty() ? known_methods() : split_ids(a.methods);
  spec.members = a.members;
  spec.test_size = a.test_size;
  spec.cv_members_per_level = a.cv_members;
  if (a.noise_sd >= 0.0) spec.noise_sd = a.noise_sd;
  std::vector<std::size_t> sizes;
  for (double v : parse_list(a.sizes, "--n")) {
    if (v < 1.0 || v != std::floor(v)) throw DataError("--n values must be positive integers");
    sizes.push_back(static_cast<std::size_t>(v));
  }

  ProgressFn progress;
  if (!a.quiet) progress = [](const std::string& line) { std::cerr << line << '\n'; };
  const ExperimentReport rep = run_experiment(spec, sizes, progress);

  if (!a.out.empty()) emit(a.out, [&](std::ostream& out) { write_report_csv(out, rep); });
  if (a.markdown) {
    write_report_markdown(std::cout, rep);
  } else if (a.out != "-") {
    write_report_text(std::cout, rep);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex piecewise-linear regression: fit, predict, optimize, export, benchmark"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a max-affine model or ensemble to a CSV dataset");
  fit_cmd->add_option("--method", fit.method, "Base estimator")->required()->check(CLI::IsMember({"cap", "mb", "lse"}));
  fit_cmd->add_option("--ensemble", fit.ensemble, "Ensemble wrapper")
      ->check(CLI::IsMember({"bag", "smear", "smear-cv", "rd"}));
  fit_cmd->add_option("--members", fit.members, "Ensemble size M")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--input", fit.input, "Dataset CSV with header x1,...,xp,y")->required();
  fit_cmd->add_option("--config", fit.config, "Fit settings JSON");
  fit_cmd->add_option("--output", fit.output, "Model JSON (default stdout)");
  fit_cmd->add_option("--seed", fit.seed, "Seed for fitting and ensembles");
  fit_cmd->add_flag("--log", fit.log_space, "Fit log y against log x (positive data, for posynomial export)");

  std::string model_path, input, output, lower, upper, listing;
  double tol = 1e-9;
  auto* pred_cmd = app.add_subcommand("predict", "Evaluate a model at the points of a CSV file");
  pred_cmd->add_option("--model", model_path, "Model JSON")->required();
  pred_cmd->add_option("--input", input, "Points CSV with header x1,...,xp")->required();
  pred_cmd->add_option("--output", output, "Predictions CSV (default stdout)");

  auto* opt_cmd = app.add_subcommand("optimize", "Minimize a model over a box");
  opt_cmd->add_option("--model", model_path, "Model JSON")->required();
  opt_cmd->add_option("--lower", lower, "Comma-separated lower bounds")->required();
  opt_cmd->add_option("--upper", upper, "Comma-separated upper bounds")->required();
  opt_cmd->add_option("--tol", tol, "Objective tolerance")->check(CLI::PositiveNumber);
  opt_cmd->add_option("--output", output, "Solution JSON (default stdout)");

  auto* posy_cmd = app.add_subcommand("export-posy", "Export a log-space model as a generalized posynomial");
  posy_cmd->add_option("--model", model_path, "Model JSON fitted with --log")->required();
  posy_cmd->add_option("--output", output, "Posynomial JSON (default stdout)");
  posy_cmd->add_option("--listing", listing, "Also write the GP constraint listing as text");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run a replicated benchmark experiment");
  bench_cmd->add_option("experiment", bench.experiment, "syn, opt, power or osc")
      ->required()
      ->check(CLI::IsMember({"syn", "opt", "power", "osc"}));
  bench_cmd->add_option("--n", bench.sizes, "Training size, or a comma-separated list")->required();
  bench_cmd->add_option("--reps", bench.reps, "Replicates (default 10 for syn/power, 50 for opt/osc)");
  bench_cmd->add_option("--seed", bench.seed, "Master seed");
  bench_cmd->add_option("--methods", bench.methods, "Comma-separated method ids (default all)");
  bench_cmd->add_option("--out", bench.out, "Report CSV path");
  bench_cmd->add_flag("--markdown", bench.markdown, "Print a markdown table to stdout");
  bench_cmd->add_flag("--quiet", bench.quiet, "No progress lines on stderr");
  bench_cmd->add_option("--noise-sd", bench.noise_sd, "Noise standard deviation for opt (default sqrt(0.1))")
      ->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--members", bench.members, "Ensemble size (default 200, 50 for osc)");
  bench_cmd->add_option("--test-size", bench.test_size, "Test draws for syn and power")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--cv-members", bench.cv_members, "Members per level in smear-cv scoring")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fit_cmd) {
      fit.has_seed = fit_cmd->count("--seed") > 0;
      return run_fit(fit);
    }
    if (*pred_cmd) return run_predict(model_path, input, output);
    if (*opt_cmd) return run_optimize(model_path, lower, upper, tol, output);
    if (*posy_cmd) return run_export(model_path, output, listing);
    if (*bench_cmd) return run_bench(bench);
  } catch (const cvxreg::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const cvxreg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
