#pragma once

// Text formats: datasets and point sets as CSV, models and optimizer
// results as JSON. Every double is written in a form that parses back to
// the same bits: 17 significant digits in CSV, shortest round-trip in JSON.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvxreg/core.hpp"
#include "cvxreg/cv.hpp"
#include "cvxreg/ensemble.hpp"
#include "cvxreg/lse.hpp"
#include "cvxreg/optimizer.hpp"
#include "cvxreg/posynomial.hpp"

namespace cvxreg {

using json = nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& text, std::size_t line, std::size_t col) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line) + ", column " + std::to_string(col + 1) +
                    ": cannot parse '" + text + "' as a finite number");
  }
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

/// Numeric table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    table.header = detail::split_fields(line);
    break;
  }
  if (table.header.empty()) throw DataError("CSV input is empty");
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != table.header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(table.header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = detail::parse_double(fields[c], lineno, c);
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// Header `x1,...,xp,y`; the last column is the response.
inline Dataset read_dataset(std::istream& in) {
  CsvTable t = read_csv(in);
  if (t.header.size() < 2) throw DataError("dataset CSV needs at least one covariate column and y");
  if (t.rows.empty()) throw DataError("dataset CSV has no observations");
  const std::size_t p = t.header.size() - 1;
  std::vector<double> x, y;
  x.reserve(p * t.rows.size());
  for (const auto& r : t.rows) {
    x.insert(x.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(p));
    y.push_back(r[p]);
  }
  return Dataset(p, std::move(x), std::move(y));
}

inline Dataset read_dataset(const std::string& path) {
  auto in = detail::open_in(path);
  return read_dataset(in);
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) out << detail::format_double(data.x(i, j)) << ',';
    out << detail::format_double(data.y(i)) << '\n';
  }
}

inline void write_dataset(const std::string& path, const Dataset& data) {
  auto out = detail::open_out(path);
  write_dataset(out, data);
}

/// Points to predict at. A trailing `y` column, if present, is ignored.
inline std::vector<std::vector<double>> read_points(std::istream& in) {
  CsvTable t = read_csv(in);
  if (t.header.back() == "y" && t.header.size() > 1) {
    for (auto& r : t.rows) r.pop_back();
  }
  return t.rows;
}

inline std::vector<std::vector<double>> read_points(const std::string& path) {
  auto in = detail::open_in(path);
  return read_points(in);
}

// ---------------------------------------------------------------------------
// Model JSON

namespace detail {

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError((where.empty() ? "/" : where) + ": missing field '" + key + "'");
  return *it;
}

inline double number_at(const json& v, const std::string& where) {
  if (!v.is_number()) throw FormatError(where + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw FormatError(where + ": number is not finite");
  return d;
}

inline std::vector<double> vector_at(const json& v, const std::string& where) {
  if (!v.is_array()) throw FormatError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number_at(v[i], where + "/" + std::to_string(i)));
  return out;
}

inline json doubles(const std::vector<double>& v) {
  json arr = json::array();
  for (double d : v) arr.push_back(d);
  return arr;
}

inline MaxAffineModel max_affine_from_json(const json& doc, const std::string& where) {
  const json& kind = field(doc, "kind", where);
  if (kind != "max_affine") throw FormatError(where + "/kind: expected \"max_affine\"");
  const json& pj = field(doc, "p", where);
  if (!pj.is_number_unsigned() || pj.get<std::size_t>() == 0) {
    throw FormatError(where + "/p: expected a positive integer");
  }
  const std::size_t p = pj.get<std::size_t>();
  const json& hs = field(doc, "hyperplanes", where);
  if (!hs.is_array() || hs.empty()) throw FormatError(where + "/hyperplanes: expected a non-empty array");
  std::vector<Hyperplane> planes;
  for (std::size_t k = 0; k < hs.size(); ++k) {
    const std::string at = where + "/hyperplanes/" + std::to_string(k);
    Hyperplane h;
    h.alpha = number_at(field(hs[k], "alpha", at), at + "/alpha");
    h.beta = vector_at(field(hs[k], "beta", at), at + "/beta");
    if (h.beta.size() != p) {
      throw FormatError(at + "/beta: has " + std::to_string(h.beta.size()) + " entries, p is " +
                        std::to_string(p));
    }
    planes.push_back(std::move(h));
  }
  return MaxAffineModel(std::move(planes));
}

inline json max_affine_to_json(const MaxAffineModel& m) {
  json hs = json::array();
  for (const auto& h : m.hyperplanes()) hs.push_back({{"alpha", h.alpha}, {"beta", doubles(h.beta)}});
  return {{"kind", "max_affine"}, {"p", m.dim()}, {"hyperplanes", std::move(hs)}};
}

}  // namespace detail

inline json to_json(const MaxAffineModel& m) { return detail::max_affine_to_json(m); }

inline json to_json(const EnsembleModel& m) {
  json members = json::array();
  for (const auto& mem : m.members()) members.push_back(detail::max_affine_to_json(mem));
  return {{"kind", "ensemble"}, {"members", std::move(members)}};
}

inline json to_json(const LseModel& m) {
  json anchors = json::array();
  for (const auto& a : m.anchors()) {
    anchors.push_back({{"x", detail::doubles(a.x)}, {"yhat", a.yhat}, {"g", detail::doubles(a.g)}});
  }
  return {{"kind", "lse"}, {"anchors", std::move(anchors)}};
}

inline json to_json(const AnyModel& m) {
  return std::visit([](const auto& v) { return to_json(v); }, m);
}

/// Errors name the offending location as a JSON pointer.
inline AnyModel model_from_json(const json& doc) {
  const json& kind = detail::field(doc, "kind", "");
  if (!kind.is_string()) throw FormatError("/kind: expected a string");
  const std::string k = kind.get<std::string>();
  try {
    if (k == "max_affine") return detail::max_affine_from_json(doc, "");
    if (k == "ensemble") {
      const json& ms = detail::field(doc, "members", "");
      if (!ms.is_array() || ms.empty()) throw FormatError("/members: expected a non-empty array");
      std::vector<MaxAffineModel> members;
      for (std::size_t m = 0; m < ms.size(); ++m) {
        members.push_back(detail::max_affine_from_json(ms[m], "/members/" + std::to_string(m)));
      }
      if (members.front().dim() == 0) throw FormatError("/members/0: empty model");
      for (std::size_t m = 1; m < members.size(); ++m) {
        if (members[m].dim() != members.front().dim()) {
          throw FormatError("/members/" + std::to_string(m) + "/p: dimension differs from /members/0/p");
        }
      }
      return EnsembleModel(std::move(members));
    }
    if (k == "lse") {
      const json& as = detail::field(doc, "anchors", "");
      if (!as.is_array() || as.empty()) throw FormatError("/anchors: expected a non-empty array");
      std::vector<Anchor> anchors;
      for (std::size_t i = 0; i < as.size(); ++i) {
        const std::string at = "/anchors/" + std::to_string(i);
        Anchor a;
        a.x = detail::vector_at(detail::field(as[i], "x", at), at + "/x");
        a.yhat = detail::number_at(detail::field(as[i], "yhat", at), at + "/yhat");
        a.g = detail::vector_at(detail::field(as[i], "g", at), at + "/g");
        if (a.x.empty() || a.g.size() != a.x.size() || (i > 0 && a.x.size() != anchors.front().x.size())) {
          throw FormatError(at + ": inconsistent dimension");
        }
        anchors.push_back(std::move(a));
      }
      return LseModel(std::move(anchors));
    }
  } catch (const DataError& e) {
    throw FormatError(std::string("invalid model: ") + e.what());
  }
  throw FormatError("/kind: unknown model kind '" + k + "'");
}

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline std::string serialize(const AnyModel& m) { return to_json(m).dump(1); }

inline AnyModel deserialize(const std::string& text) { return model_from_json(parse_json(text)); }

inline AnyModel load_model(const std::string& path) {
  auto in = detail::open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

inline void save_json(const std::string& path, const json& doc) {
  auto out = detail::open_out(path);
  out << doc.dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Posynomial export and optimizer results

inline json to_json(const PosynomialModel& pm) {
  json groups = json::array();
  for (const auto& g : pm.groups()) {
    json arr = json::array();
    for (const auto& mono : g) arr.push_back({{"c", mono.c}, {"a", detail::doubles(mono.a)}});
    groups.push_back(std::move(arr));
  }
  return {{"kind", "gen_posynomial"}, {"weight", pm.weight()}, {"groups", std::move(groups)}};
}

inline PosynomialModel posynomial_from_json(const json& doc) {
  const json& kind = detail::field(doc, "kind", "");
  if (kind != "gen_posynomial") throw FormatError("/kind: expected \"gen_posynomial\"");
  const double w = detail::number_at(detail::field(doc, "weight", ""), "/weight");
  const json& gs = detail::field(doc, "groups", "");
  if (!gs.is_array()) throw FormatError("/groups: expected an array");
  std::vector<std::vector<Monomial>> groups;
  for (std::size_t g = 0; g < gs.size(); ++g) {
    const std::string at = "/groups/" + std::to_string(g);
    if (!gs[g].is_array()) throw FormatError(at + ": expected an array");
    std::vector<Monomial> group;
    for (std::size_t k = 0; k < gs[g].size(); ++k) {
      const std::string mat = at + "/" + std::to_string(k);
      Monomial mono;
      mono.c = detail::number_at(detail::field(gs[g][k], "c", mat), mat + "/c");
      mono.a = detail::vector_at(detail::field(gs[g][k], "a", mat), mat + "/a");
      group.push_back(std::move(mono));
    }
    groups.push_back(std::move(group));
  }
  try {
    return PosynomialModel(std::move(groups), w);
  } catch (const DataError& e) {
    throw FormatError(std::string("invalid posynomial: ") + e.what());
  }
}

inline json to_json(const SolveResult& r) {
  json doc = {{"status", to_string(r.status)}, {"pivots", r.pivots}};
  if (r.status == SolveStatus::infeasible) {
    doc["x_star"] = nullptr;
    doc["value"] = nullptr;
  } else {
    doc["x_star"] = detail::doubles(r.x_star);
    doc["value"] = std::isfinite(r.value) ? json(r.value) : json(nullptr);
    doc["lp_objective"] = std::isfinite(r.lp_objective) ? json(r.lp_objective) : json(nullptr);
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Fit configuration

/// Every knob of a fit: base estimator, ensemble wrapper and LSE solver.
struct FitSettings {
  FitConfig fit;
  EnsembleConfig ensemble;
  LseOptions lse;
};

namespace detail {

inline std::size_t count_at(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) throw FormatError(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline std::uint64_t seed_at(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) throw FormatError(where + ": expected an unsigned 64-bit integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

/// Reads `{"k_max":..,"min_cell":..,...,"ensemble":{...},"lse":{...}}`.
/// Absent keys keep their defaults; unknown keys are rejected.
inline FitSettings fit_settings_from_json(const json& doc) {
  if (!doc.is_object()) throw FormatError("/: config must be an object");
  FitSettings out;
  for (const auto& [key, v] : doc.items()) {
    const std::string at = "/" + key;
    if (key == "k_max") out.fit.k_max = detail::count_at(v, at);
    else if (key == "min_cell") out.fit.min_cell = detail::count_at(v, at);
    else if (key == "max_refit_iters") out.fit.max_refit_iters = detail::count_at(v, at);
    else if (key == "cv_folds") out.fit.cv_folds = detail::count_at(v, at);
    else if (key == "seed") out.fit.seed = detail::seed_at(v, at);
    else if (key == "split_knots") out.fit.split_knots = detail::count_at(v, at);
    else if (key == "max_lloyd_iters") out.fit.max_lloyd_iters = detail::count_at(v, at);
    else if (key == "mb_restarts") out.fit.mb_restarts = detail::count_at(v, at);
    else if (key == "ensemble") {
      if (!v.is_object()) throw FormatError(at + ": expected an object");
      for (const auto& [ek, ev] : v.items()) {
        const std::string eat = at + "/" + ek;
        if (ek == "members") out.ensemble.members = detail::count_at(ev, eat);
        else if (ek == "seed") out.ensemble.seed = detail::seed_at(ev, eat);
        else if (ek == "smear_multiplier") out.ensemble.smear_multiplier = detail::number_at(ev, eat);
        else if (ek == "sigma_grid") out.ensemble.sigma_grid = detail::vector_at(ev, eat);
        else if (ek == "cv_members_per_level") out.ensemble.cv_members_per_level = detail::count_at(ev, eat);
        else if (ek == "rd_directions_per_split") out.ensemble.rd_directions_per_split = detail::count_at(ev, eat);
        else throw FormatError(eat + ": unknown setting");
      }
    } else if (key == "lse") {
      if (!v.is_object()) throw FormatError(at + ": expected an object");
      for (const auto& [lk, lv] : v.items()) {
        const std::string lat = at + "/" + lk;
        if (lk == "tol_feas") out.lse.tol_feas = detail::number_at(lv, lat);
        else if (lk == "tol_obj") out.lse.tol_obj = detail::number_at(lv, lat);
        else if (lk == "tol_kkt") out.lse.tol_kkt = detail::number_at(lv, lat);
        else if (lk == "max_iters") out.lse.max_iters = detail::count_at(lv, lat);
        else throw FormatError(lat + ": unknown setting");
      }
    } else {
      throw FormatError(at + ": unknown setting");
    }
  }
  return out;
}

inline FitSettings load_fit_settings(const std::string& path) {
  auto in = detail::open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fit_settings_from_json(parse_json(ss.str()));
}

}  // namespace cvxreg
