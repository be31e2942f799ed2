#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "scalar.hpp"

namespace projsum {

using Json = nlohmann::json;

/// Reads a number given either as a JSON number or as a "p/q" / decimal
/// string.  JSON numbers are taken at their shortest round-trip decimal.
template <Scalar T>
T scalar_from_json(const Json& j, const std::string& where) {
  try {
    if (j.is_string()) {
      const Rational r = parse_rational(j.get<std::string>());
      if constexpr (is_exact_v<T>)
        return r;
      else
        return to_double(r);
    }
    if (j.is_number_integer()) return make_scalar<T>(j.get<long long>());
    if (j.is_number()) {
      const double d = j.get<double>();
      if constexpr (is_exact_v<T>)
        return parse_rational(to_string(d));
      else
        return d;
    }
  } catch (const Error& e) {
    fail(ErrorCode::Parse, where + ": " + e.what());
  }
  fail(ErrorCode::Parse, where + ": expected a number or a rational string");
}

template <Scalar T>
Json scalar_to_json(const T& x) {
  if constexpr (is_exact_v<T>)
    return to_string(x);
  else
    return x;
}

inline Side side_from_json(const Json& j, const std::string& where) {
  if (!j.is_string()) fail(ErrorCode::Parse, where + ": expected \"excess\" or \"defect\"");
  const auto s = j.get<std::string>();
  if (s == "excess") return Side::Excess;
  if (s == "defect") return Side::Defect;
  fail(ErrorCode::Parse, where + ": unknown side '" + s + "'");
}

inline FactorType factor_from_string(const std::string& s) {
  if (s == "type1" || s == "I") return FactorType::TypeI;
  if (s == "type2" || s == "II") return FactorType::TypeII;
  if (s == "type3" || s == "III") return FactorType::TypeIII;
  fail(ErrorCode::Parse, "unknown factor type '" + s + "'");
}

template <Scalar T>
TailSpec<T> tail_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::Parse, where + ": tail must be an object");
  if (!j.contains("kind")) fail(ErrorCode::Parse, where + ": missing \"kind\"");
  const auto kind = j.at("kind").get<std::string>();
  const Side side = j.contains("side") ? side_from_json(j.at("side"), where + ".side") : Side::Excess;
  auto field = [&](const char* name) -> T {
    if (!j.contains(name)) fail(ErrorCode::Parse, where + ": " + kind + " tail needs \"" + name + "\"");
    return scalar_from_json<T>(j.at(name), where + "." + name);
  };
  TailSpec<T> t;
  if (kind == "geometric") {
    t = TailSpec<T>::geometric(side, field("first"), field("ratio"));
    if (j.contains("sum")) t.declared_sum = scalar_from_json<T>(j.at("sum"), where + ".sum");
  } else if (kind == "harmonic") {
    t = TailSpec<T>::harmonic(side, field("scale"));
    if (j.contains("sum")) t.declared_sum = scalar_from_json<T>(j.at("sum"), where + ".sum");
  } else if (kind == "periodic") {
    if (!j.contains("pattern") || !j.at("pattern").is_array()) fail(ErrorCode::Parse, where + ": periodic tail needs a \"pattern\" array");
    std::vector<T> pattern;
    for (std::size_t i = 0; i < j.at("pattern").size(); ++i)
      pattern.push_back(scalar_from_json<T>(j.at("pattern")[i], where + ".pattern[" + std::to_string(i) + "]"));
    t = TailSpec<T>::periodic(side, pattern);
  } else {
    fail(ErrorCode::Parse, where + ": unknown tail kind '" + kind + "'");
  }
  return t;
}

template <Scalar T>
Json tail_to_json(const TailSpec<T>& t) {
  Json j{{"kind", t.kind_name()}, {"side", to_string(t.side)}};
  switch (t.kind) {
    case TailSpec<T>::Kind::Geometric:
      j["first"] = scalar_to_json(t.first);
      j["ratio"] = scalar_to_json(t.ratio);
      break;
    case TailSpec<T>::Kind::Harmonic: j["scale"] = scalar_to_json(t.scale); break;
    case TailSpec<T>::Kind::Periodic: {
      auto& p = j["pattern"] = Json::array();
      for (const auto& x : t.pattern) p.push_back(scalar_to_json(x));
      break;
    }
  }
  if (t.declared_sum) j["sum"] = scalar_to_json(*t.declared_sum);
  return j;
}

/// {"mode": "type1"|"type2", "entries": [{"value": "3/2", "mult": 2}], "tail": {...}}
/// "tails" (an array) is accepted alongside "tail".
template <Scalar T>
Spectrum<T> spectrum_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::Parse, "spectrum: top level must be an object");
  for (const auto& [key, value] : j.items())
    if (key != "mode" && key != "entries" && key != "tail" && key != "tails") fail(ErrorCode::Parse, "spectrum: unknown key \"" + key + "\"");
  Spectrum<T> s;
  if (j.contains("mode")) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "type1")
      s.mode = SpectrumMode::TypeI;
    else if (mode == "type2")
      s.mode = SpectrumMode::TypeII;
    else
      fail(ErrorCode::Parse, "mode: expected \"type1\" or \"type2\", got '" + mode + "'");
  }
  if (j.contains("entries")) {
    const auto& es = j.at("entries");
    if (!es.is_array()) fail(ErrorCode::Parse, "entries: expected an array");
    for (std::size_t i = 0; i < es.size(); ++i) {
      const std::string where = "entries[" + std::to_string(i) + "]";
      if (!es[i].is_object() || !es[i].contains("value")) fail(ErrorCode::Parse, where + ": needs a \"value\"");
      const T value = scalar_from_json<T>(es[i].at("value"), where + ".value");
      const T mult = es[i].contains("mult") ? scalar_from_json<T>(es[i].at("mult"), where + ".mult") : make_scalar<T>(1);
      s.entries.push_back({value, mult});
    }
  }
  if (j.contains("tail")) s.tails.push_back(tail_from_json<T>(j.at("tail"), "tail"));
  if (j.contains("tails")) {
    const auto& ts = j.at("tails");
    if (!ts.is_array()) fail(ErrorCode::Parse, "tails: expected an array");
    for (std::size_t i = 0; i < ts.size(); ++i) s.tails.push_back(tail_from_json<T>(ts[i], "tails[" + std::to_string(i) + "]"));
  }
  s.validate();
  return s;
}

template <Scalar T>
Json spectrum_to_json(const Spectrum<T>& s) {
  Json j;
  j["mode"] = s.mode == SpectrumMode::TypeI ? "type1" : "type2";
  auto& es = j["entries"] = Json::array();
  for (const auto& e : s.entries) es.push_back({{"value", scalar_to_json(e.value)}, {"mult", scalar_to_json(e.multiplicity)}});
  if (!s.tails.empty()) {
    auto& ts = j["tails"] = Json::array();
    for (const auto& t : s.tails) ts.push_back(tail_to_json(t));
  }
  return j;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Parse, path + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::Parse, path + ": " + e.what());
  }
}

template <Scalar T>
Spectrum<T> load_spectrum(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    return spectrum_from_json<T>(j);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, path + ": " + e.what());
  }
}

inline Json vector_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json matrix_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

inline Vec vector_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorCode::Parse, where + ": expected an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = scalar_from_json<double>(j[i], where);
  return v;
}

inline Mat matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorCode::Parse, where + ": expected an array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec row = vector_from_json(j[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
    if (row.size() != n) fail(ErrorCode::Parse, where + ": matrix must be square");
    m.row(i) = row.transpose();
  }
  return m;
}

/// Contents of a decomposition file, reduced to matrices.
struct DecompositionFile {
  Mat target;
  std::vector<Mat> projections;
  std::optional<Mat> remainder;  // sum of all weighted leftover terms
};

inline DecompositionFile decomposition_from_json(const Json& j) {
  DecompositionFile d;
  if (!j.contains("target")) fail(ErrorCode::Parse, "decomposition: missing \"target\"");
  const auto& t = j.at("target");
  if (t.contains("diagonal")) {
    Vec diag = vector_from_json(t.at("diagonal"), "target.diagonal");
    d.target = diag.asDiagonal();
  } else if (t.contains("matrix")) {
    d.target = matrix_from_json(t.at("matrix"), "target.matrix");
  } else {
    fail(ErrorCode::Parse, "target: needs \"diagonal\" or \"matrix\"");
  }
  const auto dim = d.target.rows();
  auto check_dim = [&](Eigen::Index n, const std::string& where) {
    if (n != dim) fail(ErrorCode::Parse, where + ": dimension " + std::to_string(n) + " does not match target " + std::to_string(dim));
  };
  if (j.contains("projections")) {
    const auto& ps = j.at("projections");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string where = "projections[" + std::to_string(i) + "]";
      if (ps[i].contains("vector")) {
        Vec v = vector_from_json(ps[i].at("vector"), where + ".vector");
        check_dim(v.size(), where);
        d.projections.push_back(v * v.transpose());
      } else if (ps[i].contains("matrix")) {
        Mat m = matrix_from_json(ps[i].at("matrix"), where + ".matrix");
        check_dim(m.rows(), where);
        d.projections.push_back(m);
      } else {
        fail(ErrorCode::Parse, where + ": needs \"vector\" or \"matrix\"");
      }
    }
  }
  auto add_remainder = [&](const Json& r, const std::string& where) {
    if (!r.contains("coeff") || !r.contains("vector")) fail(ErrorCode::Parse, where + ": needs \"coeff\" and \"vector\"");
    const double c = scalar_from_json<double>(r.at("coeff"), where + ".coeff");
    Vec v = vector_from_json(r.at("vector"), where + ".vector");
    check_dim(v.size(), where);
    if (!d.remainder) d.remainder = Mat::Zero(dim, dim);
    *d.remainder += c * v * v.transpose();
  };
  if (j.contains("remainder") && !j.at("remainder").is_null()) add_remainder(j.at("remainder"), "remainder");
  if (j.contains("remainders"))
    for (std::size_t i = 0; i < j.at("remainders").size(); ++i)
      add_remainder(j.at("remainders")[i], "remainders[" + std::to_string(i) + "]");
  return d;
}

}  // namespace projsum
