#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "projsum/projsum.hpp"

using namespace projsum;

namespace {

struct RunConfig {
  std::string input;
  std::string mode = "exact";
  std::size_t steps = 40;
  std::size_t blocks = 3;
  double tol = kFloatTol;
  std::string out;
  std::string format = "json";
  std::string factor;
  std::string kind = "lemma41";
  unsigned long long seed = 1;
  int count = 200;
  long long size = 0;
};

template <Scalar T>
Mat diag_matrix_of(const std::vector<T>& d) {
  std::vector<double> x;
  for (const auto& v : d) x.push_back(to_double(v));
  return diagonal_matrix(x);
}

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(cfg.out);
  if (!f) fail(ErrorCode::InvalidArgument, "cannot write " + cfg.out);
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

void emit_json(const RunConfig& cfg, const Json& j) {
  if (cfg.format != "json") fail(ErrorCode::InvalidArgument, "this subcommand only writes json");
  emit(cfg, j.dump(2));
}

const char* reason_text(InfeasibleReason r) {
  switch (r) {
    case InfeasibleReason::None: return "";
    case InfeasibleReason::DefectExceedsExcess: return "Tr(A-) > Tr(A+)";
    case InfeasibleReason::NonIntegerGap: return "Tr(A+) - Tr(A-) is not an integer";
    case InfeasibleReason::DefectTraceInfinite: return "Tr(A-) is infinite while Tr(A+) is finite";
    case InfeasibleReason::NormAtMostOneNotProjection: return "‖A‖ ≤ 1 and not a projection";
  }
  return "";
}

FactorType default_factor(const RunConfig& cfg, SpectrumMode mode) {
  if (!cfg.factor.empty()) return factor_from_string(cfg.factor);
  return mode == SpectrumMode::TypeI ? FactorType::TypeI : FactorType::TypeII;
}

template <Scalar T>
Json verdict_json(const FeasibilityVerdict<T>& v, FactorType factor) {
  Json j;
  j["factor"] = to_string(factor);
  j["outcome"] = to_string(v.outcome);
  if (v.outcome == Outcome::FeasibleFinite) j["k"] = v.k;
  if (v.outcome == Outcome::Infeasible) {
    j["reason"] = to_string(v.reason);
    j["reason_text"] = reason_text(v.reason);
  }
  auto ext = [](const Extended<T>& e) -> Json { return e.infinite ? Json("inf") : scalar_to_json(e.value); };
  j["excess_trace"] = ext(v.excess_trace);
  j["defect_trace"] = ext(v.defect_trace);
  if (v.gap) j["gap"] = scalar_to_json(*v.gap);
  if constexpr (!is_exact_v<T>) j["integrality_gap"] = v.integrality_gap;
  return j;
}

template <Scalar T>
int cmd_classify(const RunConfig& cfg) {
  auto s = load_spectrum<T>(cfg.input);
  const auto factor = default_factor(cfg, s.mode);
  auto v = classify(s, factor, cfg.tol);
  emit_json(cfg, verdict_json(v, factor));
  if (v.outcome == Outcome::Infeasible) {
    std::cerr << "infeasible: " << reason_text(v.reason) << "\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

template <Scalar T>
Json target_json(const std::vector<T>& target) {
  Json d = Json::array();
  for (const auto& x : target) d.push_back(scalar_to_json(x));
  return {{"diagonal", d}};
}

template <Scalar T>
Json remainder_json(const Remainder<T>& r) {
  return {{"coeff", scalar_to_json(r.coeff)}, {"vector", vector_to_json(r.vector)}};
}

Json rank_one_json(const std::vector<RankOneProjection>& ps) {
  Json a = Json::array();
  for (const auto& p : ps) a.push_back({{"vector", vector_to_json(p.vector)}});
  return a;
}

template <Scalar T>
Mat remainder_sum(const std::vector<Remainder<T>>& rs, Eigen::Index dim) {
  Mat m = Mat::Zero(dim, dim);
  for (const auto& r : rs) m += to_double(r.coeff) * outer(r.vector);
  return m;
}

// Finishes a decompose run: attaches the recomputed report and decides the exit code.
int finish_decompose(const RunConfig& cfg, Json& j, const Mat& target, const std::vector<Mat>& projections,
                     const std::optional<Mat>& remainder) {
  auto report = verify_decomposition(target, projections, remainder, {1e-10, 1e-9});
  j["report"] = report.to_json();
  emit_json(cfg, j);
  if (!report.passed()) {
    std::cerr << "verification failed: reconstruction " << report.reconstruction << ", worst projection " << report.worst_projection() << "\n";
    return kExitError;
  }
  return kExitOk;
}

template <Scalar T>
int decompose_type1(const RunConfig& cfg, const Spectrum<T>& s, const FeasibilityVerdict<T>& v) {
  Json j;
  j["verdict"] = verdict_json(v, FactorType::TypeI);
  if (v.outcome == Outcome::FeasibleInfiniteExcess) {
    auto d = decompose_infinite_excess(s, cfg.steps, cfg.blocks, cfg.tol);
    j["route"] = "divergent";
    j["dim"] = d.dim;
    j["target"] = target_json(d.target);
    j["labels"] = d.labels;
    j["projections"] = rank_one_json(d.projections);
    auto& rs = j["remainders"] = Json::array();
    for (const auto& r : d.carries) rs.push_back(remainder_json(r));
    j["partial"] = d.partial;
    j["partition_rule"] = d.partition_rule;
    auto& cls = j["classes"] = Json::array();
    for (const auto& c : d.classes) {
      Json b = Json::array();
      for (const auto& blk : c.blocks)
        b.push_back({{"k", blk.index}, {"start", blk.start}, {"cut", blk.cut}, {"alpha", scalar_to_json(blk.alpha)},
                     {"beta", scalar_to_json(blk.beta)}, {"k_count", blk.k_count}});
      cls.push_back({{"defect", c.defect_label}, {"lambda", scalar_to_json(c.lambda)}, {"blocks", b}});
    }
    return finish_decompose(cfg, j, d.target_matrix(), rank_one_matrices(d.projections), remainder_sum(d.carries, d.dim));
  }
  if (s.is_finite() && v.outcome == Outcome::FeasibleFinite) {
    auto d = decompose_finite(s, cfg.tol);
    j["route"] = "finite";
    j["dim"] = d.dim;
    j["target"] = target_json(d.target);
    j["projections"] = rank_one_json(d.projections);
    j["peeled"] = d.peeled.size();
    return finish_decompose(cfg, j, diag_matrix_of(d.target), rank_one_matrices(d.projections), std::nullopt);
  }
  auto d = decompose_trace_balanced(s, cfg.steps, cfg.tol);
  j["route"] = d.route;
  j["dim"] = d.dim;
  j["target"] = target_json(d.target);
  j["labels"] = d.labels;
  j["projections"] = rank_one_json(d.projections);
  std::optional<Mat> rem;
  if (d.remainder) {
    j["remainder"] = remainder_json(*d.remainder);
    rem = to_double(d.remainder->coeff) * outer(d.remainder->vector);
  } else {
    j["remainder"] = nullptr;
  }
  j["recursion_steps"] = d.recursion_steps();
  j["complete"] = d.complete;
  j["numeric_floor"] = d.numeric_floor;
  Json phi = Json::array();
  for (auto [m, n] : d.phi) phi.push_back({m, n});
  j["phi"] = phi;
  return finish_decompose(cfg, j, d.target_matrix(), rank_one_matrices(d.projections), rem);
}

int decompose_type2(const RunConfig& cfg, const Spectrum<Rational>& s) {
  auto ts = TracialSpectrum<Rational>::from_spectrum(s);
  auto model = realize_matrix_model(ts, cfg.size > 0 ? cfg.size : 1);
  Json j;
  j["route"] = "tracial";
  j["n"] = model.n;
  j["refined"] = model.refined;
  j["target"] = {{"diagonal", vector_to_json(model.target.diagonal())}};
  auto& ps = j["projections"] = Json::array();
  std::vector<Mat> mats;
  for (std::size_t i = 0; i < model.frames.size(); ++i) {
    mats.push_back(model.projection(i));
    ps.push_back({{"matrix", matrix_to_json(mats.back())}, {"rank", model.frames[i].cols()}});
  }
  return finish_decompose(cfg, j, model.target, mats, std::nullopt);
}

template <Scalar T>
int cmd_decompose(const RunConfig& cfg) {
  auto s = load_spectrum<T>(cfg.input);
  const auto factor = s.mode == SpectrumMode::TypeI ? FactorType::TypeI : FactorType::TypeII;
  auto v = classify(s, factor, cfg.tol);
  if (v.outcome == Outcome::Infeasible) {
    emit_json(cfg, {{"verdict", verdict_json(v, factor)}});
    std::cerr << "infeasible: " << reason_text(v.reason) << "\n";
    return kExitInfeasible;
  }
  if (s.mode == SpectrumMode::TypeII) {
    if constexpr (is_exact_v<T>)
      return decompose_type2(cfg, s);
    else
      fail(ErrorCode::InvalidArgument, "type2 realization needs --mode exact");
  }
  return decompose_type1(cfg, s, v);
}

template <Scalar T>
int cmd_two_proj(const RunConfig& cfg) {
  auto s = load_spectrum<T>(cfg.input);
  SymmetryPairing pairing;
  try {
    pairing = symmetry_pairing(s, cfg.tol);
  } catch (const AsymmetryError& e) {
    emit_json(cfg, {{"symmetric", false}, {"witness", e.witness()}});
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  }
  auto r = build_two_projections(s.expanded_values(), pairing);
  Json j;
  j["symmetric"] = true;
  Json pairs = Json::array();
  for (auto [a, b] : pairing.pairs) pairs.push_back({a, b});
  j["pairs"] = pairs;
  j["fixed_unit"] = pairing.fixed_unit;
  j["doubled"] = pairing.doubled;
  j["P"] = matrix_to_json(r.p_matrix());
  j["Q"] = matrix_to_json(r.q_matrix());
  return finish_decompose(cfg, j, r.target, {r.p_matrix(), r.q_matrix()}, std::nullopt);
}

template <Scalar T>
int cmd_frames(const RunConfig& cfg) {
  auto s = load_spectrum<T>(cfg.input);
  auto v = classify(s, FactorType::TypeI, cfg.tol);
  if (v.outcome == Outcome::Infeasible || !s.is_finite()) {
    emit_json(cfg, {{"verdict", verdict_json(v, FactorType::TypeI)}});
    std::cerr << "infeasible: " << (s.is_finite() ? reason_text(v.reason) : "frames needs a finite spectrum") << "\n";
    return kExitInfeasible;
  }
  auto d = decompose_finite(s, cfg.tol);
  const Mat a = diag_matrix_of(d.target);
  auto cert = decomposition_to_isometry(a, rank_one_matrices(d.projections));
  auto back = isometry_to_decomposition(cert.v, cert.partition, a);
  Json j;
  j["dimension"] = cert.dimension;
  j["V"] = matrix_to_json(cert.v);
  j["range_residual"] = cert.range_residual;
  j["compression_residual"] = cert.compression_residual;
  j["compression_diagonal"] = vector_to_json((cert.v * a * cert.v.transpose()).diagonal());
  return finish_decompose(cfg, j, a, back, std::nullopt);
}

template <Scalar T>
int cmd_index(const RunConfig& cfg) {
  const Json in = read_json_file(cfg.input);
  if (!in.contains("diagonal") || !in.at("diagonal").is_array()) fail(ErrorCode::Parse, cfg.input + ": needs a \"diagonal\" array");
  std::vector<T> c;
  for (std::size_t i = 0; i < in.at("diagonal").size(); ++i)
    c.push_back(scalar_from_json<T>(in.at("diagonal")[i], cfg.input + ": diagonal[" + std::to_string(i) + "]"));
  auto k = kadison_index(c, cfg.tol);
  emit_json(cfg, {{"a", scalar_to_json(k.a)}, {"b", scalar_to_json(k.b)}, {"index", scalar_to_json(k.index)}, {"is_integer", k.is_integer}});
  return kExitOk;
}

template <Scalar T>
std::optional<T> lambda_override(const Json& j, const std::string& where) {
  if (!j.contains("lambda")) return std::nullopt;
  return scalar_from_json<T>(j.at("lambda"), where + ": lambda");
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Json>> rows;

  std::string render(const std::string& format) const {
    if (format == "json") {
      Json a = Json::array();
      for (const auto& r : rows) {
        Json o;
        for (std::size_t i = 0; i < header.size(); ++i) o[header[i]] = r[i];
        a.push_back(o);
      }
      return a.dump(2);
    }
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << (r[i].is_string() ? r[i].get<std::string>() : r[i].dump());
      os << "\n";
    }
    return os.str();
  }
};

template <Scalar T>
Table recursion_table(const RecursionState<T>& d) {
  Table t{{"step", "delta", "sigma", "overlap_g0", "partial_residual"}, {}};
  auto res = partial_residuals(d);
  for (std::size_t k = 0; k < d.deltas.size(); ++k) {
    const double overlap = k < d.history.size() ? std::abs(d.history[k].dot(d.g[0].as_vector(d.dim))) : 0.0;
    t.rows.push_back({k, scalar_to_json(d.deltas[k]), scalar_to_json(d.sigmas[k]), overlap, k < res.size() ? res[k].second : 0.0});
  }
  return t;
}

template <Scalar T>
int cmd_simulate(const RunConfig& cfg) {
  if (cfg.format != "csv" && cfg.format != "json") fail(ErrorCode::InvalidArgument, "--format must be json or csv");
  const std::string fmt = cfg.format;
  const Json in = read_json_file(cfg.input);
  if (cfg.kind == "lemma51") {
    if (!in.contains("state")) fail(ErrorCode::Parse, cfg.input + ": lemma51 needs a \"state\" object");
    const auto& st = in.at("state");
    auto get = [&](const char* k) {
      if (!st.contains(k)) fail(ErrorCode::Parse, cfg.input + ": state." + k + " missing");
      return scalar_from_json<T>(st.at(k), cfg.input + ": state." + k);
    };
    TraceState<T> s{get("mu"), get("lambda"), get("tauE"), get("tauF")};
    auto it = lemma51_iterate(s, cfg.steps, cfg.tol);
    Table t{{"step", "branch", "mu", "lambda", "tauE", "tauF"}, {}};
    for (std::size_t k = 0; k < it.states.size(); ++k) {
      const auto& x = it.states[k];
      t.rows.push_back({k, k == 0 ? "start" : to_string(it.branches[k - 1]), scalar_to_json(x.mu), scalar_to_json(x.lambda),
                        scalar_to_json(x.tauE), scalar_to_json(x.tauF)});
    }
    emit(cfg, t.render(fmt));
    return kExitOk;
  }
  Spectrum<T> s;
  Json spectrum_part = in;
  spectrum_part.erase("lambda");
  try {
    s = spectrum_from_json<T>(spectrum_part);
  } catch (const Error& e) {
    fail(e.code(), cfg.input + ": " + e.what());
  }
  auto mu_seq = excess_sequence(s);
  auto lambda_seq = defect_sequence(s);
  auto lam = lambda_override<T>(in, cfg.input);
  if (cfg.kind == "greedy") {
    if (!lam) {
      require(lambda_seq.finite_length() && lambda_seq.length() == 1, ErrorCode::InvalidArgument,
              "greedy needs a \"lambda\" key or exactly one defect entry");
      lam = lambda_seq.term(0);
    }
    auto g = greedy_blocks(mu_seq, *lam, cfg.blocks, kDefaultTermLimit, cfg.tol);
    Table t{{"block", "start", "cut", "lambda_in", "alpha", "beta", "floor", "k_count", "coefficient_sum"}, {}};
    for (const auto& b : g.blocks) {
      T sum = make_scalar<T>(0);
      for (const auto& c : b.coefficients([&](std::size_t i) { return mu_seq.term(i - 1); })) sum += c;
      t.rows.push_back({b.index, b.start, b.cut, scalar_to_json(b.lambda_in), scalar_to_json(b.alpha), scalar_to_json(b.beta), b.floor_term,
                        b.k_count, scalar_to_json(sum)});
    }
    emit(cfg, t.render(fmt));
    return kExitOk;
  }
  if (cfg.kind == "lemma41") {
    const bool one_defect = lambda_seq.finite_length() && lambda_seq.length() == 1;
    const bool one_excess = mu_seq.finite_length() && mu_seq.length() == 1;
    if (lam || one_defect) {
      emit(cfg, recursion_table(lemma41_defect(lam ? *lam : lambda_seq.term(0), mu_seq, cfg.steps, cfg.tol)).render(fmt));
      return kExitOk;
    }
    require(one_excess, ErrorCode::InvalidArgument, "lemma41 needs exactly one defect entry, a \"lambda\" key, or exactly one excess entry");
    emit(cfg, recursion_table(lemma41_excess(mu_seq.term(0), lambda_seq, cfg.steps, cfg.tol)).render(fmt));
    return kExitOk;
  }
  if (cfg.kind == "lemma42") {
    emit(cfg, recursion_table(lemma42_interleave(mu_seq, lambda_seq, cfg.steps, cfg.tol)).render(fmt));
    return kExitOk;
  }
  fail(ErrorCode::InvalidArgument, "unknown simulation kind '" + cfg.kind + "'");
}

int cmd_verify(const RunConfig& cfg) {
  const Json in = read_json_file(cfg.input);
  DecompositionFile d;
  try {
    d = decomposition_from_json(in);
  } catch (const Error& e) {
    fail(e.code(), cfg.input + ": " + e.what());
  }
  auto report = verify_decomposition(d.target, d.projections, d.remainder);
  emit_json(cfg, report.to_json());
  return report.passed() ? kExitOk : kExitError;
}

int cmd_fuzz(const RunConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> rank(1, 12), den(1, 12);
  int attempted = 0, feasible_ok = 0, infeasible_rejected = 0;
  double worst_proj = 0, worst_rec = 0;
  auto random_value = [&]() {
    long long q = den(rng);
    std::uniform_int_distribution<long long> num(1, 4 * q);
    return Rational(num(rng), q);
  };
  for (int trial = 0; trial < cfg.count; ++trial) {
    const int n = rank(rng);
    std::vector<Rational> d;
    Rational t = 0;
    for (int i = 0; i + 1 < n; ++i) {
      d.push_back(random_value());
      t += d.back();
    }
    // feasible: last entry lifts the trace to an integer >= n
    Rational k = floor_of(t) + 1;
    if (k < n) k = n;
    Rational last = k - t;
    while (last > 4) last -= 1;
    if (!integral_value<Rational>(t + last, 0.0) || t + last < n) continue;
    d.push_back(last);
    ++attempted;
    auto dec = decompose_finite(d, cfg.tol);
    auto report = verify_decomposition(diag_matrix_of(d), rank_one_matrices(dec.projections));
    worst_proj = std::max(worst_proj, report.worst_projection());
    worst_rec = std::max(worst_rec, report.reconstruction);
    if (report.passed() && static_cast<long long>(dec.projections.size()) == integral_value<Rational>(t + last, 0.0)) ++feasible_ok;
    // infeasible: nudge the trace off the integers
    std::vector<Rational> bad = d;
    bad.back() += Rational(1, 2 * den(rng) + 1);
    auto s = Spectrum<Rational>::diagonal(bad);
    bool rejected = !fillmore_feasible(s).feasible;
    try {
      decompose_finite(s, cfg.tol);
      rejected = false;
    } catch (const Error&) {
    }
    if (rejected) ++infeasible_rejected;
  }
  Json j{{"seed", cfg.seed},         {"trials", attempted},       {"feasible_ok", feasible_ok}, {"infeasible_rejected", infeasible_rejected},
         {"worst_projection", worst_proj}, {"worst_reconstruction", worst_rec}};
  emit_json(cfg, j);
  return attempted > 0 && feasible_ok == attempted && infeasible_rejected == attempted ? kExitOk : kExitError;
}

template <class Fn>
int dispatch_mode(const RunConfig& cfg, Fn&& fn) {
  if (cfg.mode == "exact") return fn(Rational{});
  if (cfg.mode == "float") return fn(0.0);
  fail(ErrorCode::InvalidArgument, "--mode must be exact or float");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decompose positive operators into sums of projections"};
  app.require_subcommand(1);
  RunConfig cfg;
  auto add_common = [&](CLI::App* sub, bool needs_input) {
    if (needs_input) sub->add_option("input", cfg.input, "input JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", cfg.mode, "exact or float arithmetic")->check(CLI::IsMember({"exact", "float"}));
    sub->add_option("--tol", cfg.tol, "comparison tolerance for float mode")
        ->check(CLI::Range(std::numeric_limits<double>::epsilon(), 1.0));
    sub->add_option("--out", cfg.out, "write output here instead of stdout");
    sub->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  };
  auto* classify_cmd = app.add_subcommand("classify", "feasibility verdict");
  add_common(classify_cmd, true);
  classify_cmd->add_option("--factor", cfg.factor, "type1, type2 or type3 (default: from the spectrum mode)");
  auto* decompose_cmd = app.add_subcommand("decompose", "build and verify a decomposition");
  add_common(decompose_cmd, true);
  decompose_cmd->add_option("--steps", cfg.steps, "tail terms materialized per class")->check(CLI::PositiveNumber);
  decompose_cmd->add_option("--blocks", cfg.blocks, "greedy blocks per divergent class")->check(CLI::PositiveNumber);
  decompose_cmd->add_option("--size", cfg.size, "starting matrix size for type2 realization")->check(CLI::PositiveNumber);
  auto* two_cmd = app.add_subcommand("two-proj", "sum of two projections");
  add_common(two_cmd, true);
  auto* frames_cmd = app.add_subcommand("frames", "isometry certificate round trip");
  add_common(frames_cmd, true);
  auto* index_cmd = app.add_subcommand("index", "Kadison index of a diagonal");
  add_common(index_cmd, true);
  auto* sim_cmd = app.add_subcommand("simulate", "recursion transcripts");
  add_common(sim_cmd, true);
  sim_cmd->add_option("--kind", cfg.kind, "lemma41, lemma42, lemma51 or greedy")
      ->check(CLI::IsMember({"lemma41", "lemma42", "lemma51", "greedy"}));
  sim_cmd->add_option("--steps", cfg.steps, "recursion steps")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--blocks", cfg.blocks, "greedy blocks")->check(CLI::PositiveNumber);
  auto* verify_cmd = app.add_subcommand("verify", "re-check a decomposition file");
  add_common(verify_cmd, true);
  auto* fuzz_cmd = app.add_subcommand("fuzz", "random feasible / infeasible round trips");
  add_common(fuzz_cmd, false);
  fuzz_cmd->add_option("--seed", cfg.seed, "random seed");
  fuzz_cmd->add_option("--count", cfg.count, "number of trials")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }
  if (sim_cmd->parsed() && sim_cmd->count("--format") == 0) cfg.format = "csv";
  try {
    if (classify_cmd->parsed()) return dispatch_mode(cfg, [&](auto t) { return cmd_classify<decltype(t)>(cfg); });
    if (decompose_cmd->parsed()) return dispatch_mode(cfg, [&](auto t) { return cmd_decompose<decltype(t)>(cfg); });
    if (two_cmd->parsed()) return dispatch_mode(cfg, [&](auto t) { return cmd_two_proj<decltype(t)>(cfg); });
    if (frames_cmd->parsed()) return dispatch_mode(cfg, [&](auto t) { return cmd_frames<decltype(t)>(cfg); });
    if (index_cmd->parsed()) return dispatch_mode(cfg, [&](auto t) { return cmd_index<decltype(t)>(cfg); });
    if (sim_cmd->parsed()) return dispatch_mode(cfg, [&](auto t) { return cmd_simulate<decltype(t)>(cfg); });
    if (verify_cmd->parsed()) return cmd_verify(cfg);
    if (fuzz_cmd->parsed()) return cmd_fuzz(cfg);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::Infeasible ? kExitInfeasible : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
