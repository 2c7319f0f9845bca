#pragma once

// Batch front-end: every command builds, verifies or audits one artifact
// and returns a JSON report. Exit status: 0 all audits pass, 1 audit
// failure or retries exhausted, 2 invalid configuration, 3 resource cap.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eqcomm/complexlin.hpp"
#include "eqcomm/error.hpp"
#include "eqcomm/gf2codes.hpp"
#include "eqcomm/protocols_classical.hpp"
#include "eqcomm/protocols_quantum.hpp"
#include "eqcomm/random.hpp"
#include "eqcomm/ranks.hpp"
#include "eqcomm/rational.hpp"

namespace eqcomm::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kExitPass = 0;
inline constexpr int kExitAuditFailure = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitResourceCap = 3;

inline constexpr int kReportSchema = 1;

struct RunConfig {
  std::string command;
  /// sink-xor: matrix | nonneg | psd. extract-psd: pure | mixed.
  std::string variant;
  std::optional<std::size_t> n;
  std::optional<std::size_t> m;
  std::string epsilon = "1/4";
  std::optional<std::string> delta;
  std::uint64_t seed = kDefaultSeed;
  VerifyMode mode = VerifyMode::exhaustive;
  /// classical error split: half | low_cost.
  std::string split = "half";
  /// certify-lb: replace state x by state y.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> corrupt;
  std::string input;
  std::string output;
  /// json | csv | auto (csv for sink-xor matrix, json otherwise).
  std::string format = "auto";
  std::string save;
  bool wall_time = true;
};

struct RunResult {
  int exit_code = kExitPass;
  Json report;
  /// Payload written to the output (JSON report or CSV).
  std::string text;
};

namespace detail {

inline std::string format_of(const RunConfig& c) {
  if (c.format != "auto") return c.format;
  return c.command == "sink-xor" && c.variant == "matrix" ? "csv" : "json";
}

inline const char* mode_name(VerifyMode m) { return m == VerifyMode::exhaustive ? "exhaustive" : "sampled"; }

inline std::size_t need(const std::optional<std::size_t>& v, const char* flag) {
  if (!v) throw InvalidArgument(std::string("missing required --") + flag);
  return *v;
}

inline Rational config_epsilon(const RunConfig& c) {
  const Rational eps = parse_rational(c.epsilon);
  require(eps > 0 && eps < Rational(1, 2), "--epsilon must lie in (0, 1/2)");
  return eps;
}

inline ErrorSplit config_split(const RunConfig& c) {
  if (c.split == "half") return ErrorSplit::half;
  if (c.split == "low_cost") return ErrorSplit::low_cost;
  throw InvalidArgument("--split must be half or low_cost");
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open " + p.string() + " for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + p.string());
  return in;
}

inline void write_json(const std::filesystem::path& p, const Json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

inline Json read_json(const std::filesystem::path& p) {
  auto in = open_in(p);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("bad JSON in " + p.string() + ": " + e.what());
  }
}

inline std::string projector_file(std::uint64_t x) {
  char name[48];
  std::snprintf(name, sizeof name, "projector_%05llu.cmpx", static_cast<unsigned long long>(x));
  return name;
}

}  // namespace detail

// --------------------------------------------------------- artifact I/O

/// Directory with manifest.json and one CMPX basis (d x r) per input.
inline void save_family(const std::string& dir, const ProjectorFamily& f) {
  const auto root = detail::ensure_dir(dir);
  Json manifest;
  manifest["format"] = "eqcomm-projector-family";
  manifest["version"] = 1;
  manifest["n"] = f.input_bits();
  manifest["epsilon"] = to_string(f.epsilon());
  manifest["rank"] = f.rank();
  manifest["dimension"] = f.dimension();
  manifest["seed"] = f.seed();
  manifest["verified"] = f.verified();
  manifest["rounds"] = f.rounds();
  manifest["resampled"] = f.resampled();
  manifest["payload"] = "projector_<x>.cmpx: orthonormal basis of P_x, d x r";
  detail::write_json(root / "manifest.json", manifest);
  for (std::uint64_t x = 0; x < f.projectors().size(); ++x) {
    auto out = detail::open_out(root / detail::projector_file(x));
    write_matrix(out, f.projector(x).basis());
  }
}

/// Loaded families are not re-verified here; audits run on the factors.
inline ProjectorFamily load_family(const std::string& dir) {
  const std::filesystem::path root(dir);
  const Json manifest = detail::read_json(root / "manifest.json");
  if (manifest.value("format", "") != "eqcomm-projector-family")
    throw InvalidArgument(dir + ": not a projector family");
  const auto n = manifest.at("n").get<std::size_t>();
  const Rational eps = parse_rational(manifest.at("epsilon").get<std::string>());
  const auto params = mixed_parameters(n, eps);
  require(params.rank == manifest.at("rank").get<std::size_t>() &&
              params.dimension == manifest.at("dimension").get<std::size_t>(),
          dir + ": rank/dimension do not match n and epsilon");
  require(n <= 16, dir + ": family too large");
  std::vector<Projector> ps;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
    auto in = detail::open_in(root / detail::projector_file(x));
    ps.push_back(Projector::from_basis(read_matrix(in)));
  }
  return ProjectorFamily(n, eps, params, std::move(ps), manifest.at("seed").get<std::uint64_t>());
}

inline void save_protocol_file(const std::filesystem::path& p, const PrivateCoinProtocol& protocol) {
  auto out = detail::open_out(p);
  write_protocol(out, protocol);
}

inline PrivateCoinProtocol load_protocol_file(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  return read_protocol(in);
}

inline Json factorization_manifest(const std::string& kind, const Rational& eps, std::uint64_t seed,
                                   std::size_t dim) {
  Json m;
  m["format"] = "eqcomm-factorization";
  m["version"] = 1;
  m["kind"] = kind;
  m["epsilon"] = to_string(eps);
  m["seed"] = seed;
  m["dim"] = dim;
  return m;
}

inline const char* kSinkConvention =
    "edges (u,v), u<v, in lexicographic order; edge e is bit e of the orientation; bit 0 orients u->v";

// -------------------------------------------------------- report parts

inline Json approx_json(const ApproxReport& r) {
  Json j;
  j["epsilon"] = to_string(r.epsilon);
  if (r.exact_max_error) j["max_abs_error"] = to_string(*r.exact_max_error);
  j["max_abs_error_float"] = r.max_abs_error;
  j["dim"] = r.dim;
  j["worst_entry"] = {r.worst_row, r.worst_col};
  if (!r.exact_max_error) j["max_imag"] = r.max_imag;
  j["pass"] = r.pass;
  return j;
}

inline Json band_json(const DistanceBandReport& r) {
  Json j;
  j["delta_squared"] = to_string(r.band.delta_squared);
  j["verification"] = r.exhaustive ? "exhaustive" : "sampled";
  j["messages_checked"] = r.messages_checked;
  j["min_weight"] = r.min_weight;
  j["max_weight"] = r.max_weight;
  j["min_relative"] = to_string(r.min_relative());
  j["max_relative"] = to_string(r.max_relative());
  if (!r.exhaustive) j["violation_fraction_bound_95"] = r.violation_fraction_bound;
  j["witness"] = r.witness ? Json(*r.witness) : Json(nullptr);
  j["pass"] = r.pass;
  return j;
}

inline Json protocol_json(const PrivateCoinProtocol& p) {
  Json j;
  j["n"] = p.input_bits();
  j["k"] = p.hash_bits();
  j["epsilon0"] = to_string(p.base_error());
  j["delta"] = to_string(p.delta());
  j["B"] = p.tape_count();
  j["target_error"] = to_string(p.target_error());
  j["cost_bits"] = p.cost_bits();
  j["real_cost_bits"] = p.real_cost_bits();
  j["attempts"] = p.attempts();
  j["verified"] = p.verified();
  return j;
}

inline Json classical_formulas() {
  return {{"k", "k=ceil(log2(1/eps_pub))"},
          {"epsilon0", "eps0=2^-k"},
          {"delta", "delta=eps/eps0-1"},
          {"B", "B=ceil(6n/(delta^2*eps0))"},
          {"cost", "cost=ceil(log2 B)+k+1"},
          {"real_cost", "real_cost=log2(B)+k+1"}};
}

inline Json mixed_formulas() {
  return {{"r", "r=ceil(sqrt(10n))"}, {"d", "d=ceil(2r/eps)"}, {"verify", "tr(PxPy)<eps*r for x!=y"}};
}

inline Json family_json(const ProjectorFamily& f) {
  Json j;
  j["n"] = f.input_bits();
  j["r"] = f.rank();
  j["d"] = f.dimension();
  j["qubit_cost"] = f.qubit_cost();
  j["real_qubit_cost"] = f.real_qubit_cost();
  j["dim_bound"] = 8.0 * std::sqrt(static_cast<double>(f.input_bits())) / to_double(f.epsilon());
  j["verified"] = f.verified();
  j["max_false_acceptance"] = f.max_overlap() / static_cast<double>(f.rank());
  j["rounds"] = f.rounds();
  j["resampled"] = f.resampled();
  return j;
}

// ------------------------------------------------------------ commands

namespace commands {

inline bool gen_code(const RunConfig& c, Json& rep) {
  const std::size_t n = detail::need(c.n, "n");
  const Rational eps = detail::config_epsilon(c);
  EqualityCodeOptions opts;
  opts.mode = c.mode;
  const auto code = make_equality_code(n, eps, c.seed, opts);
  rep["formulas"] = {{"N", "N=ceil(16n/eps)"}, {"band", "(2w-N)^2<=eps*N^2"}};
  rep["derived"] = {{"N", code.code.codeword_bits()}, {"attempts", code.attempts}};
  rep["audit"] = band_json(code.report);
  if (!c.save.empty()) {
    auto out = detail::open_out(c.save);
    write_code(out, code.code);
    rep["artifact"] = c.save;
  }
  return code.report.pass;
}

inline bool verify_code(const RunConfig& c, Json& rep) {
  require(!c.input.empty(), "verify-code needs --input");
  auto in = detail::open_in(c.input);
  const auto code = read_code(in);
  const auto band = c.delta ? BandHalfWidth::from_delta(parse_rational(*c.delta))
                            : BandHalfWidth::from_epsilon(detail::config_epsilon(c));
  BandCheckOptions opts;
  opts.mode = c.mode;
  opts.sample_seed = c.seed;
  const auto report = verify_distance_band(code, band, opts);
  rep["derived"] = {{"n", code.message_bits()}, {"N", code.codeword_bits()}, {"code_seed", code.seed()}};
  rep["audit"] = band_json(report);
  return report.pass;
}

inline bool classical_eq(const RunConfig& c, Json& rep) {
  const std::size_t n = detail::need(c.n, "n");
  const Rational eps = detail::config_epsilon(c);
  ComposeOptions opts;
  opts.split = detail::config_split(c);
  opts.newman.mode = c.mode;
  const auto p = compose_eq(n, eps, c.seed, opts);
  rep["formulas"] = classical_formulas();
  rep["formulas"]["eps_pub"] = opts.split == ErrorSplit::half ? "eps_pub=eps/2" : "eps_pub=eps/8";
  rep["derived"] = protocol_json(p);
  rep["derived"]["cost_leading_term"] = private_cost_leading_term(n, eps);
  bool pass = true;
  Json audit;
  if (n <= AuditOptions{}.max_bits) {
    const auto a = audit_error(p);
    audit["verification"] = "exhaustive";
    audit["max_error"] = to_string(a.max_error);
    audit["argmax_z"] = a.argmax_z;
    audit["total_collisions"] = a.total_collisions;
    pass = a.max_error < eps;
  } else {
    audit["verification"] = "sampled";
    audit["samples"] = opts.newman.samples;
  }
  audit["pass"] = pass;
  rep["audit"] = audit;
  if (!c.save.empty()) {
    save_protocol_file(c.save, p);
    rep["artifact"] = c.save;
  }
  return pass;
}

/// "x,y,probability" rows of an acceptance matrix.
inline std::string acceptance_csv(const std::vector<double>& matrix, std::uint64_t size) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,probability\n";
  for (std::uint64_t x = 0; x < size; ++x)
    for (std::uint64_t y = 0; y < size; ++y) out << x << ',' << y << ',' << matrix[x * size + y] << '\n';
  return out.str();
}

inline bool quantum_pure(const RunConfig& c, Json& rep, std::string& csv) {
  const std::size_t n = detail::need(c.n, "n");
  const Rational eps = detail::config_epsilon(c);
  const auto f = build_pure_protocol(n, eps, c.seed);
  const Rational worst = f.max_false_acceptance();
  rep["formulas"] = {{"N", "N=ceil(16n/eps)"},
                     {"acceptance", "(1-2d(C(x),C(y))/N)^2"},
                     {"qubit_cost", "ceil(log2 N)"},
                     {"real_qubit_cost", "log2(16n/eps)"}};
  rep["derived"] = {{"N", f.dimension()},
                    {"code_attempts", f.code_attempts()},
                    {"qubit_cost", f.qubit_cost()},
                    {"real_qubit_cost", f.real_qubit_cost()},
                    {"real_qubit_cost_bound", std::log2(static_cast<double>(n)) - log2_of(eps) + 4.0}};
  Json audit = band_json(f.band());
  audit["max_false_acceptance"] = to_string(worst);
  audit["diagonal_acceptance"] = "1";
  const bool pass = f.band().pass && worst <= eps;
  audit["pass"] = pass;
  rep["audit"] = audit;
  if (detail::format_of(c) == "csv") {
    if (n > 10) throw ResourceCap("acceptance matrix CSV capped at n <= 10");
    csv = acceptance_csv(acceptance_matrix(f), std::uint64_t{1} << n);
  }
  if (!c.save.empty()) {
    auto out = detail::open_out(c.save);
    write_code(out, f.code());
    rep["artifact"] = c.save;
  }
  return pass;
}

inline bool quantum_mixed(const RunConfig& c, Json& rep, std::string& csv) {
  const std::size_t n = detail::need(c.n, "n");
  const Rational eps = detail::config_epsilon(c);
  const auto f = build_mixed_protocol(n, eps, c.seed);
  double worst_diag = 0;
  for (std::uint64_t x = 0; x < f.projectors().size(); ++x)
    worst_diag = std::max(worst_diag, std::abs(mixed_acceptance(f, x, x) - 1.0));
  rep["formulas"] = mixed_formulas();
  rep["derived"] = family_json(f);
  const double bound = 8.0 * std::sqrt(static_cast<double>(n)) / to_double(eps);
  const bool pass = f.verified() && f.max_overlap() / static_cast<double>(f.rank()) < to_double(eps) + 1e-9 &&
                    worst_diag <= 1e-9 && static_cast<double>(f.dimension()) <= bound;
  rep["audit"] = {{"max_false_acceptance", f.max_overlap() / static_cast<double>(f.rank())},
                  {"diagonal_deviation", worst_diag},
                  {"pass", pass}};
  if (detail::format_of(c) == "csv") csv = acceptance_csv(acceptance_matrix(f), std::uint64_t{1} << n);
  if (!c.save.empty()) {
    save_family(c.save, f);
    rep["artifact"] = c.save;
  }
  return pass;
}

inline double max_entry_gap(const PsdFactorization& f, const std::vector<double>& expected) {
  const auto values = f.reconstruct();
  double gap = 0;
  for (std::size_t i = 0; i < values.size(); ++i) gap = std::max(gap, std::abs(values[i] - Complex(expected[i], 0)));
  return gap;
}

inline bool extract_psd_cmd(const RunConfig& c, Json& rep) {
  const std::size_t n = detail::need(c.n, "n");
  const Rational eps = detail::config_epsilon(c);
  if (n > 8) throw ResourceCap("extract-psd: capped at n <= 8");
  double gap = 0;
  std::size_t dim = 0;
  double min_eig = 0;
  if (c.variant == "pure") {
    const auto f = build_pure_protocol(n, eps, c.seed);
    const double bytes = 2.0 * std::ldexp(1.0, static_cast<int>(n)) * std::pow(static_cast<double>(f.dimension()), 2) * 16;
    if (bytes > std::ldexp(1.0, 30)) throw ResourceCap("extract-psd: pure factors above 1 GiB");
    auto msgs = pure_messages(f);
    auto ops = msgs;  // Bob's accepting operator for y is |phi_y><phi_y|
    const auto psd = extract_psd(std::move(msgs), std::move(ops));
    gap = max_entry_gap(psd, acceptance_matrix(f));
    dim = psd.dim();
    min_eig = psd.min_block_eigenvalue();
    rep["derived"] = {{"family", "pure"}, {"N", f.dimension()}};
  } else if (c.variant == "mixed") {
    const auto f = build_mixed_protocol(n, eps, c.seed);
    const auto psd = extract_psd(mixed_messages(f), mixed_accept_ops(f));
    gap = max_entry_gap(psd, acceptance_matrix(f));
    dim = psd.dim();
    min_eig = psd.min_block_eigenvalue();
    rep["derived"] = family_json(f);
    rep["derived"]["family"] = "mixed";
  } else {
    throw InvalidArgument("extract-psd needs --family pure|mixed");
  }
  rep["formulas"] = {{"A_x", "rho_x"}, {"B_y", "accepting operator of y"}, {"entry", "tr(A_x B_y)=P(accept|x,y)"}};
  const bool pass = gap <= 1e-9 && min_eig >= -1e-9;
  rep["audit"] = {{"psd_dim", dim},
                  {"max_abs_gap_vs_simulation", gap},
                  {"min_factor_eigenvalue", min_eig},
                  {"pass", pass}};
  return pass;
}

inline bool certify_lb(const RunConfig& c, Json& rep) {
  const std::size_t n = detail::need(c.n, "n");
  const Rational eps = detail::config_epsilon(c);
  if (n > 10) throw ResourceCap("certify-lb: capped at n <= 10");
  const auto f = build_pure_protocol(n, eps, c.seed);
  auto states = pure_states(f);
  const auto ops = pure_measurements(f);
  rep["derived"] = {{"N", f.dimension()}, {"code_attempts", f.code_attempts()}};
  if (c.corrupt) {
    const auto [x, y] = *c.corrupt;
    require(x < states.size() && y < states.size(), "--corrupt indices out of range");
    states[x] = states[y];
    rep["derived"]["corrupted"] = {x, y};
  }
  rep["formulas"] = {{"band", "2-4sqrt(eps(1-eps)) <= |phi_x-phi_y|^2 <= 2+4sqrt(eps)"},
                     {"offdiag", "|<phi^R_x,phi^R_y>| <= 2sqrt(eps)"},
                     {"rank", "rank(G) <= 2d"}};
  try {
    const auto cert = certify_lower_bound(states, ops, to_double(eps));
    const auto gram_rank_bound = 2 * cert.dimension;
    rep["audit"] = {{"band", {cert.band.lower, cert.band.upper}},
                    {"band_ok", cert.band_ok},
                    {"min_sq_distance", cert.min_sq_distance},
                    {"max_sq_distance", cert.max_sq_distance},
                    {"offdiag_max", cert.offdiag_max},
                    {"offdiag_bound", cert.offdiag_bound()},
                    {"diag_deviation", cert.diag_deviation},
                    {"gram_rank", cert.numeric_rank_of_gram},
                    {"gram_rank_bound", gram_rank_bound},
                    {"pass", cert.ok()}};
    return cert.ok();
  } catch (const PreconditionViolated& e) {
    rep["audit"] = {{"precondition", "violated"}, {"witness", {e.x(), e.y()}}, {"message", e.what()}, {"pass", false}};
    return false;
  }
}

inline bool identity_nonneg_cmd(const RunConfig& c, Json& rep) {
  const std::size_t n = detail::need(c.n, "n");
  const Rational eps = detail::config_epsilon(c);
  IdentityNonnegOptions opts;
  opts.compose.split = detail::config_split(c);
  const auto r = identity_nonneg(n, eps, c.seed, opts);
  const double dn = static_cast<double>(n);
  const double e = to_double(eps);
  rep["formulas"] = classical_formulas();
  rep["formulas"]["inner_dim"] = "B*2^k";
  rep["derived"] = protocol_json(r.protocol);
  rep["derived"]["inner_dim"] = r.factors.inner_dim();
  rep["derived"]["inner_dim_bound"] = 32.0 * dn / (e * e);
  rep["derived"]["real_valued_bound"] = 16.0 * dn / (e * e);
  Json audit = approx_json(r.report);
  bool pass = r.report.pass && static_cast<double>(r.factors.inner_dim()) <= 32.0 * dn / (e * e);
  if (n <= 8) {
    const auto rank = numeric_rank(reconstruction_matrix(r.factors));
    audit["numeric_rank"] = rank;
    pass = pass && rank <= r.factors.inner_dim();
  }
  audit["pass"] = pass;
  rep["audit"] = audit;
  if (!c.save.empty()) {
    const auto root = detail::ensure_dir(c.save);
    auto m = factorization_manifest("identity-nonneg", eps, c.seed, r.factors.inner_dim());
    m["n"] = n;
    m["payload"] = {{"protocol", "protocol.eqp"}};
    m["factors"] = "A[x,(j,m)]=[H_j(x)=m]/B, B[(j,m),y]=[H_j(y)=m]";
    detail::write_json(root / "manifest.json", m);
    save_protocol_file(root / "protocol.eqp", r.protocol);
    rep["artifact"] = c.save;
  }
  return pass;
}

inline bool identity_psd_cmd(const RunConfig& c, Json& rep) {
  const std::size_t n = detail::need(c.n, "n");
  const Rational eps = detail::config_epsilon(c);
  const auto r = identity_psd(n, eps, c.seed);
  rep["formulas"] = mixed_formulas();
  rep["formulas"]["factors"] = "A_x=P_x/r, B_y=P_y";
  rep["derived"] = family_json(r.family);
  Json audit = approx_json(r.report);
  const double min_eig = r.factors.min_block_eigenvalue();
  audit["min_factor_eigenvalue"] = min_eig;
  const bool pass = r.report.pass && min_eig >= -1e-9 &&
                    static_cast<double>(r.factors.dim()) <= 8.0 * std::sqrt(static_cast<double>(n)) / to_double(eps);
  audit["pass"] = pass;
  rep["audit"] = audit;
  if (!c.save.empty()) {
    const auto root = detail::ensure_dir(c.save);
    auto m = factorization_manifest("identity-psd", eps, c.seed, r.factors.dim());
    m["n"] = n;
    m["payload"] = {{"family", "family"}};
    detail::write_json(root / "manifest.json", m);
    save_family((root / "family").string(), r.family);
    rep["artifact"] = c.save;
  }
  return pass;
}

inline std::string matrix_csv(const BooleanTargetMatrix& t) {
  std::string out;
  out.reserve(t.size() * t.size() * 2);
  for (std::uint64_t x = 0; x < t.size(); ++x)
    for (std::uint64_t y = 0; y < t.size(); ++y) {
      out += static_cast<char>('0' + t.at(x, y));
      out += y + 1 == t.size() ? '\n' : ',';
    }
  return out;
}

inline Json vertex_dims_json(const std::vector<std::size_t>& dims) {
  Json j = Json::array();
  for (auto d : dims) j.push_back(d);
  return j;
}

template <typename Save>
bool sink_report(Json& rep, const RunConfig& c, const ApproxReport& r, const std::vector<std::size_t>& dims,
                 std::size_t dim, Save save) {
  const std::size_t m = *c.m;
  const std::size_t sum = std::accumulate(dims.begin(), dims.end(), std::size_t{0});
  rep["derived"]["vertex_dims"] = vertex_dims_json(dims);
  rep["derived"]["dim"] = dim;
  Json audit = approx_json(r);
  audit["dim_equals_vertex_sum"] = dim == sum;
  const bool pass = r.pass && dim == sum;
  audit["pass"] = pass;
  rep["audit"] = audit;
  if (!c.save.empty()) {
    const auto root = detail::ensure_dir(c.save);
    auto manifest = factorization_manifest("sink-xor-" + c.variant, Rational(1, 3), c.seed, dim);
    manifest["m"] = m;
    manifest["edge_convention"] = kSinkConvention;
    manifest["vertex_dims"] = vertex_dims_json(dims);
    manifest["payload"] = save(root);
    detail::write_json(root / "manifest.json", manifest);
    rep["artifact"] = c.save;
  }
  return pass;
}

inline bool sink_xor(const RunConfig& c, Json& rep, std::string& csv) {
  const std::size_t m = detail::need(c.m, "m");
  rep["derived"] = {{"m", m}, {"n", m >= 2 ? sink_edge_count(m) : 0}, {"edge_convention", kSinkConvention}};
  if (c.variant == "matrix") {
    const auto t = sink_xor_matrix(m);
    std::vector<std::uint64_t> ones(t.size(), 0);
    for (std::uint64_t x = 0; x < t.size(); ++x)
      for (std::uint64_t y = 0; y < t.size(); ++y) ones[x] += t.at(x, y);
    const bool equal = std::all_of(ones.begin(), ones.end(), [&](auto v) { return v == ones[0]; });
    bool diag = true;
    for (std::uint64_t x = 0; x < t.size(); ++x) diag = diag && t.at(x, x) == 1;
    rep["audit"] = {{"ones_per_row", ones[0]}, {"row_sums_equal", equal}, {"diagonal_all_one", diag},
                    {"pass", equal && diag}};
    if (detail::format_of(c) == "csv") csv = matrix_csv(t);
    return equal && diag;
  }
  const Rational third(1, 3);
  rep["formulas"] = {{"vertex_error", "1/(3m)"}, {"decomposition", "SINK(z)=sum_v [z|E_v = s_v]"}};
  if (c.variant == "nonneg") {
    ComposeOptions compose;
    compose.split = detail::config_split(c);
    const auto r = sink_xor_nonneg(m, c.seed, compose);
    return sink_report(rep, c, r.report, r.vertex_dims, r.factors.inner_dim(), [&](const std::filesystem::path& root) {
      Json payload = Json::array();
      for (std::size_t v = 0; v < m; ++v) {
        const std::string name = "vertex_" + std::to_string(v) + ".eqp";
        save_protocol_file(root / name, r.vertex_protocols[v]);
        payload.push_back(name);
      }
      return payload;
    });
  }
  if (c.variant == "psd") {
    const auto r = sink_xor_psd(m, c.seed);
    return sink_report(rep, c, r.report, r.vertex_dims, r.factors.dim(), [&](const std::filesystem::path& root) {
      Json payload = Json::array();
      for (std::size_t v = 0; v < m; ++v) {
        const std::string name = "vertex_" + std::to_string(v);
        save_family((root / name).string(), r.vertex_families[v]);
        payload.push_back(name);
      }
      return payload;
    });
  }
  throw InvalidArgument("sink-xor needs matrix, nonneg or psd");
}

/// Rebuilds a saved factorization from its payloads and re-audits it.
inline bool verify_approx(const RunConfig& c, Json& rep) {
  require(!c.input.empty(), "verify-approx needs --input");
  const std::filesystem::path root(c.input);
  const Json manifest = detail::read_json(root / "manifest.json");
  if (manifest.value("format", "") != "eqcomm-factorization")
    throw InvalidArgument(c.input + ": not a factorization directory");
  const std::string kind = manifest.at("kind").get<std::string>();
  const Rational eps = parse_rational(manifest.at("epsilon").get<std::string>());
  rep["derived"] = {{"kind", kind}, {"epsilon", to_string(eps)}, {"manifest_dim", manifest.at("dim")}};
  ApproxReport r;
  std::size_t dim = 0;
  if (kind == "identity-nonneg") {
    auto p = load_protocol_file(root / manifest.at("payload").at("protocol").get<std::string>());
    const auto out = identity_nonneg_from_protocol(std::move(p), eps);
    r = out.report;
    dim = out.factors.inner_dim();
  } else if (kind == "identity-psd") {
    auto f = load_family((root / manifest.at("payload").at("family").get<std::string>()).string());
    const auto out = identity_psd_from_family(std::move(f));
    r = out.report;
    dim = out.factors.dim();
  } else if (kind == "sink-xor-nonneg" || kind == "sink-xor-psd") {
    const auto m = manifest.at("m").get<std::size_t>();
    require(m >= 2 && m <= kMaxSinkVertices, "manifest m out of range");
    const auto& payload = manifest.at("payload");
    require(payload.size() == m, "manifest payload needs one entry per vertex");
    if (kind == "sink-xor-nonneg") {
      std::vector<PrivateCoinProtocol> ps;
      for (const auto& name : payload) ps.push_back(load_protocol_file(root / name.get<std::string>()));
      const auto out = sink_nonneg_from_protocols(m, std::move(ps));
      r = out.report;
      dim = out.factors.inner_dim();
    } else {
      std::vector<ProjectorFamily> fs;
      for (const auto& name : payload) fs.push_back(load_family((root / name.get<std::string>()).string()));
      const auto out = sink_psd_from_families(m, std::move(fs));
      r = out.report;
      dim = out.factors.dim();
    }
  } else {
    throw InvalidArgument("unknown factorization kind '" + kind + "'");
  }
  Json audit = approx_json(r);
  const bool dims_match = dim == manifest.at("dim").get<std::size_t>();
  audit["dim_matches_manifest"] = dims_match;
  audit["pass"] = r.pass && dims_match;
  rep["audit"] = audit;
  return r.pass && dims_match;
}

}  // namespace commands

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-code",     "verify-code",     "classical-eq",
                                              "quantum-pure", "quantum-mixed",   "extract-psd",
                                              "certify-lb",   "identity-nonneg", "identity-psd",
                                              "sink-xor",     "verify-approx"};
  return names;
}

inline Json parameters_json(const RunConfig& c) {
  Json p;
  if (!c.variant.empty()) p["variant"] = c.variant;
  if (c.n) p["n"] = *c.n;
  if (c.m) p["m"] = *c.m;
  if (c.command != "sink-xor" && c.command != "verify-approx") p["epsilon"] = c.epsilon;
  if (c.delta) p["delta"] = *c.delta;
  p["seed"] = c.seed;
  p["mode"] = detail::mode_name(c.mode);
  if (c.command == "classical-eq" || c.command == "identity-nonneg" || (c.command == "sink-xor" && c.variant == "nonneg"))
    p["split"] = c.split;
  if (!c.input.empty()) p["input"] = c.input;
  return p;
}

/// Flat "key,value" rows of the report's scalar leaves.
inline std::string report_csv(const Json& report) {
  std::string out = "key,value\n";
  auto walk = [&](auto&& self, const Json& j, const std::string& prefix) -> void {
    if (j.is_object()) {
      for (auto it = j.begin(); it != j.end(); ++it) self(self, it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
    } else {
      std::string v = j.is_string() ? j.get<std::string>() : j.dump();
      if (v.find_first_of(",\"\n") != std::string::npos) {
        std::string quoted = "\"";
        for (char ch : v) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        v = quoted + "\"";
      }
      out += prefix + "," + v + "\n";
    }
  };
  walk(walk, report, "");
  return out;
}

/// Runs one command; never throws for library errors.
inline RunResult run(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  Json& rep = result.report;
  rep["schema"] = kReportSchema;
  rep["command"] = c.command;
  std::string csv;
  try {
    if (c.format != "json" && c.format != "csv" && c.format != "auto")
      throw InvalidArgument("--format must be json, csv or auto");
    rep["parameters"] = parameters_json(c);
    bool pass = false;
    namespace cmd = commands;
    if (c.command == "gen-code") pass = cmd::gen_code(c, rep);
    else if (c.command == "verify-code") pass = cmd::verify_code(c, rep);
    else if (c.command == "classical-eq") pass = cmd::classical_eq(c, rep);
    else if (c.command == "quantum-pure") pass = cmd::quantum_pure(c, rep, csv);
    else if (c.command == "quantum-mixed") pass = cmd::quantum_mixed(c, rep, csv);
    else if (c.command == "extract-psd") pass = cmd::extract_psd_cmd(c, rep);
    else if (c.command == "certify-lb") pass = cmd::certify_lb(c, rep);
    else if (c.command == "identity-nonneg") pass = cmd::identity_nonneg_cmd(c, rep);
    else if (c.command == "identity-psd") pass = cmd::identity_psd_cmd(c, rep);
    else if (c.command == "sink-xor") pass = cmd::sink_xor(c, rep, csv);
    else if (c.command == "verify-approx") pass = cmd::verify_approx(c, rep);
    else throw InvalidArgument("unknown command '" + c.command + "'");
    rep["pass"] = pass;
    result.exit_code = pass ? kExitPass : kExitAuditFailure;
  } catch (const ResourceCap& e) {
    rep["pass"] = false;
    rep["error"] = {{"kind", "resource_cap"}, {"message", e.what()}};
    result.exit_code = kExitResourceCap;
  } catch (const RetryExhausted& e) {
    rep["pass"] = false;
    rep["error"] = {{"kind", "retry_exhausted"}, {"attempts", e.attempts()}, {"message", e.what()}};
    result.exit_code = kExitAuditFailure;
  } catch (const PreconditionViolated& e) {
    rep["pass"] = false;
    rep["error"] = {{"kind", "precondition_violated"}, {"witness", {e.x(), e.y()}}, {"message", e.what()}};
    result.exit_code = kExitAuditFailure;
  } catch (const InvalidArgument& e) {
    rep["pass"] = false;
    rep["error"] = {{"kind", "invalid_config"}, {"message", e.what()}};
    result.exit_code = kExitInvalidConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    rep["pass"] = false;
    rep["error"] = {{"kind", "invalid_config"}, {"message", e.what()}};
    result.exit_code = kExitInvalidConfig;
  }
  if (c.wall_time)
    rep["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!csv.empty() && result.exit_code == kExitPass) result.text = csv;
  else if (detail::format_of(c) == "csv") result.text = report_csv(rep);
  else result.text = rep.dump(2) + "\n";
  return result;
}

/// Runs and writes the payload to config.output (stdout when empty).
inline int run_and_write(const RunConfig& c, std::ostream& stdout_stream, std::ostream& stderr_stream) {
  const auto result = run(c);
  if (result.report.contains("error"))
    stderr_stream << "eqcomm: " << result.report["error"]["message"].get<std::string>() << '\n';
  if (c.output.empty()) {
    stdout_stream << result.text;
  } else {
    std::ofstream out(c.output, std::ios::binary | std::ios::trunc);
    if (!out) {
      stderr_stream << "eqcomm: cannot write " << c.output << '\n';
      return kExitInvalidConfig;
    }
    out << result.text;
  }
  return result.exit_code;
}

}  // namespace eqcomm::cli
