// eqcomm: build and audit Equality protocols, codes and factorizations.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "eqcomm/cli.hpp"

namespace {

using eqcomm::cli::RunConfig;

struct Flags {
  std::size_t n = 0;
  std::size_t m = 0;
  std::string delta;
  std::string mode = "exhaustive";
  std::string corrupt;
};

void add_common(CLI::App* sub, RunConfig& cfg, Flags& flags) {
  sub->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
  sub->add_option("--out,-o", cfg.output, "report path (stdout if omitted)");
  sub->add_option("--format", cfg.format, "json, csv or auto (csv for sink-xor matrix)")->capture_default_str();
  sub->add_option("--mode", flags.mode, "exhaustive or sampled")->capture_default_str();
  sub->add_flag("!--no-wall-time", cfg.wall_time, "omit wall_time_s from the report");
}

void add_n_eps(CLI::App* sub, RunConfig& cfg, Flags& flags) {
  sub->add_option("--n", flags.n, "input bits")->required();
  sub->add_option("--epsilon,--eps", cfg.epsilon, "error as p/q")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  Flags flags;
  CLI::App app{"Equality communication protocols: construct, verify, audit, export"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-code", "sample and certify a GF(2) code of length ceil(16n/eps)");
  add_n_eps(gen, cfg, flags);
  gen->add_option("--save", cfg.save, "write the code (GF2C)");

  auto* verify = app.add_subcommand("verify-code", "check the distance band of a saved code");
  verify->add_option("--input", cfg.input, "GF2C file")->required();
  verify->add_option("--epsilon,--eps", cfg.epsilon, "band from eps: delta^2 = eps/4")->capture_default_str();
  verify->add_option("--delta", flags.delta, "explicit band half-width as p/q");

  auto* classical = app.add_subcommand("classical-eq", "private-coin Equality protocol with audited error");
  add_n_eps(classical, cfg, flags);
  classical->add_option("--split", cfg.split, "half or low_cost")->capture_default_str();
  classical->add_option("--save", cfg.save, "write the protocol file");

  auto* pure = app.add_subcommand("quantum-pure", "fingerprint protocol from a certified code");
  add_n_eps(pure, cfg, flags);
  pure->add_option("--save", cfg.save, "write the code (GF2C)");

  auto* mixed = app.add_subcommand("quantum-mixed", "mixed-state protocol from Haar projectors");
  add_n_eps(mixed, cfg, flags);
  mixed->add_option("--save", cfg.save, "write the projector family directory");

  auto* extract = app.add_subcommand("extract-psd", "psd factorization of a protocol's acceptance matrix");
  add_n_eps(extract, cfg, flags);
  extract->add_option("--family", cfg.variant, "pure or mixed")->required();

  auto* certify = app.add_subcommand("certify-lb", "lower-bound certificate for the pure protocol");
  add_n_eps(certify, cfg, flags);
  certify->add_option("--corrupt", flags.corrupt, "x,y: replace state x by state y");

  auto* inn = app.add_subcommand("identity-nonneg", "nonnegative factorization of the Identity");
  add_n_eps(inn, cfg, flags);
  inn->add_option("--split", cfg.split, "half or low_cost")->capture_default_str();
  inn->add_option("--save", cfg.save, "write the factorization directory");

  auto* ipsd = app.add_subcommand("identity-psd", "psd factorization of the Identity");
  add_n_eps(ipsd, cfg, flags);
  ipsd->add_option("--save", cfg.save, "write the factorization directory");

  auto* sink = app.add_subcommand("sink-xor", "SINK o XOR matrix and its factorizations");
  sink->add_option("kind", cfg.variant, "matrix, nonneg or psd")->required();
  sink->add_option("--m", flags.m, "vertices")->required();
  sink->add_option("--split", cfg.split, "half or low_cost (nonneg)")->capture_default_str();
  sink->add_option("--save", cfg.save, "write the factorization directory");

  auto* va = app.add_subcommand("verify-approx", "re-audit a saved factorization directory");
  va->add_option("--input", cfg.input, "factorization directory")->required();

  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) add_common(sub, cfg, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return eqcomm::cli::kExitInvalidConfig;
  }

  cfg.command = app.get_subcommands().front()->get_name();
  if (const auto* opt = app.get_subcommands().front()->get_option_no_throw("--n"); opt && opt->count() > 0)
    cfg.n = flags.n;
  if (sink->parsed()) cfg.m = flags.m;
  if (!flags.delta.empty()) cfg.delta = flags.delta;
  if (flags.mode == "exhaustive") {
    cfg.mode = eqcomm::VerifyMode::exhaustive;
  } else if (flags.mode == "sampled") {
    cfg.mode = eqcomm::VerifyMode::sampled;
  } else {
    std::cerr << "eqcomm: --mode must be exhaustive or sampled\n";
    return eqcomm::cli::kExitInvalidConfig;
  }
  if (!flags.corrupt.empty()) {
    const auto comma = flags.corrupt.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      cfg.corrupt = std::make_pair(std::stoull(flags.corrupt.substr(0, comma)), std::stoull(flags.corrupt.substr(comma + 1)));
    } catch (const std::exception&) {
      std::cerr << "eqcomm: --corrupt expects x,y\n";
      return eqcomm::cli::kExitInvalidConfig;
    }
  }
  return eqcomm::cli::run_and_write(cfg, std::cout, std::cerr);
}
