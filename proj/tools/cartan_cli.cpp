// cartan_cli: run moment, Lyapunov, Dirac-model and group-membership experiments.
//
// Exit status: 0 on success, 1 on usage or parameter errors, 2 when a
// verification check fails (the failing check is printed on stderr).

#include "cartan/experiment.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <string>

namespace {

// Accepts "100000" as well as "1e5".
long parse_count(const std::string& name, const std::string& s) {
  double v = 0.0;
  try {
    size_t used = 0;
    v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw cartan::ParameterError(name + " must be a number, got '" + s + "'");
  }
  if (!std::isfinite(v) || v < 0 || v != std::floor(v) || v > 1e15)
    throw cartan::ParameterError(name + " must be a non-negative integer, got '" + s + "'");
  return static_cast<long>(v);
}

struct Raw {
  std::string steps, burn_in, samples, checkpoint_every;
};

void add_output(CLI::App* sub, cartan::ExperimentConfig& c) {
  sub->add_option("--seed", c.seed, "root seed")->capture_default_str();
  sub->add_option("-o,--output", c.output, "output file, '-' for stdout");
  sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  sub->add_option("--workers", c.workers, "worker threads, 0 for hardware concurrency");
}

void add_chain(CLI::App* sub, cartan::ExperimentConfig& c, Raw& raw) {
  sub->add_option("--class", c.cls, "Cartan class label")->capture_default_str();
  sub->add_option("-n,--n", c.n, "size parameter")->capture_default_str();
  sub->add_option("-m,--m", c.m, "second size for U(n,m), O(n,m), SP(2n,2m); 0 means n");
  sub->add_option("--lambda", c.lambda, "coupling")->capture_default_str();
  sub->add_option("--sigma", c.sigma, "increment scale, 0 for the default");
  sub->add_option("--steps", raw.steps, "QR steps (accepts 1e6)");
  sub->add_option("--burn-in", raw.burn_in, "burn-in steps");
  sub->add_option("--replicas", c.replicas, "independent chains")->capture_default_str();
  sub->add_option("--moment-samples", raw.samples, "samples for the formula's moment inputs");
  sub->add_option("--checkpoint", c.checkpoint, "write a checkpoint file while running");
  sub->add_option("--resume", c.resume, "resume from a checkpoint file");
  sub->add_option("--checkpoint-every", raw.checkpoint_every, "steps between checkpoints");
  add_output(sub, c);
}

void apply_raw(cartan::ExperimentConfig& c, const Raw& raw) {
  if (!raw.steps.empty()) c.steps = parse_count("steps", raw.steps);
  if (!raw.burn_in.empty()) c.burn_in = parse_count("burn-in", raw.burn_in);
  if (!raw.samples.empty()) c.samples = parse_count("samples", raw.samples);
  if (!raw.checkpoint_every.empty()) c.checkpoint_every = parse_count("checkpoint-every", raw.checkpoint_every);
}

}  // namespace

int main(int argc, char** argv) {
  cartan::ExperimentConfig c;
  Raw raw;

  CLI::App app{"Random-matrix and Lyapunov spectrum experiments"};
  app.set_config("--config", "", "INI/TOML file; options go under [moments], [lyap], ...");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  auto* moments = app.add_subcommand("moments", "closed-form Haar moments against Monte Carlo");
  moments->add_option("--family", c.family, "unitary, orthogonal, symplectic, embedded_ci or product_spsp")
      ->capture_default_str();
  moments->add_option("-n,--n", c.n, "matrix size parameter")->capture_default_str();
  moments->add_option("--samples", raw.samples, "Haar samples per item (accepts 1e5)");
  moments->add_option("--inputs", c.inputs, "random inputs per item")->capture_default_str();
  add_output(moments, c);

  auto* lyap = app.add_subcommand("lyap", "Lyapunov spectrum of the random product toy model");
  add_chain(lyap, c, raw);

  auto* dirac = app.add_subcommand("dirac", "Lyapunov spectrum of a disordered Dirac model");
  add_chain(dirac, c, raw);
  dirac->add_option("--energy", c.energy, "energy; only classes A, AI and AII allow a nonzero value");

  auto* table1 = app.add_subcommand("table1", "transfer-matrix group membership for each class");
  table1->add_option("--class", c.cls, "Cartan class label or 'all'")->capture_default_str();
  table1->add_option("-n,--n", c.n, "channels")->capture_default_str();
  table1->add_option("-m,--m", c.m, "second channel count for A, C and D");
  table1->add_option("--lambda", c.lambda, "coupling")->capture_default_str();
  table1->add_option("--samples", raw.samples, "transfer steps per class");
  add_output(table1, c);

  auto* accept = app.add_subcommand("acceptance", "run the acceptance criteria");
  accept->add_option("--scale", c.scale, "multiplies every sample count")->capture_default_str();
  accept->add_option("--only", c.only, "comma-separated criteria")->delimiter(',')->check(CLI::Range(1, 8));
  add_output(accept, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto* sub : app.get_subcommands()) c.experiment = sub->get_name();

  try {
    apply_raw(c, raw);
    const cartan::Table t = cartan::run_experiment(c, std::cerr);
    cartan::write_table(t, c);
    if (!t.failures.empty()) {
      for (auto& f : t.failures) std::cerr << "verification failed: " << f << '\n';
      return 2;
    }
  } catch (const cartan::VerificationError& e) {
    std::cerr << "verification failed: " << e.what() << '\n';
    return 2;
  } catch (const cartan::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 1;
  } catch (const cartan::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return 1;
  } catch (const cartan::DomainError& e) {
    std::cerr << "outside the formula's domain: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
