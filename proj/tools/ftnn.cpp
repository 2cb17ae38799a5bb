// Command-line front end for the finite-time training experiments.
#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "ftnn/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

struct Options {
  std::string config;
  std::string out;
  long long seed = -1;
  bool unsafe_alpha = false;
  std::vector<std::string> sets;
};

ftnn::ExperimentConfig load(const Options& o) {
  std::map<std::string, std::string> ov;
  for (const auto& s : o.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ftnn::ConfigError({"--set expects key=value, got '" + s + "'"});
    ov[std::string(ftnn::trim(s.substr(0, eq)))] = std::string(ftnn::trim(s.substr(eq + 1)));
  }
  if (!o.out.empty()) ov["output.dir"] = o.out;
  if (o.seed >= 0) ov["seed"] = std::to_string(o.seed);
  if (o.unsafe_alpha) ov["unsafe_alpha"] = "true";
  if (o.config.empty()) return ftnn::parse_config_text("", ov);
  return ftnn::load_config(o.config, ov);
}

int run(const Options& o, ftnn::CommandResult (*cmd)(const ftnn::ExperimentConfig&)) {
  ftnn::ExperimentConfig cfg;
  try {
    cfg = load(o);
  } catch (const ftnn::ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return kExitInput;
  } catch (const ftnn::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  try {
    const auto res = cmd(cfg);
    std::cout << res.report;
    std::cout << "outputs written to " << cfg.out_dir << '\n';
    return kExitOk;
  } catch (const ftnn::ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return kExitInput;
  } catch (const ftnn::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ftnn::EmptyFileError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ftnn::MissingColumnError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ftnn::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ftnn::ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ftnn::AssumptionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-time convergent training of small networks"};
  app.require_subcommand(1);
  Options opt;
  struct Cmd {
    const char* name;
    const char* help;
    ftnn::CommandResult (*fn)(const ftnn::ExperimentConfig&);
  };
  const Cmd cmds[] = {
      {"train", "integrate one training run", ftnn::cmd_train},
      {"compare", "L1 vs L2 vs Lyapunov from the same initial weights", ftnn::cmd_compare},
      {"bound", "settling-time bound over the gain grid", ftnn::cmd_bound},
      {"perturb-sweep", "robustness runs over the M grid", ftnn::cmd_perturb_sweep},
      {"alpha-sweep", "runs over the alpha grid on a shared step size", ftnn::cmd_alpha_sweep},
      {"gradcheck", "backprop gradient vs central differences", ftnn::cmd_gradcheck},
  };
  ftnn::CommandResult (*chosen)(const ftnn::ExperimentConfig&) = nullptr;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", opt.config, "experiment config file");
    sub->add_option("-o,--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "RNG seed")->check(CLI::NonNegativeNumber);
    sub->add_flag("--unsafe-alpha", opt.unsafe_alpha, "admit alpha = 0 (instability demo)");
    sub->add_option("--set", opt.sets, "override a config key, key=value (repeatable)");
    auto fn = c.fn;
    sub->callback([&chosen, fn] { chosen = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }
  return run(opt, chosen);
}
