// Command-line driver: seeded, reproducible experiment runs with CSV
// reports.  Exit codes: 0 success, 1 usage error, 2 asserted-property
// failure, 3 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "recert/experiment.hpp"

namespace {

struct SubOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
};

void attach_options(CLI::App* sub, SubOptions* opts) {
  sub->add_option("--config", opts->config_path, "experiment config file")
      ->required();
  sub->add_option("--seed", [opts](const CLI::results_t& values) {
        try {
          opts->seed = std::stoull(values.at(0));
        } catch (const std::exception&) {
          return false;
        }
        return true;
      },
      "master seed override (u64)");
  sub->add_option("--workers", [opts](const CLI::results_t& values) {
        try {
          const int w = std::stoi(values.at(0));
          if (w < 1) return false;
          opts->workers = w;
        } catch (const std::exception&) {
          return false;
        }
        return true;
      },
      "worker threads for trial-level parallelism");
  sub->add_option("--out", [opts](const CLI::results_t& values) {
        opts->out_dir = values.at(0);
        return true;
      },
      "output directory override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recert: augmented restricted-eigenvalue toolkit for corrupted "
               "Gaussian designs"};
  app.require_subcommand(1);

  const std::pair<const char*, recert::ExperimentKind> kinds[] = {
      {"audit", recert::ExperimentKind::audit},
      {"bounds", recert::ExperimentKind::bounds},
      {"certify", recert::ExperimentKind::certify},
      {"verify-lemmas", recert::ExperimentKind::verify_lemmas},
      {"theorem-mc", recert::ExperimentKind::theorem_mc},
      {"solve", recert::ExperimentKind::solve},
  };

  SubOptions opts;
  for (const auto& [name, kind] : kinds) {
    CLI::App* sub = app.add_subcommand(
        name, std::string("run a '") + name + "' experiment");
    attach_options(sub, &opts);
    (void)kind;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  recert::ExperimentKind expected = recert::ExperimentKind::audit;
  for (const auto& [name, kind] : kinds)
    if (app.get_subcommand(name)->parsed()) expected = kind;

  try {
    recert::ExperimentConfig config = recert::parse_config_file(opts.config_path);
    if (config.kind != expected) {
      std::cerr << "error: config kind '" << recert::kind_name(config.kind)
                << "' does not match subcommand '"
                << recert::kind_name(expected) << "'\n";
      return 1;
    }
    recert::RunOverrides overrides;
    overrides.seed = opts.seed;
    overrides.workers = opts.workers;
    overrides.out_dir = opts.out_dir;
    const recert::RunReport report = recert::run_experiment(config, overrides);
    std::cout << "records: " << report.records_path << "\n"
              << "summary: " << report.summary_path << "\n";
    for (const std::string& line : report.summary) std::cout << line << "\n";
    if (report.property_failure) {
      std::cerr << "asserted property FAILED\n";
      return 2;
    }
    return 0;
  } catch (const recert::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const recert::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
