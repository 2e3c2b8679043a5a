#include "hams/experiment.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kNumeric = 4 };

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config file (TOML subset)")->required();
  cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", f.out, "Output directory (overrides the config)");
  cmd->add_option("--threads", f.threads, "Worker threads (overrides the config)");
}

hams::ExperimentConfig load(const CommonFlags& f) {
  hams::json raw;
  try {
    raw = hams::toml_lite::parse_file(f.config);
  } catch (const hams::toml_lite::ParseError& e) {
    throw hams::ConfigError(e.what());
  }
  return hams::with_overrides(std::move(raw), f.seed, f.out, f.threads);
}

void print_table(const hams::ExperimentResult& res, const hams::ExperimentConfig& cfg) {
  std::cout << "config " << res.config_hash << ", seed " << cfg.seed << "\n";
  for (const auto& t : res.tasks) {
    std::cout << "  " << t.label << " rep " << t.repetition << ": eps " << t.epsilon;
    if (!t.tune_only)
      std::cout << ", acceptance " << t.acceptance_rate << ", ESS (min, median, max) = ("
                << t.ess.min << ", " << t.ess.median << ", " << t.ess.max << ")";
    std::cout << '\n';
  }
  if (!res.files.empty())
    std::cout << "wrote " << res.files.size() << " files to " << cfg.output_dir << '\n';
}

int diagnose(const std::string& draws, int K, int lags, const std::optional<std::string>& out) {
  const auto d = hams::read_draw_file(draws);
  const auto rep = hams::summarize_chain(d.values, 0.0, K);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (out) {
    std::filesystem::create_directories(*out);
    const auto path = std::filesystem::path(*out) / "diagnose.csv";
    file.open(path);
    if (!file) throw std::ios_base::failure("cannot open " + path.string());
    os = &file;
  }
  *os << "# " << hams::json{{"file", "diagnose"}, {"source", draws},
                            {"version", hams::kToolkitVersion}}.dump()
      << "\ncolumn,ess,acf_lag1\n";
  std::size_t pos = 0;
  const int L = std::max(1, std::min<int>(lags, static_cast<int>(d.values.rows()) - 2));
  for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
    *os << d.columns[j] << ',';
    if (pos < rep.coordinates.size() && rep.coordinates[pos] == j) {
      const auto a = hams::acf(d.values.col(j), L);
      *os << hams::detail::num(rep.per_coordinate_ess[pos], 10) << ','
          << hams::detail::num(a[0], 10) << '\n';
      ++pos;
    } else {
      *os << "NA,NA\n";
    }
  }
  *os << "# min " << rep.min << " median " << rep.median << " max " << rep.max << " n " << rep.n
      << " K " << rep.K << '\n';
  if (!*os) throw std::ios_base::failure("write failed");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seeded HAMS experiment runner"};
  app.require_subcommand(1);

  CommonFlags sample_f, tune_f, bench_f;
  std::optional<std::string> sample_method;
  auto* sample = app.add_subcommand("sample", "Run one chain (first sampler unless --method)");
  add_common(sample, sample_f);
  sample->add_option("--method", sample_method, "Sampler label to run");

  auto* tune = app.add_subcommand("tune", "Run burn-in tuning only and write the traces");
  add_common(tune, tune_f);

  auto* bench = app.add_subcommand("bench", "Multi-method comparison over all repetitions");
  add_common(bench, bench_f);

  std::string draws;
  int K = 3000, lags = 50;
  std::optional<std::string> diag_out;
  auto* diag = app.add_subcommand("diagnose", "ESS and ACF for an existing draw file");
  diag->add_option("draws", draws, "Draw file written by sample or bench")->required();
  diag->add_option("--K", K, "Bartlett window cutoff");
  diag->add_option("--lags", lags, "ACF lags");
  diag->add_option("--out", diag_out, "Directory for diagnose.csv (stdout otherwise)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*diag) return diagnose(draws, K, lags, diag_out);
    if (*sample) {
      auto cfg = load(sample_f);
      hams::RunOptions opt;
      opt.only_label = sample_method.value_or(cfg.samplers.front().label);
      opt.repetitions = 1;
      print_table(hams::run_experiment(cfg, opt), cfg);
    } else if (*tune) {
      auto cfg = load(tune_f);
      hams::RunOptions opt;
      opt.tune_only = true;
      print_table(hams::run_experiment(cfg, opt), cfg);
    } else if (*bench) {
      auto cfg = load(bench_f);
      print_table(hams::run_experiment(cfg), cfg);
    }
  } catch (const hams::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const hams::NumericalError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const hams::DomainError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
