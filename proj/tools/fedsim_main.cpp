// Command-line front end for the federated DP-GAN simulator.
//
//   fedsim run <config.json> [--seed N] [--out DIR]
//   fedsim sweep <config.json> --param <key.path> --values v1,v2,... [--out DIR]
//   fedsim compare <metrics.csv>...

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsim/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void emit_report(const fedsim::ExperimentReport& report, const fs::path& dir) {
  write_file(dir / "metrics.csv", report.metrics_csv());
  write_file(dir / "summary.json", report.summary() + "\n");
  if (report.generated_samples.size() > 0) {
    std::ostringstream samples;
    fedsim::write_dataset_csv(samples, report.generated_samples);
    write_file(dir / "samples.csv", samples.str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated differentially-private GAN training simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool has_seed = false;

  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--seed", seed_override, "Override the master seed")
      ->each([&](const std::string&) { has_seed = true; });
  run->add_option("--out", out_dir, "Output directory (default: config output_path)");

  std::string sweep_param;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run the config once per parameter value");
  sweep->add_option("config", config_path, "JSON experiment config")->required();
  sweep->add_option("--param", sweep_param, "Dotted key path, e.g. privacy.sigma_n")
      ->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seed", seed_override, "Override the master seed")
      ->each([&](const std::string&) { has_seed = true; });
  sweep->add_option("--out", out_dir, "Output directory");

  std::vector<std::string> report_paths;
  auto* compare = app.add_subcommand("compare", "Compare metrics CSVs from previous runs");
  compare->add_option("reports", report_paths, "metrics.csv files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      fedsim::ExperimentConfig cfg = fedsim::parse_config(read_file(config_path));
      if (has_seed) cfg.seed = seed_override;
      if (!out_dir.empty()) cfg.output_path = out_dir;
      fedsim::ExperimentReport report = fedsim::run_experiment(cfg);
      emit_report(report, cfg.output_path);
      std::cout << report.summary() << '\n';
      return 0;
    }

    if (sweep->parsed()) {
      nlohmann::ordered_json base =
          nlohmann::ordered_json::parse(read_file(config_path));
      std::string pointer = "/" + sweep_param;
      for (auto& c : pointer)
        if (c == '.') c = '/';

      std::ostringstream sweep_csv;
      sweep_csv << sweep_param << ",final_accuracy\n";
      for (const std::string& value : sweep_values) {
        nlohmann::ordered_json doc = base;
        doc[nlohmann::ordered_json::json_pointer(pointer)] =
            nlohmann::ordered_json::parse(value);
        fedsim::ExperimentConfig cfg = fedsim::parse_config(doc.dump());
        if (has_seed) cfg.seed = seed_override;
        if (!out_dir.empty()) cfg.output_path = out_dir;
        fedsim::ExperimentReport report = fedsim::run_experiment(cfg);
        const fs::path dir =
            fs::path(cfg.output_path) / (sweep_param + "=" + value);
        emit_report(report, dir);
        sweep_csv << value << ',' << report.final_accuracy << '\n';
        std::cout << sweep_param << " = " << value
                  << " -> final accuracy " << report.final_accuracy << '\n';
      }
      const fs::path base_dir = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
      write_file(base_dir / "sweep.csv", sweep_csv.str());
      return 0;
    }

    if (compare->parsed()) {
      std::vector<fedsim::ExperimentReport> reports;
      for (const auto& path : report_paths) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        reports.push_back(fedsim::report_from_csv(in, fs::path(path).parent_path().string().empty()
                                                          ? path
                                                          : fs::path(path).parent_path().filename().string()));
      }
      fedsim::ComparisonTable table = fedsim::compare_runs(reports);
      std::cout << table.to_csv();
      std::cout << "final";
      for (std::size_t i = 0; i < table.final_accuracy.size(); ++i)
        std::cout << ',' << table.final_accuracy[i];
      std::cout << "\ndelta_vs_first";
      for (std::size_t i = 0; i < table.final_delta_vs_first.size(); ++i)
        std::cout << ',' << table.final_delta_vs_first[i];
      std::cout << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
