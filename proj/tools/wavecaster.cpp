// wavecaster: synthetic data generation, training, rollout and evaluation.
//
//   wavecaster {synth|train|rollout|evaluate|case-study} [--config path] [--key value ...]
//
// Diagnostics go to stderr; stdout carries output paths and metrics only.
// Exit codes: 0 success, 2 usage/config, 3 data/format, 4 contract/shape.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "wavecast/config.hpp"
#include "wavecast/pipeline.hpp"

namespace {

using wavecast::RunConfig;

int run(const std::string& command, const RunConfig& cfg) {
  if (command == "synth") {
    std::cout << wavecast::run_synth(cfg).string() << "\n";
  } else if (command == "train") {
    const auto r = wavecast::run_train(cfg, [](const std::string& line) { std::cerr << line << "\n"; });
    std::cout << r.best.string() << "\n";
  } else if (command == "rollout") {
    std::cout << wavecast::run_rollout(cfg).string() << "\n";
  } else if (command == "evaluate") {
    const auto r = wavecast::run_evaluate(cfg);
    for (const auto& p : r.written) {
      const auto name = p.filename().string();
      if (name == wavecast::kSkillCsv || name == wavecast::kSummaryCsv) std::cout << p.string() << "\n";
    }
    std::cout << wavecast::render_summary_csv(r.reports);
  } else if (command == "case-study") {
    const auto cs = wavecast::run_case_study(cfg);
    std::cout << "init=" << wavecast::format_iso_time(cs.init) << " window=" << cs.window.row << ","
              << cs.window.col << "," << cs.window.rows << "," << cs.window.cols << "\n"
              << cs.report_csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wave forecasting with a vision transformer on a synthetic ocean"};
  app.set_version_flag("--version", std::string("wavecast ") + WAVECAST_VERSION);
  app.require_subcommand(1);
  app.footer("Configuration keys (every subcommand accepts all of them):\n" + wavecast::describe_config_keys());

  std::string config_path;
  std::map<std::string, std::string> overrides;
  const char* commands[][2] = {{"synth", "generate a synthetic dataset"},
                               {"train", "train a model; writes best.wckp, last.wckp and loss.csv"},
                               {"rollout", "autoregressive forecasts from a checkpoint"},
                               {"evaluate", "score forecast sets and write the figure CSVs"},
                               {"case-study", "storm-centred fields at leads 1, 4 and 7"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value config file; flags override it");
    for (const auto& key : wavecast::kConfigKeys) {
      sub->add_option_function<std::string>(
          std::string("--") + key.name, [&overrides, k = std::string(key.name)](const std::string& v) { overrides[k] = v; },
          key.doc);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return wavecast::exit_code(wavecast::ErrorKind::Usage);
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::parse(wavecast::read_text_file(config_path), config_path);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    return run(app.get_subcommands().front()->get_name(), cfg);
  } catch (const wavecast::Error& e) {
    std::cerr << e.what() << "\n";
    return wavecast::exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return wavecast::exit_code(wavecast::ErrorKind::Data);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
