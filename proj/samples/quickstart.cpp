// Small end-to-end run through the library: synthesize a toy archive, train a
// tiny ViT for one epoch, roll it out over the test split and score it against
// persistence. Takes a few seconds.
//
//   sample_quickstart [work_dir]

#include <filesystem>
#include <iostream>

#include "wavecast/pipeline.hpp"

namespace fs = std::filesystem;
using namespace wavecast;

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "wavecast_quickstart";
  fs::remove_all(work);

  RunConfig cfg = RunConfig::parse(
      "lat_count=16\nlon_count=32\nn_steps=120\nseed=11\n"
      "d_model=16\nn_heads=2\nn_enc_blocks=1\nn_dec_blocks=1\nresidual=1\n"
      "epochs=1\nbatch_size=4\n");

  try {
    cfg.set("out", (work / "data").string());
    std::cout << "dataset   " << run_synth(cfg) << "\n";

    cfg.set("data", (work / "data").string());
    cfg.set("out", (work / "run").string());
    const TrainResult tr = run_train(cfg, [](const std::string& line) { std::cout << "  " << line << "\n"; });
    std::cout << "checkpoint " << tr.best << "\n";

    cfg.set("checkpoint", tr.best.string());
    cfg.set("out", (work / "forecasts").string());
    std::cout << "forecasts " << run_rollout(cfg) << "\n";

    cfg.set("forecasts", "vit=" + (work / "forecasts").string());
    cfg.set("out", (work / "eval").string());
    const EvaluateResult ev = run_evaluate(cfg);
    std::cout << "\n" << render_summary_csv(ev.reports);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e.kind());
  }
  return 0;
}
