// Scores two training-free baselines on a synthetic archive: persistence and a
// damped persistence that relaxes SWH and MWP toward climatology with each lead.
// Prints the per-lead skill table in the same CSV layout `wavecaster evaluate` writes.
//
//   sample_score_baselines [work_dir] [damping]

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>

#include "wavecast/pipeline.hpp"

namespace fs = std::filesystem;
using namespace wavecast;

namespace {

// Moves a field a fraction `keep` of the way from climatology to `from`.
void relax(GridField& f, const GridField& clim, double keep) {
  for (std::size_t c = 0; c < f.values.size(); ++c) {
    if (std::isnan(f.values[c])) continue;
    f.values[c] = clim.values[c] + keep * (f.values[c] - clim.values[c]);
  }
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "wavecast_baselines";
  const double damping = argc > 2 ? std::stod(argv[2]) : 0.85;

  try {
    RunConfig cfg = RunConfig::parse("lat_count=16\nlon_count=32\nn_steps=200\nseed=3\n");
    cfg.set("out", (work / "data").string());
    run_synth(cfg);

    const Dataset data = Dataset::open(work / "data");
    const auto inits = data.samples(Split::Test);
    const std::size_t leads = 7;

    const auto persistence = persistence_forecasts(data, inits, leads);
    auto damped = persistence;
    for (auto& s : damped) {
      double keep = 1.0;
      for (auto& w : s.leads) {
        keep *= damping;
        relax(w.swh, data.climatology(VarId::SWH), keep);
        relax(w.mwp, data.climatology(VarId::MWP), keep);
      }
    }

    const std::vector<LabelReport> reports{evaluate_forecasts("persistence", persistence, data),
                                           evaluate_forecasts("damped", damped, data)};
    std::cout << render_skill_csv(skill_curves(reports));
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e.kind());
  }
  return 0;
}
