#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <gtest/gtest.h>
#include <map>
#include <string>

#include "wavecast/pipeline.hpp"

using namespace wavecast;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "wavecast_cli";

struct Outcome {
  int code = -1;
  std::string out, err;
};

Outcome wavecaster(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string(WAVECASTER_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = read_text_file(out);
  o.err = read_text_file(err);
  return o;
}

const std::string kTiny =
    "--lat_count 8 --lon_count 16 --n_steps 60 --seed 5 --d_model 8 --n_heads 2 --n_enc_blocks 1 --n_dec_blocks 1 "
    "--mlp_ratio 2 --epochs 1 --batch_size 4 --max_train_samples 8 --max_val_samples 4";

std::map<std::string, std::string> digest(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text_file(e.path());
  return files;
}

const fs::path& dataset() {
  static const fs::path p = [] {
    const fs::path d = kWork / "data";
    fs::remove_all(d);
    const Outcome o = wavecaster("synth " + kTiny + " --out " + d.string());
    EXPECT_EQ(o.code, 0) << o.err;
    return d;
  }();
  return p;
}

const fs::path& checkpoint() {
  static const fs::path p = [] {
    const fs::path run = kWork / "run";
    fs::remove_all(run);
    const Outcome o = wavecaster("train " + kTiny + " --data " + dataset().string() + " --out " + run.string());
    EXPECT_EQ(o.code, 0) << o.err;
    EXPECT_EQ(o.out, (run / "best.wckp").string() + "\n");
    return run / "best.wckp";
  }();
  return p;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(wavecaster("").code, 2);
  EXPECT_EQ(wavecaster("forecast --out x").code, 2);
  const Outcome missing = wavecaster("synth --seed 7");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("--out"), std::string::npos) << missing.err;
  EXPECT_TRUE(missing.out.empty());
  EXPECT_EQ(wavecaster("synth --no_such_key 1 --out " + (kWork / "x").string()).code, 2);
  EXPECT_EQ(wavecaster("synth --lambda 0 --out " + (kWork / "x").string()).code, 2);
  EXPECT_EQ(wavecaster("synth --seed 1 --seed 2 --out " + (kWork / "x").string()).code, 2);
  EXPECT_EQ(wavecaster("synth --help").code, 0);
}

TEST(Cli, SynthIsIdempotent) {
  const fs::path a = kWork / "synth_a", b = kWork / "synth_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const Outcome oa = wavecaster("synth " + kTiny + " --out " + a.string());
  ASSERT_EQ(oa.code, 0) << oa.err;
  EXPECT_EQ(oa.out, (a / layout::kDatasetManifest).string() + "\n");
  ASSERT_EQ(wavecaster("synth " + kTiny + " --out " + b.string()).code, 0);
  auto da = digest(a), db = digest(b);
  da.erase(kRunConfigEcho);  // records the out path
  db.erase(kRunConfigEcho);
  EXPECT_EQ(da, db);
}

TEST(Cli, ConfigFileAndFlagOverrides) {
  const fs::path cfg = kWork / "run.cfg";
  write_text_file(cfg, "lat_count=8\nlon_count=16\nn_steps=40\nseed=3\n");
  const fs::path out = kWork / "cfg_data";
  fs::remove_all(out);
  ASSERT_EQ(wavecaster("synth --config " + cfg.string() + " --seed 4 --out " + out.string()).code, 0);
  const RunConfig echoed = RunConfig::parse(read_text_file(out / kRunConfigEcho));
  EXPECT_EQ(echoed.get("seed"), "4");
  EXPECT_EQ(echoed.get("n_steps"), "40");
  EXPECT_EQ(echoed.get("lr"), RunConfig().get("lr"));
  write_text_file(cfg, "bogus=1\n");
  EXPECT_EQ(wavecaster("synth --config " + cfg.string() + " --out " + out.string()).code, 2);
  EXPECT_EQ(wavecaster("synth --config " + (kWork / "absent.cfg").string() + " --out " + out.string()).code, 3);
}

TEST(Cli, TrainPrintsBestCheckpointAndSelectsConvLSTM) {
  EXPECT_TRUE(fs::exists(checkpoint()));
  const fs::path run = kWork / "run_convlstm";
  fs::remove_all(run);
  const Outcome o =
      wavecaster("train " + kTiny + " --model convlstm --hidden 4 --data " + dataset().string() + " --out " + run.string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(load_checkpoint(run / "best.wckp").model_text.rfind("model=convlstm", 0), 0u);
  EXPECT_TRUE(fs::exists(run / "loss.csv"));
  EXPECT_TRUE(fs::exists(run / kVersionFile));
}

TEST(Cli, RolloutWindSourcesAndMissingWind) {
  const std::string base = "rollout --data " + dataset().string() + " --checkpoint " + checkpoint().string() + " --leads 2";
  const fs::path truth = kWork / "fc_truth", degraded = kWork / "fc_degraded";
  fs::remove_all(truth);
  fs::remove_all(degraded);
  ASSERT_EQ(wavecaster(base + " --out " + truth.string()).code, 0);
  ASSERT_EQ(wavecaster(base + " --wind file:" + (dataset() / layout::kDegradedDir).string() + " --out " + degraded.string()).code, 0);
  const auto ft = read_forecasts(truth), fd = read_forecasts(degraded);
  EXPECT_NE(ft[0].leads[0].swh.values, fd[0].leads[0].swh.values);

  // A wind manifest missing one forcing time.
  const Dataset data = Dataset::open(dataset());
  const std::int64_t gap = data.samples(Split::Test).front() + 2 * data.dt();
  const fs::path winds = kWork / "partial_winds";
  fs::create_directories(winds);
  std::vector<ManifestRecord> kept;
  for (auto r : read_manifest(dataset() / layout::kDegradedDir / layout::kWindsManifest)) {
    if (r.time == gap) continue;
    r.path = (dataset() / layout::kDegradedDir / r.path).string();
    kept.push_back(r);
  }
  write_manifest(winds / layout::kWindsManifest, kept);
  const Outcome o = wavecaster(base + " --wind file:" + winds.string() + " --out " + (kWork / "fc_gap").string());
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find(format_iso_time(gap)), std::string::npos) << o.err;
}

TEST(Cli, EvaluateWritesFiguresAndRejectsOtherGrids) {
  const fs::path fc = kWork / "fc_eval", out = kWork / "eval";
  fs::remove_all(fc);
  fs::remove_all(out);
  ASSERT_EQ(wavecaster("rollout --data " + dataset().string() + " --checkpoint " + checkpoint().string() + " --out " +
                       fc.string()).code, 0);
  const Outcome o = wavecaster("evaluate --data " + dataset().string() + " --forecasts vit=" + fc.string() + " --out " +
                               out.string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find((out / kSkillCsv).string()), std::string::npos);
  EXPECT_NE(o.out.find("persistence,7,"), std::string::npos);
  for (const char* f : {"fig3_rmse_map_swh_1.csv", "fig3_rmse_map_mwd_7.csv", "fig4_mre_swh_3.csv", "fig4_mre_mwp_7.csv",
                        "fig5_rmse_by_height.csv", kSkillCsv, kSummaryCsv, kRunConfigEcho, kVersionFile}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }

  const fs::path small = kWork / "small_data", small_fc = kWork / "small_fc";
  fs::remove_all(small);
  std::string small_args = kTiny;
  small_args.replace(small_args.find("--lat_count 8"), 13, "--lat_count 4");
  ASSERT_EQ(wavecaster("synth " + small_args + " --out " + small.string()).code, 0);
  const Dataset sd = Dataset::open(small);
  write_forecasts(persistence_forecasts(sd, sd.samples(Split::Test), 7), ForecastInfo{"truth", 7, sd.dt(), "persistence"},
                  small_fc);
  const Outcome bad = wavecaster("evaluate --data " + dataset().string() + " --forecasts small=" + small_fc.string() +
                                 " --out " + (kWork / "bad_eval").string());
  EXPECT_EQ(bad.code, 4);
  EXPECT_NE(bad.err.find(sd.geometry().describe()), std::string::npos) << bad.err;
  EXPECT_NE(bad.err.find(Dataset::open(dataset()).geometry().describe()), std::string::npos) << bad.err;
}

TEST(Cli, CaseStudyReportAndBounds) {
  const std::string base = "case-study --data " + dataset().string() + " --checkpoint " + checkpoint().string();
  const Outcome o = wavecaster(base + " --window_size 4 --out " + (kWork / "case").string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find(kCaseReportHeader), std::string::npos);
  const Outcome b = wavecaster(base + " --window 0,14,4,4 --out " + (kWork / "case_bad").string());
  EXPECT_EQ(b.code, 2);
  EXPECT_NE(b.err.find("bounds error"), std::string::npos) << b.err;
}

TEST(Cli, CorruptInputsExitThree) {
  const fs::path bad = kWork / "corrupt.wckp";
  auto bytes = read_file_bytes(checkpoint());
  bytes[0] = 'X';
  write_file_bytes(bad, bytes);
  const Outcome o = wavecaster("rollout --data " + dataset().string() + " --checkpoint " + bad.string() + " --out " +
                               (kWork / "fc_corrupt").string());
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find("format error"), std::string::npos) << o.err;
  EXPECT_EQ(wavecaster("train --data " + (kWork / "absent").string() + " --out " + (kWork / "r").string()).code, 3);
}
