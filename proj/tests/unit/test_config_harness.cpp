#include <gtest/gtest.h>
#include <torch/torch.h>

#include <opencv2/imgcodecs.hpp>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "udcnet/checkpoint.hpp"
#include "udcnet/config.hpp"
#include "udcnet/error.hpp"
#include "udcnet/harness.hpp"
#include "udcnet/reference.hpp"
#include "udcnet/trainer.hpp"

namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("udcnet_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Toy profile shrunk further for fast tests.
udcnet::RunConfig tiny_run(const fs::path& out) {
  auto cfg = udcnet::RunConfig::toy();
  cfg.model.backbone.toy_channels = {8, 8, 16, 16};
  cfg.model.channels = 8;
  cfg.optim.batch_size = 2;
  cfg.data.synthetic_samples = 4;
  cfg.output_dir = out.string();
  return cfg;
}

void write_dataset(const fs::path& root, const std::string& split, int n) {
  fs::create_directories(root / split / "images");
  fs::create_directories(root / split / "GT");
  for (int i = 0; i < n; ++i) {
    cv::Mat img(40, 48, CV_8UC3, cv::Scalar(20 * i, 100, 200));
    cv::Mat gt(40, 48, CV_8UC1, cv::Scalar(0));
    gt(cv::Rect(5 + i, 8, 20, 15)).setTo(255);
    img.setTo(cv::Scalar(250, 10, 10), gt);
    const std::string stem = "img" + std::to_string(i);
    cv::imwrite((root / split / "images" / (stem + ".png")).string(), img);
    cv::imwrite((root / split / "GT" / (stem + ".png")).string(), gt);
  }
}

}  // namespace

TEST(RunConfig, DefaultsFollowTheTrainingRecipe) {
  auto cfg = udcnet::RunConfig::defaults();
  EXPECT_EQ(cfg.optim.optimizer, "adam");
  EXPECT_EQ(cfg.optim.lr, 1e-4);
  EXPECT_EQ(cfg.optim.decay_rate, 0.1);
  EXPECT_EQ(cfg.optim.decay_every_epochs, 60);
  EXPECT_EQ(cfg.optim.epochs, 180);
  EXPECT_EQ(cfg.optim.batch_size, 40);
  EXPECT_EQ(cfg.model.image_size, 352);
  EXPECT_EQ(cfg.model.channels, 128);
  EXPECT_EQ(cfg.model.backbone.kind, udcnet::BackboneKind::kResNet50);
  EXPECT_EQ(cfg.model.dse.dilations, (std::vector<int64_t>{3, 6, 12, 18}));
  EXPECT_EQ(cfg.loss.window, 15);
  EXPECT_EQ(cfg.data.holdout_fraction, 0.1);
}

TEST(RunConfig, ToyProfile) {
  auto cfg = udcnet::RunConfig::profile("toy");
  EXPECT_EQ(cfg.model.backbone.kind, udcnet::BackboneKind::kToy);
  EXPECT_EQ(cfg.model.channels, 32);
  EXPECT_EQ(cfg.model.image_size, 64);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_THROW(udcnet::RunConfig::profile("huge"), udcnet::Error);
}

TEST(RunConfig, SerializationIsIdempotent) {
  for (const auto& cfg : {udcnet::RunConfig::defaults(), udcnet::RunConfig::toy()}) {
    const auto once = cfg.to_json();
    const auto twice = udcnet::RunConfig::from_json(once).to_json();
    EXPECT_EQ(once, twice);
    EXPECT_EQ(once.back(), '\n');
  }
}

TEST(RunConfig, PartialFilesKeepDefaults) {
  auto cfg = udcnet::RunConfig::from_json(R"({"seed": 7, "optim": {"lr": 0.01}})");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.optim.lr, 0.01);
  EXPECT_EQ(cfg.optim.epochs, 180);
}

TEST(RunConfig, RejectsUnknownKeysBadTypesAndEnums) {
  EXPECT_THROW(udcnet::RunConfig::from_json(R"({"sede": 7})"), udcnet::Error);
  EXPECT_THROW(udcnet::RunConfig::from_json(R"({"model": {"chanels": 7}})"), udcnet::Error);
  EXPECT_THROW(udcnet::RunConfig::from_json(R"({"optim": {"lr": "fast"}})"), udcnet::Error);
  EXPECT_THROW(udcnet::RunConfig::from_json(R"({"model": {"backbone": {"kind": "vgg"}}})"), udcnet::Error);
  EXPECT_THROW(udcnet::RunConfig::from_json("{not json"), udcnet::Error);
  try {
    udcnet::RunConfig::from_json(R"({"model": {"fsdt": {"cdffn_global_mode": "x"}}})");
    FAIL();
  } catch (const udcnet::Error& e) {
    EXPECT_EQ(e.code(), "invalid_config");
  }
}

TEST(RunConfig, OverridesUseDottedPaths) {
  auto cfg = udcnet::RunConfig::defaults();
  cfg.apply_override("optim.lr=0.001");
  cfg.apply_override("model.dse.dilations=[1,2,4]");
  cfg.apply_override("output_dir=runs/x");
  cfg.apply_override("model.backbone.kind=toy");
  cfg.apply_override("model.use_djo=false");
  EXPECT_EQ(cfg.optim.lr, 0.001);
  EXPECT_EQ(cfg.model.dse.dilations, (std::vector<int64_t>{1, 2, 4}));
  EXPECT_EQ(cfg.output_dir, "runs/x");
  EXPECT_EQ(cfg.model.backbone.kind, udcnet::BackboneKind::kToy);
  EXPECT_FALSE(cfg.model.use_djo);
  EXPECT_THROW(cfg.apply_override("optim.nope=1"), udcnet::Error);
  EXPECT_THROW(cfg.apply_override("no_equals_sign"), udcnet::Error);
  EXPECT_THROW(cfg.apply_override("optim.lr=fast"), udcnet::Error);
}

TEST(RunConfig, ValidationCatchesBadValues) {
  auto cfg = udcnet::RunConfig::toy();
  cfg.optim.lr = 0.0;
  EXPECT_THROW(cfg.validate(), udcnet::Error);
  cfg = udcnet::RunConfig::toy();
  cfg.model.dse.dilations = {6, 3};
  EXPECT_THROW(cfg.validate(), udcnet::Error);
  cfg = udcnet::RunConfig::toy();
  cfg.loss.window = 14;
  EXPECT_THROW(cfg.validate(), udcnet::Error);
}

TEST(StepLr, DecaysTenfoldEverySixtyEpochs) {
  EXPECT_DOUBLE_EQ(udcnet::step_lr(1e-4, 0.1, 60, 0), 1e-4);
  EXPECT_DOUBLE_EQ(udcnet::step_lr(1e-4, 0.1, 60, 59), 1e-4);
  EXPECT_NEAR(udcnet::step_lr(1e-4, 0.1, 60, 60), 1e-5, 1e-18);
  EXPECT_NEAR(udcnet::step_lr(1e-4, 0.1, 60, 120), 1e-6, 1e-19);
  EXPECT_NEAR(udcnet::step_lr(1e-4, 0.1, 60, 179), 1e-6, 1e-19);
}

TEST(Reference, PublishedRows) {
  auto table = udcnet::load_reference_table();
  EXPECT_EQ(table.label, "published, not locally reproduced");
  EXPECT_EQ(table.value("ORSSD", "UDCNet-R50", "mae"), 0.0068);
  EXPECT_EQ(table.value("ORSSD", "UDCNet-R50", "f_max"), 0.9267);
  EXPECT_EQ(table.value("ORSSD", "UDCNet-R50", "s_measure"), 0.9389);
  EXPECT_EQ(table.value("ORSSD", "UDCNet-R50", "e_measure"), 0.9770);
  EXPECT_EQ(table.value("EORSSD", "UDCNet-PVT", "mae"), 0.0050);
  EXPECT_EQ(table.value("EORSSD", "UDCNet-PVT", "s_measure"), 0.9017);
  auto text = udcnet::harness::cmd_reference("ORSSD");
  EXPECT_NE(text.find("published, not locally reproduced"), std::string::npos);
  EXPECT_NE(text.find("0.9389"), std::string::npos);
}

TEST(Reference, UnknownDatasetListsKnownNames) {
  try {
    udcnet::harness::cmd_reference("DUTS");
    FAIL();
  } catch (const udcnet::Error& e) {
    EXPECT_EQ(e.code(), "unknown_dataset");
    const std::string msg = e.what();
    for (const char* name : {"ORSSD", "EORSSD", "ORSI-4199"}) EXPECT_NE(msg.find(name), std::string::npos);
  }
}

TEST(Checkpoint, RoundTripAndMismatchRejection) {
  TempDir tmp;
  auto cfg = tiny_run(tmp / "run");
  torch::manual_seed(1);
  udcnet::UdcNet a(cfg.model);
  udcnet::TrainState state{17, 0.25};
  const auto path = (tmp / "ck.pt").string();
  udcnet::save_checkpoint(path, cfg, *a, nullptr, state);

  torch::manual_seed(2);
  udcnet::UdcNet b(cfg.model);
  auto restored = udcnet::load_checkpoint(path, cfg, *b, nullptr);
  EXPECT_EQ(restored.step, 17);
  EXPECT_EQ(restored.best_val_mae, 0.25);
  auto pb = b->named_parameters(true);
  for (const auto& item : a->named_parameters(true)) EXPECT_TRUE(torch::equal(item.value(), pb[item.key()]));
  auto bb = b->named_buffers(true);
  for (const auto& item : a->named_buffers(true)) EXPECT_TRUE(torch::equal(item.value(), bb[item.key()]));
  EXPECT_EQ(udcnet::read_checkpoint_config(path).to_json(), cfg.to_json());

  auto other = cfg;
  other.model.channels = 16;
  udcnet::UdcNet c(other.model);
  try {
    udcnet::load_checkpoint(path, other, *c, nullptr);
    FAIL();
  } catch (const udcnet::Error& e) {
    EXPECT_EQ(e.code(), "checkpoint");
  }
  EXPECT_THROW(udcnet::load_checkpoint((tmp / "missing.pt").string(), cfg, *b, nullptr), udcnet::Error);
}

TEST(Trainer, LearningRateFollowsEpochs) {
  TempDir tmp;
  auto cfg = tiny_run("");
  cfg.optim.lr = 1e-4;
  auto sets = udcnet::harness::training_sets(cfg);
  udcnet::Trainer trainer(cfg, sets.train);
  EXPECT_EQ(trainer.steps_per_epoch(), 2);
  EXPECT_DOUBLE_EQ(trainer.lr_at_step(0), 1e-4);
  EXPECT_NEAR(trainer.lr_at_step(2 * 60), 1e-5, 1e-18);
  EXPECT_NEAR(trainer.lr_at_step(2 * 120), 1e-6, 1e-19);
}

TEST(Trainer, ResumeReproducesSubsequentLosses) {
  torch::set_num_threads(1);
  TempDir tmp;
  auto straight = tiny_run(tmp / "straight");
  straight.optim.max_steps = 5;
  std::ostringstream log;
  auto full = udcnet::harness::cmd_train(straight, "", log);
  ASSERT_EQ(full.losses.size(), 5u);
  EXPECT_TRUE(fs::exists(tmp / "straight/last.pt"));
  EXPECT_TRUE(fs::exists(tmp / "straight/config.json"));
  EXPECT_NE(log.str().find("train_mae="), std::string::npos);

  auto first = tiny_run(tmp / "first");
  first.optim.max_steps = 3;
  auto head = udcnet::harness::cmd_train(first, "", log);
  ASSERT_EQ(head.losses.size(), 3u);

  auto second = tiny_run(tmp / "second");
  second.optim.max_steps = 5;
  auto tail = udcnet::harness::cmd_train(second, (tmp / "first/last.pt").string(), log);
  ASSERT_EQ(tail.losses.size(), 2u);
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(head.losses[i], full.losses[i]) << i;
  EXPECT_EQ(tail.losses[0], full.losses[3]);
  EXPECT_EQ(tail.losses[1], full.losses[4]);
}

TEST(Harness, GroundTruthAgainstItself) {
  TempDir tmp;
  write_dataset(tmp / "data", "test", 3);
  auto cfg = tiny_run(tmp / "run");
  cfg.data.synthetic_samples = 0;
  cfg.data.root = (tmp / "data").string();
  std::ostringstream log;
  auto report = udcnet::harness::cmd_eval_maps(cfg, (tmp / "data/test/GT").string(), "test",
                                               (tmp / "eval").string(), log);
  EXPECT_EQ(report.mae, 0.0);
  EXPECT_NEAR(report.f_max, 1.0, 1e-12);
  EXPECT_NEAR(report.s_measure, 1.0, 1e-6);
  EXPECT_NEAR(report.e_measure, 1.0, 1e-12);

  std::ifstream lines(tmp / "eval/per_image.jsonl");
  std::string line;
  double mae_sum = 0.0;
  int n = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    mae_sum += j["mae"].get<double>();
    ++n;
  }
  EXPECT_EQ(n, 3);
  auto agg = nlohmann::json::parse(slurp(tmp / "eval/report.json"));
  EXPECT_NEAR(agg["mae"].get<double>(), mae_sum / n, 1e-9);
  for (const char* key : {"mae", "f_max", "f_avg", "f_weighted", "s_measure", "e_measure"}) {
    EXPECT_TRUE(agg.contains(key)) << key;
  }

  udcnet::harness::cmd_export_curves((tmp / "eval/report.json").string(), (tmp / "curves.csv").string());
  EXPECT_EQ(slurp(tmp / "curves.csv"), slurp(tmp / "eval/curves.csv"));
}

TEST(Harness, EvalMapsNeedsEveryPrediction) {
  TempDir tmp;
  write_dataset(tmp / "data", "test", 2);
  fs::create_directories(tmp / "preds");
  fs::copy_file(tmp / "data/test/GT/img0.png", tmp / "preds/img0.png");
  auto cfg = tiny_run(tmp / "run");
  cfg.data.synthetic_samples = 0;
  cfg.data.root = (tmp / "data").string();
  std::ostringstream log;
  EXPECT_THROW(udcnet::harness::cmd_eval_maps(cfg, (tmp / "preds").string(), "test", "", log), udcnet::Error);
}

TEST(Harness, FolderTrainingFailsEarlyOnMissingData) {
  auto cfg = tiny_run("");
  cfg.data.synthetic_samples = 0;
  cfg.data.root = "/nonexistent/udcnet";
  EXPECT_THROW(udcnet::harness::training_sets(cfg), udcnet::Error);
  cfg.data.root.clear();
  EXPECT_THROW(udcnet::harness::training_sets(cfg), udcnet::Error);
}

TEST(Harness, InferWritesStemMatchedMapsReproducibly) {
  torch::set_num_threads(1);
  TempDir tmp;
  write_dataset(tmp / "data", "test", 3);
  auto cfg = tiny_run(tmp / "run");
  cfg.optim.max_steps = 1;
  std::ostringstream log;
  auto summary = udcnet::harness::cmd_train(cfg, "", log);
  ASSERT_FALSE(summary.last_checkpoint.empty());

  const auto images = (tmp / "data/test/images").string();
  EXPECT_EQ(udcnet::harness::cmd_infer(cfg, summary.last_checkpoint, images, (tmp / "a").string()), 3u);
  EXPECT_EQ(udcnet::harness::cmd_infer(cfg, summary.last_checkpoint, images, (tmp / "b").string()), 3u);
  for (int i = 0; i < 3; ++i) {
    for (const char* kind : {"saliency", "edge"}) {
      const auto name = std::string(kind) + "/img" + std::to_string(i) + ".png";
      ASSERT_TRUE(fs::exists(tmp / "a" / name)) << name;
      EXPECT_EQ(slurp(tmp / "a" / name), slurp(tmp / "b" / name)) << name;
      cv::Mat m = cv::imread((tmp / "a" / name).string(), cv::IMREAD_UNCHANGED);
      EXPECT_EQ(m.type(), CV_8UC1);
      EXPECT_EQ(m.rows, 40);
      EXPECT_EQ(m.cols, 48);
    }
  }

  std::ostringstream eval_log;
  auto report = udcnet::harness::cmd_eval(cfg, summary.last_checkpoint, "test", (tmp / "eval").string(), eval_log);
  EXPECT_GE(report.mae, 0.0);
  EXPECT_LE(report.mae, 1.0);
  EXPECT_TRUE(fs::exists(tmp / "eval/curves.csv"));
}

TEST(Harness, CountParamsReportsBothNumbers) {
  auto text = udcnet::harness::cmd_count_params(tiny_run(""));
  EXPECT_NE(text.find("params="), std::string::npos);
  EXPECT_NE(text.find("macs="), std::string::npos);
}
