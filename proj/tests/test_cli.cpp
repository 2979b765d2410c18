#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "test_helpers.hpp"
#include "zonescan/cli.hpp"
#include "zonescan/dataset.hpp"
#include "zonescan/threat_table.hpp"
#include "zonescan/util.hpp"

using namespace zonescan;

namespace {

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("zonescan");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({"no-such-command"}) == 2);
  CHECK(cli({"synth", "--no-such-flag"}) == 2);
  CHECK(cli({}) == 2);
}

TEST_CASE("stage failures exit with 1") {
  TempDir dir("clifail");
  CHECK(cli({"--work", dir.str(), "preprocess"}) == 1);  // no volumes yet
  CHECK(cli({"--work", dir.str(), "train"}) == 1);       // no dataset
}

TEST_CASE("synth writes volumes and a threat table") {
  TempDir dir("clisynth");
  CHECK(cli({"--work", dir.str(), "synth", "--bodies", "5", "--threats", "2",
             "--seed", "7"}) == 0);

  std::size_t volumes = 0;
  for (const auto& e :
       std::filesystem::directory_iterator(dir.path / "volumes"))
    volumes += e.path().extension() == ".svol" ? 1 : 0;
  CHECK(volumes == 5);

  const auto threats = read_threat_table((dir.path / "threats.csv").string());
  CHECK(threats.size() <= 10);
  CHECK(!threats.empty());

  SUBCASE("synth is idempotent byte for byte") {
    const std::string vol0 = (dir.path / "volumes" / "b0000.svol").string();
    const std::string before = read_text_file(vol0);
    CHECK(cli({"--work", dir.str(), "synth", "--bodies", "5", "--threats", "2",
               "--seed", "7"}) == 0);
    CHECK(read_text_file(vol0) == before);
  }
}

TEST_CASE("full pipeline produces every artifact") {
  TempDir dir("clipipe");
  const std::string work = dir.str();

  REQUIRE(cli({"--work", work, "synth", "--bodies", "4", "--threats", "2",
               "--seed", "11"}) == 0);
  REQUIRE(cli({"--work", work, "preprocess"}) == 0);
  REQUIRE(cli({"--work", work, "segment", "--point-clouds"}) == 0);
  REQUIRE(cli({"--work", work, "build-dataset"}) == 0);
  REQUIRE(cli({"--work", work, "train", "--epochs", "2"}) == 0);
  REQUIRE(cli({"--work", work, "evaluate"}) == 0);

  for (const char* leaf :
       {"masks/b0000.svol", "zones/b0000.svol",
        "zones/b0000_points/zone9_points.csv", "dataset/manifest.csv",
        "dataset/mean_image.svol", "model/model.ckpt",
        "model/training_log.csv", "reports/confusion_matrix.csv",
        "reports/metrics.csv", "reports/topk.csv", "reports/curves.svg",
        "reports/pr_bars.svg"})
    CHECK(file_exists((dir.path / leaf).string()));

  SUBCASE("build-dataset reruns byte-identically") {
    const std::string manifest = (dir.path / "dataset" / "manifest.csv").string();
    const std::string before = read_text_file(manifest);
    REQUIRE(cli({"--work", work, "build-dataset"}) == 0);
    CHECK(read_text_file(manifest) == before);
  }

  SUBCASE("classify-one reports probabilities and layer stats") {
    const DatasetManifest m = read_manifest(
        (dir.path / "dataset" / "manifest.csv").string());
    REQUIRE(!m.rows.empty());
    const std::string img =
        (dir.path / "dataset" / m.rows[0].image_path).string();
    CHECK(cli({"--work", work, "classify-one", img, "--stats"}) == 0);
    CHECK(file_exists((dir.path / "reports" / "layer_stats.csv").string()));
  }

  SUBCASE("report re-renders charts from the saved CSVs") {
    const std::string bars = (dir.path / "reports" / "pr_bars.svg").string();
    const std::string before = read_text_file(bars);
    CHECK(cli({"--work", work, "report"}) == 0);
    CHECK(read_text_file(bars) == before);
  }

  SUBCASE("evaluate on the val split works too") {
    CHECK(cli({"--work", work, "evaluate", "--split", "val"}) == 0);
  }
}

TEST_CASE("slice-parallel preprocessing matches the reference path") {
  TempDir dir("clithreads");
  const std::string work = dir.str();
  REQUIRE(cli({"--work", work, "synth", "--bodies", "2", "--seed", "3"}) == 0);
  REQUIRE(cli({"--work", work, "--threads", "1", "preprocess"}) == 0);
  const std::string ref =
      read_text_file((dir.path / "masks" / "b0000.svol").string());
  REQUIRE(cli({"--work", work, "--threads", "3", "preprocess", "--out",
               (dir.path / "masks3").string()}) == 0);
  CHECK(read_text_file((dir.path / "masks3" / "b0000.svol").string()) == ref);
}

TEST_CASE("config file feeds defaults and flags override") {
  TempDir dir("clicfg");
  const std::string cfg_path = dir.file("run.cfg");
  atomic_write_file(cfg_path, "work_dir = " + dir.str() +
                                  "\nbodies = 3\n# comment\nsynth_seed = 5\n");
  CHECK(cli({"--config", cfg_path, "synth"}) == 0);
  std::size_t volumes = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path / "volumes"))
    volumes += e.path().extension() == ".svol" ? 1 : 0;
  CHECK(volumes == 3);

  // explicit flag beats the config value
  CHECK(cli({"--config", cfg_path, "synth", "--bodies", "2"}) == 0);
  volumes = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path / "volumes"))
    volumes += e.path().extension() == ".svol" ? 1 : 0;
  CHECK(volumes == 3);  // b0000..b0002 still present from the first run

  SUBCASE("unknown config keys fail loudly") {
    atomic_write_file(cfg_path, "bodiez = 3\n");
    CHECK(cli({"--config", cfg_path, "synth"}) == 1);
  }
}
