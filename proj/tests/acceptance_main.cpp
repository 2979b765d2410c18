// Acceptance suite: each criterion prints one PASS/FAIL line; the process
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "zonescan/cli.hpp"
#include "zonescan/cnn.hpp"
#include "zonescan/dataset.hpp"
#include "zonescan/imgproc.hpp"
#include "zonescan/metrics.hpp"
#include "zonescan/phantom.hpp"
#include "zonescan/training_log.hpp"
#include "zonescan/util.hpp"
#include "zonescan/volume.hpp"
#include "zonescan/zoner.hpp"

using namespace zonescan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point tic) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
      .count();
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("zonescan");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data());
}

// ---------------------------------------------------------------- criterion 1

Outcome kernel_oracles() {
  Rng rng(1001);
  const auto tic = std::chrono::steady_clock::now();

  for (int trial = 0; trial < 110; ++trial) {
    const int w = rng.range(16, 32), h = rng.range(16, 32);
    SliceImage img(w, h);
    for (auto& p : img.pixels) p = float(rng.range(0, 255));

    const int window = 2 * rng.range(1, 4) + 1;
    if (threshold_sauvola(img, window, 0.2, 128.0).bits !=
        oracle::sauvola_direct(img, window, 0.2, 128.0).bits)
      return {false, "sauvola mismatch on trial " + std::to_string(trial)};

    BinaryMask mask(w, h);
    for (auto& b : mask.bits) b = rng.uniform() < 0.4 ? 1 : 0;
    const int connectivity = trial % 2 ? 8 : 4;
    int count = 0;
    const auto direct = oracle::components_direct(mask, connectivity, &count);
    const LabeledMask fast = connected_components(mask, connectivity);
    if (fast.count != count)
      return {false, "component count mismatch on trial " + std::to_string(trial)};
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (fast.labels[i] != direct[i])
        return {false, "component labels mismatch on trial " + std::to_string(trial)};

    BinaryMask seed(w, h);
    for (std::size_t i = 0; i < mask.size(); ++i)
      seed.bits[i] = mask.bits[i] && rng.uniform() < 0.08 ? 1 : 0;
    if (reconstruct_by_dilation(seed, mask).bits !=
        oracle::reconstruct_direct(seed, mask).bits)
      return {false, "reconstruction mismatch on trial " + std::to_string(trial)};
  }

  for (int trial = 0; trial < 10; ++trial) {
    const int w = rng.range(16, 32), h = rng.range(16, 32);
    SliceImage img(w, h);
    for (auto& p : img.pixels) p = float(rng.range(0, 255));
    const double sigma = 0.5 + 2.0 * rng.uniform();
    const SliceImage fast = gaussian_smooth(img, sigma);
    const SliceImage direct = oracle::gaussian_direct(img, sigma);
    for (std::size_t i = 0; i < fast.size(); ++i)
      if (std::abs(double(fast.pixels[i]) - double(direct.pixels[i])) > 1e-6)
        return {false, "gaussian deviates beyond 1e-6"};
  }

  const double s = seconds_since(tic);
  if (s >= 30.0) return {false, "kernel oracles took " + fmt_g(s, 3) + " s"};
  return {true, "110 sauvola/components/reconstruction oracles exact, gaussian "
                "within 1e-6, " + fmt_g(s, 3) + " s"};
}

// ---------------------------------------------------------------- criterion 2

Outcome gradient_checks() {
  const auto tic = std::chrono::steady_clock::now();

  Architecture arch;
  arch.in_c = 1;
  arch.in_h = 8;
  arch.in_w = 8;
  arch.layers = {{LayerKind::Conv, 2, 3, 1},    {LayerKind::Relu, 0, 0, 1},
                 {LayerKind::MaxPool, 0, 2, 2}, {LayerKind::Conv, 3, 3, 1},
                 {LayerKind::Relu, 0, 0, 1},    {LayerKind::MaxPool, 0, 2, 2},
                 {LayerKind::Dense, 6, 0, 1},   {LayerKind::Relu, 0, 0, 1},
                 {LayerKind::Dense, 5, 0, 1},   {LayerKind::Softmax, 0, 0, 1}};
  CnnModel<double> model = init_model<double>(arch, 2002);

  Tensor<double> batch({2, 1, 8, 8});
  Rng rng(2003);
  for (auto& x : batch.data) x = rng.uniform(-1.0, 1.0);
  std::vector<int> labels = {1, 4};

  Gradients<double> grads = make_gradients(model);
  loss_and_grads(model, batch, labels, grads);
  Gradients<double> scratch = make_gradients(model);

  double max_rel = 0.0;
  for (std::size_t p = 0; p < model.weights.size(); ++p) {
    auto check = [&](Tensor<double>& param, const Tensor<double>& grad) {
      for (std::size_t i = 0; i < param.data.size(); ++i) {
        const double saved = param.data[i];
        const double eps = 1e-4;
        param.data[i] = saved + eps;
        const double up = loss_and_grads(model, batch, labels, scratch);
        param.data[i] = saved - eps;
        const double dn = loss_and_grads(model, batch, labels, scratch);
        param.data[i] = saved;
        const double fd = (up - dn) / (2 * eps);
        const double g = grad.data[i];
        max_rel = std::max(max_rel, std::abs(fd - g) /
                                        std::max({std::abs(fd), std::abs(g), 1e-6}));
      }
    };
    check(model.weights[p], grads.d_weights[p]);
    check(model.biases[p], grads.d_biases[p]);
  }

  const double s = seconds_since(tic);
  if (max_rel >= 1e-4)
    return {false, "max relative gradient error " + fmt_g(max_rel, 4)};
  if (s >= 60.0) return {false, "gradient check took " + fmt_g(s, 3) + " s"};
  return {true, "conv/relu/maxpool/dense/softmax-xent max relative error " +
                    fmt_g(max_rel, 3) + ", " + fmt_g(s, 3) + " s"};
}

// ---------------------------------------------------------------- criterion 3

Outcome zone_partition() {
  std::size_t gt_fg = 0, match = 0;
  for (int body = 0; body < 10; ++body) {
    PhantomSpec spec;
    spec.body_id = "zp" + std::to_string(body);
    spec.seed = 3000 + std::uint64_t(body);
    spec.threat_count = body % 2;
    const PhantomResult r = generate_phantom(spec);

    CleanupParams params;
    params.R = (double(r.volume.intensity_max) - r.volume.intensity_min) / 2.0;
    MaskStack masks(std::size_t(spec.nz));
    for (int z = 0; z < spec.nz; ++z)
      masks[std::size_t(z)] = clean_slice_mask(slice_xy(r.volume, z), params);
    const ZoneLabelVolume zl = assign_zones(masks, spec.table);

    // accuracy against the generator ground truth
    for (std::size_t i = 0; i < zl.labels.size(); ++i) {
      if (!r.zones.labels[i]) continue;
      ++gt_fg;
      if (zl.labels[i] == r.zones.labels[i]) ++match;
    }

    // the computed foreground must be exactly partitioned by the zone clouds
    std::size_t mask_fg = 0;
    for (int z = 0; z < spec.nz; ++z) mask_fg += masks[std::size_t(z)].count_ones();
    std::size_t labeled = 0, cloud_total = 0;
    for (auto l : zl.labels) labeled += l ? 1 : 0;
    for (int zone = 1; zone <= 17; ++zone)
      cloud_total += extract_zone_points(zl, zone).size();
    if (labeled != mask_fg || cloud_total != mask_fg)
      return {false, "zone clouds do not partition the foreground (body " +
                         std::to_string(body) + ")"};
  }
  const double acc = double(match) / double(gt_fg);
  if (acc < 0.95)
    return {false, "zone accuracy " + fmt_g(acc, 4) + " < 0.95"};
  return {true, "10 phantoms, zone accuracy " + fmt_g(acc, 4) +
                    ", partition exact"};
}

// ---------------------------------------------------------------- criterion 4

Outcome end_to_end() {
  const auto tic = std::chrono::steady_clock::now();
  const fs::path work = fs::path("acceptance_scratch") / "e2e";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string w = work.string();

  // 200 bodies, odd indices carry 1..3 threats
  if (cli({"--work", w, "synth", "--bodies", "200", "--threats", "3", "--seed",
           "424242"}) != 0)
    return {false, "synth failed"};
  if (cli({"--work", w, "preprocess"}) != 0) return {false, "preprocess failed"};
  if (cli({"--work", w, "segment"}) != 0) return {false, "segment failed"};
  if (cli({"--work", w, "build-dataset", "--seed", "77"}) != 0)
    return {false, "build-dataset failed"};
  if (cli({"--work", w, "train", "--epochs", "30", "--seed", "5"}) != 0)
    return {false, "train failed"};
  if (cli({"--work", w, "evaluate", "--split", "test"}) != 0)
    return {false, "evaluate failed"};

  const TrainingLog log =
      read_training_log((work / "model" / "training_log.csv").string());
  if (int(log.rows.size()) != 30) return {false, "expected 30 epochs in the log"};
  double best_val = 0.0;
  for (const auto& r : log.rows) best_val = std::max(best_val, r.val_accuracy);

  // topk.csv: "k,accuracy" header then k=1 and k=5 rows
  double top5 = -1.0;
  {
    const std::string text =
        read_text_file((work / "reports" / "topk.csv").string());
    std::size_t pos = text.find("\n5,");
    if (pos == std::string::npos) return {false, "topk.csv missing the k=5 row"};
    top5 = std::stod(text.substr(pos + 3));
  }

  const double s = seconds_since(tic);
  const bool ok = best_val >= 0.90 && top5 >= 0.99 && s < 1800.0;
  return {ok, "200 phantoms, 30 epochs: best val accuracy " +
                  fmt_g(best_val, 4) + " (>= 0.90), test top-5 " +
                  fmt_g(top5, 4) + " (>= 0.99), " + fmt_g(s / 60.0, 3) +
                  " min (< 30)"};
}

// ---------------------------------------------------------------- criterion 5

Outcome metric_identities() {
  Rng rng(5005);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 10 + int(rng.below(100));
    std::vector<int> truths(std::size_t(n), 0), preds(std::size_t(n), 0);
    for (int i = 0; i < n; ++i) {
      truths[std::size_t(i)] = int(rng.below(34));
      preds[std::size_t(i)] =
          rng.uniform() < 0.5 ? truths[std::size_t(i)] : int(rng.below(34));
    }
    const ConfusionMatrix cm = confusion(preds, truths, 34);
    const ClassMetrics m = precision_recall(cm);
    const double acc = double(cm.trace()) / double(cm.total());
    if (m.micro_precision != m.micro_recall || m.micro_precision != acc ||
        m.accuracy != acc)
      return {false, "micro average identity violated on trial " +
                         std::to_string(trial)};
  }

  for (int trial = 0; trial < 200; ++trial) {
    const int n = 30 + int(rng.below(60));
    std::vector<double> scores(std::size_t(n), 0.0);
    std::vector<int> truths(std::size_t(n), 0);
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      scores[std::size_t(i)] = double(rng.below(25)) / 25.0;
      truths[std::size_t(i)] = int(rng.below(2));
      (truths[std::size_t(i)] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    const RocCurve roc = roc_points(scores, truths, 1);
    if (std::abs(roc.auc - oracle::auc_pair_count(scores, truths, 1)) >= 1e-9)
      return {false, "trapezoidal vs pair-counting AUC differ on trial " +
                         std::to_string(trial)};
  }

  Architecture arch = Architecture::toy(16, 34);
  CnnModel<double> model = init_model<double>(arch, 1);
  for (auto& wt : model.weights) wt.fill(0.0);
  for (auto& b : model.biases) b.fill(0.0);
  Tensor<double> batch({3, 1, 16, 16});
  Rng brng(5006);
  for (auto& x : batch.data) x = brng.uniform(-1.0, 1.0);
  Gradients<double> grads = make_gradients(model);
  const double loss = loss_and_grads(model, batch, {0, 17, 33}, grads);
  if (std::abs(loss - std::log(34.0)) > 1e-12)
    return {false, "uniform loss differs from ln(34) by " +
                       fmt_g(std::abs(loss - std::log(34.0)), 3)};

  return {true, "micro identities exact on 1000 sets, AUC within 1e-9, "
                "uniform loss = ln(34) within 1e-12"};
}

// ---------------------------------------------------------------- criterion 6

Outcome determinism() {
  const fs::path base = fs::path("acceptance_scratch") / "det";
  fs::remove_all(base);
  fs::create_directories(base);

  // one shared corpus, two independent split+train+evaluate runs
  const fs::path shared = base / "shared";
  if (cli({"--work", shared.string(), "synth", "--bodies", "8", "--threats",
           "2", "--seed", "99"}) != 0 ||
      cli({"--work", shared.string(), "preprocess"}) != 0 ||
      cli({"--work", shared.string(), "segment"}) != 0)
    return {false, "shared corpus build failed"};

  auto run = [&](const fs::path& dir) -> bool {
    fs::create_directories(dir);
    return cli({"--work", dir.string(), "--threads", "1", "build-dataset",
                "--volumes", (shared / "volumes").string(), "--zones",
                (shared / "zones").string(), "--threat-table",
                (shared / "threats.csv").string(), "--seed", "31"}) == 0 &&
           cli({"--work", dir.string(), "--threads", "1", "train", "--epochs",
                "3", "--seed", "8"}) == 0 &&
           cli({"--work", dir.string(), "--threads", "1", "evaluate"}) == 0;
  };
  if (!run(base / "a") || !run(base / "b")) return {false, "pipeline run failed"};

  std::vector<std::string> files = {"dataset/manifest.csv", "model/model.ckpt"};
  for (const auto& e : fs::directory_iterator(base / "a" / "reports"))
    files.push_back("reports/" + e.path().filename().string());

  for (const auto& rel : files) {
    const std::string a = read_text_file((base / "a" / rel).string());
    const std::string b = read_text_file((base / "b" / rel).string());
    if (a != b) return {false, rel + " differs between identical runs"};
  }
  return {true, std::to_string(files.size()) +
                    " files byte-identical across split+train+evaluate reruns"};
}

// ---------------------------------------------------------------- criterion 7

Outcome split_counts() {
  // 34 class sizes summing to 287660
  Rng rng(7007);
  std::vector<int> sizes(kNumClasses);
  int total = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    sizes[std::size_t(c)] = 7000 + int(rng.below(3000));
    total += sizes[std::size_t(c)];
  }
  sizes[33] += 287660 - total;
  if (sizes[33] < 3) return {false, "bad synthetic class sizes"};

  DatasetManifest m;
  for (int c = 0; c < kNumClasses; ++c)
    for (int i = 0; i < sizes[std::size_t(c)]; ++i) {
      DatasetSample s;
      s.image_path = "x";
      s.class_id = c;
      s.body_id = "b";
      s.z = i;
      m.rows.push_back(s);
    }
  split_dataset(m, {0.6, 0.2, 0.2}, 11);

  const auto counts = m.split_class_counts();
  long long t = 0, v = 0, te = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const long long n = sizes[std::size_t(c)];
    // the documented floor + train-first remainder rule, recomputed here
    long long nt = (long long)(std::floor(0.6 * double(n)));
    long long nv = (long long)(std::floor(0.2 * double(n)));
    const long long ns = (long long)(std::floor(0.2 * double(n)));
    long long rem = n - nt - nv - ns;
    if (rem >= 1) {
      ++nt;
      --rem;
    }
    if (rem >= 1) ++nv;
    if (counts[0][std::size_t(c)] != nt || counts[1][std::size_t(c)] != nv ||
        counts[2][std::size_t(c)] != n - nt - nv)
      return {false, "floor rule violated for class " + std::to_string(c)};
    t += counts[0][std::size_t(c)];
    v += counts[1][std::size_t(c)];
    te += counts[2][std::size_t(c)];
  }

  if (std::abs(t - 172596) > 34 || std::abs(v - 57532) > 34 ||
      std::abs(te - 57532) > 34)
    return {false, "split totals " + std::to_string(t) + "/" +
                       std::to_string(v) + "/" + std::to_string(te) +
                       " drift beyond 34 from 172596/57532/57532"};
  return {true, "floor rule exact per class; totals " + std::to_string(t) +
                    "/" + std::to_string(v) + "/" + std::to_string(te) +
                    " within 34 of the reference counts"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*fn)();
  };
  const Criterion criteria[] = {
      {"kernel oracles", kernel_oracles},
      {"gradient check", gradient_checks},
      {"zone partition", zone_partition},
      {"end-to-end synthetic benchmark", end_to_end},
      {"metric identities", metric_identities},
      {"determinism", determinism},
      {"split counts", split_counts},
  };

  int failures = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome r;
    try {
      r = c.fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%d/7] %s  %s: %s\n", index, r.pass ? "PASS" : "FAIL", c.name,
                r.detail.c_str());
    std::fflush(stdout);
    failures += r.pass ? 0 : 1;
  }
  std::printf("ACCEPTANCE: %d/7 criteria passed\n", 7 - failures);
  return failures == 0 ? 0 : 1;
}
