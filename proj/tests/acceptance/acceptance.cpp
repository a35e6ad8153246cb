// Copyright 2026 The mirl Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance runner. Prints one line per criterion and exits non-zero when
// any of them fails. Usage: acceptance <path-to-mirl-cli> [criterion ...]

#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mirl/pipeline.hpp"
#include "support/oracles.hpp"

using namespace mirl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- 1: constraint suite --------------------------------------------------

Outcome constraint_suite() {
  std::size_t runs = 0, violations = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GeneratorConfig g;
    g.seed = seed;
    const Dataset ds = generate(g);
    const Supervision mode = seed % 2 ? Supervision::kEye : Supervision::kImageLabel;
    const BagSet bags = make_bags(ds, mode, ds.images_in(Split::kTrain));
    CmiConfig c;
    c.seed = seed;
    const CmiResult r = cmi_svm_train(bags, ds, c);
    violations += oracle::constraint_violations(ds, bags, r.assignment, c.subregion_threshold, c.fringe_threshold);
    ++runs;
  }
  return {violations == 0, std::to_string(runs) + " runs, " + std::to_string(violations) + " violations"};
}

// ---- 2: miSVM reduction ---------------------------------------------------

Outcome misvm_reduction() {
  std::size_t compared = 0, mismatched = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    GeneratorConfig g;
    g.seed = seed;
    g.images = 80;
    const Dataset ds = generate(g);
    const BagSet bags = make_bags(ds, Supervision::kEye, ds.images_in(Split::kTrain));
    CmiConfig c;
    c.restarts = 4;
    c.seed = seed;
    c.constraints = false;
    // Thresholds above 1 leave every subregion and fringe set empty.
    c.subregion_threshold = 1.5;
    c.fringe_threshold = 1.5;
    c.record_trajectory = true;
    const CmiResult cmi = cmi_svm_train(bags, ds, c);
    const CmiResult mi = mi_svm_train(bags, ds, c);
    for (std::size_t r = 0; r < cmi.restarts.size(); ++r) {
      const auto& t = cmi.restarts[r].trajectory;
      const auto ref = oracle::misvm_trajectory(ds, bags, cmi.assignment.regions, t.front(), c.svm, c.max_iterations);
      ++compared;
      mismatched += ref != t || mi.restarts[r].trajectory != t;
    }
    mismatched += !(mi.assignment == cmi.assignment);
  }
  return {mismatched == 0, std::to_string(compared) + " trajectories, " + std::to_string(mismatched) + " mismatches"};
}

// ---- 3 and 4: supervision ordering and inclusion gap ----------------------

struct TrendResults {
  // [seed][method] for BB, CMI-EYE, MI-EYE, CMI-IL.
  std::vector<std::array<double, 4>> iou, inclusion;
};

const TrendResults& trend_results() {
  static const TrendResults results = [] {
    TrendResults t;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      GeneratorConfig g;
      g.seed = seed;
      const Dataset ds = generate(g);
      const auto test = ds.images_in(Split::kTest);
      std::array<double, 4> iou{}, inc{};
      const std::pair<Supervision, bool> methods[4] = {{Supervision::kBoundingBox, false},
                                                       {Supervision::kEye, true},
                                                       {Supervision::kEye, false},
                                                       {Supervision::kImageLabel, true}};
      for (int m = 0; m < 4; ++m) {
        DetectorTrainConfig c;
        c.mode = methods[m].first;
        c.constraints = methods[m].second;
        c.cmi.seed = seed;
        const DetectorArtifact det = train_detector(ds, c);
        const ExhaustiveEval ev = evaluate_exhaustive(ds, det.model, test, 1);
        iou[m] = ev.ap_iou.value_or(0.0);
        inc[m] = ev.ap_inclusion.value_or(0.0);
        std::printf("  seed %llu %-12s AP(IoU) %.3f AP(inclusion) %.3f\n", static_cast<unsigned long long>(seed),
                    det.method.c_str(), iou[m], inc[m]);
        std::fflush(stdout);
      }
      t.iou.push_back(iou);
      t.inclusion.push_back(inc);
    }
    return t;
  }();
  return results;
}

Outcome supervision_ordering() {
  const TrendResults& t = trend_results();
  std::array<double, 4> avg{};
  for (const auto& row : t.iou)
    for (int m = 0; m < 4; ++m) avg[m] += row[m] / static_cast<double>(t.iou.size());
  const double gap = 0.05;
  const bool pass = avg[0] - avg[1] >= gap && avg[1] - avg[2] >= gap && avg[1] - avg[3] >= gap;
  std::ostringstream s;
  s.precision(3);
  s << std::fixed << "mean AP(IoU) BB " << avg[0] << ", CMI-EYE " << avg[1] << ", MI-EYE " << avg[2] << ", CMI-IL "
    << avg[3];
  return {pass, s.str()};
}

Outcome inclusion_gap() {
  const TrendResults& t = trend_results();
  bool pass = true;
  std::ostringstream s;
  s.precision(3);
  s << std::fixed << "BB minus CMI-EYE, IoU vs inclusion:";
  for (std::size_t i = 0; i < t.iou.size(); ++i) {
    const double gi = t.iou[i][0] - t.iou[i][1], gc = t.inclusion[i][0] - t.inclusion[i][1];
    pass = pass && gc < gi;
    s << " [" << gi << " " << gc << "]";
  }
  return {pass, s.str()};
}

// ---- 5 and 6: gradient correctness and unbiasedness -----------------------

Outcome gradient_correctness() {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  RolloutConfig cfg;
  cfg.max_steps = 2;
  double worst_fd = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (double lambda : {0.0, 0.05}) worst_fd = std::max(worst_fd, fd_check(images, oracle::toy_policy(seed, 0.5), cfg, lambda, 1e-4));

  double worst_ep = 0.0;
  RolloutConfig long_cfg;
  long_cfg.max_steps = 4;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    PolicyParams p = oracle::toy_policy(seed, 0.6);
    p.theta_d[3] -= 1.0;
    const SearchImage& im = images[seed % 2];
    Rng rng(seed);
    const Episode ep = rollout(im, p, long_cfg, rng);
    const Eigen::VectorXd g = episode_score_gradient(ep, p, im);
    const Eigen::VectorXd flat = p.flatten();
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      Eigen::VectorXd a = flat, b = flat;
      a[i] += h;
      b[i] -= h;
      const double fd = (episode_log_prob(ep, PolicyParams::unflatten(a, 3), im) -
                         episode_log_prob(ep, PolicyParams::unflatten(b, 3), im)) /
                        (2 * h);
      worst_ep = std::max(worst_ep, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-3}));
    }
  }
  return {worst_fd <= 1e-4 && worst_ep <= 1e-5,
          "fd_check max rel err " + fmt("%.2e", worst_fd) + ", episode score max rel err " + fmt("%.2e", worst_ep)};
}

Outcome estimator_unbiasedness() {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  const PolicyParams p = oracle::toy_policy(1, 0.5);
  RolloutConfig cfg;
  cfg.max_steps = 2;
  const double lambda = 0.01;
  const ExactObjective ex = exact_objective(images, p, cfg, lambda);
  const int runs = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.size()), sq = sum;
  for (int i = 0; i < runs; ++i) {
    const Eigen::VectorXd g = estimate_gradient(images, p, cfg, 1, lambda, 1000000 + static_cast<std::uint64_t>(i)).gradient;
    sum += g;
    sq += g.cwiseProduct(g);
  }
  double worst = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double mean = sum[k] / runs;
    const double se = std::sqrt(std::max(sq[k] / runs - mean * mean, 0.0) / runs);
    // Components the estimator never varies on are compared to rounding.
    const double z = std::abs(mean - ex.gradient[k]) / std::max(se, 1e-12);
    worst = std::max(worst, z);
  }
  return {worst <= 4.0, std::to_string(runs) + " runs, worst component " + fmt("%.2f", worst) + " sigma"};
}

// ---- 7: sequential efficiency ----------------------------------------------

Outcome sequential_efficiency() {
  GeneratorConfig g;
  g.seed = 1;
  const Dataset ds = generate(g);
  DetectorTrainConfig dc;
  dc.cmi.seed = 1;
  const DetectorArtifact det = train_detector(ds, dc);
  PolicySetup ps;
  ps.train.seed = 1;
  const PolicyArtifact pol = train_sequential(ds, det.model, ps);
  const auto test = ds.images_in(Split::kTest);
  const ExhaustiveEval ex = evaluate_exhaustive(ds, det.model, test, 1);
  const SequentialEval seq =
      evaluate_sequential(ds, det.model, pol.policy, test, 1, ps.train.rollout, 5, 1, ex.seconds_per_image);
  std::vector<double> frac, ratio;
  for (const SequentialRepeat& r : seq.repeats) {
    frac.push_back(r.evaluated_fraction);
    ratio.push_back(r.classification_ap / ex.classification_ap);
  }
  const MeanStdev f = mean_stdev(frac), q = mean_stdev(ratio);
  std::ostringstream s;
  s.precision(3);
  s << std::fixed << "evaluated fraction " << f.mean << " +- " << f.stdev << ", classification AP ratio " << q.mean
    << " +- " << q.stdev << " (exhaustive " << ex.classification_ap << ", lambda " << pol.lambda << ")";
  return {f.mean <= 0.6 && q.mean >= 0.95, s.str()};
}

// ---- 8: evaluation oracles --------------------------------------------------

Outcome evaluation_oracles() {
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 1000; ++s) worst = std::max(worst, oracle::fixture_error(oracle::random_fixture(s)));
  return {worst <= 1e-10, "1000 fixtures, max abs deviation " + fmt("%.2e", worst)};
}

// ---- 9: CLI determinism -----------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()) == 0; }

Outcome cli_determinism(const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) return {false, "CLI executable not found: '" + cli + "'"};
  const fs::path root = fs::temp_directory_path() / ("mirl_acceptance_" + std::to_string(::getpid()));
  const std::string q = "'" + cli + "'";
  // Runs every subcommand into dir/ with the given worker count.
  auto pipeline = [&](const std::string& name, int jobs) {
    const fs::path d = root / name;
    fs::create_directories(d);
    const std::string j = " --jobs " + std::to_string(jobs);
    const std::string p = d.string() + "/";
    return run(q + " gen-data --out " + p + "data.ds --seed 4 --images 48") &&
           run(q + " train-detector --dataset " + p + "data.ds --out " + p + "det.json --mode eye --restarts 3 --c-grid 0.1,1 --seed 2" + j) &&
           run(q + " train-detector --dataset " + p + "data.ds --out " + p + "bb.json --mode bb --c-grid 0.1,1" + j) &&
           run(q + " train-policy --dataset " + p + "data.ds --detector " + p + "det.json --out " + p +
               "pol.json --lambda-grid 0,0.01 --restarts 2 --rollouts 16 --seed 3 --set max_iterations=5" + j) &&
           run(q + " evaluate --dataset " + p + "data.ds --detector " + p + "det.json --out " + p + "exh.json" + j) &&
           run(q + " evaluate --dataset " + p + "data.ds --detector " + p + "det.json --policy " + p + "pol.json --out " +
               p + "seq.json --repeats 3 --seed 5" + j) &&
           run(q + " report " + p + "exh.json " + p + "seq.json --out " + p + "table.json");
  };
  if (!pipeline("a", 1) || !pipeline("b", 1) || !pipeline("c", 3)) {
    fs::remove_all(root);
    return {false, "a subcommand failed"};
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const std::string name = entry.path().filename().string();
    if (name.find(".timing.") != std::string::npos) continue;  // wall clock by design
    ++files;
    const std::string a = slurp(entry.path());
    differing += a != slurp(root / "b" / name) || a != slurp(root / "c" / name);
  }
  fs::remove_all(root);
  return {files >= 10 && differing == 0,
          std::to_string(files) + " artifacts compared across reruns and --jobs 1/3, " + std::to_string(differing) +
              " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"constraint suite", constraint_suite},
      {"miSVM reduction", misvm_reduction},
      {"supervision ordering", supervision_ordering},
      {"inclusion gap narrowing", inclusion_gap},
      {"gradient correctness", gradient_correctness},
      {"estimator unbiasedness", estimator_unbiasedness},
      {"sequential efficiency", sequential_efficiency},
      {"evaluation oracle equivalence", evaluation_oracles},
      {"determinism", [&] { return cli_determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s (%s; %.1fs)\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
