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

#include "mirl/mirl.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <map>
#include <new>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirl/dataset.hpp"
#include "mirl/error.hpp"
#include "mirl/pipeline.hpp"
#include "text_io.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

// Reads a JSON config object, tracking which keys were consumed so that
// leftovers (typos) can be rejected.
class ConfigReader {
 public:
  explicit ConfigReader(const char* text, const char* what) : what_(what) {
    if (text == nullptr || *text == '\0') {
      obj_ = json::object();
    } else {
      try {
        obj_ = json::parse(text);
      } catch (const json::parse_error& e) {
        throw mirl::invalid_argument(std::string(what) + " config: " + e.what());
      }
    }
    if (!obj_.is_object()) throw mirl::invalid_argument(std::string(what) + " config must be an object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!obj_.contains(key)) {
      echo_[key] = fallback;
      return fallback;
    }
    try {
      T v = obj_.at(key).get<T>();
      echo_[key] = v;
      return v;
    } catch (const json::exception&) {
      throw mirl::invalid_argument(std::string(what_) + " config: key '" + key + "' has the wrong type");
    }
  }

  // Consumed but not echoed: settings that must not influence artifacts.
  template <typename T>
  T get_quiet(const std::string& key, T fallback) {
    used_.insert(key);
    if (!obj_.contains(key)) return fallback;
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw mirl::invalid_argument(std::string(what_) + " config: key '" + key + "' has the wrong type");
    }
  }

  // Rejects unknown keys and returns the resolved config.
  json finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!used_.count(k)) throw mirl::invalid_argument(std::string(what_) + " config: unknown key '" + k + "'");
    return echo_;
  }

 private:
  const char* what_;
  json obj_;
  json echo_ = json::object();
  std::set<std::string> used_;
};

std::string hash_of(const json& j) { return mirl::text::hex64(mirl::text::fnv1a(j.dump())); }

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

template <typename Fn>
mirl_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MIRL_OK;
  } catch (const mirl::Error& e) {
    g_last_error = e.what();
    return static_cast<mirl_status>(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return MIRL_ERR_FORMAT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MIRL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MIRL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return MIRL_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) throw mirl::invalid_argument(std::string(name) + " must not be null");
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

mirl::Split parse_split(const std::string& s) {
  if (s == "train") return mirl::Split::kTrain;
  if (s == "val") return mirl::Split::kVal;
  if (s == "test") return mirl::Split::kTest;
  throw mirl::invalid_argument("unknown split '" + s + "' (expected train, val or test)");
}

json check_format(const std::string& text, const char* format) {
  json j = json::parse(text);
  if (!j.is_object() || j.value("format", "") != format)
    throw mirl::format_error(std::string("not a ") + format + " artifact");
  if (j.value("version", 0) != 1) throw mirl::format_error(std::string(format) + ": unsupported version");
  return j;
}

std::string sequential_name(const std::string& method) {
  const std::string suffix = "-DET";
  if (method.size() > suffix.size() && method.compare(method.size() - suffix.size(), suffix.size(), suffix) == 0)
    return method.substr(0, method.size() - suffix.size()) + "-SEQ";
  return method + "-SEQ";
}

}  // namespace

struct mirl_dataset {
  mirl::Dataset data;
  std::string hash;
};

struct mirl_detector {
  mirl::DetectorArtifact art;
  json doc;  // serialized artifact
  std::string hash;
  int feature_dim = 0;
};

struct mirl_policy {
  mirl::PolicyArtifact art;
  mirl::RolloutConfig rollout;
  json doc;
  std::string hash;
};

namespace {

void rebuild_detector(mirl_detector& d, json config, const std::string& dataset_hash) {
  json grid = json::array();
  for (const auto& g : d.art.grid) grid.push_back({{"C", g.value}, {"val_ap_iou", g.score}});
  d.doc = {
      {"format", "mirl-detector"},
      {"version", 1},
      {"method", d.art.method},
      {"supervision", mirl::to_string(d.art.mode)},
      {"constraints", d.art.constraints},
      {"target_class", d.art.target_class},
      {"C", d.art.C},
      {"grid", grid},
      {"iterations", d.art.iterations},
      {"objective", d.art.objective},
      {"restart", d.art.restart},
      {"dataset_hash", dataset_hash},
      {"config_hash", hash_of(config)},
      {"config", config},
      {"model", mirl::serialize_model(d.art.model)},
      {"assignment", mirl::serialize_assignment(d.art.assignment)},
  };
  d.hash = hash_of(d.doc);
  d.feature_dim = d.art.model.dim();
}

void rebuild_policy(mirl_policy& p, json config, const std::string& dataset_hash,
                    const mirl_detector& detector) {
  json grid = json::array();
  for (const auto& g : p.art.grid) grid.push_back({{"lambda", g.value}, {"val_reward", g.score}});
  p.doc = {
      {"format", "mirl-policy"},
      {"version", 1},
      {"method", sequential_name(detector.art.method)},
      {"detector_method", detector.art.method},
      {"target_class", detector.art.target_class},
      {"lambda", p.art.lambda},
      {"val_reward", p.art.val_reward},
      {"restart", p.art.restart},
      {"grid", grid},
      {"max_steps", p.rollout.max_steps},
      {"alpha", p.rollout.alpha},
      {"dataset_hash", dataset_hash},
      {"detector_hash", detector.hash},
      {"config_hash", hash_of(config)},
      {"config", config},
      {"policy", mirl::serialize_policy(p.art.policy)},
      {"log", p.art.log},
  };
  p.hash = hash_of(p.doc);
}

json metrics_json(const std::optional<double>& iou, const std::optional<double>& inc, double cls) {
  return {{"detection_ap_iou", optional_json(iou)},
          {"detection_ap_inclusion", optional_json(inc)},
          {"classification_ap", cls}};
}

}  // namespace

extern "C" {

const char* mirl_version(void) { return "1.0.0"; }

const char* mirl_last_error(void) { return g_last_error.c_str(); }

const char* mirl_status_name(mirl_status status) {
  switch (status) {
    case MIRL_OK: return "ok";
    case MIRL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MIRL_ERR_IO: return "i/o error";
    case MIRL_ERR_FORMAT: return "format error";
    case MIRL_ERR_DIMENSION: return "dimension mismatch";
    case MIRL_ERR_RUNTIME: return "runtime failure";
    case MIRL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void mirl_string_free(char* text) { std::free(text); }

mirl_status mirl_dataset_generate(const char* config_json, mirl_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    ConfigReader rd(config_json, "gen-data");
    mirl::GeneratorConfig g;
    g.images = rd.get("images", g.images);
    g.regions_min = rd.get("regions_min", g.regions_min);
    g.regions_max = rd.get("regions_max", g.regions_max);
    g.feature_dim = rd.get("feature_dim", g.feature_dim);
    g.classes = rd.get("classes", g.classes);
    g.positive_fraction = rd.get("positive_fraction", g.positive_fraction);
    g.separation = rd.get("separation", g.separation);
    g.pattern_strength = rd.get("pattern_strength", g.pattern_strength);
    g.context_strength = rd.get("context_strength", g.context_strength);
    g.noise = rd.get("noise", g.noise);
    g.pointer_noise = rd.get("pointer_noise", g.pointer_noise);
    g.fixation_fraction = rd.get("fixation_fraction", g.fixation_fraction);
    g.seed = rd.get<std::uint64_t>("seed", g.seed);
    rd.finish();
    auto ds = std::make_unique<mirl_dataset>();
    ds->data = mirl::generate(g);
    ds->hash = mirl::dataset_hash(ds->data);
    *out = ds.release();
  });
}

mirl_status mirl_dataset_load(const char* path, mirl_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto ds = std::make_unique<mirl_dataset>();
    ds->data = mirl::load_dataset(path);
    ds->hash = mirl::dataset_hash(ds->data);
    *out = ds.release();
  });
}

mirl_status mirl_dataset_save(const mirl_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(path, "path");
    mirl::save_dataset(dataset->data, path);
  });
}

mirl_status mirl_dataset_hash(const mirl_dataset* dataset, char** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    *out = dup_string(dataset->hash);
  });
}

mirl_status mirl_dataset_summary(const mirl_dataset* dataset, char** json_out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(json_out, "json_out");
    const mirl::Dataset& ds = dataset->data;
    std::size_t pos = 0, regions = 0, covered = 0, gts = 0;
    double fix_pos = 0.0, fix_neg = 0.0, best_all = 0.0, best_fix = 0.0;
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& im : ds.images) {
      ++counts[static_cast<int>(im.split)];
      const auto rs = ds.regions_of(im);
      regions += rs.size();
      std::size_t fixated = 0;
      for (const auto& r : rs) fixated += r.fixated ? 1 : 0;
      const double frac = rs.empty() ? 0.0 : static_cast<double>(fixated) / static_cast<double>(rs.size());
      if (im.class_id == 0) {
        fix_neg += frac;
        continue;
      }
      ++pos;
      fix_pos += frac;
      bool hit = false;
      for (const auto& g : im.ground_truth) {
        double a = 0.0, f = 0.0;
        for (const auto& r : rs) {
          const double o = mirl::iou(r.rect, g);
          a = std::max(a, o);
          if (r.fixated) f = std::max(f, o);
        }
        best_all += a;
        best_fix += f;
        hit = hit || f >= 0.5;
        ++gts;
      }
      covered += hit ? 1 : 0;
    }
    const std::size_t neg = ds.images.size() - pos;
    auto ratio = [](double a, std::size_t b) { return b == 0 ? 0.0 : a / static_cast<double>(b); };
    json j = {
        {"dataset_hash", dataset->hash},
        {"images", ds.images.size()},
        {"train_images", counts[0]},
        {"val_images", counts[1]},
        {"test_images", counts[2]},
        {"positive_images", pos},
        {"classes", ds.classes},
        {"feature_dim", ds.feature_dim},
        {"mean_regions_per_image", ratio(static_cast<double>(regions), ds.images.size())},
        {"fixated_fraction_positive", ratio(fix_pos, pos)},
        {"fixated_fraction_negative", ratio(fix_neg, neg)},
        {"best_overlap_all_regions", ratio(best_all, gts)},
        {"best_overlap_fixated_regions", ratio(best_fix, gts)},
        {"positive_images_with_fixated_hit", ratio(static_cast<double>(covered), pos)},
    };
    *json_out = dup_string(j.dump(2));
  });
}

void mirl_dataset_free(mirl_dataset* dataset) { delete dataset; }

mirl_status mirl_detector_train(const mirl_dataset* dataset, const char* config_json,
                                mirl_detector** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    *out = nullptr;
    ConfigReader rd(config_json, "train-detector");
    mirl::DetectorTrainConfig c;
    c.mode = mirl::parse_supervision(rd.get<std::string>("supervision", "eye"));
    c.constraints = rd.get("constraints", c.constraints);
    if (c.mode == mirl::Supervision::kBoundingBox) c.constraints = false;
    c.c_grid = rd.get("c_grid", c.c_grid);
    c.target_class = rd.get("target_class", c.target_class);
    c.nms_threshold = rd.get("nms_threshold", c.nms_threshold);
    c.cmi.subregion_threshold = rd.get("subregion_threshold", c.cmi.subregion_threshold);
    c.cmi.fringe_threshold = rd.get("fringe_threshold", c.cmi.fringe_threshold);
    c.cmi.restarts = rd.get("restarts", c.cmi.restarts);
    c.cmi.ratio_min = rd.get("ratio_min", c.cmi.ratio_min);
    c.cmi.ratio_max = rd.get("ratio_max", c.cmi.ratio_max);
    c.cmi.max_iterations = rd.get("max_iterations", c.cmi.max_iterations);
    c.cmi.svm.tolerance = rd.get("svm_tolerance", c.cmi.svm.tolerance);
    c.cmi.svm.max_epochs = rd.get("svm_max_epochs", c.cmi.svm.max_epochs);
    c.cmi.seed = rd.get<std::uint64_t>("seed", c.cmi.seed);
    c.cmi.svm.seed = c.cmi.seed;
    c.cmi.jobs = rd.get_quiet("jobs", 1);
    json config = rd.finish();
    auto d = std::make_unique<mirl_detector>();
    d->art = mirl::train_detector(dataset->data, c);
    rebuild_detector(*d, std::move(config), dataset->hash);
    *out = d.release();
  });
}

mirl_status mirl_detector_save(const mirl_detector* detector, const char* path) {
  return guarded([&] {
    require(detector, "detector");
    require(path, "path");
    mirl::text::write_file(path, detector->doc.dump(2) + "\n");
  });
}

mirl_status mirl_detector_load(const char* path, mirl_detector** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    const json j = check_format(mirl::text::read_file(path), "mirl-detector");
    auto d = std::make_unique<mirl_detector>();
    mirl::DetectorArtifact& a = d->art;
    a.method = j.at("method").get<std::string>();
    a.mode = mirl::parse_supervision(j.at("supervision").get<std::string>());
    a.constraints = j.at("constraints").get<bool>();
    a.target_class = j.at("target_class").get<int>();
    a.C = j.at("C").get<double>();
    for (const auto& g : j.at("grid")) a.grid.push_back({g.at("C").get<double>(), g.at("val_ap_iou").get<double>()});
    a.iterations = j.at("iterations").get<int>();
    a.objective = j.at("objective").get<double>();
    a.restart = j.at("restart").get<std::size_t>();
    a.model = mirl::parse_model(j.at("model").get<std::string>());
    a.assignment = mirl::parse_assignment(j.at("assignment").get<std::string>());
    rebuild_detector(*d, j.at("config"), j.at("dataset_hash").get<std::string>());
    if (d->doc != j) throw mirl::format_error("detector artifact has inconsistent fields");
    *out = d.release();
  });
}

mirl_status mirl_detector_json(const mirl_detector* detector, char** out) {
  return guarded([&] {
    require(detector, "detector");
    require(out, "out");
    *out = dup_string(detector->doc.dump(2));
  });
}

mirl_status mirl_detector_model_text(const mirl_detector* detector, char** out) {
  return guarded([&] {
    require(detector, "detector");
    require(out, "out");
    *out = dup_string(mirl::serialize_model(detector->art.model));
  });
}

mirl_status mirl_detector_assignment_text(const mirl_detector* detector, char** out) {
  return guarded([&] {
    require(detector, "detector");
    require(out, "out");
    *out = dup_string(mirl::serialize_assignment(detector->art.assignment));
  });
}

mirl_status mirl_detector_decision(const mirl_detector* detector, const double* features,
                                   size_t count, double* out) {
  return guarded([&] {
    require(detector, "detector");
    require(out, "out");
    if (count > 0) require(features, "features");
    *out = detector->art.model.decision(std::span<const double>(features, count));
  });
}

void mirl_detector_free(mirl_detector* detector) { delete detector; }

mirl_status mirl_policy_train(const mirl_dataset* dataset, const mirl_detector* detector,
                              const char* config_json, mirl_policy** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(detector, "detector");
    require(out, "out");
    *out = nullptr;
    if (detector->doc.at("dataset_hash").get<std::string>() != dataset->hash)
      throw mirl::invalid_argument("detector was trained on a different dataset");
    ConfigReader rd(config_json, "train-policy");
    mirl::PolicySetup s;
    s.target_class = detector->art.target_class;
    s.lambda_grid = rd.get("lambda_grid", s.lambda_grid);
    mirl::TrainConfig& t = s.train;
    t.rollouts = rd.get("rollouts", t.rollouts);
    t.rollout.alpha = rd.get("alpha", t.rollout.alpha);
    t.rollout.max_steps = rd.get("max_steps", t.rollout.max_steps);
    t.step_size = rd.get("step_size", t.step_size);
    t.step_decay = rd.get("step_decay", t.step_decay);
    t.clip_norm = rd.get("clip_norm", t.clip_norm);
    t.max_iterations = rd.get("max_iterations", t.max_iterations);
    t.restarts = rd.get("restarts", t.restarts);
    t.patience = rd.get("patience", t.patience);
    t.tolerance = rd.get("tolerance", t.tolerance);
    t.val_repeats = rd.get("val_repeats", t.val_repeats);
    t.init_scale = rd.get("init_scale", t.init_scale);
    t.init_sigma = rd.get("init_sigma", t.init_sigma);
    t.validation_selection = rd.get("validation_selection", t.validation_selection);
    t.seed = rd.get<std::uint64_t>("seed", t.seed);
    t.jobs = rd.get_quiet("jobs", 1);
    json config = rd.finish();
    auto p = std::make_unique<mirl_policy>();
    p->art = mirl::train_sequential(dataset->data, detector->art.model, s);
    p->rollout = t.rollout;
    rebuild_policy(*p, std::move(config), dataset->hash, *detector);
    *out = p.release();
  });
}

mirl_status mirl_policy_save(const mirl_policy* policy, const char* path) {
  return guarded([&] {
    require(policy, "policy");
    require(path, "path");
    mirl::text::write_file(path, policy->doc.dump(2) + "\n");
  });
}

mirl_status mirl_policy_load(const char* path, mirl_policy** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    const json j = check_format(mirl::text::read_file(path), "mirl-policy");
    auto p = std::make_unique<mirl_policy>();
    p->art.policy = mirl::parse_policy(j.at("policy").get<std::string>());
    p->art.lambda = j.at("lambda").get<double>();
    p->art.val_reward = j.at("val_reward").get<double>();
    p->art.restart = j.at("restart").get<int>();
    for (const auto& g : j.at("grid")) p->art.grid.push_back({g.at("lambda").get<double>(), g.at("val_reward").get<double>()});
    p->art.log = j.at("log").get<std::string>();
    p->rollout.max_steps = j.at("max_steps").get<int>();
    p->rollout.alpha = j.at("alpha").get<double>();
    p->doc = j;
    p->hash = hash_of(j);
    *out = p.release();
  });
}

mirl_status mirl_policy_json(const mirl_policy* policy, char** out) {
  return guarded([&] {
    require(policy, "policy");
    require(out, "out");
    *out = dup_string(policy->doc.dump(2));
  });
}

mirl_status mirl_policy_log_text(const mirl_policy* policy, char** out) {
  return guarded([&] {
    require(policy, "policy");
    require(out, "out");
    *out = dup_string(policy->art.log);
  });
}

void mirl_policy_free(mirl_policy* policy) { delete policy; }

mirl_status mirl_evaluate(const mirl_dataset* dataset, const mirl_detector* detector,
                          const mirl_policy* policy, const char* config_json, char** report_json,
                          char** timing_json) {
  return guarded([&] {
    require(dataset, "dataset");
    require(detector, "detector");
    require(report_json, "report_json");
    *report_json = nullptr;
    if (timing_json != nullptr) *timing_json = nullptr;
    const mirl::Dataset& ds = dataset->data;
    if (detector->feature_dim != ds.feature_dim)
      throw mirl::dimension_error("detector expects " + std::to_string(detector->feature_dim) +
                                  " features, dataset has " + std::to_string(ds.feature_dim));
    if (policy != nullptr && policy->art.policy.feature_dim() != ds.feature_dim)
      throw mirl::dimension_error("policy expects " + std::to_string(policy->art.policy.feature_dim()) +
                                  " features, dataset has " + std::to_string(ds.feature_dim));
    if (policy != nullptr && policy->doc.at("detector_hash").get<std::string>() != detector->hash)
      throw mirl::invalid_argument("policy was trained on a different detector");
    ConfigReader rd(config_json, "evaluate");
    const std::string split_name = rd.get<std::string>("split", "test");
    const mirl::Split split = parse_split(split_name);
    const double nms_threshold = rd.get("nms_threshold", 0.2);
    int repeats = 1;
    std::uint64_t seed = 0;
    mirl::RolloutConfig rollout;
    if (policy != nullptr) {
      repeats = rd.get("repeats", 5);
      seed = rd.get<std::uint64_t>("seed", 0);
      rollout = policy->rollout;
      rollout.max_steps = rd.get("max_steps", rollout.max_steps);
    }
    const int jobs = rd.get_quiet("jobs", 1);
    json config = rd.finish();
    if (repeats < 1) throw mirl::invalid_argument("evaluate: repeats must be >= 1");
    if (!(nms_threshold > 0.0 && nms_threshold <= 1.0))
      throw mirl::invalid_argument("evaluate: nms_threshold must lie in (0, 1]");

    const auto images = ds.images_in(split);
    const int target = detector->art.target_class;
    const mirl::ExhaustiveEval ex =
        mirl::evaluate_exhaustive(ds, detector->art.model, images, target, nms_threshold);
    json report = {
        {"format", "mirl-eval"},
        {"version", 1},
        {"target_class", target},
        {"split", split_name},
        {"images", images.size()},
        {"dataset_hash", dataset->hash},
        {"detector_hash", detector->hash},
        {"config_hash", hash_of(config)},
        {"config", config},
        {"exhaustive", metrics_json(ex.ap_iou, ex.ap_inclusion, ex.classification_ap)},
    };
    json timing = {{"exhaustive_seconds_per_image", ex.seconds_per_image}};
    if (policy == nullptr) {
      report["method"] = detector->art.method;
      report["kind"] = "exhaustive";
      report["repeats"] = 1;
      report["metrics"] = report["exhaustive"];
    } else {
      const mirl::SequentialEval sq =
          mirl::evaluate_sequential(ds, detector->art.model, policy->art.policy, images, target,
                                    rollout, repeats, seed, ex.seconds_per_image, jobs);
      report["method"] = policy->doc.at("method");
      report["kind"] = "sequential";
      report["policy_hash"] = policy->hash;
      report["repeats"] = repeats;
      json per = json::array();
      std::vector<double> iou, inc, cls, frac;
      for (const auto& r : sq.repeats) {
        json m = metrics_json(r.ap_iou, r.ap_inclusion, r.classification_ap);
        m["evaluated_fraction"] = r.evaluated_fraction;
        per.push_back(m);
        if (r.ap_iou) iou.push_back(*r.ap_iou);
        if (r.ap_inclusion) inc.push_back(*r.ap_inclusion);
        cls.push_back(r.classification_ap);
        frac.push_back(r.evaluated_fraction);
      }
      report["per_repeat"] = per;
      auto summarize = [&](const std::vector<double>& v) -> std::pair<json, json> {
        if (v.empty()) return {nullptr, nullptr};
        const mirl::MeanStdev m = mirl::mean_stdev(v);
        return {m.mean, repeats > 1 ? json(m.stdev) : json(nullptr)};
      };
      json metrics = json::object(), stdev = json::object();
      std::tie(metrics["detection_ap_iou"], stdev["detection_ap_iou"]) = summarize(iou);
      std::tie(metrics["detection_ap_inclusion"], stdev["detection_ap_inclusion"]) = summarize(inc);
      std::tie(metrics["classification_ap"], stdev["classification_ap"]) = summarize(cls);
      std::tie(metrics["evaluated_fraction"], stdev["evaluated_fraction"]) = summarize(frac);
      report["metrics"] = metrics;
      if (repeats > 1) report["metrics_stdev"] = stdev;
      report["cost"] = {
          {"episodes", sq.cost.episodes},
          {"mean_fraction", sq.cost.mean_fraction},
          {"stdev_fraction", sq.cost.stdev_fraction},
          {"mean_evaluated", sq.cost.mean_evaluated},
          {"mean_total", sq.cost.mean_total},
          {"count_speedup", sq.cost.count_speedup},
      };
      timing["sequential_seconds_per_episode"] = sq.cost.mean_seconds;
      timing["wall_speedup"] = sq.cost.wall_speedup;
    }
    *report_json = dup_string(report.dump(2) + "\n");
    if (timing_json != nullptr) *timing_json = dup_string(timing.dump(2) + "\n");
  });
}

mirl_status mirl_report(const char* const* report_jsons, size_t count, char** table_json,
                        char** table_text) {
  return guarded([&] {
    require(table_json, "table_json");
    *table_json = nullptr;
    if (table_text != nullptr) *table_text = nullptr;
    if (count == 0) throw mirl::invalid_argument("report: at least one evaluation file is required");
    require(report_jsons, "report_jsons");
    std::vector<json> runs;
    for (size_t i = 0; i < count; ++i) {
      require(report_jsons[i], "report");
      runs.push_back(check_format(report_jsons[i], "mirl-eval"));
    }
    const std::string hash = runs[0].at("dataset_hash").get<std::string>();
    for (const json& r : runs)
      if (r.at("dataset_hash").get<std::string>() != hash)
        throw mirl::invalid_argument("report: incompatible dataset hashes " + hash + " and " +
                                     r.at("dataset_hash").get<std::string>());

    std::vector<std::string> methods;
    std::set<int> classes;
    std::map<std::pair<std::string, int>, const json*> cell;
    for (const json& r : runs) {
      const std::string m = r.at("method").get<std::string>();
      const int c = r.at("target_class").get<int>();
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
      classes.insert(c);
      if (!cell.emplace(std::make_pair(m, c), &r).second)
        throw mirl::invalid_argument("report: duplicate run for " + m + " class " + std::to_string(c));
    }
    const std::vector<std::string> metrics = {"detection_ap_iou", "detection_ap_inclusion",
                                              "classification_ap", "evaluated_fraction"};
    json tables = json::object();
    std::string text;
    for (const std::string& metric : metrics) {
      bool any = false;
      json rows = json::array();
      std::map<std::string, std::vector<double>> column;
      std::vector<std::vector<std::string>> lines;
      for (int c : classes) {
        json values = json::object();
        std::vector<std::string> line{"class " + std::to_string(c)};
        for (const std::string& m : methods) {
          auto it = cell.find({m, c});
          const json* mean = nullptr;
          const json* sd = nullptr;
          if (it != cell.end()) {
            const json& r = *it->second;
            if (r.at("metrics").contains(metric)) mean = &r.at("metrics").at(metric);
            if (r.contains("metrics_stdev") && r.at("metrics_stdev").contains(metric))
              sd = &r.at("metrics_stdev").at(metric);
          }
          if (mean == nullptr || mean->is_null()) {
            values[m] = nullptr;
            line.push_back("-");
            continue;
          }
          any = true;
          const double v = mean->get<double>();
          column[m].push_back(v);
          json entry = {{"mean", v}};
          std::string s = mirl::text::format_double(std::round(v * 1000.0) / 10.0);
          if (sd != nullptr && !sd->is_null()) {
            entry["stdev"] = sd->get<double>();
            s += " +- " + mirl::text::format_double(std::round(sd->get<double>() * 1000.0) / 10.0);
          }
          values[m] = entry;
          line.push_back(s);
        }
        rows.push_back({{"class", c}, {"values", values}});
        lines.push_back(line);
      }
      if (!any) continue;
      json mean_row = json::object();
      std::vector<std::string> line{"mean"};
      for (const std::string& m : methods) {
        auto it = column.find(m);
        if (it == column.end()) {
          mean_row[m] = nullptr;
          line.push_back("-");
          continue;
        }
        const double v = mirl::mean_stdev(it->second).mean;
        mean_row[m] = v;
        line.push_back(mirl::text::format_double(std::round(v * 1000.0) / 10.0));
      }
      lines.push_back(line);
      tables[metric] = {{"rows", rows}, {"mean", mean_row}};

      std::vector<std::string> header{metric};
      header.insert(header.end(), methods.begin(), methods.end());
      lines.insert(lines.begin(), header);
      std::vector<std::size_t> width(header.size(), 0);
      for (const auto& l : lines)
        for (std::size_t k = 0; k < l.size(); ++k) width[k] = std::max(width[k], l[k].size());
      for (const auto& l : lines) {
        for (std::size_t k = 0; k < l.size(); ++k) {
          text += l[k];
          if (k + 1 < l.size()) text += std::string(width[k] - l[k].size() + 2, ' ');
        }
        text += '\n';
      }
      text += '\n';
    }
    json out = {{"format", "mirl-report"},
                {"version", 1},
                {"dataset_hash", hash},
                {"methods", methods},
                {"classes", std::vector<int>(classes.begin(), classes.end())},
                {"tables", tables}};
    *table_json = dup_string(out.dump(2) + "\n");
    if (table_text != nullptr) *table_text = dup_string(text);
  });
}

}  // extern "C"
