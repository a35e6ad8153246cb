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

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mirl/mirl.h"

using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void fail_usage(const std::string& message) { throw Failure{kExitUsage, message}; }

void check(mirl_status status, const char* what) {
  if (status == MIRL_OK) return;
  const int code = status == MIRL_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
  throw Failure{code, std::string(what) + ": " + mirl_status_name(status) + ": " + mirl_last_error()};
}

// Owns a string returned by the C API.
struct Text {
  char* p = nullptr;
  ~Text() { mirl_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DatasetDel {
  void operator()(mirl_dataset* p) const { mirl_dataset_free(p); }
};
struct DetectorDel {
  void operator()(mirl_detector* p) const { mirl_detector_free(p); }
};
struct PolicyDel {
  void operator()(mirl_policy* p) const { mirl_policy_free(p); }
};
using DatasetPtr = std::unique_ptr<mirl_dataset, DatasetDel>;
using DetectorPtr = std::unique_ptr<mirl_detector, DetectorDel>;
using PolicyPtr = std::unique_ptr<mirl_policy, PolicyDel>;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitRuntime, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text) || !out.flush()) throw Failure{kExitRuntime, "cannot write " + path};
}

void log(const std::string& line) { std::cerr << line << '\n'; }

// Options shared by every subcommand: a config file section plus overrides.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file; the section named after the subcommand is used");
  cmd->add_option("--set", c.sets, "Override a config key: key=value (value parsed as JSON, else string)");
  cmd->add_option("--jobs", c.jobs, "Worker threads; never changes results")->check(CLI::PositiveNumber);
}

// Resolves the section for `name`: config file, then typed flags, then --set.
json resolve(const Common& c, const std::string& name, const json& flags) {
  json section = json::object();
  if (!c.config_path.empty()) {
    json file;
    try {
      file = json::parse(read_text(c.config_path));
    } catch (const json::parse_error& e) {
      fail_usage("config file " + c.config_path + ": " + e.what());
    }
    if (!file.is_object()) fail_usage("config file must hold a JSON object");
    if (file.contains(name)) {
      if (!file[name].is_object()) fail_usage("config section '" + name + "' must be an object");
      section = file[name];
    }
  }
  for (const auto& [k, v] : flags.items()) section[k] = v;
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) fail_usage("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    try {
      section[key] = json::parse(value);
    } catch (const json::parse_error&) {
      section[key] = value;
    }
  }
  section["jobs"] = c.jobs;
  return section;
}

// Removes a path-like key from the section; flags win over the config file.
std::string take_path(json& section, const std::string& key, const std::string& flag, bool required) {
  std::string v = flag;
  if (section.contains(key)) {
    if (v.empty()) {
      if (!section[key].is_string()) fail_usage("config key '" + key + "' must be a string");
      v = section[key].get<std::string>();
    }
    section.erase(key);
  }
  if (required && v.empty()) fail_usage("missing --" + key);
  return v;
}

std::vector<double> parse_grid(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail_usage(std::string("bad value '") + item + "' in " + what);
    }
  }
  if (out.empty()) fail_usage(std::string("empty ") + what);
  return out;
}

DatasetPtr load_dataset(const std::string& path) {
  mirl_dataset* d = nullptr;
  check(mirl_dataset_load(path.c_str(), &d), "loading dataset");
  return DatasetPtr(d);
}

DetectorPtr load_detector(const std::string& path) {
  mirl_detector* d = nullptr;
  check(mirl_detector_load(path.c_str(), &d), "loading detector");
  return DetectorPtr(d);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised detection and sequential search on synthetic scenes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mirl_version()));

  // gen-data
  Common gen_common;
  std::string gen_out;
  std::map<std::string, double> gen_real;
  std::map<std::string, long long> gen_int;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(gen, gen_common);
  gen->add_option("--out", gen_out, "Dataset file to write");
  long long seed_flag = -1, images_flag = -1, classes_flag = -1;
  gen->add_option("--seed", seed_flag, "Generator seed");
  gen->add_option("--images", images_flag, "Number of images");
  gen->add_option("--classes", classes_flag, "Number of target classes");

  // train-detector
  Common det_common;
  std::string det_dataset, det_out, det_mode, det_constraints, det_grid;
  long long det_restarts = -1, det_seed = -1, det_class = -1;
  auto* det = app.add_subcommand("train-detector", "Train a detector under one supervision mode");
  add_common(det, det_common);
  det->add_option("--dataset", det_dataset, "Dataset file");
  det->add_option("--out", det_out, "Detector artifact to write (.model and .assignment files alongside)");
  det->add_option("--mode", det_mode, "Supervision: bb, eye or il")->check(CLI::IsMember({"bb", "eye", "il"}));
  det->add_option("--constraints", det_constraints, "Topological constraints: on or off")
      ->check(CLI::IsMember({"on", "off"}));
  det->add_option("--c-grid", det_grid, "Comma separated SVM C values");
  det->add_option("--restarts", det_restarts, "Random restarts per fit");
  det->add_option("--seed", det_seed, "Training seed");
  det->add_option("--class", det_class, "Target class (one-vs-all)");

  // train-policy
  Common pol_common;
  std::string pol_dataset, pol_detector, pol_out, pol_grid;
  long long pol_restarts = -1, pol_seed = -1, pol_rollouts = -1;
  auto* pol = app.add_subcommand("train-policy", "Train a sequential search policy for a detector");
  add_common(pol, pol_common);
  pol->add_option("--dataset", pol_dataset, "Dataset file");
  pol->add_option("--detector", pol_detector, "Detector artifact");
  pol->add_option("--out", pol_out, "Policy artifact to write (.log alongside)");
  pol->add_option("--lambda-grid", pol_grid, "Comma separated regularizer values");
  pol->add_option("--restarts", pol_restarts, "Random initializations per lambda");
  pol->add_option("--rollouts", pol_rollouts, "Episodes per gradient estimate");
  pol->add_option("--seed", pol_seed, "Training seed");

  // evaluate
  Common ev_common;
  std::string ev_dataset, ev_detector, ev_policy, ev_out, ev_split;
  long long ev_repeats = -1, ev_seed = -1;
  auto* ev = app.add_subcommand("evaluate", "Evaluate a detector exhaustively or with a policy");
  add_common(ev, ev_common);
  ev->add_option("--dataset", ev_dataset, "Dataset file");
  ev->add_option("--detector", ev_detector, "Detector artifact");
  ev->add_option("--policy", ev_policy, "Policy artifact; enables sequential evaluation");
  ev->add_option("--out", ev_out, "Report to write (.timing.json alongside)");
  ev->add_option("--split", ev_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--repeats", ev_repeats, "Rollout repeats for sequential evaluation");
  ev->add_option("--seed", ev_seed, "Rollout seed");

  // report
  Common rep_common;
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  auto* rep = app.add_subcommand("report", "Merge evaluation reports into comparison tables");
  add_common(rep, rep_common);
  rep->add_option("inputs", rep_inputs, "Evaluation reports")->required();
  rep->add_option("--out", rep_out, "Table file to write (.txt alongside)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      json flags = json::object();
      if (seed_flag >= 0) flags["seed"] = seed_flag;
      if (images_flag >= 0) flags["images"] = images_flag;
      if (classes_flag >= 0) flags["classes"] = classes_flag;
      json section = resolve(gen_common, "gen-data", flags);
      section.erase("jobs");
      const std::string out = take_path(section, "out", gen_out, true);
      mirl_dataset* raw = nullptr;
      check(mirl_dataset_generate(section.dump().c_str(), &raw), "generating dataset");
      DatasetPtr ds(raw);
      check(mirl_dataset_save(ds.get(), out.c_str()), "saving dataset");
      Text summary;
      check(mirl_dataset_summary(ds.get(), &summary.p), "summarizing dataset");
      write_text(out + ".summary.json", summary.str() + "\n");
      log(summary.str());
      log("wrote " + out);
      return 0;
    }

    if (det->parsed()) {
      json flags = json::object();
      if (!det_mode.empty()) flags["supervision"] = det_mode;
      if (!det_constraints.empty()) flags["constraints"] = det_constraints == "on";
      if (!det_grid.empty()) flags["c_grid"] = parse_grid(det_grid, "--c-grid");
      if (det_restarts >= 0) flags["restarts"] = det_restarts;
      if (det_seed >= 0) flags["seed"] = det_seed;
      if (det_class >= 0) flags["target_class"] = det_class;
      json section = resolve(det_common, "train-detector", flags);
      const std::string dataset = take_path(section, "dataset", det_dataset, true);
      const std::string out = take_path(section, "out", det_out, true);
      if (section.value("supervision", std::string("eye")) == "bb" && section.contains("constraints")) {
        log("warning: bounding-box supervision ignores the constraints setting");
        section.erase("constraints");
      }
      DatasetPtr ds = load_dataset(dataset);
      mirl_detector* raw = nullptr;
      check(mirl_detector_train(ds.get(), section.dump().c_str(), &raw), "training detector");
      DetectorPtr d(raw);
      check(mirl_detector_save(d.get(), out.c_str()), "saving detector");
      Text model, assignment, doc;
      check(mirl_detector_model_text(d.get(), &model.p), "model text");
      check(mirl_detector_assignment_text(d.get(), &assignment.p), "assignment text");
      write_text(out + ".model", model.str());
      write_text(out + ".assignment", assignment.str());
      check(mirl_detector_json(d.get(), &doc.p), "detector summary");
      const json j = json::parse(doc.str());
      log(j.at("method").get<std::string>() + ": C=" + j.at("C").dump() + " objective=" + j.at("objective").dump());
      log("wrote " + out);
      return 0;
    }

    if (pol->parsed()) {
      json flags = json::object();
      if (!pol_grid.empty()) flags["lambda_grid"] = parse_grid(pol_grid, "--lambda-grid");
      if (pol_restarts >= 0) flags["restarts"] = pol_restarts;
      if (pol_rollouts >= 0) flags["rollouts"] = pol_rollouts;
      if (pol_seed >= 0) flags["seed"] = pol_seed;
      json section = resolve(pol_common, "train-policy", flags);
      const std::string dataset = take_path(section, "dataset", pol_dataset, true);
      const std::string detector = take_path(section, "detector", pol_detector, true);
      const std::string out = take_path(section, "out", pol_out, true);
      DatasetPtr ds = load_dataset(dataset);
      DetectorPtr d = load_detector(detector);
      mirl_policy* raw = nullptr;
      check(mirl_policy_train(ds.get(), d.get(), section.dump().c_str(), &raw), "training policy");
      PolicyPtr p(raw);
      check(mirl_policy_save(p.get(), out.c_str()), "saving policy");
      Text log_text, doc;
      check(mirl_policy_log_text(p.get(), &log_text.p), "training log");
      write_text(out + ".log", log_text.str());
      check(mirl_policy_json(p.get(), &doc.p), "policy summary");
      const json j = json::parse(doc.str());
      log(j.at("method").get<std::string>() + ": lambda=" + j.at("lambda").dump() +
          " val_reward=" + j.at("val_reward").dump());
      log("wrote " + out);
      return 0;
    }

    if (ev->parsed()) {
      json flags = json::object();
      if (!ev_split.empty()) flags["split"] = ev_split;
      if (ev_repeats >= 0) flags["repeats"] = ev_repeats;
      if (ev_seed >= 0) flags["seed"] = ev_seed;
      json section = resolve(ev_common, "evaluate", flags);
      const std::string dataset = take_path(section, "dataset", ev_dataset, true);
      const std::string detector = take_path(section, "detector", ev_detector, true);
      const std::string policy = take_path(section, "policy", ev_policy, false);
      const std::string out = take_path(section, "out", ev_out, true);
      DatasetPtr ds = load_dataset(dataset);
      DetectorPtr d = load_detector(detector);
      PolicyPtr p;
      if (!policy.empty()) {
        mirl_policy* raw = nullptr;
        check(mirl_policy_load(policy.c_str(), &raw), "loading policy");
        p.reset(raw);
      } else {
        for (const char* k : {"repeats", "seed", "max_steps"})
          if (section.contains(k)) {
            log(std::string("warning: '") + k + "' only applies to sequential evaluation");
            section.erase(k);
          }
      }
      Text report, timing;
      check(mirl_evaluate(ds.get(), d.get(), p.get(), section.dump().c_str(), &report.p, &timing.p), "evaluating");
      write_text(out, report.str());
      write_text(out + ".timing.json", timing.str());
      const json j = json::parse(report.str());
      log(j.at("method").get<std::string>() + " " + j.at("metrics").dump());
      log("wrote " + out);
      return 0;
    }

    if (rep->parsed()) {
      json section = resolve(rep_common, "report", json::object());
      const std::string out = take_path(section, "out", rep_out, false);
      section.erase("jobs");
      if (!section.empty()) fail_usage("report: unknown config key '" + section.begin().key() + "'");
      std::vector<std::string> texts;
      for (const std::string& path : rep_inputs) texts.push_back(read_text(path));
      std::vector<const char*> ptrs;
      for (const std::string& t : texts) ptrs.push_back(t.c_str());
      Text table, text;
      check(mirl_report(ptrs.data(), ptrs.size(), &table.p, &text.p), "building report");
      if (!out.empty()) {
        write_text(out, table.str());
        write_text(out + ".txt", text.str());
        log("wrote " + out);
      }
      std::cout << text.str();
      return 0;
    }
  } catch (const Failure& f) {
    log("error: " + f.message);
    return f.code;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
