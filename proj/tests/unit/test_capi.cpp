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

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mirl/mirl.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  mirl_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "mirl_capi_test";
  fs::create_directories(dir);
  return dir / name;
}

constexpr const char* kData = R"({"images": 40, "seed": 5})";
constexpr const char* kDetector = R"({"supervision": "eye", "c_grid": [0.1, 1], "restarts": 2, "seed": 1})";
constexpr const char* kPolicy =
    R"({"lambda_grid": [0], "rollouts": 8, "max_iterations": 2, "restarts": 1, "val_repeats": 1, "seed": 3})";

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::string(mirl_status_name(MIRL_OK)) != "");
  CHECK(std::string(mirl_version()).size() > 0);
  mirl_dataset* ds = nullptr;
  CHECK(mirl_dataset_generate(R"({"images": 0})", &ds) == MIRL_ERR_INVALID_ARGUMENT);
  CHECK(ds == nullptr);
  CHECK(std::string(mirl_last_error()).find("images") != std::string::npos);
  CHECK(mirl_dataset_generate(R"({"imagez": 5})", &ds) == MIRL_ERR_INVALID_ARGUMENT);
  CHECK(mirl_dataset_generate("{not json", &ds) == MIRL_ERR_INVALID_ARGUMENT);
  CHECK(mirl_dataset_generate(kData, nullptr) == MIRL_ERR_INVALID_ARGUMENT);
  CHECK(mirl_dataset_load("/nonexistent/mirl.ds", &ds) == MIRL_ERR_IO);
  const fs::path junk = scratch("junk.ds");
  std::ofstream(junk) << "garbage\n";
  CHECK(mirl_dataset_load(junk.c_str(), &ds) == MIRL_ERR_FORMAT);
  mirl_string_free(nullptr);
  mirl_dataset_free(nullptr);
}

TEST_CASE("end to end through the C interface") {
  mirl_dataset* ds = nullptr;
  REQUIRE(mirl_dataset_generate(kData, &ds) == MIRL_OK);
  char* text = nullptr;
  REQUIRE(mirl_dataset_hash(ds, &text) == MIRL_OK);
  const std::string hash = take(text);

  const fs::path dpath = scratch("d.ds");
  REQUIRE(mirl_dataset_save(ds, dpath.c_str()) == MIRL_OK);
  mirl_dataset* back = nullptr;
  REQUIRE(mirl_dataset_load(dpath.c_str(), &back) == MIRL_OK);
  REQUIRE(mirl_dataset_hash(back, &text) == MIRL_OK);
  CHECK(take(text) == hash);
  REQUIRE(mirl_dataset_summary(ds, &text) == MIRL_OK);
  CHECK(take(text).find("fixated_fraction_positive") != std::string::npos);

  mirl_detector* det = nullptr;
  REQUIRE(mirl_detector_train(ds, kDetector, &det) == MIRL_OK);
  mirl_detector* det_jobs = nullptr;
  REQUIRE(mirl_detector_train(ds, R"({"supervision": "eye", "c_grid": [0.1, 1], "restarts": 2, "seed": 1, "jobs": 3})",
                              &det_jobs) == MIRL_OK);
  REQUIRE(mirl_detector_json(det, &text) == MIRL_OK);
  const std::string det_json = take(text);
  REQUIRE(mirl_detector_json(det_jobs, &text) == MIRL_OK);
  CHECK(take(text) == det_json);
  CHECK(det_json.find("CMI-EYE-DET") != std::string::npos);

  const fs::path tpath = scratch("d.det");
  REQUIRE(mirl_detector_save(det, tpath.c_str()) == MIRL_OK);
  mirl_detector* det_back = nullptr;
  REQUIRE(mirl_detector_load(tpath.c_str(), &det_back) == MIRL_OK);
  REQUIRE(mirl_detector_json(det_back, &text) == MIRL_OK);
  CHECK(take(text) == det_json);
  REQUIRE(mirl_detector_model_text(det, &text) == MIRL_OK);
  CHECK_FALSE(take(text).empty());
  REQUIRE(mirl_detector_assignment_text(det, &text) == MIRL_OK);
  CHECK_FALSE(take(text).empty());

  double f[24] = {0};
  double score = 0.0;
  CHECK(mirl_detector_decision(det, f, 24, &score) == MIRL_OK);
  CHECK(mirl_detector_decision(det, f, 23, &score) == MIRL_ERR_DIMENSION);
  CHECK(mirl_detector_train(ds, R"({"supervision": "gaze"})", &det_back) == MIRL_ERR_INVALID_ARGUMENT);

  mirl_policy* pol = nullptr;
  REQUIRE(mirl_policy_train(ds, det, kPolicy, &pol) == MIRL_OK);
  REQUIRE(mirl_policy_json(pol, &text) == MIRL_OK);
  const std::string pol_json = take(text);
  const fs::path ppath = scratch("d.pol");
  REQUIRE(mirl_policy_save(pol, ppath.c_str()) == MIRL_OK);
  mirl_policy* pol_back = nullptr;
  REQUIRE(mirl_policy_load(ppath.c_str(), &pol_back) == MIRL_OK);
  REQUIRE(mirl_policy_json(pol_back, &text) == MIRL_OK);
  CHECK(take(text) == pol_json);
  REQUIRE(mirl_policy_log_text(pol, &text) == MIRL_OK);
  CHECK_FALSE(take(text).empty());

  char* report = nullptr;
  char* timing = nullptr;
  REQUIRE(mirl_evaluate(ds, det, nullptr, "{}", &report, &timing) == MIRL_OK);
  const std::string exhaustive = take(report);
  take(timing);
  REQUIRE(mirl_evaluate(ds, det, pol, R"({"repeats": 2, "seed": 4})", &report, &timing) == MIRL_OK);
  const std::string seq = take(report);
  take(timing);
  REQUIRE(mirl_evaluate(ds, det, pol, R"({"repeats": 2, "seed": 4, "jobs": 2})", &report, &timing) == MIRL_OK);
  CHECK(take(report) == seq);
  take(timing);
  CHECK(mirl_evaluate(ds, det, pol, R"({"split": "dev"})", &report, &timing) == MIRL_ERR_INVALID_ARGUMENT);

  const char* inputs[] = {exhaustive.c_str(), seq.c_str()};
  char* table = nullptr;
  REQUIRE(mirl_report(inputs, 2, &table, &text) == MIRL_OK);
  CHECK(take(table).find("tables") != std::string::npos);
  CHECK(take(text).find("CMI-EYE") != std::string::npos);

  mirl_policy_free(pol_back);
  mirl_policy_free(pol);
  mirl_detector_free(det_back);
  mirl_detector_free(det_jobs);
  mirl_detector_free(det);
  mirl_dataset_free(back);
  mirl_dataset_free(ds);
  fs::remove_all(dpath.parent_path());
}
