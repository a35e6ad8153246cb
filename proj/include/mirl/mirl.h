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

// C interface to the mirl library. Objects are opaque handles released with
// the matching *_free call. Every function returns a status; on failure the
// message is available from mirl_last_error() on the calling thread. Strings
// returned through char** are owned by the caller and released with
// mirl_string_free. Configuration objects are JSON text.

#ifndef MIRL_MIRL_H_
#define MIRL_MIRL_H_

#include <stddef.h>

#if defined(MIRL_BUILDING_LIBRARY)
#define MIRL_API __attribute__((visibility("default")))
#else
#define MIRL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mirl_status {
  MIRL_OK = 0,
  MIRL_ERR_INVALID_ARGUMENT = 1,
  MIRL_ERR_IO = 2,
  MIRL_ERR_FORMAT = 3,
  MIRL_ERR_DIMENSION = 4,
  MIRL_ERR_RUNTIME = 5,
  MIRL_ERR_INTERNAL = 6,
} mirl_status;

typedef struct mirl_dataset mirl_dataset;
typedef struct mirl_detector mirl_detector;
typedef struct mirl_policy mirl_policy;

MIRL_API const char* mirl_version(void);
MIRL_API const char* mirl_last_error(void);
MIRL_API const char* mirl_status_name(mirl_status status);
MIRL_API void mirl_string_free(char* text);

// Datasets. Config keys mirror the generator fields; unknown keys are errors.
MIRL_API mirl_status mirl_dataset_generate(const char* config_json, mirl_dataset** out);
MIRL_API mirl_status mirl_dataset_load(const char* path, mirl_dataset** out);
MIRL_API mirl_status mirl_dataset_save(const mirl_dataset* dataset, const char* path);
MIRL_API mirl_status mirl_dataset_hash(const mirl_dataset* dataset, char** out);
// Calibration summary: fixated fractions and best-overlap statistics.
MIRL_API mirl_status mirl_dataset_summary(const mirl_dataset* dataset, char** json_out);
MIRL_API void mirl_dataset_free(mirl_dataset* dataset);

// Detectors: C grid on validation, refit on train+val.
MIRL_API mirl_status mirl_detector_train(const mirl_dataset* dataset, const char* config_json,
                                         mirl_detector** out);
MIRL_API mirl_status mirl_detector_save(const mirl_detector* detector, const char* path);
MIRL_API mirl_status mirl_detector_load(const char* path, mirl_detector** out);
// Whole artifact as JSON (the file written by mirl_detector_save).
MIRL_API mirl_status mirl_detector_json(const mirl_detector* detector, char** out);
MIRL_API mirl_status mirl_detector_model_text(const mirl_detector* detector, char** out);
MIRL_API mirl_status mirl_detector_assignment_text(const mirl_detector* detector, char** out);
MIRL_API mirl_status mirl_detector_decision(const mirl_detector* detector, const double* features,
                                            size_t count, double* out);
MIRL_API void mirl_detector_free(mirl_detector* detector);

// Sequential search policies trained on a detector's confidences.
MIRL_API mirl_status mirl_policy_train(const mirl_dataset* dataset, const mirl_detector* detector,
                                       const char* config_json, mirl_policy** out);
MIRL_API mirl_status mirl_policy_save(const mirl_policy* policy, const char* path);
MIRL_API mirl_status mirl_policy_load(const char* path, mirl_policy** out);
MIRL_API mirl_status mirl_policy_json(const mirl_policy* policy, char** out);
MIRL_API mirl_status mirl_policy_log_text(const mirl_policy* policy, char** out);
MIRL_API void mirl_policy_free(mirl_policy* policy);

// Evaluation of a detector, exhaustively or through `policy` when non-null.
// `report_json` is reproducible; `timing_json` holds wall-clock measurements.
MIRL_API mirl_status mirl_evaluate(const mirl_dataset* dataset, const mirl_detector* detector,
                                   const mirl_policy* policy, const char* config_json,
                                   char** report_json, char** timing_json);

// Merges evaluation reports into a methods x classes table per metric.
MIRL_API mirl_status mirl_report(const char* const* report_jsons, size_t count, char** table_json,
                                 char** table_text);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // MIRL_MIRL_H_
