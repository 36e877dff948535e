// Copyright 2026 The AGN Authors. All Rights Reserved.
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

/* C interface to the airway graph network library. */
#ifndef AGN_AGN_H
#define AGN_AGN_H

#include <stddef.h>
#include <stdint.h>

#if defined(AGN_BUILDING_LIBRARY)
#define AGN_API __attribute__((visibility("default")))
#else
#define AGN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum agn_status {
  AGN_OK = 0,
  AGN_ERR_INVALID_ARGUMENT = 1,
  AGN_ERR_SHAPE = 2,
  AGN_ERR_IO = 3,
  AGN_ERR_FORMAT = 4,
  AGN_ERR_NON_FINITE = 5,
  AGN_ERR_INTERNAL = 99
} agn_status;

typedef enum agn_split { AGN_SPLIT_TRAIN = 0, AGN_SPLIT_TEST = 1 } agn_split;

typedef struct agn_config agn_config;
typedef struct agn_volume agn_volume;
typedef struct agn_model agn_model;
typedef struct agn_metrics agn_metrics;

/* Called once per metric record during training; may be NULL. */
typedef void (*agn_record_fn)(int iteration, agn_split split, double loss, double dice, void* user);

/* Message of the last failed call on this thread ("" if none). */
AGN_API const char* agn_last_error(void);
AGN_API const char* agn_version(void);

AGN_API agn_status agn_config_default(agn_config** out);
AGN_API agn_status agn_config_load(const char* path, agn_config** out);
AGN_API agn_status agn_config_parse(const char* text, agn_config** out);
AGN_API agn_status agn_config_set(agn_config* cfg, const char* key, const char* value);
/* Writes the key = value listing; *needed receives the size including the terminator. */
AGN_API agn_status agn_config_format(const agn_config* cfg, char* buf, size_t size, size_t* needed);
AGN_API void agn_config_free(agn_config* cfg);

/* difficulty: "tube_only" or "with_bronchi". */
AGN_API agn_status agn_volume_generate(size_t slices, size_t height, size_t width, uint64_t seed,
                                       const char* difficulty, agn_volume** out);
AGN_API agn_status agn_volume_load(const char* path, agn_volume** out);
AGN_API agn_status agn_volume_save(const agn_volume* vol, const char* path);
AGN_API agn_status agn_volume_dims(const agn_volume* vol, size_t* slices, size_t* height, size_t* width);
AGN_API void agn_volume_free(agn_volume* vol);

/* Training drops empty slices and splits the rest 75/25 in order. */
AGN_API agn_status agn_train_cnn(const agn_volume* vol, const agn_config* cfg, agn_record_fn on_record, void* user,
                                 agn_model** model, agn_metrics** metrics);
AGN_API agn_status agn_train_joint(const agn_volume* vol, const char* cnn_checkpoint, const agn_config* cfg,
                                   agn_record_fn on_record, void* user, agn_model** model, agn_metrics** metrics);

/* cfg may be NULL for defaults; height and width are the slice size. */
AGN_API agn_status agn_model_load(const char* checkpoint, const agn_config* cfg, size_t height, size_t width,
                                  agn_model** out);
AGN_API agn_status agn_model_save(const agn_model* model, const char* checkpoint);
AGN_API agn_status agn_model_is_joint(const agn_model* model, int* joint);
/* Eval-mode probability map of one windowed slice (values in [0,1], row-major). */
AGN_API agn_status agn_model_predict(agn_model* model, const double* slice, size_t height, size_t width,
                                     double* prob);
AGN_API void agn_model_free(agn_model* model);

/* Image files for every slice; cnn_model may be NULL. */
AGN_API agn_status agn_predict_volume(agn_model* model, agn_model* cnn_model, const agn_volume* vol,
                                      const agn_config* cfg, const char* out_dir, size_t* files_written);
/* One mean record over the "train" or "test" split of the non-empty slices,
   tagged with the checkpoint step. */
AGN_API agn_status agn_evaluate(agn_model* model, const agn_volume* vol, const agn_config* cfg, const char* split,
                                agn_metrics** out);

AGN_API size_t agn_metrics_count(const agn_metrics* metrics);
AGN_API agn_status agn_metrics_get(const agn_metrics* metrics, size_t index, int* iteration, agn_split* split,
                                   double* loss, double* dice);
AGN_API agn_status agn_metrics_write_csv(const agn_metrics* metrics, const char* path);
AGN_API void agn_metrics_free(agn_metrics* metrics);

#ifdef __cplusplus
}
#endif

#endif /* AGN_AGN_H */
