#ifndef MOTIONSPACE_H
#define MOTIONSPACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Values per audio frame.
 */
#define MS_AUDIO_FRAME_DIM 256

/*
 Values per pose frame: roll, pitch, yaw, tx, ty, tz.
 */
#define MS_POSE_DIM 6

/*
 Result code of every fallible call.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_SHAPE_MISMATCH = 3,
  MS_STATUS_BUFFER_TOO_SMALL = 4,
  MS_STATUS_PARSE_ERROR = 5,
  MS_STATUS_IO_ERROR = 6,
  MS_STATUS_INTERNAL = 7,
} MsStatus;

/*
 Opaque handle to a loaded model.
 */
typedef struct MsModel MsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *ms_version(void);

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call on the same thread.
 */
const char *ms_last_error(void);

/*
 Frames of a trajectory stitched from `num_clips` clips of `clip_len`.
 */
size_t ms_trajectory_len(size_t clip_len, size_t num_clips);

/*
 Loads a checkpoint file into a new handle stored in `*out`.

 # Safety
 `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MsStatus ms_model_load(const char *path, struct MsModel **out);

/*
 Releases a handle. Null is ignored.

 # Safety
 `model` must be null or a handle from `ms_model_load` not yet freed.
 */
void ms_model_free(struct MsModel *model);

/*
 Frames per clip `t`, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t ms_model_clip_len(const struct MsModel *model);

/*
 Number of motion bases `S`, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t ms_model_basis_count(const struct MsModel *model);

/*
 Motion feature dimension `C`, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t ms_model_feature_dim(const struct MsModel *model);

/*
 Attention weights over the bases for one audio clip of
 `t * MS_AUDIO_FRAME_DIM` values. Writes `S` values.

 # Safety
 Pointers must be valid for the given lengths.
 */
enum MsStatus ms_model_audio_weights(const struct MsModel *model,
                                     const double *audio,
                                     size_t audio_len,
                                     double *out,
                                     size_t out_len);

/*
 Center motion feature for one audio clip. Writes `C` values.

 # Safety
 Pointers must be valid for the given lengths.
 */
enum MsStatus ms_model_center(const struct MsModel *model,
                              const double *audio,
                              size_t audio_len,
                              double *out,
                              size_t out_len);

/*
 Samples `num_samples` trajectories for consecutive audio clips. `audio`
 holds `n * t * MS_AUDIO_FRAME_DIM` values; `initial` holds 6. Writes
 `num_samples * ms_trajectory_len(t, n) * 6` values, sample-major.

 # Safety
 Pointers must be valid for the given lengths.
 */
enum MsStatus ms_model_sample(const struct MsModel *model,
                              const double *audio,
                              size_t audio_len,
                              double epsilon,
                              uint64_t seed,
                              size_t num_samples,
                              const double *initial,
                              double *out,
                              size_t out_len);

/*
 Stitches `num_clips` offset clips of `clip_len` frames (6 values per
 frame, first frame of each clip all zero) from `initial`. Writes
 `ms_trajectory_len(clip_len, num_clips) * 6` values.

 # Safety
 Pointers must be valid for the given lengths.
 */
enum MsStatus ms_stitch(const double *offsets,
                        size_t num_clips,
                        size_t clip_len,
                        const double *initial,
                        double *out,
                        size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOTIONSPACE_H */
