#ifndef HYBP_H
#define HYBP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum HybpStatus {
  HYBP_STATUS_OK = 0,
  /**
   * Null pointer, zero size or out-of-range setting.
   */
  HYBP_STATUS_INVALID_ARGUMENT = 1,
  HYBP_STATUS_IO = 2,
  /**
   * Malformed stream or inconsistent coded data.
   */
  HYBP_STATUS_FORMAT = 3,
  HYBP_STATUS_CHECKSUM = 4,
  HYBP_STATUS_DIVERGENCE = 5,
  /**
   * Internal failure, including a caught panic.
   */
  HYBP_STATUS_INTERNAL = 6,
} HybpStatus;

typedef enum HybpMethod {
  HYBP_METHOD_HYBRID = 0,
  HYBP_METHOD_NO_REFINE = 1,
  HYBP_METHOD_PROMPT_ONLY = 2,
  HYBP_METHOD_TRADITIONAL = 3,
} HybpMethod;

/**
 * Decoded 8-bit luma frames.
 */
typedef struct HybpDecoded HybpDecoded;

/**
 * Encoder settings.
 */
typedef struct HybpEncoder HybpEncoder;

/**
 * An encoded HYBP stream.
 */
typedef struct HybpStream HybpStream;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *hybp_last_error(void);

/**
 * Creates an encoder with default settings.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HybpStatus hybp_encoder_new(struct HybpEncoder **out);

/**
 * # Safety
 * `enc` must be null or a handle from `hybp_encoder_new` not yet freed.
 */
void hybp_encoder_free(struct HybpEncoder *enc);

/**
 * Sets the method, GOP length, latent dimension and generator seed.
 *
 * # Safety
 * `enc` must be a live encoder handle.
 */
enum HybpStatus hybp_encoder_configure(struct HybpEncoder *enc,
                                       enum HybpMethod method,
                                       uint32_t gop_length,
                                       uint32_t latent_dim,
                                       uint64_t seed);

/**
 * Sets the inversion and refinement iteration counts and worker threads.
 *
 * # Safety
 * `enc` must be a live encoder handle.
 */
enum HybpStatus hybp_encoder_set_effort(struct HybpEncoder *enc,
                                        uint32_t invert_iters,
                                        uint32_t refine_iters,
                                        uint32_t jobs);

/**
 * Encodes `frame_count` planar 8-bit luma frames of `width * height`
 * samples each at `target_kbps`.
 *
 * # Safety
 * `enc` must be a live encoder handle, `samples` must point to
 * `width * height * frame_count` readable bytes and `out` must be valid for writes.
 */
enum HybpStatus hybp_encode(const struct HybpEncoder *enc,
                            const uint8_t *samples,
                            uint32_t width,
                            uint32_t height,
                            uint32_t frame_count,
                            uint32_t fps,
                            double target_kbps,
                            struct HybpStream **out);

/**
 * Borrowed view of the stream bytes, valid until the stream is freed.
 *
 * # Safety
 * `stream` must be a live stream handle and `len` valid for writes.
 */
const uint8_t *hybp_stream_bytes(const struct HybpStream *stream, size_t *len);

/**
 * Whether every GOP met its byte budget; a stream over budget is still decodable.
 *
 * # Safety
 * `stream` must be null or a live stream handle.
 */
bool hybp_stream_within_budget(const struct HybpStream *stream);

/**
 * # Safety
 * `stream` must be null or a stream handle not yet freed.
 */
void hybp_stream_free(struct HybpStream *stream);

/**
 * Decodes a HYBP stream. `stitched` selects the re-encoded keyframe path;
 * both paths give identical pictures.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be valid for writes.
 */
enum HybpStatus hybp_decode(const uint8_t *data,
                            size_t len,
                            bool stitched,
                            struct HybpDecoded **out);

/**
 * Picture size, frame count and frame rate of a decoded sequence.
 *
 * # Safety
 * `dec` must be a live decoded handle; each output pointer must be valid for writes.
 */
enum HybpStatus hybp_decoded_info(const struct HybpDecoded *dec,
                                  uint32_t *width,
                                  uint32_t *height,
                                  uint32_t *frame_count,
                                  uint32_t *fps);

/**
 * Borrowed 8-bit samples of frame `index`, `width * height` bytes, valid
 * until the sequence is freed; null when out of range.
 *
 * # Safety
 * `dec` must be null or a live decoded handle.
 */
const uint8_t *hybp_decoded_frame(const struct HybpDecoded *dec, uint32_t index);

/**
 * # Safety
 * `dec` must be null or a decoded handle not yet freed.
 */
void hybp_decoded_free(struct HybpDecoded *dec);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBP_H */
