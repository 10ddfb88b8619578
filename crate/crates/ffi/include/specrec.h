#ifndef SPECREC_H
#define SPECREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Reconstruction methods accepted by [`sr_reconstruct`].
 */
typedef enum SrMethod {
  SR_METHOD_GAP_TV = 0,
  SR_METHOD_CSC_NO_TV = 1,
  SR_METHOD_CSC_TV = 2,
} SrMethod;

/*
 Result codes.
 */
typedef enum SrStatus {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_SHAPE = 2,
  SR_STATUS_PARAMETER = 3,
  SR_STATUS_INDEX = 4,
  SR_STATUS_DEGENERATE = 5,
  SR_STATUS_DATA = 6,
  SR_STATUS_EMPTY = 7,
  SR_STATUS_FORMAT = 8,
  SR_STATUS_IO = 9,
  SR_STATUS_INVALID_UTF8 = 10,
  SR_STATUS_PANIC = 11,
} SrStatus;

/*
 A spectral cube, band-major.
 */
typedef struct SrCube SrCube;

/*
 A bank of convolution kernels.
 */
typedef struct SrDictionary SrDictionary;

/*
 A single plane: a measurement or a coded aperture.
 */
typedef struct SrImage SrImage;

/*
 Per-band coding masks.
 */
typedef struct SrSystem SrSystem;

/*
 Solver settings; start from [`sr_params_default`].
 */
typedef struct SrParams {
  double beta;
  double rho;
  double kappa;
  size_t outer_iters;
  size_t inner_iters;
  size_t tv_iters;
  double lowpass_weight;
  double gram_epsilon;
  double noise_sigma;
} SrParams;

/*
 Reconstruction quality figures.
 */
typedef struct SrMetrics {
  double psnr_db;
  double ssim;
  double sam_rad;
} SrMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` (NUL
 terminated, truncated to `len` bytes) and returns the full message
 length plus one. Passing a null `buf` just reports the length.
 */
size_t sr_last_error_message(char *buf, size_t len);

struct SrParams sr_params_default(void);

/*
 Copies `width * height * bands` values (band-major) into a new cube.
 */
enum SrStatus sr_cube_new(size_t width,
                          size_t height,
                          size_t bands,
                          const double *data,
                          struct SrCube **out);

/*
 The bundled synthetic test scene.
 */
enum SrStatus sr_cube_synthetic(size_t width, size_t height, size_t bands, struct SrCube **out);

enum SrStatus sr_cube_dims(const struct SrCube *cube, size_t *width, size_t *height, size_t *bands);

/*
 Copies the cube's values into `out`, which must hold exactly `len`
 values.
 */
enum SrStatus sr_cube_copy_data(const struct SrCube *cube, double *out, size_t len);

enum SrStatus sr_cube_load(const char *path_utf8, struct SrCube **out);

enum SrStatus sr_cube_save(const struct SrCube *cube, const char *path_utf8);

void sr_cube_free(struct SrCube *cube);

/*
 Copies `width * height` row-major values into a new image.
 */
enum SrStatus sr_image_new(size_t width, size_t height, const double *data, struct SrImage **out);

enum SrStatus sr_image_dims(const struct SrImage *image, size_t *width, size_t *height);

enum SrStatus sr_image_copy_data(const struct SrImage *image, double *out, size_t len);

enum SrStatus sr_image_load(const char *path_utf8, struct SrImage **out);

enum SrStatus sr_image_save(const struct SrImage *image, const char *path_utf8);

void sr_image_free(struct SrImage *image);

/*
 Random binary aperture with roughly `density` open pixels.
 */
enum SrStatus sr_mask_generate(size_t width,
                               size_t height,
                               uint64_t seed,
                               double density,
                               struct SrImage **out);

/*
 Shears `mask` by `shear_step` pixels per band.
 */
enum SrStatus sr_system_build(const struct SrImage *mask,
                              size_t bands,
                              int64_t shear_step,
                              struct SrSystem **out);

void sr_system_free(struct SrSystem *system);

/*
 Snapshot of `cube` through `system`.
 */
enum SrStatus sr_forward(const struct SrSystem *system,
                         const struct SrCube *cube,
                         struct SrImage **out);

/*
 Adds seeded Gaussian noise with standard deviation `sigma`.
 */
enum SrStatus sr_add_noise(const struct SrImage *image,
                           double sigma,
                           uint64_t seed,
                           struct SrImage **out);

/*
 Orthonormal 2-D DCT atoms of size `kernel_size`.
 */
enum SrStatus sr_dictionary_dct(size_t kernel_size, struct SrDictionary **out);

enum SrStatus sr_dictionary_load(const char *path_utf8, struct SrDictionary **out);

enum SrStatus sr_dictionary_save(const struct SrDictionary *dict, const char *path_utf8);

void sr_dictionary_free(struct SrDictionary *dict);

/*
 Reconstructs a cube from `y`. `method` is an [`SrMethod`] value; `dict`
 may be null for `GapTv`, `params` may be null for the defaults.
 */
enum SrStatus sr_reconstruct(const struct SrSystem *system,
                             const struct SrImage *y,
                             const struct SrDictionary *dict,
                             const struct SrParams *params,
                             uint32_t method,
                             struct SrCube **out);

/*
 PSNR and SSIM of `estimate` against `truth`, with SAM averaged over the
 whole image.
 */
enum SrStatus sr_metrics(const struct SrCube *truth,
                         const struct SrCube *estimate,
                         struct SrMetrics *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPECREC_H */
