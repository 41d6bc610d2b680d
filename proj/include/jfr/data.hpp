#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jfr/rng.hpp"
#include "jfr/tensor.hpp"

namespace jfr {

// ---- pixel normalization ----------------------------------------------------
// Raw images live in [0, 255]; the networks consume (p - 127.5) / 128.

double normalize_pixel(double raw);
double denormalize_pixel(double value);
Tensor normalize_image(const Tensor& raw);
Tensor denormalize_image(const Tensor& value);

// ---- resampling ---------------------------------------------------------------

/// Catmull-Rom bicubic resize (kernel parameter a = -0.5) of a [C,H,W]
/// image to [C,out_h,out_w]. Separable; source coordinates follow the
/// center-aligned convention src = (dst + 0.5) * (in/out) - 0.5; samples
/// beyond the border clamp to the edge pixel. Values are interpolated
/// as-is — overshoot near edges is the caller's business.
Tensor bicubic_resize(const Tensor& img, std::size_t out_h, std::size_t out_w);

/// Mirrors the last (width) axis of a tensor of any rank >= 1.
Tensor hflip(const Tensor& img);

// ---- samples ------------------------------------------------------------------

/// One training/eval record: the degraded input and its ground truth.
struct Sample {
    Tensor lr_upscaled;  // [3,H,W] down-4x then up-4x, clamped, normalized
    Tensor hr;           // [3,H,W] normalized ground truth
    std::size_t label = 0;
};

/// Builds a Sample from a raw [3,H,W] image in [0,255] with H and W
/// divisible by 4. The down-up round trip overshoots near sharp edges, so
/// the result is clamped back to [0,255] before normalization to keep
/// every stored pixel inside the normalized range invariant.
Sample make_lr_pair(const Tensor& hr_raw, std::size_t label);

// ---- synthetic identities -----------------------------------------------------

/// Knobs for the synthetic identity generator. Each identity is a seeded
/// arrangement of 3-5 filled ellipses/rectangles (including 1-2 one-or-two
/// pixel bars whose high frequency the 4x round trip destroys); samples
/// jitter the arrangement's position and brightness and add pixel noise.
struct SyntheticSpec {
    std::size_t classes = 10;
    std::size_t samples_per_class = 50;
    std::size_t height = 32;
    std::size_t width = 28;
    /// Identities [0, train_classes) form the training split; the rest are
    /// held out for verification. May be 0 (everything held out).
    std::size_t train_classes = 7;
    std::size_t verification_pairs = 400;  // balanced same/different, even
    double position_jitter = 0.10;         // fraction of each dimension
    double brightness_jitter = 0.15;       // multiplicative, +-fraction
    double noise_sigma = 4.0;              // additive, gray levels
    std::size_t min_blobs = 3;
    std::size_t max_blobs = 5;
    double min_center_separation = 2.0;    // pixels, between identities

    void validate() const;
};

struct VerificationPair {
    std::size_t a = 0;  // indices into the test split
    std::size_t b = 0;
    bool same = false;
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
    std::vector<VerificationPair> pairs;  // over test indices, balanced
    std::size_t classes = 0;
    std::size_t train_classes = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

/// Deterministic per seed. Training and held-out identities are disjoint;
/// the pair list is built over the held-out split only.
Dataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed);

// ---- file formats -------------------------------------------------------------

/// Binary dataset container: "JFDS" magic, version, counts and dims, then
/// per-sample records (label, hr, lr_upscaled). Pairs travel separately as
/// CSV because they are indices, not images.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// CSV pair list: header `index_a,index_b,same` then one row per pair.
void save_pairs_csv(const std::vector<VerificationPair>& pairs, const std::string& path);
std::vector<VerificationPair> load_pairs_csv(const std::string& path);

/// Binary PPM (P6), 8 bits per channel. Values are rounded and clamped on
/// write; read returns a [3,H,W] tensor in [0,255].
void write_ppm(const Tensor& img_raw, const std::string& path);
Tensor read_ppm(const std::string& path);

}  // namespace jfr
