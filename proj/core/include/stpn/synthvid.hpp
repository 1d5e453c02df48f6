#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stpn/rng.hpp"
#include "stpn/tensor.hpp"

namespace stpn {

/// Pixel box, half-open, x0 < x1 and y0 < y1.
struct AnnotatedBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    std::uint32_t class_id = 0;
    std::uint32_t track_id = 0;
};

struct DegradationSpec {
    double blur_len = 7.0;      // line kernel length in pixels, >= 1
    double blur_angle = 0.5;    // radians
    double occl_frac = 0.85;    // occluder area as a fraction of the box
    double degrade_prob = 0.5;  // per-frame probability of blur/occlusion
    double deform_amp = 0.1;    // sprite scale jitter amplitude
};

/// One synthetic video: a class-bearing sprite on a textured background with
/// per-frame ground-truth boxes and degradation flags. Pixel values and box
/// coordinates are exact in f32 so dataset files round-trip bit for bit.
struct Clip {
    Tensor frames;  // [T x 3 x H x W], values in [0, 1]
    std::vector<AnnotatedBox> track;
    std::vector<std::uint8_t> degraded;
    std::uint32_t class_label = 0;
    std::uint64_t seed = 0;

    std::size_t length() const { return frames.extent(0); }
    std::size_t height() const { return frames.extent(2); }
    std::size_t width() const { return frames.extent(3); }
    Tensor frame(std::size_t t) const;  // [3 x H x W]
};

/// Deterministic clip generation: everything is a pure function of
/// (seed, dims, num_classes, spec).
Clip gen_clip(std::uint64_t seed, std::size_t frames, std::size_t height, std::size_t width,
              std::size_t num_classes, const DegradationSpec& spec);

/// Normalized 1-D line kernel of the given length/angle, rasterized with a
/// symmetric bilinear splat; symmetric (edge-repeating) padding. Mean pixel
/// value is preserved and constant frames pass through unchanged.
Tensor apply_motion_blur(const Tensor& frame, double len, double angle);

struct OccluderRect {
    std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Pastes a gray rectangle of about fraction * box area at an rng-chosen
/// position inside the box. Returns the pasted rect (clipped to the frame).
OccluderRect apply_occlusion(Tensor& frame, const AnnotatedBox& box, double fraction, Rng& rng);

double box_iou(const AnnotatedBox& a, const AnnotatedBox& b);

enum class SpeedCategory { Slow, Medium, Fast };

struct MotionIoU {
    double miou = 0.0;
    SpeedCategory category = SpeedCategory::Slow;
};

/// Mean IoU between each box and the boxes +-window frames away (offsets
/// clipped to the track). Tracks shorter than window+1 use the largest
/// available offset. Thresholds: > 0.9 slow, [0.7, 0.9] medium, < 0.7 fast.
MotionIoU motion_iou_category(const std::vector<AnnotatedBox>& track, std::size_t window = 10);

const char* speed_name(SpeedCategory c);

// Dataset file: magic "STPV", version u32, clip count u32; per clip seed u64,
// T/H/W u32, class u32, frames f32, per-frame box records (4 x f32, class
// u32, track u32), then T degradation-flag bytes. Little-endian throughout.
void write_dataset(const std::string& path, const std::vector<Clip>& clips);
std::vector<Clip> read_dataset(const std::string& path);

}  // namespace stpn
