#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrnn/tensor.h"

namespace qrnn {

inline constexpr std::size_t kContextFrames = 7;
inline constexpr std::size_t kTargetFrames = 3;

struct FrameSequence {
  Tensor<float> frames;  // [T, H, W], intensities in [0, 1]

  std::size_t length() const { return frames.dim(0); }
};

// Ten digit-like 16x16 bitmaps drawn from a 5x7 stroke font.
std::vector<Tensor<float>> builtin_glyphs();

// Bilinear resampling of a [h, w] image to [size, size].
Tensor<float> resize_glyph(const Tensor<float>& glyph, std::size_t size);

// Top-left corner and integer velocity of one glyph on the canvas.
struct GlyphTrack {
  int y = 0, x = 0;
  int vy = 0, vx = 0;

  // Moves by the velocity and reflects off the walls so the glyph stays
  // within [0, max_y] x [0, max_x].
  void advance(int max_y, int max_x);
};

struct MovingFramesConfig {
  std::size_t sequences = 1;
  std::size_t frames = 15;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t glyphs_per_sequence = 2;
  std::size_t glyph_size = 16;
  int max_speed = 3;
  std::uint64_t seed = 0;
};

// Glyphs default to builtin_glyphs(); pass [h, w] images (for example
// crops from load_idx) to use real digits. Frames composite by per-pixel max.
std::vector<FrameSequence> gen_moving_frames(const MovingFramesConfig& cfg,
                                             const std::vector<Tensor<float>>& glyphs = {});

// Renders one frame sequence from explicit tracks.
FrameSequence render_tracks(const std::vector<Tensor<float>>& glyphs,
                            std::vector<GlyphTrack> tracks, std::size_t frames,
                            std::size_t height, std::size_t width);

struct FrameSplit {
  Tensor<float> context;  // frames 1-7
  Tensor<float> targets;  // frames 8-10
};

FrameSplit split_train_predict(const FrameSequence& seq);

// Binary PGM (P5, maxval 255) of one [H, W] frame.
void write_pgm(const std::string& path, const Tensor<float>& frame);

}  // namespace qrnn
