#include "qrnn/frames.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "qrnn/random.h"

namespace qrnn {

namespace {

// 5x7 digit strokes, one row per string, '#' set.
constexpr std::array<std::array<const char*, 7>, 10> kFont = {{
    {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},
    {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},
    {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},
    {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "},
    {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},
    {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},
    {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "},
    {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},
    {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},
    {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "},
}};

}  // namespace

std::vector<Tensor<float>> builtin_glyphs() {
  std::vector<Tensor<float>> out;
  out.reserve(kFont.size());
  for (const auto& rows : kFont) {
    // Each font cell becomes a 2x2 block; the 14x10 digit sits centred in
    // a 16x16 tile.
    Tensor<float> tile({16, 16});
    for (std::size_t r = 0; r < 14; ++r)
      for (std::size_t c = 0; c < 10; ++c)
        if (rows[r / 2][c / 2] == '#') tile.at({r + 1, c + 3}) = 1.0f;
    out.push_back(std::move(tile));
  }
  return out;
}

Tensor<float> resize_glyph(const Tensor<float>& glyph, std::size_t size) {
  if (glyph.rank() != 2) throw ShapeError("glyph must be [h, w], got " + shape_string(glyph.shape()));
  if (size == 0) throw ConfigError("glyph size must be positive");
  const std::size_t h = glyph.dim(0), w = glyph.dim(1);
  Tensor<float> out({size, size});
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) {
      const double sy = size == 1 ? 0.0 : double(r) * double(h - 1) / double(size - 1);
      const double sx = size == 1 ? 0.0 : double(c) * double(w - 1) / double(size - 1);
      const std::size_t y0 = std::size_t(sy), x0 = std::size_t(sx);
      const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double fy = sy - double(y0), fx = sx - double(x0);
      const double top = (1 - fx) * glyph.at({y0, x0}) + fx * glyph.at({y0, x1});
      const double bot = (1 - fx) * glyph.at({y1, x0}) + fx * glyph.at({y1, x1});
      out.at({r, c}) = float(std::clamp((1 - fy) * top + fy * bot, 0.0, 1.0));
    }
  return out;
}

void GlyphTrack::advance(int max_y, int max_x) {
  auto step = [](int& pos, int& vel, int hi) {
    if (hi <= 0) {
      pos = 0;
      return;
    }
    pos += vel;
    // Repeat for speeds larger than the free range.
    while (pos < 0 || pos > hi) {
      if (pos < 0) pos = -pos;
      if (pos > hi) pos = 2 * hi - pos;
      vel = -vel;
    }
  };
  step(y, vy, max_y);
  step(x, vx, max_x);
}

FrameSequence render_tracks(const std::vector<Tensor<float>>& glyphs,
                            std::vector<GlyphTrack> tracks, std::size_t frames,
                            std::size_t height, std::size_t width) {
  if (glyphs.size() != tracks.size()) {
    throw ConfigError("render_tracks needs one glyph per track");
  }
  FrameSequence seq{Tensor<float>({frames, height, width})};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t g = 0; g < glyphs.size(); ++g) {
      const Tensor<float>& img = glyphs[g];
      const GlyphTrack& tr = tracks[g];
      for (std::size_t r = 0; r < img.dim(0); ++r)
        for (std::size_t c = 0; c < img.dim(1); ++c) {
          const std::size_t y = std::size_t(tr.y) + r, x = std::size_t(tr.x) + c;
          if (y >= height || x >= width) continue;
          float& px = seq.frames.at({t, y, x});
          px = std::max(px, img.at({r, c}));
        }
    }
    for (std::size_t g = 0; g < tracks.size(); ++g) {
      tracks[g].advance(int(height - glyphs[g].dim(0)), int(width - glyphs[g].dim(1)));
    }
  }
  return seq;
}

std::vector<FrameSequence> gen_moving_frames(const MovingFramesConfig& cfg,
                                             const std::vector<Tensor<float>>& glyphs) {
  if (cfg.glyph_size > cfg.height || cfg.glyph_size > cfg.width) {
    throw ConfigError("glyph size " + std::to_string(cfg.glyph_size) +
                      " does not fit a " + std::to_string(cfg.height) + "x" +
                      std::to_string(cfg.width) + " canvas");
  }
  if (cfg.frames == 0) throw ConfigError("sequence length must be positive");
  std::vector<Tensor<float>> pool;
  for (const auto& g : glyphs.empty() ? builtin_glyphs() : glyphs) {
    pool.push_back(g.dim(0) == cfg.glyph_size && g.dim(1) == cfg.glyph_size
                       ? g
                       : resize_glyph(g, cfg.glyph_size));
  }
  const int max_y = int(cfg.height - cfg.glyph_size);
  const int max_x = int(cfg.width - cfg.glyph_size);
  Rng rng(cfg.seed);
  std::vector<FrameSequence> out;
  out.reserve(cfg.sequences);
  for (std::size_t n = 0; n < cfg.sequences; ++n) {
    std::vector<Tensor<float>> chosen;
    std::vector<GlyphTrack> tracks;
    for (std::size_t g = 0; g < cfg.glyphs_per_sequence; ++g) {
      chosen.push_back(pool[rng.below(pool.size())]);
      GlyphTrack tr;
      tr.y = int(rng.between(0, max_y));
      tr.x = int(rng.between(0, max_x));
      do {
        tr.vy = int(rng.between(-cfg.max_speed, cfg.max_speed));
        tr.vx = int(rng.between(-cfg.max_speed, cfg.max_speed));
      } while (cfg.max_speed > 0 && tr.vy == 0 && tr.vx == 0);
      tracks.push_back(tr);
    }
    out.push_back(render_tracks(chosen, tracks, cfg.frames, cfg.height, cfg.width));
  }
  return out;
}

FrameSplit split_train_predict(const FrameSequence& seq) {
  const std::size_t T = seq.frames.dim(0);
  if (T < kContextFrames + kTargetFrames) {
    throw DomainError("frame sequence has " + std::to_string(T) + " frames, need at least " +
                      std::to_string(kContextFrames + kTargetFrames));
  }
  const std::size_t H = seq.frames.dim(1), W = seq.frames.dim(2);
  const std::size_t area = H * W;
  FrameSplit s{Tensor<float>({kContextFrames, H, W}), Tensor<float>({kTargetFrames, H, W})};
  const float* src = seq.frames.raw();
  std::copy_n(src, kContextFrames * area, s.context.raw());
  std::copy_n(src + kContextFrames * area, kTargetFrames * area, s.targets.raw());
  return s;
}

void write_pgm(const std::string& path, const Tensor<float>& frame) {
  if (frame.rank() != 2) throw ShapeError("PGM export needs [H, W], got " + shape_string(frame.shape()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << frame.dim(1) << ' ' << frame.dim(0) << "\n255\n";
  for (float v : frame.data()) {
    out.put(char(std::uint8_t(std::lround(std::clamp(double(v), 0.0, 1.0) * 255.0))));
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace qrnn
