// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_RUNNER_HPP
#define MMSL_RUNNER_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsl/dataset.hpp"
#include "mmsl/errors.hpp"
#include "mmsl/image.hpp"
#include "mmsl/image_io.hpp"
#include "mmsl/parallel.hpp"
#include "mmsl/pipeline.hpp"

namespace mmsl {

/// Image files directly inside `dir`, sorted by filename.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError(dir.string() + ": not a readable directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && detail::has_image_extension(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline void write_op_log(const std::vector<OpLogEntry>& log,
                         const std::filesystem::path& path) {
  nlohmann::json entries = nlohmann::json::array();
  for (const OpLogEntry& entry : log) entries.push_back(to_json(entry));
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << entries.dump() << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

struct AugmentStats {
  std::size_t images = 0;
  std::size_t failed = 0;
  std::size_t global_branch = 0;
  std::size_t local_branch = 0;
  std::size_t identity_branch = 0;
};

/// Transforms every image in `in_dir` (file i drawing from
/// substream(cfg.seed, i) over the sorted listing) and writes
/// `<stem>.png` + `<stem>.ops.json` into `out_dir`. Unreadable inputs are
/// skipped and reported through `warnings`.
inline AugmentStats augment_directory(const std::filesystem::path& in_dir,
                                      const std::filesystem::path& out_dir,
                                      const MmslConfig& cfg, int threads,
                                      std::vector<std::string>* warnings = nullptr) {
  cfg.validate();
  const std::vector<std::filesystem::path> files = list_images(in_dir);

  // outputs are keyed by stem, so colliding stems would silently overwrite
  std::set<std::string> stems;
  for (const auto& file : files) {
    if (!stems.insert(file.stem().string()).second) {
      throw IoError(file.string() + ": duplicate filename stem in input directory");
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError(out_dir.string() + ": cannot create output directory");
  }

  AugmentStats stats;
  stats.images = files.size();
  std::mutex mutex;
  parallel_for(files.size(), threads, [&](std::size_t i) {
    const std::string stem = files[i].stem().string();
    AugmentedSample<std::string> sample;
    try {
      RandomStream rng = substream(cfg.seed, i);
      sample = mmsl_transform(load_image(files[i].string()), stem, cfg, rng);
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lock(mutex);
      ++stats.failed;
      if (warnings) warnings->push_back(files[i].string() + ": " + e.what());
      return;
    }
    save_image(sample.image, (out_dir / (stem + ".png")).string());
    write_op_log(sample.log, out_dir / (stem + ".ops.json"));

    std::lock_guard<std::mutex> lock(mutex);
    if (sample.log.empty()) {
      ++stats.identity_branch;
    } else if (sample.log.front().global) {
      ++stats.global_branch;
    } else {
      ++stats.local_branch;
    }
  });
  return stats;
}

inline nlohmann::json augment_summary_json(const AugmentStats& stats,
                                           const MmslConfig& cfg) {
  return nlohmann::json{
      {"images", stats.images},
      {"failed", stats.failed},
      {"branches",
       nlohmann::json{{"global", stats.global_branch},
                      {"local", stats.local_branch},
                      {"identity", stats.identity_branch}}},
      {"config", config_to_json(cfg)},
  };
}

// ---------------------------------------------------------------------------
// Preview rendering: an annotated before/after panel for eyeballing one
// transform. Annotations are drawn identically on both halves, so on the
// identity branch the halves stay pixel-equal.
// ---------------------------------------------------------------------------

namespace overlay {

struct Rgb {
  std::uint8_t r, g, b;
};

inline constexpr Rgb kGridLine{255, 255, 0};
inline constexpr Rgb kSelectedCell{255, 0, 0};
inline constexpr Rgb kGlobalFrame{255, 0, 255};
inline constexpr Rgb kGutter{255, 255, 255};

inline void put(Image& img, int x, int y, Rgb c) {
  std::uint8_t* p = img.px(x, y);
  p[0] = c.r;
  p[1] = c.g;
  p[2] = c.b;
}

inline void draw_rect_outline(Image& img, const Rect& r, Rgb c) {
  for (int x = r.x; x < r.x + r.w; ++x) {
    put(img, x, r.y, c);
    put(img, x, r.y + r.h - 1, c);
  }
  for (int y = r.y; y < r.y + r.h; ++y) {
    put(img, r.x, y, c);
    put(img, r.x + r.w - 1, y, c);
  }
}

inline void draw_grid_lines(Image& img, int rows, int cols, Rgb c) {
  for (int j = 1; j < cols; ++j) {
    const int x = static_cast<int>(static_cast<long long>(j) * img.width / cols);
    for (int y = 0; y < img.height; ++y) put(img, x, y, c);
  }
  for (int i = 1; i < rows; ++i) {
    const int y = static_cast<int>(static_cast<long long>(i) * img.height / rows);
    for (int x = 0; x < img.width; ++x) put(img, x, y, c);
  }
}

}  // namespace overlay

/// Before/after panel: input and output side by side, grid lines always
/// drawn, selected cells outlined on the grid branch, a frame on the global
/// branch, and a white gutter in between.
inline Image render_preview_panel(const Image& input, const Image& output,
                                  const std::vector<OpLogEntry>& log,
                                  const MmslConfig& cfg) {
  constexpr int kGutterWidth = 4;

  const auto annotate = [&](Image img) {
    overlay::draw_grid_lines(img, cfg.rows, cfg.cols, overlay::kGridLine);
    for (const OpLogEntry& entry : log) {
      if (!entry.global) {
        overlay::draw_rect_outline(img, entry.region, overlay::kSelectedCell);
      }
    }
    if (!log.empty() && log.front().global) {
      overlay::draw_rect_outline(img, full_rect(img), overlay::kGlobalFrame);
      overlay::draw_rect_outline(
          img, Rect{1, 1, img.width - 2, img.height - 2}, overlay::kGlobalFrame);
    }
    return img;
  };

  const Image left = annotate(input);
  const Image right = annotate(output);

  Image panel(input.width * 2 + kGutterWidth, input.height);
  for (int y = 0; y < panel.height; ++y) {
    for (int x = 0; x < kGutterWidth; ++x) {
      overlay::put(panel, input.width + x, y, overlay::kGutter);
    }
  }
  panel = paste(panel, left, Rect{0, 0, left.width, left.height});
  panel = paste(panel, right,
                Rect{left.width + kGutterWidth, 0, right.width, right.height});
  return panel;
}

}  // namespace mmsl

#endif  // MMSL_RUNNER_HPP
