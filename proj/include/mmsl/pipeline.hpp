// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_PIPELINE_HPP
#define MMSL_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsl/errors.hpp"
#include "mmsl/image.hpp"
#include "mmsl/ops.hpp"
#include "mmsl/parallel.hpp"
#include "mmsl/random.hpp"

namespace mmsl {

enum class PatchCountMode : std::uint8_t {
  Fixed,       // always transform exactly n cells
  UniformUpTo, // draw N uniform on {1..n}, transform N cells
};

/// Knobs of the multi-mode transform. Defaults are the ablation optima:
/// global branch 20% of the time, grid branch 30%, 5x5 grid, a third of the
/// cells transformed.
struct MmslConfig {
  double global_prob = 0.2;  // p_g
  double total_prob = 0.5;   // p_t, cumulative: grid branch fires on [p_g, p_t)
  int rows = 5;
  int cols = 5;
  PatchCountMode patch_mode = PatchCountMode::Fixed;
  int patch_count = 8;  // n
  std::uint64_t seed = 0;

  /// Cell budget for a rows x cols grid at the default one-third ratio.
  static int default_patch_count(int rows, int cols) {
    const long n = std::lround(rows * cols / 3.0);
    const long cells = static_cast<long>(rows) * cols;
    return static_cast<int>(std::clamp(n, 1L, cells));
  }

  void validate() const {
    if (!(global_prob >= 0.0 && global_prob <= 1.0) ||
        !(total_prob >= 0.0 && total_prob <= 1.0) || global_prob > total_prob) {
      throw InvalidConfig("need 0 <= p_g <= p_t <= 1, got p_g=" +
                          std::to_string(global_prob) + " p_t=" +
                          std::to_string(total_prob));
    }
    if (rows <= 0 || cols <= 0) {
      throw InvalidConfig("grid must be positive, got " + std::to_string(rows) +
                          "x" + std::to_string(cols));
    }
    if (patch_count < 1 ||
        static_cast<long>(patch_count) > static_cast<long>(rows) * cols) {
      throw InvalidConfig("patch count " + std::to_string(patch_count) +
                          " outside [1, " + std::to_string(rows * cols) + "]");
    }
  }

  bool operator==(const MmslConfig&) const = default;
};

/// Grid cells selected for local transformation, in draw order.
struct PatchSelection {
  std::vector<Rect> cells;
};

/// A transformed sample: the image, its untouched label, and the ops applied.
template <typename Label>
struct AugmentedSample {
  Image image;
  Label label;
  std::vector<OpLogEntry> log;
};

/// Partitions a width x height canvas into a rows x cols grid, row-major.
/// Boundaries sit at floor(j*width/cols) and floor(i*height/rows), so the
/// cells tile the canvas exactly and trailing cells absorb any remainder.
inline std::vector<Rect> grid_partition(int width, int height, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || rows > height || cols > width) {
    throw DegenerateGrid("grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " does not fit " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  const auto bound = [](int i, int n, int extent) {
    return static_cast<int>(static_cast<long long>(i) * extent / n);
  };
  std::vector<Rect> cells;
  cells.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    const int y0 = bound(r, rows, height);
    const int y1 = bound(r + 1, rows, height);
    for (int c = 0; c < cols; ++c) {
      const int x0 = bound(c, cols, width);
      const int x1 = bound(c + 1, cols, width);
      cells.push_back({x0, y0, x1 - x0, y1 - y0});
    }
  }
  return cells;
}

/// Uniformly selects distinct cells: exactly n of them in Fixed mode, or N
/// drawn uniform on {1..n} first in UniformUpTo mode.
inline PatchSelection rand_patch(const std::vector<Rect>& cells, PatchCountMode mode,
                                 int n, RandomStream& rng) {
  if (n < 1 || static_cast<std::size_t>(n) > cells.size()) {
    throw InvalidCount("cannot select " + std::to_string(n) + " of " +
                       std::to_string(cells.size()) + " cells");
  }
  const int take = mode == PatchCountMode::Fixed
                       ? n
                       : static_cast<int>(rng.next_int(1, n));
  PatchSelection selection;
  selection.cells.reserve(static_cast<std::size_t>(take));
  for (const std::size_t idx :
       rng.sample_indices(cells.size(), static_cast<std::size_t>(take))) {
    selection.cells.push_back(cells[idx]);
  }
  return selection;
}

/// The multi-mode transform. Draws u uniform on [0,1): below p_g one sampled
/// op hits the whole image; between p_g and p_t each selected grid cell gets
/// its own sampled op, cropped, transformed and pasted back; otherwise the
/// image passes through untouched. The label always passes through untouched.
template <typename Label>
AugmentedSample<Label> mmsl_transform(const Image& img, Label label,
                                      const MmslConfig& cfg, RandomStream& rng) {
  cfg.validate();
  if (img.width < cfg.cols || img.height < cfg.rows) {
    throw DegenerateGrid("image " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + " smaller than grid " +
                         std::to_string(cfg.rows) + "x" + std::to_string(cfg.cols));
  }

  AugmentedSample<Label> out{img, std::move(label), {}};
  const double u = rng.next_real();
  if (u < cfg.global_prob) {
    const AugOp op = sample_op(rng);
    out.image = apply_op(img, op);
    out.log.push_back({op, true, full_rect(img)});
  } else if (u < cfg.total_prob) {
    const auto cells = grid_partition(img.width, img.height, cfg.rows, cfg.cols);
    const auto selection = rand_patch(cells, cfg.patch_mode, cfg.patch_count, rng);
    Image work = img;
    for (const Rect& cell : selection.cells) {
      const AugOp op = sample_op(rng);
      work = paste(work, apply_op(crop(work, cell), op), cell);
      out.log.push_back({op, false, cell});
    }
    out.image = std::move(work);
  }
  return out;
}

/// Transforms a whole batch, item i drawing from substream(cfg.seed, i).
/// Output order matches input order and is identical for any thread count.
template <typename Label>
std::vector<AugmentedSample<Label>> transform_batch(
    const std::vector<std::pair<Image, Label>>& batch, const MmslConfig& cfg,
    int threads = 1) {
  cfg.validate();
  std::vector<AugmentedSample<Label>> out(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    RandomStream rng = substream(cfg.seed, i);
    out[i] = mmsl_transform(batch[i].first, batch[i].second, cfg, rng);
  });
  return out;
}

/// Re-applies a recorded op log to `input`; reproduces the logged output
/// bit-exactly.
inline Image replay_log(const Image& input, const std::vector<OpLogEntry>& log) {
  Image out = input;
  for (const OpLogEntry& entry : log) {
    if (entry.global) {
      out = apply_op(out, entry.op);
    } else {
      out = paste(out, apply_op(crop(out, entry.region), entry.op), entry.region);
    }
  }
  return out;
}

inline const char* patch_mode_name(PatchCountMode mode) {
  return mode == PatchCountMode::Fixed ? "fixed" : "uniform_up_to";
}

inline nlohmann::json config_to_json(const MmslConfig& cfg) {
  return nlohmann::json{
      {"p_g", cfg.global_prob},
      {"p_t", cfg.total_prob},
      {"rows", cfg.rows},
      {"cols", cfg.cols},
      {"patch_count",
       nlohmann::json{{"mode", patch_mode_name(cfg.patch_mode)}, {"n", cfg.patch_count}}},
      {"seed", cfg.seed},
  };
}

/// Parses the config schema; unknown keys are rejected. Keys may be omitted,
/// in which case the defaults above apply (an omitted patch count follows the
/// one-third rule for the configured grid).
inline MmslConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  MmslConfig cfg;
  bool explicit_n = false;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "p_g") {
        cfg.global_prob = value.get<double>();
      } else if (key == "p_t") {
        cfg.total_prob = value.get<double>();
      } else if (key == "rows") {
        cfg.rows = value.get<int>();
      } else if (key == "cols") {
        cfg.cols = value.get<int>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "patch_count") {
        if (!value.is_object()) throw InvalidConfig("patch_count must be an object");
        for (const auto& [pk, pv] : value.items()) {
          if (pk == "mode") {
            const auto mode = pv.get<std::string>();
            if (mode == "fixed") {
              cfg.patch_mode = PatchCountMode::Fixed;
            } else if (mode == "uniform_up_to") {
              cfg.patch_mode = PatchCountMode::UniformUpTo;
            } else {
              throw InvalidConfig("unknown patch_count mode: " + mode);
            }
          } else if (pk == "n") {
            cfg.patch_count = pv.get<int>();
            explicit_n = true;
          } else {
            throw InvalidConfig("unknown config key: patch_count." + pk);
          }
        }
      } else {
        throw InvalidConfig("unknown config key: " + key);
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig("bad value for config key '" + key + "': " + e.what());
    }
  }
  if (!explicit_n) {
    cfg.patch_count = MmslConfig::default_patch_count(cfg.rows, cfg.cols);
  }
  cfg.validate();
  return cfg;
}

}  // namespace mmsl

#endif  // MMSL_PIPELINE_HPP
