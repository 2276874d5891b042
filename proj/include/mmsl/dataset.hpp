// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_DATASET_HPP
#define MMSL_DATASET_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsl/errors.hpp"
#include "mmsl/image.hpp"
#include "mmsl/image_io.hpp"
#include "mmsl/ops.hpp"
#include "mmsl/parallel.hpp"
#include "mmsl/random.hpp"

namespace mmsl {

/// One dataset image with identity and camera labels parsed from its name.
/// pid -1 marks junk entries (kept in the gallery, excluded from training
/// and from scoring); pid 0 distractors are ordinary gallery identities.
struct ReidItem {
  std::filesystem::path path;
  int pid = 0;
  int camid = 0;
  bool junk = false;

  bool operator==(const ReidItem&) const = default;
};

enum class Split : std::uint8_t { Train, Query, Gallery };

inline const char* split_dir_name(Split split) {
  switch (split) {
    case Split::Train: return "bounding_box_train";
    case Split::Query: return "query";
    case Split::Gallery: return "bounding_box_test";
  }
  return "?";
}

/// Images per identity (Q) and identities per batch (M); batch size is Q*M.
/// No defaults on purpose: callers must pick both.
struct BatchSpec {
  int images_per_id = 0;  // Q
  int ids_per_batch = 0;  // M
};

namespace detail {

inline bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

}  // namespace detail

/// Parses the `{pid}_c{camid}...` prefix shared by the Market-1501 and
/// DukeMTMC naming conventions, e.g. "0002_c1s1_000451_03" or
/// "0001_c2_f0046182". pid may be -1.
inline std::pair<int, int> parse_reid_name(const std::string& stem) {
  const auto fail = [&stem]() -> std::pair<int, int> {
    throw MalformedFilename("cannot parse pid/camid from \"" + stem + "\"");
  };
  std::size_t i = 0;
  bool negative = false;
  if (i < stem.size() && stem[i] == '-') {
    negative = true;
    ++i;
  }
  long pid = 0;
  std::size_t pid_digits = 0;
  while (i < stem.size() && std::isdigit(static_cast<unsigned char>(stem[i]))) {
    pid = pid * 10 + (stem[i] - '0');
    ++pid_digits;
    ++i;
  }
  if (pid_digits == 0 || pid_digits > 9) return fail();
  if (i + 1 >= stem.size() || stem[i] != '_' || stem[i + 1] != 'c') return fail();
  i += 2;
  long camid = 0;
  std::size_t cam_digits = 0;
  while (i < stem.size() && std::isdigit(static_cast<unsigned char>(stem[i]))) {
    camid = camid * 10 + (stem[i] - '0');
    ++cam_digits;
    ++i;
  }
  if (cam_digits == 0 || cam_digits > 9) return fail();
  return {negative ? static_cast<int>(-pid) : static_cast<int>(pid),
          static_cast<int>(camid)};
}

/// Lists every .jpg/.jpeg/.png directly inside `dir` as a parsed item,
/// sorted by filename. Junk items (pid -1) are flagged, not dropped.
inline std::vector<ReidItem> scan_dir_items(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError(dir.string() + ": not a readable directory");
  }
  std::vector<ReidItem> items;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !detail::has_image_extension(entry.path())) {
      continue;
    }
    const auto [pid, camid] = parse_reid_name(entry.path().stem().string());
    items.push_back({entry.path(), pid, camid, pid == -1});
  }
  std::sort(items.begin(), items.end(),
            [](const ReidItem& a, const ReidItem& b) { return a.path < b.path; });
  return items;
}

/// Scans one split under a Market-1501/DukeMTMC style root. Junk items are
/// excluded from the training split and retained (flagged) elsewhere.
inline std::vector<ReidItem> scan_dataset(const std::filesystem::path& root,
                                          Split split) {
  std::vector<ReidItem> items = scan_dir_items(root / split_dir_name(split));
  if (split == Split::Train) {
    std::erase_if(items, [](const ReidItem& item) { return item.junk; });
  }
  return items;
}

/// Identity-balanced batch: M distinct pids chosen uniformly, Q images each
/// (without replacement when the identity has at least Q images, with
/// replacement otherwise). Output is grouped by identity in draw order.
inline std::vector<ReidItem> pk_sample(const std::vector<ReidItem>& items,
                                       const BatchSpec& spec, RandomStream& rng) {
  if (spec.images_per_id < 1 || spec.ids_per_batch < 1) {
    throw InvalidCount("batch spec requires Q >= 1 and M >= 1");
  }
  std::map<int, std::vector<std::size_t>> by_pid;
  for (std::size_t i = 0; i < items.size(); ++i) {
    by_pid[items[i].pid].push_back(i);
  }
  if (by_pid.size() < static_cast<std::size_t>(spec.ids_per_batch)) {
    throw InsufficientIdentities("need " + std::to_string(spec.ids_per_batch) +
                                 " identities, dataset has " +
                                 std::to_string(by_pid.size()));
  }
  std::vector<const std::vector<std::size_t>*> groups;
  groups.reserve(by_pid.size());
  for (const auto& [pid, group] : by_pid) groups.push_back(&group);

  std::vector<ReidItem> batch;
  batch.reserve(static_cast<std::size_t>(spec.images_per_id) * spec.ids_per_batch);
  for (const std::size_t gi : rng.sample_indices(
           groups.size(), static_cast<std::size_t>(spec.ids_per_batch))) {
    const auto& group = *groups[gi];
    const auto q = static_cast<std::size_t>(spec.images_per_id);
    if (group.size() >= q) {
      for (const std::size_t k : rng.sample_indices(group.size(), q)) {
        batch.push_back(items[group[k]]);
      }
    } else {
      for (std::size_t n = 0; n < q; ++n) {
        batch.push_back(items[group[static_cast<std::size_t>(
            rng.next_below(group.size()))]]);
      }
    }
  }
  return batch;
}

/// Simulates an extreme-capture gallery: every image gets exactly one
/// uniformly sampled op over its full area and is written as
/// `<original stem>.png` under `out_dir`, so pid/camid metadata survives.
/// Returns the manifest mapping each output file to its applied op.
inline nlohmann::json synth_extreme(const std::vector<ReidItem>& gallery,
                                    const std::filesystem::path& out_dir,
                                    std::uint64_t seed, int threads = 1) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError(out_dir.string() + ": cannot create output directory");
  }

  // outputs are keyed by stem, so colliding stems would silently overwrite
  std::set<std::string> stems;
  for (const ReidItem& item : gallery) {
    if (!stems.insert(item.path.stem().string()).second) {
      throw IoError(item.path.string() + ": duplicate filename stem in gallery");
    }
  }

  std::vector<std::pair<std::string, AugOp>> applied(gallery.size());
  parallel_for(gallery.size(), threads, [&](std::size_t i) {
    RandomStream rng = substream(seed, i);
    const AugOp op = sample_op(rng);
    const Image transformed = apply_op(load_image(gallery[i].path.string()), op);
    const std::string out_name = gallery[i].path.stem().string() + ".png";
    save_image(transformed, (out_dir / out_name).string());
    applied[i] = {out_name, op};
  });

  nlohmann::json manifest = nlohmann::json::object();
  for (const auto& [name, op] : applied) {
    manifest[name] = {{"op", op_name(op.kind)}, {"magnitude", op.magnitude}};
  }
  return manifest;
}

}  // namespace mmsl

#endif  // MMSL_DATASET_HPP
