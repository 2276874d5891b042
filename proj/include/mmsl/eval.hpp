// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_EVAL_HPP
#define MMSL_EVAL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsl/errors.hpp"

namespace mmsl {

/// Feature matrix with per-row identity/camera labels and junk flags.
struct EmbeddingSet {
  std::size_t count = 0;  // N
  std::size_t dim = 0;    // D
  std::vector<float> values;  // row-major, count * dim
  std::vector<std::string> names;
  std::vector<int> pids;
  std::vector<int> camids;
  std::vector<std::uint8_t> junk;

  const float* row(std::size_t i) const { return values.data() + i * dim; }
};

enum class Metric : std::uint8_t { Euclidean, Cosine };

struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

/// CMC curve (cmc[k-1] = rank-(k) rate), mAP, and the per-query APs that the
/// mean was taken over. Queries with no valid match are excluded everywhere.
struct EvalResult {
  std::vector<double> cmc;
  double map = 0.0;
  std::vector<double> per_query_ap;
};

/// Query x gallery distances. Euclidean is the L2 distance; cosine is
/// 1 - u.v/(|u||v|). Smaller means more similar for both.
inline DistanceMatrix pairwise_distances(const EmbeddingSet& query,
                                         const EmbeddingSet& gallery, Metric metric) {
  if (query.dim != gallery.dim) {
    throw DimensionMismatch("query dim " + std::to_string(query.dim) +
                            " vs gallery dim " + std::to_string(gallery.dim));
  }
  const std::size_t d = query.dim;

  std::vector<double> q_norm, g_norm;
  if (metric == Metric::Cosine) {
    const auto norms = [d](const EmbeddingSet& set, const char* which) {
      std::vector<double> out(set.count);
      for (std::size_t i = 0; i < set.count; ++i) {
        const float* v = set.row(i);
        double sum = 0.0;
        for (std::size_t k = 0; k < d; ++k) sum += static_cast<double>(v[k]) * v[k];
        if (sum == 0.0) {
          throw ZeroVector(std::string(which) + " row " + std::to_string(i) +
                           " is a zero vector; cosine undefined");
        }
        out[i] = std::sqrt(sum);
      }
      return out;
    };
    q_norm = norms(query, "query");
    g_norm = norms(gallery, "gallery");
  }

  DistanceMatrix dist{query.count, gallery.count,
                      std::vector<double>(query.count * gallery.count)};
  for (std::size_t qi = 0; qi < query.count; ++qi) {
    const float* q = query.row(qi);
    for (std::size_t gi = 0; gi < gallery.count; ++gi) {
      const float* g = gallery.row(gi);
      if (metric == Metric::Euclidean) {
        double sum = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = static_cast<double>(q[k]) - static_cast<double>(g[k]);
          sum += diff * diff;
        }
        dist.at(qi, gi) = std::sqrt(sum);
      } else {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          dot += static_cast<double>(q[k]) * static_cast<double>(g[k]);
        }
        dist.at(qi, gi) = 1.0 - dot / (q_norm[qi] * g_norm[gi]);
      }
    }
  }
  return dist;
}

/// Identity and camera labels for one side of an evaluation.
struct LabelSet {
  std::vector<int> pids;
  std::vector<int> camids;
  std::vector<std::uint8_t> junk;  // may be empty meaning all-valid
};

inline LabelSet labels_of(const EmbeddingSet& set) {
  return {set.pids, set.camids, set.junk};
}

/// Standard re-ID matching protocol. Per query the gallery is sorted by
/// ascending distance (ties broken by gallery index); entries sharing both
/// pid and camid with the query, and junk entries, are discarded; CMC counts
/// the first correct identity within top k and AP averages precision at every
/// correct position. Queries without any valid match are excluded from both
/// denominators.
inline EvalResult evaluate(const DistanceMatrix& dist, const LabelSet& query,
                           const LabelSet& gallery, int max_rank) {
  if (max_rank < 1) throw ShapeMismatch("max_rank must be >= 1");
  if (query.pids.size() != dist.rows || query.camids.size() != dist.rows ||
      gallery.pids.size() != dist.cols || gallery.camids.size() != dist.cols ||
      (!query.junk.empty() && query.junk.size() != dist.rows) ||
      (!gallery.junk.empty() && gallery.junk.size() != dist.cols)) {
    throw ShapeMismatch("distance matrix is " + std::to_string(dist.rows) + "x" +
                        std::to_string(dist.cols) +
                        " but label lengths do not match");
  }

  EvalResult result;
  result.cmc.assign(static_cast<std::size_t>(max_rank), 0.0);

  std::vector<std::size_t> order(dist.cols);
  for (std::size_t qi = 0; qi < dist.rows; ++qi) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist.at(qi, a);
      const double db = dist.at(qi, b);
      return da < db || (da == db && a < b);
    });

    const int q_pid = query.pids[qi];
    const int q_cam = query.camids[qi];
    long first_match = -1;  // 1-indexed rank in the filtered list
    long rank = 0;
    long relevant_seen = 0;
    double ap_sum = 0.0;
    for (const std::size_t gi : order) {
      if (!gallery.junk.empty() && gallery.junk[gi]) continue;
      if (gallery.pids[gi] == q_pid && gallery.camids[gi] == q_cam) continue;
      ++rank;
      if (gallery.pids[gi] == q_pid) {
        if (first_match < 0) first_match = rank;
        ++relevant_seen;
        ap_sum += static_cast<double>(relevant_seen) / static_cast<double>(rank);
      }
    }
    if (relevant_seen == 0) continue;  // no valid match: excluded entirely

    for (long k = first_match; k <= max_rank; ++k) {
      result.cmc[static_cast<std::size_t>(k - 1)] += 1.0;
    }
    result.per_query_ap.push_back(ap_sum / static_cast<double>(relevant_seen));
  }

  if (result.per_query_ap.empty()) {
    throw NoValidQuery("every query lacks a valid gallery match");
  }
  const auto valid = static_cast<double>(result.per_query_ap.size());
  for (double& v : result.cmc) v /= valid;
  result.map = std::accumulate(result.per_query_ap.begin(),
                               result.per_query_ap.end(), 0.0) /
               valid;
  return result;
}

// ---------------------------------------------------------------------------
// Embedding file formats.
// Vectors: magic "EMB1", u32 N, u32 D (little-endian), then N*D float32
// row-major. Labels: CSV with header `name,pid,camid,junk`, one row per
// vector in file order.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xFF),
      static_cast<unsigned char>((v >> 8) & 0xFF),
      static_cast<unsigned char>((v >> 16) & 0xFF),
      static_cast<unsigned char>((v >> 24) & 0xFF),
  };
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline int parse_int_field(const std::string& field, const std::string& path,
                           std::size_t line_no) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path + ":" + std::to_string(line_no) +
                      ": bad integer field \"" + field + "\"");
  }
}

}  // namespace detail

/// Reads a vector file + labels CSV pair into an EmbeddingSet. Counts must
/// agree and every value must be finite.
inline EmbeddingSet load_embeddings(const std::string& vectors_path,
                                    const std::string& labels_path) {
  std::ifstream vin(vectors_path, std::ios::binary);
  if (!vin) throw IoError(vectors_path + ": cannot open for reading");

  char magic[4] = {};
  vin.read(magic, 4);
  if (!vin || std::memcmp(magic, "EMB1", 4) != 0) {
    throw FormatError(vectors_path + ": missing EMB1 magic");
  }
  EmbeddingSet set;
  set.count = detail::read_u32_le(vin);
  set.dim = detail::read_u32_le(vin);
  if (!vin || set.count == 0 || set.dim == 0) {
    throw FormatError(vectors_path + ": header requires N >= 1 and D >= 1");
  }
  set.values.resize(set.count * set.dim);
  static_assert(sizeof(float) == 4);
  vin.read(reinterpret_cast<char*>(set.values.data()),
           static_cast<std::streamsize>(set.values.size() * sizeof(float)));
  if (!vin || vin.gcount() !=
                  static_cast<std::streamsize>(set.values.size() * sizeof(float))) {
    throw FormatError(vectors_path + ": truncated vector data");
  }
  for (const float v : set.values) {
    if (!std::isfinite(v)) {
      throw FormatError(vectors_path + ": non-finite value in vector data");
    }
  }

  std::ifstream lin(labels_path);
  if (!lin) throw IoError(labels_path + ": cannot open for reading");
  std::string line;
  if (!std::getline(lin, line)) throw FormatError(labels_path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "name,pid,camid,junk") {
    throw FormatError(labels_path + ": expected header name,pid,camid,junk");
  }
  std::size_t line_no = 1;
  while (std::getline(lin, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 4> fields;
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      const std::size_t comma = line.find(',', start);
      if (f < 3) {
        if (comma == std::string::npos) {
          throw FormatError(labels_path + ":" + std::to_string(line_no) +
                            ": expected 4 comma-separated fields");
        }
        fields[static_cast<std::size_t>(f)] = line.substr(start, comma - start);
        start = comma + 1;
      } else {
        if (comma != std::string::npos) {
          throw FormatError(labels_path + ":" + std::to_string(line_no) +
                            ": expected 4 comma-separated fields");
        }
        fields[static_cast<std::size_t>(f)] = line.substr(start);
      }
    }
    set.names.push_back(fields[0]);
    set.pids.push_back(detail::parse_int_field(fields[1], labels_path, line_no));
    set.camids.push_back(detail::parse_int_field(fields[2], labels_path, line_no));
    const int junk = detail::parse_int_field(fields[3], labels_path, line_no);
    if (junk != 0 && junk != 1) {
      throw FormatError(labels_path + ":" + std::to_string(line_no) +
                        ": junk must be 0 or 1");
    }
    set.junk.push_back(static_cast<std::uint8_t>(junk));
  }
  if (set.pids.size() != set.count) {
    throw CountMismatch(labels_path + ": " + std::to_string(set.pids.size()) +
                        " label rows for " + std::to_string(set.count) + " vectors");
  }
  return set;
}

/// Writes the EMB1 vector file + labels CSV pair for an EmbeddingSet.
inline void save_embeddings(const EmbeddingSet& set, const std::string& vectors_path,
                            const std::string& labels_path) {
  if (set.count == 0 || set.dim == 0 || set.values.size() != set.count * set.dim ||
      set.pids.size() != set.count || set.camids.size() != set.count) {
    throw CountMismatch("embedding set fields are inconsistent");
  }
  std::ofstream vout(vectors_path, std::ios::binary);
  if (!vout) throw IoError(vectors_path + ": cannot open for writing");
  vout.write("EMB1", 4);
  detail::write_u32_le(vout, static_cast<std::uint32_t>(set.count));
  detail::write_u32_le(vout, static_cast<std::uint32_t>(set.dim));
  vout.write(reinterpret_cast<const char*>(set.values.data()),
             static_cast<std::streamsize>(set.values.size() * sizeof(float)));
  if (!vout) throw IoError(vectors_path + ": write failed");

  std::ofstream lout(labels_path);
  if (!lout) throw IoError(labels_path + ": cannot open for writing");
  lout << "name,pid,camid,junk\n";
  for (std::size_t i = 0; i < set.count; ++i) {
    const std::string name =
        i < set.names.size() ? set.names[i] : "row" + std::to_string(i);
    const int junk = i < set.junk.size() && set.junk[i] ? 1 : 0;
    lout << name << ',' << set.pids[i] << ',' << set.camids[i] << ',' << junk
         << '\n';
  }
  if (!lout) throw IoError(labels_path + ": write failed");
}

/// Result JSON restricted to the requested ranks, e.g. ranks {1,5,10}.
inline nlohmann::json eval_result_to_json(const EvalResult& result,
                                          const std::vector<int>& ranks) {
  nlohmann::json cmc = nlohmann::json::array();
  for (const int r : ranks) {
    if (r < 1 || static_cast<std::size_t>(r) > result.cmc.size()) {
      throw ShapeMismatch("rank " + std::to_string(r) + " outside computed CMC");
    }
    cmc.push_back(result.cmc[static_cast<std::size_t>(r - 1)]);
  }
  return nlohmann::json{{"cmc", cmc}, {"map", result.map}, {"ranks", ranks}};
}

}  // namespace mmsl

#endif  // MMSL_EVAL_HPP
