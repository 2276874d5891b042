// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "mmsl/eval.hpp"
#include "mmsl/random.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using mmsl::DistanceMatrix;
using mmsl::EmbeddingSet;
using mmsl::EvalResult;
using mmsl::LabelSet;
using mmsl::Metric;

namespace {

EmbeddingSet make_set(std::size_t dim, const std::vector<std::vector<float>>& rows,
                      const std::vector<int>& pids, const std::vector<int>& camids,
                      const std::vector<std::uint8_t>& junk = {}) {
  EmbeddingSet set;
  set.count = rows.size();
  set.dim = dim;
  for (const auto& row : rows) {
    set.values.insert(set.values.end(), row.begin(), row.end());
  }
  set.pids = pids;
  set.camids = camids;
  set.junk = junk;
  for (std::size_t i = 0; i < set.count; ++i) {
    set.names.push_back("row" + std::to_string(i));
  }
  return set;
}

DistanceMatrix matrix_of(const std::vector<std::vector<double>>& rows) {
  DistanceMatrix m;
  m.rows = rows.size();
  m.cols = rows.empty() ? 0 : rows[0].size();
  for (const auto& row : rows) m.values.insert(m.values.end(), row.begin(), row.end());
  return m;
}

}  // namespace

TEST_CASE("pairwise distances match the textbook formulas") {
  const auto q = make_set(2, {{0.f, 0.f}, {1.f, 0.f}}, {1, 2}, {0, 0});
  const auto g = make_set(2, {{3.f, 4.f}, {0.f, 1.f}, {1.f, 0.f}}, {1, 2, 3}, {1, 1, 1});

  SECTION("euclidean") {
    const auto dist = mmsl::pairwise_distances(q, g, Metric::Euclidean);
    CHECK(dist.at(0, 0) == Catch::Approx(5.0));
    CHECK(dist.at(1, 2) == 0.0);
  }
  SECTION("cosine") {
    const auto qc = make_set(2, {{1.f, 0.f}, {2.f, 2.f}}, {1, 2}, {0, 0});
    const auto dist = mmsl::pairwise_distances(qc, g, Metric::Cosine);
    CHECK(dist.at(0, 1) == Catch::Approx(1.0));  // orthogonal
    CHECK(dist.at(0, 2) == Catch::Approx(0.0).margin(1e-12));  // same direction
  }
  SECTION("dimension mismatch") {
    const auto bad = make_set(3, {{1.f, 2.f, 3.f}}, {1}, {0});
    CHECK_THROWS_AS(mmsl::pairwise_distances(q, bad, Metric::Euclidean),
                    mmsl::DimensionMismatch);
  }
  SECTION("zero vector only matters for cosine") {
    CHECK_NOTHROW(mmsl::pairwise_distances(q, g, Metric::Euclidean));
    CHECK_THROWS_AS(mmsl::pairwise_distances(q, g, Metric::Cosine), mmsl::ZeroVector);
  }
}

TEST_CASE("single correct match ranked first scores perfectly") {
  const auto dist = matrix_of({{0.1, 0.2}});
  const LabelSet q{{1}, {0}, {}};
  const LabelSet g{{1, 2}, {1, 1}, {}};
  const EvalResult result = mmsl::evaluate(dist, q, g, 2);
  CHECK(result.cmc[0] == 1.0);
  CHECK(result.cmc[1] == 1.0);
  CHECK(result.map == 1.0);
  REQUIRE(result.per_query_ap.size() == 1);
}

TEST_CASE("hand-computed AP example") {
  // correct matches land at filtered ranks 1 and 3
  const auto dist = matrix_of({{0.1, 0.2, 0.3}});
  const LabelSet q{{1}, {0}, {}};
  const LabelSet g{{1, 2, 1}, {1, 1, 2}, {}};
  const EvalResult result = mmsl::evaluate(dist, q, g, 3);
  CHECK(result.map == Catch::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(result.cmc[0] == 1.0);
}

TEST_CASE("same-pid same-camid gallery entries are discarded") {
  // nearest entry shares pid AND camid with the query, so it must not count
  const auto dist = matrix_of({{0.01, 0.1, 0.05}});
  const LabelSet q{{1}, {0}, {}};
  const LabelSet g{{1, 1, 2}, {0, 1, 1}, {}};
  const EvalResult result = mmsl::evaluate(dist, q, g, 2);
  CHECK(result.cmc[0] == 0.0);  // rank 1 is pid 2 after filtering
  CHECK(result.cmc[1] == 1.0);
  CHECK(result.map == Catch::Approx(0.5));
}

TEST_CASE("junk gallery entries never occupy a rank") {
  const auto dist = matrix_of({{0.05, 0.1}});
  const LabelSet q{{1}, {0}, {}};
  const LabelSet g{{9, 1}, {1, 1}, {1, 0}};  // nearest is junk
  const EvalResult result = mmsl::evaluate(dist, q, g, 1);
  CHECK(result.cmc[0] == 1.0);
  CHECK(result.map == 1.0);
}

TEST_CASE("queries without a valid match are excluded") {
  SECTION("one excluded query among two") {
    const auto dist = matrix_of({{0.1, 0.2}, {0.3, 0.4}});
    const LabelSet q{{1, 5}, {0, 0}, {}};
    const LabelSet g{{1, 2}, {1, 1}, {}};  // pid 5 never appears
    const EvalResult result = mmsl::evaluate(dist, q, g, 1);
    REQUIRE(result.per_query_ap.size() == 1);
    CHECK(result.map == 1.0);
  }
  SECTION("only same-camid matches: query is excluded, single query throws") {
    const auto dist = matrix_of({{0.1}});
    const LabelSet q{{1}, {0}, {}};
    const LabelSet g{{1}, {0}, {}};
    CHECK_THROWS_AS(mmsl::evaluate(dist, q, g, 1), mmsl::NoValidQuery);
  }
}

TEST_CASE("shape mismatches are rejected") {
  const auto dist = matrix_of({{0.1, 0.2}});
  const LabelSet q{{1}, {0}, {}};
  const LabelSet g3{{1, 2, 3}, {1, 1, 1}, {}};
  CHECK_THROWS_AS(mmsl::evaluate(dist, q, g3, 1), mmsl::ShapeMismatch);
  const LabelSet g2{{1, 2}, {1, 1}, {}};
  CHECK_THROWS_AS(mmsl::evaluate(dist, q, g2, 0), mmsl::ShapeMismatch);
}

TEST_CASE("evaluate matches the brute-force oracle on random instances") {
  mmsl::RandomStream rng(20240229);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nq = 1 + rng.next_below(50);
    const std::size_t ng = 5 + rng.next_below(496);
    const int pid_pool = 2 + static_cast<int>(rng.next_below(8));
    const int max_rank = 1 + static_cast<int>(rng.next_below(20));

    std::vector<int> q_pids(nq), q_cams(nq), g_pids(ng), g_cams(ng);
    std::vector<bool> g_junk(ng);
    std::vector<std::uint8_t> g_junk_u8(ng);
    for (std::size_t i = 0; i < nq; ++i) {
      q_pids[i] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(pid_pool)));
      q_cams[i] = static_cast<int>(rng.next_below(4));
    }
    for (std::size_t i = 0; i < ng; ++i) {
      g_pids[i] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(pid_pool)));
      g_cams[i] = static_cast<int>(rng.next_below(4));
      g_junk[i] = rng.next_real() < 0.1;
      g_junk_u8[i] = g_junk[i] ? 1 : 0;
    }
    std::vector<std::vector<double>> dist_rows(nq, std::vector<double>(ng));
    for (auto& row : dist_rows) {
      for (auto& d : row) {
        d = rng.next_real();
        // quantize some distances so exact ties exercise the index tie-break
        if (rng.next_real() < 0.3) d = std::round(d * 8.0) / 8.0;
      }
    }

    const auto naive = oracles::naive_evaluate(dist_rows, q_pids, q_cams, g_pids,
                                               g_cams, g_junk, max_rank);
    const LabelSet q{q_pids, q_cams, {}};
    const LabelSet g{g_pids, g_cams, g_junk_u8};
    if (naive.scored_queries == 0) {
      CHECK_THROWS_AS(mmsl::evaluate(matrix_of(dist_rows), q, g, max_rank),
                      mmsl::NoValidQuery);
      continue;
    }
    const EvalResult result = mmsl::evaluate(matrix_of(dist_rows), q, g, max_rank);
    REQUIRE(result.per_query_ap.size() == naive.scored_queries);
    for (int k = 0; k < max_rank; ++k) {
      REQUIRE(result.cmc[static_cast<std::size_t>(k)] ==
              naive.cmc[static_cast<std::size_t>(k)]);
    }
    REQUIRE(std::abs(result.map - naive.map) <= 1e-9);

    // CMC curves never decrease; per-query AP is 1 only for rank-1 hits
    for (int k = 1; k < max_rank; ++k) {
      REQUIRE(result.cmc[static_cast<std::size_t>(k)] >=
              result.cmc[static_cast<std::size_t>(k - 1)]);
    }
    for (const double ap : result.per_query_ap) {
      REQUIRE(ap > 0.0);
      REQUIRE(ap <= 1.0);
    }
  }
}

TEST_CASE("a single relevant item scores 1/r at filtered rank r") {
  // AP hits 1 exactly when the one relevant entry is ranked first
  for (std::size_t r = 1; r <= 5; ++r) {
    std::vector<double> row(5);
    std::vector<int> pids(5, 2), cams(5, 1);
    for (std::size_t i = 0; i < 5; ++i) row[i] = 0.1 * static_cast<double>(i + 1);
    pids[r - 1] = 1;
    const EvalResult result =
        mmsl::evaluate(matrix_of({row}), LabelSet{{1}, {0}, {}},
                       LabelSet{pids, cams, {}}, 5);
    REQUIRE(result.map == Catch::Approx(1.0 / static_cast<double>(r)));
    if (r == 1) {
      CHECK(result.map == 1.0);
    } else {
      CHECK(result.map < 1.0);
    }
  }
}

TEST_CASE("evaluation depends only on the distance ordering") {
  mmsl::RandomStream rng(555);
  const std::size_t nq = 8, ng = 40;
  std::vector<int> q_pids(nq), q_cams(nq), g_pids(ng), g_cams(ng);
  for (auto& v : q_pids) v = static_cast<int>(rng.next_below(5));
  for (auto& v : q_cams) v = static_cast<int>(rng.next_below(3));
  for (auto& v : g_pids) v = static_cast<int>(rng.next_below(5));
  for (auto& v : g_cams) v = static_cast<int>(rng.next_below(3));
  std::vector<std::vector<double>> dist(nq, std::vector<double>(ng));
  for (auto& row : dist) {
    for (auto& d : row) d = rng.next_real();
  }
  const LabelSet q{q_pids, q_cams, {}};
  const LabelSet g{g_pids, g_cams, {}};
  const EvalResult base = mmsl::evaluate(matrix_of(dist), q, g, 10);

  auto transformed = dist;
  for (auto& row : transformed) {
    for (auto& d : row) d = 3.0 * d * d * d + 0.5;  // strictly increasing on [0,1)
  }
  const EvalResult mapped = mmsl::evaluate(matrix_of(transformed), q, g, 10);
  CHECK(mapped.cmc == base.cmc);
  CHECK(mapped.map == base.map);
  CHECK(mapped.per_query_ap == base.per_query_ap);
}

TEST_CASE("cosine results are invariant to positive scaling") {
  mmsl::RandomStream rng(808);
  const std::size_t dim = 16;
  std::vector<std::vector<float>> q_rows(10), g_rows(60);
  for (auto& row : q_rows) {
    for (std::size_t k = 0; k < dim; ++k) {
      row.push_back(static_cast<float>(rng.next_real() - 0.5) + 0.01f);
    }
  }
  for (auto& row : g_rows) {
    for (std::size_t k = 0; k < dim; ++k) {
      row.push_back(static_cast<float>(rng.next_real() - 0.5) + 0.01f);
    }
  }
  std::vector<int> q_pids(10), q_cams(10), g_pids(60), g_cams(60);
  for (auto& v : q_pids) v = static_cast<int>(rng.next_below(4));
  for (auto& v : q_cams) v = static_cast<int>(rng.next_below(2));
  for (auto& v : g_pids) v = static_cast<int>(rng.next_below(4));
  for (auto& v : g_cams) v = static_cast<int>(rng.next_below(2));

  const auto q = make_set(dim, q_rows, q_pids, q_cams);
  auto g_scaled_rows = g_rows;
  for (auto& row : g_scaled_rows) {
    for (auto& v : row) v *= 4.0f;  // power of two: float-exact scaling
  }
  auto q_scaled_rows = q_rows;
  for (auto& row : q_scaled_rows) {
    for (auto& v : row) v *= 0.25f;
  }

  const auto g = make_set(dim, g_rows, g_pids, g_cams);
  const auto q_scaled = make_set(dim, q_scaled_rows, q_pids, q_cams);
  const auto g_scaled = make_set(dim, g_scaled_rows, g_pids, g_cams);

  const auto base =
      mmsl::evaluate(mmsl::pairwise_distances(q, g, Metric::Cosine), labels_of(q),
                     labels_of(g), 5);
  const auto scaled = mmsl::evaluate(
      mmsl::pairwise_distances(q_scaled, g_scaled, Metric::Cosine), labels_of(q),
      labels_of(g), 5);
  CHECK(base.cmc == scaled.cmc);
  CHECK(base.map == scaled.map);
}

TEST_CASE("embedding files round trip") {
  helpers::TempDir tmp("emb");
  mmsl::RandomStream rng(99);
  EmbeddingSet set;
  set.count = 7;
  set.dim = 5;
  for (std::size_t i = 0; i < set.count * set.dim; ++i) {
    set.values.push_back(static_cast<float>(rng.next_real() * 2.0 - 1.0));
  }
  for (std::size_t i = 0; i < set.count; ++i) {
    set.names.push_back("0003_c" + std::to_string(1 + i % 3) + "_" + std::to_string(i));
    set.pids.push_back(static_cast<int>(i % 3));
    set.camids.push_back(static_cast<int>(1 + i % 3));
    set.junk.push_back(i == 6 ? 1 : 0);
  }
  const auto vec_path = (tmp / "set.emb").string();
  const auto csv_path = (tmp / "set.csv").string();
  mmsl::save_embeddings(set, vec_path, csv_path);

  const EmbeddingSet loaded = mmsl::load_embeddings(vec_path, csv_path);
  CHECK(loaded.count == set.count);
  CHECK(loaded.dim == set.dim);
  CHECK(loaded.values == set.values);
  CHECK(loaded.pids == set.pids);
  CHECK(loaded.camids == set.camids);
  CHECK(loaded.junk == set.junk);
  CHECK(loaded.names == set.names);
}

TEST_CASE("embedding loader rejects malformed inputs") {
  helpers::TempDir tmp("embbad");
  mmsl::RandomStream rng(7);
  EmbeddingSet set;
  set.count = 2;
  set.dim = 3;
  set.values = {1.f, 2.f, 3.f, 4.f, 5.f, 6.f};
  set.pids = {1, 2};
  set.camids = {0, 1};
  const auto vec_path = (tmp / "ok.emb").string();
  const auto csv_path = (tmp / "ok.csv").string();
  mmsl::save_embeddings(set, vec_path, csv_path);

  SECTION("well-formed file loads with N=2 D=3") {
    const auto loaded = mmsl::load_embeddings(vec_path, csv_path);
    CHECK(loaded.count == 2);
    CHECK(loaded.dim == 3);
  }
  SECTION("missing files") {
    CHECK_THROWS_AS(mmsl::load_embeddings((tmp / "no.emb").string(), csv_path),
                    mmsl::IoError);
    CHECK_THROWS_AS(mmsl::load_embeddings(vec_path, (tmp / "no.csv").string()),
                    mmsl::IoError);
  }
  SECTION("bad magic") {
    const auto bad = (tmp / "bad.emb").string();
    std::ofstream(bad, std::ios::binary) << "EMB2junkjunkjunk";
    CHECK_THROWS_AS(mmsl::load_embeddings(bad, csv_path), mmsl::FormatError);
  }
  SECTION("count mismatch against the labels csv") {
    const auto extra = (tmp / "extra.csv").string();
    std::ofstream out(extra);
    out << "name,pid,camid,junk\na,1,0,0\nb,2,1,0\nc,3,1,0\n";
    out.close();
    CHECK_THROWS_AS(mmsl::load_embeddings(vec_path, extra), mmsl::CountMismatch);
  }
  SECTION("NaN vector data") {
    auto bytes = helpers::read_file_bytes(vec_path);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bytes.data() + 12, &nan, sizeof nan);
    const auto nan_path = tmp / "nan.emb";
    std::ofstream(nan_path, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(mmsl::load_embeddings(nan_path.string(), csv_path),
                    mmsl::FormatError);
  }
  SECTION("truncated vector data") {
    auto bytes = helpers::read_file_bytes(vec_path);
    bytes.resize(bytes.size() - 4);
    const auto trunc_path = tmp / "trunc.emb";
    std::ofstream(trunc_path, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(mmsl::load_embeddings(trunc_path.string(), csv_path),
                    mmsl::FormatError);
  }
  SECTION("malformed csv rows") {
    const auto bad_csv = (tmp / "bad.csv").string();
    std::ofstream(bad_csv) << "name,pid,camid,junk\na,1,0\n";
    CHECK_THROWS_AS(mmsl::load_embeddings(vec_path, bad_csv), mmsl::FormatError);
    const auto bad_header = (tmp / "hdr.csv").string();
    std::ofstream(bad_header) << "name,pid,cam\na,1,0\n";
    CHECK_THROWS_AS(mmsl::load_embeddings(vec_path, bad_header), mmsl::FormatError);
  }
}

TEST_CASE("result json reports the requested ranks") {
  EvalResult result;
  result.cmc = {0.5, 0.6, 0.7, 0.8, 0.9};
  result.map = 0.42;
  result.per_query_ap = {0.42};
  const auto j = mmsl::eval_result_to_json(result, {1, 5});
  CHECK(j.at("cmc") == nlohmann::json({0.5, 0.9}));
  CHECK(j.at("map") == 0.42);
  CHECK(j.at("ranks") == nlohmann::json({1, 5}));
  CHECK_THROWS_AS(mmsl::eval_result_to_json(result, {6}), mmsl::ShapeMismatch);
}
