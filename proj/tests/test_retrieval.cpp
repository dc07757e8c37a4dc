#include <doctest.h>

#include <cmath>
#include <random>

#include "f4its/error.hpp"
#include "f4its/retrieval.hpp"
#include "test_support.hpp"

using namespace f4its;
using f4its::testing::code_of;
using f4its::testing::make_index;
using f4its::testing::random_index;
using f4its::testing::random_unit;

namespace {
SyntheticEncoder synthetic(std::size_t dim, std::uint64_t seed) {
    EncoderSpec s;
    s.kind = EncoderKind::synthetic;
    s.dim = dim;
    s.seed = seed;
    return SyntheticEncoder(s);
}

std::vector<std::string> ids(const RankedList& r) {
    std::vector<std::string> out;
    for (const auto& e : r.entries) out.push_back(e.caption_id);
    return out;
}

QueryBundle bundle_for(EmbeddingVector image, std::optional<std::string> dense = std::nullopt,
                       std::optional<std::string> sparse = std::nullopt) {
    return QueryBundle{"img", std::move(image), std::move(dense), std::move(sparse), {}, std::nullopt};
}
}  // namespace

TEST_CASE("search_topk examples") {
    const auto single = make_index({{"only", {0.3, 0.4}}});
    const auto r = search_topk(EmbeddingVector({1.0, 0.0}), single, 5);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].caption_id == "only");

    const auto abc = make_index({{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}, {"c", {0.6, 0.8}}});
    const auto top2 = search_topk(EmbeddingVector({1.0, 0.0}), abc, 2);
    REQUIRE(top2.entries.size() == 2);
    CHECK(top2.entries[0].caption_id == "a");
    CHECK(std::abs(top2.entries[0].score - 1.0) <= 1e-6);
    CHECK(top2.entries[1].caption_id == "c");
    CHECK(std::abs(top2.entries[1].score - 0.6) <= 1e-6);
    CHECK(top2.stage == RankStage::initial);

    const auto tied = make_index({{"b", {0.5, 0.5}}, {"a", {0.5, 0.5}}});
    CHECK(ids(search_topk(EmbeddingVector({1.0, 0.0}), tied, 2)) == std::vector<std::string>{"a", "b"});
    CHECK(ids(search_topk_naive(EmbeddingVector({1.0, 0.0}), tied, 2)) == std::vector<std::string>{"a", "b"});

    CHECK(code_of([&] { search_topk(EmbeddingVector({1.0, 0.0, 0.0}), abc, 1); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { search_topk_naive(EmbeddingVector({1.0}), abc, 1); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { search_topk(EmbeddingVector({1.0, 0.0}), abc, 0); }) == ErrorCode::InvalidArgument);
    CHECK(search_topk_naive(EmbeddingVector({1.0, 0.0}), abc, 10).entries.size() == 3);
}

TEST_CASE("optimized scan matches the naive oracle for every worker count") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        std::mt19937_64 rng(seed);
        const auto index = random_index(rng, 1000, 32);
        for (int q = 0; q < 5; ++q) {
            const auto query = random_unit(rng, 32);
            for (std::size_t k : {1, 5, 37, 1000, 2000}) {
                const auto naive = search_topk_naive(query, index, k);
                for (unsigned workers : {1u, 2u, 3u, 8u}) {
                    const auto fast = search_topk(query, index, k, SearchOptions{workers});
                    REQUIRE(fast.entries.size() == naive.entries.size());
                    CHECK(fast == naive);
                }
            }
        }
    }
}

TEST_CASE("ranking properties") {
    std::mt19937_64 rng(77);
    const auto index = random_index(rng, 400, 16);
    for (int trial = 0; trial < 20; ++trial) {
        const auto query = random_unit(rng, 16);
        // Scale invariance of the id sequence.
        std::vector<double> scaled(query.values().begin(), query.values().end());
        for (auto& x : scaled) x *= 3.5;
        CHECK(ids(search_topk(EmbeddingVector(scaled), index, 20)) == ids(search_topk(query, index, 20)));
        // Top-k is a prefix of top-(k+1).
        for (std::size_t k = 1; k < 15; ++k) {
            auto a = ids(search_topk(query, index, k));
            auto b = ids(search_topk(query, index, k + 1));
            b.pop_back();
            CHECK(a == b);
        }
        // Sorted descending, scores in [-1, 1].
        const auto all = search_topk(query, index, 400);
        for (std::size_t i = 0; i < all.entries.size(); ++i) {
            CHECK(all.entries[i].score <= 1.0);
            CHECK(all.entries[i].score >= -1.0);
            if (i > 0) CHECK(all.entries[i - 1].score >= all.entries[i].score);
        }
    }
}

TEST_CASE("search_top1_fused") {
    const auto enc = synthetic(64, 4);
    std::mt19937_64 rng(8);
    const auto index = build_index({{"c1", "grilled chicken with rice", CaptionKind::dense},
                                    {"c2", "beef stew with potatoes", CaptionKind::dense},
                                    {"c3", "shrimp curry with naan", CaptionKind::dense}},
                                   enc);
    const auto image = random_unit(rng, 64);
    const auto b = bundle_for(image, "shrimp curry");

    const auto pure = search_topk(image, index, 1);
    const auto fused_image_only = search_top1_fused(b, index, FusionWeights(1.0, 0.0), TextSource::dense, enc);
    CHECK(fused_image_only == pure);

    // No text needed when its weight is zero.
    CHECK_NOTHROW(search_top1_fused(bundle_for(image), index, FusionWeights(1.0, 0.0), TextSource::dense, enc));
    CHECK(code_of([&] {
              search_top1_fused(bundle_for(image), index, FusionWeights::query_default(), TextSource::dense, enc);
          }) == ErrorCode::MissingPredictionText);
    CHECK(code_of([&] {
              search_top1_fused(b, index, FusionWeights::query_default(), TextSource::sparse, enc);
          }) == ErrorCode::MissingPredictionText);
}

TEST_CASE("fused retrieval recovers the ground truth that the image alone misses") {
    const auto enc = synthetic(128, 21);
    std::vector<Caption> captions{
        {"gt", "plate of tandoori chicken with mint chutney and naan", CaptionKind::dense},
        {"d1", "bowl of ramen with pork and egg", CaptionKind::dense},
        {"d2", "slice of pepperoni pizza with basil", CaptionKind::dense},
        {"d3", "green salad with feta and olives", CaptionKind::dense},
        {"d4", "pancakes with maple syrup and berries", CaptionKind::dense},
    };
    const auto index = build_index(captions, enc);
    EncoderSpec spec;
    spec.kind = EncoderKind::synthetic;
    spec.dim = 128;
    spec.seed = 21;

    // Search noise seeds for an image whose baseline misses the GT.
    std::optional<EmbeddingVector> image;
    for (std::uint64_t s = 0; s < 500 && !image; ++s) {
        auto candidate = encode_image_synthetic(captions[0].text, 0.5, spec, s);
        if (search_topk_naive(candidate, index, 1).entries[0].caption_id != "gt") {
            image = candidate;
        }
    }
    REQUIRE(image.has_value());
    const auto b = bundle_for(*image, "tandoori chicken, mint chutney, naan");
    const auto baseline = search_topk_naive(*image, index, 5);
    const auto fused = search_fused(b, index, FusionWeights::query_default(), TextSource::dense, enc, 5);
    auto rank_of = [](const RankedList& r) {
        for (std::size_t i = 0; i < r.entries.size(); ++i)
            if (r.entries[i].caption_id == "gt") return i + 1;
        return r.entries.size() + 1;
    };
    CHECK(rank_of(fused) == 1);
    CHECK(rank_of(fused) < rank_of(baseline));
}

TEST_CASE("search_bidirectional") {
    const auto enc = synthetic(32, 1);
    std::mt19937_64 rng(4);
    const auto index = random_index(rng, 200, 32);
    // Synthetic text embeddings live in the same space, so fused queries are well defined.
    const auto b = bundle_for(random_unit(rng, 32), "chicken rice");

    SUBCASE("index weight (0,1) reproduces uni-directional scores") {
        const auto uni = search_fused(b, index, FusionWeights::query_default(), TextSource::dense, enc, 200);
        const auto bi = search_bidirectional(b, index, FusionWeights::query_default(), FusionWeights(0.0, 1.0),
                                             TextSource::dense, enc, 200);
        REQUIRE(uni.entries.size() == bi.entries.size());
        for (std::size_t i = 0; i < uni.entries.size(); ++i) {
            CHECK(uni.entries[i].caption_id == bi.entries[i].caption_id);
            CHECK(std::abs(uni.entries[i].score - bi.entries[i].score) <= 1e-6);
        }
    }

    SUBCASE("index weight (1,0) collapses every candidate onto the image") {
        const auto bi = search_bidirectional(b, index, FusionWeights(1.0, 0.0), FusionWeights(1.0, 0.0),
                                             TextSource::dense, enc, 200);
        auto sorted_ids = ids(bi);
        auto expected = sorted_ids;
        std::sort(expected.begin(), expected.end());
        CHECK(sorted_ids == expected);
        for (const auto& e : bi.entries) CHECK(std::abs(e.score - 1.0) <= 1e-6);

        const auto fused_q = search_bidirectional(b, index, FusionWeights::query_default(), FusionWeights(1.0, 0.0),
                                                  TextSource::dense, enc, 200);
        CHECK(ids(fused_q) == expected);
    }

    SUBCASE("index is never mutated") {
        const std::vector<float> before(index.matrix().begin(), index.matrix().end());
        search_bidirectional(b, index, FusionWeights::query_default(), FusionWeights::index_default(),
                             TextSource::dense, enc, 10);
        CHECK(std::equal(before.begin(), before.end(), index.matrix().begin()));
    }
}

TEST_CASE("search_bidirectional against a hand-computed 2-d fixture") {
    // Image e = [1,0]; query weights (1,0) so the query is e itself.
    // Candidate c fused with index weights (0.3, 0.7): f = 0.3 e + 0.7 c, score = cos(e, f).
    const auto index = make_index({{"a", {0.0, 1.0}}, {"b", {0.6, 0.8}}, {"c", {-0.6, 0.8}}});
    const auto enc = synthetic(8, 0);  // unused: text weight is zero on the query side
    const auto b = bundle_for(EmbeddingVector({1.0, 0.0}, true));

    auto oracle = [](double cx, double cy) {
        const double fx = 0.3 * 1.0 + 0.7 * cx;
        const double fy = 0.3 * 0.0 + 0.7 * cy;
        return fx / std::sqrt(fx * fx + fy * fy);
    };
    const auto r = search_bidirectional(b, index, FusionWeights(1.0, 0.0), FusionWeights::index_default(),
                                        TextSource::dense, enc, 3);
    REQUIRE(ids(r) == std::vector<std::string>{"b", "a", "c"});
    CHECK(std::abs(r.entries[0].score - oracle(0.6, 0.8)) <= 1e-6);
    CHECK(std::abs(r.entries[1].score - oracle(0.0, 1.0)) <= 1e-6);
    CHECK(std::abs(r.entries[2].score - oracle(-0.6, 0.8)) <= 1e-6);
    CHECK(std::abs(r.entries[0].score - 0.789352) <= 1e-5);
}
