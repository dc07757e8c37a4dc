#include <doctest.h>

#include <algorithm>
#include <random>

#include "f4its/error.hpp"
#include "f4its/reranker.hpp"
#include "test_support.hpp"

using namespace f4its;
using f4its::testing::code_of;

namespace {
EncoderSpec synthetic_spec(std::size_t dim, std::uint64_t seed) {
    EncoderSpec s;
    s.kind = EncoderKind::synthetic;
    s.dim = dim;
    s.seed = seed;
    return s;
}

std::vector<std::string> ids(const RankedList& r) {
    std::vector<std::string> out;
    for (const auto& e : r.entries) out.push_back(e.caption_id);
    return out;
}

CaptionIndex ingredient_index(const std::vector<std::string>& phrases, const TextEncoder& enc) {
    std::vector<Caption> caps;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        caps.push_back({phrases[i], phrases[i], CaptionKind::sparse});
    }
    return build_index(caps, enc);
}
}  // namespace

TEST_CASE("parse_items examples") {
    CHECK(parse_items("chicken, rice, curry leaves").phrases ==
          std::vector<std::string>{"chicken", "rice", "curry leaves"});
    CHECK(parse_items("scallop, cauliflower, greens, herb oil").phrases.size() == 4);
    CHECK(parse_items(" Rice ,, rice, ").phrases == std::vector<std::string>{"rice"});
    CHECK(parse_items("Herb Oil and garlic").phrases == std::vector<std::string>{"herb oil and garlic"});
    CHECK(parse_items("a, b").source_text == "a, b");
    CHECK(code_of([] { parse_items(""); }) == ErrorCode::NoItems);
    CHECK(code_of([] { parse_items(" , ,, "); }) == ErrorCode::NoItems);
}

TEST_CASE("default pool size") {
    CHECK(default_pool_size(1) == 50);
    CHECK(default_pool_size(10) == 50);
    CHECK(default_pool_size(11) == 55);
}

TEST_CASE("rerank examples") {
    const SyntheticEncoder enc(synthetic_spec(128, 3));
    const auto index = ingredient_index({"shrimp", "chicken", "rice", "grilled salmon"}, enc);
    const RankedList initial{{{"chicken", 0.9}, {"rice", 0.8}, {"shrimp", 0.7}, {"grilled salmon", 0.6}}, 4,
                             RankStage::initial};

    SUBCASE("single item equal to a candidate's text wins with score 1") {
        const auto out = rerank(initial, parse_items("grilled salmon"), index, enc);
        CHECK(out.stage == RankStage::reranked);
        CHECK(out.entries[0].caption_id == "grilled salmon");
        CHECK(std::abs(out.entries[0].score - 1.0) <= 1e-6);
    }

    SUBCASE("token overlap decides shrimp vs chicken") {
        const RankedList two{{{"chicken", 0.9}, {"shrimp", 0.5}}, 2, RankStage::initial};
        CHECK(ids(rerank(two, parse_items("shrimp"), index, enc)) == std::vector<std::string>{"shrimp", "chicken"});
    }

    SUBCASE("scores are replaced, blend keeps part of the initial score") {
        const auto out = rerank(initial, parse_items("rice"), index, enc);
        for (const auto& e : out.entries) {
            const auto row = *index.find(e.caption_id);
            const double expected = cosine_similarity(index.embedding(row), enc.encode_one("rice"));
            CHECK(std::abs(e.score - std::clamp(expected, -1.0, 1.0)) <= 1e-9);
        }
        const auto blended = rerank(initial, parse_items("rice"), index, enc, RerankOptions{0.5});
        const auto rice = std::find_if(blended.entries.begin(), blended.entries.end(),
                                       [](const RankedEntry& e) { return e.caption_id == "rice"; });
        CHECK(std::abs(rice->score - (0.5 * 1.0 + 0.5 * 0.8)) <= 1e-6);
    }

    SUBCASE("errors") {
        const RankedList unknown{{{"pizza", 0.5}}, 1, RankStage::initial};
        CHECK(code_of([&] { rerank(unknown, parse_items("rice"), index, enc); }) == ErrorCode::UnknownCandidateId);
        CHECK(code_of([&] { rerank(initial, std::span<const EmbeddingVector>{}, index); }) == ErrorCode::NoItems);
    }
}

TEST_CASE("retrieve_and_rerank lifts ingredients buried at initial ranks 6-9") {
    const auto spec = synthetic_spec(256, 12);
    const SyntheticEncoder enc(spec);
    const std::vector<std::string> words{"tofu", "ramen", "waffle", "pretzel", "nachos",
                                         "scallop", "cauliflower", "greens", "herb oil", "bagel"};
    const auto index = ingredient_index(words, enc);

    // Image pulled hardest towards the distractors, then the four ingredients, in that order.
    const std::vector<double> pull{1.0, 0.95, 0.9, 0.85, 0.8, 0.5, 0.45, 0.4, 0.35, 0.05};
    std::vector<double> image(256, 0.0);
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto v = encode_text_synthetic(words[i], spec);
        for (std::size_t d = 0; d < 256; ++d) image[d] += pull[i] * v[d];
    }
    QueryBundle b{"img", l2_normalize(EmbeddingVector(image)), std::nullopt,
                  "scallop, cauliflower, greens, herb oil", {"scallop", "cauliflower", "greens", "herb oil"},
                  "scallop, cauliflower, greens, herb oil"};

    // Brute-force check of the fixture: the ingredients sit at ranks 6-9 initially.
    const auto initial = search_topk_naive(b.image, index, 10);
    const auto initial_ids = ids(initial);
    std::vector<std::string> buried(initial_ids.begin() + 5, initial_ids.begin() + 9);
    std::sort(buried.begin(), buried.end());
    REQUIRE(buried == std::vector<std::string>{"cauliflower", "greens", "herb oil", "scallop"});

    const auto out = retrieve_and_rerank(b, index, FusionWeights(1.0, 0.0), 10, 4, enc);
    auto top = ids(out);
    std::sort(top.begin(), top.end());
    CHECK(top == std::vector<std::string>{"cauliflower", "greens", "herb oil", "scallop"});
    CHECK(out.entries.size() == 4);
    CHECK(out.k == 4);
    CHECK(out.stage == RankStage::reranked);

    // Full pool: rerank is a permutation of the whole ranking.
    const auto full = retrieve_and_rerank(b, index, FusionWeights::query_default(), 10, 10, enc);
    auto all = ids(full);
    std::sort(all.begin(), all.end());
    auto expected = words;
    std::sort(expected.begin(), expected.end());
    CHECK(all == expected);

    CHECK(code_of([&] { retrieve_and_rerank(b, index, FusionWeights::query_default(), 3, 4, enc); }) ==
          ErrorCode::ConfigConflict);
    QueryBundle no_sparse = b;
    no_sparse.sparse_text.reset();
    CHECK(code_of([&] { retrieve_and_rerank(no_sparse, index, FusionWeights::query_default(), 10, 4, enc); }) ==
          ErrorCode::MissingPredictionText);
}

TEST_CASE("rerank properties on randomized cases") {
    const auto spec = synthetic_spec(32, 5);
    const SyntheticEncoder enc(spec);
    std::vector<std::string> vocab;
    for (int i = 0; i < 40; ++i) vocab.push_back("item" + std::to_string(i));
    const auto index = ingredient_index(vocab, enc);
    std::mt19937_64 rng(99);

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> phrases;
        const std::size_t n_items = 1 + rng() % 4;
        for (std::size_t i = 0; i < n_items; ++i) phrases.push_back(vocab[rng() % vocab.size()]);
        std::string text;
        for (const auto& p : phrases) text += p + ", ";
        const auto items = parse_items(text);

        const auto query = f4its::testing::random_unit(rng, 32);
        const auto initial = search_topk(query, index, 1 + rng() % 20);
        const auto once = rerank(initial, items, index, enc);

        auto a = ids(initial), b = ids(once);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);

        CHECK(ids(rerank(once, items, index, enc)) == ids(once));

        auto shuffled = items;
        std::shuffle(shuffled.phrases.begin(), shuffled.phrases.end(), rng);
        CHECK(rerank(initial, shuffled, index, enc) == once);
    }
}
