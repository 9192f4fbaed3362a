#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <algorithm>
#include <random>

#include "pverify/data.hpp"
#include "pverify/retrieval.hpp"

using namespace pverify;
namespace fs = std::filesystem;

namespace {

fs::path write_tmp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << content;
    return p;
}

// Small corpus with distinctive vocabulary so retrieval ranks are forced.
Corpus fixture_corpus() {
    Corpus c;
    c.add({1, "zebra stripes", {"zebra stripes pattern camouflage", "zebra herd plains"}});
    c.add({2, "zebra diet", {"zebra grass diet", "grazing behavior"}});
    c.add({3, "zebra predators", {"zebra lion predator", "escape speed"}});
    c.add({4, "unrelated astronomy", {"telescope star nebula", "galaxy cluster"}});
    c.add({5, "unrelated cooking", {"pasta sauce recipe", "olive oil garlic"}});
    return c;
}

}  // namespace

TEST_CASE("load_corpus basics") {
    SUBCASE("two-line fixture") {
        auto p = write_tmp("corpus_two.jsonl",
                           R"({"doc_id": 1, "title": "t1", "abstract": ["a", "b"]})"
                           "\n"
                           R"({"doc_id": 2, "title": "t2", "abstract": ["c"], "extra": 7})"
                           "\n");
        Corpus c = load_corpus(p);
        CHECK(c.size() == 2);
        CHECK(c.at(1).sentences.size() == 2);
        CHECK(c.at(2).sentences[0] == "c");
        CHECK_THROWS_AS(c.at(3), IntegrityError);
    }
    SUBCASE("empty file gives empty corpus") {
        auto p = write_tmp("corpus_empty.jsonl", "");
        CHECK(load_corpus(p).size() == 0);
    }
    SUBCASE("malformed line names its line number") {
        auto p = write_tmp("corpus_bad.jsonl",
                           R"({"doc_id": 1, "title": "t", "abstract": ["a"]})"
                           "\nnot json\n");
        try {
            load_corpus(p);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }
    SUBCASE("duplicate doc_id rejected") {
        auto p = write_tmp("corpus_dup.jsonl",
                           R"({"doc_id": 1, "title": "t", "abstract": ["a"]})"
                           "\n"
                           R"({"doc_id": 1, "title": "t", "abstract": ["a"]})"
                           "\n");
        CHECK_THROWS_AS(load_corpus(p), IntegrityError);
    }
}

TEST_CASE("load_claims maps labels and tolerates empty evidence") {
    auto p = write_tmp(
        "claims.jsonl",
        R"({"id": 7, "claim": "zebras have stripes", "evidence": {"1": [{"sentences": [0], "label": "SUPPORT"}]}, "cited_doc_ids": [1, 4]})"
        "\n"
        R"({"id": 8, "claim": "zebras eat meat", "evidence": {"3": [{"sentences": [0], "label": "CONTRADICT"}]}, "cited_doc_ids": [3]})"
        "\n"
        R"({"id": 9, "claim": "nothing known", "evidence": {}, "cited_doc_ids": [5]})"
        "\n");
    auto claims = load_claims(p);
    REQUIRE(claims.size() == 3);
    CHECK(claims[0].evidence.at(1).label == Stance::Supports);
    CHECK(claims[1].evidence.at(3).label == Stance::Refutes);
    CHECK(claims[2].evidence.empty());
    CHECK(claims[0].cited_doc_ids == std::vector<int64_t>{1, 4});
}

TEST_CASE("build_instances") {
    Corpus corpus = fixture_corpus();
    auto index = RetrievalIndex::build(corpus, RetrievalBackend::TfIdf);

    Claim claim;
    claim.claim_id = 7;
    claim.text = "zebra stripes pattern camouflage";  // doc 1 is rank 1 for this
    Evidence ev;
    ev.label = Stance::Supports;
    ev.rationale_sets = {{0}, {0, 1}};
    claim.evidence.emplace(1, ev);

    SUBCASE("positives use the union of gold rationale sets") {
        auto instances = build_instances({claim}, corpus, index, 0);
        REQUIRE(instances.size() == 1);
        CHECK(instances[0].rationale_mask == std::vector<int>{1, 1});
        CHECK(instances[0].stance == Stance::Supports);
        CHECK(instances[0].origin == InstanceOrigin::Gold);
    }
    SUBCASE("negatives are the next ranks after the gold doc") {
        auto ranked = retrieve(index, claim.text, 3);
        REQUIRE(ranked[0].doc_id == 1);  // gold is rank 1 by construction
        auto instances = build_instances({claim}, corpus, index, 2);
        REQUIRE(instances.size() == 3);
        CHECK(instances[1].doc_id == ranked[1].doc_id);
        CHECK(instances[2].doc_id == ranked[2].doc_id);
        for (size_t i = 1; i < instances.size(); ++i) {
            CHECK(instances[i].stance == Stance::NoInfo);
            CHECK(instances[i].origin == InstanceOrigin::NegativeSample);
            CHECK(claim.evidence.count(instances[i].doc_id) == 0);
            CHECK(std::count(instances[i].rationale_mask.begin(),
                             instances[i].rationale_mask.end(), 1) == 0);
        }
    }
    SUBCASE("mask length always equals sentence count") {
        for (const auto& inst : build_instances({claim}, corpus, index, 4))
            CHECK(inst.rationale_mask.size() == inst.sentences.size());
    }
    SUBCASE("evidence doc missing from corpus is an integrity error") {
        Claim bad = claim;
        bad.evidence.emplace(99, ev);
        CHECK_THROWS_AS(build_instances({bad}, corpus, index, 0), IntegrityError);
    }
}

TEST_CASE("load_fever") {
    Corpus corpus;
    std::vector<std::string> long_page;
    for (int i = 0; i < 40; ++i) long_page.push_back("page sentence " + std::to_string(i));
    corpus.add({1, "page one", {"fever evidence one", "fever evidence two", "filler"}});
    corpus.add({2, "page two", long_page});
    corpus.add({3, "page three", {"unrelated content here"}});
    auto index = RetrievalIndex::build(corpus, RetrievalBackend::TfIdf);

    auto p = write_tmp(
        "fever.jsonl",
        R"({"id": 1, "claim": "fever claim", "evidence": {"1": [{"sentences": [0, 1], "label": "SUPPORTS"}]}, "cited_doc_ids": []})"
        "\n"
        R"({"id": 2, "claim": "unknown claim", "evidence": {"3": [{"sentences": [], "label": "NOT ENOUGH INFO"}]}, "cited_doc_ids": []})"
        "\n"
        R"({"id": 3, "claim": "page sentence 5", "evidence": {"2": [{"sentences": [5], "label": "REFUTES"}]}, "cited_doc_ids": []})"
        "\n");
    auto instances = load_fever(p, corpus, index, 1);

    // claim 1: SUPPORTS with mask popcount 2, plus one retrieved negative
    REQUIRE(instances.size() >= 2);
    CHECK(instances[0].stance == Stance::Supports);
    CHECK(std::count(instances[0].rationale_mask.begin(),
                     instances[0].rationale_mask.end(), 1) == 2);
    CHECK(instances[1].origin == InstanceOrigin::NegativeSample);

    int nei = 0, truncated = 0;
    for (const auto& inst : instances) {
        CHECK(inst.sentences.size() <= static_cast<size_t>(kFeverMaxSentences));
        if (inst.origin == InstanceOrigin::Gold && inst.stance == Stance::NoInfo) {
            ++nei;
            CHECK(std::count(inst.rationale_mask.begin(), inst.rationale_mask.end(), 1) == 0);
        }
        if (inst.doc_id == 2) ++truncated;
    }
    CHECK(nei == 1);
    CHECK(truncated >= 1);  // the 40-sentence page got cut to 30
}

TEST_CASE("downsample_sentences") {
    ClaimInstance inst;
    inst.claim_id = 1;
    inst.doc_id = 1;
    inst.claim_text = "c";
    inst.sentences = {"s0", "s1", "s2", "s3", "s4", "s5"};
    inst.rationale_mask = {0, 1, 0, 0, 1, 0};
    inst.stance = Stance::Supports;
    std::mt19937 rng(11);

    SUBCASE("p_drop 0 is the identity") {
        auto out = downsample_sentences(inst, 0.0, rng);
        CHECK(out.sentences == inst.sentences);
        CHECK(out.rationale_mask == inst.rationale_mask);
        CHECK(out.origin == InstanceOrigin::Gold);
    }
    SUBCASE("all-rationale instance is unchanged at any rate") {
        ClaimInstance all = inst;
        all.rationale_mask = {1, 1, 1, 1, 1, 1};
        for (double p : {0.3, 0.9}) {
            auto out = downsample_sentences(all, p, rng);
            CHECK(out.sentences == all.sentences);
        }
    }
    SUBCASE("rationales always survive; survival frequency matches p_drop") {
        int survived[6] = {0};
        for (int seed = 0; seed < 10000; ++seed) {
            std::mt19937 r(seed);
            auto out = downsample_sentences(inst, 0.5, r);
            CHECK(std::count(out.rationale_mask.begin(), out.rationale_mask.end(), 1) == 2);
            // the surviving rationale strings are exactly s1 and s4
            std::vector<std::string> rats;
            for (size_t i = 0; i < out.sentences.size(); ++i)
                if (out.rationale_mask[i]) rats.push_back(out.sentences[i]);
            CHECK(rats == std::vector<std::string>{"s1", "s4"});
            for (const auto& s : out.sentences)
                ++survived[s[1] - '0'];
        }
        for (int i : {0, 2, 3, 5}) {
            double freq = survived[i] / 10000.0;
            CHECK(freq == doctest::Approx(0.5).epsilon(0.04));  // +-0.02 absolute
        }
        CHECK(survived[1] == 10000);
        CHECK(survived[4] == 10000);
    }
    SUBCASE("invalid p_drop rejected") {
        CHECK_THROWS_AS(downsample_sentences(inst, 1.0, rng), ConfigError);
        CHECK_THROWS_AS(downsample_sentences(inst, -0.1, rng), ConfigError);
    }
}

TEST_CASE("instance cache round-trip is structurally exact") {
    Corpus corpus = fixture_corpus();
    auto index = RetrievalIndex::build(corpus, RetrievalBackend::TfIdf);
    Claim claim;
    claim.claim_id = 7;
    claim.text = "zebra stripes pattern camouflage";
    Evidence ev;
    ev.label = Stance::Refutes;
    ev.rationale_sets = {{1}};
    claim.evidence.emplace(1, ev);
    auto instances = build_instances({claim}, corpus, index, 3);

    fs::path p = fs::temp_directory_path() / "instances_cache.jsonl";
    save_instances(instances, p);
    auto loaded = load_instances(p);
    REQUIRE(loaded.size() == instances.size());
    for (size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].claim_id == instances[i].claim_id);
        CHECK(loaded[i].doc_id == instances[i].doc_id);
        CHECK(loaded[i].claim_text == instances[i].claim_text);
        CHECK(loaded[i].sentences == instances[i].sentences);
        CHECK(loaded[i].rationale_mask == instances[i].rationale_mask);
        CHECK(loaded[i].stance == instances[i].stance);
        CHECK(loaded[i].origin == instances[i].origin);
    }
}
