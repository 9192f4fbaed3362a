#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pverify/pipeline.hpp"

using namespace pverify;
namespace fs = std::filesystem;

namespace {

Corpus pipeline_corpus() {
    Corpus c;
    c.add({1, "zebra stripes", {"zebra stripes pattern", "zebra herd plains"}});
    c.add({2, "zebra diet", {"zebra grass diet", "grazing behavior"}});
    c.add({3, "astronomy", {"telescope star nebula"}});
    c.add({4, "cooking", {"pasta sauce recipe", "olive oil"}});
    return c;
}

JointModel pipeline_model() {
    std::vector<std::string> texts{"@"};
    Corpus corpus = pipeline_corpus();
    for (const auto& [_, doc] : corpus.docs()) {
        texts.push_back(doc.title);
        for (const auto& s : doc.sentences) texts.push_back(s);
    }
    Tokenizer tok(8);
    tok.fit(texts);
    ModelConfig cfg;
    cfg.encoder.d_model = 16;
    cfg.encoder.n_layers = 1;
    cfg.encoder.n_heads = 2;
    cfg.encoder.d_ff = 32;
    cfg.encoder.max_sequence_length = 64;
    return JointModel(cfg, tok, 5);
}

Claim claim_with_evidence() {
    Claim c;
    c.claim_id = 1;
    c.text = "zebra stripes pattern";
    Evidence ev;
    ev.label = Stance::Supports;
    ev.rationale_sets = {{0}};
    c.evidence.emplace(1, ev);
    Evidence ev2;
    ev2.label = Stance::Refutes;
    ev2.rationale_sets = {{0}};
    c.evidence.emplace(2, ev2);
    c.cited_doc_ids = {3, 99};  // 99 is not in the corpus
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("oracle task evaluates evidence and cited docs only") {
    Corpus corpus = pipeline_corpus();
    JointModel model = pipeline_model();
    Claim c1 = claim_with_evidence();
    Claim c2;
    c2.claim_id = 2;
    c2.text = "nothing cited";  // no candidates at all

    PipelineConfig cfg;
    cfg.task = PipelineTask::Oracle;
    std::vector<ModelOutput> outputs;
    auto preds = run_pipeline(cfg, model, nullptr, {c1, c2}, corpus, &outputs);

    REQUIRE(preds.size() == 3);  // docs 1, 2 (evidence) + 3 (cited); 99 skipped
    std::vector<int64_t> docs;
    for (const auto& p : preds) {
        CHECK(p.claim_id == 1);
        docs.push_back(p.doc_id);
    }
    std::sort(docs.begin(), docs.end());
    CHECK(docs == std::vector<int64_t>{1, 2, 3});
    CHECK(outputs.size() == preds.size());
}

TEST_CASE("open task scores k retrieved docs per claim") {
    Corpus corpus = pipeline_corpus();
    JointModel model = pipeline_model();
    auto index = RetrievalIndex::build(corpus, RetrievalBackend::TfIdf);

    Claim c1 = claim_with_evidence();
    Claim c2;
    c2.claim_id = 2;
    c2.text = "telescope star";

    PipelineConfig cfg;
    cfg.k_retrieval = 2;
    auto preds = run_pipeline(cfg, model, &index, {c1, c2}, corpus);
    CHECK(preds.size() == 4);
    int claim1 = 0, claim2 = 0;
    for (const auto& p : preds) (p.claim_id == 1 ? claim1 : claim2)++;
    CHECK(claim1 == 2);
    CHECK(claim2 == 2);

    SUBCASE("open task without an index is a config error") {
        CHECK_THROWS_AS(run_pipeline(cfg, model, nullptr, {c1}, corpus), ConfigError);
    }
}

TEST_CASE("pipeline output is post-processed") {
    Corpus corpus = pipeline_corpus();
    JointModel model = pipeline_model();
    auto index = RetrievalIndex::build(corpus, RetrievalBackend::TfIdf);
    PipelineConfig cfg;
    cfg.k_retrieval = 4;
    auto preds = run_pipeline(cfg, model, &index, {claim_with_evidence()}, corpus);
    for (const auto& p : preds) {
        if (p.predicted_sentences.empty()) CHECK(p.predicted_label == Stance::NoInfo);
        CHECK(std::is_sorted(p.predicted_sentences.begin(), p.predicted_sentences.end()));
    }
}

TEST_CASE("prediction files") {
    std::vector<Prediction> preds;
    preds.push_back({1, 10, {0, 2}, Stance::Supports});
    preds.push_back({1, 11, {1}, Stance::Refutes});
    preds.push_back({3, 10, {0}, Stance::Supports});
    preds.push_back({3, 12, {}, Stance::NoInfo});  // dropped from the submission

    fs::path p = fs::temp_directory_path() / "preds.jsonl";
    save_predictions(preds, p);

    SUBCASE("rewriting the same predictions is byte-identical") {
        std::string first = slurp(p);
        save_predictions(preds, p);
        CHECK(slurp(p) == first);
        CHECK(first.find("SUPPORT") != std::string::npos);
        CHECK(first.find("CONTRADICT") != std::string::npos);
    }
    SUBCASE("load round-trips everything except NOINFO abstentions") {
        auto loaded = load_predictions(p);
        REQUIRE(loaded.size() == 3);
        std::sort(loaded.begin(), loaded.end(), [](const auto& a, const auto& b) {
            return std::tie(a.claim_id, a.doc_id) < std::tie(b.claim_id, b.doc_id);
        });
        CHECK(loaded[0].claim_id == 1);
        CHECK(loaded[0].doc_id == 10);
        CHECK(loaded[0].predicted_sentences == std::vector<int>{0, 2});
        CHECK(loaded[0].predicted_label == Stance::Supports);
        CHECK(loaded[1].predicted_label == Stance::Refutes);
        CHECK(loaded[2].claim_id == 3);
    }
    SUBCASE("malformed line is a parse error with its line number") {
        fs::path bad = fs::temp_directory_path() / "preds_bad.jsonl";
        std::ofstream(bad) << R"({"id": 1, "evidence": {}})" << "\n{{{\n";
        try {
            load_predictions(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }
}

TEST_CASE("model output dump has one line per pair") {
    Corpus corpus = pipeline_corpus();
    JointModel model = pipeline_model();
    PipelineConfig cfg;
    cfg.task = PipelineTask::Oracle;
    std::vector<ModelOutput> outputs;
    run_pipeline(cfg, model, nullptr, {claim_with_evidence()}, corpus, &outputs);
    fs::path p = fs::temp_directory_path() / "outputs.jsonl";
    save_model_outputs(outputs, p);
    std::string text = slurp(p);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.find("stance_probs") != std::string::npos);
}
