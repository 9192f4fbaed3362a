#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "pverify/model.hpp"
#include "pverify/retrieval.hpp"
#include "pverify/training.hpp"

using namespace pverify;

namespace {

std::vector<std::string> word_pool() {
    return {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",
            "hotel", "india", "juliet", "kilo", "lima", "mike", "november",
            "oscar", "papa", "quebec", "romeo", "sierra", "tango"};
}

std::string sentence(std::mt19937& rng, int words) {
    auto pool = word_pool();
    std::ostringstream out;
    for (int i = 0; i < words; ++i) out << (i ? " " : "") << pool[rng() % pool.size()];
    return out.str();
}

Corpus synthetic_corpus(int n_docs) {
    std::mt19937 rng(7);
    Corpus c;
    for (int i = 0; i < n_docs; ++i) {
        AbstractDoc d;
        d.doc_id = i;
        d.title = sentence(rng, 5);
        for (int s = 0; s < 8; ++s) d.sentences.push_back(sentence(rng, 12));
        c.add(std::move(d));
    }
    return c;
}

JointModel bench_model(StanceHeadKind head) {
    std::mt19937 rng(9);
    std::vector<std::string> texts{"@"};
    for (int i = 0; i < 50; ++i) texts.push_back(sentence(rng, 12));
    Tokenizer tok(64);
    tok.fit(texts);
    ModelConfig cfg;
    cfg.encoder.d_model = 32;
    cfg.encoder.n_layers = 2;
    cfg.encoder.n_heads = 4;
    cfg.encoder.d_ff = 64;
    cfg.encoder.max_sequence_length = 256;
    cfg.stance_head = head;
    return JointModel(cfg, std::move(tok), 17);
}

}  // namespace

static void BM_IndexBuild(benchmark::State& state) {
    Corpus corpus = synthetic_corpus(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(RetrievalIndex::build(corpus, RetrievalBackend::TfIdf));
}
BENCHMARK(BM_IndexBuild)->Arg(100)->Arg(1000);

static void BM_Retrieve(benchmark::State& state) {
    Corpus corpus = synthetic_corpus(static_cast<int>(state.range(0)));
    auto index = RetrievalIndex::build(corpus, RetrievalBackend::TfIdf);
    std::mt19937 rng(3);
    std::string query = sentence(rng, 10);
    for (auto _ : state) benchmark::DoNotOptimize(retrieve(index, query, 30));
}
BENCHMARK(BM_Retrieve)->Arg(100)->Arg(1000);

static void BM_Predict(benchmark::State& state) {
    JointModel model =
        bench_model(state.range(0) ? StanceHeadKind::Kgat : StanceHeadKind::Simple);
    std::mt19937 rng(5);
    std::string claim = sentence(rng, 10);
    std::vector<std::string> sentences;
    for (int i = 0; i < 8; ++i) sentences.push_back(sentence(rng, 12));
    for (auto _ : state)
        benchmark::DoNotOptimize(model.predict(1, 1, claim, sentences));
}
BENCHMARK(BM_Predict)->Arg(0)->Arg(1);  // 0 = simple head, 1 = kernel head

static void BM_TrainStep(benchmark::State& state) {
    JointModel model = bench_model(StanceHeadKind::Simple);
    TrainConfig tc;
    Trainer trainer(tc);
    std::mt19937 rng(5);
    ClaimInstance inst;
    inst.claim_text = sentence(rng, 10);
    for (int i = 0; i < 8; ++i) inst.sentences.push_back(sentence(rng, 12));
    inst.rationale_mask.assign(8, 0);
    inst.rationale_mask[2] = 1;
    inst.stance = Stance::Supports;
    for (auto _ : state)
        benchmark::DoNotOptimize(trainer.step(model, inst, SelectionMode::Gold));
}
BENCHMARK(BM_TrainStep);

BENCHMARK_MAIN();
