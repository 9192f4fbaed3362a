#include <doctest.h>

#include <cmath>
#include <random>

#include "pverify/encoder.hpp"
#include "pverify/params.hpp"

using namespace pverify;

namespace {

Tokenizer small_tokenizer() {
    Tokenizer tok(16);
    tok.fit({"a b c d e f g h", "@"});
    return tok;
}

// Independent forward pass with plain Eigen, no tape. Mirrors the published
// encoder contract: embeddings + positions, per-layer post-LN attention and
// feed-forward blocks.
Eigen::MatrixXd reference_forward(const EncoderConfig& cfg, const ParamStore& store,
                                  const std::vector<int>& token_ids) {
    auto P = [&](const std::string& n) { return store.all().at(n); };
    long len = static_cast<long>(token_ids.size());
    int d = cfg.d_model;
    Eigen::MatrixXd x(len, d);
    for (long i = 0; i < len; ++i)
        x.row(i) = P("encoder.embedding").row(token_ids[i]) +
                   P("encoder.positional").row(i);

    auto softmax_row = [](Eigen::RowVectorXd r) {
        r.array() -= r.maxCoeff();
        Eigen::ArrayXd e = r.transpose().array().exp();
        return Eigen::RowVectorXd((e / e.sum()).matrix().transpose());
    };
    auto layer_norm = [&](const Eigen::MatrixXd& in, const Eigen::MatrixXd& g,
                          const Eigen::MatrixXd& b) {
        Eigen::MatrixXd out = in;
        for (long r = 0; r < in.rows(); ++r) {
            double mean = in.row(r).mean();
            double var = (in.row(r).array() - mean).square().mean();
            out.row(r) = (((in.row(r).array() - mean) / std::sqrt(var + 1e-5)) *
                          g.row(0).array()).matrix() + b.row(0);
        }
        return out;
    };

    int dk = d / cfg.n_heads;
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto L = [&](const char* s) {
            return P("encoder.layer" + std::to_string(l) + "." + s);
        };
        Eigen::MatrixXd q = (x * L("wq")).rowwise() + Eigen::RowVectorXd(L("bq").row(0));
        Eigen::MatrixXd k = (x * L("wk")).rowwise() + Eigen::RowVectorXd(L("bk").row(0));
        Eigen::MatrixXd v = (x * L("wv")).rowwise() + Eigen::RowVectorXd(L("bv").row(0));
        Eigen::MatrixXd heads(len, d);
        for (int h = 0; h < cfg.n_heads; ++h) {
            Eigen::MatrixXd qh = q.middleCols(h * dk, dk);
            Eigen::MatrixXd kh = k.middleCols(h * dk, dk);
            Eigen::MatrixXd vh = v.middleCols(h * dk, dk);
            Eigen::MatrixXd scores = qh * kh.transpose() / std::sqrt(double(dk));
            Eigen::MatrixXd attn(len, len);
            for (long r = 0; r < len; ++r) attn.row(r) = softmax_row(scores.row(r));
            heads.middleCols(h * dk, dk) = attn * vh;
        }
        Eigen::MatrixXd attn_out =
            (heads * L("wo")).rowwise() + Eigen::RowVectorXd(L("bo").row(0));
        x = layer_norm(x + attn_out, L("ln1_g"), L("ln1_b"));
        Eigen::MatrixXd hidden =
            ((x * L("ff_w1")).rowwise() + Eigen::RowVectorXd(L("ff_b1").row(0)))
                .cwiseMax(0.0);
        Eigen::MatrixXd ff =
            (hidden * L("ff_w2")).rowwise() + Eigen::RowVectorXd(L("ff_b2").row(0));
        x = layer_norm(x + ff, L("ln2_g"), L("ln2_b"));
    }
    return x;
}

}  // namespace

TEST_CASE("assemble_sequence layout") {
    Tokenizer tok = small_tokenizer();

    SUBCASE("no dummy: two sentences, two spans, three separators") {
        auto seq = assemble_sequence("a b", {"c", "d e"}, tok, false, 512);
        CHECK(seq.span_map.size() == 3);  // claim + 2 sentences
        int seps = 0;
        for (int id : seq.token_ids)
            if (id == Tokenizer::kSepId) ++seps;
        CHECK(seps == 3);
        CHECK(seq.token_ids[0] == Tokenizer::kClsId);
        CHECK(!seq.has_dummy);
        CHECK(seq.dropped_sentences == 0);
    }
    SUBCASE("dummy prepended becomes sentence span 1") {
        auto seq = assemble_sequence("a b", {"c", "d e"}, tok, true, 512);
        REQUIRE(seq.span_map.size() == 4);
        // '@' has no word characters, so the dummy span is its [SEP] alone
        auto [ds, de] = seq.span_map[1];
        CHECK(de - ds == 1);
        CHECK(seq.token_ids[ds] == Tokenizer::kSepId);
        CHECK(seq.has_dummy);
    }
    SUBCASE("spans are disjoint, ordered, and cover the sequence") {
        auto seq = assemble_sequence("a b c", {"d", "e f", "g"}, tok, true, 512);
        int prev_end = 0;
        for (auto [s, e] : seq.span_map) {
            CHECK(s == prev_end);
            CHECK(e > s);
            prev_end = e;
        }
        CHECK(prev_end == static_cast<int>(seq.token_ids.size()));
    }
    SUBCASE("truncation drops whole trailing sentences") {
        // CLS + claim(1) + 3x(SEP + 2 tokens) + SEP = 12 tokens untruncated
        auto seq = assemble_sequence("a", {"b c", "d e", "f g"}, tok, false, 9);
        CHECK(seq.dropped_sentences == 1);
        CHECK(seq.span_map.size() == 3);
        CHECK(seq.token_ids.size() <= 9);
        // dropping cannot go below one real sentence
        CHECK_THROWS_AS(assemble_sequence("a b c d e f g h", {"b"}, tok, false, 4),
                        ConfigError);
    }
    SUBCASE("span round-trip reproduces each sentence's token ids") {
        std::mt19937 rng(5);
        std::vector<std::string> words{"a", "b", "c", "d", "e", "f", "g", "h"};
        for (int trial = 0; trial < 100; ++trial) {
            std::uniform_int_distribution<int> n_sents(1, 5), n_words(1, 4), w(0, 7);
            auto make = [&] {
                std::string s;
                int n = n_words(rng);
                for (int i = 0; i < n; ++i) s += (i ? " " : "") + words[w(rng)];
                return s;
            };
            std::string claim = make();
            std::vector<std::string> sents;
            int n = n_sents(rng);
            for (int i = 0; i < n; ++i) sents.push_back(make());
            bool dummy = trial % 2 == 0;
            auto seq = assemble_sequence(claim, sents, tok, dummy, 512);

            // claim span: CLS then the claim's ids
            auto claim_ids = tok.encode(claim);
            auto [cs, ce] = seq.span_map[0];
            REQUIRE(ce - cs == static_cast<int>(claim_ids.size()) + 1);
            for (size_t i = 0; i < claim_ids.size(); ++i)
                CHECK(seq.token_ids[cs + 1 + i] == claim_ids[i]);

            size_t first_real = dummy ? 2 : 1;
            for (size_t si = 0; si + first_real < seq.span_map.size(); ++si) {
                auto ids = tok.encode(sents[si]);
                auto [s, e] = seq.span_map[si + first_real];
                bool last = si + first_real == seq.span_map.size() - 1;
                REQUIRE(e - s == static_cast<int>(ids.size()) + (last ? 2 : 1));
                for (size_t i = 0; i < ids.size(); ++i)
                    CHECK(seq.token_ids[s + 1 + i] == ids[i]);
            }
        }
    }
    SUBCASE("no sentences is rejected") {
        CHECK_THROWS_AS(assemble_sequence("a", {}, tok, false, 512), ConfigError);
    }
}

TEST_CASE("encoder config validation") {
    EncoderConfig cfg;
    cfg.d_model = 10;
    cfg.n_heads = 4;  // 10 % 4 != 0
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("tiny encoder forward") {
    Tokenizer tok = small_tokenizer();
    EncoderConfig cfg;
    cfg.d_model = 8;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    TinyEncoder enc(cfg, tok.vocab_size());
    ParamStore store;
    std::mt19937 rng(21);
    enc.register_params(store, rng);
    auto seq = assemble_sequence("a b", {"c d", "e"}, tok, true, 512);

    SUBCASE("matches an independent plain-matrix reimplementation") {
        ad::Tape tape;
        TapeBinder binder(tape, store);
        Eigen::MatrixXd got = enc.encode(seq, binder).val();
        Eigen::MatrixXd want = reference_forward(cfg, store, seq.token_ids);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("zero-layer configuration is embedding + positional exactly") {
        EncoderConfig zero = cfg;
        zero.n_layers = 0;
        TinyEncoder enc0(zero, tok.vocab_size());
        ParamStore s0;
        std::mt19937 r0(21);
        enc0.register_params(s0, r0);
        ad::Tape tape;
        TapeBinder binder(tape, s0);
        Eigen::MatrixXd got = enc0.encode(seq, binder).val();
        for (size_t i = 0; i < seq.token_ids.size(); ++i) {
            Eigen::RowVectorXd want = s0.all().at("encoder.embedding").row(seq.token_ids[i]) +
                                      s0.all().at("encoder.positional").row(i);
            CHECK((got.row(i) - want).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    SUBCASE("deterministic and finite") {
        ad::Tape t1, t2;
        TapeBinder b1(t1, store), b2(t2, store);
        Eigen::MatrixXd a = enc.encode(seq, b1).val();
        Eigen::MatrixXd b = enc.encode(seq, b2).val();
        CHECK(a == b);
        CHECK(a.allFinite());
        CHECK(a.rows() == static_cast<long>(seq.token_ids.size()));
    }
    SUBCASE("attention rows sum to 1") {
        ad::Tape tape;
        TapeBinder binder(tape, store);
        std::vector<Eigen::MatrixXd> attn;
        enc.encode(seq, binder, &attn);
        CHECK(attn.size() == static_cast<size_t>(cfg.n_layers * cfg.n_heads));
        for (const auto& a : attn)
            for (long r = 0; r < a.rows(); ++r)
                CHECK(a.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("every token attends to every other: permuting one sentence moves the rest") {
        auto seq2 = assemble_sequence("a b", {"e", "c d"}, tok, true, 512);
        ad::Tape t1, t2;
        TapeBinder b1(t1, store), b2(t2, store);
        Eigen::MatrixXd r1 = enc.encode(seq, b1).val();
        Eigen::MatrixXd r2 = enc.encode(seq2, b2).val();
        // claim tokens sit at the same positions in both layouts but their
        // representations differ because the paragraph differs
        auto [cs, ce] = seq.span_map[0];
        CHECK((r1.middleRows(cs, ce - cs) - r2.middleRows(cs, ce - cs))
                  .cwiseAbs()
                  .maxCoeff() > 1e-9);
    }
}

TEST_CASE("gradient_check harness") {
    Tokenizer tok = small_tokenizer();
    EncoderConfig cfg;
    cfg.d_model = 4;
    cfg.n_layers = 0;
    cfg.n_heads = 1;
    cfg.d_ff = 8;
    TinyEncoder enc(cfg, tok.vocab_size());
    ParamStore store;
    std::mt19937 rng(3);
    enc.register_params(store, rng);
    auto seq = assemble_sequence("a", {"b"}, tok, false, 512);

    auto loss = [&](const ParamStore&) {
        ad::Tape t;
        TapeBinder b(t, store);
        return enc.encode(seq, b).val().squaredNorm();
    };
    auto grads = [&](const ParamStore&) {
        ad::Tape t;
        TapeBinder b(t, store);
        t.backward(ad::sum_all(ad::square_(enc.encode(seq, b))));
        return b.grads();
    };

    SUBCASE("correct gradients pass") {
        CHECK(gradient_check(store, {"encoder.embedding"}, loss, grads, 1e-5) < 1e-6);
    }
    SUBCASE("a parameter off the gradient path matches its numeric zero") {
        // positional rows beyond the sequence never contribute; embedding rows
        // of unused tokens neither. Check an entire unused parameter instead:
        ParamStore s2;
        std::mt19937 r2(3);
        enc.register_params(s2, r2);
        s2.create("unused.w", 2, 2);
        auto loss2 = [&](const ParamStore&) {
            ad::Tape t;
            TapeBinder b(t, s2);
            return enc.encode(seq, b).val().squaredNorm();
        };
        auto grads2 = [&](const ParamStore&) {
            ad::Tape t;
            TapeBinder b(t, s2);
            t.backward(ad::sum_all(ad::square_(enc.encode(seq, b))));
            return b.grads();
        };
        CHECK(gradient_check(s2, {"unused.w"}, loss2, grads2, 1e-5) == 0.0);
    }
    SUBCASE("corrupted gradients are caught (negative control)") {
        auto bad_grads = [&](const ParamStore& s) {
            auto g = grads(s);
            g.at("encoder.embedding") *= 1.5;
            return g;
        };
        CHECK(gradient_check(store, {"encoder.embedding"}, loss, bad_grads, 1e-5) > 1e-2);
    }
}
