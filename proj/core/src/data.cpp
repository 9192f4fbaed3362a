#include "pverify/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "pverify/retrieval.hpp"

namespace pverify {

using nlohmann::json;

Stance stance_from_name(const std::string& name) {
    if (name == "SUPPORTS" || name == "SUPPORT") return Stance::Supports;
    if (name == "REFUTES" || name == "CONTRADICT") return Stance::Refutes;
    if (name == "NOINFO" || name == "NOT ENOUGH INFO") return Stance::NoInfo;
    throw ParseError("unknown stance label: " + name);
}

const char* origin_name(InstanceOrigin o) {
    switch (o) {
        case InstanceOrigin::Gold: return "gold";
        case InstanceOrigin::NegativeSample: return "negative_sample";
        case InstanceOrigin::Downsampled: return "downsampled";
    }
    return "?";
}

InstanceOrigin origin_from_name(const std::string& name) {
    if (name == "gold") return InstanceOrigin::Gold;
    if (name == "negative_sample") return InstanceOrigin::NegativeSample;
    if (name == "downsampled") return InstanceOrigin::Downsampled;
    throw ParseError("unknown instance origin: " + name);
}

void Corpus::add(AbstractDoc doc) {
    auto id = doc.doc_id;
    if (!docs_.emplace(id, std::move(doc)).second)
        throw IntegrityError("duplicate doc_id " + std::to_string(id));
}

const AbstractDoc& Corpus::at(int64_t doc_id) const {
    auto it = docs_.find(doc_id);
    if (it == docs_.end())
        throw IntegrityError("doc_id " + std::to_string(doc_id) + " not in corpus");
    return it->second;
}

namespace {

json parse_line(const std::string& line, const std::filesystem::path& path, size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
}

template <typename Fn>
void for_each_jsonl_line(const std::filesystem::path& path, Fn fn) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        fn(parse_line(line, path, line_no), line_no);
    }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
    Corpus corpus;
    for_each_jsonl_line(path, [&](const json& j, size_t line_no) {
        try {
            AbstractDoc doc;
            doc.doc_id = j.at("doc_id").get<int64_t>();
            doc.title = j.at("title").get<std::string>();
            doc.sentences = j.at("abstract").get<std::vector<std::string>>();
            if (doc.sentences.empty())
                throw ParseError("document has no sentences");
            for (const auto& s : doc.sentences)
                if (s.empty()) throw ParseError("empty sentence string");
            corpus.add(std::move(doc));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    });
    return corpus;
}

std::vector<Claim> load_claims(const std::filesystem::path& path) {
    std::vector<Claim> claims;
    for_each_jsonl_line(path, [&](const json& j, size_t line_no) {
        try {
            Claim c;
            c.claim_id = j.at("id").get<int64_t>();
            c.text = j.at("claim").get<std::string>();
            if (j.contains("cited_doc_ids"))
                c.cited_doc_ids = j.at("cited_doc_ids").get<std::vector<int64_t>>();
            if (j.contains("evidence")) {
                for (const auto& [doc_key, sets] : j.at("evidence").items()) {
                    Evidence ev;
                    bool first = true;
                    for (const auto& entry : sets) {
                        Stance label = stance_from_name(entry.at("label").get<std::string>());
                        if (first) {
                            ev.label = label;
                            first = false;
                        } else if (label != ev.label) {
                            throw ParseError("inconsistent labels for doc " + doc_key);
                        }
                        ev.rationale_sets.push_back(entry.at("sentences").get<std::vector<int>>());
                    }
                    if (!first) c.evidence.emplace(std::stoll(doc_key), std::move(ev));
                }
            }
            claims.push_back(std::move(c));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    });
    return claims;
}

namespace {

std::vector<int> union_mask(const Evidence& ev, size_t n_sentences, int64_t claim_id) {
    std::vector<int> mask(n_sentences, 0);
    for (const auto& set : ev.rationale_sets)
        for (int idx : set) {
            if (idx < 0 || static_cast<size_t>(idx) >= n_sentences)
                throw IntegrityError("claim " + std::to_string(claim_id) +
                                     ": rationale index " + std::to_string(idx) +
                                     " out of range");
            mask[idx] = 1;
        }
    return mask;
}

std::vector<ClaimInstance> negatives_for(const Claim& claim, const Corpus& corpus,
                                         const RetrievalIndex& index, int k) {
    std::vector<ClaimInstance> out;
    if (k <= 0) return out;
    // Retrieve enough ranks to skip past the gold docs.
    size_t want = static_cast<size_t>(k) + claim.evidence.size();
    auto ranked = retrieve(index, claim.text, want);
    for (const auto& r : ranked) {
        if (out.size() == static_cast<size_t>(k)) break;
        if (claim.evidence.count(r.doc_id)) continue;
        const AbstractDoc& doc = corpus.at(r.doc_id);
        ClaimInstance inst;
        inst.claim_id = claim.claim_id;
        inst.doc_id = r.doc_id;
        inst.claim_text = claim.text;
        inst.sentences = doc.sentences;
        inst.rationale_mask.assign(doc.sentences.size(), 0);
        inst.stance = Stance::NoInfo;
        inst.origin = InstanceOrigin::NegativeSample;
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace

std::vector<ClaimInstance> build_instances(const std::vector<Claim>& claims,
                                           const Corpus& corpus,
                                           const RetrievalIndex& index,
                                           int k_train) {
    std::vector<ClaimInstance> out;
    for (const Claim& claim : claims) {
        for (const auto& [doc_id, ev] : claim.evidence) {
            if (!corpus.contains(doc_id))
                throw IntegrityError("claim " + std::to_string(claim.claim_id) +
                                     ": evidence doc " + std::to_string(doc_id) +
                                     " not in corpus");
            const AbstractDoc& doc = corpus.at(doc_id);
            ClaimInstance inst;
            inst.claim_id = claim.claim_id;
            inst.doc_id = doc_id;
            inst.claim_text = claim.text;
            inst.sentences = doc.sentences;
            inst.rationale_mask = union_mask(ev, doc.sentences.size(), claim.claim_id);
            inst.stance = ev.label;
            inst.origin = InstanceOrigin::Gold;
            out.push_back(std::move(inst));
        }
        auto negs = negatives_for(claim, corpus, index, k_train);
        out.insert(out.end(), std::make_move_iterator(negs.begin()),
                   std::make_move_iterator(negs.end()));
    }
    return out;
}

std::vector<ClaimInstance> load_fever(const std::filesystem::path& claims_path,
                                      const Corpus& corpus,
                                      const RetrievalIndex& index,
                                      int k_fever) {
    std::vector<Claim> claims = load_claims(claims_path);
    std::vector<ClaimInstance> out;
    for (const Claim& claim : claims) {
        for (const auto& [doc_id, ev] : claim.evidence) {
            const AbstractDoc& doc = corpus.at(doc_id);
            size_t keep = std::min(doc.sentences.size(),
                                   static_cast<size_t>(kFeverMaxSentences));
            ClaimInstance inst;
            inst.claim_id = claim.claim_id;
            inst.doc_id = doc_id;
            inst.claim_text = claim.text;
            inst.sentences.assign(doc.sentences.begin(), doc.sentences.begin() + keep);
            inst.rationale_mask.assign(keep, 0);
            for (const auto& set : ev.rationale_sets)
                for (int idx : set)
                    if (idx >= 0 && static_cast<size_t>(idx) < keep)
                        inst.rationale_mask[idx] = 1;
            inst.stance = ev.label;
            inst.origin = InstanceOrigin::Gold;
            out.push_back(std::move(inst));
        }
        auto negs = negatives_for(claim, corpus, index, k_fever);
        for (auto& n : negs) {
            if (n.sentences.size() > static_cast<size_t>(kFeverMaxSentences)) {
                n.sentences.resize(kFeverMaxSentences);
                n.rationale_mask.resize(kFeverMaxSentences);
            }
            out.push_back(std::move(n));
        }
    }
    return out;
}

ClaimInstance downsample_sentences(const ClaimInstance& inst, double p_drop,
                                   std::mt19937& rng) {
    if (p_drop < 0.0 || p_drop >= 1.0)
        throw ConfigError("p_drop must be in [0, 1)");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> kept;
    for (size_t i = 0; i < inst.sentences.size(); ++i) {
        bool rationale = inst.rationale_mask[i] != 0;
        if (rationale || unif(rng) >= p_drop) kept.push_back(static_cast<int>(i));
    }
    if (kept.empty()) kept.push_back(0);  // keep-one rule
    if (kept.size() == inst.sentences.size()) return inst;

    ClaimInstance out = inst;
    out.sentences.clear();
    out.rationale_mask.clear();
    for (int i : kept) {
        out.sentences.push_back(inst.sentences[i]);
        out.rationale_mask.push_back(inst.rationale_mask[i]);
    }
    out.origin = InstanceOrigin::Downsampled;
    return out;
}

void save_instances(const std::vector<ClaimInstance>& instances,
                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    for (const auto& inst : instances) {
        json j{{"claim_id", inst.claim_id},
               {"doc_id", inst.doc_id},
               {"claim", inst.claim_text},
               {"sentences", inst.sentences},
               {"rationale_mask", inst.rationale_mask},
               {"stance", stance_name(inst.stance)},
               {"origin", origin_name(inst.origin)}};
        out << j.dump() << '\n';
    }
}

std::vector<ClaimInstance> load_instances(const std::filesystem::path& path) {
    std::vector<ClaimInstance> out;
    for_each_jsonl_line(path, [&](const json& j, size_t line_no) {
        try {
            ClaimInstance inst;
            inst.claim_id = j.at("claim_id").get<int64_t>();
            inst.doc_id = j.at("doc_id").get<int64_t>();
            inst.claim_text = j.at("claim").get<std::string>();
            inst.sentences = j.at("sentences").get<std::vector<std::string>>();
            inst.rationale_mask = j.at("rationale_mask").get<std::vector<int>>();
            inst.stance = stance_from_name(j.at("stance").get<std::string>());
            inst.origin = origin_from_name(j.at("origin").get<std::string>());
            if (inst.rationale_mask.size() != inst.sentences.size())
                throw ParseError("mask/sentence length mismatch");
            out.push_back(std::move(inst));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    });
    return out;
}

}  // namespace pverify
