#include "pverify/tokenizer.hpp"

#include <fstream>

#include <json.hpp>

#include "pverify/retrieval.hpp"  // tokenize_words

namespace pverify {

using nlohmann::json;

namespace {
uint64_t fnv1a_str(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}
}  // namespace

void Tokenizer::fit(const std::vector<std::string>& texts) {
    for (const auto& text : texts)
        for (const auto& w : tokenize_words(text))
            if (!word_ids_.count(w))
                word_ids_.emplace(w, 2 + static_cast<int>(word_ids_.size()));
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& w : tokenize_words(text)) {
        auto it = word_ids_.find(w);
        if (it != word_ids_.end()) {
            ids.push_back(it->second);
        } else {
            int bucket = static_cast<int>(fnv1a_str(w) % static_cast<uint64_t>(hash_buckets_));
            ids.push_back(2 + static_cast<int>(word_ids_.size()) + bucket);
        }
    }
    return ids;
}

int Tokenizer::vocab_size() const {
    return 2 + static_cast<int>(word_ids_.size()) + hash_buckets_;
}

void Tokenizer::save(const std::filesystem::path& path) const {
    json j;
    j["hash_buckets"] = hash_buckets_;
    json words = json::object();
    for (const auto& [w, id] : word_ids_) words[w] = id;
    j["words"] = std::move(words);
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump();
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    json j = json::parse(in);
    Tokenizer t(j.at("hash_buckets").get<int>());
    for (const auto& [w, id] : j.at("words").items())
        t.word_ids_[w] = id.get<int>();
    return t;
}

}  // namespace pverify
