#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "pverify/types.hpp"

namespace pverify {

/// Whitespace+lowercase tokenizer with a fixed vocabulary and hashing
/// fallback for out-of-vocabulary words. Id layout:
///   0 = [CLS], 1 = [SEP], 2 .. 2+vocab-1 = known words,
///   2+vocab .. 2+vocab+hash_buckets-1 = OOV hash buckets.
class Tokenizer {
public:
    static constexpr int kClsId = 0;
    static constexpr int kSepId = 1;

    explicit Tokenizer(int hash_buckets = 1024) : hash_buckets_(hash_buckets) {}

    /// Builds the vocabulary from a text sample (words seen at least once).
    void fit(const std::vector<std::string>& texts);

    std::vector<int> encode(const std::string& text) const;

    int vocab_size() const;  // total id space including specials and buckets

    void save(const std::filesystem::path& path) const;
    static Tokenizer load(const std::filesystem::path& path);

private:
    int hash_buckets_;
    std::unordered_map<std::string, int> word_ids_;  // word -> id (>= 2)
};

}  // namespace pverify
