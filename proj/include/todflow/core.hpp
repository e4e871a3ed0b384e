#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace todflow {

using ActIndex = std::size_t;

/// Fixed-length bit vector. Bits past size() are always zero.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

  std::size_t size() const { return size_; }

  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  void set(std::size_t i, bool value = true) {
    const std::uint64_t bit = std::uint64_t{1} << (i % 64);
    if (value) {
      words_[i / 64] |= bit;
    } else {
      words_[i / 64] &= ~bit;
    }
  }

  std::size_t count() const;
  bool none() const;

  /// this |= other; sizes must match.
  BitVector& operator|=(const BitVector& other);
  /// Every bit set here is also set in other.
  bool is_subset_of(const BitVector& other) const;

  std::span<const std::uint64_t> words() const { return words_; }

  /// Low `size()` bits of an integer, bit i = completion of act i.
  static BitVector from_mask(std::size_t size, std::uint64_t mask);

  friend bool operator==(const BitVector&, const BitVector&) = default;
  friend bool operator<(const BitVector& a, const BitVector& b) {
    if (a.size_ != b.size_) return a.size_ < b.size_;
    return a.words_ < b.words_;
  }

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct BitVectorHash {
  std::size_t operator()(const BitVector& v) const;
};

/// Dialog state: bit n is set once act (or DB result) n has occurred.
using CompletionVector = BitVector;

/// Set of act indices, kept sorted and unique.
class ActionSet {
 public:
  ActionSet() = default;
  ActionSet(std::initializer_list<ActIndex> acts);
  explicit ActionSet(std::vector<ActIndex> acts);

  void insert(ActIndex act);
  void erase(ActIndex act);
  bool contains(ActIndex act) const;

  std::size_t size() const { return acts_.size(); }
  bool empty() const { return acts_.empty(); }
  auto begin() const { return acts_.begin(); }
  auto end() const { return acts_.end(); }
  const std::vector<ActIndex>& values() const { return acts_; }

  ActionSet united(const ActionSet& other) const;
  ActionSet intersected(const ActionSet& other) const;
  ActionSet minus(const ActionSet& other) const;

  friend bool operator==(const ActionSet&, const ActionSet&) = default;
  friend auto operator<=>(const ActionSet& a, const ActionSet& b) { return a.acts_ <=> b.acts_; }

 private:
  std::vector<ActIndex> acts_;
};

/// Bijection between act labels and dense indices, in insertion order.
class ActVocabulary {
 public:
  ActVocabulary() = default;
  explicit ActVocabulary(const std::vector<std::string>& labels);

  /// Trim and collapse internal runs of whitespace to one space.
  static std::string normalize(std::string_view label);

  /// Index of the label, adding it when new. Throws VocabularyError on an
  /// empty label.
  ActIndex add(std::string_view label);

  std::optional<ActIndex> find(std::string_view label) const;
  /// Throws VocabularyError naming the label when absent.
  ActIndex at(std::string_view label) const;
  const std::string& label(ActIndex i) const { return labels_.at(i); }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const ActVocabulary& a, const ActVocabulary& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, ActIndex> index_;
};

enum class Speaker { user, system, db };

std::string_view to_string(Speaker s);
/// Accepts "user", "system", "db" (case-insensitive).
std::optional<Speaker> parse_speaker(std::string_view s);

struct TurnRecord {
  Speaker speaker = Speaker::user;
  /// Act labels in first-mention order, no duplicates.
  std::vector<std::string> acts;
  std::optional<std::string> utterance;
  std::optional<std::string> db_result;

  friend bool operator==(const TurnRecord&, const TurnRecord&) = default;
};

struct Trajectory {
  std::string id;
  std::string domain_id;
  std::vector<TurnRecord> turns;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// One (c_t, a_t) pair of the graph-inference dataset.
struct GraphExample {
  CompletionVector completion;
  ActionSet action;
  std::size_t turn_index = 0;
  std::string trajectory_id;

  friend bool operator==(const GraphExample&, const GraphExample&) = default;
};

/// Every act and DB-result label, in first-occurrence order.
/// Throws EmptyCorpus when there are no trajectories.
ActVocabulary vocabulary_from_trajectories(std::span<const Trajectory> trajectories);

/// Indices of `labels` that the vocabulary knows; unknown ones are skipped.
ActionSet to_action_set(const ActVocabulary& vocab, const std::vector<std::string>& labels);
std::vector<std::string> to_labels(const ActVocabulary& vocab, const ActionSet& acts);

}  // namespace todflow
