#include "todflow/core.hpp"

#include <algorithm>
#include <bit>
#include <cctype>

#include "todflow/errors.hpp"
#include "todflow/rng.hpp"

namespace todflow {

std::size_t BitVector::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool BitVector::none() const {
  return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
}

BitVector& BitVector::operator|=(const BitVector& other) {
  for (std::size_t i = 0; i < words_.size() && i < other.words_.size(); ++i) {
    words_[i] |= other.words_[i];
  }
  return *this;
}

bool BitVector::is_subset_of(const BitVector& other) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const std::uint64_t o = i < other.words_.size() ? other.words_[i] : 0;
    if ((words_[i] & ~o) != 0) return false;
  }
  return true;
}

BitVector BitVector::from_mask(std::size_t size, std::uint64_t mask) {
  BitVector v(size);
  for (std::size_t i = 0; i < size && i < 64; ++i) {
    if ((mask >> i) & 1U) v.set(i);
  }
  return v;
}

std::size_t BitVectorHash::operator()(const BitVector& v) const {
  std::uint64_t h = mix64(v.size());
  for (auto w : v.words()) h = mix64(h ^ w);
  return static_cast<std::size_t>(h);
}

ActionSet::ActionSet(std::initializer_list<ActIndex> acts) : ActionSet(std::vector<ActIndex>(acts)) {}

ActionSet::ActionSet(std::vector<ActIndex> acts) : acts_(std::move(acts)) {
  std::sort(acts_.begin(), acts_.end());
  acts_.erase(std::unique(acts_.begin(), acts_.end()), acts_.end());
}

void ActionSet::insert(ActIndex act) {
  auto it = std::lower_bound(acts_.begin(), acts_.end(), act);
  if (it == acts_.end() || *it != act) acts_.insert(it, act);
}

void ActionSet::erase(ActIndex act) {
  auto it = std::lower_bound(acts_.begin(), acts_.end(), act);
  if (it != acts_.end() && *it == act) acts_.erase(it);
}

bool ActionSet::contains(ActIndex act) const {
  return std::binary_search(acts_.begin(), acts_.end(), act);
}

ActionSet ActionSet::united(const ActionSet& other) const {
  ActionSet out;
  std::set_union(acts_.begin(), acts_.end(), other.acts_.begin(), other.acts_.end(),
                 std::back_inserter(out.acts_));
  return out;
}

ActionSet ActionSet::intersected(const ActionSet& other) const {
  ActionSet out;
  std::set_intersection(acts_.begin(), acts_.end(), other.acts_.begin(), other.acts_.end(),
                        std::back_inserter(out.acts_));
  return out;
}

ActionSet ActionSet::minus(const ActionSet& other) const {
  ActionSet out;
  std::set_difference(acts_.begin(), acts_.end(), other.acts_.begin(), other.acts_.end(),
                      std::back_inserter(out.acts_));
  return out;
}

ActVocabulary::ActVocabulary(const std::vector<std::string>& labels) {
  for (const auto& l : labels) {
    const auto before = size();
    add(l);
    if (size() == before) {
      throw VocabularyError("duplicate act label '" + l + "'", l);
    }
  }
}

std::string ActVocabulary::normalize(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  bool pending_space = false;
  for (char ch : label) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

ActIndex ActVocabulary::add(std::string_view label) {
  std::string norm = normalize(label);
  if (norm.empty()) throw VocabularyError("empty act label");
  if (auto it = index_.find(norm); it != index_.end()) return it->second;
  const ActIndex i = labels_.size();
  index_.emplace(norm, i);
  labels_.push_back(std::move(norm));
  return i;
}

std::optional<ActIndex> ActVocabulary::find(std::string_view label) const {
  auto it = index_.find(normalize(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ActIndex ActVocabulary::at(std::string_view label) const {
  if (auto i = find(label)) return *i;
  throw VocabularyError("act label '" + std::string(label) + "' is not in the vocabulary",
                        std::string(label));
}

std::string_view to_string(Speaker s) {
  switch (s) {
    case Speaker::user: return "user";
    case Speaker::system: return "system";
    case Speaker::db: return "db";
  }
  return "user";
}

std::optional<Speaker> parse_speaker(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "user") return Speaker::user;
  if (lower == "system") return Speaker::system;
  if (lower == "db") return Speaker::db;
  return std::nullopt;
}

ActVocabulary vocabulary_from_trajectories(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw EmptyCorpus("no trajectories to build a vocabulary from");
  ActVocabulary vocab;
  for (const auto& traj : trajectories) {
    for (const auto& turn : traj.turns) {
      for (const auto& act : turn.acts) vocab.add(act);
      if (turn.db_result) vocab.add(*turn.db_result);
    }
  }
  return vocab;
}

ActionSet to_action_set(const ActVocabulary& vocab, const std::vector<std::string>& labels) {
  std::vector<ActIndex> idx;
  idx.reserve(labels.size());
  for (const auto& l : labels) {
    if (auto i = vocab.find(l)) idx.push_back(*i);
  }
  return ActionSet(std::move(idx));
}

std::vector<std::string> to_labels(const ActVocabulary& vocab, const ActionSet& acts) {
  std::vector<std::string> out;
  out.reserve(acts.size());
  for (auto a : acts) out.push_back(vocab.label(a));
  return out;
}

}  // namespace todflow
