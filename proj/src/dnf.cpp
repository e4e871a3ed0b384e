#include "todflow/dnf.hpp"

#include <algorithm>

#include "todflow/errors.hpp"

namespace todflow {

namespace {

bool clause_less(const Clause& a, const Clause& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// a ⊆ b for sorted clauses.
bool subsumes(const Clause& a, const Clause& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::vector<Clause> reduce(std::vector<Clause> clauses) {
  std::vector<Clause> kept;
  kept.reserve(clauses.size());
  for (auto& cl : clauses) {
    if (canonicalize_clause(cl)) kept.push_back(std::move(cl));
  }
  std::sort(kept.begin(), kept.end(), clause_less);
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  // Sorted by size, so a clause can only be subsumed by an earlier one.
  std::vector<Clause> out;
  out.reserve(kept.size());
  for (auto& cl : kept) {
    bool redundant = std::any_of(out.begin(), out.end(),
                                 [&](const Clause& smaller) { return subsumes(smaller, cl); });
    if (!redundant) out.push_back(std::move(cl));
  }
  return out;
}

}  // namespace

bool canonicalize_clause(Clause& clause) {
  std::sort(clause.begin(), clause.end());
  clause.erase(std::unique(clause.begin(), clause.end()), clause.end());
  for (std::size_t i = 1; i < clause.size(); ++i) {
    if (clause[i].act == clause[i - 1].act) return false;
  }
  return true;
}

DnfCondition::DnfCondition(std::vector<Clause> clauses) : clauses_(reduce(std::move(clauses))) {}

bool DnfCondition::evaluate(const CompletionVector& c) const { return first_satisfied(c) >= 0; }

int DnfCondition::first_satisfied(const CompletionVector& c) const {
  for (std::size_t k = 0; k < clauses_.size(); ++k) {
    bool all = true;
    for (const auto& lit : clauses_[k]) {
      if (lit.act >= c.size()) {
        throw VocabularyError("literal references act " + std::to_string(lit.act) +
                              " but the completion vector has " + std::to_string(c.size()) +
                              " entries");
      }
      if (!lit.satisfied_by(c)) {
        all = false;
        break;
      }
    }
    if (all) return static_cast<int>(k);
  }
  return -1;
}

std::size_t DnfCondition::literal_count() const {
  std::size_t n = 0;
  for (const auto& cl : clauses_) n += cl.size();
  return n;
}

std::size_t DnfCondition::index_bound() const {
  std::size_t bound = 0;
  for (const auto& cl : clauses_) {
    for (const auto& lit : cl) bound = std::max(bound, lit.act + 1);
  }
  return bound;
}

DnfCondition DnfCondition::simplified() const {
  std::vector<Clause> cur = clauses_;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < cur.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < cur.size() && !changed; ++j) {
        const Clause& a = cur[i];
        const Clause& b = cur[j];
        if (a.size() != b.size()) continue;
        // Same acts, exactly one polarity differs.
        std::size_t diff = a.size();
        bool mergeable = true;
        for (std::size_t k = 0; k < a.size(); ++k) {
          if (a[k].act != b[k].act) {
            mergeable = false;
            break;
          }
          if (a[k].negated != b[k].negated) {
            if (diff != a.size()) {
              mergeable = false;
              break;
            }
            diff = k;
          }
        }
        if (!mergeable || diff == a.size()) continue;
        Clause merged = a;
        merged.erase(merged.begin() + static_cast<std::ptrdiff_t>(diff));
        cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(j));
        cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(i));
        cur.push_back(std::move(merged));
        cur = reduce(std::move(cur));
        changed = true;
      }
    }
  }
  return DnfCondition(std::move(cur));
}

DnfCondition DnfCondition::with_clause(Clause clause) const {
  auto cl = clauses_;
  cl.push_back(std::move(clause));
  return DnfCondition(std::move(cl));
}

DnfCondition DnfCondition::without_clause(Clause clause, bool* removed) const {
  const bool valid = canonicalize_clause(clause);
  auto cl = clauses_;
  auto it = valid ? std::find(cl.begin(), cl.end(), clause) : cl.end();
  if (removed) *removed = it != cl.end();
  if (it != cl.end()) cl.erase(it);
  return DnfCondition(std::move(cl));
}

std::string DnfCondition::clause_to_string(const Clause& clause, const ActVocabulary* vocab) {
  if (clause.empty()) return "true";
  std::string out;
  for (std::size_t i = 0; i < clause.size(); ++i) {
    if (i) out += " & ";
    if (clause[i].negated) out += "!";
    if (vocab && clause[i].act < vocab->size()) {
      out += "[" + vocab->label(clause[i].act) + "]";
    } else {
      out += "#" + std::to_string(clause[i].act);
    }
  }
  return out;
}

std::string DnfCondition::to_string(const ActVocabulary* vocab) const {
  if (is_false()) return "false";
  if (is_true()) return "true";
  std::string out;
  for (std::size_t k = 0; k < clauses_.size(); ++k) {
    if (k) out += " | ";
    const bool wrap = clauses_.size() > 1 && clauses_[k].size() > 1;
    if (wrap) out += "(";
    out += clause_to_string(clauses_[k], vocab);
    if (wrap) out += ")";
  }
  return out;
}

}  // namespace todflow
