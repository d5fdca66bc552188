#pragma once

// Brute-force reference implementations used only by tests. Each oracle
// takes the dumbest correct route (pair enumeration, exhaustive matching,
// textbook entropies) so the production code can be checked against an
// independent derivation rather than against itself.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sthreads/rng.hpp"
#include "sthreads/types.hpp"

namespace oracles {

inline sthreads::ThreadPartition make_partition(const std::string& scene_id,
                                                const std::vector<int>& labels) {
  sthreads::ThreadPartition part;
  part.scene_id = scene_id;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::string id = "u" + std::to_string(i);
    part.order.push_back(id);
    part.assignment[id] = "T" + std::to_string(labels[i]);
  }
  return part;
}

// parents[i] = index of the parent utterance; parents[i] == i starts a thread.
inline sthreads::GoldLinks make_links(const std::string& scene_id,
                                      const std::vector<int>& parents) {
  sthreads::GoldLinks links;
  links.scene_id = scene_id;
  for (std::size_t i = 0; i < parents.size(); ++i)
    links.order.push_back("u" + std::to_string(i));
  for (std::size_t i = 0; i < parents.size(); ++i)
    links.parent[links.order[i]] = links.order[parents[i]];
  return links;
}

inline std::vector<int> partition_labels(const sthreads::ThreadPartition& p) {
  std::map<std::string, int> seen;
  std::vector<int> labels;
  for (const auto& id : p.order) {
    const std::string& lab = p.assignment.at(id);
    auto [it, fresh] = seen.emplace(lab, static_cast<int>(seen.size()));
    (void)fresh;
    labels.push_back(it->second);
  }
  return labels;
}

// --- pair counting ---------------------------------------------------------

struct PairCounts {
  double both = 0;     // together in gold and in pred
  double gold_only = 0;
  double pred_only = 0;
  double neither = 0;
};

inline PairCounts count_pairs(const std::vector<int>& pred,
                              const std::vector<int>& gold) {
  PairCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i)
    for (std::size_t j = i + 1; j < gold.size(); ++j) {
      bool g = gold[i] == gold[j];
      bool p = pred[i] == pred[j];
      if (g && p)
        c.both += 1;
      else if (g)
        c.gold_only += 1;
      else if (p)
        c.pred_only += 1;
      else
        c.neither += 1;
    }
  return c;
}

inline double oracle_ari(const std::vector<int>& pred,
                         const std::vector<int>& gold) {
  PairCounts c = count_pairs(pred, gold);
  double total = c.both + c.gold_only + c.pred_only + c.neither;
  double sum_gold = c.both + c.gold_only;   // sum_i C(a_i, 2)
  double sum_pred = c.both + c.pred_only;   // sum_j C(b_j, 2)
  double expected = total > 0 ? sum_gold * sum_pred / total : 0.0;
  double maximum = (sum_gold + sum_pred) / 2.0;
  double denom = maximum - expected;
  bool equal = c.gold_only == 0 && c.pred_only == 0;
  if (denom == 0.0) return equal ? 100.0 : 0.0;
  return 100.0 * (c.both - expected) / denom;
}

// --- information theoretic -------------------------------------------------

inline std::vector<std::size_t> cluster_sizes(const std::vector<int>& labels) {
  std::map<int, std::size_t> m;
  for (int l : labels) ++m[l];
  std::vector<std::size_t> out;
  for (auto& [l, c] : m) out.push_back(c);
  return out;
}

// 100 * (1 - VI / ln n) via VI = H(gold) + H(pred) - 2 I(gold; pred).
inline double oracle_one_minus_vi(const std::vector<int>& pred,
                                  const std::vector<int>& gold) {
  std::size_t n = gold.size();
  if (n <= 1) return 100.0;
  auto entropy = [&](const std::vector<int>& labels) {
    double h = 0.0;
    for (std::size_t c : cluster_sizes(labels)) {
      double p = static_cast<double>(c) / static_cast<double>(n);
      h -= p * std::log(p);
    }
    return h;
  };
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < n; ++i) ++joint[{gold[i], pred[i]}];
  std::map<int, std::size_t> gsz, psz;
  for (std::size_t i = 0; i < n; ++i) {
    ++gsz[gold[i]];
    ++psz[pred[i]];
  }
  double mi = 0.0;
  for (auto& [gp, c] : joint) {
    double pij = static_cast<double>(c) / static_cast<double>(n);
    double pg = static_cast<double>(gsz[gp.first]) / static_cast<double>(n);
    double pp = static_cast<double>(psz[gp.second]) / static_cast<double>(n);
    mi += pij * std::log(pij / (pg * pp));
  }
  double vi = entropy(gold) + entropy(pred) - 2.0 * mi;
  return 100.0 * (1.0 - vi / std::log(static_cast<double>(n)));
}

// --- cluster matching ------------------------------------------------------

inline std::vector<std::set<std::size_t>> as_sets(const std::vector<int>& labels) {
  std::map<int, std::set<std::size_t>> m;
  for (std::size_t i = 0; i < labels.size(); ++i) m[labels[i]].insert(i);
  std::vector<std::set<std::size_t>> out;
  for (auto& [l, s] : m) out.push_back(s);
  return out;
}

inline std::size_t overlap(const std::set<std::size_t>& a,
                           const std::set<std::size_t>& b) {
  std::size_t c = 0;
  for (std::size_t x : a) c += b.count(x);
  return c;
}

inline double oracle_shen_f1(const std::vector<int>& pred,
                             const std::vector<int>& gold) {
  auto gsets = as_sets(gold);
  auto psets = as_sets(pred);
  double n = static_cast<double>(gold.size());
  double total = 0.0;
  for (const auto& gi : gsets) {
    double best = 0.0;
    for (const auto& pj : psets) {
      double o = static_cast<double>(overlap(gi, pj));
      if (o == 0.0) continue;
      double prec = o / static_cast<double>(pj.size());
      double rec = o / static_cast<double>(gi.size());
      best = std::max(best, 2.0 * prec * rec / (prec + rec));
    }
    total += (static_cast<double>(gi.size()) / n) * best;
  }
  return 100.0 * total;
}

// Exhaustive search over injective row->column mappings.
inline std::size_t best_matching(const std::vector<std::vector<std::size_t>>& w,
                                 std::size_t row, std::vector<bool>& used) {
  if (row == w.size()) return 0;
  // Skipping a row is allowed: with unequal cluster counts some rows go
  // unmatched.
  std::size_t best = best_matching(w, row + 1, used);
  for (std::size_t j = 0; j < w[row].size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    best = std::max(best, w[row][j] + best_matching(w, row + 1, used));
    used[j] = false;
  }
  return best;
}

inline double oracle_one_to_one(const std::vector<int>& pred,
                                const std::vector<int>& gold) {
  auto gsets = as_sets(gold);
  auto psets = as_sets(pred);
  std::vector<std::vector<std::size_t>> w(gsets.size(),
                                          std::vector<std::size_t>(psets.size()));
  for (std::size_t i = 0; i < gsets.size(); ++i)
    for (std::size_t j = 0; j < psets.size(); ++j)
      w[i][j] = overlap(gsets[i], psets[j]);
  std::vector<bool> used(psets.size(), false);
  std::size_t matched = best_matching(w, 0, used);
  return 100.0 * static_cast<double>(matched) / static_cast<double>(gold.size());
}

inline double oracle_exact_match_f1(const std::vector<int>& pred,
                                    const std::vector<int>& gold) {
  auto to_family = [](const std::vector<int>& labels) {
    std::set<std::set<std::size_t>> fam;
    for (auto& s : as_sets(labels)) fam.insert(s);
    return fam;
  };
  auto gfam = to_family(gold);
  auto pfam = to_family(pred);
  std::size_t hits = 0;
  for (const auto& s : pfam) hits += gfam.count(s);
  double prec = pfam.empty() ? 0.0 : static_cast<double>(hits) / pfam.size();
  double rec = gfam.empty() ? 0.0 : static_cast<double>(hits) / gfam.size();
  if (prec + rec == 0.0) return 0.0;
  return 100.0 * 2.0 * prec * rec / (prec + rec);
}

inline double oracle_link_accuracy(const std::vector<int>& pred,
                                   const std::vector<int>& gold) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += pred[i] == gold[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(gold.size());
}

// --- random generators -----------------------------------------------------

inline std::vector<int> random_labels(sthreads::Rng& rng, std::size_t n) {
  std::size_t k = 1 + rng.below(n);
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i)
    labels.push_back(static_cast<int>(rng.below(k)));
  // Remap by first appearance so label ids are dense.
  std::map<int, int> seen;
  for (int& l : labels) {
    auto [it, fresh] = seen.emplace(l, static_cast<int>(seen.size()));
    (void)fresh;
    l = it->second;
  }
  return labels;
}

// Random reply structure: each utterance either starts a thread or replies
// to some earlier utterance.
inline std::vector<int> random_parents(sthreads::Rng& rng, std::size_t n,
                                       double start_prob = 0.3) {
  std::vector<int> parents(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || rng.real() < start_prob)
      parents[i] = static_cast<int>(i);
    else
      parents[i] = static_cast<int>(rng.below(i));
  }
  return parents;
}

// Thread labels implied by a reply forest.
inline std::vector<int> labels_from_parents(const std::vector<int>& parents) {
  std::vector<int> labels(parents.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (parents[i] == static_cast<int>(i))
      labels[i] = next++;
    else
      labels[i] = labels[parents[i]];
  }
  return labels;
}

}  // namespace oracles
