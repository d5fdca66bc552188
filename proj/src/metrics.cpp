#include "sthreads/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "sthreads/rng.hpp"

namespace sthreads::metrics {

namespace {

void require_same_ids(const std::vector<std::string>& pred,
                      const std::vector<std::string>& gold,
                      const std::string& scene_id) {
  if (gold.empty())
    throw EmptyDataset("scene " + scene_id + " has no utterances");
  if (pred.size() != gold.size())
    throw UtteranceSetMismatch("scene " + scene_id + ": " +
                               std::to_string(pred.size()) + " predicted vs " +
                               std::to_string(gold.size()) +
                               " gold utterances");
  std::set<std::string> a(pred.begin(), pred.end());
  std::set<std::string> b(gold.begin(), gold.end());
  if (a != b)
    throw UtteranceSetMismatch("scene " + scene_id +
                               ": utterance ids disagree");
}

double binom2(double k) { return k * (k - 1.0) / 2.0; }

}  // namespace

ContingencyTable ContingencyTable::build(const ThreadPartition& pred,
                                         const ThreadPartition& gold) {
  require_same_ids(pred.order, gold.order, gold.scene_id);
  ContingencyTable t;
  t.n = gold.order.size();
  std::map<std::string, std::size_t> gidx, pidx;
  for (const auto& id : gold.order) {
    const std::string& glab = gold.assignment.at(id);
    const std::string& plab = pred.assignment.at(id);
    auto [gi, gnew] = gidx.emplace(glab, gidx.size());
    auto [pi, pnew] = pidx.emplace(plab, pidx.size());
    if (gnew) {
      t.counts.emplace_back(t.counts.empty() ? 0 : t.counts[0].size(), 0);
      t.gold_sizes.push_back(0);
    }
    if (pnew) {
      for (auto& row : t.counts) row.push_back(0);
      t.pred_sizes.push_back(0);
    }
    ++t.counts[gi->second][pi->second];
    ++t.gold_sizes[gi->second];
    ++t.pred_sizes[pi->second];
  }
  return t;
}

bool ContingencyTable::partitions_equal() const {
  if (gold_sizes.size() != pred_sizes.size()) return false;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::size_t nonzero = 0, hit = 0;
    for (std::size_t j = 0; j < counts[i].size(); ++j) {
      if (counts[i][j] == 0) continue;
      ++nonzero;
      if (counts[i][j] == gold_sizes[i] && counts[i][j] == pred_sizes[j]) ++hit;
    }
    if (nonzero != 1 || hit != 1) return false;
  }
  return true;
}

double link_accuracy(const GoldLinks& pred, const GoldLinks& gold) {
  require_same_ids(pred.order, gold.order, gold.scene_id);
  std::size_t hits = 0;
  for (const auto& id : gold.order)
    hits += pred.parent.at(id) == gold.parent.at(id);
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(gold.order.size());
}

double ari(const ThreadPartition& pred, const ThreadPartition& gold) {
  ContingencyTable t = ContingencyTable::build(pred, gold);
  double index = 0.0;
  for (const auto& row : t.counts)
    for (std::size_t nij : row) index += binom2(static_cast<double>(nij));
  double sum_gold = 0.0, sum_pred = 0.0;
  for (std::size_t a : t.gold_sizes) sum_gold += binom2(static_cast<double>(a));
  for (std::size_t b : t.pred_sizes) sum_pred += binom2(static_cast<double>(b));
  double total = binom2(static_cast<double>(t.n));
  double expected = total > 0.0 ? sum_gold * sum_pred / total : 0.0;
  double maximum = (sum_gold + sum_pred) / 2.0;
  if (maximum - expected == 0.0)
    return t.partitions_equal() ? 100.0 : 0.0;
  return 100.0 * (index - expected) / (maximum - expected);
}

double one_minus_vi(const ThreadPartition& pred, const ThreadPartition& gold) {
  ContingencyTable t = ContingencyTable::build(pred, gold);
  if (t.n <= 1) return 100.0;
  double n = static_cast<double>(t.n);
  // VI = H(gold|pred) + H(pred|gold), in nats.
  double vi = 0.0;
  for (std::size_t i = 0; i < t.counts.size(); ++i) {
    for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
      if (t.counts[i][j] == 0) continue;
      double nij = static_cast<double>(t.counts[i][j]);
      double ai = static_cast<double>(t.gold_sizes[i]);
      double bj = static_cast<double>(t.pred_sizes[j]);
      vi -= nij / n * (std::log(nij / bj) + std::log(nij / ai));
    }
  }
  return 100.0 * (1.0 - vi / std::log(n));
}

double shen_f1(const ThreadPartition& pred, const ThreadPartition& gold) {
  ContingencyTable t = ContingencyTable::build(pred, gold);
  double n = static_cast<double>(t.n);
  double score = 0.0;
  for (std::size_t i = 0; i < t.counts.size(); ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
      if (t.counts[i][j] == 0) continue;
      double nij = static_cast<double>(t.counts[i][j]);
      double prec = nij / static_cast<double>(t.pred_sizes[j]);
      double rec = nij / static_cast<double>(t.gold_sizes[i]);
      best = std::max(best, 2.0 * prec * rec / (prec + rec));
    }
    score += static_cast<double>(t.gold_sizes[i]) / n * best;
  }
  return 100.0 * score;
}

std::size_t max_overlap_assignment(
    const std::vector<std::vector<std::size_t>>& weights) {
  if (weights.empty()) return 0;
  const std::size_t rows = weights.size();
  const std::size_t cols = weights[0].size();
  const std::size_t k = std::max(rows, cols);
  // Hungarian algorithm on the negated, zero-padded square matrix.
  std::vector<std::vector<double>> cost(k + 1, std::vector<double>(k + 1, 0.0));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      cost[i + 1][j + 1] = -static_cast<double>(weights[i][j]);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0);
  std::vector<std::size_t> match(k + 1, 0), way(k + 1, 0);
  for (std::size_t i = 1; i <= k; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(k + 1, inf);
    std::vector<bool> used(k + 1, false);
    do {
      used[j0] = true;
      std::size_t i0 = match[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::size_t total = 0;
  for (std::size_t j = 1; j <= k; ++j) {
    std::size_t i = match[j];
    if (i >= 1 && i <= rows && j <= cols) total += weights[i - 1][j - 1];
  }
  return total;
}

double one_to_one(const ThreadPartition& pred, const ThreadPartition& gold) {
  ContingencyTable t = ContingencyTable::build(pred, gold);
  std::size_t matched = max_overlap_assignment(t.counts);
  return 100.0 * static_cast<double>(matched) / static_cast<double>(t.n);
}

double exact_match_f1(const ThreadPartition& pred,
                      const ThreadPartition& gold) {
  ContingencyTable t = ContingencyTable::build(pred, gold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < t.counts.size(); ++i)
    for (std::size_t j = 0; j < t.counts[i].size(); ++j)
      if (t.counts[i][j] != 0 && t.counts[i][j] == t.gold_sizes[i] &&
          t.counts[i][j] == t.pred_sizes[j])
        ++hits;
  double prec = static_cast<double>(hits) / t.pred_sizes.size();
  double rec = static_cast<double>(hits) / t.gold_sizes.size();
  if (prec + rec == 0.0) return 0.0;
  return 100.0 * 2.0 * prec * rec / (prec + rec);
}

double corpus_metric(MetricId id, const std::vector<const ScenePair*>& units) {
  if (units.empty()) throw EmptyDataset("no scenes to evaluate");
  // Micro average: each scene's score weighted by its utterance count.
  double weighted = 0.0, total = 0.0;
  for (const ScenePair* unit : units) {
    double score = 0.0;
    switch (id) {
      case MetricId::link_accuracy:
        score = link_accuracy(unit->pred_links, unit->gold_links);
        break;
      case MetricId::ari:
        score = ari(unit->pred, unit->gold);
        break;
      case MetricId::one_minus_vi:
        score = one_minus_vi(unit->pred, unit->gold);
        break;
      case MetricId::shen_f1:
        score = shen_f1(unit->pred, unit->gold);
        break;
      case MetricId::one_to_one:
        score = one_to_one(unit->pred, unit->gold);
        break;
      case MetricId::exact_match_f1:
        score = exact_match_f1(unit->pred, unit->gold);
        break;
    }
    double w = static_cast<double>(unit->size());
    weighted += w * score;
    total += w;
  }
  if (total == 0.0) throw EmptyDataset("scenes contain no utterances");
  return weighted / total;
}

namespace {

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted[0];
  double h = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

Interval bootstrap_ci(const CorpusMetricFn& metric,
                      const std::vector<ScenePair>& units, int resamples,
                      std::uint64_t seed) {
  if (units.size() < 2)
    throw TooFewUnits("bootstrap needs at least 2 scenes, got " +
                      std::to_string(units.size()));
  if (resamples < 1) throw Error("resamples must be positive");
  std::vector<const ScenePair*> all;
  all.reserve(units.size());
  for (const auto& u : units) all.push_back(&u);
  Interval out;
  out.point = metric(all);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  // Each resample runs off its own derived seed so the result is identical
  // no matter how the loop is scheduled.
  for (int r = 0; r < resamples; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    std::vector<const ScenePair*> sample(units.size());
    for (auto& slot : sample) slot = &units[rng.below(units.size())];
    stats[static_cast<std::size_t>(r)] = metric(sample);
  }
  std::sort(stats.begin(), stats.end());
  out.lo = percentile(stats, 0.025);
  out.hi = percentile(stats, 0.975);
  out.has_ci = true;
  return out;
}

namespace {

Interval point_only(MetricId id, const std::vector<const ScenePair*>& all) {
  Interval iv;
  iv.point = corpus_metric(id, all);
  return iv;
}

}  // namespace

MetricsReport evaluate_corpus(const std::vector<ScenePair>& units,
                              int resamples, std::uint64_t seed) {
  if (units.empty()) throw EmptyDataset("no scenes to evaluate");
  MetricsReport report;
  const MetricId ids[] = {MetricId::link_accuracy, MetricId::ari,
                          MetricId::one_minus_vi,  MetricId::shen_f1,
                          MetricId::one_to_one,    MetricId::exact_match_f1};
  Interval* slots[] = {&report.link_accuracy, &report.ari,
                       &report.one_minus_vi,  &report.shen_f1,
                       &report.one_to_one,    &report.exact_match_f1};
  std::vector<const ScenePair*> all;
  for (const auto& u : units) all.push_back(&u);
  for (std::size_t k = 0; k < 6; ++k) {
    MetricId id = ids[k];
    if (resamples > 0 && units.size() >= 2) {
      // Deterministic per-metric seed: CIs for one metric stay fixed even if
      // the set of requested metrics changes.
      std::uint64_t metric_seed = mix_seed(seed, 0x9000 + k);
      *slots[k] = bootstrap_ci(
          [id](const std::vector<const ScenePair*>& sample) {
            return corpus_metric(id, sample);
          },
          units, resamples, metric_seed);
    } else {
      *slots[k] = point_only(id, all);
    }
  }
  return report;
}

AgreementReport agreement(const std::vector<ScenePair>& units) {
  if (units.empty()) throw EmptyDataset("no scenes to compare");
  AgreementReport rep;
  std::vector<ScenePair> flipped;
  flipped.reserve(units.size());
  for (const auto& u : units) {
    ScenePair f;
    f.pred_links = u.gold_links;
    f.gold_links = u.pred_links;
    f.pred = u.gold;
    f.gold = u.pred;
    flipped.push_back(std::move(f));
  }
  rep.a_as_reference = evaluate_corpus(units);
  rep.b_as_reference = evaluate_corpus(flipped);
  auto avg = [](const Interval& x, const Interval& y) {
    Interval iv;
    iv.point = (x.point + y.point) / 2.0;
    return iv;
  };
  rep.average.link_accuracy = avg(rep.a_as_reference.link_accuracy,
                                  rep.b_as_reference.link_accuracy);
  rep.average.ari = avg(rep.a_as_reference.ari, rep.b_as_reference.ari);
  rep.average.one_minus_vi =
      avg(rep.a_as_reference.one_minus_vi, rep.b_as_reference.one_minus_vi);
  rep.average.shen_f1 =
      avg(rep.a_as_reference.shen_f1, rep.b_as_reference.shen_f1);
  rep.average.one_to_one =
      avg(rep.a_as_reference.one_to_one, rep.b_as_reference.one_to_one);
  rep.average.exact_match_f1 = avg(rep.a_as_reference.exact_match_f1,
                                   rep.b_as_reference.exact_match_f1);
  return rep;
}

}  // namespace sthreads::metrics
