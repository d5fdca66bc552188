#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sthreads/types.hpp"

namespace sthreads::metrics {

// Co-membership counts between gold threads (rows) and predicted threads
// (columns). Cluster indices follow first appearance in position order, so
// every metric is invariant under relabeling.
struct ContingencyTable {
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> gold_sizes;
  std::vector<std::size_t> pred_sizes;
  std::size_t n = 0;

  // Throws UtteranceSetMismatch unless both partitions cover the same ids.
  static ContingencyTable build(const ThreadPartition& pred,
                                const ThreadPartition& gold);

  bool partitions_equal() const;
};

// All metric values are percentages.
double link_accuracy(const GoldLinks& pred, const GoldLinks& gold);
double ari(const ThreadPartition& pred, const ThreadPartition& gold);
double one_minus_vi(const ThreadPartition& pred, const ThreadPartition& gold);
double shen_f1(const ThreadPartition& pred, const ThreadPartition& gold);
double one_to_one(const ThreadPartition& pred, const ThreadPartition& gold);
double exact_match_f1(const ThreadPartition& pred, const ThreadPartition& gold);

// Maximum-weight one-to-one assignment between rows and columns of an
// integer weight matrix (Hungarian algorithm, exact).
std::size_t max_overlap_assignment(
    const std::vector<std::vector<std::size_t>>& weights);

struct Interval {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool has_ci = false;
};

struct MetricsReport {
  Interval link_accuracy;
  Interval ari;
  Interval one_minus_vi;
  Interval shen_f1;
  Interval one_to_one;
  Interval exact_match_f1;
};

// One scene's predictions paired with gold, the unit of corpus aggregation
// and of bootstrap resampling.
struct ScenePair {
  GoldLinks pred_links;
  GoldLinks gold_links;
  ThreadPartition pred;
  ThreadPartition gold;

  // Utterance count, tolerant of link-only or partition-only pairs.
  std::size_t size() const {
    return std::max(gold.order.size(), gold_links.order.size());
  }
};

enum class MetricId {
  link_accuracy,
  ari,
  one_minus_vi,
  shen_f1,
  one_to_one,
  exact_match_f1,
};

// Per-scene metric micro-averaged by utterance count.
double corpus_metric(MetricId id, const std::vector<const ScenePair*>& units);

using CorpusMetricFn =
    std::function<double(const std::vector<const ScenePair*>&)>;

// Percentile bootstrap over scenes: resamples scenes with replacement,
// recomputes the corpus metric, and returns the 2.5/97.5 percentile interval
// (linear interpolation) around the full-sample point estimate. Each
// resample draws from its own derived seed, so results do not depend on
// evaluation order. Throws TooFewUnits below 2 scenes.
Interval bootstrap_ci(const CorpusMetricFn& metric,
                      const std::vector<ScenePair>& units, int resamples,
                      std::uint64_t seed);

// Full suite over a corpus; resamples > 0 attaches bootstrap CIs.
MetricsReport evaluate_corpus(const std::vector<ScenePair>& units,
                              int resamples = 0, std::uint64_t seed = 0);

// Inter-annotator agreement: the suite computed in both directions. Link
// accuracy, ARI, 1-VI, One-to-One and Exact-Match F1 are symmetric by
// definition; Shen F1 is not, so `average` carries its two-direction mean.
struct AgreementReport {
  MetricsReport a_as_reference;  // B scored against A
  MetricsReport b_as_reference;  // A scored against B
  MetricsReport average;
};

// Units carry annotation A in the gold slots and annotation B in the pred
// slots. Throws UtteranceSetMismatch unless both cover identical utterances.
AgreementReport agreement(const std::vector<ScenePair>& units);

}  // namespace sthreads::metrics
