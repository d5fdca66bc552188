#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sthreads/rng.hpp"
#include "sthreads/text.hpp"
#include "sthreads/types.hpp"

namespace sthreads::linkmodel {

struct FeatureConfig {
  std::size_t pool_size = 6;  // C, counting the self candidate
  // f1-f3 describe the utterance of interest; optionally duplicate them
  // for the candidate as well.
  bool candidate_utterance_features = false;
  text::TokenizerFn tokenizer;  // empty = lowercase word tokens

  std::size_t dimensions() const {
    return candidate_utterance_features ? 12 : 9;
  }
};

struct FeatureVector {
  double speakers_spoken_after = 0;                // f1
  double utterances_since_speaker_last_spoke = 0;  // f2
  double next_same_speaker = 0;                    // f3
  double common_tokens = 0;                        // f4
  double distance = 0;                             // f5
  double intervening_same_speakers = 0;            // f6
  double same_turn = 0;                            // f7
  double same_speaker = 0;                         // f8
  double is_self = 0;
  // f1-f3 recomputed for the candidate; used only when configured.
  double cand_speakers_spoken_after = 0;
  double cand_utterances_since_speaker_last_spoke = 0;
  double cand_next_same_speaker = 0;

  std::vector<double> values(const FeatureConfig& config) const;
};

// Features for a (UOI, candidate) pair; the candidate must not follow the
// UOI and both must belong to the given scene. Throws ScenesMismatch.
FeatureVector extract_features(const Utterance& uoi, const Utterance& candidate,
                               const Scene& scene,
                               const FeatureConfig& config = {});

// [u_i, u_{i-1}, ..., u_{i-C+1}], clipped at the scene start.
struct CandidatePool {
  const Utterance* uoi = nullptr;
  std::vector<const Utterance*> candidates;
};
CandidatePool make_pool(const Scene& scene, int position, std::size_t pool_size);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stdev;

  void fit(const std::vector<std::vector<double>>& rows);
  // Zero-stdev dimensions pass through unchanged.
  std::vector<double> apply(const std::vector<double>& x) const;
};

struct ScorerModel {
  enum class Architecture { linear, one_hidden };
  Architecture architecture = Architecture::one_hidden;
  std::size_t input_dim = 0;
  std::size_t hidden_width = 16;

  // linear: sigma(w.x + b). one_hidden: sigma(w1 . tanh(W0 x)), W0 stored
  // row-major [hidden_width x input_dim], no biases.
  std::vector<double> w;
  double b = 0.0;
  std::vector<double> w0;
  std::vector<double> w1;
  // Auxiliary same-thread head sigma(aux.x); empty when disabled.
  std::vector<double> aux;

  Standardizer standardizer;
  FeatureConfig features;
  std::uint64_t seed = 0;
};

// Matching score in (0,1) for a raw (unstandardized) feature vector.
double score(const ScorerModel& model, const FeatureVector& fv);
double score_standardized(const ScorerModel& model,
                          const std::vector<double>& z);
double aux_score_standardized(const ScorerModel& model,
                              const std::vector<double>& z);

struct TrainingConfig {
  int epochs = 10;
  double learning_rate = 1e-3;
  int negatives_per_positive = 5;
  double alpha = 0.1;  // auxiliary-loss weight; 0 disables the head
  std::uint64_t seed = 42;
  ScorerModel::Architecture architecture = ScorerModel::Architecture::one_hidden;
  std::size_t hidden_width = 16;
  FeatureConfig features;
};

struct LabeledScene {
  Scene scene;
  GoldLinks links;
};

// One training pair, with raw features.
struct Instance {
  std::vector<double> x;
  double link_label = 0;    // 1 = gold parent, 0 = sampled negative
  double thread_label = 0;  // 1 = same gold thread
};

// Positive pairs plus negatives_per_positive seeded uniform negatives per
// positive, drawn from preceding utterances (and self when the UOI is not
// a thread start). Throws NoPositives for a scene without links.
std::vector<Instance> build_instances(const std::vector<LabeledScene>& data,
                                      const TrainingConfig& config, Rng& rng);

// Per-weight gradients, laid out like the model's weight fields.
struct Gradients {
  std::vector<double> w;
  double b = 0.0;
  std::vector<double> w0;
  std::vector<double> w1;
  std::vector<double> aux;
};

// Total loss (link BCE + alpha * thread BCE) for one standardized instance,
// accumulating analytic gradients into `out`. Exposed for verification.
double loss_and_gradients(const ScorerModel& model,
                          const std::vector<double>& z, double link_label,
                          double thread_label, double alpha, Gradients& out);

// Mean link BCE of the model over raw-feature instances.
double mean_link_bce(const ScorerModel& model,
                     const std::vector<Instance>& instances);

// One epoch of the training log: mean per-instance loss over the pass and
// the dev link accuracy measured after it (negative when there is no dev
// set).
struct EpochLog {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double dev_accuracy = -1.0;
  bool selected = false;  // this epoch's checkpoint was kept as best so far
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;  // 1-based; 0 means the final epoch (no dev set)
};

// Seeded SGD over single instances with per-epoch reshuffling; keeps the
// epoch checkpoint with the best dev link accuracy (dev may be empty, in
// which case the final epoch wins). Throws EmptyDataset, NoPositives.
ScorerModel train(const std::vector<LabeledScene>& train_data,
                  const std::vector<LabeledScene>& dev_data,
                  const TrainingConfig& config, TrainLog* log = nullptr);

// Argmax of the matching score over each utterance's candidate pool; ties
// resolve to the smaller distance, hence to self first.
GoldLinks predict_links(const ScorerModel& model, const Scene& scene,
                        std::size_t pool_size);
inline GoldLinks predict_links(const ScorerModel& model, const Scene& scene) {
  return predict_links(model, scene, model.features.pool_size);
}

// parent(u_i) = u_{i-1}; the first utterance self-links.
GoldLinks predict_previous_baseline(const Scene& scene);

// Fraction (in percent) of utterances whose gold parent is inside their
// candidate pool of the given size.
double pool_coverage(const std::vector<LabeledScene>& data,
                     std::size_t pool_size);

nlohmann::ordered_json model_to_json(const ScorerModel& model);
ScorerModel model_from_json(const nlohmann::json& j);

}  // namespace sthreads::linkmodel
