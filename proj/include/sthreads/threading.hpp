#pragma once

#include <string>
#include <vector>

#include "sthreads/types.hpp"

namespace sthreads::threading {

// Transitive closure of the reply graph: two utterances share a label iff
// they are connected. Labels are assigned in order of the first member's
// position. Throws NotAForest on a missing parent or a cycle.
ThreadPartition links_to_partition(const GoldLinks& links);

// Inverse up to link shape: within each thread, every utterance points at
// the thread's previous member and the earliest member self-links. Feeding
// the result back through links_to_partition reproduces the partition.
GoldLinks partition_to_links_previousstyle(const ThreadPartition& partition);

struct Violation {
  enum class Kind { orphan, forward, cycle, unknown_parent, foreign };
  Kind kind;
  std::string utt_id;
  std::string detail;
};

// Structural checks for a link map against its scene: every utterance has
// exactly one parent entry, parents never follow their children, and the
// graph is acyclic. Violations are reported, never thrown.
std::vector<Violation> validate_links(const GoldLinks& links,
                                      const Scene& scene);

struct ThreadInfo {
  std::string label;
  std::size_t size = 0;
  std::string start_utt_id;
  std::string start_speaker;
};

struct ThreadStats {
  std::string scene_id;
  std::vector<ThreadInfo> threads;
  double mean_length = 0.0;
};

// Sizes, start utterance (minimum position) and its speaker, per thread.
ThreadStats thread_stats(const ThreadPartition& partition, const Scene& scene);

// One JSON object per scene, mirroring ThreadStats.
std::string emit_thread_stats(const std::vector<ThreadStats>& stats);

}  // namespace sthreads::threading
