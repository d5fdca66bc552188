#include "sthreads/threading.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"

namespace sthreads::threading {

ThreadPartition links_to_partition(const GoldLinks& links) {
  ThreadPartition part;
  part.scene_id = links.scene_id;
  part.order = links.order;
  // Resolve every utterance to its root, memoized, with cycle detection.
  std::map<std::string, std::string> root;
  for (const auto& id : links.order) {
    std::vector<std::string> trail;
    std::set<std::string> seen;
    std::string cur = id;
    while (true) {
      if (root.count(cur)) {
        cur = root[cur];
        break;
      }
      if (!seen.insert(cur).second)
        throw NotAForest("cycle through utterance " + cur + " in scene " +
                         links.scene_id);
      auto it = links.parent.find(cur);
      if (it == links.parent.end())
        throw NotAForest("utterance " + cur + " has no parent entry in scene " +
                         links.scene_id);
      trail.push_back(cur);
      if (it->second == cur) break;
      cur = it->second;
    }
    for (const auto& node : trail) root[node] = cur;
  }
  std::map<std::string, std::string> label_of_root;
  int next = 0;
  for (const auto& id : links.order) {
    const std::string& r = root.at(id);
    auto [it, fresh] = label_of_root.emplace(r, "");
    if (fresh) it->second = "T" + std::to_string(++next);
    part.assignment[id] = it->second;
  }
  return part;
}

GoldLinks partition_to_links_previousstyle(const ThreadPartition& partition) {
  GoldLinks links;
  links.scene_id = partition.scene_id;
  links.order = partition.order;
  std::map<std::string, std::string> last_member;  // label -> utt id
  for (const auto& id : partition.order) {
    const std::string& label = partition.assignment.at(id);
    auto it = last_member.find(label);
    if (it == last_member.end()) {
      links.parent[id] = id;
      last_member.emplace(label, id);
    } else {
      links.parent[id] = it->second;
      it->second = id;
    }
  }
  return links;
}

std::vector<Violation> validate_links(const GoldLinks& links,
                                      const Scene& scene) {
  std::vector<Violation> out;
  std::map<std::string, int> position;
  for (const Utterance* utt : scene.utterances())
    position[utt->utt_id] = utt->position;
  for (const auto& [id, pos] : position) {
    if (!links.parent.count(id))
      out.push_back({Violation::Kind::orphan, id, "no parent entry"});
  }
  for (const auto& [id, parent] : links.parent) {
    auto child = position.find(id);
    if (child == position.end()) {
      out.push_back(
          {Violation::Kind::foreign, id, "entry for unknown utterance"});
      continue;
    }
    auto par = position.find(parent);
    if (par == position.end()) {
      out.push_back({Violation::Kind::unknown_parent, id,
                     "parent " + parent + " is not in the scene"});
      continue;
    }
    if (par->second > child->second)
      out.push_back({Violation::Kind::forward, id,
                     "parent " + parent + " follows its child"});
  }
  // Cycle sweep over entries that passed the lookups above.
  std::set<std::string> safe;
  for (const auto& [id, parent] : links.parent) {
    if (!position.count(id)) continue;
    std::set<std::string> seen;
    std::string cur = id;
    bool cycle = false;
    while (!safe.count(cur)) {
      if (!seen.insert(cur).second) {
        cycle = true;
        break;
      }
      auto it = links.parent.find(cur);
      if (it == links.parent.end() || it->second == cur) break;
      cur = it->second;
    }
    if (cycle)
      out.push_back({Violation::Kind::cycle, id, "reply cycle"});
    else
      safe.insert(seen.begin(), seen.end());
  }
  return out;
}

ThreadStats thread_stats(const ThreadPartition& partition, const Scene& scene) {
  ThreadStats stats;
  stats.scene_id = partition.scene_id;
  std::map<std::string, const Utterance*> utt_of;
  for (const Utterance* utt : scene.utterances()) utt_of[utt->utt_id] = utt;
  std::map<std::string, std::size_t> index_of_label;
  for (const auto& id : partition.order) {
    const std::string& label = partition.assignment.at(id);
    auto [it, fresh] = index_of_label.emplace(label, stats.threads.size());
    if (fresh) {
      ThreadInfo info;
      info.label = label;
      stats.threads.push_back(std::move(info));
    }
    ThreadInfo& info = stats.threads[it->second];
    ++info.size;
    auto found = utt_of.find(id);
    const Utterance* utt = found == utt_of.end() ? nullptr : found->second;
    if (info.start_utt_id.empty() ||
        (utt && utt_of.count(info.start_utt_id) &&
         utt->position < utt_of[info.start_utt_id]->position)) {
      info.start_utt_id = id;
      info.start_speaker = utt ? utt->speaker : "";
    }
  }
  std::size_t total = 0;
  for (const auto& info : stats.threads) total += info.size;
  stats.mean_length = stats.threads.empty()
                          ? 0.0
                          : static_cast<double>(total) /
                                static_cast<double>(stats.threads.size());
  return stats;
}

std::string emit_thread_stats(const std::vector<ThreadStats>& stats) {
  std::string out;
  for (const ThreadStats& scene : stats) {
    nlohmann::ordered_json j;
    j["scene_id"] = scene.scene_id;
    j["threads"] = nlohmann::ordered_json::array();
    for (const ThreadInfo& info : scene.threads) {
      nlohmann::ordered_json t;
      t["label"] = info.label;
      t["size"] = info.size;
      t["start_utt_id"] = info.start_utt_id;
      t["start_speaker"] = info.start_speaker;
      j["threads"].push_back(std::move(t));
    }
    j["mean_length"] = scene.mean_length;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace sthreads::threading
