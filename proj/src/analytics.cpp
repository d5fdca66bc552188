#include "sthreads/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sthreads/rng.hpp"
#include "sthreads/screenplay.hpp"
#include "tabular.hpp"

namespace sthreads::analytics {

namespace {

using nlohmann::ordered_json;
using tabular::split_row;
using tabular::trim;

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

int parse_year(const std::string& field, const std::string& where) {
  const std::string s = trim(field);
  int year = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), year);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("bad year \"" + field + "\" in " + where);
  if (year < 1900 || year > 2100)
    throw DataError("year " + std::to_string(year) + " out of range in " + where);
  return year;
}

// Shortest representation that parses back to the same double, always with a
// decimal point so plot columns read unambiguously as reals.
std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

double parse_real(const std::string& field, const std::string& where) {
  const std::string s = trim(field);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("bad number \"" + field + "\" in " + where);
  return v;
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted[0];
  double h = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Percentile bootstrap over title-level units. The statistic may return NaN
// for a degenerate resample (e.g. no gendered lines); those draws are
// dropped. Each resample runs off its own derived seed, so results do not
// depend on evaluation order.
Ci bootstrap_over_titles(
    std::size_t units, int resamples, std::uint64_t seed, double fallback,
    const std::function<double(const std::vector<std::size_t>&)>& stat) {
  if (resamples < 1) throw DataError("resamples must be positive");
  if (units == 0) return {fallback, fallback};
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(resamples));
  std::vector<std::size_t> sample(units);
  for (int r = 0; r < resamples; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    for (auto& slot : sample) slot = static_cast<std::size_t>(rng.below(units));
    double v = stat(sample);
    if (std::isfinite(v)) stats.push_back(v);
  }
  if (stats.empty()) return {fallback, fallback};
  std::sort(stats.begin(), stats.end());
  return {percentile(stats, 0.025), percentile(stats, 0.975)};
}

// Gendered floor-claiming counts pooled over a set of titles; percentages are
// NaN when the respective denominator is empty.
struct PooledFloor {
  double pct_threads = 0.0;
  double pct_lines = 0.0;
  bool valid = false;
};

PooledFloor pool_floor(const std::vector<TitleFloorStats>& titles,
                       const std::vector<std::size_t>& pick) {
  long threads_w = 0, threads_m = 0, lines_w = 0, lines_m = 0;
  for (std::size_t i : pick) {
    const TitleFloorStats& t = titles[i];
    threads_w += t.threads_by_women;
    threads_m += t.threads_by_men;
    lines_w += t.lines_by_women;
    lines_m += t.lines_by_men;
  }
  PooledFloor out;
  long thread_total = threads_w + threads_m;
  long line_total = lines_w + lines_m;
  if (thread_total == 0 || line_total == 0) return out;
  out.pct_threads = 100.0 * static_cast<double>(threads_w) /
                    static_cast<double>(thread_total);
  out.pct_lines =
      100.0 * static_cast<double>(lines_w) / static_cast<double>(line_total);
  out.valid = true;
  return out;
}

std::vector<std::size_t> identity_pick(std::size_t n) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  return all;
}

const TitleMetadata& require_meta(const MetadataMap& meta,
                                  const std::string& slug) {
  auto it = meta.find(slug);
  if (it == meta.end() || it->second.release_year == 0)
    throw MissingYear("no release year for title '" + slug + "'");
  return it->second;
}

ordered_json ci_json(const Ci& ci) {
  return ordered_json{{"lo", ci.lo}, {"hi", ci.hi}};
}

}  // namespace

Gender parse_gender(const std::string& code) {
  const std::string s = lower(trim(code));
  if (s == "1" || s == "woman") return Gender::woman;
  if (s == "2" || s == "man") return Gender::man;
  if (s == "0" || s == "unknown") return Gender::unknown;
  throw BadGenderCode("gender code \"" + code +
                      "\" is not one of 1/2/0 or woman/man/unknown");
}

std::string gender_name(Gender gender) {
  switch (gender) {
    case Gender::woman: return "woman";
    case Gender::man: return "man";
    case Gender::unknown: return "unknown";
  }
  return "unknown";
}

std::string normalize_speaker(const std::string& raw) {
  return screenplay::parse_cue(raw).speaker;
}

Gender TitleMetadata::gender_of(const std::string& speaker) const {
  auto it = character_gender.find(speaker);
  return it == character_gender.end() ? Gender::unknown : it->second;
}

MetadataMap ingest_metadata(std::istream& in) {
  MetadataMap out;
  std::string line;
  bool have_header = false;
  std::size_t col_slug = 0, col_year = 0, col_character = 0, col_gender = 0;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row_no;
    if (trim(line).empty()) continue;
    auto fields = split_row(line, ',');
    if (!have_header) {
      auto find = [&](const std::string& name) {
        for (std::size_t i = 0; i < fields.size(); ++i)
          if (trim(fields[i]) == name) return i;
        throw ColumnMissing("metadata header lacks column \"" + name + "\"");
      };
      col_slug = find("title_slug");
      col_year = find("year");
      col_character = find("character");
      col_gender = find("gender");
      have_header = true;
      continue;
    }
    const std::string where = "metadata row " + std::to_string(row_no);
    std::size_t need =
        std::max({col_slug, col_year, col_character, col_gender});
    if (fields.size() <= need) throw DataError(where + " is too short");
    const std::string slug = trim(fields[col_slug]);
    if (slug.empty()) throw DataError(where + " has an empty title_slug");
    int year = parse_year(fields[col_year], where);
    const std::string character = normalize_speaker(fields[col_character]);
    if (character.empty())
      throw DataError(where + " has an empty character name");
    Gender gender = parse_gender(fields[col_gender]);
    TitleMetadata& title = out[slug];
    if (title.title_slug.empty()) {
      title.title_slug = slug;
      title.release_year = year;
    } else if (title.release_year != year) {
      throw DataError("conflicting release years for title '" + slug + "'");
    }
    if (!title.character_gender.emplace(character, gender).second)
      throw DuplicateCharacter("character '" + character +
                               "' listed twice for title '" + slug + "'");
  }
  if (!have_header) throw DataError("metadata stream has no header row");
  return out;
}

MetadataMap ingest_metadata_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read metadata file '" + path + "'");
  return ingest_metadata(in);
}

TitleThreadStats title_thread_stats(const std::vector<SceneThreads>& scenes) {
  TitleThreadStats stats;
  for (const SceneThreads& scene : scenes) {
    std::set<std::string> labels;
    for (const std::string& id : scene.partition.order) {
      auto it = scene.partition.assignment.find(id);
      if (it == scene.partition.assignment.end())
        throw DataError("partition of scene '" + scene.partition.scene_id +
                        "' lacks an assignment for '" + id + "'");
      labels.insert(it->second);
    }
    stats.threads += static_cast<int>(labels.size());
    stats.utterances += static_cast<long>(scene.partition.order.size());
  }
  if (stats.threads > 0)
    stats.mean_length = static_cast<double>(stats.utterances) /
                        static_cast<double>(stats.threads);
  return stats;
}

TitleFloorStats title_floor_stats(const std::vector<SceneThreads>& scenes,
                                  const TitleMetadata& meta) {
  TitleFloorStats stats;
  for (const SceneThreads& scene : scenes) {
    std::map<std::string, const Utterance*> by_id;
    for (const Utterance& utt : scene.utterances) by_id[utt.utt_id] = &utt;
    // Thread starters: the first member of each label in position order.
    std::set<std::string> seen_labels;
    for (const std::string& id : scene.partition.order) {
      auto label = scene.partition.assignment.find(id);
      if (label == scene.partition.assignment.end())
        throw DataError("partition of scene '" + scene.partition.scene_id +
                        "' lacks an assignment for '" + id + "'");
      if (!seen_labels.insert(label->second).second) continue;
      auto utt = by_id.find(id);
      if (utt == by_id.end())
        throw ScenesMismatch("scene '" + scene.partition.scene_id +
                             "' has no utterance '" + id + "'");
      switch (meta.gender_of(utt->second->speaker)) {
        case Gender::woman: ++stats.threads_by_women; break;
        case Gender::man: ++stats.threads_by_men; break;
        case Gender::unknown: ++stats.threads_by_unknown; break;
      }
    }
    // Speaking time: each dialogue line counts once, whatever its sentence
    // count.
    std::set<std::string> seen_lines;
    for (const Utterance& utt : scene.utterances) {
      if (!seen_lines.insert(utt.line_id).second) continue;
      switch (meta.gender_of(utt.speaker)) {
        case Gender::woman: ++stats.lines_by_women; break;
        case Gender::man: ++stats.lines_by_men; break;
        case Gender::unknown: ++stats.lines_by_unknown; break;
      }
    }
  }
  return stats;
}

std::vector<EraBucket> thread_length_by_era(const Corpus& corpus,
                                            const MetadataMap& meta,
                                            int bucket_width, int resamples,
                                            std::uint64_t seed) {
  if (bucket_width < 1) throw DataError("bucket width must be positive");
  if (resamples < 1) throw DataError("resamples must be positive");
  std::map<int, std::vector<double>> means_by_bucket;
  for (const auto& [slug, scenes] : corpus) {
    const TitleMetadata& title = require_meta(meta, slug);
    TitleThreadStats stats = title_thread_stats(scenes);
    if (stats.threads == 0)
      throw DataError("title '" + slug + "' has no threads");
    int start = title.release_year - title.release_year % bucket_width;
    means_by_bucket[start].push_back(stats.mean_length);
  }
  std::vector<EraBucket> out;
  out.reserve(means_by_bucket.size());
  for (const auto& [start, means] : means_by_bucket) {
    EraBucket bucket;
    bucket.start_year = start;
    bucket.n_movies = static_cast<int>(means.size());
    double total = 0.0;
    for (double m : means) total += m;
    bucket.mean_thread_length = total / static_cast<double>(means.size());
    bucket.ci = bootstrap_over_titles(
        means.size(), resamples,
        mix_seed(seed, static_cast<std::uint64_t>(start)),
        bucket.mean_thread_length, [&](const std::vector<std::size_t>& pick) {
          double sum = 0.0;
          for (std::size_t i : pick) sum += means[i];
          return sum / static_cast<double>(pick.size());
        });
    bucket.ci.lo = std::min(bucket.ci.lo, bucket.mean_thread_length);
    bucket.ci.hi = std::max(bucket.ci.hi, bucket.mean_thread_length);
    out.push_back(bucket);
  }
  return out;
}

FloorClaimReport floor_claiming(const Corpus& corpus, const MetadataMap& meta,
                                int min_year, int resamples,
                                std::uint64_t seed) {
  if (resamples < 1) throw DataError("resamples must be positive");
  std::vector<TitleFloorStats> titles;
  std::map<int, std::vector<std::size_t>> titles_by_year;
  for (const auto& [slug, scenes] : corpus) {
    const TitleMetadata& title = require_meta(meta, slug);
    if (title.release_year < min_year) continue;
    titles.push_back(title_floor_stats(scenes, title));
    titles_by_year[title.release_year].push_back(titles.size() - 1);
  }

  FloorClaimReport report;
  report.n_titles = static_cast<int>(titles.size());
  if (titles.empty()) {
    report.warnings.push_back("no titles released in " +
                              std::to_string(min_year) + " or later");
    return report;
  }

  auto delta_of = [&](const std::vector<std::size_t>& pick) {
    PooledFloor pooled = pool_floor(titles, pick);
    if (!pooled.valid) return std::nan("");
    return pooled.pct_threads - pooled.pct_lines;
  };

  for (const auto& [year, members] : titles_by_year) {
    PooledFloor pooled = pool_floor(titles, members);
    if (!pooled.valid) {
      report.warnings.push_back("year " + std::to_string(year) +
                                " skipped: no gendered threads or lines");
      continue;
    }
    FloorClaimRecord record;
    record.year = year;
    record.pct_threads_started_by_women = pooled.pct_threads;
    record.pct_lines_by_women = pooled.pct_lines;
    record.delta = pooled.pct_threads - pooled.pct_lines;
    record.n_titles = static_cast<int>(members.size());
    record.ci = bootstrap_over_titles(
        members.size(), resamples,
        mix_seed(seed, static_cast<std::uint64_t>(year)), record.delta,
        [&](const std::vector<std::size_t>& pick) {
          std::vector<std::size_t> chosen(pick.size());
          for (std::size_t i = 0; i < pick.size(); ++i)
            chosen[i] = members[pick[i]];
          return delta_of(chosen);
        });
    report.by_year.push_back(record);
  }

  PooledFloor pooled = pool_floor(titles, identity_pick(titles.size()));
  if (!pooled.valid) {
    report.warnings.push_back(
        "pooled delta unavailable: no gendered threads or lines");
    return report;
  }
  report.pooled_pct_threads_started_by_women = pooled.pct_threads;
  report.pooled_pct_lines_by_women = pooled.pct_lines;
  report.pooled_delta_points = pooled.pct_threads - pooled.pct_lines;
  report.pooled_delta_fraction = report.pooled_delta_points / 100.0;
  report.pooled_ci = bootstrap_over_titles(
      titles.size(), resamples, mix_seed(seed, 0xF100Du),
      report.pooled_delta_points, delta_of);
  return report;
}

std::string emit_plot_data(const std::vector<EraBucket>& buckets) {
  if (buckets.empty()) throw EmptyDataset("no era buckets to emit");
  std::string out = "x,point,lo,hi,n\n";
  for (const EraBucket& b : buckets) {
    out += std::to_string(b.start_year) + ',' +
           format_real(b.mean_thread_length) + ',' + format_real(b.ci.lo) +
           ',' + format_real(b.ci.hi) + ',' + std::to_string(b.n_movies) +
           '\n';
  }
  return out;
}

std::string emit_plot_data(const std::vector<FloorClaimRecord>& records) {
  if (records.empty()) throw EmptyDataset("no floor-claiming records to emit");
  std::string out = "x,point,lo,hi,n\n";
  for (const FloorClaimRecord& r : records) {
    out += std::to_string(r.year) + ',' + format_real(r.delta) + ',' +
           format_real(r.ci.lo) + ',' + format_real(r.ci.hi) + ',' +
           std::to_string(r.n_titles) + '\n';
  }
  return out;
}

std::vector<PlotRow> read_plot_data(std::istream& in) {
  std::vector<PlotRow> rows;
  std::string line;
  bool have_header = false;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row_no;
    if (trim(line).empty()) continue;
    auto fields = split_row(line, ',');
    if (!have_header) {
      if (fields.size() < 4 || trim(fields[0]) != "x" ||
          trim(fields[1]) != "point" || trim(fields[2]) != "lo" ||
          trim(fields[3]) != "hi")
        throw DataError("plot data header must start with x,point,lo,hi");
      have_header = true;
      continue;
    }
    const std::string where = "plot data row " + std::to_string(row_no);
    if (fields.size() != 4 && fields.size() != 5)
      throw DataError(where + " must have 4 or 5 columns");
    PlotRow row;
    row.x = parse_real(fields[0], where);
    row.point = parse_real(fields[1], where);
    row.lo = parse_real(fields[2], where);
    row.hi = parse_real(fields[3], where);
    if (fields.size() == 5)
      row.n = static_cast<long>(parse_real(fields[4], where));
    rows.push_back(row);
  }
  if (!have_header) throw DataError("plot data stream has no header row");
  return rows;
}

std::string emit_era_report(const std::vector<EraBucket>& buckets,
                            const std::string& provenance) {
  ordered_json j;
  j["analysis"] = "thread_length_by_era";
  j["provenance"] = provenance;
  j["buckets"] = ordered_json::array();
  for (const EraBucket& b : buckets) {
    j["buckets"].push_back(ordered_json{{"start_year", b.start_year},
                                        {"mean_thread_length",
                                         b.mean_thread_length},
                                        {"ci", ci_json(b.ci)},
                                        {"n_movies", b.n_movies}});
  }
  return j.dump(2) + "\n";
}

std::string emit_floor_report(const FloorClaimReport& report,
                              const std::string& provenance) {
  ordered_json j;
  j["analysis"] = "floor_claiming";
  j["provenance"] = provenance;
  j["by_year"] = ordered_json::array();
  for (const FloorClaimRecord& r : report.by_year) {
    j["by_year"].push_back(ordered_json{
        {"year", r.year},
        {"pct_threads_started_by_women", r.pct_threads_started_by_women},
        {"pct_lines_by_women", r.pct_lines_by_women},
        {"delta", r.delta},
        {"ci", ci_json(r.ci)},
        {"n_titles", r.n_titles}});
  }
  j["pooled"] = ordered_json{
      {"pct_threads_started_by_women",
       report.pooled_pct_threads_started_by_women},
      {"pct_lines_by_women", report.pooled_pct_lines_by_women},
      {"delta_points", report.pooled_delta_points},
      {"delta_fraction", report.pooled_delta_fraction},
      {"ci", ci_json(report.pooled_ci)},
      {"n_titles", report.n_titles}};
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

}  // namespace sthreads::analytics
