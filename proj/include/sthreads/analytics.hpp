#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sthreads/types.hpp"

// Corpus-level studies over thread labelings joined with title metadata:
// average thread length across five-year eras, and the floor-claiming
// analysis comparing how often women start threads with how much they speak.

namespace sthreads::analytics {

enum class Gender { woman, man, unknown };

// Accepts the TMDb-style numeric codes (1 = woman, 2 = man, 0 = unknown) or
// the spelled-out names, case-insensitively. Anything else is a
// BadGenderCode.
Gender parse_gender(const std::string& code);
std::string gender_name(Gender gender);

// Character names in metadata are normalized exactly like the screenplay
// parser normalizes cue names, so joins against parsed speakers are exact.
std::string normalize_speaker(const std::string& raw);

struct TitleMetadata {
  std::string title_slug;
  int release_year = 0;
  std::map<std::string, Gender> character_gender;

  // Speakers missing from the map count as unknown.
  Gender gender_of(const std::string& speaker) const;
};

using MetadataMap = std::map<std::string, TitleMetadata>;

// CSV with a header row naming {title_slug, year, character, gender}.
MetadataMap ingest_metadata(std::istream& in);
MetadataMap ingest_metadata_file(const std::string& path);

// One scene's thread labeling joined with its utterances in position order.
// Analyses that only need thread sizes may leave `utterances` empty.
struct SceneThreads {
  ThreadPartition partition;
  std::vector<Utterance> utterances;
};

// Keyed by title_slug; a title contributes all of its scenes.
using Corpus = std::map<std::string, std::vector<SceneThreads>>;

struct Ci {
  double lo = 0.0;
  double hi = 0.0;
};

struct EraBucket {
  int start_year = 0;               // multiple of the bucket width
  double mean_thread_length = 0.0;  // mean over titles of per-title means
  Ci ci;                            // 95% bootstrap over titles
  int n_movies = 0;
};

struct FloorClaimRecord {
  int year = 0;
  double pct_threads_started_by_women = 0.0;
  double pct_lines_by_women = 0.0;
  double delta = 0.0;  // started minus lines, in percentage points
  Ci ci;               // 95% bootstrap of delta over titles within the year
  int n_titles = 0;
};

struct FloorClaimReport {
  std::vector<FloorClaimRecord> by_year;  // ascending year
  double pooled_pct_threads_started_by_women = 0.0;
  double pooled_pct_lines_by_women = 0.0;
  double pooled_delta_points = 0.0;    // percentage points
  double pooled_delta_fraction = 0.0;  // the same delta on the 0..1 scale
  Ci pooled_ci;                        // percentage points, over all titles
  int n_titles = 0;
  std::vector<std::string> warnings;
};

// Per-title building blocks, exposed for reports and property checks.
struct TitleThreadStats {
  int threads = 0;
  long utterances = 0;
  double mean_length = 0.0;  // utterances per thread
};
TitleThreadStats title_thread_stats(const std::vector<SceneThreads>& scenes);

// Thread starters are the earliest member of each thread; speaking time is
// counted in dialogue lines (each line once, however many sentences it has).
struct TitleFloorStats {
  long threads_by_women = 0;
  long threads_by_men = 0;
  long threads_by_unknown = 0;
  long lines_by_women = 0;
  long lines_by_men = 0;
  long lines_by_unknown = 0;
};
TitleFloorStats title_floor_stats(const std::vector<SceneThreads>& scenes,
                                  const TitleMetadata& meta);

std::vector<EraBucket> thread_length_by_era(const Corpus& corpus,
                                            const MetadataMap& meta,
                                            int bucket_width = 5,
                                            int resamples = 1000,
                                            std::uint64_t seed = 42);

// Titles released before min_year are ignored. Years whose titles carry no
// gendered threads or lines are skipped with a warning. Percentages pool
// counts across the year's titles; unknown-gender speakers are excluded from
// numerator and denominator alike.
FloorClaimReport floor_claiming(const Corpus& corpus, const MetadataMap& meta,
                                int min_year = 1980, int resamples = 1000,
                                std::uint64_t seed = 42);

// Plot-ready CSV: a header then one "x,point,lo,hi,n" row per bucket/record.
std::string emit_plot_data(const std::vector<EraBucket>& buckets);
std::string emit_plot_data(const std::vector<FloorClaimRecord>& records);

struct PlotRow {
  double x = 0.0;
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  long n = -1;  // -1 when the column is absent
};
std::vector<PlotRow> read_plot_data(std::istream& in);

// JSON reports. `provenance` records which labeling produced the threads
// ("gold" or "predicted") and is stamped into every report.
std::string emit_era_report(const std::vector<EraBucket>& buckets,
                            const std::string& provenance);
std::string emit_floor_report(const FloorClaimReport& report,
                              const std::string& provenance);

}  // namespace sthreads::analytics
