#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "prefrec/common.hpp"

namespace prefrec {

inline constexpr int kHistoryLen = 10;
inline constexpr int kWindowLen = kHistoryLen + 1;
inline constexpr int kCandidateCount = 20;

// One timestamped user-item event.
struct Interaction {
  UserIdx user = -1;
  ItemIdx item = -1;
  int rating = 0;
  int64_t timestamp = 0;
};

// Item and user id interning. Item indices follow items-file order; user
// indices follow first appearance in the interactions file.
struct Catalog {
  std::vector<std::string> item_ids;
  std::vector<std::string> item_titles;
  std::unordered_map<std::string, ItemIdx> item_index;
  std::vector<std::string> user_ids;
  std::unordered_map<std::string, UserIdx> user_index;

  ItemIdx item(const std::string& id) const {
    auto it = item_index.find(id);
    if (it == item_index.end()) fail("unknown item id '" + id + "'");
    return it->second;
  }
  int num_items() const { return static_cast<int>(item_ids.size()); }
  int num_users() const { return static_cast<int>(user_ids.size()); }
  // FNV over item ids in order; stored in checkpoints to catch mismatched data dirs.
  uint64_t item_hash() const;
  // rank_by_id[i] = lexicographic rank of item_ids[i]; used for the
  // documented id tie-breaks in argmax/sorting.
  std::vector<int> rank_by_id() const;
};

struct Dataset {
  Catalog catalog;
  // Per user, sorted by timestamp (ties keep file order).
  std::vector<std::vector<Interaction>> events;

  int64_t total_interactions() const;
  // All distinct items a user ever interacted with, sorted by index.
  std::vector<ItemIdx> user_record(UserIdx u) const;
};

enum class Split { train, valid, test };

const char* split_name(Split s);
Split split_from_name(const std::string& s);

// Fixed-window next-item example: 10-item history, 1 target, 20 candidates.
struct SequenceExample {
  int64_t id = -1;  // position in the windowed ordering == line number in examples.tsv
  UserIdx user = -1;
  std::array<ItemIdx, kHistoryLen> history{};
  ItemIdx target = -1;
  std::vector<ItemIdx> candidates;  // filled by sample_candidates; includes target
  Split split = Split::train;
  int64_t label_ts = 0;
};

struct PopularityTable {
  std::vector<int64_t> counts;  // indexed by ItemIdx
  std::vector<double> log_pop;  // ln(1 + count)

  double log_pop_of(ItemIdx i) const {
    return i >= 0 && static_cast<size_t>(i) < log_pop.size() ? log_pop[static_cast<size_t>(i)]
                                                             : 0.0;
  }
};

// Reads the items file (TSV `item_id\ttitle`, header row) and the
// interactions file (TSV `user_id\titem_id\trating\ttimestamp`, header row),
// drops rows with rating < min_rating, and sorts each user's events by
// timestamp with file order breaking ties.
Dataset ingest(const std::filesystem::path& interactions_file,
               const std::filesystem::path& items_file, int min_rating);

// Every length-11 window of a user's chronological events becomes one
// example; examples are ordered by label timestamp and cut 8:1:1, with
// boundary-timestamp ties going to the earlier split so no test label
// precedes a train label. Users with fewer than
// max(min_user_interactions, 11) events contribute nothing.
std::vector<SequenceExample> window_and_split(const Dataset& dataset,
                                              int min_user_interactions = kWindowLen);

// Largest train-split label timestamp, or INT64_MAX when there are no
// train examples (then the whole event log counts as "train").
int64_t train_label_cutoff(const std::vector<SequenceExample>& examples);

// Fills example.candidates with the target plus 19 items drawn uniformly
// without replacement from catalog \ user_record, in a seeded random order.
void sample_candidates(SequenceExample& example, const std::vector<ItemIdx>& user_record,
                       int num_items, uint64_t rng_seed);

// Train-split interaction counts (timestamp <= train cutoff) and ln(1+count).
PopularityTable popularity(const Dataset& dataset, const std::vector<SequenceExample>& examples);

// Newline-delimited persistence: `split \t h1,..,h10 \t target \t c1,..,c20`.
std::string serialize_examples(const Catalog& catalog, const std::vector<SequenceExample>& examples);
std::vector<SequenceExample> parse_examples(const Catalog& catalog, const std::string& text,
                                            const std::filesystem::path& origin);

}  // namespace prefrec
