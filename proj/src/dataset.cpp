#include "prefrec/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "prefrec/rng.hpp"
#include "prefrec/tsv.hpp"

namespace prefrec {

uint64_t Catalog::item_hash() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto& id : item_ids) {
    h = fnv1a(id, h);
    h = fnv1a("\n", h);
  }
  return h;
}

std::vector<int> Catalog::rank_by_id() const {
  std::vector<int> order(item_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return item_ids[a] < item_ids[b]; });
  std::vector<int> rank(item_ids.size());
  for (size_t r = 0; r < order.size(); ++r) rank[static_cast<size_t>(order[r])] = static_cast<int>(r);
  return rank;
}

int64_t Dataset::total_interactions() const {
  int64_t n = 0;
  for (const auto& ev : events) n += static_cast<int64_t>(ev.size());
  return n;
}

std::vector<ItemIdx> Dataset::user_record(UserIdx u) const {
  std::vector<ItemIdx> rec;
  for (const auto& e : events[static_cast<size_t>(u)]) rec.push_back(e.item);
  std::sort(rec.begin(), rec.end());
  rec.erase(std::unique(rec.begin(), rec.end()), rec.end());
  return rec;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  fail("unknown split name '" + s + "'");
}

namespace {

void check_id_charset(const std::string& id, const std::filesystem::path& file, int64_t line_no) {
  for (char c : id) {
    if (c == ',' || c == ' ' || c == '\t') {
      fail(file.string() + ":" + std::to_string(line_no) +
           ": id '" + id + "' contains whitespace or comma");
    }
  }
  if (id.empty()) fail(file.string() + ":" + std::to_string(line_no) + ": empty id");
}

}  // namespace

Dataset ingest(const std::filesystem::path& interactions_file,
               const std::filesystem::path& items_file, int min_rating) {
  Dataset ds;

  for_each_tsv_row(items_file, [&](const TsvRow& row) {
    if (row.line_no == 1) {
      if (row.fields.size() < 2 || row.fields[0] != "item_id") {
        fail(items_file.string() + ":1: expected header 'item_id\\ttitle'");
      }
      return;
    }
    if (row.fields.size() != 2) {
      fail(items_file.string() + ":" + std::to_string(row.line_no) + ": expected 2 columns, got " +
           std::to_string(row.fields.size()));
    }
    check_id_charset(row.fields[0], items_file, row.line_no);
    if (ds.catalog.item_index.count(row.fields[0])) {
      fail(items_file.string() + ":" + std::to_string(row.line_no) + ": duplicate item id '" +
           row.fields[0] + "'");
    }
    ds.catalog.item_index.emplace(row.fields[0], static_cast<ItemIdx>(ds.catalog.item_ids.size()));
    ds.catalog.item_ids.push_back(row.fields[0]);
    ds.catalog.item_titles.push_back(row.fields[1]);
  });

  std::unordered_set<uint64_t> seen_events;
  for_each_tsv_row(interactions_file, [&](const TsvRow& row) {
    if (row.line_no == 1) {
      if (row.fields.size() != 4 || row.fields[0] != "user_id" || row.fields[1] != "item_id" ||
          row.fields[2] != "rating" || row.fields[3] != "timestamp") {
        fail(interactions_file.string() +
             ":1: expected header 'user_id\\titem_id\\trating\\ttimestamp'");
      }
      return;
    }
    if (row.fields.size() != 4) {
      fail(interactions_file.string() + ":" + std::to_string(row.line_no) +
           ": expected 4 columns, got " + std::to_string(row.fields.size()));
    }
    check_id_charset(row.fields[0], interactions_file, row.line_no);
    auto item_it = ds.catalog.item_index.find(row.fields[1]);
    if (item_it == ds.catalog.item_index.end()) {
      fail(interactions_file.string() + ":" + std::to_string(row.line_no) + ": unknown item id '" +
           row.fields[1] + "'");
    }
    const int rating =
        static_cast<int>(parse_int(row.fields[2], interactions_file, row.line_no, "rating"));
    const int64_t ts = parse_int(row.fields[3], interactions_file, row.line_no, "timestamp");
    if (ts < 0) {
      fail(interactions_file.string() + ":" + std::to_string(row.line_no) +
           ": negative timestamp");
    }

    UserIdx user;
    auto user_it = ds.catalog.user_index.find(row.fields[0]);
    if (user_it == ds.catalog.user_index.end()) {
      user = static_cast<UserIdx>(ds.catalog.user_ids.size());
      ds.catalog.user_index.emplace(row.fields[0], user);
      ds.catalog.user_ids.push_back(row.fields[0]);
      ds.events.emplace_back();
    } else {
      user = user_it->second;
    }

    uint64_t key = fnv1a(row.fields[0]);
    key = fnv1a("\x1f", key);
    key = fnv1a(row.fields[1], key);
    key = fnv1a("\x1f" + row.fields[3], key);
    if (!seen_events.insert(key).second) {
      fail(interactions_file.string() + ":" + std::to_string(row.line_no) +
           ": duplicate (user, item, timestamp) event");
    }

    if (rating < min_rating) return;
    ds.events[static_cast<size_t>(user)].push_back(
        Interaction{user, item_it->second, rating, ts});
  });

  for (auto& ev : ds.events) {
    std::stable_sort(ev.begin(), ev.end(),
                     [](const Interaction& a, const Interaction& b) {
                       return a.timestamp < b.timestamp;
                     });
  }
  return ds;
}

std::vector<SequenceExample> window_and_split(const Dataset& dataset, int min_user_interactions) {
  const int min_events = std::max(min_user_interactions, kWindowLen);
  std::vector<SequenceExample> out;

  for (UserIdx u = 0; u < dataset.catalog.num_users(); ++u) {
    const auto& ev = dataset.events[static_cast<size_t>(u)];
    if (static_cast<int>(ev.size()) < min_events) continue;
    for (size_t start = 0; start + kWindowLen <= ev.size(); ++start) {
      SequenceExample ex;
      ex.user = u;
      for (int t = 0; t < kHistoryLen; ++t) ex.history[static_cast<size_t>(t)] = ev[start + static_cast<size_t>(t)].item;
      const Interaction& label = ev[start + kHistoryLen];
      ex.target = label.item;
      ex.label_ts = label.timestamp;
      out.push_back(std::move(ex));
    }
  }

  // Global chronological order by label timestamp; user/window order only
  // disambiguates equal timestamps so the output is a total order.
  std::vector<size_t> order(out.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return out[a].label_ts < out[b].label_ts;
  });
  std::vector<SequenceExample> sorted;
  sorted.reserve(out.size());
  for (size_t idx : order) sorted.push_back(std::move(out[idx]));

  const size_t n = sorted.size();
  size_t c1 = n * 8 / 10;
  size_t c2 = n * 9 / 10;
  // Boundary ties go to the earlier split; keeps the ratio approximate but
  // guarantees max(train ts) < min(valid ts) and likewise for test.
  while (c1 > 0 && c1 < n && sorted[c1].label_ts == sorted[c1 - 1].label_ts) ++c1;
  if (c2 < c1) c2 = c1;
  while (c2 > 0 && c2 < n && sorted[c2].label_ts == sorted[c2 - 1].label_ts) ++c2;

  for (size_t i = 0; i < n; ++i) {
    sorted[i].id = static_cast<int64_t>(i);
    sorted[i].split = i < c1 ? Split::train : (i < c2 ? Split::valid : Split::test);
  }
  return sorted;
}

int64_t train_label_cutoff(const std::vector<SequenceExample>& examples) {
  int64_t cutoff = std::numeric_limits<int64_t>::min();
  bool any = false;
  for (const auto& ex : examples) {
    if (ex.split == Split::train) {
      any = true;
      cutoff = std::max(cutoff, ex.label_ts);
    }
  }
  return any ? cutoff : std::numeric_limits<int64_t>::max();
}

void sample_candidates(SequenceExample& example, const std::vector<ItemIdx>& user_record,
                       int num_items, uint64_t rng_seed) {
  // Eligible pool: the whole catalog minus everything the user ever touched
  // (the target re-enters explicitly).
  std::vector<ItemIdx> eligible;
  eligible.reserve(static_cast<size_t>(num_items));
  size_t rp = 0;
  for (ItemIdx i = 0; i < num_items; ++i) {
    while (rp < user_record.size() && user_record[rp] < i) ++rp;
    if (rp < user_record.size() && user_record[rp] == i) continue;
    eligible.push_back(i);
  }
  if (static_cast<int>(eligible.size()) < kCandidateCount - 1) {
    fail("catalog too small to sample " + std::to_string(kCandidateCount - 1) +
         " non-interacted candidates (eligible: " + std::to_string(eligible.size()) + ")");
  }

  Rng rng(rng_seed);
  // Partial Fisher-Yates: first 19 slots become the draw.
  for (int k = 0; k < kCandidateCount - 1; ++k) {
    const size_t j = static_cast<size_t>(k) + static_cast<size_t>(rng.below(eligible.size() - static_cast<size_t>(k)));
    std::swap(eligible[static_cast<size_t>(k)], eligible[j]);
  }
  example.candidates.assign(eligible.begin(), eligible.begin() + (kCandidateCount - 1));
  example.candidates.push_back(example.target);
  rng.shuffle(example.candidates);
}

PopularityTable popularity(const Dataset& dataset, const std::vector<SequenceExample>& examples) {
  const int64_t cutoff = train_label_cutoff(examples);
  PopularityTable table;
  table.counts.assign(static_cast<size_t>(dataset.catalog.num_items()), 0);
  for (const auto& ev : dataset.events) {
    for (const auto& e : ev) {
      if (e.timestamp <= cutoff) ++table.counts[static_cast<size_t>(e.item)];
    }
  }
  table.log_pop.resize(table.counts.size());
  for (size_t i = 0; i < table.counts.size(); ++i) {
    table.log_pop[i] = std::log1p(static_cast<double>(table.counts[i]));
  }
  return table;
}

std::string serialize_examples(const Catalog& catalog, const std::vector<SequenceExample>& examples) {
  std::string out;
  std::vector<std::string> parts;
  for (const auto& ex : examples) {
    out += split_name(ex.split);
    out += '\t';
    parts.clear();
    for (ItemIdx h : ex.history) parts.push_back(catalog.item_ids[static_cast<size_t>(h)]);
    out += join_commas(parts);
    out += '\t';
    out += catalog.item_ids[static_cast<size_t>(ex.target)];
    out += '\t';
    parts.clear();
    for (ItemIdx c : ex.candidates) parts.push_back(catalog.item_ids[static_cast<size_t>(c)]);
    out += join_commas(parts);
    out += '\n';
  }
  return out;
}

std::vector<SequenceExample> parse_examples(const Catalog& catalog, const std::string& text,
                                            const std::filesystem::path& origin) {
  std::vector<SequenceExample> out;
  size_t pos = 0;
  int64_t line_no = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      const size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() != 4) {
      fail(origin.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
    }

    SequenceExample ex;
    ex.id = static_cast<int64_t>(out.size());
    ex.split = split_from_name(cols[0]);
    const auto hist = split_commas(cols[1]);
    if (hist.size() != kHistoryLen) {
      fail(origin.string() + ":" + std::to_string(line_no) + ": history must have 10 items");
    }
    for (size_t t = 0; t < hist.size(); ++t) ex.history[t] = catalog.item(hist[t]);
    ex.target = catalog.item(cols[2]);
    for (const auto& c : split_commas(cols[3])) ex.candidates.push_back(catalog.item(c));
    if (ex.candidates.size() != kCandidateCount) {
      fail(origin.string() + ":" + std::to_string(line_no) + ": expected 20 candidates");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace prefrec
