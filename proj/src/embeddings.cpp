#include "prefrec/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "prefrec/rng.hpp"
#include "prefrec/tsv.hpp"

namespace prefrec {

namespace {

void normalize_row(double* v, int dim, const std::string& item_id) {
  double norm2 = 0.0;
  for (int j = 0; j < dim; ++j) norm2 += v[j] * v[j];
  if (!(norm2 > 0.0) || !std::isfinite(norm2)) {
    fail("embedding for item '" + item_id + "' has zero or non-finite norm");
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (int j = 0; j < dim; ++j) v[j] *= inv;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

EmbeddingStore::EmbeddingStore(int dim, std::vector<double> vectors, std::vector<int> id_rank)
    : dim_(dim), vectors_(std::move(vectors)), id_rank_(std::move(id_rank)) {}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path, const Catalog& catalog) {
  const size_t n = static_cast<size_t>(catalog.num_items());
  int dim = 0;
  std::vector<double> vectors;
  std::vector<char> seen(n, 0);

  const std::string text = read_file(path);
  size_t pos = 0;
  int64_t line_no = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto fields = split_ws(line);
    if (fields.size() < 2) {
      fail(path.string() + ":" + std::to_string(line_no) + ": expected item_id plus floats");
    }
    if (dim == 0) {
      dim = static_cast<int>(fields.size()) - 1;
      vectors.assign(n * static_cast<size_t>(dim), 0.0);
    } else if (static_cast<int>(fields.size()) - 1 != dim) {
      fail(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
           " floats, got " + std::to_string(fields.size() - 1));
    }
    const ItemIdx item = catalog.item(fields[0]);
    if (seen[static_cast<size_t>(item)]) {
      fail(path.string() + ":" + std::to_string(line_no) + ": duplicate row for item '" +
           fields[0] + "'");
    }
    seen[static_cast<size_t>(item)] = 1;
    double* row = vectors.data() + static_cast<size_t>(item) * static_cast<size_t>(dim);
    for (int j = 0; j < dim; ++j) {
      row[j] = parse_double(fields[static_cast<size_t>(j) + 1], path, line_no, "embedding value");
    }
    normalize_row(row, dim, fields[0]);
  }

  for (size_t i = 0; i < n; ++i) {
    if (!seen[i]) fail("embedding file missing vector for item '" + catalog.item_ids[i] + "'");
  }
  if (dim == 0) fail("embedding file is empty: " + path.string());
  return EmbeddingStore(dim, std::move(vectors), catalog.rank_by_id());
}

EmbeddingStore EmbeddingStore::cooccurrence_fallback(const Dataset& dataset,
                                                     int64_t train_cutoff_ts, int dim,
                                                     uint64_t seed) {
  const size_t n = static_cast<size_t>(dataset.catalog.num_items());
  if (dim <= 0) fail("embedding dim must be positive");

  // Symmetric co-occurrence: item pairs within 10 positions of each other in
  // a user's train-period sequence.
  std::map<std::pair<ItemIdx, ItemIdx>, double> cells;
  for (const auto& ev : dataset.events) {
    for (size_t a = 0; a < ev.size(); ++a) {
      if (ev[a].timestamp > train_cutoff_ts) break;
      const size_t stop = std::min(ev.size(), a + 1 + kHistoryLen);
      for (size_t b = a + 1; b < stop; ++b) {
        if (ev[b].timestamp > train_cutoff_ts) break;
        ItemIdx i = ev[a].item, j = ev[b].item;
        if (i == j) continue;
        if (i > j) std::swap(i, j);
        cells[{i, j}] += 1.0;
      }
    }
  }

  // CSR of the symmetric matrix.
  std::vector<std::vector<std::pair<ItemIdx, double>>> rows(n);
  for (const auto& [key, v] : cells) {
    rows[static_cast<size_t>(key.first)].emplace_back(key.second, v);
    rows[static_cast<size_t>(key.second)].emplace_back(key.first, v);
  }

  const size_t k = static_cast<size_t>(std::min<int>(dim, static_cast<int>(n)));
  Rng rng(Rng::derive(seed, "embed-fallback"));
  std::vector<double> basis(n * k);
  for (double& x : basis) x = rng.gaussian(0.0, 1.0);

  auto orthonormalize = [&]() {
    for (size_t c = 0; c < k; ++c) {
      for (size_t p = 0; p < c; ++p) {
        double dot = 0.0;
        for (size_t r = 0; r < n; ++r) dot += basis[r * k + c] * basis[r * k + p];
        for (size_t r = 0; r < n; ++r) basis[r * k + c] -= dot * basis[r * k + p];
      }
      double norm2 = 0.0;
      for (size_t r = 0; r < n; ++r) norm2 += basis[r * k + c] * basis[r * k + c];
      if (norm2 < 1e-24) {
        // Degenerate column; reseed it deterministically.
        for (size_t r = 0; r < n; ++r) basis[r * k + c] = rng.gaussian(0.0, 1.0);
        norm2 = 0.0;
        for (size_t r = 0; r < n; ++r) norm2 += basis[r * k + c] * basis[r * k + c];
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (size_t r = 0; r < n; ++r) basis[r * k + c] *= inv;
    }
  };

  orthonormalize();
  std::vector<double> next(n * k);
  for (int iter = 0; iter < 40; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (size_t r = 0; r < n; ++r) {
      for (const auto& [c, v] : rows[r]) {
        const double* src = basis.data() + static_cast<size_t>(c) * k;
        double* dst = next.data() + r * k;
        for (size_t q = 0; q < k; ++q) dst[q] += v * src[q];
      }
    }
    basis.swap(next);
    orthonormalize();
  }

  // Row coordinates in the converged subspace; relative cosines between rows
  // are invariant to the basis rotation, so no small eigensolve is needed.
  std::vector<double> vectors(n * static_cast<size_t>(dim), 0.0);
  for (size_t r = 0; r < n; ++r) {
    double* dst = vectors.data() + r * static_cast<size_t>(dim);
    double norm2 = 0.0;
    for (size_t q = 0; q < k; ++q) {
      dst[q] = basis[r * k + q];
      norm2 += dst[q] * dst[q];
    }
    if (norm2 < 1e-20) {
      // Item never co-occurs in the train period; give it a seeded unit
      // vector so the coverage invariant still holds.
      Rng row_rng(Rng::derive(seed, "embed-orphan", r));
      norm2 = 0.0;
      for (int q = 0; q < dim; ++q) {
        dst[q] = row_rng.gaussian(0.0, 1.0);
        norm2 += dst[q] * dst[q];
      }
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (int q = 0; q < dim; ++q) dst[q] *= inv;
  }
  return EmbeddingStore(dim, std::move(vectors), dataset.catalog.rank_by_id());
}

std::vector<double> EmbeddingStore::history_mean(std::span<const ItemIdx> history) const {
  if (history.empty()) fail("history_similarity needs a nonempty history");
  std::vector<double> mean(static_cast<size_t>(dim_), 0.0);
  for (ItemIdx h : history) {
    if (h < 0 || h >= num_items()) fail("history item index out of range");
    const auto v = vec(h);
    for (int j = 0; j < dim_; ++j) mean[static_cast<size_t>(j)] += v[static_cast<size_t>(j)];
  }
  const double inv = 1.0 / static_cast<double>(history.size());
  for (double& x : mean) x *= inv;
  return mean;
}

double EmbeddingStore::history_similarity(std::span<const ItemIdx> history, ItemIdx item) const {
  if (item < 0 || item >= num_items()) fail("history_similarity: item index out of range");
  const auto mean = history_mean(history);
  const auto v = vec(item);
  double dot = 0.0;
  for (int j = 0; j < dim_; ++j) dot += mean[static_cast<size_t>(j)] * v[static_cast<size_t>(j)];
  return dot;
}

ItemIdx EmbeddingStore::most_similar_item(std::span<const ItemIdx> history,
                                          std::span<const ItemIdx> excluded) const {
  const auto mean = history_mean(history);
  ItemIdx best = -1;
  double best_sim = 0.0;
  size_t xp = 0;
  for (ItemIdx i = 0; i < num_items(); ++i) {
    while (xp < excluded.size() && excluded[xp] < i) ++xp;
    if (xp < excluded.size() && excluded[xp] == i) continue;
    const auto v = vec(i);
    double sim = 0.0;
    for (int j = 0; j < dim_; ++j) sim += mean[static_cast<size_t>(j)] * v[static_cast<size_t>(j)];
    if (best < 0 || sim > best_sim ||
        (sim == best_sim && id_rank_[static_cast<size_t>(i)] < id_rank_[static_cast<size_t>(best)])) {
      best = i;
      best_sim = sim;
    }
  }
  if (best < 0) fail("most_similar_item: no eligible items");
  return best;
}

std::vector<ItemIdx> EmbeddingStore::semantic_hard_candidates(const SequenceExample& example,
                                                              std::span<const ItemIdx> user_record,
                                                              int k, uint64_t rng_seed) const {
  if (k < 1) fail("semantic_hard_candidates: k must be >= 1");
  const auto mean = history_mean(std::span<const ItemIdx>(example.history));

  struct Scored {
    ItemIdx item;
    double sim;
  };
  std::vector<Scored> scored;
  size_t rp = 0;
  for (ItemIdx i = 0; i < num_items(); ++i) {
    while (rp < user_record.size() && user_record[rp] < i) ++rp;
    if (rp < user_record.size() && user_record[rp] == i) continue;
    const auto v = vec(i);
    double sim = 0.0;
    for (int j = 0; j < dim_; ++j) sim += mean[static_cast<size_t>(j)] * v[static_cast<size_t>(j)];
    scored.push_back({i, sim});
  }
  if (static_cast<int>(scored.size()) < k - 1) {
    fail("semantic_hard_candidates: only " + std::to_string(scored.size()) +
         " eligible items for k = " + std::to_string(k));
  }
  std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return id_rank_[static_cast<size_t>(a.item)] < id_rank_[static_cast<size_t>(b.item)];
  });

  std::vector<ItemIdx> out;
  out.reserve(static_cast<size_t>(k));
  for (int j = 0; j < k - 1; ++j) out.push_back(scored[static_cast<size_t>(j)].item);
  out.push_back(example.target);
  Rng rng(rng_seed);
  rng.shuffle(out);
  return out;
}

std::string EmbeddingStore::serialize(const Catalog& catalog) const {
  std::string out;
  for (ItemIdx i = 0; i < num_items(); ++i) {
    out += catalog.item_ids[static_cast<size_t>(i)];
    const auto v = vec(i);
    for (int j = 0; j < dim_; ++j) {
      out += '\t';
      out += format_fixed(v[static_cast<size_t>(j)], 9);
    }
    out += '\n';
  }
  return out;
}

}  // namespace prefrec
