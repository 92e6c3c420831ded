#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "prefrec/dataset.hpp"

namespace prefrec {

// Per-item semantic vectors, L2-normalized at load so cosine similarity is a
// plain dot product. Immutable after construction.
class EmbeddingStore {
 public:
  // TSV rows: item_id followed by dim whitespace-separated floats; dim is
  // inferred from the first row. Every catalog item must have a row.
  static EmbeddingStore load(const std::filesystem::path& path, const Catalog& catalog);

  // Deterministic fallback when no embedding file is supplied: row
  // coordinates of a truncated spectral decomposition of the item-item
  // co-occurrence matrix built from train-period events.
  static EmbeddingStore cooccurrence_fallback(const Dataset& dataset, int64_t train_cutoff_ts,
                                              int dim, uint64_t seed);

  int dim() const { return dim_; }
  int num_items() const { return static_cast<int>(id_rank_.size()); }
  std::span<const double> vec(ItemIdx i) const {
    return {vectors_.data() + static_cast<size_t>(i) * static_cast<size_t>(dim_),
            static_cast<size_t>(dim_)};
  }

  // Mean cosine similarity between the item and each history entry.
  double history_similarity(std::span<const ItemIdx> history, ItemIdx item) const;

  // Argmax of history_similarity over the catalog minus `excluded`
  // (sorted index list); similarity ties break to the smaller item id.
  ItemIdx most_similar_item(std::span<const ItemIdx> history,
                            std::span<const ItemIdx> excluded) const;

  // Target plus the k-1 most history-similar items outside `user_record`,
  // in a seeded random order.
  std::vector<ItemIdx> semantic_hard_candidates(const SequenceExample& example,
                                                std::span<const ItemIdx> user_record, int k,
                                                uint64_t rng_seed) const;

  std::string serialize(const Catalog& catalog) const;

 private:
  EmbeddingStore(int dim, std::vector<double> vectors, std::vector<int> id_rank);

  // Mean history vector; cosine-to-history of any item is then one dot product.
  std::vector<double> history_mean(std::span<const ItemIdx> history) const;

  int dim_ = 0;
  std::vector<double> vectors_;  // num_items x dim, row-major, unit rows
  std::vector<int> id_rank_;    // lexicographic rank of each item's id
};

}  // namespace prefrec
