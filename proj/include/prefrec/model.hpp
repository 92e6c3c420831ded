#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "prefrec/dataset.hpp"

namespace prefrec {

// Next-item scorer: embedded 10-item history through one pre-norm
// single-head attention + feed-forward block; the last position's output is
// the sequence representation, and an item's score is its embedding dotted
// with that representation. Small enough that backprop is written by hand
// and checked against finite differences.
struct ModelConfig {
  int dim = 64;
  int num_items = 0;
};

struct Params {
  ModelConfig cfg;
  std::vector<double> w;  // flat parameter vector, layout below

  // Flat layout (also the checkpoint serialization order):
  //   item_emb [num_items x d], pos_emb [10 x d],
  //   ln1_gain [d], ln1_bias [d],
  //   wq [d x d], wk [d x d], wv [d x d], wo [d x d],
  //   ln2_gain [d], ln2_bias [d],
  //   w1 [4d x d], fb1 [4d], w2 [d x 4d], fb2 [d]
  size_t off_item_emb = 0, off_pos_emb = 0, off_ln1_g = 0, off_ln1_b = 0;
  size_t off_wq = 0, off_wk = 0, off_wv = 0, off_wo = 0;
  size_t off_ln2_g = 0, off_ln2_b = 0;
  size_t off_w1 = 0, off_fb1 = 0, off_w2 = 0, off_fb2 = 0;

  static Params zeros(ModelConfig cfg);
  // Seeded Gaussian std 0.02 everywhere except layer-norm gains (1) and all
  // biases (0).
  static Params init(ModelConfig cfg, uint64_t seed);

  double* item_emb(ItemIdx i) {
    return w.data() + off_item_emb + static_cast<size_t>(i) * static_cast<size_t>(cfg.dim);
  }
  const double* item_emb(ItemIdx i) const {
    return w.data() + off_item_emb + static_cast<size_t>(i) * static_cast<size_t>(cfg.dim);
  }
  uint64_t byte_hash() const;
};

// Forward caches for one example, reused across examples to avoid
// allocation in the training loop.
struct Workspace {
  void prepare(const ModelConfig& cfg);

  int dim = 0;
  std::vector<double> x, xhat, a;     // 10 x d each
  std::vector<double> inv_ln1;        // 10
  std::vector<double> q, ctx, ao, r, rhat, bvec, f2, rep;  // d each
  double inv_ln2 = 0.0;
  std::vector<double> kk, vv;         // 10 x d each
  std::vector<double> logits, attw;   // 10 each
  std::vector<double> f1, f1r;        // 4d each
  std::vector<double> scores;

  // backward scratch
  std::vector<double> d_x, d_a;       // 10 x d
  std::vector<double> d_q, d_ctx, d_ao, d_r, d_b, d_rep, d_tmp;  // d
  std::vector<double> d_kk, d_vv;     // 10 x d
  std::vector<double> d_logits, d_attw;  // 10
  std::vector<double> d_f1;           // 4d
};

// Runs the trunk over the history and caches every intermediate in ws.
void trunk_forward(const Params& p, std::span<const ItemIdx> history, Workspace& ws);

// Scores items against the cached representation (ws.scores is resized).
void score_items(const Params& p, Workspace& ws, std::span<const ItemIdx> items);

// Exact backprop from dL/dscore into a flat gradient (accumulated, not
// overwritten). ws must hold the caches of the matching forward pass.
void backward_from_scores(const Params& p, Workspace& ws, std::span<const ItemIdx> history,
                          std::span<const ItemIdx> items, std::span<const double> d_scores,
                          std::vector<double>& grad);

std::vector<double> forward_scores(const Params& p, std::span<const ItemIdx> history,
                                   std::span<const ItemIdx> candidates, Workspace& ws);

double log_sum_exp(std::span<const double> v);

// log softmax(scores)[idx] over the example's candidate set.
double log_prob(const Params& p, const SequenceExample& example, ItemIdx item, Workspace& ws);

// Mean negative log-likelihood of the targets over the batch; grad is
// overwritten with the batch-mean gradient.
double sft_loss_and_grad(const Params& p, std::span<const SequenceExample> batch,
                         std::vector<double>& grad, Workspace& ws);

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;
  void prepare(size_t n);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Standard bias-corrected Adam. Rejects non-finite gradients before any
// parameter is touched.
void adam_step(Params& p, const std::vector<double>& grad, AdamState& state, double lr);

enum class Stage { sft, po, oracle };
const char* stage_name(Stage s);
Stage stage_from_name(const std::string& s);

// Little-endian binary checkpoint: magic, version, dims, raw parameter
// array in the documented order, then a trailing UTF-8 JSON metadata block.
struct Checkpoint {
  Params params;
  Stage stage = Stage::sft;
  uint64_t seed = 0;
  int64_t steps = 0;
  uint64_t catalog_hash = 0;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace prefrec
