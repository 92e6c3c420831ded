#include "prefrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "prefrec/rng.hpp"
#include "prefrec/tsv.hpp"

namespace prefrec {

namespace {

constexpr double kLnEps = 1e-5;
constexpr int P = kHistoryLen;

size_t layout(Params& p) {
  const size_t d = static_cast<size_t>(p.cfg.dim);
  const size_t n = static_cast<size_t>(p.cfg.num_items);
  size_t cur = 0;
  auto next = [&](size_t count) {
    const size_t at = cur;
    cur += count;
    return at;
  };
  p.off_item_emb = next(n * d);
  p.off_pos_emb = next(static_cast<size_t>(P) * d);
  p.off_ln1_g = next(d);
  p.off_ln1_b = next(d);
  p.off_wq = next(d * d);
  p.off_wk = next(d * d);
  p.off_wv = next(d * d);
  p.off_wo = next(d * d);
  p.off_ln2_g = next(d);
  p.off_ln2_b = next(d);
  p.off_w1 = next(4 * d * d);
  p.off_fb1 = next(4 * d);
  p.off_w2 = next(d * 4 * d);
  p.off_fb2 = next(d);
  return cur;
}

// y[out_dim] = W[out_dim x in_dim] * x
void matvec(const double* W, const double* x, double* y, int out_dim, int in_dim) {
  for (int o = 0; o < out_dim; ++o) {
    const double* row = W + static_cast<size_t>(o) * static_cast<size_t>(in_dim);
    double acc = 0.0;
    for (int i = 0; i < in_dim; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// dW += dy ⊗ x ; dx += W^T dy
void matvec_backward(const double* W, const double* x, const double* dy, double* dW, double* dx,
                     int out_dim, int in_dim) {
  for (int o = 0; o < out_dim; ++o) {
    const double g = dy[o];
    const double* row = W + static_cast<size_t>(o) * static_cast<size_t>(in_dim);
    double* drow = dW + static_cast<size_t>(o) * static_cast<size_t>(in_dim);
    for (int i = 0; i < in_dim; ++i) {
      drow[i] += g * x[i];
      dx[i] += row[i] * g;
    }
  }
}

// y = gain ⊙ xhat + bias with xhat = (x - mean) / sqrt(var + eps); caches
// xhat and 1/sqrt(var+eps).
void layer_norm(const double* x, const double* gain, const double* bias, double* xhat, double* y,
                double* inv_out, int d) {
  double mean = 0.0;
  for (int i = 0; i < d; ++i) mean += x[i];
  mean /= d;
  double var = 0.0;
  for (int i = 0; i < d; ++i) {
    const double c = x[i] - mean;
    var += c * c;
  }
  var /= d;
  const double inv = 1.0 / std::sqrt(var + kLnEps);
  for (int i = 0; i < d; ++i) {
    xhat[i] = (x[i] - mean) * inv;
    y[i] = gain[i] * xhat[i] + bias[i];
  }
  *inv_out = inv;
}

// dx += inv * (dxhat - mean(dxhat) - xhat * mean(dxhat ⊙ xhat)),
// dgain += dy ⊙ xhat, dbias += dy, with dxhat = dy ⊙ gain.
void layer_norm_backward(const double* dy, const double* xhat, double inv, const double* gain,
                         double* dgain, double* dbias, double* dx, int d) {
  double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
  for (int i = 0; i < d; ++i) {
    const double dxh = dy[i] * gain[i];
    mean_dxhat += dxh;
    mean_dxhat_xhat += dxh * xhat[i];
  }
  mean_dxhat /= d;
  mean_dxhat_xhat /= d;
  for (int i = 0; i < d; ++i) {
    dgain[i] += dy[i] * xhat[i];
    dbias[i] += dy[i];
    const double dxh = dy[i] * gain[i];
    dx[i] += inv * (dxh - mean_dxhat - xhat[i] * mean_dxhat_xhat);
  }
}

void check_item(const Params& p, ItemIdx i, const char* where) {
  if (i < 0 || i >= p.cfg.num_items) {
    fail(std::string(where) + ": item index " + std::to_string(i) + " outside catalog of " +
         std::to_string(p.cfg.num_items));
  }
}

}  // namespace

Params Params::zeros(ModelConfig cfg) {
  Params p;
  p.cfg = cfg;
  const size_t total = layout(p);
  p.w.assign(total, 0.0);
  return p;
}

Params Params::init(ModelConfig cfg, uint64_t seed) {
  Params p = zeros(cfg);
  Rng rng(Rng::derive(seed, "params"));
  for (double& x : p.w) x = rng.gaussian(0.0, 0.02);
  const size_t d = static_cast<size_t>(cfg.dim);
  for (size_t i = 0; i < d; ++i) {
    p.w[p.off_ln1_g + i] = 1.0;
    p.w[p.off_ln1_b + i] = 0.0;
    p.w[p.off_ln2_g + i] = 1.0;
    p.w[p.off_ln2_b + i] = 0.0;
  }
  for (size_t i = 0; i < 4 * d; ++i) p.w[p.off_fb1 + i] = 0.0;
  for (size_t i = 0; i < d; ++i) p.w[p.off_fb2 + i] = 0.0;
  return p;
}

uint64_t Params::byte_hash() const {
  return fnv1a(std::string_view(reinterpret_cast<const char*>(w.data()), w.size() * sizeof(double)));
}

void Workspace::prepare(const ModelConfig& cfg) {
  if (dim == cfg.dim && !x.empty()) return;
  dim = cfg.dim;
  const size_t d = static_cast<size_t>(dim);
  x.assign(P * d, 0.0);
  xhat.assign(P * d, 0.0);
  a.assign(P * d, 0.0);
  inv_ln1.assign(P, 0.0);
  q.assign(d, 0.0);
  ctx.assign(d, 0.0);
  ao.assign(d, 0.0);
  r.assign(d, 0.0);
  rhat.assign(d, 0.0);
  bvec.assign(d, 0.0);
  f2.assign(d, 0.0);
  rep.assign(d, 0.0);
  kk.assign(P * d, 0.0);
  vv.assign(P * d, 0.0);
  logits.assign(P, 0.0);
  attw.assign(P, 0.0);
  f1.assign(4 * d, 0.0);
  f1r.assign(4 * d, 0.0);
  d_x.assign(P * d, 0.0);
  d_a.assign(P * d, 0.0);
  d_q.assign(d, 0.0);
  d_ctx.assign(d, 0.0);
  d_ao.assign(d, 0.0);
  d_r.assign(d, 0.0);
  d_b.assign(d, 0.0);
  d_rep.assign(d, 0.0);
  d_tmp.assign(d, 0.0);
  d_kk.assign(P * d, 0.0);
  d_vv.assign(P * d, 0.0);
  d_logits.assign(P, 0.0);
  d_attw.assign(P, 0.0);
  d_f1.assign(4 * d, 0.0);
}

void trunk_forward(const Params& p, std::span<const ItemIdx> history, Workspace& ws) {
  if (history.size() != P) fail("history must have exactly 10 items");
  ws.prepare(p.cfg);
  const int d = p.cfg.dim;
  const size_t sd = static_cast<size_t>(d);
  const double* w = p.w.data();

  for (int t = 0; t < P; ++t) {
    check_item(p, history[static_cast<size_t>(t)], "forward");
    const double* ie = p.item_emb(history[static_cast<size_t>(t)]);
    const double* pe = w + p.off_pos_emb + static_cast<size_t>(t) * sd;
    double* xt = ws.x.data() + static_cast<size_t>(t) * sd;
    for (int i = 0; i < d; ++i) xt[i] = ie[i] + pe[i];
    layer_norm(xt, w + p.off_ln1_g, w + p.off_ln1_b, ws.xhat.data() + static_cast<size_t>(t) * sd,
               ws.a.data() + static_cast<size_t>(t) * sd, &ws.inv_ln1[static_cast<size_t>(t)], d);
  }

  const double* a_last = ws.a.data() + static_cast<size_t>(P - 1) * sd;
  matvec(w + p.off_wq, a_last, ws.q.data(), d, d);
  for (int t = 0; t < P; ++t) {
    const double* at = ws.a.data() + static_cast<size_t>(t) * sd;
    matvec(w + p.off_wk, at, ws.kk.data() + static_cast<size_t>(t) * sd, d, d);
    matvec(w + p.off_wv, at, ws.vv.data() + static_cast<size_t>(t) * sd, d, d);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  double max_logit = -1e300;
  for (int t = 0; t < P; ++t) {
    const double* kt = ws.kk.data() + static_cast<size_t>(t) * sd;
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += ws.q[static_cast<size_t>(i)] * kt[i];
    ws.logits[static_cast<size_t>(t)] = dot * scale;
    max_logit = std::max(max_logit, ws.logits[static_cast<size_t>(t)]);
  }
  double denom = 0.0;
  for (int t = 0; t < P; ++t) {
    ws.attw[static_cast<size_t>(t)] = std::exp(ws.logits[static_cast<size_t>(t)] - max_logit);
    denom += ws.attw[static_cast<size_t>(t)];
  }
  for (int t = 0; t < P; ++t) ws.attw[static_cast<size_t>(t)] /= denom;

  std::fill(ws.ctx.begin(), ws.ctx.end(), 0.0);
  for (int t = 0; t < P; ++t) {
    const double wt = ws.attw[static_cast<size_t>(t)];
    const double* vt = ws.vv.data() + static_cast<size_t>(t) * sd;
    for (int i = 0; i < d; ++i) ws.ctx[static_cast<size_t>(i)] += wt * vt[i];
  }
  matvec(w + p.off_wo, ws.ctx.data(), ws.ao.data(), d, d);

  const double* x_last = ws.x.data() + static_cast<size_t>(P - 1) * sd;
  for (int i = 0; i < d; ++i) ws.r[static_cast<size_t>(i)] = x_last[i] + ws.ao[static_cast<size_t>(i)];

  layer_norm(ws.r.data(), w + p.off_ln2_g, w + p.off_ln2_b, ws.rhat.data(), ws.bvec.data(),
             &ws.inv_ln2, d);
  matvec(w + p.off_w1, ws.bvec.data(), ws.f1.data(), 4 * d, d);
  for (int i = 0; i < 4 * d; ++i) {
    ws.f1[static_cast<size_t>(i)] += p.w[p.off_fb1 + static_cast<size_t>(i)];
    ws.f1r[static_cast<size_t>(i)] = std::max(0.0, ws.f1[static_cast<size_t>(i)]);
  }
  matvec(w + p.off_w2, ws.f1r.data(), ws.f2.data(), d, 4 * d);
  for (int i = 0; i < d; ++i) {
    ws.f2[static_cast<size_t>(i)] += p.w[p.off_fb2 + static_cast<size_t>(i)];
    ws.rep[static_cast<size_t>(i)] = ws.r[static_cast<size_t>(i)] + ws.f2[static_cast<size_t>(i)];
  }
}

void score_items(const Params& p, Workspace& ws, std::span<const ItemIdx> items) {
  const int d = p.cfg.dim;
  ws.scores.resize(items.size());
  for (size_t j = 0; j < items.size(); ++j) {
    check_item(p, items[j], "score");
    const double* ie = p.item_emb(items[j]);
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += ws.rep[static_cast<size_t>(i)] * ie[i];
    ws.scores[j] = acc;
  }
}

void backward_from_scores(const Params& p, Workspace& ws, std::span<const ItemIdx> history,
                          std::span<const ItemIdx> items, std::span<const double> d_scores,
                          std::vector<double>& grad) {
  const int d = p.cfg.dim;
  const size_t sd = static_cast<size_t>(d);
  const double* w = p.w.data();
  double* g = grad.data();

  std::fill(ws.d_rep.begin(), ws.d_rep.end(), 0.0);
  for (size_t j = 0; j < items.size(); ++j) {
    const double ds = d_scores[j];
    if (ds == 0.0) continue;
    const double* ie = p.item_emb(items[j]);
    double* die = g + p.off_item_emb + static_cast<size_t>(items[j]) * sd;
    for (int i = 0; i < d; ++i) {
      ws.d_rep[static_cast<size_t>(i)] += ds * ie[i];
      die[i] += ds * ws.rep[static_cast<size_t>(i)];
    }
  }

  // rep = r + f2
  std::copy(ws.d_rep.begin(), ws.d_rep.end(), ws.d_r.begin());

  // f2 = W2 f1r + fb2
  std::fill(ws.d_f1.begin(), ws.d_f1.end(), 0.0);
  for (int o = 0; o < d; ++o) {
    const double dy = ws.d_rep[static_cast<size_t>(o)];
    g[p.off_fb2 + static_cast<size_t>(o)] += dy;
  }
  matvec_backward(w + p.off_w2, ws.f1r.data(), ws.d_rep.data(), g + p.off_w2, ws.d_f1.data(), d,
                  4 * d);

  // relu + f1 = W1 b + fb1
  for (int i = 0; i < 4 * d; ++i) {
    if (ws.f1[static_cast<size_t>(i)] <= 0.0) ws.d_f1[static_cast<size_t>(i)] = 0.0;
    g[p.off_fb1 + static_cast<size_t>(i)] += ws.d_f1[static_cast<size_t>(i)];
  }
  std::fill(ws.d_b.begin(), ws.d_b.end(), 0.0);
  matvec_backward(w + p.off_w1, ws.bvec.data(), ws.d_f1.data(), g + p.off_w1, ws.d_b.data(), 4 * d,
                  d);

  // b = LN2(r)
  layer_norm_backward(ws.d_b.data(), ws.rhat.data(), ws.inv_ln2, w + p.off_ln2_g,
                      g + p.off_ln2_g, g + p.off_ln2_b, ws.d_r.data(), d);

  // r = x_last + ao
  std::fill(ws.d_x.begin(), ws.d_x.end(), 0.0);
  double* dx_last = ws.d_x.data() + static_cast<size_t>(P - 1) * sd;
  for (int i = 0; i < d; ++i) {
    dx_last[i] += ws.d_r[static_cast<size_t>(i)];
    ws.d_ao[static_cast<size_t>(i)] = ws.d_r[static_cast<size_t>(i)];
  }

  // ao = Wo ctx
  std::fill(ws.d_ctx.begin(), ws.d_ctx.end(), 0.0);
  matvec_backward(w + p.off_wo, ws.ctx.data(), ws.d_ao.data(), g + p.off_wo, ws.d_ctx.data(), d, d);

  // ctx = sum attw_t v_t
  double sum_dw_w = 0.0;
  for (int t = 0; t < P; ++t) {
    const double* vt = ws.vv.data() + static_cast<size_t>(t) * sd;
    double dw = 0.0;
    for (int i = 0; i < d; ++i) dw += ws.d_ctx[static_cast<size_t>(i)] * vt[i];
    ws.d_attw[static_cast<size_t>(t)] = dw;
    sum_dw_w += dw * ws.attw[static_cast<size_t>(t)];
    double* dvt = ws.d_vv.data() + static_cast<size_t>(t) * sd;
    const double wt = ws.attw[static_cast<size_t>(t)];
    for (int i = 0; i < d; ++i) dvt[i] = wt * ws.d_ctx[static_cast<size_t>(i)];
  }

  // softmax
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::fill(ws.d_q.begin(), ws.d_q.end(), 0.0);
  for (int t = 0; t < P; ++t) {
    const double dlogit =
        ws.attw[static_cast<size_t>(t)] * (ws.d_attw[static_cast<size_t>(t)] - sum_dw_w);
    const double* kt = ws.kk.data() + static_cast<size_t>(t) * sd;
    double* dkt = ws.d_kk.data() + static_cast<size_t>(t) * sd;
    for (int i = 0; i < d; ++i) {
      ws.d_q[static_cast<size_t>(i)] += dlogit * kt[i] * scale;
      dkt[i] = dlogit * ws.q[static_cast<size_t>(i)] * scale;
    }
  }

  // q/k/v projections
  std::fill(ws.d_a.begin(), ws.d_a.end(), 0.0);
  const double* a_last = ws.a.data() + static_cast<size_t>(P - 1) * sd;
  matvec_backward(w + p.off_wq, a_last, ws.d_q.data(),
                  g + p.off_wq, ws.d_a.data() + static_cast<size_t>(P - 1) * sd, d, d);
  for (int t = 0; t < P; ++t) {
    const double* at = ws.a.data() + static_cast<size_t>(t) * sd;
    double* dat = ws.d_a.data() + static_cast<size_t>(t) * sd;
    matvec_backward(w + p.off_wk, at, ws.d_kk.data() + static_cast<size_t>(t) * sd, g + p.off_wk,
                    dat, d, d);
    matvec_backward(w + p.off_wv, at, ws.d_vv.data() + static_cast<size_t>(t) * sd, g + p.off_wv,
                    dat, d, d);
  }

  // LN1 per position, then embeddings
  for (int t = 0; t < P; ++t) {
    layer_norm_backward(ws.d_a.data() + static_cast<size_t>(t) * sd,
                        ws.xhat.data() + static_cast<size_t>(t) * sd,
                        ws.inv_ln1[static_cast<size_t>(t)], w + p.off_ln1_g, g + p.off_ln1_g,
                        g + p.off_ln1_b, ws.d_x.data() + static_cast<size_t>(t) * sd, d);
    const double* dxt = ws.d_x.data() + static_cast<size_t>(t) * sd;
    double* die = g + p.off_item_emb + static_cast<size_t>(history[static_cast<size_t>(t)]) * sd;
    double* dpe = g + p.off_pos_emb + static_cast<size_t>(t) * sd;
    for (int i = 0; i < d; ++i) {
      die[i] += dxt[i];
      dpe[i] += dxt[i];
    }
  }
}

std::vector<double> forward_scores(const Params& p, std::span<const ItemIdx> history,
                                   std::span<const ItemIdx> candidates, Workspace& ws) {
  trunk_forward(p, history, ws);
  score_items(p, ws, candidates);
  return ws.scores;
}

double log_sum_exp(std::span<const double> v) {
  double mx = -1e300;
  for (double x : v) mx = std::max(mx, x);
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

double log_prob(const Params& p, const SequenceExample& example, ItemIdx item, Workspace& ws) {
  size_t idx = example.candidates.size();
  for (size_t j = 0; j < example.candidates.size(); ++j) {
    if (example.candidates[j] == item) {
      idx = j;
      break;
    }
  }
  if (idx == example.candidates.size()) {
    fail("log_prob: item " + std::to_string(item) + " is not a candidate of example " +
         std::to_string(example.id));
  }
  const auto scores = forward_scores(p, example.history, example.candidates, ws);
  return scores[idx] - log_sum_exp(scores);
}

double sft_loss_and_grad(const Params& p, std::span<const SequenceExample> batch,
                         std::vector<double>& grad, Workspace& ws) {
  if (batch.empty()) fail("sft_loss_and_grad: empty batch");
  grad.assign(p.w.size(), 0.0);
  double loss = 0.0;
  std::vector<double> d_scores;
  for (const auto& ex : batch) {
    trunk_forward(p, ex.history, ws);
    score_items(p, ws, ex.candidates);
    const double lse = log_sum_exp(ws.scores);
    size_t target_idx = ex.candidates.size();
    d_scores.resize(ws.scores.size());
    for (size_t j = 0; j < ex.candidates.size(); ++j) {
      if (ex.candidates[j] == ex.target) target_idx = j;
      d_scores[j] = std::exp(ws.scores[j] - lse);  // softmax
    }
    if (target_idx == ex.candidates.size()) {
      fail("sft_loss_and_grad: target missing from candidates of example " +
           std::to_string(ex.id));
    }
    loss += lse - ws.scores[target_idx];
    d_scores[target_idx] -= 1.0;
    backward_from_scores(p, ws, ex.history, ex.candidates, d_scores, grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& gv : grad) gv *= inv;
  return loss * inv;
}

void AdamState::prepare(size_t n) {
  if (m.size() != n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
  }
}

void adam_step(Params& p, const std::vector<double>& grad, AdamState& state, double lr) {
  if (grad.size() != p.w.size()) fail("adam_step: gradient size mismatch");
  state.prepare(p.w.size());
  for (double gv : grad) {
    if (!std::isfinite(gv)) fail("adam_step: non-finite gradient");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
  for (size_t i = 0; i < p.w.size(); ++i) {
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grad[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    p.w[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::sft: return "sft";
    case Stage::po: return "po";
    case Stage::oracle: return "oracle";
  }
  return "?";
}

Stage stage_from_name(const std::string& s) {
  if (s == "sft") return Stage::sft;
  if (s == "po") return Stage::po;
  if (s == "oracle") return Stage::oracle;
  fail("unknown stage '" + s + "'");
}

namespace {
constexpr char kMagic[8] = {'P', 'R', 'E', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, size_t& pos, const std::filesystem::path& path) {
  if (pos + sizeof(T) > in.size()) fail("truncated checkpoint: " + path.string());
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(params.cfg.dim));
  put<uint32_t>(out, static_cast<uint32_t>(P));
  put<uint32_t>(out, static_cast<uint32_t>(params.cfg.num_items));
  put<uint64_t>(out, params.w.size());
  out.append(reinterpret_cast<const char*>(params.w.data()), params.w.size() * sizeof(double));

  nlohmann::json meta;
  meta["stage"] = stage_name(stage);
  meta["seed"] = seed;
  meta["steps"] = steps;
  meta["catalog_hash"] = to_hex(catalog_hash);
  const std::string meta_str = meta.dump();
  put<uint64_t>(out, meta_str.size());
  out += meta_str;
  write_file_atomic(path, out);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  size_t pos = 0;
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    fail("not a checkpoint file: " + path.string());
  }
  pos = sizeof(kMagic);
  const auto version = take<uint32_t>(in, pos, path);
  if (version != kVersion) {
    fail("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  }
  Checkpoint ck;
  ck.params.cfg.dim = static_cast<int>(take<uint32_t>(in, pos, path));
  const auto hist = take<uint32_t>(in, pos, path);
  if (hist != static_cast<uint32_t>(P)) fail("checkpoint history length mismatch");
  ck.params.cfg.num_items = static_cast<int>(take<uint32_t>(in, pos, path));
  const auto count = take<uint64_t>(in, pos, path);
  ck.params = Params::zeros(ck.params.cfg);
  if (count != ck.params.w.size()) fail("checkpoint parameter count mismatch: " + path.string());
  if (pos + count * sizeof(double) > in.size()) fail("truncated checkpoint: " + path.string());
  std::memcpy(ck.params.w.data(), in.data() + pos, count * sizeof(double));
  pos += count * sizeof(double);

  const auto meta_len = take<uint64_t>(in, pos, path);
  if (pos + meta_len > in.size()) fail("truncated checkpoint metadata: " + path.string());
  const auto meta = nlohmann::json::parse(in.substr(pos, meta_len), nullptr, false);
  if (meta.is_discarded()) fail("bad checkpoint metadata JSON: " + path.string());
  ck.stage = stage_from_name(meta.at("stage").get<std::string>());
  ck.seed = meta.at("seed").get<uint64_t>();
  ck.steps = meta.at("steps").get<int64_t>();
  if (meta.contains("catalog_hash")) {
    ck.catalog_hash = std::stoull(meta.at("catalog_hash").get<std::string>(), nullptr, 16);
  }
  return ck;
}

}  // namespace prefrec
