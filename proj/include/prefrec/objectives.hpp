#pragma once

#include <string>
#include <vector>

#include "prefrec/common.hpp"

namespace prefrec {

// The preference-alignment losses. `smooth` is the personalized-smoothing
// objective: cDPO with the pair's own oracle flip-rate in place of the
// global epsilon hyperparameter.
enum class ObjectiveKind { dpo, ipo, cdpo, rdpo, rpo, cpo, simpo, sdpo, smooth };

const char* objective_name(ObjectiveKind k);
ObjectiveKind objective_from_name(const std::string& s);

inline constexpr double kBetaGrid[] = {0.1, 0.2, 0.5, 1.0, 2.0};

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::smooth;
  double beta = 1.0;      // margin scale, searched over kBetaGrid
  double epsilon = 0.2;   // cDPO/rDPO flip rate, must be < 0.5
  double tau = 0.1;       // ipo
  double alpha = 0.2;     // rpo chosen-likelihood weight
  double lambda = 1.0;    // cpo NLL weight
  double gamma = 1.0;     // simpo target margin
  int n_negatives = 3;    // sdpo negative count (primary rejected included)

  void validate() const;
};

// Per-pair log-probabilities the losses consume; the reference entries are
// constants (frozen model) and never receive gradient.
struct LogProbBundle {
  double lp_w = 0.0;      // log pi_theta(y_w | x)
  double lp_l = 0.0;      // log pi_theta(y_l | x)
  double ref_lp_w = 0.0;  // log pi_ref(y_w | x)
  double ref_lp_l = 0.0;  // log pi_ref(y_l | x)
  int len_w = 1;          // response lengths; single items => 1
  int len_l = 1;
  std::vector<std::pair<double, double>> extra_negatives;  // (lp, ref_lp) per extra
};

struct BundleGrad {
  double d_lp_w = 0.0;
  double d_lp_l = 0.0;
  std::vector<double> d_extras;  // aligned with extra_negatives
};

// Bradley-Terry margin: beta*(lp_w - ref_lp_w) - beta*(lp_l - ref_lp_l).
double margin(const LogProbBundle& b, double beta);

// -ln(sigma(x)) computed without overflow for any finite x.
double neg_log_sigmoid(double x);
double sigmoid(double x);

// pair_epsilon is consulted only by `smooth`; cdpo/rdpo read
// config.epsilon.
double loss(const ObjectiveConfig& config, const LogProbBundle& b, double pair_epsilon);

// Exact partials of `loss` w.r.t. the policy log-probs.
BundleGrad loss_grad(const ObjectiveConfig& config, const LogProbBundle& b, double pair_epsilon);

}  // namespace prefrec
