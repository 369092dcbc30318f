#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "guardian/autograd.hpp"
#include "guardian/graph.hpp"
#include "guardian/param_store.hpp"
#include "guardian/rng.hpp"

namespace guardian::detector {

using graph::AgentId;
using graph::MergedHistory;
using numerics::ParamStore;
using numerics::Tape;
using numerics::Tensor2D;
using numerics::Var;

enum class Variant { temporal, static_graph };

/// gamma = lambda / (1 + lambda * beta): weight of the compression term once the
/// reconstruction loss stands in for the relevance term.
double gib_gamma(double lambda, double beta);

struct DetectorConfig {
  std::size_t k = 64;       // input feature width
  std::size_t d = 32;       // latent width
  std::size_t hidden = 0;   // first GCN layer width; 0 means 2d
  std::size_t heads = 1;    // temporal attention heads, must divide d
  double alpha = 0.4;
  double beta = 1.0;
  double lambda = 0.01;
  double lr = 0.01;
  std::size_t epochs_initial = 50;
  std::size_t epochs_incremental = 10;
  std::uint64_t seed = 1;
  Variant variant = Variant::temporal;
  // Rounds of history fed to the encoder; 0 keeps all. The static variant always uses 1.
  std::size_t history_window = 0;
  bool positional_encoding = true;

  double gamma() const { return gib_gamma(lambda, beta); }
  /// Chooses lambda so that gamma() equals g for the current beta.
  void set_gamma(double g);
  std::size_t hidden_width() const { return hidden == 0 ? 2 * d : hidden; }
  std::size_t effective_window() const { return variant == Variant::static_graph ? 1 : history_window; }
  void validate() const;
};

struct LossBreakdown {
  double l_att = 0.0;
  double l_stru = 0.0;
  double l_rec = 0.0;
  double kl = 0.0;
  double l_total = 0.0;

  static LossBreakdown compose(double l_att, double l_stru, double kl, double alpha, double gamma);
};

/// Decoder outputs for the final round of a batch.
struct Reconstruction {
  std::vector<AgentId> agents;
  Tensor2D features;    // X_T
  Tensor2D observed;    // self-looped symmetric adjacency of round T
  Tensor2D x_hat;       // reconstructed attributes
  Tensor2D edge_probs;  // p_ij
  Tensor2D r_x;         // features - x_hat
  Tensor2D r_e;         // observed - edge_probs
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, const std::string& detail);
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

// --- building blocks -------------------------------------------------------

/// Glorot-uniform weights and zero biases for every entry the model uses.
void init_params(ParamStore& params, const DetectorConfig& cfg, Rng& rng);

/// H1 = ReLU(A X W0), H2 = A H1 W1. No activation on the last layer.
Var gcn_forward(Var features, Var norm_adj, Var w0, Var w1);
Var gcn_forward(Tape& tape, const Tensor2D& features, const Tensor2D& norm_adj, ParamStore& params);

struct LatentState {
  Var mean;
  Var log_variance;  // clamped to [-10, 10]
  Var sample;
};

inline constexpr double kLogVarianceBound = 10.0;

/// Splits a 2d-wide encoder output into mean and clamped log-variance.
LatentState split_latent(Var hidden, std::size_t d);
/// mean + exp(log_variance / 2) * N(0, 1) when rng is given, else mean.
Var reparameterize(Var mean, Var log_variance, Rng* rng);
/// 0.5 * sum(exp(lv) + mu^2 - 1 - lv) / rows
Var kl_term(Var mean, Var log_variance);
double kl_term(const Tensor2D& mean, const Tensor2D& log_variance);

/// Sinusoidal encoding of a single position, 1 x d.
Tensor2D positional_encoding(int position, std::size_t d);

struct FusionOptions {
  std::size_t heads = 1;
  bool positional_encoding = true;
};

struct TemporalFusion {
  Var fused;                      // |V_T| x d
  std::vector<AgentId> agents;    // row order of `fused`
  std::vector<Tensor2D> weights;  // per agent: heads x (rounds present)
};

/// Per-agent self-attention across rounds; the query is the agent's final
/// round. Positional encodings enter the query and key paths only, so a
/// single round reduces to the value projection of Z_1.
TemporalFusion temporal_fuse(const std::vector<Var>& latents, const MergedHistory& batch,
                             ParamStore& params, const FusionOptions& opts);

/// relu(z W1 + b1) W2 + b2
Var decode_attributes(Var z, ParamStore& params);
/// z z^T; edge probabilities are sigmoid of these.
Var structure_logits(Var z);
Tensor2D decode_structure(const Tensor2D& z);

LossBreakdown compute_losses(const Tensor2D& features, const Tensor2D& observed_adj,
                             const Reconstruction& recon, double kl, const DetectorConfig& cfg);

// --- model -----------------------------------------------------------------

struct ForwardPass {
  Var l_att;
  Var l_stru;
  Var kl;
  Var l_rec;
  Var l_total;
  Var x_hat;
  Var logits;
  TemporalFusion fusion;
  std::vector<LatentState> latents;

  LossBreakdown breakdown() const;
};

class GuardianDetector {
 public:
  explicit GuardianDetector(DetectorConfig cfg);
  GuardianDetector(DetectorConfig cfg, ParamStore params);

  const DetectorConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Records the whole objective on `tape`. A null rng disables sampling.
  ForwardPass forward(Tape& tape, const MergedHistory& batch, Rng* rng);

  /// Full-batch Adam on l_total. Returns the losses seen at each epoch.
  std::vector<LossBreakdown> fit(const MergedHistory& batch, std::size_t epochs, Rng& rng);

  /// Deterministic losses with sampling disabled.
  LossBreakdown evaluate(const MergedHistory& batch);
  Reconstruction reconstruct(const MergedHistory& batch);

  /// Snapshots the detector will actually read from a batch.
  MergedHistory restrict(const MergedHistory& batch) const;

 private:
  DetectorConfig cfg_;
  ParamStore params_;
};

inline constexpr const char* kCheckpointMagic = "GUARDIAN-CKPT-1";

void save_checkpoint(std::ostream& os, const GuardianDetector& det);
GuardianDetector load_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const GuardianDetector& det);
GuardianDetector load_checkpoint(const std::string& path);

}  // namespace guardian::detector
