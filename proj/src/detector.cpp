#include "guardian/detector.hpp"

#include <cmath>
#include <sstream>

namespace guardian::detector {

namespace nx = guardian::numerics;

double gib_gamma(double lambda, double beta) {
  if (lambda < 0.0 || beta < 0.0) throw std::invalid_argument("gib_gamma: negative argument");
  return lambda / (1.0 + lambda * beta);
}

void DetectorConfig::set_gamma(double g) {
  if (g < 0.0 || g * beta >= 1.0) {
    throw std::invalid_argument("DetectorConfig::set_gamma: need 0 <= gamma < 1/beta");
  }
  lambda = g / (1.0 - g * beta);
}

void DetectorConfig::validate() const {
  if (k == 0 || d == 0) throw std::invalid_argument("DetectorConfig: k and d must be positive");
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument("DetectorConfig: heads must divide d");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("DetectorConfig: alpha in [0,1]");
  if (!(beta > 0.0)) throw std::invalid_argument("DetectorConfig: beta must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("DetectorConfig: lambda must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("DetectorConfig: lr must be positive");
}

LossBreakdown LossBreakdown::compose(double l_att, double l_stru, double kl, double alpha,
                                     double gamma) {
  LossBreakdown b;
  b.l_att = l_att;
  b.l_stru = l_stru;
  b.kl = kl;
  b.l_rec = alpha * l_att + (1.0 - alpha) * l_stru;
  b.l_total = b.l_rec + gamma * kl;
  return b;
}

namespace {

std::string describe(const LossBreakdown& b) {
  std::ostringstream os;
  os << "l_att=" << b.l_att << " l_stru=" << b.l_stru << " kl=" << b.kl << " l_rec=" << b.l_rec
     << " l_total=" << b.l_total;
  return os.str();
}

Tensor2D glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor2D w(fan_in, fan_out);
  for (double& v : w.values()) v = dist(rng);
  return w;
}

}  // namespace

TrainingError::TrainingError(std::size_t epoch, const std::string& detail)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + detail),
      epoch_(epoch) {}

void init_params(ParamStore& params, const DetectorConfig& cfg, Rng& rng) {
  const std::size_t h = cfg.hidden_width();
  params.add("gcn.w0", glorot(cfg.k, h, rng));
  params.add("gcn.w1", glorot(h, 2 * cfg.d, rng));
  params.add("attn.wq", glorot(cfg.d, cfg.d, rng));
  params.add("attn.wk", glorot(cfg.d, cfg.d, rng));
  params.add("attn.wv", glorot(cfg.d, cfg.d, rng));
  params.add("dec.w1", glorot(cfg.d, cfg.d, rng));
  params.add("dec.b1", Tensor2D(1, cfg.d));
  params.add("dec.w2", glorot(cfg.d, cfg.k, rng));
  params.add("dec.b2", Tensor2D(1, cfg.k));
}

Var gcn_forward(Var features, Var norm_adj, Var w0, Var w1) {
  if (norm_adj.rows() != norm_adj.cols() || norm_adj.rows() != features.rows()) {
    throw nx::ShapeError("gcn_forward: adjacency " + norm_adj.value().shape_string() +
                         " does not match features " + features.value().shape_string());
  }
  if (features.cols() != w0.rows()) {
    throw nx::ShapeError("gcn_forward: features " + features.value().shape_string() +
                         " vs W0 " + w0.value().shape_string());
  }
  Var h1 = nx::relu(nx::matmul(nx::matmul(norm_adj, features), w0));
  return nx::matmul(nx::matmul(norm_adj, h1), w1);
}

Var gcn_forward(Tape& tape, const Tensor2D& features, const Tensor2D& norm_adj, ParamStore& params) {
  return gcn_forward(tape.constant(features), tape.constant(norm_adj),
                     tape.parameter(params, "gcn.w0"), tape.parameter(params, "gcn.w1"));
}

LatentState split_latent(Var hidden, std::size_t d) {
  if (hidden.cols() != 2 * d) {
    throw nx::ShapeError("split_latent: expected width " + std::to_string(2 * d) + ", got " +
                         hidden.value().shape_string());
  }
  LatentState s;
  s.mean = nx::slice_cols(hidden, 0, d);
  s.log_variance = nx::clamp(nx::slice_cols(hidden, d, 2 * d), -kLogVarianceBound, kLogVarianceBound);
  s.sample = s.mean;
  return s;
}

Var reparameterize(Var mean, Var log_variance, Rng* rng) {
  nx::require_same_shape(mean.value(), log_variance.value(), "reparameterize");
  if (!rng) return mean;
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor2D noise(mean.rows(), mean.cols());
  for (double& v : noise.values()) v = normal(*rng);
  Tape& tape = *mean.tape();
  Var stddev = nx::exp(nx::scale(log_variance, 0.5));
  return nx::add(mean, nx::mul(stddev, tape.constant(std::move(noise))));
}

Var kl_term(Var mean, Var log_variance) {
  nx::require_same_shape(mean.value(), log_variance.value(), "kl_term");
  if (mean.rows() == 0) throw nx::ShapeError("kl_term: no rows");
  Var inner = nx::sub(nx::add_scalar(nx::add(nx::exp(log_variance), nx::square(mean)), -1.0),
                      log_variance);
  return nx::scale(nx::sum(inner), 0.5 / static_cast<double>(mean.rows()));
}

double kl_term(const Tensor2D& mean, const Tensor2D& log_variance) {
  nx::require_same_shape(mean, log_variance, "kl_term");
  if (mean.rows() == 0) throw nx::ShapeError("kl_term: no rows");
  double total = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double mu = mean.values()[i];
    const double lv = log_variance.values()[i];
    total += std::exp(lv) + mu * mu - 1.0 - lv;
  }
  return 0.5 * total / static_cast<double>(mean.rows());
}

Tensor2D positional_encoding(int position, std::size_t d) {
  Tensor2D pe(1, d);
  for (std::size_t i = 0; i < d; ++i) {
    const double pair = static_cast<double>(i - i % 2);
    const double angle = position / std::pow(10000.0, pair / static_cast<double>(d));
    pe(0, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

TemporalFusion temporal_fuse(const std::vector<Var>& latents, const MergedHistory& batch,
                             ParamStore& params, const FusionOptions& opts) {
  if (latents.empty() || latents.size() != batch.snapshots.size()) {
    throw std::invalid_argument("temporal_fuse: latents must match the batch rounds");
  }
  Tape& tape = *latents.front().tape();
  const std::size_t d = latents.front().cols();
  if (opts.heads == 0 || d % opts.heads != 0) {
    throw std::invalid_argument("temporal_fuse: heads must divide d");
  }
  const std::size_t head_width = d / opts.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));

  Var wq = tape.parameter(params, "attn.wq");
  Var wk = tape.parameter(params, "attn.wk");
  Var wv = tape.parameter(params, "attn.wv");

  const auto& final_round = batch.snapshots.back();
  TemporalFusion out;
  std::vector<Var> rows;
  for (AgentId agent : final_round.agents) {
    const auto mask_it = batch.presence.find(agent);
    if (mask_it == batch.presence.end()) {
      throw std::invalid_argument("temporal_fuse: missing presence mask for agent " +
                                  std::to_string(agent.value));
    }
    std::vector<Var> seq;
    Tensor2D pe(0, d);
    std::vector<double> pe_values;
    for (std::size_t t = 0; t < batch.snapshots.size(); ++t) {
      if (!mask_it->second[t]) continue;
      const auto idx = batch.snapshots[t].index_of(agent);
      if (!idx) throw std::invalid_argument("temporal_fuse: mask disagrees with snapshot");
      const std::size_t row = *idx;
      seq.push_back(nx::gather_rows(latents[t], std::span<const std::size_t>(&row, 1)));
      const Tensor2D p = positional_encoding(batch.snapshots[t].round, d);
      pe_values.insert(pe_values.end(), p.values().begin(), p.values().end());
    }
    Var s = nx::concat_rows(seq);
    const std::size_t m = s.rows();
    Var qk_in = opts.positional_encoding ? nx::add(s, tape.constant(Tensor2D(m, d, pe_values))) : s;
    const std::size_t last = m - 1;
    Var q = nx::matmul(nx::gather_rows(qk_in, std::span<const std::size_t>(&last, 1)), wq);
    Var k = nx::matmul(qk_in, wk);
    Var v = nx::matmul(s, wv);

    std::vector<Var> head_out;
    Tensor2D weights(opts.heads, m);
    for (std::size_t h = 0; h < opts.heads; ++h) {
      const std::size_t b = h * head_width;
      const std::size_t e = b + head_width;
      Var scores = nx::scale(
          nx::matmul(nx::slice_cols(q, b, e), nx::transpose(nx::slice_cols(k, b, e))), inv_sqrt);
      Var w = nx::softmax_rows(scores);
      for (std::size_t j = 0; j < m; ++j) weights(h, j) = w.value()(0, j);
      head_out.push_back(nx::matmul(w, nx::slice_cols(v, b, e)));
    }
    rows.push_back(opts.heads == 1 ? head_out.front() : nx::concat_cols(head_out));
    out.agents.push_back(agent);
    out.weights.push_back(std::move(weights));
  }
  out.fused = nx::concat_rows(rows);
  return out;
}

Var decode_attributes(Var z, ParamStore& params) {
  Tape& tape = *z.tape();
  Var w1 = tape.parameter(params, "dec.w1");
  if (z.cols() != w1.rows()) {
    throw nx::ShapeError("decode_attributes: z " + z.value().shape_string() + " vs W1 " +
                         w1.value().shape_string());
  }
  Var h = nx::relu(nx::add_row(nx::matmul(z, w1), tape.parameter(params, "dec.b1")));
  return nx::add_row(nx::matmul(h, tape.parameter(params, "dec.w2")),
                     tape.parameter(params, "dec.b2"));
}

Var structure_logits(Var z) { return nx::matmul(z, nx::transpose(z)); }

Tensor2D decode_structure(const Tensor2D& z) {
  return nx::activation(nx::Activation::sigmoid, nx::matmul(z, nx::transpose(z)));
}

LossBreakdown compute_losses(const Tensor2D& features, const Tensor2D& observed_adj,
                             const Reconstruction& recon, double kl, const DetectorConfig& cfg) {
  nx::require_same_shape(features, recon.x_hat, "compute_losses(attributes)");
  nx::require_same_shape(observed_adj, recon.edge_probs, "compute_losses(structure)");
  const auto n = static_cast<double>(features.rows());
  if (n == 0) throw nx::ShapeError("compute_losses: empty snapshot");

  double att = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double diff = features.values()[i] - recon.x_hat.values()[i];
    att += diff * diff;
  }
  att /= n;

  double bce = 0.0;
  for (std::size_t i = 0; i < observed_adj.size(); ++i) {
    const double a = observed_adj.values()[i];
    const double p = recon.edge_probs.values()[i];
    bce -= a * std::log(p) + (1.0 - a) * std::log1p(-p);
  }
  bce /= n * n;
  return LossBreakdown::compose(att, bce, kl, cfg.alpha, cfg.gamma());
}

LossBreakdown ForwardPass::breakdown() const {
  LossBreakdown b;
  b.l_att = l_att.scalar();
  b.l_stru = l_stru.scalar();
  b.kl = kl.scalar();
  b.l_rec = l_rec.scalar();
  b.l_total = l_total.scalar();
  return b;
}

GuardianDetector::GuardianDetector(DetectorConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = make_rng(cfg_.seed, {0x1417});
  init_params(params_, cfg_, rng);
}

GuardianDetector::GuardianDetector(DetectorConfig cfg, ParamStore params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  ParamStore expected;
  Rng rng(0);
  init_params(expected, cfg_, rng);
  for (const auto& e : expected.entries()) {
    if (!params_.contains(e.name) || !params_.at(e.name).value.same_shape(e.value)) {
      throw std::invalid_argument("GuardianDetector: parameter " + e.name + " missing or has shape " +
                                  "other than " + e.value.shape_string());
    }
  }
}

MergedHistory GuardianDetector::restrict(const MergedHistory& batch) const {
  return graph::tail(batch, cfg_.effective_window());
}

ForwardPass GuardianDetector::forward(Tape& tape, const MergedHistory& full_batch, Rng* rng) {
  const MergedHistory batch = restrict(full_batch);
  if (batch.snapshots.empty()) throw std::invalid_argument("GuardianDetector: empty batch");
  const auto& final_round = batch.snapshots.back();
  if (final_round.agents.empty()) throw std::invalid_argument("GuardianDetector: no active agents");

  ForwardPass fp;
  std::vector<Var> samples, means, log_vars;
  for (const auto& snap : batch.snapshots) {
    if (snap.features.cols() != cfg_.k) {
      throw nx::ShapeError("GuardianDetector: feature width " + std::to_string(snap.features.cols()) +
                           " but k=" + std::to_string(cfg_.k));
    }
    Var hidden = gcn_forward(tape, snap.features, graph::normalized_adjacency(snap), params_);
    LatentState state = split_latent(hidden, cfg_.d);
    state.sample = reparameterize(state.mean, state.log_variance, rng);
    samples.push_back(state.sample);
    means.push_back(state.mean);
    log_vars.push_back(state.log_variance);
    fp.latents.push_back(state);
  }
  fp.kl = kl_term(nx::concat_rows(means), nx::concat_rows(log_vars));
  fp.fusion = temporal_fuse(samples, batch, params_,
                            FusionOptions{cfg_.heads, cfg_.positional_encoding});

  const auto n = static_cast<double>(final_round.agents.size());
  fp.x_hat = decode_attributes(fp.fusion.fused, params_);
  fp.l_att = nx::scale(nx::sum(nx::square(nx::sub(fp.x_hat, tape.constant(final_round.features)))),
                       1.0 / n);
  fp.logits = structure_logits(fp.fusion.fused);
  fp.l_stru = nx::scale(nx::bce_with_logits_sum(fp.logits, graph::self_looped_adjacency(final_round)),
                        1.0 / (n * n));
  fp.l_rec = nx::add(nx::scale(fp.l_att, cfg_.alpha), nx::scale(fp.l_stru, 1.0 - cfg_.alpha));
  fp.l_total = nx::add(fp.l_rec, nx::scale(fp.kl, cfg_.gamma()));
  return fp;
}

std::vector<LossBreakdown> GuardianDetector::fit(const MergedHistory& batch, std::size_t epochs,
                                                 Rng& rng) {
  std::vector<LossBreakdown> trace;
  trace.reserve(epochs);
  const nx::AdamOptions adam{cfg_.lr};
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    params_.zero_grad();
    Tape tape;
    ForwardPass fp;
    try {
      fp = forward(tape, batch, &rng);
    } catch (const std::domain_error& e) {
      throw TrainingError(epoch, e.what());
    }
    const LossBreakdown b = fp.breakdown();
    if (!std::isfinite(b.l_total)) throw TrainingError(epoch, describe(b));
    tape.backward(fp.l_total);
    nx::adam_step(params_, adam);
    for (const auto& e : params_.entries()) {
      if (!e.value.all_finite()) throw TrainingError(epoch, "parameter " + e.name + " non-finite; " + describe(b));
    }
    trace.push_back(b);
  }
  params_.zero_grad();
  return trace;
}

LossBreakdown GuardianDetector::evaluate(const MergedHistory& batch) {
  Tape tape;
  return forward(tape, batch, nullptr).breakdown();
}

Reconstruction GuardianDetector::reconstruct(const MergedHistory& full_batch) {
  const MergedHistory batch = restrict(full_batch);
  Tape tape;
  ForwardPass fp = forward(tape, batch, nullptr);
  const auto& final_round = batch.snapshots.back();
  Reconstruction r;
  r.agents = final_round.agents;
  r.features = final_round.features;
  r.observed = graph::self_looped_adjacency(final_round);
  r.x_hat = fp.x_hat.value();
  r.edge_probs = nx::activation(nx::Activation::sigmoid, fp.logits.value());
  r.r_x = nx::sub(r.features, r.x_hat);
  r.r_e = nx::sub(r.observed, r.edge_probs);
  return r;
}

}  // namespace guardian::detector
