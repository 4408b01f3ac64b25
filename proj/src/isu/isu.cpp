// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "isu/isu.hpp"

namespace ssmflow::isu {

namespace {

void require_rows(const Tensor& cf, const Tensor& mf, const Tensor& h, const char* op) {
  if (cf.rows() != mf.rows() || cf.rows() != h.rows()) {
    throw DimensionError(std::string(op) + ": point counts differ, cf " + shape_str(cf.shape()) + ", mf " +
                         shape_str(mf.shape()) + ", h " + shape_str(h.shape()));
  }
}

}  // namespace

UpdateKind parse_update(const std::string& name) {
  if (name == "conv-gru") return UpdateKind::kConvGru;
  if (name == "mamba-uni") return UpdateKind::kMambaUni;
  if (name == "bimamba") return UpdateKind::kBiMamba;
  if (name == "isu") return UpdateKind::kIsu;
  if (name == "isu-fio" || name == "isu+fio") return UpdateKind::kIsuFio;
  throw ConfigError("unknown update operator '" + name + "' (expected conv-gru, mamba-uni, bimamba, isu, isu-fio)");
}

std::string to_string(UpdateKind kind) {
  switch (kind) {
    case UpdateKind::kConvGru: return "conv-gru";
    case UpdateKind::kMambaUni: return "mamba-uni";
    case UpdateKind::kBiMamba: return "bimamba";
    case UpdateKind::kIsu: return "isu";
    case UpdateKind::kIsuFio: return "isu-fio";
  }
  return "?";
}

const std::vector<UpdateKind>& all_update_kinds() {
  static const std::vector<UpdateKind> kinds{UpdateKind::kConvGru, UpdateKind::kMambaUni, UpdateKind::kBiMamba,
                                             UpdateKind::kIsu, UpdateKind::kIsuFio};
  return kinds;
}

IsuParams IsuParams::make(ParamStore& store, const std::string& name, const IsuOptions& o, Rng& rng) {
  IsuParams p;
  p.kind = o.kind;
  p.k = o.k;
  const std::size_t c = o.channels, c2 = o.motion_channels, fused = 2 * c + c2;
  p.motion.cost = pc::CostVolumeParams::make(store, name + ".cost", c, c2, rng);
  p.motion.mlp = Mlp::make(store, name + ".motion", {c2 + 4, c2, c2}, rng, Activation::kSilu, Activation::kSilu);

  if (o.kind == UpdateKind::kConvGru) {
    p.gru.update = Linear::make(store, name + ".gru.update", fused, c, rng);
    p.gru.reset = Linear::make(store, name + ".gru.reset", fused, c, rng);
    p.gru.candidate = Linear::make(store, name + ".gru.candidate", fused, c, rng);
  } else {
    p.fusion.conv = Linear::make(store, name + ".fuse.conv", fused, c, rng);
    p.fusion.gamma = store.constant(name + ".fuse.ln.gamma", {c}, 1.0);
    p.fusion.beta = store.constant(name + ".fuse.ln.beta", {c}, 0.0);
    mamba::BlockOptions bo;
    bo.width = c;
    bo.expand = o.expand;
    bo.conv_width = o.conv_width;
    bo.state_size = o.state_size;
    bo.bidirectional = o.kind != UpdateKind::kMambaUni;
    bo.zero_out_proj = o.zero_out_proj;
    bo.algo = o.algo;
    if (o.blocks == 0) throw ConfigError("at least one Mamba block is required");
    for (std::size_t b = 0; b < o.blocks; ++b) {
      p.blocks.push_back(mamba::BiMambaParams::make(store, name + ".block" + std::to_string(b), bo, rng));
    }
    if (o.kind == UpdateKind::kIsu || o.kind == UpdateKind::kIsuFio) {
      p.gate.conv = Linear::make(store, name + ".gate.conv", fused, c, rng);
    }
    if (o.kind == UpdateKind::kIsuFio) p.score = fio::ScoreParams::make(store, name + ".score", c, c2, c, rng);
  }

  p.head.mlp.hidden = Activation::kSilu;
  p.head.mlp.layers.push_back(Linear::make(store, name + ".head.0", c, c, rng));
  p.head.mlp.layers.push_back(o.zero_flow_head ? Linear::make_zero(store, name + ".head.1", c, 3)
                                               : Linear::make(store, name + ".head.1", c, 3, rng));
  return p;
}

Tensor fuse_inputs(const Tensor& cf, const Tensor& mf, const Tensor& h_prev, const FusionParams& params) {
  require_rows(cf, mf, h_prev, "fuse_inputs");
  return layer_norm(params.conv(concat_cols({cf, mf, h_prev})), params.gamma, params.beta);
}

Tensor optimize_hidden(const Tensor& u, const Tensor& h_prev, const std::vector<mamba::BiMambaParams>& blocks,
                       const fio::Permutation& perm) {
  if (u.rows() != perm.size() || h_prev.rows() != perm.size()) {
    throw DimensionError("optimize_hidden: permutation of " + std::to_string(perm.size()) + " for " +
                         std::to_string(u.rows()) + " points");
  }
  Tensor out = mamba::stack_blocks(fio::apply(u, perm), blocks, fio::apply(h_prev, perm));
  return fio::restore(out, perm);
}

Tensor optimize_hidden(const Tensor& u, const Tensor& h_prev, const std::vector<mamba::BiMambaParams>& blocks,
                       const fio::OrderingScores& scores) {
  return optimize_hidden(u, h_prev, blocks, fio::sort_permutation(scores));
}

Tensor gate_weight(const Tensor& cf, const Tensor& mf, const Tensor& h_prev, const GateParams& gate) {
  require_rows(cf, mf, h_prev, "adaptive_fuse");
  return sigmoid(gate.conv(concat_cols({cf, mf, h_prev})));
}

Tensor adaptive_fuse(const Tensor& cf, const Tensor& mf, const Tensor& h_prev, const Tensor& h_opt,
                     const GateParams& gate) {
  if (h_opt.shape() != h_prev.shape()) {
    throw DimensionError("adaptive_fuse: h_opt " + shape_str(h_opt.shape()) + " vs h_prev " +
                         shape_str(h_prev.shape()));
  }
  Tensor w = gate_weight(cf, mf, h_prev, gate);
  Tensor keep = add_scalar(scale(w, -1.0), 1.0);
  return add(mul(keep, h_prev), mul(w, h_opt));
}

Tensor decode_flow(const Tensor& h, const FlowHead& head) { return head.mlp(h); }

Tensor gru_update(const Tensor& cf, const Tensor& mf, const Tensor& h_prev, const GruParams& params) {
  require_rows(cf, mf, h_prev, "gru_update");
  Tensor xh = concat_cols({cf, mf, h_prev});
  Tensor z = sigmoid(params.update(xh));
  Tensor r = sigmoid(params.reset(xh));
  Tensor q = tanh(params.candidate(concat_cols({cf, mf, mul(r, h_prev)})));
  return add(h_prev, mul(z, sub(q, h_prev)));
}

Tensor motion_features(const Tensor& p_warped, const Tensor& f, const Tensor& q, const Tensor& g,
                       const Tensor& sf, std::size_t k, const MotionEncoder& encoder) {
  Tensor corr = pc::cost_volume(p_warped, f, q, g, std::min(k, q.rows()), encoder.cost);
  return encoder.mlp(concat_cols({corr, sf, row_norms(sf)}));
}

Tensor update_hidden(const IsuParams& params, const Tensor& cf, const Tensor& mf, const Tensor& h_prev) {
  switch (params.kind) {
    case UpdateKind::kConvGru:
      return gru_update(cf, mf, h_prev, params.gru);
    case UpdateKind::kMambaUni:
    case UpdateKind::kBiMamba: {
      Tensor u = fuse_inputs(cf, mf, h_prev, params.fusion);
      return optimize_hidden(u, h_prev, params.blocks, fio::Permutation::identity(h_prev.rows()));
    }
    case UpdateKind::kIsu: {
      Tensor u = fuse_inputs(cf, mf, h_prev, params.fusion);
      Tensor h_opt = optimize_hidden(u, h_prev, params.blocks, fio::Permutation::identity(h_prev.rows()));
      return adaptive_fuse(cf, mf, h_prev, h_opt, params.gate);
    }
    case UpdateKind::kIsuFio: {
      auto scores = fio::score_points(cf, mf, h_prev, params.score);
      Tensor u = fuse_inputs(cf, mf, h_prev, params.fusion);
      Tensor h_opt = optimize_hidden(u, h_prev, params.blocks, scores);
      return adaptive_fuse(cf, mf, h_prev, h_opt, params.gate);
    }
  }
  throw ConfigError("unknown update operator");
}

IsuResult isu_step(const LevelInputs& in, const IsuParams& params) {
  Tensor p_warped = pc::warp(in.p, in.sf0);
  Tensor mf = motion_features(p_warped, in.f, in.q, in.g, in.sf0, params.k, params.motion);
  Tensor h = update_hidden(params, in.cf, mf, in.h0);
  Tensor sf = add(in.sf0, decode_flow(h, params.head));
  return {in.f, in.g, sf, h, {sf}};
}

IsuResult isu_iterate(const LevelInputs& in, const IsuParams& params, std::size_t iterations) {
  if (iterations == 0) throw ConfigError("isu_iterate: at least one iteration is required");
  IsuResult result{in.f, in.g, in.sf0, in.h0, {}};
  LevelInputs state = in;
  for (std::size_t n = 0; n < iterations; ++n) {
    IsuResult step = isu_step(state, params);
    state.sf0 = step.sf;
    state.h0 = step.h;
    result.flows.push_back(step.sf);
  }
  result.sf = state.sf0;
  result.h = state.h0;
  return result;
}

}  // namespace ssmflow::isu
