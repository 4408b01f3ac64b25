// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "pipeline/model.hpp"

#include <algorithm>
#include <numeric>

namespace ssmflow {

namespace {

constexpr std::size_t kUpsampleNeighbours = 3;

Tensor select_rows(const Tensor& points, const std::vector<std::size_t>& index) {
  auto src = points.data();
  std::vector<double> out(index.size() * 3);
  for (std::size_t i = 0; i < index.size(); ++i) std::copy_n(src.begin() + 3 * index[i], 3, out.begin() + 3 * i);
  return Tensor::from({index.size(), 3}, std::move(out));
}

void require_cloud(const Tensor& t, const char* what) {
  if (!t.defined() || t.dim() != 2 || t.cols() != 3) {
    throw DimensionError(std::string("forward: ") + what + " must be [N x 3], got " +
                         (t.defined() ? shape_str(t.shape()) : std::string("<undefined>")));
  }
}

Tensor upsample_to(const Tensor& coarse, const Tensor& fine, const Tensor& values) {
  return pc::upsample(coarse, fine, values, std::min(kUpsampleNeighbours, coarse.rows()));
}

// Adds max-pooled features of `other` around each warped centre.
Tensor enhance(const Tensor& centres, const Tensor& feats, const Tensor& other_coords, const Tensor& other_feats,
               std::size_t k, const pc::SetConvParams& params) {
  const std::size_t kk = std::min(k, other_coords.rows());
  auto index = pc::knn(centres, other_coords, kk);
  return add(feats, pc::set_aggregate(centres, other_coords, other_feats, index, kk, params, pc::Reduce::kMaxPool));
}

}  // namespace

Model::Model(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.seed);
  const std::size_t c = config_.channels;
  const isu::IsuOptions options = config_.isu_options();
  for (std::size_t l = 0; l < config_.levels; ++l) {
    const std::string name = "level" + std::to_string(l);
    const std::size_t in = l == 0 ? 0 : c;
    LevelParams lp;
    lp.feature_encoder = pc::SetConvParams::make(store_, name + ".feature", in, {c, c}, rng);
    lp.context_encoder = pc::SetConvParams::make(store_, name + ".context", in, {c, c}, rng);
    lp.isu = isu::IsuParams::make(store_, name + ".isu", options, rng);
    if (l > 0) {
      lp.enhance_source = pc::SetConvParams::make(store_, name + ".enhance.source", c, {c, c}, rng);
      lp.enhance_target = pc::SetConvParams::make(store_, name + ".enhance.target", c, {c, c}, rng);
    }
    levels_.push_back(std::move(lp));
  }
}

PyramidGeometry sample_pyramid(const Tensor& points, const std::vector<std::size_t>& counts, std::size_t k) {
  require_cloud(points, "points");
  if (counts.empty()) throw ConfigError("sample_pyramid: no levels");
  PyramidGeometry g;
  Tensor prev = points;
  std::vector<std::size_t> prev_source(points.rows());
  std::iota(prev_source.begin(), prev_source.end(), std::size_t{0});
  for (std::size_t count : counts) {
    const std::size_t n_prev = prev.rows();
    const std::size_t n = std::min(count, n_prev);
    std::vector<std::size_t> picked;
    if (n == n_prev) {
      picked.resize(n);
      std::iota(picked.begin(), picked.end(), std::size_t{0});
    } else {
      picked = pc::farthest_point_sample(prev, n);
    }
    Tensor coords = select_rows(prev, picked);
    std::vector<std::size_t> source(n);
    for (std::size_t i = 0; i < n; ++i) source[i] = prev_source[picked[i]];
    const std::size_t kk = std::min(k, n_prev);
    g.group_index.push_back(pc::knn(coords, prev, kk));
    g.group_k.push_back(kk);
    g.coords.push_back(coords);
    g.source_index.push_back(source);
    g.parent_index.push_back(picked);
    prev = coords;
    prev_source = std::move(source);
  }
  return g;
}

std::vector<Tensor> encode_pyramid(const PyramidGeometry& geometry, const Tensor& points,
                                   const std::vector<const pc::SetConvParams*>& encoders) {
  if (encoders.size() != geometry.coords.size()) {
    throw DimensionError("encode_pyramid: " + std::to_string(encoders.size()) + " encoders for " +
                         std::to_string(geometry.coords.size()) + " levels");
  }
  std::vector<Tensor> feats;
  Tensor prev_coords = points, prev_feats;
  for (std::size_t l = 0; l < geometry.coords.size(); ++l) {
    Tensor f = pc::set_aggregate(geometry.coords[l], prev_coords, prev_feats, geometry.group_index[l],
                                 geometry.group_k[l], *encoders[l], pc::Reduce::kWeightedSum);
    feats.push_back(f);
    prev_coords = geometry.coords[l];
    prev_feats = f;
  }
  return feats;
}

std::vector<pc::PointCloudLevel> build_pyramid(const Tensor& points, const Model& model) {
  const auto& cfg = model.config();
  if (cfg.points.front() > points.rows()) {
    throw DomainError("build_pyramid: finest level wants " + std::to_string(cfg.points.front()) + " of " +
                      std::to_string(points.rows()) + " points");
  }
  auto geometry = sample_pyramid(points, cfg.points, cfg.k);
  std::vector<const pc::SetConvParams*> enc;
  for (const auto& lp : model.levels()) enc.push_back(&lp.feature_encoder);
  auto feats = encode_pyramid(geometry, points, enc);
  std::vector<pc::PointCloudLevel> out;
  for (std::size_t l = 0; l < feats.size(); ++l) {
    out.push_back({geometry.coords[l], feats[l], geometry.parent_index[l]});
  }
  return out;
}

ForwardResult forward(const Model& model, const Tensor& source, const Tensor& target,
                      std::optional<std::size_t> iterations) {
  require_cloud(source, "source");
  require_cloud(target, "target");
  const auto& cfg = model.config();
  const std::size_t iters = iterations.value_or(cfg.iterations);
  if (iters == 0) throw ConfigError("forward: at least one iteration is required");
  if (cfg.points.front() > source.rows()) {
    throw DomainError("forward: finest level wants " + std::to_string(cfg.points.front()) + " of " +
                      std::to_string(source.rows()) + " source points");
  }
  const std::size_t levels = cfg.levels;
  const auto& lps = model.levels();

  auto geo_src = sample_pyramid(source, cfg.points, cfg.k);
  auto geo_tgt = sample_pyramid(target, cfg.points, cfg.k);
  std::vector<const pc::SetConvParams*> feat_enc, ctx_enc;
  for (const auto& lp : lps) {
    feat_enc.push_back(&lp.feature_encoder);
    ctx_enc.push_back(&lp.context_encoder);
  }
  auto f_levels = encode_pyramid(geo_src, source, feat_enc);
  auto g_levels = encode_pyramid(geo_tgt, target, feat_enc);
  auto c_levels = encode_pyramid(geo_src, source, ctx_enc);

  ForwardResult res;
  res.flows.resize(levels);
  res.source_index = geo_src.source_index;

  Tensor sf, h, cf_coarse, f_coarse, g_coarse;
  for (std::size_t l = levels; l-- > 0;) {
    const Tensor& p = geo_src.coords[l];
    const Tensor& q = geo_tgt.coords[l];
    isu::LevelInputs in{p, q, f_levels[l], g_levels[l], c_levels[l], {}, {}};
    if (l + 1 == levels) {
      in.sf0 = Tensor::zeros({p.rows(), 3});
      in.h0 = tanh(in.cf);
    } else {
      const Tensor& pc_src = geo_src.coords[l + 1];
      in.sf0 = upsample_to(pc_src, p, sf);
      in.h0 = upsample_to(pc_src, p, h);
      in.cf = add(in.cf, upsample_to(pc_src, p, cf_coarse));
      in.f = add(in.f, upsample_to(pc_src, p, f_coarse));
      in.g = add(in.g, upsample_to(geo_tgt.coords[l + 1], q, g_coarse));
    }
    const auto& lp = lps[l];
    auto result = isu::isu_iterate(in, lp.isu, iters);
    res.flows[l] = result.flows;
    sf = result.sf;
    h = result.h;
    cf_coarse = in.cf;
    if (l > 0) {
      Tensor warped = pc::warp(p, sf);
      f_coarse = enhance(warped, in.f, q, in.g, cfg.k, *lp.enhance_source);
      g_coarse = enhance(q, in.g, warped, in.f, cfg.k, *lp.enhance_target);
    }
  }
  return res;
}

Tensor flow_loss(const ForwardResult& result, const Tensor& gt_flow, const std::vector<double>& weights) {
  if (weights.size() < result.flows.size()) {
    throw ConfigError("flow_loss: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(result.flows.size()) + " levels");
  }
  if (gt_flow.dim() != 2 || gt_flow.cols() != 3) {
    throw DimensionError("flow_loss: ground truth must be [N x 3], got " + shape_str(gt_flow.shape()));
  }
  Tensor total;
  for (std::size_t l = 0; l < result.flows.size(); ++l) {
    const auto& index = result.source_index.at(l);
    for (std::size_t i : index) {
      if (i >= gt_flow.rows()) throw DimensionError("flow_loss: source index out of range of ground truth");
    }
    Tensor gt = gather_rows(gt_flow, index);
    for (const Tensor& sf : result.flows[l]) {
      if (sf.shape() != gt.shape()) {
        throw DimensionError("flow_loss: level " + std::to_string(l) + " flow " + shape_str(sf.shape()) +
                             " vs ground truth " + shape_str(gt.shape()));
      }
      Tensor term = scale(mean(row_norms(sub(gt, sf))), weights[l]);
      total = total.defined() ? add(total, term) : term;
    }
  }
  if (!total.defined()) throw ContractError("flow_loss: no flow predictions");
  return total;
}

}  // namespace ssmflow
