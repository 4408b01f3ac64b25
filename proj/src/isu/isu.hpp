// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <string>
#include <vector>

#include "fio/fio.hpp"
#include "mamba/mamba_block.hpp"
#include "pointcloud/pointcloud.hpp"
#include "tensor/nn.hpp"

namespace ssmflow::isu {

/// Hidden-state update operators, one per ablation row.
enum class UpdateKind { kConvGru, kMambaUni, kBiMamba, kIsu, kIsuFio };

UpdateKind parse_update(const std::string& name);
std::string to_string(UpdateKind kind);
const std::vector<UpdateKind>& all_update_kinds();

struct IsuOptions {
  std::size_t channels = 32;         // C: hidden and context width
  std::size_t motion_channels = 32;  // C2
  std::size_t k = 16;                // cost-volume neighbourhood
  std::size_t blocks = 2;
  std::size_t state_size = 8;
  std::size_t expand = 2;
  std::size_t conv_width = 3;
  UpdateKind kind = UpdateKind::kIsuFio;
  bool zero_out_proj = false;
  bool zero_flow_head = true;
  ssm::ScanAlgo algo = ssm::ScanAlgo::kSequential;
};

/// Pointwise conv over [cf, mf, h] followed by layer norm.
struct FusionParams {
  Linear conv;
  Tensor gamma;
  Tensor beta;
};

/// Pointwise conv over [cf, mf, h] producing the attentive weight.
struct GateParams {
  Linear conv;
};

struct GruParams {
  Linear update;     // z
  Linear reset;      // r
  Linear candidate;  // q
};

/// Two-layer head C -> C -> 3. `hidden` is SiLU unless configured linear.
struct FlowHead {
  Mlp mlp;
};

/// Cost volume followed by the motion encoder over [corr, sf, |sf|].
struct MotionEncoder {
  pc::CostVolumeParams cost;
  Mlp mlp;
};

struct IsuParams {
  UpdateKind kind = UpdateKind::kIsuFio;
  std::size_t k = 16;
  MotionEncoder motion;
  FusionParams fusion;
  std::vector<mamba::BiMambaParams> blocks;
  GateParams gate;
  fio::ScoreParams score;
  GruParams gru;
  FlowHead head;

  static IsuParams make(ParamStore& store, const std::string& name, const IsuOptions& options, Rng& rng);
};

Tensor fuse_inputs(const Tensor& cf, const Tensor& mf, const Tensor& h_prev, const FusionParams& params);

/// Reorders u and h_prev by `perm`, runs the blocks, restores point order.
Tensor optimize_hidden(const Tensor& u, const Tensor& h_prev, const std::vector<mamba::BiMambaParams>& blocks,
                       const fio::Permutation& perm);
Tensor optimize_hidden(const Tensor& u, const Tensor& h_prev, const std::vector<mamba::BiMambaParams>& blocks,
                       const fio::OrderingScores& scores);

/// w = sigmoid(conv([cf, mf, h_prev])); (1 - w) h_prev + w h_opt.
Tensor adaptive_fuse(const Tensor& cf, const Tensor& mf, const Tensor& h_prev, const Tensor& h_opt,
                     const GateParams& gate);
Tensor gate_weight(const Tensor& cf, const Tensor& mf, const Tensor& h_prev, const GateParams& gate);

Tensor decode_flow(const Tensor& h, const FlowHead& head);

Tensor gru_update(const Tensor& cf, const Tensor& mf, const Tensor& h_prev, const GruParams& params);

/// mlp([cost_volume(p, f, q, g), sf, |sf|]).
Tensor motion_features(const Tensor& p_warped, const Tensor& f, const Tensor& q, const Tensor& g,
                       const Tensor& sf, std::size_t k, const MotionEncoder& encoder);

/// Dispatches on params.kind and returns the next hidden state.
Tensor update_hidden(const IsuParams& params, const Tensor& cf, const Tensor& mf, const Tensor& h_prev);

struct LevelInputs {
  Tensor p;    // source coords [N1 x 3]
  Tensor q;    // target coords [N2 x 3]
  Tensor f;    // source feats [N1 x C]
  Tensor g;    // target feats [N2 x C]
  Tensor cf;   // context [N1 x C]
  Tensor sf0;  // initial flow [N1 x 3]
  Tensor h0;   // initial hidden [N1 x C]
};

struct IsuResult {
  Tensor f;
  Tensor g;
  Tensor sf;
  Tensor h;
  std::vector<Tensor> flows;  // one per iteration
};

/// One ISU iteration: warp, motion features, hidden update, residual flow.
IsuResult isu_step(const LevelInputs& in, const IsuParams& params);
IsuResult isu_iterate(const LevelInputs& in, const IsuParams& params, std::size_t iterations);

}  // namespace ssmflow::isu
