// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <string>
#include <vector>

#include "ssm/ssm.hpp"
#include "tensor/nn.hpp"

namespace ssmflow::mamba {

struct BlockOptions {
  std::size_t width = 32;        // C
  std::size_t expand = 2;        // inner width = expand * C
  std::size_t conv_width = 3;    // depthwise kernel, odd
  std::size_t state_size = 8;    // S
  bool bidirectional = true;
  bool zero_out_proj = false;
  ssm::ScanAlgo algo = ssm::ScanAlgo::kSequential;
};

/// Parameters of one gated block. `scan_bwd` is unused when unidirectional.
struct BiMambaParams {
  Linear in_scan;   // C -> E, feeds the depthwise conv and the SSM
  Linear in_gate;   // C -> E
  Tensor conv;      // [K x E]
  ssm::SelectiveSSM scan_fwd;
  ssm::SelectiveSSM scan_bwd;
  Linear out_proj;  // E -> C
  bool bidirectional = true;
  ssm::ScanAlgo algo = ssm::ScanAlgo::kSequential;

  static BiMambaParams make(ParamStore& store, const std::string& name, const BlockOptions& options, Rng& rng);
};

/// s = silu(dw(in_scan(u))), g = silu(in_gate(u)),
/// out = out_proj(bissm(s) * g) + residual.
Tensor bimamba_forward(const Tensor& u, const BiMambaParams& params, const Tensor& residual);

/// Applies the blocks in order; each output is the next block's input and
/// residual source. The first block receives (u, residual).
Tensor stack_blocks(const Tensor& u, const std::vector<BiMambaParams>& blocks, const Tensor& residual);

}  // namespace ssmflow::mamba
