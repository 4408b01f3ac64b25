// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "mamba/mamba_block.hpp"

#include <cmath>

namespace ssmflow::mamba {

BiMambaParams BiMambaParams::make(ParamStore& store, const std::string& name, const BlockOptions& options,
                                  Rng& rng) {
  if (options.conv_width % 2 == 0) throw ConfigError("depthwise kernel width must be odd");
  if (options.width == 0 || options.expand == 0 || options.state_size == 0) {
    throw ConfigError("block widths and state size must be positive");
  }
  const std::size_t inner = options.expand * options.width;
  BiMambaParams p;
  p.in_scan = Linear::make(store, name + ".in_scan", options.width, inner, rng);
  p.in_gate = Linear::make(store, name + ".in_gate", options.width, inner, rng);
  p.conv = store.uniform(name + ".conv", {options.conv_width, inner},
                         1.0 / std::sqrt(static_cast<double>(options.conv_width)), rng);
  p.scan_fwd = ssm::SelectiveSSM::make(store, name + ".ssm_fwd", inner, options.state_size, rng);
  if (options.bidirectional) {
    p.scan_bwd = ssm::SelectiveSSM::make(store, name + ".ssm_bwd", inner, options.state_size, rng);
  }
  p.out_proj = options.zero_out_proj ? Linear::make_zero(store, name + ".out_proj", inner, options.width)
                                     : Linear::make(store, name + ".out_proj", inner, options.width, rng);
  p.bidirectional = options.bidirectional;
  p.algo = options.algo;
  return p;
}

Tensor bimamba_forward(const Tensor& u, const BiMambaParams& params, const Tensor& residual) {
  if (u.shape() != residual.shape()) {
    throw DimensionError("bimamba_forward: input " + shape_str(u.shape()) + " and residual " +
                         shape_str(residual.shape()) + " differ");
  }
  Tensor s = silu(depthwise_conv1d(params.in_scan(u), params.conv));
  Tensor g = silu(params.in_gate(u));
  Tensor y = params.bidirectional ? ssm::bidirectional_scan(params.scan_fwd, params.scan_bwd, s, params.algo)
                                  : ssm::selective_ssm(params.scan_fwd, s, params.algo);
  return add(params.out_proj(mul(y, g)), residual);
}

Tensor stack_blocks(const Tensor& u, const std::vector<BiMambaParams>& blocks, const Tensor& residual) {
  if (blocks.empty()) throw ConfigError("stack_blocks: at least one block is required");
  Tensor out = bimamba_forward(u, blocks.front(), residual);
  for (std::size_t i = 1; i < blocks.size(); ++i) out = bimamba_forward(out, blocks[i], out);
  return out;
}

}  // namespace ssmflow::mamba
