#pragma once

#include "isomer/blocks/params.hpp"
#include "isomer/numerics/ops.hpp"

namespace isomer::blocks {

/// Wall time spent in the attention sub-layer of the last forward call.
struct SublayerTiming {
  double attention_seconds = 0.0;
};

struct FfnCache {
  LayerNormResult norm;
  DenseArray hidden_pre;
  DenseArray hidden;
};

/// y + FFN(LN2(y)); parameters ln2.* and ffn.*.
DenseArray ffn_sublayer(const DenseArray& y, ParamView p, FfnCache* cache = nullptr);
DenseArray ffn_sublayer_backward(const FfnCache& cache, const DenseArray& dz, ParamView p,
                                 GradView g);

}  // namespace isomer::blocks
