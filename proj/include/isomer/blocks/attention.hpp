#pragma once

#include <vector>

#include "isomer/blocks/params.hpp"
#include "isomer/numerics/dense_array.hpp"

namespace isomer::blocks {

/// Intermediates kept by attention_forward for the backward pass.
struct AttentionCache {
  DenseArray queries;
  DenseArray kv_source;
  DenseArray q, k, v;
  std::vector<DenseArray> probs;  // one M x P matrix per head
  DenseArray context;             // concatenated head outputs, M x C
};

/// Multi-head scaled dot-product attention of `queries` (M x C) over
/// `kv_source` (P x C).
///
/// Parameters under `p`: wq, bq, wk, wv, bv, wo, bo (all C x C / C).
/// The key projection has no bias.
/// Scores are scaled by 1/sqrt(C / heads); head outputs are concatenated
/// and passed through the output projection. No positional encoding. M may
/// be zero, in which case the result is 0 x C.
DenseArray attention_forward(const DenseArray& queries, const DenseArray& kv_source, ParamView p,
                             std::size_t heads, AttentionCache* cache = nullptr);

struct AttentionInputGrads {
  DenseArray dqueries;
  DenseArray dkv_source;
};

AttentionInputGrads attention_backward(const AttentionCache& cache, const DenseArray& dout,
                                       ParamView p, std::size_t heads, GradView g);

/// Self-attention: attention_forward(x, x, ...).
DenseArray mhsa_forward(const DenseArray& x, ParamView p, std::size_t heads,
                        AttentionCache* cache = nullptr);
DenseArray mhsa_backward(const AttentionCache& cache, const DenseArray& dout, ParamView p,
                         std::size_t heads, GradView g);

/// Attention weights of head `head` for a self-attention call (N x N); for
/// offline inspection.
DenseArray attention_matrix(const DenseArray& x, ParamView p, std::size_t heads, std::size_t head);

}  // namespace isomer::blocks
