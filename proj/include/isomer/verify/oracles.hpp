#pragma once

#include "isomer/blocks/config.hpp"
#include "isomer/blocks/params.hpp"
#include "isomer/numerics/dense_array.hpp"

// Deliberately naive reference implementations. They use only element
// access on DenseArray: no kernels from the numerics or blocks layers.

namespace isomer::verify {

/// For each query row: all scores q.k * scale, softmax, weighted sum of V.
DenseArray oracle_attention(const DenseArray& q, const DenseArray& k, const DenseArray& v,
                            double scale);

DenseArray oracle_linear(const DenseArray& x, const DenseArray& w, const DenseArray& b);
/// Two-pass mean/variance layer norm over the last axis, eps 1e-5.
DenseArray oracle_layernorm(const DenseArray& x, const DenseArray& gamma, const DenseArray& beta);

/// Multi-head attention of `queries` over `kv` with projections attn.* read
/// from `p` (wq, bq, ..., wo, bo).
DenseArray oracle_multihead(const DenseArray& queries, const DenseArray& kv, blocks::ParamView p,
                            std::size_t heads);

/// CST written as attention: an N x N matrix whose every row is the spatial
/// weight map G applied to the tokens, the channel transform applied to the
/// attended values, plus the skip connection.
DenseArray oracle_cst_as_attention(const DenseArray& x, blocks::ParamView p);

/// Pre-norm vanilla block: y = x + MHA(LN1 x), z = y + FFN(LN2 y).
DenseArray oracle_vanilla_block(const DenseArray& x, blocks::ParamView p,
                                const blocks::BlockConfig& cfg);

/// One SGST branch: y = q + MHA(LN1 q, merged), z = y + FFN(LN2 y).
DenseArray oracle_branch(const DenseArray& queries, const DenseArray& merged, blocks::ParamView p,
                         const blocks::BlockConfig& cfg);

}  // namespace isomer::verify
