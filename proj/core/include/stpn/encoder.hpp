#pragma once

#include <optional>
#include <vector>

#include "stpn/graph.hpp"
#include "stpn/tensor.hpp"

namespace stpn {

/// Constant-width transformer encoder: patch embedding plus `depth` identical
/// pre-LN layers. The same width d is used at every layer.
struct EncoderConfig {
    std::size_t image_h = 32, image_w = 32;
    std::size_t patch_h = 8, patch_w = 8;
    std::size_t depth = 2;
    std::size_t width = 32;
    std::size_t heads = 4;
    std::size_t ffn_hidden = 64;
    double ln_eps = 1e-5;
    bool pos_embed = true;

    std::size_t patch_count() const { return (image_h / patch_h) * (image_w / patch_w); }
    std::size_t patch_dim() const { return 3 * patch_h * patch_w; }
    void validate() const;  // throws DimensionError on bad extents
};

// The same structs describe stored weights (T = Tensor) and their bound
// graph nodes (T = NodeId). Projection matrices act by right multiplication,
// x.W + b, except the patch projection which is stored d x (3 h w).
template <typename T>
struct MhaParamsT {
    T wq, bq, wk, bk, wv, bv, wo, bo;
};

template <typename T>
struct LayerParamsT {
    MhaParamsT<T> mha;
    T ln1_g, ln1_b;
    T ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    T ln2_g, ln2_b;
};

template <typename T>
struct EncoderParamsT {
    T patch_w, patch_b;
    std::optional<T> pos;
    std::vector<LayerParamsT<T>> layers;
};

template <typename T>
struct HeadParamsT {
    T w, b;
};

using MhaParams = MhaParamsT<Tensor>;
using MhaNodes = MhaParamsT<NodeId>;
using LayerParams = LayerParamsT<Tensor>;
using LayerNodes = LayerParamsT<NodeId>;
using EncoderParams = EncoderParamsT<Tensor>;
using EncoderNodes = EncoderParamsT<NodeId>;
using HeadParams = HeadParamsT<Tensor>;
using HeadNodes = HeadParamsT<NodeId>;

/// Token matrix plus how many leading rows are prompt-derived.
struct TokenSeq {
    NodeId tokens;
    std::size_t prompt_count = 0;
};

/// Raster-order patch extraction: row r of the result is patch r flattened
/// channel-major ([3 x h x w] row-major). Pure tensor function; frames carry
/// no gradient.
Tensor extract_patches(const Tensor& frame, std::size_t patch_h, std::size_t patch_w);

TokenSeq patch_embed(Graph& g, const Tensor& frame, const EncoderNodes& enc,
                     const EncoderConfig& cfg);

/// Multi-head scaled-dot-product cross-attention; keys and values are both
/// projected from `context`, scale is 1/sqrt(d/heads), output projection
/// applied.
NodeId mha(Graph& g, NodeId queries, NodeId context, const MhaNodes& p, std::size_t heads);

/// Pre-LN block: x + MHA(LN(x)), then + FFN(LN(.)). Keeps prompt_count.
TokenSeq transformer_layer(Graph& g, TokenSeq x, const LayerNodes& p, const EncoderConfig& cfg);

NodeId encode_plain(Graph& g, const Tensor& frame, const EncoderNodes& enc,
                    const EncoderConfig& cfg);

/// One prompt set prepended before layer 1; prompt rows then ride through
/// every layer. Returns the final n patch rows only. Empty prompts reproduce
/// encode_plain bit-exactly. If `layer_rows` is given it receives the row
/// count of the sequence entering each layer.
NodeId encode_prompted_shallow(Graph& g, const Tensor& frame, std::optional<NodeId> prompts,
                               const EncoderNodes& enc, const EncoderConfig& cfg,
                               std::vector<std::size_t>* layer_rows = nullptr);

/// Layer i drops the previous prompt rows and prepends fresh set i before it
/// runs. Exactly depth sets required; empty sets fall back to plain rows.
NodeId encode_prompted_deep(Graph& g, const Tensor& frame,
                            const std::vector<std::optional<NodeId>>& prompt_sets,
                            const EncoderNodes& enc, const EncoderConfig& cfg);

/// Conv-compatible prompt path: 9 prompt rows viewed as a 3x3 map, zero
/// padding of 2, 3x3 kernel, stride 2; output is again 3x3, reshaped back to
/// 9 rows of the kernel's output width.
NodeId conv_prompt_downscale(Graph& g, NodeId prompts, NodeId kernel, NodeId bias);

/// Mean-pool over tokens, then a linear map to class logits.
NodeId head_classify(Graph& g, NodeId features, const HeadNodes& head);

}  // namespace stpn
