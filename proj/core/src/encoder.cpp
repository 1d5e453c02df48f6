#include "stpn/encoder.hpp"

#include <cmath>
#include <string>

#include "stpn/error.hpp"

namespace stpn {

void EncoderConfig::validate() const {
    if (depth < 1) throw DimensionError("encoder: depth must be >= 1");
    if (patch_h == 0 || patch_w == 0 || image_h % patch_h != 0 || image_w % patch_w != 0) {
        throw DimensionError("encoder: image " + std::to_string(image_h) + "x" +
                             std::to_string(image_w) + " not divisible by patch " +
                             std::to_string(patch_h) + "x" + std::to_string(patch_w));
    }
    if (heads == 0 || width % heads != 0) {
        throw DimensionError("encoder: width " + std::to_string(width) +
                             " not divisible by heads " + std::to_string(heads));
    }
    if (ln_eps <= 0.0) throw DimensionError("encoder: ln_eps must be positive");
}

Tensor extract_patches(const Tensor& frame, std::size_t patch_h, std::size_t patch_w) {
    if (frame.rank() != 3 || frame.extent(0) != 3) {
        throw DimensionError("extract_patches: expected [3xHxW] frame, got " +
                             Tensor::shape_str(frame.shape()));
    }
    const std::size_t h = frame.extent(1), w = frame.extent(2);
    if (patch_h == 0 || patch_w == 0 || h % patch_h != 0 || w % patch_w != 0) {
        throw DimensionError("extract_patches: frame " + Tensor::shape_str(frame.shape()) +
                             " not divisible by patch " + std::to_string(patch_h) + "x" +
                             std::to_string(patch_w));
    }
    const std::size_t gy = h / patch_h, gx = w / patch_w;
    const std::size_t dim = 3 * patch_h * patch_w;
    Tensor out({gy * gx, dim});
    for (std::size_t py = 0; py < gy; ++py) {
        for (std::size_t px = 0; px < gx; ++px) {
            double* row = out.data() + (py * gx + px) * dim;
            std::size_t k = 0;
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < patch_h; ++y)
                    for (std::size_t x = 0; x < patch_w; ++x)
                        row[k++] = frame.data()[(c * h + py * patch_h + y) * w + px * patch_w + x];
        }
    }
    return out;
}

TokenSeq patch_embed(Graph& g, const Tensor& frame, const EncoderNodes& enc,
                     const EncoderConfig& cfg) {
    if (frame.rank() != 3 || frame.extent(0) != 3 || frame.extent(1) != cfg.image_h ||
        frame.extent(2) != cfg.image_w) {
        throw DimensionError("patch_embed: frame " + Tensor::shape_str(frame.shape()) +
                             " does not match configured 3x" + std::to_string(cfg.image_h) +
                             "x" + std::to_string(cfg.image_w));
    }
    const NodeId patches = g.input(extract_patches(frame, cfg.patch_h, cfg.patch_w));
    NodeId tokens = g.add_rowvec(g.matmul(patches, g.transpose(enc.patch_w)), enc.patch_b);
    if (enc.pos) tokens = g.add(tokens, *enc.pos);
    return TokenSeq{tokens, 0};
}

namespace {

NodeId ffn(Graph& g, NodeId x, NodeId w1, NodeId b1, NodeId w2, NodeId b2) {
    return g.add_rowvec(g.matmul(g.gelu(g.add_rowvec(g.matmul(x, w1), b1)), w2), b2);
}

}  // namespace

NodeId mha(Graph& g, NodeId queries, NodeId context, const MhaNodes& p, std::size_t heads) {
    const std::size_t d = g.value(queries).cols();
    if (g.value(context).cols() != d) {
        throw DimensionError("mha: query width " + std::to_string(d) + " vs context width " +
                             std::to_string(g.value(context).cols()));
    }
    if (heads == 0 || d % heads != 0) {
        throw DimensionError("mha: width " + std::to_string(d) + " not divisible by " +
                             std::to_string(heads) + " heads");
    }
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const NodeId q = g.add_rowvec(g.matmul(queries, p.wq), p.bq);
    const NodeId k = g.add_rowvec(g.matmul(context, p.wk), p.bk);
    const NodeId v = g.add_rowvec(g.matmul(context, p.wv), p.bv);

    std::vector<NodeId> head_outs;
    head_outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const NodeId qh = g.slice_cols(q, h * dh, (h + 1) * dh);
        const NodeId kh = g.slice_cols(k, h * dh, (h + 1) * dh);
        const NodeId vh = g.slice_cols(v, h * dh, (h + 1) * dh);
        const NodeId attn = g.softmax(g.scale(g.matmul(qh, g.transpose(kh)), scale));
        head_outs.push_back(g.matmul(attn, vh));
    }
    const NodeId merged = heads == 1 ? head_outs[0] : g.concat_cols(std::move(head_outs));
    return g.add_rowvec(g.matmul(merged, p.wo), p.bo);
}

TokenSeq transformer_layer(Graph& g, TokenSeq x, const LayerNodes& p, const EncoderConfig& cfg) {
    const NodeId normed = g.layer_norm(x.tokens, p.ln1_g, p.ln1_b, cfg.ln_eps);
    const NodeId attended = g.add(x.tokens, mha(g, normed, normed, p.mha, cfg.heads));
    const NodeId normed2 = g.layer_norm(attended, p.ln2_g, p.ln2_b, cfg.ln_eps);
    const NodeId out = g.add(attended, ffn(g, normed2, p.ffn_w1, p.ffn_b1, p.ffn_w2, p.ffn_b2));
    return TokenSeq{out, x.prompt_count};
}

NodeId encode_plain(Graph& g, const Tensor& frame, const EncoderNodes& enc,
                    const EncoderConfig& cfg) {
    TokenSeq seq = patch_embed(g, frame, enc, cfg);
    for (const LayerNodes& layer : enc.layers) seq = transformer_layer(g, seq, layer, cfg);
    return seq.tokens;
}

namespace {

std::size_t prompt_rows(const Graph& g, const std::optional<NodeId>& prompts) {
    if (!prompts) return 0;
    const Tensor& t = g.value(*prompts);
    if (t.rank() != 2) {
        throw DimensionError("prompts must be rank 2, got " + Tensor::shape_str(t.shape()));
    }
    return t.rows();
}

}  // namespace

NodeId encode_prompted_shallow(Graph& g, const Tensor& frame, std::optional<NodeId> prompts,
                               const EncoderNodes& enc, const EncoderConfig& cfg,
                               std::vector<std::size_t>* layer_rows) {
    const std::size_t np = prompt_rows(g, prompts);
    if (np > 0 && g.value(*prompts).cols() != cfg.width) {
        throw DimensionError("shallow: prompt width " +
                             std::to_string(g.value(*prompts).cols()) + " vs encoder width " +
                             std::to_string(cfg.width));
    }
    TokenSeq seq = patch_embed(g, frame, enc, cfg);
    const std::size_t n = cfg.patch_count();
    if (np > 0) seq = TokenSeq{g.concat_rows({*prompts, seq.tokens}), np};
    for (const LayerNodes& layer : enc.layers) {
        if (layer_rows) layer_rows->push_back(g.value(seq.tokens).rows());
        seq = transformer_layer(g, seq, layer, cfg);
    }
    return np > 0 ? g.slice_rows(seq.tokens, np, np + n) : seq.tokens;
}

NodeId encode_prompted_deep(Graph& g, const Tensor& frame,
                            const std::vector<std::optional<NodeId>>& prompt_sets,
                            const EncoderNodes& enc, const EncoderConfig& cfg) {
    if (prompt_sets.size() != cfg.depth) {
        throw DimensionError("deep: " + std::to_string(prompt_sets.size()) +
                             " prompt sets for depth " + std::to_string(cfg.depth));
    }
    const std::size_t n = cfg.patch_count();
    NodeId patch_rows_node = patch_embed(g, frame, enc, cfg).tokens;
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        const std::size_t np = prompt_rows(g, prompt_sets[i]);
        TokenSeq seq{patch_rows_node, 0};
        if (np > 0) seq = TokenSeq{g.concat_rows({*prompt_sets[i], patch_rows_node}), np};
        seq = transformer_layer(g, seq, enc.layers[i], cfg);
        patch_rows_node =
            np > 0 ? g.slice_rows(seq.tokens, np, np + n) : seq.tokens;
    }
    return patch_rows_node;
}

NodeId conv_prompt_downscale(Graph& g, NodeId prompts, NodeId kernel, NodeId bias) {
    const Tensor& p = g.value(prompts);
    if (p.rank() != 2 || p.rows() != 9) {
        throw DimensionError("conv_prompt_downscale: needs exactly 9 prompts for the 3x3 map, got " +
                             Tensor::shape_str(p.shape()));
    }
    const Tensor& k = g.value(kernel);
    if (k.rank() != 4 || k.extent(2) != 3 || k.extent(3) != 3 || k.extent(1) != p.cols()) {
        throw DimensionError("conv_prompt_downscale: kernel must be [d'x" +
                             std::to_string(p.cols()) + "x3x3], got " +
                             Tensor::shape_str(k.shape()));
    }
    const std::size_t d = p.cols();
    const std::size_t d_out = k.extent(0);
    // rows -> channels-first 3x3 map, conv (pad 2, stride 2) keeps 3x3, back.
    const NodeId map = g.reshape(g.transpose(prompts), {d, 3, 3});
    const NodeId conv = g.conv2d(map, kernel, bias, 2, 2);
    return g.transpose(g.reshape(conv, {d_out, 9}));
}

NodeId head_classify(Graph& g, NodeId features, const HeadNodes& head) {
    const Tensor& f = g.value(features);
    if (f.rank() != 2 || f.cols() != g.value(head.w).rows()) {
        throw DimensionError("head: features " + Tensor::shape_str(f.shape()) +
                             " vs head weight " + Tensor::shape_str(g.value(head.w).shape()));
    }
    const NodeId pooled = g.reshape(g.mean_axis(features, 0), {1, f.cols()});
    const NodeId logits = g.add_rowvec(g.matmul(pooled, head.w), head.b);
    return g.reshape(logits, {g.value(head.w).cols()});
}

}  // namespace stpn
