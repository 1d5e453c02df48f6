#include "stpn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stpn/error.hpp"

namespace stpn {
namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

std::string sstr(const Tensor& t) { return Tensor::shape_str(t.shape()); }

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad_scalar(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

}  // namespace

void matmul_accumulate(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

NodeId Graph::push(GraphNode n) {
    n.value = eval(n);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Graph::input(Tensor v) {
    nodes_.push_back(GraphNode{Op::Input, {}, std::move(v)});
    return nodes_.size() - 1;
}

NodeId Graph::param(Tensor v) {
    nodes_.push_back(GraphNode{Op::Param, {}, std::move(v)});
    params_.push_back(nodes_.size() - 1);
    return nodes_.size() - 1;
}

NodeId Graph::add(NodeId a, NodeId b) {
    require(value(a).same_shape(value(b)),
            "add: shape mismatch " + sstr(value(a)) + " vs " + sstr(value(b)));
    return push(GraphNode{Op::Add, {a, b}});
}

NodeId Graph::add_n(std::vector<NodeId> xs) {
    require(!xs.empty(), "add_n: needs at least one input");
    for (NodeId x : xs) {
        require(value(x).same_shape(value(xs[0])),
                "add_n: shape mismatch " + sstr(value(x)) + " vs " + sstr(value(xs[0])));
    }
    return push(GraphNode{Op::AddN, std::move(xs)});
}

NodeId Graph::mean_n(std::vector<NodeId> xs) {
    require(!xs.empty(), "mean_n: needs at least one input");
    for (NodeId x : xs) {
        require(value(x).same_shape(value(xs[0])),
                "mean_n: shape mismatch " + sstr(value(x)) + " vs " + sstr(value(xs[0])));
    }
    return push(GraphNode{Op::MeanN, std::move(xs)});
}

NodeId Graph::scale(NodeId x, double factor) {
    GraphNode n{Op::Scale, {x}};
    n.attr_f = factor;
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.rank() == 2 && tb.rank() == 2,
            "matmul: operands must be rank 2, got " + sstr(ta) + " and " + sstr(tb));
    require(ta.cols() == tb.rows(),
            "matmul: inner extents differ, " + sstr(ta) + " vs " + sstr(tb));
    return push(GraphNode{Op::Matmul, {a, b}});
}

NodeId Graph::transpose(NodeId x) {
    require(value(x).rank() == 2, "transpose: rank 2 required, got " + sstr(value(x)));
    return push(GraphNode{Op::Transpose, {x}});
}

NodeId Graph::add_rowvec(NodeId x, NodeId v) {
    const Tensor& tx = value(x);
    const Tensor& tv = value(v);
    require(tx.rank() == 2 && tv.rank() == 1 && tx.cols() == tv.extent(0),
            "add_rowvec: shapes " + sstr(tx) + " and " + sstr(tv) + " do not align");
    return push(GraphNode{Op::AddRowVec, {x, v}});
}

NodeId Graph::layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps) {
    const Tensor& tx = value(x);
    require(tx.rank() >= 1, "layer_norm: rank >= 1 required");
    const std::size_t d = tx.shape().back();
    require(d >= 1, "layer_norm: empty last axis");
    require(eps >= 0.0, "layer_norm: eps must be >= 0");
    require(value(gamma).shape() == std::vector<std::size_t>{d} &&
                value(beta).shape() == std::vector<std::size_t>{d},
            "layer_norm: gamma/beta must be rank-1 of extent " + std::to_string(d));
    GraphNode n{Op::LayerNorm, {x, gamma, beta}};
    n.attr_f = eps;
    return push(std::move(n));
}

NodeId Graph::softmax(NodeId x) {
    require(value(x).rank() >= 1 && value(x).shape().back() >= 1,
            "softmax: nonempty last axis required, got " + sstr(value(x)));
    return push(GraphNode{Op::Softmax, {x}});
}

NodeId Graph::gelu(NodeId x) { return push(GraphNode{Op::Gelu, {x}}); }

NodeId Graph::mean_axis(NodeId x, std::size_t axis) {
    const Tensor& tx = value(x);
    require(axis < tx.rank(), "mean_axis: axis out of range for " + sstr(tx));
    require(tx.shape()[axis] >= 1, "mean_axis: empty axis");
    GraphNode n{Op::MeanAxis, {x}};
    n.attr_i0 = static_cast<std::int64_t>(axis);
    return push(std::move(n));
}

NodeId Graph::concat_rows(std::vector<NodeId> xs) {
    require(!xs.empty(), "concat_rows: needs at least one input");
    const std::size_t d = value(xs[0]).cols();
    for (NodeId x : xs) {
        require(value(x).rank() == 2 && value(x).cols() == d,
                "concat_rows: width mismatch at " + sstr(value(x)));
    }
    return push(GraphNode{Op::ConcatRows, std::move(xs)});
}

NodeId Graph::slice_rows(NodeId x, std::size_t r0, std::size_t r1) {
    const Tensor& tx = value(x);
    require(tx.rank() == 2 && r0 < r1 && r1 <= tx.rows(),
            "slice_rows: range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                ") invalid for " + sstr(tx));
    GraphNode n{Op::SliceRows, {x}};
    n.attr_i0 = static_cast<std::int64_t>(r0);
    n.attr_i1 = static_cast<std::int64_t>(r1);
    return push(std::move(n));
}

NodeId Graph::concat_cols(std::vector<NodeId> xs) {
    require(!xs.empty(), "concat_cols: needs at least one input");
    const std::size_t m = value(xs[0]).rows();
    for (NodeId x : xs) {
        require(value(x).rank() == 2 && value(x).rows() == m,
                "concat_cols: row-count mismatch at " + sstr(value(x)));
    }
    return push(GraphNode{Op::ConcatCols, std::move(xs)});
}

NodeId Graph::slice_cols(NodeId x, std::size_t c0, std::size_t c1) {
    const Tensor& tx = value(x);
    require(tx.rank() == 2 && c0 < c1 && c1 <= tx.cols(),
            "slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                ") invalid for " + sstr(tx));
    GraphNode n{Op::SliceCols, {x}};
    n.attr_i0 = static_cast<std::int64_t>(c0);
    n.attr_i1 = static_cast<std::int64_t>(c1);
    return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, std::vector<std::size_t> shape) {
    require(Tensor::shape_numel(shape) == value(x).numel(),
            "reshape: " + sstr(value(x)) + " to " + Tensor::shape_str(shape) +
                " changes element count");
    GraphNode n{Op::Reshape, {x}};
    n.attr_shape = std::move(shape);
    return push(std::move(n));
}

NodeId Graph::conv2d(NodeId in, NodeId kernel, NodeId bias, std::size_t stride, std::size_t pad) {
    const Tensor& ti = value(in);
    const Tensor& tk = value(kernel);
    const Tensor& tb = value(bias);
    require(ti.rank() == 3 && tk.rank() == 4 && tb.rank() == 1,
            "conv2d: expected input rank 3, kernel rank 4, bias rank 1");
    require(tk.extent(1) == ti.extent(0), "conv2d: channel mismatch, input " + sstr(ti) +
                                              " kernel " + sstr(tk));
    require(tb.extent(0) == tk.extent(0), "conv2d: bias " + sstr(tb) + " vs kernel " + sstr(tk));
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(ti.extent(1) + 2 * pad >= tk.extent(2) && ti.extent(2) + 2 * pad >= tk.extent(3),
            "conv2d: kernel larger than padded input");
    GraphNode n{Op::Conv2d, {in, kernel, bias}};
    n.attr_i0 = static_cast<std::int64_t>(stride);
    n.attr_i1 = static_cast<std::int64_t>(pad);
    return push(std::move(n));
}

NodeId Graph::cross_entropy(NodeId logits, std::size_t label) {
    const Tensor& tl = value(logits);
    require(tl.rank() == 1 && label < tl.extent(0),
            "cross_entropy: logits " + sstr(tl) + " with label " + std::to_string(label));
    GraphNode n{Op::CrossEntropy, {logits}};
    n.attr_i0 = static_cast<std::int64_t>(label);
    return push(std::move(n));
}

Tensor Graph::eval(const GraphNode& n) const {
    auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
    switch (n.op) {
        case Op::Input:
        case Op::Param:
            return n.value;
        case Op::Add: {
            Tensor out = in(0);
            const double* b = in(1).data();
            for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] += b[i];
            return out;
        }
        case Op::AddN: {
            Tensor out = in(0);
            for (std::size_t s = 1; s < n.inputs.size(); ++s) {
                const double* b = in(s).data();
                for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] += b[i];
            }
            return out;
        }
        case Op::MeanN: {
            Tensor out(in(0).shape());
            const std::size_t cnt = n.inputs.size();
            std::vector<double> vals(cnt);
            for (std::size_t i = 0; i < out.numel(); ++i) {
                for (std::size_t s = 0; s < cnt; ++s) vals[s] = in(s).data()[i];
                out.data()[i] = stable_mean(vals.data(), cnt, 1);
            }
            return out;
        }
        case Op::Scale: {
            Tensor out = in(0);
            for (double& v : out.values()) v *= n.attr_f;
            return out;
        }
        case Op::Matmul: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            Tensor out({a.rows(), b.cols()});
            matmul_accumulate(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
            return out;
        }
        case Op::Transpose: {
            const Tensor& x = in(0);
            Tensor out({x.cols(), x.rows()});
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (std::size_t j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
            return out;
        }
        case Op::AddRowVec: {
            Tensor out = in(0);
            const double* v = in(1).data();
            for (std::size_t i = 0; i < out.rows(); ++i)
                for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) += v[j];
            return out;
        }
        case Op::LayerNorm: {
            const Tensor& x = in(0);
            const double* gamma = in(1).data();
            const double* beta = in(2).data();
            const std::size_t d = x.shape().back();
            const std::size_t m = x.numel() / d;
            Tensor out(x.shape());
            for (std::size_t r = 0; r < m; ++r) {
                const double* xr = x.data() + r * d;
                double* yr = out.data() + r * d;
                double mu = 0.0;
                for (std::size_t j = 0; j < d; ++j) mu += xr[j];
                mu /= static_cast<double>(d);
                double var = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double c = xr[j] - mu;
                    var += c * c;
                }
                var /= static_cast<double>(d);
                const double inv = 1.0 / std::sqrt(var + n.attr_f);
                for (std::size_t j = 0; j < d; ++j)
                    yr[j] = gamma[j] * ((xr[j] - mu) * inv) + beta[j];
            }
            return out;
        }
        case Op::Softmax: {
            const Tensor& x = in(0);
            const std::size_t d = x.shape().back();
            const std::size_t m = x.numel() / d;
            Tensor out(x.shape());
            for (std::size_t r = 0; r < m; ++r) {
                const double* xr = x.data() + r * d;
                double* yr = out.data() + r * d;
                double mx = xr[0];
                for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
                double s = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    yr[j] = std::exp(xr[j] - mx);
                    s += yr[j];
                }
                for (std::size_t j = 0; j < d; ++j) yr[j] /= s;
            }
            return out;
        }
        case Op::Gelu: {
            Tensor out = in(0);
            for (double& v : out.values()) v = gelu_scalar(v);
            return out;
        }
        case Op::MeanAxis:
            return mean_over_axis(in(0), static_cast<std::size_t>(n.attr_i0));
        case Op::ConcatRows: {
            std::size_t total = 0;
            for (NodeId x : n.inputs) total += nodes_[x].value.rows();
            const std::size_t d = in(0).cols();
            Tensor out({total, d});
            std::size_t r = 0;
            for (NodeId x : n.inputs) {
                const Tensor& t = nodes_[x].value;
                std::copy(t.data(), t.data() + t.numel(), out.data() + r * d);
                r += t.rows();
            }
            return out;
        }
        case Op::SliceRows: {
            const Tensor& x = in(0);
            const auto r0 = static_cast<std::size_t>(n.attr_i0);
            const auto r1 = static_cast<std::size_t>(n.attr_i1);
            Tensor out({r1 - r0, x.cols()});
            std::copy(x.data() + r0 * x.cols(), x.data() + r1 * x.cols(), out.data());
            return out;
        }
        case Op::ConcatCols: {
            const std::size_t m = in(0).rows();
            std::size_t total = 0;
            for (NodeId x : n.inputs) total += nodes_[x].value.cols();
            Tensor out({m, total});
            std::size_t c = 0;
            for (NodeId x : n.inputs) {
                const Tensor& t = nodes_[x].value;
                for (std::size_t i = 0; i < m; ++i)
                    std::copy(t.data() + i * t.cols(), t.data() + (i + 1) * t.cols(),
                              out.data() + i * total + c);
                c += t.cols();
            }
            return out;
        }
        case Op::SliceCols: {
            const Tensor& x = in(0);
            const auto c0 = static_cast<std::size_t>(n.attr_i0);
            const auto c1 = static_cast<std::size_t>(n.attr_i1);
            Tensor out({x.rows(), c1 - c0});
            for (std::size_t i = 0; i < x.rows(); ++i)
                std::copy(x.data() + i * x.cols() + c0, x.data() + i * x.cols() + c1,
                          out.data() + i * (c1 - c0));
            return out;
        }
        case Op::Reshape:
            return Tensor(n.attr_shape, in(0).values());
        case Op::Conv2d: {
            const Tensor& x = in(0);
            const Tensor& k = in(1);
            const Tensor& b = in(2);
            const std::size_t ci = x.extent(0), h = x.extent(1), w = x.extent(2);
            const std::size_t co = k.extent(0), kh = k.extent(2), kw = k.extent(3);
            const auto s = static_cast<std::size_t>(n.attr_i0);
            const auto p = static_cast<std::size_t>(n.attr_i1);
            const std::size_t oh = (h + 2 * p - kh) / s + 1;
            const std::size_t ow = (w + 2 * p - kw) / s + 1;
            Tensor out({co, oh, ow});
            for (std::size_t o = 0; o < co; ++o) {
                for (std::size_t y = 0; y < oh; ++y) {
                    for (std::size_t xo = 0; xo < ow; ++xo) {
                        double acc = b.data()[o];
                        for (std::size_t c = 0; c < ci; ++c) {
                            for (std::size_t i = 0; i < kh; ++i) {
                                const std::int64_t yi =
                                    static_cast<std::int64_t>(y * s + i) - static_cast<std::int64_t>(p);
                                if (yi < 0 || yi >= static_cast<std::int64_t>(h)) continue;
                                for (std::size_t j = 0; j < kw; ++j) {
                                    const std::int64_t xi = static_cast<std::int64_t>(xo * s + j) -
                                                            static_cast<std::int64_t>(p);
                                    if (xi < 0 || xi >= static_cast<std::int64_t>(w)) continue;
                                    acc += x.data()[(c * h + yi) * w + xi] *
                                           k.data()[((o * ci + c) * kh + i) * kw + j];
                                }
                            }
                        }
                        out.data()[(o * oh + y) * ow + xo] = acc;
                    }
                }
            }
            return out;
        }
        case Op::CrossEntropy: {
            const Tensor& x = in(0);
            const std::size_t c = x.extent(0);
            double mx = x.data()[0];
            for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x.data()[j]);
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) s += std::exp(x.data()[j] - mx);
            const double lse = mx + std::log(s);
            return Tensor::scalar(lse - x.data()[static_cast<std::size_t>(n.attr_i0)]);
        }
    }
    throw NumericError("graph: unknown op");
}

bool Graph::replay_matches() const {
    for (const GraphNode& n : nodes_) {
        if (n.op == Op::Input || n.op == Op::Param) continue;
        const Tensor re = eval(n);
        if (re.shape() != n.value.shape()) return false;
        for (std::size_t i = 0; i < re.numel(); ++i) {
            if (re.data()[i] != n.value.data()[i]) return false;
        }
    }
    return true;
}

std::unordered_map<NodeId, Tensor> Graph::backward(NodeId loss) const {
    if (value(loss).numel() != 1) {
        throw DimensionError("backward: loss must be a scalar, got " + sstr(value(loss)));
    }
    std::vector<Tensor> grad(nodes_.size());
    std::vector<char> has(nodes_.size(), 0);
    auto g = [&](NodeId id) -> Tensor& {
        if (!has[id]) {
            grad[id] = Tensor(nodes_[id].value.shape());
            has[id] = 1;
        }
        return grad[id];
    };
    g(loss).data()[0] = 1.0;

    for (std::size_t id = loss + 1; id-- > 0;) {
        if (!has[id]) continue;
        const GraphNode& n = nodes_[id];
        const Tensor& dy = grad[id];
        auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
        switch (n.op) {
            case Op::Input:
            case Op::Param:
                break;
            case Op::Add: {
                for (std::size_t s = 0; s < 2; ++s) {
                    Tensor& gx = g(n.inputs[s]);
                    for (std::size_t i = 0; i < dy.numel(); ++i) gx.data()[i] += dy.data()[i];
                }
                break;
            }
            case Op::AddN: {
                for (NodeId x : n.inputs) {
                    Tensor& gx = g(x);
                    for (std::size_t i = 0; i < dy.numel(); ++i) gx.data()[i] += dy.data()[i];
                }
                break;
            }
            case Op::MeanN: {
                const double inv = 1.0 / static_cast<double>(n.inputs.size());
                for (NodeId x : n.inputs) {
                    Tensor& gx = g(x);
                    for (std::size_t i = 0; i < dy.numel(); ++i) gx.data()[i] += dy.data()[i] * inv;
                }
                break;
            }
            case Op::Scale: {
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t i = 0; i < dy.numel(); ++i) gx.data()[i] += dy.data()[i] * n.attr_f;
                break;
            }
            case Op::Matmul: {
                const Tensor& a = in(0);
                const Tensor& b = in(1);
                const std::size_t m = a.rows(), k = a.cols(), nn = b.cols();
                Tensor& ga = g(n.inputs[0]);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < nn; ++j) acc += dy.at(i, j) * b.at(p, j);
                        ga.at(i, p) += acc;
                    }
                Tensor& gb = g(n.inputs[1]);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = a.at(i, p);
                        for (std::size_t j = 0; j < nn; ++j) gb.at(p, j) += aip * dy.at(i, j);
                    }
                break;
            }
            case Op::Transpose: {
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t i = 0; i < gx.rows(); ++i)
                    for (std::size_t j = 0; j < gx.cols(); ++j) gx.at(i, j) += dy.at(j, i);
                break;
            }
            case Op::AddRowVec: {
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t i = 0; i < dy.numel(); ++i) gx.data()[i] += dy.data()[i];
                Tensor& gv = g(n.inputs[1]);
                for (std::size_t i = 0; i < dy.rows(); ++i)
                    for (std::size_t j = 0; j < dy.cols(); ++j) gv.data()[j] += dy.at(i, j);
                break;
            }
            case Op::LayerNorm: {
                const Tensor& x = in(0);
                const double* gamma = in(1).data();
                const std::size_t d = x.shape().back();
                const std::size_t m = x.numel() / d;
                Tensor& gx = g(n.inputs[0]);
                Tensor& gg = g(n.inputs[1]);
                Tensor& gb = g(n.inputs[2]);
                std::vector<double> xhat(d), gr(d);
                for (std::size_t r = 0; r < m; ++r) {
                    const double* xr = x.data() + r * d;
                    const double* dyr = dy.data() + r * d;
                    double mu = 0.0;
                    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
                    mu /= static_cast<double>(d);
                    double var = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double c = xr[j] - mu;
                        var += c * c;
                    }
                    var /= static_cast<double>(d);
                    const double inv = 1.0 / std::sqrt(var + n.attr_f);
                    double mg = 0.0, mgx = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        xhat[j] = (xr[j] - mu) * inv;
                        gr[j] = dyr[j] * gamma[j];
                        mg += gr[j];
                        mgx += gr[j] * xhat[j];
                    }
                    mg /= static_cast<double>(d);
                    mgx /= static_cast<double>(d);
                    double* gxr = gx.data() + r * d;
                    for (std::size_t j = 0; j < d; ++j) {
                        gxr[j] += (gr[j] - mg - xhat[j] * mgx) * inv;
                        gg.data()[j] += dyr[j] * xhat[j];
                        gb.data()[j] += dyr[j];
                    }
                }
                break;
            }
            case Op::Softmax: {
                const Tensor& y = n.value;
                const std::size_t d = y.shape().back();
                const std::size_t m = y.numel() / d;
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t r = 0; r < m; ++r) {
                    const double* yr = y.data() + r * d;
                    const double* dyr = dy.data() + r * d;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < d; ++j) dot += dyr[j] * yr[j];
                    double* gxr = gx.data() + r * d;
                    for (std::size_t j = 0; j < d; ++j) gxr[j] += yr[j] * (dyr[j] - dot);
                }
                break;
            }
            case Op::Gelu: {
                const Tensor& x = in(0);
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t i = 0; i < x.numel(); ++i)
                    gx.data()[i] += dy.data()[i] * gelu_grad_scalar(x.data()[i]);
                break;
            }
            case Op::MeanAxis: {
                const Tensor& x = in(0);
                const auto axis = static_cast<std::size_t>(n.attr_i0);
                const std::size_t extent = x.shape()[axis];
                std::size_t outer = 1, inner = 1;
                for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
                for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
                const double inv = 1.0 / static_cast<double>(extent);
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t t = 0; t < extent; ++t)
                        for (std::size_t i = 0; i < inner; ++i)
                            gx.data()[(o * extent + t) * inner + i] +=
                                dy.data()[o * inner + i] * inv;
                break;
            }
            case Op::ConcatRows: {
                const std::size_t d = n.value.cols();
                std::size_t r = 0;
                for (NodeId x : n.inputs) {
                    Tensor& gx = g(x);
                    const std::size_t rows = nodes_[x].value.rows();
                    for (std::size_t i = 0; i < rows * d; ++i)
                        gx.data()[i] += dy.data()[r * d + i];
                    r += rows;
                }
                break;
            }
            case Op::SliceRows: {
                const Tensor& x = in(0);
                const auto r0 = static_cast<std::size_t>(n.attr_i0);
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t i = 0; i < dy.numel(); ++i)
                    gx.data()[r0 * x.cols() + i] += dy.data()[i];
                break;
            }
            case Op::ConcatCols: {
                const std::size_t m = n.value.rows();
                const std::size_t total = n.value.cols();
                std::size_t c = 0;
                for (NodeId x : n.inputs) {
                    Tensor& gx = g(x);
                    const std::size_t cols = nodes_[x].value.cols();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < cols; ++j)
                            gx.at(i, j) += dy.data()[i * total + c + j];
                    c += cols;
                }
                break;
            }
            case Op::SliceCols: {
                const Tensor& x = in(0);
                const auto c0 = static_cast<std::size_t>(n.attr_i0);
                const std::size_t w = dy.cols();
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t i = 0; i < dy.rows(); ++i)
                    for (std::size_t j = 0; j < w; ++j) gx.at(i, c0 + j) += dy.at(i, j);
                break;
            }
            case Op::Reshape: {
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t i = 0; i < dy.numel(); ++i) gx.data()[i] += dy.data()[i];
                break;
            }
            case Op::Conv2d: {
                const Tensor& x = in(0);
                const Tensor& k = in(1);
                const std::size_t ci = x.extent(0), h = x.extent(1), w = x.extent(2);
                const std::size_t co = k.extent(0), kh = k.extent(2), kw = k.extent(3);
                const auto s = static_cast<std::size_t>(n.attr_i0);
                const auto p = static_cast<std::size_t>(n.attr_i1);
                const std::size_t oh = n.value.extent(1), ow = n.value.extent(2);
                Tensor& gx = g(n.inputs[0]);
                Tensor& gk = g(n.inputs[1]);
                Tensor& gb = g(n.inputs[2]);
                for (std::size_t o = 0; o < co; ++o) {
                    for (std::size_t y = 0; y < oh; ++y) {
                        for (std::size_t xo = 0; xo < ow; ++xo) {
                            const double d = dy.data()[(o * oh + y) * ow + xo];
                            gb.data()[o] += d;
                            for (std::size_t c = 0; c < ci; ++c) {
                                for (std::size_t i = 0; i < kh; ++i) {
                                    const std::int64_t yi = static_cast<std::int64_t>(y * s + i) -
                                                            static_cast<std::int64_t>(p);
                                    if (yi < 0 || yi >= static_cast<std::int64_t>(h)) continue;
                                    for (std::size_t j = 0; j < kw; ++j) {
                                        const std::int64_t xi =
                                            static_cast<std::int64_t>(xo * s + j) -
                                            static_cast<std::int64_t>(p);
                                        if (xi < 0 || xi >= static_cast<std::int64_t>(w)) continue;
                                        gx.data()[(c * h + yi) * w + xi] +=
                                            d * k.data()[((o * ci + c) * kh + i) * kw + j];
                                        gk.data()[((o * ci + c) * kh + i) * kw + j] +=
                                            d * x.data()[(c * h + yi) * w + xi];
                                    }
                                }
                            }
                        }
                    }
                }
                break;
            }
            case Op::CrossEntropy: {
                const Tensor& x = in(0);
                const std::size_t c = x.extent(0);
                const auto label = static_cast<std::size_t>(n.attr_i0);
                double mx = x.data()[0];
                for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x.data()[j]);
                double s = 0.0;
                for (std::size_t j = 0; j < c; ++j) s += std::exp(x.data()[j] - mx);
                const double d = dy.data()[0];
                Tensor& gx = g(n.inputs[0]);
                for (std::size_t j = 0; j < c; ++j) {
                    const double prob = std::exp(x.data()[j] - mx) / s;
                    gx.data()[j] += d * (prob - (j == label ? 1.0 : 0.0));
                }
                break;
            }
        }
    }

    std::unordered_map<NodeId, Tensor> result;
    result.reserve(params_.size());
    for (NodeId pid : params_) {
        if (pid <= loss && has[pid]) {
            result.emplace(pid, std::move(grad[pid]));
        } else {
            result.emplace(pid, Tensor(nodes_[pid].value.shape()));
        }
    }
    return result;
}

}  // namespace stpn
