#include "locl/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace locl {

void Layer::zero_grad() {
    for (auto& p : params()) std::fill(p.g->begin(), p.g->end(), 0.0);
}

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel)
    : in_c(in_channels), out_c(out_channels), k(kernel) {
    if (kernel % 2 == 0) throw LoclError("conv1d kernel must be odd");
    weight.assign(out_c * in_c * k, 0.0);
    bias.assign(out_c, 0.0);
    weight_grad.assign(weight.size(), 0.0);
    bias_grad.assign(bias.size(), 0.0);
}

LayerConfig Conv1d::config() const {
    LayerConfig c;
    c.in_channels = in_c;
    c.out_channels = out_c;
    c.kernel = k;
    return c;
}

std::vector<ParamRef> Conv1d::params() {
    return {{&weight, &weight_grad, "conv1d.weight"}, {&bias, &bias_grad, "conv1d.bias"}};
}

Tensor Conv1d::forward(const Tensor& x) {
    if (x.shape.size() != 3 || x.shape[1] != in_c)
        throw LoclError("conv1d: expected input n x " + std::to_string(in_c) + " x L");
    input_ = x;
    const std::size_t n = x.shape[0], L = x.shape[2];
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);

    Tensor y({n, out_c, L});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t oc = 0; oc < out_c; ++oc) {
            for (std::size_t t = 0; t < L; ++t) {
                double acc = bias[oc];
                for (std::size_t ic = 0; ic < in_c; ++ic) {
                    const double* xp = &x.values[(b * in_c + ic) * L];
                    const double* wp = &weight[(oc * in_c + ic) * k];
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + kk) - pad;
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                        acc += wp[kk] * xp[src];
                    }
                }
                y.values[(b * out_c + oc) * L + t] = acc;
            }
        }
    }
    return y;
}

Tensor Conv1d::backward(const Tensor& grad_out) {
    const std::size_t n = input_.shape[0], L = input_.shape[2];
    if (grad_out.shape != std::vector<std::size_t>{n, out_c, L})
        throw LoclError("conv1d backward: gradient shape mismatch");
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);

    Tensor gx(input_.shape);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t oc = 0; oc < out_c; ++oc) {
            const double* gp = &grad_out.values[(b * out_c + oc) * L];
            for (std::size_t t = 0; t < L; ++t) {
                const double g = gp[t];
                bias_grad[oc] += g;
                for (std::size_t ic = 0; ic < in_c; ++ic) {
                    const double* xp = &input_.values[(b * in_c + ic) * L];
                    double* gxp = &gx.values[(b * in_c + ic) * L];
                    double* wgp = &weight_grad[(oc * in_c + ic) * k];
                    const double* wp = &weight[(oc * in_c + ic) * k];
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + kk) - pad;
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                        wgp[kk] += g * xp[src];
                        gxp[src] += g * wp[kk];
                    }
                }
            }
        }
    }
    return gx;
}

Dense::Dense(std::size_t in, std::size_t out) : in_n(in), out_n(out) {
    weight.assign(out_n * in_n, 0.0);
    bias.assign(out_n, 0.0);
    weight_grad.assign(weight.size(), 0.0);
    bias_grad.assign(bias.size(), 0.0);
}

LayerConfig Dense::config() const {
    LayerConfig c;
    c.in = in_n;
    c.out = out_n;
    return c;
}

std::vector<ParamRef> Dense::params() {
    return {{&weight, &weight_grad, "dense.weight"}, {&bias, &bias_grad, "dense.bias"}};
}

Tensor Dense::forward(const Tensor& x) {
    const std::size_t n = x.shape[0];
    if (x.numel() != n * in_n) throw LoclError("dense: input width mismatch");
    input_shape_ = x.shape;
    input_ = x;
    input_.shape = {n, in_n};

    Tensor y({n, out_n});
    for (std::size_t b = 0; b < n; ++b) {
        const double* xp = &input_.values[b * in_n];
        for (std::size_t o = 0; o < out_n; ++o) {
            double acc = bias[o];
            const double* wp = &weight[o * in_n];
            for (std::size_t i = 0; i < in_n; ++i) acc += wp[i] * xp[i];
            y.values[b * out_n + o] = acc;
        }
    }
    return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
    const std::size_t n = input_.shape[0];
    if (grad_out.numel() != n * out_n) throw LoclError("dense backward: gradient shape mismatch");

    Tensor gx(input_shape_);
    for (std::size_t b = 0; b < n; ++b) {
        const double* gp = &grad_out.values[b * out_n];
        const double* xp = &input_.values[b * in_n];
        double* gxp = &gx.values[b * in_n];
        for (std::size_t o = 0; o < out_n; ++o) {
            const double g = gp[o];
            bias_grad[o] += g;
            double* wgp = &weight_grad[o * in_n];
            const double* wp = &weight[o * in_n];
            for (std::size_t i = 0; i < in_n; ++i) {
                wgp[i] += g * xp[i];
                gxp[i] += g * wp[i];
            }
        }
    }
    return gx;
}

LayerConfig MaxPool1d::config() const {
    LayerConfig c;
    c.factor = factor_;
    return c;
}

Tensor MaxPool1d::forward(const Tensor& x) {
    if (x.shape.size() != 3) throw LoclError("maxpool1d: expected n x C x L input");
    const std::size_t n = x.shape[0], C = x.shape[1], L = x.shape[2];
    if (L % factor_ != 0) throw LoclError("maxpool1d: length not divisible by factor");
    in_shape_ = x.shape;
    const std::size_t Lo = L / factor_;

    Tensor y({n, C, Lo});
    argmax_.assign(n * C * Lo, 0);
    for (std::size_t bc = 0; bc < n * C; ++bc) {
        const double* xp = &x.values[bc * L];
        for (std::size_t t = 0; t < Lo; ++t) {
            std::size_t best = t * factor_;
            for (std::size_t f = 1; f < factor_; ++f)
                if (xp[t * factor_ + f] > xp[best]) best = t * factor_ + f;  // ties keep lowest index
            y.values[bc * Lo + t] = xp[best];
            argmax_[bc * Lo + t] = best;
        }
    }
    return y;
}

Tensor MaxPool1d::backward(const Tensor& grad_out) {
    Tensor gx(in_shape_);
    const std::size_t L = in_shape_[2];
    const std::size_t Lo = L / factor_;
    for (std::size_t bc = 0; bc < in_shape_[0] * in_shape_[1]; ++bc)
        for (std::size_t t = 0; t < Lo; ++t)
            gx.values[bc * L + argmax_[bc * Lo + t]] += grad_out.values[bc * Lo + t];
    return gx;
}

LayerConfig Upsample1d::config() const {
    LayerConfig c;
    c.factor = factor_;
    return c;
}

Tensor Upsample1d::forward(const Tensor& x) {
    if (x.shape.size() != 3) throw LoclError("upsample1d: expected n x C x L input");
    in_shape_ = x.shape;
    const std::size_t L = x.shape[2], Lo = L * factor_;
    Tensor y({x.shape[0], x.shape[1], Lo});
    for (std::size_t bc = 0; bc < x.shape[0] * x.shape[1]; ++bc)
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t f = 0; f < factor_; ++f)
                y.values[bc * Lo + t * factor_ + f] = x.values[bc * L + t];
    return y;
}

Tensor Upsample1d::backward(const Tensor& grad_out) {
    Tensor gx(in_shape_);
    const std::size_t L = in_shape_[2], Lo = L * factor_;
    for (std::size_t bc = 0; bc < in_shape_[0] * in_shape_[1]; ++bc)
        for (std::size_t t = 0; t < L; ++t) {
            double s = 0.0;
            for (std::size_t f = 0; f < factor_; ++f) s += grad_out.values[bc * Lo + t * factor_ + f];
            gx.values[bc * L + t] = s;
        }
    return gx;
}

LayerConfig LeakyRelu::config() const {
    LayerConfig c;
    c.slope = slope_;
    return c;
}

Tensor LeakyRelu::forward(const Tensor& x) {
    input_ = x;
    Tensor y = x;
    for (auto& v : y.values) v = v >= 0.0 ? v : slope_ * v;
    return y;
}

Tensor LeakyRelu::backward(const Tensor& grad_out) {
    Tensor gx = grad_out;
    for (std::size_t i = 0; i < gx.values.size(); ++i)
        if (input_.values[i] < 0.0) gx.values[i] *= slope_;
    return gx;
}

Tensor Flatten::forward(const Tensor& x) {
    in_shape_ = x.shape;
    Tensor y = x;
    y.shape = {x.shape[0], x.numel() / x.shape[0]};
    return y;
}

Tensor Flatten::backward(const Tensor& grad_out) {
    Tensor gx = grad_out;
    gx.shape = in_shape_;
    return gx;
}

LayerConfig Reshape::config() const {
    LayerConfig c;
    c.target_shape = target_;
    return c;
}

Tensor Reshape::forward(const Tensor& x) {
    in_shape_ = x.shape;
    std::vector<std::size_t> shape{x.shape[0]};
    shape.insert(shape.end(), target_.begin(), target_.end());
    if (Tensor::numel_of(shape) != x.numel()) throw LoclError("reshape: element count mismatch");
    Tensor y = x;
    y.shape = shape;
    return y;
}

Tensor Reshape::backward(const Tensor& grad_out) {
    Tensor gx = grad_out;
    gx.shape = in_shape_;
    return gx;
}

Matrix batchnorm_batch(const Matrix& z, BatchNormCache& cache, double eps) {
    if (z.rows < 2) throw LoclError("batchnorm requires batch size >= 2");
    cache.eps = eps;
    cache.input = z;
    cache.mean.assign(z.cols, 0.0);
    cache.var.assign(z.cols, 0.0);
    const double n = static_cast<double>(z.rows);
    for (std::size_t c = 0; c < z.cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < z.rows; ++r) s += z.at(r, c);
        cache.mean[c] = s / n;
        double ss = 0.0;
        for (std::size_t r = 0; r < z.rows; ++r) {
            const double d = z.at(r, c) - cache.mean[c];
            ss += d * d;
        }
        cache.var[c] = ss / n;
    }
    Matrix out(z.rows, z.cols);
    for (std::size_t c = 0; c < z.cols; ++c) {
        const double inv = 1.0 / std::sqrt(cache.var[c] + eps);
        for (std::size_t r = 0; r < z.rows; ++r)
            out.at(r, c) = (z.at(r, c) - cache.mean[c]) * inv;
    }
    return out;
}

Matrix batchnorm_backward(const BatchNormCache& cache, const Matrix& grad_norm) {
    const Matrix& z = cache.input;
    const double n = static_cast<double>(z.rows);
    Matrix gx(z.rows, z.cols);
    for (std::size_t c = 0; c < z.cols; ++c) {
        const double inv = 1.0 / std::sqrt(cache.var[c] + cache.eps);
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t r = 0; r < z.rows; ++r) {
            const double xc = z.at(r, c) - cache.mean[c];
            sum_g += grad_norm.at(r, c);
            sum_gx += grad_norm.at(r, c) * xc;
        }
        for (std::size_t r = 0; r < z.rows; ++r) {
            const double xc = z.at(r, c) - cache.mean[c];
            gx.at(r, c) = inv * (grad_norm.at(r, c) - sum_g / n - xc * inv * inv * sum_gx / n);
        }
    }
    return gx;
}

Tensor Sequential::forward(const Tensor& x) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur);
    return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor cur = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

std::vector<ParamRef> Sequential::params() {
    std::vector<ParamRef> out;
    for (auto& layer : layers_)
        for (auto& p : layer->params()) out.push_back(p);
    return out;
}

void Sequential::zero_grad() {
    for (auto& layer : layers_) layer->zero_grad();
}

std::vector<Layer*> Sequential::layers() const {
    std::vector<Layer*> out;
    for (const auto& l : layers_) out.push_back(l.get());
    return out;
}

void init_weights(Sequential& model, std::uint64_t seed) {
    Rng rng(Rng::derive(seed, 0x1417));
    for (Layer* layer : model.layers()) {
        std::size_t fan_in = 0, fan_out = 0;
        if (auto* c = dynamic_cast<Conv1d*>(layer)) {
            fan_in = c->in_c * c->k;
            fan_out = c->out_c * c->k;
        } else if (auto* d = dynamic_cast<Dense*>(layer)) {
            fan_in = d->in_n;
            fan_out = d->out_n;
        } else {
            continue;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        auto ps = layer->params();
        for (auto& v : *ps[0].w) v = (rng.next_double() * 2.0 - 1.0) * bound;
        std::fill(ps[1].w->begin(), ps[1].w->end(), 0.0);
    }
}

void RmsProp::step(const std::vector<ParamRef>& params) {
    if (acc.size() != params.size()) {
        acc.clear();
        for (const auto& p : params) acc.emplace_back(p.w->size(), 0.0);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = *params[i].w;
        auto& g = *params[i].g;
        auto& a = acc[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (!std::isfinite(g[j]))
                throw LoclError("non-finite gradient in parameter " + params[i].name);
            a[j] = decay * a[j] + (1.0 - decay) * g[j] * g[j];
            w[j] -= learning_rate * g[j] / (std::sqrt(a[j]) + epsilon);
        }
    }
}

}  // namespace locl
