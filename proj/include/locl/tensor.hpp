#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "locl/common.hpp"

namespace locl {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // optional; empty or same length as values

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
        values.assign(numel_of(shape), fill);
    }

    std::size_t numel() const { return values.size(); }
    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }
    std::size_t dim(std::size_t i) const { return shape[i]; }
};

struct ParamRef {
    std::vector<double>* w = nullptr;
    std::vector<double>* g = nullptr;
    std::string name;
};

struct LayerConfig {
    std::size_t in_channels = 0, out_channels = 0, kernel = 0;  // conv1d
    std::size_t in = 0, out = 0;                                // dense
    std::size_t factor = 0;                                     // pool / upsample
    double slope = 0.0;                                         // leakyrelu
    std::vector<std::size_t> target_shape;                      // reshape (without batch dim)
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<ParamRef> params() { return {}; }
    virtual std::string kind() const = 0;
    virtual LayerConfig config() const = 0;
    void zero_grad();
};

// 1-D convolution, stride 1, odd kernel, zero "same" padding.
class Conv1d final : public Layer {
public:
    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;
    std::string kind() const override { return "conv1d"; }
    LayerConfig config() const override;

    std::vector<double> weight;  // (out, in, k)
    std::vector<double> bias;    // (out)
    std::vector<double> weight_grad;
    std::vector<double> bias_grad;
    std::size_t in_c, out_c, k;

private:
    Tensor input_;
};

class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;
    std::string kind() const override { return "dense"; }
    LayerConfig config() const override;

    std::vector<double> weight;  // (out, in)
    std::vector<double> bias;    // (out)
    std::vector<double> weight_grad;
    std::vector<double> bias_grad;
    std::size_t in_n, out_n;

private:
    Tensor input_;  // flattened to n x in
    std::vector<std::size_t> input_shape_;
};

class MaxPool1d final : public Layer {
public:
    explicit MaxPool1d(std::size_t factor) : factor_(factor) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string kind() const override { return "maxpool1d"; }
    LayerConfig config() const override;

private:
    std::size_t factor_;
    std::vector<std::size_t> argmax_;
    std::vector<std::size_t> in_shape_;
};

class Upsample1d final : public Layer {
public:
    explicit Upsample1d(std::size_t factor) : factor_(factor) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string kind() const override { return "upsample1d"; }
    LayerConfig config() const override;

private:
    std::size_t factor_;
    std::vector<std::size_t> in_shape_;
};

class LeakyRelu final : public Layer {
public:
    explicit LeakyRelu(double slope) : slope_(slope) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string kind() const override { return "leakyrelu"; }
    LayerConfig config() const override;

private:
    double slope_;
    Tensor input_;
};

// n x C x L  <->  n x (C*L)
class Flatten final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string kind() const override { return "flatten"; }
    LayerConfig config() const override { return {}; }

private:
    std::vector<std::size_t> in_shape_;
};

class Reshape final : public Layer {
public:
    explicit Reshape(std::vector<std::size_t> target) : target_(std::move(target)) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string kind() const override { return "reshape"; }
    LayerConfig config() const override;

private:
    std::vector<std::size_t> target_;  // per-sample shape
    std::vector<std::size_t> in_shape_;
};

// Per-dimension batch standardization across the batch (population variance).
struct BatchNormCache {
    std::vector<double> mean, var;
    Matrix input;
    double eps = 1e-5;
};

Matrix batchnorm_batch(const Matrix& z, BatchNormCache& cache, double eps = 1e-5);
Matrix batchnorm_backward(const BatchNormCache& cache, const Matrix& grad_norm);

class Sequential {
public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);
    std::vector<ParamRef> params();
    void zero_grad();
    std::vector<Layer*> layers() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Glorot-uniform init over every parameter tensor of the model, seeded.
void init_weights(Sequential& model, std::uint64_t seed);

struct RmsProp {
    double learning_rate = 0.001;
    double decay = 0.9;
    double epsilon = 1e-8;
    std::vector<std::vector<double>> acc;  // parallel to params()

    void step(const std::vector<ParamRef>& params);
};

}  // namespace locl
