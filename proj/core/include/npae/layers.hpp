#pragma once

#include <map>
#include <string>

#include "npae/tensor.hpp"

namespace npae {

enum class LayerKind {
    Conv,
    FullyConnected,
    AvgPool,
    BilinearUpsample,
    BatchNorm,
    Elu,
    Tanh,
};

enum class Mode { Train, Infer };

/// Hyperparameters of one layer. Only the fields relevant to `kind` are
/// meaningful; validate_layer_spec rejects inconsistent combinations.
struct LayerSpec {
    LayerKind kind = LayerKind::Elu;

    // Conv
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int pad = 0;

    // FullyConnected
    int in_features = 0;
    int out_features = 0;

    // AvgPool window (stride equals window)
    int pool = 2;

    // BilinearUpsample integer scale factor
    int scale = 2;

    // BatchNorm
    int channels = 0;
    double epsilon = 1e-5;
    double momentum = 0.9;

    static LayerSpec conv(int in_ch, int out_ch, int kernel, int stride = 1, int pad = -1);
    static LayerSpec fully_connected(int in_features, int out_features);
    static LayerSpec avg_pool(int window = 2);
    static LayerSpec bilinear_upsample(int scale = 2);
    static LayerSpec batch_norm(int channels, double epsilon = 1e-5, double momentum = 0.9);
    static LayerSpec elu();
    static LayerSpec tanh();
};

void validate_layer_spec(const LayerSpec& spec);

/// A layer plus its named parameter tensors. Batch-norm keeps its
/// running statistics here as well ("running_mean"/"running_var"); they
/// are state, not trainable parameters, and trainable_parameter_names
/// excludes them.
struct Layer {
    LayerSpec spec;
    std::map<std::string, Tensor> params;
};

/// Build a layer with zero-initialised parameters of the right shapes.
Layer make_layer(const LayerSpec& spec);

/// Names of the tensors adjusted by the optimizer, in a fixed order.
std::vector<std::string> trainable_parameter_names(const LayerSpec& spec);

/// Expected output shape for a given input shape (throws on mismatch).
std::vector<int> output_shape(const LayerSpec& spec, const std::vector<int>& input_shape);

/// Run one layer. Spatial layers take [N, C, H, W]; fully-connected
/// takes [N, D]; elementwise layers take any shape. Train-mode
/// batch-norm normalises with batch statistics and updates the running
/// statistics in place; infer mode is pure and uses the running ones.
Tensor forward(Layer& layer, const Tensor& input, Mode mode);

/// Pure forward; rejects train-mode batch-norm (which mutates state).
Tensor forward(const Layer& layer, const Tensor& input, Mode mode);

struct BackwardResult {
    Tensor input_grad;
    std::map<std::string, Tensor> param_grads;
};

/// Gradients of sum(forward(input) * upstream) with respect to the
/// input and each trainable parameter. Recomputes whatever forward
/// intermediates it needs from `input`; train-mode batch-norm
/// differentiates through the batch statistics.
BackwardResult backward(const Layer& layer, const Tensor& input, const Tensor& upstream,
                        Mode mode = Mode::Train);

struct L1Loss {
    double loss = 0.0;
    Tensor grad;  // d loss / d prediction
};

/// Mean absolute difference and its subgradient (0 at exact ties).
L1Loss l1_loss(const Tensor& prediction, const Tensor& target);

}  // namespace npae
