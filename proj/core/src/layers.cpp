#include "npae/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "npae/errors.hpp"

namespace npae {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

void require_input_shape(const LayerSpec& spec, const Tensor& input) {
    switch (spec.kind) {
        case LayerKind::Conv:
            require(input.rank() == 4, "conv expects [N,C,H,W] input");
            require(input.extent(1) == spec.in_channels,
                    "conv input channel count mismatch: got " + input.shape_string());
            require(input.extent(2) + 2 * spec.pad >= spec.kernel &&
                        input.extent(3) + 2 * spec.pad >= spec.kernel,
                    "conv input smaller than kernel");
            break;
        case LayerKind::FullyConnected:
            require(input.rank() == 2, "fully-connected expects [N,D] input");
            require(input.extent(1) == spec.in_features,
                    "fully-connected input width mismatch: got " + input.shape_string());
            break;
        case LayerKind::AvgPool:
            require(input.rank() == 4, "avg-pool expects [N,C,H,W] input");
            require(input.extent(2) % spec.pool == 0 && input.extent(3) % spec.pool == 0,
                    "avg-pool requires extents divisible by the window");
            break;
        case LayerKind::BilinearUpsample:
            require(input.rank() == 4, "bilinear-upsample expects [N,C,H,W] input");
            break;
        case LayerKind::BatchNorm:
            require(input.rank() == 4, "batch-norm expects [N,C,H,W] input");
            require(input.extent(1) == spec.channels,
                    "batch-norm channel count mismatch: got " + input.shape_string());
            break;
        case LayerKind::Elu:
        case LayerKind::Tanh:
            break;
    }
}

// ---- convolution -----------------------------------------------------

struct ConvDims {
    int in_h, in_w, out_h, out_w, patch;  // patch = in_channels * kernel^2
};

ConvDims conv_dims(const LayerSpec& s, const Tensor& input) {
    ConvDims d;
    d.in_h = input.extent(2);
    d.in_w = input.extent(3);
    d.out_h = (d.in_h + 2 * s.pad - s.kernel) / s.stride + 1;
    d.out_w = (d.in_w + 2 * s.pad - s.kernel) / s.stride + 1;
    d.patch = s.in_channels * s.kernel * s.kernel;
    return d;
}

// Unpack one image [C,H,W] into a patch matrix [patch x (out_h*out_w)].
void im2col(const LayerSpec& s, const ConvDims& d, const double* img, double* cols) {
    const int k = s.kernel;
    const std::int64_t out_hw = static_cast<std::int64_t>(d.out_h) * d.out_w;
    for (int c = 0; c < s.in_channels; ++c) {
        const double* plane = img + static_cast<std::int64_t>(c) * d.in_h * d.in_w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                double* row = cols + (static_cast<std::int64_t>(c) * k * k + ki * k + kj) * out_hw;
                for (int oi = 0; oi < d.out_h; ++oi) {
                    const int y = oi * s.stride - s.pad + ki;
                    if (y < 0 || y >= d.in_h) {
                        for (int oj = 0; oj < d.out_w; ++oj) row[oi * d.out_w + oj] = 0.0;
                        continue;
                    }
                    const double* src = plane + static_cast<std::int64_t>(y) * d.in_w;
                    for (int oj = 0; oj < d.out_w; ++oj) {
                        const int x = oj * s.stride - s.pad + kj;
                        row[oi * d.out_w + oj] = (x >= 0 && x < d.in_w) ? src[x] : 0.0;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add the patch matrix back into an image.
void col2im(const LayerSpec& s, const ConvDims& d, const double* cols, double* img) {
    const int k = s.kernel;
    const std::int64_t out_hw = static_cast<std::int64_t>(d.out_h) * d.out_w;
    for (int c = 0; c < s.in_channels; ++c) {
        double* plane = img + static_cast<std::int64_t>(c) * d.in_h * d.in_w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const double* row =
                    cols + (static_cast<std::int64_t>(c) * k * k + ki * k + kj) * out_hw;
                for (int oi = 0; oi < d.out_h; ++oi) {
                    const int y = oi * s.stride - s.pad + ki;
                    if (y < 0 || y >= d.in_h) continue;
                    double* dst = plane + static_cast<std::int64_t>(y) * d.in_w;
                    for (int oj = 0; oj < d.out_w; ++oj) {
                        const int x = oj * s.stride - s.pad + kj;
                        if (x >= 0 && x < d.in_w) dst[x] += row[oi * d.out_w + oj];
                    }
                }
            }
        }
    }
}

Tensor conv_forward(const LayerSpec& s, const std::map<std::string, Tensor>& params,
                    const Tensor& input) {
    const ConvDims d = conv_dims(s, input);
    const int n = input.extent(0);
    const std::int64_t out_hw = static_cast<std::int64_t>(d.out_h) * d.out_w;
    const std::int64_t in_sz = static_cast<std::int64_t>(s.in_channels) * d.in_h * d.in_w;
    const std::int64_t out_sz = static_cast<std::int64_t>(s.out_channels) * out_hw;

    const Tensor& weight = params.at("weight");
    const Tensor& bias = params.at("bias");
    Tensor out({n, s.out_channels, d.out_h, d.out_w});
    std::vector<double> cols(static_cast<std::size_t>(d.patch) * out_hw);

    ConstMapRM w(weight.data(), s.out_channels, d.patch);
    for (int i = 0; i < n; ++i) {
        im2col(s, d, input.data() + i * in_sz, cols.data());
        ConstMapRM c(cols.data(), d.patch, out_hw);
        MapRM o(out.data() + i * out_sz, s.out_channels, out_hw);
        o.noalias() = w * c;
        for (int f = 0; f < s.out_channels; ++f) o.row(f).array() += bias[f];
    }
    return out;
}

BackwardResult conv_backward(const LayerSpec& s, const std::map<std::string, Tensor>& params,
                             const Tensor& input, const Tensor& upstream) {
    const ConvDims d = conv_dims(s, input);
    const int n = input.extent(0);
    const std::int64_t out_hw = static_cast<std::int64_t>(d.out_h) * d.out_w;
    const std::int64_t in_sz = static_cast<std::int64_t>(s.in_channels) * d.in_h * d.in_w;
    const std::int64_t out_sz = static_cast<std::int64_t>(s.out_channels) * out_hw;

    const Tensor& weight = params.at("weight");
    BackwardResult r;
    r.input_grad = Tensor(input.shape());
    Tensor dw(weight.shape());
    Tensor db({s.out_channels});

    std::vector<double> cols(static_cast<std::size_t>(d.patch) * out_hw);
    std::vector<double> dcols(cols.size());

    ConstMapRM w(weight.data(), s.out_channels, d.patch);
    MapRM dwm(dw.data(), s.out_channels, d.patch);
    for (int i = 0; i < n; ++i) {
        ConstMapRM up(upstream.data() + i * out_sz, s.out_channels, out_hw);
        im2col(s, d, input.data() + i * in_sz, cols.data());
        ConstMapRM c(cols.data(), d.patch, out_hw);
        dwm.noalias() += up * c.transpose();
        for (int f = 0; f < s.out_channels; ++f) db[f] += up.row(f).sum();

        MapRM dc(dcols.data(), d.patch, out_hw);
        dc.noalias() = w.transpose() * up;
        col2im(s, d, dcols.data(), r.input_grad.data() + i * in_sz);
    }
    r.param_grads.emplace("weight", std::move(dw));
    r.param_grads.emplace("bias", std::move(db));
    return r;
}

// ---- fully connected --------------------------------------------------

Tensor fc_forward(const LayerSpec& s, const std::map<std::string, Tensor>& params,
                  const Tensor& input) {
    const int n = input.extent(0);
    const Tensor& weight = params.at("weight");
    const Tensor& bias = params.at("bias");
    Tensor out({n, s.out_features});
    ConstMapRM x(input.data(), n, s.in_features);
    ConstMapRM w(weight.data(), s.out_features, s.in_features);
    MapRM o(out.data(), n, s.out_features);
    o.noalias() = x * w.transpose();
    for (int j = 0; j < s.out_features; ++j) o.col(j).array() += bias[j];
    return out;
}

BackwardResult fc_backward(const LayerSpec& s, const std::map<std::string, Tensor>& params,
                           const Tensor& input, const Tensor& upstream) {
    const int n = input.extent(0);
    const Tensor& weight = params.at("weight");
    BackwardResult r;
    r.input_grad = Tensor(input.shape());
    Tensor dw(weight.shape());
    Tensor db({s.out_features});

    ConstMapRM x(input.data(), n, s.in_features);
    ConstMapRM w(weight.data(), s.out_features, s.in_features);
    ConstMapRM up(upstream.data(), n, s.out_features);
    MapRM dx(r.input_grad.data(), n, s.in_features);
    MapRM dwm(dw.data(), s.out_features, s.in_features);

    dx.noalias() = up * w;
    dwm.noalias() = up.transpose() * x;
    for (int j = 0; j < s.out_features; ++j) db[j] = up.col(j).sum();

    r.param_grads.emplace("weight", std::move(dw));
    r.param_grads.emplace("bias", std::move(db));
    return r;
}

// ---- average pooling ---------------------------------------------------

Tensor pool_forward(const LayerSpec& s, const Tensor& input) {
    const int n = input.extent(0), c = input.extent(1);
    const int h = input.extent(2), w = input.extent(3);
    const int oh = h / s.pool, ow = w / s.pool;
    Tensor out({n, c, oh, ow});
    const double inv = 1.0 / (static_cast<double>(s.pool) * s.pool);
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            for (int oi = 0; oi < oh; ++oi) {
                for (int oj = 0; oj < ow; ++oj) {
                    double acc;
                    if (s.pool == 2) {
                        // Pairwise sum keeps constant inputs exact.
                        acc = (input.at(i, ch, 2 * oi, 2 * oj) + input.at(i, ch, 2 * oi, 2 * oj + 1)) +
                              (input.at(i, ch, 2 * oi + 1, 2 * oj) +
                               input.at(i, ch, 2 * oi + 1, 2 * oj + 1));
                    } else {
                        acc = 0.0;
                        for (int a = 0; a < s.pool; ++a)
                            for (int b = 0; b < s.pool; ++b)
                                acc += input.at(i, ch, oi * s.pool + a, oj * s.pool + b);
                    }
                    out.at(i, ch, oi, oj) = acc * inv;
                }
            }
        }
    }
    return out;
}

BackwardResult pool_backward(const LayerSpec& s, const Tensor& input, const Tensor& upstream) {
    BackwardResult r;
    r.input_grad = Tensor(input.shape());
    const int n = input.extent(0), c = input.extent(1);
    const int oh = input.extent(2) / s.pool, ow = input.extent(3) / s.pool;
    const double inv = 1.0 / (static_cast<double>(s.pool) * s.pool);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int oi = 0; oi < oh; ++oi)
                for (int oj = 0; oj < ow; ++oj) {
                    const double g = upstream.at(i, ch, oi, oj) * inv;
                    for (int a = 0; a < s.pool; ++a)
                        for (int b = 0; b < s.pool; ++b)
                            r.input_grad.at(i, ch, oi * s.pool + a, oj * s.pool + b) = g;
                }
    return r;
}

// ---- bilinear upsample ---------------------------------------------------

struct SampleCoord {
    int lo, hi;
    double frac;
};

// align_corners=false source coordinate with border clamping.
SampleCoord sample_coord(int out_index, int scale, int in_extent) {
    double src = (out_index + 0.5) / scale - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(src);
    if (lo > in_extent - 1) lo = in_extent - 1;
    SampleCoord sc;
    sc.lo = lo;
    sc.hi = lo + 1 < in_extent ? lo + 1 : in_extent - 1;
    sc.frac = src - lo;
    return sc;
}

Tensor upsample_forward(const LayerSpec& s, const Tensor& input) {
    const int n = input.extent(0), c = input.extent(1);
    const int h = input.extent(2), w = input.extent(3);
    const int oh = h * s.scale, ow = w * s.scale;
    Tensor out({n, c, oh, ow});

    std::vector<SampleCoord> ys(oh), xs(ow);
    for (int i = 0; i < oh; ++i) ys[i] = sample_coord(i, s.scale, h);
    for (int j = 0; j < ow; ++j) xs[j] = sample_coord(j, s.scale, w);

    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int oi = 0; oi < oh; ++oi) {
                const auto& y = ys[oi];
                for (int oj = 0; oj < ow; ++oj) {
                    const auto& x = xs[oj];
                    // Difference-form lerps: exact on constant inputs.
                    const double a = input.at(i, ch, y.lo, x.lo);
                    const double b = input.at(i, ch, y.lo, x.hi);
                    const double cc = input.at(i, ch, y.hi, x.lo);
                    const double dd = input.at(i, ch, y.hi, x.hi);
                    const double top = a + x.frac * (b - a);
                    const double bot = cc + x.frac * (dd - cc);
                    out.at(i, ch, oi, oj) = top + y.frac * (bot - top);
                }
            }
    return out;
}

BackwardResult upsample_backward(const LayerSpec& s, const Tensor& input, const Tensor& upstream) {
    BackwardResult r;
    r.input_grad = Tensor(input.shape());
    const int n = input.extent(0), c = input.extent(1);
    const int h = input.extent(2), w = input.extent(3);
    const int oh = h * s.scale, ow = w * s.scale;

    std::vector<SampleCoord> ys(oh), xs(ow);
    for (int i = 0; i < oh; ++i) ys[i] = sample_coord(i, s.scale, h);
    for (int j = 0; j < ow; ++j) xs[j] = sample_coord(j, s.scale, w);

    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int oi = 0; oi < oh; ++oi) {
                const auto& y = ys[oi];
                for (int oj = 0; oj < ow; ++oj) {
                    const auto& x = xs[oj];
                    const double g = upstream.at(i, ch, oi, oj);
                    r.input_grad.at(i, ch, y.lo, x.lo) += g * (1 - y.frac) * (1 - x.frac);
                    r.input_grad.at(i, ch, y.lo, x.hi) += g * (1 - y.frac) * x.frac;
                    r.input_grad.at(i, ch, y.hi, x.lo) += g * y.frac * (1 - x.frac);
                    r.input_grad.at(i, ch, y.hi, x.hi) += g * y.frac * x.frac;
                }
            }
    return r;
}

// ---- batch norm -----------------------------------------------------------

struct BnStats {
    std::vector<double> mean, var;  // biased variance, per channel
};

BnStats batch_stats(const Tensor& input) {
    const int n = input.extent(0), c = input.extent(1);
    const int h = input.extent(2), w = input.extent(3);
    const double m = static_cast<double>(n) * h * w;
    BnStats st;
    st.mean.assign(static_cast<std::size_t>(c), 0.0);
    st.var.assign(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) st.mean[ch] += input.at(i, ch, y, x);
    for (int ch = 0; ch < c; ++ch) st.mean[ch] /= m;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double d = input.at(i, ch, y, x) - st.mean[ch];
                    st.var[ch] += d * d;
                }
    for (int ch = 0; ch < c; ++ch) st.var[ch] /= m;
    return st;
}

Tensor bn_forward(const LayerSpec& s, const std::map<std::string, Tensor>& params,
                  const Tensor& input, Mode mode, std::map<std::string, Tensor>* mutable_params) {
    const int n = input.extent(0), c = input.extent(1);
    const int h = input.extent(2), w = input.extent(3);
    const Tensor& gamma = params.at("gamma");
    const Tensor& beta = params.at("beta");

    std::vector<double> mean, var;
    if (mode == Mode::Train) {
        BnStats st = batch_stats(input);
        mean = std::move(st.mean);
        var = std::move(st.var);
        auto& rm = mutable_params->at("running_mean");
        auto& rv = mutable_params->at("running_var");
        for (int ch = 0; ch < c; ++ch) {
            rm[ch] = s.momentum * rm[ch] + (1.0 - s.momentum) * mean[ch];
            rv[ch] = s.momentum * rv[ch] + (1.0 - s.momentum) * var[ch];
        }
    } else {
        const Tensor& rm = params.at("running_mean");
        const Tensor& rv = params.at("running_var");
        mean.assign(rm.data(), rm.data() + c);
        var.assign(rv.data(), rv.data() + c);
    }

    Tensor out(input.shape());
    for (int ch = 0; ch < c; ++ch) {
        const double inv_sd = 1.0 / std::sqrt(var[ch] + s.epsilon);
        const double g = gamma[ch], b = beta[ch], mu = mean[ch];
        for (int i = 0; i < n; ++i)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.at(i, ch, y, x) = g * ((input.at(i, ch, y, x) - mu) * inv_sd) + b;
    }
    return out;
}

BackwardResult bn_backward(const LayerSpec& s, const std::map<std::string, Tensor>& params,
                           const Tensor& input, const Tensor& upstream, Mode mode) {
    const int n = input.extent(0), c = input.extent(1);
    const int h = input.extent(2), w = input.extent(3);
    const double m = static_cast<double>(n) * h * w;
    const Tensor& gamma = params.at("gamma");

    std::vector<double> mean, var;
    if (mode == Mode::Train) {
        BnStats st = batch_stats(input);
        mean = std::move(st.mean);
        var = std::move(st.var);
    } else {
        const Tensor& rm = params.at("running_mean");
        const Tensor& rv = params.at("running_var");
        mean.assign(rm.data(), rm.data() + c);
        var.assign(rv.data(), rv.data() + c);
    }

    BackwardResult r;
    r.input_grad = Tensor(input.shape());
    Tensor dgamma({c}), dbeta({c});

    for (int ch = 0; ch < c; ++ch) {
        const double inv_sd = 1.0 / std::sqrt(var[ch] + s.epsilon);
        const double mu = mean[ch];
        double sum_up = 0.0, sum_up_xhat = 0.0;
        for (int i = 0; i < n; ++i)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double up = upstream.at(i, ch, y, x);
                    const double xhat = (input.at(i, ch, y, x) - mu) * inv_sd;
                    sum_up += up;
                    sum_up_xhat += up * xhat;
                }
        dbeta[ch] = sum_up;
        dgamma[ch] = sum_up_xhat;

        const double g = gamma[ch];
        if (mode == Mode::Train) {
            // Differentiate through the batch statistics.
            for (int i = 0; i < n; ++i)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const double up = upstream.at(i, ch, y, x);
                        const double xhat = (input.at(i, ch, y, x) - mu) * inv_sd;
                        r.input_grad.at(i, ch, y, x) =
                            g * inv_sd / m * (m * up - sum_up - xhat * sum_up_xhat);
                    }
        } else {
            for (int i = 0; i < n; ++i)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        r.input_grad.at(i, ch, y, x) = upstream.at(i, ch, y, x) * g * inv_sd;
        }
    }
    r.param_grads.emplace("gamma", std::move(dgamma));
    r.param_grads.emplace("beta", std::move(dbeta));
    return r;
}

// ---- elementwise ---------------------------------------------------------

Tensor elu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::int64_t i = 0; i < input.size(); ++i) {
        const double x = input[i];
        out[i] = x > 0.0 ? x : std::expm1(x);
    }
    return out;
}

Tensor tanh_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::int64_t i = 0; i < input.size(); ++i) out[i] = std::tanh(input[i]);
    return out;
}

Tensor forward_impl(const Layer& layer, const Tensor& input, Mode mode,
                    std::map<std::string, Tensor>* mutable_params) {
    require_input_shape(layer.spec, input);
    switch (layer.spec.kind) {
        case LayerKind::Conv:
            return conv_forward(layer.spec, layer.params, input);
        case LayerKind::FullyConnected:
            return fc_forward(layer.spec, layer.params, input);
        case LayerKind::AvgPool:
            return pool_forward(layer.spec, input);
        case LayerKind::BilinearUpsample:
            return upsample_forward(layer.spec, input);
        case LayerKind::BatchNorm:
            return bn_forward(layer.spec, layer.params, input, mode, mutable_params);
        case LayerKind::Elu:
            return elu_forward(input);
        case LayerKind::Tanh:
            return tanh_forward(input);
    }
    throw InvalidArgument("unknown layer kind");
}

}  // namespace

LayerSpec LayerSpec::conv(int in_ch, int out_ch, int kernel, int stride, int pad) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    s.pad = pad < 0 ? (kernel - 1) / 2 : pad;
    return s;
}

LayerSpec LayerSpec::fully_connected(int in_features, int out_features) {
    LayerSpec s;
    s.kind = LayerKind::FullyConnected;
    s.in_features = in_features;
    s.out_features = out_features;
    return s;
}

LayerSpec LayerSpec::avg_pool(int window) {
    LayerSpec s;
    s.kind = LayerKind::AvgPool;
    s.pool = window;
    return s;
}

LayerSpec LayerSpec::bilinear_upsample(int scale) {
    LayerSpec s;
    s.kind = LayerKind::BilinearUpsample;
    s.scale = scale;
    return s;
}

LayerSpec LayerSpec::batch_norm(int channels, double epsilon, double momentum) {
    LayerSpec s;
    s.kind = LayerKind::BatchNorm;
    s.channels = channels;
    s.epsilon = epsilon;
    s.momentum = momentum;
    return s;
}

LayerSpec LayerSpec::elu() {
    LayerSpec s;
    s.kind = LayerKind::Elu;
    return s;
}

LayerSpec LayerSpec::tanh() {
    LayerSpec s;
    s.kind = LayerKind::Tanh;
    return s;
}

void validate_layer_spec(const LayerSpec& spec) {
    switch (spec.kind) {
        case LayerKind::Conv:
            require(spec.in_channels > 0 && spec.out_channels > 0, "conv channels must be positive");
            require(spec.kernel > 0 && spec.stride > 0 && spec.pad >= 0,
                    "conv kernel/stride/pad inconsistent");
            break;
        case LayerKind::FullyConnected:
            require(spec.in_features > 0 && spec.out_features > 0,
                    "fully-connected extents must be positive");
            break;
        case LayerKind::AvgPool:
            require(spec.pool >= 1, "avg-pool window must be >= 1");
            break;
        case LayerKind::BilinearUpsample:
            require(spec.scale >= 1, "upsample scale must be >= 1");
            break;
        case LayerKind::BatchNorm:
            require(spec.channels > 0, "batch-norm channels must be positive");
            require(spec.epsilon > 0.0, "batch-norm epsilon must be > 0");
            require(spec.momentum >= 0.0 && spec.momentum < 1.0, "batch-norm momentum out of range");
            break;
        case LayerKind::Elu:
        case LayerKind::Tanh:
            break;
    }
}

Layer make_layer(const LayerSpec& spec) {
    validate_layer_spec(spec);
    Layer layer;
    layer.spec = spec;
    switch (spec.kind) {
        case LayerKind::Conv:
            layer.params.emplace(
                "weight", Tensor({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}));
            layer.params.emplace("bias", Tensor({spec.out_channels}));
            break;
        case LayerKind::FullyConnected:
            layer.params.emplace("weight", Tensor({spec.out_features, spec.in_features}));
            layer.params.emplace("bias", Tensor({spec.out_features}));
            break;
        case LayerKind::BatchNorm:
            layer.params.emplace("gamma", Tensor::full({spec.channels}, 1.0));
            layer.params.emplace("beta", Tensor({spec.channels}));
            layer.params.emplace("running_mean", Tensor({spec.channels}));
            layer.params.emplace("running_var", Tensor::full({spec.channels}, 1.0));
            break;
        default:
            break;
    }
    return layer;
}

std::vector<std::string> trainable_parameter_names(const LayerSpec& spec) {
    switch (spec.kind) {
        case LayerKind::Conv:
        case LayerKind::FullyConnected:
            return {"weight", "bias"};
        case LayerKind::BatchNorm:
            return {"gamma", "beta"};
        default:
            return {};
    }
}

std::vector<int> output_shape(const LayerSpec& spec, const std::vector<int>& input_shape) {
    switch (spec.kind) {
        case LayerKind::Conv: {
            if (input_shape.size() != 4) throw InvalidArgument("conv expects rank-4 input shape");
            const int oh = (input_shape[2] + 2 * spec.pad - spec.kernel) / spec.stride + 1;
            const int ow = (input_shape[3] + 2 * spec.pad - spec.kernel) / spec.stride + 1;
            return {input_shape[0], spec.out_channels, oh, ow};
        }
        case LayerKind::FullyConnected:
            if (input_shape.size() != 2) throw InvalidArgument("fc expects rank-2 input shape");
            return {input_shape[0], spec.out_features};
        case LayerKind::AvgPool:
            if (input_shape.size() != 4) throw InvalidArgument("pool expects rank-4 input shape");
            return {input_shape[0], input_shape[1], input_shape[2] / spec.pool,
                    input_shape[3] / spec.pool};
        case LayerKind::BilinearUpsample:
            if (input_shape.size() != 4) throw InvalidArgument("upsample expects rank-4 input shape");
            return {input_shape[0], input_shape[1], input_shape[2] * spec.scale,
                    input_shape[3] * spec.scale};
        case LayerKind::BatchNorm:
        case LayerKind::Elu:
        case LayerKind::Tanh:
            return input_shape;
    }
    throw InvalidArgument("unknown layer kind");
}

Tensor forward(Layer& layer, const Tensor& input, Mode mode) {
    return forward_impl(layer, input, mode, &layer.params);
}

Tensor forward(const Layer& layer, const Tensor& input, Mode mode) {
    if (layer.spec.kind == LayerKind::BatchNorm && mode == Mode::Train) {
        throw InvalidArgument("train-mode batch-norm updates running statistics; use the mutable overload");
    }
    return forward_impl(layer, input, mode, nullptr);
}

BackwardResult backward(const Layer& layer, const Tensor& input, const Tensor& upstream,
                        Mode mode) {
    require_input_shape(layer.spec, input);
    const auto expected = output_shape(layer.spec, input.shape());
    if (upstream.shape() != expected) {
        throw InvalidArgument("upstream gradient shape does not match forward output shape");
    }
    switch (layer.spec.kind) {
        case LayerKind::Conv:
            return conv_backward(layer.spec, layer.params, input, upstream);
        case LayerKind::FullyConnected:
            return fc_backward(layer.spec, layer.params, input, upstream);
        case LayerKind::AvgPool:
            return pool_backward(layer.spec, input, upstream);
        case LayerKind::BilinearUpsample:
            return upsample_backward(layer.spec, input, upstream);
        case LayerKind::BatchNorm:
            return bn_backward(layer.spec, layer.params, input, upstream, mode);
        case LayerKind::Elu: {
            BackwardResult r;
            r.input_grad = Tensor(input.shape());
            for (std::int64_t i = 0; i < input.size(); ++i) {
                r.input_grad[i] = upstream[i] * (input[i] > 0.0 ? 1.0 : std::exp(input[i]));
            }
            return r;
        }
        case LayerKind::Tanh: {
            BackwardResult r;
            r.input_grad = Tensor(input.shape());
            for (std::int64_t i = 0; i < input.size(); ++i) {
                const double t = std::tanh(input[i]);
                r.input_grad[i] = upstream[i] * (1.0 - t * t);
            }
            return r;
        }
    }
    throw InvalidArgument("unknown layer kind");
}

L1Loss l1_loss(const Tensor& prediction, const Tensor& target) {
    if (!prediction.same_shape(target)) {
        throw InvalidArgument("l1_loss requires equal shapes, got " + prediction.shape_string() +
                              " vs " + target.shape_string());
    }
    L1Loss result;
    result.grad = Tensor(prediction.shape());
    const double inv_n = 1.0 / static_cast<double>(prediction.size());
    double acc = 0.0;
    for (std::int64_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        acc += std::abs(d);
        result.grad[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    result.loss = acc * inv_n;
    return result;
}

}  // namespace npae
