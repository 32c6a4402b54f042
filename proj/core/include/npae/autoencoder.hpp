#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "npae/checkpoint.hpp"
#include "npae/image.hpp"
#include "npae/layers.hpp"
#include "npae/masking.hpp"

namespace npae {

/// Named layer sequences realizing an ArchConfig. The encoder list ends
/// with the fully-connected map to the code (input is flattened just
/// before it); the decoder list starts with the fully-connected map
/// from the code (output is reshaped to a [start_channels, h0, w0]
/// volume right after it).
std::vector<std::pair<std::string, LayerSpec>> encoder_layer_specs(const ArchConfig& arch);
std::vector<std::pair<std::string, LayerSpec>> decoder_layer_specs(const ArchConfig& arch);

/// Runtime model: double-precision layer stacks for encoder E and
/// decoder D. Inference entry points run in infer mode and are pure;
/// training mutates parameters and batch-norm running statistics.
class Autoencoder {
public:
    explicit Autoencoder(const ArchConfig& arch);

    /// Deterministic weight initialization (He/Xavier scaled normals).
    static Autoencoder random_init(const ArchConfig& arch, std::uint64_t seed);

    static Autoencoder from_checkpoint(const Checkpoint& ckpt);
    Checkpoint to_checkpoint(TrainingMeta meta = {}) const;

    const ArchConfig& config() const { return arch_; }

    /// Batch inference, [N,C,H,W] -> [N,code_dim] and back.
    Tensor encode_batch(const Tensor& nchw) const;
    Tensor decode_batch(const Tensor& codes) const;
    Tensor reconstruct_batch(const Tensor& nchw) const { return decode_batch(encode_batch(nchw)); }

    std::vector<double> encode(const Image& image) const;
    Image decode(const std::vector<double>& code) const;
    Image reconstruct(const Image& image) const;

    /// decode(encode(Π_b(Q))): the model never observes pixels inside b.
    Image inpaint(const Image& image, const Box& b) const;

    std::vector<std::pair<std::string, Layer>>& encoder_layers() { return encoder_; }
    std::vector<std::pair<std::string, Layer>>& decoder_layers() { return decoder_; }
    const std::vector<std::pair<std::string, Layer>>& encoder_layers() const { return encoder_; }
    const std::vector<std::pair<std::string, Layer>>& decoder_layers() const { return decoder_; }

    /// Train-mode forward through E then D, recording every layer input
    /// for the backward pass. Used by the trainer and its tests.
    struct Trace {
        std::vector<Tensor> encoder_inputs;
        std::vector<Tensor> decoder_inputs;
        Tensor output;
    };
    Trace forward_train(const Tensor& nchw);

    /// Backward through the trace; returns gradients keyed
    /// "<layer>.<param>" for every trainable parameter.
    std::map<std::string, Tensor> backward_train(const Trace& trace, const Tensor& output_grad);

private:
    static Tensor run_list(const ArchConfig& arch,
                           const std::vector<std::pair<std::string, Layer>>& list, Tensor x);
    static Tensor run_list_train(const ArchConfig& arch,
                                 std::vector<std::pair<std::string, Layer>>& list, Tensor x,
                                 std::vector<Tensor>* inputs);

    ArchConfig arch_;
    std::vector<std::pair<std::string, Layer>> encoder_;
    std::vector<std::pair<std::string, Layer>> decoder_;
};

struct TrainHyper {
    int epochs = 12;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double learning_rate = 1e-3;
    /// Training-box side range in pixels; -1 selects the defaults
    /// [height/4, height/2].
    int box_size_lo = -1;
    int box_size_hi = -1;
    /// When set, prints one line per epoch to stderr.
    bool verbose = false;
};

/// Train an inpainting autoencoder on typical images only. Each sample
/// draws a fresh random box b per epoch; the per-sample loss is
/// |D(E(Π_b(Q))) - Q|_1 over the whole image. Deterministic given the
/// seed. Throws TrainingDiverged (with epoch index) on non-finite loss.
Checkpoint train(const std::vector<Image>& corpus, const ArchConfig& arch,
                 const TrainHyper& hyper);

/// Contract-level entry points on a serialized model.
std::vector<double> encode(const Checkpoint& ckpt, const Image& image);
Image decode(const Checkpoint& ckpt, const std::vector<double>& code);
Image inpaint(const Checkpoint& ckpt, const Image& image, const Box& b);

}  // namespace npae
