#include "npae/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "npae/errors.hpp"
#include "npae/optim.hpp"
#include "npae/rng.hpp"

namespace npae {

namespace {

int pow2(std::size_t n) {
    int v = 1;
    for (std::size_t i = 0; i < n; ++i) v *= 2;
    return v;
}

bool is_spatial(LayerKind kind) {
    return kind == LayerKind::Conv || kind == LayerKind::AvgPool ||
           kind == LayerKind::BilinearUpsample || kind == LayerKind::BatchNorm;
}

// Flatten before a fully-connected layer, unflatten to the decoder's
// starting volume before a spatial layer.
Tensor transition(const ArchConfig& arch, const LayerSpec& next, Tensor x) {
    if (next.kind == LayerKind::FullyConnected && x.rank() == 4) {
        const int n = x.extent(0);
        return x.reshaped({n, static_cast<int>(x.size() / n)});
    }
    if (is_spatial(next.kind) && x.rank() == 2) {
        const int down = pow2(arch.decoder_channels.size());
        return x.reshaped({x.extent(0), arch.decoder_start_channels, arch.height / down,
                           arch.width / down});
    }
    return x;
}

std::int64_t trainable_count(const std::vector<std::pair<std::string, LayerSpec>>& specs) {
    std::int64_t total = 0;
    for (const auto& [name, spec] : specs) {
        Layer layer = make_layer(spec);
        for (const auto& pname : trainable_parameter_names(spec)) {
            total += layer.params.at(pname).size();
        }
    }
    return total;
}

void require_image_extents(const ArchConfig& arch, const Tensor& nchw) {
    if (nchw.rank() != 4 || nchw.extent(1) != arch.channels || nchw.extent(2) != arch.height ||
        nchw.extent(3) != arch.width) {
        throw InvalidArgument("input " + nchw.shape_string() + " does not match architecture " +
                              std::to_string(arch.channels) + "x" + std::to_string(arch.height) +
                              "x" + std::to_string(arch.width));
    }
}

Tensor image_as_batch(const Image& image) {
    return image.pixels.reshaped({1, image.channels(), image.height(), image.width()});
}

}  // namespace

std::vector<std::pair<std::string, LayerSpec>> encoder_layer_specs(const ArchConfig& arch) {
    std::vector<std::pair<std::string, LayerSpec>> specs;
    int in_ch = arch.channels;
    for (std::size_t i = 0; i < arch.encoder_channels.size(); ++i) {
        const int ch = arch.encoder_channels[i];
        const std::string stage = "enc" + std::to_string(i);
        specs.emplace_back(stage + ".conv", LayerSpec::conv(in_ch, ch, arch.kernel));
        specs.emplace_back(stage + ".bn", LayerSpec::batch_norm(ch));
        specs.emplace_back(stage + ".elu", LayerSpec::elu());
        specs.emplace_back(stage + ".pool", LayerSpec::avg_pool(2));
        in_ch = ch;
    }
    const int down = pow2(arch.encoder_channels.size());
    const int flat = in_ch * (arch.height / down) * (arch.width / down);
    specs.emplace_back("enc.fc", LayerSpec::fully_connected(flat, arch.code_dim));
    return specs;
}

std::vector<std::pair<std::string, LayerSpec>> decoder_layer_specs(const ArchConfig& arch) {
    std::vector<std::pair<std::string, LayerSpec>> specs;
    const int down = pow2(arch.decoder_channels.size());
    const int h0 = arch.height / down, w0 = arch.width / down;
    specs.emplace_back("dec.fc", LayerSpec::fully_connected(
                                     arch.code_dim, arch.decoder_start_channels * h0 * w0));
    int in_ch = arch.decoder_start_channels;
    for (std::size_t i = 0; i < arch.decoder_channels.size(); ++i) {
        const int ch = arch.decoder_channels[i];
        const std::string stage = "dec" + std::to_string(i);
        specs.emplace_back(stage + ".up", LayerSpec::bilinear_upsample(2));
        specs.emplace_back(stage + ".conv", LayerSpec::conv(in_ch, ch, arch.kernel));
        specs.emplace_back(stage + ".bn", LayerSpec::batch_norm(ch));
        specs.emplace_back(stage + ".elu", LayerSpec::elu());
        in_ch = ch;
    }
    specs.emplace_back("dec.out", LayerSpec::conv(in_ch, arch.channels, arch.kernel));
    specs.emplace_back("dec.tanh", LayerSpec::tanh());
    return specs;
}

void validate_arch_config(const ArchConfig& arch) {
    if (arch.height < 1 || arch.width < 1) throw InvalidArgument("image extents must be positive");
    if (arch.channels != 1 && arch.channels != 3) {
        throw InvalidArgument("channels must be 1 or 3");
    }
    if (arch.code_dim < 1) throw InvalidArgument("code dimension must be positive");
    if (arch.kernel < 1 || arch.kernel % 2 == 0) {
        throw InvalidArgument("kernel must be odd so zero padding preserves extents");
    }
    if (arch.encoder_channels.empty() || arch.decoder_channels.empty()) {
        throw InvalidArgument("encoder and decoder stage lists must be nonempty");
    }
    for (int ch : arch.encoder_channels)
        if (ch < 1) throw InvalidArgument("encoder channels must be positive");
    for (int ch : arch.decoder_channels)
        if (ch < 1) throw InvalidArgument("decoder channels must be positive");
    if (arch.decoder_start_channels < 1) {
        throw InvalidArgument("decoder start channels must be positive");
    }
    if (arch.hidden_activation != "elu") {
        throw InvalidArgument("unsupported hidden activation '" + arch.hidden_activation + "'");
    }
    if (arch.output_activation != "tanh") {
        throw InvalidArgument("final nonlinearity must be tanh");
    }

    const int enc_down = pow2(arch.encoder_channels.size());
    if (arch.height % enc_down != 0 || arch.width % enc_down != 0) {
        throw InvalidArgument("extents must be divisible by 2^(encoder stages)");
    }
    const int dec_down = pow2(arch.decoder_channels.size());
    if (arch.height % dec_down != 0 || arch.width % dec_down != 0) {
        throw InvalidArgument("extents must be divisible by 2^(decoder stages)");
    }

    const std::int64_t enc = encoder_parameter_count(arch);
    const std::int64_t dec = decoder_parameter_count(arch);
    if (enc <= dec) {
        throw InvalidArgument("encoder capacity (" + std::to_string(enc) +
                              " parameters) must strictly exceed decoder capacity (" +
                              std::to_string(dec) + ")");
    }
}

std::int64_t encoder_parameter_count(const ArchConfig& arch) {
    return trainable_count(encoder_layer_specs(arch));
}

std::int64_t decoder_parameter_count(const ArchConfig& arch) {
    return trainable_count(decoder_layer_specs(arch));
}

Autoencoder::Autoencoder(const ArchConfig& arch) : arch_(arch) {
    validate_arch_config(arch_);
    for (const auto& [name, spec] : encoder_layer_specs(arch_)) {
        encoder_.emplace_back(name, make_layer(spec));
    }
    for (const auto& [name, spec] : decoder_layer_specs(arch_)) {
        decoder_.emplace_back(name, make_layer(spec));
    }
}

Autoencoder Autoencoder::random_init(const ArchConfig& arch, std::uint64_t seed) {
    Autoencoder model(arch);
    Rng rng(seed);
    auto init_list = [&rng](std::vector<std::pair<std::string, Layer>>& list) {
        for (auto& [name, layer] : list) {
            if (layer.spec.kind == LayerKind::Conv) {
                const double fan_in = static_cast<double>(layer.spec.in_channels) *
                                      layer.spec.kernel * layer.spec.kernel;
                const double sd = std::sqrt(2.0 / fan_in);
                Tensor& w = layer.params.at("weight");
                for (std::int64_t i = 0; i < w.size(); ++i) w[i] = sd * rng.next_normal();
            } else if (layer.spec.kind == LayerKind::FullyConnected) {
                const double sd = std::sqrt(1.0 / layer.spec.in_features);
                Tensor& w = layer.params.at("weight");
                for (std::int64_t i = 0; i < w.size(); ++i) w[i] = sd * rng.next_normal();
            }
        }
    };
    init_list(model.encoder_);
    init_list(model.decoder_);
    return model;
}

Autoencoder Autoencoder::from_checkpoint(const Checkpoint& ckpt) {
    Autoencoder model(ckpt.arch);
    std::map<std::string, const std::vector<float>*> by_name;
    for (const auto& [name, values] : ckpt.blobs) {
        if (!by_name.emplace(name, &values).second) {
            throw CorruptCheckpoint("duplicate blob '" + name + "'", name);
        }
    }
    std::size_t used = 0;
    auto fill_list = [&](std::vector<std::pair<std::string, Layer>>& list) {
        for (auto& [lname, layer] : list) {
            for (auto& [pname, tensor] : layer.params) {
                const std::string blob_name = lname + "." + pname;
                auto it = by_name.find(blob_name);
                if (it == by_name.end()) {
                    throw CorruptCheckpoint("missing blob '" + blob_name + "'", blob_name);
                }
                const std::vector<float>& values = *it->second;
                if (static_cast<std::int64_t>(values.size()) != tensor.size()) {
                    throw CorruptCheckpoint("blob '" + blob_name + "' length mismatch", blob_name);
                }
                for (std::int64_t i = 0; i < tensor.size(); ++i) {
                    tensor[i] = static_cast<double>(values[static_cast<std::size_t>(i)]);
                }
                ++used;
            }
        }
    };
    fill_list(model.encoder_);
    fill_list(model.decoder_);
    if (used != by_name.size()) {
        throw CorruptCheckpoint("checkpoint carries unexpected extra blobs", "blobs");
    }
    return model;
}

Checkpoint Autoencoder::to_checkpoint(TrainingMeta meta) const {
    Checkpoint ckpt;
    ckpt.arch = arch_;
    ckpt.meta = std::move(meta);
    auto dump_list = [&](const std::vector<std::pair<std::string, Layer>>& list) {
        for (const auto& [lname, layer] : list) {
            for (const auto& [pname, tensor] : layer.params) {
                std::vector<float> values(static_cast<std::size_t>(tensor.size()));
                for (std::int64_t i = 0; i < tensor.size(); ++i) {
                    values[static_cast<std::size_t>(i)] = static_cast<float>(tensor[i]);
                }
                ckpt.blobs.emplace_back(lname + "." + pname, std::move(values));
            }
        }
    };
    dump_list(encoder_);
    dump_list(decoder_);
    return ckpt;
}

Tensor Autoencoder::run_list(const ArchConfig& arch,
                             const std::vector<std::pair<std::string, Layer>>& list, Tensor x) {
    for (const auto& [name, layer] : list) {
        x = transition(arch, layer.spec, std::move(x));
        x = forward(layer, x, Mode::Infer);
    }
    return x;
}

Tensor Autoencoder::run_list_train(const ArchConfig& arch,
                                   std::vector<std::pair<std::string, Layer>>& list, Tensor x,
                                   std::vector<Tensor>* inputs) {
    for (auto& [name, layer] : list) {
        x = transition(arch, layer.spec, std::move(x));
        if (inputs) inputs->push_back(x);
        x = forward(layer, x, Mode::Train);
    }
    return x;
}

Tensor Autoencoder::encode_batch(const Tensor& nchw) const {
    require_image_extents(arch_, nchw);
    return run_list(arch_, encoder_, nchw);
}

Tensor Autoencoder::decode_batch(const Tensor& codes) const {
    if (codes.rank() != 2 || codes.extent(1) != arch_.code_dim) {
        throw InvalidArgument("codes must be [N," + std::to_string(arch_.code_dim) + "], got " +
                              codes.shape_string());
    }
    return run_list(arch_, decoder_, codes);
}

std::vector<double> Autoencoder::encode(const Image& image) const {
    const Tensor codes = encode_batch(image_as_batch(image));
    return std::vector<double>(codes.data(), codes.data() + codes.size());
}

Image Autoencoder::decode(const std::vector<double>& code) const {
    if (static_cast<int>(code.size()) != arch_.code_dim) {
        throw InvalidArgument("code length " + std::to_string(code.size()) +
                              " does not match code dimension " + std::to_string(arch_.code_dim));
    }
    Tensor codes({1, arch_.code_dim}, std::vector<double>(code));
    const Tensor out = decode_batch(codes);
    Image image;
    image.pixels = out.reshaped({arch_.channels, arch_.height, arch_.width});
    return image;
}

Image Autoencoder::reconstruct(const Image& image) const {
    const Tensor out = reconstruct_batch(image_as_batch(image));
    Image result;
    result.id = image.id;
    result.pixels = out.reshaped({arch_.channels, arch_.height, arch_.width});
    return result;
}

Image Autoencoder::inpaint(const Image& image, const Box& b) const {
    Tensor masked = image.pixels;
    zero_box(masked, b);
    const Tensor out =
        reconstruct_batch(masked.reshaped({1, arch_.channels, arch_.height, arch_.width}));
    Image result;
    result.id = image.id;
    result.pixels = out.reshaped({arch_.channels, arch_.height, arch_.width});
    return result;
}

Autoencoder::Trace Autoencoder::forward_train(const Tensor& nchw) {
    require_image_extents(arch_, nchw);
    Trace trace;
    const Tensor codes = run_list_train(arch_, encoder_, nchw, &trace.encoder_inputs);
    trace.output = run_list_train(arch_, decoder_, codes, &trace.decoder_inputs);
    return trace;
}

std::map<std::string, Tensor> Autoencoder::backward_train(const Trace& trace,
                                                          const Tensor& output_grad) {
    std::map<std::string, Tensor> grads;
    auto walk = [&grads](const std::vector<std::pair<std::string, Layer>>& list,
                         const std::vector<Tensor>& inputs, Tensor g) -> Tensor {
        for (std::size_t k = list.size(); k-- > 0;) {
            const auto& [name, layer] = list[k];
            const auto expected = output_shape(layer.spec, inputs[k].shape());
            if (g.shape() != expected) g = g.reshaped(expected);
            BackwardResult res = backward(layer, inputs[k], g, Mode::Train);
            for (auto& [pname, pgrad] : res.param_grads) {
                grads.emplace(name + "." + pname, std::move(pgrad));
            }
            g = std::move(res.input_grad);
        }
        return g;
    };
    Tensor g = walk(decoder_, trace.decoder_inputs, output_grad);
    walk(encoder_, trace.encoder_inputs, std::move(g));
    return grads;
}

Checkpoint train(const std::vector<Image>& corpus, const ArchConfig& arch,
                 const TrainHyper& hyper) {
    validate_arch_config(arch);
    if (corpus.empty()) throw InvalidArgument("training corpus is empty");
    if (hyper.epochs < 1) throw InvalidArgument("epochs must be at least 1");
    if (hyper.batch_size < 1) throw InvalidArgument("batch size must be at least 1");
    for (const Image& img : corpus) {
        if (img.channels() != arch.channels || img.height() != arch.height ||
            img.width() != arch.width) {
            throw InvalidArgument("corpus image '" + img.id + "' extents do not match architecture");
        }
    }
    const int box_lo = hyper.box_size_lo > 0 ? hyper.box_size_lo : arch.height / 4;
    const int box_hi = hyper.box_size_hi > 0 ? hyper.box_size_hi : arch.height / 2;

    Autoencoder model = Autoencoder::random_init(arch, derive_seed(hyper.seed, "init"));
    std::map<std::string, Tensor*> params;
    auto collect = [&params](std::vector<std::pair<std::string, Layer>>& list) {
        for (auto& [name, layer] : list) {
            for (const auto& pname : trainable_parameter_names(layer.spec)) {
                params.emplace(name + "." + pname, &layer.params.at(pname));
            }
        }
    };
    collect(model.encoder_layers());
    collect(model.decoder_layers());

    AdamState opt_state;
    AdamHyper opt_hyper;
    opt_hyper.step_size = hyper.learning_rate;

    Rng order_rng(derive_seed(hyper.seed, "order"));
    Rng box_rng(derive_seed(hyper.seed, "boxes"));
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainingMeta meta;
    meta.seed = hyper.seed;
    meta.epochs = hyper.epochs;

    const int n = static_cast<int>(corpus.size());
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        int seen = 0;
        for (int start = 0; start < n; start += hyper.batch_size) {
            const int b = std::min(hyper.batch_size, n - start);
            Tensor input({b, arch.channels, arch.height, arch.width});
            Tensor target({b, arch.channels, arch.height, arch.width});
            const std::int64_t image_size = corpus[0].pixels.size();
            for (int j = 0; j < b; ++j) {
                const Image& img = corpus[order[static_cast<std::size_t>(start + j)]];
                double* dst_t = target.data() + j * image_size;
                double* dst_i = input.data() + j * image_size;
                const double* src = img.pixels.data();
                std::copy(src, src + image_size, dst_t);
                std::copy(src, src + image_size, dst_i);
                const Box box = sample_random_box(arch.height, arch.width, box_lo, box_hi, box_rng);
                for (int c = 0; c < arch.channels; ++c)
                    for (int y = box.top; y < box.top + box.height; ++y)
                        for (int x = box.left; x < box.left + box.width; ++x)
                            dst_i[(static_cast<std::int64_t>(c) * arch.height + y) * arch.width +
                                  x] = 0.0;
            }

            Autoencoder::Trace trace = model.forward_train(input);
            const L1Loss loss = l1_loss(trace.output, target);
            if (!std::isfinite(loss.loss)) {
                throw TrainingDiverged("training loss became non-finite", epoch);
            }
            epoch_loss += loss.loss * b;
            seen += b;

            std::map<std::string, Tensor> grads = model.backward_train(trace, loss.grad);
            try {
                adam_step(params, grads, opt_state, opt_hyper);
            } catch (const TrainingDiverged& e) {
                throw TrainingDiverged(e.what(), epoch);
            }
        }
        meta.loss_history.push_back(epoch_loss / seen);
        if (hyper.verbose) {
            std::fprintf(stderr, "epoch %d/%d loss %.6f\n", epoch + 1, hyper.epochs,
                         meta.loss_history.back());
        }
    }
    return model.to_checkpoint(meta);
}

std::vector<double> encode(const Checkpoint& ckpt, const Image& image) {
    return Autoencoder::from_checkpoint(ckpt).encode(image);
}

Image decode(const Checkpoint& ckpt, const std::vector<double>& code) {
    return Autoencoder::from_checkpoint(ckpt).decode(code);
}

Image inpaint(const Checkpoint& ckpt, const Image& image, const Box& b) {
    return Autoencoder::from_checkpoint(ckpt).inpaint(image, b);
}

}  // namespace npae
