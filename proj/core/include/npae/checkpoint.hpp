#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace npae {

/// Architecture of the inpainting autoencoder. The encoder stacks
/// conv/batch-norm/elu/avg-pool stages and ends in a fully-connected
/// map to the code; the decoder starts from a fully-connected map,
/// then upsample/conv/batch-norm/elu stages, and a final conv + tanh.
struct ArchConfig {
    int height = 64;
    int width = 64;
    int channels = 1;
    std::vector<int> encoder_channels{16, 32, 64, 128};
    int code_dim = 64;
    int decoder_start_channels = 32;
    std::vector<int> decoder_channels{64, 32, 16};
    int kernel = 3;
    std::string hidden_activation = "elu";
    std::string output_activation = "tanh";
};

/// Rejects inconsistent configurations: extents not divisible by the
/// pooling/upsampling chain, unsupported activations, or an encoder
/// that is not strictly higher-capacity than the decoder.
void validate_arch_config(const ArchConfig& arch);

/// Trainable parameter counts (weights, biases, batch-norm affine).
std::int64_t encoder_parameter_count(const ArchConfig& arch);
std::int64_t decoder_parameter_count(const ArchConfig& arch);

struct TrainingMeta {
    int epochs = 0;
    std::uint64_t seed = 0;
    std::vector<double> loss_history;  // mean training loss per epoch
};

/// Serialized model: architecture plus all layer tensors (including
/// batch-norm running statistics) as named float32 blobs, in a fixed
/// order. Weights are stored in 32-bit precision, so a checkpoint
/// round-trips through disk bit-exactly.
struct Checkpoint {
    std::uint8_t version = 1;
    ArchConfig arch;
    TrainingMeta meta;
    std::vector<std::pair<std::string, std::vector<float>>> blobs;
};

/// File format: magic "NPAE", version byte, length-prefixed UTF-8 JSON
/// block (architecture and training metadata), named blobs (u32 name
/// length, name, u64 element count, little-endian float32 values),
/// trailing CRC-32 of all preceding bytes.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws CorruptCheckpoint naming the offending field on bad magic,
/// version, truncation, malformed JSON, or CRC mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace npae
