#include "npae/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>

#include <nlohmann/json.hpp>

#include "npae/errors.hpp"
#include "npae/util.hpp"

namespace npae {

namespace {

constexpr std::array<char, 4> kMagic = {'N', 'P', 'A', 'E'};

std::uint32_t crc32(const std::string& bytes) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (unsigned char b : bytes) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct Reader {
    const std::string& bytes;
    std::size_t pos = 0;

    void need(std::size_t count, const std::string& field) const {
        if (pos + count > bytes.size()) {
            throw CorruptCheckpoint("checkpoint truncated while reading " + field, field);
        }
    }
    std::uint32_t u32(const std::string& field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64(const std::string& field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    std::string str(std::size_t count, const std::string& field) {
        need(count, field);
        std::string s = bytes.substr(pos, count);
        pos += count;
        return s;
    }
};

nlohmann::json arch_to_json(const ArchConfig& a) {
    return {
        {"height", a.height},
        {"width", a.width},
        {"channels", a.channels},
        {"encoder_channels", a.encoder_channels},
        {"code_dim", a.code_dim},
        {"decoder_start_channels", a.decoder_start_channels},
        {"decoder_channels", a.decoder_channels},
        {"kernel", a.kernel},
        {"hidden_activation", a.hidden_activation},
        {"output_activation", a.output_activation},
    };
}

ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig a;
    a.height = j.at("height").get<int>();
    a.width = j.at("width").get<int>();
    a.channels = j.at("channels").get<int>();
    a.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
    a.code_dim = j.at("code_dim").get<int>();
    a.decoder_start_channels = j.at("decoder_start_channels").get<int>();
    a.decoder_channels = j.at("decoder_channels").get<std::vector<int>>();
    a.kernel = j.at("kernel").get<int>();
    a.hidden_activation = j.at("hidden_activation").get<std::string>();
    a.output_activation = j.at("output_activation").get<std::string>();
    return a;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::string out;
    out.append(kMagic.data(), kMagic.size());
    out.push_back(static_cast<char>(ckpt.version));

    const nlohmann::json header = {
        {"arch", arch_to_json(ckpt.arch)},
        {"meta",
         {{"epochs", ckpt.meta.epochs},
          {"seed", ckpt.meta.seed},
          {"loss_history", ckpt.meta.loss_history}}},
    };
    const std::string header_text = header.dump();
    put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;

    for (const auto& [name, values] : ckpt.blobs) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u64(out, values.size());
        for (float v : values) put_f32(out, v);
    }
    put_u32(out, crc32(out));
    atomic_write_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < kMagic.size() + 1 + 4 + 4) {
        throw CorruptCheckpoint("file too short to be a checkpoint", "magic");
    }
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw CorruptCheckpoint("bad magic bytes", "magic");
    }

    // CRC covers everything before the 4-byte trailer.
    const std::string body = bytes.substr(0, bytes.size() - 4);
    Reader trailer{bytes, bytes.size() - 4};
    const std::uint32_t stored_crc = trailer.u32("crc");
    if (crc32(body) != stored_crc) {
        throw CorruptCheckpoint("CRC-32 mismatch", "crc");
    }

    Reader r{body, kMagic.size()};
    Checkpoint ckpt;
    r.need(1, "version");
    ckpt.version = static_cast<std::uint8_t>(body[r.pos]);
    r.pos += 1;
    if (ckpt.version != 1) {
        throw CorruptCheckpoint("unsupported version " + std::to_string(ckpt.version), "version");
    }

    const std::uint32_t header_len = r.u32("header length");
    const std::string header_text = r.str(header_len, "header");
    try {
        const nlohmann::json header = nlohmann::json::parse(header_text);
        ckpt.arch = arch_from_json(header.at("arch"));
        const auto& meta = header.at("meta");
        ckpt.meta.epochs = meta.at("epochs").get<int>();
        ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
        ckpt.meta.loss_history = meta.at("loss_history").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpoint(std::string("malformed header: ") + e.what(), "header");
    }

    while (r.pos < body.size()) {
        const std::uint32_t name_len = r.u32("blob name length");
        const std::string name = r.str(name_len, "blob name");
        const std::uint64_t count = r.u64("blob '" + name + "' count");
        if (count > body.size()) {
            throw CorruptCheckpoint("blob '" + name + "' count out of range", "blob '" + name + "'");
        }
        r.need(count * 4, "blob '" + name + "' data");
        std::vector<float> values(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint32_t raw = 0;
            for (int k = 0; k < 4; ++k) {
                raw |= static_cast<std::uint32_t>(
                           static_cast<unsigned char>(body[r.pos + 4 * i + k]))
                       << (8 * k);
            }
            values[i] = std::bit_cast<float>(raw);
        }
        r.pos += count * 4;
        ckpt.blobs.emplace_back(name, std::move(values));
    }
    return ckpt;
}

}  // namespace npae
