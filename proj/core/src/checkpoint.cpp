#include "amdmil/checkpoint.hpp"

#include <limits>

#include "byte_io.hpp"

namespace amdmil {

std::vector<unsigned char> encode_checkpoint(const NamedTensors& tensors) {
    detail::ByteWriter w;
    w.bytes("AMDC");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw ConfigError("checkpoint: tensor name too long: " + name.substr(0, 32) + "...");
        }
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.bytes(name);
        w.u32(static_cast<std::uint32_t>(m.rows()));
        w.u32(static_cast<std::uint32_t>(m.cols()));
        for (double v : m.data()) w.f32(static_cast<float>(v));
    }
    return w.take();
}

NamedTensors decode_checkpoint(const std::vector<unsigned char>& bytes) {
    detail::ByteReader r(bytes, "checkpoint");
    if (r.bytes(4) != "AMDC") r.fail("bad magic (expected AMDC)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    NamedTensors out;
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint16_t len = r.u16();
        std::string name = r.bytes(len);
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        const std::uint64_t n = static_cast<std::uint64_t>(rows) * cols;
        r.need(n * 4, "tensor values");
        std::vector<double> data(n);
        for (auto& v : data) v = r.f32();
        out.emplace_back(std::move(name), Matrix(rows, cols, std::move(data)));
    }
    if (!r.at_end()) r.fail("trailing bytes after last tensor");
    return out;
}

void save_checkpoint(const NamedTensors& tensors, const std::filesystem::path& path) {
    detail::write_file(path, encode_checkpoint(tensors));
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file(path));
}

}  // namespace amdmil
