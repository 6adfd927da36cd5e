#include "lst/checkpoint.hpp"

#include "lst/binary_io.hpp"
#include "lst/errors.hpp"
#include "lst/file_util.hpp"

#include <sstream>

namespace lst {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'T', 'C', 'K', 'P', 'T', '\0'};

}  // namespace

void binary::put_tensor(std::string& out, const Tensor& t) {
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().rank()));
    for (Index e : t.shape().extents()) binary::put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    for (Index i = 0; i < t.numel(); ++i) binary::put<double>(out, t[i]);
}

Tensor binary::get_tensor(Reader& in) {
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8) throw FormatError("implausible tensor rank");
    std::vector<Index> extents;
    for (std::uint32_t r = 0; r < rank; ++r) {
        const auto e = in.get<std::uint64_t>();
        if (e == 0 || e > in.remaining()) throw FormatError("implausible tensor extent");
        extents.push_back(static_cast<Index>(e));
    }
    Shape shape(extents);
    if (static_cast<std::size_t>(shape.numel()) * sizeof(double) > in.remaining()) {
        throw FormatError("truncated tensor payload");
    }
    Tensor tensor(shape);
    for (Index i = 0; i < tensor.numel(); ++i) tensor[i] = in.get<double>();
    return tensor;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    std::string desc = ckpt.architecture.describe() + "\n";
    for (const auto& [k, v] : ckpt.metadata) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw FormatError("checkpoint metadata must not contain '=' in keys or newlines: " + k);
        }
        desc += k + "=" + v + "\n";
    }

    std::string out(kMagic, sizeof kMagic);
    binary::put<std::uint32_t>(out, ckpt.version);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(desc.size()));
    out += desc;
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.parameters.size()));
    for (const Tensor& t : ckpt.parameters) binary::put_tensor(out, t);
    binary::put<std::uint64_t>(out, fnv1a64(out.data(), out.size()));
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    binary::Reader in(bytes);
    if (in.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
        throw FormatError("not a checkpoint (bad magic bytes)");
    }
    Checkpoint ckpt;
    ckpt.version = in.get<std::uint32_t>();
    if (ckpt.version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(ckpt.version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    if (bytes.size() < sizeof(std::uint64_t)) throw FormatError("truncated checkpoint");
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    binary::Reader tail(std::string_view(bytes).substr(body));
    if (tail.get<std::uint64_t>() != fnv1a64(bytes.data(), body)) {
        throw FormatError("checkpoint digest mismatch (corrupted or truncated file)");
    }

    const auto desc_len = in.get<std::uint32_t>();
    std::istringstream desc{std::string(in.take(desc_len))};
    std::string line;
    if (!std::getline(desc, line)) throw FormatError("checkpoint descriptor is empty");
    ckpt.architecture = Architecture::parse(line);
    while (std::getline(desc, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("bad checkpoint metadata line: " + line);
        ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
    }

    const auto count = in.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < count; ++t) ckpt.parameters.push_back(binary::get_tensor(in));
    if (in.position() != body) throw FormatError("trailing bytes before checkpoint digest");
    ckpt.model();  // validates parameter shapes against the architecture
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::map<std::string, std::string>& metadata) {
    Checkpoint ckpt;
    ckpt.architecture = model.architecture();
    ckpt.parameters = model.parameters();
    ckpt.metadata = metadata;
    write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

Model load_model(const std::filesystem::path& path) { return load_checkpoint(path).model(); }

}  // namespace lst
