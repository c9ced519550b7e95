#include "maskgae/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace maskgae::num {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'A', 'E'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
    return v;
}

} // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const DenseMatrix*>>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kCheckpointVersion);
    for (const auto& [name, m] : tensors) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(out, 2u);
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m->rows));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m->cols));
        out.write(reinterpret_cast<const char*>(m->data.data()),
                  static_cast<std::streamsize>(m->data.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<std::pair<std::string, DenseMatrix>> load_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " in " + path);

    std::vector<std::pair<std::string, DenseMatrix>> tensors;
    while (true) {
        std::uint32_t name_len;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (in.eof()) break;
        if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = read_pod<std::uint32_t>(in, path);
        if (rank != 2) throw std::runtime_error("checkpoint: unsupported rank in " + path);
        const auto rows = read_pod<std::uint64_t>(in, path);
        const auto cols = read_pod<std::uint64_t>(in, path);
        DenseMatrix m(static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols));
        in.read(reinterpret_cast<char*>(m.data.data()),
                static_cast<std::streamsize>(m.data.size() * sizeof(float)));
        if (!in) throw std::runtime_error("checkpoint: truncated tensor data in " + path);
        tensors.emplace_back(std::move(name), std::move(m));
    }
    return tensors;
}

std::string fnv1a_hex(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("digest_file: cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a_hex(bytes.data(), bytes.size());
}

std::string digest_string(const std::string& s) { return fnv1a_hex(s.data(), s.size()); }

} // namespace maskgae::num
