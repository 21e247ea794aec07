// SPDX-License-Identifier: Apache-2.0

#include "rsit/params.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace rsit::kernels {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'I', 'T', 'P', 'S', '0', '1'};

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw KernelError("parameter store: truncated file");
    return value;
}

}  // namespace

Parameter& ParameterStore::add(std::string name, Tensor tensor, bool trainable) {
    if (contains(name)) throw KernelError("duplicate parameter name: " + name);
    index_[name] = items_.size();
    items_.push_back({std::move(name), std::move(tensor), trainable});
    return items_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw KernelError("unknown parameter: " + name);
    return items_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw KernelError("unknown parameter: " + name);
    return items_[it->second];
}

void ParameterStore::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw KernelError("cannot write parameter store: " + file.string());
    out.write(kMagic, sizeof(kMagic));
    write_raw<std::uint64_t>(out, items_.size());
    for (const auto& p : items_) {
        write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_raw<std::uint8_t>(out, p.trainable ? 1 : 0);
        write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.ndim()));
        for (const std::size_t e : p.tensor.shape()) write_raw<std::uint64_t>(out, e);
        out.write(reinterpret_cast<const char*>(p.tensor.data()),
                  static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
    }
}

ParameterStore ParameterStore::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw KernelError("cannot open parameter store: " + file.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw KernelError("parameter store: bad magic");

    ParameterStore store;
    const auto count = read_raw<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_raw<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const bool trainable = read_raw<std::uint8_t>(in) != 0;
        const auto rank = read_raw<std::uint32_t>(in);
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (auto& e : shape) {
            e = static_cast<std::size_t>(read_raw<std::uint64_t>(in));
            numel *= e;
        }
        std::vector<double> values(numel);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(numel * sizeof(double)));
        if (!in) throw KernelError("parameter store: truncated tensor data");
        store.add(std::move(name), Tensor(std::move(shape), std::move(values)), trainable);
    }
    return store;
}

}  // namespace rsit::kernels
