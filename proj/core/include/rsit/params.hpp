// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rsit/tensor.hpp"

namespace rsit::kernels {

struct Parameter {
    std::string name;
    Tensor tensor;
    bool trainable = true;
};

// Insertion-ordered named parameter set. Serializes to a binary container:
// magic "RSITPS01", u64 count, then per parameter u32 name length + bytes,
// u8 trainable, u32 rank, u64 extents, f64 values; all little-endian.
class ParameterStore {
public:
    Parameter& add(std::string name, Tensor tensor, bool trainable = true);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<Parameter>& items() { return items_; }
    const std::vector<Parameter>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

    void save(const std::filesystem::path& file) const;
    static ParameterStore load(const std::filesystem::path& file);

private:
    std::vector<Parameter> items_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace rsit::kernels
