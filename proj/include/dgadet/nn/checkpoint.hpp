#pragma once

#include <map>
#include <string>
#include <vector>

#include "dgadet/nn/tensor.hpp"

namespace dgadet::nn {

// Checkpoint container: a text header (meta key/value lines plus one line per
// tensor with name, dtype, shape and byte offset) followed by raw
// little-endian f32 blobs. Round-trips are bit-exact.
//
//   DGCK1
//   meta <key> <value may contain spaces>
//   tensor <name> f32 <ndim> <d0> ... <offset> <nbytes>
//   DATA
//   <blobs>
class Checkpoint {
public:
    void set_meta(const std::string& key, const std::string& value);
    const std::string& meta(const std::string& key) const;
    std::string meta_or(const std::string& key, const std::string& fallback) const;
    bool has_meta(const std::string& key) const;

    void add_tensor(const std::string& name, const Tensor& t);
    bool has_tensor(const std::string& name) const;
    const Tensor& tensor(const std::string& name) const;
    // Copies data/shape into an existing tensor, shape-checked.
    void load_into(const std::string& name, Tensor& dst) const;
    std::vector<std::string> tensor_names() const;

    void write(const std::string& path) const;
    static Checkpoint read(const std::string& path);

private:
    std::vector<std::pair<std::string, std::string>> meta_;
    std::vector<std::string> order_;
    std::map<std::string, Tensor> tensors_;
};

}  // namespace dgadet::nn
