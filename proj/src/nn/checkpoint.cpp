#include "dgadet/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dgadet/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts are unsupported");

namespace dgadet::nn {

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
    require(key.find(' ') == std::string::npos && key.find('\n') == std::string::npos,
            "checkpoint meta key must not contain spaces or newlines");
    require(value.find('\n') == std::string::npos,
            "checkpoint meta value must not contain newlines");
    for (auto& kv : meta_) {
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    }
    meta_.emplace_back(key, value);
}

const std::string& Checkpoint::meta(const std::string& key) const {
    for (const auto& kv : meta_) {
        if (kv.first == key) return kv.second;
    }
    throw IoError("checkpoint: missing meta key '" + key + "'");
}

std::string Checkpoint::meta_or(const std::string& key, const std::string& fallback) const {
    for (const auto& kv : meta_) {
        if (kv.first == key) return kv.second;
    }
    return fallback;
}

bool Checkpoint::has_meta(const std::string& key) const {
    for (const auto& kv : meta_) {
        if (kv.first == key) return true;
    }
    return false;
}

void Checkpoint::add_tensor(const std::string& name, const Tensor& t) {
    require(name.find(' ') == std::string::npos, "checkpoint tensor name must not contain spaces");
    if (tensors_.find(name) == tensors_.end()) order_.push_back(name);
    Tensor copy;
    copy.shape = t.shape;
    copy.data = t.data;
    tensors_[name] = std::move(copy);
}

bool Checkpoint::has_tensor(const std::string& name) const {
    return tensors_.find(name) != tensors_.end();
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw IoError("checkpoint: missing tensor '" + name + "'");
    return it->second;
}

void Checkpoint::load_into(const std::string& name, Tensor& dst) const {
    const Tensor& src = tensor(name);
    require(src.shape == dst.shape, "checkpoint: shape mismatch for '" + name + "': stored " +
                                        shape_str(src.shape) + " vs model " + shape_str(dst.shape));
    dst.data = src.data;
}

std::vector<std::string> Checkpoint::tensor_names() const { return order_; }

void Checkpoint::write(const std::string& path) const {
    std::ostringstream header;
    header << "DGCK1\n";
    for (const auto& kv : meta_) header << "meta " << kv.first << " " << kv.second << "\n";
    uint64_t offset = 0;
    for (const std::string& name : order_) {
        const Tensor& t = tensors_.at(name);
        const uint64_t nbytes = t.data.size() * sizeof(float);
        header << "tensor " << name << " f32 " << t.shape.size();
        for (int64_t d : t.shape) header << " " << d;
        header << " " << offset << " " << nbytes << "\n";
        offset += nbytes;
    }
    header << "DATA\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    const std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const std::string& name : order_) {
        const Tensor& t = tensors_.at(name);
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out.good()) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint Checkpoint::read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");

    Checkpoint ck;
    struct Entry {
        std::string name;
        std::vector<int64_t> shape;
        uint64_t offset, nbytes;
    };
    std::vector<Entry> entries;

    std::string line;
    if (!std::getline(in, line) || line != "DGCK1")
        throw IoError("checkpoint: bad magic in '" + path + "'");
    while (std::getline(in, line)) {
        if (line == "DATA") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ck.set_meta(key, value);
        } else if (tag == "tensor") {
            Entry e;
            std::string dtype;
            size_t ndim = 0;
            ls >> e.name >> dtype >> ndim;
            if (dtype != "f32") throw IoError("checkpoint: unsupported dtype '" + dtype + "'");
            e.shape.resize(ndim);
            for (size_t i = 0; i < ndim; ++i) ls >> e.shape[i];
            ls >> e.offset >> e.nbytes;
            if (!ls) throw IoError("checkpoint: malformed tensor line: " + line);
            entries.push_back(std::move(e));
        } else {
            throw IoError("checkpoint: unknown header line: " + line);
        }
    }
    if (line != "DATA") throw IoError("checkpoint: missing DATA marker in '" + path + "'");

    const std::streampos data_start = in.tellg();
    for (const Entry& e : entries) {
        Tensor t = Tensor::zeros(e.shape);
        require(t.data.size() * sizeof(float) == e.nbytes,
                "checkpoint: byte size mismatch for '" + e.name + "'");
        in.seekg(data_start + static_cast<std::streamoff>(e.offset));
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(e.nbytes));
        if (!in.good()) throw IoError("checkpoint: truncated data for '" + e.name + "'");
        ck.order_.push_back(e.name);
        ck.tensors_[e.name] = std::move(t);
    }
    return ck;
}

}  // namespace dgadet::nn
