#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sortlab/error.hpp"
#include "sortlab/model.hpp"

namespace sortlab::model {

namespace {

constexpr char kMagic[8] = {'S', 'O', 'R', 'T', 'C', 'K', 'P', 'T'};

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }

    std::vector<char> bytes;
};

class Reader {
public:
    Reader(const std::vector<char>& data, const std::string& path) : data_(data), path_(path) {}

    const char* take(std::size_t n) {
        if (data_.size() - pos_ < n) {
            throw Error(ErrorKind::corruption, "checkpoint '" + path_ + "' is truncated at byte " +
                                                   std::to_string(pos_));
        }
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint64_t uint(int width) {
        const char* p = take(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        }
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    std::uint64_t u64() { return uint(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    bool done() const { return pos_ == data_.size(); }

private:
    const std::vector<char>& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

void write_config(Writer& w, const ModelConfig& c) {
    for (std::uint32_t v : {c.grid_width, c.grid_height, c.channels, c.vocab_size, c.embed_dim,
                            c.question_dim, c.cell_features, c.joint_dim, c.fusion_dim,
                            c.head_dim, c.answer_classes}) {
        w.u32(v);
    }
    w.u64(c.seed);
}

ModelConfig read_config(Reader& r) {
    ModelConfig c;
    for (std::uint32_t* field : {&c.grid_width, &c.grid_height, &c.channels, &c.vocab_size,
                                 &c.embed_dim, &c.question_dim, &c.cell_features, &c.joint_dim,
                                 &c.fusion_dim, &c.head_dim, &c.answer_classes}) {
        *field = r.u32();
    }
    c.seed = r.u64();
    return c;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    write_config(w, params.config);
    w.u32(static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
        w.u32(static_cast<std::uint32_t>(t.name.size()));
        w.raw(t.name.data(), t.name.size());
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t d : t.shape) w.u64(d);
        for (double v : t.values) w.f64(v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
    out.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
    out.close();
    if (!out) throw Error(ErrorKind::io, "failed writing checkpoint '" + path + "'");
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open checkpoint '" + path + "'");
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r(data, path);
    if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorKind::corruption, "'" + path + "' is not a checkpoint file");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw Error(ErrorKind::version, "checkpoint '" + path + "' has format version " +
                                            std::to_string(version) + ", expected " +
                                            std::to_string(kCheckpointVersion));
    }
    ModelParams params;
    params.config = read_config(r);
    try {
        params.config.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::corruption, "checkpoint '" + path + "': " + e.what());
    }

    const auto expected = parameter_layout(params.config);
    const std::uint32_t count = r.u32();
    if (count != expected.size()) {
        throw Error(ErrorKind::corruption, "checkpoint '" + path + "' holds " +
                                               std::to_string(count) + " tensors, expected " +
                                               std::to_string(expected.size()));
    }
    for (const auto& [name, shape] : expected) {
        Parameter p;
        const std::uint32_t len = r.u32();
        const char* bytes = r.take(len);
        p.name.assign(bytes, len);
        const std::uint32_t rank = r.u32();
        for (std::uint32_t i = 0; i < rank; ++i) p.shape.push_back(r.u64());
        if (p.name != name || p.shape != shape) {
            throw Error(ErrorKind::corruption, "checkpoint '" + path + "' record '" + p.name +
                                                   "' does not match parameter '" + name + "'");
        }
        p.values.resize(autograd::numel(shape));
        for (double& v : p.values) v = r.f64();
        params.tensors.push_back(std::move(p));
    }
    if (!r.done()) {
        throw Error(ErrorKind::corruption, "checkpoint '" + path + "' has trailing bytes");
    }
    return params;
}

}  // namespace sortlab::model
