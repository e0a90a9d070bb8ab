#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "auxol/adamw.hpp"
#include "auxol/aux_model.hpp"
#include "auxol/codec.hpp"

namespace auxol {

// Layout (all little-endian):
//   "AUXOL1"
//   i32 patch_size, i32 in_channels, i32 width0, i32 width1, u64 seed, u64 param_count
//   f32[param_count] parameters
//   f64 lr, beta1, beta2, eps, weight_decay; u64 step
//   f32[param_count] first moments, f32[param_count] second moments
inline constexpr std::string_view kCheckpointMagic = "AUXOL1";

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class ByteWriter {
public:
    template <class T>
    void put(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void raw(std::string_view s) { out_.append(s); }
    template <class T, class A>
    void array(const std::vector<T, A>& v) {
        out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view in) : in_(in) {}
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <class T>
    std::vector<T> array(std::size_t n) {
        need(n * sizeof(T));
        std::vector<T> v(n);
        std::memcpy(v.data(), in_.data() + pos_, n * sizeof(T));
        pos_ += n * sizeof(T);
        return v;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize_checkpoint(const AuxParams<float>& params, const OptimizerState<float>& opt) {
    const auto& c = params.config;
    if (opt.m.size() != params.values.size() || opt.v.size() != params.values.size())
        throw CheckpointError("optimizer state does not match parameters");
    detail::ByteWriter w;
    w.raw(kCheckpointMagic);
    w.put<std::int32_t>(c.patch_size);
    w.put<std::int32_t>(c.in_channels);
    w.put<std::int32_t>(c.widths[0]);
    w.put<std::int32_t>(c.widths[1]);
    w.put<std::uint64_t>(c.seed);
    w.put<std::uint64_t>(params.values.size());
    w.array(params.values);
    w.put<double>(opt.hyper.lr);
    w.put<double>(opt.hyper.beta1);
    w.put<double>(opt.hyper.beta2);
    w.put<double>(opt.hyper.eps);
    w.put<double>(opt.hyper.weight_decay);
    w.put<std::uint64_t>(opt.step);
    w.array(opt.m);
    w.array(opt.v);
    return w.take();
}

struct Checkpoint {
    AuxParams<float> params;
    OptimizerState<float> optimizer;
};

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) throw CheckpointError("not an AUXOL1 checkpoint");
    Checkpoint ck;
    auto& c = ck.params.config;
    c.patch_size = r.get<std::int32_t>();
    c.in_channels = r.get<std::int32_t>();
    c.widths[0] = r.get<std::int32_t>();
    c.widths[1] = r.get<std::int32_t>();
    c.seed = r.get<std::uint64_t>();
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw CheckpointError(std::string("checkpoint header: ") + e.what());
    }
    const auto n = r.get<std::uint64_t>();
    if (n != aux_parameter_count(c)) throw CheckpointError("checkpoint parameter count does not match its architecture");
    const auto values = r.array<float>(n);
    ck.params.values.assign(values.begin(), values.end());
    auto& h = ck.optimizer.hyper;
    h.lr = r.get<double>();
    h.beta1 = r.get<double>();
    h.beta2 = r.get<double>();
    h.eps = r.get<double>();
    h.weight_decay = r.get<double>();
    ck.optimizer.step = r.get<std::uint64_t>();
    ck.optimizer.m = r.array<float>(n);
    ck.optimizer.v = r.array<float>(n);
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const AuxParams<float>& params,
                            const OptimizerState<float>& opt) {
    write_file(path, serialize_checkpoint(params, opt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

} // namespace auxol
