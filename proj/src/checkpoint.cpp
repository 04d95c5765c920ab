#include "b2u/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "b2u/error.hpp"
#include "b2u/rng.hpp"

namespace b2u {

namespace {

constexpr std::string_view kMagic = "B2UCKPT1";
constexpr std::string_view kMomentM = "__adam.m/";
constexpr std::string_view kMomentV = "__adam.v/";
constexpr std::string_view kParam = "param/";

struct Entry {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes, std::size_t end)
        : bytes_(bytes), end_(end) {}

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == end_; }

    void need(std::size_t n, const char* what) const {
        if (end_ - pos_ < n) {
            throw FormatError(std::string("checkpoint truncated reading ") + what, pos_);
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

std::uint64_t read_u64(const std::vector<std::uint8_t>& bytes, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
}

Entry scalar(double v) { return {{1}, {static_cast<float>(v)}}; }

Entry tensor_entry(const Tensor& t) {
    const Shape s = t.shape();
    return {{static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
             static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)},
            {t.data().begin(), t.data().end()}};
}

Tensor entry_tensor(const std::string& name, const Entry& e) {
    if (e.dims.size() != 4) {
        throw FormatError("checkpoint entry '" + name + "' must have rank 4, has " +
                              std::to_string(e.dims.size()),
                          0);
    }
    Shape s{static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]), static_cast<int>(e.dims[2]),
            static_cast<int>(e.dims[3])};
    return Tensor(s, e.values);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    std::map<std::string, Entry> entries;
    entries["__epoch"] = scalar(ckpt.epoch);
    entries["__net.in_channels"] = scalar(ckpt.net_config.in_channels);
    entries["__net.base_channels"] = scalar(ckpt.net_config.base_channels);
    entries["__net.depth"] = scalar(ckpt.net_config.depth);
    entries["__net.leaky_slope"] = scalar(ckpt.net_config.leaky_slope);
    entries["__adam.step"] = scalar(static_cast<double>(ckpt.adam.step));
    entries["__adam.beta1"] = scalar(ckpt.adam.beta1);
    entries["__adam.beta2"] = scalar(ckpt.adam.beta2);
    entries["__adam.eps"] = scalar(ckpt.adam.eps);
    Entry digest{{4}, {}};
    for (int i = 0; i < 4; ++i) {
        digest.values.push_back(static_cast<float>((ckpt.trainer_config_digest >> (16 * i)) & 0xffff));
    }
    entries["__config_digest"] = digest;
    for (const auto& [name, t] : ckpt.params) entries[std::string(kParam) + name] = tensor_entry(t);
    for (const auto& [name, t] : ckpt.adam.first_moment) entries[std::string(kMomentM) + name] = tensor_entry(t);
    for (const auto& [name, t] : ckpt.adam.second_moment) entries[std::string(kMomentV) + name] = tensor_entry(t);

    Writer w;
    w.raw(kMagic);
    w.u32(ckpt.format_version);
    w.u32(static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, e] : entries) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.raw(name);
        w.u32(static_cast<std::uint32_t>(e.dims.size()));
        for (auto d : e.dims) w.u32(d);
        for (float v : e.values) w.f32(v);
    }
    const std::uint64_t sum =
        fnv1a64(std::string_view(reinterpret_cast<const char*>(w.bytes.data()), w.bytes.size()));
    w.u64(sum);
    return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kMagic.size() ||
        std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError("bad magic: not a B2UCKPT1 checkpoint", 0);
    }
    if (bytes.size() < kMagic.size() + 4 + 4 + 8) {
        throw FormatError("checkpoint truncated", bytes.size());
    }
    const std::size_t body_end = bytes.size() - 8;
    Reader r(bytes, body_end);
    r.str(kMagic.size(), "magic");
    Checkpoint ckpt;
    ckpt.format_version = r.u32("format_version");
    if (ckpt.format_version != kCheckpointVersion) {
        throw FormatError("checkpoint version mismatch: file has " +
                              std::to_string(ckpt.format_version) + ", expected " +
                              std::to_string(kCheckpointVersion),
                          kMagic.size());
    }
    const std::uint64_t stored = read_u64(bytes, body_end);
    const std::uint64_t actual =
        fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), body_end));

    std::map<std::string, Entry> entries;
    try {
        const std::uint32_t count = r.u32("entry count");
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint32_t len = r.u32("name length");
            std::string name = r.str(len, "name");
            const std::uint32_t rank = r.u32("rank");
            if (rank > 8) throw FormatError("implausible rank " + std::to_string(rank), r.pos() - 4);
            Entry e;
            std::size_t numel = 1;
            for (std::uint32_t d = 0; d < rank; ++d) {
                e.dims.push_back(r.u32("dims"));
                numel *= e.dims.back();
            }
            r.need(numel * 4, "payload");
            e.values.resize(numel);
            for (auto& v : e.values) v = r.f32("payload");
            entries.emplace(std::move(name), std::move(e));
        }
        if (!r.done()) throw FormatError("trailing bytes before checksum", r.pos());
    } catch (const FormatError&) {
        if (stored != actual) throw FormatError("checkpoint checksum mismatch (corrupt or truncated)", body_end);
        throw;
    }
    if (stored != actual) throw FormatError("checkpoint checksum mismatch (corrupt or truncated)", body_end);

    auto take_scalar = [&](const std::string& name) -> double {
        auto it = entries.find(name);
        if (it == entries.end() || it->second.values.size() != 1) {
            throw FormatError("checkpoint missing scalar '" + name + "'", 0);
        }
        const double v = it->second.values[0];
        entries.erase(it);
        return v;
    };
    ckpt.epoch = static_cast<int>(take_scalar("__epoch"));
    ckpt.net_config.in_channels = static_cast<int>(take_scalar("__net.in_channels"));
    ckpt.net_config.base_channels = static_cast<int>(take_scalar("__net.base_channels"));
    ckpt.net_config.depth = static_cast<int>(take_scalar("__net.depth"));
    ckpt.net_config.leaky_slope = static_cast<float>(take_scalar("__net.leaky_slope"));
    ckpt.adam.step = static_cast<std::int64_t>(take_scalar("__adam.step"));
    // Stored as float; the defaults are what training uses, so recover them exactly.
    auto restore = [](double stored_value, double canonical) {
        return static_cast<float>(canonical) == static_cast<float>(stored_value) ? canonical : stored_value;
    };
    ckpt.adam.beta1 = restore(take_scalar("__adam.beta1"), AdamState{}.beta1);
    ckpt.adam.beta2 = restore(take_scalar("__adam.beta2"), AdamState{}.beta2);
    ckpt.adam.eps = restore(take_scalar("__adam.eps"), AdamState{}.eps);
    {
        auto it = entries.find("__config_digest");
        if (it == entries.end() || it->second.values.size() != 4) {
            throw FormatError("checkpoint missing '__config_digest'", 0);
        }
        for (int i = 0; i < 4; ++i) {
            ckpt.trainer_config_digest |= static_cast<std::uint64_t>(it->second.values[static_cast<std::size_t>(i)])
                                          << (16 * i);
        }
        entries.erase(it);
    }
    for (const auto& [name, e] : entries) {
        if (name.starts_with(kParam)) {
            ckpt.params[name.substr(kParam.size())] = entry_tensor(name, e);
        } else if (name.starts_with(kMomentM)) {
            ckpt.adam.first_moment[name.substr(kMomentM.size())] = entry_tensor(name, e);
        } else if (name.starts_with(kMomentV)) {
            ckpt.adam.second_moment[name.substr(kMomentV.size())] = entry_tensor(name, e);
        } else {
            throw FormatError("unknown checkpoint entry '" + name + "'", 0);
        }
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open checkpoint for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string(), "checkpoint write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open checkpoint");
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
        return deserialize_checkpoint(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

std::uint64_t checkpoint_digest(const Checkpoint& ckpt) {
    const auto bytes = serialize_checkpoint(ckpt);
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace b2u
