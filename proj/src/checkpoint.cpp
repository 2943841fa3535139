#include "ifgan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ifgan {

namespace {

struct Writer {
    std::vector<std::uint8_t> bytes;

    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void f64_array(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
};

struct Reader {
    const std::uint8_t* p;
    const std::uint8_t* end;
    const char* context;

    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end - p) < n)
            throw std::runtime_error(std::string(context) + ": truncated checkpoint");
    }
    void raw(void* out, std::size_t n) {
        need(n);
        std::memcpy(out, p, n);
        p += n;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
    std::vector<double> f64_array() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (std::uint64_t i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
};

void append_chunk(Writer& out, const char tag[4], const std::vector<std::uint8_t>& payload) {
    out.raw(tag, 4);
    out.u64(payload.size());
    out.raw(payload.data(), payload.size());
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    Writer out;
    out.raw("IFG1", 4);
    out.u32(ckpt.version);

    {
        Writer payload;
        payload.raw(ckpt.config_json.data(), ckpt.config_json.size());
        append_chunk(out, "CONF", payload.bytes);
    }
    {
        Writer payload;
        payload.raw(ckpt.arch_json.data(), ckpt.arch_json.size());
        append_chunk(out, "ARCH", payload.bytes);
    }
    for (const NamedTensor& t : ckpt.tensors) {
        Writer payload;
        payload.str(t.name);
        payload.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (auto e : t.shape) payload.u64(static_cast<std::uint64_t>(e));
        for (double v : t.values) payload.f64(v);
        append_chunk(out, "PARM", payload.bytes);
    }
    {
        Writer payload;
        payload.u32(static_cast<std::uint32_t>(ckpt.optimizers.size()));
        for (const OptimizerStateBlob& o : ckpt.optimizers) {
            payload.str(o.name);
            payload.f64(o.lr);
            payload.f64(o.beta1);
            payload.f64(o.beta2);
            payload.f64(o.eps);
            payload.u64(o.step);
            payload.u64(o.m.size());
            for (std::size_t i = 0; i < o.m.size(); ++i) {
                payload.f64_array(o.m[i]);
                payload.f64_array(o.v[i]);
            }
        }
        append_chunk(out, "OPTS", payload.bytes);
    }
    {
        Writer payload;
        payload.u64(ckpt.progress_step);
        payload.str(ckpt.rng_state);
        append_chunk(out, "PROG", payload.bytes);
    }
    out.u32(crc32(out.bytes.data(), out.bytes.size()));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(reinterpret_cast<const char*>(out.bytes.data()),
            static_cast<std::streamsize>(out.bytes.size()));
    if (!f) throw std::runtime_error("short write: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 12) throw std::runtime_error(path + ": not a checkpoint (too short)");

    const std::uint32_t stored_crc =
        static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
        static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8 |
        static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16 |
        static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24;
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
        throw std::runtime_error(path + ": checksum mismatch, checkpoint is corrupt");

    Reader in{bytes.data(), bytes.data() + bytes.size() - 4, path.c_str()};
    char magic[4];
    in.raw(magic, 4);
    if (std::memcmp(magic, "IFG1", 4) != 0)
        throw std::runtime_error(path + ": bad magic, not an IFG1 checkpoint");
    Checkpoint ckpt;
    ckpt.version = in.u32();
    if (ckpt.version != kCheckpointVersion)
        throw std::runtime_error(path + ": format version " + std::to_string(ckpt.version) +
                                 " is not supported by this build (version " +
                                 std::to_string(kCheckpointVersion) + ")");

    while (in.p < in.end) {
        char tag[4];
        in.raw(tag, 4);
        const std::uint64_t len = in.u64();
        in.need(len);
        Reader chunk{in.p, in.p + len, path.c_str()};
        in.p += len;
        if (std::memcmp(tag, "CONF", 4) == 0) {
            ckpt.config_json.assign(reinterpret_cast<const char*>(chunk.p), len);
        } else if (std::memcmp(tag, "ARCH", 4) == 0) {
            ckpt.arch_json.assign(reinterpret_cast<const char*>(chunk.p), len);
        } else if (std::memcmp(tag, "PARM", 4) == 0) {
            NamedTensor t;
            t.name = chunk.str();
            const std::uint32_t rank = chunk.u32();
            std::uint64_t count = 1;
            for (std::uint32_t i = 0; i < rank; ++i) {
                const std::uint64_t e = chunk.u64();
                t.shape.push_back(static_cast<std::int64_t>(e));
                count *= e;
            }
            chunk.need(count * 8);
            t.values.resize(count);
            for (std::uint64_t i = 0; i < count; ++i) t.values[i] = chunk.f64();
            ckpt.tensors.push_back(std::move(t));
        } else if (std::memcmp(tag, "OPTS", 4) == 0) {
            const std::uint32_t n = chunk.u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                OptimizerStateBlob o;
                o.name = chunk.str();
                o.lr = chunk.f64();
                o.beta1 = chunk.f64();
                o.beta2 = chunk.f64();
                o.eps = chunk.f64();
                o.step = chunk.u64();
                const std::uint64_t params = chunk.u64();
                for (std::uint64_t j = 0; j < params; ++j) {
                    o.m.push_back(chunk.f64_array());
                    o.v.push_back(chunk.f64_array());
                }
                ckpt.optimizers.push_back(std::move(o));
            }
        } else if (std::memcmp(tag, "PROG", 4) == 0) {
            ckpt.progress_step = chunk.u64();
            ckpt.rng_state = chunk.str();
        } else {
            throw std::runtime_error(path + ": unknown chunk tag '" + std::string(tag, 4) + "'");
        }
    }
    return ckpt;
}

}  // namespace ifgan
