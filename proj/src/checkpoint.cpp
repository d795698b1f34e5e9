#include "eltrack/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <zlib.h>

#include "eltrack/errors.hpp"

namespace eltrack {

namespace {

constexpr char kMagic[4] = {'E', 'L', 'T', 'K'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    void u64(std::uint64_t v) { bytes(&v, sizeof(v)); }
    void f64(double v) { bytes(&v, sizeof(v)); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    std::vector<char> buf;
};

class Reader {
public:
    Reader(const std::vector<char>& b, std::size_t end) : buf_(b), end_(end) {}
    void bytes(void* p, std::size_t n) {
        if (n > end_ - pos_) throw IoError("checkpoint truncated");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, sizeof(v));
        return v;
    }
    double f64() {
        double v;
        bytes(&v, sizeof(v));
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        if (n > end_ - pos_) throw IoError("checkpoint truncated");
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == end_; }

private:
    const std::vector<char>& buf_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t n) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrackerModel<float>& model, const Config& cfg) {
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.str(kCheckpointVersion);
    w.str(to_text(cfg));
    for (int c = 0; c < 3; ++c) w.f64(model.norm_stats.mean[c]);
    for (int c = 0; c < 3; ++c) w.f64(model.norm_stats.std[c]);
    const auto& items = model.params().items();
    w.u64(items.size());
    for (const auto& [name, t] : items) {
        w.str(name);
        w.u64(static_cast<std::uint64_t>(t.rows()));
        w.u64(static_cast<std::uint64_t>(t.cols()));
        w.bytes(t.value().data(), static_cast<std::size_t>(t.size()) * sizeof(float));
    }
    const std::uint32_t crc = crc_of(w.buf.data(), w.buf.size());
    w.bytes(&crc, sizeof(crc));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof(kMagic) + sizeof(std::uint32_t) || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw IoError("not a checkpoint file: " + path.string());
    }
    const std::size_t body = buf.size() - sizeof(std::uint32_t);
    std::uint32_t stored;
    std::memcpy(&stored, buf.data() + body, sizeof(stored));
    Reader r(buf, body);
    char magic[4];
    r.bytes(magic, 4);
    // Version before checksum so an old file gets the clearer message.
    const std::string version = r.str();
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint version mismatch: file has '" + version + "', expected '" +
                      kCheckpointVersion + "'");
    }
    if (crc_of(buf.data(), body) != stored) {
        throw IoError("checkpoint corrupted (checksum mismatch): " + path.string());
    }
    LoadedCheckpoint out;
    out.config = parse_config(r.str());
    auto model = std::make_unique<TrackerModel<float>>(out.config.model);
    for (int c = 0; c < 3; ++c) model->norm_stats.mean[c] = r.f64();
    for (int c = 0; c < 3; ++c) model->norm_stats.std[c] = r.f64();
    const auto& items = model->params().items();
    if (r.u64() != items.size()) throw IoError("checkpoint parameter count does not match its config");
    for (const auto& [name, t] : items) {
        const std::string stored_name = r.str();
        const auto rows = static_cast<Index>(r.u64());
        const auto cols = static_cast<Index>(r.u64());
        if (stored_name != name || rows != t.rows() || cols != t.cols()) {
            throw IoError("checkpoint parameter layout mismatch at " + name);
        }
        Tensor<float> dst = t;
        r.bytes(dst.mutable_value().data(), static_cast<std::size_t>(dst.size()) * sizeof(float));
        if (!dst.value().allFinite()) throw IoError("checkpoint holds non-finite values in " + name);
    }
    if (!r.done()) throw IoError("checkpoint has trailing data");
    out.model = std::move(model);
    return out;
}

}  // namespace eltrack
