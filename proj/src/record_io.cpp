#include "dice/record_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "dice/error.hpp"

namespace dice {

namespace {

constexpr std::uint8_t kMagic[8] = {'D', 'I', 'C', 'E', 'R', 'E', 'C', 0};
constexpr std::uint32_t kFormatVersion = 1;
// Hard cap on any one dimension read from disk, so a corrupt header cannot
// drive a multi-gigabyte allocation before the truncation check fires.
constexpr std::uint32_t kDimLimit = 1u << 20;

struct Writer {
    std::vector<std::uint8_t> out;

    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct Reader {
    const std::vector<std::uint8_t>& in;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > in.size()) throw IoError("record truncated");
    }
    std::uint8_t u8() {
        need(1);
        return in[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[pos++]) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
};

std::uint32_t checked_dim(std::uint32_t v, const char* what) {
    if (v == 0 || v > kDimLimit) throw IoError(std::string("record: bad ") + what);
    return v;
}

void check_consistent(const InversionRecord& rec) {
    const int a = rec.alphabet_size();
    if (rec.D < 1 || rec.T < 1 || rec.vocab.k < 1)
        throw ConfigError("record: empty dimensions");
    if (static_cast<int>(rec.residuals.size()) != rec.T)
        throw ConfigError("record: residual count does not match T");
    for (const LogitField& z : rec.residuals)
        if (z.rows != rec.D || z.cols != a) throw ConfigError("record: residual shape mismatch");
    if (rec.family == Family::mgm) {
        if (rec.plan.D != rec.D || rec.plan.T != rec.T)
            throw ConfigError("record: plan shape mismatch");
        if (rec.plan.masks.size() != static_cast<std::size_t>(rec.T) * rec.D ||
            rec.plan.noise.size() != static_cast<std::size_t>(rec.D))
            throw ConfigError("record: plan arrays malformed");
        if (rec.y0.rows != rec.D || rec.y0.cols != a)
            throw ConfigError("record: clean-input logits shape mismatch");
    } else {
        if (rec.trajectory.size() != static_cast<std::size_t>(rec.T + 1) * rec.D)
            throw ConfigError("record: trajectory length mismatch");
    }
}

void write_field(Writer& w, const LogitField& f) {
    for (double v : f.values) w.f64(v);
}

LogitField read_field(Reader& r, int rows, int cols, const char* what) {
    LogitField f(rows, cols, 0.0);
    for (double& v : f.values) {
        v = r.f64();
        if (!std::isfinite(v)) throw NumericError(std::string("record: non-finite ") + what);
    }
    return f;
}

} // namespace

std::vector<std::uint8_t> record_to_bytes(const InversionRecord& rec) {
    check_consistent(rec);
    Writer w;
    w.out.reserve(64 + static_cast<std::size_t>(rec.T) * rec.D * rec.alphabet_size() * 8);

    for (std::uint8_t b : kMagic) w.u8(b);
    w.u32(kFormatVersion);
    w.u32(rec.family == Family::mgm ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(rec.D));
    w.u32(static_cast<std::uint32_t>(rec.alphabet_size()));
    w.u32(static_cast<std::uint32_t>(rec.T));
    w.u32(static_cast<std::uint32_t>(rec.vocab.k));
    w.u8(rec.vocab.has_mask_token ? 1 : 0);
    w.u8(0);
    w.u8(0);
    w.u8(0);
    w.u64(rec.seed);
    w.u64(rec.stream);
    w.u64(rec.schedule_fingerprint);
    w.i32(rec.condition);
    w.f64(rec.floor);
    if (rec.family == Family::mgm) {
        w.u32(static_cast<std::uint32_t>(rec.plan.source));
        w.u32(static_cast<std::uint32_t>(rec.plan.mode));
        for (std::uint8_t m : rec.plan.masks) w.u8(m);
        for (std::int32_t tok : rec.plan.noise) w.i32(tok);
        write_field(w, rec.y0);
    } else {
        w.u32(0);
        w.u32(0);
        for (std::int32_t tok : rec.trajectory) w.i32(tok);
    }
    for (const LogitField& z : rec.residuals) write_field(w, z);
    return std::move(w.out);
}

InversionRecord record_from_bytes(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    for (std::uint8_t b : kMagic)
        if (r.u8() != b) throw IoError("record: bad magic");

    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) throw IoError("record: unsupported version");
    const std::uint32_t fam = r.u32();
    if (fam > 1) throw IoError("record: unknown family");

    InversionRecord rec;
    rec.version = version;
    rec.family = fam == 0 ? Family::mgm : Family::multinomial;
    rec.D = static_cast<int>(checked_dim(r.u32(), "length"));
    const std::uint32_t a = checked_dim(r.u32(), "alphabet");
    rec.T = static_cast<int>(checked_dim(r.u32(), "step count"));
    rec.vocab.k = static_cast<int>(checked_dim(r.u32(), "vocab size"));
    rec.vocab.has_mask_token = r.u8() != 0;
    r.u8();
    r.u8();
    r.u8();
    if (a != static_cast<std::uint32_t>(rec.alphabet_size()))
        throw IoError("record: alphabet disagrees with vocab");
    rec.seed = r.u64();
    rec.stream = r.u64();
    rec.schedule_fingerprint = r.u64();
    rec.condition = r.i32();
    rec.floor = r.f64();
    if (!std::isfinite(rec.floor)) throw NumericError("record: non-finite floor");

    const std::uint32_t noise_source = r.u32();
    const std::uint32_t mask_mode = r.u32();
    if (rec.family == Family::mgm) {
        if (noise_source > 1) throw IoError("record: unknown noise source");
        if (mask_mode > 1) throw IoError("record: unknown mask mode");
        rec.plan.D = rec.D;
        rec.plan.T = rec.T;
        rec.plan.source = static_cast<NoiseSource>(noise_source);
        rec.plan.mode = static_cast<MaskMode>(mask_mode);
        rec.plan.masks.resize(static_cast<std::size_t>(rec.T) * rec.D);
        for (std::uint8_t& m : rec.plan.masks) {
            m = r.u8();
            if (m > 1) throw IoError("record: mask bytes must be 0 or 1");
        }
        rec.plan.noise.resize(static_cast<std::size_t>(rec.D));
        for (std::int32_t& tok : rec.plan.noise) {
            tok = r.i32();
            if (tok < 0 || tok >= rec.alphabet_size()) throw IoError("record: noise token out of range");
        }
        rec.y0 = read_field(r, rec.D, static_cast<int>(a), "clean-input logits");
    } else {
        rec.trajectory.resize(static_cast<std::size_t>(rec.T + 1) * rec.D);
        for (std::int32_t& tok : rec.trajectory) {
            tok = r.i32();
            if (tok < 0 || tok >= rec.alphabet_size())
                throw IoError("record: trajectory token out of range");
        }
    }

    rec.residuals.reserve(static_cast<std::size_t>(rec.T));
    for (int t = 1; t <= rec.T; ++t)
        rec.residuals.push_back(read_field(r, rec.D, static_cast<int>(a), "residual"));
    if (r.pos != bytes.size()) throw IoError("record: trailing bytes");
    return rec;
}

void write_record(const InversionRecord& rec, const std::string& path) {
    std::vector<std::uint8_t> bytes = record_to_bytes(rec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

InversionRecord read_record(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open record: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path);
    return record_from_bytes(bytes);
}

} // namespace dice
