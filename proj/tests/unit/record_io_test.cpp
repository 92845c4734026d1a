#include "doctest.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "dice/denoise.hpp"
#include "dice/dice.hpp"
#include "dice/error.hpp"
#include "dice/fixture.hpp"
#include "dice/record_io.hpp"
#include "dice/rng.hpp"

using namespace dice;

namespace {

std::string fixture_dir() { return std::string(DICE_SOURCE_DIR) + "/fixtures"; }

struct MgmCase {
    Fixture f;
    MaskSchedule msched{MaskCurve::linear, MaskMode::inclusive};
    MaskPlan plan;
    std::unique_ptr<Denoiser> den;
    TokenSeq x0;
    InversionRecord rec;
};

MgmCase make_mgm_case() {
    MgmCase c;
    c.f = load_fixture(fixture_dir() + "/sentiment_pairs.json");
    auto x0_rng = make_rng(500, 0);
    c.x0 = sample_from(c.f, 1, x0_rng);
    auto plan_rng = make_rng(500, 1);
    c.plan = generate_mask_plan(c.msched, c.f.d, 8, c.f.vocab, NoiseSource::mask_token, plan_rng);
    c.den = make_template_denoiser_plan_aware(c.f, c.plan);
    c.rec = invert_mgm(c.x0, *c.den, Condition{1}, c.plan, c.msched, 500, 1);
    return c;
}

struct MultCase {
    Fixture f;
    DiffusionSchedule sched;
    std::unique_ptr<Denoiser> den;
    TokenSeq x0;
    InversionRecord rec;
};

MultCase make_mult_case() {
    MultCase c;
    c.f = load_fixture(fixture_dir() + "/markov_pair.json");
    c.sched = make_vq_schedule(16, 5, SchedulePreset::mask_and_replace);
    c.den = make_markov_denoiser(c.f, c.sched);
    auto x0_rng = make_rng(501, 0);
    c.x0 = sample_from(c.f, 0, x0_rng);
    c.rec = invert_multinomial(c.x0, *c.den, Condition{0}, c.sched, 501, 1);
    return c;
}

bool records_equal(const InversionRecord& a, const InversionRecord& b) {
    if (a.version != b.version || a.family != b.family || a.D != b.D || a.T != b.T) return false;
    if (a.vocab.k != b.vocab.k || a.vocab.has_mask_token != b.vocab.has_mask_token) return false;
    if (a.seed != b.seed || a.stream != b.stream) return false;
    if (a.schedule_fingerprint != b.schedule_fingerprint) return false;
    if (a.condition != b.condition) return false;
    if (std::memcmp(&a.floor, &b.floor, sizeof(double)) != 0) return false;
    if (a.plan.masks != b.plan.masks || a.plan.noise != b.plan.noise) return false;
    if (a.plan.source != b.plan.source || a.plan.mode != b.plan.mode) return false;
    if (a.trajectory != b.trajectory) return false;
    if (a.y0.values.size() != b.y0.values.size()) return false;
    if (std::memcmp(a.y0.values.data(), b.y0.values.data(),
                    a.y0.values.size() * sizeof(double)) != 0)
        return false;
    if (a.residuals.size() != b.residuals.size()) return false;
    for (std::size_t i = 0; i < a.residuals.size(); ++i) {
        if (a.residuals[i].values.size() != b.residuals[i].values.size()) return false;
        if (std::memcmp(a.residuals[i].values.data(), b.residuals[i].values.data(),
                        a.residuals[i].values.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("masked-generation records survive the byte round trip") {
    const MgmCase c = make_mgm_case();
    const std::vector<std::uint8_t> bytes = record_to_bytes(c.rec);
    const InversionRecord back = record_from_bytes(bytes);
    CHECK(records_equal(c.rec, back));

    // Serialization is itself deterministic.
    CHECK(record_to_bytes(c.rec) == bytes);
    CHECK(record_to_bytes(back) == bytes);
}

TEST_CASE("multinomial records survive the byte round trip") {
    const MultCase c = make_mult_case();
    const std::vector<std::uint8_t> bytes = record_to_bytes(c.rec);
    const InversionRecord back = record_from_bytes(bytes);
    CHECK(records_equal(c.rec, back));
    CHECK(record_to_bytes(back) == bytes);
}

TEST_CASE("records round trip through the filesystem") {
    const MgmCase c = make_mgm_case();
    const std::string path = temp_path("record_io_test_mgm.bin");
    write_record(c.rec, path);
    const InversionRecord back = read_record(path);
    CHECK(records_equal(c.rec, back));
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_record(path), IoError);
}

TEST_CASE("a reloaded record drives the edit loop to identical outputs") {
    const MultCase c = make_mult_case();
    const InversionRecord back = record_from_bytes(record_to_bytes(c.rec));

    EditParams p;
    p.target = Condition{1};
    p.tau = 0.8;
    p.lambda1 = 0.6;
    p.lambda2 = 0.4;
    const TokenSeq a = edit_multinomial(c.rec, *c.den, c.sched, p, 77, 3);
    const TokenSeq b = edit_multinomial(back, *c.den, c.sched, p, 77, 3);
    CHECK(a.tokens == b.tokens);

    const MgmCase m = make_mgm_case();
    const InversionRecord mback = record_from_bytes(record_to_bytes(m.rec));
    EditParams q;
    q.target = Condition{0};
    q.tau = 0.9;
    q.lambda1 = 0.7;
    q.lambda2 = 0.3;
    const TokenSeq ma = edit_mgm(m.rec, *m.den, q, 78, 4);
    const TokenSeq mb = edit_mgm(mback, *m.den, q, 78, 4);
    CHECK(ma.tokens == mb.tokens);
}

TEST_CASE("structural corruption is detected") {
    const MultCase c = make_mult_case();
    const std::vector<std::uint8_t> bytes = record_to_bytes(c.rec);

    SUBCASE("truncation") {
        std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
        CHECK_THROWS_AS(record_from_bytes(cut), IoError);
        std::vector<std::uint8_t> header_only(bytes.begin(), bytes.begin() + 40);
        CHECK_THROWS_AS(record_from_bytes(header_only), IoError);
    }
    SUBCASE("trailing bytes") {
        std::vector<std::uint8_t> extra = bytes;
        extra.push_back(0);
        CHECK_THROWS_AS(record_from_bytes(extra), IoError);
    }
    SUBCASE("bad magic") {
        std::vector<std::uint8_t> bad = bytes;
        bad[0] ^= 0xFF;
        CHECK_THROWS_AS(record_from_bytes(bad), IoError);
    }
    SUBCASE("unsupported version") {
        std::vector<std::uint8_t> bad = bytes;
        bad[8] = 99;
        CHECK_THROWS_AS(record_from_bytes(bad), IoError);
    }
    SUBCASE("unknown family") {
        std::vector<std::uint8_t> bad = bytes;
        bad[12] = 7;
        CHECK_THROWS_AS(record_from_bytes(bad), IoError);
    }
    SUBCASE("trajectory token outside the alphabet") {
        std::vector<std::uint8_t> bad = bytes;
        bad[80] = 0x7F; // first trajectory entry becomes 127
        CHECK_THROWS_AS(record_from_bytes(bad), IoError);
    }
}

TEST_CASE("non-finite payloads are a numeric error, not a format error") {
    const MultCase c = make_mult_case();
    std::vector<std::uint8_t> bytes = record_to_bytes(c.rec);
    // Residual block starts right after the (T+1) x D trajectory.
    const std::size_t offset = 80 + static_cast<std::size_t>(c.rec.T + 1) * c.rec.D * 4;
    const double nan = std::nan("");
    std::uint8_t raw[sizeof(double)];
    std::memcpy(raw, &nan, sizeof(double));
    std::memcpy(bytes.data() + offset, raw, sizeof(double));
    CHECK_THROWS_AS(record_from_bytes(bytes), NumericError);
}

TEST_CASE("mask bytes must be strictly zero or one") {
    const MgmCase c = make_mgm_case();
    std::vector<std::uint8_t> bytes = record_to_bytes(c.rec);
    bytes[80] = 2; // first mask byte
    CHECK_THROWS_AS(record_from_bytes(bytes), IoError);
}

TEST_CASE("writing an internally inconsistent record is refused") {
    MultCase c = make_mult_case();
    c.rec.residuals.pop_back();
    CHECK_THROWS_AS(record_to_bytes(c.rec), ConfigError);

    MgmCase m = make_mgm_case();
    m.rec.plan.noise.pop_back();
    CHECK_THROWS_AS(record_to_bytes(m.rec), ConfigError);
}
