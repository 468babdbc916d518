#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "odesig/datagen.hpp"

using namespace odesig;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GeneratorSpec tiny_spec(uint64_t seed) {
    GeneratorSpec g;
    g.samples = 3;
    g.rois = 4;
    g.duration = 12.0;
    g.seed = seed;
    return g;
}

SignalSample single_sine_sample(double amplitude, double omega, double phase, int points) {
    SignalSample s;
    s.id = 0;
    s.duration = points - 1;
    s.truth = {{{amplitude, omega, phase}}};
    s.roi_obs.resize(1);
    s.targets.resize(1);
    for (int k = 0; k < points; ++k)
        s.roi_obs[0].push_back({static_cast<double>(k), s.truth_at(0, k), true});
    return s;
}

} // namespace

TEST_SUITE("datagen") {

TEST_CASE("single sinusoid hits quarter-period values") {
    const SignalSample s = single_sine_sample(1.0, 1.5707963267948966, 0.0, 4);
    const double expected[4] = {0.0, 1.0, 0.0, -1.0};
    for (int k = 0; k < 4; ++k)
        CHECK(s.roi_obs[0][k].value == doctest::Approx(expected[k]).epsilon(1e-12));
}

TEST_CASE("zero-amplitude pool produces all-zero signals") {
    GeneratorSpec g = tiny_spec(5);
    g.amp_lo = 0.0;
    g.amp_hi = 0.0;
    const Dataset ds = generate(g);
    for (const SignalSample& s : ds.samples)
        for (const auto& roi : s.roi_obs)
            for (const Observation& o : roi) CHECK(o.value == 0.0);
}

TEST_CASE("generation is deterministic: byte-identical CSV across runs") {
    namespace fs = std::filesystem;
    const std::string p1 = (fs::temp_directory_path() / "odesig_gen1.csv").string();
    const std::string p2 = (fs::temp_directory_path() / "odesig_gen2.csv").string();
    write_signals_csv(p1, generate(tiny_spec(77)).samples, "cafe", 77);
    write_signals_csv(p2, generate(tiny_spec(77)).samples, "cafe", 77);
    CHECK(slurp(p1) == slurp(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("ground-truth queries reproduce stored values exactly") {
    const Dataset ds = generate(tiny_spec(9));
    for (const SignalSample& s : ds.samples)
        for (int r = 0; r < s.rois(); ++r)
            for (const Observation& o : s.roi_obs[r]) CHECK(s.truth_at(r, o.t) == o.value);
}

TEST_CASE("corrupt_missing: zero steps is a no-op") {
    const Dataset ds = generate(tiny_spec(10));
    const SignalSample c = corrupt_missing(ds.samples[0], MissingMode::Interpolation, 0, 1);
    for (int r = 0; r < c.rois(); ++r) {
        CHECK(c.targets[r].empty());
        for (size_t j = 0; j < c.roi_obs[r].size(); ++j)
            CHECK(c.roi_obs[r][j].value == ds.samples[0].roi_obs[r][j].value);
    }
}

TEST_CASE("corrupt_missing extrapolation removes the suffix") {
    SignalSample s = single_sine_sample(1.0, 0.7, 0.1, 10); // T = 10: t = 0..9
    const SignalSample c = corrupt_missing(s, MissingMode::Extrapolation, 3, 1);
    for (int j = 0; j <= 6; ++j) CHECK(c.roi_obs[0][j].observed);
    for (int j = 7; j <= 9; ++j) {
        CHECK_FALSE(c.roi_obs[0][j].observed);
        CHECK(c.roi_obs[0][j].value == 0.0);
    }
    REQUIRE(c.targets[0].size() == 3);
    for (int j = 0; j < 3; ++j) {
        CHECK(c.targets[0][j].t == 7.0 + j);
        CHECK(c.targets[0][j].value == s.truth_at(0, 7.0 + j));
    }
}

TEST_CASE("corrupt_missing interpolation partitions indices like a set oracle") {
    SignalSample s = single_sine_sample(1.2, 0.9, 0.3, 10);
    const int steps = 3;
    const SignalSample c = corrupt_missing(s, MissingMode::Interpolation, steps, 99);
    std::vector<int> hidden;
    for (int j = 0; j < 10; ++j)
        if (!c.roi_obs[0][j].observed) hidden.push_back(j);
    REQUIRE(static_cast<int>(hidden.size()) == steps);
    // contiguous block strictly inside
    CHECK(hidden.front() >= 1);
    CHECK(hidden.back() <= 8);
    for (size_t i = 1; i < hidden.size(); ++i) CHECK(hidden[i] == hidden[i - 1] + 1);
    // observed + hidden = everything; targets carry the hidden truth
    CHECK(c.targets[0].size() == hidden.size());
    for (size_t i = 0; i < hidden.size(); ++i)
        CHECK(c.targets[0][i].value == s.roi_obs[0][hidden[i]].value);
}

TEST_CASE("corrupt_missing rejects oversized requests") {
    SignalSample s = single_sine_sample(1.0, 0.5, 0.0, 6);
    CHECK_THROWS_AS(corrupt_missing(s, MissingMode::Interpolation, 5, 1), ConfigError);
    CHECK_THROWS_AS(corrupt_missing(s, MissingMode::Extrapolation, 6, 1), ConfigError);
}

TEST_CASE("corrupt_offset shifts timestamps exactly") {
    SignalSample s = single_sine_sample(1.0, 0.8, 0.2, 8);
    const SignalSample c = corrupt_offset(s, 0.1);
    for (int k = 0; k < 8; ++k) CHECK(c.roi_obs[0][k].t == static_cast<double>(k) + 0.1);
    const SignalSample same = corrupt_offset(s, 0.0);
    for (int k = 0; k < 8; ++k) {
        CHECK(same.roi_obs[0][k].t == s.roi_obs[0][k].t);
        CHECK(same.roi_obs[0][k].value == s.roi_obs[0][k].value);
    }
}

TEST_CASE("offset 0.25 on sin(2*pi*t) pins every observation at one") {
    const SignalSample s = single_sine_sample(1.0, 6.283185307179586, 0.0, 6);
    const SignalSample c = corrupt_offset(s, 0.25);
    for (const Observation& o : c.roi_obs[0])
        CHECK(o.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("offsets compose additively on ground truth") {
    const SignalSample s = single_sine_sample(1.1, 0.9, 0.4, 10);
    const SignalSample twice = corrupt_offset(corrupt_offset(s, 0.1), 0.2);
    const SignalSample once = corrupt_offset(s, 0.1 + 0.2);
    REQUIRE(twice.roi_obs[0].size() == once.roi_obs[0].size());
    for (size_t k = 0; k < once.roi_obs[0].size(); ++k) {
        CHECK(twice.roi_obs[0][k].t == doctest::Approx(once.roi_obs[0][k].t).epsilon(1e-12));
        CHECK(twice.roi_obs[0][k].value ==
              doctest::Approx(once.roi_obs[0][k].value).epsilon(1e-9));
    }
}

TEST_CASE("corrupt_frequency: unit period is a no-op, half period doubles density") {
    SignalSample s = single_sine_sample(1.0, 0.6, 0.1, 5); // duration 4
    const SignalSample unit = corrupt_frequency(s, {1, 1});
    REQUIRE(unit.roi_obs[0].size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(unit.roi_obs[0][k].t == s.roi_obs[0][k].t);

    const SignalSample half = corrupt_frequency(s, {1, 2});
    CHECK(half.roi_obs[0].size() == 9); // {0, .5, ..., 4}
    CHECK(half.roi_obs[0].back().t == 4.0);
}

TEST_CASE("corrupt_frequency uses rational timestamps") {
    SignalSample s = single_sine_sample(1.0, 0.6, 0.1, 5);
    const SignalSample c = corrupt_frequency(s, {2, 3});
    for (size_t k = 0; k < c.roi_obs[0].size(); ++k)
        CHECK(c.roi_obs[0][k].t == static_cast<double>(2 * k) / 3.0);
}

TEST_CASE("parse_rational accepts fractions and decimals") {
    CHECK(parse_rational("2/3").num == 2);
    CHECK(parse_rational("2/3").den == 3);
    CHECK(parse_rational("0.5").value() == doctest::Approx(0.5));
    CHECK_THROWS_AS(parse_rational("-1/2"), ConfigError);
    CHECK_THROWS_AS(parse_rational("abc"), ConfigError);
}

TEST_CASE("rq1 corruption: zero fractions and zero jitter change nothing") {
    Dataset ds = generate(tiny_spec(12));
    const Dataset before = ds;
    Rq1Config cfg;
    cfg.missing_fraction = 0.0;
    cfg.misaligned_fraction = 0.0;
    cfg.jitter = 0.0;
    apply_rq1_corruption(ds, cfg, 5);
    for (size_t i = 0; i < ds.samples.size(); ++i)
        for (int r = 0; r < ds.samples[i].rois(); ++r)
            for (size_t j = 0; j < ds.samples[i].roi_obs[r].size(); ++j) {
                CHECK(ds.samples[i].roi_obs[r][j].t == before.samples[i].roi_obs[r][j].t);
                CHECK(ds.samples[i].roi_obs[r][j].value ==
                      before.samples[i].roi_obs[r][j].value);
            }
}

TEST_CASE("rq1 corruption: full missing fraction hides points everywhere") {
    Dataset ds = generate(tiny_spec(13));
    Rq1Config cfg;
    cfg.missing_fraction = 1.0;
    cfg.misaligned_fraction = 0.0;
    apply_rq1_corruption(ds, cfg, 5);
    for (const SignalSample& s : ds.samples) {
        int hidden = 0;
        for (const Observation& o : s.roi_obs[0])
            if (!o.observed) ++hidden;
        CHECK(hidden > 0);
    }
}

TEST_CASE("rq1 corruption: seeded assignment gives exact class counts") {
    GeneratorSpec g = tiny_spec(14);
    g.samples = 100;
    g.rois = 2;
    Dataset ds = generate(g);
    Rq1Config cfg; // 0.2 / 0.2
    apply_rq1_corruption(ds, cfg, 31);
    int missing = 0, misaligned = 0, jittered = 0;
    for (const SignalSample& s : ds.samples) {
        if (s.corruption == "missing-scattered") ++missing;
        else if (s.corruption == "frequency") ++misaligned;
        else if (s.corruption == "jitter") ++jittered;
    }
    CHECK(missing == 20);
    CHECK(misaligned == 20);
    CHECK(jittered == 60);
}

TEST_CASE("rq1 corruption rejects oversubscribed fractions") {
    Dataset ds = generate(tiny_spec(15));
    Rq1Config cfg;
    cfg.missing_fraction = 0.7;
    cfg.misaligned_fraction = 0.7;
    CHECK_THROWS_AS(apply_rq1_corruption(ds, cfg, 1), ConfigError);
}

TEST_CASE("split: 6:2:2 partition laws and determinism") {
    const SplitIndices sp = split(10, 3);
    CHECK(sp.train.size() == 6);
    CHECK(sp.val.size() == 2);
    CHECK(sp.test.size() == 2);

    std::vector<bool> seen(10, false);
    for (const auto* part : {&sp.train, &sp.val, &sp.test})
        for (int i : *part) {
            CHECK_FALSE(seen[i]); // pairwise disjoint
            seen[i] = true;
        }
    for (bool b : seen) CHECK(b); // exhaustive

    const SplitIndices sp2 = split(10, 3);
    CHECK(sp2.train == sp.train);
    CHECK(sp2.val == sp.val);
    CHECK(sp2.test == sp.test);

    CHECK_THROWS_AS(split(4, 1), ConfigError);
}

TEST_CASE("corruptions never alter ground truth") {
    const Dataset ds = generate(tiny_spec(16));
    const SignalSample& orig = ds.samples[0];
    const SignalSample c1 = corrupt_missing(orig, MissingMode::Interpolation, 3, 7);
    const SignalSample c2 = corrupt_offset(orig, 0.2);
    const SignalSample c3 = corrupt_frequency(orig, {1, 3});
    for (const SignalSample* c : {&c1, &c2, &c3})
        for (int r = 0; r < orig.rois(); ++r)
            for (const Observation& o : orig.roi_obs[r])
                CHECK(c->truth_at(r, o.t) == o.value);
}

TEST_CASE("CSV round trip preserves observations to print precision") {
    namespace fs = std::filesystem;
    const Dataset ds = generate(tiny_spec(17));
    const std::string path = (fs::temp_directory_path() / "odesig_rt.csv").string();
    write_signals_csv(path, ds.samples, "beef", 17);
    const std::vector<SignalSample> back = read_signals_csv(path);
    REQUIRE(back.size() == ds.samples.size());
    for (size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].rois() == ds.samples[i].rois());
        for (int r = 0; r < back[i].rois(); ++r) {
            REQUIRE(back[i].roi_obs[r].size() == ds.samples[i].roi_obs[r].size());
            for (size_t j = 0; j < back[i].roi_obs[r].size(); ++j) {
                CHECK(std::fabs(back[i].roi_obs[r][j].t - ds.samples[i].roi_obs[r][j].t) < 1e-9);
                CHECK(std::fabs(back[i].roi_obs[r][j].value -
                                ds.samples[i].roi_obs[r][j].value) < 1e-9);
                CHECK(back[i].roi_obs[r][j].observed == ds.samples[i].roi_obs[r][j].observed);
            }
        }
    }
    // provenance comment is the first line
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first.find("config_hash=beef") != std::string::npos);
    fs::remove(path);
}

TEST_CASE("malformed CSV rows name the line") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "odesig_bad.csv").string();
    {
        std::ofstream out(path);
        out << "sample_id,roi,timestamp,value,observed\n";
        out << "0,0,0.0,1.0,1\n";
        out << "0,0,1.0,oops,1\n";
    }
    CHECK_THROWS_WITH_AS(read_signals_csv(path), doctest::Contains(":3"), ParseError);
    fs::remove(path);
}

TEST_CASE("manifest restores truth, targets and split") {
    namespace fs = std::filesystem;
    Dataset ds = generate(tiny_spec(18));
    for (SignalSample& s : ds.samples) s = corrupt_missing(s, MissingMode::Extrapolation, 2, 9);
    const SplitIndices sp = split(static_cast<int>(ds.samples.size()) + 2, 4); // any indices
    const std::string csv = (fs::temp_directory_path() / "odesig_m.csv").string();
    const std::string man = (fs::temp_directory_path() / "odesig_m.json").string();
    write_signals_csv(csv, ds.samples, "f00d", 18);
    write_manifest_json(man, ds, &sp, "f00d");

    Dataset loaded;
    loaded.samples = read_signals_csv(csv);
    SplitIndices sp2;
    apply_manifest_json(man, loaded, &sp2);
    CHECK(sp2.train == sp.train);
    REQUIRE(loaded.samples.size() == ds.samples.size());
    for (size_t i = 0; i < loaded.samples.size(); ++i) {
        CHECK(loaded.samples[i].duration == ds.samples[i].duration);
        CHECK(loaded.samples[i].targets[0].size() == ds.samples[i].targets[0].size());
        CHECK(loaded.samples[i].truth[0].size() == ds.samples[i].truth[0].size());
        // truth values survive the JSON round trip bit-exactly
        for (size_t c = 0; c < loaded.samples[i].truth[0].size(); ++c)
            CHECK(loaded.samples[i].truth[0][c].omega == ds.samples[i].truth[0][c].omega);
    }
    fs::remove(csv);
    fs::remove(man);
}

} // TEST_SUITE
