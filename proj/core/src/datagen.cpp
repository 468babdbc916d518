#include "odesig/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "odesig/errors.hpp"
#include "odesig/rng.hpp"

namespace odesig {

using nlohmann::json;

Rational parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    Rational r;
    try {
        if (slash == std::string::npos) {
            const double v = std::stod(text);
            if (v <= 0.0) throw ConfigError("period must be positive: " + text);
            // accept plain decimals like "0.5" with a power-of-ten denominator
            long long den = 1;
            double scaled = v;
            while (std::fabs(scaled - std::llround(scaled)) > 1e-9 && den < 1000000) {
                scaled *= 10.0;
                den *= 10;
            }
            r.num = std::llround(scaled);
            r.den = den;
        } else {
            r.num = std::stoll(text.substr(0, slash));
            r.den = std::stoll(text.substr(slash + 1));
        }
    } catch (const std::logic_error&) {
        throw ConfigError("cannot parse rational period: " + text);
    }
    if (r.num <= 0 || r.den <= 0) throw ConfigError("period must be positive: " + text);
    return r;
}

double SignalSample::truth_at(int roi, double t) const {
    double v = 0.0;
    for (const SineComponent& c : truth[roi]) v += c.amplitude * std::sin(c.omega * t + c.phase);
    return v;
}

void SignalSample::validate() const {
    for (int i = 0; i < rois(); ++i) {
        int observed = 0;
        for (size_t j = 0; j < roi_obs[i].size(); ++j) {
            if (j > 0 && roi_obs[i][j].t <= roi_obs[i][j - 1].t)
                throw ContractError("sample " + std::to_string(id) + " ROI " + std::to_string(i) +
                                    ": timestamps not strictly increasing");
            if (roi_obs[i][j].observed) ++observed;
        }
        if (observed == 0)
            throw ContractError("sample " + std::to_string(id) + " ROI " + std::to_string(i) +
                                ": no observed points");
    }
}

std::vector<double> regular_grid(double duration) {
    std::vector<double> g;
    for (int k = 0; k <= static_cast<int>(std::floor(duration + 1e-9)); ++k)
        g.push_back(static_cast<double>(k));
    return g;
}

Dataset generate(const GeneratorSpec& spec) {
    if (spec.rois < 2 || spec.samples < 1 || spec.duration < 3.0 || spec.min_components < 1 ||
        spec.max_components < spec.min_components || spec.shared_pool_size < 1)
        throw ConfigError("generate: invalid generator spec");

    Dataset ds;
    ds.spec = spec;

    // Atlas: pool cluster centers, each ROI scattered around the center of
    // the pool component it is anchored to.
    Rng atlas_rng(Rng::derive(spec.seed, 0xa71a5ull));
    std::vector<std::array<double, 3>> centers(spec.shared_pool_size);
    for (auto& c : centers)
        c = {atlas_rng.uniform(0.0, spec.coord_extent), atlas_rng.uniform(0.0, spec.coord_extent),
             atlas_rng.uniform(0.0, spec.coord_extent)};
    for (int i = 0; i < spec.rois; ++i) {
        const auto& c = centers[i % spec.shared_pool_size];
        RoiAtlas::Entry e;
        e.label = "roi" + std::to_string(i);
        e.x = c[0] + atlas_rng.uniform(-spec.cluster_spread, spec.cluster_spread);
        e.y = c[1] + atlas_rng.uniform(-spec.cluster_spread, spec.cluster_spread);
        e.z = c[2] + atlas_rng.uniform(-spec.cluster_spread, spec.cluster_spread);
        ds.atlas.entries.push_back(std::move(e));
    }

    const std::vector<double> grid = regular_grid(spec.duration);
    for (int s = 0; s < spec.samples; ++s) {
        Rng rng(Rng::derive(spec.seed, 0x5a3d7e0ull + static_cast<uint64_t>(s)));
        std::vector<SineComponent> pool(spec.shared_pool_size);
        for (auto& c : pool) {
            c.amplitude = rng.uniform(spec.amp_lo, spec.amp_hi);
            c.omega = rng.uniform(spec.omega_lo, spec.omega_hi);
            c.phase = rng.uniform(0.0, 6.283185307179586);
        }
        SignalSample sample;
        sample.id = s;
        sample.duration = spec.duration;
        sample.roi_obs.resize(spec.rois);
        sample.truth.resize(spec.rois);
        sample.targets.resize(spec.rois);
        for (int i = 0; i < spec.rois; ++i) {
            const int k = rng.uniform_int(spec.min_components, spec.max_components);
            for (int c = 0; c < k; ++c) {
                if (rng.uniform() < spec.shared_fraction) {
                    sample.truth[i].push_back(pool[i % spec.shared_pool_size]);
                } else {
                    SineComponent priv;
                    priv.amplitude = rng.uniform(spec.amp_lo, spec.amp_hi);
                    priv.omega = rng.uniform(spec.omega_lo, spec.omega_hi);
                    priv.phase = rng.uniform(0.0, 6.283185307179586);
                    sample.truth[i].push_back(priv);
                }
            }
            sample.roi_obs[i].reserve(grid.size());
            for (double t : grid)
                sample.roi_obs[i].push_back({t, sample.truth_at(i, t), true});
        }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

SignalSample corrupt_missing(const SignalSample& s, MissingMode mode, int steps, uint64_t seed) {
    if (steps < 0) throw ConfigError("corrupt_missing: negative step count");
    SignalSample out = s;
    out.corruption = mode == MissingMode::Interpolation ? "missing-interp" : "missing-extrap";
    if (steps == 0) return out;

    const int T = static_cast<int>(s.roi_obs.empty() ? 0 : s.roi_obs[0].size());
    int start = 0;
    if (mode == MissingMode::Interpolation) {
        // contiguous block strictly inside: never the first or last step
        if (steps > T - 2)
            throw ConfigError("corrupt_missing: " + std::to_string(steps) +
                              " steps do not fit strictly inside " + std::to_string(T));
        Rng rng(Rng::derive(seed, 0xb10cull + static_cast<uint64_t>(s.id)));
        start = rng.uniform_int(1, T - steps - 1);
    } else {
        if (steps >= T)
            throw ConfigError("corrupt_missing: cannot remove " + std::to_string(steps) +
                              " of " + std::to_string(T) + " steps");
        start = T - steps;
    }
    for (int i = 0; i < out.rois(); ++i) {
        for (int j = start; j < start + steps; ++j) {
            Observation& o = out.roi_obs[i][j];
            out.targets[i].push_back({o.t, o.value, true});
            o.value = 0.0;
            o.observed = false;
        }
    }
    return out;
}

SignalSample corrupt_offset(const SignalSample& s, double offset) {
    if (offset < 0.0) throw ConfigError("corrupt_offset: offset must be >= 0");
    if (!s.has_truth()) throw ContractError("corrupt_offset: sample has no generator handle");
    SignalSample out = s;
    out.corruption = "offset";
    const std::vector<double> grid = regular_grid(s.duration);
    // shift the current raster, so offsets compose additively on ground truth
    for (int i = 0; i < out.rois(); ++i) {
        for (Observation& o : out.roi_obs[i]) {
            o.t += offset;
            o.value = s.truth_at(i, o.t);
            o.observed = true;
        }
        out.targets[i].clear();
        for (double t : grid) out.targets[i].push_back({t, s.truth_at(i, t), true});
    }
    return out;
}

SignalSample corrupt_frequency(const SignalSample& s, Rational period) {
    if (period.num <= 0 || period.den <= 0)
        throw ConfigError("corrupt_frequency: period must be positive");
    if (!s.has_truth()) throw ContractError("corrupt_frequency: sample has no generator handle");
    SignalSample out = s;
    out.corruption = "frequency";
    const std::vector<double> grid = regular_grid(s.duration);
    for (int i = 0; i < out.rois(); ++i) {
        out.roi_obs[i].clear();
        for (long long k = 0;; ++k) {
            const double t = static_cast<double>(k * period.num) / static_cast<double>(period.den);
            if (t > s.duration + 1e-9) break;
            out.roi_obs[i].push_back({t, s.truth_at(i, t), true});
        }
        out.targets[i].clear();
        for (double t : grid) out.targets[i].push_back({t, s.truth_at(i, t), true});
    }
    return out;
}

void apply_rq1_corruption(Dataset& ds, const Rq1Config& cfg, uint64_t seed) {
    if (cfg.missing_fraction < 0.0 || cfg.misaligned_fraction < 0.0 ||
        cfg.missing_fraction > 1.0 || cfg.misaligned_fraction > 1.0)
        throw ConfigError("apply_rq1_corruption: fractions must lie in [0,1]");
    if (cfg.missing_fraction + cfg.misaligned_fraction > 1.0 + 1e-12)
        throw ConfigError("apply_rq1_corruption: fractions sum above 1");

    const int n = static_cast<int>(ds.samples.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::derive(seed, 0x901ull));
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(0, i)]);

    const int n_missing = static_cast<int>(std::lround(cfg.missing_fraction * n));
    const int n_misaligned = static_cast<int>(std::lround(cfg.misaligned_fraction * n));
    const Rational periods[3] = {{2, 3}, {1, 2}, {1, 3}};

    for (int pos = 0; pos < n; ++pos) {
        SignalSample& s = ds.samples[order[pos]];
        if (pos < n_missing) {
            // hide a seeded set of interior time steps
            const int T = static_cast<int>(s.roi_obs[0].size());
            const int hide = std::max(1, static_cast<int>(std::lround(cfg.missing_point_rate *
                                                                      (T - 2))));
            std::vector<int> idx(T - 2);
            std::iota(idx.begin(), idx.end(), 1);
            for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
                std::swap(idx[i], idx[rng.uniform_int(0, i)]);
            idx.resize(hide);
            std::sort(idx.begin(), idx.end());
            for (int r = 0; r < s.rois(); ++r)
                for (int j : idx) {
                    Observation& o = s.roi_obs[r][j];
                    s.targets[r].push_back({o.t, o.value, true});
                    o.value = 0.0;
                    o.observed = false;
                }
            s.corruption = "missing-scattered";
        } else if (pos < n_missing + n_misaligned) {
            s = corrupt_frequency(s, periods[rng.uniform_int(0, 2)]);
        } else if (cfg.jitter > 0.0) {
            if (!s.has_truth()) continue;
            for (int r = 0; r < s.rois(); ++r) {
                std::vector<double> grid_tgt = regular_grid(s.duration);
                for (Observation& o : s.roi_obs[r]) {
                    double t = o.t + rng.uniform(-cfg.jitter, cfg.jitter);
                    if (t < 0.0) t = 0.0;
                    o.t = t;
                    o.value = s.truth_at(r, t);
                }
                s.targets[r].clear();
                for (double t : grid_tgt) s.targets[r].push_back({t, s.truth_at(r, t), true});
            }
            s.corruption = "jitter";
        }
    }
}

SplitIndices split(int n, uint64_t seed) {
    if (n < 5) throw ConfigError("split: need at least 5 samples, got " + std::to_string(n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::derive(seed, 0x59117ull));
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(0, i)]);
    const int n_train = (n * 6) / 10;
    const int n_val = (n * 2) / 10;
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + n_train);
    out.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    out.test.assign(order.begin() + n_train + n_val, order.end());
    return out;
}

// ---------------------------------------------------------------------------
// files

namespace {

std::string fmt(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

json component_json(const SineComponent& c) {
    return json{{"amplitude", c.amplitude}, {"omega", c.omega}, {"phase", c.phase}};
}

SineComponent component_from(const json& j) {
    return SineComponent{j.at("amplitude").get<double>(), j.at("omega").get<double>(),
                         j.at("phase").get<double>()};
}

} // namespace

void write_signals_csv(const std::string& path, const std::vector<SignalSample>& samples,
                       const std::string& config_hash, uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write signals file: " + path);
    out << "# odesig-signals config_hash=" << config_hash << " seed=" << seed << "\n";
    out << "sample_id,roi,timestamp,value,observed\n";
    for (const SignalSample& s : samples)
        for (int r = 0; r < s.rois(); ++r)
            for (const Observation& o : s.roi_obs[r])
                out << s.id << ',' << r << ',' << fmt(o.t, 9) << ',' << fmt(o.value, 9) << ','
                    << (o.observed ? 1 : 0) << "\n";
}

std::vector<SignalSample> read_signals_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open signals file: " + path);
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    std::vector<SignalSample> samples;
    auto sample_of = [&](int id) -> SignalSample& {
        for (SignalSample& s : samples)
            if (s.id == id) return s;
        samples.emplace_back();
        samples.back().id = id;
        return samples.back();
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "sample_id,roi,timestamp,value,observed")
                throw ParseError(path + ":" + std::to_string(lineno) + ": unexpected header '" +
                                 line + "'");
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 5 columns, got " +
                             std::to_string(fields.size()));
        try {
            const int id = std::stoi(fields[0]);
            const int roi = std::stoi(fields[1]);
            const double t = std::stod(fields[2]);
            const double v = std::stod(fields[3]);
            const int obs = std::stoi(fields[4]);
            SignalSample& s = sample_of(id);
            if (roi >= s.rois()) s.roi_obs.resize(roi + 1);
            s.roi_obs[roi].push_back({t, v, obs != 0});
            s.duration = std::max(s.duration, t);
        } catch (const std::logic_error&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed row '" + line +
                             "'");
        }
    }
    if (!header_seen) throw ParseError(path + ": missing header row");
    for (SignalSample& s : samples) {
        s.targets.resize(s.rois());
        s.validate();
    }
    return samples;
}

void write_manifest_json(const std::string& path, const Dataset& ds, const SplitIndices* split,
                         const std::string& config_hash) {
    json j;
    j["provenance"] = {{"config_hash", config_hash}, {"seed", ds.spec.seed}};
    j["generator"] = {{"samples", ds.spec.samples},
                      {"rois", ds.spec.rois},
                      {"duration", ds.spec.duration},
                      {"min_components", ds.spec.min_components},
                      {"max_components", ds.spec.max_components},
                      {"amp_lo", ds.spec.amp_lo},
                      {"amp_hi", ds.spec.amp_hi},
                      {"omega_lo", ds.spec.omega_lo},
                      {"omega_hi", ds.spec.omega_hi},
                      {"shared_pool_size", ds.spec.shared_pool_size},
                      {"shared_fraction", ds.spec.shared_fraction},
                      {"coord_extent", ds.spec.coord_extent},
                      {"cluster_spread", ds.spec.cluster_spread},
                      {"seed", ds.spec.seed}};
    json samples = json::array();
    for (const SignalSample& s : ds.samples) {
        json sj;
        sj["id"] = s.id;
        sj["duration"] = s.duration;
        sj["corruption"] = s.corruption;
        json truth = json::array();
        for (const auto& roi : s.truth) {
            json rj = json::array();
            for (const auto& c : roi) rj.push_back(component_json(c));
            truth.push_back(std::move(rj));
        }
        sj["truth"] = std::move(truth);
        json targets = json::array();
        for (const auto& roi : s.targets) {
            json rj = json::array();
            for (const auto& o : roi) rj.push_back(json{{"t", o.t}, {"value", o.value}});
            targets.push_back(std::move(rj));
        }
        sj["targets"] = std::move(targets);
        samples.push_back(std::move(sj));
    }
    j["samples"] = std::move(samples);
    if (split) {
        j["split"] = {{"train", split->train}, {"val", split->val}, {"test", split->test}};
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

void apply_manifest_json(const std::string& path, Dataset& ds, SplitIndices* split_out) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest " + path + ": " + e.what());
    }
    const json& gen = j.at("generator");
    ds.spec.samples = gen.at("samples").get<int>();
    ds.spec.rois = gen.at("rois").get<int>();
    ds.spec.duration = gen.at("duration").get<double>();
    ds.spec.seed = gen.at("seed").get<uint64_t>();
    for (const json& sj : j.at("samples")) {
        const int id = sj.at("id").get<int>();
        for (SignalSample& s : ds.samples) {
            if (s.id != id) continue;
            s.duration = sj.at("duration").get<double>();
            s.corruption = sj.at("corruption").get<std::string>();
            s.truth.clear();
            for (const json& rj : sj.at("truth")) {
                std::vector<SineComponent> roi;
                for (const json& cj : rj) roi.push_back(component_from(cj));
                s.truth.push_back(std::move(roi));
            }
            s.targets.assign(s.rois(), {});
            const json& tg = sj.at("targets");
            for (size_t r = 0; r < tg.size() && r < s.targets.size(); ++r)
                for (const json& oj : tg[r])
                    s.targets[r].push_back(
                        {oj.at("t").get<double>(), oj.at("value").get<double>(), true});
        }
    }
    if (split_out && j.contains("split")) {
        split_out->train = j["split"].at("train").get<std::vector<int>>();
        split_out->val = j["split"].at("val").get<std::vector<int>>();
        split_out->test = j["split"].at("test").get<std::vector<int>>();
    }
}

} // namespace odesig
