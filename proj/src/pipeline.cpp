#include "dbp/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "dbp/errors.hpp"

namespace dbp {

// ---- surfaces ---------------------------------------------------------------

SurfaceKind parse_surface_kind(const std::string& name) {
    if (name == "sphere") return SurfaceKind::sphere;
    if (name == "torus") return SurfaceKind::torus;
    if (name == "plane") return SurfaceKind::plane;
    throw ConfigError("unknown surface kind '" + name + "' (expected sphere, torus or plane)");
}

std::string to_string(SurfaceKind kind) {
    switch (kind) {
        case SurfaceKind::sphere: return "sphere";
        case SurfaceKind::torus: return "torus";
        case SurfaceKind::plane: return "plane";
    }
    return "unknown";
}

SurfaceSample gen_surface_cloud(SurfaceKind kind, std::size_t n, std::uint64_t seed) {
    if (n < 64) throw ContractError("gen_surface_cloud: need at least 64 points, got " + std::to_string(n));
    std::mt19937_64 rng(seed);
    std::vector<Vec3> pts;
    pts.reserve(n);
    SurfaceDescriptor surface;
    switch (kind) {
        case SurfaceKind::sphere: {
            std::normal_distribution<double> gauss(0.0, 1.0);
            while (pts.size() < n) {
                const Vec3 v{gauss(rng), gauss(rng), gauss(rng)};
                const double len = norm(v);
                if (len < 1e-12) continue;
                pts.push_back(v * (1.0 / len));
            }
            surface.shape = Sphere{};
            break;
        }
        case SurfaceKind::torus: {
            // Uniform angles over-sample the inner rim; accepting with
            // probability ∝ the local ring radius makes the density area-uniform.
            std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            const double big = kTorusMajor, small = kTorusMinor;
            while (pts.size() < n) {
                const double u = angle(rng), v = angle(rng);
                const double ring = big + small * std::cos(v);
                if (unit(rng) * (big + small) > ring) continue;
                pts.push_back({ring * std::cos(u), ring * std::sin(u), small * std::sin(v)});
            }
            Torus t;
            t.major = big;
            t.minor = small;
            surface.shape = t;
            break;
        }
        case SurfaceKind::plane: {
            std::uniform_real_distribution<double> side(-1.0, 1.0);
            while (pts.size() < n) pts.push_back({side(rng), side(rng), 0.0});
            surface.shape = Plane{};
            break;
        }
    }
    return {PointCloud(std::move(pts), to_string(kind)), surface};
}

// ---- patches ----------------------------------------------------------------

std::vector<PatchPair> make_patch_pairs(const PointCloud& dense, const SurfaceDescriptor& surface, std::size_t n,
                                        std::size_t factor, std::size_t count, std::uint64_t seed,
                                        InputSampling sampling) {
    const std::size_t target_size = factor * n;
    if (n < 2 || factor < 1 || count < 1) throw ContractError("make_patch_pairs: sizes must be positive");
    if (dense.size() < 4 * target_size)
        throw ContractError("make_patch_pairs: dense cloud of " + std::to_string(dense.size()) +
                            " points is smaller than 4αN=" + std::to_string(4 * target_size));
    if (count > dense.size()) throw ContractError("make_patch_pairs: more patches than dense points");
    std::mt19937_64 rng(seed);
    const auto seeds = farthest_point_sample(dense, count, static_cast<std::size_t>(rng() % dense.size()));
    const PointCloud seed_points = select(dense, seeds);
    const auto pools = knn(seed_points, dense, 2 * target_size);

    std::vector<PatchPair> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const PointCloud pool = select(dense, std::span(pools).subspan(s * 2 * target_size, 2 * target_size));
        const PointCloud target = select(pool, farthest_point_sample(pool, target_size, 0));
        const PointCloud input = sampling == InputSampling::random
                                     ? random_subsample(target, n, rng())
                                     : select(target, farthest_point_sample(target, n, rng() % target_size));
        auto normalized = normalize_patch(target);
        const Frame& frame = normalized.frame;
        out.push_back({frame.apply(input), std::move(normalized.points), frame,
                       surface.transformed(frame.centroid, frame.scale)});
    }
    return out;
}

PointCloud replicate_jitter(const PointCloud& input, std::size_t factor, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<Vec3> pts;
    pts.reserve(input.size() * factor);
    for (std::size_t k = 0; k < factor; ++k)
        for (const auto& p : input.points()) pts.push_back({p[0] + noise(rng), p[1] + noise(rng), p[2] + noise(rng)});
    return PointCloud(std::move(pts), input.source());
}

// ---- configuration ----------------------------------------------------------

void TrainConfig::validate() const {
    model.validate();
    if (model.factor < 2) throw ConfigError("alpha must be at least 2");
    if (batch == 0 || patches == 0 || val_every == 0) throw ConfigError("batch, patches and val_every must be positive");
    if (patches < 5) throw ConfigError("need at least 5 patches to hold out a validation fifth");
    if (surfaces.empty()) throw ConfigError("no surface kinds configured");
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (loss.uniform < 0) throw ConfigError("lambda must be non-negative");
    if (dense_count() < 4 * model.factor * model.points)
        throw ConfigError("dense_points must be at least 4·alpha·N");
}

std::size_t TrainConfig::dense_count() const {
    return dense_points ? dense_points : std::max<std::size_t>(4096, 4 * model.factor * model.points);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
        if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
        out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(out);
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out = 0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    }
    if (pos != v.size() || !std::isfinite(out)) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    return out;
}

bool parse_flag(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace

void apply_config_entry(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "N") c.model.points = parse_count(key, value);
    else if (key == "alpha") c.model.factor = parse_count(key, value);
    else if (key == "C") c.model.channels = parse_count(key, value);
    else if (key == "k_edge") c.model.edge_k = parse_count(key, value);
    else if (key == "bp_iterations") c.model.bp_iterations = parse_count(key, value);
    else if (key == "feature_bp") c.model.feature_bp = parse_flag(key, value);
    else if (key == "coord_bp") c.model.coord_bp = parse_flag(key, value);
    else if (key == "pos_embed") c.model.pos_embed = parse_flag(key, value);
    else if (key == "lambda") c.loss.uniform = parse_real(key, value);
    else if (key == "uniform_k") c.loss.uniform_k = parse_count(key, value);
    else if (key == "uniform_radius") c.loss.uniform_radius = parse_real(key, value);
    else if (key == "lr") c.learning_rate = parse_real(key, value);
    else if (key == "steps") c.steps = parse_count(key, value);
    else if (key == "batch") c.batch = parse_count(key, value);
    else if (key == "seed") c.seed = parse_count(key, value);
    else if (key == "patches") c.patches = parse_count(key, value);
    else if (key == "dense_points") c.dense_points = parse_count(key, value);
    else if (key == "val_every") c.val_every = parse_count(key, value);
    else if (key == "checkpoint") c.checkpoint_path = value;
    else if (key == "log") c.log_path = value;
    else if (key == "input_sampling") {
        if (value == "random") c.input_sampling = InputSampling::random;
        else if (value == "fps") c.input_sampling = InputSampling::farthest;
        else throw ConfigError("'input_sampling' expects random or fps, got '" + value + "'");
    } else if (key == "surfaces") {
        c.surfaces.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) c.surfaces.push_back(parse_surface_kind(trim(item)));
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

TrainConfig parse_train_config(std::istream& in, TrainConfig base) {
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        try {
            apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    return parse_train_config(in, std::move(base));
}

Dataset build_dataset(const TrainConfig& config) {
    config.validate();
    Dataset data;
    const std::size_t kinds = config.surfaces.size();
    std::size_t emitted = 0;
    for (std::size_t s = 0; s < kinds; ++s) {
        const std::size_t count = config.patches / kinds + (s < config.patches % kinds ? 1 : 0);
        if (count == 0) continue;
        const std::uint64_t base_seed = config.seed * 1000003ULL + 7919ULL * (s + 1);
        const auto sample = gen_surface_cloud(config.surfaces[s], config.dense_count(), base_seed);
        auto pairs = make_patch_pairs(sample.cloud, sample.surface, config.model.points, config.model.factor, count,
                                      base_seed + 1, config.input_sampling);
        for (auto& p : pairs) {
            (emitted % 5 == 4 ? data.validation : data.train).push_back(std::move(p));
            ++emitted;
        }
    }
    return data;
}

// ---- checkpoints ------------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "dbpnet-checkpoint";

void write_le(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    out.write(bytes, 8);
}

double read_le(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("checkpoint: truncated tensor payload");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

std::string expect_line(std::istream& in, const std::string& keyword) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("checkpoint: missing '" + keyword + "' line");
    if (line.rfind(keyword + " ", 0) != 0 && line != keyword)
        throw ParseError("checkpoint: expected '" + keyword + "', got '" + line.substr(0, 40) + "'");
    return line.size() > keyword.size() ? line.substr(keyword.size() + 1) : std::string{};
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
    const auto& m = ckpt.params.config;
    out << kCheckpointMagic << ' ' << Checkpoint::kFormatVersion << '\n';
    out << "config N=" << m.points << " alpha=" << m.factor << " C=" << m.channels << " k_edge=" << m.edge_k
        << " bp_iterations=" << m.bp_iterations << " feature_bp=" << m.feature_bp << " coord_bp=" << m.coord_bp
        << " pos_embed=" << m.pos_embed << '\n';
    out << "step " << ckpt.step << '\n';
    out << "rng " << ckpt.rng_state << '\n';
    out << "tensors " << ckpt.params.tensors.size() << '\n';
    for (const auto& [name, t] : ckpt.params.tensors) {
        out << name;
        for (auto d : t.shape) out << ' ' << d;
        out << '\n';
        for (double v : t.data) write_le(out, v);
        out << '\n';
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    Checkpoint ckpt;
    const std::string version = expect_line(in, kCheckpointMagic);
    if (version != std::to_string(Checkpoint::kFormatVersion))
        throw ParseError("checkpoint: unsupported format version '" + version + "'");
    {
        std::stringstream ss(expect_line(in, "config"));
        std::string kv;
        TrainConfig tmp;
        while (ss >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ParseError("checkpoint: malformed config entry '" + kv + "'");
            try {
                apply_config_entry(tmp, kv.substr(0, eq), kv.substr(eq + 1));
            } catch (const ConfigError& e) {
                throw ParseError(std::string("checkpoint: ") + e.what());
            }
        }
        ckpt.params.config = tmp.model;
    }
    try {
        ckpt.step = std::stoull(expect_line(in, "step"));
    } catch (const std::invalid_argument&) {
        throw ParseError("checkpoint: malformed step line");
    }
    ckpt.rng_state = expect_line(in, "rng");
    std::size_t count = 0;
    try {
        count = std::stoull(expect_line(in, "tensors"));
    } catch (const std::invalid_argument&) {
        throw ParseError("checkpoint: malformed tensor count");
    }
    for (std::size_t t = 0; t < count; ++t) {
        std::string header;
        if (!std::getline(in, header)) throw ParseError("checkpoint: missing tensor header");
        std::stringstream ss(header);
        std::string name;
        ss >> name;
        Shape shape;
        std::size_t d = 0;
        while (ss >> d) shape.push_back(d);
        if (name.empty() || shape.empty()) throw ParseError("checkpoint: malformed tensor header '" + header + "'");
        std::vector<double> data(element_count(shape));
        for (auto& v : data) v = read_le(in);
        if (in.get() != '\n') throw ParseError("checkpoint: tensor " + name + " payload not terminated");
        ckpt.params.tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
    }
    ckpt.params.config.validate();
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    write_checkpoint(ckpt, out);
    if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    return read_checkpoint(in);
}

// ---- training ---------------------------------------------------------------

std::string format_log(const std::vector<LogRow>& rows) {
    std::string out = "step,loss,val_cd\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g\n", static_cast<unsigned long long>(r.step), r.loss, r.val_cd);
        out += buf;
    }
    return out;
}

double mean_patch_cd(const ModelParams& params, const std::vector<PatchPair>& patches) {
    if (patches.empty()) throw ContractError("mean_patch_cd: no patches");
    std::vector<double> cds(patches.size());
    const auto count = static_cast<std::ptrdiff_t>(patches.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) cds[i] = chamfer(dbpnet_infer(params, patches[i].input), patches[i].target);
    double total = 0.0;
    for (double c : cds) total += c;
    return total / static_cast<double>(cds.size());
}

namespace {

struct Adam {
    explicit Adam(double learning_rate) : lr(learning_rate) {}

    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t t = 0;
    std::map<std::string, std::vector<double>> m, v;

    void step(ModelParams& params, const std::map<std::string, std::vector<double>>& grads) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (auto& [name, tensor] : params.tensors) {
            const auto& g = grads.at(name);
            auto& mm = m[name];
            auto& vv = v[name];
            if (mm.empty()) {
                mm.assign(g.size(), 0.0);
                vv.assign(g.size(), 0.0);
            }
            for (std::size_t i = 0; i < g.size(); ++i) {
                mm[i] = beta1 * mm[i] + (1.0 - beta1) * g[i];
                vv[i] = beta2 * vv[i] + (1.0 - beta2) * g[i] * g[i];
                tensor.data[i] -= lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
            }
        }
    }
};

struct BatchResult {
    double loss = 0.0;
    std::map<std::string, std::vector<double>> grads;
};

BatchResult batch_gradient(const ModelParams& params, const std::vector<PatchPair>& patches,
                           const std::vector<std::size_t>& batch, const LossWeights& weights) {
    struct Slot {
        double loss = 0.0;
        std::map<std::string, std::vector<double>> grads;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(batch.size());
    const auto count = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < count; ++b) {
        try {
            const auto& pair = patches[batch[b]];
            Graph graph;
            BoundParams bound(graph, params);
            Var input = graph.constant(pair.input.to_tensor());
            Var target = graph.constant(pair.target.to_tensor());
            Var loss = total_loss(dbpnet_forward(input, bound).output, target, weights);
            graph.backward(loss);
            slots[b].loss = loss.value().data[0];
            for (const auto& [name, var] : bound.vars()) slots[b].grads[name] = var.grad();
        } catch (...) {
            slots[b].error = std::current_exception();
        }
    }
    BatchResult out;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& slot : slots) {  // fixed patch-index order
        if (slot.error) std::rethrow_exception(slot.error);
        out.loss += slot.loss * inv;
        for (auto& [name, g] : slot.grads) {
            auto& acc = out.grads[name];
            if (acc.empty()) acc.assign(g.size(), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * inv;
        }
    }
    return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data) {
    config.validate();
    if (data.train.empty() || data.validation.empty()) throw ContractError("train: empty training or validation set");
    TrainResult result;
    ModelParams params = ModelParams::init(config.model, config.seed);
    std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
    std::uniform_int_distribution<std::size_t> pick(0, data.train.size() - 1);
    Adam adam(config.learning_rate);

    auto draw_batch = [&] {
        std::vector<std::size_t> batch(config.batch);
        for (auto& b : batch) b = pick(rng);
        return batch;
    };
    auto diverged = [](std::uint64_t step, const std::string& why) {
        return NumericError("training diverged at step " + std::to_string(step) + ": " + why);
    };

    for (std::uint64_t step = 0; step <= config.steps; ++step) {
        BatchResult br;
        const auto batch = draw_batch();
        try {
            br = batch_gradient(params, data.train, batch, config.loss);
        } catch (const Error& e) {
            throw diverged(step, e.what());
        }
        if (!std::isfinite(br.loss)) throw diverged(step, "loss is not finite");
        if (step % config.val_every == 0 || step == config.steps) {
            double val = 0.0;
            try {
                val = mean_patch_cd(params, data.validation);
            } catch (const Error& e) {
                throw diverged(step, e.what());
            }
            result.log.push_back({step, br.loss, val});
        }
        if (step == config.steps) break;
        adam.step(params, br.grads);
    }

    std::ostringstream rng_text;
    rng_text << rng;
    result.checkpoint = {std::move(params), config.steps, rng_text.str()};
    if (!config.checkpoint_path.empty()) save_checkpoint(result.checkpoint, config.checkpoint_path);
    if (!config.log_path.empty()) {
        std::ofstream out(config.log_path, std::ios::binary);
        if (!out) throw IoError("cannot write log " + config.log_path);
        out << format_log(result.log);
    }
    return result;
}

TrainResult train(const TrainConfig& config) { return train(config, build_dataset(config)); }

// ---- inference --------------------------------------------------------------

PatchPlan plan_patches(const PointCloud& cloud, std::size_t n) {
    if (cloud.size() < n)
        throw ContractError("cloud of " + std::to_string(cloud.size()) + " points is smaller than the patch size " +
                            std::to_string(n));
    const std::size_t seeds_wanted = std::max<std::size_t>(1, (2 * cloud.size() + n - 1) / n);
    const auto seeds = farthest_point_sample(cloud, std::min(seeds_wanted, cloud.size()), 0);
    PatchPlan plan;
    std::set<std::vector<std::size_t>> seen;
    std::vector<char> covered(cloud.size(), 0);
    auto add_patch = [&](std::vector<std::size_t> members) {
        for (auto i : members) covered[i] = 1;
        auto key = members;
        std::sort(key.begin(), key.end());
        if (seen.insert(std::move(key)).second) plan.patches.push_back(std::move(members));
    };
    const auto neighborhoods = knn(select(cloud, seeds), cloud, n);
    for (std::size_t s = 0; s < seeds.size(); ++s)
        add_patch({neighborhoods.begin() + s * n, neighborhoods.begin() + (s + 1) * n});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (covered[i]) continue;
        const PointCloud query({cloud[i]});
        add_patch(knn(query, cloud, n));
    }
    return plan;
}

std::size_t target_count(double factor, std::size_t n) {
    const double exact = factor * static_cast<double>(n);
    const double rounded = std::round(exact);
    if (std::abs(exact - rounded) <= 1e-9 * std::max(1.0, exact)) return static_cast<std::size_t>(rounded);
    return static_cast<std::size_t>(std::ceil(exact));
}

PointCloud upsample_cloud(const PointCloud& cloud, double factor, const ModelParams& params) {
    const auto& cfg = params.config;
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ContractError("upsample factor must be positive");
    if (factor > static_cast<double>(cfg.factor))
        throw ContractError("factor " + std::to_string(factor) + " exceeds the trained factor " +
                            std::to_string(cfg.factor) + "; retrain with a larger alpha");
    const PatchPlan plan = plan_patches(cloud, cfg.points);
    std::vector<std::vector<Vec3>> outputs(plan.patches.size());
    const auto count = static_cast<std::ptrdiff_t>(plan.patches.size());
    std::vector<std::string> errors(plan.patches.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t p = 0; p < count; ++p) {
        try {
            const auto normalized = normalize_patch(select(cloud, plan.patches[p]));
            outputs[p] = normalized.frame.invert(dbpnet_infer(params, normalized.points)).points();
        } catch (const std::exception& e) {
            errors[p] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw ContractError(e);
    std::vector<Vec3> merged;
    for (auto& o : outputs) merged.insert(merged.end(), o.begin(), o.end());
    const PointCloud all(std::move(merged), cloud.source());
    const std::size_t wanted = target_count(factor, cloud.size());
    if (wanted > all.size()) throw ContractError("merged patches hold fewer points than requested");
    return select(all, farthest_point_sample(all, wanted, 0));
}

MetricsReport evaluate(const PointCloud& prediction, const PointCloud& target, const SurfaceDescriptor& surface) {
    const Frame frame = normalize_patch(target).frame;
    const PointCloud q = frame.apply(prediction);
    const PointCloud t = frame.apply(target);
    MetricsReport r;
    r.cd = chamfer(q, t);
    r.hd = hausdorff(q, t);
    r.p2f = p2f_mean(q, surface.transformed(frame.centroid, frame.scale));
    r.uniformity = uniformity(q);
    return r;
}

}  // namespace dbp
