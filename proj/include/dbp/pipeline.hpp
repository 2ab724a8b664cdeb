#pragma once

// Synthetic data, patch pairing, training, checkpoints, full-cloud
// inference and evaluation.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "dbp/geometry.hpp"
#include "dbp/losses.hpp"
#include "dbp/network.hpp"

namespace dbp {

// ---- synthetic surfaces -----------------------------------------------------

enum class SurfaceKind { sphere, torus, plane };

SurfaceKind parse_surface_kind(const std::string& name);
std::string to_string(SurfaceKind kind);

struct SurfaceSample {
    PointCloud cloud;
    SurfaceDescriptor surface;
};

inline constexpr double kTorusMajor = 1.0;
inline constexpr double kTorusMinor = 0.3;

/// Area-uniform samples on the unit sphere, the (1, 0.3) torus, or the
/// square [-1, 1]² at z = 0. Requires n ≥ 64.
SurfaceSample gen_surface_cloud(SurfaceKind kind, std::size_t n, std::uint64_t seed);

// ---- patches ----------------------------------------------------------------

enum class InputSampling { random, farthest };

struct PatchPair {
    PointCloud input;           // N points, normalized
    PointCloud target;          // αN points, normalized; input ⊂ target
    Frame frame;                // shared normalization frame
    SurfaceDescriptor surface;  // in the normalized frame
};

/// FPS seeds over `dense`; per seed the 2αN nearest points are thinned by
/// FPS to the αN-point target and the input is drawn from the target.
/// Requires |dense| ≥ 4αN.
std::vector<PatchPair> make_patch_pairs(const PointCloud& dense, const SurfaceDescriptor& surface, std::size_t n,
                                        std::size_t factor, std::size_t count, std::uint64_t seed,
                                        InputSampling sampling = InputSampling::random);

/// Stage-free baseline: every input point repeated α times plus N(0, σ²) jitter.
PointCloud replicate_jitter(const PointCloud& input, std::size_t factor, double sigma, std::uint64_t seed);

// ---- training ---------------------------------------------------------------

struct TrainConfig {
    ModelConfig model;
    LossWeights loss;
    double learning_rate = 1e-3;
    std::size_t steps = 2000;
    std::size_t batch = 4;
    std::uint64_t seed = 1;
    std::vector<SurfaceKind> surfaces{SurfaceKind::sphere, SurfaceKind::torus};
    std::size_t patches = 200;
    std::size_t dense_points = 0;  // 0: max(4096, 4αN)
    std::size_t val_every = 100;
    InputSampling input_sampling = InputSampling::random;
    std::string checkpoint_path;
    std::string log_path;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
    std::size_t dense_count() const;
};

/// Parses flat `key = value` lines; `#` starts a comment. Unknown keys and
/// malformed values throw ConfigError naming the line.
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});
TrainConfig load_train_config(const std::string& path, TrainConfig base = {});
/// Applies one `key=value` override.
void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value);

struct Dataset {
    std::vector<PatchPair> train;
    std::vector<PatchPair> validation;  // every fifth patch, never trained on
};

Dataset build_dataset(const TrainConfig& config);

struct Checkpoint {
    static constexpr int kFormatVersion = 1;
    ModelParams params;
    std::uint64_t step = 0;
    std::string rng_state;  // textual std::mt19937_64 state
};

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct LogRow {
    std::uint64_t step = 0;
    double loss = 0.0;
    double val_cd = 0.0;
};

std::string format_log(const std::vector<LogRow>& rows);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<LogRow> log;
};

/// Adam-driven minimization of chamfer + λ·uniform over random patch
/// batches. Writes the checkpoint and the CSV log when their paths are set.
/// Throws NumericError naming the step when the loss stops being finite.
TrainResult train(const TrainConfig& config, const Dataset& data);
TrainResult train(const TrainConfig& config);

/// Mean chamfer distance of the model on `patches`.
double mean_patch_cd(const ModelParams& params, const std::vector<PatchPair>& patches);

// ---- inference and evaluation -----------------------------------------------

/// Overlapping N-point patches covering every point of a cloud.
struct PatchPlan {
    std::vector<std::vector<std::size_t>> patches;
};

/// ceil(2|P|/N) FPS seeds with their N nearest points, then extra seeds at
/// uncovered points until every point belongs to a patch. Duplicate patches
/// are dropped.
PatchPlan plan_patches(const PointCloud& cloud, std::size_t n);

/// ceil(factor·n), robust to representation error in `factor`.
std::size_t target_count(double factor, std::size_t n);

/// Arbitrary-scale upsampling of a full cloud with a model trained at α:
/// patch, normalize, forward, de-normalize, merge, and FPS down to
/// ceil(factor·|P|). Throws ContractError when factor > α.
PointCloud upsample_cloud(const PointCloud& cloud, double factor, const ModelParams& params);

/// All four metrics in the target's normalized frame.
MetricsReport evaluate(const PointCloud& prediction, const PointCloud& target, const SurfaceDescriptor& surface);

}  // namespace dbp
