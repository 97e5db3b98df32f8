#pragma once

#include <cstdint>
#include <vector>

#include "omnifuse/rng.hpp"
#include "omnifuse/task.hpp"
#include "omnifuse/tensor.hpp"

namespace omnifuse {

struct WorldConfig {
    int64_t n_classes = 7;     // C
    int64_t n_attrs = 6;       // K
    int64_t nuisance_dim = 8;  // n_z
    int64_t obs_dim = 128;     // d_x
    int64_t n_domains = 3;
    double noise_sigma = 0.7;
    int64_t n_identities = 20;
    double domain_shift = 0.15;   // weight perturbation magnitude per extra domain
    int64_t id_code_dim = 8;     // width of the per-identity code entering the render
    int64_t render_hidden = 256; // hidden width of the two-stage render map
    double class_scale = 0.85;    // render salience of the category factor
    double age_scale = 1.2;      // render salience of the age factor
    double attr_scale = 0.5;     // render salience of each attribute bit
    // factors correlate through identity: every identity carries a base age,
    // base attributes and a category affinity, jittered per sample. This is
    // what makes the expert views redundant rather than complementary.
    double class_flip_prob = 0.10;  // 1.0 decouples category from identity
    double attr_flip_prob = 0.04;   // 0.5 decouples attributes
    double age_jitter = 6.0;        // per-sample sigma around the identity base age
};

struct LatentFactor {
    int64_t identity = 0;
    int64_t class_label = 0;
    double age = 0.0;  // [0, 100]
    std::vector<int> attrs;
    std::vector<double> nuisance;
};

// Two fixed affine+tanh stages; distinct domains perturb the base weights.
struct RenderMap {
    Tensor a1, b1;  // latent_dim -> hidden
    Tensor a2, b2;  // hidden -> obs_dim
    double noise_sigma = 0.0;
    int64_t domain_id = 0;
};

enum class Split : uint8_t { train = 0, val = 1, test = 2 };

struct PairExample {
    int64_t i = 0, j = 0;
    bool same = false;
};

struct SyntheticDataset {
    Tensor x;  // [N x d_x]
    bool has_labels = false;
    TaskKind label_kind = TaskKind::classification;
    std::vector<int> class_labels;
    std::vector<double> reg_labels;
    Tensor attr_labels;               // [N x K]
    std::vector<PairExample> pairs;   // identity_pairs only
    std::vector<uint8_t> missing;     // per unit; empty means none missing
    int64_t domain_id = 0;
    std::vector<Split> split_tags;    // per unit (row, or pair for pair tasks)

    // units: rows for plain datasets, pairs for pair datasets
    int64_t n_units() const;
    int64_t n_rows() const { return x.shape.empty() ? 0 : x.rows(); }
};

class World {
public:
    static World generate(uint64_t seed, const WorldConfig& cfg);

    const WorldConfig& config() const { return cfg_; }
    uint64_t seed() const { return seed_; }
    int64_t latent_dim() const;
    const RenderMap& domain(int64_t id) const;
    int64_t n_domains() const { return static_cast<int64_t>(domains_.size()); }

    LatentFactor sample_latent(Rng& rng) const;
    Tensor latent_vector(const LatentFactor& lf) const;
    // renders one row per latent; noise drawn from rng (ignored at sigma 0)
    Tensor render(const std::vector<LatentFactor>& lfs, int64_t domain_id, Rng& rng) const;

    int label_for(const TaskSpec& task, const LatentFactor& lf) const;
    double regression_label_for(const TaskSpec& task, const LatentFactor& lf) const;

    // raw world state, used by checkpointing
    const std::vector<RenderMap>& render_maps() const { return domains_; }
    const Tensor& identity_codes() const { return identity_codes_; }
    const Tensor& identity_base_age() const { return base_age_; }
    const Tensor& identity_base_attrs() const { return base_attrs_; }
    World(WorldConfig cfg, uint64_t seed, std::vector<RenderMap> maps, Tensor id_codes,
          Tensor base_age, Tensor base_attrs);

private:
    WorldConfig cfg_;
    uint64_t seed_ = 0;
    std::vector<RenderMap> domains_;
    Tensor identity_codes_;  // [n_identities x id_code_dim]
    Tensor base_age_;        // [n_identities]
    Tensor base_attrs_;      // [n_identities x n_attrs], 0/1
    Tensor nuisance_proj(const TaskSpec& task) const;
};

World gen_world(uint64_t seed, const WorldConfig& cfg);
SyntheticDataset sample_unsup(const World& world, int64_t n, int64_t domain_id, Rng rng);
SyntheticDataset sample_task(const World& world, const TaskSpec& task, int64_t n,
                             int64_t domain_id, Rng rng);

// tags units train/val/test by shuffled proportion; counts must sum to <= units
void assign_splits(SyntheticDataset& ds, int64_t n_train, int64_t n_val, int64_t n_test,
                   Rng rng);
std::vector<int64_t> split_indices(const SyntheticDataset& ds, Split tag);
SyntheticDataset subset(const SyntheticDataset& ds, Split tag);

}  // namespace omnifuse
