#pragma once

#include <optional>

#include "omnifuse/embedding.hpp"
#include "omnifuse/nn.hpp"
#include "omnifuse/rng.hpp"

namespace omnifuse {

enum class FusionKind { concat, pca, ae, vae, dae };

FusionKind fusion_kind_from_string(const std::string& s);
std::string fusion_kind_to_string(FusionKind k);

// smallest power of two >= mean of the given widths
int64_t latent_dim_rule(const std::vector<int64_t>& dims);

// Geometric interpolation between input and latent width over n_layers
// steps; each hidden size is rounded to the nearest multiple of 64 (sizes
// >= 512) or 8 (below), then forced strictly decreasing inside
// (latent, input). Returns the n_layers-1 hidden sizes.
std::vector<int64_t> plan_layers(int64_t input_dim, int64_t latent_dim, int64_t n_layers);

struct AeConfig {
    int64_t latent = 0;
    std::vector<int64_t> hidden;  // encoder hidden plan; decoder is symmetric
    int64_t epochs = 40;
    int64_t batch = 64;
    double lr = 1e-3;
    double noise_sigma = 0.1;  // dae input corruption
    double beta = 1.0;         // vae KL weight
    Activation hidden_act = Activation::tanh_;
};

// A fitted fusion operator: encoder F producing the joint embedding and
// decoder F~ reconstructing the per-modality inputs. Kind concat is the
// identity pair; pca is linear; ae/vae/dae are learned.
class FusionOperator {
public:
    FusionKind kind() const { return kind_; }
    int64_t input_dim() const { return input_dim_; }
    int64_t latent_dim() const { return latent_dim_; }
    const std::vector<int64_t>& modality_widths() const { return widths_; }
    const std::vector<std::string>& modality_names() const { return names_; }

    // pure inference; vae encodes to the posterior mean
    Tensor encode(const Tensor& x) const;
    Tensor decode(const Tensor& h) const;
    EmbeddingSet decode_modalities(const Tensor& h) const;

    double initial_val_loss() const { return initial_val_loss_; }
    double final_val_loss() const { return final_val_loss_; }
    const std::vector<double>& epoch_val_loss() const { return epoch_val_loss_; }

    // pca internals (also the serialization surface)
    const Tensor& pca_mean() const { return mean_; }
    const Tensor& pca_components() const { return components_; }
    const Tensor& pca_eigenvalues() const { return eigenvalues_; }
    Sequential& encoder() { return encoder_; }
    Sequential& decoder() { return decoder_; }
    const Sequential& encoder() const { return encoder_; }
    const Sequential& decoder() const { return decoder_; }
    Sequential& vae_mu_head() { return mu_head_; }
    Sequential& vae_logvar_head() { return logvar_head_; }

    uint64_t params_hash() const;
    int64_t encoder_param_count() const;

    friend FusionOperator make_concat_operator(std::vector<int64_t> widths,
                                               std::vector<std::string> names);
    friend FusionOperator fit_pca(const Tensor& x, int64_t k, std::vector<int64_t> widths,
                                  std::vector<std::string> names);
    friend FusionOperator fit_autoencoder(FusionKind kind, const Tensor& x_train,
                                          const Tensor& x_val, const AeConfig& cfg, Rng rng,
                                          std::vector<int64_t> widths,
                                          std::vector<std::string> names);
    friend class CheckpointCodec;

private:
    FusionKind kind_ = FusionKind::concat;
    int64_t input_dim_ = 0;
    int64_t latent_dim_ = 0;
    std::vector<int64_t> widths_;
    std::vector<std::string> names_;
    double initial_val_loss_ = 0.0;
    double final_val_loss_ = 0.0;
    std::vector<double> epoch_val_loss_;

    Tensor mean_, components_, eigenvalues_;   // pca
    Sequential encoder_, decoder_;             // ae/dae; vae trunk in encoder_
    Sequential mu_head_, logvar_head_;         // vae heads
};

FusionOperator make_concat_operator(std::vector<int64_t> widths, std::vector<std::string> names);

// k <= min(N, D); components maximize retained variance (eigendecomposition
// of the 1/N covariance), encode centers and projects, decode back-projects
FusionOperator fit_pca(const Tensor& x, int64_t k, std::vector<int64_t> widths = {},
                       std::vector<std::string> names = {});

// x_train/x_val must already be rescaled; dae corrupts inputs with Gaussian
// noise but reconstructs the clean targets; vae adds beta * KL to the
// objective and trains with reparameterized sampling
FusionOperator fit_autoencoder(FusionKind kind, const Tensor& x_train, const Tensor& x_val,
                               const AeConfig& cfg, Rng rng, std::vector<int64_t> widths = {},
                               std::vector<std::string> names = {});

// sum over modalities of the mean-over-samples squared Euclidean distance
double fusion_loss(const EmbeddingSet& recon, const EmbeddingSet& target);

// symmetric eigendecomposition by cyclic Jacobi rotations; eigenvalues are
// returned descending with matching eigenvector columns, signs fixed so the
// largest-magnitude entry of each vector is positive
void symmetric_eigen(const Tensor& sym, Tensor& eigenvalues, Tensor& eigenvectors);

}  // namespace omnifuse
