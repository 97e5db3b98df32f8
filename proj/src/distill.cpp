#include "omnifuse/distill.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "omnifuse/optim.hpp"

namespace omnifuse {

double cosine_distance(const Tensor& a, const Tensor& b, CosineDiagnostics* diag) {
    if (a.numel() != b.numel())
        throw std::invalid_argument("cosine_distance: length mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        ab += a.data[i] * b.data[i];
        aa += a.data[i] * a.data[i];
        bb += b.data[i] * b.data[i];
    }
    if (aa == 0.0 || bb == 0.0) {
        if (diag) ++diag->zero_norm_count;
        return 1.0;
    }
    return 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
}

double mean_cosine_distance(const Tensor& a, const Tensor& b, CosineDiagnostics* diag) {
    if (!a.same_shape(b)) throw std::invalid_argument("mean_cosine_distance: shape mismatch");
    double total = 0.0;
    for (int64_t i = 0; i < a.rows(); ++i) {
        Tensor ra({a.cols()}, std::vector<double>(a.row_ptr(i), a.row_ptr(i) + a.cols()));
        Tensor rb({b.cols()}, std::vector<double>(b.row_ptr(i), b.row_ptr(i) + b.cols()));
        total += cosine_distance(ra, rb, diag);
    }
    return total / static_cast<double>(a.rows());
}

Tensor Teacher::rescaled_concat(const Tensor& observations) const {
    if (!bank || !rescaler || !fusion) throw std::logic_error("teacher: incomplete");
    EmbeddingSet raw = extract_embeddings(*bank, observations);
    return rescaler->apply(raw).concat();
}

Tensor Teacher::encode(const Tensor& observations) const {
    return fusion->encode(rescaled_concat(observations));
}

uint64_t Teacher::params_hash() const {
    uint64_t h = bank->params_hash();
    return h ^ fusion->params_hash();
}

int64_t Teacher::encoder_param_count() const {
    return bank->encoder_param_count() + fusion->encoder_param_count();
}

StudentEncoder make_student(int64_t in_dim, int64_t out_dim, const StudentConfig& cfg,
                            Rng rng) {
    StudentEncoder s;
    if (!cfg.conv_mode) {
        s.net = make_mlp(in_dim, cfg.hidden, out_dim, cfg.hidden_act, Activation::identity,
                         rng, "student");
        return s;
    }
    const int64_t side = cfg.image_side;
    if (side * side != in_dim)
        throw std::invalid_argument("student conv mode: input is not a square image");
    if (side % 8 != 0)
        throw std::invalid_argument("student conv mode: side must be divisible by 8");
    // three conv blocks with pooling, then a dense head
    int64_t h = side, w = side;
    s.net.add(std::make_unique<Conv2dLayer>(1, h, w, 8, Activation::elu, rng, "student.c0"));
    s.net.add(std::make_unique<AvgPool2dLayer>(8, h, w));
    h /= 2; w /= 2;
    s.net.add(std::make_unique<Conv2dLayer>(8, h, w, 16, Activation::elu, rng, "student.c1"));
    s.net.add(std::make_unique<AvgPool2dLayer>(16, h, w));
    h /= 2; w /= 2;
    s.net.add(std::make_unique<Conv2dLayer>(16, h, w, 16, Activation::elu, rng, "student.c2"));
    s.net.add(std::make_unique<AvgPool2dLayer>(16, h, w));
    h /= 2; w /= 2;
    s.net.add(std::make_unique<DenseLayer>(16 * h * w, out_dim, Activation::identity, false,
                                           rng, "student.fc"));
    return s;
}

DistillHistory distill_train(StudentEncoder& student, const Teacher& teacher,
                             const Tensor& pool_train, const Tensor& pool_val,
                             const DistillConfig& cfg, Rng rng) {
    const uint64_t teacher_before = teacher.params_hash();

    // the teacher is frozen, so its targets are computed once and cached
    Tensor h_train = teacher.encode(pool_train);
    Tensor h_val = teacher.encode(pool_val);

    DistillHistory hist;
    hist.initial_val_distance = mean_cosine_distance(student.encode(pool_val), h_val);
    hist.final_val_distance = hist.initial_val_distance;

    if (cfg.epochs > 0) {
        Adam opt(cfg.lr);
        const int64_t n = pool_train.rows();
        std::vector<int64_t> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = rng.split("shuffle");
        for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            shuffle_rng.shuffle(order);
            double loss_sum = 0.0;
            int64_t batches = 0;
            for (int64_t start = 0; start < n; start += cfg.batch) {
                const int64_t end = std::min(n, start + cfg.batch);
                std::vector<int64_t> rows(order.begin() + start, order.begin() + end);
                Tensor xb = take_rows(pool_train, rows);
                Tensor tb = take_rows(h_train, rows);
                Tape tape;
                student.net.zero_grad();
                Tensor out = student.net.forward_train(xb, tape);
                LossValue l = cosine_loss(out, tb);
                if (!std::isfinite(l.value))
                    throw std::runtime_error("distill_train: training diverged");
                student.net.backward(l.grad, tape);
                opt.step(student.net.params());
                loss_sum += l.value;
                ++batches;
            }
            hist.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
        }
        hist.final_val_distance = mean_cosine_distance(student.encode(pool_val), h_val);
    }

    if (teacher.params_hash() != teacher_before)
        throw std::logic_error("distill_train: teacher parameters changed");
    return hist;
}

MtModel make_mt_model(int64_t in_dim, int64_t latent, const std::vector<int64_t>& encoder_hidden,
                      int64_t target_dim, const StudentConfig& student_cfg, Rng rng) {
    MtModel mt;
    mt.backbone = make_student(in_dim, latent, student_cfg, rng.split("backbone")).net;
    std::vector<int64_t> dec_hidden(encoder_hidden.rbegin(), encoder_hidden.rend());
    Rng dec_rng = rng.split("decoder");
    mt.decoder = make_mlp(latent, dec_hidden, target_dim, Activation::tanh_,
                          Activation::identity, dec_rng, "mt.dec");
    return mt;
}

uint64_t MtModel::hash() {
    uint64_t h = param_hash(backbone);
    return h ^ param_hash(decoder);
}

double mt_loss_eval(const MtModel& mt, const Tensor& x, const Tensor& targets) {
    Tensor recon = mt.decoder.forward(mt.backbone.forward(x));
    return sum_sq_diff(recon, targets) / static_cast<double>(targets.rows());
}

MtHistory mt_train(MtModel& mt, const Tensor& pool_train, const Tensor& targets_train,
                   const Tensor& pool_val, const Tensor& targets_val, const DistillConfig& cfg,
                   Rng rng) {
    if (pool_train.rows() != targets_train.rows())
        throw std::invalid_argument("mt_train: pool/target row mismatch");
    MtHistory hist;
    hist.initial_val_loss = mt_loss_eval(mt, pool_val, targets_val);
    hist.final_val_loss = hist.initial_val_loss;
    if (cfg.epochs == 0) return hist;

    std::vector<Parameter*> params = mt.backbone.params();
    for (Parameter* p : mt.decoder.params()) params.push_back(p);
    Adam opt(cfg.lr);
    const int64_t n = pool_train.rows();
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = rng.split("shuffle");
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        int64_t batches = 0;
        for (int64_t start = 0; start < n; start += cfg.batch) {
            const int64_t end = std::min(n, start + cfg.batch);
            std::vector<int64_t> rows(order.begin() + start, order.begin() + end);
            Tensor xb = take_rows(pool_train, rows);
            Tensor tb = take_rows(targets_train, rows);
            Tape bb_tape, dec_tape;
            mt.backbone.zero_grad();
            mt.decoder.zero_grad();
            Tensor z = mt.backbone.forward_train(xb, bb_tape);
            Tensor recon = mt.decoder.forward_train(z, dec_tape);
            LossValue l = recon_sse_loss(recon, tb);
            if (!std::isfinite(l.value))
                throw std::runtime_error("mt_train: training diverged");
            Tensor dz = mt.decoder.backward(l.grad, dec_tape);
            mt.backbone.backward(dz, bb_tape);
            opt.step(params);
            loss_sum += l.value;
            ++batches;
        }
        hist.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    }
    hist.final_val_loss = mt_loss_eval(mt, pool_val, targets_val);
    return hist;
}

double compression_ratio(int64_t teacher_params, int64_t student_params) {
    if (student_params <= 0) throw std::invalid_argument("compression_ratio: empty student");
    return static_cast<double>(teacher_params) / static_cast<double>(student_params);
}

}  // namespace omnifuse
