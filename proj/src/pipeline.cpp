#include "omnifuse/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "omnifuse/optim.hpp"

namespace omnifuse {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// post-hoc reconstruction probe: a fresh decoder trained on frozen
// representations, mirroring how the joint-embedding quality of a trained
// encoder is measured
Sequential train_posthoc_decoder(const Tensor& h_train, const Tensor& r_train,
                                 const std::vector<int64_t>& enc_hidden, int64_t epochs,
                                 int64_t batch, double lr, Rng rng) {
    std::vector<int64_t> dec_hidden(enc_hidden.rbegin(), enc_hidden.rend());
    Rng init_rng = rng.split("init");
    Sequential dec = make_mlp(h_train.cols(), dec_hidden, r_train.cols(), Activation::tanh_,
                              Activation::identity, init_rng, "posthoc.dec");
    Adam opt(lr);
    const int64_t n = h_train.rows();
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = rng.split("shuffle");
    for (int64_t epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (int64_t start = 0; start < n; start += batch) {
            const int64_t end = std::min(n, start + batch);
            std::vector<int64_t> rows(order.begin() + start, order.begin() + end);
            Tape tape;
            dec.zero_grad();
            Tensor recon = dec.forward_train(take_rows(h_train, rows), tape);
            LossValue l = recon_sse_loss(recon, take_rows(r_train, rows));
            if (!std::isfinite(l.value))
                throw std::runtime_error("posthoc decoder: training diverged");
            dec.backward(l.grad, tape);
            opt.step(dec.params());
        }
    }
    return dec;
}

}  // namespace

std::filesystem::path resolve_out_dir(const std::string& out_dir) {
    std::filesystem::path p(out_dir);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("OMNIFUSE_OUT")) return std::filesystem::path(root) / p;
    return p;
}

RunResult run_pipeline(const ExperimentConfig& cfg) {
    Pipeline p(cfg);
    return p.run_all();
}

Pipeline::Pipeline(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    run_dir_ = resolve_out_dir(cfg_.out_dir);
    digest_ = cfg_.digest();
    run_id_ = digest_.substr(0, 12);
    std::filesystem::create_directories(run_dir_ / "checkpoints");
    std::filesystem::create_directories(run_dir_ / "reports");

    const auto lock = run_dir_ / "config.lock";
    const std::string canon = cfg_.canonical_text();
    if (std::filesystem::exists(lock)) {
        if (read_file(lock) != canon)
            throw std::runtime_error("pipeline: run directory " + run_dir_.string() +
                                     " belongs to a different config");
    } else {
        std::ofstream os(lock, std::ios::trunc);
        os << canon;
    }
}

std::filesystem::path Pipeline::ckpt_path(const std::string& name) const {
    return run_dir_ / "checkpoints" / (name + ".onf");
}

std::filesystem::path Pipeline::rows_path(const std::string& name) const {
    return run_dir_ / "reports" / ("rows_" + name + ".json");
}

bool Pipeline::stage_done(const std::string& name) const {
    return std::filesystem::exists(rows_path(name));
}

void Pipeline::note_stage(const std::string& name, bool recomputed, double seconds) {
    stages_.push_back({name, recomputed, seconds});
}

void Pipeline::load_stage_rows(const std::string& name) {
    stage_rows_[name] = read_rows_json(rows_path(name));
}

void Pipeline::save_stage_rows(const std::string& name, const std::vector<ReportRow>& rows) {
    stage_rows_[name] = rows;
    write_rows_json(rows, rows_path(name));
}

ReportRow Pipeline::row(const std::string& stage, const std::string& task,
                        const std::string& encoder, const std::string& mode,
                        const std::string& metric, double value, int64_t n,
                        int64_t n_missing) const {
    return ReportRow{run_id_, cfg_.seed, stage, task, encoder, mode, metric, value, n, n_missing};
}

int64_t Pipeline::latent_dim() {
    if (cfg_.fusion_latent > 0) return cfg_.fusion_latent;
    ensure_experts();
    return latent_dim_rule(bank_->embed_dims());
}

int64_t Pipeline::teacher_latent() {
    ensure_fusion();
    return ops_.at(cfg_.fusion_kind).latent_dim();
}

// ---------------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------------

void Pipeline::ensure_world() {
    if (world_) return;
    const auto t0 = Clock::now();
    const auto path = ckpt_path("world");
    if (std::filesystem::exists(path)) {
        world_ = CheckpointCodec::load_world(load_checkpoint(path, digest_));
        note_stage("world", false, seconds_since(t0));
        return;
    }
    world_ = gen_world(cfg_.seed, cfg_.world);
    Checkpoint ck = CheckpointCodec::save_world(*world_);
    ck.seed = cfg_.seed;
    ck.config_digest = digest_;
    save_checkpoint(ck, path);
    note_stage("world", true, seconds_since(t0));
}

void Pipeline::ensure_experts() {
    if (bank_) return;
    ensure_world();
    const auto t0 = Clock::now();
    const auto path = ckpt_path("experts");
    if (std::filesystem::exists(path) && stage_done("experts")) {
        bank_ = CheckpointCodec::load_bank(load_checkpoint(path, digest_));
        load_stage_rows("experts");
        note_stage("experts", false, seconds_since(t0));
        return;
    }
    std::vector<ExpertSpec> specs = default_expert_specs(cfg_.world);
    for (ExpertSpec& s : specs) {
        s.hidden = cfg_.expert_hidden;
        s.train_n = cfg_.expert_train_n;
        s.val_n = cfg_.expert_val_n;
        s.epochs = cfg_.expert_epochs;
        s.batch = cfg_.expert_batch;
        s.lr = cfg_.expert_lr;
    }
    bank_ = train_experts(*world_, specs, cfg_.expert_domain, root_rng().split("experts"));

    std::vector<ReportRow> rows;
    for (const Expert& e : bank_->experts) {
        rows.push_back(row("experts", e.spec.task.name, "expert", "-",
                           metric_kind_to_string(e.spec.task.metric), e.val_metric,
                           e.spec.val_n));
        rows.push_back(row("experts", e.spec.task.name, "chance", "-",
                           metric_kind_to_string(e.spec.task.metric), e.chance, e.spec.val_n));
    }
    Checkpoint ck = CheckpointCodec::save_bank(*bank_);
    ck.seed = cfg_.seed;
    ck.config_digest = digest_;
    save_checkpoint(ck, path);
    save_stage_rows("experts", rows);
    note_stage("experts", true, seconds_since(t0));
}

void Pipeline::ensure_pool() {
    if (pool_) return;
    ensure_world();
    const auto t0 = Clock::now();
    const auto path = ckpt_path("pool");
    const bool cached = std::filesystem::exists(path);
    if (cached) {
        pool_ = CheckpointCodec::load_dataset(load_checkpoint(path, digest_));
    } else {
        // the unlabeled pool spans the configured domains, row-interleaved
        const int64_t k = static_cast<int64_t>(cfg_.pool_domains.size());
        const int64_t per = (cfg_.pool_n + k - 1) / k;
        std::vector<SyntheticDataset> parts;
        for (size_t i = 0; i < cfg_.pool_domains.size(); ++i)
            parts.push_back(sample_unsup(*world_, per, cfg_.pool_domains[i],
                                         root_rng().split("pool").split(static_cast<uint64_t>(i))));
        pool_ = SyntheticDataset{};
        pool_->x = Tensor::matrix(cfg_.pool_n, world_->config().obs_dim);
        pool_->domain_id = cfg_.pool_domains[0];
        for (int64_t r = 0; r < cfg_.pool_n; ++r) {
            const SyntheticDataset& src = parts[static_cast<size_t>(r % k)];
            const double* row = src.x.row_ptr(r / k);
            for (int64_t j = 0; j < pool_->x.cols(); ++j) pool_->x.at(r, j) = row[j];
        }
        const int64_t n_val = std::max<int64_t>(
            1, static_cast<int64_t>(static_cast<double>(cfg_.pool_n) * cfg_.pool_val_fraction));
        assign_splits(*pool_, cfg_.pool_n - n_val, n_val, 0, root_rng().split("pool_splits"));
        Checkpoint ck = CheckpointCodec::save_dataset(*pool_);
        ck.seed = cfg_.seed;
        ck.config_digest = digest_;
        save_checkpoint(ck, path);
    }
    pool_train_idx_ = split_indices(*pool_, Split::train);
    pool_val_idx_ = split_indices(*pool_, Split::val);
    note_stage("pool", !cached, seconds_since(t0));
}

void Pipeline::ensure_pool_embeddings() {
    if (x_pool_train_) return;
    ensure_experts();
    ensure_pool();
    if (!rescaler_) throw std::logic_error("pipeline: rescaler not fitted yet");
    EmbeddingSet raw = extract_embeddings(*bank_, pool_->x);
    EmbeddingSet scaled = rescaler_->apply(raw);
    Tensor all = scaled.concat();
    x_pool_train_ = take_rows(all, pool_train_idx_);
    x_pool_val_ = take_rows(all, pool_val_idx_);
}

void Pipeline::ensure_fusion() {
    if (!ops_.empty()) return;
    ensure_experts();
    ensure_pool();
    const auto t0 = Clock::now();
    const auto path = ckpt_path("fusion");

    if (std::filesystem::exists(path) && stage_done("fusion")) {
        Checkpoint ck = load_checkpoint(path, digest_);
        rescaler_ = CheckpointCodec::get_rescaler(ck, "rescaler");
        for (const char* kind : {"ae", "pca"})
            ops_[fusion_kind_from_string(kind)] = CheckpointCodec::get_fusion(ck, kind);
        const FusionKind chosen = cfg_.fusion_kind;
        if (chosen != FusionKind::ae && chosen != FusionKind::pca &&
            chosen != FusionKind::concat)
            ops_[chosen] = CheckpointCodec::get_fusion(ck, fusion_kind_to_string(chosen));
        ops_[FusionKind::concat] =
            make_concat_operator(bank_->embed_dims(), bank_->names());
        load_stage_rows("fusion");
        note_stage("fusion", false, seconds_since(t0));
        return;
    }

    EmbeddingSet raw = extract_embeddings(*bank_, pool_->x);
    EmbeddingSet raw_train = raw.take(pool_train_idx_);
    rescaler_ = Rescaler::fit(raw_train);
    EmbeddingSet scaled = rescaler_->apply(raw);
    Tensor all = scaled.concat();
    Tensor x_train = take_rows(all, pool_train_idx_);
    Tensor x_val = take_rows(all, pool_val_idx_);
    EmbeddingSet val_targets = scaled.take(pool_val_idx_);

    const int64_t d_e = latent_dim();
    AeConfig acfg;
    acfg.latent = d_e;
    acfg.hidden = plan_layers(all.cols(), d_e, cfg_.fusion_layers);
    acfg.epochs = cfg_.fusion_epochs;
    acfg.batch = cfg_.fusion_batch;
    acfg.lr = cfg_.fusion_lr;
    acfg.noise_sigma = cfg_.fusion_noise_sigma;
    acfg.beta = cfg_.fusion_beta;

    std::vector<ReportRow> rows;
    ops_[FusionKind::concat] = make_concat_operator(raw.widths(), raw.names());
    ops_[FusionKind::pca] = fit_pca(x_train, d_e, raw.widths(), raw.names());
    for (FusionKind kind : {FusionKind::ae, FusionKind::vae, FusionKind::dae}) {
        ops_[kind] = fit_autoencoder(kind, x_train, x_val, acfg,
                                     root_rng().split("fusion").split(fusion_kind_to_string(kind)),
                                     raw.widths(), raw.names());
    }
    for (FusionKind kind :
         {FusionKind::pca, FusionKind::ae, FusionKind::vae, FusionKind::dae}) {
        const FusionOperator& op = ops_.at(kind);
        EmbeddingSet recon = op.decode_modalities(op.encode(x_val));
        double sum = 0.0;
        for (size_t m = 0; m < recon.modalities.size(); ++m) {
            const double v =
                rrmse(recon.modalities[m].matrix, val_targets.modalities[m].matrix);
            sum += v;
            rows.push_back(row("recon", recon.modalities[m].name, fusion_kind_to_string(kind),
                               "-", "rrmse", v, x_val.rows()));
        }
        rows.push_back(row("recon", "average", fusion_kind_to_string(kind), "-", "rrmse",
                           sum / static_cast<double>(recon.modalities.size()), x_val.rows()));
    }

    Checkpoint ck;
    ck.content_type = "fusion";
    ck.seed = cfg_.seed;
    ck.config_digest = digest_;
    CheckpointCodec::put_rescaler(ck, "rescaler", *rescaler_);
    CheckpointCodec::put_fusion(ck, "ae", ops_.at(FusionKind::ae));
    CheckpointCodec::put_fusion(ck, "pca", ops_.at(FusionKind::pca));
    if (cfg_.fusion_kind == FusionKind::vae || cfg_.fusion_kind == FusionKind::dae)
        CheckpointCodec::put_fusion(ck, fusion_kind_to_string(cfg_.fusion_kind),
                                    ops_.at(cfg_.fusion_kind));
    save_checkpoint(ck, path);
    save_stage_rows("fusion", rows);
    note_stage("fusion", true, seconds_since(t0));
}

Teacher Pipeline::teacher_for(FusionKind kind) {
    ensure_fusion();
    return Teacher{&*bank_, &*rescaler_, &ops_.at(kind)};
}

void Pipeline::ensure_distill() {
    if (student_) return;
    ensure_fusion();
    const auto t0 = Clock::now();
    const auto path = ckpt_path("student");
    if (std::filesystem::exists(path) && stage_done("distill")) {
        student_ = CheckpointCodec::load_student(load_checkpoint(path, digest_));
        load_stage_rows("distill");
        note_stage("distill", false, seconds_since(t0));
        return;
    }
    const int64_t d_e = teacher_latent();
    student_ = make_student(cfg_.world.obs_dim, d_e, cfg_.student,
                            root_rng().split("student_init"));
    Teacher teacher = teacher_for(cfg_.fusion_kind);
    DistillConfig dcfg{cfg_.distill_epochs, cfg_.distill_batch, cfg_.distill_lr};
    Tensor pool_train_obs = take_rows(pool_->x, pool_train_idx_);
    Tensor pool_val_obs = take_rows(pool_->x, pool_val_idx_);
    DistillHistory hist = distill_train(*student_, teacher, pool_train_obs, pool_val_obs,
                                        dcfg, root_rng().split("distill"));

    std::vector<ReportRow> rows;
    rows.push_back(row("distill", "pool", "student", "-", "cosine_distance_initial",
                       hist.initial_val_distance, pool_val_obs.rows()));
    rows.push_back(row("distill", "pool", "student", "-", "cosine_distance",
                       hist.final_val_distance, pool_val_obs.rows()));
    Checkpoint ck = CheckpointCodec::save_student(*student_);
    ck.seed = cfg_.seed;
    ck.config_digest = digest_;
    ck.scalars["final_val_distance"] = hist.final_val_distance;
    save_checkpoint(ck, path);
    save_stage_rows("distill", rows);
    note_stage("distill", true, seconds_since(t0));
}

void Pipeline::ensure_mt() {
    if (mt_) return;
    ensure_fusion();
    const auto t0 = Clock::now();
    const auto path = ckpt_path("mt");
    if (std::filesystem::exists(path) && stage_done("mt")) {
        mt_ = CheckpointCodec::load_mt(load_checkpoint(path, digest_));
        load_stage_rows("mt");
        note_stage("mt", false, seconds_since(t0));
        return;
    }
    ensure_pool_embeddings();
    const int64_t d_e = teacher_latent();
    const std::vector<int64_t> hidden =
        d_e < x_pool_train_->cols() ? plan_layers(x_pool_train_->cols(), d_e, cfg_.fusion_layers)
                                    : std::vector<int64_t>{};
    mt_ = make_mt_model(cfg_.world.obs_dim, d_e, hidden, x_pool_train_->cols(), cfg_.student,
                        root_rng().split("mt_init"));
    DistillConfig mcfg{cfg_.mt_epochs, cfg_.mt_batch, cfg_.mt_lr};
    Tensor pool_train_obs = take_rows(pool_->x, pool_train_idx_);
    Tensor pool_val_obs = take_rows(pool_->x, pool_val_idx_);
    MtHistory hist = mt_train(*mt_, pool_train_obs, *x_pool_train_, pool_val_obs,
                              *x_pool_val_, mcfg, root_rng().split("mt"));

    std::vector<ReportRow> rows;
    rows.push_back(row("mt", "pool", "mt", "-", "fusion_loss_initial", hist.initial_val_loss,
                       pool_val_obs.rows()));
    rows.push_back(row("mt", "pool", "mt", "-", "fusion_loss", hist.final_val_loss,
                       pool_val_obs.rows()));
    Checkpoint ck = CheckpointCodec::save_mt(*mt_);
    ck.seed = cfg_.seed;
    ck.config_digest = digest_;
    save_checkpoint(ck, path);
    save_stage_rows("mt", rows);
    note_stage("mt", true, seconds_since(t0));
}

std::vector<ReportRow> Pipeline::recon_rows_for(const std::string& encoder_label,
                                                const Tensor& h_train, const Tensor& h_val) {
    ensure_pool_embeddings();
    const std::vector<int64_t> hidden =
        h_train.cols() < x_pool_train_->cols()
            ? plan_layers(x_pool_train_->cols(), h_train.cols(), cfg_.fusion_layers)
            : std::vector<int64_t>{};
    Sequential dec = train_posthoc_decoder(h_train, *x_pool_train_, hidden,
                                           cfg_.posthoc_epochs, cfg_.fusion_batch,
                                           cfg_.fusion_lr,
                                           root_rng().split("posthoc").split(encoder_label));
    Tensor recon_all = dec.forward(h_val);
    EmbeddingSet recon =
        EmbeddingSet::split_concat(recon_all, bank_->embed_dims(), bank_->names());
    EmbeddingSet targets =
        EmbeddingSet::split_concat(*x_pool_val_, bank_->embed_dims(), bank_->names());
    std::vector<ReportRow> rows;
    double sum = 0.0;
    for (size_t m = 0; m < recon.modalities.size(); ++m) {
        const double v = rrmse(recon.modalities[m].matrix, targets.modalities[m].matrix);
        sum += v;
        rows.push_back(row("recon", recon.modalities[m].name, encoder_label, "-", "rrmse", v,
                           h_val.rows()));
    }
    rows.push_back(row("recon", "average", encoder_label, "-", "rrmse",
                       sum / static_cast<double>(recon.modalities.size()), h_val.rows()));
    return rows;
}

void Pipeline::ensure_posthoc() {
    if (stage_done("posthoc")) {
        if (!stage_rows_.count("posthoc")) {
            load_stage_rows("posthoc");
            note_stage("posthoc", false, 0.0);
        }
        return;
    }
    ensure_distill();
    ensure_mt();
    const auto t0 = Clock::now();
    Tensor pool_train_obs = take_rows(pool_->x, pool_train_idx_);
    Tensor pool_val_obs = take_rows(pool_->x, pool_val_idx_);

    std::vector<ReportRow> rows;
    {
        Tensor h_train = student_->encode(pool_train_obs);
        Tensor h_val = student_->encode(pool_val_obs);
        for (ReportRow& r : recon_rows_for("student", h_train, h_val)) rows.push_back(r);
    }
    {
        Tensor h_train = mt_->encode(pool_train_obs);
        Tensor h_val = mt_->encode(pool_val_obs);
        for (ReportRow& r : recon_rows_for("mt", h_train, h_val)) rows.push_back(r);
    }
    save_stage_rows("posthoc", rows);
    note_stage("posthoc", true, seconds_since(t0));
}

TaskData Pipeline::task_data(const TaskSpec& task) {
    ensure_world();
    Rng rng = root_rng().split("task_data").split(task.name);
    if (task.kind == TaskKind::identity_pairs) {
        const int64_t half = cfg_.transfer_pairs_n / 2;
        return make_task_data(*world_, task, 0, half, cfg_.transfer_pairs_n - half,
                              cfg_.transfer_domain, rng);
    }
    const int64_t train_n =
        task.small_train ? cfg_.transfer_small_train_n : cfg_.transfer_train_n;
    return make_task_data(*world_, task, train_n, cfg_.transfer_val_n, cfg_.transfer_test_n,
                          cfg_.transfer_domain, rng);
}

void Pipeline::ensure_transfer() {
    if (stage_done("transfer")) {
        if (!stage_rows_.count("transfer")) {
            load_stage_rows("transfer");
            note_stage("transfer", false, 0.0);
        }
        return;
    }
    ensure_distill();
    ensure_mt();
    const auto t0 = Clock::now();
    const int64_t d_e = teacher_latent();

    TransferConfig tcfg;
    tcfg.epochs = cfg_.transfer_epochs;
    tcfg.head_epochs = cfg_.transfer_head_epochs;
    tcfg.batch = cfg_.transfer_batch;
    tcfg.lr = cfg_.transfer_lr;
    tcfg.encoder_lr_scale = cfg_.transfer_encoder_lr_scale;
    tcfg.pair_folds = cfg_.transfer_pair_folds;

    std::vector<ReportRow> rows;
    Teacher chosen = teacher_for(cfg_.fusion_kind);
    for (const TaskSpec& task : default_eval_tasks(cfg_.world)) {
        TaskData data = task_data(task);
        Rng task_rng = root_rng().split("transfer").split(task.name);
        const std::string metric = metric_kind_to_string(task.metric);
        const int64_t n_test = data.test.n_units();

        // expert embeddings for the task, shared by every operator path
        TaskData emb = data;
        emb.train.x = chosen.rescaled_concat(data.train.x);
        emb.val.x = chosen.rescaled_concat(data.val.x);
        emb.test.x = chosen.rescaled_concat(data.test.x);

        // step-1 operator comparison: pca/ae heads on frozen codes; the
        // concat baseline is a from-scratch MLP with the encoder architecture
        for (const char* label : {"pca", "ae"}) {
            FusionRef ref(ops_.at(fusion_kind_from_string(label)), label);
            if (task.kind == TaskKind::identity_pairs) {
                MetricReport rep = pair_transfer_eval(ref, emb.test, tcfg.pair_folds);
                rows.push_back(row("transfer", task.name, label, "cf", metric, rep.value,
                                   rep.n_samples));
            } else {
                TransferResult res = transfer_train(ref, emb, TransferMode::cf, tcfg, task_rng);
                rows.push_back(row("transfer", task.name, label, "cf", metric,
                                   res.test_metric, n_test));
            }
        }
        if (task.kind == TaskKind::identity_pairs) {
            FusionRef ref(ops_.at(FusionKind::concat), "concat");
            MetricReport rep = pair_transfer_eval(ref, emb.test, tcfg.pair_folds);
            rows.push_back(row("transfer", task.name, "concat", "cf", metric, rep.value,
                               rep.n_samples));
        } else {
            const FusionOperator& ae_op = ops_.at(FusionKind::ae);
            Rng concat_rng = root_rng().split("concat_init").split(task.name);
            std::vector<int64_t> plan;
            for (size_t li = 0; li + 1 < ae_op.encoder().size(); ++li)
                plan.push_back(ae_op.encoder().layer(li).out_dim());
            Sequential concat_mlp =
                make_mlp(emb.train.x.cols(), plan, ae_op.latent_dim(), Activation::tanh_,
                         Activation::identity, concat_rng, "concat_mlp");
            NetRef ref(concat_mlp, "concat");
            TransferConfig ccfg = tcfg;
            ccfg.encoder_lr_scale = 1.0;  // trained from scratch end to end
            ccfg.head_epochs = 0;
            TransferResult res = transfer_train(ref, emb, TransferMode::wf, ccfg, task_rng);
            rows.push_back(row("transfer", task.name, "concat", "cf", metric,
                               res.test_metric, n_test));
        }

        // end-to-end model comparison
        FusionRef teacher_ref(ops_.at(cfg_.fusion_kind), "teacher");
        NetRef student_ref(student_->net, "student");
        NetRef mt_ref(mt_->backbone, "mt");
        StudentEncoder scratch = make_student(cfg_.world.obs_dim, d_e, cfg_.student,
                                              root_rng().split("cnn_init").split(task.name));
        NetRef cnn_ref(scratch.net, "cnn");

        if (task.kind == TaskKind::identity_pairs) {
            MetricReport trep = pair_transfer_eval(teacher_ref, emb.test, tcfg.pair_folds);
            rows.push_back(row("transfer", task.name, "teacher", "cf", metric, trep.value,
                               trep.n_samples));
            for (const TransferEncoder* enc :
                 {static_cast<const TransferEncoder*>(&student_ref),
                  static_cast<const TransferEncoder*>(&mt_ref),
                  static_cast<const TransferEncoder*>(&cnn_ref)}) {
                MetricReport rep = pair_transfer_eval(*enc, data.test, tcfg.pair_folds);
                rows.push_back(row("transfer", task.name, enc->name(), "cf", metric, rep.value,
                                   rep.n_samples));
            }
        } else {
            TransferResult t_cf =
                transfer_train(teacher_ref, emb, TransferMode::cf, tcfg, task_rng);
            rows.push_back(row("transfer", task.name, "teacher", "cf", metric,
                               t_cf.test_metric, n_test));
            for (auto& [ref, label] : std::vector<std::pair<NetRef*, std::string>>{
                     {&student_ref, "student"}, {&mt_ref, "mt"}}) {
                TransferResult cf = transfer_train(*ref, data, TransferMode::cf, tcfg, task_rng);
                rows.push_back(
                    row("transfer", task.name, label, "cf", metric, cf.test_metric, n_test));
                TransferResult wf = transfer_train(*ref, data, TransferMode::wf, tcfg, task_rng);
                rows.push_back(
                    row("transfer", task.name, label, "wf", metric, wf.test_metric, n_test));
            }
            TransferConfig cnn_cfg = tcfg;
            cnn_cfg.encoder_lr_scale = 1.0;  // from-scratch baseline: no pretrained weights to protect
            cnn_cfg.head_epochs = 0;
            TransferResult cnn = transfer_train(cnn_ref, data, TransferMode::wf, cnn_cfg, task_rng);
            rows.push_back(
                row("transfer", task.name, "cnn", "wf", metric, cnn.test_metric, n_test));
        }
    }
    save_stage_rows("transfer", rows);
    note_stage("transfer", true, seconds_since(t0));
}

void Pipeline::ensure_select() {
    if (stage_done("select")) {
        if (!stage_rows_.count("select")) {
            load_stage_rows("select");
            note_stage("select", false, 0.0);
        }
        return;
    }
    ensure_fusion();
    const auto t0 = Clock::now();

    TransferConfig scfg;
    scfg.epochs = cfg_.select_epochs;
    scfg.batch = cfg_.transfer_batch;
    scfg.lr = cfg_.transfer_lr;
    scfg.pair_folds = cfg_.transfer_pair_folds;

    std::vector<ReportRow> rows;
    for (const TaskSpec& task : default_eval_tasks(cfg_.world)) {
        TaskData data = task_data(task);
        Rng task_rng = root_rng().split("select").split(task.name);
        const std::string metric = metric_kind_to_string(task.metric);

        auto embed = [&](const SyntheticDataset& ds) {
            return rescaler_->apply(extract_embeddings(*bank_, ds.x));
        };
        EmbeddingSet etr = embed(data.train);
        EmbeddingSet eva = embed(data.val);
        EmbeddingSet ete = embed(data.test);

        SelectResult bt =
            select_transfer(etr, eva, ete, data, SelectMode::single, scfg, task_rng);
        SelectResult bct =
            select_transfer(etr, eva, ete, data, SelectMode::all_subsets, scfg, task_rng);
        rows.push_back(row("select", task.name, "bt", "-", metric, bt.test_metric,
                           data.test.n_units()));
        rows.push_back(row("select", task.name, "bct", "-", metric, bct.test_metric,
                           data.test.n_units()));
        rows.push_back(row("select", task.name, "bt_val", "-", metric, bt.best_val_metric,
                           data.val.n_units()));
        rows.push_back(row("select", task.name, "bct_val", "-", metric, bct.best_val_metric,
                           data.val.n_units()));
    }
    save_stage_rows("select", rows);
    note_stage("select", true, seconds_since(t0));
}

void Pipeline::ensure_sweep() {
    if (stage_done("sweep")) {
        if (!stage_rows_.count("sweep")) {
            load_stage_rows("sweep");
            note_stage("sweep", false, 0.0);
        }
        return;
    }
    ensure_fusion();
    ensure_pool_embeddings();
    const auto t0 = Clock::now();

    AeConfig base;
    base.epochs = cfg_.sweep_epochs;
    base.batch = cfg_.fusion_batch;
    base.lr = cfg_.fusion_lr;
    base.noise_sigma = cfg_.fusion_noise_sigma;
    base.beta = cfg_.fusion_beta;
    const FusionKind kind =
        cfg_.fusion_kind == FusionKind::concat ? FusionKind::ae : cfg_.fusion_kind;
    std::vector<SweepRow> sweep =
        sweep_latent(*x_pool_train_, *x_pool_val_, cfg_.sweep_dims, kind, base,
                     cfg_.fusion_layers, root_rng().split("sweep"));

    std::vector<ReportRow> rows;
    for (const SweepRow& s : sweep) {
        if (s.failed) {
            rows.push_back(row("sweep", std::to_string(s.dim), fusion_kind_to_string(kind),
                               "-", "failed", 1.0, 0));
        } else {
            rows.push_back(row("sweep", std::to_string(s.dim), fusion_kind_to_string(kind),
                               "-", "rrmse", s.val_rrmse, x_pool_val_->rows()));
        }
    }
    save_stage_rows("sweep", rows);
    note_stage("sweep", true, seconds_since(t0));
}

RunResult Pipeline::finalize_reports() {
    static const char* kStageOrder[] = {"experts", "fusion", "distill", "mt", "posthoc",
                                        "transfer", "select", "sweep"};
    std::vector<ReportRow> merged;
    for (const char* name : kStageOrder) {
        if (!stage_rows_.count(name) && std::filesystem::exists(rows_path(name)))
            load_stage_rows(name);
        if (stage_rows_.count(name))
            for (const ReportRow& r : stage_rows_.at(name)) merged.push_back(r);
    }
    write_rows_csv(merged, run_dir_ / "reports" / "report.csv");
    write_rows_json(merged, run_dir_ / "reports" / "report.json");

    std::ofstream timing(run_dir_ / "timing.log", std::ios::trunc);
    for (const StageInfo& s : stages_) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "stage=%s status=%s seconds=%.3f\n", s.name.c_str(),
                      s.recomputed ? "computed" : "loaded", s.seconds);
        timing << buf;
    }

    RunResult res;
    res.run_dir = run_dir_;
    res.stages = stages_;
    res.rows = std::move(merged);
    return res;
}

RunResult Pipeline::run_all() {
    ensure_world();
    ensure_experts();
    ensure_pool();
    ensure_fusion();
    ensure_distill();
    ensure_mt();
    ensure_posthoc();
    ensure_transfer();
    ensure_select();
    ensure_sweep();
    return finalize_reports();
}

World& Pipeline::world() {
    ensure_world();
    return *world_;
}
ExpertBank& Pipeline::bank() {
    ensure_experts();
    return *bank_;
}
SyntheticDataset& Pipeline::pool() {
    ensure_pool();
    return *pool_;
}
Rescaler& Pipeline::rescaler() {
    ensure_fusion();
    return *rescaler_;
}
FusionOperator& Pipeline::fusion_op(FusionKind kind) {
    ensure_fusion();
    return ops_.at(kind);
}
StudentEncoder& Pipeline::student() {
    ensure_distill();
    return *student_;
}
MtModel& Pipeline::mt() {
    ensure_mt();
    return *mt_;
}

}  // namespace omnifuse
