#include "omnifuse/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace omnifuse {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<int64_t> parse_int_list(const std::string& s) {
    std::vector<int64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stoll(item));
    }
    return out;
}

std::string int_list_to_string(const std::vector<int64_t>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// one registry drives parsing, canonical printing and key validation
struct Binding {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
    bool in_digest = true;
};

std::vector<Binding> bindings() {
    std::vector<Binding> b;
    auto add_u64 = [&b](const std::string& k, uint64_t ExperimentConfig::* f) {
        b.push_back({k, [f](ExperimentConfig& c, const std::string& v) { c.*f = std::stoull(v); },
                     [f](const ExperimentConfig& c) { return std::to_string(c.*f); }});
    };
    auto add_i64 = [&b](const std::string& k, int64_t ExperimentConfig::* f) {
        b.push_back({k, [f](ExperimentConfig& c, const std::string& v) { c.*f = std::stoll(v); },
                     [f](const ExperimentConfig& c) { return std::to_string(c.*f); }});
    };
    auto add_dbl = [&b](const std::string& k, double ExperimentConfig::* f) {
        b.push_back({k, [f](ExperimentConfig& c, const std::string& v) { c.*f = std::stod(v); },
                     [f](const ExperimentConfig& c) { return format_double(c.*f); }});
    };
    auto add_list = [&b](const std::string& k, std::vector<int64_t> ExperimentConfig::* f) {
        b.push_back({k,
                     [f](ExperimentConfig& c, const std::string& v) { c.*f = parse_int_list(v); },
                     [f](const ExperimentConfig& c) { return int_list_to_string(c.*f); }});
    };
    auto add_wi64 = [&b](const std::string& k, int64_t WorldConfig::* f) {
        b.push_back({k,
                     [f](ExperimentConfig& c, const std::string& v) { c.world.*f = std::stoll(v); },
                     [f](const ExperimentConfig& c) { return std::to_string(c.world.*f); }});
    };
    auto add_wdbl = [&b](const std::string& k, double WorldConfig::* f) {
        b.push_back({k,
                     [f](ExperimentConfig& c, const std::string& v) { c.world.*f = std::stod(v); },
                     [f](const ExperimentConfig& c) { return format_double(c.world.*f); }});
    };

    add_u64("seed", &ExperimentConfig::seed);
    // the output location is not part of the experiment identity
    b.push_back({"out_dir",
                 [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
                 [](const ExperimentConfig& c) { return c.out_dir; },
                 /*in_digest=*/false});

    add_wi64("world.classes", &WorldConfig::n_classes);
    add_wi64("world.attrs", &WorldConfig::n_attrs);
    add_wi64("world.nuisance_dim", &WorldConfig::nuisance_dim);
    add_wi64("world.obs_dim", &WorldConfig::obs_dim);
    add_wi64("world.domains", &WorldConfig::n_domains);
    add_wdbl("world.noise", &WorldConfig::noise_sigma);
    add_wi64("world.identities", &WorldConfig::n_identities);
    add_wdbl("world.domain_shift", &WorldConfig::domain_shift);
    add_wi64("world.id_code_dim", &WorldConfig::id_code_dim);
    add_wi64("world.render_hidden", &WorldConfig::render_hidden);
    add_wdbl("world.class_scale", &WorldConfig::class_scale);
    add_wdbl("world.age_scale", &WorldConfig::age_scale);
    add_wdbl("world.attr_scale", &WorldConfig::attr_scale);
    add_wdbl("world.class_flip_prob", &WorldConfig::class_flip_prob);
    add_wdbl("world.attr_flip_prob", &WorldConfig::attr_flip_prob);
    add_wdbl("world.age_jitter", &WorldConfig::age_jitter);

    add_i64("pool.n", &ExperimentConfig::pool_n);
    add_list("pool.domains", &ExperimentConfig::pool_domains);
    add_dbl("pool.val_fraction", &ExperimentConfig::pool_val_fraction);
    add_i64("experts.domain", &ExperimentConfig::expert_domain);

    add_list("experts.hidden", &ExperimentConfig::expert_hidden);
    add_i64("experts.train_n", &ExperimentConfig::expert_train_n);
    add_i64("experts.val_n", &ExperimentConfig::expert_val_n);
    add_i64("experts.epochs", &ExperimentConfig::expert_epochs);
    add_i64("experts.batch", &ExperimentConfig::expert_batch);
    add_dbl("experts.lr", &ExperimentConfig::expert_lr);

    b.push_back({"fusion.kind",
                 [](ExperimentConfig& c, const std::string& v) {
                     c.fusion_kind = fusion_kind_from_string(v);
                 },
                 [](const ExperimentConfig& c) { return fusion_kind_to_string(c.fusion_kind); }});
    add_i64("fusion.latent", &ExperimentConfig::fusion_latent);
    add_i64("fusion.layers", &ExperimentConfig::fusion_layers);
    add_i64("fusion.epochs", &ExperimentConfig::fusion_epochs);
    add_i64("fusion.batch", &ExperimentConfig::fusion_batch);
    add_dbl("fusion.lr", &ExperimentConfig::fusion_lr);
    add_dbl("fusion.noise_sigma", &ExperimentConfig::fusion_noise_sigma);
    add_dbl("fusion.beta", &ExperimentConfig::fusion_beta);

    b.push_back({"student.hidden",
                 [](ExperimentConfig& c, const std::string& v) {
                     c.student.hidden = parse_int_list(v);
                 },
                 [](const ExperimentConfig& c) { return int_list_to_string(c.student.hidden); }});
    b.push_back({"student.conv",
                 [](ExperimentConfig& c, const std::string& v) {
                     c.student.conv_mode = (v == "1" || v == "true");
                 },
                 [](const ExperimentConfig& c) {
                     return std::string(c.student.conv_mode ? "true" : "false");
                 }});
    b.push_back({"student.image_side",
                 [](ExperimentConfig& c, const std::string& v) {
                     c.student.image_side = std::stoll(v);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.student.image_side); }});

    add_i64("distill.epochs", &ExperimentConfig::distill_epochs);
    add_i64("distill.batch", &ExperimentConfig::distill_batch);
    add_dbl("distill.lr", &ExperimentConfig::distill_lr);

    add_i64("mt.epochs", &ExperimentConfig::mt_epochs);
    add_i64("mt.batch", &ExperimentConfig::mt_batch);
    add_dbl("mt.lr", &ExperimentConfig::mt_lr);

    add_i64("transfer.epochs", &ExperimentConfig::transfer_epochs);
    add_i64("transfer.head_epochs", &ExperimentConfig::transfer_head_epochs);
    add_i64("transfer.batch", &ExperimentConfig::transfer_batch);
    add_dbl("transfer.lr", &ExperimentConfig::transfer_lr);
    add_dbl("transfer.encoder_lr_scale", &ExperimentConfig::transfer_encoder_lr_scale);
    add_i64("transfer.train_n", &ExperimentConfig::transfer_train_n);
    add_i64("transfer.small_train_n", &ExperimentConfig::transfer_small_train_n);
    add_i64("transfer.val_n", &ExperimentConfig::transfer_val_n);
    add_i64("transfer.test_n", &ExperimentConfig::transfer_test_n);
    add_i64("transfer.domain", &ExperimentConfig::transfer_domain);
    add_i64("transfer.pair_folds", &ExperimentConfig::transfer_pair_folds);
    add_i64("transfer.pairs_n", &ExperimentConfig::transfer_pairs_n);

    add_i64("select.epochs", &ExperimentConfig::select_epochs);

    add_list("sweep.dims", &ExperimentConfig::sweep_dims);
    add_i64("sweep.epochs", &ExperimentConfig::sweep_epochs);
    add_i64("posthoc.epochs", &ExperimentConfig::posthoc_epochs);
    return b;
}

void apply_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value,
              const std::vector<Binding>& reg) {
    for (const Binding& b : reg) {
        if (b.key == key) {
            try {
                b.set(cfg, value);
            } catch (const std::exception& e) {
                throw std::invalid_argument("config: bad value for '" + key + "': " + value);
            }
            return;
        }
    }
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream os;
    for (const Binding& b : bindings())
        if (b.in_digest) os << b.key << " = " << b.get(*this) << "\n";
    return os.str();
}

std::string ExperimentConfig::digest() const {
    const std::string text = canonical_text();
    const uint64_t h = fnv1a64(text);
    std::ostringstream os;
    os << std::hex;
    for (int i = 15; i >= 0; --i) os << ((h >> (4 * i)) & 0xf);
    return os.str();
}

void ExperimentConfig::validate() const {
    if (pool_n < 16) throw std::invalid_argument("config: pool.n too small");
    if (pool_val_fraction <= 0.0 || pool_val_fraction >= 0.9)
        throw std::invalid_argument("config: pool.val_fraction out of range");
    if (pool_domains.empty()) throw std::invalid_argument("config: pool.domains empty");
    for (int64_t d : pool_domains)
        if (d < 0 || d >= world.n_domains)
            throw std::invalid_argument("config: pool.domains out of range");
    if (expert_domain < 0 || expert_domain >= world.n_domains)
        throw std::invalid_argument("config: experts.domain out of range");
    if (transfer_domain < 0 || transfer_domain >= world.n_domains)
        throw std::invalid_argument("config: transfer.domain out of range");
    if (fusion_layers < 1) throw std::invalid_argument("config: fusion.layers must be >= 1");
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir empty");
    for (size_t i = 0; i + 1 < sweep_dims.size(); ++i)
        if (sweep_dims[i] >= sweep_dims[i + 1])
            throw std::invalid_argument("config: sweep.dims must be ascending and unique");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    const std::vector<Binding> reg = bindings();
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key = value");
        apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), reg);
    }
    for (const std::string& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: override is not key=value: " + ov);
        apply_kv(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)), reg);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file,
                             const std::vector<std::string>& overrides) {
    std::string text;
    if (!file.empty()) {
        std::ifstream is(file);
        if (!is) throw std::runtime_error("config: cannot open " + file.string());
        std::ostringstream buf;
        buf << is.rdbuf();
        text = buf.str();
    }
    return parse_config_text(text, overrides);
}

std::vector<TaskSpec> default_eval_tasks(const WorldConfig& world) {
    // small_train marks the scarce-data tasks; the rest use the full task
    // training budget
    TaskSpec category{"category7", TaskKind::classification, LabelSource::class_label,
                      world.n_classes, MetricKind::accuracy};
    category.small_train = true;
    TaskSpec flag{"flag", TaskKind::classification, LabelSource::attr_bit, 2,
                  MetricKind::accuracy};
    flag.attr_index = 0;
    TaskSpec age_reg{"age_reg", TaskKind::regression, LabelSource::age, 1, MetricKind::mae,
                     0.0, 100.0};
    age_reg.small_train = true;
    TaskSpec age_cls{"age_cls", TaskKind::classification, LabelSource::age_bucket, 7,
                     MetricKind::accuracy};
    TaskSpec attrs{"attrs", TaskKind::binary_attrs, LabelSource::attrs, world.n_attrs,
                   MetricKind::error_rate};
    TaskSpec race{"race5", TaskKind::classification, LabelSource::identity_bucket, 5,
                  MetricKind::accuracy};
    race.id_stride = std::max<int64_t>(1, world.n_identities / 5);
    TaskSpec pairs{"id_pairs", TaskKind::identity_pairs, LabelSource::identity, 2,
                   MetricKind::pair_accuracy};
    return {category, flag, age_reg, age_cls, attrs, race, pairs};
}

}  // namespace omnifuse
