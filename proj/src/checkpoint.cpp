#include "omnifuse/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace omnifuse {

using nlohmann::json;

void Checkpoint::add_tensor(const std::string& name, Tensor t) {
    tensors.emplace_back(name, std::move(t));
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw CheckpointException(CheckpointError::bad_content, "missing tensor: " + name);
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

double Checkpoint::scalar(const std::string& name) const {
    auto it = scalars.find(name);
    if (it == scalars.end())
        throw CheckpointException(CheckpointError::bad_content, "missing scalar: " + name);
    return it->second;
}

const std::string& Checkpoint::str(const std::string& name) const {
    auto it = strings.find(name);
    if (it == strings.end())
        throw CheckpointException(CheckpointError::bad_content, "missing string: " + name);
    return it->second;
}

// ---------------------------------------------------------------------------
// binary IO (explicit little-endian)
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'O', 'M', 'N', 'F'};

void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(os, b, 4);
}

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(os, b, 8);
}

void write_f64(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    write_u64(os, v);
}

void read_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n)
        throw CheckpointException(CheckpointError::truncated, "checkpoint: truncated payload");
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    read_bytes(is, b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    read_bytes(is, b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& is) {
    uint64_t v = read_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    write_bytes(os, s.data(), s.size());
}

std::string read_string(std::istream& is) {
    const uint32_t n = read_u32(is);
    std::string s(n, '\0');
    if (n) read_bytes(is, s.data(), n);
    return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw CheckpointException(CheckpointError::io_failure,
                                  "checkpoint: cannot open for write: " + path.string());
    json manifest = {
        {"format_version", Checkpoint::kVersion},
        {"content_type", ck.content_type},
        {"seed", ck.seed},
        {"config_digest", ck.config_digest},
        {"scalars", ck.scalars},
        {"strings", ck.strings},
    };
    const std::string mtext = manifest.dump();

    write_bytes(os, kMagic, 4);
    write_u32(os, Checkpoint::kVersion);
    write_string(os, mtext);
    write_u32(os, static_cast<uint32_t>(ck.tensors.size()));
    for (const auto& [name, t] : ck.tensors) {
        write_string(os, name);
        write_u32(os, static_cast<uint32_t>(t.shape.size()));
        for (int64_t d : t.shape) write_u64(os, static_cast<uint64_t>(d));
        for (double v : t.data) write_f64(os, v);
    }
    os.flush();
    if (!os)
        throw CheckpointException(CheckpointError::io_failure,
                                  "checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expected_digest) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw CheckpointException(CheckpointError::io_failure,
                                  "checkpoint: cannot open: " + path.string());
    char magic[4];
    read_bytes(is, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointException(CheckpointError::bad_magic, "checkpoint: bad magic");
    const uint32_t version = read_u32(is);
    if (version != Checkpoint::kVersion)
        throw CheckpointException(CheckpointError::unsupported_version,
                                  "checkpoint: unsupported version " + std::to_string(version));
    Checkpoint ck;
    json manifest;
    try {
        manifest = json::parse(read_string(is));
    } catch (const json::exception& e) {
        throw CheckpointException(CheckpointError::bad_content,
                                  std::string("checkpoint: bad manifest: ") + e.what());
    }
    ck.content_type = manifest.value("content_type", "");
    ck.seed = manifest.value("seed", uint64_t{0});
    ck.config_digest = manifest.value("config_digest", "");
    if (manifest.contains("scalars"))
        ck.scalars = manifest["scalars"].get<std::map<std::string, double>>();
    if (manifest.contains("strings"))
        ck.strings = manifest["strings"].get<std::map<std::string, std::string>>();

    if (!expected_digest.empty() && ck.config_digest != expected_digest)
        throw CheckpointException(CheckpointError::digest_mismatch,
                                  "checkpoint: config digest mismatch (have " + ck.config_digest +
                                      ", expected " + expected_digest + ")");

    const uint32_t count = read_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(is);
        const uint32_t ndim = read_u32(is);
        std::vector<int64_t> shape;
        int64_t numel = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            shape.push_back(static_cast<int64_t>(read_u64(is)));
            numel *= shape.back();
        }
        std::vector<double> data(static_cast<size_t>(numel));
        for (double& v : data) v = read_f64(is);
        ck.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return ck;
}

// ---------------------------------------------------------------------------
// network codec
// ---------------------------------------------------------------------------

void CheckpointCodec::put_net(Checkpoint& ck, const std::string& prefix,
                              const Sequential& net) {
    Sequential& mnet = const_cast<Sequential&>(net);
    json arch = json::array();
    for (size_t i = 0; i < mnet.size(); ++i) {
        const std::string lp = prefix + ".l" + std::to_string(i);
        Layer& layer = mnet.layer(i);
        if (auto* d = dynamic_cast<DenseLayer*>(&layer)) {
            arch.push_back({{"type", "dense"},
                            {"in", d->in_dim()},
                            {"out", d->out_dim()},
                            {"act", activation_to_string(d->activation())},
                            {"bn", d->has_bn()}});
            ck.add_tensor(lp + ".W", d->weight().value);
            ck.add_tensor(lp + ".b", d->bias().value);
            if (d->has_bn()) {
                ck.add_tensor(lp + ".bn.gamma", d->bn().gamma.value);
                ck.add_tensor(lp + ".bn.beta", d->bn().beta.value);
                ck.add_tensor(lp + ".bn.rmean", d->bn().running_mean);
                ck.add_tensor(lp + ".bn.rvar", d->bn().running_var);
            }
        } else if (auto* c = dynamic_cast<Conv2dLayer*>(&layer)) {
            arch.push_back({{"type", "conv"},
                            {"in_c", c->in_channels()},
                            {"h", c->height()},
                            {"w", c->width()},
                            {"out_c", c->out_channels()},
                            {"act", activation_to_string(c->activation())}});
            ck.add_tensor(lp + ".W", c->weight().value);
            ck.add_tensor(lp + ".b", c->bias().value);
        } else if (auto* p = dynamic_cast<AvgPool2dLayer*>(&layer)) {
            arch.push_back({{"type", "pool"},
                            {"c", p->channels()},
                            {"h", p->height()},
                            {"w", p->width()}});
        } else {
            throw CheckpointException(CheckpointError::bad_content,
                                      "put_net: unknown layer type");
        }
    }
    ck.strings[prefix + ".arch"] = arch.dump();
}

Sequential CheckpointCodec::get_net(const Checkpoint& ck, const std::string& prefix) {
    json arch;
    try {
        arch = json::parse(ck.str(prefix + ".arch"));
    } catch (const json::exception& e) {
        throw CheckpointException(CheckpointError::bad_content,
                                  std::string("get_net: bad arch: ") + e.what());
    }
    Sequential net;
    Rng scratch(0);
    for (size_t i = 0; i < arch.size(); ++i) {
        const json& l = arch[i];
        const std::string lp = prefix + ".l" + std::to_string(i);
        const std::string type = l.at("type").get<std::string>();
        if (type == "dense") {
            auto d = std::make_unique<DenseLayer>(
                l.at("in").get<int64_t>(), l.at("out").get<int64_t>(),
                activation_from_string(l.at("act").get<std::string>()),
                l.at("bn").get<bool>(), scratch, lp);
            d->weight().value = ck.tensor(lp + ".W");
            d->bias().value = ck.tensor(lp + ".b");
            if (d->has_bn()) {
                d->bn().gamma.value = ck.tensor(lp + ".bn.gamma");
                d->bn().beta.value = ck.tensor(lp + ".bn.beta");
                d->bn().running_mean = ck.tensor(lp + ".bn.rmean");
                d->bn().running_var = ck.tensor(lp + ".bn.rvar");
            }
            net.add(std::move(d));
        } else if (type == "conv") {
            auto c = std::make_unique<Conv2dLayer>(
                l.at("in_c").get<int64_t>(), l.at("h").get<int64_t>(),
                l.at("w").get<int64_t>(), l.at("out_c").get<int64_t>(),
                activation_from_string(l.at("act").get<std::string>()), scratch, lp);
            c->weight().value = ck.tensor(lp + ".W");
            c->bias().value = ck.tensor(lp + ".b");
            net.add(std::move(c));
        } else if (type == "pool") {
            net.add(std::make_unique<AvgPool2dLayer>(l.at("c").get<int64_t>(),
                                                     l.at("h").get<int64_t>(),
                                                     l.at("w").get<int64_t>()));
        } else {
            throw CheckpointException(CheckpointError::bad_content,
                                      "get_net: unknown layer type " + type);
        }
    }
    return net;
}

// ---------------------------------------------------------------------------
// world codec
// ---------------------------------------------------------------------------

Checkpoint CheckpointCodec::save_world(const World& world) {
    Checkpoint ck;
    ck.content_type = "world";
    ck.seed = world.seed();
    const WorldConfig& c = world.config();
    ck.scalars = {{"n_classes", static_cast<double>(c.n_classes)},
                  {"n_attrs", static_cast<double>(c.n_attrs)},
                  {"nuisance_dim", static_cast<double>(c.nuisance_dim)},
                  {"obs_dim", static_cast<double>(c.obs_dim)},
                  {"n_domains", static_cast<double>(c.n_domains)},
                  {"noise_sigma", c.noise_sigma},
                  {"n_identities", static_cast<double>(c.n_identities)},
                  {"domain_shift", c.domain_shift},
                  {"id_code_dim", static_cast<double>(c.id_code_dim)},
                  {"render_hidden", static_cast<double>(c.render_hidden)},
                  {"class_scale", c.class_scale},
                  {"age_scale", c.age_scale},
                  {"attr_scale", c.attr_scale},
                  {"class_flip_prob", c.class_flip_prob},
                  {"attr_flip_prob", c.attr_flip_prob},
                  {"age_jitter", c.age_jitter}};
    ck.add_tensor("identity_codes", world.identity_codes());
    ck.add_tensor("identity_base_age", world.identity_base_age());
    ck.add_tensor("identity_base_attrs", world.identity_base_attrs());
    for (size_t d = 0; d < world.render_maps().size(); ++d) {
        const RenderMap& m = world.render_maps()[d];
        const std::string p = "domain" + std::to_string(d);
        ck.add_tensor(p + ".a1", m.a1);
        ck.add_tensor(p + ".b1", m.b1);
        ck.add_tensor(p + ".a2", m.a2);
        ck.add_tensor(p + ".b2", m.b2);
    }
    return ck;
}

World CheckpointCodec::load_world(const Checkpoint& ck) {
    WorldConfig c;
    c.n_classes = static_cast<int64_t>(ck.scalar("n_classes"));
    c.n_attrs = static_cast<int64_t>(ck.scalar("n_attrs"));
    c.nuisance_dim = static_cast<int64_t>(ck.scalar("nuisance_dim"));
    c.obs_dim = static_cast<int64_t>(ck.scalar("obs_dim"));
    c.n_domains = static_cast<int64_t>(ck.scalar("n_domains"));
    c.noise_sigma = ck.scalar("noise_sigma");
    c.n_identities = static_cast<int64_t>(ck.scalar("n_identities"));
    c.domain_shift = ck.scalar("domain_shift");
    c.id_code_dim = static_cast<int64_t>(ck.scalar("id_code_dim"));
    c.render_hidden = static_cast<int64_t>(ck.scalar("render_hidden"));
    c.class_scale = ck.scalar("class_scale");
    c.age_scale = ck.scalar("age_scale");
    c.attr_scale = ck.scalar("attr_scale");
    c.class_flip_prob = ck.scalar("class_flip_prob");
    c.attr_flip_prob = ck.scalar("attr_flip_prob");
    c.age_jitter = ck.scalar("age_jitter");
    std::vector<RenderMap> maps;
    for (int64_t d = 0; d < c.n_domains; ++d) {
        const std::string p = "domain" + std::to_string(d);
        RenderMap m;
        m.a1 = ck.tensor(p + ".a1");
        m.b1 = ck.tensor(p + ".b1");
        m.a2 = ck.tensor(p + ".a2");
        m.b2 = ck.tensor(p + ".b2");
        m.noise_sigma = c.noise_sigma;
        m.domain_id = d;
        maps.push_back(std::move(m));
    }
    return World(c, ck.seed, std::move(maps), ck.tensor("identity_codes"),
                 ck.tensor("identity_base_age"), ck.tensor("identity_base_attrs"));
}

// ---------------------------------------------------------------------------
// task / expert codecs
// ---------------------------------------------------------------------------

namespace {

json task_to_json(const TaskSpec& t) {
    return {{"name", t.name},
            {"kind", task_kind_to_string(t.kind)},
            {"source", label_source_to_string(t.source)},
            {"output_dim", t.output_dim},
            {"metric", metric_kind_to_string(t.metric)},
            {"label_min", t.label_min},
            {"label_max", t.label_max},
            {"function_seed", t.function_seed},
            {"attr_index", t.attr_index},
            {"id_stride", t.id_stride},
            {"small_train", t.small_train}};
}

TaskSpec task_from_json(const json& j) {
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    t.kind = task_kind_from_string(j.at("kind").get<std::string>());
    t.source = label_source_from_string(j.at("source").get<std::string>());
    t.output_dim = j.at("output_dim").get<int64_t>();
    t.metric = metric_kind_from_string(j.at("metric").get<std::string>());
    t.label_min = j.at("label_min").get<double>();
    t.label_max = j.at("label_max").get<double>();
    t.function_seed = j.at("function_seed").get<uint64_t>();
    t.attr_index = j.at("attr_index").get<int64_t>();
    t.id_stride = j.at("id_stride").get<int64_t>();
    t.small_train = j.at("small_train").get<bool>();
    return t;
}

}  // namespace

Checkpoint CheckpointCodec::save_bank(const ExpertBank& bank) {
    Checkpoint ck;
    ck.content_type = "expert_bank";
    ck.scalars["n_experts"] = static_cast<double>(bank.size());
    for (size_t m = 0; m < bank.experts.size(); ++m) {
        const Expert& e = bank.experts[m];
        const std::string p = "expert" + std::to_string(m);
        json spec = {{"task", task_to_json(e.spec.task)},
                     {"embed_dim", e.spec.embed_dim},
                     {"hidden", e.spec.hidden},
                     {"train_n", e.spec.train_n},
                     {"val_n", e.spec.val_n},
                     {"epochs", e.spec.epochs},
                     {"batch", e.spec.batch},
                     {"lr", e.spec.lr}};
        ck.strings[p + ".spec"] = spec.dump();
        ck.scalars[p + ".val_metric"] = e.val_metric;
        ck.scalars[p + ".chance"] = e.chance;
        ck.scalars[p + ".weak"] = e.weak ? 1.0 : 0.0;
        put_net(ck, p + ".encoder", e.encoder);
        put_net(ck, p + ".head", e.head);
    }
    return ck;
}

ExpertBank CheckpointCodec::load_bank(const Checkpoint& ck) {
    ExpertBank bank;
    const auto n = static_cast<int64_t>(ck.scalar("n_experts"));
    for (int64_t m = 0; m < n; ++m) {
        const std::string p = "expert" + std::to_string(m);
        Expert e;
        json spec = json::parse(ck.str(p + ".spec"));
        e.spec.task = task_from_json(spec.at("task"));
        e.spec.embed_dim = spec.at("embed_dim").get<int64_t>();
        e.spec.hidden = spec.at("hidden").get<std::vector<int64_t>>();
        e.spec.train_n = spec.at("train_n").get<int64_t>();
        e.spec.val_n = spec.at("val_n").get<int64_t>();
        e.spec.epochs = spec.at("epochs").get<int64_t>();
        e.spec.batch = spec.at("batch").get<int64_t>();
        e.spec.lr = spec.at("lr").get<double>();
        e.val_metric = ck.scalar(p + ".val_metric");
        e.chance = ck.scalar(p + ".chance");
        e.weak = ck.scalar(p + ".weak") != 0.0;
        e.encoder = get_net(ck, p + ".encoder");
        e.head = get_net(ck, p + ".head");
        bank.experts.push_back(std::move(e));
    }
    return bank;
}

// ---------------------------------------------------------------------------
// dataset codec
// ---------------------------------------------------------------------------

Checkpoint CheckpointCodec::save_dataset(const SyntheticDataset& ds) {
    Checkpoint ck;
    ck.content_type = "dataset";
    ck.scalars = {{"has_labels", ds.has_labels ? 1.0 : 0.0},
                  {"domain_id", static_cast<double>(ds.domain_id)}};
    ck.strings["label_kind"] = task_kind_to_string(ds.label_kind);
    ck.add_tensor("x", ds.x);
    auto vec_to_tensor = [](const std::vector<double>& v) {
        return Tensor({static_cast<int64_t>(v.size())}, v);
    };
    if (!ds.class_labels.empty()) {
        std::vector<double> v(ds.class_labels.begin(), ds.class_labels.end());
        ck.add_tensor("class_labels", vec_to_tensor(v));
    }
    if (!ds.reg_labels.empty()) ck.add_tensor("reg_labels", vec_to_tensor(ds.reg_labels));
    if (ds.attr_labels.numel() > 0) ck.add_tensor("attr_labels", ds.attr_labels);
    if (!ds.pairs.empty()) {
        Tensor p = Tensor::matrix(static_cast<int64_t>(ds.pairs.size()), 3);
        for (size_t i = 0; i < ds.pairs.size(); ++i) {
            p.at(static_cast<int64_t>(i), 0) = static_cast<double>(ds.pairs[i].i);
            p.at(static_cast<int64_t>(i), 1) = static_cast<double>(ds.pairs[i].j);
            p.at(static_cast<int64_t>(i), 2) = ds.pairs[i].same ? 1.0 : 0.0;
        }
        ck.add_tensor("pairs", std::move(p));
    }
    if (!ds.missing.empty()) {
        std::vector<double> v(ds.missing.begin(), ds.missing.end());
        ck.add_tensor("missing", vec_to_tensor(v));
    }
    if (!ds.split_tags.empty()) {
        std::vector<double> v;
        v.reserve(ds.split_tags.size());
        for (Split s : ds.split_tags) v.push_back(static_cast<double>(s));
        ck.add_tensor("split_tags", vec_to_tensor(v));
    }
    return ck;
}

SyntheticDataset CheckpointCodec::load_dataset(const Checkpoint& ck) {
    SyntheticDataset ds;
    ds.has_labels = ck.scalar("has_labels") != 0.0;
    ds.domain_id = static_cast<int64_t>(ck.scalar("domain_id"));
    ds.label_kind = task_kind_from_string(ck.str("label_kind"));
    ds.x = ck.tensor("x");
    if (ck.has_tensor("class_labels"))
        for (double v : ck.tensor("class_labels").data)
            ds.class_labels.push_back(static_cast<int>(v));
    if (ck.has_tensor("reg_labels")) ds.reg_labels = ck.tensor("reg_labels").data;
    if (ck.has_tensor("attr_labels")) ds.attr_labels = ck.tensor("attr_labels");
    if (ck.has_tensor("pairs")) {
        const Tensor& p = ck.tensor("pairs");
        for (int64_t i = 0; i < p.rows(); ++i)
            ds.pairs.push_back({static_cast<int64_t>(p.at(i, 0)),
                                static_cast<int64_t>(p.at(i, 1)), p.at(i, 2) != 0.0});
    }
    if (ck.has_tensor("missing"))
        for (double v : ck.tensor("missing").data)
            ds.missing.push_back(static_cast<uint8_t>(v));
    if (ck.has_tensor("split_tags"))
        for (double v : ck.tensor("split_tags").data)
            ds.split_tags.push_back(static_cast<Split>(static_cast<int>(v)));
    return ds;
}

// ---------------------------------------------------------------------------
// rescaler / fusion codecs
// ---------------------------------------------------------------------------

void CheckpointCodec::put_rescaler(Checkpoint& ck, const std::string& prefix,
                                   const Rescaler& r) {
    json names = r.names();
    ck.strings[prefix + ".names"] = names.dump();
    for (size_t m = 0; m < r.mins().size(); ++m) {
        ck.add_tensor(prefix + ".min" + std::to_string(m), r.mins()[m]);
        ck.add_tensor(prefix + ".max" + std::to_string(m), r.maxs()[m]);
    }
}

Rescaler CheckpointCodec::get_rescaler(const Checkpoint& ck, const std::string& prefix) {
    json names = json::parse(ck.str(prefix + ".names"));
    std::vector<std::string> n = names.get<std::vector<std::string>>();
    std::vector<Tensor> mins, maxs;
    for (size_t m = 0; m < n.size(); ++m) {
        mins.push_back(ck.tensor(prefix + ".min" + std::to_string(m)));
        maxs.push_back(ck.tensor(prefix + ".max" + std::to_string(m)));
    }
    return Rescaler::from_state(std::move(mins), std::move(maxs), std::move(n));
}

void CheckpointCodec::put_fusion(Checkpoint& ck, const std::string& prefix,
                                 const FusionOperator& op) {
    ck.strings[prefix + ".kind"] = fusion_kind_to_string(op.kind_);
    json meta = {{"input_dim", op.input_dim_},
                 {"latent_dim", op.latent_dim_},
                 {"widths", op.widths_},
                 {"names", op.names_},
                 {"initial_val_loss", op.initial_val_loss_},
                 {"final_val_loss", op.final_val_loss_}};
    ck.strings[prefix + ".meta"] = meta.dump();
    switch (op.kind_) {
        case FusionKind::concat: break;
        case FusionKind::pca:
            ck.add_tensor(prefix + ".mean", op.mean_);
            ck.add_tensor(prefix + ".components", op.components_);
            ck.add_tensor(prefix + ".eigenvalues", op.eigenvalues_);
            break;
        case FusionKind::ae:
        case FusionKind::dae:
            put_net(ck, prefix + ".enc", op.encoder_);
            put_net(ck, prefix + ".dec", op.decoder_);
            break;
        case FusionKind::vae:
            if (op.encoder_.size()) put_net(ck, prefix + ".enc", op.encoder_);
            put_net(ck, prefix + ".mu", op.mu_head_);
            put_net(ck, prefix + ".logvar", op.logvar_head_);
            put_net(ck, prefix + ".dec", op.decoder_);
            break;
    }
}

FusionOperator CheckpointCodec::get_fusion(const Checkpoint& ck, const std::string& prefix) {
    FusionOperator op;
    op.kind_ = fusion_kind_from_string(ck.str(prefix + ".kind"));
    json meta = json::parse(ck.str(prefix + ".meta"));
    op.input_dim_ = meta.at("input_dim").get<int64_t>();
    op.latent_dim_ = meta.at("latent_dim").get<int64_t>();
    op.widths_ = meta.at("widths").get<std::vector<int64_t>>();
    op.names_ = meta.at("names").get<std::vector<std::string>>();
    op.initial_val_loss_ = meta.at("initial_val_loss").get<double>();
    op.final_val_loss_ = meta.at("final_val_loss").get<double>();
    switch (op.kind_) {
        case FusionKind::concat: break;
        case FusionKind::pca:
            op.mean_ = ck.tensor(prefix + ".mean");
            op.components_ = ck.tensor(prefix + ".components");
            op.eigenvalues_ = ck.tensor(prefix + ".eigenvalues");
            break;
        case FusionKind::ae:
        case FusionKind::dae:
            op.encoder_ = get_net(ck, prefix + ".enc");
            op.decoder_ = get_net(ck, prefix + ".dec");
            break;
        case FusionKind::vae:
            if (ck.strings.count(prefix + ".enc.arch")) op.encoder_ = get_net(ck, prefix + ".enc");
            op.mu_head_ = get_net(ck, prefix + ".mu");
            op.logvar_head_ = get_net(ck, prefix + ".logvar");
            op.decoder_ = get_net(ck, prefix + ".dec");
            break;
    }
    return op;
}

// ---------------------------------------------------------------------------
// student / mt codecs
// ---------------------------------------------------------------------------

Checkpoint CheckpointCodec::save_student(const StudentEncoder& s) {
    Checkpoint ck;
    ck.content_type = "student";
    put_net(ck, "net", s.net);
    return ck;
}

StudentEncoder CheckpointCodec::load_student(const Checkpoint& ck) {
    StudentEncoder s;
    s.net = get_net(ck, "net");
    return s;
}

Checkpoint CheckpointCodec::save_mt(const MtModel& mt) {
    Checkpoint ck;
    ck.content_type = "mt_model";
    put_net(ck, "backbone", mt.backbone);
    put_net(ck, "decoder", mt.decoder);
    return ck;
}

MtModel CheckpointCodec::load_mt(const Checkpoint& ck) {
    MtModel mt;
    mt.backbone = get_net(ck, "backbone");
    mt.decoder = get_net(ck, "decoder");
    return mt;
}

}  // namespace omnifuse
