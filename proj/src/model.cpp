#include "locl/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace locl {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

std::string to_string(EncoderKind k) { return k == EncoderKind::Conv ? "conv" : "dense"; }

EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "conv") return EncoderKind::Conv;
    if (s == "dense") return EncoderKind::Dense;
    throw LoclError("unknown encoder kind: " + s);
}

void TrainConfig::validate() const {
    if (batch_size == 0 || latent_dim == 0 || max_epochs == 0 || patience == 0)
        throw LoclError("config: counts must be positive");
    if (mask_p < 0.0 || mask_p >= 1.0) throw LoclError("config: mask_p must lie in [0, 1)");
    if (overlap_fraction < 0.0 || overlap_fraction > 0.5)
        throw LoclError("config: overlap_fraction must lie in [0, 0.5]");
    if (kernel_size % 2 == 0) throw LoclError("config: kernel_size must be odd");
    if (channel_plan.size() != 3) throw LoclError("config: channel_plan needs 3 entries");
    if (learning_rate <= 0.0) throw LoclError("config: learning_rate must be positive");
}

std::size_t padded_width_for(std::size_t width, EncoderKind kind) {
    if (kind == EncoderKind::Dense) return width;
    return ((width + 7) / 8) * 8;  // three pool-by-2 stages
}

Branch make_branch(std::size_t width, const TrainConfig& cfg) {
    Branch b;
    b.width = width;
    b.kind = cfg.encoder_kind;
    b.padded_width = padded_width_for(width, cfg.encoder_kind);

    const std::size_t d = cfg.latent_dim;
    if (cfg.encoder_kind == EncoderKind::Conv) {
        const auto& ch = cfg.channel_plan;
        const std::size_t k = cfg.kernel_size;
        const std::size_t bottom = b.padded_width / 8;

        b.encoder.add(std::make_unique<Conv1d>(1, ch[0], k));
        b.encoder.add(std::make_unique<LeakyRelu>(0.01));
        b.encoder.add(std::make_unique<MaxPool1d>(2));
        b.encoder.add(std::make_unique<Conv1d>(ch[0], ch[1], k));
        b.encoder.add(std::make_unique<LeakyRelu>(0.01));
        b.encoder.add(std::make_unique<MaxPool1d>(2));
        b.encoder.add(std::make_unique<Conv1d>(ch[1], ch[2], k));
        b.encoder.add(std::make_unique<LeakyRelu>(0.01));
        b.encoder.add(std::make_unique<MaxPool1d>(2));
        b.encoder.add(std::make_unique<Flatten>());
        b.encoder.add(std::make_unique<Dense>(ch[2] * bottom, d));

        b.decoder.add(std::make_unique<Dense>(d, ch[2] * bottom));
        b.decoder.add(std::make_unique<Reshape>(std::vector<std::size_t>{ch[2], bottom}));
        b.decoder.add(std::make_unique<Upsample1d>(2));
        b.decoder.add(std::make_unique<Conv1d>(ch[2], ch[1], k));
        b.decoder.add(std::make_unique<LeakyRelu>(0.01));
        b.decoder.add(std::make_unique<Upsample1d>(2));
        b.decoder.add(std::make_unique<Conv1d>(ch[1], ch[0], k));
        b.decoder.add(std::make_unique<LeakyRelu>(0.01));
        b.decoder.add(std::make_unique<Upsample1d>(2));
        b.decoder.add(std::make_unique<Conv1d>(ch[0], ch[0], k));
        b.decoder.add(std::make_unique<LeakyRelu>(0.01));
        b.decoder.add(std::make_unique<Conv1d>(ch[0], 1, k));  // linear output
    } else {
        const std::size_t h1 = 256, h2 = 128;
        b.encoder.add(std::make_unique<Dense>(width, h1));
        b.encoder.add(std::make_unique<LeakyRelu>(0.01));
        b.encoder.add(std::make_unique<Dense>(h1, h2));
        b.encoder.add(std::make_unique<LeakyRelu>(0.01));
        b.encoder.add(std::make_unique<Dense>(h2, d));

        b.decoder.add(std::make_unique<Dense>(d, h2));
        b.decoder.add(std::make_unique<LeakyRelu>(0.01));
        b.decoder.add(std::make_unique<Dense>(h2, h1));
        b.decoder.add(std::make_unique<LeakyRelu>(0.01));
        b.decoder.add(std::make_unique<Dense>(h1, width));  // linear output
    }
    return b;
}

Tensor Branch::to_input(const Matrix& batch) const {
    if (batch.cols != width) throw LoclError("branch input width mismatch");
    const std::size_t n = batch.rows;
    if (kind == EncoderKind::Dense) {
        Tensor t({n, width});
        t.values = batch.data;
        return t;
    }
    Tensor t({n, 1, padded_width});
    for (std::size_t r = 0; r < n; ++r)
        std::memcpy(&t.values[r * padded_width], &batch.data[r * width], width * sizeof(double));
    return t;
}

namespace {

Matrix tensor_to_matrix(const Tensor& t) {
    const std::size_t n = t.shape[0];
    Matrix m(n, t.numel() / n);
    m.data = t.values;
    return m;
}

}  // namespace

Matrix Branch::embed(const Matrix& batch) {
    return tensor_to_matrix(encoder.forward(to_input(batch)));
}

void Branch::forward(const Matrix& batch, Matrix& z, Matrix& x_hat) {
    Tensor zt = encoder.forward(to_input(batch));
    z = tensor_to_matrix(zt);
    x_hat = tensor_to_matrix(decoder.forward(zt));
}

void Branch::backward(const Matrix& grad_z, const Matrix& grad_xhat) {
    const std::size_t n = grad_z.rows;
    Tensor gxh;
    if (kind == EncoderKind::Dense) {
        gxh = Tensor({n, width});
    } else {
        gxh = Tensor({n, 1, padded_width});
    }
    gxh.values = grad_xhat.data;
    Tensor gz_from_decoder = decoder.backward(gxh);

    Tensor gz({n, grad_z.cols});
    gz.values = grad_z.data;
    for (std::size_t i = 0; i < gz.values.size(); ++i)
        gz.values[i] += gz_from_decoder.values[i];
    encoder.backward(gz);
}

std::vector<ParamRef> Branch::params() {
    auto out = encoder.params();
    for (auto& p : decoder.params()) out.push_back(p);
    return out;
}

std::vector<ParamRef> TwinModel::params() {
    auto out = branch1.params();
    for (auto& p : branch2.params()) out.push_back(p);
    return out;
}

namespace {

constexpr char kMagic[4] = {'L', 'O', 'C', 'L'};
constexpr std::uint32_t kVersion = 1;

json config_to_json(const TrainConfig& c) {
    return json{{"batch_size", c.batch_size},
                {"latent_dim", c.latent_dim},
                {"alpha", c.alpha},
                {"lambda", c.lambda},
                {"mask_p", c.mask_p},
                {"learning_rate", c.learning_rate},
                {"max_epochs", c.max_epochs},
                {"patience", c.patience},
                {"kernel_size", c.kernel_size},
                {"channel_plan", c.channel_plan},
                {"overlap_fraction", c.overlap_fraction},
                {"ordering_variant", to_string(c.ordering_variant)},
                {"encoder_kind", to_string(c.encoder_kind)},
                {"corrupt_mode", c.corrupt_mode == CorruptMode::MarginalShuffle ? "marginal" : "zero"},
                {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.batch_size = j.at("batch_size");
    c.latent_dim = j.at("latent_dim");
    c.alpha = j.at("alpha");
    c.lambda = j.at("lambda");
    c.mask_p = j.at("mask_p");
    c.learning_rate = j.at("learning_rate");
    c.max_epochs = j.at("max_epochs");
    c.patience = j.at("patience");
    c.kernel_size = j.at("kernel_size");
    c.channel_plan = j.at("channel_plan").get<std::vector<std::size_t>>();
    c.overlap_fraction = j.at("overlap_fraction");
    c.ordering_variant = ordering_variant_from_string(j.at("ordering_variant"));
    c.encoder_kind = encoder_kind_from_string(j.at("encoder_kind"));
    c.corrupt_mode = j.at("corrupt_mode") == "marginal" ? CorruptMode::MarginalShuffle
                                                        : CorruptMode::ZeroFill;
    c.seed = j.at("seed");
    return c;
}

json ordering_to_json(const FeatureOrdering& o) {
    json edges = json::array();
    for (const auto& e : o.mst_edges) edges.push_back({e.i, e.j, e.weight});
    return json{{"variant", to_string(o.variant)}, {"permutation", o.permutation}, {"mst_edges", edges}};
}

FeatureOrdering ordering_from_json(const json& j) {
    FeatureOrdering o;
    o.variant = ordering_variant_from_string(j.at("variant"));
    o.permutation = j.at("permutation").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("mst_edges"))
        o.mst_edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<double>()});
    return o;
}

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_container(const std::string& path, const json& manifest,
                     const std::vector<const std::vector<double>*>& arrays) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoclError("cannot write: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    const std::string m = manifest.dump();
    write_u64(out, m.size());
    out.write(m.data(), static_cast<std::streamsize>(m.size()));
    for (const auto* a : arrays)
        out.write(reinterpret_cast<const char*>(a->data()),
                  static_cast<std::streamsize>(a->size() * sizeof(double)));
    if (!out) throw LoclError("write failed: " + path);
}

json read_container(const std::string& path, std::ifstream& in) {
    in.open(path, std::ios::binary);
    if (!in) throw LoclError("cannot read: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw LoclError("bad magic in " + path);
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) throw LoclError("unsupported container version in " + path);
    const std::uint64_t len = read_u64(in);
    std::string m(len, '\0');
    in.read(m.data(), static_cast<std::streamsize>(len));
    if (!in) throw LoclError("truncated manifest in " + path);
    return json::parse(m);
}

void read_array(std::istream& in, std::vector<double>& a, const std::string& path) {
    in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!in) throw LoclError("truncated weight data in " + path);
}

json network_manifest(Sequential& net) {
    json layers = json::array();
    for (Layer* l : net.layers()) {
        const LayerConfig c = l->config();
        json shapes = json::array();
        for (auto& p : l->params()) shapes.push_back(p.w->size());
        layers.push_back({{"kind", l->kind()},
                          {"in_channels", c.in_channels},
                          {"out_channels", c.out_channels},
                          {"kernel", c.kernel},
                          {"in", c.in},
                          {"out", c.out},
                          {"factor", c.factor},
                          {"slope", c.slope},
                          {"target_shape", c.target_shape},
                          {"param_sizes", shapes}});
    }
    return layers;
}

void check_network_manifest(Sequential& net, const json& layers, const std::string& path) {
    auto ls = net.layers();
    if (layers.size() != ls.size()) throw LoclError("layer count mismatch in " + path);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        if (layers[i].at("kind") != ls[i]->kind())
            throw LoclError("layer kind mismatch in " + path);
        auto ps = ls[i]->params();
        const auto& sizes = layers[i].at("param_sizes");
        if (sizes.size() != ps.size()) throw LoclError("parameter count mismatch in " + path);
        for (std::size_t p = 0; p < ps.size(); ++p)
            if (sizes[p].get<std::size_t>() != ps[p].w->size())
                throw LoclError("parameter shape mismatch in " + path);
    }
}

}  // namespace

void save_checkpoint(const TwinModel& model, const std::string& path) {
    TwinModel& m = const_cast<TwinModel&>(model);
    json manifest{{"type", "checkpoint"},
                  {"config", config_to_json(m.config)},
                  {"ordering", ordering_to_json(m.ordering)},
                  {"split",
                   {{"subset1", m.split.subset1},
                    {"subset2", m.split.subset2},
                    {"overlap_fraction", m.split.overlap_fraction}}},
                  {"dataset_fingerprint", hex64(m.dataset_fingerprint)},
                  {"networks",
                   {{"encoder1", network_manifest(m.branch1.encoder)},
                    {"decoder1", network_manifest(m.branch1.decoder)},
                    {"encoder2", network_manifest(m.branch2.encoder)},
                    {"decoder2", network_manifest(m.branch2.decoder)}}},
                  {"widths", {m.branch1.width, m.branch2.width}}};

    std::vector<const std::vector<double>*> arrays;
    for (auto& p : m.params()) arrays.push_back(p.w);
    write_container(path, manifest, arrays);
}

TwinModel load_checkpoint(const std::string& path) {
    std::ifstream in;
    json manifest = read_container(path, in);
    if (manifest.at("type") != "checkpoint") throw LoclError("not a checkpoint: " + path);

    TwinModel m;
    m.config = config_from_json(manifest.at("config"));
    m.ordering = ordering_from_json(manifest.at("ordering"));
    m.split.subset1 = manifest.at("split").at("subset1").get<std::vector<std::size_t>>();
    m.split.subset2 = manifest.at("split").at("subset2").get<std::vector<std::size_t>>();
    m.split.overlap_fraction = manifest.at("split").at("overlap_fraction");
    m.dataset_fingerprint =
        std::stoull(manifest.at("dataset_fingerprint").get<std::string>(), nullptr, 16);

    m.branch1 = make_branch(manifest.at("widths")[0].get<std::size_t>(), m.config);
    m.branch2 = make_branch(manifest.at("widths")[1].get<std::size_t>(), m.config);

    const auto& nets = manifest.at("networks");
    check_network_manifest(m.branch1.encoder, nets.at("encoder1"), path);
    check_network_manifest(m.branch1.decoder, nets.at("decoder1"), path);
    check_network_manifest(m.branch2.encoder, nets.at("encoder2"), path);
    check_network_manifest(m.branch2.decoder, nets.at("decoder2"), path);

    for (auto& p : m.params()) read_array(in, *p.w, path);
    return m;
}

void save_embeddings(const Matrix& Z, const std::vector<std::size_t>& row_ids,
                     std::uint64_t dataset_fingerprint, const std::string& path) {
    if (row_ids.size() != Z.rows) throw LoclError("save_embeddings: row_ids length mismatch");
    json manifest{{"type", "embeddings"},
                  {"rows", Z.rows},
                  {"cols", Z.cols},
                  {"dataset_fingerprint", hex64(dataset_fingerprint)}};
    write_container(path, manifest, {&Z.data});

    // row-id sidecar
    json side{{"row_ids", row_ids}};
    std::ofstream s(path + ".rows.json");
    if (!s) throw LoclError("cannot write: " + path + ".rows.json");
    s << side.dump(2) << "\n";
}

Matrix load_embeddings(const std::string& path, std::vector<std::size_t>* row_ids,
                       std::uint64_t* dataset_fingerprint) {
    std::ifstream in;
    json manifest = read_container(path, in);
    if (manifest.at("type") != "embeddings") throw LoclError("not an embeddings file: " + path);
    Matrix Z(manifest.at("rows").get<std::size_t>(), manifest.at("cols").get<std::size_t>());
    read_array(in, Z.data, path);
    if (dataset_fingerprint)
        *dataset_fingerprint =
            std::stoull(manifest.at("dataset_fingerprint").get<std::string>(), nullptr, 16);
    if (row_ids) {
        std::ifstream s(path + ".rows.json");
        if (!s) throw LoclError("missing row-id sidecar for " + path);
        json side = json::parse(s);
        *row_ids = side.at("row_ids").get<std::vector<std::size_t>>();
    }
    return Z;
}

}  // namespace locl
