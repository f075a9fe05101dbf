#include "dicelab/io.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "dicelab/errors.hpp"
#include "dicelab/rng.hpp"

namespace dicelab::io {

namespace {

constexpr uint32_t kCheckpointVersion = 1;

// thin binary stream wrappers; every short read is a hard data error so a
// truncated artifact can never be half-loaded
class BinWriter {
  public:
    explicit BinWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot open " + path.string() + " for writing");
    }
    void bytes(const void* p, size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw DataError("write failed on " + path_.string());
    }
    void u16(uint16_t v) { bytes(&v, sizeof v); }
    void u32(uint32_t v) { bytes(&v, sizeof v); }
    void u64(uint64_t v) { bytes(&v, sizeof v); }
    void i32(int32_t v) { bytes(&v, sizeof v); }
    void i64(int64_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void close() {
        out_.close();
        if (!out_) throw DataError("write failed on " + path_.string());
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class BinReader {
  public:
    explicit BinReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open " + path.string());
    }
    void bytes(void* p, size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n) throw DataError("truncated file " + path_.string());
    }
    uint16_t u16() { return get<uint16_t>(); }
    uint32_t u32() { return get<uint32_t>(); }
    uint64_t u64() { return get<uint64_t>(); }
    int32_t i32() { return get<int32_t>(); }
    int64_t i64() { return get<int64_t>(); }
    float f32() { return get<float>(); }
    double f64() { return get<double>(); }
    std::string str() {
        uint32_t n = u32();
        if (n > (1u << 20)) throw DataError("implausible string length in " + path_.string());
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }
    const std::filesystem::path& path() const { return path_; }

  private:
    template <typename T>
    T get() {
        T v;
        bytes(&v, sizeof v);
        return v;
    }
    std::filesystem::path path_;
    std::ifstream in_;
};

void expect_magic(BinReader& r, const char expect[4], const char* what) {
    char got[4];
    r.bytes(got, 4);
    if (std::memcmp(got, expect, 4) != 0)
        throw DataError(std::string(what) + " file " + r.path().string() + " has wrong magic");
}

std::filesystem::path temp_of(const std::filesystem::path& path) {
    std::filesystem::path t = path;
    t += ".tmp";
    return t;
}

void finalize(const std::filesystem::path& tmp, const std::filesystem::path& path) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("cannot move " + tmp.string() + " into place: " + ec.message());
}

void put_tensor(BinWriter& w, const Tensor& t) {
    w.u32(static_cast<uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) w.i32(t.dim(i));
    w.bytes(t.data(), static_cast<size_t>(t.numel()) * sizeof(float));
}

Tensor get_tensor(BinReader& r) {
    uint32_t rank = r.u32();
    if (rank > 4) throw DataError("implausible tensor rank in " + r.path().string());
    std::vector<int> shape(rank);
    int64_t numel = 1;
    for (auto& d : shape) {
        d = r.i32();
        if (d < 0 || d > (1 << 28)) throw DataError("implausible tensor dim in " + r.path().string());
        numel *= d;
    }
    Tensor t(shape);
    if (numel != t.numel()) throw DataError("tensor shape overflow in " + r.path().string());
    r.bytes(t.data(), static_cast<size_t>(numel) * sizeof(float));
    return t;
}

void put_named_tensors(BinWriter& w, const std::map<std::string, Tensor>& m) {
    w.u32(static_cast<uint32_t>(m.size()));
    for (const auto& [name, t] : m) {
        w.str(name);
        put_tensor(w, t);
    }
}

std::map<std::string, Tensor> get_named_tensors(BinReader& r) {
    uint32_t n = r.u32();
    if (n > 100000) throw DataError("implausible tensor count in " + r.path().string());
    std::map<std::string, Tensor> m;
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        m[name] = get_tensor(r);
    }
    return m;
}

void put_model_config(BinWriter& w, const ModelConfig& c) {
    w.i32(c.L);
    w.i32(c.D);
    w.i32(c.H);
    w.i32(c.F);
    w.i32(c.K);
    w.i32(c.mask_span);
    w.f64(c.mask_start_prob);
    w.u32(static_cast<uint32_t>(c.kind));
    w.u32(static_cast<uint32_t>(c.conv_channels.size()));
    for (int ch : c.conv_channels) w.i32(ch);
}

ModelConfig get_model_config(BinReader& r) {
    ModelConfig c;
    c.L = r.i32();
    c.D = r.i32();
    c.H = r.i32();
    c.F = r.i32();
    c.K = r.i32();
    c.mask_span = r.i32();
    c.mask_start_prob = r.f64();
    uint32_t kind = r.u32();
    if (kind > static_cast<uint32_t>(VariantKind::shallow))
        throw DataError("unknown model variant tag in " + r.path().string());
    c.kind = static_cast<VariantKind>(kind);
    uint32_t nch = r.u32();
    if (nch != 5) throw DataError("checkpoint must carry 5 conv layer widths");
    c.conv_channels.resize(nch);
    for (auto& ch : c.conv_channels) ch = r.i32();
    return c;
}

}  // namespace

uint64_t digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char buf[65536];
    uint64_t h = 0xcbf29ce484222325ull;
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
    }
    return h;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& model,
                     const std::map<std::string, Tensor>& params, const TrainerState* trainer) {
    const auto tmp = temp_of(path);
    {
        BinWriter w(tmp);
        w.bytes("DICE", 4);
        w.u32(kCheckpointVersion);
        put_model_config(w, model);
        put_named_tensors(w, params);
        if (trainer && trainer->present) {
            w.bytes("OPTS", 4);
            w.i64(trainer->step);
            w.u64(trainer->config_digest);
            put_named_tensors(w, trainer->m);
            put_named_tensors(w, trainer->v);
        }
        w.close();
    }
    finalize(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    BinReader r(path);
    expect_magic(r, "DICE", "checkpoint");
    uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
    Checkpoint c;
    c.model = get_model_config(r);
    c.params = get_named_tensors(r);
    if (!r.at_eof()) {
        expect_magic(r, "OPTS", "checkpoint trainer section");
        c.trainer.present = true;
        c.trainer.step = r.i64();
        c.trainer.config_digest = r.u64();
        c.trainer.m = get_named_tensors(r);
        c.trainer.v = get_named_tensors(r);
    }
    return c;
}

Encoder encoder_from_checkpoint(const Checkpoint& ckpt) {
    Encoder enc(ckpt.model);
    for (auto& [name, value] : enc.params()) {
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end()) throw DataError("checkpoint is missing parameter " + name);
        if (it->second.shape() != value.shape())
            throw DataError("checkpoint parameter " + name + " has shape " + it->second.shape_str() +
                            ", model expects " + value.shape_str());
        value = it->second;
    }
    return enc;
}

void save_feature_dump(const std::filesystem::path& path, const FeatureDump& dump) {
    if (dump.ids.size() != dump.feats.size()) throw ConfigError("feature dump ids and tensors must align");
    const auto tmp = temp_of(path);
    {
        BinWriter w(tmp);
        w.bytes("DICF", 4);
        w.u32(static_cast<uint32_t>(dump.dim));
        w.u32(static_cast<uint32_t>(dump.feats.size()));
        for (size_t i = 0; i < dump.feats.size(); ++i) {
            const Tensor& f = dump.feats[i];
            if (f.rank() != 2 || f.cols() != dump.dim)
                throw DimensionError("feature tensor " + f.shape_str() + " does not match dump dim " +
                                     std::to_string(dump.dim));
            w.u32(dump.ids[i]);
            w.u32(static_cast<uint32_t>(f.rows()));
            w.bytes(f.data(), static_cast<size_t>(f.numel()) * sizeof(float));
        }
        w.close();
    }
    finalize(tmp, path);
}

FeatureDump load_feature_dump(const std::filesystem::path& path) {
    BinReader r(path);
    expect_magic(r, "DICF", "feature dump");
    FeatureDump d;
    d.dim = static_cast<int>(r.u32());
    if (d.dim < 1 || d.dim > (1 << 20)) throw DataError("implausible feature dim in " + path.string());
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        d.ids.push_back(r.u32());
        uint32_t t = r.u32();
        if (t > (1u << 24)) throw DataError("implausible frame count in " + path.string());
        Tensor f({static_cast<int>(t), d.dim});
        r.bytes(f.data(), static_cast<size_t>(f.numel()) * sizeof(float));
        d.feats.push_back(std::move(f));
    }
    return d;
}

void save_codebook(const std::filesystem::path& path, const Codebook& cb) {
    const auto tmp = temp_of(path);
    {
        BinWriter w(tmp);
        w.bytes("DICB", 4);
        w.u32(static_cast<uint32_t>(cb.k));
        w.u32(static_cast<uint32_t>(cb.dim));
        w.bytes(cb.centroids.data(), static_cast<size_t>(cb.centroids.numel()) * sizeof(float));
        w.f64(cb.inertia);
        w.u64(cb.seed);
        w.close();
    }
    finalize(tmp, path);
}

Codebook load_codebook(const std::filesystem::path& path) {
    BinReader r(path);
    expect_magic(r, "DICB", "codebook");
    Codebook cb;
    cb.k = static_cast<int>(r.u32());
    cb.dim = static_cast<int>(r.u32());
    if (cb.k < 2 || cb.k > 65535 || cb.dim < 1 || cb.dim > (1 << 20))
        throw DataError("implausible codebook header in " + path.string());
    cb.centroids = Tensor({cb.k, cb.dim});
    r.bytes(cb.centroids.data(), static_cast<size_t>(cb.centroids.numel()) * sizeof(float));
    cb.inertia = r.f64();
    cb.seed = r.u64();
    return cb;
}

void save_hard_labels(const std::filesystem::path& path, const HardLabelFile& f) {
    if (f.ids.size() != f.labels.size()) throw ConfigError("hard label ids and sequences must align");
    const auto tmp = temp_of(path);
    {
        BinWriter w(tmp);
        w.bytes("DICL", 4);
        w.u32(static_cast<uint32_t>(f.ids.size()));
        for (size_t i = 0; i < f.ids.size(); ++i) {
            w.u32(f.ids[i]);
            w.u32(static_cast<uint32_t>(f.labels[i].size()));
            w.bytes(f.labels[i].data(), f.labels[i].size() * sizeof(uint16_t));
        }
        w.close();
    }
    finalize(tmp, path);
}

HardLabelFile load_hard_labels(const std::filesystem::path& path) {
    BinReader r(path);
    expect_magic(r, "DICL", "hard label");
    HardLabelFile f;
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        f.ids.push_back(r.u32());
        uint32_t t = r.u32();
        if (t > (1u << 24)) throw DataError("implausible frame count in " + path.string());
        std::vector<uint16_t> seq(t);
        r.bytes(seq.data(), seq.size() * sizeof(uint16_t));
        f.labels.push_back(std::move(seq));
    }
    return f;
}

void save_soft_labels(const std::filesystem::path& path, const SoftLabelFile& f) {
    if (f.ids.size() != f.probs.size()) throw ConfigError("soft label ids and tensors must align");
    const auto tmp = temp_of(path);
    {
        BinWriter w(tmp);
        w.bytes("DICS", 4);
        w.u32(static_cast<uint32_t>(f.ids.size()));
        for (size_t i = 0; i < f.ids.size(); ++i) {
            const Tensor& p = f.probs[i];
            if (p.rank() != 2 || p.cols() != f.k)
                throw DimensionError("soft label tensor " + p.shape_str() + " does not match K " +
                                     std::to_string(f.k));
            w.u32(f.ids[i]);
            w.u32(static_cast<uint32_t>(p.rows()));
            w.u32(static_cast<uint32_t>(f.k));
            w.bytes(p.data(), static_cast<size_t>(p.numel()) * sizeof(float));
        }
        w.close();
    }
    finalize(tmp, path);
}

SoftLabelFile load_soft_labels(const std::filesystem::path& path) {
    BinReader r(path);
    expect_magic(r, "DICS", "soft label");
    SoftLabelFile f;
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        f.ids.push_back(r.u32());
        uint32_t t = r.u32();
        uint32_t k = r.u32();
        if (t > (1u << 24) || k < 2 || k > 65535) throw DataError("implausible soft label header in " + path.string());
        if (f.k == 0) f.k = static_cast<int>(k);
        if (static_cast<int>(k) != f.k) throw DataError("inconsistent K across soft label records in " + path.string());
        Tensor p({static_cast<int>(t), f.k});
        r.bytes(p.data(), static_cast<size_t>(p.numel()) * sizeof(float));
        f.probs.push_back(std::move(p));
    }
    return f;
}

CorpusManifest generate_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

    CorpusManifest m;
    m.cfg = cfg;
    m.dir = out_dir;

    const auto wave_tmp = temp_of(m.wave_path());
    {
        BinWriter w(wave_tmp);
        uint64_t offset = 0;
        for (int u = 0; u < cfg.n_utts; ++u) {
            const uint64_t us = utt_seed_of(cfg.seed, u);
            Utterance utt = synth_utterance(us, speaker_of(u, cfg.speakers), cfg);
            CorpusManifest::Entry e;
            e.id = static_cast<uint32_t>(u);
            e.speaker = utt.speaker_id;
            e.seed = us;
            e.offset = offset;
            e.samples = static_cast<uint32_t>(utt.samples.size());
            e.frames = static_cast<uint32_t>(utt.frame_truth.size());
            w.bytes(utt.samples.data(), utt.samples.size() * sizeof(float));
            offset += utt.samples.size() * sizeof(float);
            m.utts.push_back(e);
        }
        w.close();
    }
    finalize(wave_tmp, m.wave_path());

    nlohmann::json j;
    j["version"] = 1;
    j["config"] = {{"n_utts", cfg.n_utts},   {"phonemes", cfg.phonemes},     {"speakers", cfg.speakers},
                   {"seed", cfg.seed},       {"min_frames", cfg.min_frames}, {"max_frames", cfg.max_frames}};
    auto& utts = j["utterances"] = nlohmann::json::array();
    for (const auto& e : m.utts)
        utts.push_back({{"id", e.id},
                        {"speaker", e.speaker},
                        {"seed", e.seed},
                        {"offset", e.offset},
                        {"samples", e.samples},
                        {"frames", e.frames}});

    const auto manifest_tmp = temp_of(m.manifest_path());
    {
        std::ofstream out(manifest_tmp);
        if (!out) throw DataError("cannot open " + manifest_tmp.string() + " for writing");
        out << j.dump(2) << "\n";
        if (!out) throw DataError("write failed on " + manifest_tmp.string());
    }
    finalize(manifest_tmp, m.manifest_path());
    return m;
}

CorpusManifest load_corpus_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open " + manifest_path.string());
    nlohmann::json j;
    try {
        in >> j;
        CorpusManifest m;
        m.dir = manifest_path.parent_path();
        const auto& c = j.at("config");
        m.cfg.n_utts = c.at("n_utts").get<int>();
        m.cfg.phonemes = c.at("phonemes").get<int>();
        m.cfg.speakers = c.at("speakers").get<int>();
        m.cfg.seed = c.at("seed").get<uint64_t>();
        m.cfg.min_frames = c.at("min_frames").get<int>();
        m.cfg.max_frames = c.at("max_frames").get<int>();
        for (const auto& e : j.at("utterances")) {
            CorpusManifest::Entry entry;
            entry.id = e.at("id").get<uint32_t>();
            entry.speaker = e.at("speaker").get<int>();
            entry.seed = e.at("seed").get<uint64_t>();
            entry.offset = e.at("offset").get<uint64_t>();
            entry.samples = e.at("samples").get<uint32_t>();
            entry.frames = e.at("frames").get<uint32_t>();
            m.utts.push_back(entry);
        }
        if (static_cast<int>(m.utts.size()) != m.cfg.n_utts)
            throw DataError("manifest lists " + std::to_string(m.utts.size()) + " utterances but config says " +
                            std::to_string(m.cfg.n_utts));
        m.cfg.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed corpus manifest " + manifest_path.string() + ": " + e.what());
    }
}

std::vector<float> load_waveform(const CorpusManifest& m, size_t utt_index) {
    if (utt_index >= m.utts.size()) throw DataError("utterance index out of range");
    const auto& e = m.utts[utt_index];
    std::ifstream in(m.wave_path(), std::ios::binary);
    if (!in) throw DataError("cannot open " + m.wave_path().string());
    in.seekg(static_cast<std::streamoff>(e.offset));
    std::vector<float> samples(e.samples);
    in.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(samples.size() * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != samples.size() * sizeof(float))
        throw DataError("truncated waveform store " + m.wave_path().string());
    return samples;
}

std::vector<std::vector<float>> load_all_waveforms(const CorpusManifest& m) {
    std::ifstream in(m.wave_path(), std::ios::binary);
    if (!in) throw DataError("cannot open " + m.wave_path().string());
    std::vector<std::vector<float>> out;
    for (const auto& e : m.utts) {
        in.seekg(static_cast<std::streamoff>(e.offset));
        std::vector<float> samples(e.samples);
        in.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(samples.size() * sizeof(float)));
        if (static_cast<size_t>(in.gcount()) != samples.size() * sizeof(float))
            throw DataError("truncated waveform store " + m.wave_path().string());
        out.push_back(std::move(samples));
    }
    return out;
}

}  // namespace dicelab::io
