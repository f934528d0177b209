#include "meshae/checkpoint.hpp"

#include "meshae/rng.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

using nlohmann::json;

namespace meshae {

void ArchitectureConfig::validate() const {
    if (m < 12) throw std::runtime_error("config: m must be >= 12");
    if (k < 3) throw std::runtime_error("config: K must be >= 3");
    if (encoder_widths.empty()) throw std::runtime_error("config: encoder widths empty");
    if (encoder_widths.size() != decoder_widths.size())
        throw std::runtime_error("config: encoder and decoder depth must match");
    for (int w : encoder_widths)
        if (w < 1) throw std::runtime_error("config: encoder width must be positive");
    for (int w : decoder_widths)
        if (w < 1) throw std::runtime_error("config: decoder width must be positive");
    if (bn_momentum <= 0.0 || bn_momentum >= 1.0)
        throw std::runtime_error("config: bn_momentum must be in (0,1)");
    if (bn_epsilon <= 0.0) throw std::runtime_error("config: bn_epsilon must be positive");
}

std::string ArchitectureConfig::to_json_string() const {
    json j;
    j["m"] = m;
    j["k"] = k;
    j["encoder_widths"] = encoder_widths;
    j["decoder_widths"] = decoder_widths;
    j["bn_momentum"] = bn_momentum;
    j["bn_epsilon"] = bn_epsilon;
    j["conv_bias"] = conv_bias;
    return j.dump();
}

ArchitectureConfig ArchitectureConfig::from_json_string(const std::string& s) {
    json j = json::parse(s);
    ArchitectureConfig c;
    for (auto& [key, val] : j.items()) {
        if (key == "m") c.m = val.get<int>();
        else if (key == "k") c.k = val.get<int>();
        else if (key == "encoder_widths") c.encoder_widths = val.get<std::vector<int>>();
        else if (key == "decoder_widths") c.decoder_widths = val.get<std::vector<int>>();
        else if (key == "bn_momentum") c.bn_momentum = val.get<double>();
        else if (key == "bn_epsilon") c.bn_epsilon = val.get<double>();
        else if (key == "conv_bias") c.conv_bias = val.get<bool>();
        else throw std::runtime_error("config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

uint64_t ArchitectureConfig::hash() const {
    std::string s = to_json_string();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

void ParamSet::add(std::string name, MatX value) {
    tensors.push_back({std::move(name), std::move(value)});
}

MatX& ParamSet::at(const std::string& name) {
    for (Tensor& t : tensors)
        if (t.name == name) return t.value;
    throw std::runtime_error("checkpoint: no tensor named '" + name + "'");
}

const MatX& ParamSet::at(const std::string& name) const {
    for (const Tensor& t : tensors)
        if (t.name == name) return t.value;
    throw std::runtime_error("checkpoint: no tensor named '" + name + "'");
}

ParamSet ParamSet::zeros_like(const ParamSet& other) {
    ParamSet s;
    s.tensors.reserve(other.tensors.size());
    for (const Tensor& t : other.tensors)
        s.add(t.name, MatX::Zero(t.value.rows(), t.value.cols()));
    return s;
}

void ParamSet::accumulate(const ParamSet& other) {
    if (other.tensors.size() != tensors.size())
        throw std::runtime_error("param set: layout mismatch");
    for (size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name != other.tensors[i].name)
            throw std::runtime_error("param set: layout mismatch at " + tensors[i].name);
        tensors[i].value += other.tensors[i].value;
    }
}

void ParamSet::scale(double s) {
    for (Tensor& t : tensors) t.value *= s;
}

void ParamSet::quantize_f32() {
    for (Tensor& t : tensors) quantize_f32_matrix(t.value);
}

namespace {

MatX glorot(Eigen::Index fan_out, Eigen::Index fan_in, Rng& rng) {
    double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    MatX w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-s, s);
    return w;
}

void add_conv(ParamSet& params, const std::string& prefix, int fan_out, int fan_in, bool bias,
              Rng& rng) {
    for (const char* wn : {"w0", "w1", "w2", "w3"})
        params.add(prefix + "." + wn, glorot(fan_out, fan_in, rng));
    if (bias) params.add(prefix + ".bias", MatX::Zero(fan_out, 1));
}

void add_bn(ParamSet& params, ParamSet& running, const std::string& prefix, int channels) {
    params.add(prefix + ".gamma", MatX::Ones(channels, 1));
    params.add(prefix + ".beta", MatX::Zero(channels, 1));
    running.add(prefix + ".mean", MatX::Zero(channels, 1));
    running.add(prefix + ".var", MatX::Ones(channels, 1));
}

} // namespace

Checkpoint Checkpoint::init(const ArchitectureConfig& config, uint64_t seed) {
    config.validate();
    Checkpoint c;
    c.config = config;
    Rng rng(mix_seed(seed, 0x1417ull));

    int ch = 9;
    for (size_t s = 0; s < config.encoder_widths.size(); ++s) {
        int out = config.encoder_widths[s];
        std::string p = "enc" + std::to_string(s);
        add_conv(c.params, p + ".conv", out, ch, config.conv_bias, rng);
        add_bn(c.params, c.running, p + ".bn", out);
        ch = out;
    }
    c.params.add("enc_head.w", glorot(9, ch, rng));
    c.params.add("enc_head.bias", MatX::Zero(9, 1));

    ch = 9;
    for (size_t s = 0; s < config.decoder_widths.size(); ++s) {
        int out = config.decoder_widths[s];
        std::string p = "dec" + std::to_string(s);
        add_conv(c.params, p + ".conv", out, ch, config.conv_bias, rng);
        add_bn(c.params, c.running, p + ".bn", out);
        ch = out;
    }
    c.params.add("dec_head.w", glorot(9, ch, rng));
    c.params.add("dec_head.bias", MatX::Zero(9, 1));

    c.params.quantize_f32();
    c.adam_m = ParamSet::zeros_like(c.params);
    c.adam_v = ParamSet::zeros_like(c.params);
    return c;
}

void Checkpoint::apply_gradients(const ParamSet& grads) {
    ++step;
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        if (params.tensors[i].name != grads.tensors[i].name)
            throw std::runtime_error("apply_gradients: layout mismatch");
        AdamState st;
        st.m = std::move(adam_m.tensors[i].value);
        st.v = std::move(adam_v.tensors[i].value);
        adam_step(params.tensors[i].value, grads.tensors[i].value, st, adam, step);
        quantize_f32_matrix(params.tensors[i].value);
        quantize_f32_matrix(st.m);
        quantize_f32_matrix(st.v);
        adam_m.tensors[i].value = std::move(st.m);
        adam_v.tensors[i].value = std::move(st.v);
    }
}

namespace {

void write_set(std::ostream& manifest, std::vector<float>& payload, const std::string& section,
               const ParamSet& set) {
    for (const Tensor& t : set.tensors) {
        manifest << "tensor " << section << ':' << t.name << ' ' << t.value.rows() << ' '
                 << t.value.cols() << ' ' << payload.size() * sizeof(float) << '\n';
        for (Eigen::Index i = 0; i < t.value.size(); ++i)
            payload.push_back(static_cast<float>(t.value.data()[i]));
    }
}

} // namespace

void Checkpoint::save(const std::string& path) const {
    std::ostringstream manifest;
    manifest << "MESHAE-CKPT 1\n";
    manifest << "config " << config.to_json_string() << '\n';
    manifest << "adam " << adam.learning_rate << ' ' << adam.beta1 << ' ' << adam.beta2 << ' '
             << adam.epsilon << '\n';
    manifest << "step " << step << '\n';

    std::vector<float> payload;
    write_set(manifest, payload, "param", params);
    write_set(manifest, payload, "running", running);
    write_set(manifest, payload, "adam_m", adam_m);
    write_set(manifest, payload, "adam_v", adam_v);
    manifest << "payload " << payload.size() * sizeof(float) << '\n';

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    std::string header = manifest.str();
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if (!payload.empty())
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw std::runtime_error(path + ": write failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open file");

    Checkpoint c;
    struct Entry {
        std::string section, name;
        Eigen::Index rows, cols;
        size_t offset;
    };
    std::vector<Entry> entries;
    size_t payload_bytes = 0;

    std::string line;
    if (!std::getline(in, line) || line != "MESHAE-CKPT 1")
        throw std::runtime_error(path + ": not a checkpoint file");
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "config") {
            std::string rest = line.substr(line.find(' ') + 1);
            c.config = ArchitectureConfig::from_json_string(rest);
        } else if (tag == "adam") {
            ls >> c.adam.learning_rate >> c.adam.beta1 >> c.adam.beta2 >> c.adam.epsilon;
        } else if (tag == "step") {
            ls >> c.step;
        } else if (tag == "tensor") {
            Entry e;
            std::string full;
            ls >> full >> e.rows >> e.cols >> e.offset;
            size_t colon = full.find(':');
            if (colon == std::string::npos) throw std::runtime_error(path + ": bad tensor entry");
            e.section = full.substr(0, colon);
            e.name = full.substr(colon + 1);
            entries.push_back(std::move(e));
        } else if (tag == "payload") {
            ls >> payload_bytes;
            break;
        } else {
            throw std::runtime_error(path + ": unknown manifest entry '" + tag + "'");
        }
    }

    std::vector<float> payload(payload_bytes / sizeof(float));
    if (!payload.empty())
        in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_bytes));
    if (!in) throw std::runtime_error(path + ": truncated payload");

    for (const Entry& e : entries) {
        size_t count = static_cast<size_t>(e.rows * e.cols);
        if (e.offset % sizeof(float) != 0 || e.offset / sizeof(float) + count > payload.size())
            throw std::runtime_error(path + ": tensor out of payload bounds");
        MatX m(e.rows, e.cols);
        const float* src = payload.data() + e.offset / sizeof(float);
        for (size_t i = 0; i < count; ++i) m.data()[i] = static_cast<double>(src[i]);
        ParamSet* dst = nullptr;
        if (e.section == "param") dst = &c.params;
        else if (e.section == "running") dst = &c.running;
        else if (e.section == "adam_m") dst = &c.adam_m;
        else if (e.section == "adam_v") dst = &c.adam_v;
        else throw std::runtime_error(path + ": unknown tensor section " + e.section);
        dst->add(e.name, std::move(m));
    }
    return c;
}

} // namespace meshae
