#include "ap/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "ap/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace ap {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'C', 'K'};

void write_bytes(std::ofstream& out, const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_u32(std::ofstream& out, uint32_t v) { write_bytes(out, &v, sizeof v); }
void write_u64(std::ofstream& out, uint64_t v) { write_bytes(out, &v, sizeof v); }
void write_i32(std::ofstream& out, int32_t v) { write_bytes(out, &v, sizeof v); }
void write_f64(std::ofstream& out, double v) { write_bytes(out, &v, sizeof v); }

void write_string(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    write_bytes(out, s.data(), s.size());
}

void read_bytes(std::ifstream& in, void* data, size_t n, const std::string& path) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
        throw ConfigError("truncated checkpoint file: " + path);
    }
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
    uint32_t v = 0;
    read_bytes(in, &v, sizeof v, path);
    return v;
}

uint64_t read_u64(std::ifstream& in, const std::string& path) {
    uint64_t v = 0;
    read_bytes(in, &v, sizeof v, path);
    return v;
}

int32_t read_i32(std::ifstream& in, const std::string& path) {
    int32_t v = 0;
    read_bytes(in, &v, sizeof v, path);
    return v;
}

double read_f64(std::ifstream& in, const std::string& path) {
    double v = 0.0;
    read_bytes(in, &v, sizeof v, path);
    return v;
}

std::string read_string(std::ifstream& in, const std::string& path) {
    const uint32_t n = read_u32(in, path);
    if (n > 4096) throw ConfigError("implausible string length in checkpoint: " + path);
    std::string s(n, '\0');
    read_bytes(in, s.data(), n, path);
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, ActorCritic& policy) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);

    const PolicySpec& spec = policy.spec();
    write_bytes(out, kMagic, sizeof kMagic);
    write_u32(out, kCheckpointVersion);
    write_string(out, arch_name(spec.arch));
    write_i32(out, spec.n_l);
    const uint8_t map_flag = spec.map_enabled ? 1 : 0;
    write_bytes(out, &map_flag, 1);
    write_i32(out, spec.map_h);
    write_i32(out, spec.map_w);
    write_f64(out, spec.norm.center[0]);
    write_f64(out, spec.norm.center[1]);
    write_f64(out, spec.norm.range);
    write_f64(out, spec.norm.sigma);

    const std::vector<nn::Param*> params = policy.params();
    write_u32(out, static_cast<uint32_t>(params.size()));
    for (const nn::Param* p : params) {
        write_string(out, p->name);
        write_u32(out, static_cast<uint32_t>(p->value.shape.size()));
        for (int d : p->value.shape) write_u64(out, static_cast<uint64_t>(d));
        write_bytes(out, p->value.data.data(), p->value.data.size() * sizeof(double));
    }
    out.flush();
    if (!out) throw ConfigError("failed to write checkpoint: " + path);
}

ActorCritic load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);

    char magic[4] = {};
    read_bytes(in, magic, sizeof magic, path);
    if (std::string(magic, 4) != std::string(kMagic, 4)) {
        throw ConfigError("not a policy checkpoint (bad magic): " + path);
    }
    const uint32_t version = read_u32(in, path);
    if (version != kCheckpointVersion) {
        throw ConfigError("unsupported checkpoint version " + std::to_string(version) + ": " +
                          path);
    }

    PolicySpec spec;
    spec.arch = parse_arch(read_string(in, path));
    spec.n_l = read_i32(in, path);
    uint8_t map_flag = 0;
    read_bytes(in, &map_flag, 1, path);
    spec.map_enabled = map_flag != 0;
    spec.map_h = read_i32(in, path);
    spec.map_w = read_i32(in, path);
    spec.norm.center[0] = read_f64(in, path);
    spec.norm.center[1] = read_f64(in, path);
    spec.norm.range = read_f64(in, path);
    spec.norm.sigma = read_f64(in, path);
    spec.validate();

    ActorCritic policy(spec, 0);
    const std::vector<nn::Param*> params = policy.params();
    const uint32_t count = read_u32(in, path);
    if (count != params.size()) {
        throw ConfigError("checkpoint parameter count mismatch: " + path);
    }
    for (nn::Param* p : params) {
        const std::string name = read_string(in, path);
        if (name != p->name) {
            throw ConfigError("checkpoint parameter order mismatch at '" + name + "': " + path);
        }
        const uint32_t ndim = read_u32(in, path);
        if (ndim != p->value.shape.size()) {
            throw ConfigError("checkpoint rank mismatch for '" + name + "': " + path);
        }
        for (int d : p->value.shape) {
            if (read_u64(in, path) != static_cast<uint64_t>(d)) {
                throw ConfigError("checkpoint shape mismatch for '" + name + "': " + path);
            }
        }
        read_bytes(in, p->value.data.data(), p->value.data.size() * sizeof(double), path);
    }
    return policy;
}

}  // namespace ap
