#include "fdia/nn/checkpoint.hpp"

#include <bit>

#include <json.hpp>

#include "fdia/digest.hpp"
#include "fdia/error.hpp"

namespace fdia::nn {
namespace {

using nlohmann::json;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t pos) {
    if (pos + 4 > buf.size()) {
        throw InputError("checkpoint is truncated");
    }
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(b)])) << (8 * b);
    }
    return v;
}

}  // namespace

std::string scaler_digest(const data::Scaler& scaler) {
    const json j = {{"mean", scaler.mean}, {"std", scaler.std}, {"epsilon", scaler.epsilon}};
    return sha256_hex(j.dump());
}

template <typename T>
std::string checkpoint_bytes(const Model<T>& model, const CheckpointMeta& meta) {
    const Architecture& a = model.arch();
    const json header = {{"model", to_string(a.kind)},
                         {"n", a.nodes},
                         {"layers", a.layers()},
                         {"channels", a.channels},
                         {"order", a.order},
                         {"parameter_count", a.parameter_count()},
                         {"lambda_max", meta.lambda_max},
                         {"grid_fingerprint", meta.grid_fingerprint},
                         {"scaler_digest", meta.scaler_digest}};
    const std::string text = header.dump();
    std::string buf = "CGCN";
    put_u32(buf, checkpoint_version);
    put_u32(buf, static_cast<std::uint32_t>(text.size()));
    buf += text;
    for (T p : model.parameters()) {
        put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(p)));
    }
    return buf;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const CheckpointMeta& meta) {
    write_text_file(path, checkpoint_bytes(model, meta));
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    if (bytes.size() < 12 || bytes.compare(0, 4, "CGCN") != 0) {
        throw InputError("not a checkpoint file (bad magic)");
    }
    if (get_u32(bytes, 4) != checkpoint_version) {
        throw InputError("unsupported checkpoint version");
    }
    const std::uint32_t json_len = get_u32(bytes, 8);
    if (12 + static_cast<std::size_t>(json_len) > bytes.size()) {
        throw InputError("checkpoint header is truncated");
    }
    Checkpoint cp;
    try {
        const json header = json::parse(bytes.substr(12, json_len));
        cp.arch.kind = model_kind_from_string(header.at("model").get<std::string>());
        cp.arch.nodes = header.at("n").get<std::size_t>();
        cp.arch.channels = header.at("channels").get<std::vector<std::size_t>>();
        cp.arch.order = header.at("order").get<std::size_t>();
        cp.meta.lambda_max = header.at("lambda_max").get<double>();
        cp.meta.grid_fingerprint = header.at("grid_fingerprint").get<std::string>();
        cp.meta.scaler_digest = header.at("scaler_digest").get<std::string>();
        if (header.at("layers").get<std::size_t>() != cp.arch.layers()) {
            throw InputError("checkpoint layer count disagrees with its channel list");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("checkpoint header: ") + e.what());
    }
    cp.arch.validate();
    const std::size_t count = cp.arch.parameter_count();
    const std::size_t start = 12 + json_len;
    if (bytes.size() != start + 4 * count) {
        throw InputError("checkpoint holds " + std::to_string((bytes.size() - start) / 4) +
                         " parameters, architecture needs " + std::to_string(count));
    }
    cp.parameters.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        cp.parameters[i] = std::bit_cast<float>(get_u32(bytes, start + 4 * i));
    }
    return cp;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return parse_checkpoint(read_text_file(path));
}

template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& checkpoint,
                               std::shared_ptr<const spectral::ScaledLaplacian> laplacian) {
    Model<T> model(checkpoint.arch, std::move(laplacian));
    const std::vector<T> values(checkpoint.parameters.begin(), checkpoint.parameters.end());
    model.set_parameters(values);
    return model;
}

template std::string checkpoint_bytes<float>(const Model<float>&, const CheckpointMeta&);
template std::string checkpoint_bytes<double>(const Model<double>&, const CheckpointMeta&);
template void save_checkpoint<float>(const std::filesystem::path&, const Model<float>&, const CheckpointMeta&);
template void save_checkpoint<double>(const std::filesystem::path&, const Model<double>&, const CheckpointMeta&);
template Model<float> model_from_checkpoint<float>(const Checkpoint&, std::shared_ptr<const spectral::ScaledLaplacian>);
template Model<double> model_from_checkpoint<double>(const Checkpoint&, std::shared_ptr<const spectral::ScaledLaplacian>);

}  // namespace fdia::nn
