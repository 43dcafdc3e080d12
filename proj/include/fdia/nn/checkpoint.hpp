#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/nn/model.hpp"

namespace fdia::nn {

// Checkpoint file: magic "CGCN", u32 version, u32 json_len, JSON architecture
// descriptor, then every parameter as little-endian float32 in buffer order.
inline constexpr std::uint32_t checkpoint_version = 1;

struct CheckpointMeta {
    double lambda_max = 0.0;  // 0 for FCN
    std::string grid_fingerprint;
    std::string scaler_digest;
};

struct Checkpoint {
    Architecture arch;
    CheckpointMeta meta;
    std::vector<float> parameters;
};

std::string scaler_digest(const data::Scaler& scaler);

template <typename T>
std::string checkpoint_bytes(const Model<T>& model, const CheckpointMeta& meta);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const CheckpointMeta& meta);

Checkpoint parse_checkpoint(const std::string& bytes);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// laplacian may be null for FCN checkpoints.
template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& checkpoint,
                               std::shared_ptr<const spectral::ScaledLaplacian> laplacian);

}  // namespace fdia::nn
