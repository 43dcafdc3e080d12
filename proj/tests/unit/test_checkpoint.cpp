#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <memory>

#include <json.hpp>

#include "fdia/digest.hpp"
#include "fdia/nn/checkpoint.hpp"
#include "oracles.hpp"

using namespace fdia;
using namespace fdia::nn;

namespace {

std::shared_ptr<const spectral::ScaledLaplacian> ring_laplacian(std::size_t n, double lmax) {
    return std::make_shared<const spectral::ScaledLaplacian>(
        spectral::NormalizedLaplacian(oracle::ring(n).to_weighted()), lmax);
}

std::uint32_t u32_at(const std::string& b, std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

}  // namespace

TEST_CASE("layout") {
    const auto model = init_model<float>(Architecture::cgcn(14), ring_laplacian(14, 1.9), 3);
    CheckpointMeta meta{1.9, "grid-fp", "scaler-fp"};
    const std::string bytes = checkpoint_bytes(model, meta);
    CHECK(bytes.substr(0, 4) == "CGCN");
    CHECK(u32_at(bytes, 4) == 1);
    const std::uint32_t len = u32_at(bytes, 8);
    CHECK(bytes.size() == 12 + len + 4 * 16257);

    const auto header = nlohmann::json::parse(bytes.substr(12, len));
    CHECK(header.at("model") == "cgcn");
    CHECK(header.at("n") == 14);
    CHECK(header.at("layers") == 4);
    CHECK(header.at("order") == 5);
    CHECK(header.at("channels") == std::vector<int>{2, 32, 32, 32, 32});
    CHECK(header.at("scaler_digest") == "scaler-fp");

    // Parameters follow the header as little-endian float32 in buffer order.
    float first = 0.0f, last = 0.0f;
    std::memcpy(&first, bytes.data() + 12 + len, 4);
    std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
    CHECK(first == model.parameters().front());
    CHECK(last == model.parameters().back());
}

TEST_CASE("round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "fdia_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto lap = ring_laplacian(8, 1.7);
    const auto model = init_model<float>(Architecture::cgcn(8, 3, 5, 4), lap, 7);
    save_checkpoint(dir / "m.ckpt", model, CheckpointMeta{1.7, "g", "s"});
    const auto cp = load_checkpoint(dir / "m.ckpt");
    CHECK(cp.arch.kind == ModelKind::cgcn);
    CHECK(cp.arch.nodes == 8);
    CHECK(cp.arch.order == 4);
    CHECK(cp.arch.channels == model.arch().channels);
    CHECK(cp.meta.lambda_max == 1.7);
    CHECK(cp.meta.grid_fingerprint == "g");
    const auto back = model_from_checkpoint<float>(cp, lap);
    CHECK(std::equal(back.parameters().begin(), back.parameters().end(), model.parameters().begin()));
    CHECK(checkpoint_bytes(back, cp.meta) == read_text_file(dir / "m.ckpt"));

    // Double models store float32 and widen back.
    const auto dm = model_from_checkpoint<double>(cp, lap);
    CHECK(dm.parameters()[5] == static_cast<double>(model.parameters()[5]));

    const auto fcn = build_fcn_baseline<float>(Architecture::fcn(14), 1);
    const auto fc = parse_checkpoint(checkpoint_bytes(fcn, CheckpointMeta{}));
    CHECK(fc.arch.kind == ModelKind::fcn);
    CHECK(fc.parameters.size() == 14401);
    CHECK_NOTHROW(model_from_checkpoint<float>(fc, nullptr));
    CHECK_THROWS(model_from_checkpoint<float>(cp, nullptr));
    std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt files") {
    const auto model = init_model<float>(Architecture::cgcn(6, 2, 4, 3), ring_laplacian(6, 1.5), 1);
    const std::string good = checkpoint_bytes(model, CheckpointMeta{1.5, "", ""});
    std::string bad = good;
    bad[0] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(bad), InputError);
    bad = good;
    bad[4] = 2;
    CHECK_THROWS_AS(parse_checkpoint(bad), InputError);
    CHECK_THROWS_AS(parse_checkpoint(good.substr(0, good.size() - 3)), InputError);
    CHECK_THROWS_AS(parse_checkpoint(good + "abcd"), InputError);
    CHECK_THROWS_AS(parse_checkpoint(good.substr(0, 10)), InputError);
    CHECK_THROWS_AS(parse_checkpoint(good.substr(0, 20)), InputError);
    bad = good;
    bad[12] = '#';
    CHECK_THROWS_AS(parse_checkpoint(bad), InputError);
}

TEST_CASE("scaler digest tracks content") {
    data::Scaler a;
    a.n = 1;
    a.mean = {1.0, 2.0};
    a.std = {0.5, 0.25};
    data::Scaler b = a;
    CHECK(scaler_digest(a) == scaler_digest(b));
    b.std[1] = 0.26;
    CHECK(scaler_digest(a) != scaler_digest(b));
}
