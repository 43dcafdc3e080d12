#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "fdia/sparse.hpp"
#include "fdia/spectral.hpp"

namespace fdia::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ModelKind { cgcn, fcn };

const char* to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(const std::string& text);

// Layer widths. For CGCN, channels = (2, c_1, ..., c_L) and order is the
// Chebyshev order K. For FCN, channels = (2n, u_1, ..., u_L) and order is unused.
struct Architecture {
    ModelKind kind = ModelKind::cgcn;
    std::size_t nodes = 0;
    std::vector<std::size_t> channels;
    std::size_t order = 1;

    static Architecture cgcn(std::size_t nodes, std::size_t layers = 4, std::size_t width = 32,
                             std::size_t order = 5);
    static Architecture fcn(std::size_t nodes, std::size_t layers = 4, std::size_t units = 64);

    std::size_t layers() const noexcept { return channels.empty() ? 0 : channels.size() - 1; }
    std::size_t parameter_count() const;

    // Throws ConfigError on an inconsistent channel chain.
    void validate() const;

    bool operator==(const Architecture&) const = default;
};

// Non-owning views into a model's flat parameter buffer.
template <typename T>
struct ChebConvLayer {
    std::size_t order = 1;
    std::size_t c_in = 0;
    std::size_t c_out = 0;
    T* theta = nullptr;  // [k][i][j] row-major, equivalently a (K*c_in) x c_out matrix
    T* bias = nullptr;   // c_out

    operator ChebConvLayer<const T>() const
        requires(!std::is_const_v<T>)
    {
        return {order, c_in, c_out, theta, bias};
    }
};

template <typename T>
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    T* weights = nullptr;  // in x out row-major
    T* bias = nullptr;     // out
};

template <typename T>
struct DenseHead {
    std::size_t nodes = 0;
    std::size_t width = 0;
    T* weights = nullptr;  // nodes x width row-major
    T* bias = nullptr;     // scalar
};

// Batched Chebyshev graph convolution. input is (B*n) x c_in; basis receives
// the stacked recursion terms (B*n) x (K*c_in); output receives ReLU(basis*theta + bias).
template <typename T>
void cheb_conv_forward(const ChebConvLayer<const T>& layer, const CsrMatrix<T>& laplacian,
                       const RowMatrix<T>& input, std::size_t batch, RowMatrix<T>& basis,
                       RowMatrix<T>& output);

// Accumulates parameter gradients. grad_output is overwritten with the ReLU-masked
// gradient; grad_input is filled when non-null.
template <typename T>
void cheb_conv_backward(const ChebConvLayer<const T>& layer, const CsrMatrix<T>& laplacian,
                        const RowMatrix<T>& basis, const RowMatrix<T>& output,
                        RowMatrix<T>& grad_output, std::size_t batch,
                        const ChebConvLayer<T>& grads, RowMatrix<T>* grad_input);

// Logit of the sigmoid head: Frobenius product of the weights with each
// sample's n x c_L feature block, plus bias.
template <typename T>
std::vector<T> dense_head_logits(const DenseHead<const T>& head, const RowMatrix<T>& features,
                                 std::size_t batch);

double sigmoid(double z) noexcept;

struct Loss {
    double value = 0.0;
    std::vector<double> gradient;  // d loss / d input, per sample
};

// Binary cross-entropy on probabilities; gradient is w.r.t. the probabilities.
Loss bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels);

// Same loss evaluated from pre-sigmoid logits; gradient is w.r.t. the logits.
Loss bce_with_logits(std::span<const double> logits, std::span<const std::uint8_t> labels);

enum class InitMode { glorot, zero };

template <typename T>
struct ForwardCache {
    std::size_t batch = 0;
    std::vector<RowMatrix<T>> basis;    // CGCN recursion stacks, or FCN layer inputs
    std::vector<RowMatrix<T>> outputs;  // post-ReLU hidden outputs
    bool valid = false;
};

// Detector with a flat parameter buffer laid out in checkpoint order:
// per hidden layer (weights, bias), then head weights and head bias.
template <typename T>
class Model {
  public:
    // laplacian is required for CGCN and ignored for FCN.
    Model(Architecture arch, std::shared_ptr<const spectral::ScaledLaplacian> laplacian);

    const Architecture& arch() const noexcept { return arch_; }
    const std::shared_ptr<const spectral::ScaledLaplacian>& laplacian() const noexcept {
        return laplacian_;
    }

    std::span<T> parameters() noexcept { return params_; }
    std::span<const T> parameters() const noexcept { return params_; }
    void set_parameters(std::span<const T> values);

    ChebConvLayer<const T> cheb_layer(std::size_t l) const;
    DenseLayer<const T> dense_layer(std::size_t l) const;
    DenseHead<const T> head() const;

    // inputs: batch x (2n) standardized features, row-major. Returns logits.
    std::vector<T> forward(std::span<const T> inputs, std::size_t batch,
                           ForwardCache<T>* cache = nullptr) const;

    // Writes d(loss)/d(parameters) into grads given d(loss)/d(logits).
    void backward(const ForwardCache<T>& cache, std::span<const T> grad_logits,
                  std::span<T> grads) const;

    std::size_t input_width() const noexcept { return 2 * arch_.nodes; }

  private:
    std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }

    Architecture arch_;
    std::shared_ptr<const spectral::ScaledLaplacian> laplacian_;
    std::shared_ptr<const CsrMatrix<T>> lap_;
    std::vector<T> params_;
    std::vector<std::size_t> offsets_;  // start of each layer; last entry is the head
};

// Glorot-uniform weights (CGCN fan_in = K*c_in, fan_out = K*c_out), zero biases.
template <typename T>
Model<T> init_model(const Architecture& arch,
                    std::shared_ptr<const spectral::ScaledLaplacian> laplacian, std::uint64_t seed,
                    InitMode mode = InitMode::glorot);

// Dense ReLU stack on the flattened 2n-vector with a sigmoid head.
template <typename T>
Model<T> build_fcn_baseline(const Architecture& arch, std::uint64_t seed,
                            InitMode mode = InitMode::glorot);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    std::vector<T> m;
    std::vector<T> v;
    std::uint64_t step = 0;
};

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state,
               const AdamHyper& hyper);

}  // namespace fdia::nn
