#include "fdia/nn/model.hpp"

#include <cmath>

#include "fdia/error.hpp"
#include "fdia/random.hpp"

namespace fdia::nn {

const char* to_string(ModelKind kind) noexcept { return kind == ModelKind::cgcn ? "cgcn" : "fcn"; }

ModelKind model_kind_from_string(const std::string& text) {
    if (text == "cgcn") return ModelKind::cgcn;
    if (text == "fcn") return ModelKind::fcn;
    throw ConfigError("unknown model kind '" + text + "'");
}

Architecture Architecture::cgcn(std::size_t nodes, std::size_t layers, std::size_t width,
                                std::size_t order) {
    Architecture a;
    a.kind = ModelKind::cgcn;
    a.nodes = nodes;
    a.order = order;
    a.channels.push_back(2);
    a.channels.insert(a.channels.end(), layers, width);
    return a;
}

Architecture Architecture::fcn(std::size_t nodes, std::size_t layers, std::size_t units) {
    Architecture a;
    a.kind = ModelKind::fcn;
    a.nodes = nodes;
    a.order = 1;
    a.channels.push_back(2 * nodes);
    a.channels.insert(a.channels.end(), layers, units);
    return a;
}

void Architecture::validate() const {
    if (nodes == 0) {
        throw ConfigError("architecture needs at least one node");
    }
    if (channels.size() < 2) {
        throw ConfigError("architecture needs at least one hidden layer");
    }
    for (std::size_t c : channels) {
        if (c == 0) {
            throw ConfigError("layer widths must be positive");
        }
    }
    if (kind == ModelKind::cgcn) {
        if (channels.front() != 2) {
            throw ConfigError("first CGCN layer must take 2 input channels (P, Q)");
        }
        if (order < 1) {
            throw ConfigError("Chebyshev order must be at least 1");
        }
    } else if (channels.front() != 2 * nodes) {
        throw ConfigError("first FCN layer must take the flattened 2n inputs");
    }
}

std::size_t Architecture::parameter_count() const {
    std::size_t count = 0;
    const std::size_t k = kind == ModelKind::cgcn ? order : 1;
    for (std::size_t l = 0; l + 1 < channels.size(); ++l) {
        count += k * channels[l] * channels[l + 1] + channels[l + 1];
    }
    const std::size_t head_rows = kind == ModelKind::cgcn ? nodes : 1;
    return count + head_rows * channels.back() + 1;
}

template <typename T>
void cheb_conv_forward(const ChebConvLayer<const T>& layer, const CsrMatrix<T>& laplacian,
                       const RowMatrix<T>& input, std::size_t batch, RowMatrix<T>& basis,
                       RowMatrix<T>& output) {
    const std::size_t n = laplacian.size();
    const std::size_t c = layer.c_in;
    const std::size_t order = layer.order;
    if (static_cast<std::size_t>(input.rows()) != batch * n ||
        static_cast<std::size_t>(input.cols()) != c) {
        throw DimensionError("Chebyshev layer input has the wrong shape");
    }
    const auto rows = static_cast<Eigen::Index>(batch * n);
    const std::size_t ld = order * c;
    basis.resize(rows, static_cast<Eigen::Index>(ld));
    basis.leftCols(static_cast<Eigen::Index>(c)) = input;
    for (std::size_t b = 0; b < batch; ++b) {
        T* block = basis.data() + b * n * ld;
        if (order > 1) {
            spectral::multiply_columns<T>(laplacian, block, ld, block + c, ld, c, T(1), T(0));
        }
        for (std::size_t k = 2; k < order; ++k) {
            T* target = block + k * c;
            const T* two_back = block + (k - 2) * c;
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(two_back + i * ld, c, target + i * ld);
            }
            spectral::multiply_columns<T>(laplacian, block + (k - 1) * c, ld, target, ld, c, T(2),
                                          T(-1));
        }
    }
    const Eigen::Map<const RowMatrix<T>> theta(layer.theta, static_cast<Eigen::Index>(ld),
                                               static_cast<Eigen::Index>(layer.c_out));
    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(
        layer.bias, static_cast<Eigen::Index>(layer.c_out));
    output.noalias() = basis * theta;
    output.rowwise() += bias;
    output = output.cwiseMax(T(0));
}

template <typename T>
void cheb_conv_backward(const ChebConvLayer<const T>& layer, const CsrMatrix<T>& laplacian,
                        const RowMatrix<T>& basis, const RowMatrix<T>& output,
                        RowMatrix<T>& grad_output, std::size_t batch,
                        const ChebConvLayer<T>& grads, RowMatrix<T>* grad_input) {
    const std::size_t n = laplacian.size();
    const std::size_t c = layer.c_in;
    const std::size_t order = layer.order;
    const std::size_t ld = order * c;
    grad_output = (output.array() > T(0)).select(grad_output, T(0));

    Eigen::Map<RowMatrix<T>> d_theta(grads.theta, static_cast<Eigen::Index>(ld),
                                     static_cast<Eigen::Index>(layer.c_out));
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> d_bias(grads.bias,
                                                           static_cast<Eigen::Index>(layer.c_out));
    d_theta.noalias() += basis.transpose() * grad_output;
    d_bias += grad_output.colwise().sum();

    if (grad_input == nullptr) {
        return;
    }
    const Eigen::Map<const RowMatrix<T>> theta(layer.theta, static_cast<Eigen::Index>(ld),
                                               static_cast<Eigen::Index>(layer.c_out));
    RowMatrix<T> d_basis = grad_output * theta.transpose();
    // Adjoint of the recursion; the scaled Laplacian is symmetric.
    for (std::size_t b = 0; b < batch; ++b) {
        T* block = d_basis.data() + b * n * ld;
        for (std::size_t k = order - 1; k >= 2; --k) {
            T* gk = block + k * c;
            spectral::multiply_columns<T>(laplacian, gk, ld, block + (k - 1) * c, ld, c, T(2), T(1));
            T* g_two_back = block + (k - 2) * c;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    g_two_back[i * ld + j] -= gk[i * ld + j];
                }
            }
        }
        if (order > 1) {
            spectral::multiply_columns<T>(laplacian, block + c, ld, block, ld, c, T(1), T(1));
        }
    }
    *grad_input = d_basis.leftCols(static_cast<Eigen::Index>(c));
}

template <typename T>
std::vector<T> dense_head_logits(const DenseHead<const T>& head, const RowMatrix<T>& features,
                                 std::size_t batch) {
    const std::size_t width = head.nodes * head.width;
    if (static_cast<std::size_t>(features.size()) != batch * width) {
        throw DimensionError("dense head input has the wrong shape");
    }
    const Eigen::Map<const RowMatrix<T>> flat(features.data(), static_cast<Eigen::Index>(batch),
                                              static_cast<Eigen::Index>(width));
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> w(head.weights,
                                                                  static_cast<Eigen::Index>(width));
    // One dot per sample keeps each logit independent of the batch size.
    std::vector<T> logits(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        logits[b] = flat.row(static_cast<Eigen::Index>(b)).dot(w.transpose()) + *head.bias;
    }
    return logits;
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Loss bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels) {
    if (predictions.empty()) {
        throw DimensionError("loss of an empty batch");
    }
    if (predictions.size() != labels.size()) {
        throw DimensionError("predictions and labels differ in length");
    }
    const auto count = static_cast<double>(predictions.size());
    Loss loss;
    loss.gradient.resize(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = predictions[i];
        const double y = labels[i];
        loss.value -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
        loss.gradient[i] = (-y / p + (1.0 - y) / (1.0 - p)) / count;
    }
    loss.value /= count;
    return loss;
}

Loss bce_with_logits(std::span<const double> logits, std::span<const std::uint8_t> labels) {
    if (logits.empty()) {
        throw DimensionError("loss of an empty batch");
    }
    if (logits.size() != labels.size()) {
        throw DimensionError("logits and labels differ in length");
    }
    const auto count = static_cast<double>(logits.size());
    Loss loss;
    loss.gradient.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const double y = labels[i];
        // -[y log s(z) + (1-y) log(1 - s(z))] = max(z, 0) - y z + log(1 + e^{-|z|})
        loss.value += std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
        loss.gradient[i] = (sigmoid(z) - y) / count;
    }
    loss.value /= count;
    return loss;
}

template <typename T>
Model<T>::Model(Architecture arch, std::shared_ptr<const spectral::ScaledLaplacian> laplacian)
    : arch_(std::move(arch)), laplacian_(std::move(laplacian)) {
    arch_.validate();
    if (arch_.kind == ModelKind::cgcn) {
        if (!laplacian_) {
            throw ConfigError("CGCN model needs a scaled Laplacian");
        }
        if (laplacian_->size() != arch_.nodes) {
            throw DimensionError("Laplacian size " + std::to_string(laplacian_->size()) +
                                 " does not match architecture with " +
                                 std::to_string(arch_.nodes) + " nodes");
        }
        lap_ = std::make_shared<const CsrMatrix<T>>(
            laplacian_->matrix().template transform<T>([](double v) { return static_cast<T>(v); }));
    } else {
        laplacian_.reset();
    }
    const std::size_t k = arch_.kind == ModelKind::cgcn ? arch_.order : 1;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < arch_.layers(); ++l) {
        offsets_.push_back(offset);
        offset += k * arch_.channels[l] * arch_.channels[l + 1] + arch_.channels[l + 1];
    }
    offsets_.push_back(offset);
    params_.assign(arch_.parameter_count(), T(0));
}

template <typename T>
void Model<T>::set_parameters(std::span<const T> values) {
    if (values.size() != params_.size()) {
        throw DimensionError("parameter vector has " + std::to_string(values.size()) +
                             " entries, model needs " + std::to_string(params_.size()));
    }
    std::copy(values.begin(), values.end(), params_.begin());
}

template <typename T>
ChebConvLayer<const T> Model<T>::cheb_layer(std::size_t l) const {
    const std::size_t c_in = arch_.channels[l];
    const std::size_t c_out = arch_.channels[l + 1];
    const T* base = params_.data() + offsets_[l];
    return {arch_.order, c_in, c_out, base, base + arch_.order * c_in * c_out};
}

template <typename T>
DenseLayer<const T> Model<T>::dense_layer(std::size_t l) const {
    const std::size_t in = arch_.channels[l];
    const std::size_t out = arch_.channels[l + 1];
    const T* base = params_.data() + offsets_[l];
    return {in, out, base, base + in * out};
}

template <typename T>
DenseHead<const T> Model<T>::head() const {
    const std::size_t rows = arch_.kind == ModelKind::cgcn ? arch_.nodes : 1;
    const T* base = params_.data() + offsets_.back();
    return {rows, arch_.channels.back(), base, base + rows * arch_.channels.back()};
}

template <typename T>
std::vector<T> Model<T>::forward(std::span<const T> inputs, std::size_t batch,
                                 ForwardCache<T>* cache) const {
    if (inputs.size() != batch * input_width()) {
        throw DimensionError("input batch has " + std::to_string(inputs.size()) +
                             " values, expected " + std::to_string(batch * input_width()));
    }
    ForwardCache<T> local;
    ForwardCache<T>& c = cache ? *cache : local;
    const std::size_t layers = arch_.layers();
    c.batch = batch;
    c.basis.resize(layers);
    c.outputs.resize(layers);
    c.valid = false;

    if (arch_.kind == ModelKind::cgcn) {
        const std::size_t n = arch_.nodes;
        RowMatrix<T> x = Eigen::Map<const RowMatrix<T>>(inputs.data(), static_cast<Eigen::Index>(batch * n), 2);
        for (std::size_t l = 0; l < layers; ++l) {
            cheb_conv_forward<T>(cheb_layer(l), *lap_, l == 0 ? x : c.outputs[l - 1], batch,
                                 c.basis[l], c.outputs[l]);
        }
    } else {
        for (std::size_t l = 0; l < layers; ++l) {
            const auto layer = dense_layer(l);
            if (l == 0) {
                c.basis[l] = Eigen::Map<const RowMatrix<T>>(inputs.data(), static_cast<Eigen::Index>(batch),
                                                            static_cast<Eigen::Index>(layer.in));
            } else {
                c.basis[l] = c.outputs[l - 1];
            }
            const Eigen::Map<const RowMatrix<T>> w(layer.weights, static_cast<Eigen::Index>(layer.in),
                                                   static_cast<Eigen::Index>(layer.out));
            const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(
                layer.bias, static_cast<Eigen::Index>(layer.out));
            c.outputs[l].noalias() = c.basis[l] * w;
            c.outputs[l].rowwise() += bias;
            c.outputs[l] = c.outputs[l].cwiseMax(T(0));
        }
    }
    c.valid = true;
    return dense_head_logits<T>(head(), c.outputs.back(), batch);
}

template <typename T>
void Model<T>::backward(const ForwardCache<T>& cache, std::span<const T> grad_logits,
                        std::span<T> grads) const {
    if (!cache.valid) {
        throw Error("backward called without a forward cache");
    }
    if (grads.size() != params_.size()) {
        throw DimensionError("gradient buffer does not match the parameter count");
    }
    const std::size_t batch = cache.batch;
    if (grad_logits.size() != batch) {
        throw DimensionError("logit gradient does not match the cached batch");
    }
    std::fill(grads.begin(), grads.end(), T(0));

    // Head: logits = flat(H) w + b.
    const auto h = head();
    const std::size_t width = h.nodes * h.width;
    const RowMatrix<T>& last = cache.outputs.back();
    const Eigen::Map<const RowMatrix<T>> flat(last.data(), static_cast<Eigen::Index>(batch),
                                              static_cast<Eigen::Index>(width));
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> g(grad_logits.data(),
                                                                  static_cast<Eigen::Index>(batch));
    T* head_grad = grads.data() + offsets_.back();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> d_w(head_grad, static_cast<Eigen::Index>(width));
    d_w.noalias() = flat.transpose() * g;
    head_grad[width] = g.sum();

    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> w_row(h.weights,
                                                                      static_cast<Eigen::Index>(width));
    RowMatrix<T> d_flat = g * w_row;  // batch x width
    RowMatrix<T> d_out = Eigen::Map<RowMatrix<T>>(d_flat.data(), last.rows(), last.cols());

    const std::size_t layers = arch_.layers();
    RowMatrix<T> d_in;
    for (std::size_t l = layers; l-- > 0;) {
        if (arch_.kind == ModelKind::cgcn) {
            const auto layer = cheb_layer(l);
            T* base = grads.data() + offsets_[l];
            ChebConvLayer<T> lg{layer.order, layer.c_in, layer.c_out, base,
                                base + layer.order * layer.c_in * layer.c_out};
            cheb_conv_backward<T>(layer, *lap_, cache.basis[l], cache.outputs[l], d_out, batch, lg,
                                  l > 0 ? &d_in : nullptr);
        } else {
            const auto layer = dense_layer(l);
            d_out = (cache.outputs[l].array() > T(0)).select(d_out, T(0));
            T* base = grads.data() + offsets_[l];
            Eigen::Map<RowMatrix<T>> d_weights(base, static_cast<Eigen::Index>(layer.in),
                                               static_cast<Eigen::Index>(layer.out));
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> d_bias(base + layer.in * layer.out,
                                                                   static_cast<Eigen::Index>(layer.out));
            d_weights.noalias() = cache.basis[l].transpose() * d_out;
            d_bias = d_out.colwise().sum();
            if (l > 0) {
                const Eigen::Map<const RowMatrix<T>> w(layer.weights, static_cast<Eigen::Index>(layer.in),
                                                       static_cast<Eigen::Index>(layer.out));
                d_in.noalias() = d_out * w.transpose();
            }
        }
        if (l > 0) {
            d_out.swap(d_in);
        }
    }
}

template <typename T>
Model<T> init_model(const Architecture& arch,
                    std::shared_ptr<const spectral::ScaledLaplacian> laplacian, std::uint64_t seed,
                    InitMode mode) {
    Model<T> model(arch, std::move(laplacian));
    if (mode == InitMode::zero) {
        return model;
    }
    Rng rng(seed);
    auto params = model.parameters();
    const std::size_t k = arch.kind == ModelKind::cgcn ? arch.order : 1;
    std::size_t offset = 0;
    auto fill = [&](std::size_t count, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < count; ++i) {
            params[offset + i] = static_cast<T>(rng.uniform(-limit, limit));
        }
        offset += count;
    };
    for (std::size_t l = 0; l < arch.layers(); ++l) {
        const auto c_in = static_cast<double>(arch.channels[l]);
        const auto c_out = static_cast<double>(arch.channels[l + 1]);
        fill(k * arch.channels[l] * arch.channels[l + 1], static_cast<double>(k) * c_in,
             static_cast<double>(k) * c_out);
        offset += arch.channels[l + 1];  // zero bias
    }
    const std::size_t rows = arch.kind == ModelKind::cgcn ? arch.nodes : 1;
    fill(rows * arch.channels.back(), static_cast<double>(rows * arch.channels.back()), 1.0);
    return model;
}

template <typename T>
Model<T> build_fcn_baseline(const Architecture& arch, std::uint64_t seed, InitMode mode) {
    if (arch.kind != ModelKind::fcn) {
        throw ConfigError("FCN baseline needs an fcn architecture");
    }
    return init_model<T>(arch, nullptr, seed, mode);
}

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state,
               const AdamHyper& hyper) {
    if (params.size() != grads.size()) {
        throw DimensionError("Adam: parameter and gradient sizes differ");
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), T(0));
        state.v.assign(params.size(), T(0));
        state.step = 0;
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(hyper.beta1, t);
    const double correction2 = 1.0 - std::pow(hyper.beta2, t);
    const T b1 = static_cast<T>(hyper.beta1);
    const T b2 = static_cast<T>(hyper.beta2);
    const T step = static_cast<T>(hyper.lr / correction1);
    const T inv_c2 = static_cast<T>(1.0 / correction2);
    const T eps = static_cast<T>(hyper.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T g = grads[i];
        state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
        params[i] -= step * state.m[i] / (std::sqrt(state.v[i] * inv_c2) + eps);
    }
}

#define FDIA_INSTANTIATE(T)                                                                        \
    template void cheb_conv_forward<T>(const ChebConvLayer<const T>&, const CsrMatrix<T>&,         \
                                       const RowMatrix<T>&, std::size_t, RowMatrix<T>&,            \
                                       RowMatrix<T>&);                                             \
    template void cheb_conv_backward<T>(const ChebConvLayer<const T>&, const CsrMatrix<T>&,        \
                                        const RowMatrix<T>&, const RowMatrix<T>&, RowMatrix<T>&,   \
                                        std::size_t, const ChebConvLayer<T>&, RowMatrix<T>*);      \
    template std::vector<T> dense_head_logits<T>(const DenseHead<const T>&, const RowMatrix<T>&,   \
                                                 std::size_t);                                     \
    template class Model<T>;                                                                       \
    template Model<T> init_model<T>(const Architecture&,                                          \
                                    std::shared_ptr<const spectral::ScaledLaplacian>,              \
                                    std::uint64_t, InitMode);                                      \
    template Model<T> build_fcn_baseline<T>(const Architecture&, std::uint64_t, InitMode);        \
    template void adam_step<T>(std::span<T>, std::span<const T>, AdamState<T>&, const AdamHyper&);

FDIA_INSTANTIATE(float)
FDIA_INSTANTIATE(double)

#undef FDIA_INSTANTIATE

}  // namespace fdia::nn
