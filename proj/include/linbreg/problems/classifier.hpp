#pragma once

#include <linbreg/error.hpp>
#include <linbreg/objective.hpp>
#include <linbreg/operators.hpp>
#include <linbreg/regularizers.hpp>
#include <linbreg/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace linbreg {

enum class ActivationKind { Rectifier, SmoothMax, SoftMax };
enum class LossKind { Frobenius, ShiftedKL, SymmetrisedKL };

inline ActivationKind parse_activation(const std::string& s) {
    if (s == "rectifier") return ActivationKind::Rectifier;
    if (s == "smooth-max") return ActivationKind::SmoothMax;
    if (s == "soft-max") return ActivationKind::SoftMax;
    throw ArgumentError("unknown activation '" + s + "' (rectifier | smooth-max | soft-max)");
}

inline LossKind parse_loss(const std::string& s) {
    if (s == "frobenius") return LossKind::Frobenius;
    if (s == "kl") return LossKind::ShiftedKL;
    if (s == "symmetric-kl") return LossKind::SymmetrisedKL;
    throw ArgumentError("unknown loss '" + s + "' (frobenius | kl | symmetric-kl)");
}

struct Activation {
    ActivationKind kind = ActivationKind::Rectifier;
    double beta = 5.0; ///< smooth-max sharpness
    double c = 0.0;    ///< smooth-max floor
};

struct Loss {
    LossKind kind = LossKind::Frobenius;
    double shift = 1e-3; ///< KL shift, independent of the level-set weight
};

namespace detail {

/// Elementwise or column-wise activation; returns the output and keeps what
/// the backward pass needs.
inline Tensor activate(const Tensor& z, const Activation& act) {
    Tensor out(z.shape());
    switch (act.kind) {
    case ActivationKind::Rectifier:
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::min(1.0, std::max(0.0, z[i]));
        break;
    case ActivationKind::SmoothMax:
        for (std::size_t i = 0; i < z.size(); ++i) {
            // (x e^{bx} + c e^{bc}) / (e^{bx} + e^{bc}) written with a logistic weight
            const double s = 1.0 / (1.0 + std::exp(-act.beta * (z[i] - act.c)));
            out[i] = s * z[i] + (1.0 - s) * act.c;
        }
        break;
    case ActivationKind::SoftMax: {
        const std::size_t m = z.dim(0), r = z.dim(1);
        for (std::size_t col = 0; col < r; ++col) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) mx = std::max(mx, z(i, col));
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += std::exp(z(i, col) - mx);
            for (std::size_t i = 0; i < m; ++i) out(i, col) = std::exp(z(i, col) - mx) / s;
        }
        break;
    }
    }
    return out;
}

/// Given dL/dy for y = act(z), returns dL/dz. The rectifier derivative is 0 at its kinks.
inline Tensor activate_backward(const Tensor& z, const Tensor& y, const Tensor& gy, const Activation& act) {
    Tensor gz(z.shape());
    switch (act.kind) {
    case ActivationKind::Rectifier:
        for (std::size_t i = 0; i < z.size(); ++i) gz[i] = (z[i] > 0.0 && z[i] < 1.0) ? gy[i] : 0.0;
        break;
    case ActivationKind::SmoothMax:
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-act.beta * (z[i] - act.c)));
            gz[i] = gy[i] * (s + act.beta * s * (1.0 - s) * (z[i] - act.c));
        }
        break;
    case ActivationKind::SoftMax: {
        const std::size_t m = z.dim(0), r = z.dim(1);
        for (std::size_t col = 0; col < r; ++col) {
            double d = 0.0;
            for (std::size_t i = 0; i < m; ++i) d += gy(i, col) * y(i, col);
            for (std::size_t i = 0; i < m; ++i) gz(i, col) = y(i, col) * (gy(i, col) - d);
        }
        break;
    }
    }
    return gz;
}

/// Loss value and its derivative in X.
inline double loss_value_grad(const Tensor& x, const Tensor& y, const Loss& loss, Tensor* gx) {
    x.require_same(y, "loss");
    if (gx) *gx = Tensor(x.shape());
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        switch (loss.kind) {
        case LossKind::Frobenius: {
            const double d = x[i] - y[i];
            v += 0.5 * d * d;
            if (gx) (*gx)[i] = d;
            break;
        }
        case LossKind::ShiftedKL:
        case LossKind::SymmetrisedKL: {
            const double xs = x[i] + loss.shift, ys = y[i] + loss.shift;
            if (!(xs > 0.0) || !(ys > 0.0)) {
                throw DomainError("KL loss: non-positive shifted argument at entry " + std::to_string(i));
            }
            const double lg = std::log(xs / ys);
            if (loss.kind == LossKind::ShiftedKL) {
                v += xs * lg + y[i] - x[i];
                if (gx) (*gx)[i] = lg;
            } else {
                v += lg * (x[i] - y[i]);
                if (gx) (*gx)[i] = lg + (x[i] - y[i]) / xs;
            }
            break;
        }
        }
    }
    return v;
}

} // namespace detail

/// Network rho_1(A_1 rho_2(A_2 ... rho_l(A_l D))). `layers[0]` is A_1 (output side).
inline Tensor nn_forward(const std::vector<Tensor>& layers, const Tensor& data, const std::vector<Activation>& acts) {
    if (layers.empty() || acts.size() != layers.size()) throw DimensionError("nn_forward: layer/activation count");
    Tensor x = data;
    for (std::size_t j = layers.size(); j-- > 0;) x = detail::activate(matmul(layers[j], x), acts[j]);
    return x;
}

struct NnEnergyGrad {
    double value = 0.0;
    std::vector<Tensor> grads; ///< per layer, same order as the layers
    Tensor output;
};

/// Loss(K(A), Y) + (eps/2) sum_j ||A_j||^2 and its gradient by reverse mode.
inline NnEnergyGrad nn_energy_grad(const std::vector<Tensor>& layers, const Tensor& data, const Tensor& labels,
                                   const std::vector<Activation>& acts, const Loss& loss, double eps,
                                   bool want_grad = true) {
    const std::size_t l = layers.size();
    if (l == 0 || acts.size() != l) throw DimensionError("nn_energy_grad: layer/activation count");
    // inputs[j] feeds layer j; pre[j] = A_j inputs[j]; inputs[j-1] = act(pre[j])
    std::vector<Tensor> inputs(l), pre(l);
    Tensor x = data;
    for (std::size_t j = l; j-- > 0;) {
        inputs[j] = x;
        pre[j] = matmul(layers[j], x);
        x = detail::activate(pre[j], acts[j]);
    }
    NnEnergyGrad out;
    Tensor gx;
    out.value = detail::loss_value_grad(x, labels, loss, want_grad ? &gx : nullptr);
    for (const auto& a : layers) out.value += 0.5 * eps * squared_norm(a);
    out.output = x;
    if (!want_grad) return out;

    out.grads.resize(l);
    Tensor gy = std::move(gx);
    Tensor y = out.output;
    for (std::size_t j = 0; j < l; ++j) {
        const Tensor gz = detail::activate_backward(pre[j], y, gy, acts[j]);
        out.grads[j] = from_matrix(as_matrix(gz) * as_matrix(inputs[j]).transpose());
        if (eps > 0.0) out.grads[j].axpy(eps, layers[j]);
        if (j + 1 < l) {
            gy = from_matrix(as_matrix(layers[j]).transpose() * as_matrix(gz));
            y = inputs[j];
        }
    }
    return out;
}

/// Classifier energy over the flat variable [A_1 | ... | A_l].
class ClassifierObjective final : public SmoothObjective {
public:
    ClassifierObjective(Tensor data, Tensor labels, std::vector<Shape> layer_shapes, std::vector<Activation> acts,
                        Loss loss, double eps = std::numeric_limits<double>::epsilon())
        : data_(std::move(data)), labels_(std::move(labels)), shapes_(std::move(layer_shapes)),
          acts_(std::move(acts)), loss_(loss), eps_(eps) {
        if (shapes_.empty() || acts_.size() != shapes_.size()) throw DimensionError("classifier: layer count");
        std::size_t rows = data_.dim(0);
        for (std::size_t j = shapes_.size(); j-- > 0;) {
            if (shapes_[j].size() != 2 || shapes_[j][1] != rows) {
                throw DimensionError("classifier: layer " + std::to_string(j + 1) + " shape " +
                                     shape_str(shapes_[j]) + " does not chain");
            }
            rows = shapes_[j][0];
        }
        if (labels_.dim(0) != rows || labels_.dim(1) != data_.dim(1)) {
            throw DimensionError("classifier: labels " + shape_str(labels_.shape()) + " do not match output");
        }
        std::size_t off = 0;
        for (const auto& s : shapes_) {
            blocks_.push_back({off, s});
            off += shape_size(s);
        }
        dim_ = off;
    }

    std::string name() const override { return "classifier"; }
    std::size_t dimension() const { return dim_; }
    const std::vector<BlockRange>& blocks() const { return blocks_; }
    const Tensor& data() const { return data_; }
    const Tensor& labels() const { return labels_; }
    const std::vector<Activation>& activations() const { return acts_; }

    std::vector<Tensor> unpack(const Tensor& x) const {
        check(x);
        std::vector<Tensor> out;
        for (const auto& b : blocks_) out.push_back(extract_block(x, b));
        return out;
    }
    Tensor pack(const std::vector<Tensor>& layers) const { return stack_blocks(layers).first; }

    double value(const Tensor& x) const override {
        return nn_energy_grad(unpack(x), data_, labels_, acts_, loss_, eps_, false).value;
    }
    double value_and_gradient(const Tensor& x, Tensor& grad) const override {
        NnEnergyGrad r = nn_energy_grad(unpack(x), data_, labels_, acts_, loss_, eps_, true);
        grad = Tensor(x.shape());
        for (std::size_t j = 0; j < blocks_.size(); ++j) insert_block(grad, blocks_[j], r.grads[j]);
        return r.value;
    }

private:
    void check(const Tensor& x) const {
        if (x.size() != dim_) {
            throw DimensionError("classifier variable has size " + std::to_string(x.size()) + ", expected " +
                                 std::to_string(dim_));
        }
    }

    Tensor data_, labels_;
    std::vector<Shape> shapes_;
    std::vector<Activation> acts_;
    Loss loss_;
    double eps_;
    std::vector<BlockRange> blocks_;
    std::size_t dim_ = 0;
};

/// R = sum_j alpha_j ||A_j||_*.
inline BregmanPtr make_classifier_regularizer(const ClassifierObjective& E, const std::vector<double>& alphas) {
    if (alphas.size() != E.blocks().size()) throw ArgumentError("one nuclear-norm weight per layer required");
    std::vector<SeparableSum::Part> parts;
    for (std::size_t j = 0; j < alphas.size(); ++j) {
        parts.push_back({std::make_shared<NuclearNorm>(alphas[j]), E.blocks()[j]});
    }
    return compose_separable(std::move(parts));
}

/// Seeded uniform entries in [-1, 1] / sqrt(n_j) for an m_j x n_j layer.
inline std::vector<Tensor> init_layers(const std::vector<Shape>& shapes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<Tensor> out;
    for (const auto& s : shapes) {
        Tensor a(s);
        const double scale = 1.0 / std::sqrt(static_cast<double>(s[1]));
        for (auto& v : a) v = scale * unif(rng);
        out.push_back(std::move(a));
    }
    return out;
}

/// One-hot label matrix (classes x samples).
inline Tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
    Tensor y(Shape{classes, labels.size()});
    for (std::size_t c = 0; c < labels.size(); ++c) {
        if (labels[c] < 0 || static_cast<std::size_t>(labels[c]) >= classes) {
            throw ArgumentError("label " + std::to_string(labels[c]) + " out of range");
        }
        y(static_cast<std::size_t>(labels[c]), c) = 1.0;
    }
    return y;
}

/// Index of the largest entry of column `col`; ties go to the lowest index.
inline std::size_t column_argmax(const Tensor& m, std::size_t col) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.dim(0); ++i) {
        if (m(i, col) > m(best, col)) best = i;
    }
    return best;
}

/// Fraction of columns whose output argmax matches the label argmax.
inline double prediction_rate(const Tensor& output, const Tensor& labels) {
    output.require_same(labels, "prediction_rate");
    std::size_t hits = 0;
    for (std::size_t c = 0; c < output.dim(1); ++c) hits += column_argmax(output, c) == column_argmax(labels, c);
    return static_cast<double>(hits) / static_cast<double>(output.dim(1));
}

inline double prediction_rate(const std::vector<Tensor>& layers, const Tensor& data, const Tensor& labels,
                              const std::vector<Activation>& acts) {
    return prediction_rate(nn_forward(layers, data, acts), labels);
}

/// Count of singular values above tol * s_max.
inline int rank_of(const Tensor& a, double tol = 1e-8) {
    if (!(tol > 0.0)) throw ArgumentError("rank tolerance must be > 0");
    const ThinSvd svd = svd_thin(a);
    if (svd.s.empty() || svd.s.front() == 0.0) return 0;
    int r = 0;
    for (double s : svd.s) r += s > tol * svd.s.front();
    return r;
}

} // namespace linbreg
