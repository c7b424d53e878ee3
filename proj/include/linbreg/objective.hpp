#pragma once

#include <linbreg/error.hpp>
#include <linbreg/operators.hpp>
#include <linbreg/tensor.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace linbreg {

/// Differentiable energy E with value, gradient and an optional global
/// Lipschitz constant of the gradient. Evaluations are reentrant.
class SmoothObjective {
public:
    virtual ~SmoothObjective() = default;

    virtual std::string name() const { return "objective"; }
    virtual double value(const Tensor& u) const = 0;
    /// Returns E(u) and writes grad E(u) into `grad`.
    virtual double value_and_gradient(const Tensor& u, Tensor& grad) const = 0;
    virtual std::optional<double> lipschitz() const { return std::nullopt; }

    Tensor gradient(const Tensor& u) const {
        Tensor g;
        value_and_gradient(u, g);
        return g;
    }
};

using ObjectivePtr = std::shared_ptr<const SmoothObjective>;

/// Objective assembled from callables.
class FunctionObjective final : public SmoothObjective {
public:
    using ValueFn = std::function<double(const Tensor&)>;
    using GradFn = std::function<double(const Tensor&, Tensor&)>;

    FunctionObjective(ValueFn value, GradFn value_and_gradient, std::optional<double> lipschitz = std::nullopt,
                      std::string name = "function")
        : value_(std::move(value)), vg_(std::move(value_and_gradient)), lipschitz_(lipschitz),
          name_(std::move(name)) {}

    std::string name() const override { return name_; }
    double value(const Tensor& u) const override { return value_(u); }
    double value_and_gradient(const Tensor& u, Tensor& grad) const override { return vg_(u, grad); }
    std::optional<double> lipschitz() const override { return lipschitz_; }

private:
    ValueFn value_;
    GradFn vg_;
    std::optional<double> lipschitz_;
    std::string name_;
};

/// E(u) = 0.5 ||A u - b||^2 on flat vectors; L = s_max(A)^2. Without A the
/// operator is the identity (E = 0.5 ||u - b||^2, L = 1).
class QuadraticObjective final : public SmoothObjective {
public:
    explicit QuadraticObjective(Tensor b) : b_(std::move(b)), lipschitz_(1.0) {}

    QuadraticObjective(Tensor a, Tensor b) : a_(std::move(a)), b_(std::move(b)) {
        if (a_->ndim() != 2 || b_.size() != a_->dim(0)) {
            throw DimensionError("QuadraticObjective: A " + shape_str(a_->shape()) + " and b " +
                                 shape_str(b_.shape()) + " do not fit");
        }
        const ThinSvd svd = svd_thin(*a_);
        lipschitz_ = svd.s.front() * svd.s.front();
    }

    std::string name() const override { return "quadratic"; }

    double value(const Tensor& u) const override {
        const Tensor r = residual(u);
        return 0.5 * squared_norm(r);
    }

    double value_and_gradient(const Tensor& u, Tensor& grad) const override {
        const Tensor r = residual(u);
        if (a_) {
            Tensor g(u.shape());
            Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())) =
                as_matrix(*a_).transpose() *
                Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
            grad = std::move(g);
        } else {
            grad = r.reshaped(u.shape());
        }
        return 0.5 * squared_norm(r);
    }

    std::optional<double> lipschitz() const override { return lipschitz_; }
    const Tensor& target() const { return b_; }

private:
    Tensor residual(const Tensor& u) const {
        if (!a_) {
            if (u.size() != b_.size()) throw DimensionError("QuadraticObjective: size mismatch");
            Tensor r(Shape{u.size()});
            for (std::size_t i = 0; i < u.size(); ++i) r[i] = u[i] - b_[i];
            return r;
        }
        if (u.size() != a_->dim(1)) throw DimensionError("QuadraticObjective: size mismatch");
        Tensor r(Shape{a_->dim(0)});
        Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())) =
            as_matrix(*a_) * Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b_[i];
        return r;
    }

    std::optional<Tensor> a_;
    Tensor b_;
    double lipschitz_ = 1.0;
};

} // namespace linbreg
