#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sortlab/autograd.hpp"

namespace sortlab::autograd {

// Builds a scalar from leaf inputs registered in the supplied graph.
using MultiFunction = std::function<Tensor(Graph&, std::span<const Tensor>)>;
using ScalarFunction = std::function<Tensor(Graph&, const Tensor&)>;

struct Point {
    Shape shape;
    std::vector<double> values;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

// Value of f at the given inputs, evaluated in a fresh graph.
double evaluate(const MultiFunction& f, std::span<const Point> inputs);

// Gradient of f with respect to every input, flattened in input order.
std::vector<double> analytic_gradient(const MultiFunction& f, std::span<const Point> inputs);

// Hessian-vector product H v, flattened, built by differentiating (grad f . v).
std::vector<double> analytic_hvp(const MultiFunction& f, std::span<const Point> inputs,
                                 std::span<const double> direction);

// Central differences of f, flattened in input order.
std::vector<double> numeric_gradient(const MultiFunction& f, std::span<const Point> inputs,
                                     double step = 1e-4);

// Central differences of the analytic gradient along a direction.
std::vector<double> numeric_hvp(const MultiFunction& f, std::span<const Point> inputs,
                                std::span<const double> direction, double step = 1e-4);

// Worst relative error between analytic and central-difference derivatives.
// order 1 compares gradients; order 2 compares Hessian-vector products along a
// fixed pseudo-random direction.
double check_gradient(const MultiFunction& f, std::span<const Point> inputs, int order,
                      double step = 1e-4);
double check_gradient(const ScalarFunction& f, const Tensor& point, int order, double step = 1e-4);
double check_gradient(const ScalarFunction& f, const Point& point, int order, double step = 1e-4);

}  // namespace sortlab::autograd
