#include "sortlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sortlab/error.hpp"
#include "sortlab/rng.hpp"

namespace sortlab::autograd {

namespace {

std::vector<Tensor> make_leaves(Graph& g, std::span<const Point> inputs) {
    std::vector<Tensor> leaves;
    leaves.reserve(inputs.size());
    for (const Point& p : inputs) leaves.push_back(g.tensor(p.shape, p.values, true));
    return leaves;
}

Tensor checked_output(const MultiFunction& f, Graph& g, std::span<const Tensor> leaves) {
    Tensor out = f(g, leaves);
    if (out.numel() != 1) {
        throw Error(ErrorKind::usage, "function under check must return a scalar");
    }
    if (!std::isfinite(out.item())) {
        throw Error(ErrorKind::evaluation, "function value is not finite at the check point");
    }
    return out;
}

std::vector<double> flatten(std::span<const Tensor> tensors) {
    std::vector<double> flat;
    for (const Tensor& t : tensors) flat.insert(flat.end(), t.values().begin(), t.values().end());
    return flat;
}

std::size_t total_size(std::span<const Point> inputs) {
    std::size_t n = 0;
    for (const Point& p : inputs) n += p.values.size();
    return n;
}

std::vector<Point> shifted(std::span<const Point> inputs, std::span<const double> direction,
                           double amount) {
    std::vector<Point> out(inputs.begin(), inputs.end());
    std::size_t k = 0;
    for (Point& p : out) {
        for (double& v : p.values) v += amount * direction[k++];
    }
    return out;
}

}  // namespace

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    if (analytic.size() != numeric.size()) {
        throw Error(ErrorKind::shape, "gradient vectors differ in length");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        worst = std::max(worst, relative_error(analytic[i], numeric[i]));
    }
    return worst;
}

double evaluate(const MultiFunction& f, std::span<const Point> inputs) {
    Graph g;
    auto leaves = make_leaves(g, inputs);
    return checked_output(f, g, leaves).item();
}

std::vector<double> analytic_gradient(const MultiFunction& f, std::span<const Point> inputs) {
    Graph g;
    auto leaves = make_leaves(g, inputs);
    Tensor out = checked_output(f, g, leaves);
    return flatten(g.gradient(out, leaves, false));
}

std::vector<double> analytic_hvp(const MultiFunction& f, std::span<const Point> inputs,
                                 std::span<const double> direction) {
    Graph g;
    auto leaves = make_leaves(g, inputs);
    Tensor out = checked_output(f, g, leaves);
    auto grads = g.gradient(out, leaves, true);
    std::size_t k = 0;
    Tensor projection;
    for (const Tensor& gr : grads) {
        std::vector<double> v(direction.begin() + static_cast<std::ptrdiff_t>(k),
                              direction.begin() + static_cast<std::ptrdiff_t>(k + gr.numel()));
        k += gr.numel();
        Tensor term = sum(mul(gr, g.tensor(gr.shape(), std::move(v))));
        projection = projection.valid() ? add(projection, term) : term;
    }
    return flatten(g.gradient(projection, leaves, false));
}

std::vector<double> numeric_gradient(const MultiFunction& f, std::span<const Point> inputs,
                                     double step) {
    std::vector<Point> work(inputs.begin(), inputs.end());
    std::vector<double> grad;
    grad.reserve(total_size(inputs));
    for (Point& p : work) {
        for (double& v : p.values) {
            const double saved = v;
            v = saved + step;
            const double up = evaluate(f, work);
            v = saved - step;
            const double down = evaluate(f, work);
            v = saved;
            grad.push_back((up - down) / (2.0 * step));
        }
    }
    return grad;
}

std::vector<double> numeric_hvp(const MultiFunction& f, std::span<const Point> inputs,
                                std::span<const double> direction, double step) {
    const auto up = analytic_gradient(f, shifted(inputs, direction, step));
    const auto down = analytic_gradient(f, shifted(inputs, direction, -step));
    std::vector<double> out(up.size());
    for (std::size_t i = 0; i < up.size(); ++i) out[i] = (up[i] - down[i]) / (2.0 * step);
    return out;
}

double check_gradient(const MultiFunction& f, std::span<const Point> inputs, int order,
                      double step) {
    if (order == 1) {
        return max_relative_error(analytic_gradient(f, inputs), numeric_gradient(f, inputs, step));
    }
    if (order == 2) {
        Rng rng(0x5eedULL);
        std::vector<double> direction(total_size(inputs));
        for (double& d : direction) d = rng.uniform(-1.0, 1.0);
        return max_relative_error(analytic_hvp(f, inputs, direction),
                                  numeric_hvp(f, inputs, direction, step));
    }
    throw Error(ErrorKind::usage, "check_gradient order must be 1 or 2");
}

double check_gradient(const ScalarFunction& f, const Point& point, int order, double step) {
    MultiFunction wrapped = [&f](Graph& g, std::span<const Tensor> xs) { return f(g, xs[0]); };
    return check_gradient(wrapped, std::span<const Point>(&point, 1), order, step);
}

double check_gradient(const ScalarFunction& f, const Tensor& point, int order, double step) {
    return check_gradient(f, Point{point.shape(), point.values()}, order, step);
}

}  // namespace sortlab::autograd
