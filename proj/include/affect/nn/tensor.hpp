#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace affect::nn {

using Scalar = double;
using Arr = Eigen::ArrayX<Scalar>;
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// NCHW. Vector-shaped data uses (n, c, 1, 1).
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    Shape() = default;
    Shape(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {}

    Eigen::Index count() const {
        return static_cast<Eigen::Index>(n) * c * h * w;
    }
    bool operator==(const Shape& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const {
        return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + "]";
    }
};

struct Tensor {
    Shape shape;
    Arr data;

    Tensor() = default;
    explicit Tensor(const Shape& s) : shape(s), data(Arr::Zero(s.count())) {}
    Tensor(const Shape& s, Arr d) : shape(s), data(std::move(d)) {
        if (data.size() != shape.count()) throw std::invalid_argument("tensor: size mismatch");
    }

    static Tensor scalar(Scalar v) {
        Tensor t(Shape{1, 1, 1, 1});
        t.data[0] = v;
        return t;
    }

    Eigen::Index size() const { return data.size(); }
    Scalar& operator()(int n, int c, int y, int x) {
        return data[((static_cast<Eigen::Index>(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }
    Scalar operator()(int n, int c, int y, int x) const {
        return data[((static_cast<Eigen::Index>(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }
    Scalar value() const {
        if (data.size() != 1) throw std::logic_error("tensor: value() on non-scalar");
        return data[0];
    }
};

} // namespace affect::nn
