#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nbcert/interval.hpp"
#include "nbcert/io.hpp"
#include "nbcert/rng.hpp"

namespace nbcert {

enum class Activation { relu, sigmoid, tanh, linear };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::linear: return "linear";
    }
    return "linear";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "tanh") return Activation::tanh;
    if (s == "linear") return Activation::linear;
    throw std::invalid_argument("unknown activation: " + s);
}

inline double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::tanh: return std::tanh(z);
        case Activation::linear: return z;
    }
    return z;
}

inline double activation_derivative(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::linear: return 1.0;
    }
    return 1.0;
}

/// Worst-case slope of the activation: relu/tanh/linear 1, sigmoid 1/4.
inline double activation_lipschitz(Activation a) {
    return a == Activation::sigmoid ? 0.25 : 1.0;
}

/// Dense row-major matrix; the only linear-algebra carrier the library needs.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Layer {
    Matrix w;
    Vec b;
    Activation act = Activation::linear;
};

/// Per-parameter partials, shape-identical to the network. Supports the
/// few vector-space operations the optimizer needs.
struct GradientTape {
    struct LayerGrad {
        Matrix dw;
        Vec db;
    };
    std::vector<LayerGrad> layers;

    void add_scaled(const GradientTape& other, double s) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& dst = layers[l];
            const auto& src = other.layers[l];
            for (std::size_t i = 0; i < dst.dw.data.size(); ++i) dst.dw.data[i] += s * src.dw.data[i];
            for (std::size_t i = 0; i < dst.db.size(); ++i) dst.db[i] += s * src.db[i];
        }
    }

    void scale(double s) {
        for (auto& l : layers) {
            for (double& v : l.dw.data) v *= s;
            for (double& v : l.db) v *= s;
        }
    }

    void zero() {
        for (auto& l : layers) {
            std::fill(l.dw.data.begin(), l.dw.data.end(), 0.0);
            std::fill(l.db.begin(), l.db.end(), 0.0);
        }
    }
};

/// Feed-forward network shared by controllers and barrier candidates.
/// Immutable in spirit: all evaluation paths are const and thread-safe.
class MlpNetwork {
public:
    MlpNetwork() = default;

    MlpNetwork(std::size_t input_dim, std::vector<Layer> layers)
        : input_dim_(input_dim), layers_(std::move(layers)) {
        check_chain();
    }

    /// Fully-connected net with the given hidden widths; deterministic
    /// Xavier-style uniform init from the provided stream.
    static MlpNetwork random(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                             std::size_t output_dim, Activation hidden_act, Activation output_act,
                             Rng& rng, double init_scale = 1.0) {
        std::vector<Layer> layers;
        std::size_t in = input_dim;
        auto mk = [&](std::size_t out, Activation act) {
            Layer l;
            l.w = Matrix(out, in);
            l.b.assign(out, 0.0);
            const double bound = init_scale / std::sqrt(static_cast<double>(in));
            for (double& v : l.w.data) v = rng.uniform(-bound, bound);
            l.act = act;
            layers.push_back(std::move(l));
            in = out;
        };
        for (std::size_t h : hidden) mk(h, hidden_act);
        mk(output_dim, output_act);
        return MlpNetwork(input_dim, std::move(layers));
    }

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return layers_.empty() ? input_dim_ : layers_.back().w.rows; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& mutable_layers() { return layers_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.w.data.size() + l.b.size();
        return n;
    }

    Vec forward(const Vec& x) const {
        if (x.size() != input_dim_)
            throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                        ", expected " + std::to_string(input_dim_));
        Vec cur = x;
        for (const auto& l : layers_) {
            Vec next(l.w.rows);
            for (std::size_t r = 0; r < l.w.rows; ++r) {
                double acc = l.b[r];
                const double* wr = &l.w.data[r * l.w.cols];
                for (std::size_t c = 0; c < l.w.cols; ++c) acc += wr[c] * cur[c];
                next[r] = apply_activation(l.act, acc);
            }
            cur = std::move(next);
        }
        return cur;
    }

    /// Scalar-output convenience.
    double value(const Vec& x) const {
        Vec out = forward(x);
        if (out.size() != 1) throw std::logic_error("value(): network output is not scalar");
        return out[0];
    }

    /// Interval bound propagation. Affine layers move midpoint and radius
    /// separately (radius through |W|); monotone activations are applied
    /// endpoint-wise. The result encloses {forward(x) : x in box}.
    Box ibp(const Box& box) const {
        if (box.dim() != input_dim_)
            throw std::invalid_argument("ibp: box has dimension " + std::to_string(box.dim()) +
                                        ", expected " + std::to_string(input_dim_));
        Vec mid = box.center();
        Vec rad = box.radius();
        for (const auto& l : layers_) {
            Vec nmid(l.w.rows), nrad(l.w.rows);
            for (std::size_t r = 0; r < l.w.rows; ++r) {
                double m = l.b[r], rd = 0.0;
                const double* wr = &l.w.data[r * l.w.cols];
                for (std::size_t c = 0; c < l.w.cols; ++c) {
                    m += wr[c] * mid[c];
                    rd += std::abs(wr[c]) * rad[c];
                }
                const double lo = apply_activation(l.act, m - rd);
                const double hi = apply_activation(l.act, m + rd);
                nmid[r] = 0.5 * (lo + hi);
                nrad[r] = 0.5 * (hi - lo);
            }
            mid = std::move(nmid);
            rad = std::move(nrad);
        }
        Vec lo(mid.size()), hi(mid.size());
        for (std::size_t i = 0; i < mid.size(); ++i) {
            lo[i] = mid[i] - rad[i];
            hi[i] = mid[i] + rad[i];
        }
        return Box(std::move(lo), std::move(hi));
    }

    /// Scalar-output IBP convenience.
    Interval ibp_value(const Box& box) const {
        Box out = ibp(box);
        if (out.dim() != 1) throw std::logic_error("ibp_value(): network output is not scalar");
        return out.axis(0);
    }

    /// Upper bound on the Lipschitz constant of forward w.r.t. the 1-norm
    /// on inputs and outputs: product over layers of the induced 1-norm of
    /// W (max absolute column sum) times the activation slope bound.
    double lipschitz_1norm() const {
        double bound = 1.0;
        for (const auto& l : layers_) {
            double max_col = 0.0;
            for (std::size_t c = 0; c < l.w.cols; ++c) {
                double col = 0.0;
                for (std::size_t r = 0; r < l.w.rows; ++r) col += std::abs(l.w(r, c));
                max_col = std::max(max_col, col);
            }
            bound *= max_col * activation_lipschitz(l.act);
        }
        return bound;
    }

    /// Exact reverse-mode derivative of upstream . forward(x) with respect
    /// to every parameter. relu uses subgradient 0 on the closed negative
    /// side (z <= 0).
    GradientTape gradients(const Vec& x, const Vec& upstream) const {
        if (x.size() != input_dim_) throw std::invalid_argument("gradients: input dimension mismatch");
        if (upstream.size() != output_dim())
            throw std::invalid_argument("gradients: upstream dimension mismatch");

        // forward pass keeping pre-activations and inputs of each layer
        std::vector<Vec> inputs;   // inputs[l] = input to layer l
        std::vector<Vec> preacts;  // preacts[l] = W x + b of layer l
        inputs.reserve(layers_.size());
        preacts.reserve(layers_.size());
        Vec cur = x;
        for (const auto& l : layers_) {
            inputs.push_back(cur);
            Vec z(l.w.rows);
            for (std::size_t r = 0; r < l.w.rows; ++r) {
                double acc = l.b[r];
                const double* wr = &l.w.data[r * l.w.cols];
                for (std::size_t c = 0; c < l.w.cols; ++c) acc += wr[c] * cur[c];
                z[r] = acc;
            }
            preacts.push_back(z);
            Vec a(z.size());
            for (std::size_t r = 0; r < z.size(); ++r) a[r] = apply_activation(l.act, z[r]);
            cur = std::move(a);
        }

        GradientTape tape = zero_tape();
        Vec grad = upstream;  // d(objective)/d(activation of current layer)
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const auto& l = layers_[li];
            Vec gz(l.w.rows);
            for (std::size_t r = 0; r < l.w.rows; ++r)
                gz[r] = grad[r] * activation_derivative(l.act, preacts[li][r]);
            auto& tg = tape.layers[li];
            for (std::size_t r = 0; r < l.w.rows; ++r) {
                tg.db[r] = gz[r];
                double* dwr = &tg.dw.data[r * l.w.cols];
                const Vec& in = inputs[li];
                for (std::size_t c = 0; c < l.w.cols; ++c) dwr[c] = gz[r] * in[c];
            }
            if (li > 0) {
                Vec gprev(l.w.cols, 0.0);
                for (std::size_t r = 0; r < l.w.rows; ++r) {
                    const double* wr = &l.w.data[r * l.w.cols];
                    for (std::size_t c = 0; c < l.w.cols; ++c) gprev[c] += wr[c] * gz[r];
                }
                grad = std::move(gprev);
            }
        }
        return tape;
    }

    GradientTape zero_tape() const {
        GradientTape t;
        t.layers.reserve(layers_.size());
        for (const auto& l : layers_) {
            GradientTape::LayerGrad g;
            g.dw = Matrix(l.w.rows, l.w.cols);
            g.db.assign(l.b.size(), 0.0);
            t.layers.push_back(std::move(g));
        }
        return t;
    }

    void apply_update(const GradientTape& delta, double scale) {
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            auto& l = layers_[li];
            const auto& g = delta.layers[li];
            for (std::size_t i = 0; i < l.w.data.size(); ++i) l.w.data[i] += scale * g.dw.data[i];
            for (std::size_t i = 0; i < l.b.size(); ++i) l.b[i] += scale * g.db[i];
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["input_dim"] = input_dim_;
        j["layers"] = nlohmann::json::array();
        for (const auto& l : layers_) {
            nlohmann::json jl;
            auto w = nlohmann::json::array();
            for (std::size_t r = 0; r < l.w.rows; ++r) {
                auto row = nlohmann::json::array();
                for (std::size_t c = 0; c < l.w.cols; ++c) row.push_back(l.w(r, c));
                w.push_back(std::move(row));
            }
            jl["w"] = std::move(w);
            jl["b"] = l.b;
            jl["act"] = activation_name(l.act);
            j["layers"].push_back(std::move(jl));
        }
        return j;
    }

    static MlpNetwork from_json(const nlohmann::json& j) {
        if (!j.contains("input_dim") || !j.contains("layers"))
            throw std::invalid_argument("weights file: missing input_dim or layers");
        const std::size_t input_dim = j.at("input_dim").get<std::size_t>();
        std::vector<Layer> layers;
        for (const auto& jl : j.at("layers")) {
            Layer l;
            const auto& w = jl.at("w");
            if (!w.is_array() || w.empty()) throw std::invalid_argument("weights file: empty weight matrix");
            const std::size_t rows = w.size();
            const std::size_t cols = w[0].size();
            l.w = Matrix(rows, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                if (w[r].size() != cols)
                    throw std::invalid_argument("weights file: ragged weight matrix");
                for (std::size_t c = 0; c < cols; ++c) l.w(r, c) = w[r][c].get<double>();
            }
            l.b = jl.at("b").get<Vec>();
            if (l.b.size() != rows) throw std::invalid_argument("weights file: bias length mismatch");
            l.act = activation_from_name(jl.at("act").get<std::string>());
            layers.push_back(std::move(l));
        }
        return MlpNetwork(input_dim, std::move(layers));
    }

private:
    void check_chain() const {
        std::size_t in = input_dim_;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            if (l.w.cols != in)
                throw std::invalid_argument("layer " + std::to_string(i) + " expects input dim " +
                                            std::to_string(l.w.cols) + " but gets " + std::to_string(in));
            if (l.b.size() != l.w.rows)
                throw std::invalid_argument("layer " + std::to_string(i) + ": bias/rows mismatch");
            for (double v : l.w.data)
                if (!std::isfinite(v)) throw std::invalid_argument("non-finite weight");
            for (double v : l.b)
                if (!std::isfinite(v)) throw std::invalid_argument("non-finite bias");
            in = l.w.rows;
        }
    }

    std::size_t input_dim_ = 0;
    std::vector<Layer> layers_;
};

inline void save_weights(const MlpNetwork& net, const std::string& path) {
    write_file(path, net.to_json().dump(2) + "\n");
}

inline MlpNetwork load_weights(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("malformed weights file " + path + ": " + e.what());
    }
    return MlpNetwork::from_json(j);
}

}  // namespace nbcert
